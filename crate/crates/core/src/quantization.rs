//! Weyl correspondence on periodic grids.
//!
//! Dense operator matrices, the inverse Weyl map and Wigner functions are
//! small-grid oracles. The exact star product is evaluated in the Fourier
//! domain, where the twisted convolution of two plane waves is a plane wave
//! times the phase `exp(-(i hbar / 2)(p1 q2 - q1 p2))`. The graded expansion
//! `sharp_j` uses spectral derivatives.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jet::{binomial, factorial};
use crate::phase_space::{check_same_grid, to_momentum, PhaseSpaceGrid, PhysicalParams, SpatialGrid, Symbol, WaveFunction};
use crate::spectral;

/// Largest grid accepted by the dense-matrix quantization.
pub const MAX_DENSE_POINTS: usize = 256;
/// Largest phase-space grid accepted by the exact star product.
pub const MAX_EXACT_STAR_NODES: usize = 128 * 128;
/// Largest order of the bidifferential operators.
pub const MAX_SHARP_ORDER: usize = 4;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Dense matrix `K(x_i, x_j) dx` of an integral operator on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    grid: SpatialGrid,
    entries: Array2<Complex64>,
}

impl OperatorMatrix {
    pub fn new(grid: SpatialGrid, entries: Array2<Complex64>) -> Result<Self> {
        if entries.dim() != (grid.len(), grid.len()) {
            return Err(Error::GridMismatch(format!("matrix {:?} on a grid of {} points", entries.dim(), grid.len())));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("operator entries".into()));
        }
        Ok(Self { grid, entries })
    }

    pub fn identity(grid: SpatialGrid) -> Self {
        Self { grid, entries: Array2::eye(grid.len()).mapv(|v: f64| Complex64::new(v, 0.0)) }
    }

    /// Matrix whose columns are `f` applied to the grid basis vectors.
    pub fn from_column_map(grid: SpatialGrid, f: impl Fn(&WaveFunction) -> Result<WaveFunction> + Sync) -> Result<Self> {
        let m = grid.len();
        let cols: Vec<Array1<Complex64>> = (0..m)
            .into_par_iter()
            .map(|j| {
                let mut e = Array1::<Complex64>::zeros(m);
                e[j] = Complex64::new(1.0, 0.0);
                let psi = WaveFunction::new(grid, e)?;
                Ok(f(&psi)?.into_values())
            })
            .collect::<Result<_>>()?;
        let mut entries = Array2::<Complex64>::zeros((m, m));
        for (j, c) in cols.into_iter().enumerate() {
            entries.column_mut(j).assign(&c);
        }
        Self::new(grid, entries)
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn entries(&self) -> &Array2<Complex64> {
        &self.entries
    }

    /// `max |K - K^*|`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let k = &self.entries;
        let m = k.nrows();
        let mut d: f64 = 0.0;
        for i in 0..m {
            for j in 0..m {
                d = d.max((k[[i, j]] - k[[j, i]].conj()).norm());
            }
        }
        d
    }

    pub fn adjoint(&self) -> Self {
        Self { grid: self.grid, entries: self.entries.t().mapv(|z| z.conj()) }
    }

    pub fn matmul(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(Self { grid: self.grid, entries: self.entries.dot(&other.entries) })
    }

    pub fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        check_same_grid(&self.grid, psi.grid())?;
        WaveFunction::new(self.grid, self.entries.dot(psi.values()))
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> Result<f64> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(self.entries.iter().zip(other.entries.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }
}

/// Ensures the momentum axis resolves the quantization kernel of an `x` grid.
fn check_quantization_axes(grid: &PhaseSpaceGrid, params: &PhysicalParams) -> Result<()> {
    let x = grid.x_axis();
    let xi = grid.xi_axis();
    let band = PI * params.hbar() / x.spacing();
    let tol = 1.0 + 1e-12;
    if band > xi.half_width() * tol {
        return Err(Error::Aliasing(format!(
            "grid momentum pi*hbar/dx = {band:.6} lies outside the xi axis [-{0}, {0})",
            xi.half_width()
        )));
    }
    let max_step = PI * params.hbar() / x.half_width();
    if xi.spacing() > max_step * tol {
        return Err(Error::Aliasing(format!(
            "xi spacing {:.6} exceeds pi*hbar/L = {max_step:.6}",
            xi.spacing()
        )));
    }
    Ok(())
}

/// Dense Weyl quantization by quadrature over the momentum axis.
///
/// Midpoints `(x_i + x_j)/2` use the minimal periodic image and are sampled
/// from a band-limited refinement of the symbol along `x`.
pub fn weyl_quantize(tau: &Symbol, params: &PhysicalParams) -> Result<OperatorMatrix> {
    let grid = *tau.grid();
    let x = *grid.x_axis();
    let m = x.len();
    if m > MAX_DENSE_POINTS {
        return Err(Error::CostGuard(format!("dense quantization limited to {MAX_DENSE_POINTS} points, got {m}")));
    }
    check_quantization_axes(&grid, params)?;
    let hbar = params.hbar();
    let dx = x.spacing();
    let xis = grid.xi_axis().nodes();
    let dxi = grid.xi_axis().spacing();
    let refined = spectral::refine_axis0(tau.values());
    let pref = dx * dxi / (2.0 * PI * hbar);
    let half = (m / 2) as i64;
    let mi = m as i64;

    // phases e^{i xi_l d dx / hbar} for d in [-M/2, M/2]
    let phases: Vec<Vec<Complex64>> = (-half..=half)
        .map(|d| xis.iter().map(|&xi| Complex64::from_polar(1.0, xi * d as f64 * dx / hbar)).collect())
        .collect();

    let rows: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            (0..m)
                .map(|j| {
                    let (mut d, mut n) = (i as i64 - j as i64, (i + j) as i64);
                    if d > half {
                        d -= mi;
                        n -= mi;
                    } else if d < -half {
                        d += mi;
                        n += mi;
                    }
                    let n = n.rem_euclid(2 * mi) as usize;
                    let ph = &phases[(d + half) as usize];
                    let s: Complex64 = refined.row(n).iter().zip(ph).map(|(t, p)| t * p).sum();
                    s * pref
                })
                .collect()
        })
        .collect();
    let mut entries = Array2::<Complex64>::zeros((m, m));
    for (i, r) in rows.into_iter().enumerate() {
        for (j, v) in r.into_iter().enumerate() {
            entries[[i, j]] = v;
        }
    }
    OperatorMatrix::new(x, entries)
}

/// Largest `|xi|` at which [`weyl_symbol`] is free of lattice images.
pub fn inverse_weyl_band(x: &SpatialGrid, params: &PhysicalParams) -> f64 {
    PI * params.hbar() / (2.0 * x.spacing())
}

/// Weyl symbol of an operator at grid node `i`, for the given momenta:
/// `tau(x_i, xi) = 2 sum_m A[i+m, i-m] exp(-2 i xi m dx / hbar)` over
/// non-wrapped index pairs.
pub fn weyl_symbol_at(op: &OperatorMatrix, i: usize, xis: &[f64], params: &PhysicalParams) -> Vec<Complex64> {
    let m = op.grid.len();
    let dx = op.grid.spacing();
    let hbar = params.hbar();
    let reach = i.min(m - 1 - i) as i64;
    xis.iter()
        .map(|&xi| {
            let mut s = ZERO;
            for k in -reach..=reach {
                let a = op.entries[[(i as i64 + k) as usize, (i as i64 - k) as usize]];
                s += a * Complex64::from_polar(2.0, -2.0 * xi * k as f64 * dx / hbar);
            }
            s
        })
        .collect()
}

/// Inverse Weyl map onto a phase-space grid whose momenta satisfy
/// `|xi| < pi hbar / (2 dx)`.
pub fn weyl_symbol(op: &OperatorMatrix, grid: &PhaseSpaceGrid, params: &PhysicalParams) -> Result<Symbol> {
    check_same_grid(&op.grid, grid.x_axis())?;
    let band = inverse_weyl_band(grid.x_axis(), params);
    if grid.xi_axis().half_width() > band * (1.0 + 1e-12) {
        return Err(Error::Aliasing(format!(
            "inverse Weyl map needs |xi| <= {band:.6}, axis reaches {}",
            grid.xi_axis().half_width()
        )));
    }
    let xis = grid.xi_axis().nodes();
    let m = grid.x_axis().len();
    let rows: Vec<Vec<Complex64>> = (0..m).into_par_iter().map(|i| weyl_symbol_at(op, i, &xis, params)).collect();
    let values = Array2::from_shape_fn(grid.shape(), |(i, j)| rows[i][j]);
    Symbol::new(*grid, values)
}

/// Wigner function `W(x, xi) = (2 pi hbar)^{-1} int psi*(x - s/2) psi(x + s/2) e^{-i xi s / hbar} ds`.
pub fn wigner_transform(psi: &WaveFunction, params: &PhysicalParams, grid: &PhaseSpaceGrid) -> Result<Symbol> {
    check_same_grid(psi.grid(), grid.x_axis())?;
    let x = *grid.x_axis();
    let hbar = params.hbar();
    let band = PI * hbar / x.spacing();
    if grid.xi_axis().half_width() > band * (1.0 + 1e-12) {
        return Err(Error::Aliasing(format!(
            "xi axis [-{0}, {0}) exceeds the grid momentum band {band:.6}",
            grid.xi_axis().half_width()
        )));
    }
    let total = psi.norm_sqr();
    if total > 0.0 {
        let phi = to_momentum(psi);
        let lim = grid.xi_axis().half_width();
        let outside: f64 = phi
            .wavenumbers()
            .iter()
            .zip(phi.values().iter())
            .filter(|(k, _)| (hbar * **k).abs() > lim)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            * x.dual_spacing();
        if outside > 1e-10 * total {
            return Err(Error::Aliasing(format!(
                "{:.3e} of the momentum mass lies outside the xi axis",
                outside / total
            )));
        }
    }

    let m = x.len();
    let dx = x.spacing();
    let col = psi.values().view().insert_axis(Axis(1)).to_owned();
    let refined: Vec<Complex64> = spectral::refine_axis0(&col).column(0).to_vec();
    let two_m = 2 * m;
    let peak = refined.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let floor = peak * 1e-30;
    let xis = grid.xi_axis().nodes();
    let pref = dx / (2.0 * PI * hbar);

    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let c = 2 * i;
            let mut terms: Vec<(f64, Complex64)> = Vec::new();
            // separations below L keep the lattice image at x + L out of the sum
            for n in 1..m / 2 {
                let lo = refined[(c + two_m - n) % two_m];
                let hi = refined[(c + n) % two_m];
                let p = lo.conj() * hi;
                if p.norm_sqr() > floor * floor {
                    terms.push((n as f64 * dx / hbar, p));
                }
            }
            let center = refined[c].norm_sqr();
            xis.iter()
                .map(|&xi| {
                    let mut s = center;
                    for &(w, p) in &terms {
                        s += 2.0 * (p * Complex64::from_polar(1.0, -xi * w)).re;
                    }
                    s * pref
                })
                .collect()
        })
        .collect();
    let values = Array2::from_shape_fn(grid.shape(), |(i, j)| Complex64::new(rows[i][j], 0.0));
    Symbol::new(*grid, values)
}

/// Fourier coefficients `c_{pq}` with `f(x, xi) = sum c_{pq} exp(i(p x + q xi))` on the nodes.
fn plane_wave_coefficients(field: &Array2<Complex64>, grid: &PhaseSpaceGrid) -> (Array2<Complex64>, Vec<f64>, Vec<f64>) {
    let (mx, mk) = grid.shape();
    let p = spectral::wavenumbers(mx, grid.x_axis().spacing());
    let q = spectral::wavenumbers(mk, grid.xi_axis().spacing());
    let (x0, k0) = (grid.x_axis().node(0), grid.xi_axis().node(0));
    let mut hat = field.clone();
    spectral::forward_2d(&mut hat);
    let scale = 1.0 / (mx * mk) as f64;
    for ((i, j), z) in hat.indexed_iter_mut() {
        *z *= Complex64::from_polar(scale, -(p[i] * x0 + q[j] * k0));
    }
    (hat, p, q)
}

/// Wavenumbers per FFT index; the Nyquist mode is split evenly between
/// `+-pi/d` so that real samples have real interpolants.
fn representatives(m: usize, d: f64) -> Vec<Vec<(f64, f64)>> {
    let ks = spectral::wavenumbers(m, d);
    let ny = spectral::nyquist(m);
    ks.iter()
        .enumerate()
        .map(|(n, &k)| if Some(n) == ny { vec![(k, 0.5), (-k, 0.5)] } else { vec![(k, 1.0)] })
        .collect()
}

/// Exact star product of the trigonometric interpolants of `f` and `g`.
///
/// Cost is one 2D FFT per significant Fourier mode of `f`.
pub fn twisted_convolution_exact(f: &Symbol, g: &Symbol, params: &PhysicalParams) -> Result<Symbol> {
    f.check_grid(g)?;
    let grid = *f.grid();
    let (mx, mk) = grid.shape();
    if mx * mk > MAX_EXACT_STAR_NODES {
        return Err(Error::CostGuard(format!(
            "exact star product limited to {MAX_EXACT_STAR_NODES} nodes, got {}",
            mx * mk
        )));
    }
    let hbar = params.hbar();
    let (fh, p, q) = plane_wave_coefficients(f.values(), &grid);
    let (gh, _, _) = plane_wave_coefficients(g.values(), &grid);
    let (x0, k0) = (grid.x_axis().node(0), grid.xi_axis().node(0));
    let xs = grid.x_axis().nodes();
    let ks = grid.xi_axis().nodes();

    // g coefficients re-phased so that an inverse FFT samples on the nodes
    let gh_nodes = Array2::from_shape_fn((mx, mk), |(i, j)| gh[[i, j]] * Complex64::from_polar((mx * mk) as f64, p[i] * x0 + q[j] * k0));
    let fmax = fh.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let modes: Vec<(usize, usize)> = fh
        .indexed_iter()
        .filter(|(_, z)| z.norm() > 1e-18 * fmax)
        .map(|(ij, _)| ij)
        .collect();

    let rx = representatives(mx, grid.x_axis().spacing());
    let rq = representatives(mk, grid.xi_axis().spacing());
    let mut terms: Vec<(f64, f64, Complex64)> = Vec::new();
    for &(a, b) in &modes {
        for &(p1, w1) in &rx[a] {
            for &(q1, w2) in &rq[b] {
                terms.push((p1, q1, fh[[a, b]] * (w1 * w2)));
            }
        }
    }

    let chunk = 64;
    let partials: Vec<Array2<Complex64>> = terms
        .par_chunks(chunk)
        .map(|block| {
            let mut acc = Array2::<Complex64>::zeros((mx, mk));
            let mut buf = Array2::<Complex64>::zeros((mx, mk));
            for &(p1, q1, c) in block {
                for ((i, j), z) in buf.indexed_iter_mut() {
                    let mut ph = ZERO;
                    for &(pp, u) in &rx[i] {
                        for &(qq, v) in &rq[j] {
                            ph += Complex64::from_polar(u * v, -0.5 * hbar * (p1 * qq - q1 * pp));
                        }
                    }
                    *z = gh_nodes[[i, j]] * ph;
                }
                spectral::inverse_2d(&mut buf);
                for ((i, j), z) in acc.indexed_iter_mut() {
                    *z += c * Complex64::from_polar(1.0, p1 * xs[i] + q1 * ks[j]) * buf[[i, j]];
                }
            }
            acc
        })
        .collect();
    let mut out = Array2::<Complex64>::zeros((mx, mk));
    for part in &partials {
        out += part;
    }
    Symbol::new(grid, out)
}

/// Fraction of spectral energy carried by the top 10% of wavenumbers along either axis.
pub fn spectral_tail_fraction(s: &Symbol) -> f64 {
    let (mx, mk) = s.grid().shape();
    let mut hat = s.values().clone();
    spectral::forward_2d(&mut hat);
    let high = |n: usize, m: usize| {
        let k = n.min(m - n);
        k as f64 > 0.4 * m as f64
    };
    let (mut tail, mut total) = (0.0, 0.0);
    for ((i, j), z) in hat.indexed_iter() {
        let e = z.norm_sqr();
        total += e;
        if high(i, mx) || high(j, mk) {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}

fn warn_if_rough(s: &Symbol, name: &str) {
    let frac = spectral_tail_fraction(s);
    if frac > 0.01 {
        log::warn!("{name}: {:.1}% of spectral energy in the top 10% of modes", 100.0 * frac);
    }
}

fn spectral_derivative(s: &Symbol, a: usize, b: usize) -> Array2<Complex64> {
    let g = s.grid();
    spectral::mixed_derivative(s.values(), a, b, g.x_axis().spacing(), g.xi_axis().spacing())
}

/// `sum_r C(j,r) (-1)^(j-r) (d_x^r d_xi^(j-r) f)(d_xi^r d_x^(j-r) g)` with spectral derivatives.
pub fn sharp_j(f: &Symbol, g: &Symbol, j: usize) -> Result<Symbol> {
    f.check_grid(g)?;
    if j > MAX_SHARP_ORDER {
        return Err(Error::OrderTooLarge { order: j, max: MAX_SHARP_ORDER });
    }
    if j > 0 {
        warn_if_rough(f, "sharp_j left factor");
        warn_if_rough(g, "sharp_j right factor");
    }
    let mut out = Array2::<Complex64>::zeros(f.grid().shape());
    for r in 0..=j {
        let sign = if (j - r) % 2 == 0 { 1.0 } else { -1.0 };
        let df = spectral_derivative(f, r, j - r);
        let dg = spectral_derivative(g, j - r, r);
        out.zip_mut_with(&(df * dg), |o, v| *o += v * (sign * binomial(j, r)));
    }
    Symbol::new(*f.grid(), out)
}

/// `sum_j hbar^j c_j` with hbar-free coefficients on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedSymbol {
    coeffs: Vec<Symbol>,
}

impl GradedSymbol {
    pub fn new(coeffs: Vec<Symbol>) -> Result<Self> {
        let first = coeffs.first().ok_or_else(|| Error::InvalidParameter("graded symbol needs at least one coefficient".into()))?;
        for c in &coeffs[1..] {
            first.check_grid(c)?;
        }
        Ok(Self { coeffs })
    }

    /// `[s, 0, ..., 0]` of order `order`.
    pub fn leading(s: Symbol, order: usize) -> Self {
        let grid = *s.grid();
        let mut coeffs = vec![s];
        coeffs.extend((0..order).map(|_| Symbol::zeros(grid)));
        Self { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Symbol] {
        &self.coeffs
    }

    pub fn coeff(&self, j: usize) -> &Symbol {
        &self.coeffs[j]
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        self.coeffs[0].grid()
    }

    /// `sum_j hbar^j c_j` for `j <= upto`.
    pub fn sum(&self, hbar: f64, upto: usize) -> Symbol {
        let mut out = self.coeffs[0].values().clone();
        for (j, c) in self.coeffs.iter().enumerate().skip(1).take(upto) {
            out.scaled_add(Complex64::new(hbar.powi(j as i32), 0.0), c.values());
        }
        Symbol::from_parts_unchecked(*self.grid(), out)
    }
}

/// Graded composition `c_i = sum_{l+p+q=i} (i/2)^l / l! sharp_l(f_p, g_q)`, `i <= order`.
pub fn star_truncated(f: &GradedSymbol, g: &GradedSymbol, order: usize) -> Result<GradedSymbol> {
    f.coeffs[0].check_grid(&g.coeffs[0])?;
    if order > MAX_SHARP_ORDER {
        return Err(Error::OrderTooLarge { order, max: MAX_SHARP_ORDER });
    }
    let grid = *f.grid();
    let mut coeffs = Vec::with_capacity(order + 1);
    for i in 0..=order {
        let mut acc = Array2::<Complex64>::zeros(grid.shape());
        for l in 0..=i {
            let w = Complex64::new(0.0, 0.5).powu(l as u32) / factorial(l);
            for p in 0..=(i - l).min(f.order()) {
                let q = i - l - p;
                if q > g.order() {
                    continue;
                }
                let s = sharp_j(&f.coeffs[p], &g.coeffs[q], l)?;
                acc.scaled_add(w, s.values());
            }
        }
        coeffs.push(Symbol::from_parts_unchecked(grid, acc));
    }
    Ok(GradedSymbol { coeffs })
}

/// `star_truncated(f, g) - star_truncated(g, f)`.
pub fn moyal_bracket_truncated(f: &GradedSymbol, g: &GradedSymbol, order: usize) -> Result<GradedSymbol> {
    let fg = star_truncated(f, g, order)?;
    let gf = star_truncated(g, f, order)?;
    let coeffs = fg
        .coeffs
        .iter()
        .zip(&gf.coeffs)
        .map(|(a, b)| a.combine(Complex64::new(1.0, 0.0), b, Complex64::new(-1.0, 0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(GradedSymbol { coeffs })
}
