//! Free propagation, the classical flow, symbol transport and the
//! Dirichlet-confined evolution on an interval.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, Axis};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phase_space::{check_boundary_mass_against, check_same_grid, PhysicalParams, SpatialGrid, Symbol, WaveFunction};
use crate::quantization::OperatorMatrix;
use crate::spectral;
use crate::symbols::{transported_symbol, MollifiedIndicator, MollifierTransport, Region};

/// `exp(-i t H / hbar)` for `H = -hbar^2 d^2/dx^2 / (2m)` as a momentum-space multiplier.
#[derive(Debug, Clone)]
pub struct FreePropagator {
    grid: SpatialGrid,
    multipliers: Vec<Complex64>,
}

impl FreePropagator {
    pub fn new(grid: SpatialGrid, params: &PhysicalParams, t: f64) -> Self {
        let (hbar, m) = (params.hbar(), params.mass());
        let multipliers = spectral::wavenumbers(grid.len(), grid.spacing())
            .into_iter()
            .map(|k| Complex64::from_polar(1.0, -hbar * k * k * t / (2.0 * m)))
            .collect();
        Self { grid, multipliers }
    }

    /// Propagate without the boundary-mass check.
    pub fn apply_unchecked(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        check_same_grid(&self.grid, psi.grid())?;
        let mut buf = psi.values().to_vec();
        self.apply_slice(&mut buf);
        Ok(psi.with_values(Array1::from(buf)))
    }

    pub(crate) fn apply_slice(&self, buf: &mut [Complex64]) {
        spectral::forward(buf);
        for (z, u) in buf.iter_mut().zip(&self.multipliers) {
            *z *= u;
        }
        spectral::inverse(buf);
    }

    /// Propagate, refusing states that touch the outer band of the grid
    /// before or after the step.
    pub fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        self.apply_with_reference(psi, psi.norm_sqr())
    }

    /// As [`apply`](Self::apply), with boundary mass measured relative to `reference_norm_sqr`.
    pub fn apply_with_reference(&self, psi: &WaveFunction, reference_norm_sqr: f64) -> Result<WaveFunction> {
        check_boundary_mass_against(psi, reference_norm_sqr)?;
        let out = self.apply_unchecked(psi)?;
        check_boundary_mass_against(&out, reference_norm_sqr)?;
        Ok(out)
    }
}

/// `U(t) psi` with boundary-mass monitoring.
pub fn free_propagate(psi: &WaveFunction, t: f64, params: &PhysicalParams) -> Result<WaveFunction> {
    FreePropagator::new(*psi.grid(), params, t).apply(psi)
}

/// Dense matrix of `U(t)` on the grid.
pub fn propagator_matrix(grid: SpatialGrid, params: &PhysicalParams, t: f64) -> Result<OperatorMatrix> {
    let u = FreePropagator::new(grid, params, t);
    OperatorMatrix::from_column_map(grid, |e| u.apply_unchecked(e))
}

/// `U(t)^* A U(t)`.
pub fn heisenberg_operator(op: &OperatorMatrix, params: &PhysicalParams, t: f64) -> Result<OperatorMatrix> {
    let u = propagator_matrix(*op.grid(), params, t)?;
    u.adjoint().matmul(op)?.matmul(&u)
}

/// Hamiltonian flow of the free particle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowMap {
    params: PhysicalParams,
}

impl FlowMap {
    pub fn new(params: PhysicalParams) -> Self {
        Self { params }
    }

    /// `(x + xi t / m, xi)`.
    pub fn at(&self, x: f64, xi: f64, t: f64) -> (f64, f64) {
        (x + xi * t / self.params.mass(), xi)
    }
}

pub fn classical_flow(x: f64, xi: f64, t: f64, params: &PhysicalParams) -> (f64, f64) {
    FlowMap::new(*params).at(x, xi, t)
}

/// How a transported symbol was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransportMethod {
    ClosedForm,
    /// Band-limited shift along x, row by row in xi.
    SpectralShift,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransportedSymbol {
    pub symbol: Symbol,
    pub method: TransportMethod,
}

/// `tau(x + xi t / m, xi)`.
pub fn heisenberg_symbol(tau: &Symbol, t: f64, params: &PhysicalParams) -> Result<TransportedSymbol> {
    let grid = *tau.grid();
    if let Some(cf) = tau.closed_form() {
        let moved = MollifierTransport {
            mollifier: cf.mollifier,
            shift_per_momentum: cf.shift_per_momentum + t / params.mass(),
        };
        return Ok(TransportedSymbol { symbol: transported_symbol(moved, &grid)?, method: TransportMethod::ClosedForm });
    }

    let x = grid.x_axis();
    let xis = grid.xi_axis().nodes();
    let (lo_x, hi_x) = (x.node(0), x.node(x.len() - 1));
    let floor = 1e-13 * tau.max_abs();
    let ks = spectral::wavenumbers(x.len(), x.spacing());
    let mut out = Array2::<Complex64>::zeros(grid.shape());
    for (j, &xi) in xis.iter().enumerate() {
        let col = tau.values().column(j);
        let shift = xi * t / params.mass();
        let support: Vec<usize> = (0..x.len()).filter(|&i| col[i].norm() > floor).collect();
        if let (Some(&first), Some(&last)) = (support.first(), support.last()) {
            let (a, b) = (x.node(first) - shift, x.node(last) - shift);
            if a < lo_x || b > hi_x {
                return Err(Error::FlowExitsGrid(format!(
                    "at xi = {xi} the support moves to [{a:.4}, {b:.4}], outside [{lo_x}, {hi_x}]"
                )));
            }
        }
        let mut buf = col.to_vec();
        spectral::forward(&mut buf);
        let ny = spectral::nyquist(x.len());
        for (n, (z, k)) in buf.iter_mut().zip(&ks).enumerate() {
            if Some(n) == ny {
                *z *= (k * shift).cos();
            } else {
                *z *= Complex64::from_polar(1.0, k * shift);
            }
        }
        spectral::inverse(&mut buf);
        out.index_axis_mut(Axis(1), j).assign(&Array1::from(buf));
    }
    Ok(TransportedSymbol { symbol: Symbol::new(grid, out)?, method: TransportMethod::SpectralShift })
}

/// Orthonormality tolerance of the sampled sine modes.
pub const GRAM_TOLERANCE: f64 = 1e-8;
/// Minimum fraction of `|P psi|^2` the basis must capture.
pub const CAPTURE_THRESHOLD: f64 = 1.0 - 1e-8;

/// Sampled Dirichlet eigenfunctions `sqrt(2/delta) sin(k pi (x-a)/delta)` on an interval.
#[derive(Debug, Clone)]
pub struct DirichletBasis {
    region: Region,
    grid: SpatialGrid,
    hbar: f64,
    modes: Array2<f64>,
    energies: Vec<f64>,
    gram_deviation: f64,
}

impl DirichletBasis {
    /// Largest usable mode count: sampled modes beyond the interior node count alias.
    pub fn max_modes(region: &Region, grid: &SpatialGrid) -> usize {
        let interior = grid.nodes().iter().filter(|&&x| region.a() < x && x < region.b()).count();
        interior.min(grid.len() / 2)
    }

    pub fn new(region: Region, grid: SpatialGrid, params: &PhysicalParams, modes: usize) -> Result<Self> {
        let cap = Self::max_modes(&region, &grid);
        if modes == 0 || modes > cap {
            return Err(Error::InvalidParameter(format!("mode count must be in 1..={cap}, got {modes}")));
        }
        let delta = region.diameter();
        let xs = grid.nodes();
        let norm = (2.0 / delta).sqrt();
        let table = Array2::from_shape_fn((modes, grid.len()), |(k, i)| {
            let x = xs[i];
            if region.contains(x) {
                norm * ((k + 1) as f64 * PI * (x - region.a()) / delta).sin()
            } else {
                0.0
            }
        });
        let (hbar, m) = (params.hbar(), params.mass());
        let energies = (1..=modes)
            .map(|k| hbar * hbar * PI * PI * (k * k) as f64 / (2.0 * m * delta * delta))
            .collect();
        let dx = grid.spacing();
        let gram = table.dot(&table.t()) * dx;
        let gram_deviation = gram
            .indexed_iter()
            .map(|((i, j), v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max);
        if gram_deviation > GRAM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "sampled sine modes are not orthonormal (deviation {gram_deviation:.2e}); place the interval ends on grid nodes"
            )));
        }
        Ok(Self { region, grid, hbar, modes: table, energies, gram_deviation })
    }

    /// Smallest basis capturing `CAPTURE_THRESHOLD` of `|P psi|^2`.
    pub fn for_state(region: Region, grid: SpatialGrid, params: &PhysicalParams, psi: &WaveFunction) -> Result<Self> {
        let cap = Self::max_modes(&region, &grid);
        let full = Self::new(region, grid, params, cap)?;
        let coeffs = full.coefficients(psi)?;
        let target = project_sharp(&region, psi).norm_sqr();
        if target == 0.0 {
            return Self::new(region, grid, params, 1);
        }
        let mut acc = 0.0;
        for (k, c) in coeffs.iter().enumerate() {
            acc += c.norm_sqr();
            if acc >= CAPTURE_THRESHOLD * target {
                return Self::new(region, grid, params, k + 1);
            }
        }
        Err(Error::BasisCapture { captured: acc / target, modes: cap })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn gram_deviation(&self) -> f64 {
        self.gram_deviation
    }

    /// Sampled mode `k` (1-based).
    pub fn mode(&self, k: usize) -> Result<WaveFunction> {
        if k == 0 || k > self.len() {
            return Err(Error::InvalidParameter(format!("mode index {k} outside 1..={}", self.len())));
        }
        WaveFunction::new(self.grid, self.modes.row(k - 1).mapv(|v| Complex64::new(v, 0.0)))
    }

    /// `<phi_k, psi>` for every mode.
    pub fn coefficients(&self, psi: &WaveFunction) -> Result<Vec<Complex64>> {
        check_same_grid(&self.grid, psi.grid())?;
        let dx = self.grid.spacing();
        Ok(self
            .modes
            .rows()
            .into_iter()
            .map(|row| row.iter().zip(psi.values().iter()).map(|(p, z)| z * *p).sum::<Complex64>() * dx)
            .collect())
    }

    fn synthesize(&self, coeffs: &[Complex64]) -> Result<WaveFunction> {
        let mut out = Array1::<Complex64>::zeros(self.grid.len());
        for (row, c) in self.modes.rows().into_iter().zip(coeffs) {
            out.zip_mut_with(&row, |o, p| *o += c * *p);
        }
        WaveFunction::new(self.grid, out)
    }

    /// Fraction of `|P psi|^2` carried by the basis.
    pub fn capture(&self, psi: &WaveFunction) -> Result<f64> {
        let target = project_sharp(&self.region, psi).norm_sqr();
        if target == 0.0 {
            return Ok(1.0);
        }
        let got: f64 = self.coefficients(psi)?.iter().map(|c| c.norm_sqr()).sum();
        Ok(got / target)
    }
}

/// `exp(-i t H_Omega / hbar) P psi` in the sine basis.
pub fn dirichlet_evolve(psi: &WaveFunction, basis: &DirichletBasis, t: f64) -> Result<WaveFunction> {
    let coeffs = basis.coefficients(psi)?;
    let target = project_sharp(&basis.region, psi).norm_sqr();
    let got: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
    if target > 0.0 && got < CAPTURE_THRESHOLD * target {
        return Err(Error::BasisCapture { captured: got / target, modes: basis.len() });
    }
    let evolved: Vec<Complex64> = coeffs
        .iter()
        .zip(&basis.energies)
        .map(|(c, e)| c * Complex64::from_polar(1.0, -e * t / basis.hbar))
        .collect();
    basis.synthesize(&evolved)
}

/// A position measurement: sharp indicator or smooth cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projector {
    Sharp(Region),
    Mollified(MollifiedIndicator),
}

impl Projector {
    pub fn weight(&self, x: f64) -> f64 {
        match self {
            Projector::Sharp(r) => r.indicator(x),
            Projector::Mollified(m) => m.eval(x),
        }
    }

    pub fn weights(&self, grid: &SpatialGrid) -> Vec<f64> {
        grid.nodes().into_iter().map(|x| self.weight(x)).collect()
    }

    /// Transition width, zero for the sharp projector.
    pub fn eps(&self) -> f64 {
        match self {
            Projector::Sharp(_) => 0.0,
            Projector::Mollified(m) => m.eps(),
        }
    }

    pub fn project(&self, psi: &WaveFunction) -> WaveFunction {
        let w = self.weights(psi.grid());
        let values = psi.values().iter().zip(&w).map(|(z, v)| z * *v).collect::<Array1<_>>();
        psi.with_values(values)
    }
}

pub fn project(psi: &WaveFunction, cutoff: &Projector) -> WaveFunction {
    cutoff.project(psi)
}

fn project_sharp(region: &Region, psi: &WaveFunction) -> WaveFunction {
    Projector::Sharp(*region).project(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::{inner_product, make_grid, PhaseSpaceGrid};
    use crate::quantization::{inverse_weyl_band, weyl_quantize, weyl_symbol};
    use crate::symbols::{shifted_symbol, symbol_from_mollifier};
    use rand::{Rng, SeedableRng};

    fn params(hbar: f64) -> PhysicalParams {
        PhysicalParams::new(hbar, 1.0).unwrap()
    }

    fn random_packet(grid: SpatialGrid, seed: u64, p: &PhysicalParams) -> WaveFunction {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut out = Array1::<Complex64>::zeros(grid.len());
        for _ in 0..3 {
            let c = rng.random_range(-1.0..1.0);
            let s = rng.random_range(0.2..0.5);
            let k = rng.random_range(-1.0..1.0);
            let amp = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let g = WaveFunction::gaussian(grid, c, s, k, p).unwrap();
            out = out + g.values() * amp;
        }
        WaveFunction::new(grid, out).unwrap().normalized()
    }

    #[test]
    fn plane_wave_picks_up_phase() {
        let g = make_grid(4.0, 64).unwrap();
        let p = params(0.3);
        let k = g.dual_nodes()[40];
        let psi = WaveFunction::from_fn(g, |x| Complex64::from_polar(1.0, k * x)).unwrap();
        let t = 0.7;
        let out = FreePropagator::new(g, &p, t).apply_unchecked(&psi).unwrap();
        let phase = Complex64::from_polar(1.0, -p.hbar() * k * k * t / 2.0);
        for (a, b) in out.values().iter().zip(psi.values().iter()) {
            assert!((a - b * phase).norm() < 1e-12);
        }
    }

    #[test]
    fn gaussian_spreads_as_closed_form() {
        let g = make_grid(10.0, 512).unwrap();
        let p = params(0.5);
        let (x0, s, p0, t) = (-1.0, 0.4, 0.8, 1.5);
        let psi = WaveFunction::gaussian(g, x0, s, p0, &p).unwrap();
        let out = free_propagate(&psi, t, &p).unwrap();
        let h = p.hbar();
        // psi_t = (2 pi)^{-1/4} (s + i h t / (2 s))^{-1/2}
        //   exp(-(x - x0 - p0 t)^2 / (4 s (s + i h t/(2 s))) + i p0 (x - p0 t / 2) / h)
        let st = Complex64::new(s, h * t / (2.0 * s));
        let amp = (2.0 * PI).powf(-0.25) / st.sqrt();
        let exact = |x: f64| {
            let d = x - x0 - p0 * t;
            amp * (-d * d / (4.0 * s * st)).exp() * Complex64::from_polar(1.0, p0 * (x - p0 * t / 2.0) / h)
        };
        for (x, z) in g.nodes().iter().zip(out.values().iter()) {
            assert!((z - exact(*x)).norm() < 1e-8, "x={x}");
        }
        // width^2 = s^2 + (h t / (2 m s))^2
        let var: f64 = g.nodes().iter().zip(out.values().iter()).map(|(x, z)| (x - x0 - p0 * t).powi(2) * z.norm_sqr()).sum::<f64>() * g.spacing();
        assert!((var - (s * s + (h * t / (2.0 * s)).powi(2))).abs() < 1e-8);
    }

    #[test]
    fn propagator_is_unitary_group() {
        let g = make_grid(6.0, 256).unwrap();
        let p = params(0.2);
        for seed in 0..5 {
            let psi = random_packet(g, seed, &p);
            let a = free_propagate(&psi, 0.3, &p).unwrap();
            assert!((a.norm() - psi.norm()).abs() < 1e-12);
            let ab = free_propagate(&a, 0.5, &p).unwrap();
            let direct = free_propagate(&psi, 0.8, &p).unwrap();
            assert!(ab.max_abs_diff(&direct).unwrap() < 1e-12);
            let id = free_propagate(&psi, 0.0, &p).unwrap();
            assert!(id.max_abs_diff(&psi).unwrap() < 1e-15);
        }
    }

    #[test]
    fn boundary_mass_guard() {
        let g = make_grid(4.0, 256).unwrap();
        let p = params(1.0);
        let psi = WaveFunction::gaussian(g, 3.8, 0.2, 0.0, &p).unwrap();
        assert!(matches!(free_propagate(&psi, 0.1, &p), Err(Error::BoundaryMass { .. })));
    }

    #[test]
    fn flow_examples() {
        let p = params(1.0);
        assert_eq!(classical_flow(0.5, 1.0, 2.0, &p), (2.5, 1.0));
        assert_eq!(classical_flow(0.3, -0.7, 0.0, &p), (0.3, -0.7));
        let (x, xi) = classical_flow(0.25, 0.5, 1.5, &p);
        assert_eq!(classical_flow(x, xi, -1.5, &p), (0.25, 0.5));
        let f = FlowMap::new(p);
        let (a, b) = f.at(0.25, 0.5, 0.5);
        assert_eq!(f.at(a, b, 1.0), f.at(0.25, 0.5, 1.5));
        // unit Jacobian: the image of a grid cell has the same area
        let (x1, _) = f.at(1.0, 0.0, 2.0);
        let (x2, _) = f.at(1.0, 0.5, 2.0);
        let (x3, _) = f.at(1.5, 0.5, 2.0);
        let sheared = (x3 - x2) * 0.5;
        assert_eq!(sheared, 0.5 * 0.5);
        assert_eq!(x1, 1.0);
    }

    #[test]
    fn closed_form_transport_matches_shifted_symbol() {
        let p = params(1.0);
        let grid = PhaseSpaceGrid::new(make_grid(6.0, 128).unwrap(), make_grid(2.0, 32).unwrap());
        let m = MollifiedIndicator::new(Region::new(0.0, 1.0).unwrap(), 0.2).unwrap();
        let base = symbol_from_mollifier(&m, &grid).unwrap();
        let same = heisenberg_symbol(&base, 0.0, &p).unwrap();
        assert_eq!(same.symbol.values(), base.values());
        let (n, t) = (4, 1.2);
        for k in 0..=n {
            let s = k as f64 * t / n as f64;
            let h = heisenberg_symbol(&base, s, &p).unwrap();
            assert_eq!(h.method, TransportMethod::ClosedForm);
            let sh = shifted_symbol(&m, k, n, t, &p, &grid).unwrap();
            assert!(h.symbol.max_abs_diff(&sh).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn spectral_transport_of_gaussian() {
        let p = params(1.0);
        let grid = PhaseSpaceGrid::new(make_grid(8.0, 128).unwrap(), make_grid(3.0, 32).unwrap());
        let tau = |x: f64, xi: f64| (-(x - 0.2).powi(2) / 0.5 - (xi - 0.3).powi(2) / 2.0).exp();
        let s = Symbol::from_real_fn(grid, tau).unwrap();
        let t = 0.9;
        let h = heisenberg_symbol(&s, t, &p).unwrap();
        assert_eq!(h.method, TransportMethod::SpectralShift);
        let exact = Symbol::from_real_fn(grid, |x, xi| tau(x + xi * t, xi)).unwrap();
        assert!(h.symbol.max_abs_diff(&exact).unwrap() < 1e-10);
        assert!(matches!(heisenberg_symbol(&s, 10.0, &p), Err(Error::FlowExitsGrid(_))));
    }

    #[test]
    fn egorov_matrix_conjugation() {
        let p = params(1.0);
        let x = make_grid(8.0, 64).unwrap();
        let full = PhaseSpaceGrid::dual(x, &p).unwrap();
        let half = PhaseSpaceGrid::new(x, make_grid(inverse_weyl_band(&x, &p), 64).unwrap());
        let tau = |x: f64, xi: f64| Complex64::new((-(x - 0.2).powi(2) / 2.0 - (xi - 0.3).powi(2) / 2.0).exp(), 0.0);
        let op = weyl_quantize(&Symbol::from_fn(full, tau).unwrap(), &p).unwrap();
        for t in [0.2, 0.5] {
            let evolved = heisenberg_operator(&op, &p, t).unwrap();
            let sym = weyl_symbol(&evolved, &half, &p).unwrap();
            let exact = Symbol::from_fn(half, |x, xi| tau(x + xi * t, xi)).unwrap();
            let xs = x.nodes();
            let mut worst: f64 = 0.0;
            for i in 0..64 {
                if xs[i].abs() < 5.0 {
                    for j in 0..64 {
                        worst = worst.max((sym.values()[[i, j]] - exact.values()[[i, j]]).norm());
                    }
                }
            }
            assert!(worst < 1e-5, "t={t}: {worst}");
        }
    }

    fn unit_basis(p: &PhysicalParams, modes: usize) -> DirichletBasis {
        DirichletBasis::new(Region::new(0.0, 1.0).unwrap(), make_grid(2.0, 512).unwrap(), p, modes).unwrap()
    }

    #[test]
    fn dirichlet_basis_is_orthonormal() {
        let p = params(0.1);
        let b = unit_basis(&p, 100);
        assert!(b.gram_deviation() < 1e-12);
        assert!(b.energies().windows(2).all(|w| w[1] > w[0]));
        assert_eq!(DirichletBasis::max_modes(b.region(), &make_grid(2.0, 512).unwrap()), 127);
        assert!(DirichletBasis::new(Region::new(0.0, 1.0).unwrap(), make_grid(2.0, 512).unwrap(), &p, 200).is_err());
        // interval ends off the grid nodes break orthonormality of the samples
        assert!(DirichletBasis::new(Region::new(0.001, 1.0).unwrap(), make_grid(2.0, 512).unwrap(), &p, 60).is_err());
    }

    #[test]
    fn first_mode_rotates_by_ground_energy() {
        let p = params(0.1);
        let b = unit_basis(&p, 20);
        let phi = b.mode(1).unwrap();
        let t = 0.83;
        let out = dirichlet_evolve(&phi, &b, t).unwrap();
        let e1 = p.hbar() * p.hbar() * PI * PI / 2.0;
        assert!((b.energies()[0] - e1).abs() < 1e-15);
        let expect = phi.scaled(Complex64::from_polar(1.0, -e1 * t / p.hbar()));
        assert!(out.max_abs_diff(&expect).unwrap() < 1e-12);
    }

    #[test]
    fn dirichlet_evolution_conserves_norm_and_support() {
        let p = params(0.1);
        let g = make_grid(2.0, 512).unwrap();
        let region = Region::new(0.0, 1.0).unwrap();
        let psi = WaveFunction::gaussian(g, 0.45, 0.06, 0.3, &p).unwrap();
        let b = DirichletBasis::for_state(region, g, &p, &psi).unwrap();
        assert!(b.capture(&psi).unwrap() >= CAPTURE_THRESHOLD);
        let start = dirichlet_evolve(&psi, &b, 0.0).unwrap();
        let ppsi = Projector::Sharp(region).project(&psi);
        assert!(start.distance(&ppsi).unwrap() < 1e-4);
        let out = dirichlet_evolve(&psi, &b, 0.6).unwrap();
        assert!((out.norm() - start.norm()).abs() < 1e-8);
        for (x, z) in g.nodes().iter().zip(out.values().iter()) {
            if !region.contains(*x) {
                assert_eq!(*z, Complex64::new(0.0, 0.0));
            }
        }
        let small = DirichletBasis::new(region, g, &p, 2).unwrap();
        assert!(matches!(dirichlet_evolve(&psi, &small, 0.1), Err(Error::BasisCapture { .. })));
    }

    #[test]
    fn projection_examples() {
        let p = params(0.1);
        let g = make_grid(4.0, 256).unwrap();
        let region = Region::new(-1.0, 1.0).unwrap();
        let sharp = Projector::Sharp(region);
        let inside = WaveFunction::from_fn(g, |x| Complex64::new(if x.abs() < 0.5 { (1.0 - 4.0 * x * x).powi(2) } else { 0.0 }, 0.0)).unwrap();
        assert_eq!(sharp.project(&inside), inside);
        let outside = WaveFunction::from_fn(g, |x| Complex64::new(if (x - 2.5).abs() < 0.5 { 1.0 } else { 0.0 }, 0.0)).unwrap();
        let moll = Projector::Mollified(MollifiedIndicator::new(region, 0.3).unwrap());
        assert_eq!(moll.project(&outside).norm(), 0.0);
        let psi = random_packet(g, 3, &p);
        let once = sharp.project(&psi);
        assert_eq!(sharp.project(&once), once);
        assert!(once.norm() <= psi.norm());
        assert!(moll.project(&psi).norm() <= psi.norm());
    }

    #[test]
    fn mollified_projection_converges_to_sharp() {
        let p = params(0.1);
        let g = make_grid(4.0, 2048).unwrap();
        let region = Region::new(0.0, 1.0).unwrap();
        let psi = WaveFunction::gaussian(g, 0.2, 0.4, 0.0, &p).unwrap();
        let sharp = Projector::Sharp(region).project(&psi);
        let errs: Vec<f64> = [0.2, 0.1, 0.05]
            .iter()
            .map(|&e| Projector::Mollified(MollifiedIndicator::new(region, e).unwrap()).project(&psi).distance(&sharp).unwrap())
            .collect();
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
        let ip = inner_product(&sharp, &sharp).unwrap();
        assert!(ip.re > 0.0);
    }
}
