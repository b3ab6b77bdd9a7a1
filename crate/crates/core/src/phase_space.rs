//! Grids, wavefunctions and phase-space fields.
//!
//! Space is discretized as the periodic interval `[-L, L)` with `M` nodes
//! (`M` a power of two). Momentum-space values are reported on the dual
//! wavenumber grid in ascending order, `k_j = -pi/dx + j pi/L`.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral;
use crate::symbols::MollifierTransport;

/// Planck constant and particle mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    hbar: f64,
    mass: f64,
}

impl PhysicalParams {
    pub fn new(hbar: f64, mass: f64) -> Result<Self> {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be positive, got {hbar}")));
        }
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::InvalidParameter(format!("mass must be positive, got {mass}")));
        }
        Ok(Self { hbar, mass })
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// Same mass, different Planck constant.
    pub fn with_hbar(&self, hbar: f64) -> Result<Self> {
        Self::new(hbar, self.mass)
    }
}

/// Uniform periodic grid on `[-L, L)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    half_width: f64,
    points: usize,
}

impl SpatialGrid {
    pub const MIN_POINTS: usize = 8;

    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "grid half-width must be positive, got {half_width}"
            )));
        }
        if !points.is_power_of_two() {
            return Err(Error::NotPowerOfTwo(points));
        }
        if points < Self::MIN_POINTS {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least {} points, got {points}",
                Self::MIN_POINTS
            )));
        }
        Ok(Self { half_width, points })
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }

    /// Spacing of the dual wavenumber grid, `pi / L`.
    pub fn dual_spacing(&self) -> f64 {
        PI / self.half_width
    }

    /// Dual wavenumbers in ascending order, `[-pi/dx, pi/dx)`.
    pub fn dual_nodes(&self) -> Vec<f64> {
        let kmax = PI / self.spacing();
        (0..self.points).map(|j| -kmax + j as f64 * self.dual_spacing()).collect()
    }

    /// Index of the node nearest to `x` (clamped to the grid).
    pub fn nearest_index(&self, x: f64) -> usize {
        let f = ((x + self.half_width) / self.spacing()).round();
        f.clamp(0.0, (self.points - 1) as f64) as usize
    }
}

/// Build a spatial grid: `L > 0`, `M >= 8` and a power of two.
pub fn make_grid(half_width: f64, points: usize) -> Result<SpatialGrid> {
    SpatialGrid::new(half_width, points)
}

/// A complex state sampled on a [`SpatialGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: SpatialGrid,
    values: Array1<Complex64>,
    normalized: bool,
}

impl WaveFunction {
    pub fn new(grid: SpatialGrid, values: Array1<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("wavefunction values".into()));
        }
        let mut psi = Self { grid, values, normalized: false };
        psi.normalized = (psi.norm() - 1.0).abs() < 1e-12;
        Ok(psi)
    }

    pub fn from_fn(grid: SpatialGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let values = grid.nodes().into_iter().map(f).collect::<Array1<_>>();
        Self::new(grid, values)
    }

    pub fn zeros(grid: SpatialGrid) -> Self {
        Self { grid, values: Array1::zeros(grid.len()), normalized: false }
    }

    /// Normalized Gaussian `exp(-(x-x0)^2 / (4 sigma^2) + i p0 x / hbar)`;
    /// `sigma` is the position standard deviation of `|psi|^2`.
    pub fn gaussian(grid: SpatialGrid, center: f64, sigma: f64, momentum: f64, params: &PhysicalParams) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("Gaussian width must be positive, got {sigma}")));
        }
        let amp = (2.0 * PI * sigma * sigma).powf(-0.25);
        let hbar = params.hbar();
        let psi = Self::from_fn(grid, |x| {
            let d = x - center;
            Complex64::from_polar(amp * (-d * d / (4.0 * sigma * sigma)).exp(), momentum * x / hbar)
        })?;
        Ok(psi.normalized())
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array1<Complex64> {
        &self.values
    }

    pub fn into_values(self) -> Array1<Complex64> {
        self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.spacing()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// Copy rescaled to unit norm. The zero state is returned unchanged.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Self { grid: self.grid, values: self.values.mapv(|z| z / n), normalized: true }
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        let mut out = Self { grid: self.grid, values: self.values.mapv(|z| z * s), normalized: false };
        out.normalized = (out.norm() - 1.0).abs() < 1e-12;
        out
    }

    pub(crate) fn with_values(&self, values: Array1<Complex64>) -> Self {
        let mut out = Self { grid: self.grid, values, normalized: false };
        out.normalized = (out.norm() - 1.0).abs() < 1e-12;
        out
    }

    /// L2 distance on the grid.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        check_same_grid(&self.grid, &other.grid)?;
        let s: f64 = self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * self.grid.spacing()).sqrt())
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        check_same_grid(&self.grid, &other.grid)?;
        Ok(self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    /// Fraction of the squared norm within the outer 10% of the grid on either side.
    pub fn boundary_mass(&self) -> f64 {
        let total = self.norm_sqr();
        if total == 0.0 {
            return 0.0;
        }
        let edge = 0.9 * self.grid.half_width();
        let outer: f64 = self
            .grid
            .nodes()
            .iter()
            .zip(self.values.iter())
            .filter(|(x, _)| x.abs() >= edge)
            .map(|(_, z)| z.norm_sqr())
            .sum::<f64>()
            * self.grid.spacing();
        outer / total
    }
}

/// Relative boundary mass above which propagation is refused.
pub const BOUNDARY_MASS_THRESHOLD: f64 = 1e-8;

/// Fails when the state has reached the outer band of the periodic grid.
pub fn check_boundary_mass(psi: &WaveFunction) -> Result<()> {
    check_boundary_mass_against(psi, psi.norm_sqr())
}

/// As [`check_boundary_mass`], measured relative to `reference_norm_sqr`
/// (for states that have already lost most of their norm).
pub fn check_boundary_mass_against(psi: &WaveFunction, reference_norm_sqr: f64) -> Result<()> {
    if reference_norm_sqr == 0.0 {
        return Ok(());
    }
    let mass = psi.boundary_mass() * psi.norm_sqr() / reference_norm_sqr;
    if mass > BOUNDARY_MASS_THRESHOLD {
        return Err(Error::BoundaryMass { mass, threshold: BOUNDARY_MASS_THRESHOLD });
    }
    Ok(())
}

/// A state in the momentum representation, values ordered by ascending wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumWaveFunction {
    grid: SpatialGrid,
    values: Array1<Complex64>,
}

impl MomentumWaveFunction {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array1<Complex64> {
        &self.values
    }

    pub fn wavenumbers(&self) -> Vec<f64> {
        self.grid.dual_nodes()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dual_spacing()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }
}

/// Discrete version of `psi_hat(k) = (2 pi)^{-1/2} int psi(x) e^{-ikx} dx`.
pub fn to_momentum(psi: &WaveFunction) -> MomentumWaveFunction {
    let grid = psi.grid;
    let m = grid.len();
    let dx = grid.spacing();
    let x0 = grid.node(0);
    let mut buf = psi.values.to_vec();
    spectral::forward(&mut buf);
    let ks = spectral::wavenumbers(m, dx);
    let scale = dx / (2.0 * PI).sqrt();
    let mut out = Array1::<Complex64>::zeros(m);
    let half = m / 2;
    for (n, z) in buf.into_iter().enumerate() {
        // k_n x_0 is taken with the same representative as the centered output
        let k = ks[n];
        let v = z * Complex64::from_polar(scale, -k * x0);
        out[(n + half) % m] = v;
    }
    MomentumWaveFunction { grid, values: out }
}

/// Inverse of [`to_momentum`].
pub fn from_momentum(phi: &MomentumWaveFunction) -> WaveFunction {
    let grid = phi.grid;
    let m = grid.len();
    let dx = grid.spacing();
    let x0 = grid.node(0);
    let ks = spectral::wavenumbers(m, dx);
    let half = m / 2;
    let scale = (2.0 * PI).sqrt() / dx;
    let mut buf: Vec<Complex64> = (0..m)
        .map(|n| phi.values[(n + half) % m] * Complex64::from_polar(scale, ks[n] * x0))
        .collect();
    spectral::inverse(&mut buf);
    let values = Array1::from(buf);
    let mut psi = WaveFunction { grid, values, normalized: false };
    psi.normalized = (psi.norm() - 1.0).abs() < 1e-12;
    psi
}

pub(crate) fn check_same_grid(a: &SpatialGrid, b: &SpatialGrid) -> Result<()> {
    if a != b {
        return Err(Error::GridMismatch(format!(
            "[-{}, {}) x {} vs [-{}, {}) x {}",
            a.half_width(),
            a.half_width(),
            a.len(),
            b.half_width(),
            b.half_width(),
            b.len()
        )));
    }
    Ok(())
}

/// `<psi, phi> = sum conj(psi_i) phi_i dx`.
pub fn inner_product(psi: &WaveFunction, phi: &WaveFunction) -> Result<Complex64> {
    check_same_grid(&psi.grid, &phi.grid)?;
    let s: Complex64 = psi.values.iter().zip(phi.values.iter()).map(|(a, b)| a.conj() * b).sum();
    Ok(s * psi.grid.spacing())
}

/// Position axis times momentum axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseSpaceGrid {
    x: SpatialGrid,
    xi: SpatialGrid,
}

impl PhaseSpaceGrid {
    pub fn new(x: SpatialGrid, xi: SpatialGrid) -> Self {
        Self { x, xi }
    }

    /// Momentum axis `xi = hbar k` over the full dual band of `x`.
    pub fn dual(x: SpatialGrid, params: &PhysicalParams) -> Result<Self> {
        let xi = SpatialGrid::new(PI * params.hbar() / x.spacing(), x.len())?;
        Ok(Self { x, xi })
    }

    pub fn x_axis(&self) -> &SpatialGrid {
        &self.x
    }

    pub fn xi_axis(&self) -> &SpatialGrid {
        &self.xi
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.x.len(), self.xi.len())
    }
}

/// A complex field on a [`PhaseSpaceGrid`], x along axis 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Symbol {
    grid: PhaseSpaceGrid,
    values: Array2<Complex64>,
    closed_form: Option<MollifierTransport>,
}

impl Symbol {
    pub fn new(grid: PhaseSpaceGrid, values: Array2<Complex64>) -> Result<Self> {
        if values.dim() != grid.shape() {
            return Err(Error::GridMismatch(format!("symbol shape {:?} vs grid {:?}", values.dim(), grid.shape())));
        }
        if values.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("symbol values".into()));
        }
        Ok(Self { grid, values, closed_form: None })
    }

    pub fn zeros(grid: PhaseSpaceGrid) -> Self {
        Self { grid, values: Array2::zeros(grid.shape()), closed_form: None }
    }

    pub fn from_fn(grid: PhaseSpaceGrid, f: impl Fn(f64, f64) -> Complex64) -> Result<Self> {
        let xs = grid.x.nodes();
        let xis = grid.xi.nodes();
        let values = Array2::from_shape_fn(grid.shape(), |(i, j)| f(xs[i], xis[j]));
        Self::new(grid, values)
    }

    pub fn from_real_fn(grid: PhaseSpaceGrid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::from_fn(grid, |x, xi| Complex64::new(f(x, xi), 0.0))
    }

    pub(crate) fn with_closed_form(mut self, cf: MollifierTransport) -> Self {
        self.closed_form = Some(cf);
        self
    }

    pub(crate) fn from_parts_unchecked(grid: PhaseSpaceGrid, values: Array2<Complex64>) -> Self {
        Self { grid, values, closed_form: None }
    }

    pub fn grid(&self) -> &PhaseSpaceGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn closed_form(&self) -> Option<&MollifierTransport> {
        self.closed_form.as_ref()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Real-valuedness flag: every imaginary part below `tol`.
    pub fn is_real(&self, tol: f64) -> bool {
        self.max_imag() <= tol
    }

    pub fn max_abs_diff(&self, other: &Symbol) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self.values.iter().zip(other.values.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
    }

    pub(crate) fn check_grid(&self, other: &Symbol) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("symbols live on different phase-space grids".into()));
        }
        Ok(())
    }

    /// Pointwise linear combination `a * self + b * other`.
    pub fn combine(&self, a: Complex64, other: &Symbol, b: Complex64) -> Result<Symbol> {
        self.check_grid(other)?;
        let values = &self.values * a + &other.values * b;
        Ok(Symbol::from_parts_unchecked(self.grid, values))
    }

    pub fn scaled(&self, a: Complex64) -> Symbol {
        Symbol::from_parts_unchecked(self.grid, self.values.mapv(|z| z * a))
    }

    /// Values along x at momentum node `j`.
    pub fn row_at_xi(&self, j: usize) -> Vec<Complex64> {
        self.values.column(j).to_vec()
    }
}
