//! Product formulas for repeated measurements and their Dirichlet limit.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::{dirichlet_evolve, DirichletBasis, FreePropagator, Projector};
use crate::error::{Error, Result};
use crate::phase_space::{check_boundary_mass, PhysicalParams, WaveFunction};
use crate::symbols::{build_mollifier, Region};

/// Result of applying `P (U(t/N) P)^N` with the norm after every projection.
#[derive(Debug, Clone)]
pub struct ProductFormulaRun {
    pub state: WaveFunction,
    /// `|psi|^2` after each of the `N + 1` projections.
    pub norms_sqr: Vec<f64>,
    /// `|phi|^2 - |P phi|^2` at each projection.
    pub leaked: Vec<f64>,
}

impl ProductFormulaRun {
    pub fn survival(&self) -> f64 {
        *self.norms_sqr.last().unwrap_or(&0.0)
    }

    /// `|psi|^2 - sum of leaked mass`.
    pub fn survival_from_leakage(&self, initial_norm_sqr: f64) -> f64 {
        initial_norm_sqr - self.leaked.iter().sum::<f64>()
    }

    /// The final state rescaled to unit norm (zero if nothing survived).
    pub fn normalized_state(&self) -> WaveFunction {
        self.state.normalized()
    }
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("measurement count must be at least 1".into()));
    }
    Ok(())
}

/// `P (U(t/N) P)^N psi` with the per-step record; no renormalization.
pub fn product_formula_run(psi: &WaveFunction, n: usize, t: f64, projector: &Projector, params: &PhysicalParams) -> Result<ProductFormulaRun> {
    run_steps(psi, n, t, projector, params, true)
}

fn run_steps(psi: &WaveFunction, n: usize, t: f64, projector: &Projector, params: &PhysicalParams, guarded: bool) -> Result<ProductFormulaRun> {
    check_count(n)?;
    let u = FreePropagator::new(*psi.grid(), params, t / n as f64);
    let mut norms_sqr = Vec::with_capacity(n + 1);
    let mut leaked = Vec::with_capacity(n + 1);
    let reference = psi.norm_sqr();
    let mut before = reference;
    let mut phi = projector.project(psi);
    for step in 0..=n {
        if step > 0 {
            phi = if guarded { u.apply_with_reference(&phi, reference)? } else { u.apply_unchecked(&phi)? };
            before = phi.norm_sqr();
            phi = projector.project(&phi);
        }
        let after = phi.norm_sqr();
        leaked.push(before - after);
        norms_sqr.push(after);
    }
    Ok(ProductFormulaRun { state: phi, norms_sqr, leaked })
}

pub fn product_formula_state(psi: &WaveFunction, n: usize, t: f64, projector: &Projector, params: &PhysicalParams) -> Result<WaveFunction> {
    Ok(product_formula_run(psi, n, t, projector, params)?.state)
}

fn check_normalized(psi: &WaveFunction) -> Result<()> {
    let n = psi.norm();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized(n));
    }
    Ok(())
}

/// `p_N(t) = |V_N(t) psi|^2`.
pub fn survival_probability(psi: &WaveFunction, n: usize, t: f64, projector: &Projector, params: &PhysicalParams) -> Result<f64> {
    check_normalized(psi)?;
    Ok(product_formula_run(psi, n, t, projector, params)?.survival())
}

/// `|V_N(t) psi - exp(-i t H_Omega / hbar) P psi|`.
pub fn zeno_error(
    psi: &WaveFunction,
    n: usize,
    t: f64,
    projector: &Projector,
    params: &PhysicalParams,
    basis: &DirichletBasis,
) -> Result<f64> {
    let v = product_formula_state(psi, n, t, projector, params)?;
    let d = dirichlet_evolve(psi, basis, t)?;
    v.distance(&d)
}

/// `P_N(t) P_N((N-1)t/N) ... P_N(0) psi` with `P_N(s) = U(-s) P U(s)`,
/// and its distance to `U(-t) V_N(t) psi`.
#[derive(Debug, Clone)]
pub struct RegularizedRun {
    pub state: WaveFunction,
    pub residual: f64,
}

/// The identity is algebraic on the periodic grid, so no boundary guard applies here.
pub fn regularized_product_state(psi: &WaveFunction, n: usize, t: f64, projector: &Projector, params: &PhysicalParams) -> Result<RegularizedRun> {
    check_count(n)?;
    let grid = *psi.grid();
    let mut phi = psi.clone();
    for k in 0..=n {
        let s = k as f64 * t / n as f64;
        let moved = FreePropagator::new(grid, params, s).apply_unchecked(&phi)?;
        phi = FreePropagator::new(grid, params, -s).apply_unchecked(&projector.project(&moved))?;
    }
    let v = run_steps(psi, n, t, projector, params, false)?.state;
    let via_product = FreePropagator::new(grid, params, -t).apply_unchecked(&v)?;
    let residual = phi.distance(&via_product)?;
    Ok(RegularizedRun { state: phi, residual })
}

/// How the measurement is modelled in a study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProjectorPolicy {
    Sharp,
    /// Smooth cutoff; `None` selects the default width for each `N`.
    Mollified { eps: Option<f64> },
}

/// One row of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ZenoRow {
    pub n: usize,
    pub survival: f64,
    pub zeno_error: f64,
    pub regularization_residual: f64,
    pub eps: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZenoReport {
    pub t: f64,
    pub rows: Vec<ZenoRow>,
    pub basis_modes: usize,
    /// Monotone trends observed over the `N` list; no rate is implied.
    pub empirical_convergence: bool,
}

/// Normalized, away from the grid edge, and a strictly increasing `N` list.
pub fn check_study_inputs(psi: &WaveFunction, n_list: &[usize]) -> Result<()> {
    check_normalized(psi)?;
    check_boundary_mass(psi)?;
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) || n_list[0] == 0 {
        return Err(Error::InvalidParameter("N list must be strictly increasing positive integers".into()));
    }
    Ok(())
}

/// One row of a study against a precomputed Dirichlet limit `limit`.
pub fn zeno_row(
    psi: &WaveFunction,
    region: Region,
    n: usize,
    t: f64,
    policy: ProjectorPolicy,
    params: &PhysicalParams,
    limit: &WaveFunction,
) -> Result<ZenoRow> {
    let start = std::time::Instant::now();
    let grid = *psi.grid();
    let projector = match policy {
        ProjectorPolicy::Sharp => Projector::Sharp(region),
        ProjectorPolicy::Mollified { eps } => Projector::Mollified(build_mollifier(region, n, eps, &grid)?),
    };
    let run = product_formula_run(psi, n, t, &projector, params)?;
    let err = run.state.distance(limit)?;
    let reg = regularized_product_state(psi, n, t, &projector, params)?;
    Ok(ZenoRow {
        n,
        survival: run.survival(),
        zeno_error: err,
        regularization_residual: reg.residual,
        eps: projector.eps(),
        wall_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Dirichlet basis for `psi` and the limit state `exp(-i t H_Omega / hbar) P psi`.
pub fn dirichlet_limit(psi: &WaveFunction, region: Region, t: f64, params: &PhysicalParams) -> Result<(DirichletBasis, WaveFunction)> {
    let basis = DirichletBasis::for_state(region, *psi.grid(), params, psi)?;
    let limit = dirichlet_evolve(psi, &basis, t)?;
    Ok((basis, limit))
}

/// Runs the product formula for every `N`, compared against the Dirichlet evolution.
pub fn zeno_study(
    psi: &WaveFunction,
    region: Region,
    n_list: &[usize],
    t: f64,
    policy: ProjectorPolicy,
    params: &PhysicalParams,
) -> Result<ZenoReport> {
    check_study_inputs(psi, n_list)?;
    let (basis, limit) = dirichlet_limit(psi, region, t, params)?;
    let rows = n_list
        .par_iter()
        .map(|&n| zeno_row(psi, region, n, t, policy, params, &limit))
        .collect::<Result<Vec<_>>>()?;
    Ok(ZenoReport { t, empirical_convergence: empirically_converging(&rows), rows, basis_modes: basis.len() })
}

/// `e_N` strictly decreasing along the rows.
pub fn empirically_converging(rows: &[ZenoRow]) -> bool {
    rows.windows(2).all(|w| w[1].zeno_error < w[0].zeno_error)
}

/// Phase-free comparison helper: `|<a, b>| / (|a| |b|)`.
pub fn overlap_fidelity(a: &WaveFunction, b: &WaveFunction) -> Result<f64> {
    let ip: Complex64 = crate::phase_space::inner_product(a, b)?;
    let d = a.norm() * b.norm();
    Ok(if d == 0.0 { 0.0 } else { ip.norm() / d })
}
