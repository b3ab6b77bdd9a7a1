use num_complex::Complex64;

use crate::dynamics::{dirichlet_evolve, DirichletBasis, FreePropagator, Projector};
use crate::phase_space::{from_momentum, to_momentum, PhaseSpaceGrid};
use crate::quantization::wigner_transform;
use crate::semiclassical::{theta_hierarchy, vanishing_verdict, EpsPolicy};
use crate::symbols::{build_mollifier, escape_time};
use crate::zeno::regularized_product_state;
use crate::Result;

use super::config::ExperimentConfig;

/// Outcome of one invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    fn new(name: &'static str, value: f64, tolerance: f64) -> Self {
        Self { name, value, tolerance }
    }

    pub fn passed(&self) -> bool {
        self.value.is_finite() && self.value <= self.tolerance
    }
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (p, q)| m.max((p - q).norm()))
}

/// Invariants of the numerical kernels on the configured state and grid.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<Vec<Check>> {
    let to_err = |e: super::config::ConfigError| crate::Error::InvalidParameter(e.to_string());
    let params = cfg.params().map_err(to_err)?;
    let region = cfg.region().map_err(to_err)?;
    let grid = cfg.grid().map_err(to_err)?;
    let psi = cfg.initial_state()?;
    let t = cfg.schedule.times.iter().copied().fold(0.0, f64::max);
    let mut checks = Vec::new();

    let phi = to_momentum(&psi);
    let back = from_momentum(&phi);
    checks.push(Check::new("fourier_round_trip", back.max_abs_diff(&psi)?, 1e-12));
    checks.push(Check::new("parseval", (phi.norm() - psi.norm()).abs(), 1e-12));

    let moved = FreePropagator::new(grid, &params, t).apply(&psi)?;
    checks.push(Check::new("propagator_unitarity", (moved.norm() - psi.norm()).abs(), 1e-12));
    let half = FreePropagator::new(grid, &params, t / 2.0);
    let twice = half.apply(&half.apply(&psi)?)?;
    checks.push(Check::new("propagator_group_law", twice.max_abs_diff(&moved)?, 1e-12));
    let undone = FreePropagator::new(grid, &params, -t).apply(&moved)?;
    checks.push(Check::new("propagator_reversibility", undone.max_abs_diff(&psi)?, 1e-12));

    let pgrid = PhaseSpaceGrid::dual(grid, &params)?;
    let w = wigner_transform(&psi, &params, &pgrid)?;
    let dx = grid.spacing();
    let dxi = pgrid.xi_axis().spacing();
    let vals = w.values();
    let total: f64 = vals.iter().map(|z| z.re).sum::<f64>() * dx * dxi;
    checks.push(Check::new("wigner_normalization", (total - psi.norm_sqr()).abs(), 1e-8));
    let position: Vec<Complex64> = vals.rows().into_iter().map(|r| Complex64::new(r.iter().map(|z| z.re).sum::<f64>() * dxi, 0.0)).collect();
    let density: Vec<Complex64> = psi.values().iter().map(|z| Complex64::new(z.norm_sqr(), 0.0)).collect();
    checks.push(Check::new("wigner_position_marginal", max_diff(&position, &density), 1e-8));
    let momentum: Vec<Complex64> = vals.columns().into_iter().map(|c| Complex64::new(c.iter().map(|z| z.re).sum::<f64>() * dx, 0.0)).collect();
    let hbar = params.hbar();
    let phi_density: Vec<Complex64> = phi.values().iter().map(|z| Complex64::new(z.norm_sqr() / hbar, 0.0)).collect();
    checks.push(Check::new("wigner_momentum_marginal", max_diff(&momentum, &phi_density), 1e-8));

    let basis = DirichletBasis::for_state(region, grid, &params, &psi)?;
    checks.push(Check::new("dirichlet_orthonormality", basis.gram_deviation(), 1e-8));
    let start = dirichlet_evolve(&psi, &basis, 0.0)?;
    let later = dirichlet_evolve(&psi, &basis, t)?;
    checks.push(Check::new("dirichlet_norm_conservation", (later.norm() - start.norm()).abs(), 1e-8));

    let n0 = cfg.schedule.n_list[0].min(32);
    let projector = Projector::Sharp(region);
    let reg = regularized_product_state(&psi, n0, t, &projector, &params)?;
    checks.push(Check::new("regularization_identity", reg.residual, 1e-10));

    let n_h = cfg.hierarchy_n_list().first().copied().unwrap_or(1);
    let eps = match cfg.eps_policy() {
        EpsPolicy::Fixed(e) => Some(e),
        EpsPolicy::Auto => None,
    };
    let moll = build_mollifier(region, n_h, eps, &grid)?;
    let xis: Vec<f64> = cfg.schedule.xi_list.iter().copied().filter(|&x| x != 0.0).collect();
    let mut worst = 0.0f64;
    for &xi in &xis {
        let late = escape_time(&region, &params, xi, moll.eps())?.t_xi_n * 1.05;
        let h = theta_hierarchy(n_h, late, &[xi], cfg.schedule.order, &moll, &params, &grid)?;
        for v in vanishing_verdict(&h, &params)? {
            worst = worst.max(if v.consistent { v.sup_norm } else { f64::INFINITY });
        }
    }
    checks.push(Check::new("hierarchy_vanishes_past_escape", worst, 1e-13));
    Ok(checks)
}
