//! Semiclassical hierarchy of the regularized product formula.
//!
//! The symbol of `P_N(t) ... P_N(0)` is the twisted product
//! `theta_N # ... # theta_0` of transported cutoffs
//! `theta_k(x, xi) = chi(x + k t xi / (N m))`. Its hbar-expansion is
//! accumulated one factor at a time, pointwise, on exact Taylor jets of the
//! cutoff, so every coefficient vanishes identically wherever one factor does.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jet::{factorial, sharp_jet, Jet2};
use crate::phase_space::{PhaseSpaceGrid, PhysicalParams, SpatialGrid, Symbol};
use crate::quantization::GradedSymbol;
use crate::symbols::{escape_time, shift_coefficient, MollifiedIndicator, Region};

/// Highest hbar-order the hierarchy will compute.
pub const MAX_HIERARCHY_ORDER: usize = 3;
/// Largest number of measurements accepted by the hierarchy.
pub const MAX_HIERARCHY_MEASUREMENTS: usize = 512;
/// Values at or below this magnitude count as zero in support and verdicts.
pub const SUPPORT_FLOOR: f64 = 1e-13;

fn check_common(n: usize, moll: &MollifiedIndicator, grid: &SpatialGrid) -> Result<()> {
    if n == 0 || n > MAX_HIERARCHY_MEASUREMENTS {
        return Err(Error::InvalidParameter(format!(
            "measurement count must be in 1..={MAX_HIERARCHY_MEASUREMENTS}, got {n}"
        )));
    }
    if moll.eps() < 8.0 * grid.spacing() {
        return Err(Error::GridTooSmall(format!(
            "eps = {} is below 8 dx = {}; refine the grid",
            moll.eps(),
            8.0 * grid.spacing()
        )));
    }
    Ok(())
}

/// `prod_k chi(x + c_k xi)` over `k = 0..=N`.
pub fn theta_zero_value(moll: &MollifiedIndicator, n: usize, t: f64, x: f64, xi: f64, params: &PhysicalParams) -> f64 {
    let mut v = 1.0;
    for k in 0..=n {
        let c = shift_coefficient(k, n, t, params);
        v *= moll.eval(x + c * xi);
        if v == 0.0 {
            break;
        }
    }
    v
}

/// Leading coefficient along the x-axis at one momentum.
pub fn theta_zero_profile(
    moll: &MollifiedIndicator,
    n: usize,
    t: f64,
    xi: f64,
    params: &PhysicalParams,
    grid: &SpatialGrid,
) -> Result<Array1<f64>> {
    check_common(n, moll, grid)?;
    Ok(grid.nodes().into_iter().map(|x| theta_zero_value(moll, n, t, x, xi, params)).collect())
}

/// Leading coefficient on a full phase-space grid.
pub fn theta_zero(moll: &MollifiedIndicator, n: usize, t: f64, params: &PhysicalParams, grid: &PhaseSpaceGrid) -> Result<Symbol> {
    check_common(n, moll, grid.x_axis())?;
    Symbol::from_real_fn(*grid, |x, xi| theta_zero_value(moll, n, t, x, xi, params))
}

/// Jet of `chi(x + c xi)`: `D[a][b] = c^b chi^(a+b)`.
fn transported_jet(moll: &MollifiedIndicator, c: f64, x: f64, xi: f64, order: usize) -> Jet2 {
    let d = moll.derivatives(x + c * xi, order);
    let mut jet = Jet2::zeros(order);
    for a in 0..=order {
        let mut cb = 1.0;
        for b in 0..=order - a {
            jet.set(a, b, cb * d[a + b]);
            cb *= c;
        }
    }
    jet
}

/// Coefficients `Theta_0 .. Theta_J` at one phase-space point.
///
/// Real parts are accumulated with weights `1 / (2^l l!)`; the phase `i^j`
/// is attached at the end.
pub fn hierarchy_point(
    moll: &MollifiedIndicator,
    n: usize,
    t: f64,
    x: f64,
    xi: f64,
    order: usize,
    params: &PhysicalParams,
) -> Result<Vec<Complex64>> {
    if order > MAX_HIERARCHY_ORDER {
        return Err(Error::OrderTooLarge { order, max: MAX_HIERARCHY_ORDER });
    }
    let zero = vec![Complex64::new(0.0, 0.0); order + 1];
    let first = transported_jet(moll, 0.0, x, xi, order);
    if first.is_zero() {
        return Ok(zero);
    }
    // r[i] carries order - i derivatives, enough for the remaining factors.
    let mut r: Vec<Jet2> = (0..=order)
        .map(|i| if i == 0 { first.clone() } else { Jet2::zeros(order - i) })
        .collect();
    for k in 1..=n {
        let theta = transported_jet(moll, shift_coefficient(k, n, t, params), x, xi, order);
        if theta.is_zero() {
            return Ok(zero);
        }
        let mut next = Vec::with_capacity(order + 1);
        for i in 0..=order {
            let out_order = order - i;
            let mut acc = Jet2::zeros(out_order);
            for l in 0..=i {
                let w = 1.0 / (2f64.powi(l as i32) * factorial(l));
                acc.add_scaled(&sharp_jet(&theta, &r[i - l], l, out_order), w);
            }
            next.push(acc);
        }
        r = next;
    }
    let mut phase = Complex64::new(1.0, 0.0);
    Ok(r.iter()
        .map(|jet| {
            let v = phase * jet.value();
            phase *= Complex64::i();
            v
        })
        .collect())
}

/// Smallest node interval containing `|values| > SUPPORT_FLOOR`.
pub fn support_extent(values: &[Complex64], grid: &SpatialGrid) -> Option<(f64, f64)> {
    let lo = values.iter().position(|z| z.norm() > SUPPORT_FLOOR)?;
    let hi = values.iter().rposition(|z| z.norm() > SUPPORT_FLOOR)?;
    Some((grid.node(lo), grid.node(hi)))
}

/// Hierarchy coefficients along the x-axis for a list of momenta.
#[derive(Debug, Clone)]
pub struct SymbolHierarchy {
    pub n: usize,
    pub t: f64,
    pub xis: Vec<f64>,
    pub order: usize,
    pub mollifier: MollifiedIndicator,
    pub grid: SpatialGrid,
    /// `coeffs[p][[j, i]] = Theta_j(x_i, xis[p])`.
    pub coeffs: Vec<Array2<Complex64>>,
    /// `sup_norms[[j, p]] = max_i |Theta_j(x_i, xis[p])|`.
    pub sup_norms: Array2<f64>,
    /// `support[j][p]`, `None` when the coefficient is zero to the floor.
    pub support: Vec<Vec<Option<(f64, f64)>>>,
}

impl SymbolHierarchy {
    pub fn eps(&self) -> f64 {
        self.mollifier.eps()
    }

    pub fn row(&self, p: usize, j: usize) -> ndarray::ArrayView1<'_, Complex64> {
        self.coeffs[p].row(j)
    }

    /// `sum_j hbar^j Theta_j` along the x-axis at `xis[p]`.
    pub fn resummed(&self, p: usize, hbar: f64, upto: usize) -> Array1<Complex64> {
        let mut out = Array1::<Complex64>::zeros(self.grid.len());
        for j in 0..=upto.min(self.order) {
            out.scaled_add(Complex64::new(hbar.powi(j as i32), 0.0), &self.coeffs[p].row(j));
        }
        out
    }
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_HIERARCHY_ORDER {
        return Err(Error::OrderTooLarge { order, max: MAX_HIERARCHY_ORDER });
    }
    Ok(())
}

/// `Theta_{j,N}(x, xi; t)` for `j <= order`, every grid node and every momentum in `xis`.
pub fn theta_hierarchy(
    n: usize,
    t: f64,
    xis: &[f64],
    order: usize,
    moll: &MollifiedIndicator,
    params: &PhysicalParams,
    grid: &SpatialGrid,
) -> Result<SymbolHierarchy> {
    check_order(order)?;
    check_common(n, moll, grid)?;
    if xis.is_empty() || xis.iter().any(|xi| !xi.is_finite()) || !t.is_finite() {
        return Err(Error::InvalidParameter("momenta and time must be finite and non-empty".into()));
    }
    let nodes = grid.nodes();
    let mut coeffs = Vec::with_capacity(xis.len());
    for &xi in xis {
        let cols = nodes
            .par_iter()
            .map(|&x| hierarchy_point(moll, n, t, x, xi, order, params))
            .collect::<Result<Vec<_>>>()?;
        let mut field = Array2::<Complex64>::zeros((order + 1, nodes.len()));
        for (i, col) in cols.iter().enumerate() {
            for (j, &v) in col.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite(format!("hierarchy coefficient {j} at x = {}", nodes[i])));
                }
                field[[j, i]] = v;
            }
        }
        coeffs.push(field);
    }
    let mut sup_norms = Array2::<f64>::zeros((order + 1, xis.len()));
    let mut support = vec![vec![None; xis.len()]; order + 1];
    for (p, field) in coeffs.iter().enumerate() {
        for j in 0..=order {
            let row = field.row(j);
            sup_norms[[j, p]] = row.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            support[j][p] = support_extent(row.as_slice().expect("row is contiguous"), grid);
        }
    }
    Ok(SymbolHierarchy { n, t, xis: xis.to_vec(), order, mollifier: *moll, grid: *grid, coeffs, sup_norms, support })
}

/// The hierarchy on a full phase-space grid, as a graded symbol.
pub fn theta_hierarchy_grid(
    n: usize,
    t: f64,
    order: usize,
    moll: &MollifiedIndicator,
    params: &PhysicalParams,
    grid: &PhaseSpaceGrid,
) -> Result<GradedSymbol> {
    check_order(order)?;
    check_common(n, moll, grid.x_axis())?;
    let xs = grid.x_axis().nodes();
    let xis = grid.xi_axis().nodes();
    let points = xs
        .par_iter()
        .map(|&x| xis.iter().map(|&xi| hierarchy_point(moll, n, t, x, xi, order, params)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    let coeffs = (0..=order)
        .map(|j| {
            let values = Array2::from_shape_fn(grid.shape(), |(i, l)| points[i][l][j]);
            Symbol::new(*grid, values)
        })
        .collect::<Result<Vec<_>>>()?;
    GradedSymbol::new(coeffs)
}

/// Support verdict for one `(j, xi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verdict {
    pub j: usize,
    pub xi: f64,
    pub sup_norm: f64,
    /// `sup_x |Theta_j| <= SUPPORT_FLOOR`.
    pub vanishes: bool,
    /// Exit times `(T_xi, T_xi^N)`; `None` at `xi = 0`.
    pub escape: Option<(f64, f64)>,
    /// `t > T_xi^N`.
    pub predicted: bool,
    /// `predicted` implies `vanishes`.
    pub consistent: bool,
}

pub fn vanishing_verdict(h: &SymbolHierarchy, params: &PhysicalParams) -> Result<Vec<Verdict>> {
    let region = *h.mollifier.region();
    let mut out = Vec::with_capacity((h.order + 1) * h.xis.len());
    for j in 0..=h.order {
        for (p, &xi) in h.xis.iter().enumerate() {
            let escape = match escape_time(&region, params, xi, h.eps()) {
                Ok(e) => Some((e.t_xi, e.t_xi_n)),
                Err(Error::InfiniteEscapeTime) => None,
                Err(e) => return Err(e),
            };
            let sup_norm = h.sup_norms[[j, p]];
            let vanishes = sup_norm <= SUPPORT_FLOOR;
            let predicted = escape.is_some_and(|(_, tn)| h.t > tn);
            out.push(Verdict { j, xi, sup_norm, vanishes, escape, predicted, consistent: !predicted || vanishes });
        }
    }
    Ok(out)
}

/// How the cutoff width is chosen in a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsPolicy {
    /// `max(1/N^3, 8 dx)` for each `N`.
    Auto,
    Fixed(f64),
}

/// Parameters of an escape-time sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub region: Region,
    pub n_list: Vec<usize>,
    pub times: Vec<f64>,
    pub xis: Vec<f64>,
    pub order: usize,
    pub eps: EpsPolicy,
}

impl SweepSpec {
    /// Predicted work: one unit per jet update, `M_x * |xi| * N * (J+1)^2` per time.
    pub fn cost(&self, grid: &SpatialGrid) -> f64 {
        let per_n: f64 = self.n_list.iter().map(|&n| n as f64).sum();
        grid.len() as f64 * self.xis.len() as f64 * self.times.len() as f64 * per_n * ((self.order + 1) as f64).powi(2)
    }
}

/// One `(N, j, xi, t)` line of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub j: usize,
    pub xi: f64,
    pub t: f64,
    pub eps: f64,
    pub sup_norm: f64,
    pub support: Option<(f64, f64)>,
    pub verdict: bool,
    pub escape: Option<(f64, f64)>,
    pub consistent: bool,
}

/// Earliest grid time from which the coefficient stays zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub n: usize,
    pub j: usize,
    pub xi: f64,
    pub eps: f64,
    /// `None` if the coefficient never vanishes on the time grid.
    pub t_star: Option<f64>,
    /// `T_xi^N`, when defined.
    pub predicted: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EscapeSweep {
    pub rows: Vec<SweepRow>,
    pub thresholds: Vec<Threshold>,
}

impl EscapeSweep {
    pub fn all_consistent(&self) -> bool {
        self.rows.iter().all(|r| r.consistent)
    }
}

/// Runs the hierarchy over `N x t x xi` and extracts vanishing thresholds.
pub fn escape_sweep(spec: &SweepSpec, params: &PhysicalParams, grid: &SpatialGrid, budget: f64) -> Result<EscapeSweep> {
    let cost = spec.cost(grid);
    if cost > budget {
        return Err(Error::CostGuard(format!("predicted work {cost:.3e} exceeds budget {budget:.3e}")));
    }
    if spec.times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("sweep times must be strictly increasing".into()));
    }
    let mut runs = Vec::new();
    for &n in &spec.n_list {
        let eps = match spec.eps {
            EpsPolicy::Auto => None,
            EpsPolicy::Fixed(e) => Some(e),
        };
        let moll = crate::symbols::build_mollifier(spec.region, n, eps, grid)?;
        for &t in &spec.times {
            runs.push((n, t, moll));
        }
    }
    let results = runs
        .par_iter()
        .map(|&(n, t, moll)| {
            let h = theta_hierarchy(n, t, &spec.xis, spec.order, &moll, params, grid)?;
            let verdicts = vanishing_verdict(&h, params)?;
            Ok((h, verdicts))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (h, verdicts) in &results {
        for v in verdicts {
            let p = h.xis.iter().position(|&x| x == v.xi).expect("verdict momentum comes from the hierarchy");
            rows.push(SweepRow {
                n: h.n,
                j: v.j,
                xi: v.xi,
                t: h.t,
                eps: h.eps(),
                sup_norm: v.sup_norm,
                support: h.support[v.j][p],
                verdict: v.vanishes,
                escape: v.escape,
                consistent: v.consistent,
            });
        }
    }
    let mut thresholds = Vec::new();
    for &n in &spec.n_list {
        for j in 0..=spec.order {
            for &xi in &spec.xis {
                let series: Vec<&SweepRow> = rows.iter().filter(|r| r.n == n && r.j == j && r.xi == xi).collect();
                // start of the last run of vanishing times: higher orders can also
                // vanish early, when no two shifted transitions overlap
                let mut t_star = None;
                for r in series.iter().rev() {
                    if !r.verdict {
                        break;
                    }
                    t_star = Some(r.t);
                }
                let eps = series.first().map_or(0.0, |r| r.eps);
                let predicted = series.first().and_then(|r| r.escape).map(|(_, tn)| tn);
                thresholds.push(Threshold { n, j, xi, eps, t_star, predicted });
            }
        }
    }
    Ok(EscapeSweep { rows, thresholds })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::make_grid;

    fn setup(eps: f64) -> (MollifiedIndicator, PhysicalParams, SpatialGrid) {
        (
            MollifiedIndicator::new(Region::new(0.0, 1.0).unwrap(), eps).unwrap(),
            PhysicalParams::new(0.05, 1.0).unwrap(),
            make_grid(8.0, 2048).unwrap(),
        )
    }

    #[test]
    fn theta_zero_plateau_and_escape() {
        let (moll, p, g) = setup(0.1);
        for n in [1, 4, 16] {
            let at_zero = theta_zero_profile(&moll, n, 0.0, 1.0, &p, &g).unwrap();
            for (x, v) in g.nodes().iter().zip(at_zero.iter()) {
                assert!((*v - moll.eval(*x).powi(n as i32 + 1)).abs() < 1e-15);
            }
            assert_eq!(theta_zero_value(&moll, n, 0.5, 0.25, 1.0, &p), 1.0);
            let gone = theta_zero_profile(&moll, n, 1.3, 1.0, &p, &g).unwrap();
            assert!(gone.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn order_zero_matches_theta_zero() {
        let (moll, p, g) = setup(0.1);
        let h = theta_hierarchy(8, 0.7, &[1.0, -0.5], 0, &moll, &p, &g).unwrap();
        for (q, &xi) in h.xis.iter().enumerate() {
            let prof = theta_zero_profile(&moll, 8, 0.7, xi, &p, &g).unwrap();
            for i in 0..g.len() {
                assert!((h.coeffs[q][[0, i]] - prof[i]).norm() <= 1e-12);
            }
        }
    }

    #[test]
    fn phases_alternate_with_order() {
        let (moll, p, g) = setup(0.2);
        let h = theta_hierarchy(4, 0.4, &[1.0], 3, &moll, &p, &g).unwrap();
        for j in 0..=3 {
            let row = h.row(0, j);
            let off = row.iter().fold(0.0f64, |m, z| m.max(if j % 2 == 0 { z.im.abs() } else { z.re.abs() }));
            assert_eq!(off, 0.0);
        }
        assert!(h.sup_norms[[1, 0]] > 0.0 && h.sup_norms[[2, 0]] > 0.0);
    }

    #[test]
    fn supports_nest_inside_leading_order() {
        let (moll, p, g) = setup(0.1);
        let h = theta_hierarchy(16, 0.9, &[1.0, 0.5], 2, &moll, &p, &g).unwrap();
        for q in 0..2 {
            let (lo0, hi0) = h.support[0][q].unwrap();
            for j in 1..=2 {
                if let Some((lo, hi)) = h.support[j][q] {
                    assert!(lo >= lo0 - 1e-12 && hi <= hi0 + 1e-12);
                }
            }
        }
    }

    #[test]
    fn verdicts() {
        let (moll, p, g) = setup(0.1);
        let late = theta_hierarchy(16, 1.3, &[1.0, 0.0], 2, &moll, &p, &g).unwrap();
        let v = vanishing_verdict(&late, &p).unwrap();
        assert!(v.iter().all(|v| v.consistent));
        for v in &v {
            if v.xi == 1.0 {
                assert!(v.predicted && v.vanishes && v.sup_norm == 0.0);
            } else {
                assert!(v.escape.is_none() && !v.predicted);
                if v.j == 0 {
                    assert!(!v.vanishes);
                }
            }
        }
        let early = theta_hierarchy(16, 0.0, &[1.0], 1, &moll, &p, &g).unwrap();
        let v = vanishing_verdict(&early, &p).unwrap();
        assert!(!v[0].vanishes && v[0].sup_norm == 1.0);
    }

    #[test]
    fn guards() {
        let (moll, p, g) = setup(0.1);
        assert!(matches!(theta_hierarchy(4, 0.1, &[1.0], 4, &moll, &p, &g), Err(Error::OrderTooLarge { .. })));
        assert!(theta_hierarchy(513, 0.1, &[1.0], 1, &moll, &p, &g).is_err());
        let thin = MollifiedIndicator::new(*moll.region(), 0.05).unwrap();
        assert!(matches!(theta_hierarchy(4, 0.1, &[1.0], 1, &thin, &p, &g), Err(Error::GridTooSmall(_))));
    }

    #[test]
    fn sweep_threshold_near_prediction() {
        let (_, p, g) = setup(0.1);
        let spec = SweepSpec {
            region: Region::new(0.0, 1.0).unwrap(),
            n_list: vec![8],
            times: (40..=70).map(|k| k as f64 * 0.02).collect(),
            xis: vec![1.0],
            order: 1,
            eps: EpsPolicy::Fixed(0.1),
        };
        let sweep = escape_sweep(&spec, &p, &g, 1e10).unwrap();
        assert!(sweep.all_consistent());
        for th in &sweep.thresholds {
            let t_star = th.t_star.unwrap();
            assert!((t_star - 1.2).abs() <= 0.02 + 1e-12, "{t_star}");
        }
        assert!(matches!(escape_sweep(&spec, &p, &g, 10.0), Err(Error::CostGuard(_))));
    }
}
