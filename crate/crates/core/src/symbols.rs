//! The measured region, its smooth indicator, transported indicator symbols
//! and classical escape times.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jet::{factorial, Taylor};
use crate::phase_space::{PhaseSpaceGrid, PhysicalParams, SpatialGrid, Symbol};

/// A closed interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    a: f64,
    b: f64,
}

impl Region {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidParameter(format!("region needs a < b, got [{a}, {b}]")));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn diameter(&self) -> f64 {
        self.b - self.a
    }

    pub fn contains(&self, x: f64) -> bool {
        self.a <= x && x <= self.b
    }

    /// `[a - eps, b + eps]`.
    pub fn dilation(&self, eps: f64) -> Result<Region> {
        if !(eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("dilation radius must be non-negative, got {eps}")));
        }
        Region::new(self.a - eps, self.b + eps)
    }

    /// Sharp indicator.
    pub fn indicator(&self, x: f64) -> f64 {
        if self.contains(x) {
            1.0
        } else {
            0.0
        }
    }
}

/// Shape of the transition between 0 and 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Profile {
    /// `s(u) = g(u) / (g(u) + g(1-u))`, `g(u) = exp(-1/u)` for `u > 0`.
    #[default]
    SmoothStep,
}

/// Exp(-1/u) as a Taylor jet in `du`, where the argument moves as `u + sign * du`.
fn bump_jet(u: f64, sign: f64, len: usize) -> Vec<f64> {
    let g = (-1.0 / u).exp();
    if u <= 0.0 || g == 0.0 {
        return vec![0.0; len];
    }
    let mut arg = vec![0.0; len];
    arg[0] = u;
    if len > 1 {
        arg[1] = sign;
    }
    let neg_recip: Vec<f64> = Taylor::recip(&arg).into_iter().map(|c| -c).collect();
    Taylor::exp(&neg_recip)
}

/// Taylor coefficients of the smooth step at `u`.
fn step_jet(u: f64, len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    if u <= 0.0 {
        return out;
    }
    if u >= 1.0 {
        out[0] = 1.0;
        return out;
    }
    let gu = bump_jet(u, 1.0, len);
    let gv = bump_jet(1.0 - u, -1.0, len);
    if gu[0] == 0.0 {
        return out;
    }
    if gv[0] == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let sum: Vec<f64> = gu.iter().zip(&gv).map(|(p, q)| p + q).collect();
    Taylor::mul(&gu, &Taylor::recip(&sum))
}

fn step_value(u: f64) -> f64 {
    if u <= 0.0 {
        return 0.0;
    }
    if u >= 1.0 {
        return 1.0;
    }
    let gu = (-1.0 / u).exp();
    let gv = (-1.0 / (1.0 - u)).exp();
    gu / (gu + gv)
}

/// Smooth cutoff equal to 1 on the region and 0 outside its `eps`-dilation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifiedIndicator {
    region: Region,
    eps: f64,
    profile: Profile,
}

impl MollifiedIndicator {
    pub fn new(region: Region, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("mollifier width must be positive, got {eps}")));
        }
        Ok(Self { region, eps, profile: Profile::SmoothStep })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    /// Closed support `[a - eps, b + eps]`.
    pub fn support(&self) -> Region {
        Region { a: self.region.a - self.eps, b: self.region.b + self.eps }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (a, b, e) = (self.region.a, self.region.b, self.eps);
        if a <= x && x <= b {
            1.0
        } else if x <= a - e || x >= b + e {
            0.0
        } else if x < a {
            step_value((x - (a - e)) / e)
        } else {
            step_value(((b + e) - x) / e)
        }
    }

    /// `[chi(x), chi'(x), ..., chi^(max_order)(x)]`, evaluated analytically.
    pub fn derivatives(&self, x: f64, max_order: usize) -> Vec<f64> {
        let len = max_order + 1;
        let (a, b, e) = (self.region.a, self.region.b, self.eps);
        let mut out = vec![0.0; len];
        if a <= x && x <= b {
            out[0] = 1.0;
            return out;
        }
        if x <= a - e || x >= b + e {
            return out;
        }
        let (jet, scale) = if x < a {
            (step_jet((x - (a - e)) / e, len), 1.0 / e)
        } else {
            (step_jet(((b + e) - x) / e, len), -1.0 / e)
        };
        for (n, c) in jet.into_iter().enumerate() {
            out[n] = c * factorial(n) * scale.powi(n as i32);
        }
        out[0] = self.eval(x);
        out
    }
}

/// Default transition width: `max(1/N^3, 8 dx)`, or the override when given.
pub fn default_eps(n: usize, grid: &SpatialGrid) -> f64 {
    let cubic = 1.0 / (n as f64).powi(3);
    cubic.max(8.0 * grid.spacing())
}

/// Mollified indicator for `N` measurements on `grid`.
pub fn build_mollifier(region: Region, n: usize, eps_override: Option<f64>, grid: &SpatialGrid) -> Result<MollifiedIndicator> {
    if n == 0 {
        return Err(Error::InvalidParameter("measurement count must be at least 1".into()));
    }
    let eps = match eps_override {
        Some(e) if !(e > 0.0) => {
            return Err(Error::InvalidParameter(format!("eps override must be positive, got {e}")));
        }
        Some(e) => e,
        None => default_eps(n, grid),
    };
    if eps >= region.diameter() / 2.0 {
        log::warn!("eps = {eps} is at least half the region diameter {}", region.diameter());
    }
    MollifiedIndicator::new(region, eps)
}

/// Closed form of a transported indicator symbol: `(x, xi) -> chi(x + shift * xi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MollifierTransport {
    pub mollifier: MollifiedIndicator,
    pub shift_per_momentum: f64,
}

impl MollifierTransport {
    pub fn eval(&self, x: f64, xi: f64) -> f64 {
        self.mollifier.eval(x + self.shift_per_momentum * xi)
    }
}

fn check_support_on_grid(moll: &MollifiedIndicator, grid: &SpatialGrid) -> Result<()> {
    let s = moll.support();
    let lo = grid.node(0);
    let hi = grid.node(grid.len() - 1);
    if s.a() < lo || s.b() > hi {
        return Err(Error::GridTooSmall(format!(
            "support [{}, {}] not inside grid range [{lo}, {hi}]",
            s.a(),
            s.b()
        )));
    }
    Ok(())
}

pub(crate) fn transported_symbol(transport: MollifierTransport, grid: &PhaseSpaceGrid) -> Result<Symbol> {
    let s = Symbol::from_fn(*grid, |x, xi| Complex64::new(transport.eval(x, xi), 0.0))?;
    Ok(s.with_closed_form(transport))
}

/// The xi-independent symbol `chi(x)`.
pub fn symbol_from_mollifier(moll: &MollifiedIndicator, grid: &PhaseSpaceGrid) -> Result<Symbol> {
    check_support_on_grid(moll, grid.x_axis())?;
    transported_symbol(MollifierTransport { mollifier: *moll, shift_per_momentum: 0.0 }, grid)
}

/// Shift per unit momentum of the `k`-th factor, `k t / (N m)`.
pub fn shift_coefficient(k: usize, n: usize, t: f64, params: &PhysicalParams) -> f64 {
    k as f64 * t / (n as f64 * params.mass())
}

/// `chi(x + k t xi / (N m))`.
pub fn shifted_symbol(
    moll: &MollifiedIndicator,
    k: usize,
    n: usize,
    t: f64,
    params: &PhysicalParams,
    grid: &PhaseSpaceGrid,
) -> Result<Symbol> {
    if n == 0 || k > n {
        return Err(Error::InvalidParameter(format!("factor index {k} outside 0..={n}")));
    }
    let shift = shift_coefficient(k, n, t, params);
    transported_symbol(MollifierTransport { mollifier: *moll, shift_per_momentum: shift }, grid)
}

/// Classical exit times from the region and from its dilation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EscapeTimes {
    pub t_xi: f64,
    pub t_xi_n: f64,
}

/// `T = m delta / |xi|` for the region and for its `eps`-dilation.
pub fn escape_time(region: &Region, params: &PhysicalParams, xi: f64, eps: f64) -> Result<EscapeTimes> {
    if xi == 0.0 {
        return Err(Error::InfiniteEscapeTime);
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps must be non-negative, got {eps}")));
    }
    let m = params.mass();
    Ok(EscapeTimes {
        t_xi: m * region.diameter() / xi.abs(),
        t_xi_n: m * (region.diameter() + 2.0 * eps) / xi.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_space::make_grid;

    fn unit() -> Region {
        Region::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn region_validation_and_dilation() {
        assert!(Region::new(1.0, 1.0).is_err());
        assert!(Region::new(2.0, 1.0).is_err());
        let d = unit().dilation(0.1).unwrap();
        assert!((d.diameter() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn mollifier_values() {
        let m = MollifiedIndicator::new(unit(), 0.1).unwrap();
        assert_eq!(m.eval(0.5), 1.0);
        assert_eq!(m.eval(0.0), 1.0);
        assert_eq!(m.eval(1.0), 1.0);
        assert_eq!(m.eval(-0.2), 0.0);
        assert_eq!(m.eval(-0.1), 0.0);
        assert_eq!(m.eval(1.1), 0.0);
        let v = m.eval(-0.05);
        assert!(v > 0.0 && v < 1.0);
        assert!(m.eval(-0.06) < v && v < m.eval(-0.04));
        // symmetric profile: midpoint of the transition is 1/2
        assert!((v - 0.5).abs() < 1e-15);
        assert!((m.eval(1.05) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let m = MollifiedIndicator::new(unit(), 0.3).unwrap();
        let h = 1e-5;
        for &x in &[-0.25, -0.17, -0.08, -0.02, 1.03, 1.15, 1.27] {
            let d = m.derivatives(x, 3);
            let fd1 = (m.eval(x + h) - m.eval(x - h)) / (2.0 * h);
            assert!((d[1] - fd1).abs() < 1e-6 * (1.0 + d[1].abs()), "x={x}: {} vs {fd1}", d[1]);
            let lo = m.derivatives(x - h, 3);
            let hi = m.derivatives(x + h, 3);
            let fd2 = (hi[1] - lo[1]) / (2.0 * h);
            let fd3 = (hi[2] - lo[2]) / (2.0 * h);
            assert!((d[2] - fd2).abs() < 1e-5 * (1.0 + d[2].abs()), "x={x}");
            assert!((d[3] - fd3).abs() < 1e-5 * (1.0 + d[3].abs()), "x={x}");
        }
    }

    #[test]
    fn derivatives_vanish_off_transition() {
        let m = MollifiedIndicator::new(unit(), 0.1).unwrap();
        assert_eq!(m.derivatives(0.5, 4), vec![1.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.derivatives(-0.3, 4), vec![0.0; 5]);
        assert_eq!(m.derivatives(1.1, 4), vec![0.0; 5]);
    }

    #[test]
    fn derivative_bounds_scale_with_width() {
        // sup |chi^(p)| * eps^p is independent of eps
        let sup = |eps: f64, p: usize| {
            let m = MollifiedIndicator::new(unit(), eps).unwrap();
            (0..4000)
                .map(|i| -eps + eps * i as f64 / 4000.0)
                .map(|x| m.derivatives(x, p)[p].abs())
                .fold(0.0, f64::max)
                * eps.powi(p as i32)
        };
        for p in 1..=2 {
            let c1 = sup(0.2, p);
            let c2 = sup(0.05, p);
            assert!((c1 - c2).abs() < 1e-3 * c1, "p={p}: {c1} vs {c2}");
        }
    }

    #[test]
    fn eps_policy() {
        let g = make_grid(8.0, 1024).unwrap();
        let m = build_mollifier(unit(), 2, None, &g).unwrap();
        assert_eq!(m.eps(), 0.125);
        let m = build_mollifier(unit(), 64, None, &g).unwrap();
        assert_eq!(m.eps(), 8.0 * g.spacing());
        let m = build_mollifier(unit(), 64, Some(0.1), &g).unwrap();
        assert_eq!(m.eps(), 0.1);
        assert!(build_mollifier(unit(), 64, Some(0.0), &g).is_err());
        assert!(build_mollifier(unit(), 0, None, &g).is_err());
        // degenerate plateau still yields a valid cutoff
        let m = build_mollifier(unit(), 4, Some(0.6), &g).unwrap();
        assert_eq!(m.eval(0.5), 1.0);
    }

    #[test]
    fn sandwich_property_on_grid() {
        let g = make_grid(2.0, 512).unwrap();
        let m = MollifiedIndicator::new(unit(), 0.1).unwrap();
        let dil = unit().dilation(0.1).unwrap();
        for x in g.nodes() {
            let v = m.eval(x);
            assert!(unit().indicator(x) <= v && v <= dil.indicator(x));
        }
    }

    fn phase_grid() -> PhaseSpaceGrid {
        PhaseSpaceGrid::new(make_grid(4.0, 128).unwrap(), make_grid(2.0, 16).unwrap())
    }

    #[test]
    fn symbol_rows_are_identical() {
        let m = MollifiedIndicator::new(unit(), 0.1).unwrap();
        let grid = phase_grid();
        let s = symbol_from_mollifier(&m, &grid).unwrap();
        let first = s.row_at_xi(0);
        for j in 1..16 {
            assert_eq!(s.row_at_xi(j), first);
        }
        let xs = grid.x_axis().nodes();
        for (i, &x) in xs.iter().enumerate() {
            if (0.0..=1.0).contains(&x) {
                assert_eq!(first[i].re, 1.0);
            }
            if x == 2.0 {
                assert_eq!(first[i].re, 0.0);
            }
        }
        let tiny = PhaseSpaceGrid::new(make_grid(0.5, 16).unwrap(), make_grid(2.0, 16).unwrap());
        assert!(matches!(symbol_from_mollifier(&m, &tiny), Err(Error::GridTooSmall(_))));
    }

    #[test]
    fn shifted_symbol_examples() {
        let m = MollifiedIndicator::new(unit(), 0.1).unwrap();
        let grid = phase_grid();
        let p = PhysicalParams::new(1.0, 1.0).unwrap();
        let s0 = shifted_symbol(&m, 0, 4, 1.0, &p, &grid).unwrap();
        let base = symbol_from_mollifier(&m, &grid).unwrap();
        assert_eq!(s0.values(), base.values());
        let s4 = shifted_symbol(&m, 4, 4, 1.0, &p, &grid).unwrap();
        let j0 = grid.xi_axis().nearest_index(0.0);
        assert_eq!(grid.xi_axis().node(j0), 0.0);
        assert_eq!(s4.row_at_xi(j0), base.row_at_xi(j0));
        let s2 = shifted_symbol(&m, 2, 4, 1.0, &p, &grid).unwrap();
        let i = grid.x_axis().nearest_index(0.0);
        let j = grid.xi_axis().nearest_index(1.0);
        assert_eq!(s2.values()[[i, j]].re, 1.0);
        assert!(shifted_symbol(&m, 5, 4, 1.0, &p, &grid).is_err());
    }

    #[test]
    fn escape_time_examples() {
        let p = PhysicalParams::new(1.0, 1.0).unwrap();
        let e = escape_time(&unit(), &p, 2.0, 0.0).unwrap();
        assert_eq!(e.t_xi, 0.5);
        assert_eq!(e.t_xi_n, 0.5);
        let e = escape_time(&unit(), &p, 2.0, 0.1).unwrap();
        assert!((e.t_xi_n - 0.6).abs() < 1e-15);
        assert!(e.t_xi_n > e.t_xi);
        assert_eq!(escape_time(&unit(), &p, 0.0, 0.1), Err(Error::InfiniteEscapeTime));
        let e = escape_time(&unit(), &p, -2.0, 0.0).unwrap();
        assert_eq!(e.t_xi, 0.5);
    }
}
