#![allow(dead_code)]

use std::collections::HashMap;

use ndarray::Array2;
use num_complex::Complex64;
use qzeno::dynamics::FreePropagator;
use qzeno::phase_space::{make_grid, PhaseSpaceGrid, PhysicalParams, SpatialGrid, Symbol, WaveFunction};
use qzeno::quantization::{weyl_symbol_at, OperatorMatrix};
use qzeno::spectral;
use qzeno::symbols::{shift_coefficient, MollifiedIndicator};

pub fn binom(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn fact(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// Products of derivatives of the factors: key `[(a_0, b_0), ..., (a_m, b_m)]`.
type Poly = HashMap<Vec<(usize, usize)>, Complex64>;

fn diff(p: &Poly, dx: usize, dxi: usize) -> Poly {
    let mut cur = p.clone();
    for step in 0..dx + dxi {
        let along_x = step < dx;
        let mut next = Poly::new();
        for (key, &c) in &cur {
            for k in 0..key.len() {
                let mut nk = key.clone();
                if along_x {
                    nk[k].0 += 1;
                } else {
                    nk[k].1 += 1;
                }
                *next.entry(nk).or_default() += c;
            }
        }
        cur = next;
    }
    cur
}

/// `sharp_l(theta_new, p)` with `theta_new` appended as the last factor.
fn sharp_new_factor(p: &Poly, l: usize) -> Poly {
    let mut out = Poly::new();
    for r in 0..=l {
        let sign = if (l - r) % 2 == 0 { 1.0 } else { -1.0 };
        let dp = diff(p, l - r, r);
        for (key, &c) in &dp {
            let mut nk = key.clone();
            nk.push((r, l - r));
            *out.entry(nk).or_default() += c * sign * binom(l, r);
        }
    }
    out
}

fn compositions(parts: usize, max_total: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 0..=max_total {
        for mut rest in compositions(parts - 1, max_total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// `Theta_j(x, xi)` for `j <= order` by enumerating every `(j_1, ..., j_N)`
/// and expanding the nested bidifferential operators term by term.
pub fn composition_oracle(
    moll: &MollifiedIndicator,
    n: usize,
    t: f64,
    x: f64,
    xi: f64,
    order: usize,
    params: &PhysicalParams,
) -> Vec<Complex64> {
    let shifts: Vec<f64> = (0..=n).map(|k| shift_coefficient(k, n, t, params)).collect();
    let derivs: Vec<Vec<f64>> = shifts.iter().map(|&c| moll.derivatives(x + c * xi, order + 1)).collect();
    let half_i = Complex64::new(0.0, 0.5);
    let mut out = vec![Complex64::new(0.0, 0.0); order + 1];
    for comp in compositions(n, order) {
        let total: usize = comp.iter().sum();
        let mut p = Poly::new();
        p.insert(vec![(0, 0)], Complex64::new(1.0, 0.0));
        let mut weight = Complex64::new(1.0, 0.0);
        for &l in &comp {
            p = sharp_new_factor(&p, l);
            weight *= half_i.powu(l as u32) / fact(l);
        }
        let mut value = Complex64::new(0.0, 0.0);
        for (key, &c) in &p {
            let mut term = c;
            for (k, &(a, b)) in key.iter().enumerate() {
                term *= shifts[k].powi(b as i32) * derivs[k][a + b];
            }
            value += term;
        }
        out[total] += weight * value;
    }
    out
}

/// Weyl symbol of `Pi P_N(t) ... P_N(0) Pi` at the sample points, where
/// `P_N(s) = U(-s) chi U(s)`, `s = k t / N`, and `Pi` keeps `|hbar k| <= xi_cut`.
/// Returns `[x sample][xi sample]` and the node positions used.
pub fn operator_product_symbol(
    moll: &MollifiedIndicator,
    n: usize,
    t: f64,
    params: &PhysicalParams,
    half_width: f64,
    points: usize,
    xi_cut: f64,
    x_samples: &[f64],
    xis: &[f64],
) -> (Vec<f64>, Vec<Vec<Complex64>>) {
    let grid = make_grid(half_width, points).unwrap();
    let hbar = params.hbar();
    let keep: Vec<f64> = spectral::wavenumbers(points, grid.spacing())
        .iter()
        .map(|k| if (hbar * k).abs() <= xi_cut { 1.0 } else { 0.0 })
        .collect();
    let filter = |psi: &WaveFunction| -> WaveFunction {
        let mut v = psi.values().to_vec();
        spectral::forward(&mut v);
        for (z, w) in v.iter_mut().zip(&keep) {
            *z *= *w;
        }
        spectral::inverse(&mut v);
        WaveFunction::new(grid, v.into()).unwrap()
    };
    let chi: Vec<f64> = grid.nodes().iter().map(|&x| moll.eval(x)).collect();
    let op = OperatorMatrix::from_column_map(grid, |e| {
        let mut v = filter(e);
        for k in 0..=n {
            let s = k as f64 * t / n as f64;
            let moved = FreePropagator::new(grid, params, s).apply_unchecked(&v)?;
            let cut: Vec<Complex64> = moved.values().iter().zip(&chi).map(|(z, c)| z * c).collect();
            v = FreePropagator::new(grid, params, -s).apply_unchecked(&WaveFunction::new(grid, cut.into())?)?;
        }
        Ok(filter(&v))
    })
    .unwrap();
    let mut nodes = Vec::new();
    let mut rows = Vec::new();
    for &x in x_samples {
        let i = grid.nearest_index(x);
        nodes.push(grid.node(i));
        rows.push(weyl_symbol_at(&op, i, xis, params));
    }
    (nodes, rows)
}

/// `exp(-(x-x0)^2/(2 sx^2) - (xi-xi0)^2/(2 sxi^2))`.
pub fn gaussian_symbol(grid: PhaseSpaceGrid, x0: f64, xi0: f64, sx: f64, sxi: f64) -> Symbol {
    Symbol::from_real_fn(grid, |x, xi| (-(x - x0).powi(2) / (2.0 * sx * sx) - (xi - xi0).powi(2) / (2.0 * sxi * sxi)).exp()).unwrap()
}

pub fn square_grid(half_width: f64, points: usize) -> PhaseSpaceGrid {
    let g = make_grid(half_width, points).unwrap();
    PhaseSpaceGrid::new(g, g)
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    num / den
}

pub fn max_entry_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter().zip(b.iter()).fold(0.0f64, |m, (p, q)| m.max((p - q).norm()))
}

pub fn reference_grid() -> SpatialGrid {
    make_grid(8.0, 2048).unwrap()
}
