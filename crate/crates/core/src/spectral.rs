//! FFT plumbing shared by the grid, propagation and symbol-calculus code.
//!
//! Transforms are unnormalized in the forward direction and carry the `1/M`
//! factor in the inverse, so `inverse(forward(v)) == v`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

pub(crate) fn plan(len: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(len)
        } else {
            p.plan_fft_inverse(len)
        }
    })
}

/// In-place forward DFT: `X_n = sum_i v_i exp(-2 pi i n i / M)`.
pub fn forward(v: &mut [Complex64]) {
    plan(v.len(), true).process(v);
}

/// In-place inverse DFT including the `1/M` normalization.
pub fn inverse(v: &mut [Complex64]) {
    let m = v.len();
    plan(m, false).process(v);
    let s = 1.0 / m as f64;
    v.iter_mut().for_each(|z| *z *= s);
}

/// Angular wavenumbers of a length-`m` transform with spacing `dx`, in FFT
/// storage order (non-negative first, Nyquist stored as negative).
pub fn wavenumbers(m: usize, dx: f64) -> Vec<f64> {
    let base = 2.0 * PI / (m as f64 * dx);
    (0..m)
        .map(|n| {
            let n = n as i64;
            let signed = if n < (m as i64 + 1) / 2 { n } else { n - m as i64 };
            base * signed as f64
        })
        .collect()
}

/// Index of the Nyquist mode when `m` is even.
pub(crate) fn nyquist(m: usize) -> Option<usize> {
    (m % 2 == 0).then_some(m / 2)
}

fn transform_axis(field: &mut Array2<Complex64>, axis: Axis, fwd: bool) {
    let len = field.len_of(axis);
    let p = plan(len, fwd);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    let scale = if fwd { 1.0 } else { 1.0 / len as f64 };
    for mut lane in field.lanes_mut(axis) {
        for (b, z) in buf.iter_mut().zip(lane.iter()) {
            *b = *z;
        }
        p.process(&mut buf);
        for (z, b) in lane.iter_mut().zip(buf.iter()) {
            *z = *b * scale;
        }
    }
}

pub fn forward_2d(field: &mut Array2<Complex64>) {
    transform_axis(field, Axis(0), true);
    transform_axis(field, Axis(1), true);
}

pub fn inverse_2d(field: &mut Array2<Complex64>) {
    transform_axis(field, Axis(0), false);
    transform_axis(field, Axis(1), false);
}

pub fn forward_axis(field: &mut Array2<Complex64>, axis: Axis) {
    transform_axis(field, axis, true);
}

pub fn inverse_axis(field: &mut Array2<Complex64>, axis: Axis) {
    transform_axis(field, axis, false);
}

/// `(i k)^order` with the Nyquist mode zeroed for odd orders, so that odd
/// derivatives of real fields stay real.
pub(crate) fn derivative_multipliers(m: usize, d: f64, order: usize) -> Vec<Complex64> {
    let ks = wavenumbers(m, d);
    let ny = nyquist(m);
    ks.iter()
        .enumerate()
        .map(|(n, &k)| {
            if order % 2 == 1 && Some(n) == ny {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, k).powu(order as u32)
            }
        })
        .collect()
}

/// Mixed spectral derivative `d^a/dx^a d^b/dxi^b` of a periodic field with
/// x along axis 0 and xi along axis 1.
pub fn mixed_derivative(field: &Array2<Complex64>, a: usize, b: usize, dx: f64, dxi: f64) -> Array2<Complex64> {
    let mut hat = field.clone();
    if a == 0 && b == 0 {
        return hat;
    }
    forward_2d(&mut hat);
    apply_mixed_multipliers(&mut hat, a, b, dx, dxi);
    inverse_2d(&mut hat);
    hat
}

/// Multiply an already transformed field by `(i p)^a (i q)^b`.
pub(crate) fn apply_mixed_multipliers(hat: &mut Array2<Complex64>, a: usize, b: usize, dx: f64, dxi: f64) {
    let (mx, mk) = hat.dim();
    let px = derivative_multipliers(mx, dx, a);
    let qx = derivative_multipliers(mk, dxi, b);
    for ((i, j), z) in hat.indexed_iter_mut() {
        *z *= px[i] * qx[j];
    }
}

/// Band-limited interpolation along axis 0 onto the doubled grid
/// `x_0 + n dx / 2`, `n = 0 .. 2M`. Even rows reproduce the input.
pub fn refine_axis0(field: &Array2<Complex64>) -> Array2<Complex64> {
    let (m, cols) = field.dim();
    let mut hat = field.clone();
    forward_axis(&mut hat, Axis(0));
    let mut big = Array2::<Complex64>::zeros((2 * m, cols));
    let half = m / 2;
    for j in 0..cols {
        for n in 0..m {
            let z = hat[[n, j]];
            if m % 2 == 0 && n == half {
                // split the Nyquist coefficient symmetrically
                big[[half, j]] += z * 0.5;
                big[[2 * m - half, j]] += z * 0.5;
            } else if n < half || (m % 2 == 1 && n == half) {
                big[[n, j]] = z;
            } else {
                big[[n + m, j]] = z;
            }
        }
    }
    inverse_axis(&mut big, Axis(0));
    big.mapv_inplace(|z| z * 2.0);
    big
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_are_symmetric_with_negative_nyquist() {
        let k = wavenumbers(8, 0.5);
        let base = 2.0 * PI / 4.0;
        assert_eq!(k[0], 0.0);
        assert!((k[1] - base).abs() < 1e-15);
        assert!((k[4] + 4.0 * base).abs() < 1e-12);
        assert!((k[7] + base).abs() < 1e-15);
    }

    #[test]
    fn spectral_derivative_of_sine() {
        let m = 32;
        let dx = 2.0 * PI / m as f64;
        let mut f = Array2::<Complex64>::zeros((m, 1));
        for i in 0..m {
            f[[i, 0]] = Complex64::new((3.0 * i as f64 * dx).sin(), 0.0);
        }
        let d = mixed_derivative(&f, 1, 0, dx, 1.0);
        for i in 0..m {
            let exact = 3.0 * (3.0 * i as f64 * dx).cos();
            assert!((d[[i, 0]].re - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn refinement_interpolates_trig_polynomial() {
        let m = 16;
        let dx = 2.0 * PI / m as f64;
        let f = Array2::from_shape_fn((m, 1), |(i, _)| {
            let x = i as f64 * dx;
            Complex64::new((2.0 * x).cos() + 0.5 * (5.0 * x).sin(), 0.0)
        });
        let g = refine_axis0(&f);
        for n in 0..2 * m {
            let x = n as f64 * dx / 2.0;
            let exact = (2.0 * x).cos() + 0.5 * (5.0 * x).sin();
            assert!((g[[n, 0]].re - exact).abs() < 1e-12, "n={n}");
        }
    }
}
