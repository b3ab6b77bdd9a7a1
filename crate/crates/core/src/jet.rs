//! Truncated Taylor arithmetic.
//!
//! [`Taylor`] helpers act on univariate coefficient vectors `c_n = f^{(n)}/n!`;
//! [`Jet2`] stores mixed partial derivatives `d^a/dx^a d^b/dxi^b` of a
//! phase-space function at one point, for `a + b <= order`.

/// Univariate truncated power series operations on coefficient slices of equal length.
pub struct Taylor;

impl Taylor {
    pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
        let n = a.len();
        (0..n).map(|k| (0..=k).map(|i| a[i] * b[k - i]).sum()).collect()
    }

    /// `1 / a`, requires `a[0] != 0`.
    pub fn recip(a: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut c = vec![0.0; n];
        c[0] = 1.0 / a[0];
        for k in 1..n {
            let s: f64 = (1..=k).map(|i| a[i] * c[k - i]).sum();
            c[k] = -s / a[0];
        }
        c
    }

    pub fn exp(a: &[f64]) -> Vec<f64> {
        let n = a.len();
        let mut b = vec![0.0; n];
        b[0] = a[0].exp();
        for k in 1..n {
            let s: f64 = (1..=k).map(|i| i as f64 * a[i] * b[k - i]).sum();
            b[k] = s / k as f64;
        }
        b
    }
}

/// Mixed derivatives `D[a][b] = d^a_x d^b_xi f` for `a + b <= order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet2 {
    order: usize,
    data: Vec<f64>,
}

impl Jet2 {
    pub fn zeros(order: usize) -> Self {
        Self { order, data: vec![0.0; (order + 1) * (order + 1)] }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    fn idx(&self, a: usize, b: usize) -> usize {
        a * (self.order + 1) + b
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[self.idx(a, b)]
    }

    #[inline]
    pub fn set(&mut self, a: usize, b: usize, v: f64) {
        let i = self.idx(a, b);
        self.data[i] = v;
    }

    pub fn value(&self) -> f64 {
        self.data[0]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }

    /// Derivative jet `d^da_x d^db_xi f`, truncated to `order`.
    pub fn derivative(&self, da: usize, db: usize, order: usize) -> Jet2 {
        debug_assert!(order + da + db <= self.order);
        let mut out = Jet2::zeros(order);
        for a in 0..=order {
            for b in 0..=order - a {
                out.set(a, b, self.get(a + da, b + db));
            }
        }
        out
    }

    /// Leibniz product, truncated to `order` (both inputs must reach it).
    pub fn mul(&self, other: &Jet2, order: usize) -> Jet2 {
        let mut out = Jet2::zeros(order);
        for a in 0..=order {
            for b in 0..=order - a {
                let mut s = 0.0;
                for a1 in 0..=a {
                    let ca = binomial(a, a1);
                    for b1 in 0..=b {
                        s += ca * binomial(b, b1) * self.get(a1, b1) * other.get(a - a1, b - b1);
                    }
                }
                out.set(a, b, s);
            }
        }
        out
    }

    /// `self += s * other` on the common triangle.
    pub fn add_scaled(&mut self, other: &Jet2, s: f64) {
        let order = self.order.min(other.order);
        for a in 0..=order {
            for b in 0..=order - a {
                let v = self.get(a, b) + s * other.get(a, b);
                self.set(a, b, v);
            }
        }
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut r = 1.0;
    for i in 0..k {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `sum_r C(l,r) (-1)^(l-r) (d_x^r d_xi^(l-r) f)(d_xi^r d_x^(l-r) g)`, truncated to `order`.
pub fn sharp_jet(f: &Jet2, g: &Jet2, l: usize, order: usize) -> Jet2 {
    let mut out = Jet2::zeros(order);
    for r in 0..=l {
        let sign = if (l - r) % 2 == 0 { 1.0 } else { -1.0 };
        let df = f.derivative(r, l - r, order);
        let dg = g.derivative(l - r, r, order);
        out.add_scaled(&df.mul(&dg, order), sign * binomial(l, r));
    }
    out
}
