//! Grid calculus, quadrature, interpolation and the tridiagonal solver shared
//! by the physics modules.
//!
//! All grids are uniform with spacing `h`. Nodal derivatives are centered at
//! interior nodes and one-sided second order at both ends.

use crate::error::{Error, Result};

/// First derivative at every node.
pub fn gradient(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 3, "gradient needs at least three nodes");
    let mut d = vec![0.0; n];
    d[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    d[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
    d
}

/// Second derivative at every node.
pub fn second_derivative(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    assert!(n >= 4, "second_derivative needs at least four nodes");
    let h2 = h * h;
    let mut d = vec![0.0; n];
    d[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / h2;
    for i in 1..n - 1 {
        d[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
    }
    d[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / h2;
    d
}

/// Composite trapezoid rule over the whole grid.
pub fn trapezoid(f: &[f64], h: f64) -> f64 {
    match f.len() {
        0 | 1 => 0.0,
        n => h * (0.5 * (f[0] + f[n - 1]) + f[1..n - 1].iter().sum::<f64>()),
    }
}

/// `out[i] = ∫_{x_i}^{x_end} f` by the composite trapezoid rule.
pub fn tail_trapezoid(f: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in (0..n.saturating_sub(1)).rev() {
        out[i] = out[i + 1] + 0.5 * h * (f[i] + f[i + 1]);
    }
    out
}

/// Discrete L2 norm `sqrt(h Σ f²)`.
pub fn l2_norm(f: &[f64], h: f64) -> f64 {
    (h * f.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

pub fn max_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Tridiagonal matrix stored by diagonals. `lower[i]` multiplies `x[i - 1]`
/// in row `i` and `upper[i]` multiplies `x[i + 1]`; `lower[0]` and the last
/// `upper` entry are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut y = self.diag[i] * x[i];
                if i > 0 {
                    y += self.lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    y += self.upper[i] * x[i + 1];
                }
                y
            })
            .collect()
    }

    /// Thomas algorithm. Fails on a vanishing or non-finite pivot.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.len();
        if rhs.len() != n {
            return Err(Error::LinearSolve(format!(
                "right-hand side has length {}, matrix has {n} rows",
                rhs.len()
            )));
        }
        if n == 0 {
            return Ok(Vec::new());
        }
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut pivot = self.diag[0];
        for i in 0..n {
            if i > 0 {
                pivot = self.diag[i] - self.lower[i] * c[i - 1];
            }
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::LinearSolve(format!("pivot {pivot} in row {i}")));
            }
            c[i] = if i + 1 < n { self.upper[i] / pivot } else { 0.0 };
            let prev = if i > 0 { self.lower[i] * d[i - 1] } else { 0.0 };
            d[i] = (rhs[i] - prev) / pivot;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }
}

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    slope: Vec<f64>,
}

impl Pchip {
    pub fn new(x: &[f64], y: &[f64]) -> Result<Self> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(Error::Input(format!(
                "pchip needs matching tables of length >= 2 (got {} and {})",
                n,
                y.len()
            )));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("pchip abscissae must increase strictly".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut slope = vec![0.0; n];
        if n == 2 {
            slope[0] = delta[0];
            slope[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] <= 0.0 {
                    slope[k] = 0.0;
                } else {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    slope[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            slope[0] = end_slope(h[0], h[1], delta[0], delta[1]);
            slope[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            slope,
        })
    }

    fn locate(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xi| xi <= t) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_with_derivative(t).0
    }

    pub fn eval_with_derivative(&self, t: f64) -> (f64, f64) {
        let k = self.locate(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (m0, m1) = (self.slope[k] * h, self.slope[k + 1] * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let value = (2.0 * s3 - 3.0 * s2 + 1.0) * y0
            + (s3 - 2.0 * s2 + s) * m0
            + (-2.0 * s3 + 3.0 * s2) * y1
            + (s3 - s2) * m1;
        let deriv = ((6.0 * s2 - 6.0 * s) * y0
            + (3.0 * s2 - 4.0 * s + 1.0) * m0
            + (-6.0 * s2 + 6.0 * s) * y1
            + (3.0 * s2 - 2.0 * s) * m1)
            / h;
        (value, deriv)
    }
}

// Three-point end slope with the usual shape-preserving limiter.
fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= 0.0 {
        0.0
    } else if d0 * d1 <= 0.0 && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Eight-point Gauss-Legendre rule on `[a, b]`.
pub fn gauss_legendre8<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (node, weight) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        acc += weight * (f(mid - half * node) + f(mid + half * node));
    }
    acc * half
}

/// Uniform grid `x_i = i * length / cells`, `i = 0..=cells`.
pub fn uniform_grid(length: f64, cells: usize) -> Vec<f64> {
    let h = length / cells as f64;
    let mut x: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
    x[cells] = length;
    x
}
