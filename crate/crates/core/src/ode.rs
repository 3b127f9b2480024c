//! Adaptive Dormand-Prince 5(4) integrator with continuous (dense) output.

use crate::error::{Error, Result};

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Tolerances and step limits.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-12,
            atol: 1e-14,
            h_init: 1e-4,
            h_max: 0.05,
            max_steps: 1_000_000,
        }
    }
}

/// One accepted step together with its interpolation coefficients.
#[derive(Debug, Clone)]
pub struct Step<const N: usize> {
    pub t0: f64,
    pub h: f64,
    pub y0: [f64; N],
    pub y1: [f64; N],
    cont: [[f64; N]; 4],
}

impl<const N: usize> Step<N> {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    /// Fourth-order continuous extension inside the step.
    pub fn interpolate(&self, t: f64) -> [f64; N] {
        let s = (t - self.t0) / self.h;
        let s1 = 1.0 - s;
        let mut out = [0.0; N];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.y0[k]
                + s * (self.cont[0][k]
                    + s1 * (self.cont[1][k] + s * (self.cont[2][k] + s1 * self.cont[3][k])));
        }
        out
    }
}

/// Outcome of a single trial step.
pub struct Trial<const N: usize> {
    pub y: [f64; N],
    pub error: f64,
    k: [[f64; N]; 7],
}

fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for (coef, k) in terms {
        if *coef != 0.0 {
            for i in 0..N {
                out[i] += h * coef * k[i];
            }
        }
    }
    out
}

/// Take one Dormand-Prince step of size `h` from `(t, y)`; `f0` is the
/// derivative at the start of the step.
pub fn trial_step<const N: usize, F>(
    f: &F,
    t: f64,
    y: &[f64; N],
    f0: &[f64; N],
    h: f64,
    tol: &Tolerances,
) -> Trial<N>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut k = [[0.0; N]; 7];
    k[0] = *f0;
    for s in 1..7 {
        let terms: Vec<(f64, &[f64; N])> = (0..s).map(|j| (A[s][j], &k[j])).collect();
        let ys = axpy(y, h, &terms);
        k[s] = f(t + C[s] * h, &ys);
    }
    let terms: Vec<(f64, &[f64; N])> = (0..7).map(|j| (B[j], &k[j])).collect();
    let y_new = axpy(y, h, &terms);
    let mut err2 = 0.0;
    for i in 0..N {
        let e: f64 = (0..7).map(|j| E[j] * k[j][i]).sum::<f64>() * h;
        let sc = tol.atol + tol.rtol * y[i].abs().max(y_new[i].abs());
        err2 += (e / sc).powi(2);
    }
    Trial {
        y: y_new,
        error: (err2 / N as f64).sqrt(),
        k,
    }
}

/// Build the interpolating step from an accepted trial.
pub fn finish<const N: usize>(t0: f64, h: f64, y0: [f64; N], trial: &Trial<N>) -> Step<N> {
    let mut cont = [[0.0; N]; 4];
    for i in 0..N {
        let ydiff = trial.y[i] - y0[i];
        let bspl = h * trial.k[0][i] - ydiff;
        cont[0][i] = ydiff;
        cont[1][i] = bspl;
        cont[2][i] = ydiff - h * trial.k[6][i] - bspl;
        cont[3][i] = h * (0..7).map(|j| D[j] * trial.k[j][i]).sum::<f64>();
    }
    Step {
        t0,
        h,
        y0,
        y1: trial.y,
        cont,
    }
}

/// Integrate forward from `(t0, y0)` until `stop` returns true for an accepted
/// step end state or `t_end` is reached. Returns the accepted steps.
pub fn integrate<const N: usize, F, S>(
    f: &F,
    t0: f64,
    y0: [f64; N],
    t_end: f64,
    tol: &Tolerances,
    stop: S,
) -> Result<Vec<Step<N>>>
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
    S: Fn(f64, &[f64; N]) -> bool,
{
    let mut steps = Vec::new();
    let mut t = t0;
    let mut y = y0;
    let mut h = tol.h_init.min(tol.h_max);
    let mut fy = f(t, &y);
    while t < t_end {
        if steps.len() >= tol.max_steps {
            return Err(Error::Integration {
                xi: t,
                reason: format!("exceeded {} steps", tol.max_steps),
            });
        }
        let h_try = h.min(t_end - t);
        let trial = trial_step(f, t, &y, &fy, h_try, tol);
        if !trial.error.is_finite() {
            return Err(Error::Integration {
                xi: t,
                reason: "non-finite error estimate".into(),
            });
        }
        let factor = if trial.error == 0.0 {
            5.0
        } else {
            (0.9 * trial.error.powf(-0.2)).clamp(0.2, 5.0)
        };
        if trial.error <= 1.0 {
            let step = finish(t, h_try, y, &trial);
            t = if t_end - t <= h_try { t_end } else { t + h_try };
            y = trial.y;
            fy = trial.k[6];
            steps.push(step);
            if stop(t, &y) {
                break;
            }
            h = (h_try * factor).min(tol.h_max);
        } else {
            h = h_try * factor.min(1.0);
            if h < 1e-15 * t.abs().max(1.0) {
                return Err(Error::Integration {
                    xi: t,
                    reason: "step size underflow".into(),
                });
            }
        }
    }
    Ok(steps)
}
