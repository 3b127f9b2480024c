//! Decay exponents, energy functionals, convergence metrics and power-law
//! fits of their time series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lane_emden::LaneEmdenProfile;
use crate::numerics::{self, trapezoid};
use crate::star_state::{nodal_rx, r_over_x, ModelParams, SimState};

/// Decay exponents for one `(γ, θ, ι)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentSet {
    pub gamma: f64,
    pub theta: f64,
    pub iota: f64,
    pub alpha: f64,
    pub beta: f64,
    pub varsigma: f64,
    pub a: f64,
    pub b_grid: Vec<f64>,
}

/// Largest admissible `ι`, also the default.
pub fn default_iota(gamma: f64, theta: f64) -> f64 {
    (2.0 * gamma - 2.0 - theta) / 8.0
}

/// `{0, (2-γ)/2, 2-γ}`.
pub fn default_b_grid(gamma: f64) -> Vec<f64> {
    vec![0.0, (2.0 - gamma) / 2.0, 2.0 - gamma]
}

/// Closed-form exponents. `iota` must lie in `(0, (2γ-2-θ)/8]`.
pub fn exponents(params: &ModelParams, iota: f64) -> Result<ExponentSet> {
    let (g, th) = (params.gamma, params.theta);
    let iota_max = default_iota(g, th);
    // one ulp of slack so that the default itself is accepted
    if !(iota > 0.0 && iota <= iota_max * (1.0 + f64::EPSILON)) {
        return Err(Error::param(
            "iota",
            format!("iota must satisfy 0 < iota <= (2 gamma - 2 - theta)/8 = {iota_max}, got {iota}"),
        ));
    }
    let alpha = (g - 1.0 + th).min(2.0 * (g - 1.0)) - iota;
    let beta = 1.0 + (alpha - iota) / (g - th);
    let varsigma = (0.5 * beta + 0.5 * (beta - 1.0) * (1.0f64).min((g - th) / alpha)).min(1.0);
    let lead = (g - 1.0 + alpha - th) / (g + alpha - th) * beta;
    let terms = [
        beta - 1.0,
        lead,
        (3.0 * beta + varsigma) / 4.0 - (beta - varsigma) / (4.0 * alpha) * (4.0 * th - 4.0 * (g - 1.0) - alpha).max(0.0),
        beta - (beta - varsigma) / (2.0 * alpha) * (2.0 * th - 2.0 * (g - 1.0)).max(0.0),
        beta / 2.0 - beta / (2.0 * (g + alpha - th)) * (4.0 * th - g - 1.0).max(0.0),
    ];
    let a = terms.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ExponentSet {
        gamma: g,
        theta: th,
        iota,
        alpha,
        beta,
        varsigma,
        a,
        b_grid: default_b_grid(g),
    })
}

/// Envelope rates `p` in `Q(t) ≲ (1+t)^{-p}` for the tracked quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedRates {
    pub sup_r_err: f64,
    pub sup_v: f64,
    pub sup_rx_err: f64,
    pub rho_err_sup: Vec<f64>,
    pub vr_sup: f64,
    pub r_err: f64,
    /// `|r - x|²` away from the boundary.
    pub interior_r_err: f64,
}

impl ExponentSet {
    pub fn with_b_grid(mut self, b_grid: Vec<f64>) -> Result<Self> {
        if let Some(b) = b_grid.iter().find(|b| !(**b >= 0.0 && **b <= 2.0 - self.gamma)) {
            return Err(Error::param("b_grid", format!("b must lie in [0, 2 - gamma], got {b}")));
        }
        self.b_grid = b_grid;
        Ok(self)
    }

    pub fn rates(&self) -> PredictedRates {
        let (g, th, al, be) = (self.gamma, self.theta, self.alpha, self.beta);
        let lead = (g - 1.0 + al - th) / (g + al - th) * be;
        PredictedRates {
            sup_r_err: lead,
            sup_v: be / 2.0,
            sup_rx_err: be - 1.0,
            rho_err_sup: self
                .b_grid
                .iter()
                .map(|b| (be / 2.0 - (3.0 * g - 5.0 + 2.0 * b).max(0.0) / (2.0 * (g - th))).min(be - 1.0))
                .collect(),
            vr_sup: self.a,
            r_err: lead / 2.0,
            interior_r_err: (3.0 * g - 2.0 + 2.0 * (al - th)) / (2.0 * (g + al - th)) * be - 0.5,
        }
    }
}

/// Node-by-node first and second derivatives used by the functionals.
struct Calculus {
    rx: Vec<f64>,
    s: Vec<f64>,
}

impl Calculus {
    fn new(state: &SimState, profile: &LaneEmdenProfile) -> Result<Self> {
        let rx = nodal_rx(&state.r, profile.dx)?;
        let s = r_over_x(&state.r, &profile.x, &rx);
        Ok(Self { rx, s })
    }
}

/// The three parts of `ℰ(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyParts {
    pub sup_term: f64,
    pub second_derivative_term: f64,
    pub vt_term: f64,
}

impl EnergyParts {
    pub fn total(&self) -> f64 {
        self.sup_term + self.second_derivative_term + self.vt_term
    }
}

/// `ℰ = sup[(r_x-1)² + v_x²] + ∫ρ̄^{2γ-1}[((r/x)_x)² + r_xx²] + ∫ρ̄ v_t²`.
pub fn energy_parts(state: &SimState, vt: &[f64], profile: &LaneEmdenProfile) -> Result<EnergyParts> {
    let c = Calculus::new(state, profile)?;
    let dx = profile.dx;
    let vx = numerics::gradient(&state.v, dx);
    let sup_term = c
        .rx
        .iter()
        .zip(&vx)
        .map(|(q, w)| (q - 1.0).powi(2) + w * w)
        .fold(0.0, f64::max);
    let sx = numerics::gradient(&c.s, dx);
    let rxx = numerics::second_derivative(&state.r, dx);
    let w = 2.0 * profile.gamma - 1.0;
    let second: Vec<f64> = (0..sx.len())
        .map(|i| profile.rho_bar[i].powf(w) * (sx[i] * sx[i] + rxx[i] * rxx[i]))
        .collect();
    let kin: Vec<f64> = vt.iter().zip(&profile.rho_bar).map(|(a, r)| r * a * a).collect();
    Ok(EnergyParts {
        sup_term,
        second_derivative_term: trapezoid(&second, dx),
        vt_term: trapezoid(&kin, dx),
    })
}

pub fn energy_e(state: &SimState, vt: &[f64], profile: &LaneEmdenProfile) -> Result<f64> {
    energy_parts(state, vt, profile).map(|p| p.total())
}

/// The bracket of `η` as a function of `s = r/x` and `q = r_x`; vanishes
/// to second order at `s = q = 1`.
pub fn eta_bracket(gamma: f64, s: f64, q: f64) -> f64 {
    s.powf(2.0 - 2.0 * gamma) * q.powf(1.0 - gamma) / (gamma - 1.0) + q / (s * s) - 4.0 / s
        - (4.0 - 3.0 * gamma) / (gamma - 1.0)
}

/// Upper-bound constant `C(γ)`: sampled supremum of
/// `bracket / ((s-1)² + (q-1)²)` over `|s-1|, |q-1| ≤ 1/2`, with a 10% margin.
pub fn eta_upper_constant(gamma: f64) -> f64 {
    const K: i32 = 100;
    let mut sup = 0.0_f64;
    for i in -K..=K {
        for j in -K..=K {
            if i == 0 && j == 0 {
                continue;
            }
            let (a, b) = (0.5 * i as f64 / K as f64, 0.5 * j as f64 / K as f64);
            sup = sup.max(eta_bracket(gamma, 1.0 + a, 1.0 + b) / (a * a + b * b));
        }
    }
    // the Hessian at (1, 1) bounds the ratio near the centre
    let hess = [4.0 * gamma - 4.0, 2.0 * gamma - 4.0, gamma];
    let tr = hess[0] + hess[2];
    let det = hess[0] * hess[2] - hess[1] * hess[1];
    let lam_max = 0.5 * (tr + (tr * tr - 4.0 * det).sqrt());
    1.1 * sup.max(0.5 * lam_max)
}

/// `∫η dx` with a nodewise check of the quadratic bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaReport {
    pub value: f64,
    /// `|r_x - 1|, |r/x - 1| ≤ 1/2` at every node.
    pub in_regime: bool,
    pub lower_ok: bool,
    pub upper_ok: bool,
    /// Smallest `(η - lower) / max(x²ρ̄^γ)` over nodes.
    pub lower_margin: f64,
    /// Smallest `(upper - η) / max(x²ρ̄^γ)` over nodes.
    pub upper_margin: f64,
    pub c_upper: f64,
}

/// Nodal `η`.
pub fn eta_density(state: &SimState, profile: &LaneEmdenProfile, params: &ModelParams) -> Result<Vec<f64>> {
    let c = Calculus::new(state, profile)?;
    let g = params.gamma;
    Ok((0..c.s.len())
        .map(|i| {
            let x2 = profile.x[i] * profile.x[i];
            let rho = profile.rho_bar[i];
            0.5 * x2 * rho * state.v[i] * state.v[i] + x2 * rho.powf(g) * eta_bracket(g, c.s[i], c.rx[i])
        })
        .collect())
}

/// `∫η dx` by the trapezoid rule.
pub fn eta_value(state: &SimState, profile: &LaneEmdenProfile, params: &ModelParams) -> Result<f64> {
    Ok(trapezoid(&eta_density(state, profile, params)?, profile.dx))
}

/// `∫η dx` and the nodewise bounds; `c_upper` from [`eta_upper_constant`].
pub fn eta_integral_with(
    state: &SimState,
    profile: &LaneEmdenProfile,
    params: &ModelParams,
    c_upper: f64,
) -> Result<EtaReport> {
    let c = Calculus::new(state, profile)?;
    let eta = eta_density(state, profile, params)?;
    let g = params.gamma;
    let scale = profile
        .x
        .iter()
        .zip(&profile.rho_bar)
        .map(|(x, r)| x * x * r.powf(g))
        .fold(f64::MIN_POSITIVE, f64::max);
    // round-off of the bracket: a few ulps of its largest term
    let bracket_terms = 1.0 / (g - 1.0) + 5.0 + ((4.0 - 3.0 * g) / (g - 1.0)).abs();
    let in_regime = c
        .s
        .iter()
        .zip(&c.rx)
        .all(|(s, q)| (s - 1.0).abs() <= 0.5 && (q - 1.0).abs() <= 0.5);
    let (mut lower_margin, mut upper_margin) = (f64::INFINITY, f64::INFINITY);
    let (mut lower_ok, mut upper_ok) = (in_regime, in_regime);
    for i in 0..eta.len() {
        let x2 = profile.x[i] * profile.x[i];
        let rho = profile.rho_bar[i];
        let kin = 0.5 * x2 * rho * state.v[i] * state.v[i];
        let (ds, dq) = (c.s[i] - 1.0, c.rx[i] - 1.0);
        let pot = x2 * rho.powf(g);
        let lower = kin + (3.0 * g - 4.0) / 4.0 * pot * (2.0 * ds * ds + dq * dq);
        let upper = kin + c_upper * pot * (ds * ds + dq * dq);
        let slack = 16.0 * f64::EPSILON * (pot * bracket_terms + kin);
        lower_ok &= eta[i] >= lower - slack;
        upper_ok &= eta[i] <= upper + slack;
        lower_margin = lower_margin.min((eta[i] - lower) / scale);
        upper_margin = upper_margin.min((upper - eta[i]) / scale);
    }
    Ok(EtaReport {
        value: trapezoid(&eta, profile.dx),
        in_regime,
        lower_ok,
        upper_ok,
        lower_margin,
        upper_margin,
        c_upper,
    })
}

pub fn eta_integral(state: &SimState, profile: &LaneEmdenProfile, params: &ModelParams) -> Result<EtaReport> {
    eta_integral_with(state, profile, params, eta_upper_constant(params.gamma))
}

/// Convergence metrics of a single state.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// `sup x |r - x|²`.
    pub sup_r_err: f64,
    /// `sup x v²`.
    pub sup_v: f64,
    /// `sup_{x ≤ l} (r_x - 1)² + (r/x - 1)²`.
    pub sup_rx_err: f64,
    /// `sup_{x ≤ l} |r - x|²`.
    pub interior_r_err: f64,
    pub r_t: f64,
    /// `|R(t) - R̄|`.
    pub r_err: f64,
    /// `sup ρ̄^{-b} |ρ - ρ̄|²` per `b` of the grid, over nodes with `ρ̄ > 0`.
    pub rho_err_sup: Vec<f64>,
    /// `sup (v_x/r_x)² + (v/r)²`.
    pub vr_sup: f64,
}

pub fn convergence_metrics(state: &SimState, profile: &LaneEmdenProfile, exps: &ExponentSet, l: f64) -> Result<Metrics> {
    let c = Calculus::new(state, profile)?;
    let x = &profile.x;
    let vx = numerics::gradient(&state.v, profile.dx);
    let mut m = Metrics {
        sup_r_err: 0.0,
        sup_v: 0.0,
        sup_rx_err: 0.0,
        interior_r_err: 0.0,
        r_t: state.boundary(),
        r_err: (state.boundary() - profile.radius).abs(),
        rho_err_sup: vec![0.0; exps.b_grid.len()],
        vr_sup: 0.0,
    };
    for i in 0..x.len() {
        let d = state.r[i] - x[i];
        m.sup_r_err = m.sup_r_err.max(x[i] * d * d);
        m.sup_v = m.sup_v.max(x[i] * state.v[i] * state.v[i]);
        if x[i] <= l {
            m.sup_rx_err = m.sup_rx_err.max((c.rx[i] - 1.0).powi(2) + (c.s[i] - 1.0).powi(2));
            m.interior_r_err = m.interior_r_err.max(d * d);
        }
        let ur = vx[i] / c.rx[i];
        let u_over_r = if i == 0 { ur } else { state.v[i] / state.r[i] };
        m.vr_sup = m.vr_sup.max(ur * ur + u_over_r * u_over_r);
        let rho = profile.rho_bar[i];
        if rho > 0.0 {
            let f = rho / (c.s[i] * c.s[i] * c.rx[i]);
            for (k, b) in exps.b_grid.iter().enumerate() {
                m.rho_err_sup[k] = m.rho_err_sup[k].max(rho.powf(-b) * (f - rho).powi(2));
            }
        }
    }
    Ok(m)
}

/// One row of the time series.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub energy_e: f64,
    pub eta_int: f64,
    /// `(1+t)∫x²{ρ̄v² + ρ̄^γ[(r/x-1)² + (r_x-1)²]} + ∫x²ρ̄^θ[(r_x-1)² + (r/x-1)²]`.
    pub d: f64,
    /// `∫x²ρ̄v²`.
    pub kinetic: f64,
    pub sup_r_err: f64,
    pub sup_v: f64,
    pub sup_rx_err: f64,
    pub interior_r_err: f64,
    pub r_t: f64,
    pub r_err: f64,
    pub rho_err_sup: Vec<f64>,
    pub vr_sup: f64,
    /// `max |f r² r_x - ρ̄ x²| / max(ρ̄ x²)`.
    pub mass_err: f64,
}

impl DiagnosticsRecord {
    /// Column names, with one `rho_err_sup_<k>` per entry of the b-grid.
    pub fn keys(nb: usize) -> Vec<String> {
        let mut k: Vec<String> = [
            "t",
            "energy_e",
            "eta_int",
            "d",
            "kinetic",
            "sup_r_err",
            "sup_v",
            "sup_rx_err",
            "interior_r_err",
            "r_t",
            "r_err",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        k.extend((0..nb).map(|i| format!("rho_err_sup_{i}")));
        k.push("vr_sup".into());
        k.push("mass_err".into());
        k
    }

    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![
            self.t,
            self.energy_e,
            self.eta_int,
            self.d,
            self.kinetic,
            self.sup_r_err,
            self.sup_v,
            self.sup_rx_err,
            self.interior_r_err,
            self.r_t,
            self.r_err,
        ];
        v.extend(&self.rho_err_sup);
        v.push(self.vr_sup);
        v.push(self.mass_err);
        v
    }

    pub fn from_values(values: &[f64], nb: usize) -> Result<Self> {
        if values.len() != 13 + nb {
            return Err(Error::Input(format!("expected {} columns, got {}", 13 + nb, values.len())));
        }
        Ok(Self {
            t: values[0],
            energy_e: values[1],
            eta_int: values[2],
            d: values[3],
            kinetic: values[4],
            sup_r_err: values[5],
            sup_v: values[6],
            sup_rx_err: values[7],
            interior_r_err: values[8],
            r_t: values[9],
            r_err: values[10],
            rho_err_sup: values[11..11 + nb].to_vec(),
            vr_sup: values[11 + nb],
            mass_err: values[12 + nb],
        })
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        let keys = Self::keys(self.rho_err_sup.len());
        keys.iter().position(|k| k == key).map(|i| self.values()[i])
    }
}

/// Full diagnostics of `state`; `vt` is the momentum-equation acceleration.
pub fn record(
    state: &SimState,
    vt: &[f64],
    profile: &LaneEmdenProfile,
    params: &ModelParams,
    exps: &ExponentSet,
    l: f64,
) -> Result<DiagnosticsRecord> {
    let c = Calculus::new(state, profile)?;
    let m = convergence_metrics(state, profile, exps, l)?;
    let (g, th) = (params.gamma, params.theta);
    let n = profile.x.len();
    let mut kin = vec![0.0; n];
    let mut pot = vec![0.0; n];
    let mut visc = vec![0.0; n];
    let mut mass_err = 0.0_f64;
    let mut mass_scale = 0.0_f64;
    for i in 0..n {
        let x2 = profile.x[i] * profile.x[i];
        let rho = profile.rho_bar[i];
        let dev = (c.s[i] - 1.0).powi(2) + (c.rx[i] - 1.0).powi(2);
        kin[i] = x2 * rho * state.v[i] * state.v[i];
        pot[i] = x2 * rho.powf(g) * dev;
        visc[i] = x2 * rho.powf(th) * dev;
        let f = rho / (c.s[i] * c.s[i] * c.rx[i]);
        mass_err = mass_err.max((f * state.r[i] * state.r[i] * c.rx[i] - rho * x2).abs());
        mass_scale = mass_scale.max(rho * x2);
    }
    let dx = profile.dx;
    let kinetic = trapezoid(&kin, dx);
    Ok(DiagnosticsRecord {
        t: state.t,
        energy_e: energy_e(state, vt, profile)?,
        eta_int: eta_value(state, profile, params)?,
        d: (1.0 + state.t) * (kinetic + trapezoid(&pot, dx)) + trapezoid(&visc, dx),
        kinetic,
        sup_r_err: m.sup_r_err,
        sup_v: m.sup_v,
        sup_rx_err: m.sup_rx_err,
        interior_r_err: m.interior_r_err,
        r_t: m.r_t,
        r_err: m.r_err,
        rho_err_sup: m.rho_err_sup,
        vr_sup: m.vr_sup,
        mass_err: mass_err / mass_scale,
    })
}

/// Least-squares line through `(log(1+t), log q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub const MIN_FIT_SAMPLES: usize = 10;

/// Fit `log q = intercept + slope·log(1+t)` over samples with `t ≥ t_min`.
pub fn fit_power_law(t: &[f64], q: &[f64], key: &str, t_min: f64) -> Result<DecayFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&ti, &qi) in t.iter().zip(q) {
        if ti < t_min {
            continue;
        }
        if !(qi > 0.0) {
            return Err(Error::NonPositive {
                key: key.to_string(),
                t: ti,
                value: qi,
            });
        }
        xs.push((1.0 + ti).ln());
        ys.push(qi.ln());
    }
    if xs.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            have: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("fit window has a single time value".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayFit {
        slope,
        intercept,
        r_squared,
    })
}

/// [`fit_power_law`] on one column of a history.
pub fn fit_decay(history: &[DiagnosticsRecord], key: &str, t_min: f64) -> Result<DecayFit> {
    let t: Vec<f64> = history.iter().map(|r| r.t).collect();
    let q = history
        .iter()
        .map(|r| r.get(key).ok_or_else(|| Error::Input(format!("unknown series key `{key}`"))))
        .collect::<Result<Vec<f64>>>()?;
    fit_power_law(&t, &q, key, t_min)
}
