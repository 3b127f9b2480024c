//! Lagrangian state `(r, v)` on the reference grid and the fields derived
//! from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lane_emden::LaneEmdenProfile;
use crate::numerics::{self, Pchip};

/// Adiabatic exponent, viscosity exponent and viscosity coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub gamma: f64,
    pub theta: f64,
    pub nu1: f64,
    pub nu2: f64,
}

impl ModelParams {
    pub fn new(gamma: f64, theta: f64, nu1: f64, nu2: f64) -> Result<Self> {
        let p = Self { gamma, theta, nu1, nu2 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 4.0 / 3.0 && self.gamma < 2.0) {
            return Err(Error::param("gamma", format!("gamma must satisfy 4/3 < gamma < 2, got {}", self.gamma)));
        }
        if !(self.theta > 0.0 && self.theta <= self.gamma / 2.0) {
            return Err(Error::param(
                "theta",
                format!("theta must satisfy 0 < theta <= gamma/2, got theta = {} with gamma = {}", self.theta, self.gamma),
            ));
        }
        if !(self.nu1 > 0.0 && self.nu1.is_finite()) {
            return Err(Error::param("nu1", format!("nu1 must be positive, got {}", self.nu1)));
        }
        if !(self.nu2 > 0.0 && self.nu2.is_finite()) {
            return Err(Error::param("nu2", format!("nu2 must be positive, got {}", self.nu2)));
        }
        Ok(())
    }

    /// `ν = 4ν₁/3 + ν₂`.
    pub fn nu(&self) -> f64 {
        4.0 * self.nu1 / 3.0 + self.nu2
    }

    /// `σ = min{2ν₁/3, ν₂}`.
    pub fn sigma(&self) -> f64 {
        (2.0 * self.nu1 / 3.0).min(self.nu2)
    }

    /// Exponent `4ν₁θ/ν` of `r/x` in the rewritten viscous term.
    pub fn k(&self) -> f64 {
        4.0 * self.nu1 * self.theta / self.nu()
    }
}

/// Flow map and velocity at the nodes of the reference grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: f64,
    pub r: Vec<f64>,
    pub v: Vec<f64>,
}

impl SimState {
    pub fn equilibrium(profile: &LaneEmdenProfile) -> Self {
        Self {
            t: 0.0,
            r: profile.x.clone(),
            v: vec![0.0; profile.x.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }

    /// Boundary radius `R(t) = r(R̄, t)`.
    pub fn boundary(&self) -> f64 {
        *self.r.last().unwrap_or(&0.0)
    }

    /// Check the origin conditions and monotonicity of `r`.
    pub fn validate(&self, nodes: usize) -> Result<()> {
        if self.r.len() != nodes || self.v.len() != nodes {
            return Err(Error::Input(format!(
                "state has {} r-values and {} v-values, grid has {nodes} nodes",
                self.r.len(),
                self.v.len()
            )));
        }
        if self.r[0] != 0.0 || self.v[0] != 0.0 {
            return Err(Error::Input("r(0) and v(0) must vanish".into()));
        }
        check_monotone(&self.r)
    }
}

/// Mesh inversion if any cell has non-positive width.
pub fn check_monotone(r: &[f64]) -> Result<()> {
    for (j, w) in r.windows(2).enumerate() {
        let d = w[1] - w[0];
        if !(d > 0.0) {
            return Err(Error::MeshInversion { node: j + 1, rx: d });
        }
    }
    Ok(())
}

/// Nodal `r_x`: centered inside, one-sided second order at both ends.
pub fn nodal_rx(r: &[f64], dx: f64) -> Result<Vec<f64>> {
    check_monotone(r)?;
    let rx = numerics::gradient(r, dx);
    if let Some((node, &d)) = rx.iter().enumerate().find(|(_, d)| !(**d > 0.0)) {
        return Err(Error::MeshInversion { node, rx: d });
    }
    Ok(rx)
}

/// `r/x` with the origin value replaced by `r_x(0)`.
pub fn r_over_x(r: &[f64], x: &[f64], rx: &[f64]) -> Vec<f64> {
    r.iter()
        .zip(x)
        .enumerate()
        .map(|(i, (r, x))| if i == 0 { rx[0] } else { r / x })
        .collect()
}

/// Lagrangian density `f = x²ρ̄/(r² r_x)`; `ρ̄₀/r_x(0)³` at the origin.
pub fn derived_density(state: &SimState, profile: &LaneEmdenProfile) -> Result<Vec<f64>> {
    let rx = nodal_rx(&state.r, profile.dx)?;
    let s = r_over_x(&state.r, &profile.x, &rx);
    Ok(density_from(&profile.rho_bar, &s, &rx))
}

fn density_from(rho_bar: &[f64], s: &[f64], rx: &[f64]) -> Vec<f64> {
    rho_bar
        .iter()
        .zip(s)
        .zip(rx)
        .map(|((rho, s), q)| rho / (s * s * q))
        .collect()
}

/// `∫_{x_i}^{R̄} w(y) (r/y)^{k-2} v(y) dy` at every node by the trapezoid
/// rule. The origin uses `r/y → r_x(0)`.
pub fn tail_integral(weight: &[f64], s: &[f64], v: &[f64], k: f64, dx: f64) -> Vec<f64> {
    let integrand: Vec<f64> = weight
        .iter()
        .zip(s)
        .zip(v)
        .map(|((w, s), v)| w * s.powf(k - 2.0) * v)
        .collect();
    numerics::tail_trapezoid(&integrand, dx)
}

/// `Z = (ν/θ)(r/x)^k (x²/(r²r_x))^θ - ν/θ - ρ̄^{-θ} ∫_x^{R̄} ρ̄ (r/y)^{k-2} v dy`
/// with `k = 4ν₁θ/ν`. The tail term is set to zero at the vacuum node.
pub fn compute_z(state: &SimState, profile: &LaneEmdenProfile, params: &ModelParams) -> Result<Vec<f64>> {
    let rx = nodal_rx(&state.r, profile.dx)?;
    let s = r_over_x(&state.r, &profile.x, &rx);
    Ok(z_from(&s, &rx, &state.v, profile, params))
}

fn z_from(s: &[f64], rx: &[f64], v: &[f64], profile: &LaneEmdenProfile, params: &ModelParams) -> Vec<f64> {
    let (nu, theta, k) = (params.nu(), params.theta, params.k());
    let tail = tail_integral(&profile.rho_bar, s, v, k, profile.dx);
    (0..s.len())
        .map(|i| {
            let head = nu / theta * s[i].powf(k) * (1.0 / (s[i] * s[i] * rx[i])).powf(theta) - nu / theta;
            let rho = profile.rho_bar[i];
            let tail_term = if rho > 0.0 { tail[i] / rho.powf(theta) } else { 0.0 };
            head - tail_term
        })
        .collect()
}

/// Fields derived from a state.
#[derive(Debug, Clone)]
pub struct DerivedFields {
    pub rx: Vec<f64>,
    pub r_over_x: Vec<f64>,
    pub f: Vec<f64>,
    /// Relative compression `x²/(r²r_x) - 1`.
    pub q: Vec<f64>,
    pub z: Vec<f64>,
}

impl DerivedFields {
    pub fn compute(state: &SimState, profile: &LaneEmdenProfile, params: &ModelParams) -> Result<Self> {
        let rx = nodal_rx(&state.r, profile.dx)?;
        let s = r_over_x(&state.r, &profile.x, &rx);
        let f = density_from(&profile.rho_bar, &s, &rx);
        let q = s.iter().zip(&rx).map(|(s, q)| 1.0 / (s * s * q) - 1.0).collect();
        let z = z_from(&s, &rx, &state.v, profile, params);
        Ok(Self {
            rx,
            r_over_x: s,
            f,
            q,
            z,
        })
    }
}

/// Eulerian view of a state: density and velocity as functions of `r`.
#[derive(Debug, Clone)]
pub struct EulerianProbe {
    r: Vec<f64>,
    r_of_x: Pchip,
    f_of_x: Pchip,
    v_of_x: Pchip,
    x: Vec<f64>,
}

impl EulerianProbe {
    pub fn new(state: &SimState, profile: &LaneEmdenProfile) -> Result<Self> {
        let f = derived_density(state, profile)?;
        Self::from_fields(&profile.x, &state.r, &state.v, &f)
    }

    /// Build from stored node values, e.g. a snapshot file.
    pub fn from_fields(x: &[f64], r: &[f64], v: &[f64], f: &[f64]) -> Result<Self> {
        check_monotone(r)?;
        Ok(Self {
            r: r.to_vec(),
            r_of_x: Pchip::new(x, r)?,
            f_of_x: Pchip::new(x, f)?,
            v_of_x: Pchip::new(x, v)?,
            x: x.to_vec(),
        })
    }

    pub fn boundary(&self) -> f64 {
        *self.r.last().unwrap_or(&0.0)
    }

    /// Reference coordinate `x` with `r(x) = r_query`.
    pub fn invert(&self, r_query: f64) -> Result<f64> {
        let boundary = self.boundary();
        if !(r_query >= 0.0) || r_query > boundary {
            return Err(Error::VacuumExterior { r: r_query, boundary });
        }
        if r_query == boundary {
            return Ok(*self.x.last().unwrap());
        }
        let j = self.r.partition_point(|&r| r <= r_query).clamp(1, self.r.len() - 1) - 1;
        let (mut lo, mut hi) = (self.x[j], self.x[j + 1]);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.r_of_x.eval(mid) < r_query {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// `(ρ, u)` at Eulerian radius `r_query ∈ [0, R(t)]`.
    pub fn probe(&self, r_query: f64) -> Result<(f64, f64)> {
        let x = self.invert(r_query)?;
        if r_query == self.boundary() {
            return Ok((0.0, self.v_of_x.eval(x)));
        }
        Ok((self.f_of_x.eval(x).max(0.0), self.v_of_x.eval(x)))
    }
}

/// `(ρ, u)` at `r_query` for the given state.
pub fn reconstruct_eulerian(state: &SimState, profile: &LaneEmdenProfile, r_query: f64) -> Result<(f64, f64)> {
    EulerianProbe::new(state, profile)?.probe(r_query)
}
