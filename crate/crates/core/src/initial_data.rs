//! Initial flow maps and velocities near the Lane-Emden state.

use serde::{Deserialize, Serialize};

use crate::diagnostics;
use crate::error::{Error, Result};
use crate::lane_emden::LaneEmdenProfile;
use crate::numerics::{self, gauss_legendre8};
use crate::solver::Mesh;
use crate::star_state::{nodal_rx, ModelParams, SimState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// `r₀ = x(1 + ε g)`, `v₀ = 0`.
    LagrangianDisplacement,
    /// `r₀ = x`, `v₀ = ε x^p (R̄ - x) g`.
    VelocityBump,
}

/// Profile `g` of the perturbation in terms of `y = x / R̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    Uniform,
    /// `cos(k π y)`.
    Cosine { wavenumber: f64 },
    /// `exp(-(y - center)² / (2 width²))`.
    Gaussian { center: f64, width: f64 },
}

impl Shape {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            Shape::Uniform => 1.0,
            Shape::Cosine { wavenumber } => (wavenumber * std::f64::consts::PI * y).cos(),
            Shape::Gaussian { center, width } => (-0.5 * ((y - center) / width).powi(2)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    pub kind: PerturbationKind,
    pub epsilon: f64,
    #[serde(default = "default_shape")]
    pub shape: Shape,
    /// Power of `x` in the velocity bump; must be positive so that `v(0) = 0`.
    #[serde(default = "default_origin_power")]
    pub origin_power: f64,
}

fn default_shape() -> Shape {
    Shape::Uniform
}

fn default_origin_power() -> f64 {
    1.0
}

impl Perturbation {
    pub fn displacement(epsilon: f64, shape: Shape) -> Self {
        Self {
            kind: PerturbationKind::LagrangianDisplacement,
            epsilon,
            shape,
            origin_power: 1.0,
        }
    }

    pub fn velocity_bump(epsilon: f64, shape: Shape) -> Self {
        Self {
            kind: PerturbationKind::VelocityBump,
            epsilon,
            shape,
            origin_power: 1.0,
        }
    }

    pub fn none() -> Self {
        Self::displacement(0.0, Shape::Uniform)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() {
            return Err(Error::param("perturbation.epsilon", "epsilon must be finite"));
        }
        match self.shape {
            Shape::Cosine { wavenumber } if !wavenumber.is_finite() => {
                return Err(Error::param("perturbation.shape", "wavenumber must be finite"))
            }
            Shape::Gaussian { width, center } if !(width > 0.0 && center.is_finite()) => {
                return Err(Error::param("perturbation.shape", "width must be positive"))
            }
            _ => {}
        }
        if self.kind == PerturbationKind::VelocityBump && self.epsilon != 0.0 && !(self.origin_power > 0.0) {
            return Err(Error::Compatibility(self.epsilon * self.shape.eval(0.0)));
        }
        Ok(())
    }
}

/// Initial flow map, velocity and the value `ℰ(0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialData {
    pub r0: Vec<f64>,
    pub v0: Vec<f64>,
    pub e0: f64,
}

impl InitialData {
    pub fn state(&self) -> SimState {
        SimState {
            t: 0.0,
            r: self.r0.clone(),
            v: self.v0.clone(),
        }
    }

    /// Whether `ℰ(0) ≤ δ̄`.
    pub fn is_small(&self, delta_bar: f64) -> bool {
        self.e0 <= delta_bar
    }
}

/// Mass-matched reference map: `r₀(x_i)` solves
/// `∫₀^{r₀} ρ₀ s² ds = ∫₀^{x_i} ρ̄ s² ds`.
///
/// Both cumulative masses use 8-point Gauss-Legendre per cell on grids with
/// the same number of cells, so the identity and mass-preserving dilations
/// are reproduced to round-off. `mass_tol` bounds the relative total mass
/// mismatch.
pub fn reference_map<F>(rho0: F, r0_radius: f64, profile: &LaneEmdenProfile, mass_tol: f64) -> Result<Vec<f64>>
where
    F: Fn(f64) -> f64,
{
    if !(r0_radius > 0.0 && r0_radius.is_finite()) {
        return Err(Error::param("R0", "initial radius must be positive"));
    }
    let cells = profile.cells();
    let z = numerics::uniform_grid(r0_radius, cells);
    let mass0 = |a: f64, b: f64| gauss_legendre8(|s| rho0(s) * s * s, a, b);
    let mut psi = vec![0.0; cells + 1];
    for k in 0..cells {
        let m = mass0(z[k], z[k + 1]);
        if !(m > 0.0) {
            return Err(Error::Input(format!(
                "cumulative mass of rho0 is not increasing on [{}, {}]",
                z[k],
                z[k + 1]
            )));
        }
        psi[k + 1] = psi[k] + m;
    }
    let x = &profile.x;
    let mut xi = vec![0.0; cells + 1];
    for j in 0..cells {
        xi[j + 1] = xi[j] + gauss_legendre8(|s| profile.density_exact(s) * s * s, x[j], x[j + 1]);
    }
    let (total0, total) = (psi[cells], xi[cells]);
    if (total0 - total).abs() > mass_tol * total {
        let four_pi = 4.0 * std::f64::consts::PI;
        return Err(Error::MassConstraint {
            initial: four_pi * total0,
            expected: four_pi * total,
        });
    }

    let mut r0 = vec![0.0; cells + 1];
    r0[cells] = r0_radius;
    for i in 1..cells {
        let target = xi[i];
        let k = psi.partition_point(|&p| p < target).clamp(1, cells) - 1;
        if psi[k + 1] == target {
            r0[i] = z[k + 1];
            continue;
        }
        if psi[k] == target {
            r0[i] = z[k];
            continue;
        }
        let (mut lo, mut hi) = (z[k], z[k + 1]);
        while hi - lo > 1e-14 * r0_radius {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if psi[k] + mass0(z[k], mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        r0[i] = 0.5 * (lo + hi);
    }
    if r0.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Input("reference map is not strictly increasing".into()));
    }
    Ok(r0)
}

/// Build `(r₀, v₀)` for a perturbation family and evaluate `ℰ(0)`.
pub fn make_initial(profile: &LaneEmdenProfile, params: &ModelParams, perturbation: &Perturbation) -> Result<InitialData> {
    perturbation.validate()?;
    let rbar = profile.radius;
    let eps = perturbation.epsilon;
    let g = |x: f64| perturbation.shape.eval(x / rbar);
    let (r0, v0): (Vec<f64>, Vec<f64>) = match perturbation.kind {
        PerturbationKind::LagrangianDisplacement => (
            profile.x.iter().map(|&x| x * (1.0 + eps * g(x))).collect(),
            vec![0.0; profile.x.len()],
        ),
        PerturbationKind::VelocityBump => {
            let p = perturbation.origin_power;
            let mut v: Vec<f64> = profile.x.iter().map(|&x| eps * x.powf(p) * (rbar - x) * g(x)).collect();
            v[0] = 0.0;
            (profile.x.clone(), v)
        }
    };
    if let Err(Error::MeshInversion { node, rx }) = nodal_rx(&r0, profile.dx) {
        return Err(Error::param(
            "perturbation.epsilon",
            format!("epsilon = {eps} breaks r0_x > 0 at node {node} (r0_x = {rx})"),
        ));
    }
    let mut data = InitialData { r0, v0, e0: 0.0 };
    let vt = initial_vt(&data, profile, params)?;
    data.e0 = diagnostics::energy_e(&data.state(), &vt, profile)?;
    Ok(data)
}

/// `v_t(·, 0)` from the momentum equation: the same nodal balance the solver
/// advances, so no division by `ρ̄` occurs at the vacuum node.
pub fn initial_vt(initial: &InitialData, profile: &LaneEmdenProfile, params: &ModelParams) -> Result<Vec<f64>> {
    let state = initial.state();
    nodal_rx(&state.r, profile.dx)?;
    Mesh::new(profile, params.gamma).acceleration(&state, params)
}
