//! Time integration of the Lagrangian momentum equation.
//!
//! Nodes carry `(r, v)`; cells `[x_j, x_{j+1}]` carry the exact equilibrium
//! mass `M_j = ∫ ρ̄ s² ds`, so the cell density `M_j / V_j` with
//! `V_j = (r_{j+1}³ - r_j³)/3` conserves mass exactly. Each step is
//!
//! 1. an explicit kick with pressure and gravity,
//! 2. a backward-Euler solve of the viscous term (tridiagonal),
//! 3. a drift `r += dt v`.
//!
//! The discrete force is `-r²δP + (x⁴/r²)δP̄` with `P̄` the equilibrium cell
//! pressure, which vanishes identically at `r = x`. [`force_field`] evaluates
//! the same balance with continuum gravity and point densities instead and
//! is kept as a diagnostic of hydrostatic consistency.

use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, DiagnosticsRecord, ExponentSet};
use crate::error::{Error, Result};
use crate::initial_data::InitialData;
use crate::lane_emden::LaneEmdenProfile;
use crate::numerics::Tridiagonal;
use crate::star_state::{check_monotone, ModelParams, SimState};

/// Time-stepping controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Number of cells.
    pub n: usize,
    pub cfl: f64,
    pub dt_max: f64,
    pub t_end: f64,
    /// Relative residual accepted from the viscous solve.
    pub viscous_tol: f64,
    /// Record diagnostics every this many steps.
    pub output_stride: usize,
    /// Keep a full snapshot every this many steps; 0 disables snapshots.
    pub snapshot_stride: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n: 512,
            cfl: 0.5,
            dt_max: 0.05,
            t_end: 100.0,
            viscous_tol: 1e-10,
            output_stride: 50,
            snapshot_stride: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 16 {
            return Err(Error::param("solver.n", format!("n must be at least 16, got {}", self.n)));
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::param("solver.cfl", format!("cfl must satisfy 0 < cfl <= 1, got {}", self.cfl)));
        }
        if !(self.dt_max > 0.0 && self.dt_max.is_finite()) {
            return Err(Error::param("solver.dt_max", "dt_max must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::param("solver.t_end", "t_end must be non-negative"));
        }
        if !(self.viscous_tol > 0.0) {
            return Err(Error::param("solver.viscous_tol", "viscous_tol must be positive"));
        }
        if self.output_stride == 0 {
            return Err(Error::param("solver.output_stride", "output_stride must be at least 1"));
        }
        Ok(())
    }
}

/// Grid data that does not change in time.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub x: Vec<f64>,
    pub dx: f64,
    pub cell_mass: Vec<f64>,
    /// Dual-cell masses; the vacuum node owns half a cell.
    pub node_mass: Vec<f64>,
    /// Nodal quadrature weights: `dx`, and `dx/2` at both ends.
    pub weight: Vec<f64>,
    /// Equilibrium cell pressure `(M_j / V⁰_j)^γ`.
    pub pressure_eq: Vec<f64>,
}

impl Mesh {
    pub fn new(profile: &LaneEmdenProfile, gamma: f64) -> Self {
        let cells = profile.cells();
        let x = profile.x.clone();
        let m = &profile.cell_mass;
        let mut node_mass = vec![0.0; cells + 1];
        for j in 0..cells {
            node_mass[j] += 0.5 * m[j];
            node_mass[j + 1] += 0.5 * m[j];
        }
        let mut weight = vec![profile.dx; cells + 1];
        weight[0] *= 0.5;
        weight[cells] *= 0.5;
        let pressure_eq = (0..cells)
            .map(|j| (m[j] / cell_volume(x[j], x[j + 1])).powf(gamma))
            .collect();
        Self {
            x,
            dx: profile.dx,
            cell_mass: m.clone(),
            node_mass,
            weight,
            pressure_eq,
        }
    }

    pub fn cells(&self) -> usize {
        self.cell_mass.len()
    }

    /// Cell densities `M_j / V_j`.
    pub fn cell_density(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_monotone(r)?;
        Ok((0..self.cells())
            .map(|j| self.cell_mass[j] / cell_volume(r[j], r[j + 1]))
            .collect())
    }

    /// Well-balanced nodal force `-r²δP + (x⁴/r²)δP̄`, already integrated over
    /// the dual cell. Zero at the origin.
    pub fn force(&self, r: &[f64], gamma: f64) -> Result<Vec<f64>> {
        let f = self.cell_density(r)?;
        let p: Vec<f64> = f.iter().map(|f| f.powf(gamma)).collect();
        let cells = self.cells();
        let mut out = vec![0.0; cells + 1];
        for i in 1..=cells {
            let (p_hi, pe_hi) = if i < cells { (p[i], self.pressure_eq[i]) } else { (0.0, 0.0) };
            let dp = p_hi - p[i - 1];
            let dpe = pe_hi - self.pressure_eq[i - 1];
            let s = self.x[i] / r[i];
            out[i] = -r[i] * r[i] * dp + self.x[i] * self.x[i] * s * s * dpe;
        }
        Ok(out)
    }

    /// Symmetric stiffness `K` of the viscous bilinear form
    /// `Σ_j ρ_j^θ [ν A_j(v) A_j(w) / V_j - 4ν₁ δ_j(r v w)]` with
    /// `A_j(v) = r_{j+1}² v_{j+1} - r_j² v_j`. Positive semidefinite.
    pub fn viscous_matrix(&self, r: &[f64], params: &ModelParams, include_nu1: bool) -> Result<Tridiagonal> {
        let f = self.cell_density(r)?;
        let (nu, nu1, theta) = (params.nu(), params.nu1, params.theta);
        let cells = self.cells();
        let mut k = Tridiagonal::zeros(cells + 1);
        for j in 0..cells {
            let rho = f[j].powf(theta);
            let a = r[j] * r[j];
            let b = r[j + 1] * r[j + 1];
            let c = nu * rho / cell_volume(r[j], r[j + 1]);
            k.diag[j] += c * a * a;
            k.diag[j + 1] += c * b * b;
            k.upper[j] -= c * a * b;
            k.lower[j + 1] -= c * a * b;
            if include_nu1 {
                k.diag[j] += 4.0 * nu1 * rho * r[j];
                k.diag[j + 1] -= 4.0 * nu1 * rho * r[j + 1];
            }
        }
        Ok(k)
    }

    /// Nodal acceleration `(F - K v) / m`; zero at the origin.
    pub fn acceleration(&self, state: &SimState, params: &ModelParams) -> Result<Vec<f64>> {
        let force = self.force(&state.r, params.gamma)?;
        let kv = self.viscous_matrix(&state.r, params, true)?.apply(&state.v);
        let mut a: Vec<f64> = (0..force.len())
            .map(|i| (force[i] - kv[i]) / self.node_mass[i])
            .collect();
        a[0] = 0.0;
        Ok(a)
    }

    /// Signal speed limit `min_j (r_{j+1} - r_j) / c_j`, `c² = γ f^{γ-1}`.
    pub fn cfl_dt(&self, r: &[f64], gamma: f64, cfl: f64, dt_max: f64) -> Result<f64> {
        let f = self.cell_density(r)?;
        let mut dt = dt_max;
        for j in 0..self.cells() {
            let c = (gamma * f[j].powf(gamma - 1.0)).sqrt();
            if c > 0.0 {
                dt = dt.min(cfl * (r[j + 1] - r[j]) / c);
            }
        }
        Ok(dt)
    }

    /// One kick-viscous-drift step of size `dt`, without retries.
    pub fn try_step(&self, state: &SimState, params: &ModelParams, dt: f64, viscous_tol: f64) -> Result<SimState> {
        let cells = self.cells();
        let force = self.force(&state.r, params.gamma)?;
        let k = self.viscous_matrix(&state.r, params, true)?;
        // Unknowns are nodes 1..=N; v_0 = 0 drops out.
        let mut sys = Tridiagonal::zeros(cells);
        let mut rhs = vec![0.0; cells];
        for i in 1..=cells {
            let m = self.node_mass[i];
            let row = i - 1;
            sys.diag[row] = m + dt * k.diag[i];
            if i > 1 {
                sys.lower[row] = dt * k.lower[i];
            }
            if i < cells {
                sys.upper[row] = dt * k.upper[i];
            }
            rhs[row] = m * state.v[i] + dt * force[i];
        }
        let sol = sys.solve(&rhs)?;
        let res = sys.apply(&sol);
        let num: f64 = res.iter().zip(&rhs).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = rhs.iter().map(|b| b * b).sum();
        if num > viscous_tol * viscous_tol * den {
            return Err(Error::LinearSolve(format!(
                "relative residual {} exceeds {viscous_tol}",
                (num / den).sqrt()
            )));
        }
        let mut v = Vec::with_capacity(cells + 1);
        v.push(0.0);
        v.extend(sol);
        let r: Vec<f64> = state.r.iter().zip(&v).map(|(r, v)| r + dt * v).collect();
        check_monotone(&r)?;
        Ok(SimState { t: state.t + dt, r, v })
    }
}

fn cell_volume(a: f64, b: f64) -> f64 {
    // (b³ - a³)/3 without cancellation for thin shells
    (b - a) * (b * b + a * b + a * a) / 3.0
}

/// Pressure plus gravity force density at each node,
/// `-δP/dx - (x⁵/r⁴) φ ρ̄`, with pressures from the point density
/// `x²ρ̄/(r²r_x)` at cell midpoints and a half cell at the vacuum node.
/// Of order `dx²` at equilibrium.
pub fn force_field(state: &SimState, profile: &LaneEmdenProfile, params: &ModelParams) -> Result<Vec<f64>> {
    let mesh = Mesh::new(profile, params.gamma);
    let cells = mesh.cells();
    let r = &state.r;
    let mut p = vec![0.0; cells];
    for j in 0..cells {
        let rx = (r[j + 1] - r[j]) / profile.dx;
        if !(rx > 0.0) {
            return Err(Error::MeshInversion { node: j, rx });
        }
        let xm = profile.x[j] + 0.5 * profile.dx;
        let rm = 0.5 * (r[j] + r[j + 1]);
        p[j] = (xm * xm * profile.rho_bar_mid[j] / (rm * rm * rx)).powf(params.gamma);
    }
    let mut out = vec![0.0; cells + 1];
    for i in 1..=cells {
        let p_hi = if i < cells { p[i] } else { 0.0 };
        let dp = (p_hi - p[i - 1]) / mesh.weight[i];
        let (x, r) = (profile.x[i], r[i]);
        out[i] = -dp - x.powi(5) / r.powi(4) * profile.phi[i] * profile.rho_bar[i];
    }
    Ok(out)
}

/// Nodal `𝒱[v_arg]` for the flow map of `state`, from the tridiagonal
/// stiffness: `𝒱_i = -(K v)_i / (r_i² w_i)`.
pub fn viscous_operator(
    state: &SimState,
    profile: &LaneEmdenProfile,
    params: &ModelParams,
    v_arg: &[f64],
) -> Result<Vec<f64>> {
    viscous_operator_on(&Mesh::new(profile, params.gamma), &state.r, params, v_arg)
}

fn viscous_operator_on(mesh: &Mesh, r: &[f64], params: &ModelParams, v_arg: &[f64]) -> Result<Vec<f64>> {
    let kv = mesh.viscous_matrix(r, params, true)?.apply(v_arg);
    Ok((0..kv.len())
        .map(|i| if i == 0 { 0.0 } else { -kv[i] / (r[i] * r[i] * mesh.weight[i]) })
        .collect())
}

/// `𝒱` from the time-derivative form
/// `-(ν/θ) s^{-k} ∂_t (s^k [ρ^θ]_x)`, `s = r/x`, `k = 4ν₁θ/ν`, using a pair of
/// states. The prefactor is evaluated at the midpoint.
pub fn viscous_operator_time_form(
    prev: &SimState,
    next: &SimState,
    profile: &LaneEmdenProfile,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let mesh = Mesh::new(profile, params.gamma);
    let dt = next.t - prev.t;
    if !(dt > 0.0) {
        return Err(Error::Input("state pair must be ordered in time".into()));
    }
    let k = params.k();
    let g0 = rho_theta_gradient(&mesh, &prev.r, params.theta)?;
    let g1 = rho_theta_gradient(&mesh, &next.r, params.theta)?;
    Ok((0..g0.len())
        .map(|i| {
            if i == 0 {
                return 0.0;
            }
            let x = profile.x[i];
            let (s0, s1) = (prev.r[i] / x, next.r[i] / x);
            let sm = 0.5 * (s0 + s1);
            -params.nu() / params.theta * sm.powf(-k) * (s1.powf(k) * g1[i] - s0.powf(k) * g0[i]) / dt
        })
        .collect())
}

/// The direct form on the earlier map of a pair with `v = Δr/Δt`, the
/// counterpart of [`viscous_operator_time_form`]. For a pair produced by
/// [`step`] the velocity is the stored one; the two forms differ by `O(Δt)`.
pub fn viscous_operator_on_pair(
    prev: &SimState,
    next: &SimState,
    profile: &LaneEmdenProfile,
    params: &ModelParams,
) -> Result<Vec<f64>> {
    let mesh = Mesh::new(profile, params.gamma);
    let dt = next.t - prev.t;
    if !(dt > 0.0) {
        return Err(Error::Input("state pair must be ordered in time".into()));
    }
    let v: Vec<f64> = prev.r.iter().zip(&next.r).map(|(a, b)| (b - a) / dt).collect();
    viscous_operator_on(&mesh, &prev.r, params, &v)
}

/// `([ρ^θ]_{i+½} - [ρ^θ]_{i-½}) / w_i` with zero density beyond the vacuum node.
fn rho_theta_gradient(mesh: &Mesh, r: &[f64], theta: f64) -> Result<Vec<f64>> {
    let f = mesh.cell_density(r)?;
    let cells = mesh.cells();
    let mut g = vec![0.0; cells + 1];
    for i in 1..=cells {
        let hi = if i < cells { f[i].powf(theta) } else { 0.0 };
        g[i] = (hi - f[i - 1].powf(theta)) / mesh.weight[i];
    }
    Ok(g)
}

/// Momentum balance split by term, per unit length at each node:
/// `inertia + pressure + gravity - viscous = residual`.
#[derive(Debug, Clone)]
pub struct ResidualBreakdown {
    pub inertia_term: Vec<f64>,
    pub pressure_term: Vec<f64>,
    pub gravity_term: Vec<f64>,
    pub viscous_term: Vec<f64>,
}

impl ResidualBreakdown {
    /// Terms for the update `prev -> next` as the scheme forms them (forces
    /// and viscous coefficients frozen at `prev`, velocity from `next`).
    pub fn for_step(prev: &SimState, next: &SimState, profile: &LaneEmdenProfile, params: &ModelParams) -> Result<Self> {
        let mesh = Mesh::new(profile, params.gamma);
        let dt = next.t - prev.t;
        let f = mesh.cell_density(&prev.r)?;
        let cells = mesh.cells();
        let visc = viscous_operator_on(&mesh, &prev.r, params, &next.v)?;
        let mut out = Self {
            inertia_term: vec![0.0; cells + 1],
            pressure_term: vec![0.0; cells + 1],
            gravity_term: vec![0.0; cells + 1],
            viscous_term: visc,
        };
        for i in 1..=cells {
            let r2w = prev.r[i] * prev.r[i] * mesh.weight[i];
            let (p_hi, pe_hi) = if i < cells {
                (f[i].powf(params.gamma), mesh.pressure_eq[i])
            } else {
                (0.0, 0.0)
            };
            let s = mesh.x[i] / prev.r[i];
            out.inertia_term[i] = mesh.node_mass[i] * (next.v[i] - prev.v[i]) / (dt * r2w);
            out.pressure_term[i] = (p_hi - f[i - 1].powf(params.gamma)) / mesh.weight[i];
            out.gravity_term[i] = -s.powi(4) * (pe_hi - mesh.pressure_eq[i - 1]) / mesh.weight[i];
        }
        Ok(out)
    }

    pub fn residual(&self) -> Vec<f64> {
        (0..self.inertia_term.len())
            .map(|i| self.inertia_term[i] + self.pressure_term[i] + self.gravity_term[i] - self.viscous_term[i])
            .collect()
    }
}

/// Stable time step for `state`; see [`Mesh::cfl_dt`].
pub fn cfl_dt(state: &SimState, profile: &LaneEmdenProfile, params: &ModelParams, config: &SolverConfig) -> Result<f64> {
    Mesh::new(profile, params.gamma).cfl_dt(&state.r, params.gamma, config.cfl, config.dt_max)
}

/// One step at the CFL time step with rejection and halving on mesh
/// inversion.
pub fn step(state: &SimState, profile: &LaneEmdenProfile, params: &ModelParams, config: &SolverConfig) -> Result<SimState> {
    let mesh = Mesh::new(profile, params.gamma);
    let dt = mesh.cfl_dt(&state.r, params.gamma, config.cfl, config.dt_max)?;
    step_with(&mesh, state, params, dt, config.viscous_tol).map(|(s, _)| s)
}

/// Step of at most `dt`; returns the new state and the step actually taken.
pub fn step_with(mesh: &Mesh, state: &SimState, params: &ModelParams, dt: f64, viscous_tol: f64) -> Result<(SimState, f64)> {
    const MAX_HALVINGS: u32 = 20;
    let mut h = dt;
    for halvings in 0..=MAX_HALVINGS {
        match mesh.try_step(state, params, h, viscous_tol) {
            Ok(s) => return Ok((s, h)),
            Err(Error::MeshInversion { .. }) if halvings < MAX_HALVINGS => h *= 0.5,
            Err(Error::MeshInversion { node, rx }) => {
                return Err(Error::StepRejected {
                    t: state.t,
                    halvings,
                    reason: format!("mesh inversion at node {node} (r_x = {rx})"),
                })
            }
            Err(e) => return Err(e),
        }
    }
    unreachable!()
}

/// Stored state with its derived density and compression.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub v: Vec<f64>,
    pub f: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
}

impl Snapshot {
    pub fn new(step: usize, state: &SimState, profile: &LaneEmdenProfile, params: &ModelParams) -> Result<Self> {
        let d = crate::star_state::DerivedFields::compute(state, profile, params)?;
        Ok(Self {
            step,
            t: state.t,
            x: profile.x.clone(),
            r: state.r.clone(),
            v: state.v.clone(),
            f: d.f,
            q: d.q,
        })
    }
}

/// Result of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub history: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: SimState,
    pub steps: usize,
}

/// Stepping driver shared by [`run`] and callers that need every step.
#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    pub mesh: Mesh,
    pub profile: &'a LaneEmdenProfile,
    pub params: ModelParams,
    pub config: SolverConfig,
    pub state: SimState,
    pub steps: usize,
}

impl<'a> Simulation<'a> {
    pub fn new(initial: &InitialData, profile: &'a LaneEmdenProfile, params: &ModelParams, config: &SolverConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let state = SimState {
            t: 0.0,
            r: initial.r0.clone(),
            v: initial.v0.clone(),
        };
        state.validate(profile.x.len())?;
        Ok(Self {
            mesh: Mesh::new(profile, params.gamma),
            profile,
            params: *params,
            config: config.clone(),
            state,
            steps: 0,
        })
    }

    pub fn done(&self) -> bool {
        self.state.t >= self.config.t_end
    }

    /// Advance one step, clipped to land on `t_end`.
    pub fn advance(&mut self) -> Result<f64> {
        let mut dt = self
            .mesh
            .cfl_dt(&self.state.r, self.params.gamma, self.config.cfl, self.config.dt_max)?;
        let remaining = self.config.t_end - self.state.t;
        if dt >= remaining {
            dt = remaining;
        }
        let (mut next, taken) = step_with(&self.mesh, &self.state, &self.params, dt, self.config.viscous_tol)?;
        if taken == remaining {
            next.t = self.config.t_end;
        }
        self.state = next;
        self.steps += 1;
        Ok(taken)
    }

    pub fn acceleration(&self) -> Result<Vec<f64>> {
        self.mesh.acceleration(&self.state, &self.params)
    }

    pub fn record(&self, exps: &ExponentSet, l: f64) -> Result<DiagnosticsRecord> {
        let vt = self.acceleration()?;
        diagnostics::record(&self.state, &vt, self.profile, &self.params, exps, l)
    }
}

/// Integrate to `config.t_end`, recording diagnostics every `output_stride`
/// steps and at the final time.
pub fn run(
    initial: &InitialData,
    profile: &LaneEmdenProfile,
    params: &ModelParams,
    config: &SolverConfig,
    exps: &ExponentSet,
    l: f64,
) -> Result<RunOutput> {
    let mut sim = Simulation::new(initial, profile, params, config)?;
    let mut history = vec![sim.record(exps, l)?];
    let mut snapshots = Vec::new();
    if config.snapshot_stride > 0 {
        snapshots.push(Snapshot::new(0, &sim.state, profile, params)?);
    }
    while !sim.done() {
        sim.advance()?;
        let last = sim.done();
        if sim.steps % config.output_stride == 0 || last {
            history.push(sim.record(exps, l)?);
        }
        if config.snapshot_stride > 0 && (sim.steps % config.snapshot_stride == 0 || last) {
            snapshots.push(Snapshot::new(sim.steps, &sim.state, profile, params)?);
        }
    }
    Ok(RunOutput {
        history,
        snapshots,
        steps: sim.steps,
        final_state: sim.state,
    })
}
