//! Lane-Emden equilibria with `p = ρ^γ` and unit gravitational constant.
//!
//! The equilibrium solves `(ρ̄^γ)' + 4π x⁻² ρ̄ ∫₀ˣ ρ̄ s² ds = 0`. In Emden
//! variables `ρ̄ = ρ_c w(ξ)^n`, `x = a ξ`, `a² = (n + 1) ρ_c^{1/n - 1} / (4π)`,
//! the equation becomes `w'' + 2w'/ξ + w^n = 0` with `w(0) = 1`, `w'(0) = 0`.
//! Alongside `(w, w')` the solver integrates the mass function
//! `m(ξ) = ∫₀^ξ s² w^n ds`; the Emden equation is equivalent to
//! `m = -ξ² w'`, which gives an internal consistency check.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::{self, Pchip};
use crate::ode::{self, Step, Tolerances};

/// Settings for the dimensionless Emden solve.
#[derive(Debug, Clone)]
pub struct EmdenSolver {
    pub n: f64,
    pub root_tol: f64,
    /// Radius at which the series expansion hands over to the integrator.
    pub xi_start: f64,
    /// Give up looking for the first zero beyond this radius.
    pub xi_max: f64,
    pub tolerances: Tolerances,
}

impl EmdenSolver {
    pub fn new(n: f64) -> Self {
        Self {
            n,
            root_tol: 1e-13,
            xi_start: 1e-3,
            xi_max: 1e3,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_root_tol(mut self, root_tol: f64) -> Self {
        self.root_tol = root_tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.n.is_finite() && self.n > 0.0) {
            return Err(Error::param("n", format!("polytropic index must be finite and positive, got {}", self.n)));
        }
        if !(self.root_tol > 0.0) {
            return Err(Error::param("root_tol", "must be positive"));
        }
        Ok(())
    }

    /// `(w, w', m)` from the expansion about the origin.
    pub fn series(&self, xi: f64) -> [f64; 3] {
        let n = self.n;
        let x2 = xi * xi;
        let w = 1.0 - x2 / 6.0 + n * x2 * x2 / 120.0 - n * (8.0 * n - 5.0) * x2 * x2 * x2 / 15120.0;
        let dw = -xi / 3.0 + n * xi * x2 / 30.0 - n * (8.0 * n - 5.0) * xi * x2 * x2 / 2520.0;
        let m = xi * x2 * (1.0 / 3.0 - n * x2 / 30.0 + (n * n / 315.0 - n / 504.0) * x2 * x2);
        [w, dw, m]
    }

    fn rhs(&self) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] + '_ {
        move |xi: f64, y: &[f64; 3]| {
            let source = y[0].max(0.0).powf(self.n);
            [y[1], -source - 2.0 * y[1] / xi, xi * xi * source]
        }
    }

    /// Integrate the Emden equation up to `xi_end`, failing if `w` changes
    /// sign first. Used for indices without compact support.
    pub fn trajectory(&self, xi_end: f64) -> Result<EmdenTrajectory> {
        self.validate()?;
        let f = self.rhs();
        let y0 = self.series(self.xi_start);
        let steps = ode::integrate(&f, self.xi_start, y0, xi_end, &self.tolerances, |_, y| y[0] < 0.0)?;
        if let Some(s) = steps.last() {
            if s.y1[0] < 0.0 {
                return Err(Error::Input(format!(
                    "Emden function changes sign near xi = {} before xi_end = {xi_end}",
                    s.t1()
                )));
            }
        }
        Ok(EmdenTrajectory {
            solver: self.clone(),
            steps,
        })
    }

    /// Integrate to the first zero `ξ₁` of `w`.
    pub fn solve(&self) -> Result<DimensionlessSolution> {
        self.validate()?;
        let f = self.rhs();
        let y0 = self.series(self.xi_start);
        let mut steps =
            ode::integrate(&f, self.xi_start, y0, self.xi_max, &self.tolerances, |_, y| y[0] < 0.0)?;
        let last = match steps.pop() {
            Some(s) if s.y1[0] < 0.0 => s,
            _ => return Err(Error::NoCompactSupport { xi_max: self.xi_max }),
        };

        // Bisection on the length of the bracketing step.
        let f0 = f(last.t0, &last.y0);
        let (mut lo, mut hi) = (0.0, last.h);
        while hi - lo > self.root_tol {
            let mid = 0.5 * (lo + hi);
            let trial = ode::trial_step(&f, last.t0, &last.y0, &f0, mid, &self.tolerances);
            if trial.y[0] > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h_root = 0.5 * (lo + hi);
        let trial = ode::trial_step(&f, last.t0, &last.y0, &f0, h_root, &self.tolerances);
        steps.push(ode::finish(last.t0, h_root, last.y0, &trial));

        let xi1 = last.t0 + h_root;
        let end = trial.y;
        let trajectory = EmdenTrajectory {
            solver: self.clone(),
            steps,
        };
        let mut xi = vec![0.0];
        let mut w = vec![1.0];
        let mut dw = vec![0.0];
        let mut mass = vec![0.0];
        xi.push(self.xi_start);
        w.push(y0[0]);
        dw.push(y0[1]);
        mass.push(y0[2]);
        for s in &trajectory.steps {
            xi.push(s.t1());
            w.push(s.y1[0]);
            dw.push(s.y1[1]);
            mass.push(s.y1[2]);
        }
        Ok(DimensionlessSolution {
            n: self.n,
            xi,
            w,
            dw,
            mass,
            xi1,
            w_at_xi1: end[0],
            dw_at_xi1: end[1],
            mass_at_xi1: end[2],
            trajectory,
        })
    }
}

/// Accepted steps of an Emden integration with continuous evaluation.
#[derive(Debug, Clone)]
pub struct EmdenTrajectory {
    solver: EmdenSolver,
    steps: Vec<Step<3>>,
}

impl EmdenTrajectory {
    pub fn end(&self) -> f64 {
        self.steps.last().map_or(self.solver.xi_start, |s| s.t1())
    }

    /// `(w, w', m)` at `xi` inside the integrated range.
    pub fn eval(&self, xi: f64) -> [f64; 3] {
        if xi <= self.solver.xi_start || self.steps.is_empty() {
            return self.solver.series(xi);
        }
        let k = self.steps.partition_point(|s| s.t1() < xi);
        let step = &self.steps[k.min(self.steps.len() - 1)];
        step.interpolate(xi.min(step.t1()))
    }
}

/// The Emden function on `[0, ξ₁]`.
#[derive(Debug, Clone)]
pub struct DimensionlessSolution {
    pub n: f64,
    /// Accepted integration nodes, starting at 0.
    pub xi: Vec<f64>,
    pub w: Vec<f64>,
    pub dw: Vec<f64>,
    /// `m(ξ) = ∫₀^ξ s² w^n ds` at the nodes.
    pub mass: Vec<f64>,
    pub xi1: f64,
    pub w_at_xi1: f64,
    pub dw_at_xi1: f64,
    pub mass_at_xi1: f64,
    trajectory: EmdenTrajectory,
}

impl DimensionlessSolution {
    /// `(w, w', m)` at any `ξ ∈ [0, ξ₁]`; beyond `ξ₁` the vacuum values.
    pub fn eval(&self, xi: f64) -> [f64; 3] {
        if xi >= self.xi1 {
            return [0.0, self.dw_at_xi1, self.mass_at_xi1];
        }
        self.trajectory.eval(xi)
    }

    /// Largest violation of `m = -ξ² w'` over the stored nodes, relative to
    /// the total mass function.
    pub fn mass_identity_residual(&self) -> f64 {
        let scale = self.mass_at_xi1;
        self.xi
            .iter()
            .zip(&self.dw)
            .zip(&self.mass)
            .map(|((x, d), m)| (m + x * x * d).abs() / scale)
            .fold(0.0, f64::max)
    }

    /// Finite-difference residual of `(ξ² w')' + ξ² w^n` on a uniform grid of
    /// `cells` cells, at interior nodes.
    pub fn fd_residual(&self, cells: usize) -> Vec<f64> {
        let h = self.xi1 / cells as f64;
        let flux: Vec<f64> = (0..=cells)
            .map(|i| {
                let xi = i as f64 * h;
                xi * xi * self.eval(xi)[1]
            })
            .collect();
        (1..cells)
            .map(|i| {
                let xi = i as f64 * h;
                let w = self.eval(xi)[0].max(0.0);
                (flux[i + 1] - flux[i - 1]) / (2.0 * h) + xi * xi * w.powf(self.n)
            })
            .collect()
    }

    /// Check `w(0) = 1`, strict decrease, `w(ξ₁) ≈ 0` and `w'(ξ₁) < 0`.
    pub fn check(&self, root_tol: f64) -> Result<()> {
        if self.w[0] != 1.0 {
            return Err(Error::Input("w(0) != 1".into()));
        }
        if self.w.windows(2).any(|p| p[1] >= p[0]) {
            return Err(Error::Input("w is not strictly decreasing".into()));
        }
        if self.w_at_xi1.abs() > root_tol.max(1e-12) * self.dw_at_xi1.abs().max(1.0) {
            return Err(Error::Input(format!("w(xi1) = {} is not zero", self.w_at_xi1)));
        }
        if !(self.dw_at_xi1 < 0.0) {
            return Err(Error::Input("w'(xi1) must be negative".into()));
        }
        Ok(())
    }
}

/// Emden solution to the first zero, or `NoCompactSupport` when `w` stays
/// positive (this happens for `n >= 5`).
pub fn solve_dimensionless(n: f64, root_tol: f64) -> Result<DimensionlessSolution> {
    EmdenSolver::new(n).with_root_tol(root_tol).solve()
}

/// Stationary star `ρ̄(x)` of given mass sampled on a uniform reference grid.
#[derive(Debug, Clone)]
pub struct LaneEmdenProfile {
    pub gamma: f64,
    pub n: f64,
    pub total_mass: f64,
    pub radius: f64,
    pub central_density: f64,
    /// Emden length unit `a`.
    pub length_scale: f64,
    pub dx: f64,
    pub x: Vec<f64>,
    pub rho_bar: Vec<f64>,
    /// `φ(x) = x⁻³ ∫₀ˣ 4π ρ̄ s² ds`; the origin holds the limit `4πρ̄₀/3`.
    pub phi: Vec<f64>,
    pub rho_pow_gamma_minus_1: Vec<f64>,
    /// `(ρ̄^{γ-1})_x` from the integrated slope `w'`, independent of `φ`.
    pub rho_pow_slope: Vec<f64>,
    /// `∫₀ˣ ρ̄ s² ds` at the nodes.
    pub enclosed: Vec<f64>,
    /// `∫ ρ̄ s² ds` over each cell `[x_j, x_{j+1}]`.
    pub cell_mass: Vec<f64>,
    /// `ρ̄` at cell midpoints.
    pub rho_bar_mid: Vec<f64>,
    /// Physical-vacuum constant: the ratio `ρ̄^{γ-1}/(R̄ - x)` lies in
    /// `[1/c_pv, c_pv]` at every interior node.
    pub c_pv: f64,
    emden: DimensionlessSolution,
    rho_interp: Pchip,
    phi_interp: Pchip,
}

/// Values returned by [`LaneEmdenProfile::eval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub rho_bar: f64,
    pub phi: f64,
    pub rho_pow_slope: f64,
}

/// Scale a dimensionless solution to a star of mass `total_mass` and sample
/// it on `cells` uniform cells.
pub fn scale_to_mass(
    emden: &DimensionlessSolution,
    gamma: f64,
    total_mass: f64,
    cells: usize,
) -> Result<LaneEmdenProfile> {
    let n = emden.n;
    if !(gamma > 1.0) || ((1.0 / (gamma - 1.0)) - n).abs() > 1e-12 * n {
        return Err(Error::param("gamma", format!("gamma = {gamma} does not match polytropic index n = {n}")));
    }
    if !(total_mass > 0.0 && total_mass.is_finite()) {
        return Err(Error::param("mass", format!("must be positive and finite, got {total_mass}")));
    }
    if cells < 4 {
        return Err(Error::param("cells", "need at least 4 cells"));
    }
    if !(emden.dw_at_xi1 < 0.0 && emden.dw_at_xi1.is_finite()) {
        return Err(Error::Scaling(format!("w'(xi1) = {}", emden.dw_at_xi1)));
    }
    if (n - 3.0).abs() < 1e-12 {
        return Err(Error::Scaling("n = 3: the mass does not fix the central density".into()));
    }
    // M = 4π a³ ρ_c m(ξ₁) with a³ = ((n+1)/4π)^{3/2} ρ_c^{3(1-n)/(2n)}.
    let mass_unit = 4.0 * PI * ((n + 1.0) / (4.0 * PI)).powf(1.5) * emden.mass_at_xi1;
    let rho_c = (total_mass / mass_unit).powf(2.0 * n / (3.0 - n));
    let a = ((n + 1.0) * rho_c.powf(1.0 / n - 1.0) / (4.0 * PI)).sqrt();
    let radius = a * emden.xi1;
    if !(rho_c.is_finite() && rho_c > 0.0 && radius.is_finite() && radius > 0.0) {
        return Err(Error::Scaling(format!("rho_c = {rho_c}, radius = {radius}")));
    }

    let x = numerics::uniform_grid(radius, cells);
    let dx = radius / cells as f64;
    let rho_c_1n = rho_c.powf(1.0 / n);
    let mut rho_bar = Vec::with_capacity(cells + 1);
    let mut phi = Vec::with_capacity(cells + 1);
    let mut rho_pow = Vec::with_capacity(cells + 1);
    let mut rho_pow_slope = Vec::with_capacity(cells + 1);
    let mut enclosed = Vec::with_capacity(cells + 1);
    for (i, &xi_x) in x.iter().enumerate() {
        let xi = if i == cells { emden.xi1 } else { xi_x / a };
        let [w, dw, m] = emden.eval(xi);
        let w = if i == cells { 0.0 } else { w.max(0.0) };
        rho_bar.push(rho_c * w.powf(n));
        rho_pow.push(rho_c_1n * w);
        rho_pow_slope.push(rho_c_1n * dw / a);
        enclosed.push(a * a * a * rho_c * m);
        phi.push(if i == 0 {
            4.0 * PI * rho_c / 3.0
        } else {
            4.0 * PI * rho_c * m / (xi * xi * xi)
        });
    }
    let cell_mass: Vec<f64> = enclosed.windows(2).map(|e| e[1] - e[0]).collect();
    let rho_bar_mid = (0..cells)
        .map(|j| {
            let xi = (x[j] + 0.5 * dx) / a;
            rho_c * emden.eval(xi)[0].max(0.0).powf(n)
        })
        .collect();

    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for i in 1..cells {
        let q = rho_pow[i] / (radius - x[i]);
        lo = lo.min(q);
        hi = hi.max(q);
    }
    let c_pv = hi.max(1.0 / lo).max(1.0);

    let rho_interp = Pchip::new(&x, &rho_bar)?;
    let phi_interp = Pchip::new(&x, &phi)?;
    Ok(LaneEmdenProfile {
        gamma,
        n,
        total_mass,
        radius,
        central_density: rho_c,
        length_scale: a,
        dx,
        x,
        rho_bar,
        phi,
        rho_pow_gamma_minus_1: rho_pow,
        rho_pow_slope,
        enclosed,
        cell_mass,
        rho_bar_mid,
        c_pv,
        emden: emden.clone(),
        rho_interp,
        phi_interp,
    })
}

impl LaneEmdenProfile {
    /// Solve the Emden equation for `n = 1/(γ-1)` and scale to `total_mass`.
    pub fn new(gamma: f64, total_mass: f64, cells: usize) -> Result<Self> {
        if !(gamma > 1.2 && gamma < 2.0) {
            return Err(Error::param("gamma", format!("must lie in (6/5, 2), got {gamma}")));
        }
        let emden = EmdenSolver::new(1.0 / (gamma - 1.0)).solve()?;
        scale_to_mass(&emden, gamma, total_mass, cells)
    }

    pub fn cells(&self) -> usize {
        self.x.len() - 1
    }

    pub fn emden(&self) -> &DimensionlessSolution {
        &self.emden
    }

    /// Interpolated `(ρ̄, φ)` with `(ρ̄^{γ-1})_x = -(γ-1)/γ · xφ`.
    pub fn eval(&self, x: f64) -> Result<ProfilePoint> {
        let slack = 1e-12 * self.radius;
        if !(x >= -slack && x <= self.radius + slack) {
            return Err(Error::Domain { x, radius: self.radius });
        }
        let x = x.clamp(0.0, self.radius);
        let rho_bar = if x == self.radius { 0.0 } else { self.rho_interp.eval(x).max(0.0) };
        let phi = self.phi_interp.eval(x);
        Ok(ProfilePoint {
            rho_bar,
            phi,
            rho_pow_slope: -(self.gamma - 1.0) / self.gamma * x * phi,
        })
    }

    /// `ρ̄(x)` from the continuous Emden solution (not the nodal interpolant);
    /// zero outside `[0, R̄]`.
    pub fn density_exact(&self, x: f64) -> f64 {
        if !(0.0..self.radius).contains(&x) {
            return 0.0;
        }
        let w = self.emden.eval(x / self.length_scale)[0].max(0.0);
        self.central_density * w.powf(self.n)
    }

    /// `∫₀ˣ ρ̄ s² ds` from the integrated Emden mass function.
    pub fn enclosed_exact(&self, x: f64) -> f64 {
        let a = self.length_scale;
        let xi = (x / a).clamp(0.0, self.emden.xi1);
        a * a * a * self.central_density * self.emden.eval(xi)[2]
    }

    /// `(ρ̄^γ)_x + xφρ̄` with a centered difference of `ρ̄^γ`, at interior
    /// nodes. Second order in `dx` for smooth profiles.
    pub fn equilibrium_residual(&self) -> Vec<f64> {
        let p: Vec<f64> = self.rho_bar.iter().map(|r| r.powf(self.gamma)).collect();
        (1..self.cells())
            .map(|i| (p[i + 1] - p[i - 1]) / (2.0 * self.dx) + self.x[i] * self.phi[i] * self.rho_bar[i])
            .collect()
    }

    /// Measured margins of the profile invariants.
    pub fn check_invariants(&self) -> ProfileReport {
        let cells = self.cells();
        let strictly_decreasing = self.rho_bar.windows(2).all(|w| w[1] < w[0]);
        let phi_lower = self.total_mass / self.radius.powi(3);
        let phi_upper = 4.0 * PI * self.central_density / 3.0;
        let phi_min_margin = self
            .phi
            .iter()
            .map(|p| (p - phi_lower).min(phi_upper - p))
            .fold(f64::INFINITY, f64::min);
        let k = (self.gamma - 1.0) / self.gamma;
        let identity_residual = (1..cells)
            .map(|i| (self.rho_pow_slope[i] + k * self.x[i] * self.phi[i]).abs())
            .fold(0.0, f64::max);
        let quad_mass = 4.0 * PI * shell_mass(&self.x, &self.rho_bar).last().copied().unwrap_or(0.0);
        let mass_rel_error = (quad_mass - self.total_mass).abs() / self.total_mass;
        let vacuum_ratio_ok = (1..cells).all(|i| {
            let q = self.rho_pow_gamma_minus_1[i] / (self.radius - self.x[i]);
            q >= 1.0 / self.c_pv * (1.0 - 1e-12) && q <= self.c_pv * (1.0 + 1e-12)
        });
        ProfileReport {
            central_positive: self.rho_bar[0] > 0.0 && self.rho_bar[0] == self.central_density,
            boundary_vacuum: self.rho_bar[cells] == 0.0,
            strictly_decreasing,
            phi_min_margin,
            identity_residual,
            mass_rel_error,
            c_pv: self.c_pv,
            vacuum_ratio_ok,
        }
    }
}

/// Measured invariant margins of a profile.
#[derive(Debug, Clone, Copy)]
pub struct ProfileReport {
    pub central_positive: bool,
    pub boundary_vacuum: bool,
    pub strictly_decreasing: bool,
    /// Smallest distance of φ to either end of `[M/R̄³, 4πρ̄₀/3]`; negative
    /// when violated.
    pub phi_min_margin: f64,
    pub identity_residual: f64,
    pub mass_rel_error: f64,
    pub c_pv: f64,
    pub vacuum_ratio_ok: bool,
}

impl ProfileReport {
    pub fn passes(&self, phi_tol: f64, identity_tol: f64, mass_tol: f64) -> bool {
        self.central_positive
            && self.boundary_vacuum
            && self.strictly_decreasing
            && self.phi_min_margin >= -phi_tol
            && self.identity_residual <= identity_tol
            && self.mass_rel_error <= mass_tol
            && self.c_pv.is_finite()
            && self.vacuum_ratio_ok
    }
}

/// Cumulative `∫₀^{x_i} ρ s² ds` for a density that is linear between
/// nodes, integrated exactly cell by cell.
pub fn shell_mass(x: &[f64], rho: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for j in 0..x.len().saturating_sub(1) {
        let (a, b) = (x[j], x[j + 1]);
        let h = b - a;
        let slope = (rho[j + 1] - rho[j]) / h;
        // ∫ (ρ_a + slope (s - a)) s² ds
        let s3 = (b.powi(3) - a.powi(3)) / 3.0;
        let s4 = (b.powi(4) - a.powi(4)) / 4.0;
        let cell = (rho[j] - slope * a) * s3 + slope * s4;
        out[j + 1] = out[j] + cell;
    }
    out
}

/// `φ(x) = x⁻³ ∫₀ˣ 4π ρ s² ds` for nodal densities (linear between nodes).
pub fn phi_from_density(x: &[f64], rho: &[f64]) -> Vec<f64> {
    let cum = shell_mass(x, rho);
    x.iter()
        .zip(&cum)
        .enumerate()
        .map(|(i, (xi, m))| {
            if i == 0 || *xi == 0.0 {
                4.0 * PI * rho[0] / 3.0
            } else {
                4.0 * PI * m / xi.powi(3)
            }
        })
        .collect()
}
