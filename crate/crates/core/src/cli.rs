//! Subcommand implementations behind the `star-sim` binary.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{write_config, RunConfig};
use crate::diagnostics::{self, eta_integral};
use crate::error::{Error, Result};
use crate::initial_data::make_initial;
use crate::io::{self, ProfileMeta, RateEntry, RatesReport, SeriesSchema};
use crate::lane_emden::{scale_to_mass, solve_dimensionless};
use crate::numerics::l2_norm;
use crate::solver::{self, Simulation, SolverConfig};
use crate::star_state::{EulerianProbe, ModelParams, SimState};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const NUMERICAL: i32 = 2;
    pub const ACCEPTANCE: i32 = 3;
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_validation() {
        exit::VALIDATION
    } else {
        exit::NUMERICAL
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

pub fn cmd_lane_emden(gamma: f64, mass: f64, cells: usize, root_tol: f64, out: &Path) -> Result<ProfileMeta> {
    if !(gamma > 6.0 / 5.0 && gamma < 2.0) {
        return Err(Error::param("gamma", format!("gamma must satisfy 6/5 < gamma < 2, got {gamma}")));
    }
    if cells < 16 {
        return Err(Error::param("n", format!("n must be at least 16, got {cells}")));
    }
    if !(root_tol > 0.0) {
        return Err(Error::param("root_tol", "root_tol must be positive"));
    }
    let emden = solve_dimensionless(1.0 / (gamma - 1.0), root_tol)?;
    let profile = scale_to_mass(&emden, gamma, mass, cells)?;
    create_dir(out)?;
    io::write_profile(out, &profile)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub e0: f64,
    pub e_end: f64,
    /// Whether `ℰ(0) ≤ δ̄`.
    pub small_data: bool,
    pub steps: usize,
    pub t_end: f64,
    pub snapshots: usize,
}

/// Run one configuration and write its outputs into `config.output.directory`.
pub fn cmd_simulate(config: &RunConfig) -> Result<SimulateSummary> {
    config.validate()?;
    let out = &config.output.directory;
    create_dir(out)?;
    write_config(config, &out.join("config.effective.toml"))?;
    let profile = config.profile()?;
    io::write_profile(out, &profile)?;
    let exps = config.exponents()?;
    let l = config.diagnostics.l * profile.radius;
    let initial = make_initial(&profile, &config.model, &config.perturbation)?;
    let small_data = initial.is_small(config.stability.delta_bar);
    let run = solver::run(&initial, &profile, &config.model, &config.solver, &exps, l)?;
    let schema = SeriesSchema::new(config.model.gamma, config.model.theta, exps.iota, &exps.b_grid, l);
    io::write_series(out, &run.history, &schema)?;
    for snap in &run.snapshots {
        io::write_snapshot(out, snap)?;
    }
    if config.output.emit_plots {
        io::write_plot_stub(out, &["sup_r_err", "sup_v", "eta_int", "energy_e"])?;
    }
    let summary = SimulateSummary {
        e0: initial.e0,
        e_end: run.history.last().map_or(f64::NAN, |r| r.energy_e),
        small_data,
        steps: run.steps,
        t_end: run.final_state.t,
        snapshots: run.snapshots.len(),
    };
    io::write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Fit every decaying column of a series against its predicted envelope rate.
/// A quantity passes when `slope ≤ -safety · predicted + slack`.
pub fn rates_report(
    history: &[diagnostics::DiagnosticsRecord],
    schema: &SeriesSchema,
    t_min: f64,
    safety: f64,
    slack: f64,
) -> Result<RatesReport> {
    let params = ModelParams::new(schema.gamma, schema.theta, 1.0, 1.0)?;
    let exps = diagnostics::exponents(&params, schema.iota)?.with_b_grid(schema.b_grid.clone())?;
    let rates = exps.rates();
    let mut predicted: Vec<(String, f64)> = vec![
        ("sup_r_err".into(), rates.sup_r_err),
        ("sup_v".into(), rates.sup_v),
        ("sup_rx_err".into(), rates.sup_rx_err),
        ("interior_r_err".into(), rates.interior_r_err),
        ("r_err".into(), rates.r_err),
        ("vr_sup".into(), rates.vr_sup),
    ];
    predicted.extend(rates.rho_err_sup.iter().enumerate().map(|(k, &p)| (format!("rho_err_sup_{k}"), p)));
    let entries = predicted
        .into_iter()
        .map(|(key, p)| {
            let threshold = -safety * p + slack;
            match diagnostics::fit_decay(history, &key, t_min) {
                Ok(fit) => RateEntry {
                    pass: fit.slope <= threshold,
                    key,
                    predicted: p,
                    fit: Some(fit),
                    threshold,
                    error: None,
                },
                Err(e) => RateEntry {
                    key,
                    predicted: p,
                    fit: None,
                    threshold,
                    pass: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(RatesReport {
        gamma: exps.gamma,
        theta: exps.theta,
        iota: exps.iota,
        alpha: exps.alpha,
        beta: exps.beta,
        varsigma: exps.varsigma,
        a: exps.a,
        t_min,
        safety,
        slack,
        entries,
    })
}

/// Read `series.csv` and its schema sidecar, write `rates.json` to `out`.
pub fn cmd_rates(series: &Path, t_min: f64, safety: f64, slack: f64, out: &Path) -> Result<RatesReport> {
    let history = io::read_series(series)?;
    let schema_path = series.with_file_name("series.schema.json");
    let schema = io::read_schema(&schema_path)?;
    let report = rates_report(&history, &schema, t_min, safety, slack)?;
    io::write_json(out, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            pass: measured <= tolerance,
        }
    }

    /// `tolerance - measured`; negative on failure.
    pub fn margin(&self) -> f64 {
        self.tolerance - self.measured
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Invariant suite: profile bounds, fixed point, mass identity, η bounds and
/// monotonicity over a short perturbed run, and two-form viscosity agreement.
pub fn cmd_verify(config: &RunConfig, t_end: f64) -> Result<VerifyReport> {
    config.validate()?;
    let params = config.model;
    let profile = config.profile()?;
    let mut checks = Vec::new();

    let pr = profile.check_invariants();
    checks.push(Check::at_most("profile_phi_bounds", (-pr.phi_min_margin).max(0.0), 1e-8));
    checks.push(Check::at_most("profile_identity_residual", pr.identity_residual, 1e-6));

    let mut state = SimState::equilibrium(&profile);
    for _ in 0..1000 {
        state = solver::step(&state, &profile, &params, &config.solver)?;
    }
    let drift = state.r.iter().zip(&profile.x).map(|(r, x)| (r - x).abs()).fold(0.0, f64::max);
    checks.push(Check::at_most("fixed_point_drift_over_r_bar", drift / profile.radius, 1e-10));

    let initial = make_initial(&profile, &params, &config.perturbation)?;
    let cfg = SolverConfig {
        t_end,
        ..config.solver.clone()
    };
    let mut sim = Simulation::new(&initial, &profile, &params, &cfg)?;
    let exps = config.exponents()?;
    let l = config.diagnostics.l * profile.radius;
    checks.push(Check::at_most("mass_identity", sim.record(&exps, l)?.mass_err, 1e-12));

    let prev = sim.state.clone();
    sim.advance()?;
    let direct = solver::viscous_operator_on_pair(&prev, &sim.state, &profile, &params)?;
    let rewritten = solver::viscous_operator_time_form(&prev, &sim.state, &profile, &params)?;
    let diff: Vec<f64> = direct.iter().zip(&rewritten).map(|(a, b)| a - b).collect();
    let scale = l2_norm(&rewritten, profile.dx);
    let rel = if scale > 0.0 { l2_norm(&diff, profile.dx) / scale } else { 0.0 };
    checks.push(Check::at_most("two_form_viscosity_rel_l2", rel, 1e-3));

    let eta0 = eta_integral(&prev, &profile, &params)?;
    let mut eta_prev = eta0.value;
    let mut worst_rise = 0.0_f64;
    let mut bound_violations = 0usize;
    loop {
        let r = eta_integral(&sim.state, &profile, &params)?;
        worst_rise = worst_rise.max(r.value - eta_prev);
        eta_prev = r.value;
        if sim.steps % cfg.output_stride == 0 && r.in_regime && !(r.lower_ok && r.upper_ok) {
            bound_violations += 1;
        }
        if sim.done() {
            break;
        }
        sim.advance()?;
    }
    let rel_rise = if eta0.value > 0.0 { worst_rise / eta0.value } else { worst_rise };
    checks.push(Check::at_most("eta_per_step_rise_over_eta0", rel_rise, 1e-3));
    checks.push(Check::at_most("eta_bound_violations", bound_violations as f64, 0.0));
    Ok(VerifyReport { checks })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub run: String,
    pub gamma: f64,
    pub theta: f64,
    pub epsilon: f64,
    pub ok: bool,
    pub e0: f64,
    pub e_end: f64,
    pub slope_sup_r_err: f64,
    pub predicted_sup_r_err: f64,
    pub slope_sup_v: f64,
    pub predicted_sup_v: f64,
    pub error: String,
}

/// `STAR_SIM_THREADS`, if set to a positive integer.
pub fn sweep_threads() -> Option<usize> {
    std::env::var("STAR_SIM_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn sweep_one(base: &RunConfig, run: &str, gamma: f64, theta: f64, epsilon: f64, out: &Path) -> SweepRow {
    let mut row = SweepRow {
        run: run.to_string(),
        gamma,
        theta,
        epsilon,
        ok: false,
        e0: f64::NAN,
        e_end: f64::NAN,
        slope_sup_r_err: f64::NAN,
        predicted_sup_r_err: f64::NAN,
        slope_sup_v: f64::NAN,
        predicted_sup_v: f64::NAN,
        error: String::new(),
    };
    let result = (|| -> Result<()> {
        let mut cfg = base.clone();
        cfg.model.gamma = gamma;
        cfg.model.theta = theta;
        cfg.perturbation.epsilon = epsilon;
        // an explicit iota or b-grid is tied to the base (gamma, theta)
        cfg.diagnostics.iota = None;
        cfg.diagnostics.b_grid = None;
        cfg.output.directory = out.join(run);
        let summary = cmd_simulate(&cfg)?;
        row.e0 = summary.e0;
        row.e_end = summary.e_end;
        let rates = cfg.exponents()?.rates();
        row.predicted_sup_r_err = rates.sup_r_err;
        row.predicted_sup_v = rates.sup_v;
        let history = io::read_series(&cfg.output.directory.join("series.csv"))?;
        let t_min = cfg.diagnostics.fit_t_min;
        if let Ok(fit) = diagnostics::fit_decay(&history, "sup_r_err", t_min) {
            row.slope_sup_r_err = fit.slope;
        }
        if let Ok(fit) = diagnostics::fit_decay(&history, "sup_v", t_min) {
            row.slope_sup_v = fit.slope;
        }
        Ok(())
    })();
    match result {
        Ok(()) => row.ok = true,
        Err(e) => row.error = e.to_string(),
    }
    row
}

/// Run the `gammas × thetas × epsilons` grid in parallel, one subdirectory per
/// run, and write `summary.csv` in grid order. Failed runs are recorded, not
/// propagated.
pub fn cmd_sweep(
    base: &RunConfig,
    gammas: &[f64],
    thetas: &[f64],
    epsilons: &[f64],
    out: &Path,
    threads: Option<usize>,
) -> Result<Vec<SweepRow>> {
    create_dir(out)?;
    let mut grid = Vec::new();
    for &g in gammas {
        for &th in thetas {
            for &e in epsilons {
                grid.push((format!("run_{:03}", grid.len()), g, th, e));
            }
        }
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let rows: Vec<SweepRow> = pool.install(|| {
        grid.par_iter()
            .map(|(run, g, th, e)| sweep_one(base, run, *g, *th, *e, out))
            .collect()
    });
    write_summary(&out.join("summary.csv"), &rows)?;
    Ok(rows)
}

fn write_summary(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(io::csv_error)?;
    w.write_record([
        "run",
        "gamma",
        "theta",
        "epsilon",
        "status",
        "e0",
        "e_end",
        "slope_sup_r_err",
        "predicted_sup_r_err",
        "slope_sup_v",
        "predicted_sup_v",
        "error",
    ])
    .map_err(io::csv_error)?;
    for r in rows {
        let f = io::fmt_f64;
        w.write_record([
            r.run.clone(),
            f(r.gamma),
            f(r.theta),
            f(r.epsilon),
            if r.ok { "ok" } else { "failed" }.to_string(),
            f(r.e0),
            f(r.e_end),
            f(r.slope_sup_r_err),
            f(r.predicted_sup_r_err),
            f(r.slope_sup_v),
            f(r.predicted_sup_v),
            r.error.clone(),
        ])
        .map_err(io::csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub t: f64,
    pub r: f64,
    pub x: f64,
    pub rho: f64,
    pub u: f64,
}

pub fn cmd_probe(snapshot: &Path, r_query: f64) -> Result<ProbeResult> {
    let snap = io::read_snapshot(snapshot)?;
    let probe = EulerianProbe::from_fields(&snap.x, &snap.r, &snap.v, &snap.f)?;
    let x = probe.invert(r_query)?;
    let (rho, u) = probe.probe(r_query)?;
    Ok(ProbeResult {
        t: snap.t,
        r: r_query,
        x,
        rho,
        u,
    })
}

/// Default output location for `rates` beside the series.
pub fn default_rates_path(series: &Path) -> PathBuf {
    series.with_file_name("rates.json")
}
