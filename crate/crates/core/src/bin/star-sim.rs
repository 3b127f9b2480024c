use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use star_sim::cli::{self, exit};
use star_sim::config::{load_config, RunConfig};
use star_sim::star_state::ModelParams;
use star_sim::Result;

#[derive(Parser)]
#[command(name = "star-sim", version, about = "Lane-Emden stars and their viscous free-boundary evolution")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a Lane-Emden profile and write profile.csv and profile.meta.json.
    LaneEmden {
        #[arg(long)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        mass: f64,
        /// Number of cells.
        #[arg(long, default_value_t = 1024)]
        n: usize,
        #[arg(long, default_value_t = 1e-13)]
        root_tol: f64,
        #[arg(long, default_value = "out")]
        output: PathBuf,
    },
    /// Run one configuration.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.directory`.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        emit_plots: bool,
    },
    /// Fit decay slopes of a series.csv and compare with the predicted rates.
    Rates {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        t_min: f64,
        #[arg(long, default_value_t = 0.5)]
        safety: f64,
        #[arg(long, default_value_t = 0.0)]
        slack: f64,
        /// Defaults to rates.json beside the series.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Exit with code 3 if any quantity fails.
        #[arg(long)]
        strict: bool,
    },
    /// Run the invariant suite; exits 3 if any check fails.
    Verify {
        /// Defaults to gamma = 1.5, theta = 0.5, nu1 = nu2 = 1.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Length of the perturbed run.
        #[arg(long, default_value_t = 2.0)]
        t_end: f64,
    },
    /// Run a (gamma, theta, epsilon) grid in parallel; STAR_SIM_THREADS caps the workers.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        gamma: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        theta: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        epsilon: Vec<f64>,
        #[arg(long, default_value = "sweep")]
        output: PathBuf,
    },
    /// Eulerian density and velocity at radius r from a stored snapshot.
    Probe {
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long)]
        r: f64,
    },
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::LaneEmden {
            gamma,
            mass,
            n,
            root_tol,
            output,
        } => {
            let meta = cli::cmd_lane_emden(gamma, mass, n, root_tol, &output)?;
            print_json(&meta)?;
        }
        Command::Simulate {
            config,
            output,
            emit_plots,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(dir) = output {
                cfg.output.directory = dir;
            }
            cfg.output.emit_plots |= emit_plots;
            let summary = cli::cmd_simulate(&cfg)?;
            if !summary.small_data {
                eprintln!(
                    "warning: E(0) = {:e} exceeds delta_bar = {:e}; outside the small-data regime",
                    summary.e0, cfg.stability.delta_bar
                );
            }
            print_json(&summary)?;
        }
        Command::Rates {
            series,
            t_min,
            safety,
            slack,
            output,
            strict,
        } => {
            let out = output.unwrap_or_else(|| cli::default_rates_path(&series));
            let report = cli::cmd_rates(&series, t_min, safety, slack, &out)?;
            for e in &report.entries {
                let slope = e.fit.map_or(f64::NAN, |f| f.slope);
                println!(
                    "{:<16} slope {:>11.4e}  threshold {:>11.4e}  {}",
                    e.key,
                    slope,
                    e.threshold,
                    if e.pass { "PASS" } else { "FAIL" }
                );
            }
            if strict && !report.all_pass() {
                return Ok(exit::ACCEPTANCE);
            }
        }
        Command::Verify { config, t_end } => {
            let cfg = match config {
                Some(path) => load_config(&path)?,
                None => RunConfig::new(ModelParams::new(1.5, 0.5, 1.0, 1.0)?),
            };
            let report = cli::cmd_verify(&cfg, t_end)?;
            for c in &report.checks {
                println!(
                    "{:<32} measured {:>11.4e}  tolerance {:>11.4e}  margin {:>11.4e}  {}",
                    c.name,
                    c.measured,
                    c.tolerance,
                    c.margin(),
                    if c.pass { "PASS" } else { "FAIL" }
                );
            }
            if !report.all_pass() {
                return Ok(exit::ACCEPTANCE);
            }
        }
        Command::Sweep {
            config,
            gamma,
            theta,
            epsilon,
            output,
        } => {
            let base = load_config(&config)?;
            let rows = cli::cmd_sweep(&base, &gamma, &theta, &epsilon, &output, cli::sweep_threads())?;
            let failed = rows.iter().filter(|r| !r.ok).count();
            println!("{} runs, {} failed; summary in {}", rows.len(), failed, output.join("summary.csv").display());
        }
        Command::Probe { snapshot, r } => {
            print_json(&cli::cmd_probe(&snapshot, r)?)?;
        }
    }
    Ok(exit::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap uses 2 for usage errors; here 2 means a numerical failure
            return ExitCode::from(if e.use_stderr() { exit::VALIDATION as u8 } else { 0 });
        }
    };
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            cli::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}
