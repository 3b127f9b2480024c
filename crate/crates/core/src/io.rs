//! Output files: time series, profiles, snapshots and rate reports.
//!
//! Floats are written as `{:.16e}` (17 significant digits), which round-trips
//! every `f64` and keeps identical runs byte-identical.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{DecayFit, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::lane_emden::LaneEmdenProfile;
use crate::solver::Snapshot;

pub const SERIES_SCHEMA_VERSION: u32 = 1;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    w.write_record(header).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.into_iter().map(fmt_f64)).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Input(format!("csv: {other:?}")),
    }
}

/// Run parameters stored beside `series.csv` so that `rates` can work from
/// the files alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSchema {
    pub version: u32,
    pub columns: Vec<ColumnDoc>,
    pub gamma: f64,
    pub theta: f64,
    pub iota: f64,
    pub b_grid: Vec<f64>,
    /// Absolute interior radius `l`.
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDoc {
    pub name: String,
    pub description: String,
}

fn describe(key: &str, b_grid: &[f64]) -> String {
    if let Some(k) = key.strip_prefix("rho_err_sup_") {
        let b = k.parse::<usize>().ok().and_then(|i| b_grid.get(i)).copied().unwrap_or(f64::NAN);
        return format!("sup rho_bar^(-b) |rho - rho_bar|^2 with b = {b}");
    }
    match key {
        "t" => "time",
        "energy_e" => "master norm E(t)",
        "eta_int" => "integral of the relative-entropy density eta",
        "d" => "(1+t)(kinetic + potential) + viscous dissipation proxy",
        "kinetic" => "integral of x^2 rho_bar v^2",
        "sup_r_err" => "sup x |r - x|^2",
        "sup_v" => "sup x v^2",
        "sup_rx_err" => "sup over [0, l] of (r_x - 1)^2 + (r/x - 1)^2",
        "interior_r_err" => "sup over [0, l] of |r - x|^2",
        "r_t" => "boundary radius R(t)",
        "r_err" => "|R(t) - R_bar|",
        "vr_sup" => "sup (v_x/r_x)^2 + (v/r)^2",
        "mass_err" => "relative discrete mass identity residual",
        _ => "",
    }
    .to_string()
}

impl SeriesSchema {
    pub fn new(gamma: f64, theta: f64, iota: f64, b_grid: &[f64], l: f64) -> Self {
        let columns = DiagnosticsRecord::keys(b_grid.len())
            .into_iter()
            .map(|name| ColumnDoc {
                description: describe(&name, b_grid),
                name,
            })
            .collect();
        Self {
            version: SERIES_SCHEMA_VERSION,
            columns,
            gamma,
            theta,
            iota,
            b_grid: b_grid.to_vec(),
            l,
        }
    }
}

pub fn write_series(dir: &Path, history: &[DiagnosticsRecord], schema: &SeriesSchema) -> Result<()> {
    let keys = DiagnosticsRecord::keys(schema.b_grid.len());
    write_csv(&dir.join("series.csv"), &keys, history.iter().map(|r| r.values()))?;
    write_json(&dir.join("series.schema.json"), schema)
}

/// Read `series.csv`; the number of `rho_err_sup_*` columns is taken from the
/// header.
pub fn read_series(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_error)?;
    let header: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    let nb = header.iter().filter(|h| h.starts_with("rho_err_sup_")).count();
    if header != DiagnosticsRecord::keys(nb) {
        return Err(Error::Input(format!("{}: unexpected header", path.display())));
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(csv_error)?;
            let values = rec
                .iter()
                .map(|c| c.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Input(format!("{} line {}: {e}", path.display(), i + 2)))?;
            DiagnosticsRecord::from_values(&values, nb)
        })
        .collect()
}

pub fn read_schema(path: &Path) -> Result<SeriesSchema> {
    let schema: SeriesSchema = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if schema.version != SERIES_SCHEMA_VERSION {
        return Err(Error::Input(format!(
            "series schema version {} is not supported (expected {SERIES_SCHEMA_VERSION})",
            schema.version
        )));
    }
    Ok(schema)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileMeta {
    pub gamma: f64,
    #[serde(rename = "M")]
    pub mass: f64,
    #[serde(rename = "R_bar")]
    pub radius: f64,
    pub rho0: f64,
    #[serde(rename = "C_pv")]
    pub c_pv: f64,
    pub n: f64,
    pub cells: usize,
}

/// `profile.csv` (x, rho_bar, phi, rho_pow_gamma_minus_1) and
/// `profile.meta.json`.
pub fn write_profile(dir: &Path, profile: &LaneEmdenProfile) -> Result<ProfileMeta> {
    let header: Vec<String> = ["x", "rho_bar", "phi", "rho_pow_gamma_minus_1"].iter().map(|s| s.to_string()).collect();
    let rows = (0..profile.x.len()).map(|i| {
        vec![
            profile.x[i],
            profile.rho_bar[i],
            profile.phi[i],
            profile.rho_pow_gamma_minus_1[i],
        ]
    });
    write_csv(&dir.join("profile.csv"), &header, rows)?;
    let meta = ProfileMeta {
        gamma: profile.gamma,
        mass: profile.total_mass,
        radius: profile.radius,
        rho0: profile.central_density,
        c_pv: profile.c_pv,
        n: profile.n,
        cells: profile.cells(),
    };
    write_json(&dir.join("profile.meta.json"), &meta)?;
    Ok(meta)
}

pub fn snapshot_path(dir: &Path, step: usize) -> std::path::PathBuf {
    dir.join(format!("snapshot_{step:08}.json"))
}

pub fn write_snapshot(dir: &Path, snap: &Snapshot) -> Result<()> {
    write_json(&snapshot_path(dir, snap.step), snap)
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let snap: Snapshot = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let n = snap.x.len();
    if [snap.r.len(), snap.v.len(), snap.f.len(), snap.q.len()].iter().any(|&l| l != n) {
        return Err(Error::Input(format!("{}: field lengths differ", path.display())));
    }
    Ok(snap)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// One fitted quantity in `rates.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub key: String,
    pub predicted: f64,
    pub fit: Option<DecayFit>,
    /// `-safety · predicted + slack`.
    pub threshold: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatesReport {
    pub gamma: f64,
    pub theta: f64,
    pub iota: f64,
    pub alpha: f64,
    pub beta: f64,
    pub varsigma: f64,
    pub a: f64,
    pub t_min: f64,
    pub safety: f64,
    pub slack: f64,
    pub entries: Vec<RateEntry>,
}

impl RatesReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// gnuplot script over `series.csv`, written by `--emit-plots`.
pub fn write_plot_stub(dir: &Path, keys: &[&str]) -> Result<()> {
    let mut s = String::from(
        "# gnuplot -persist plot_series.gp\nset datafile separator ','\nset key autotitle columnhead\nset logscale xy\nset xlabel '1+t'\n",
    );
    let plots: Vec<String> = keys
        .iter()
        .map(|k| format!("'series.csv' using (1+column('t')):(column('{k}')) with lines"))
        .collect();
    let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
    std::fs::write(dir.join("plot_series.gp"), s)?;
    Ok(())
}
