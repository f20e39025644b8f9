//! CSV schemas and the run manifest.
//!
//! Floats are written with 17 significant digits so every value round-trips.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chforce::{DiagnosticRecord, EulerianSnapshot, LagrangianState, Preset, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::config::Thresholds;
use crate::CliError;

pub const SNAPSHOT_HEADER: [&str; 6] = ["t", "Y", "x", "u", "v", "xi"];
pub const EULERIAN_HEADER: [&str; 4] = ["t", "x", "u", "singular_flag"];
pub const DIAGNOSTICS_HEADER: [&str; 5] = ["t", "energy", "forcing_integral", "uy_residual", "xy_residual"];
pub const PATH_HEADER: [&str; 6] = ["t", "beta", "x", "u", "u_residual", "v_residual"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// One pass/fail check recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Bound the value is compared against; `None` for boolean checks.
    pub threshold: Option<f64>,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold: Some(threshold),
            passed: value <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub n_points: usize,
    pub dt: f64,
    pub t_end: f64,
    pub k: f64,
    pub output_times: Vec<f64>,
    pub singular_threshold: f64,
    pub xi_floor: f64,
}

impl From<&SolverConfig> for SolverSummary {
    fn from(c: &SolverConfig) -> Self {
        Self {
            n_points: c.n_points,
            dt: c.dt,
            t_end: c.t_end,
            k: c.k,
            output_times: c.output_times.clone(),
            singular_threshold: c.singular_threshold,
            xi_floor: c.xi_floor,
        }
    }
}

impl SolverSummary {
    pub fn to_config(&self) -> SolverConfig {
        SolverConfig {
            n_points: self.n_points,
            dt: self.dt,
            t_end: self.t_end,
            k: self.k,
            output_times: self.output_times.clone(),
            singular_threshold: self.singular_threshold,
            xi_floor: self.xi_floor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub scenario: String,
    pub preset: String,
    pub preset_parameters: BTreeMap<String, f64>,
    pub half_width: f64,
    pub solver: SolverSummary,
    pub output_dir: PathBuf,
    pub files: Vec<String>,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
    pub metrics: BTreeMap<String, f64>,
    pub thresholds: Thresholds,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
    pub errors: Vec<String>,
}

impl RunManifest {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Writes `name` (e.g. `manifest.json`) into `dir`.
    pub fn write(&self, dir: &Path, name: &str) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join(name), text + "\n")?;
        Ok(())
    }

    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))
            .map_err(|e| CliError::Io(format!("cannot read manifest in {}: {e}", dir.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn preset_parameters(p: &Preset) -> BTreeMap<String, f64> {
    let pairs: Vec<(&str, f64)> = match *p {
        Preset::Zero => vec![],
        Preset::Peakon { c } | Preset::Antipeakon { c } => vec![("c", c)],
        Preset::PeakonPair { c, d, offset } => vec![("c", c), ("d", d), ("offset", offset)],
        Preset::Gaussian { a, w } => vec![("a", a), ("w", w)],
    };
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<std::fs::File>, CliError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

pub fn write_snapshots(path: &Path, states: &[LagrangianState]) -> Result<(), CliError> {
    let mut w = writer(path, &SNAPSHOT_HEADER)?;
    for s in states {
        for i in 0..s.len() {
            w.write_record([s.t, s.grid_y[i], s.x[i], s.u[i], s.v[i], s.xi[i]].map(fmt_f64))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_eulerian(path: &Path, snaps: &[EulerianSnapshot]) -> Result<(), CliError> {
    let mut w = writer(path, &EULERIAN_HEADER)?;
    for s in snaps {
        for i in 0..s.len() {
            let flag = if s.singular[i] { "1" } else { "0" };
            w.write_record([fmt_f64(s.t), fmt_f64(s.x[i]), fmt_f64(s.u[i]), flag.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticRecord]) -> Result<(), CliError> {
    let mut w = writer(path, &DIAGNOSTICS_HEADER)?;
    for r in records {
        w.write_record([r.t, r.energy, r.forcing_integral, r.uy_residual, r.xy_residual].map(fmt_f64))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes rows of floats under `header`.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
    let mut w = writer(path, header)?;
    for row in rows {
        w.write_record(row.iter().map(|&v| fmt_f64(v)))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a numeric CSV whose header must equal `header`.
pub fn read_table(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>, CliError> {
    let mut r =
        csv::Reader::from_path(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(CliError::Io(format!(
            "{}: expected columns {header:?}, found {found:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| CliError::Io(format!("{} row {}: bad number {f:?}", path.display(), line + 2)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Rebuilds Lagrangian snapshots from a snapshot CSV; rows are grouped by `t`.
pub fn read_snapshots(path: &Path) -> Result<Vec<LagrangianState>, CliError> {
    let rows = read_table(path, &SNAPSHOT_HEADER)?;
    let mut states: Vec<LagrangianState> = Vec::new();
    for row in rows {
        let t = row[0];
        if states.last().is_none_or(|s| s.t.to_bits() != t.to_bits()) {
            states.push(LagrangianState {
                t,
                grid_y: vec![],
                u: vec![],
                v: vec![],
                xi: vec![],
                x: vec![],
            });
        }
        let s = states.last_mut().expect("pushed above");
        s.grid_y.push(row[1]);
        s.x.push(row[2]);
        s.u.push(row[3]);
        s.v.push(row[4]);
        s.xi.push(row[5]);
    }
    for s in &states {
        s.validate()
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    Ok(states)
}
