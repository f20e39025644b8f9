//! Flat `key = value` scenario files.
//!
//! ```text
//! # comment
//! scenario.name = peakon-transport
//! data.preset = peakon
//! data.c = 1.0
//! solver.n_points = 2048
//! solver.dt = 0.001
//! solver.t_end = 1.0
//! forcing.k = 0.0
//! ```
//!
//! Unknown keys, repeated keys and malformed values are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chforce::presets::DEFAULT_PAIR_OFFSET;
use chforce::{Preset, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

const KEYS: &[&str] = &[
    "scenario.name",
    "data.preset",
    "data.c",
    "data.d",
    "data.offset",
    "data.a",
    "data.w",
    "data.half_width",
    "solver.n_points",
    "solver.dt",
    "solver.t_end",
    "solver.output_interval",
    "solver.output_times",
    "solver.singular_threshold",
    "solver.xi_floor",
    "forcing.k",
    "diagnostics.energy_balance_max",
    "diagnostics.gronwall",
    "diagnostics.identity_max",
    "converge.mode",
    "converge.levels",
    "converge.deltas",
    "converge.bump_center",
    "converge.bump_width",
    "trace.x0",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergeMode {
    /// Double `N` and halve `dt` per level.
    Refine,
    /// Perturb the initial data by `δ·bump` and compare with the unperturbed run.
    Dependence,
}

impl fmt::Display for ConvergeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConvergeMode::Refine => "refine",
            ConvergeMode::Dependence => "dependence",
        })
    }
}

/// Diagnostic thresholds; `None` disables a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub energy_balance: Option<f64>,
    pub gronwall: bool,
    pub identity: Option<f64>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            energy_balance: Some(1e-5),
            gronwall: true,
            identity: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub preset: Preset,
    pub half_width: f64,
    pub solver: SolverConfig,
    pub thresholds: Thresholds,
    pub converge_mode: ConvergeMode,
    pub levels: usize,
    pub deltas: Vec<f64>,
    pub bump_center: f64,
    pub bump_width: f64,
    pub trace_x0: Vec<f64>,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let entries = parse_entries(text)?;
        let get = |key: &str| entries.get(key).map(String::as_str);
        let num = |key: &str, default: f64| -> Result<f64, CliError> {
            match get(key) {
                None => Ok(default),
                Some(v) => parse_f64(key, v),
            }
        };
        let opt_num = |key: &str, default: Option<f64>| -> Result<Option<f64>, CliError> {
            match get(key) {
                None => Ok(default),
                Some("off") | Some("none") => Ok(None),
                Some(v) => parse_f64(key, v).map(Some),
            }
        };

        let preset = parse_preset(&entries)?;
        let half_width = num("data.half_width", 20.0)?;
        if !(half_width > 0.0) {
            return Err(CliError::Config(format!(
                "data.half_width must be positive, got {half_width}"
            )));
        }

        let n_points = match get("solver.n_points") {
            None => 2048,
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("solver.n_points: expected an integer, got {v:?}")))?,
        };
        let dt = num("solver.dt", 1e-3)?;
        let t_end = num("solver.t_end", 1.0)?;
        let k = num("forcing.k", 0.0)?;
        let mut solver = SolverConfig::new(n_points, dt, t_end, k);
        solver.singular_threshold = num("solver.singular_threshold", SolverConfig::DEFAULT_SINGULAR_THRESHOLD)?;
        solver.xi_floor = num("solver.xi_floor", SolverConfig::DEFAULT_XI_FLOOR)?;
        match (get("solver.output_times"), get("solver.output_interval")) {
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "give either solver.output_times or solver.output_interval, not both".into(),
                ))
            }
            (Some(list), None) => solver.output_times = parse_list("solver.output_times", list)?,
            (None, interval) => {
                let interval = match interval {
                    Some(v) => parse_f64("solver.output_interval", v)?,
                    None => t_end.abs() / 10.0,
                };
                if !(interval > 0.0) {
                    return Err(CliError::Config(format!(
                        "solver.output_interval must be positive, got {interval}"
                    )));
                }
                solver = solver.with_output_interval(interval);
            }
        }
        solver.validate().map_err(|e| CliError::Config(e.to_string()))?;

        let gronwall = match get("diagnostics.gronwall") {
            None | Some("true") | Some("on") => true,
            Some("false") | Some("off") => false,
            Some(v) => {
                return Err(CliError::Config(format!(
                    "diagnostics.gronwall: expected true or false, got {v:?}"
                )))
            }
        };
        let thresholds = Thresholds {
            energy_balance: opt_num("diagnostics.energy_balance_max", Thresholds::default().energy_balance)?,
            gronwall,
            identity: opt_num("diagnostics.identity_max", None)?,
        };

        let converge_mode = match get("converge.mode") {
            None | Some("refine") => ConvergeMode::Refine,
            Some("dependence") => ConvergeMode::Dependence,
            Some(v) => {
                return Err(CliError::Config(format!(
                    "converge.mode: expected refine or dependence, got {v:?}"
                )))
            }
        };
        let levels = match get("converge.levels") {
            None => 3,
            Some(v) => v
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("converge.levels: expected an integer, got {v:?}")))?,
        };
        let deltas = match get("converge.deltas") {
            None => vec![1e-1, 1e-2, 1e-3],
            Some(v) => parse_list("converge.deltas", v)?,
        };
        let bump_width = num("converge.bump_width", 1.0)?;
        if !(bump_width > 0.0) {
            return Err(CliError::Config(format!(
                "converge.bump_width must be positive, got {bump_width}"
            )));
        }
        let trace_x0 = match get("trace.x0") {
            None => vec![0.0],
            Some(v) => parse_list("trace.x0", v)?,
        };

        Ok(Self {
            name: get("scenario.name").unwrap_or("scenario").to_string(),
            preset,
            half_width,
            solver,
            thresholds,
            converge_mode,
            levels,
            deltas,
            bump_center: num("converge.bump_center", 0.0)?,
            bump_width,
            trace_x0,
        })
    }
}

fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut entries = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {raw:?}", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("line {}: unknown key {key:?}", lineno + 1)));
        }
        if value.is_empty() {
            return Err(CliError::Config(format!("line {}: empty value for {key}", lineno + 1)));
        }
        if entries.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key {key}", lineno + 1)));
        }
    }
    Ok(entries)
}

fn parse_f64(key: &str, value: &str) -> Result<f64, CliError> {
    let v = value
        .parse::<f64>()
        .map_err(|_| CliError::Config(format!("{key}: expected a number, got {value:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{key}: value must be finite, got {value:?}")))
    }
}

/// Comma-separated numbers.
pub fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_f64(key, s))
        .collect()
}

fn parse_preset(entries: &BTreeMap<String, String>) -> Result<Preset, CliError> {
    let name = entries.get("data.preset").map(String::as_str).unwrap_or("zero");
    let params = ["data.c", "data.d", "data.offset", "data.a", "data.w"];
    let given: Vec<&str> = params.iter().copied().filter(|k| entries.contains_key(*k)).collect();
    if name.contains('(') {
        if !given.is_empty() {
            return Err(CliError::Config(format!(
                "data.preset {name:?} already carries its parameters; remove {}",
                given.join(", ")
            )));
        }
        return name
            .parse()
            .map_err(|e: chforce::Error| CliError::Config(e.to_string()));
    }
    let num = |key: &str, default: f64| -> Result<f64, CliError> {
        entries.get(key).map_or(Ok(default), |v| parse_f64(key, v))
    };
    let allowed: &[&str] = match name {
        "zero" => &[],
        "peakon" | "antipeakon" => &["data.c"],
        "peakon_pair" => &["data.c", "data.d", "data.offset"],
        "gaussian" => &["data.a", "data.w"],
        other => return Err(CliError::Config(format!("unknown preset {other:?}"))),
    };
    if let Some(extra) = given.iter().find(|k| !allowed.contains(k)) {
        return Err(CliError::Config(format!("{extra} does not apply to preset {name}")));
    }
    let preset = match name {
        "zero" => Preset::Zero,
        "peakon" => Preset::Peakon { c: num("data.c", 1.0)? },
        "antipeakon" => Preset::Antipeakon { c: num("data.c", 1.0)? },
        "peakon_pair" => Preset::PeakonPair {
            c: num("data.c", 1.0)?,
            d: num("data.d", -1.0)?,
            offset: num("data.offset", DEFAULT_PAIR_OFFSET)?,
        },
        _ => Preset::Gaussian {
            a: num("data.a", 1.0)?,
            w: num("data.w", 1.0)?,
        },
    };
    Ok(preset)
}
