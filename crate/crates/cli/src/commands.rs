//! The `run`, `converge`, `trace` and `diagnose` commands.
//!
//! Each command parses its scenario before touching the output directory, so a
//! malformed configuration leaves no files behind.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use chforce::characteristics::{characteristic_fields, path_defects, trace_in_fields};
use chforce::diagnostics::{self, energy_balance_residual, gronwall_check};
use chforce::eulerian::{h1_distance, interpolate_u};
use chforce::numerics::linspace;
use chforce::presets::bump_data;
use chforce::{build_initial_state, integrate, to_eulerian, EulerianSnapshot, Trajectory};

use crate::config::{ConvergeMode, ScenarioConfig, Thresholds};
use crate::output::{
    fmt_f64, preset_parameters, read_snapshots, write_diagnostics, write_eulerian, write_snapshots, write_table, Check,
    RunManifest, SolverSummary, PATH_HEADER,
};
use crate::CliError;

#[derive(Debug, Clone, Default)]
pub struct CommandOptions {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub levels: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub quiet: bool,
}

impl CommandOptions {
    fn scenario(&self) -> Result<ScenarioConfig, CliError> {
        let path = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Config("--config is required".into()))?;
        ScenarioConfig::load(path)
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }
}

/// Data beyond `[−L, L]` is treated as zero; larger tails are reported, not refused.
const TAIL_TOLERANCE: f64 = 1e-12;

fn manifest(command: &str, cfg: &ScenarioConfig, out: &Path) -> RunManifest {
    let mut m = RunManifest {
        command: command.into(),
        scenario: cfg.name.clone(),
        preset: cfg.preset.to_string(),
        preset_parameters: preset_parameters(&cfg.preset),
        half_width: cfg.half_width,
        solver: SolverSummary::from(&cfg.solver),
        output_dir: out.to_path_buf(),
        files: Vec::new(),
        timings: BTreeMap::new(),
        metrics: BTreeMap::new(),
        thresholds: cfg.thresholds.clone(),
        checks: Vec::new(),
        notes: Vec::new(),
        errors: Vec::new(),
    };
    if let Ok(data) = cfg.preset.initial_data(cfg.half_width) {
        let tail = data.tail_magnitude();
        m.metrics.insert("tail_magnitude".into(), tail);
        if tail > TAIL_TOLERANCE {
            m.notes.push(format!(
                "initial data is {tail:.1e} at the domain ends; truncation error is of that order"
            ));
        }
    }
    m
}

/// Solves the scenario from its preset.
pub fn solve(cfg: &ScenarioConfig) -> Result<Trajectory, CliError> {
    let data = cfg.preset.initial_data(cfg.half_width)?;
    let initial = build_initial_state(&data, &cfg.solver)?;
    Ok(integrate(&initial, &cfg.solver)?)
}

/// Energy, balance, Gronwall and identity checks of a trajectory.
pub fn evaluate(traj: &Trajectory, k: f64, thresholds: &Thresholds) -> (BTreeMap<String, f64>, Vec<Check>) {
    let mut metrics = BTreeMap::new();
    let mut checks = Vec::new();
    let recs = &traj.diagnostics;
    let e0 = recs.first().map_or(0.0, |r| r.energy);
    let drift = recs.iter().fold(0.0_f64, |m, r| m.max((r.energy - e0).abs()));
    let balance = energy_balance_residual(traj, k);
    let gron = gronwall_check(traj, k);
    let uy = recs.iter().fold(0.0_f64, |m, r| m.max(r.uy_residual));
    let xy = recs.iter().fold(0.0_f64, |m, r| m.max(r.xy_residual));
    metrics.insert("energy_initial".into(), e0);
    metrics.insert("energy_final".into(), recs.last().map_or(0.0, |r| r.energy));
    metrics.insert("energy_drift".into(), if e0 > 0.0 { drift / e0 } else { drift });
    metrics.insert("energy_balance_residual".into(), balance);
    metrics.insert("gronwall_upper_ratio".into(), gron.upper_ratio);
    metrics.insert("gronwall_lower_ratio".into(), gron.lower_ratio);
    metrics.insert("uy_residual_max".into(), uy);
    metrics.insert("xy_residual_max".into(), xy);
    if let Some(limit) = thresholds.energy_balance {
        checks.push(Check::at_most("energy_balance", balance, limit));
    }
    if thresholds.gronwall {
        checks.push(Check {
            name: "gronwall".into(),
            value: (gron.upper_ratio - 1.0).max(1.0 - gron.lower_ratio),
            threshold: Some(diagnostics::GRONWALL_TOLERANCE),
            passed: gron.passed,
        });
    }
    if let Some(limit) = thresholds.identity {
        checks.push(Check::at_most("identity_residuals", uy.max(xy), limit));
    }
    (metrics, checks)
}

fn finish(manifest: &RunManifest, out: &Path, name: &str, opts: &CommandOptions) -> Result<(), CliError> {
    manifest.write(out, name)?;
    for c in &manifest.checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        match c.threshold {
            Some(th) => opts.say(format!("{verdict} {}: {} (limit {})", c.name, c.value, th)),
            None => opts.say(format!("{verdict} {}: {}", c.name, c.value)),
        }
    }
    if manifest.all_passed() {
        Ok(())
    } else {
        Err(CliError::Threshold(manifest.failed_checks()))
    }
}

fn instability(traj: &Trajectory) -> Option<CliError> {
    traj.error.as_ref().map(|e| CliError::Instability(e.to_string()))
}

/// `run`: solve, map to Eulerian form, check diagnostics and write
/// `snapshots.csv`, `eulerian.csv`, `diagnostics.csv` and `manifest.json`.
///
/// On an instability the partial trajectory is still written.
pub fn cmd_run(opts: &CommandOptions) -> Result<RunManifest, CliError> {
    let cfg = opts.scenario()?;
    std::fs::create_dir_all(&opts.out)?;
    let out = opts.out.as_path();
    let mut m = manifest("run", &cfg, out);

    let start = Instant::now();
    let traj = solve(&cfg)?;
    m.timings.insert("solve".into(), start.elapsed().as_secs_f64());

    let start = Instant::now();
    let snaps: Vec<EulerianSnapshot> = traj
        .states
        .iter()
        .map(|s| to_eulerian(s, cfg.solver.singular_threshold))
        .collect();
    let (metrics, checks) = evaluate(&traj, cfg.solver.k, &cfg.thresholds);
    m.metrics.extend(metrics);
    m.metrics.insert(
        "singular_mass_max".into(),
        snaps.iter().fold(0.0_f64, |a, s| a.max(s.singular_mass)),
    );
    m.metrics.insert("snapshots".into(), traj.states.len() as f64);
    m.checks = checks;
    m.timings.insert("diagnostics".into(), start.elapsed().as_secs_f64());

    let start = Instant::now();
    write_snapshots(&out.join("snapshots.csv"), &traj.states)?;
    m.files.push("snapshots.csv".into());
    write_eulerian(&out.join("eulerian.csv"), &snaps)?;
    m.files.push("eulerian.csv".into());
    write_diagnostics(&out.join("diagnostics.csv"), &traj.diagnostics)?;
    m.files.push("diagnostics.csv".into());
    m.timings.insert("write".into(), start.elapsed().as_secs_f64());

    if let Some(err) = instability(&traj) {
        m.errors.push(err.to_string());
        m.write(out, "manifest.json")?;
        return Err(err);
    }
    m.files.push("manifest.json".into());
    finish(&m, out, "manifest.json", opts)?;
    Ok(m)
}

/// One row of a refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub level: usize,
    pub n_points: usize,
    pub dt: f64,
    /// Sup-norm error at `t_end`; NaN for the finest level when it is the reference.
    pub error: f64,
    /// `log₂(e_{l−1}/e_l)`; NaN where undefined.
    pub order: f64,
}

/// Reference used by a refinement study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    /// Closed-form solution, compared at the nodes.
    Exact,
    /// The finest level, compared on its nodes by linear interpolation.
    Finest,
}

/// Solves `cfg` at `levels` resolutions, doubling `N` and halving `dt` each time.
/// Levels run on separate threads.
pub fn refine_levels(cfg: &ScenarioConfig, levels: usize) -> Result<Vec<Trajectory>, CliError> {
    if levels < 2 {
        return Err(CliError::Config(format!("levels must be at least 2, got {levels}")));
    }
    let configs: Vec<ScenarioConfig> = (0..levels)
        .map(|l| {
            let mut c = cfg.clone();
            c.solver.n_points = cfg.solver.n_points << l;
            c.solver.dt = cfg.solver.dt / (1u64 << l) as f64;
            c
        })
        .collect();
    let results: Vec<Result<Trajectory, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = configs.iter().map(|c| scope.spawn(move || solve(c))).collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::Io("solver thread panicked".into())))
            })
            .collect()
    });
    let trajs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    if let Some(err) = trajs.iter().find_map(instability) {
        return Err(err);
    }
    Ok(trajs)
}

fn sup_difference_on_nodes(coarse: &EulerianSnapshot, fine: &EulerianSnapshot) -> Result<f64, CliError> {
    let (lo, hi) = coarse.x_range();
    let mut sup: f64 = 0.0;
    for (&x, &u) in fine.x.iter().zip(&fine.u) {
        if x >= lo && x <= hi {
            sup = sup.max((interpolate_u(coarse, x)? - u).abs());
        }
    }
    Ok(sup)
}

/// Errors and observed orders of a refinement study.
pub fn convergence_table(
    cfg: &ScenarioConfig,
    trajs: &[Trajectory],
) -> Result<(Vec<ConvergenceRow>, Reference), CliError> {
    let exact = if cfg.solver.k == 0.0 {
        cfg.preset.exact_unforced()
    } else {
        None
    };
    let reference = if exact.is_some() {
        Reference::Exact
    } else {
        Reference::Finest
    };
    let threshold = cfg.solver.singular_threshold;
    let finest = to_eulerian(trajs.last().expect("at least two levels").last(), threshold);
    let mut rows = Vec::with_capacity(trajs.len());
    for (l, traj) in trajs.iter().enumerate() {
        let last = traj.last();
        let error = match &exact {
            Some(f) => last
                .x
                .iter()
                .zip(&last.u)
                .fold(0.0_f64, |m, (&x, &u)| m.max((u - f(last.t, x)).abs())),
            None if l + 1 == trajs.len() => f64::NAN,
            None => sup_difference_on_nodes(&to_eulerian(last, threshold), &finest)?,
        };
        let order = match rows.last() {
            Some(ConvergenceRow { error: prev, .. }) if error > 0.0 && *prev > 0.0 => (prev / error).log2(),
            _ => f64::NAN,
        };
        rows.push(ConvergenceRow {
            level: l,
            n_points: traj.config.n_points,
            dt: traj.config.dt,
            error,
            order,
        });
    }
    Ok((rows, reference))
}

/// One row of a continuous-dependence study.
#[derive(Debug, Clone, PartialEq)]
pub struct DependenceRow {
    pub delta: f64,
    pub sup: f64,
    pub h1: f64,
}

/// Solves the scenario and its `δ·bump` perturbations and compares them at `t_end`.
pub fn dependence_table(cfg: &ScenarioConfig) -> Result<(Vec<DependenceRow>, Vec<Trajectory>), CliError> {
    if cfg.deltas.is_empty() {
        return Err(CliError::Config("converge.deltas is empty".into()));
    }
    let data = cfg.preset.initial_data(cfg.half_width)?;
    let bump = bump_data(cfg.bump_center, cfg.bump_width, cfg.half_width)?;
    let mut datasets = vec![data.clone()];
    datasets.extend(cfg.deltas.iter().map(|&d| data.plus_scaled(&bump, d)));
    let results: Vec<Result<Trajectory, CliError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = datasets
            .iter()
            .map(|d| {
                scope.spawn(move || -> Result<Trajectory, CliError> {
                    let initial = build_initial_state(d, &cfg.solver)?;
                    Ok(integrate(&initial, &cfg.solver)?)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(CliError::Io("solver thread panicked".into())))
            })
            .collect()
    });
    let trajs = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    if let Some(err) = trajs.iter().find_map(instability) {
        return Err(err);
    }
    let threshold = cfg.solver.singular_threshold;
    let base = to_eulerian(trajs[0].last(), threshold);
    let mut rows = Vec::with_capacity(cfg.deltas.len());
    for (&delta, traj) in cfg.deltas.iter().zip(&trajs[1..]) {
        let other = to_eulerian(traj.last(), threshold);
        let (a, b) = (base.x_range(), other.x_range());
        let (lo, hi) = (a.0.max(b.0), a.1.min(b.1));
        if !(hi > lo) {
            return Err(CliError::Solver(chforce::Error::Domain(format!(
                "snapshots for delta = {delta} do not overlap"
            ))));
        }
        let grid = linspace(lo, hi, cfg.solver.n_points);
        let (sup, h1) = h1_distance(&base, &other, &grid)?;
        rows.push(DependenceRow { delta, sup, h1 });
    }
    Ok((rows, trajs))
}

/// `converge`: refinement study (`convergence.csv`) or continuous-dependence
/// study (`dependence.csv`), plus per-level Eulerian snapshots.
pub fn cmd_converge(opts: &CommandOptions) -> Result<RunManifest, CliError> {
    let cfg = opts.scenario()?;
    let levels = opts.levels.unwrap_or(cfg.levels);
    if cfg.converge_mode == ConvergeMode::Refine && levels < 2 {
        return Err(CliError::Config(format!("levels must be at least 2, got {levels}")));
    }
    std::fs::create_dir_all(&opts.out)?;
    let out = opts.out.as_path();
    let mut m = manifest("converge", &cfg, out);
    m.notes.push(format!("mode: {}", cfg.converge_mode));
    let start = Instant::now();
    let threshold = cfg.solver.singular_threshold;

    match cfg.converge_mode {
        ConvergeMode::Refine => {
            let trajs = refine_levels(&cfg, levels)?;
            m.timings.insert("solve".into(), start.elapsed().as_secs_f64());
            let (rows, reference) = convergence_table(&cfg, &trajs)?;
            m.notes.push(match reference {
                Reference::Exact => "error measured against the exact solution".into(),
                Reference::Finest => "error measured against the finest level".into(),
            });
            let table: Vec<Vec<f64>> = rows
                .iter()
                .map(|r| vec![r.level as f64, r.n_points as f64, r.dt, r.error, r.order])
                .collect();
            write_table(
                &out.join("convergence.csv"),
                &["level", "n_points", "dt", "error", "order"],
                &table,
            )?;
            m.files.push("convergence.csv".into());
            for (l, traj) in trajs.iter().enumerate() {
                let snaps: Vec<_> = traj.states.iter().map(|s| to_eulerian(s, threshold)).collect();
                let name = format!("level_{l}_eulerian.csv");
                write_eulerian(&out.join(&name), &snaps)?;
                m.files.push(name);
            }
            let errors: Vec<f64> = rows.iter().map(|r| r.error).filter(|e| e.is_finite()).collect();
            let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
            let min_order = rows
                .iter()
                .map(|r| r.order)
                .filter(|o| o.is_finite())
                .fold(f64::INFINITY, f64::min);
            m.metrics
                .insert("error_coarsest".into(), errors.first().copied().unwrap_or(f64::NAN));
            m.metrics
                .insert("error_finest".into(), errors.last().copied().unwrap_or(f64::NAN));
            if min_order.is_finite() {
                m.metrics.insert("order_min".into(), min_order);
            }
            m.checks.push(Check {
                name: "error_decreasing".into(),
                value: errors.len() as f64,
                threshold: None,
                passed: decreasing,
            });
            for r in &rows {
                opts.say(format!(
                    "level {} N={} dt={} error={} order={}",
                    r.level,
                    r.n_points,
                    fmt_f64(r.dt),
                    fmt_f64(r.error),
                    fmt_f64(r.order)
                ));
            }
        }
        ConvergeMode::Dependence => {
            let (rows, trajs) = dependence_table(&cfg)?;
            m.timings.insert("solve".into(), start.elapsed().as_secs_f64());
            let table: Vec<Vec<f64>> = rows.iter().map(|r| vec![r.delta, r.sup, r.h1]).collect();
            write_table(&out.join("dependence.csv"), &["delta", "sup", "h1"], &table)?;
            m.files.push("dependence.csv".into());
            for (l, traj) in trajs.iter().enumerate() {
                let snaps: Vec<_> = traj.states.iter().map(|s| to_eulerian(s, threshold)).collect();
                let name = format!("level_{l}_eulerian.csv");
                write_eulerian(&out.join(&name), &snaps)?;
                m.files.push(name);
            }
            let mut by_delta = rows.clone();
            by_delta.sort_by(|a, b| b.delta.total_cmp(&a.delta));
            let decreasing = by_delta.windows(2).all(|w| w[1].sup < w[0].sup);
            m.checks.push(Check {
                name: "dependence_decreasing".into(),
                value: rows.len() as f64,
                threshold: None,
                passed: decreasing,
            });
            for r in &rows {
                opts.say(format!(
                    "delta={} sup={} h1={}",
                    fmt_f64(r.delta),
                    fmt_f64(r.sup),
                    fmt_f64(r.h1)
                ));
            }
        }
    }
    m.files.push("manifest.json".into());
    finish(&m, out, "manifest.json", opts)?;
    Ok(m)
}

/// `trace`: solves the scenario and writes `path_<j>.csv` for every start point.
/// A start outside the domain, or a path leaving it, is recorded as an error
/// entry for that path only.
pub fn cmd_trace(opts: &CommandOptions) -> Result<RunManifest, CliError> {
    let cfg = opts.scenario()?;
    let starts = opts.x0.clone().unwrap_or_else(|| cfg.trace_x0.clone());
    if starts.is_empty() {
        return Err(CliError::Config("no start points given".into()));
    }
    std::fs::create_dir_all(&opts.out)?;
    let out = opts.out.as_path();
    let mut m = manifest("trace", &cfg, out);

    let start = Instant::now();
    let traj = solve(&cfg)?;
    m.timings.insert("solve".into(), start.elapsed().as_secs_f64());
    if let Some(err) = instability(&traj) {
        m.errors.push(err.to_string());
        m.write(out, "manifest.json")?;
        return Err(err);
    }

    let start = Instant::now();
    let fields = characteristic_fields(&traj, cfg.solver.k);
    for (j, &x0) in starts.iter().enumerate() {
        let traced = trace_in_fields(&fields, x0).and_then(|p| path_defects(&fields, &p).map(|d| (p, d)));
        match traced {
            Ok((path, (du, dv))) => {
                let rows: Vec<Vec<f64>> = (0..path.times.len())
                    .map(|i| {
                        vec![
                            path.times[i],
                            path.beta[i],
                            path.x_path[i],
                            path.u_path[i],
                            du[i],
                            dv[i],
                        ]
                    })
                    .collect();
                let name = format!("path_{j}.csv");
                write_table(&out.join(&name), &PATH_HEADER, &rows)?;
                m.files.push(name);
                let sup = |d: &[f64]| d.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
                m.metrics.insert(format!("path_{j}_u_residual"), sup(&du));
                m.metrics.insert(format!("path_{j}_v_residual"), sup(&dv));
                opts.say(format!("path {j} from x0={x0}: {} samples", rows.len()));
            }
            Err(e) => {
                opts.say(format!("path {j} from x0={x0}: {e}"));
                m.errors.push(format!("path {j} (x0 = {x0}): {e}"));
            }
        }
    }
    m.timings.insert("trace".into(), start.elapsed().as_secs_f64());
    m.files.push("manifest.json".into());
    finish(&m, out, "manifest.json", opts)?;
    Ok(m)
}

/// `diagnose`: recomputes diagnostics from the `snapshots.csv` and
/// `manifest.json` of an earlier run in `--out`, writing
/// `diagnostics_recomputed.csv` and `diagnose.json` there. Thresholds come from
/// `--config` when given, otherwise from the run's manifest.
pub fn cmd_diagnose(opts: &CommandOptions) -> Result<RunManifest, CliError> {
    let override_thresholds = match &opts.config {
        Some(_) => Some(opts.scenario()?.thresholds),
        None => None,
    };
    let out = opts.out.as_path();
    let mut m = RunManifest::read(out)?;
    let states = read_snapshots(&out.join("snapshots.csv"))?;
    if states.is_empty() {
        return Err(CliError::Io("snapshots.csv holds no snapshots".into()));
    }
    let start = Instant::now();
    let traj = Trajectory {
        diagnostics: states.iter().map(diagnostics::record).collect(),
        states,
        config: m.solver.to_config(),
        error: None,
    };
    let thresholds = override_thresholds.unwrap_or_else(|| m.thresholds.clone());
    let (metrics, checks) = evaluate(&traj, m.solver.k, &thresholds);
    m.command = "diagnose".into();
    m.thresholds = thresholds;
    m.metrics.extend(metrics);
    m.checks = checks;
    m.timings = BTreeMap::from([("diagnostics".to_string(), start.elapsed().as_secs_f64())]);
    write_diagnostics(&out.join("diagnostics_recomputed.csv"), &traj.diagnostics)?;
    m.files = vec!["diagnostics_recomputed.csv".into(), "diagnose.json".into()];
    m.errors.clear();
    finish(&m, out, "diagnose.json", opts)?;
    Ok(m)
}
