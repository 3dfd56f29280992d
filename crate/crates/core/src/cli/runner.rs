//! Subcommand implementations: replicate orchestration, result persistence,
//! and the `verify` entry point.
//!
//! Replicate `i` always draws from stream id `i` of the master seed and
//! results are collected in replicate order, so the worker count never
//! changes any output byte.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::acceptance::{run_all, AcceptanceConfig};
use crate::cli::config::ExperimentConfig;
use crate::cli::csvio::{write_csv, CsvTable};
use crate::cli::svg;
use crate::explore::{explore_forest_with, ExploreOptions};
use crate::girsanov::{weight, StopRule};
use crate::mass::simulate_mass_with_budget;
use crate::params::{make_stream, ModelParams, RngPolicy};
use crate::sde::{
    default_bin_width, euler_feller_logistic, euler_reflected_localtime, lamperti_time_change,
};
use crate::stats::TestReport;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Budget(String),
    TestsFailed(usize),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Io(m) => write!(f, "io: {m}"),
            CliError::Budget(m) => write!(f, "event budget exceeded: {m}"),
            CliError::TestsFailed(n) => write!(f, "{n} acceptance criteria failed"),
        }
    }
}

impl CliError {
    /// 1: test failure, 2: usage/config error, 3: budget exceeded.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::TestsFailed(_) => 1,
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Budget(_) => 3,
        }
    }
}

fn io_err(e: std::io::Error, what: &Path) -> CliError {
    CliError::Io(format!("{}: {e}", what.display()))
}

/// Runs `f` over replicates `0..reps` on a pool of the configured size,
/// preserving replicate order.
fn par_replicates<T: Send>(
    workers: usize,
    reps: u64,
    f: impl Fn(u64) -> T + Sync + Send,
) -> Result<Vec<T>, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| (0..reps).into_par_iter().map(f).collect()))
}

struct Manifest {
    command: String,
    lines: Vec<String>,
    complete: bool,
}

impl Manifest {
    fn new(command: &str) -> Self {
        Manifest {
            command: command.into(),
            lines: Vec::new(),
            complete: true,
        }
    }

    fn file(&mut self, name: &str, rows: usize) {
        self.lines.push(format!("file {name} rows={rows}"));
    }

    fn warning(&mut self, text: &str) {
        self.lines.push(format!("warning {text}"));
    }

    fn partial(&mut self, done: u64, total: u64, reason: &str) {
        self.complete = false;
        self.lines
            .push(format!("partial replicates={done}/{total} reason={reason}"));
    }

    fn write(&self, dir: &Path) -> Result<(), CliError> {
        let mut text = format!(
            "command = {}\nstatus = {}\n",
            self.command,
            if self.complete { "complete" } else { "partial" }
        );
        for l in &self.lines {
            text.push_str(l);
            text.push('\n');
        }
        let path = dir.join("MANIFEST");
        std::fs::write(&path, text).map_err(|e| io_err(e, &path))
    }
}

fn ensure_out_dir(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.run.output_dir.clone();
    std::fs::create_dir_all(&dir).map_err(|e| io_err(e, &dir))?;
    Ok(dir)
}

fn params_of(cfg: &ExperimentConfig) -> Result<ModelParams, CliError> {
    cfg.params().map_err(|e| CliError::Config(e.to_string()))
}

/// `mass`: exact jump paths sampled on the grid, one row per (replicate, t).
pub fn run_mass(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let params = params_of(cfg)?;
    let dir = ensure_out_dir(cfg)?;
    let grid = cfg.run.t_grid.clone();
    let seed = cfg.run.master_seed;
    let budget = cfg.run.event_budget;
    let results = par_replicates(cfg.resolve_workers(), cfg.run.replicates, |i| {
        let mut rng = make_stream(RngPolicy::new(seed, i));
        simulate_mass_with_budget(&params, &grid, &mut rng, budget).map(|(_, samples)| samples)
    })?;

    let mut manifest = Manifest::new("mass");
    let (rows, budget_hit) =
        collect_rows(&results, cfg.run.replicates, &mut manifest, |i, samples| {
            grid.iter()
                .zip(samples)
                .map(|(t, z)| format!("{i},{t},{z}"))
                .collect()
        });
    let n = write_csv(&dir.join("samples.csv"), "replicate,t,z", rows)
        .map_err(|e| io_err(e, &dir.join("samples.csv")))?;
    manifest.file("samples.csv", n);
    manifest.write(&dir)?;
    match budget_hit {
        Some(msg) => Err(CliError::Budget(msg)),
        None => Ok(()),
    }
}

/// Writes the per-replicate rows of every successful prefix replicate and
/// notes the first budget failure, if any, in the manifest.
fn collect_rows<T, E: std::fmt::Display>(
    results: &[Result<T, E>],
    total: u64,
    manifest: &mut Manifest,
    to_rows: impl Fn(u64, &T) -> Vec<String>,
) -> (Vec<String>, Option<String>) {
    let mut rows = Vec::new();
    for (i, r) in results.iter().enumerate() {
        match r {
            Ok(v) => rows.extend(to_rows(i as u64, v)),
            Err(e) => {
                let msg = format!("replicate {i}: {e}");
                manifest.partial(i as u64, total, &msg);
                return (rows, Some(msg));
            }
        }
    }
    (rows, None)
}

/// `explore`: terminal slices, occupation residuals, and turning points of
/// the first few replicates.
pub fn run_explore(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let params = params_of(cfg)?;
    let dir = ensure_out_dir(cfg)?;
    let grid = cfg.run.t_grid.clone();
    let seed = cfg.run.master_seed;
    let dump = cfg.explore.dump_paths;
    let opts = ExploreOptions {
        turning_point_budget: cfg.run.event_budget,
        ..Default::default()
    };
    type Row = (Vec<f64>, f64, Option<Dump>);
    type Dump = (Vec<(f64, f64, &'static str)>, Vec<(f64, u32)>);
    let results = par_replicates(cfg.resolve_workers(), cfg.run.replicates, |i| {
        let mut rng = make_stream(RngPolicy::new(seed, i));
        explore_forest_with(&params, opts, &mut rng).map(|r| -> Row {
            let s_x = r.s_n_x.expect("no s_max set");
            let residual = r.profile.integral(1.0 / (2.0 * params.n())) - s_x;
            let slice = r.slice(&grid);
            let dumped = (i < dump).then(|| {
                let tps = r
                    .turning_points
                    .iter()
                    .map(|tp| (tp.s, tp.h, kind_name(tp.kind)))
                    .collect();
                (tps, r.profile.breakpoints().collect())
            });
            (slice, residual, dumped)
        })
    })?;

    let mut manifest = Manifest::new("explore");
    if params.ancestor_count() == 0 {
        manifest.warning("x < 1/N: empty forest, slices are identically zero");
    }
    let (slice_rows, budget_hit) = collect_rows(
        &results,
        cfg.run.replicates,
        &mut manifest,
        |i, (slice, _, _)| {
            grid.iter()
                .zip(slice)
                .map(|(t, z)| format!("{i},{t},{z}"))
                .collect()
        },
    );
    let n = write_csv(&dir.join("slices.csv"), "replicate,t,z", slice_rows)
        .map_err(|e| io_err(e, &dir.join("slices.csv")))?;
    manifest.file("slices.csv", n);

    let identity_rows: Vec<String> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.as_ref().ok().map(|(_, res, _)| format!("{i},{res:e}")))
        .collect();
    let n = write_csv(
        &dir.join("identities.csv"),
        "replicate,occupation_residual",
        identity_rows,
    )
    .map_err(|e| io_err(e, &dir.join("identities.csv")))?;
    manifest.file("identities.csv", n);

    let dumps: Vec<(usize, &Dump)> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| {
            r.as_ref()
                .ok()
                .and_then(|(_, _, d)| d.as_ref().map(|d| (i, d)))
        })
        .collect();
    let path_rows: Vec<String> = dumps
        .iter()
        .flat_map(|(i, (tps, _))| {
            tps.iter()
                .map(move |(s, h, kind)| format!("{i},{s},{h},{kind}"))
        })
        .collect();
    let n = write_csv(&dir.join("paths.csv"), "replicate,s,h,kind", path_rows)
        .map_err(|e| io_err(e, &dir.join("paths.csv")))?;
    manifest.file("paths.csv", n);

    let profile_rows: Vec<String> = dumps
        .iter()
        .flat_map(|(i, (_, bps))| bps.iter().map(move |(t, c)| format!("{i},{t},{c}")))
        .collect();
    let n = write_csv(
        &dir.join("profile.csv"),
        "replicate,t_break,count",
        profile_rows,
    )
    .map_err(|e| io_err(e, &dir.join("profile.csv")))?;
    manifest.file("profile.csv", n);
    manifest.write(&dir)?;
    match budget_hit {
        Some(msg) => Err(CliError::Budget(msg)),
        None => Ok(()),
    }
}

fn kind_name(kind: crate::explore::TurnKind) -> &'static str {
    use crate::explore::TurnKind::*;
    match kind {
        Start => "start",
        LocalMax => "local_max",
        LocalMin => "local_min",
        ReflectionAtZero => "reflection_at_0",
        TerminalZero => "terminal_zero",
    }
}

/// `weights`: null-law explorations reweighted toward the configured target.
pub fn run_weights(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let target = params_of(cfg)?;
    let null = target.null_law();
    let dir = ensure_out_dir(cfg)?;
    let seed = cfg.run.master_seed;
    let trees = if cfg.weights.stop_trees == 0 {
        target.ancestor_count()
    } else {
        cfg.weights.stop_trees
    };
    let stop_s = cfg.weights.stop_s;
    if !stop_s.is_finite() || stop_s <= 0.0 {
        return Err(CliError::Config("weights.stop_s must be positive".into()));
    }
    let opts = ExploreOptions {
        s_max: stop_s,
        turning_point_budget: cfg.run.event_budget,
    };
    let results = par_replicates(cfg.resolve_workers(), cfg.run.replicates, |i| {
        let mut rng = make_stream(RngPolicy::new(seed, i));
        explore_forest_with(&null, opts, &mut rng).map(|path| {
            let w = weight(
                &path,
                &target,
                StopRule::ExcursionsOrTime { trees, s: stop_s },
            )
            .expect("stop covered by construction");
            (w.log_weight, w.stop_time)
        })
    })?;

    let mut manifest = Manifest::new("weights");
    let (rows, budget_hit) = collect_rows(
        &results,
        cfg.run.replicates,
        &mut manifest,
        |i, (lw, st)| vec![format!("{i},{lw},{st}")],
    );
    let n = write_csv(
        &dir.join("weights.csv"),
        "path_id,log_weight,stop_time",
        rows,
    )
    .map_err(|e| io_err(e, &dir.join("weights.csv")))?;
    manifest.file("weights.csv", n);
    manifest.write(&dir)?;
    match budget_hit {
        Some(msg) => Err(CliError::Budget(msg)),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct SolverMeta<'a> {
    solver: &'a str,
    dt: f64,
    eps_bin: f64,
    s_max: f64,
    t_max: f64,
    master_seed: u64,
}

/// `sde`: Euler paths of the limiting diffusions plus the time-change
/// summary for absorbed logistic Feller paths.
pub fn run_sde(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let params = params_of(cfg)?;
    let dir = ensure_out_dir(cfg)?;
    let seed = cfg.run.master_seed;
    let sde = &cfg.sde;
    if !sde.dt.is_finite() || sde.dt <= 0.0 {
        return Err(CliError::Config("sde.dt must be positive".into()));
    }
    let eps_bin = if sde.eps_bin > 0.0 {
        sde.eps_bin
    } else {
        default_bin_width(sde.dt)
    };
    let mut manifest = Manifest::new("sde");

    match sde.solver.as_str() {
        "feller" => {
            let results = par_replicates(cfg.resolve_workers(), cfg.run.replicates, |i| {
                let mut rng = make_stream(RngPolicy::new(seed, i));
                let path = euler_feller_logistic(&params, sde.dt, sde.t_max, &mut rng);
                let tc = lamperti_time_change(&path)
                    .ok()
                    .map(|tc| (tc.tau_x, tc.area));
                let dumped =
                    (i < sde.dump_paths).then(|| thin_path(&path.values, sde.dt, sde.dump_points));
                (tc, dumped)
            })?;
            let path_rows: Vec<String> = results
                .iter()
                .enumerate()
                .filter_map(|(i, (_, d))| d.as_ref().map(|p| (i, p)))
                .flat_map(|(i, pts)| pts.iter().map(move |(t, v)| format!("{i},{t},{v}")))
                .collect();
            let n = write_csv(&dir.join("paths.csv"), "replicate,t,value", path_rows)
                .map_err(|e| io_err(e, &dir.join("paths.csv")))?;
            manifest.file("paths.csv", n);

            let unabsorbed = results.iter().filter(|(tc, _)| tc.is_none()).count();
            if unabsorbed > 0 {
                manifest.warning(&format!(
                    "{unabsorbed} of {} paths not absorbed within t_max={}; no time-change row",
                    cfg.run.replicates, sde.t_max
                ));
            }
            let tc_rows: Vec<String> = results
                .iter()
                .enumerate()
                .filter_map(|(i, (tc, _))| tc.map(|(tau, area)| format!("{i},{tau},{area}")))
                .collect();
            let n = write_csv(&dir.join("timechange.csv"), "replicate,tau_x,area", tc_rows)
                .map_err(|e| io_err(e, &dir.join("timechange.csv")))?;
            manifest.file("timechange.csv", n);
        }
        "reflected" => {
            let results = par_replicates(cfg.resolve_workers(), cfg.run.replicates, |i| {
                let mut rng = make_stream(RngPolicy::new(seed, i));
                let out = euler_reflected_localtime(&params, sde.dt, eps_bin, sde.s_max, &mut rng);
                let dumped = (i < sde.dump_paths)
                    .then(|| thin_path(&out.h_path.values, sde.dt, sde.dump_points));
                (out.s_x, out.local_time.zero_level_accumulator, dumped)
            })?;
            let path_rows: Vec<String> = results
                .iter()
                .enumerate()
                .filter_map(|(i, (_, _, d))| d.as_ref().map(|p| (i, p)))
                .flat_map(|(i, pts)| pts.iter().map(move |(t, v)| format!("{i},{t},{v}")))
                .collect();
            let n = write_csv(&dir.join("paths.csv"), "replicate,s,h", path_rows)
                .map_err(|e| io_err(e, &dir.join("paths.csv")))?;
            manifest.file("paths.csv", n);
            let sx_rows: Vec<String> = results
                .iter()
                .enumerate()
                .map(|(i, (sx, l0, _))| match sx {
                    Some(s) => format!("{i},{s},{l0}"),
                    None => format!("{i},,{l0}"),
                })
                .collect();
            let n = write_csv(&dir.join("stopping.csv"), "replicate,s_x,l0_final", sx_rows)
                .map_err(|e| io_err(e, &dir.join("stopping.csv")))?;
            manifest.file("stopping.csv", n);
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown sde.solver '{other}' (expected feller or reflected)"
            )))
        }
    }

    let meta = SolverMeta {
        solver: &sde.solver,
        dt: sde.dt,
        eps_bin,
        s_max: sde.s_max,
        t_max: sde.t_max,
        master_seed: seed,
    };
    let meta_path = dir.join("solver.json");
    std::fs::write(
        &meta_path,
        serde_json::to_string_pretty(&meta).expect("meta serializes"),
    )
    .map_err(|e| io_err(e, &meta_path))?;
    manifest.file("solver.json", 1);
    manifest.write(&dir)?;
    Ok(())
}

fn thin_path(values: &[f64], dt: f64, max_points: usize) -> Vec<(f64, f64)> {
    let stride = (values.len() / max_points.max(1)).max(1);
    values
        .iter()
        .enumerate()
        .step_by(stride)
        .map(|(k, &v)| (k as f64 * dt, v))
        .collect()
}

#[derive(Serialize)]
struct VerifyReport<'a> {
    schema_version: u32,
    master_seed: u64,
    all_pass: bool,
    criteria: &'a [TestReport],
}

/// `verify`: the full acceptance suite; exit 0 only if every criterion holds.
pub fn run_verify(cfg: &ExperimentConfig) -> Result<(), CliError> {
    let dir = ensure_out_dir(cfg)?;
    let seed = cfg.run.master_seed;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.resolve_workers())
        .build()
        .map_err(|e| CliError::Config(format!("cannot build worker pool: {e}")))?;
    let reports = pool.install(|| run_all(&AcceptanceConfig { master_seed: seed }));

    let mut failed = 0;
    for r in &reports {
        let status = if r.pass { "PASS" } else { "FAIL" };
        let p = r.p_value.map_or(String::new(), |p| format!(" p={p:.4}"));
        println!(
            "{status} {} (statistic {:.3e}, threshold {:.3e}{p})",
            r.name, r.statistic, r.threshold
        );
        if !r.pass {
            failed += 1;
        }
    }
    let all_pass = failed == 0;
    let report = VerifyReport {
        schema_version: 1,
        master_seed: seed,
        all_pass,
        criteria: &reports,
    };
    let path = dir.join("report.json");
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    std::fs::write(&path, json).map_err(|e| io_err(e, &path))?;
    println!("report: {}", path.display());
    if all_pass {
        Ok(())
    } else {
        Err(CliError::TestsFailed(failed))
    }
}

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub input: PathBuf,
    pub output: PathBuf,
    pub kind: String,
    pub x_col: String,
    pub y_col: String,
    pub group_col: Option<String>,
}

/// `plot`: line or CDF plots from a CSV column selection to a static SVG.
pub fn run_plot(spec: &PlotSpec) -> Result<(), CliError> {
    let table = CsvTable::read(&spec.input).map_err(|e| io_err(e, &spec.input))?;
    let groups: Vec<(String, Vec<usize>)> = match &spec.group_col {
        Some(col) => {
            let labels = table.strings(col).map_err(CliError::Config)?;
            let mut order: Vec<String> = Vec::new();
            for l in &labels {
                if !order.contains(l) {
                    order.push(l.clone());
                }
            }
            order
                .into_iter()
                .map(|g| {
                    let idx = labels
                        .iter()
                        .enumerate()
                        .filter(|(_, l)| **l == g)
                        .map(|(i, _)| i)
                        .collect();
                    (format!("{col}={g}"), idx)
                })
                .collect()
        }
        None => vec![("all".to_owned(), (0..table.rows.len()).collect())],
    };
    let ys = table.numeric(&spec.y_col).map_err(CliError::Config)?;
    let content = match spec.kind.as_str() {
        "line" => {
            let xs = table.numeric(&spec.x_col).map_err(CliError::Config)?;
            let series: Vec<svg::Series> = groups
                .into_iter()
                .map(|(label, idx)| svg::Series {
                    label,
                    points: idx.iter().map(|&i| (xs[i], ys[i])).collect(),
                })
                .collect();
            svg::line_plot(
                &series,
                &spec.input.display().to_string(),
                &spec.x_col,
                &spec.y_col,
            )
        }
        "cdf" => {
            let samples: Vec<(String, Vec<f64>)> = groups
                .into_iter()
                .map(|(label, idx)| (label, idx.iter().map(|&i| ys[i]).collect()))
                .collect();
            svg::cdf_plot(&samples, &spec.input.display().to_string(), &spec.y_col)
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown plot kind '{other}' (line|cdf)"
            )));
        }
    };
    std::fs::write(&spec.output, content).map_err(|e| io_err(e, &spec.output))?;
    Ok(())
}
