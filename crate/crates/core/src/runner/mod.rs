//! Batch runs: every sieve-backed experiment in a config shares one sweep,
//! outputs go to CSV/JSON files, and a manifest records what happened.

pub mod config;

use std::fs::{self, File};
use std::io::{self, BufWriter};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{parse_config, validate, Diagnostic, Experiment, ExperimentConfig, GlobalConfig, StraightenTask, Task};

use crate::averaging::compare_integer_prime_averages;
use crate::correlation::{
    ArchIsotopyPlan, CorrelationPlan, EquidistPlan, FdTablePlan, NonArchIsotopyPlan, ThreePointPlan,
};
use crate::functions::UnitGroup;
use crate::patterns::{CensusPlan, GrowthPlan};
use crate::pretense::{fit_twisted_character, weak_pretension_profile};
use crate::smoothness::{DickmanSolver, RacePlan, SmoothPlan};
use crate::straighten::{
    snap_to_archimedean, snap_to_dirichlet, ArchimedeanSettings, PositiveRealQuasimorphism, UnitGroupQuasimorphism,
};
use crate::sweep::{run_sweep, threads_from_env, DynConsumer, SweepConfig, SweepStats};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Failure of one experiment; recorded in the manifest, never fatal.
#[derive(Debug, Error)]
#[error("{0}")]
pub struct ExperimentFailure(String);

fn fail(e: impl std::fmt::Display) -> ExperimentFailure {
    ExperimentFailure(e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub name: String,
    pub kind: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub outputs: Vec<PathBuf>,
    /// Time spent outside the shared sweep.
    pub wall_seconds: f64,
    pub summary: Value,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    /// SHA-256 of the config text.
    pub config_hash: String,
    pub tool_version: String,
    pub seed: u64,
    pub threads: usize,
    /// Sieve sweeps performed; all sieve-backed experiments share one.
    pub sweeps: u64,
    pub sweep: Option<SweepStats>,
    /// Integers sieved per wall-clock second in the shared sweep.
    pub throughput: f64,
    pub wall_seconds: f64,
    pub experiments: Vec<ExperimentRecord>,
}

impl RunManifest {
    pub fn all_ok(&self) -> bool {
        self.experiments.iter().all(|e| e.status == Status::Ok)
    }
}

pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// A sieve-backed experiment waiting for the shared sweep.
enum Plan {
    Correlate(CorrelationPlan),
    Fd(FdTablePlan, f64),
    Arch(ArchIsotopyPlan),
    NonArch(NonArchIsotopyPlan),
    Equidist(EquidistPlan),
    Race(RacePlan),
    Smooth(SmoothPlan),
    Census(CensusPlan),
    Growth(GrowthPlan),
    ThreePoint(ThreePointPlan),
}

impl Plan {
    fn consumer(&mut self) -> &mut dyn DynConsumer {
        match self {
            Plan::Correlate(p) => p,
            Plan::Fd(p, _) => p,
            Plan::Arch(p) => p,
            Plan::NonArch(p) => p,
            Plan::Equidist(p) => p,
            Plan::Race(p) => p,
            Plan::Smooth(p) => p,
            Plan::Census(p) => p,
            Plan::Growth(p) => p,
            Plan::ThreePoint(p) => p,
        }
    }
}

/// Where one experiment's files go.
struct Outputs<'a> {
    dir: &'a Path,
    name: &'a str,
    written: Vec<PathBuf>,
}

impl Outputs<'_> {
    fn file(&mut self, suffix: &str, ext: &str) -> Result<BufWriter<File>, ExperimentFailure> {
        let path = self.dir.join(format!("{}{suffix}.{ext}", self.name));
        let f = File::create(&path).map_err(|e| fail(format!("{}: {e}", path.display())))?;
        self.written.push(path);
        Ok(BufWriter::new(f))
    }

    fn json(&mut self, suffix: &str, value: &impl Serialize) -> Result<(), ExperimentFailure> {
        let w = self.file(suffix, "json")?;
        serde_json::to_writer_pretty(w, value).map_err(fail)
    }
}

fn build_plan(task: &Task, solver: &DickmanSolver) -> Result<Option<Plan>, ExperimentFailure> {
    Ok(Some(match task {
        Task::Correlate(q) => Plan::Correlate(CorrelationPlan::new(q.clone()).map_err(fail)?),
        Task::FdTable {
            functions,
            shifts,
            scheme,
            scale,
            divisors,
            dilations,
            t_max,
        } => Plan::Fd(
            FdTablePlan::new(
                functions.clone(),
                shifts.clone(),
                *scheme,
                divisors.clone(),
                dilations.clone(),
                *scale,
            )
            .map_err(fail)?,
            *t_max,
        ),
        Task::IsotopyArch { query, q, t } => Plan::Arch(ArchIsotopyPlan::new(query, *q, *t).map_err(fail)?),
        Task::IsotopyNonarch { query, chi } => Plan::NonArch(NonArchIsotopyPlan::new(query, chi).map_err(fail)?),
        Task::Equidist { query, mollifier, mode } => {
            Plan::Equidist(EquidistPlan::new(query, mollifier.clone(), *mode).map_err(fail)?)
        }
        Task::Race(grid) => Plan::Race(RacePlan::new(grid).map_err(fail)?),
        Task::Smooth { alpha, beta, grid } => Plan::Smooth(SmoothPlan::new(*alpha, *beta, grid, solver).map_err(fail)?),
        Task::Patterns { ks, n, function } if ks.len() == 1 => {
            Plan::Census(CensusPlan::new(ks[0], *n, function).map_err(fail)?)
        }
        Task::Patterns { ks, n, function } => Plan::Growth(GrowthPlan::new(ks, *n, function).map_err(fail)?),
        Task::ThreePoint {
            function,
            shifts,
            windows,
        } => Plan::ThreePoint(ThreePointPlan::new(function.clone(), *shifts, windows).map_err(fail)?),
        Task::Pretense { .. } | Task::Fit { .. } | Task::Straighten(_) | Task::CompareAvgs { .. } => return Ok(None),
    }))
}

fn finish_plan(plan: Plan, out: &mut Outputs<'_>) -> Result<Value, ExperimentFailure> {
    match plan {
        Plan::Correlate(p) => {
            let s = p.finish().map_err(fail)?;
            s.write_csv(out.file("", "csv")?).map_err(fail)?;
            let abs = s.abs();
            Ok(json!({
                "final_scale": s.scales.last(),
                "final_abs": abs.last(),
                "max_abs": abs.iter().cloned().fold(0.0, f64::max),
                "log_lipschitz_violations": s.log_lipschitz_violations(),
            }))
        }
        Plan::Fd(p, t_max) => {
            let table = p.finish().map_err(fail)?;
            table.write_csv(out.file("", "csv")?).map_err(fail)?;
            let (t, fits) = table.fit_t(t_max);
            out.json("_fit", &json!({ "t": t, "fits": fits }))?;
            let residual: f64 = fits.iter().map(|f| f.residual).sum::<f64>() / fits.len() as f64;
            Ok(json!({ "t": t, "mean_residual": residual }))
        }
        Plan::Arch(p) => isotopy_summary(p.finish().map_err(fail)?, out),
        Plan::NonArch(p) => isotopy_summary(p.finish().map_err(fail)?, out),
        Plan::Equidist(p) => {
            let s = p.finish().map_err(fail)?;
            s.write_csv(out.file("", "csv")?).map_err(fail)?;
            Ok(json!({ "final_abs": s.values.last().map(|v| v.norm()) }))
        }
        Plan::Race(p) => {
            let s = p.finish();
            s.write_csv(out.file("", "csv")?).map_err(fail)?;
            Ok(json!({ "final_scale": s.scales.last(), "final_freq": s.freq.last() }))
        }
        Plan::Smooth(p) => {
            let s = p.finish();
            s.write_csv(out.file("", "csv")?).map_err(fail)?;
            s.write_fixed_csv(out.file("_fixed", "csv")?).map_err(fail)?;
            Ok(json!({
                "target": s.target,
                "final_empirical": s.empirical.last(),
                "final_empirical_fixed": s.empirical_fixed.last(),
                "final_gap": s.gaps().last(),
            }))
        }
        Plan::Census(p) => {
            let c = p.finish();
            c.write_csv(out.file("", "csv")?).map_err(fail)?;
            Ok(json!({ "k": c.k, "n": c.n, "distinct": c.distinct }))
        }
        Plan::Growth(p) => {
            let r = p.finish();
            r.write_json(out.file("", "json")?).map_err(fail)?;
            let s: Vec<(usize, u64)> = r.rows.iter().map(|row| (row.k, row.s)).collect();
            Ok(json!({ "s": s, "flagged": r.flagged() }))
        }
        Plan::ThreePoint(p) => {
            let r = p.finish();
            r.write_csv(out.file("", "csv")?).map_err(fail)?;
            Ok(json!({ "max_magnitude": r.max_magnitude(), "bound": r.bound }))
        }
    }
}

fn isotopy_summary(s: crate::correlation::IsotopySeries, out: &mut Outputs<'_>) -> Result<Value, ExperimentFailure> {
    s.write_csv(out.file("", "csv")?).map_err(fail)?;
    Ok(json!({
        "max_residual": s.max_residual(),
        "final_residual": s.residuals.last(),
        "fraction_above_0.01": s.fraction_above(0.01),
    }))
}

/// Experiments that do not read the sieve.
fn run_direct(task: &Task, rng: &mut ChaCha8Rng, out: &mut Outputs<'_>) -> Result<Value, ExperimentFailure> {
    match task {
        Task::Pretense { f, g, grid } => {
            let p = weak_pretension_profile(f, g, grid).map_err(fail)?;
            p.write_csv(out.file("", "csv")?).map_err(fail)?;
            Ok(json!({ "verdict": p.verdict, "final_dist_sq": p.dist_sq.last() }))
        }
        Task::Fit { g, search } => {
            let fit = fit_twisted_character(g, search).map_err(fail)?;
            out.json("", &fit)?;
            Ok(json!({ "modulus": fit.modulus, "index": fit.index, "t": fit.t, "dist_sq": fit.dist_sq }))
        }
        Task::Straighten(s) => straighten_trials(s, rng, out),
        Task::CompareAvgs { function, a, scales } => {
            let mut w = csv::Writer::from_writer(out.file("", "csv")?);
            w.write_record(["scale", "integer_loglog_re", "integer_loglog_im", "prime_log_re", "prime_log_im", "gap"])
                .map_err(fail)?;
            let mut gaps = Vec::new();
            for &x in scales {
                let c = compare_integer_prime_averages(|n| function.value_at(n as i64), *a, x).map_err(fail)?;
                w.write_record([
                    x.to_string(),
                    c.integer_loglog.re.to_string(),
                    c.integer_loglog.im.to_string(),
                    c.prime_log.re.to_string(),
                    c.prime_log.im.to_string(),
                    c.gap.to_string(),
                ])
                .map_err(fail)?;
                gaps.push(c.gap);
            }
            w.flush().map_err(fail)?;
            Ok(json!({ "gaps": gaps }))
        }
        _ => unreachable!("sieve-backed tasks are planned"),
    }
}

/// Planted-character recovery trials; each is recovered when the snapped
/// character (or `t` within 0.05) matches and the sup error is at most 10ε.
fn straighten_trials(task: &StraightenTask, rng: &mut ChaCha8Rng, out: &mut Outputs<'_>) -> Result<Value, ExperimentFailure> {
    let mut w = csv::Writer::from_writer(out.file("", "csv")?);
    let mut recovered = 0usize;
    let mut worst_ratio = 0.0f64;
    let trials = match *task {
        StraightenTask::Dirichlet {
            trials,
            q_max,
            q: fixed,
            epsilon,
        } => {
            w.write_record(["trial", "modulus", "planted_index", "recovered_index", "sup_error", "recovered"])
                .map_err(fail)?;
            for i in 0..trials {
                let q = fixed.unwrap_or_else(|| rng.gen_range(1..=q_max));
                let group = UnitGroup::new(q).map_err(fail)?;
                let index = rng.gen_range(0..group.character_count());
                let chi = group.character(index).map_err(fail)?;
                let psi = UnitGroupQuasimorphism::planted(&chi, epsilon, rng);
                let (got, sup) = match snap_to_dirichlet(&psi, epsilon) {
                    Ok(s) => (Some(s.chi.index()), s.sup_error),
                    Err(_) => (None, f64::INFINITY),
                };
                let ok = got == Some(index) && sup <= 10.0 * epsilon + 1e-12;
                recovered += ok as usize;
                if epsilon > 0.0 {
                    worst_ratio = worst_ratio.max(sup / epsilon);
                }
                w.write_record([
                    i.to_string(),
                    q.to_string(),
                    index.to_string(),
                    got.map_or("-".into(), |g| g.to_string()),
                    sup.to_string(),
                    ok.to_string(),
                ])
                .map_err(fail)?;
            }
            trials
        }
        StraightenTask::Archimedean {
            trials,
            t_range,
            t0: fixed,
            x_max,
            epsilon,
        } => {
            w.write_record(["trial", "t0", "t", "sup_error", "recovered"]).map_err(fail)?;
            let settings = ArchimedeanSettings {
                x_max,
                ..ArchimedeanSettings::default()
            };
            for i in 0..trials {
                let t0 = fixed.unwrap_or_else(|| rng.gen_range(-t_range..=t_range));
                let alpha = PositiveRealQuasimorphism::planted(t0, epsilon, rng.gen());
                let (t, sup) = match snap_to_archimedean(&alpha, &settings) {
                    Ok(s) => (s.t, s.sup_error),
                    Err(_) => (f64::NAN, f64::INFINITY),
                };
                let ok = (t - t0).abs() <= 0.05 && sup <= 10.0 * epsilon + 1e-12;
                recovered += ok as usize;
                if epsilon > 0.0 {
                    worst_ratio = worst_ratio.max(sup / epsilon);
                }
                w.write_record([i.to_string(), t0.to_string(), t.to_string(), sup.to_string(), ok.to_string()])
                    .map_err(fail)?;
            }
            trials
        }
    };
    w.flush().map_err(fail)?;
    Ok(json!({ "trials": trials, "recovered": recovered, "worst_sup_over_eps": worst_ratio }))
}

/// Execute `config`; `source` is the config text, hashed into the manifest.
///
/// Randomness comes from one ChaCha8 generator seeded with `global.seed`;
/// experiment `k` draws from its stream `k`, so adding an experiment does
/// not change the draws of the others.
pub fn run(config: &ExperimentConfig, source: &str) -> Result<RunManifest, RunError> {
    let start = Instant::now();
    let g = &config.global;
    let dir = &g.output_dir;
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.clone(),
        source,
    })?;
    let threads = threads_from_env().unwrap_or(g.threads);
    let sweep_config = SweepConfig {
        segment: g.segment_size,
        threads,
    };
    let solver = DickmanSolver::default();

    let mut records: Vec<ExperimentRecord> = config
        .experiments
        .iter()
        .map(|e| ExperimentRecord {
            name: e.name.clone(),
            kind: e.task.kind().to_string(),
            status: Status::Ok,
            error: None,
            outputs: Vec::new(),
            wall_seconds: 0.0,
            summary: Value::Null,
        })
        .collect();
    let mark_failed = |r: &mut ExperimentRecord, e: ExperimentFailure| {
        log::warn!("experiment '{}' failed: {e}", r.name);
        r.status = Status::Failed;
        r.error = Some(e.0);
    };

    let mut plans: Vec<(usize, Plan)> = Vec::new();
    for (i, e) in config.experiments.iter().enumerate() {
        match build_plan(&e.task, &solver) {
            Ok(Some(p)) => plans.push((i, p)),
            Ok(None) => {}
            Err(err) => mark_failed(&mut records[i], err),
        }
    }

    let mut sweep = None;
    let mut sweeps = 0;
    if !plans.is_empty() {
        let mut consumers: Vec<&mut dyn DynConsumer> = plans.iter_mut().map(|(_, p)| p.consumer()).collect();
        sweeps = 1;
        match run_sweep(&mut consumers, sweep_config) {
            Ok(stats) => sweep = Some(stats),
            Err(err) => {
                for (i, _) in plans.drain(..) {
                    mark_failed(&mut records[i], fail(&err));
                }
            }
        }
    }
    for (i, plan) in plans {
        let t0 = Instant::now();
        let mut out = Outputs {
            dir,
            name: &config.experiments[i].name,
            written: Vec::new(),
        };
        let result = finish_plan(plan, &mut out);
        records[i].outputs = out.written;
        records[i].wall_seconds = t0.elapsed().as_secs_f64();
        match result {
            Ok(summary) => records[i].summary = summary,
            Err(e) => mark_failed(&mut records[i], e),
        }
    }

    for (i, e) in config.experiments.iter().enumerate() {
        if matches!(
            e.task,
            Task::Pretense { .. } | Task::Fit { .. } | Task::Straighten(_) | Task::CompareAvgs { .. }
        ) {
            let t0 = Instant::now();
            let mut rng = ChaCha8Rng::seed_from_u64(g.seed);
            rng.set_stream(i as u64);
            let mut out = Outputs {
                dir,
                name: &e.name,
                written: Vec::new(),
            };
            let result = run_direct(&e.task, &mut rng, &mut out);
            records[i].outputs = out.written;
            records[i].wall_seconds = t0.elapsed().as_secs_f64();
            match result {
                Ok(summary) => records[i].summary = summary,
                Err(err) => mark_failed(&mut records[i], err),
            }
        }
    }

    let manifest = RunManifest {
        config_hash: config_hash(source),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: g.seed,
        threads: sweep.map_or_else(|| rayon::current_num_threads(), |s| s.threads),
        sweeps,
        throughput: sweep.map_or(0.0, |s| s.throughput()),
        sweep,
        wall_seconds: start.elapsed().as_secs_f64(),
        experiments: records,
    };
    let path = dir.join("manifest.json");
    let f = File::create(&path).map_err(|source| RunError::Io { path, source })?;
    serde_json::to_writer_pretty(BufWriter::new(f), &manifest)?;
    Ok(manifest)
}
