use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_instance, run_method, ExperimentConfig, Method, MethodOutcome, RunStatus};
use crate::dual::TraceRow;
use crate::error::{Error, Result};

/// One CSV/JSON row per (instance, SINR target, method).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub instance_id: usize,
    pub seed: u64,
    pub algorithm: Method,
    pub gamma: f64,
    pub status: RunStatus,
    pub objective: f64,
    pub design_power: f64,
    pub outer_iterations: usize,
    pub inner_iterations: usize,
    pub wall_seconds: f64,
    pub feasible: bool,
    pub tightness_ratio: f64,
    /// Active budget indices joined by `;`.
    pub active_papc: String,
    pub message: String,
}

impl ResultRecord {
    fn new(instance_id: usize, seed: u64, gamma: f64, o: &MethodOutcome) -> Self {
        Self {
            instance_id,
            seed,
            algorithm: o.method,
            gamma,
            status: o.status,
            objective: o.objective,
            design_power: o.design_power,
            outer_iterations: o.outer_iterations,
            inner_iterations: o.inner_iterations,
            wall_seconds: o.wall_seconds,
            feasible: o.feasible,
            tightness_ratio: o.tightness.as_ref().map_or(f64::NAN, |t| t.max_ratio()),
            active_papc: o
                .active_papc
                .iter()
                .map(|m| m.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            message: o.message.clone().unwrap_or_default(),
        }
    }

    pub fn active_set(&self) -> Vec<usize> {
        self.active_papc
            .split(';')
            .filter(|s| !s.is_empty())
            .filter_map(|s| s.parse().ok())
            .collect()
    }
}

/// Mean objective and time per (method, SINR target) over runs whose
/// instance is feasible and whose method finished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: Method,
    pub gamma: f64,
    pub runs: usize,
    pub infeasible_instances: usize,
    pub failures: usize,
    pub averaged: usize,
    pub mean_objective: f64,
    pub mean_wall_seconds: f64,
    pub mean_outer_iterations: f64,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<ResultRecord>,
    pub aggregates: Vec<AggregateRow>,
    /// `(instance_id, gamma, method, trace)` for every dual run.
    pub traces: Vec<(usize, f64, Method, Vec<TraceRow>)>,
}

/// Runs every configured method on every (run, SINR target) pair on
/// `workers` threads. The relaxation is always solved first to screen
/// infeasible instances; its record is kept only when `sdr` is requested.
pub fn run_sweep(config: &ExperimentConfig, workers: usize) -> Result<SweepOutput> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.runs)
        .flat_map(|r| (0..config.sinr_targets.len()).map(move |g| (r, g)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let per_job: Vec<Vec<(ResultRecord, Vec<TraceRow>)>> =
        pool.install(|| jobs.par_iter().map(|&(r, g)| run_job(config, r, g)).collect());

    let mut records = Vec::new();
    let mut traces = Vec::new();
    for (rec, trace) in per_job.into_iter().flatten() {
        if rec.algorithm != Method::Sdr {
            traces.push((rec.instance_id, rec.gamma, rec.algorithm, trace));
        }
        records.push(rec);
    }
    let aggregates = aggregate(config, &records);
    Ok(SweepOutput {
        records,
        aggregates,
        traces,
    })
}

fn run_job(config: &ExperimentConfig, run: usize, g: usize) -> Vec<(ResultRecord, Vec<TraceRow>)> {
    let seed = config.seed.wrapping_add(run as u64);
    let gamma = config.sinr_targets[g];
    let inst = match generate_instance(seed, config).and_then(|i| i.with_sinr_target(gamma)) {
        Ok(i) => i,
        Err(e) => {
            return config
                .algorithms
                .iter()
                .map(|&m| {
                    let o = MethodOutcome::failed(m, RunStatus::Failed, e.to_string(), 0.0);
                    (ResultRecord::new(run, seed, gamma, &o), vec![])
                })
                .collect()
        }
    };
    let tol = config.feasibility_tolerance;
    let screen = run_method(&inst, Method::Sdr, &config.optimizer, tol);
    let mut out = Vec::with_capacity(config.algorithms.len());
    for &m in &config.algorithms {
        let o = if m == Method::Sdr {
            screen.clone()
        } else if screen.status == RunStatus::Infeasible {
            MethodOutcome::failed(m, RunStatus::Infeasible, "relaxation infeasible; not run".into(), 0.0)
        } else {
            run_method(&inst, m, &config.optimizer, tol)
        };
        out.push((ResultRecord::new(run, seed, gamma, &o), o.trace));
    }
    out
}

fn aggregate(config: &ExperimentConfig, records: &[ResultRecord]) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(usize, usize), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        let a = config.algorithms.iter().position(|&m| m == r.algorithm).unwrap_or(usize::MAX);
        let g = config.sinr_targets.iter().position(|&x| x == r.gamma).unwrap_or(usize::MAX);
        groups.entry((g, a)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|rs| {
            let ok: Vec<&&ResultRecord> = rs.iter().filter(|r| r.status == RunStatus::Ok).collect();
            let n = ok.len();
            let mean = |f: &dyn Fn(&ResultRecord) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    ok.iter().map(|r| f(r)).sum::<f64>() / n as f64
                }
            };
            AggregateRow {
                algorithm: rs[0].algorithm,
                gamma: rs[0].gamma,
                runs: rs.len(),
                infeasible_instances: rs.iter().filter(|r| r.status == RunStatus::Infeasible).count(),
                failures: rs
                    .iter()
                    .filter(|r| matches!(r.status, RunStatus::Failed | RunStatus::MaxIterations))
                    .count(),
                averaged: n,
                mean_objective: mean(&|r| r.objective),
                mean_wall_seconds: mean(&|r| r.wall_seconds),
                mean_outer_iterations: mean(&|r| r.outer_iterations as f64),
            }
        })
        .collect()
}

/// Writes `records.csv`, `records.json`, `aggregates.csv`, and (if enabled)
/// `traces/<instance>_<gamma>_<method>.csv` under `dir`.
pub fn write_sweep(out: &SweepOutput, dir: &Path, write_traces: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();

    let path = dir.join("records.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for r in &out.records {
        w.serialize(r)?;
    }
    w.flush()?;
    written.push(path);

    let path = dir.join("records.json");
    fs::write(&path, serde_json::to_string_pretty(&out.records)?)?;
    written.push(path);

    let path = dir.join("aggregates.csv");
    let mut w = csv::Writer::from_path(&path)?;
    for a in &out.aggregates {
        w.serialize(a)?;
    }
    w.flush()?;
    written.push(path);

    if write_traces {
        let tdir = dir.join("traces");
        fs::create_dir_all(&tdir)?;
        for (id, gamma, method, trace) in &out.traces {
            if trace.is_empty() {
                continue;
            }
            let path = tdir.join(format!("{id}_{gamma}_{method}.csv"));
            let mut w = csv::Writer::from_path(&path)?;
            for row in trace {
                w.serialize(row)?;
            }
            w.flush()?;
            written.push(path);
        }
    }
    Ok(written)
}
