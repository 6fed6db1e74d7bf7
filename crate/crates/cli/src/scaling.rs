//! Embedding time against substrate size.
//!
//! For every size, cell and replication a fresh substrate of that size is
//! generated and a batch of requests is embedded one at a time against the
//! empty substrate, so every embedder solves the same instances.

use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vnembed::model::{candidate_set, Embedding, SubstrateNetwork, VnRequest};
use vnembed::sim::{self, EmbedderKind, SimError};

use crate::output::{ensure_dir, write_csv, write_json, Estimate};
use crate::spec::ExperimentSpec;
use crate::{CliError, VERSION};

/// Outcome of one request of a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRequest {
    pub id: u64,
    pub accepted: bool,
    pub censored: bool,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub simplex_iterations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Batch {
    pub size: usize,
    pub cell: String,
    pub replication: usize,
    pub seed: u64,
    pub requests: Vec<BatchRequest>,
}

impl Batch {
    pub fn mean_seconds(&self) -> f64 {
        self.requests.iter().map(|r| r.seconds).sum::<f64>() / self.requests.len().max(1) as f64
    }
}

/// One line of the timing table. Censored requests enter the mean with the time
/// they ran before hitting their limit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub size: usize,
    pub cell: String,
    pub embedder: EmbedderKind,
    pub replications: usize,
    pub requests: usize,
    pub mean_seconds: f64,
    pub half_width: Option<f64>,
    pub max_seconds: f64,
    pub accepted: usize,
    pub censored: usize,
}

/// Runs the sweep and returns the raw batches in (size, cell, replication) order.
pub fn run_batches(spec: &ExperimentSpec, jobs: Option<usize>) -> Result<Vec<Batch>, CliError> {
    spec.validate()?;
    let mut work = Vec::new();
    for &size in &spec.scaling.sizes {
        for c in 0..spec.cells.len() {
            for k in 0..spec.replications {
                work.push((size, c, k));
            }
        }
    }
    let task = || {
        work.par_iter()
            .map(|&(size, c, k)| {
                let cell = &spec.cells[c];
                let mut cfg = spec.config(cell, k);
                cfg.substrate.n_nodes = size;
                cfg.workload.n_arrivals = spec.scaling.requests;
                let (sn, workload) = sim::generate(&cfg)?;
                let embedder =
                    cfg.embedder.build(cfg.iterations, cfg.time_limit_s.map(Duration::from_secs_f64), cfg.work_limit);
                let requests = workload
                    .requests
                    .iter()
                    .map(|vn| {
                        let start = Instant::now();
                        let a = embedder.embed(&sn, vn);
                        let seconds = start.elapsed().as_secs_f64();
                        if let Ok(e) = &a.result {
                            check_feasible(&sn, vn, e)
                                .map_err(|message| SimError::Invariant { time: vn.arrival(), message })?;
                        }
                        let limited = matches!(a.result, Err(vnembed::Rejection::TimeLimit { .. }));
                        Ok(BatchRequest {
                            id: vn.id(),
                            accepted: a.result.is_ok(),
                            censored: limited || a.diagnostics.gap.is_some(),
                            seconds,
                            objective: a.result.as_ref().ok().map(|e| e.objective),
                            simplex_iterations: a.diagnostics.search.map(|s| s.simplex_iterations),
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                Ok(Batch { size, cell: cell.name.clone(), replication: k, seed: cfg.seed, requests })
            })
            .collect::<Result<Vec<_>, CliError>>()
    };
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool").install(task),
        None => task(),
    }
}

/// An embedding must use candidate hosts and fit the substrate it was computed on.
fn check_feasible(sn: &SubstrateNetwork, vn: &VnRequest, e: &Embedding) -> Result<(), String> {
    for (i, &u) in e.node_map.iter().enumerate() {
        if !candidate_set(i, sn, vn).contains(&u) {
            return Err(format!("request {}: virtual node {i} placed outside its candidates", vn.id()));
        }
    }
    let mut scratch = sn.clone();
    scratch.allocate(vn, e).map_err(|err| err.to_string())?;
    scratch.release(vn, e).map_err(|err| err.to_string())?;
    if scratch.residual_cpu_table() != sn.residual_cpu_table() || scratch.residual_bw_table() != sn.residual_bw_table()
    {
        return Err(format!("request {}: release did not undo the allocation", vn.id()));
    }
    Ok(())
}

pub fn rows(spec: &ExperimentSpec, batches: &[Batch]) -> Vec<ScalingRow> {
    let mut out = Vec::new();
    for &size in &spec.scaling.sizes {
        for cell in &spec.cells {
            let mine: Vec<&Batch> = batches.iter().filter(|b| b.size == size && b.cell == cell.name).collect();
            let all = || mine.iter().flat_map(|b| b.requests.iter());
            let est = Estimate::of(&mine.iter().map(|b| b.mean_seconds()).collect::<Vec<_>>());
            out.push(ScalingRow {
                size,
                cell: cell.name.clone(),
                embedder: cell.config.embedder,
                replications: mine.len(),
                requests: all().count(),
                mean_seconds: est.mean,
                half_width: est.half_width,
                max_seconds: all().map(|r| r.seconds).fold(0.0, f64::max),
                accepted: all().filter(|r| r.accepted).count(),
                censored: all().filter(|r| r.censored).count(),
            });
        }
    }
    out
}

#[derive(Serialize)]
struct ScalingDoc<'a> {
    version: &'a str,
    name: &'a str,
    rows: &'a [ScalingRow],
    batches: &'a [Batch],
}

/// Runs the sweep of `spec` and writes `scaling.csv` and `scaling.json` under `out`.
pub fn scaling_report(spec: &ExperimentSpec, out: &Path, jobs: Option<usize>) -> Result<Vec<ScalingRow>, CliError> {
    let batches = run_batches(spec, jobs)?;
    let table = rows(spec, &batches);
    ensure_dir(out)?;
    write_csv(&out.join("scaling.csv"), &format!("scaling {}", spec.name), Some(spec.seed_base), &table)?;
    write_json(
        &out.join("scaling.json"),
        &ScalingDoc { version: VERSION, name: &spec.name, rows: &table, batches: &batches },
    )?;
    Ok(table)
}
