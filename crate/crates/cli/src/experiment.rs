//! Replicated simulation runs of every cell of a spec.
//!
//! Output layout under the run directory:
//!
//! ```text
//! spec.json                 resolved spec
//! aggregate.json            per-cell means and 95% confidence half-widths
//! <cell>/run-<k>.csv        metric samples of replication k
//! <cell>/requests-<k>.csv   per-request outcome and wall time
//! <cell>/run-<k>.json       trace: config and full metrics series
//! ```

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use vnembed::sim::{self, EmbedderKind, MetricsSeries, SimConfig, SimError};

use crate::output::{ensure_dir, percentile, write_csv, write_json, Estimate};
use crate::spec::ExperimentSpec;
use crate::{CliError, VERSION};

/// Everything recorded about one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub version: String,
    pub cell: String,
    pub replication: usize,
    pub config: SimConfig,
    pub metrics: MetricsSeries,
}

/// One row of a `requests-<k>.csv` file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRow {
    pub id: u64,
    pub arrival: f64,
    pub accepted: bool,
    pub censored: bool,
    pub seconds: f64,
    pub revenue: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub cell: String,
    pub replication: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub name: String,
    pub embedder: EmbedderKind,
    pub iterations: usize,
    /// Completed replications.
    pub runs: usize,
    /// Final acceptance ratio.
    pub acceptance_ratio: Estimate,
    /// Mean over the samples of a run.
    pub node_utilization: Estimate,
    pub link_utilization: Estimate,
    /// Cumulative at the end of a run.
    pub revenue: Estimate,
    pub cost: Estimate,
    pub profit: Estimate,
    /// Mean per-request wall time of a run.
    pub request_seconds: Estimate,
    /// Percentiles of per-request wall time pooled over all runs.
    pub seconds_p50: f64,
    pub seconds_p90: f64,
    pub seconds_p99: f64,
    pub requests: usize,
    /// Requests on which the embedder hit its time or work limit.
    pub censored: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub version: String,
    pub name: String,
    /// False when some replication failed; its cell summary then covers fewer runs.
    pub complete: bool,
    pub failures: Vec<RunFailure>,
    pub cells: Vec<CellSummary>,
}

/// Result of one replication of one cell.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub cell: usize,
    pub replication: usize,
    pub config: SimConfig,
    pub outcome: Result<MetricsSeries, SimError>,
}

/// Runs every cell and replication of `spec` on a pool of `jobs` workers
/// (the machine's parallelism when `None`). Results come back in spec order.
pub fn execute(spec: &ExperimentSpec, jobs: Option<usize>) -> Vec<RunResult> {
    let work: Vec<(usize, usize)> =
        (0..spec.cells.len()).flat_map(|c| (0..spec.replications).map(move |k| (c, k))).collect();
    let task = || {
        work.par_iter()
            .map(|&(c, k)| {
                let config = spec.config(&spec.cells[c], k);
                let outcome = sim::run(&config).map(|o| o.metrics);
                RunResult { cell: c, replication: k, config, outcome }
            })
            .collect()
    };
    match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool").install(task),
        None => task(),
    }
}

pub fn cell_dir(out: &Path, cell: &str) -> PathBuf {
    out.join(cell)
}

/// Runs `spec`, writes all outputs under `out` and returns the aggregate. Failed
/// replications are listed in the aggregate, which is then marked incomplete.
pub fn run_experiment(spec: &ExperimentSpec, out: &Path, jobs: Option<usize>) -> Result<Aggregate, CliError> {
    spec.validate()?;
    ensure_dir(out)?;
    write_json(&out.join("spec.json"), spec)?;
    let results = execute(spec, jobs);
    let mut failures = Vec::new();
    for r in &results {
        let cell = &spec.cells[r.cell];
        let dir = cell_dir(out, &cell.name);
        ensure_dir(&dir)?;
        match &r.outcome {
            Ok(m) => write_run(&dir, &cell.name, r.replication, &r.config, m)?,
            Err(e) => failures.push(RunFailure {
                cell: cell.name.clone(),
                replication: r.replication,
                seed: r.config.seed,
                error: e.to_string(),
            }),
        }
    }
    let cells = spec
        .cells
        .iter()
        .enumerate()
        .map(|(c, cell)| {
            let runs: Vec<&MetricsSeries> =
                results.iter().filter(|r| r.cell == c).filter_map(|r| r.outcome.as_ref().ok()).collect();
            summarize(&cell.name, &cell.config, &runs)
        })
        .collect();
    let agg = Aggregate {
        version: VERSION.to_string(),
        name: spec.name.clone(),
        complete: failures.is_empty(),
        failures,
        cells,
    };
    write_json(&out.join("aggregate.json"), &agg)?;
    Ok(agg)
}

fn write_run(dir: &Path, cell: &str, k: usize, config: &SimConfig, m: &MetricsSeries) -> Result<(), CliError> {
    write_csv(&dir.join(format!("run-{k}.csv")), &format!("samples cell {cell}"), Some(config.seed), &m.samples)?;
    let rows: Vec<RequestRow> = m
        .requests
        .iter()
        .map(|r| RequestRow {
            id: r.id,
            arrival: r.arrival,
            accepted: r.accepted,
            censored: r.censored,
            seconds: r.seconds,
            revenue: r.revenue,
            cost: r.cost,
        })
        .collect();
    write_csv(&dir.join(format!("requests-{k}.csv")), &format!("requests cell {cell}"), Some(config.seed), &rows)?;
    let trace = Trace {
        version: VERSION.to_string(),
        cell: cell.to_string(),
        replication: k,
        config: config.clone(),
        metrics: m.clone(),
    };
    write_json(&dir.join(format!("run-{k}.json")), &trace)
}

/// Per-cell statistics over completed runs.
pub fn summarize(name: &str, config: &SimConfig, runs: &[&MetricsSeries]) -> CellSummary {
    let per_run = |f: &dyn Fn(&MetricsSeries) -> f64| Estimate::of(&runs.iter().map(|m| f(m)).collect::<Vec<_>>());
    let last = |m: &MetricsSeries| m.final_sample().copied();
    let seconds: Vec<f64> = runs.iter().flat_map(|m| m.requests.iter().map(|r| r.seconds)).collect();
    CellSummary {
        name: name.to_string(),
        embedder: config.embedder,
        iterations: config.iterations,
        runs: runs.len(),
        acceptance_ratio: per_run(&|m| m.acceptance_ratio()),
        node_utilization: per_run(&|m| m.mean_utilization().0),
        link_utilization: per_run(&|m| m.mean_utilization().1),
        revenue: per_run(&|m| last(m).map_or(0.0, |s| s.revenue)),
        cost: per_run(&|m| last(m).map_or(0.0, |s| s.cost)),
        profit: per_run(&|m| last(m).map_or(0.0, |s| s.profit)),
        request_seconds: per_run(&|m| m.mean_request_seconds()),
        seconds_p50: percentile(&seconds, 50.0),
        seconds_p90: percentile(&seconds, 90.0),
        seconds_p99: percentile(&seconds, 99.0),
        requests: seconds.len(),
        censored: runs.iter().map(|m| m.requests.iter().filter(|r| r.censored).count()).sum(),
    }
}
