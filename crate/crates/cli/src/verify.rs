//! Re-checks recorded runs against freshly generated instances.
//!
//! Each trace is replayed from its config: the substrate and workload are
//! regenerated, every recorded embedding is checked against the candidate sets
//! and residuals it was computed on, allocated and later released, and every
//! recorded metric is recomputed from scratch.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vnembed::model::{candidate_set, Embedding, SubstrateNetwork};
use vnembed::sim::{self, check_conservation, MetricsSeries, Sample};
use vnembed::topogen::EventKind;

use crate::experiment::{cell_dir, Aggregate, Trace};
use crate::output::{read_json, read_samples, Estimate};
use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub runs: usize,
    pub events: usize,
    pub replayed: usize,
    pub violations: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn absorb(&mut self, other: VerifyReport) {
        self.runs += other.runs;
        self.events += other.events;
        self.replayed += other.replayed;
        self.violations.extend(other.violations);
    }
}

/// Trace files of a run directory, in cell then replication order.
pub fn traces(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut found = Vec::new();
    let mut cells: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    cells.sort();
    for cell in cells {
        let mut runs: Vec<(usize, PathBuf)> = fs::read_dir(&cell)
            .map_err(|e| CliError::io(&cell, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter_map(|p| {
                let name = p.file_name()?.to_str()?;
                let k = name.strip_prefix("run-")?.strip_suffix(".json")?.parse().ok()?;
                Some((k, p))
            })
            .collect();
        runs.sort();
        found.extend(runs.into_iter().map(|(_, p)| p));
    }
    Ok(found)
}

/// Verifies every trace under `dir` and, when present, the aggregate. With
/// `rerun`, every run is also simulated again and compared field by field,
/// wall times excepted.
pub fn verify_dir(dir: &Path, rerun: bool) -> Result<VerifyReport, CliError> {
    let mut report = VerifyReport::default();
    for path in traces(dir)? {
        report.absorb(verify_trace(&path, rerun)?);
    }
    let agg = dir.join("aggregate.json");
    if agg.is_file() {
        let agg: Aggregate = read_json(&agg)?;
        report.violations.extend(check_aggregate(dir, &agg)?);
    }
    Ok(report)
}

pub fn verify_trace(path: &Path, rerun: bool) -> Result<VerifyReport, CliError> {
    let trace: Trace = read_json(path)?;
    let at = |m: String| format!("{}: {m}", path.display());
    let mut report = VerifyReport { runs: 1, events: trace.metrics.events.len(), ..Default::default() };
    let (sn, workload) = sim::generate(&trace.config)?;
    report.violations.extend(replay(&sn, &workload, &trace.metrics, trace.config.sample_interval).into_iter().map(at));
    let csv = path.with_file_name(format!("run-{}.csv", trace.replication));
    if csv.is_file() {
        let rows = read_samples(&csv)?;
        if rows != trace.metrics.samples {
            report.violations.push(at(format!("{} disagrees with the trace samples", csv.display())));
        }
    }
    if rerun {
        report.replayed = 1;
        let fresh = sim::run(&trace.config)?.metrics;
        if strip_timing(&fresh) != strip_timing(&trace.metrics) {
            report.violations.push(at("rerun with the recorded config produced different metrics".into()));
        }
    }
    Ok(report)
}

/// Zeroes every wall-clock field, which is the only nondeterministic output.
pub fn strip_timing(m: &MetricsSeries) -> MetricsSeries {
    let mut m = m.clone();
    for r in &mut m.requests {
        r.seconds = 0.0;
        r.stages.iter_mut().for_each(|s| s.seconds = 0.0);
    }
    m
}

struct Totals {
    arrivals: u64,
    accepted: u64,
    revenue: f64,
    cost: f64,
}

fn snapshot(t: &Totals, time: f64, sn: &SubstrateNetwork) -> Sample {
    let frac = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let used_cpu: u64 = sn.nodes().iter().enumerate().map(|(u, n)| (n.cpu - sn.residual_cpu(u)) as u64).sum();
    let cap_cpu: u64 = sn.nodes().iter().map(|n| n.cpu as u64).sum();
    let used_bw: u64 = sn.links().iter().enumerate().map(|(l, k)| (k.bw - sn.residual_bw(l)) as u64).sum();
    let cap_bw: u64 = sn.links().iter().map(|k| k.bw as u64).sum();
    Sample {
        time,
        arrivals: t.arrivals,
        accepted: t.accepted,
        acceptance_ratio: frac(t.accepted, t.arrivals),
        node_utilization: frac(used_cpu, cap_cpu),
        link_utilization: frac(used_bw, cap_bw),
        revenue: t.revenue,
        cost: t.cost,
        profit: t.revenue - t.cost,
        live: sn.live_allocations().len(),
    }
}

fn same(a: &Sample, b: &Sample) -> bool {
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-9 * x.abs().max(y.abs()).max(1.0);
    a.arrivals == b.arrivals
        && a.accepted == b.accepted
        && a.live == b.live
        && close(a.time, b.time)
        && close(a.acceptance_ratio, b.acceptance_ratio)
        && close(a.node_utilization, b.node_utilization)
        && close(a.link_utilization, b.link_utilization)
        && close(a.revenue, b.revenue)
        && close(a.cost, b.cost)
        && close(a.profit, b.profit)
}

/// Replays recorded decisions on a fresh copy of the substrate and returns every
/// disagreement found.
pub fn replay(
    pristine: &SubstrateNetwork,
    workload: &vnembed::topogen::Workload,
    m: &MetricsSeries,
    sample_interval: f64,
) -> Vec<String> {
    let mut bad = Vec::new();
    if m.events.len() != workload.events.len() {
        bad.push(format!("{} recorded events for {} generated", m.events.len(), workload.events.len()));
        return bad;
    }
    let by_id: BTreeMap<u64, &vnembed::VnRequest> = workload.requests.iter().map(|r| (r.id(), r)).collect();
    let mut records = m.requests.iter();
    let mut sn = pristine.clone();
    let mut live: BTreeMap<u64, Embedding> = BTreeMap::new();
    let mut t = Totals { arrivals: 0, accepted: 0, revenue: 0.0, cost: 0.0 };
    let mut samples = Vec::new();
    let mut k = 0u64;
    let mut now = 0.0;
    for (ev, rec_ev) in workload.events.iter().zip(&m.events) {
        while (k as f64) * sample_interval < ev.time {
            samples.push(snapshot(&t, k as f64 * sample_interval, &sn));
            k += 1;
        }
        now = ev.time;
        if ev.kind != rec_ev.kind || ev.request != rec_ev.request {
            bad.push(format!("event order diverges at request {}", ev.request));
            return bad;
        }
        let vn = by_id[&ev.request];
        match ev.kind {
            EventKind::Arrival => {
                t.arrivals += 1;
                let Some(rec) = records.next().filter(|r| r.id == vn.id()) else {
                    bad.push(format!("no request record for arrival of request {}", vn.id()));
                    return bad;
                };
                let demand: u64 = vn.nodes().iter().map(|n| n.cpu as u64).sum::<u64>()
                    + vn.links().iter().map(|l| l.bw as u64).sum::<u64>();
                if rec.revenue != demand as f64 {
                    bad.push(format!("request {}: revenue {} but demand {demand}", vn.id(), rec.revenue));
                }
                match (&rec.embedding, rec.accepted) {
                    (Some(e), true) => {
                        for (i, &u) in e.node_map.iter().enumerate() {
                            if !candidate_set(i, &sn, vn).contains(&u) {
                                bad.push(format!(
                                    "request {}: virtual node {i} placed outside its candidates",
                                    vn.id()
                                ));
                            }
                        }
                        if let Err(err) = sn.allocate(vn, e) {
                            bad.push(format!("request {}: {err}", vn.id()));
                            continue;
                        }
                        let spent: u64 = vn.nodes().iter().map(|n| n.cpu as u64).sum::<u64>()
                            + vn.links()
                                .iter()
                                .zip(&e.link_map)
                                .map(|(l, p)| l.bw as u64 * p.links().len() as u64)
                                .sum::<u64>();
                        if rec.cost != spent as f64 {
                            bad.push(format!("request {}: cost {} but embedding spends {spent}", vn.id(), rec.cost));
                        }
                        t.accepted += 1;
                        t.revenue += rec.revenue;
                        t.cost += rec.cost;
                        live.insert(vn.id(), e.clone());
                    }
                    (None, false) => {}
                    _ => bad.push(format!("request {}: accepted flag and embedding disagree", vn.id())),
                }
            }
            EventKind::Departure => {
                if let Some(e) = live.remove(&vn.id()) {
                    if let Err(err) = sn.release(vn, &e) {
                        bad.push(format!("request {}: {err}", vn.id()));
                    }
                }
            }
        }
        if let Err(err) = check_conservation(&sn) {
            bad.push(format!("after event for request {}: {err}", vn.id()));
        }
        let state = snapshot(&t, now, &sn);
        if !same(&state, &rec_ev.state) {
            bad.push(format!("state after event for request {} disagrees with the record", vn.id()));
        }
    }
    samples.push(snapshot(&t, now, &sn));
    if records.next().is_some() {
        bad.push("more request records than arrivals".into());
    }
    if samples.len() != m.samples.len() || samples.iter().zip(&m.samples).any(|(a, b)| !same(a, b)) {
        bad.push("recorded samples disagree with the replay".into());
    }
    if live.is_empty()
        && (sn.residual_cpu_table() != pristine.residual_cpu_table()
            || sn.residual_bw_table() != pristine.residual_bw_table())
    {
        bad.push("residuals not restored after every departure".into());
    }
    bad
}

/// Recomputes the aggregate's acceptance and utilization means from the per-run CSVs.
pub fn check_aggregate(dir: &Path, agg: &Aggregate) -> Result<Vec<String>, CliError> {
    let mut bad = Vec::new();
    for cell in &agg.cells {
        let cdir = cell_dir(dir, &cell.name);
        let mut acceptance = Vec::new();
        let mut node = Vec::new();
        let mut profit = Vec::new();
        let mut k = 0;
        loop {
            let csv = cdir.join(format!("run-{k}.csv"));
            if !csv.is_file() {
                break;
            }
            let rows = read_samples(&csv)?;
            if let Some(last) = rows.last() {
                acceptance.push(last.acceptance_ratio);
                profit.push(last.profit);
            }
            node.push(rows.iter().map(|s| s.node_utilization).sum::<f64>() / rows.len().max(1) as f64);
            k += 1;
        }
        let close = |a: &Estimate, b: &Estimate| a.n == b.n && (a.mean - b.mean).abs() <= 1e-9 * a.mean.abs().max(1.0);
        for (what, ours, theirs) in [
            ("acceptance ratio", Estimate::of(&acceptance), &cell.acceptance_ratio),
            ("node utilization", Estimate::of(&node), &cell.node_utilization),
            ("profit", Estimate::of(&profit), &cell.profit),
        ] {
            if !close(&ours, theirs) {
                bad.push(format!(
                    "cell {}: aggregate {what} {} but the CSVs give {}",
                    cell.name, theirs.mean, ours.mean
                ));
            }
        }
    }
    Ok(bad)
}
