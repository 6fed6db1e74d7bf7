//! Types shared by every embedding algorithm.

use std::time::{Duration, Instant};

use serde::Serialize;

use crate::milp::BipStats;
use thiserror::Error;

use crate::model::{Embedding, SubstrateNetwork, VnRequest};

/// Why a request could not be embedded.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
pub enum Rejection {
    #[error("virtual node {virtual_node} has no candidate substrate node")]
    EmptyCandidateSet { virtual_node: usize },
    #[error("no injective node mapping exists within the candidate sets")]
    NodeMapInfeasible,
    #[error("no capacitated substrate path for virtual link {virtual_link}")]
    NoPath { virtual_link: usize },
    #[error("the embedding program is infeasible")]
    Infeasible,
    #[error("time limit reached during {stage} without a feasible embedding")]
    TimeLimit { stage: String },
    #[error("solver failure: {0}")]
    Solver(String),
}

/// Wall time of one named stage of an embedding computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTime {
    pub stage: &'static str,
    pub seconds: f64,
}

/// Per-request diagnostics, serialized into the run traces.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    pub stages: Vec<StageTime>,
    /// Size of the initial path pool (path generation only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_pool: Option<usize>,
    /// Paths added by pricing, summed over all rounds (path generation only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub priced_paths: Option<usize>,
    /// Objective of the restricted dual in the last pricing round.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    /// Relative optimality gap when the solver stopped on its time limit.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    /// Counters of the final branch-and-bound search.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search: Option<BipStats>,
}

impl Diagnostics {
    pub fn total_seconds(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }

    pub(crate) fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.stages.push(StageTime { stage, seconds: start.elapsed().as_secs_f64() });
        out
    }
}

/// Result of one embedding attempt.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub result: Result<Embedding, Rejection>,
    pub diagnostics: Diagnostics,
}

/// An online embedding algorithm: maps one request against the current residuals.
pub trait Embedder: Send + Sync {
    fn name(&self) -> &'static str;

    fn embed(&self, sn: &SubstrateNetwork, vn: &VnRequest) -> Attempt;
}

/// Wall-clock budget shared by the solver calls of one request.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Budget {
    deadline: Option<Instant>,
}

impl Budget {
    pub(crate) fn new(limit: Option<Duration>) -> Self {
        Budget { deadline: limit.map(|d| Instant::now() + d) }
    }

    pub(crate) fn remaining(&self) -> Option<Duration> {
        self.deadline.map(|d| d.saturating_duration_since(Instant::now()))
    }
}
