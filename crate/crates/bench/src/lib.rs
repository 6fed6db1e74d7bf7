//! Benchmark instances shared by the criterion benches under `benches/`.

use vnembed::sim::{generate, SimConfig};
use vnembed::{SubstrateNetwork, VnRequest};

/// A substrate of `n` nodes with the evaluation's parameters and the first
/// `count` requests generated for it that have a candidate host for every node.
pub fn instance(n: usize, count: usize, seed: u64) -> (SubstrateNetwork, Vec<VnRequest>) {
    let mut cfg = SimConfig::paper_small();
    cfg.substrate.n_nodes = n;
    cfg.workload.n_arrivals = 20 * count;
    cfg.seed = seed;
    let (sn, w) = generate(&cfg).expect("valid preset");
    let reqs = w.requests.into_iter().filter(|vn| vnembed::build_augmented(&sn, vn).is_ok()).take(count).collect();
    (sn, reqs)
}
