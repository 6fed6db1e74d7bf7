//! Path generation: weighted initial node mapping and shortest paths, dual
//! pricing of every end-node combination, and a final restricted master over
//! the enlarged pool.

pub mod dijkstra;
pub mod init;
pub mod master;
pub mod pricing;
pub mod weights;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use dijkstra::{dijkstra_capacitated, dijkstra_with_residuals};
pub use init::{init_sol, solve_lp_n, InitialSolution};
pub use master::{
    build_dual, build_primal, duals_from_primal, solve_dual, solve_restricted_primal, solve_restricted_primal_from,
    AugPath, DualPrices, MissingPaths, PrimalModel,
};
pub use pricing::{price_combinations, price_paths, reduced_cost, Combination};
pub use weights::{weight_substrate, weight_virtual, IsolatedNode, NodeWeights};

use crate::embed::{Attempt, Budget, Diagnostics, Embedder, Rejection};
use crate::milp::BipOptions;
use crate::model::{build_augmented, embedding_objective, Embedding, SubstrateNetwork, VnRequest};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathGenOptions {
    /// Dual/pricing rounds before the final master solve.
    pub iterations: usize,
    /// Wall-clock budget for the whole request.
    pub time_limit: Option<Duration>,
    /// Simplex iterations allowed to the final master search.
    #[serde(default)]
    pub work_limit: Option<usize>,
}

impl Default for PathGenOptions {
    fn default() -> Self {
        PathGenOptions { iterations: 1, time_limit: None, work_limit: None }
    }
}

/// The path-generation embedder.
#[derive(Debug, Clone, Default)]
pub struct PathGen {
    pub options: PathGenOptions,
}

impl Embedder for PathGen {
    fn name(&self) -> &'static str {
        "pathgen"
    }

    fn embed(&self, sn: &SubstrateNetwork, vn: &VnRequest) -> Attempt {
        final_sol(sn, vn, &self.options)
    }
}

/// Full pipeline for one request against the current residuals.
pub fn final_sol(sn: &SubstrateNetwork, vn: &VnRequest, opts: &PathGenOptions) -> Attempt {
    let mut diag = Diagnostics::default();
    let result = run(sn, vn, opts, &mut diag);
    if let Ok(e) = &result {
        diag.objective = Some(e.objective);
    }
    Attempt { result, diagnostics: diag }
}

fn run(
    sn: &SubstrateNetwork,
    vn: &VnRequest,
    opts: &PathGenOptions,
    diag: &mut Diagnostics,
) -> Result<Embedding, Rejection> {
    let budget = Budget::new(opts.time_limit);
    let aug = diag.time("augment", || build_augmented(sn, vn))?;
    let init = diag.time("init", || init_sol(&aug, budget.remaining()))?;
    let start = Embedding {
        objective: embedding_objective(
            sn,
            vn,
            &init.node_map,
            &init.pool.iter().map(|p| p.path.clone()).collect::<Vec<_>>(),
        ),
        node_map: init.node_map,
        link_map: init.pool.iter().map(|p| p.path.clone()).collect(),
    };
    let mut pool = init.pool;
    diag.initial_pool = Some(pool.len());
    let mut priced = 0;
    for _ in 0..opts.iterations {
        let pm = build_primal(&aug, &pool).expect("pool covers every virtual link");
        let prices = diag.time("dual", || solve_dual(&aug, &pool, &pm, budget.remaining()))?;
        diag.dual_objective = Some(prices.objective);
        let fresh = diag.time("pricing", || price_paths(&aug, &prices, &pool));
        if fresh.is_empty() {
            break;
        }
        priced += fresh.len();
        pool.extend(fresh);
    }
    diag.priced_paths = Some(priced);
    let pm = build_primal(&aug, &pool).expect("pool covers every virtual link");
    let sol = diag.time("primal", || {
        let opts = BipOptions { time_limit: budget.remaining(), work_limit: opts.work_limit, ..Default::default() };
        solve_restricted_primal_from(&pm, &aug, &pool, Some(&start), opts)
    })?;
    diag.gap = sol.gap;
    diag.search = Some(sol.search);
    Ok(sol.embedding)
}
