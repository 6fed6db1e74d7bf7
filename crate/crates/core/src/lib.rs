pub mod baselines;
pub mod embed;
pub mod fixtures;
pub mod milp;
pub mod model;
pub mod pathgen;
pub mod sim;
pub mod topogen;

pub use baselines::{gnmsp, vine_opt, vine_opt_with, Gnmsp, VineOpt};
pub use embed::{Attempt, Diagnostics, Embedder, Rejection};
pub use model::{
    build_augmented, AugmentedNetwork, Embedding, MetaLink, ModelError, SubstrateLink, SubstrateNetwork, SubstrateNode,
    SubstratePath, VirtualLink, VirtualNode, VnRequest,
};
pub use pathgen::{final_sol, PathGen, PathGenOptions};
pub use sim::{EmbedderKind, MetricsSeries, SimConfig, SimError};
