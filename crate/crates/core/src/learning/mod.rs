//! Data-driven structured policy iteration.
//!
//! The learner sees the plant only through [`Plant`]: it can inject inputs
//! and read back sampled states, and it knows `B`, `Q`, `R` and the mask.
//! The state matrix never crosses that boundary.

mod data;
mod exploration;
mod plant;
mod srl;

pub use data::{
    assemble, check_rank, collect, required_samples, CollectConfig, DataMatrices, Quadrature, RankReport,
};
pub use exploration::{make_exploration, ExplorationConfig, ExplorationSignal, Sinusoid};
pub use plant::{Plant, SimulatedPlant};
pub use srl::{learn, solve_iteration, srl_synthesize, LearningOutcome, SrlConfig, DEFAULT_RANK_TOL};
