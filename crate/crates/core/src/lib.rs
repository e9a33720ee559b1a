//! Structured LQR gain synthesis for continuous-time LTI systems.
//!
//! Two routes produce a feedback `u = -Kx` whose gain obeys a sparsity
//! pattern:
//!
//! * [`model_based`] runs a masked Kleinman iteration with the full model.
//! * [`learning`] runs the same policy iteration from trajectory data only,
//!   never touching the state matrix.
//!
//! [`experiments`] wires both into reproducible scenario runs and the CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod learning;
pub mod linalg;
pub mod model_based;
pub mod structure;
pub mod system;

pub use error::{Error, Result};
pub use learning::{ExplorationConfig, ExplorationSignal, Plant, SimulatedPlant, SrlConfig};
pub use model_based::{IterationSettings, SynthesisResult};
pub use structure::SparsityMask;
pub use system::{CostWeights, InputPolicy, LtiSystem, Trajectory};
