//! Scenario files, reproduction runs and their CSV/JSON artifacts.

pub mod network;
pub mod output;
pub mod runner;
pub mod scenario;

pub use network::{make_consensus_network, network_from_edges, paper_couplings, Coupling};
pub use output::write_outputs;
pub use runner::{
    exit_code, run, run_batch, run_bound, run_compare, run_model_based, run_simulate, run_srl, Mode, Overrides,
    RunOutput, RunReport,
};
pub use scenario::{builtin, load_scenario, resolve_scenario, InitialGainSpec, ScenarioSpec, BUILTIN_NAMES};
