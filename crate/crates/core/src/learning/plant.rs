use nalgebra::DVector;

use crate::error::Result;
use crate::system::{simulate_with, InputPolicy, LtiSystem, SimOptions, Trajectory, DEFAULT_SUBSTEPS};

/// What the learner can do with a plant: drive it and read measurements.
pub trait Plant {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;

    /// Runs the plant under `policy` and returns the sampled record. The
    /// record carries per-step integrals of `x x^T` and `x u^T`.
    fn run(&self, policy: &InputPolicy, x0: &DVector<f64>, horizon: f64, dt: f64) -> Result<Trajectory>;
}

/// A simulated plant whose model stays private to the simulator.
#[derive(Debug, Clone)]
pub struct SimulatedPlant {
    system: LtiSystem,
    substeps: usize,
}

impl SimulatedPlant {
    pub fn new(system: LtiSystem) -> Self {
        Self {
            system,
            substeps: DEFAULT_SUBSTEPS,
        }
    }

    pub fn with_substeps(mut self, substeps: usize) -> Self {
        self.substeps = substeps;
        self
    }
}

impl Plant for SimulatedPlant {
    fn state_dim(&self) -> usize {
        self.system.state_dim()
    }

    fn input_dim(&self) -> usize {
        self.system.input_dim()
    }

    fn run(&self, policy: &InputPolicy, x0: &DVector<f64>, horizon: f64, dt: f64) -> Result<Trajectory> {
        let opts = SimOptions {
            substeps: self.substeps,
            record_integrals: true,
        };
        simulate_with(&self.system, policy, x0, horizon, dt, &opts)
    }
}
