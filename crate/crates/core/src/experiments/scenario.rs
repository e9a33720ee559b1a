//! Scenario files: TOML with row-major matrix blocks and 0/1 mask grids.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learning::{CollectConfig, ExplorationConfig, Quadrature, DEFAULT_RANK_TOL};
use crate::linalg;
use crate::model_based::{initial_stabilizing_gain, IterationSettings};
use crate::structure::SparsityMask;
use crate::system::{CostWeights, LtiSystem, DEFAULT_SUBSTEPS};

const PAPER_A: &str = include_str!("../../fixtures/paper-a.toml");
const PAPER_B: &str = include_str!("../../fixtures/paper-b.toml");
const PAPER_B_PRINTED: &str = include_str!("../../fixtures/paper-b-printed.toml");

pub const BUILTIN_NAMES: [&str; 3] = ["paper-a", "paper-b", "paper-b-printed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuadratureSpec {
    Integrated,
    Trapezoid,
}

impl From<QuadratureSpec> for Quadrature {
    fn from(q: QuadratureSpec) -> Self {
        match q {
            QuadratureSpec::Integrated => Quadrature::Integrated,
            QuadratureSpec::Trapezoid => Quadrature::Trapezoid,
        }
    }
}

/// Starting gain `K0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InitialGainSpec {
    Zero,
    /// Searched with the model; see [`initial_stabilizing_gain`].
    Auto,
    /// `scale * I_K`.
    Mask { scale: f64 },
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplorationSpec {
    pub seed: u64,
    pub duration: f64,
    #[serde(default = "one")]
    pub window_steps: usize,
    pub num_sinusoids: usize,
    pub freq_min: f64,
    pub freq_max: f64,
    pub amplitude: f64,
    #[serde(default = "integrated")]
    pub quadrature: QuadratureSpec,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub tol: f64,
    pub max_iter: usize,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
}

fn one() -> usize {
    1
}

fn integrated() -> QuadratureSpec {
    QuadratureSpec::Integrated
}

fn default_substeps() -> usize {
    DEFAULT_SUBSTEPS
}

fn default_rank_tol() -> f64 {
    DEFAULT_RANK_TOL
}

fn default_horizon() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub dt: f64,
    /// Length of the closed-loop phase after learning, seconds.
    #[serde(default = "default_horizon")]
    pub control_horizon: f64,
    pub x0: Vec<f64>,
    /// Ground truth for simulation; the learner never reads it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub mask: Vec<Vec<u8>>,
    pub initial_gain: InitialGainSpec,
    pub exploration: ExplorationSpec,
    pub solver: SolverSpec,
}

fn shape(name: &str, rows: &[Vec<f64>], r: usize, c: usize) -> Result<DMatrix<f64>> {
    let m = linalg::from_rows(name, rows).map_err(|e| Error::Scenario(e.to_string()))?;
    if m.shape() != (r, c) {
        return Err(Error::Scenario(format!(
            "dimension mismatch: {name} is {}x{}, expected {r}x{c}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}

impl ScenarioSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn state_dim(&self) -> usize {
        self.b.len()
    }

    pub fn input_dim(&self) -> usize {
        self.b.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.state_dim();
        let m = self.input_dim();
        if n == 0 || m == 0 {
            return Err(Error::Scenario("b must be non-empty".into()));
        }
        if let Some(a) = &self.a {
            shape("a", a, n, n)?;
        }
        shape("b", &self.b, n, m)?;
        shape("q", &self.q, n, n)?;
        shape("r", &self.r, m, m)?;
        if self.x0.len() != n {
            return Err(Error::Scenario(format!(
                "dimension mismatch: x0 has {} entries, expected {n}",
                self.x0.len()
            )));
        }
        if self.mask.len() != m || self.mask.iter().any(|row| row.len() != n) {
            return Err(Error::Scenario(format!("dimension mismatch: mask must be {m}x{n}")));
        }
        self.mask()?;
        self.weights()?;
        if let InitialGainSpec::Matrix { rows } = &self.initial_gain {
            shape("initial_gain", rows, m, n)?;
        }
        if !(self.dt > 0.0) || !(self.control_horizon >= 0.0) {
            return Err(Error::Scenario("dt must be positive and control_horizon non-negative".into()));
        }
        self.exploration_config()?;
        let e = &self.exploration;
        if !(e.duration > 0.0) || e.window_steps == 0 || e.substeps == 0 {
            return Err(Error::Scenario("exploration needs duration > 0, window_steps >= 1, substeps >= 1".into()));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iter == 0 || !(self.solver.rank_tol >= 0.0) {
            return Err(Error::Scenario("solver needs tol > 0, max_iter >= 1, rank_tol >= 0".into()));
        }
        Ok(())
    }

    /// Ground-truth plant; fails when `a` is absent.
    pub fn system(&self) -> Result<LtiSystem> {
        let a = self
            .a
            .as_ref()
            .ok_or_else(|| Error::Scenario(format!("scenario {} has no state matrix", self.name)))?;
        let n = self.state_dim();
        LtiSystem::new(shape("a", a, n, n)?, self.input_matrix()?)
    }

    pub fn input_matrix(&self) -> Result<DMatrix<f64>> {
        shape("b", &self.b, self.state_dim(), self.input_dim())
    }

    pub fn weights(&self) -> Result<CostWeights> {
        let (n, m) = (self.state_dim(), self.input_dim());
        CostWeights::new(shape("q", &self.q, n, n)?, shape("r", &self.r, m, m)?)
            .map_err(|e| Error::Scenario(e.to_string()))
    }

    pub fn mask(&self) -> Result<SparsityMask> {
        SparsityMask::from_grid(&self.mask).map_err(|e| Error::Scenario(format!("mask: {e}")))
    }

    pub fn x0(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x0)
    }

    pub fn initial_gain(&self) -> Result<DMatrix<f64>> {
        let (n, m) = (self.state_dim(), self.input_dim());
        let mask = self.mask()?;
        match &self.initial_gain {
            InitialGainSpec::Zero => Ok(DMatrix::zeros(m, n)),
            InitialGainSpec::Auto => initial_stabilizing_gain(&self.system()?, &self.weights()?, &mask),
            InitialGainSpec::Mask { scale } => Ok(mask.indicator() * *scale),
            InitialGainSpec::Matrix { rows } => shape("initial_gain", rows, m, n),
        }
    }

    pub fn iteration(&self) -> IterationSettings {
        IterationSettings {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
        }
    }

    pub fn exploration_config(&self) -> Result<ExplorationConfig> {
        let e = &self.exploration;
        let cfg = ExplorationConfig {
            num_sinusoids: e.num_sinusoids,
            freq_min: e.freq_min,
            freq_max: e.freq_max,
            amplitude: e.amplitude,
        };
        cfg.validate().map_err(|err| Error::Scenario(format!("exploration: {err}")))?;
        Ok(cfg)
    }

    pub fn collect_config(&self) -> CollectConfig {
        CollectConfig {
            dt: self.dt,
            duration: self.exploration.duration,
            window_steps: self.exploration.window_steps,
            quadrature: self.exploration.quadrature.into(),
        }
    }
}

pub fn builtin(name: &str) -> Option<ScenarioSpec> {
    let text = match name {
        "paper-a" => PAPER_A,
        "paper-b" => PAPER_B,
        "paper-b-printed" => PAPER_B_PRINTED,
        _ => return None,
    };
    Some(ScenarioSpec::from_toml(text).expect("built-in fixture is valid"))
}

pub fn load_scenario(path: &Path) -> Result<ScenarioSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))?;
    ScenarioSpec::from_toml(&text).map_err(|e| Error::Scenario(format!("{}: {e}", path.display())))
}

/// An existing file path wins over a built-in name.
pub fn resolve_scenario(arg: &str) -> Result<ScenarioSpec> {
    let path = Path::new(arg);
    if path.is_file() {
        return load_scenario(path);
    }
    builtin(arg).ok_or_else(|| {
        Error::Scenario(format!(
            "{arg} is neither a file nor a built-in scenario ({})",
            BUILTIN_NAMES.join(", ")
        ))
    })
}
