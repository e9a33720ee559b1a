//! Scenario pipelines: model-based synthesis, data-driven learning, the
//! side-by-side comparison, the cost bound and plain simulation.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::learning::{learn, make_exploration, RankReport, SimulatedPlant, SrlConfig};
use crate::linalg;
use crate::model_based::{
    bound_operator, bound_operator_closed_loop, kleinman_structured, solve_unstructured_lqr,
    suboptimality_bound_with, BoundReport, IterationRecord, IterationSettings, SynthesisResult,
};
use crate::system::{evaluate_cost, evaluate_cost_analytic, simulate, InputPolicy, LtiSystem, Trajectory};

use super::scenario::ScenarioSpec;

/// Settings for the unstructured reference solution, independent of the
/// scenario's own stopping rule.
pub const BASELINE_SETTINGS: IterationSettings = IterationSettings {
    tol: 1e-10,
    max_iter: 100,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Srl,
    ModelBased,
    Compare,
    Bound,
    Simulate,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Srl => "srl",
            Mode::ModelBased => "model-based",
            Mode::Compare => "compare",
            Mode::Bound => "bound",
            Mode::Simulate => "simulate",
        }
    }
}

/// Command-line overrides applied on top of a scenario file.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, spec: &mut ScenarioSpec) -> Result<()> {
        if let Some(seed) = self.seed {
            spec.exploration.seed = seed;
        }
        if let Some(tol) = self.tol {
            spec.solver.tol = tol;
        }
        if let Some(max_iter) = self.max_iter {
            spec.solver.max_iter = max_iter;
        }
        spec.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenvalue {
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    /// Trapezoidal quadrature along the simulated closed loop.
    pub quadrature: f64,
    pub quadrature_horizon: f64,
    /// `x0' P x0`.
    pub analytic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    /// `|K - K_ref|_F`.
    pub k_frobenius: f64,
    /// `|P - P_ref|_F`.
    pub p_frobenius: f64,
    /// `J - J_ref` from the analytic costs.
    pub cost_gap: f64,
    pub reference_cost: f64,
    pub reference_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub mode: Mode,
    pub seed: Option<u64>,
    pub converged: bool,
    pub iterations: usize,
    pub final_delta: Option<f64>,
    pub k: Vec<Vec<f64>>,
    pub p: Option<Vec<Vec<f64>>>,
    pub cost: CostReport,
    pub eigenvalues: Vec<Eigenvalue>,
    pub spectral_abscissa: f64,
    /// Largest `|K_ij|` outside the mask.
    pub max_violation: f64,
    pub bound: Option<BoundReport>,
    /// Same bound with `A - B R^-1 B^T P_bar` as the operator matrix.
    pub bound_closed_loop: Option<BoundReport>,
    pub vs_model_based: Option<Comparison>,
    pub vs_unstructured: Option<Comparison>,
    pub rank: Option<RankReport>,
}

/// A run's report plus the series written to CSV.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: RunReport,
    pub trajectory: Option<Trajectory>,
    pub history: Vec<IterationRecord>,
    pub gain: DMatrix<f64>,
    /// Labelled gains for `gains.csv`.
    pub gains: Vec<(String, DMatrix<f64>)>,
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Eigenvalue>> {
    let mut ev: Vec<Eigenvalue> = linalg::eigenvalues(m)?
        .into_iter()
        .map(|z| Eigenvalue { re: z.re, im: z.im })
        .collect();
    ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(ev)
}

fn cost_report(spec: &ScenarioSpec, sys: &LtiSystem, k: &DMatrix<f64>) -> Result<CostReport> {
    let w = spec.weights()?;
    let x0 = spec.x0();
    let quad = evaluate_cost(sys, &w, k, &x0, None, spec.dt)?;
    Ok(CostReport {
        quadrature: quad.value,
        quadrature_horizon: quad.horizon,
        analytic: evaluate_cost_analytic(sys, &w, k, &x0)?,
    })
}

fn compare(k: &DMatrix<f64>, p: &DMatrix<f64>, cost: f64, reference: &SynthesisResult, reference_cost: f64) -> Comparison {
    Comparison {
        k_frobenius: (k - &reference.k).norm(),
        p_frobenius: (p - &reference.p).norm(),
        cost_gap: cost - reference_cost,
        reference_cost,
        reference_iterations: reference.iterations,
    }
}

struct Baseline {
    result: SynthesisResult,
    cost: f64,
}

fn unstructured_baseline(spec: &ScenarioSpec, sys: &LtiSystem) -> Result<Baseline> {
    let w = spec.weights()?;
    let result = solve_unstructured_lqr(sys, &w, &spec.initial_gain()?, &BASELINE_SETTINGS)?;
    let cost = evaluate_cost_analytic(sys, &w, &result.k, &spec.x0())?;
    Ok(Baseline { result, cost })
}

fn bounds(
    spec: &ScenarioSpec,
    sys: &LtiSystem,
    result: &SynthesisResult,
    cost: f64,
    baseline: &Baseline,
) -> Result<(BoundReport, BoundReport)> {
    let w = spec.weights()?;
    let x0 = spec.x0();
    let stated = suboptimality_bound_with(sys, &w, &x0, cost, baseline.cost, &bound_operator(sys, &w))?
        .with_epsilon(&result.l, &w);
    let closed = bound_operator_closed_loop(sys, &w, &baseline.result.p);
    let closed = suboptimality_bound_with(sys, &w, &x0, cost, baseline.cost, &closed)?.with_epsilon(&result.l, &w);
    Ok((stated, closed))
}

struct Partial {
    result: SynthesisResult,
    trajectory: Option<Trajectory>,
    rank: Option<RankReport>,
}

fn finish(
    spec: &ScenarioSpec,
    mode: Mode,
    sys: &LtiSystem,
    run: Partial,
    model_based: Option<&SynthesisResult>,
) -> Result<RunOutput> {
    let mask = spec.mask()?;
    let k = run.result.k.clone();
    let cost = cost_report(spec, sys, &k)?;
    let closed = sys.closed_loop(&k)?;
    let eigenvalues = sorted_eigenvalues(&closed)?;
    let spectral_abscissa = eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let max_violation = mask.check_membership(&k, 0.0)?.max_violation;

    let baseline = unstructured_baseline(spec, sys)?;
    let strict = mode == Mode::Bound;
    let (bound, bound_closed_loop) = match bounds(spec, sys, &run.result, cost.analytic, &baseline) {
        Ok((a, b)) => (Some(a), Some(b)),
        Err(e) if strict => return Err(e),
        Err(_) => (None, None),
    };
    let w = spec.weights()?;
    let vs_model_based = match model_based {
        Some(mb) => {
            let mb_cost = evaluate_cost_analytic(sys, &w, &mb.k, &spec.x0())?;
            Some(compare(&k, &run.result.p, cost.analytic, mb, mb_cost))
        }
        None => None,
    };
    let vs_unstructured = Some(compare(&k, &run.result.p, cost.analytic, &baseline.result, baseline.cost));

    let mut gains = vec![(mode_label(mode).to_string(), k.clone())];
    if let Some(mb) = model_based {
        gains.push(("model-based".into(), mb.k.clone()));
    }
    gains.push(("unstructured".into(), baseline.result.k.clone()));

    let report = RunReport {
        scenario: spec.name.clone(),
        mode,
        seed: matches!(mode, Mode::Srl | Mode::Compare).then_some(spec.exploration.seed),
        converged: run.result.converged,
        iterations: run.result.iterations,
        final_delta: run.result.final_delta(),
        k: linalg::to_rows(&k),
        p: Some(linalg::to_rows(&run.result.p)),
        cost,
        eigenvalues,
        spectral_abscissa,
        max_violation,
        bound,
        bound_closed_loop,
        vs_model_based,
        vs_unstructured,
        rank: run.rank,
    };
    Ok(RunOutput {
        report,
        trajectory: run.trajectory,
        history: run.result.history,
        gain: k,
        gains,
    })
}

fn mode_label(mode: Mode) -> &'static str {
    match mode {
        Mode::Srl | Mode::Compare => "srl",
        _ => "model-based",
    }
}

fn model_based_result(spec: &ScenarioSpec, sys: &LtiSystem) -> Result<SynthesisResult> {
    kleinman_structured(sys, &spec.weights()?, &spec.mask()?, &spec.initial_gain()?, &spec.iteration())
}

fn closed_loop_trajectory(spec: &ScenarioSpec, sys: &LtiSystem, k: &DMatrix<f64>) -> Result<Trajectory> {
    simulate(sys, &InputPolicy::Feedback(k.clone()), &spec.x0(), spec.control_horizon, spec.dt)
}

/// Learning from one seeded exploration run, then `u = -Kx` with the probe removed.
fn srl_partial(spec: &ScenarioSpec, sys: &LtiSystem) -> Result<Partial> {
    let plant = SimulatedPlant::new(sys.clone()).with_substeps(spec.exploration.substeps);
    let probe = make_exploration(spec.exploration.seed, spec.input_dim(), &spec.exploration_config()?)?;
    let mut cfg = SrlConfig::new(spec.input_matrix()?, spec.weights()?, spec.mask()?, spec.initial_gain()?)?;
    cfg.iteration = spec.iteration();
    cfg.rank_tol = spec.solver.rank_tol;
    let outcome = learn(&plant, &spec.x0(), &probe, &spec.collect_config(), &cfg)?;
    let control = simulate(
        sys,
        &InputPolicy::Feedback(outcome.result.k.clone()),
        outcome.trajectory.final_state(),
        spec.control_horizon,
        spec.dt,
    )?;
    let trajectory = outcome.trajectory.concat(control)?;
    Ok(Partial {
        result: outcome.result,
        trajectory: Some(trajectory),
        rank: Some(outcome.rank),
    })
}

pub fn run_srl(spec: &ScenarioSpec) -> Result<RunOutput> {
    let sys = spec.system()?;
    let partial = srl_partial(spec, &sys)?;
    finish(spec, Mode::Srl, &sys, partial, None)
}

pub fn run_model_based(spec: &ScenarioSpec) -> Result<RunOutput> {
    let sys = spec.system()?;
    let result = model_based_result(spec, &sys)?;
    let trajectory = closed_loop_trajectory(spec, &sys, &result.k)?;
    let partial = Partial {
        result,
        trajectory: Some(trajectory),
        rank: None,
    };
    finish(spec, Mode::ModelBased, &sys, partial, None)
}

/// SRL against model-based structured and unstructured baselines from the same `K0`.
pub fn run_compare(spec: &ScenarioSpec) -> Result<RunOutput> {
    let sys = spec.system()?;
    let mb = model_based_result(spec, &sys)?;
    let partial = srl_partial(spec, &sys)?;
    finish(spec, Mode::Compare, &sys, partial, Some(&mb))
}

/// Model-based structured solution with the bound reported strictly.
pub fn run_bound(spec: &ScenarioSpec) -> Result<RunOutput> {
    let sys = spec.system()?;
    let result = model_based_result(spec, &sys)?;
    let partial = Partial {
        result,
        trajectory: None,
        rank: None,
    };
    finish(spec, Mode::Bound, &sys, partial, None)
}

/// Closed loop under the scenario's `K0`, no synthesis.
pub fn run_simulate(spec: &ScenarioSpec) -> Result<RunOutput> {
    let sys = spec.system()?;
    let k0 = spec.initial_gain()?;
    let trajectory = closed_loop_trajectory(spec, &sys, &k0)?;
    let closed = sys.closed_loop(&k0)?;
    let eigenvalues = sorted_eigenvalues(&closed)?;
    let spectral_abscissa = eigenvalues.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
    let cost = if spectral_abscissa < 0.0 {
        cost_report(spec, &sys, &k0)?
    } else {
        CostReport {
            quadrature: f64::INFINITY,
            quadrature_horizon: spec.control_horizon,
            analytic: f64::INFINITY,
        }
    };
    let report = RunReport {
        scenario: spec.name.clone(),
        mode: Mode::Simulate,
        seed: None,
        converged: true,
        iterations: 0,
        final_delta: None,
        k: linalg::to_rows(&k0),
        p: None,
        cost,
        eigenvalues,
        spectral_abscissa,
        max_violation: spec.mask()?.check_membership(&k0, 0.0)?.max_violation,
        bound: None,
        bound_closed_loop: None,
        vs_model_based: None,
        vs_unstructured: None,
        rank: None,
    };
    Ok(RunOutput {
        report,
        trajectory: Some(trajectory),
        history: Vec::new(),
        gain: k0.clone(),
        gains: vec![("initial".into(), k0)],
    })
}

pub fn run(spec: &ScenarioSpec, mode: Mode) -> Result<RunOutput> {
    match mode {
        Mode::Srl => run_srl(spec),
        Mode::ModelBased => run_model_based(spec),
        Mode::Compare => run_compare(spec),
        Mode::Bound => run_bound(spec),
        Mode::Simulate => run_simulate(spec),
    }
}

/// Runs each scenario, on its own thread when `parallel` is set. Results
/// keep the input order.
pub fn run_batch(specs: &[ScenarioSpec], mode: Mode, parallel: bool) -> Vec<Result<RunOutput>> {
    if !parallel {
        return specs.iter().map(|s| run(s, mode)).collect();
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = specs.iter().map(|s| scope.spawn(move || run(s, mode))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Scenario("worker thread panicked".into()))))
            .collect()
    })
}

/// Process exit status for a failed run.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::RankDeficient { .. } | Error::InsufficientData { .. } => 2,
        Error::Divergence { .. } | Error::DestabilizingIterate { .. } | Error::NotHurwitz { .. } => 3,
        Error::NotConverged { .. } => 4,
        _ => 1,
    }
}
