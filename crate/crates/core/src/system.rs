//! Continuous-time LTI plants `x' = Ax + Bu`, trajectory integration and
//! quadratic cost evaluation.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::learning::ExplorationSignal;
use crate::linalg;
use crate::model_based::solve_lyapunov;

/// Default recorded sample step, seconds.
pub const DEFAULT_DT: f64 = 0.01;
/// Default number of RK4 substeps per recorded sample.
pub const DEFAULT_SUBSTEPS: usize = 10;
/// Cost horizon cap for the automatic decay criterion, seconds.
pub const COST_HORIZON_CAP: f64 = 50.0;
/// Relative state norm at which a cost integration is considered complete.
pub const COST_DECAY_RATIO: f64 = 1e-6;

const DIVERGENCE_NORM: f64 = 1e100;

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LtiSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || !a.is_square() {
            return Err(Error::Dimension(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "B must be {n}xm with m >= 1, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("A and B must be finite".into()));
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `A - BK`.
    pub fn closed_loop(&self, gain: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        linalg::check_shape("K", gain, self.input_dim(), self.state_dim())?;
        Ok(&self.a - &self.b * gain)
    }

    /// PBH test: every eigenvalue with non-negative real part must satisfy
    /// `rank [A - lambda I, B] = n`.
    pub fn stabilizability(&self) -> Result<StabilizabilityReport> {
        let n = self.state_dim();
        let m = self.input_dim();
        let scale = linalg::max_abs(&self.a).max(linalg::max_abs(&self.b)).max(1.0);
        let mut uncontrollable = Vec::new();
        for lambda in linalg::eigenvalues(&self.a)? {
            if lambda.re < -1e-9 * scale {
                continue;
            }
            let pencil = DMatrix::<Complex<f64>>::from_fn(n, n + m, |i, j| {
                if j < n {
                    let diag = if i == j { lambda } else { Complex::new(0.0, 0.0) };
                    Complex::new(self.a[(i, j)], 0.0) - diag
                } else {
                    Complex::new(self.b[(i, j - n)], 0.0)
                }
            });
            let sv = pencil.svd(false, false).singular_values;
            let smax = sv.max();
            let rank = sv.iter().filter(|s| **s > 1e-9 * smax.max(1e-300)).count();
            if rank < n {
                uncontrollable.push(lambda);
            }
        }
        Ok(StabilizabilityReport {
            stabilizable: uncontrollable.is_empty(),
            uncontrollable_modes: uncontrollable,
        })
    }
}

#[derive(Debug, Clone)]
pub struct StabilizabilityReport {
    pub stabilizable: bool,
    /// Eigenvalues in the closed right half-plane that fail the PBH rank test.
    pub uncontrollable_modes: Vec<Complex<f64>>,
}

/// State and input weights of `integral(x'Qx + u'Ru)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostWeights {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    r_inv: DMatrix<f64>,
}

impl CostWeights {
    pub fn new(q: DMatrix<f64>, r: DMatrix<f64>) -> Result<Self> {
        if !q.is_square() || q.is_empty() || !r.is_square() || r.is_empty() {
            return Err(Error::Dimension("Q and R must be square and non-empty".into()));
        }
        if q.iter().chain(r.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("Q and R must be finite".into()));
        }
        for (name, w) in [("Q", &q), ("R", &r)] {
            let tol = 1e-12 * linalg::max_abs(w).max(1.0);
            if linalg::asymmetry(w) > tol {
                return Err(Error::InvalidArgument(format!("{name} is not symmetric")));
            }
        }
        let q = linalg::symmetrize(&q);
        let r = linalg::symmetrize(&r);
        let q_min = q.clone().symmetric_eigenvalues().min();
        if q_min < -1e-12 * linalg::max_abs(&q).max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "Q is not positive semidefinite (min eigenvalue {q_min:e})"
            )));
        }
        let r_min = r.clone().symmetric_eigenvalues().min();
        if r_min <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "R is not positive definite (min eigenvalue {r_min:e})"
            )));
        }
        let r_inv = r
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Singular("R".into()))?
            .inverse();
        Ok(Self { q, r, r_inv })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn r_inv(&self) -> &DMatrix<f64> {
        &self.r_inv
    }

    pub fn state_dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.r.nrows()
    }

    /// `x'Qx + u'Ru`.
    pub fn stage_cost(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        x.dot(&(&self.q * x)) + u.dot(&(&self.r * u))
    }

    pub(crate) fn check_against(&self, sys: &LtiSystem) -> Result<()> {
        if self.state_dim() != sys.state_dim() || self.input_dim() != sys.input_dim() {
            return Err(Error::Dimension(format!(
                "weights are {}/{} but system has n={}, m={}",
                self.state_dim(),
                self.input_dim(),
                sys.state_dim(),
                sys.input_dim()
            )));
        }
        Ok(())
    }
}

/// Integrals of `x x^T` and `x u^T` over one recorded step, accumulated
/// alongside the RK4 state update.
#[derive(Debug, Clone, PartialEq)]
pub struct StepIntegral {
    pub xx: DMatrix<f64>,
    pub xu: DMatrix<f64>,
}

/// Uniformly sampled state/input record. `inputs[k]` is the input at
/// `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dt: f64,
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    inputs: Vec<DVector<f64>>,
    step_integrals: Option<Vec<StepIntegral>>,
}

impl Trajectory {
    pub fn new(times: Vec<f64>, states: Vec<DVector<f64>>, inputs: Vec<DVector<f64>>) -> Result<Self> {
        if times.is_empty() || times.len() != states.len() || times.len() != inputs.len() {
            return Err(Error::Dimension(format!(
                "trajectory lengths differ: {} times, {} states, {} inputs",
                times.len(),
                states.len(),
                inputs.len()
            )));
        }
        let dt = if times.len() > 1 { times[1] - times[0] } else { 0.0 };
        for w in times.windows(2) {
            let step = w[1] - w[0];
            if step <= 0.0 {
                return Err(Error::InvalidArgument("times must be strictly increasing".into()));
            }
            if (step - dt).abs() > 1e-12 * dt.abs().max(w[1].abs()) {
                return Err(Error::InvalidArgument("trajectory step is not uniform".into()));
            }
        }
        let (n, m) = (states[0].len(), inputs[0].len());
        if states.iter().any(|x| x.len() != n) || inputs.iter().any(|u| u.len() != m) {
            return Err(Error::Dimension("inconsistent state or input length".into()));
        }
        Ok(Self {
            dt,
            times,
            states,
            inputs,
            step_integrals: None,
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn state_dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory is never empty")
    }

    /// Per-step integrals, present when the trajectory was simulated with
    /// [`SimOptions::record_integrals`].
    pub fn step_integrals(&self) -> Option<&[StepIntegral]> {
        self.step_integrals.as_deref()
    }

    /// Largest state norm along the record; the boundedness diagnostic for
    /// marginally stable exploration runs.
    pub fn peak_state_norm(&self) -> f64 {
        self.states.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Appends `other`, shifting its clock so it starts where `self` ends.
    /// The first sample of `other` replaces the last sample of `self`.
    pub fn concat(mut self, other: Trajectory) -> Result<Self> {
        if other.state_dim() != self.state_dim() || other.input_dim() != self.input_dim() {
            return Err(Error::Dimension("cannot concatenate trajectories of different size".into()));
        }
        let steps = self.times.len() - 1;
        let dt = if self.dt > 0.0 { self.dt } else { other.dt };
        self.times.pop();
        self.states.pop();
        self.inputs.pop();
        for (k, (x, u)) in other.states.into_iter().zip(other.inputs).enumerate() {
            self.times.push((steps + k) as f64 * dt);
            self.states.push(x);
            self.inputs.push(u);
        }
        self.dt = dt;
        self.step_integrals = None;
        Ok(self)
    }
}

/// Input law `u(t, x)` applied during simulation.
#[derive(Debug, Clone)]
pub enum InputPolicy {
    Zero,
    /// `u = -Kx`
    Feedback(DMatrix<f64>),
    /// `u = u0(t)`
    Probe(ExplorationSignal),
    /// `u = -Kx + u0(t)`
    FeedbackProbe {
        gain: DMatrix<f64>,
        probe: ExplorationSignal,
    },
}

impl InputPolicy {
    pub fn gain(&self) -> Option<&DMatrix<f64>> {
        match self {
            InputPolicy::Feedback(k) | InputPolicy::FeedbackProbe { gain: k, .. } => Some(k),
            _ => None,
        }
    }

    pub fn probe(&self) -> Option<&ExplorationSignal> {
        match self {
            InputPolicy::Probe(p) | InputPolicy::FeedbackProbe { probe: p, .. } => Some(p),
            _ => None,
        }
    }

    fn validate(&self, n: usize, m: usize) -> Result<()> {
        if let Some(k) = self.gain() {
            linalg::check_shape("feedback gain", k, m, n)?;
        }
        if let Some(p) = self.probe() {
            if p.channels() != m {
                return Err(Error::Dimension(format!(
                    "probe has {} channels, system has {m} inputs",
                    p.channels()
                )));
            }
        }
        Ok(())
    }

    fn probe_at(&self, t: f64, m: usize) -> DVector<f64> {
        self.probe().map_or_else(|| DVector::zeros(m), |p| p.value(t))
    }

    fn input(&self, x: &DVector<f64>, probe: &DVector<f64>) -> DVector<f64> {
        match self.gain() {
            Some(k) => probe - k * x,
            None => probe.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// RK4 substeps per recorded sample.
    pub substeps: usize,
    /// Accumulate per-step integrals of `x x^T` and `x u^T`.
    pub record_integrals: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            substeps: DEFAULT_SUBSTEPS,
            record_integrals: false,
        }
    }
}

pub(crate) fn step_count(horizon: f64, dt: f64) -> usize {
    (horizon / dt + 1e-9).floor() as usize
}

struct Stepper<'a> {
    sys: &'a LtiSystem,
    policy: &'a InputPolicy,
    substeps: usize,
    dt: f64,
}

impl Stepper<'_> {
    fn deriv(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.sys.a() * x + self.sys.b() * u
    }

    /// Advances one recorded step from `(t0, x)`. The probe is held over each
    /// substep at its value at the substep start.
    fn step(&self, t0: f64, x: &DVector<f64>, integral: Option<&mut StepIntegral>) -> Result<DVector<f64>> {
        let m = self.sys.input_dim();
        let h = self.dt / self.substeps as f64;
        let mut x = x.clone();
        let mut acc = integral;
        for s in 0..self.substeps {
            let t = t0 + s as f64 * h;
            let p = self.policy.probe_at(t, m);
            let x1 = x.clone();
            let u1 = self.policy.input(&x1, &p);
            let k1 = self.deriv(&x1, &u1);
            let x2 = &x + &k1 * (h / 2.0);
            let u2 = self.policy.input(&x2, &p);
            let k2 = self.deriv(&x2, &u2);
            let x3 = &x + &k2 * (h / 2.0);
            let u3 = self.policy.input(&x3, &p);
            let k3 = self.deriv(&x3, &u3);
            let x4 = &x + &k3 * h;
            let u4 = self.policy.input(&x4, &p);
            let k4 = self.deriv(&x4, &u4);
            if let Some(acc) = acc.as_deref_mut() {
                let w = h / 6.0;
                acc.xx += (&x1 * x1.transpose() + (&x2 * x2.transpose()) * 2.0
                    + (&x3 * x3.transpose()) * 2.0
                    + &x4 * x4.transpose())
                    * w;
                acc.xu += (&x1 * u1.transpose() + (&x2 * u2.transpose()) * 2.0
                    + (&x3 * u3.transpose()) * 2.0
                    + &x4 * u4.transpose())
                    * w;
            }
            x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let norm = x.norm();
            if !norm.is_finite() || norm > DIVERGENCE_NORM {
                return Err(Error::Divergence { time: t + h });
            }
        }
        Ok(x)
    }
}

fn validate_sim(sys: &LtiSystem, policy: &InputPolicy, x0: &DVector<f64>, horizon: f64, dt: f64) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if !(horizon.is_finite() && horizon >= dt * (1.0 - 1e-9)) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} is shorter than dt {dt}")));
    }
    if x0.len() != sys.state_dim() {
        return Err(Error::Dimension(format!(
            "x0 has length {}, system has n = {}",
            x0.len(),
            sys.state_dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("x0 must be finite".into()));
    }
    policy.validate(sys.state_dim(), sys.input_dim())
}

/// Integrates the plant with fixed-step RK4 and default options.
pub fn simulate(
    sys: &LtiSystem,
    policy: &InputPolicy,
    x0: &DVector<f64>,
    horizon: f64,
    dt: f64,
) -> Result<Trajectory> {
    simulate_with(sys, policy, x0, horizon, dt, &SimOptions::default())
}

/// Integrates the plant, recording `floor(horizon/dt) + 1` samples.
pub fn simulate_with(
    sys: &LtiSystem,
    policy: &InputPolicy,
    x0: &DVector<f64>,
    horizon: f64,
    dt: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    validate_sim(sys, policy, x0, horizon, dt)?;
    if opts.substeps == 0 {
        return Err(Error::InvalidArgument("substeps must be at least 1".into()));
    }
    let (n, m) = (sys.state_dim(), sys.input_dim());
    let stepper = Stepper {
        sys,
        policy,
        substeps: opts.substeps,
        dt,
    };
    let steps = step_count(horizon, dt);
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut inputs = Vec::with_capacity(steps + 1);
    let mut integrals = opts.record_integrals.then(|| Vec::with_capacity(steps));

    let mut x = x0.clone();
    for k in 0..=steps {
        let t = k as f64 * dt;
        let u = policy.input(&x, &policy.probe_at(t, m));
        times.push(t);
        states.push(x.clone());
        inputs.push(u);
        if k == steps {
            break;
        }
        x = match integrals.as_mut() {
            Some(list) => {
                let mut acc = StepIntegral {
                    xx: DMatrix::zeros(n, n),
                    xu: DMatrix::zeros(n, m),
                };
                let next = stepper.step(t, &x, Some(&mut acc))?;
                list.push(acc);
                next
            }
            None => stepper.step(t, &x, None)?,
        };
    }
    Ok(Trajectory {
        dt,
        times,
        states,
        inputs,
        step_integrals: integrals,
    })
}

/// Max real part over the eigenvalues of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    Ok(linalg::eigenvalues(m)?
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Relative round-off threshold: an abscissa within `HURWITZ_TOL * (1 + |M|_F)`
/// of zero counts as zero.
pub const HURWITZ_TOL: f64 = 1e-10;

/// Spectral abscissa and whether `m` is Hurwitz beyond round-off.
pub fn stable_abscissa(m: &DMatrix<f64>) -> Result<(f64, bool)> {
    let abscissa = spectral_abscissa(m)?;
    Ok((abscissa, abscissa < -HURWITZ_TOL * (1.0 + m.norm())))
}

/// `spectral_abscissa(m) < -margin`; `margin = 0` is the strict test.
pub fn is_hurwitz(m: &DMatrix<f64>, margin: f64) -> Result<bool> {
    Ok(spectral_abscissa(m)? < -margin)
}

fn require_stable_loop(sys: &LtiSystem, gain: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let closed = sys.closed_loop(gain)?;
    let (abscissa, stable) = stable_abscissa(&closed)?;
    if !stable {
        return Err(Error::NotHurwitz { abscissa });
    }
    Ok(closed)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostEstimate {
    pub value: f64,
    /// Integration horizon actually used, seconds.
    pub horizon: f64,
    /// `|x(horizon)| / |x0|`.
    pub final_ratio: f64,
    /// The state had not decayed below the tolerance at the horizon.
    pub truncated: bool,
}

/// Trapezoidal quadrature of `x'Qx + u'Ru` along the closed loop `u = -Kx`,
/// taken on the integrator's substep grid `dt / DEFAULT_SUBSTEPS`.
///
/// With `horizon = None` integration runs until `|x| <= 1e-6 |x0|` or the
/// 50 s cap.
pub fn evaluate_cost(
    sys: &LtiSystem,
    weights: &CostWeights,
    gain: &DMatrix<f64>,
    x0: &DVector<f64>,
    horizon: Option<f64>,
    dt: f64,
) -> Result<CostEstimate> {
    weights.check_against(sys)?;
    require_stable_loop(sys, gain)?;
    let policy = InputPolicy::Feedback(gain.clone());
    let limit = horizon.unwrap_or(COST_HORIZON_CAP);
    validate_sim(sys, &policy, x0, limit, dt)?;
    // Trapezoid on the RK4 substep grid, not just the recorded samples.
    let h = dt / DEFAULT_SUBSTEPS as f64;
    let stepper = Stepper {
        sys,
        policy: &policy,
        substeps: 1,
        dt: h,
    };
    let x0_norm = x0.norm();
    if x0_norm == 0.0 {
        return Ok(CostEstimate {
            value: 0.0,
            horizon: 0.0,
            final_ratio: 0.0,
            truncated: false,
        });
    }
    let m = sys.input_dim();
    let stage = |x: &DVector<f64>| weights.stage_cost(x, &policy.input(x, &DVector::zeros(m)));
    let steps = step_count(limit, dt);
    let mut x = x0.clone();
    let mut prev = stage(&x);
    let mut total = 0.0;
    let mut t = 0.0;
    for k in 0..steps {
        for j in 0..DEFAULT_SUBSTEPS {
            x = stepper.step(k as f64 * dt + j as f64 * h, &x, None)?;
            let cur = stage(&x);
            total += 0.5 * h * (prev + cur);
            prev = cur;
        }
        t = (k + 1) as f64 * dt;
        if horizon.is_none() && x.norm() <= COST_DECAY_RATIO * x0_norm {
            break;
        }
    }
    let final_ratio = x.norm() / x0_norm;
    Ok(CostEstimate {
        value: total,
        horizon: t,
        final_ratio,
        truncated: final_ratio > COST_DECAY_RATIO,
    })
}

/// `x0' P x0` where `(A-BK)'P + P(A-BK) + Q + K'RK = 0`.
pub fn evaluate_cost_analytic(
    sys: &LtiSystem,
    weights: &CostWeights,
    gain: &DMatrix<f64>,
    x0: &DVector<f64>,
) -> Result<f64> {
    weights.check_against(sys)?;
    if x0.len() != sys.state_dim() {
        return Err(Error::Dimension("x0 does not match the state dimension".into()));
    }
    let closed = require_stable_loop(sys, gain)?;
    let load = weights.q() + gain.transpose() * weights.r() * gain;
    let p = solve_lyapunov(&closed, &linalg::symmetrize(&load))?;
    Ok(x0.dot(&(&p * x0)))
}
