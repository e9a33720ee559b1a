//! Model-based synthesis: Lyapunov solves, the masked Kleinman iteration,
//! the modified Riccati residual and the structured-vs-unstructured cost
//! bound.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::structure::{unstructured_gain, SparsityMask};
use crate::system::{stable_abscissa, CostWeights, LtiSystem};

/// Stopping rule shared by the model-based and data-driven iterations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationSettings {
    /// Threshold on `|P_k - P_{k-1}|_F`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for IterationSettings {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 50,
        }
    }
}

impl IterationSettings {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidArgument(format!(
                "need tol > 0 and max_iter >= 1, got tol = {}, max_iter = {}",
                self.tol, self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Gain `K_k` whose value was evaluated in this iteration.
    pub gain: DMatrix<f64>,
    /// Value matrix `P_k`.
    pub value: DMatrix<f64>,
    /// `|P_k - P_{k-1}|_F`, absent on the first iteration.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    /// Converged value matrix.
    pub p: DMatrix<f64>,
    /// Structured gain, exactly zero off the mask.
    pub k: DMatrix<f64>,
    /// Deviation `L = R^-1 B^T P - K`.
    pub l: DMatrix<f64>,
    /// Number of value evaluations performed.
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
}

impl SynthesisResult {
    pub fn final_delta(&self) -> Option<f64> {
        self.history.last().and_then(|r| r.delta)
    }
}

/// Solves `M^T P + P M + S = 0` for Hurwitz `M` by dense vectorization.
pub fn solve_lyapunov(m: &DMatrix<f64>, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    linalg::check_shape("M", m, n, n)?;
    linalg::check_shape("S", s, n, n)?;
    if linalg::asymmetry(s) > 1e-8 * linalg::max_abs(s).max(1.0) {
        return Err(Error::InvalidArgument("S must be symmetric".into()));
    }
    let (abscissa, stable) = stable_abscissa(m)?;
    if !stable {
        return Err(Error::NotHurwitz { abscissa });
    }
    let s = linalg::symmetrize(s);
    let op = linalg::lyapunov_operator(m);
    let lu = op.clone().full_piv_lu();
    let rhs = -DVector::from_column_slice(s.as_slice());
    let mut sol = lu
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("Lyapunov operator".into()))?;
    let target = 1e-9 * (1.0 + s.norm());
    let residual = |p: &DMatrix<f64>| m.transpose() * p + p * m + &s;
    let mut p = linalg::symmetrize(&DMatrix::from_column_slice(n, n, sol.as_slice()));
    // a couple of refinement sweeps recover accuracy on poorly scaled M
    for _ in 0..3 {
        let res = residual(&p);
        if res.norm() <= target {
            break;
        }
        let corr = lu
            .solve(&-DVector::from_column_slice(res.as_slice()))
            .ok_or_else(|| Error::Singular("Lyapunov operator".into()))?;
        sol += corr;
        p = linalg::symmetrize(&DMatrix::from_column_slice(n, n, sol.as_slice()));
    }
    Ok(p)
}

/// `|A^T P + P A - P B R^-1 B^T P + Q + L^T R L|_F`.
pub fn modified_are_residual(
    p: &DMatrix<f64>,
    l: &DMatrix<f64>,
    sys: &LtiSystem,
    weights: &CostWeights,
) -> Result<f64> {
    let (n, m) = (sys.state_dim(), sys.input_dim());
    weights.check_against(sys)?;
    linalg::check_shape("P", p, n, n)?;
    linalg::check_shape("L", l, m, n)?;
    let a = sys.a();
    let b = sys.b();
    let res = a.transpose() * p + p * a - p * b * weights.r_inv() * b.transpose() * p
        + weights.q()
        + l.transpose() * weights.r() * l;
    Ok(res.norm())
}

/// Masked Kleinman iteration.
///
/// Each step solves `(A-BK_k)^T P_k + P_k (A-BK_k) + Q + K_k^T R K_k = 0`,
/// then sets `K_{k+1} = R^-1 B^T P_k o I_K`. Stops once
/// `|P_k - P_{k-1}|_F < tol`. A destabilizing update aborts the run.
pub fn kleinman_structured(
    sys: &LtiSystem,
    weights: &CostWeights,
    mask: &SparsityMask,
    k0: &DMatrix<f64>,
    settings: &IterationSettings,
) -> Result<SynthesisResult> {
    settings.validate()?;
    weights.check_against(sys)?;
    let (n, m) = (sys.state_dim(), sys.input_dim());
    if mask.rows() != m || mask.cols() != n {
        return Err(Error::Dimension(format!(
            "mask is {}x{}, gains are {m}x{n}",
            mask.rows(),
            mask.cols()
        )));
    }
    let (abscissa, stable) = stable_abscissa(&sys.closed_loop(k0)?)?;
    if !stable {
        return Err(Error::NotStabilizing { abscissa });
    }

    let mut gain = k0.clone();
    let mut prev: Option<DMatrix<f64>> = None;
    let mut history = Vec::new();
    let mut last_delta = f64::INFINITY;
    for iteration in 1..=settings.max_iter {
        let closed = sys.closed_loop(&gain)?;
        let load = weights.q() + gain.transpose() * weights.r() * &gain;
        let p = solve_lyapunov(&closed, &linalg::symmetrize(&load))?;
        let delta = prev.as_ref().map(|pp| (&p - pp).norm());
        let phi = unstructured_gain(&p, sys.b(), weights);
        let next = mask.restrict(&phi)?;
        history.push(IterationRecord {
            iteration,
            gain: gain.clone(),
            value: p.clone(),
            delta,
        });

        let (abscissa, stable) = stable_abscissa(&sys.closed_loop(&next)?)?;
        if !stable {
            return Err(Error::DestabilizingIterate { iteration, abscissa });
        }
        if let Some(d) = delta {
            last_delta = d;
            if d < settings.tol {
                let l = &phi - &next;
                return Ok(SynthesisResult {
                    p,
                    k: next,
                    l,
                    iterations: iteration,
                    history,
                    converged: true,
                });
            }
        }
        gain = next;
        prev = Some(p);
    }
    Err(Error::NotConverged {
        iterations: settings.max_iter,
        last_delta,
    })
}

/// Classical Kleinman iteration: the structured one with every entry allowed.
pub fn solve_unstructured_lqr(
    sys: &LtiSystem,
    weights: &CostWeights,
    k0: &DMatrix<f64>,
    settings: &IterationSettings,
) -> Result<SynthesisResult> {
    let mask = SparsityMask::full(sys.input_dim(), sys.state_dim());
    kleinman_structured(sys, weights, &mask, k0, settings)
}

/// Finds a structured stabilizing starting gain: `K0 = 0` when `A` is
/// Hurwitz, otherwise `c * (R^-1 B^T o I_K)` for `c` in `{0.1, 1, 10}`.
pub fn initial_stabilizing_gain(
    sys: &LtiSystem,
    weights: &CostWeights,
    mask: &SparsityMask,
) -> Result<DMatrix<f64>> {
    weights.check_against(sys)?;
    let (n, m) = (sys.state_dim(), sys.input_dim());
    let zero = DMatrix::zeros(m, n);
    if stable_abscissa(sys.a())?.1 {
        return Ok(zero);
    }
    let base = mask.restrict(&(weights.r_inv() * sys.b().transpose()))?;
    let mut best = f64::INFINITY;
    for c in [0.1, 1.0, 10.0] {
        let k = &base * c;
        let (abscissa, stable) = stable_abscissa(&sys.closed_loop(&k)?)?;
        if stable {
            return Ok(k);
        }
        best = best.min(abscissa);
    }
    Err(Error::NotStabilizing { abscissa: best })
}

/// Structured-vs-unstructured optimal cost bound `|J - J_bar| <= l/(2g) |x0 (x) x0|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    /// `|B R^-1 B^T|_2`.
    pub g: f64,
    /// `1 / |V^-1|_2`.
    pub l: f64,
    /// `|x0 (x) x0|_2`.
    pub x0_kron_norm: f64,
    pub bound: f64,
    pub gap: f64,
    pub within_bound: bool,
    /// `gap / bound`.
    pub ratio: f64,
    /// `|L^T R L|_2 / l`, filled by [`BoundReport::with_epsilon`].
    pub epsilon: Option<f64>,
}

impl BoundReport {
    pub fn with_epsilon(mut self, deviation: &DMatrix<f64>, weights: &CostWeights) -> Self {
        let lrl = deviation.transpose() * weights.r() * deviation;
        self.epsilon = Some(linalg::spectral_norm(&lrl) / self.l);
        self
    }
}

/// `A - B R^-1 B^T`, the operator matrix used by [`suboptimality_bound`].
pub fn bound_operator(sys: &LtiSystem, weights: &CostWeights) -> DMatrix<f64> {
    sys.a() - sys.b() * weights.r_inv() * sys.b().transpose()
}

/// Closed-loop variant `A - B R^-1 B^T P_bar`, for side-by-side comparison.
pub fn bound_operator_closed_loop(sys: &LtiSystem, weights: &CostWeights, p_bar: &DMatrix<f64>) -> DMatrix<f64> {
    sys.a() - sys.b() * weights.r_inv() * sys.b().transpose() * p_bar
}

pub fn suboptimality_bound(
    sys: &LtiSystem,
    weights: &CostWeights,
    x0: &DVector<f64>,
    j: f64,
    j_bar: f64,
) -> Result<BoundReport> {
    let op = bound_operator(sys, weights);
    suboptimality_bound_with(sys, weights, x0, j, j_bar, &op)
}

/// Bound with an explicit operator matrix `M_V` defining `V W = M_V^T W + W M_V`.
pub fn suboptimality_bound_with(
    sys: &LtiSystem,
    weights: &CostWeights,
    x0: &DVector<f64>,
    j: f64,
    j_bar: f64,
    operator: &DMatrix<f64>,
) -> Result<BoundReport> {
    weights.check_against(sys)?;
    let n = sys.state_dim();
    linalg::check_shape("bound operator", operator, n, n)?;
    if x0.len() != n {
        return Err(Error::Dimension("x0 does not match the state dimension".into()));
    }
    let g = linalg::spectral_norm(&(sys.b() * weights.r_inv() * sys.b().transpose()));
    if g == 0.0 {
        return Err(Error::InvalidArgument("B R^-1 B^T vanishes; the bound is undefined".into()));
    }
    let v = linalg::lyapunov_operator(operator);
    let sv = v.clone().svd(false, false).singular_values;
    if sv.min() <= 1e-13 * sv.max() {
        return Err(Error::Singular(
            "bound operator V (two eigenvalues of its matrix sum to zero)".into(),
        ));
    }
    let v_inv = v
        .try_inverse()
        .ok_or_else(|| Error::Singular("bound operator V".into()))?;
    let l = 1.0 / linalg::spectral_norm(&v_inv);
    let x0m = DMatrix::from_column_slice(n, 1, x0.as_slice());
    let x0_kron_norm = x0m.kronecker(&x0m).norm();
    let bound = l / (2.0 * g) * x0_kron_norm;
    let gap = (j - j_bar).abs();
    Ok(BoundReport {
        g,
        l,
        x0_kron_norm,
        bound,
        gap,
        within_bound: gap <= bound,
        ratio: gap / bound,
        epsilon: None,
    })
}
