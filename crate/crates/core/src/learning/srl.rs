use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model_based::{IterationRecord, IterationSettings, SynthesisResult};
use crate::structure::{unstructured_gain, SparsityMask};
use crate::system::{CostWeights, InputPolicy, Trajectory};

use super::data::{check_rank, collect, numerical_rank, required_samples, CollectConfig, DataMatrices, RankReport};
use super::exploration::ExplorationSignal;
use super::plant::Plant;

/// Relative singular-value cutoff for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

/// Everything the learner is allowed to know: `B`, the weights, the mask
/// and a starting gain. No state matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SrlConfig {
    pub input_matrix: DMatrix<f64>,
    pub weights: CostWeights,
    pub mask: SparsityMask,
    pub initial_gain: DMatrix<f64>,
    pub iteration: IterationSettings,
    pub rank_tol: f64,
}

impl SrlConfig {
    pub fn new(
        input_matrix: DMatrix<f64>,
        weights: CostWeights,
        mask: SparsityMask,
        initial_gain: DMatrix<f64>,
    ) -> Result<Self> {
        let cfg = Self {
            input_matrix,
            weights,
            mask,
            initial_gain,
            iteration: IterationSettings::default(),
            rank_tol: DEFAULT_RANK_TOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn state_dim(&self) -> usize {
        self.input_matrix.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.input_matrix.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.state_dim(), self.input_dim());
        if self.weights.state_dim() != n || self.weights.input_dim() != m {
            return Err(Error::Dimension("weights do not match B".into()));
        }
        if self.mask.rows() != m || self.mask.cols() != n {
            return Err(Error::Dimension(format!("mask must be {m}x{n}")));
        }
        linalg::check_shape("K0", &self.initial_gain, m, n)?;
        if !(self.rank_tol >= 0.0) {
            return Err(Error::InvalidArgument("rank tolerance must be non-negative".into()));
        }
        self.iteration.validate()
    }

    fn check_data(&self, d: &DataMatrices) -> Result<()> {
        if d.n != self.state_dim() || d.m != self.input_dim() {
            return Err(Error::Dimension(format!(
                "data is for n={}, m={}, config for n={}, m={}",
                d.n,
                d.m,
                self.state_dim(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

fn half_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect()
}

/// Regression `Theta [vech(P); vec(M)] = Phi` for the current gain.
///
/// Row `i` encodes
/// `x'Px|_{t_i}^{t_i+T} - 2 int (K x + u)' R M x = -int x' (Q + K'RK) x`.
/// `P` enters through its upper triangle; off-diagonal columns fold the
/// `P_ab` and `P_ba` contributions. `M` unknowns are row-major.
pub(crate) fn regression(
    d: &DataMatrices,
    gain: &DMatrix<f64>,
    r: &DMatrix<f64>,
    load: &DMatrix<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let (n, m) = (d.n, d.m);
    let pairs = half_pairs(n);
    let half = pairs.len();
    let mut theta = DMatrix::zeros(d.rows(), half + m * n);
    let mut phi = DVector::zeros(d.rows());
    for i in 0..d.rows() {
        let s = d.sxx_block(i);
        let txx = d.txx_block(i);
        let txu = d.txu_block(i);
        for (c, &(a, b)) in pairs.iter().enumerate() {
            theta[(i, c)] = if a == b { s[(a, a)] } else { s[(a, b)] + s[(b, a)] };
        }
        let coupling = r * (gain * &txx + txu.transpose());
        for c in 0..m {
            for j in 0..n {
                theta[(i, half + c * n + j)] = -2.0 * coupling[(c, j)];
            }
        }
        phi[i] = -load.component_mul(&txx).sum();
    }
    (theta, phi)
}

/// Normalizes every non-zero column to unit 2-norm; returns the scales.
pub(crate) fn scale_columns(theta: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut scaled = theta.clone();
    let mut scales = Vec::with_capacity(theta.ncols());
    for mut col in scaled.column_iter_mut() {
        let norm = col.norm();
        let s = if norm > 0.0 { 1.0 / norm } else { 1.0 };
        col *= s;
        scales.push(s);
    }
    (scaled, scales)
}

/// One policy-evaluation step from data: returns `(P_k, M_k)` with
/// `M_k = K_{k+1} + F_k`.
pub fn solve_iteration(
    d: &DataMatrices,
    gain: &DMatrix<f64>,
    cfg: &SrlConfig,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    cfg.check_data(d)?;
    let (n, m) = (d.n, d.m);
    linalg::check_shape("K_k", gain, m, n)?;
    let r = cfg.weights.r();
    let load = cfg.weights.q() + gain.transpose() * r * gain;
    let (theta, phi) = regression(d, gain, r, &load);
    let unknowns = theta.ncols();
    if theta.nrows() < unknowns {
        return Err(Error::RankDeficient {
            rank: theta.nrows(),
            unknowns,
            deficiency: unknowns - theta.nrows(),
        });
    }
    let (scaled, scales) = scale_columns(&theta);
    let svd = scaled.svd(true, true);
    let rank = numerical_rank(&svd.singular_values, cfg.rank_tol);
    if rank < unknowns {
        return Err(Error::RankDeficient {
            rank,
            unknowns,
            deficiency: unknowns - rank,
        });
    }
    let z = svd
        .solve(&phi, 0.0)
        .map_err(|e| Error::Singular(format!("least squares: {e}")))?;
    let sol: Vec<f64> = z.iter().zip(&scales).map(|(v, s)| v * s).collect();

    let pairs = half_pairs(n);
    let mut p = DMatrix::zeros(n, n);
    for (c, &(a, b)) in pairs.iter().enumerate() {
        p[(a, b)] = sol[c];
        p[(b, a)] = sol[c];
    }
    let half = pairs.len();
    let mk = DMatrix::from_fn(m, n, |c, j| sol[half + c * n + j]);
    Ok((p, mk))
}

/// Structured policy iteration on fixed data.
///
/// Each iteration: regress `(P_k, M_k)`, compute `F_k = R^-1 B^T P_k o (1 - I_K)`
/// from the known `B`, and set `K_{k+1} = (M_k - F_k) o I_K`.
pub fn srl_synthesize(d: &DataMatrices, cfg: &SrlConfig) -> Result<SynthesisResult> {
    cfg.validate()?;
    cfg.check_data(d)?;
    let required = required_samples(d.n, &cfg.mask);
    if d.rows() < required {
        return Err(Error::InsufficientData {
            windows: d.rows(),
            required,
        });
    }
    let mut gain = cfg.initial_gain.clone();
    let mut prev: Option<DMatrix<f64>> = None;
    let mut history = Vec::new();
    let mut last_delta = f64::INFINITY;
    for iteration in 1..=cfg.iteration.max_iter {
        let (p, mk) = solve_iteration(d, &gain, cfg)?;
        let delta = prev.as_ref().map(|pp| (&p - pp).norm());
        let phi = unstructured_gain(&p, &cfg.input_matrix, &cfg.weights);
        let correction = cfg.mask.complement_part(&phi)?;
        let next = cfg.mask.restrict(&(&mk - &correction))?;
        history.push(IterationRecord {
            iteration,
            gain: gain.clone(),
            value: p.clone(),
            delta,
        });
        if let Some(dp) = delta {
            last_delta = dp;
            if dp < cfg.iteration.tol {
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
        iterations: cfg.iteration.max_iter,
        last_delta,
    })
}

#[derive(Debug, Clone)]
pub struct LearningOutcome {
    pub trajectory: Trajectory,
    pub data: DataMatrices,
    pub rank: RankReport,
    pub result: SynthesisResult,
}

/// Explores the plant with `u = -K0 x + u0`, checks the data rank and runs
/// the structured iteration.
pub fn learn<P: Plant + ?Sized>(
    plant: &P,
    x0: &DVector<f64>,
    probe: &ExplorationSignal,
    collect_cfg: &CollectConfig,
    cfg: &SrlConfig,
) -> Result<LearningOutcome> {
    cfg.validate()?;
    if plant.state_dim() != cfg.state_dim() || plant.input_dim() != cfg.input_dim() {
        return Err(Error::Dimension("plant dimensions do not match the learner config".into()));
    }
    let policy = InputPolicy::FeedbackProbe {
        gain: cfg.initial_gain.clone(),
        probe: probe.clone(),
    };
    let (trajectory, data) = collect(plant, &policy, x0, collect_cfg)?;
    let rank = check_rank(&data, &cfg.mask, &cfg.initial_gain, cfg.weights.r(), cfg.rank_tol);
    if !rank.regression_full_rank {
        return Err(Error::RankDeficient {
            rank: rank.regression_rank,
            unknowns: rank.regression_unknowns,
            deficiency: rank.regression_unknowns - rank.regression_rank,
        });
    }
    let result = srl_synthesize(&data, cfg)?;
    Ok(LearningOutcome {
        trajectory,
        data,
        rank,
        result,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learning::{make_exploration, ExplorationConfig, Quadrature, SimulatedPlant};
    use crate::model_based::solve_lyapunov;
    use crate::system::LtiSystem;

    fn scalar_setup() -> (SimulatedPlant, SrlConfig) {
        let sys = LtiSystem::new(DMatrix::from_element(1, 1, -1.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let w = CostWeights::new(DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0)).unwrap();
        let cfg = SrlConfig::new(
            DMatrix::from_element(1, 1, 1.0),
            w,
            SparsityMask::full(1, 1),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        (SimulatedPlant::new(sys), cfg)
    }

    #[test]
    fn scalar_value_recovered_from_data() {
        // 2aP + Q = 0 with a = -1, Q = 1
        let (plant, cfg) = scalar_setup();
        let probe = make_exploration(5, 1, &ExplorationConfig { num_sinusoids: 5, ..Default::default() }).unwrap();
        let policy = InputPolicy::Probe(probe);
        let ccfg = CollectConfig {
            duration: 1.0,
            ..Default::default()
        };
        let (_, d) = collect(&plant, &policy, &DVector::from_element(1, 1.0), &ccfg).unwrap();
        let (p, mk) = solve_iteration(&d, &DMatrix::zeros(1, 1), &cfg).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-8, "P = {}", p[(0, 0)]);
        assert!((mk[(0, 0)] - 0.5).abs() < 1e-8);
    }

    #[test]
    fn zero_state_data_is_rank_deficient() {
        let (plant, cfg) = scalar_setup();
        let (_, d) = collect(&plant, &InputPolicy::Zero, &DVector::zeros(1), &CollectConfig::default()).unwrap();
        assert!(matches!(
            solve_iteration(&d, &DMatrix::zeros(1, 1), &cfg),
            Err(Error::RankDeficient { rank: 0, unknowns: 2, deficiency: 2 })
        ));
    }

    #[test]
    fn too_few_windows_rejected() {
        let (plant, cfg) = scalar_setup();
        let ccfg = CollectConfig {
            duration: 0.03,
            ..Default::default()
        };
        let probe = make_exploration(1, 1, &ExplorationConfig::default()).unwrap();
        let (_, d) = collect(&plant, &InputPolicy::Probe(probe), &DVector::from_element(1, 1.0), &ccfg).unwrap();
        assert!(matches!(srl_synthesize(&d, &cfg), Err(Error::InsufficientData { windows: 3, required: 4 })));
    }

    #[test]
    fn model_free_iterate_matches_lyapunov_oracle() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, -0.5, -3.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let sys = LtiSystem::new(a.clone(), b.clone()).unwrap();
        let w = CostWeights::new(DMatrix::identity(2, 2), DMatrix::from_element(1, 1, 2.0)).unwrap();
        let gain = DMatrix::from_row_slice(1, 2, &[0.3, 0.8]);
        let cfg = SrlConfig::new(b.clone(), w.clone(), SparsityMask::full(1, 2), gain.clone()).unwrap();
        let probe = make_exploration(9, 1, &ExplorationConfig::default()).unwrap();
        let policy = InputPolicy::FeedbackProbe { gain: gain.clone(), probe };
        let ccfg = CollectConfig {
            duration: 2.0,
            ..Default::default()
        };
        let plant = SimulatedPlant::new(sys.clone());
        let (_, d) = collect(&plant, &policy, &DVector::from_vec(vec![1.0, -0.5]), &ccfg).unwrap();
        let (p, mk) = solve_iteration(&d, &gain, &cfg).unwrap();
        let load = w.q() + gain.transpose() * w.r() * &gain;
        let oracle = solve_lyapunov(&sys.closed_loop(&gain).unwrap(), &load).unwrap();
        assert!((&p - &oracle).norm() < 1e-4, "P error {}", (&p - &oracle).norm());
        let phi = unstructured_gain(&oracle, &b, &w);
        assert!((&mk - &phi).norm() < 1e-4);
    }

    #[test]
    fn trapezoid_data_needs_wider_windows() {
        let (plant, _) = scalar_setup();
        let probe = make_exploration(2, 1, &ExplorationConfig::default()).unwrap();
        let ccfg = CollectConfig {
            quadrature: Quadrature::Trapezoid,
            ..Default::default()
        };
        assert!(collect(&plant, &InputPolicy::Probe(probe), &DVector::from_element(1, 1.0), &ccfg).is_err());
    }
}
