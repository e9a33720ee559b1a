use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::structure::SparsityMask;
use crate::system::{step_count, InputPolicy, Trajectory};

use super::plant::Plant;

/// How window integrals are formed from a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Quadrature {
    /// Integrals accumulated alongside the RK4 state update.
    #[default]
    Integrated,
    /// Composite trapezoid over the recorded samples.
    Trapezoid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollectConfig {
    /// Recorded sample step, seconds.
    pub dt: f64,
    /// Exploration length, seconds.
    pub duration: f64,
    /// Window length `T` in recorded steps.
    pub window_steps: usize,
    pub quadrature: Quadrature,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self {
            dt: crate::system::DEFAULT_DT,
            duration: 1.4,
            window_steps: 1,
            quadrature: Quadrature::Integrated,
        }
    }
}

impl CollectConfig {
    pub fn window(&self) -> f64 {
        self.window_steps as f64 * self.dt
    }

    /// Window steps for a window given in seconds; it must sit on the dt grid.
    pub fn steps_for_window(window: f64, dt: f64) -> Result<usize> {
        let ratio = window / dt;
        let steps = ratio.round();
        if steps < 1.0 || (ratio - steps).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArgument(format!(
                "window {window} s is not a positive multiple of dt = {dt} s"
            )));
        }
        Ok(steps as usize)
    }

    pub fn num_windows(&self) -> usize {
        step_count(self.duration, self.dt) / self.window_steps.max(1)
    }
}

/// Regression blocks: one row per window `[t_i, t_i + T]`.
///
/// `s_xx` holds endpoint increments of `x (x) x`, `t_xx` the window
/// integrals of `x (x) x`, and `t_xu` the window integrals of `x (x) u`,
/// where `u` is the total applied input. Kronecker index of `x_a x_b` is
/// `a*n + b`, of `x_a u_d` is `a*m + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrices {
    pub n: usize,
    pub m: usize,
    pub window: f64,
    pub window_starts: Vec<f64>,
    pub s_xx: DMatrix<f64>,
    pub t_xx: DMatrix<f64>,
    pub t_xu: DMatrix<f64>,
}

impl DataMatrices {
    pub fn rows(&self) -> usize {
        self.s_xx.nrows()
    }

    pub(crate) fn txx_block(&self, row: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |a, b| self.t_xx[(row, a * self.n + b)])
    }

    pub(crate) fn sxx_block(&self, row: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |a, b| self.s_xx[(row, a * self.n + b)])
    }

    pub(crate) fn txu_block(&self, row: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.m, |a, d| self.t_xu[(row, a * self.m + d)])
    }
}

/// Twice the unknown count `n(n+1)/2 + |K|`.
pub fn required_samples(n: usize, mask: &SparsityMask) -> usize {
    2 * (n * (n + 1) / 2 + mask.nnz())
}

fn outer_row(a: &DVector<f64>, b: &DVector<f64>) -> Vec<f64> {
    a.iter().flat_map(|ai| b.iter().map(move |bj| ai * bj)).collect()
}

/// Builds the data matrices from a recorded trajectory.
pub fn assemble(traj: &Trajectory, window_steps: usize, quadrature: Quadrature) -> Result<DataMatrices> {
    let min_steps = match quadrature {
        Quadrature::Integrated => 1,
        Quadrature::Trapezoid => 2,
    };
    if window_steps < min_steps {
        return Err(Error::InvalidArgument(format!(
            "window of {window_steps} steps is too short for {quadrature:?} quadrature"
        )));
    }
    let (n, m) = (traj.state_dim(), traj.input_dim());
    let rows = (traj.len() - 1) / window_steps;
    if rows == 0 {
        return Err(Error::InsufficientData { windows: 0, required: 1 });
    }
    let integrals = match quadrature {
        Quadrature::Integrated => Some(traj.step_integrals().ok_or_else(|| {
            Error::InvalidArgument("trajectory carries no step integrals".into())
        })?),
        Quadrature::Trapezoid => None,
    };
    let dt = traj.dt();
    let xs = traj.states();
    let us = traj.inputs();
    let mut s_xx = DMatrix::zeros(rows, n * n);
    let mut t_xx = DMatrix::zeros(rows, n * n);
    let mut t_xu = DMatrix::zeros(rows, n * m);
    let mut starts = Vec::with_capacity(rows);
    for i in 0..rows {
        let (k0, k1) = (i * window_steps, (i + 1) * window_steps);
        starts.push(traj.times()[k0]);
        let end = outer_row(&xs[k1], &xs[k1]);
        let start = outer_row(&xs[k0], &xs[k0]);
        for c in 0..n * n {
            s_xx[(i, c)] = end[c] - start[c];
        }
        let mut ixx = vec![0.0; n * n];
        let mut ixu = vec![0.0; n * m];
        for k in k0..k1 {
            match integrals {
                Some(list) => {
                    let step = &list[k];
                    for a in 0..n {
                        for b in 0..n {
                            ixx[a * n + b] += step.xx[(a, b)];
                        }
                        for d in 0..m {
                            ixu[a * m + d] += step.xu[(a, d)];
                        }
                    }
                }
                None => {
                    let fx = outer_row(&xs[k], &xs[k]);
                    let gx = outer_row(&xs[k + 1], &xs[k + 1]);
                    let fu = outer_row(&xs[k], &us[k]);
                    let gu = outer_row(&xs[k + 1], &us[k + 1]);
                    for c in 0..n * n {
                        ixx[c] += 0.5 * dt * (fx[c] + gx[c]);
                    }
                    for c in 0..n * m {
                        ixu[c] += 0.5 * dt * (fu[c] + gu[c]);
                    }
                }
            }
        }
        for c in 0..n * n {
            t_xx[(i, c)] = ixx[c];
        }
        for c in 0..n * m {
            t_xu[(i, c)] = ixu[c];
        }
    }
    Ok(DataMatrices {
        n,
        m,
        window: window_steps as f64 * dt,
        window_starts: starts,
        s_xx,
        t_xx,
        t_xu,
    })
}

/// Runs the plant under `policy` (typically `-K0 x + u0`) and assembles the
/// data matrices.
pub fn collect<P: Plant + ?Sized>(
    plant: &P,
    policy: &InputPolicy,
    x0: &DVector<f64>,
    cfg: &CollectConfig,
) -> Result<(Trajectory, DataMatrices)> {
    let traj = plant.run(policy, x0, cfg.duration, cfg.dt)?;
    let data = assemble(&traj, cfg.window_steps, cfg.quadrature)?;
    Ok((traj, data))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct RankReport {
    /// Numerical rank of `[T_xx  T_xu]`.
    pub rank: usize,
    /// `n(n+1)/2 + |K|`.
    pub structured_target: usize,
    /// Unknowns of the symmetric-folded regression, `n(n+1)/2 + n m`.
    pub regression_unknowns: usize,
    /// Numerical rank of the folded regression matrix at the checked gain.
    pub regression_rank: usize,
    /// Smallest over largest singular value of the column-scaled regression.
    pub regression_sigma_ratio: f64,
    pub meets_structured_target: bool,
    pub regression_full_rank: bool,
    /// `rank - structured_target`.
    pub margin: i64,
    pub passed: bool,
}

pub(crate) fn numerical_rank(sv: &DVector<f64>, rank_tol: f64) -> usize {
    let smax = sv.max();
    if !(smax > 0.0) {
        return 0;
    }
    sv.iter().filter(|s| **s > rank_tol * smax).count()
}

/// Rank diagnostics. Passing requires both the structured target count and
/// full column rank of the regression solved at `gain` with weight `r`.
///
/// The regression rank depends on the gain: at a gain with `A - BK` not
/// Hurwitz its value block can have an exact null direction.
pub fn check_rank(
    d: &DataMatrices,
    mask: &SparsityMask,
    gain: &DMatrix<f64>,
    r: &DMatrix<f64>,
    rank_tol: f64,
) -> RankReport {
    let n = d.n;
    let half = n * (n + 1) / 2;
    let structured_target = half + mask.nnz();
    let regression_unknowns = half + n * d.m;

    let mut joined = DMatrix::zeros(d.rows(), d.t_xx.ncols() + d.t_xu.ncols());
    joined.columns_mut(0, d.t_xx.ncols()).copy_from(&d.t_xx);
    joined.columns_mut(d.t_xx.ncols(), d.t_xu.ncols()).copy_from(&d.t_xu);
    let rank = numerical_rank(&joined.svd(false, false).singular_values, rank_tol);

    let (theta, _) = super::srl::regression(d, gain, r, &DMatrix::zeros(n, n));
    let (scaled, _) = super::srl::scale_columns(&theta);
    let sv = scaled.svd(false, false).singular_values;
    let regression_rank = numerical_rank(&sv, rank_tol);
    let smax = sv.max();
    let regression_sigma_ratio = if smax > 0.0 { sv.min() / smax } else { 0.0 };

    let meets_structured_target = rank >= structured_target;
    let regression_full_rank = regression_rank == regression_unknowns;
    RankReport {
        rank,
        structured_target,
        regression_unknowns,
        regression_rank,
        regression_sigma_ratio,
        meets_structured_target,
        regression_full_rank,
        margin: rank as i64 - structured_target as i64,
        passed: meets_structured_target && regression_full_rank,
    }
}
