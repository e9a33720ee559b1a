#![allow(dead_code, clippy::approx_constant)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use structured_lqr::experiments::builtin;
use structured_lqr::{CostWeights, LtiSystem, SparsityMask};

pub const COST_A: f64 = 12.4705;
pub const COST_UNSTRUCTURED: f64 = 12.0428;
pub const COST_B: f64 = 12.9764;
pub const EIGS_B: [f64; 6] = [-10.61, -3.58, -4.22, -5.70, -9.19, -7.91];

#[rustfmt::skip]
pub const K_A: [f64; 36] = [
    0.0000, 0.0000, 1.2527, 0.2901, 0.1468, 0.0000,
    1.0455, 2.7516, 0.2686, 0.0000, 0.7485, 0.0000,
    1.2527, 0.2686, 2.9976, 0.0000, 0.0000, 0.0670,
    0.2901, 0.0364, 1.0471, 4.1729, 0.0025, 0.0054,
    0.1468, 0.7485, 0.0288, 0.0025, 3.2813, 1.2978,
    0.3306, 1.1411, 0.0670, 0.0054, 1.2978, 2.8851,
];

#[rustfmt::skip]
pub const K_UNSTRUCTURED: [f64; 36] = [
    2.9234, 0.7255, 1.1487, 0.3057, 0.1397, 0.2342,
    0.7255, 2.6395, 0.2282, 0.0418, 0.7435, 1.0987,
    1.1487, 0.2282, 2.9751, 1.0436, 0.0269, 0.0547,
    0.3057, 0.0418, 1.0436, 4.0820, 0.0001, 0.0041,
    0.1397, 0.7435, 0.0269, 0.0001, 3.2790, 1.2881,
    0.2342, 1.0987, 0.0547, 0.0041, 1.2881, 2.7975,
];

#[rustfmt::skip]
pub const K_B: [f64; 36] = [
    0.0000, 0.0000, 1.2544, 0.2898, 0.1561, 0.0000,
    1.0617, 2.7750, 0.2702, 0.0000, 0.7683, 0.0000,
    1.2544, 0.2702, 2.9979, 0.0000, 0.0000, 0.0725,
    0.0000, 0.0000, 1.0470, 4.1729, 0.0022, 0.0046,
    0.1561, 0.7683, 0.0000, 0.0000, 3.3002, 1.3786,
    0.0000, 1.2338, 0.0725, 0.0000, 1.3786, 0.0000,
];

pub fn printed(k: &[f64; 36]) -> DMatrix<f64> {
    DMatrix::from_row_slice(6, 6, k)
}

pub fn max_entry_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}

pub struct Paper {
    pub sys: LtiSystem,
    pub weights: CostWeights,
    pub x0: DVector<f64>,
    pub mask: SparsityMask,
    pub k0: DMatrix<f64>,
}

pub fn paper(name: &str) -> Paper {
    let spec = builtin(name).unwrap();
    Paper {
        sys: spec.system().unwrap(),
        weights: spec.weights().unwrap(),
        x0: spec.x0(),
        mask: spec.mask().unwrap(),
        k0: spec.initial_gain().unwrap(),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// Random Hurwitz matrix: random entries shifted left past the spectrum.
pub fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n);
    let shift = structured_lqr::system::spectral_abscissa(&m).unwrap() + rng.random_range(0.1..1.0);
    m - DMatrix::identity(n, n) * shift
}

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let g = random_matrix(rng, n, n);
    &g * g.transpose() + DMatrix::identity(n, n)
}

/// `expm(M)` by scaling and squaring a 20-term Taylor series.
pub fn expm(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let norm = m.abs().row_sum().max();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as u32 } else { 0 };
    let scaled = m / 2f64.powi(squarings as i32);
    let mut term = DMatrix::identity(n, n);
    let mut sum = DMatrix::identity(n, n);
    for k in 1..=20 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

/// `int_0^inf e^{M't} S e^{Mt} dt` by composite Simpson on a uniform grid.
pub fn lyapunov_by_quadrature(m: &DMatrix<f64>, s: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let n = m.nrows();
    let step = expm(&(m * h));
    let half = expm(&(m * (h / 2.0)));
    let f = |phi: &DMatrix<f64>| phi.transpose() * s * phi;
    let mut phi = DMatrix::identity(n, n);
    let mut total = DMatrix::zeros(n, n);
    for _ in 0..1_000_000 {
        let mid = &phi * &half;
        let next = &phi * &step;
        total += (f(&phi) + f(&mid) * 4.0 + f(&next)) * (h / 6.0);
        phi = next;
        if phi.norm() < 1e-13 {
            break;
        }
    }
    total
}

/// `A'P + PA - PBR^-1B'P + Q`.
pub fn are_residual(sys: &LtiSystem, w: &CostWeights, p: &DMatrix<f64>) -> DMatrix<f64> {
    let a = sys.a();
    let b = sys.b();
    a.transpose() * p + p * a - p * b * w.r_inv() * b.transpose() * p + w.q()
}
