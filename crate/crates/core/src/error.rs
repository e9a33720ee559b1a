use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("state diverged at t = {time} s")]
    Divergence { time: f64 },

    #[error("matrix is not Hurwitz (spectral abscissa {abscissa:.6e})")]
    NotHurwitz { abscissa: f64 },

    #[error("initial gain is not stabilizing (spectral abscissa {abscissa:.6e})")]
    NotStabilizing { abscissa: f64 },

    #[error("iteration {iteration} produced a destabilizing gain (spectral abscissa {abscissa:.6e})")]
    DestabilizingIterate { iteration: usize, abscissa: f64 },

    #[error("no convergence after {iterations} iterations (last |dP|_F = {last_delta:.3e})")]
    NotConverged { iterations: usize, last_delta: f64 },

    #[error("regression matrix is rank deficient: rank {rank} of {unknowns} unknowns ({deficiency} unidentifiable directions)")]
    RankDeficient {
        rank: usize,
        unknowns: usize,
        deficiency: usize,
    },

    #[error("insufficient data: {windows} windows collected, at least {required} required")]
    InsufficientData { windows: usize, required: usize },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("eigenvalue computation did not converge")]
    EigenDecomposition,

    #[error("scenario: {0}")]
    Scenario(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
