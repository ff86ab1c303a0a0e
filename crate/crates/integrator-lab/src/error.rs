//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid needs at least 2 cells, got {0}")]
    GridTooSmall(usize),

    #[error("grid mismatch: {0} vs {1} cells")]
    GridMismatch(usize, usize),

    #[error("coefficient length {len} does not match grid with {n_cells} cells")]
    CoeffLength { len: usize, n_cells: usize },

    #[error("interval endpoints must satisfy 0 <= s <= t <= 1, got s={s}, t={t}")]
    BadInterval { s: f64, t: f64 },

    #[error("operator is numerically singular: sigma_min={sigma_min:.3e}, sigma_max={sigma_max:.3e}")]
    SingularOperator { sigma_min: f64, sigma_max: f64 },

    #[error("gram systems accept at most 32 vectors, got {0}")]
    TooManyVectors(usize),

    #[error("family is linearly dependent at tolerance")]
    DependentFamily,

    #[error("zero increment between times t[{i}]={ti} and t[{j}]={tj}")]
    ZeroIncrement { i: usize, ti: f64, j: usize, tj: f64 },

    #[error("bandwidth eps={eps:.3e} is below the grid floor {floor:.3e} (need eps >= 4 h^2)")]
    BandwidthTooSmall { eps: f64, floor: f64 },

    #[error("quadrature did not converge: refinement step grew the estimate change to {delta:.3e}")]
    QuadratureDiverged { delta: f64 },

    #[error("separation region is empty: |a|^(-alpha) = {r} >= 1")]
    EmptyRegion { r: f64 },

    #[error("monte carlo too noisy to certify: se {se:.3e} exceeds 20% of mean {mean:.3e}")]
    McInconclusive { mean: f64, se: f64 },

    #[error("alpha must lie in [0,1), got {0}")]
    BadAlpha(f64),

    #[error("computed value {value} exceeds its proven majorant {majorant}")]
    BoundViolated { value: f64, majorant: f64 },

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
