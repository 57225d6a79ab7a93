use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("tree with {vertices} vertices exceeds the budget of {limit}")]
    Budget { vertices: u128, limit: u64 },

    #[error("energy {energy} lies outside the open band (-{edge}, {edge}); no strictly Herglotz root at eta = 0")]
    BandEdge { energy: f64, edge: f64 },

    #[error("extrapolation is ill-conditioned: successive estimates differ by {spread:e} > budget {budget:e}")]
    IllConditioned { spread: f64, budget: f64 },

    #[error("period map is degenerate (c = 0 and d = a)")]
    DegenerateMap,

    #[error("forward resolvent sample {index} is zero")]
    ZeroGamma { index: usize },

    #[error("alpha = {0} leaves (0, 1/2]")]
    AlphaRange(f64),

    #[error("interval [{lo}, {hi}] is not contained in a single ac band")]
    BandViolation { lo: f64, hi: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
