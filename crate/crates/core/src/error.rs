use thiserror::Error;

/// Errors raised by the toolkit. Verdicts (holds / fails / undecided) are not
/// errors; these signal malformed input or a numerical routine that could not
/// produce a trustworthy answer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid tolerance {name} = {value:e} (must be strictly positive)")]
    Tolerance { name: &'static str, value: f64 },

    #[error(
        "complementarity pair {index}: G = {g:e} and H = {h:e} both exceed the activity threshold; \
         the point is not complementary at the configured tolerances"
    )]
    Complementarity { index: usize, g: f64, h: f64 },

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("witness failed post-verification: residual {residual:e}")]
    WitnessVerification { residual: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("lower-level solve did not converge: KKT residual {residual:e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("constructed point is infeasible: residual {residual:e} in {family}[{index}]")]
    InfeasibleConstruction { family: String, index: usize, residual: f64 },

    #[error("training index {0} matches no Lambda class")]
    LambdaClassification(usize),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
