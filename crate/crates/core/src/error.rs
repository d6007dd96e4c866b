use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("size mismatch for {what}: expected {expected}, got {got}")]
    SizeMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("{solver} did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("transient step {step}: {source}")]
    TransientStep {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("optimization iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("fin count {count}: {source}")]
    SweepPoint {
        count: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("bisection on the volume multiplier failed after {iterations} iterations (volume {volume:.6}, target {target:.6})")]
    Bisection {
        iterations: usize,
        volume: f64,
        target: f64,
    },

    #[error("unknown setup label `{0}`")]
    UnknownSetup(String),
}
