use thiserror::Error;

pub type Result<T> = std::result::Result<T, QlgError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QlgError {
    #[error("theta = {0} is outside (0, pi/2]; alpha = cot(theta)cos(zeta - xi) diverges at theta = 0")]
    ThetaOutOfDomain(f64),
    #[error("{name} = {value} is outside [{lo}, {hi}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("{0}")]
    InvalidArgument(String),
    #[error("post-collision population f{index} = {value} left [0, 1] at site {site:?}")]
    PopulationOutOfRange {
        index: usize,
        value: f64,
        site: Option<(usize, usize)>,
    },
    #[error("state is not normalized: norm^2 = {0}")]
    NotNormalized(f64),
    #[error("psi = {psi} <= 0 at x = {x}, t = {t}: Cole-Hopf series truncated too early")]
    NonPositivePsi { psi: f64, x: f64, t: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("trace too short: {got} snapshots, need at least {need}")]
    TraceTooShort { got: usize, need: usize },
    #[error("finite-difference solution diverged at step {step}")]
    Diverged { step: usize },
}
