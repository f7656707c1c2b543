use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("register must hold at least one qubit and at most {max} (got {got})")]
    InvalidRegister { got: usize, max: usize },
    #[error("qubit index {index} out of range for a {count}-qubit register")]
    QubitOutOfRange { index: usize, count: usize },
    #[error("expected a {expected}-qubit register, got {got}")]
    RegisterSize { expected: usize, got: usize },
    #[error("state is not normalized (norm^2 = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("two branches share bit pattern {bits:#b} with different bus amplitudes")]
    DuplicateBranch { bits: u64 },
    #[error("outcome has zero probability")]
    ZeroProbability,
    #[error("no peak with index {0}")]
    NoSuchPeak(usize),
    #[error("bus still entangled with the register (spread {spread} >= {tol})")]
    ResidualEntanglement { spread: f64, tol: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("interaction sequence is empty")]
    EmptySequence,
    #[error("generators do not commute or are not independent")]
    InvalidTableau,
    #[error("operation is not a Clifford: {0}")]
    NonClifford(String),
    #[error("outcome not available for this variant: {0}")]
    InvalidOutcome(String),
    #[error("qubit {qubit} has degree {degree}; only chain ends (degree <= 1) can be recovered")]
    InteriorQubit { qubit: usize, degree: usize },
    #[error("qubit {0} is not in a Z eigenstate")]
    NotProjected(usize),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("length {length} does not exceed the critical length {critical}")]
    NoGrowth { length: f64, critical: f64 },
    #[error("success probability {0} <= 1/2: sequential growth does not terminate on average")]
    NonGrowing(f64),
    #[error("length {0} is not of the form 2^(k-1)+1")]
    NotDyadicLength(u64),
    #[error("unknown series '{0}'")]
    UnknownSeries(String),
    #[error("parameters do not match: {0}")]
    Mismatch(String),
}
