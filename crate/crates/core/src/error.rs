use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch for player {player}: expected {expected}, found {found}")]
    DimensionMismatch {
        player: usize,
        expected: usize,
        found: usize,
    },
    #[error("profile has {found} strategies, game has {expected} players")]
    PlayerCountMismatch { expected: usize, found: usize },
    #[error("no strategy supplied for opponent {player}")]
    MissingOpponent { player: usize },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("payoff {value} outside [-1, 1] or not finite")]
    PayoffOutOfRange { value: f64 },
    #[error("malformed game: {0}")]
    MalformedGame(String),
    #[error("unknown game `{0}`")]
    UnknownGame(String),
    #[error("mixture has no components")]
    EmptyMixture,
    #[error("invalid mixture weights: {0}")]
    InvalidWeights(String),
    #[error("extraction requires uniform mixture weights")]
    NonUniformWeights,
    #[error("horizon must be at least 1")]
    InvalidHorizon,
    #[error("action count {0} too large for the lifted game encoding")]
    TooManyActions(usize),
    #[error("path has length {found}, expected {expected}")]
    WrongPathLength { expected: usize, found: usize },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("arithmetic overflow while computing {0}")]
    Overflow(&'static str),
    #[error("no expert has finite cumulative loss; realizability violated")]
    Unrealizable,
    #[error("strategy entry {index} is zero; multiplicative updates need an interior point")]
    NotInterior { index: usize },
    #[error("learning rate must be finite and positive, got {0}")]
    InvalidLearningRate(f64),
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error("lifted game base does not match the supplied game")]
    GameMismatch,
    #[error("budget exceeded: need {needed}, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("invariant violated: {0}")]
    InvariantViolated(String),
}
