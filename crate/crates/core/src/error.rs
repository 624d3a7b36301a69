use crate::tree::ClassId;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    // Tree construction.
    #[error(
        "class {child} at level {child_level} is attached to a parent at level {parent_level}"
    )]
    NonNestedPartition {
        child: usize,
        child_level: usize,
        parent_level: usize,
    },
    #[error("class {0} at a non-terminal level has no children")]
    EmptyClass(usize),
    #[error("path range sum {sum} exceeds 1 at arm {arm}")]
    RangeNormalizationViolated { arm: usize, sum: f64 },
    #[error("the similarity structure has no leaves")]
    NoLeaves,
    #[error("tree description is malformed: {0}")]
    MalformedTree(&'static str),
    #[error("class {id} has invalid range {range}")]
    InvalidRange { id: usize, range: f64 },
    #[error("unknown class {0:?}")]
    UnknownClass(ClassId),

    // Choice rule.
    #[error("uncertainty parameters must be positive and nonincreasing")]
    InvalidUncertainty,
    #[error("expected {expected} uncertainty parameters, got {got}")]
    LevelMismatch { expected: usize, got: usize },
    #[error("non-finite propensity score at arm {0}")]
    NonFiniteScore(usize),
    #[error("the root class has no parent")]
    RootHasNoParent,
    #[error("expected a vector of length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    // Estimators.
    #[error("arm {0} has zero probability")]
    ZeroProbabilityArm(usize),
    #[error("arm index {0} out of range")]
    InvalidArm(usize),
    #[error("sampled path has zero probability at level {0}")]
    PathProbabilityZero(usize),
    #[error("expected {expected} on-path increments, got {got}")]
    MissingIncrement { expected: usize, got: usize },
    #[error("increment {value} of class {class} is outside [0, {range}]")]
    IncrementOutOfRange {
        class: usize,
        value: f64,
        range: f64,
    },
    #[error("{0} leaves is too many to enumerate")]
    TooLargeToEnumerate(usize),
    #[error("strategy is not a probability vector")]
    InvalidStrategy,

    // Policies.
    #[error("feedback received without a pending choice")]
    StaleFeedback,
    #[error("a choice is already pending feedback")]
    ChoicePending,
    #[error("invalid learning rate: {0}")]
    InvalidLearningRate(&'static str),

    // Environments.
    #[error("script exhausted at round {0}")]
    ScriptExhausted(u64),
    #[error("scripted increment {value} for class {class} at round {round} violates its range")]
    RangeViolationInScript {
        round: u64,
        class: usize,
        value: f64,
    },
    #[error("invalid environment parameter: {0}")]
    InvalidEnvironment(&'static str),
}
