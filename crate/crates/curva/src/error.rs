use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("conformal factor is not positive (min {0:e})")]
    NonPositiveConformalFactor(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular operator: {0}")]
    SingularOperator(String),
    #[error("iteration diverged: {0}")]
    IterationDiverged(String),
    #[error("bracket violation: {0}")]
    BracketViolation(String),
    #[error("monotonicity broken at step {step}: increase {magnitude:e}")]
    MonotonicityBroken { step: usize, magnitude: f64 },
    #[error("max iterations exceeded ({iters}), last increment {increment:e}")]
    MaxIterExceeded { iters: usize, increment: f64 },
    #[error("iterate left the bracket at step {step} by {magnitude:e}")]
    BracketEscape { step: usize, magnitude: f64 },
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("no constant super-solution works: {0}")]
    NoConstantWorks(String),
    #[error("input must be positive: {0}")]
    NonPositiveInput(String),
    #[error("a priori bounds check failed: {0}")]
    BoundsCheckFailed(String),
    #[error("smallness condition failed: {0}")]
    ConditionFailed(String),
    #[error("no constant shift works: {0}")]
    NoShiftWorks(String),
    #[error("plateau budget infeasible: {0}")]
    BudgetInfeasible(String),
    #[error("minimizer degenerate: {0}")]
    MinimizerDegenerate(String),
    #[error("cannot order sub- and super-solution: {0}")]
    CannotOrder(String),
    #[error("diffeomorphism search failed (best objective {best:e}, target {target:e})")]
    SearchFailed { best: f64, target: f64 },
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("case classification mismatch: {0}")]
    Classification(String),
    #[error("every probe failed down to c = {0:e}")]
    AllFailed(f64),
    #[error("scenario failed at stage {stage}: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse { line: usize, column: usize, message: String },
    #[error("unknown config key `{key}` in {section}")]
    UnknownKey { key: String, section: String },
    #[error("expression error: {0}")]
    Expression(String),
    #[error("io error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Stage {
    Classification,
    Eigen,
    Diffeomorphism,
    Plateau,
    SuperSolution,
    SubSolution,
    Bracket,
    Iteration,
    Verification,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
