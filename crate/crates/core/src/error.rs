use thiserror::Error;

/// One failed scenario invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at `{key}`: {message}")]
    Parse { key: String, message: String },

    #[error("missing required key `{0}`")]
    MissingKey(String),

    #[error("invalid scenario: {}", join(.0))]
    Invalid(Vec<Violation>),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("no feasible plan: {0}")]
    NoFeasiblePlan(String),

    #[error("no frontier point within budget {0}")]
    BudgetInfeasible(f64),

    #[error("oracle budget exceeded: {0}")]
    OracleBudget(String),

    #[error("bisection did not converge: {0}")]
    Bracket(String),

    #[error("plan file rejected: {0}")]
    PlanFile(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(field: &str, message: impl Into<String>) -> Self {
        Error::Invalid(vec![Violation {
            field: field.into(),
            message: message.into(),
        }])
    }
}
