use std::fmt;

pub type Result<T> = std::result::Result<T, PgcsError>;

/// A single diagnostic produced by problem validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Issue {
    /// Offending field, e.g. `A[2]` (1-based period index).
    pub field: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PgcsError {
    #[error("invalid input: {}", join_issues(.0))]
    Invalid(Vec<Issue>),
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: String,
        actual: String,
    },
    #[error("{field} is the zero matrix; its default tolerance would be 0, supply explicit tolerances")]
    ZeroTolerance { field: String },
    #[error("tolerance {field} = {value} must be strictly positive")]
    NonPositiveTolerance { field: String, value: f64 },
    #[error("system matrix is numerically singular (pivot {pivot} of order {order})")]
    SingularSystem { pivot: usize, order: usize },
    #[error("explicit matrix of order {order} exceeds the dense cap {cap}")]
    SizeCap { order: usize, cap: usize },
    #[error("operator is rank deficient: numerical rank {rank} < {expected}")]
    RankDeficient { rank: usize, expected: usize },
    #[error("random directions degenerate: rank {rank} < {expected} after resampling")]
    DegenerateDirections { rank: usize, expected: usize },
    #[error("invalid argument {name}: {reason}")]
    InvalidArgument { name: &'static str, reason: String },
    #[error("{0}")]
    Benchmark(String),
    #[error("malformed JSON: {0}")]
    Json(String),
}

fn join_issues(issues: &[Issue]) -> String {
    issues
        .iter()
        .map(Issue::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

impl PgcsError {
    pub(crate) fn dim(context: &'static str, expected: impl fmt::Display, actual: impl fmt::Display) -> Self {
        PgcsError::Dimension {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    /// True for failures of the numerical method, as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PgcsError::SingularSystem { .. }
                | PgcsError::RankDeficient { .. }
                | PgcsError::DegenerateDirections { .. }
                | PgcsError::Benchmark(_)
        )
    }
}
