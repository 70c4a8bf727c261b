use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value for {0}")]
    NonFinite(&'static str),

    #[error("degenerate geometry: robot and target {distance:e} m apart")]
    DegenerateGeometry { distance: f64 },

    #[error("innovation covariance is numerically singular (condition estimate {condition:e})")]
    FilterDegenerate { condition: f64 },

    #[error("infeasible instance: {robots} robots cannot cover {targets} targets with {tuple_size} robots each")]
    Infeasible {
        robots: usize,
        targets: usize,
        tuple_size: usize,
    },

    #[error("exhaustive search refused: {count} combinations exceed budget {budget}")]
    BudgetExceeded { count: u128, budget: u128 },

    #[error("combination count overflows 128 bits")]
    CountOverflow,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
