use thiserror::Error;

/// Every failure the library can report. Variant names double as the
/// one-word diagnostics printed by the command-line front end.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("DimensionMismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("NotAntisymmetric: c[{i}][{j}][{k}] + c[{j}][{i}][{k}] = {residual:e}")]
    NotAntisymmetric {
        i: usize,
        j: usize,
        k: usize,
        residual: f64,
    },
    #[error("JacobiViolation: max residual {residual:e}")]
    JacobiViolation { residual: f64 },
    #[error("NotNilpotent: lower central series stalls at dimension {stalled_dim}")]
    NotNilpotent { stalled_dim: usize },
    #[error("TooLarge: dimension {dim} exceeds the cap of {cap}")]
    TooLarge { dim: usize, cap: usize },
    #[error("TrivialCenter: the algebra has zero center")]
    TrivialCenter,
    #[error("UnknownName: {0}")]
    UnknownName(String),
    #[error("StepTooLarge: nilpotency step {step} needs BCH depth beyond {max_depth}")]
    StepTooLarge { step: usize, max_depth: usize },
    #[error("NotSkew: entries ({i},{j}) and ({j},{i}) differ by {residual:e}")]
    NotSkew { i: usize, j: usize, residual: f64 },
    #[error("CocycleIdentityViolation: max residual {residual:e}")]
    CocycleIdentityViolation { residual: f64 },
    #[error("SplitMismatch: cocycles live on different central splits")]
    SplitMismatch,
    #[error("WrongSide: expected {expected} side, got {got}")]
    WrongSide {
        expected: &'static str,
        got: &'static str,
    },
    #[error("GridTooSmall: {0}")]
    GridTooSmall(String),
    #[error("NonUnitPhase: |sigma| deviates from 1 by {deviation:e}")]
    NonUnitPhase { deviation: f64 },
    #[error("WrongAlgebra: {0}")]
    WrongAlgebra(String),
    #[error("WrongCocycle: {0}")]
    WrongCocycle(String),
    #[error("BudgetFloorReached: {0}")]
    BudgetFloorReached(String),
    #[error("InsufficientSweep: {0}")]
    InsufficientSweep(String),
    #[error("InvalidInput: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}
