use thiserror::Error;

/// Problems detected before the interior-point iteration starts.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProgramError {
    #[error("program has no variables")]
    Empty,
    #[error("{what}: expected dimension {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("second-order-cone block {index} has inconsistent dimensions")]
    SocBlock { index: usize },
    #[error("program data contains NaN or infinite entries")]
    NonFinite,
    #[error("tolerance {0} outside the supported range [1e-10, 1e-4]")]
    Tolerance(f64),
}
