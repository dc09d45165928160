use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vectors, subspaces or operators live in different ambient spaces")]
    SpaceMismatch,

    #[error("Krylov datum has zero norm")]
    ZeroDatum,

    #[error("power iteration did not converge in {iters} iterations (best estimate {estimate})")]
    NoConvergence { iters: usize, estimate: f64 },

    #[error("unknown scenario or operator id `{0}`")]
    UnknownScenario(String),

    #[error("bad parameters: {0}")]
    BadParams(String),

    #[error("the operator annihilates the whole orthogonal complement of the Krylov space")]
    DegenerateComplement,

    #[error("f is not a solution: relative residual {residual:.3e} exceeds {tolerance:.3e}")]
    NotASolution { residual: f64, tolerance: f64 },

    #[error("operator is not certified in the requested enclosure ({0})")]
    NotCertified(String),

    #[error("dense solve failed: matrix is numerically singular")]
    SingularSolve,

    #[error("brute-force oracle supports intrinsic dimension <= 2, got {0}")]
    DimTooLarge(usize),

    #[error("config error: {0}")]
    ConfigParse(String),

    #[error("io failure: {0}")]
    IoFailure(#[from] std::io::Error),

    #[error("budget exceeded in scenario {0}")]
    BudgetExceeded(String),
}
