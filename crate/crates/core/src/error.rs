use thiserror::Error;

/// Every failure the lab can report. Variants carry enough context to be
/// turned into a structured error record by the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("invalid base system: {0}")]
    InvalidBase(String),
    #[error("invalid parameter: {0}")]
    Invalid(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("enumeration cap exceeded: {count} points for period {n} (cap {cap})")]
    EnumerationCap { n: usize, count: u128, cap: usize },
    #[error("bracket undefined: {0}")]
    Bracket(String),
    #[error("closing failed: {0}")]
    Closing(String),
    #[error("coverage not achieved: {visited} of {cells} cells after {steps} steps")]
    Coverage {
        visited: usize,
        cells: usize,
        steps: usize,
    },
    #[error("periodic orbit obstruction: defect {defect:.3e} at period {n} exceeds {tol:.1e} ({witness})")]
    Poo {
        n: usize,
        defect: f64,
        tol: f64,
        witness: String,
    },
    #[error("no isolated fiber periodic points: {0}")]
    Degenerate(String),
    #[error("not found after {0} steps")]
    NotFound(usize),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("monotone repair overflow: {0}")]
    MonotoneRepair(String),
    #[error("ill-conditioned transfer value: condition number {0:.3e}")]
    IllConditioned(f64),
    #[error("stable lift: {0}")]
    Lift(String),
    #[error("return claim violated: {0}")]
    ReturnClaim(String),
    #[error("atlas too sparse: {0}")]
    SparseAtlas(String),
}

pub type Result<T> = std::result::Result<T, LabError>;
