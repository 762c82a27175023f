use thiserror::Error;

/// Errors raised by the operations in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degree mismatch: form has degree {form}, cell has dimension {cell}")]
    DegreeMismatch { form: usize, cell: usize },

    #[error("face cell `{0}` is not registered")]
    MissingFace(String),

    #[error("cell `{0}` is not registered")]
    UnknownCell(String),

    #[error("simplex {0:?} is not in the complex")]
    NotInComplex(Vec<usize>),

    #[error("invalid simplex {0:?}: vertices must be distinct and index the vertex list")]
    InvalidSimplex(Vec<usize>),

    #[error("stratifications are not co-registered on a common catalogue: {0}")]
    IncompatibleCatalogue(String),

    #[error("cell `{0}` straddles several strata and has no registered refinement")]
    StratumStraddle(String),

    #[error("stratum `{0}` has no evaluable tangent data")]
    NoTangentData(String),

    #[error("cochain grading mismatch: {0}")]
    GradingMismatch(String),

    #[error("cochain is not closed (max |df| = {0})")]
    NotClosed(String),

    #[error("cochain is closed but not exact")]
    NoSolution,

    #[error("linear map {0} is not surjective")]
    NotSurjective(&'static str),

    #[error("kernel condition ker f ⊇ ker φ1 ∩ ker φ2 fails")]
    KernelConditionFails,

    #[error("degenerate simplex {0:?}")]
    DegenerateSimplex(Vec<usize>),

    #[error(
        "stratum `{stratum}` is not invariant under the cone retraction (witness {witness:?})"
    )]
    NotConeInvariant { stratum: String, witness: Vec<f64> },

    #[error("delimiting functions cross at {0:?}")]
    DelimiterCrossing(Vec<f64>),

    #[error("retraction is not polynomial in (x, t)")]
    NonPolynomialRetraction,

    #[error("retraction audit failed: {0}")]
    AuditFailed(String),

    #[error("mollifier radius {radius} too large for box side {side}")]
    RadiusTooLarge { radius: f64, side: f64 },

    #[error("decay bound audit failed at {point:?}: |γ| = {value} > {bound}")]
    DecayAuditFailed {
        point: Vec<f64>,
        value: f64,
        bound: f64,
    },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
