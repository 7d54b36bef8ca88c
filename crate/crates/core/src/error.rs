use crate::gf2m::FieldId;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Two operands carry different field tags.
    #[error("field mismatch: {left} vs {right}")]
    FieldMismatch { left: FieldId, right: FieldId },

    /// Inversion of zero, or a scalar with no inverse mod the group order.
    #[error("division by zero")]
    DivisionByZero,

    /// A polynomial handed to `reduce` exceeds the supported degree bound.
    #[error("polynomial degree {degree} exceeds reducible maximum {max}")]
    DegreeOverflow { degree: usize, max: usize },

    /// A hex string failed to parse or does not fit its target width.
    #[error("invalid hex value: {0}")]
    InvalidHex(String),

    /// A scalar is outside the range required by its consumer.
    #[error("scalar out of range: {0}")]
    ScalarOutOfRange(String),

    /// A partial-product plan failed structural or algebraic validation.
    #[error("invalid partial-product plan: {0}")]
    InvalidPlan(String),

    /// Curve parameter text is malformed or internally inconsistent.
    #[error("invalid curve parameters: {0}")]
    InvalidParams(String),

    /// An affine point does not satisfy the curve equation.
    #[error("point is not on the curve")]
    PointNotOnCurve,

    /// The ladder cannot recover an affine result because Z2 vanished,
    /// which happens exactly when k is congruent to -1 mod the order of P.
    #[error("degenerate ladder state: Z2 = 0 (k = -1 mod ord(P))")]
    DegenerateLadder,

    /// Bit vectors of different lengths were given to a distance function.
    #[error("length mismatch: {left} vs {right} words")]
    LengthMismatch { left: usize, right: usize },

    /// A leakage model failed validation.
    #[error("invalid leakage model: {0}")]
    InvalidModel(String),

    /// A trace or slot set is structurally unusable for the requested analysis.
    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    /// Correlation is undefined because one input has zero variance.
    #[error("correlation undefined: {0} input is constant")]
    ConstantInput(&'static str),

    /// Statistics were requested over an empty group.
    #[error("empty group: {0}")]
    EmptyGroup(&'static str),

    /// A serialized trace violates the container format. `section` names the
    /// first part of the file that failed to parse.
    #[error("trace format error in {section}: {detail}")]
    TraceFormat { section: &'static str, detail: String },

    #[error("i/o error")]
    Io(#[from] std::io::Error),

    #[error("metadata serialization error")]
    Json(#[from] serde_json::Error),
}
