use thiserror::Error;

use crate::model::VarRef;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("variable `{name}` has inverted bounds [{lower}, {upper}]")]
    InvertedBounds { name: String, lower: f64, upper: f64 },
    #[error("binary variable `{name}` must have bounds inside [0, 1], got [{lower}, {upper}]")]
    BinaryBounds { name: String, lower: f64, upper: f64 },
    #[error("bound value is NaN for variable `{0}`")]
    NanBound(String),
    #[error("unknown variable reference {0:?}")]
    UnknownVariable(VarRef),
    #[error("variable {var:?} appears more than once in `{context}`")]
    DuplicateTerm { var: VarRef, context: String },
    #[error("non-finite coefficient in `{0}`")]
    NonFiniteCoefficient(String),
    #[error("cannot fix {var:?} to {value}: outside bounds [{lower}, {upper}]")]
    FixOutOfBounds { var: VarRef, value: f64, lower: f64, upper: f64 },
    #[error("cannot fix integral variable {var:?} to non-integral value {value}")]
    NonIntegralFix { var: VarRef, value: f64 },
    #[error("invalid solve parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RelaxationError {
    #[error("LP relaxation is infeasible")]
    Infeasible,
    #[error("LP relaxation is unbounded")]
    Unbounded,
    #[error("LP relaxation stopped without a verdict: {0}")]
    Numerical(String),
}
