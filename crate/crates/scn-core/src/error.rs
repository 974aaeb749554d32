use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, ScnError>;

/// Error type shared across the crate.
#[derive(Debug, Clone, PartialEq)]
pub enum ScnError {
    /// Tensor/layer shape or length disagreement.
    ShapeMismatch(String),
    /// A transformation parameter outside its family domain.
    DomainViolation(String),
    /// Label index outside [0, classes).
    LabelOutOfRange { label: usize, classes: usize },
    /// An operation asked of an architecture or family that cannot supply it,
    /// e.g. the Inverse baseline on a non-invertible family.
    Unsupported(String),
    /// A NaN/Inf surfaced during training or evaluation.
    NumericDivergence(String),
    /// Invalid argument outside the above categories.
    Invalid(String),
}

impl fmt::Display for ScnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScnError::ShapeMismatch(m) => write!(f, "shape mismatch: {m}"),
            ScnError::DomainViolation(m) => write!(f, "domain violation: {m}"),
            ScnError::LabelOutOfRange { label, classes } => {
                write!(f, "label {label} out of range for {classes} classes")
            }
            ScnError::Unsupported(m) => write!(f, "unsupported: {m}"),
            ScnError::NumericDivergence(m) => write!(f, "numeric divergence: {m}"),
            ScnError::Invalid(m) => write!(f, "invalid argument: {m}"),
        }
    }
}

#[cfg(test)]
impl std::error::Error for ScnError {}
