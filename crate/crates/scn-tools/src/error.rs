use std::fmt;

use scn_core::error::ScnError;

/// Tool-level failures; each category maps to a distinct process exit code.
#[derive(Debug)]
pub enum ToolError {
    /// Bad CLI arguments or config file (exit 2).
    Config(String),
    /// Missing/corrupt data or artifact files (exit 3).
    Data(String),
    /// NaN/Inf during training or evaluation (exit 4).
    Numeric(String),
    /// An acceptance criterion failed (exit 5).
    Acceptance(String),
}

impl ToolError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ToolError::Config(_) => 2,
            ToolError::Data(_) => 3,
            ToolError::Numeric(_) => 4,
            ToolError::Acceptance(_) => 5,
        }
    }
}

impl fmt::Display for ToolError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToolError::Config(m) => write!(f, "config error: {m}"),
            ToolError::Data(m) => write!(f, "data error: {m}"),
            ToolError::Numeric(m) => write!(f, "numeric divergence: {m}"),
            ToolError::Acceptance(m) => write!(f, "acceptance failure: {m}"),
        }
    }
}

impl std::error::Error for ToolError {}

impl From<std::io::Error> for ToolError {
    fn from(e: std::io::Error) -> Self {
        ToolError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for ToolError {
    fn from(e: serde_json::Error) -> Self {
        ToolError::Data(format!("bad JSON header: {e}"))
    }
}

impl From<ScnError> for ToolError {
    fn from(e: ScnError) -> Self {
        match e {
            ScnError::NumericDivergence(m) => ToolError::Numeric(m),
            ScnError::DomainViolation(m) | ScnError::Invalid(m) => ToolError::Config(m),
            other => ToolError::Config(format!("{other:?}")),
        }
    }
}

pub type Result<T> = core::result::Result<T, ToolError>;
