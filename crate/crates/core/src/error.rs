use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

/// Every failure the core library can report.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Operand shapes do not fit the operation.
    Shape { op: &'static str, detail: String },
    /// A gradient or loss value was NaN or infinite.
    NonFinite { what: String },
    /// Invalid configuration value (α/β, fractions, λ, batch size, ...).
    Config(String),
    /// A part's padded bounding box has no area.
    DegenerateBox { part: &'static str, frame: String },
    /// Landmark set is malformed (count, non-finite coordinates).
    Landmarks(String),
    /// Class index outside 1..=7.
    Label(String),
    /// Metric or aggregation requested on an empty set.
    EmptyInput(&'static str),
    /// Itemized data validation failures.
    Validation(Vec<String>),
    /// Malformed serialized data (checkpoints).
    Format(String),
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Attach context (a network or part name) to shape diagnostics.
    pub fn context(self, ctx: &str) -> Self {
        match self {
            Error::Shape { op, detail } => Error::Shape {
                op,
                detail: alloc::format!("{ctx}: {detail}"),
            },
            Error::Landmarks(m) => Error::Landmarks(alloc::format!("{ctx}: {m}")),
            other => other,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { op, detail } => write!(f, "shape error in {op}: {detail}"),
            Error::NonFinite { what } => write!(f, "non-finite value in {what}"),
            Error::Config(m) => write!(f, "configuration error: {m}"),
            Error::DegenerateBox { part, frame } => {
                write!(f, "degenerate bounding box for part {part} in frame {frame}")
            }
            Error::Landmarks(m) => write!(f, "invalid landmarks: {m}"),
            Error::Label(m) => write!(f, "invalid label: {m}"),
            Error::Format(m) => write!(f, "malformed data: {m}"),
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::Validation(items) => {
                write!(f, "{} validation error(s)", items.len())?;
                for item in items {
                    write!(f, "\n  - {item}")?;
                }
                Ok(())
            }
        }
    }
}

impl core::error::Error for Error {}
