use thiserror::Error;

/// Errors produced by the analysis pipeline.
///
/// `Degenerate` marks numerical degeneracy (a table or model without enough
/// structure to analyse); everything else is a data or usage problem.
#[derive(Debug, Error)]
pub enum Error {
    /// Input bytes could not be decoded in the declared encoding.
    #[error("undecodable byte at offset {offset}: 0x{byte:02x}")]
    Decode { offset: usize, byte: u8 },

    /// An operation that needs data received none.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// An index or size argument was outside the valid range.
    #[error("{what} out of range: {value} not in [{min}, {max}]")]
    Bounds {
        what: &'static str,
        value: usize,
        min: usize,
        max: usize,
    },

    /// A label was not found where one was required.
    #[error("unknown label: {0:?}")]
    UnknownLabel(String),

    /// Two collections that must share a label set do not.
    #[error("label mismatch: {0}")]
    LabelMismatch(String),

    /// A label is empty or contains characters the tab-separated formats
    /// cannot carry.
    #[error("invalid label: {0}")]
    InvalidLabel(String),

    /// Row groups overlap or reference rows that do not exist.
    #[error("invalid grouping: {0}")]
    InvalidGrouping(String),

    /// Lengths of paired inputs disagree.
    #[error("length mismatch: {what} has {actual}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        actual: usize,
        expected: usize,
    },

    /// The data has too little structure for the requested analysis.
    #[error("numerical degeneracy: {0}")]
    Degenerate(String),

    /// Duplicate identifier where uniqueness is required.
    #[error("duplicate identifier: {0:?}")]
    DuplicateId(String),

    /// A file or stream had an unexpected shape.
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors that signal numerical degeneracy rather than bad data.
    pub fn is_degenerate(&self) -> bool {
        matches!(self, Error::Degenerate(_))
    }
}
