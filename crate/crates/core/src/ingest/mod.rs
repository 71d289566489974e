//! Readers and writers for the on-disk formats.
//!
//! * AGDT-style treebank XML (read only)
//! * CoNLL-U, the canonical normalized format
//! * plain-text arc score matrices for exchanging parser output
//! * the tab-separated document catalog

mod agdt_xml;
mod catalog;
mod conllu;
mod scores;

use thiserror::Error;

pub use agdt_xml::{read_agdt_xml, XmlRead};
pub use catalog::{parse_date_range, read_catalog};
pub use conllu::{read_conllu, write_conllu};
pub use scores::{read_score_matrices, write_score_matrices, ScoreMatrix};

/// A sanitizable defect found while reading.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for Warning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IngestError {
    #[error("line {line}: XML syntax error: {message}")]
    XmlSyntax { line: usize, message: String },
    #[error("line {line}: duplicate token id {id:?}")]
    DuplicateTokenId { line: usize, id: String },
    #[error("line {line}: sentence {sentence:?} has no words")]
    EmptySentence { line: usize, sentence: String },
    #[error("line {line}: expected 10 columns, found {found}")]
    ColumnCount { line: usize, found: usize },
    #[error("line {line}: token id {found} where {expected} was expected")]
    NonContiguousIds {
        line: usize,
        expected: usize,
        found: String,
    },
    #[error("line {line}: {message}")]
    BlankLineProtocol { line: usize, message: String },
    #[error("line {line}: unsupported: {message}")]
    Unsupported { line: usize, message: String },
    #[error("line {line}: {message}")]
    BadField { line: usize, message: String },
    #[error("line {line}: {message}")]
    HeaderMismatch { line: usize, message: String },
    #[error("line {line}: expected {expected} scores, found {found}")]
    RowLength { line: usize, expected: usize, found: usize },
    #[error("line {line}: not a number: {value:?}")]
    NonNumeric { line: usize, value: String },
    #[error("line {line}: every score in row {row} is -inf")]
    EmptyRow { line: usize, row: usize },
    #[error("line {line}: malformed date {value:?}")]
    DateSyntax { line: usize, value: String },
    #[error("line {line}: date range {value:?} ends before it starts")]
    RangeOrder { line: usize, value: String },
}

impl IngestError {
    pub fn line(&self) -> usize {
        use IngestError::*;
        match self {
            XmlSyntax { line, .. }
            | DuplicateTokenId { line, .. }
            | EmptySentence { line, .. }
            | ColumnCount { line, .. }
            | NonContiguousIds { line, .. }
            | BlankLineProtocol { line, .. }
            | Unsupported { line, .. }
            | BadField { line, .. }
            | HeaderMismatch { line, .. }
            | RowLength { line, .. }
            | NonNumeric { line, .. }
            | EmptyRow { line, .. }
            | DateSyntax { line, .. }
            | RangeOrder { line, .. } => *line,
        }
    }
}

fn utf8(bytes: &[u8]) -> Result<&str, IngestError> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        IngestError::BadField {
            line,
            message: "input is not valid UTF-8".to_string(),
        }
    })
}
