use serde::{Deserialize, Serialize};

use crate::diag::{DiagKind, Diagnostic};
use crate::error::{Error, Result};

/// One C/C++ program together with where it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceUnit {
    pub program_id: String,
    /// Repository owner or name the program was scraped from.
    pub origin: String,
    text: String,
    line_count: usize,
}

impl SourceUnit {
    pub fn new(
        program_id: impl Into<String>,
        origin: impl Into<String>,
        text: impl Into<String>,
    ) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::EmptySource);
        }
        let line_count = line_count(&text);
        Ok(SourceUnit {
            program_id: program_id.into(),
            origin: origin.into(),
            text,
            line_count,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn line_count(&self) -> usize {
        self.line_count
    }
}

/// Newline-delimited line count; a final line without a trailing newline
/// still counts.
pub fn line_count(text: &str) -> usize {
    let newlines = text.bytes().filter(|&b| b == b'\n').count();
    if text.is_empty() || text.ends_with('\n') {
        newlines
    } else {
        newlines + 1
    }
}

/// Decode raw bytes, replacing invalid UTF-8 sequences with U+FFFD.
pub fn decode_source(bytes: &[u8]) -> (String, Option<Diagnostic>) {
    match String::from_utf8_lossy(bytes) {
        std::borrow::Cow::Borrowed(s) => (s.to_string(), None),
        std::borrow::Cow::Owned(s) => (
            s,
            Some(Diagnostic::new(
                DiagKind::InvalidUtf8,
                "invalid UTF-8 replaced with U+FFFD",
            )),
        ),
    }
}
