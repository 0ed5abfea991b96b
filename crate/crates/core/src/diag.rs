//! Non-fatal findings collected while lexing, extracting, and scoring.
//!
//! Every stage of the pipeline is tolerant of dirty input: instead of
//! failing, it records a [`Diagnostic`] and keeps going. The CLI streams
//! these to standard error as JSON lines.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagKind {
    InvalidUtf8,
    UnterminatedComment,
    UnterminatedString,
    UnterminatedChar,
    UnbalancedCall,
    MpiInDirective,
    EmbeddedCall,
    MalformedLabel,
    LabelBeyondEnd,
    UnreadableFile,
    MalformedRecord,
    EmptySource,
    ExcludedProgram,
    DuplicatePrediction,
    UnknownProgram,
    MissingPrediction,
    CategoryConflict,
    PlaceholderSkipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub kind: DiagKind,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
}

impl Diagnostic {
    pub fn new(kind: DiagKind, message: impl Into<String>) -> Self {
        Diagnostic {
            kind,
            message: message.into(),
            program: None,
            line: None,
        }
    }

    pub fn at_line(mut self, line: usize) -> Self {
        self.line = Some(line);
        self
    }

    pub fn for_program(mut self, program: impl Into<String>) -> Self {
        self.program = Some(program.into());
        self
    }

    /// One JSON object, no trailing newline.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("diagnostic serializes")
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(program) = &self.program {
            write!(f, "{program}: ")?;
        }
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        write!(f, "{}", self.message)
    }
}

/// Attach a program id to every diagnostic that lacks one.
pub(crate) fn tag_program(diags: &mut [Diagnostic], program: &str) {
    for d in diags.iter_mut().filter(|d| d.program.is_none()) {
        d.program = Some(program.to_string());
    }
}
