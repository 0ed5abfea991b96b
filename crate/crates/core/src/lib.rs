//! Corpus preparation and scoring for MPI call generation.
//!
//! The pipeline reads C/C++ programs, keeps the ones that initialize and
//! finalize MPI and fit a token budget, removes their MPI call statements,
//! and records each removed call as a `(line, call)` label. Model output in
//! the same label form (or as a complete program) is scored by matching
//! call locations within a line tolerance, then checking function names and
//! arguments on the matched pairs.

pub mod analytics;
pub mod anonymize;
pub mod calls;
pub mod corpus;
pub mod count;
pub mod diag;
pub mod error;
pub mod eval;
pub mod lexer;
pub mod preprocess;
pub mod source;

pub use calls::{extract_mpi_calls, split_arguments, MpiCallSite, StatementForm};
pub use count::{count_tokens, TokenizerConfig};
pub use diag::{DiagKind, Diagnostic};
pub use error::{Error, Result};
pub use lexer::{tokenize, Token, TokenKind};
pub use preprocess::{
    parse_labels, reinsert, render_example, strip_and_label, Label, NumberingMode,
    TrainingExample,
};
pub use source::SourceUnit;
