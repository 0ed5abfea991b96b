//! MPI call-site extraction on top of the lexer.

use std::ops::Range;

use serde::Serialize;

use crate::diag::{DiagKind, Diagnostic};
use crate::lexer::{tokenize, Lexed, Token, TokenKind};

/// How the call sits inside its statement.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatementForm {
    /// `MPI_X(...);` as a statement of its own.
    BareCall,
    /// `v = MPI_X(...);`, including declarations such as `int rc = MPI_X(...);`.
    AssignedReturn,
    /// Anything else: conditions, arguments, `return MPI_X(...)`, unbraced
    /// `if` bodies. Extracted but never removed.
    Embedded,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MpiCallSite {
    pub function_name: String,
    pub args: Vec<String>,
    pub start_line: usize,
    pub end_line: usize,
    /// 1-based column of the first character of `full_text`.
    pub column: usize,
    pub statement_form: StatementForm,
    /// The statement text as it appears in the source (just the call for
    /// embedded sites).
    pub full_text: String,
    /// Byte range of `full_text` in the source.
    #[serde(skip)]
    pub span: Range<usize>,
}

impl MpiCallSite {
    pub fn is_removable(&self) -> bool {
        self.statement_form != StatementForm::Embedded
    }
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub sites: Vec<MpiCallSite>,
    pub diagnostics: Vec<Diagnostic>,
}

/// `MPI_` followed by a letter, then identifier characters.
pub fn is_mpi_name(ident: &str) -> bool {
    ident
        .strip_prefix("MPI_")
        .and_then(|rest| rest.bytes().next())
        .is_some_and(|b| b.is_ascii_alphabetic())
}

const CONTROL_KEYWORDS: &[&str] = &[
    "return", "if", "else", "while", "for", "do", "switch", "case", "default", "goto", "break",
    "continue", "sizeof", "throw", "new", "delete", "co_return", "co_await", "co_yield",
];

fn is_statement_boundary(tok: Option<&Token<'_>>) -> bool {
    match tok {
        None => true,
        Some(t) => {
            t.kind == TokenKind::PreprocessorDirective
                || t.is_punct(";")
                || t.is_punct("{")
                || t.is_punct("}")
        }
    }
}

fn opens(t: &Token<'_>) -> bool {
    t.kind == TokenKind::Punctuation && matches!(t.text, "(" | "[" | "{")
}

fn closes(t: &Token<'_>) -> bool {
    t.kind == TokenKind::Punctuation && matches!(t.text, ")" | "]" | "}")
}

pub fn extract_mpi_calls(text: &str) -> Extraction {
    let lexed = tokenize(text);
    extract_from_tokens(text, &lexed)
}

pub(crate) fn extract_from_tokens(text: &str, lexed: &Lexed<'_>) -> Extraction {
    let sig: Vec<&Token<'_>> = lexed.significant().collect();
    let mut out = Extraction::default();

    for tok in &sig {
        if tok.kind == TokenKind::PreprocessorDirective && directive_mentions_mpi(tok.text) {
            out.diagnostics.push(
                Diagnostic::new(
                    DiagKind::MpiInDirective,
                    "MPI_ identifier inside a preprocessor directive is not extracted",
                )
                .at_line(tok.line),
            );
        }
    }

    for (i, tok) in sig.iter().enumerate() {
        if tok.kind != TokenKind::Identifier || !is_mpi_name(tok.text) {
            continue;
        }
        if !sig.get(i + 1).is_some_and(|t| t.is_punct("(")) {
            continue;
        }
        let Some(close) = matching_close(&sig, i + 1) else {
            out.diagnostics.push(
                Diagnostic::new(
                    DiagKind::UnbalancedCall,
                    format!("{}: unbalanced argument list, call dropped", tok.text),
                )
                .at_line(tok.line),
            );
            continue;
        };
        let open_tok = sig[i + 1];
        let close_tok = sig[close];
        let args = split_arguments(&text[open_tok.end()..close_tok.start]);

        let prev = i.checked_sub(1).map(|p| sig[p]);
        let next = sig.get(close + 1).copied();
        let ends_statement = next.is_some_and(|t| t.is_punct(";"));

        let (form, first, last) = if ends_statement && is_statement_boundary(prev) {
            (StatementForm::BareCall, *tok, next.unwrap())
        } else if ends_statement && prev.is_some_and(|t| t.is_punct("=")) {
            match lvalue_start(&sig, i - 1) {
                Some(s) => (StatementForm::AssignedReturn, sig[s], next.unwrap()),
                None => (StatementForm::Embedded, *tok, close_tok),
            }
        } else {
            (StatementForm::Embedded, *tok, close_tok)
        };

        let span = first.start..last.end();
        out.sites.push(MpiCallSite {
            function_name: tok.text.to_string(),
            args,
            start_line: first.line,
            end_line: last.end_line(),
            column: first.column,
            statement_form: form,
            full_text: text[span.clone()].to_string(),
            span,
        });
    }

    out.sites
        .sort_by_key(|s| (s.start_line, s.column, s.span.end));
    out
}

fn directive_mentions_mpi(text: &str) -> bool {
    let bytes = text.as_bytes();
    text.match_indices("MPI_").any(|(i, _)| {
        let boundary = i == 0 || !(bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_');
        boundary && is_mpi_name(&text[i..])
    })
}

/// Index in `sig` of the closer that balances the opener at `open`.
fn matching_close(sig: &[&Token<'_>], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    for (j, t) in sig.iter().enumerate().skip(open) {
        if opens(t) {
            depth += 1;
        } else if closes(t) {
            depth -= 1;
            if depth == 0 {
                return t.is_punct(")").then_some(j);
            }
        } else if depth == 1 && t.is_punct(";") {
            // A statement terminator directly inside the argument list means
            // the call was never closed.
            return None;
        }
    }
    None
}

/// Walks back from the `=` at `eq` over an assignable expression. Returns the
/// index of its first token when the expression starts a statement.
fn lvalue_start(sig: &[&Token<'_>], eq: usize) -> Option<usize> {
    let mut j = eq;
    let mut bracket_depth = 0usize;
    let mut start = None;
    while j > 0 {
        let t = sig[j - 1];
        if bracket_depth > 0 {
            if t.is_punct(";") || t.is_punct("{") || t.is_punct("}") {
                return None;
            }
            if t.is_punct("]") {
                bracket_depth += 1;
            } else if t.is_punct("[") {
                bracket_depth -= 1;
            }
        } else if t.is_punct("]") {
            bracket_depth = 1;
        } else if is_statement_boundary(Some(t)) {
            break;
        } else {
            let ok = match t.kind {
                TokenKind::Identifier => !CONTROL_KEYWORDS.contains(&t.text),
                TokenKind::Number => true,
                TokenKind::Punctuation => matches!(t.text, "." | "->" | "*" | "&" | "::"),
                _ => false,
            };
            if !ok {
                return None;
            }
        }
        j -= 1;
        start = Some(j);
    }
    if bracket_depth > 0 {
        return None;
    }
    let s = start?;
    sig[s..eq]
        .iter()
        .any(|t| t.kind == TokenKind::Identifier)
        .then_some(s)
}

/// Splits the text between a call's parentheses on top-level commas.
///
/// Commas nested in `()`, `[]`, `{}`, string or character literals, and
/// comments do not split. Each argument is trimmed; blank input gives no
/// arguments.
pub fn split_arguments(call_argument_text: &str) -> Vec<String> {
    if call_argument_text.trim().is_empty() {
        return Vec::new();
    }
    let lexed = tokenize(call_argument_text);
    let mut args = Vec::new();
    let mut depth = 0i64;
    let mut from = 0;
    for t in &lexed.tokens {
        if opens(t) {
            depth += 1;
        } else if closes(t) {
            depth -= 1;
        } else if depth <= 0 && t.is_punct(",") {
            args.push(call_argument_text[from..t.start].trim().to_string());
            from = t.end();
        }
    }
    args.push(call_argument_text[from..].trim().to_string());
    args
}
