//! Lossless C/C++ lexer.
//!
//! The lexer is deliberately shallow: it knows enough about comments,
//! literals and preprocessor lines to tell a real `MPI_Send(` apart from one
//! sitting in a comment or a string, and nothing more. Every byte of the
//! input belongs to exactly one token, so concatenating the lexemes gives
//! back the input.

use serde::Serialize;

use crate::diag::{DiagKind, Diagnostic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Identifier,
    Number,
    StringLiteral,
    CharLiteral,
    Punctuation,
    Comment,
    Whitespace,
    PreprocessorDirective,
    Other,
}

impl TokenKind {
    /// Whitespace and comments carry no syntax.
    pub fn is_trivia(self) -> bool {
        matches!(self, TokenKind::Whitespace | TokenKind::Comment)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Token<'a> {
    pub kind: TokenKind,
    pub text: &'a str,
    /// Byte offset of the first byte in the source.
    pub start: usize,
    /// 1-based.
    pub line: usize,
    /// 1-based, counted in characters.
    pub column: usize,
}

impl<'a> Token<'a> {
    pub fn end(&self) -> usize {
        self.start + self.text.len()
    }

    pub fn is_punct(&self, p: &str) -> bool {
        self.kind == TokenKind::Punctuation && self.text == p
    }

    /// Line of the last character of the token.
    pub fn end_line(&self) -> usize {
        let trailing_newline = self.text.ends_with('\n') as usize;
        self.line + self.text.matches('\n').count() - trailing_newline
    }
}

#[derive(Debug, Clone, Default)]
pub struct Lexed<'a> {
    pub tokens: Vec<Token<'a>>,
    pub diagnostics: Vec<Diagnostic>,
}

impl<'a> Lexed<'a> {
    /// Tokens that are neither whitespace nor comments.
    pub fn significant(&self) -> impl Iterator<Item = &Token<'a>> + '_ {
        self.tokens.iter().filter(|t| !t.kind.is_trivia())
    }
}

const PUNCT3: [&str; 5] = ["<<=", ">>=", "...", "->*", "<=>"];
const PUNCT2: [&str; 22] = [
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "+=", "-=", "*=", "/=",
    "%=", "&=", "|=", "^=", "::", "##", ".*",
];
const PUNCT1: &[u8] = b"()[]{};,.<>+-*/%&|^!~?:=#";

/// String/char literal prefixes, longest first.
const LITERAL_PREFIXES: [&str; 9] = ["u8R", "uR", "UR", "LR", "R", "u8", "u", "U", "L"];

pub fn tokenize(src: &str) -> Lexed<'_> {
    Lexer::new(src).run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    line: usize,
    column: usize,
    at_line_start: bool,
    out: Lexed<'a>,
}

fn is_ident_start(b: u8) -> bool {
    b.is_ascii_alphabetic() || b == b'_'
}

fn is_ident_continue(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

fn is_space(b: u8) -> bool {
    matches!(b, b' ' | b'\t' | b'\r' | b'\n' | 0x0b | 0x0c)
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            line: 1,
            column: 1,
            at_line_start: true,
            out: Lexed::default(),
        }
    }

    fn peek(&self, offset: usize) -> Option<u8> {
        self.bytes.get(self.pos + offset).copied()
    }

    /// Length of a backslash-newline splice at `at`, if there is one.
    fn splice_len(&self, at: usize) -> usize {
        match (self.bytes.get(at), self.bytes.get(at + 1), self.bytes.get(at + 2)) {
            (Some(b'\\'), Some(b'\n'), _) => 2,
            (Some(b'\\'), Some(b'\r'), Some(b'\n')) => 3,
            _ => 0,
        }
    }

    fn run(mut self) -> Lexed<'a> {
        while self.pos < self.bytes.len() {
            let start = self.pos;
            let (kind, end) = self.scan();
            debug_assert!(end > start);
            self.emit(kind, start, end);
        }
        self.out
    }

    fn emit(&mut self, kind: TokenKind, start: usize, end: usize) {
        // `end` may land inside a multi-byte character only for `Other`,
        // which `scan` always extends to a char boundary.
        let text = &self.src[start..end];
        self.out.tokens.push(Token {
            kind,
            text,
            start,
            line: self.line,
            column: self.column,
        });
        for ch in text.chars() {
            if ch == '\n' {
                self.line += 1;
                self.column = 1;
            } else {
                self.column += 1;
            }
        }
        match kind {
            TokenKind::Whitespace => {
                if text.contains('\n') {
                    // A splice alone does not start a new logical line.
                    let spliced_only = text
                        .match_indices('\n')
                        .all(|(i, _)| text[..i].trim_end_matches('\r').ends_with('\\'));
                    if !spliced_only {
                        self.at_line_start = true;
                    }
                }
            }
            TokenKind::Comment => {}
            _ => self.at_line_start = false,
        }
        self.pos = end;
    }

    fn diag(&mut self, kind: DiagKind, msg: &str) {
        let d = Diagnostic::new(kind, msg).at_line(self.line);
        self.out.diagnostics.push(d);
    }

    fn scan(&mut self) -> (TokenKind, usize) {
        let b = self.bytes[self.pos];
        if is_space(b) || self.splice_len(self.pos) > 0 {
            return (TokenKind::Whitespace, self.scan_whitespace());
        }
        if b == b'/' && self.peek(1) == Some(b'/') {
            return (TokenKind::Comment, self.scan_line_comment(self.pos));
        }
        if b == b'/' && self.peek(1) == Some(b'*') {
            let end = self.scan_block_comment(self.pos);
            return (TokenKind::Comment, end);
        }
        if b == b'#' && self.at_line_start {
            return (TokenKind::PreprocessorDirective, self.scan_directive());
        }
        if let Some(lit) = self.scan_literal() {
            return lit;
        }
        if is_ident_start(b) {
            let mut end = self.pos + 1;
            while end < self.bytes.len() && is_ident_continue(self.bytes[end]) {
                end += 1;
            }
            return (TokenKind::Identifier, end);
        }
        if b.is_ascii_digit() || (b == b'.' && self.peek(1).is_some_and(|c| c.is_ascii_digit())) {
            return (TokenKind::Number, self.scan_number());
        }
        let rest = &self.src[self.pos..];
        for p in PUNCT3.iter().chain(PUNCT2.iter()) {
            if rest.starts_with(p) {
                return (TokenKind::Punctuation, self.pos + p.len());
            }
        }
        if PUNCT1.contains(&b) {
            return (TokenKind::Punctuation, self.pos + 1);
        }
        let ch_len = rest.chars().next().map_or(1, char::len_utf8);
        (TokenKind::Other, self.pos + ch_len)
    }

    fn scan_whitespace(&self) -> usize {
        let mut end = self.pos;
        loop {
            if end < self.bytes.len() && is_space(self.bytes[end]) {
                end += 1;
            } else {
                let splice = self.splice_len(end);
                if splice == 0 {
                    return end;
                }
                end += splice;
            }
        }
    }

    /// Runs up to (not including) the terminating newline; splices extend it.
    fn scan_line_comment(&self, from: usize) -> usize {
        let mut end = from;
        while end < self.bytes.len() {
            let splice = self.splice_len(end);
            if splice > 0 {
                end += splice;
                continue;
            }
            if self.bytes[end] == b'\n' {
                break;
            }
            end += 1;
        }
        end
    }

    fn scan_block_comment(&mut self, from: usize) -> usize {
        match self.src[from + 2..].find("*/") {
            Some(i) => from + 2 + i + 2,
            None => {
                self.diag(DiagKind::UnterminatedComment, "unterminated block comment");
                self.bytes.len()
            }
        }
    }

    /// A directive ends at the first newline that is not spliced and not
    /// inside a block comment.
    fn scan_directive(&mut self) -> usize {
        let mut end = self.pos + 1;
        while end < self.bytes.len() {
            let splice = self.splice_len(end);
            if splice > 0 {
                end += splice;
                continue;
            }
            match self.bytes[end] {
                b'\n' => break,
                b'/' if self.bytes.get(end + 1) == Some(&b'*') => {
                    end = self.scan_block_comment(end);
                }
                b'/' if self.bytes.get(end + 1) == Some(&b'/') => {
                    end = self.scan_line_comment(end);
                }
                q @ (b'"' | b'\'') => {
                    // Literals inside a directive never run past the line.
                    end += 1;
                    while end < self.bytes.len() && self.bytes[end] != b'\n' {
                        if self.bytes[end] == b'\\' {
                            end += 1;
                        } else if self.bytes[end] == q {
                            end += 1;
                            break;
                        }
                        end += 1;
                    }
                    end = end.min(self.bytes.len());
                }
                _ => end += 1,
            }
        }
        // Never split a multi-byte character (the skip over `\\` above may
        // land inside one).
        while !self.src.is_char_boundary(end) {
            end += 1;
        }
        end
    }

    fn scan_literal(&mut self) -> Option<(TokenKind, usize)> {
        let rest = &self.src[self.pos..];
        let (prefix, raw) = LITERAL_PREFIXES
            .iter()
            .find(|p| {
                rest.starts_with(*p)
                    && matches!(rest.as_bytes().get(p.len()), Some(b'"') | Some(b'\''))
            })
            .map(|p| (p.len(), p.ends_with('R')))
            .unwrap_or((0, false));
        let quote = *rest.as_bytes().get(prefix)?;
        if quote != b'"' && quote != b'\'' {
            return None;
        }
        if raw {
            if quote != b'"' {
                return None;
            }
            if let Some(end) = self.scan_raw_string(self.pos + prefix) {
                return Some((TokenKind::StringLiteral, end));
            }
        }
        let open = self.pos + prefix;
        if quote == b'"' {
            Some((TokenKind::StringLiteral, self.scan_quoted(open, b'"')))
        } else {
            Some((TokenKind::CharLiteral, self.scan_quoted(open, b'\'')))
        }
    }

    /// `R"delim( ... )delim"`; `None` when the delimiter is malformed.
    fn scan_raw_string(&mut self, quote_at: usize) -> Option<usize> {
        let after = &self.src[quote_at + 1..];
        let paren = after.find('(')?;
        let delim = &after[..paren];
        if delim.len() > 16
            || delim
                .bytes()
                .any(|b| is_space(b) || matches!(b, b')' | b'\\' | b'"'))
        {
            return None;
        }
        let body_start = quote_at + 1 + paren + 1;
        let closing = format!("){delim}\"");
        match self.src[body_start..].find(&closing) {
            Some(i) => Some(body_start + i + closing.len()),
            None => {
                self.diag(DiagKind::UnterminatedString, "unterminated raw string literal");
                Some(self.bytes.len())
            }
        }
    }

    /// Escape-aware scan to the closing quote. Unterminated string literals
    /// run to the end of input; unterminated character literals stop at the
    /// end of their line.
    fn scan_quoted(&mut self, open: usize, quote: u8) -> usize {
        let mut end = open + 1;
        while end < self.bytes.len() {
            match self.bytes[end] {
                b'\\' => end += 2,
                b if b == quote => return end + 1,
                b'\n' if quote == b'\'' => {
                    self.diag(DiagKind::UnterminatedChar, "unterminated character literal");
                    return end;
                }
                _ => end += 1,
            }
        }
        if quote == b'"' {
            self.diag(DiagKind::UnterminatedString, "unterminated string literal");
        } else {
            self.diag(DiagKind::UnterminatedChar, "unterminated character literal");
        }
        self.bytes.len()
    }

    /// Preprocessing-number: digits, identifier characters, dots, signed
    /// exponents and digit separators.
    fn scan_number(&self) -> usize {
        let mut end = self.pos + 1;
        while end < self.bytes.len() {
            let b = self.bytes[end];
            if is_ident_continue(b) || b == b'.' {
                end += 1;
                if matches!(b, b'e' | b'E' | b'p' | b'P')
                    && matches!(self.bytes.get(end), Some(b'+') | Some(b'-'))
                {
                    end += 1;
                }
            } else if b == b'\''
                && self.bytes.get(end + 1).is_some_and(|c| is_ident_continue(*c))
            {
                end += 2;
            } else {
                break;
            }
        }
        end
    }
}
