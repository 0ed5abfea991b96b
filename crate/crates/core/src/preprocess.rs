//! Strip-and-label: delete MPI call statements from a program and record
//! each one as a `(line, call)` label against the original line numbering,
//! plus the inverse transform.
//!
//! ```text
//! int main(argc,argv)                  int main(argc,argv)
//! {                                    {
//!     int done = 0;          ==>           int done = 0;
//!
//!     MPI_Init(&argc,&argv);           }
//! }                                    (5, MPI_Init(&argc,&argv);)
//! ```
//!
//! Label lines always refer to the original file, blank lines included, so
//! walking a line counter over the stripped code and dropping each label in
//! when the counter reaches its line rebuilds the program.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::calls::{extract_from_tokens, is_mpi_name, MpiCallSite};
use crate::diag::{DiagKind, Diagnostic};
use crate::lexer::{tokenize, Token, TokenKind};
use crate::source::SourceUnit;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Label {
    /// 1-based line in the original, pre-removal program.
    pub line: usize,
    pub call_text: String,
}

impl Label {
    pub fn new(line: usize, call_text: impl Into<String>) -> Self {
        Label {
            line,
            call_text: call_text.into(),
        }
    }

    /// The outermost MPI call in `call_text`.
    pub fn call(&self) -> Option<MpiCallSite> {
        crate::calls::extract_mpi_calls(&self.call_text)
            .sites
            .into_iter()
            .next()
    }

    pub fn function_name(&self) -> Option<String> {
        self.call().map(|c| c.function_name)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.line, self.call_text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NumberingMode {
    /// Every code line carries an `N| ` prefix with its original line number.
    #[default]
    Prefixed,
    Bare,
}

impl FromStr for NumberingMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "prefixed" => Ok(NumberingMode::Prefixed),
            "bare" => Ok(NumberingMode::Bare),
            other => Err(format!("unknown numbering mode `{other}` (expected prefixed or bare)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingExample {
    pub stripped_code: String,
    /// Ascending by line.
    pub labels: Vec<Label>,
    pub numbering_mode: NumberingMode,
}

impl TrainingExample {
    pub fn new(stripped_code: impl Into<String>, mut labels: Vec<Label>) -> Self {
        labels.sort_by_key(|l| l.line);
        TrainingExample {
            stripped_code: stripped_code.into(),
            labels,
            numbering_mode: NumberingMode::default(),
        }
    }

    pub fn with_numbering(mut self, mode: NumberingMode) -> Self {
        self.numbering_mode = mode;
        self
    }

    /// Stripped code lines, without the empty piece after a final newline.
    pub fn code_lines(&self) -> Vec<&str> {
        code_lines(&self.stripped_code)
    }

    /// Original line number of each stripped code line.
    pub fn original_line_numbers(&self) -> Vec<usize> {
        let n = self.code_lines().len();
        walk(n, &self.labels)
            .filter_map(|step| match step {
                Step::Code { line, .. } => Some(line),
                Step::Label { .. } => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Stripped {
    pub example: TrainingExample,
    /// Every extracted site, removable or not.
    pub sites: Vec<MpiCallSite>,
    pub diagnostics: Vec<Diagnostic>,
}

pub(crate) fn code_lines(text: &str) -> Vec<&str> {
    if text.is_empty() {
        return Vec::new();
    }
    let mut lines: Vec<&str> = text.split('\n').collect();
    if text.ends_with('\n') {
        lines.pop();
    }
    lines
}

/// One position in the merged sequence of code lines and labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Step {
    Code { index: usize, line: usize },
    Label { index: usize, line: usize, overflow: bool },
}

/// Interleaves `code_len` code lines with `labels` (ascending): a label is
/// placed once the running counter reaches its line.
pub(crate) fn walk(code_len: usize, labels: &[Label]) -> impl Iterator<Item = Step> + '_ {
    let mut counter = 1usize;
    let mut ci = 0usize;
    let mut li = 0usize;
    std::iter::from_fn(move || {
        let step = if li < labels.len() && labels[li].line <= counter {
            li += 1;
            Step::Label {
                index: li - 1,
                line: counter,
                overflow: false,
            }
        } else if ci < code_len {
            ci += 1;
            Step::Code {
                index: ci - 1,
                line: counter,
            }
        } else if li < labels.len() {
            li += 1;
            Step::Label {
                index: li - 1,
                line: counter,
                overflow: labels[li - 1].line > counter,
            }
        } else {
            return None;
        };
        counter += 1;
        Some(step)
    })
}

/// Removes bare and assigned-return MPI statements and labels each one with
/// its original start line. Embedded calls stay in the code.
pub fn strip_and_label(unit: &SourceUnit) -> Stripped {
    strip_text(unit.text())
}

pub fn strip_text(text: &str) -> Stripped {
    let lexed = tokenize(text);
    let extraction = extract_from_tokens(text, &lexed);
    let mut diagnostics = lexed.diagnostics.clone();
    diagnostics.extend(extraction.diagnostics);

    let removable: Vec<&MpiCallSite> = extraction.sites.iter().filter(|s| s.is_removable()).collect();
    for site in extraction.sites.iter().filter(|s| !s.is_removable()) {
        let inside_removed = removable
            .iter()
            .any(|r| r.span.start <= site.span.start && site.span.end <= r.span.end);
        if !inside_removed {
            diagnostics.push(
                Diagnostic::new(
                    DiagKind::EmbeddedCall,
                    format!("{} is embedded in a larger expression and was left in place", site.function_name),
                )
                .at_line(site.start_line),
            );
        }
    }

    let mut spans: Vec<std::ops::Range<usize>> = removable.iter().map(|s| s.span.clone()).collect();
    spans.sort_by_key(|r| r.start);
    let stripped_code = remove_spans(text, &spans);

    let labels = removable
        .iter()
        .map(|site| Label::new(site.start_line, single_line_call_text(site, &lexed.tokens)))
        .collect();

    Stripped {
        example: TrainingExample::new(stripped_code, labels),
        sites: extraction.sites,
        diagnostics,
    }
}

/// Drops `spans` from `text`. A line whose remainder is only whitespace is
/// deleted outright, newline included; other touched lines keep their
/// surviving text and their newline.
fn remove_spans(text: &str, spans: &[std::ops::Range<usize>]) -> String {
    if spans.is_empty() {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    let mut line_start = 0;
    let mut next_span = 0;
    while line_start < text.len() {
        let newline = text[line_start..].find('\n').map(|i| line_start + i);
        let content_end = newline.unwrap_or(text.len());
        let line_end = newline.map_or(text.len(), |n| n + 1);

        while next_span < spans.len() && spans[next_span].end <= line_start {
            next_span += 1;
        }
        let mut kept = String::new();
        let mut touched = false;
        let mut pos = line_start;
        for span in spans[next_span..].iter().take_while(|s| s.start < content_end) {
            let (s, e) = (span.start.max(line_start), span.end.min(content_end));
            if s < e || span.start <= content_end && span.end > line_start {
                touched = true;
            }
            if s > pos {
                kept.push_str(&text[pos..s]);
            }
            pos = pos.max(e);
        }
        if pos < content_end {
            kept.push_str(&text[pos..content_end]);
        }

        if !touched {
            out.push_str(&text[line_start..line_end]);
        } else if !kept.trim().is_empty() {
            let cr = kept.ends_with('\r');
            out.push_str(kept.trim_end());
            if cr {
                out.push('\r');
            }
            if newline.is_some() {
                out.push('\n');
            }
        }
        line_start = line_end;
    }
    out
}

/// Single-line statements are kept verbatim. Multi-line ones are joined onto
/// one line: line breaks and comments collapse to one space, dropped next to
/// brackets and separators.
fn single_line_call_text(site: &MpiCallSite, tokens: &[Token<'_>]) -> String {
    if site.start_line == site.end_line {
        return site.full_text.clone();
    }
    let mut out = String::new();
    let mut pending_space = false;
    for tok in tokens
        .iter()
        .filter(|t| t.start >= site.span.start && t.end() <= site.span.end)
    {
        match tok.kind {
            TokenKind::Whitespace if !tok.text.contains('\n') => {
                if !pending_space && !out.ends_with(' ') {
                    out.push_str(tok.text);
                }
            }
            TokenKind::Whitespace | TokenKind::Comment => pending_space = true,
            _ => {
                if pending_space
                    && !out.is_empty()
                    && !out.ends_with([' ', '(', '['])
                    && !matches!(tok.text, ")" | "]" | "," | ";")
                {
                    out.push(' ');
                }
                pending_space = false;
                out.push_str(tok.text);
            }
        }
    }
    out
}

fn leading_ws(line: &str) -> &str {
    &line[..line.len() - line.trim_start().len()]
}

fn visual_width(indent: &str) -> usize {
    indent
        .chars()
        .fold(0, |w, c| if c == '\t' { (w / 8 + 1) * 8 } else { w + 1 })
}

/// The most frequent step by which indentation grows from one non-blank
/// line to the next, if any.
fn indent_unit<'a>(lines: &[&'a str]) -> Option<&'a str> {
    let mut counts: Vec<(&str, usize)> = Vec::new();
    let mut prev: Option<&str> = None;
    for line in lines.iter().filter(|l| !l.trim().is_empty()) {
        let ws = leading_ws(line);
        if let Some(step) = prev.and_then(|p| ws.strip_prefix(p)).filter(|s| !s.is_empty()) {
            match counts.iter_mut().find(|(s, _)| *s == step) {
                Some((_, n)) => *n += 1,
                None => counts.push((step, 1)),
            }
        }
        prev = Some(ws);
    }
    counts
        .iter()
        .fold(None, |best: Option<(&str, usize)>, &(s, n)| match best {
            Some((_, m)) if m >= n => best,
            _ => Some((s, n)),
        })
        .map(|(s, _)| s)
}

/// Indentation for a reinserted call: that of the next non-blank code line,
/// unless the previous non-blank line is indented deeper (the call closed
/// a block). Between `{` and `}` it goes one level deeper than the `{`.
fn reinsert_indent(prev: Option<&str>, next: Option<&str>, unit: Option<&str>) -> String {
    match (prev, next) {
        (Some(p), Some(n)) => {
            let (pi, ni) = (leading_ws(p), leading_ws(n));
            if p.trim_end().ends_with('{') && n.trim_start().starts_with('}') {
                let unit = unit.unwrap_or(if pi.contains('\t') { "\t" } else { "    " });
                format!("{pi}{unit}")
            } else if visual_width(pi) > visual_width(ni) {
                pi.to_string()
            } else {
                ni.to_string()
            }
        }
        (Some(p), None) => leading_ws(p).to_string(),
        (None, Some(n)) => leading_ws(n).to_string(),
        (None, None) => String::new(),
    }
}

/// Puts each label back at its original line.
///
/// Exact for programs whose removed statements each filled whole single
/// lines. A statement that spanned several lines comes back as one line, so
/// labels after it land one line later per line lost.
pub fn reinsert(example: &TrainingExample) -> (String, Vec<Diagnostic>) {
    let code = example.code_lines();
    let mut out: Vec<String> = Vec::with_capacity(code.len() + example.labels.len());
    let mut diagnostics = Vec::new();
    let mut prev_nonblank: Option<String> = None;
    let unit = indent_unit(&code);

    for step in walk(code.len(), &example.labels) {
        match step {
            Step::Code { index, .. } => {
                let line = code[index];
                if !line.trim().is_empty() {
                    prev_nonblank = Some(line.to_string());
                }
                out.push(line.to_string());
            }
            Step::Label {
                index,
                line,
                overflow,
            } => {
                let label = &example.labels[index];
                if overflow {
                    diagnostics.push(
                        Diagnostic::new(
                            DiagKind::LabelBeyondEnd,
                            format!(
                                "label line {} is past the end of the code; appended at line {line}",
                                label.line
                            ),
                        )
                        .at_line(label.line),
                    );
                }
                let consumed = out.len() - example.labels[..index].len();
                let next = code[consumed.min(code.len())..]
                    .iter()
                    .find(|l| !l.trim().is_empty())
                    .copied();
                let indent = reinsert_indent(prev_nonblank.as_deref(), next, unit);
                let text = format!("{indent}{}", label.call_text);
                prev_nonblank = Some(text.clone());
                out.push(text);
            }
        }
    }

    let mut text = out.join("\n");
    if !out.is_empty() && (example.stripped_code.ends_with('\n') || code.is_empty()) {
        text.push('\n');
    }
    (text, diagnostics)
}

/// The code part of a rendered example.
pub fn render_code(example: &TrainingExample) -> String {
    let lines = example.code_lines();
    let mut out = String::with_capacity(example.stripped_code.len() + lines.len() * 5);
    match example.numbering_mode {
        NumberingMode::Bare => {
            for line in &lines {
                out.push_str(line);
                out.push('\n');
            }
        }
        NumberingMode::Prefixed => {
            for (line, number) in lines.iter().zip(example.original_line_numbers()) {
                out.push_str(&format!("{number}| {line}\n"));
            }
        }
    }
    out
}

/// Tail lines, one `(line, call)` per label, newline-separated, no final
/// newline.
pub fn render_labels(labels: &[Label]) -> String {
    let mut sorted: Vec<&Label> = labels.iter().collect();
    sorted.sort_by_key(|l| l.line);
    sorted
        .iter()
        .map(|l| l.to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Code, then the label tail.
pub fn render_example(example: &TrainingExample) -> String {
    let mut out = render_code(example);
    for label in render_labels(&example.labels).lines() {
        out.push_str(label);
        out.push('\n');
    }
    out
}

/// Removes `N| ` prefixes when every line carries one.
pub fn strip_line_numbers(code: &str) -> String {
    let lines = code_lines(code);
    let unprefixed: Option<Vec<&str>> = lines
        .iter()
        .map(|line| {
            let digits = line.bytes().take_while(u8::is_ascii_digit).count();
            let rest = line[digits..].strip_prefix('|')?;
            (digits > 0).then(|| rest.strip_prefix(' ').unwrap_or(rest))
        })
        .collect();
    match unprefixed {
        Some(lines) if !lines.is_empty() => {
            let mut out = lines.join("\n");
            if code.ends_with('\n') {
                out.push('\n');
            }
            out
        }
        _ => code.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedLabels {
    /// Ascending by line.
    pub labels: Vec<Label>,
    pub discarded: usize,
    pub diagnostics: Vec<Diagnostic>,
}

/// Reads `(N, MPI_X(...);)` lines out of `text`.
///
/// Lines that are not label-shaped (code) are ignored silently; lines that
/// look like a label but do not parse are counted as discarded.
pub fn parse_labels(text: &str) -> ParsedLabels {
    let mut parsed = ParsedLabels::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if !looks_like_label(line) {
            continue;
        }
        match parse_label_line(line) {
            Some(label) => parsed.labels.push(label),
            None => {
                parsed.discarded += 1;
                parsed.diagnostics.push(
                    Diagnostic::new(DiagKind::MalformedLabel, format!("malformed label line: {line}"))
                        .at_line(i + 1),
                );
            }
        }
    }
    parsed.labels.sort_by_key(|l| l.line);
    parsed
}

fn looks_like_label(line: &str) -> bool {
    let Some(rest) = line.strip_prefix('(') else {
        return false;
    };
    match rest.find(',') {
        Some(comma) => {
            let head = &rest[..comma];
            head.len() <= 12 && !head.contains(['(', ')']) && rest[comma..].contains("MPI_")
        }
        None => false,
    }
}

fn parse_label_line(line: &str) -> Option<Label> {
    let inner = line.strip_prefix('(')?.strip_suffix(')')?;
    let (number, call) = inner.split_once(',')?;
    let number: usize = number.trim().parse().ok()?;
    if number == 0 {
        return None;
    }
    let call = call.trim_start();
    if !contains_mpi_call(call) {
        return None;
    }
    Some(Label::new(number, call))
}

fn contains_mpi_call(text: &str) -> bool {
    let bytes = text.as_bytes();
    text.match_indices("MPI_").any(|(i, _)| {
        if i > 0 && (bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_') {
            return false;
        }
        let ident_len = text[i..]
            .bytes()
            .take_while(|b| b.is_ascii_alphanumeric() || *b == b'_')
            .count();
        is_mpi_name(&text[i..i + ident_len]) && text[i + ident_len..].trim_start().starts_with('(')
    })
}
