//! Turning a complete predicted program into labels numbered like the
//! ground truth.

use crate::diag::Diagnostic;
use crate::preprocess::{strip_line_numbers, strip_text, Label, TrainingExample};

fn normalize(line: &str) -> String {
    line.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Labels for the MPI statements of `predicted_full`.
///
/// When the prediction's non-MPI lines equal the ground truth's stripped
/// lines (ignoring whitespace differences), each label keeps its literal line
/// number in the prediction. Otherwise the two line sequences are aligned by
/// longest common subsequence, and each call's literal line is corrected by
/// the number of non-MPI lines the prediction added or dropped before its
/// nearest aligned predecessor.
pub fn align_full_code(
    gt: &TrainingExample,
    predicted_full: &str,
) -> (Vec<Label>, Vec<Diagnostic>) {
    let text = strip_line_numbers(predicted_full);
    let pred = strip_text(&text);
    let diagnostics = pred.diagnostics;
    let labels = pred.example.labels.clone();
    if labels.is_empty() {
        return (labels, diagnostics);
    }

    let p_lines: Vec<String> = pred.example.code_lines().into_iter().map(normalize).collect();
    let g_lines: Vec<String> = gt.code_lines().into_iter().map(normalize).collect();
    if p_lines == g_lines {
        return (labels, diagnostics);
    }

    let pairs = lcs_pairs(&p_lines, &g_lines);
    let p_orig = pred.example.original_line_numbers();
    let mapped = labels
        .into_iter()
        .map(|label| {
            // Nearest aligned prediction line above the call.
            let drift = pairs
                .iter()
                .take_while(|&&(pi, _)| p_orig[pi] < label.line)
                .last()
                .map_or(0, |&(pi, gj)| pi as i64 - gj as i64);
            let line = (label.line as i64 - drift).max(1) as usize;
            Label::new(line, label.call_text)
        })
        .collect();
    (mapped, diagnostics)
}

/// Index pairs of one longest common subsequence, ascending.
fn lcs_pairs(a: &[String], b: &[String]) -> Vec<(usize, usize)> {
    let (n, m) = (a.len(), b.len());
    let mut table = vec![0u32; (n + 1) * (m + 1)];
    let at = |i: usize, j: usize| i * (m + 1) + j;
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            table[at(i, j)] = if a[i] == b[j] {
                table[at(i + 1, j + 1)] + 1
            } else {
                table[at(i + 1, j)].max(table[at(i, j + 1)])
            };
        }
    }
    let mut pairs = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        if a[i] == b[j] {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if table[at(i + 1, j)] >= table[at(i, j + 1)] {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}
