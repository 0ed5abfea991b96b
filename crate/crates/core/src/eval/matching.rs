//! Per-program scoring: location matching, function names, arguments.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lexer::{tokenize, TokenKind};
use crate::preprocess::Label;

/// Name and arguments of a label's call, parsed once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoredCall {
    pub line: usize,
    /// Empty when the label text holds no recognizable MPI call.
    pub name: String,
    pub args: Vec<String>,
}

impl ScoredCall {
    pub fn from_label(label: &Label) -> Self {
        match label.call() {
            Some(site) => ScoredCall {
                line: label.line,
                name: site.function_name,
                args: site.args,
            },
            None => ScoredCall {
                line: label.line,
                name: String::new(),
                args: Vec::new(),
            },
        }
    }
}

pub fn scored_calls(labels: &[Label]) -> Vec<ScoredCall> {
    labels.iter().map(ScoredCall::from_label).collect()
}

/// One-to-one matching of ground-truth to predicted calls.
///
/// Pairs whose lines differ by at most `variance` are taken greedily in
/// order of line distance, ground-truth line, predicted line, then name
/// agreement; endpoints already used are skipped. Returns `(gt, pred)` index
/// pairs sorted by ground-truth index.
pub fn match_locations(
    gt: &[ScoredCall],
    pred: &[ScoredCall],
    variance: usize,
) -> Vec<(usize, usize)> {
    let mut candidates = Vec::new();
    for (gi, g) in gt.iter().enumerate() {
        for (pi, p) in pred.iter().enumerate() {
            let delta = g.line.abs_diff(p.line);
            if delta <= variance {
                let name_differs = g.name != p.name;
                candidates.push((delta, g.line, p.line, name_differs, gi, pi));
            }
        }
    }
    candidates.sort_unstable();
    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut pairs = Vec::new();
    for (_, _, _, _, gi, pi) in candidates {
        if !gt_used[gi] && !pred_used[pi] {
            gt_used[gi] = true;
            pred_used[pi] = true;
            pairs.push((gi, pi));
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Matched over ground-truth calls; 1 when both sides are empty.
pub fn location_accuracy(gt_len: usize, pred_len: usize, matched: usize) -> f64 {
    if gt_len == 0 {
        if pred_len == 0 {
            1.0
        } else {
            0.0
        }
    } else {
        matched as f64 / gt_len as f64
    }
}

/// Argument text with comments dropped and whitespace removed except where
/// two words would otherwise join.
pub fn normalize_argument(arg: &str) -> String {
    let mut out = String::with_capacity(arg.len());
    let mut prev_word = false;
    for tok in tokenize(arg).tokens {
        if tok.kind.is_trivia() {
            continue;
        }
        let word = matches!(tok.kind, TokenKind::Identifier | TokenKind::Number);
        if word && prev_word {
            out.push(' ');
        }
        out.push_str(tok.text);
        prev_word = word;
    }
    out
}

/// Fraction of ground-truth argument positions the prediction reproduces.
/// Calls without arguments score 1.
pub fn score_arguments(gt_args: &[String], pred_args: &[String]) -> f64 {
    if gt_args.is_empty() {
        return 1.0;
    }
    let correct = gt_args
        .iter()
        .zip(pred_args)
        .filter(|(g, p)| normalize_argument(g) == normalize_argument(p))
        .count();
    correct as f64 / gt_args.len() as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionTally {
    pub gt_count: usize,
    pub matched: usize,
    pub correct: usize,
}

impl FunctionTally {
    pub fn add(&mut self, other: &FunctionTally) {
        self.gt_count += other.gt_count;
        self.matched += other.matched;
        self.correct += other.correct;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProgramScore {
    pub n_gt_calls: usize,
    pub matched_locations: usize,
    pub correct_functions: usize,
    pub argument_ratio_sum: f64,
    pub argument_pairs_scored: usize,
    /// Predictions left unmatched.
    pub extra_predictions: usize,
    pub per_function: BTreeMap<String, FunctionTally>,
}

impl ProgramScore {
    pub fn location_accuracy(&self) -> f64 {
        location_accuracy(
            self.n_gt_calls,
            self.extra_predictions + self.matched_locations,
            self.matched_locations,
        )
    }
}

/// Scores a given matching. Function names count on matched pairs only;
/// arguments on pairs whose names agree.
pub fn score_matching(
    gt: &[ScoredCall],
    pred: &[ScoredCall],
    matching: &[(usize, usize)],
) -> ProgramScore {
    let mut score = ProgramScore {
        n_gt_calls: gt.len(),
        matched_locations: matching.len(),
        extra_predictions: pred.len() - matching.len(),
        ..ProgramScore::default()
    };
    for g in gt {
        score.per_function.entry(g.name.clone()).or_default().gt_count += 1;
    }
    let mut ordered = matching.to_vec();
    ordered.sort_unstable();
    for (gi, pi) in ordered {
        let (g, p) = (&gt[gi], &pred[pi]);
        let tally = score.per_function.get_mut(&g.name).unwrap();
        tally.matched += 1;
        if !g.name.is_empty() && g.name == p.name {
            tally.correct += 1;
            score.correct_functions += 1;
            score.argument_ratio_sum += score_arguments(&g.args, &p.args);
            score.argument_pairs_scored += 1;
        }
    }
    score
}

pub fn score_program(gt: &[ScoredCall], pred: &[ScoredCall], variance: usize) -> ProgramScore {
    score_matching(gt, pred, &match_locations(gt, pred, variance))
}
