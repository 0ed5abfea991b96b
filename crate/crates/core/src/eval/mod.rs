//! Scoring predicted MPI calls against a labeled dataset.
//!
//! Each prediction is matched to the ground truth within a line tolerance
//! (the variance), then function names are checked on matched pairs and
//! arguments on pairs with the right function. Results are aggregated over
//! cumulative buckets: bucket `n` holds every program with at most `n`
//! ground-truth calls.

mod align;
mod matching;

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DatasetRecord;
use crate::diag::{tag_program, DiagKind, Diagnostic};
use crate::error::{Error, Result};
use crate::preprocess::parse_labels;

pub use align::align_full_code;
pub use matching::{
    location_accuracy, match_locations, normalize_argument, score_arguments, score_matching,
    score_program, scored_calls, FunctionTally, ProgramScore, ScoredCall,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionFormat {
    /// `(line, call)` lines, as in the dataset's label tail.
    Labels,
    /// A complete program with the MPI calls written in.
    FullCode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub program_id: String,
    pub format: PredictionFormat,
    pub payload: String,
}

impl PredictionRecord {
    pub fn labels(program_id: impl Into<String>, payload: impl Into<String>) -> Self {
        PredictionRecord {
            program_id: program_id.into(),
            format: PredictionFormat::Labels,
            payload: payload.into(),
        }
    }
}

pub const DEFAULT_VARIANCES: [usize; 3] = [0, 1, 2];
pub const DEFAULT_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub variances: Vec<usize>,
    pub max_n: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            variances: DEFAULT_VARIANCES.to_vec(),
            max_n: DEFAULT_MAX_N,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_n == 0 {
            return Err(Error::Config("max_n must be at least 1".to_string()));
        }
        if self.variances.is_empty() {
            return Err(Error::Config("at least one variance is needed".to_string()));
        }
        Ok(())
    }
}

/// Aggregate scores of one (variance, n) bucket. Ratios are sums of counts
/// over the bucket's programs; a ratio with a zero denominator is 0 and
/// flagged undefined.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BucketScore {
    pub location: f64,
    pub function: f64,
    pub argument: f64,
    pub programs: usize,
    pub gt_calls: usize,
    pub matched: usize,
    pub correct_functions: usize,
    pub argument_ratio_sum: f64,
    pub argument_pairs: usize,
    pub extra_predictions: usize,
    pub location_undefined: bool,
    pub function_undefined: bool,
    pub argument_undefined: bool,
}

impl BucketScore {
    fn absorb(&mut self, s: &ProgramScore) {
        self.programs += 1;
        self.gt_calls += s.n_gt_calls;
        self.matched += s.matched_locations;
        self.correct_functions += s.correct_functions;
        self.argument_ratio_sum += s.argument_ratio_sum;
        self.argument_pairs += s.argument_pairs_scored;
        self.extra_predictions += s.extra_predictions;
    }

    fn finish(&mut self) {
        let ratio = |num: f64, den: usize| {
            if den == 0 {
                (0.0, true)
            } else {
                (num / den as f64, false)
            }
        };
        (self.location, self.location_undefined) = ratio(self.matched as f64, self.gt_calls);
        (self.function, self.function_undefined) =
            ratio(self.correct_functions as f64, self.matched);
        (self.argument, self.argument_undefined) =
            ratio(self.argument_ratio_sum, self.argument_pairs);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: MatchConfig,
    /// Ground-truth programs scored.
    pub programs: usize,
    pub missing_predictions: usize,
    /// variance → n → bucket.
    pub variance: BTreeMap<usize, BTreeMap<usize, BucketScore>>,
    /// variance → function → n → cumulative tally.
    pub per_function: BTreeMap<usize, BTreeMap<String, BTreeMap<usize, FunctionTally>>>,
    pub diagnostics: Vec<Diagnostic>,
}

impl EvalReport {
    pub fn bucket(&self, variance: usize, n: usize) -> Option<&BucketScore> {
        self.variance.get(&variance)?.get(&n)
    }
}

/// Scores of every program at every configured variance.
#[derive(Debug, Clone)]
pub struct ProgramResult {
    pub program: String,
    pub n_gt_calls: usize,
    /// Parallel to `MatchConfig::variances`.
    pub scores: Vec<ProgramScore>,
}

pub fn evaluate_corpus(
    gt: &[DatasetRecord],
    preds: &[PredictionRecord],
    cfg: &MatchConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    let mut diagnostics = Vec::new();

    let mut by_id: HashMap<&str, &PredictionRecord> = HashMap::new();
    for p in preds {
        if by_id.insert(p.program_id.as_str(), p).is_some() {
            diagnostics.push(
                Diagnostic::new(
                    DiagKind::DuplicatePrediction,
                    "duplicate prediction; the last one is used",
                )
                .for_program(&p.program_id),
            );
        }
    }
    let known: std::collections::HashSet<&str> = gt.iter().map(|r| r.program.as_str()).collect();
    let mut unknown: Vec<&str> = by_id.keys().copied().filter(|id| !known.contains(id)).collect();
    unknown.sort_unstable();
    for id in unknown {
        diagnostics.push(
            Diagnostic::new(DiagKind::UnknownProgram, "prediction for a program not in the ground truth")
                .for_program(id),
        );
    }

    let scored: Vec<(ProgramResult, Vec<Diagnostic>)> = gt
        .par_iter()
        .map(|record| score_record(record, by_id.get(record.program.as_str()).copied(), cfg))
        .collect();

    let mut missing = 0;
    let mut results = Vec::with_capacity(scored.len());
    for (result, diags) in scored {
        if diags.iter().any(|d| d.kind == DiagKind::MissingPrediction) {
            missing += 1;
        }
        diagnostics.extend(diags);
        results.push(result);
    }

    let mut report = aggregate(&results, cfg);
    report.missing_predictions = missing;
    report.diagnostics = diagnostics;
    Ok(report)
}

/// Scores one ground-truth record against its prediction (empty if none).
pub fn score_record(
    record: &DatasetRecord,
    pred: Option<&PredictionRecord>,
    cfg: &MatchConfig,
) -> (ProgramResult, Vec<Diagnostic>) {
    let example = record.to_example();
    let mut diagnostics = Vec::new();
    let pred_labels = match pred {
        None => {
            diagnostics.push(Diagnostic::new(
                DiagKind::MissingPrediction,
                "no prediction; scored as empty",
            ));
            Vec::new()
        }
        Some(p) => match p.format {
            PredictionFormat::Labels => {
                let parsed = parse_labels(&p.payload);
                diagnostics.extend(parsed.diagnostics);
                parsed.labels
            }
            PredictionFormat::FullCode => {
                let (labels, diags) = align_full_code(&example, &p.payload);
                diagnostics.extend(diags);
                labels
            }
        },
    };
    tag_program(&mut diagnostics, &record.program);

    let gt_calls = scored_calls(&example.labels);
    let pred_calls = scored_calls(&pred_labels);
    let scores = cfg
        .variances
        .iter()
        .map(|&v| score_program(&gt_calls, &pred_calls, v))
        .collect();
    (
        ProgramResult {
            program: record.program.clone(),
            n_gt_calls: gt_calls.len(),
            scores,
        },
        diagnostics,
    )
}

/// Folds per-program results into cumulative buckets.
pub fn aggregate(results: &[ProgramResult], cfg: &MatchConfig) -> EvalReport {
    let mut variance = BTreeMap::new();
    let mut per_function = BTreeMap::new();
    for (vi, &v) in cfg.variances.iter().enumerate() {
        // Programs grouped by their exact call count, then accumulated.
        let mut exact: Vec<BucketScore> = vec![BucketScore::default(); cfg.max_n + 1];
        let mut exact_fn: Vec<BTreeMap<String, FunctionTally>> = vec![BTreeMap::new(); cfg.max_n + 1];
        for r in results.iter().filter(|r| r.n_gt_calls <= cfg.max_n) {
            let s = &r.scores[vi];
            exact[r.n_gt_calls].absorb(s);
            for (name, t) in &s.per_function {
                exact_fn[r.n_gt_calls].entry(name.clone()).or_default().add(t);
            }
        }
        let mut buckets = BTreeMap::new();
        let mut running = BucketScore::default();
        let mut running_fn: BTreeMap<String, FunctionTally> = BTreeMap::new();
        let mut fn_series: BTreeMap<String, BTreeMap<usize, FunctionTally>> = BTreeMap::new();
        for n in 0..=cfg.max_n {
            let e = &exact[n];
            running.programs += e.programs;
            running.gt_calls += e.gt_calls;
            running.matched += e.matched;
            running.correct_functions += e.correct_functions;
            running.argument_ratio_sum += e.argument_ratio_sum;
            running.argument_pairs += e.argument_pairs;
            running.extra_predictions += e.extra_predictions;
            for (name, t) in &exact_fn[n] {
                running_fn.entry(name.clone()).or_default().add(t);
            }
            if n == 0 {
                continue;
            }
            let mut b = running.clone();
            b.finish();
            buckets.insert(n, b);
            for (name, t) in &running_fn {
                fn_series.entry(name.clone()).or_default().insert(n, *t);
            }
        }
        // Functions first seen in a later bucket get zero rows before it.
        for series in fn_series.values_mut() {
            for n in 1..=cfg.max_n {
                series.entry(n).or_default();
            }
        }
        variance.insert(v, buckets);
        per_function.insert(v, fn_series);
    }
    EvalReport {
        config: cfg.clone(),
        programs: results.len(),
        missing_predictions: 0,
        variance,
        per_function,
        diagnostics: Vec::new(),
    }
}
