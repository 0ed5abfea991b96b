//! Plot-ready tables from an evaluation report and corpus statistics.
//!
//! CSV schemas:
//!
//! - `curves.csv`: `metric,variance,n,accuracy,programs`
//! - `breakdown.csv`: `function,n,gt_count,accuracy`
//! - `distribution.csv`: `function,count`
//!
//! Accuracies carry four decimals in both CSV and JSON output.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{common_core_distribution, CorpusStats, COMMON_CORE};
use crate::error::{Error, Result};
use crate::eval::EvalReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Locations,
    Functions,
    Arguments,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Locations, Metric::Functions, Metric::Arguments];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Locations => "locations",
            Metric::Functions => "functions",
            Metric::Arguments => "arguments",
        }
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub n: usize,
    pub value: f64,
    pub programs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveSeries {
    pub label: String,
    pub metric: Metric,
    pub variance: usize,
    /// Ascending in `n`.
    pub points: Vec<CurvePoint>,
}

/// One series per variance, `n` running over the report's buckets.
pub fn accuracy_curves(report: &EvalReport, metric: Metric) -> Vec<CurveSeries> {
    report
        .variance
        .iter()
        .map(|(&v, buckets)| CurveSeries {
            label: format!("variance {v}"),
            metric,
            variance: v,
            points: buckets
                .iter()
                .map(|(&n, b)| CurvePoint {
                    n,
                    value: match metric {
                        Metric::Locations => b.location,
                        Metric::Functions => b.function,
                        Metric::Arguments => b.argument,
                    },
                    programs: b.programs,
                })
                .collect(),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownRow {
    pub function: String,
    pub n: usize,
    /// Ground-truth calls of this function in bucket `n`.
    pub gt_count: usize,
    /// Calls predicted at the right location with the right name, over
    /// `gt_count` (0 when there are none).
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackedDistribution {
    pub variance: usize,
    /// Ordered by the requested functions, then by `n`.
    pub rows: Vec<BreakdownRow>,
}

/// The variance used when none is requested: 2 if evaluated, else the
/// largest one.
pub fn default_breakdown_variance(report: &EvalReport) -> Option<usize> {
    if report.variance.contains_key(&2) {
        Some(2)
    } else {
        report.variance.keys().next_back().copied()
    }
}

/// Per-function ground-truth counts and prediction accuracy for every
/// bucket. Functions absent from the report get zero rows.
pub fn function_breakdown(
    report: &EvalReport,
    functions: &[&str],
    variance: Option<usize>,
) -> StackedDistribution {
    let Some(variance) = variance.or_else(|| default_breakdown_variance(report)) else {
        return StackedDistribution {
            variance: 0,
            rows: Vec::new(),
        };
    };
    let ns: Vec<usize> = report
        .variance
        .get(&variance)
        .map(|b| b.keys().copied().collect())
        .unwrap_or_default();
    let tallies = report.per_function.get(&variance);
    let mut rows = Vec::with_capacity(functions.len() * ns.len());
    for &function in functions {
        let series = tallies.and_then(|t| t.get(function));
        for &n in &ns {
            let t = series.and_then(|s| s.get(&n)).copied().unwrap_or_default();
            rows.push(BreakdownRow {
                function: function.to_string(),
                n,
                gt_count: t.gt_count,
                accuracy: if t.gt_count == 0 {
                    0.0
                } else {
                    t.correct as f64 / t.gt_count as f64
                },
            });
        }
    }
    StackedDistribution { variance, rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown report format `{other}` (expected json or csv)")),
        }
    }
}

fn round4(x: f64) -> f64 {
    format!("{x:.4}").parse().unwrap()
}

#[derive(Serialize)]
struct CurveRow {
    metric: Metric,
    variance: usize,
    n: usize,
    accuracy: f64,
    programs: usize,
}

#[derive(Serialize)]
struct DistributionRow {
    function: String,
    count: usize,
}

#[derive(Serialize)]
struct JsonReport {
    curves: Vec<CurveRow>,
    breakdown_variance: usize,
    breakdown: Vec<BreakdownRow>,
    distribution: Vec<DistributionRow>,
}

/// Common-core call counts, from corpus statistics when available and from
/// the report's ground truth (largest bucket) otherwise. Empty when neither
/// has any.
fn distribution(report: &EvalReport, stats: Option<&CorpusStats>) -> Vec<(String, usize)> {
    if let Some(stats) = stats {
        return common_core_distribution(stats);
    }
    let Some(tallies) = report.per_function.values().next() else {
        return Vec::new();
    };
    let mut derived = CorpusStats::default();
    for (name, series) in tallies {
        if let Some(t) = series.values().next_back() {
            derived.per_function_counts.insert(name.clone(), t.gt_count);
        }
    }
    common_core_distribution(&derived)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `report.json`, or `curves.csv`, `breakdown.csv` and
/// `distribution.csv`, into `out_dir`. Returns the paths written.
pub fn emit_report(
    report: &EvalReport,
    stats: Option<&CorpusStats>,
    format: ReportFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let curves: Vec<CurveRow> = Metric::ALL
        .into_iter()
        .flat_map(|m| accuracy_curves(report, m))
        .flat_map(|s| {
            s.points.into_iter().map(move |p| CurveRow {
                metric: s.metric,
                variance: s.variance,
                n: p.n,
                accuracy: round4(p.value),
                programs: p.programs,
            })
        })
        .collect();
    let breakdown = function_breakdown(report, &COMMON_CORE, None);
    let distribution = distribution(report, stats);

    match format {
        ReportFormat::Json => {
            let doc = JsonReport {
                curves,
                breakdown_variance: breakdown.variance,
                breakdown: breakdown
                    .rows
                    .into_iter()
                    .map(|r| BreakdownRow {
                        accuracy: round4(r.accuracy),
                        ..r
                    })
                    .collect(),
                distribution: distribution
                    .into_iter()
                    .map(|(function, count)| DistributionRow { function, count })
                    .collect(),
            };
            let path = out_dir.join("report.json");
            let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::json(&path, e))?;
            text.push('\n');
            write_file(&path, &text)?;
            Ok(vec![path])
        }
        ReportFormat::Csv => {
            let mut c = String::from("metric,variance,n,accuracy,programs\n");
            for r in &curves {
                let _ = writeln!(
                    c,
                    "{},{},{},{:.4},{}",
                    r.metric.name(),
                    r.variance,
                    r.n,
                    r.accuracy,
                    r.programs
                );
            }
            let mut b = String::from("function,n,gt_count,accuracy\n");
            for r in &breakdown.rows {
                let _ = writeln!(b, "{},{},{},{:.4}", r.function, r.n, r.gt_count, r.accuracy);
            }
            let mut d = String::from("function,count\n");
            for (function, count) in &distribution {
                let _ = writeln!(d, "{function},{count}");
            }
            let paths = ["curves.csv", "breakdown.csv", "distribution.csv"]
                .map(|f| out_dir.join(f));
            for (path, text) in paths.iter().zip([&c, &b, &d]) {
                write_file(path, text)?;
            }
            Ok(paths.to_vec())
        }
    }
}
