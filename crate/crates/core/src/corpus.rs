//! Ingest, filter, deduplicate, and turn programs into dataset records.

use std::collections::{BTreeMap, HashSet};
use std::io::BufRead;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use walkdir::WalkDir;

use crate::calls::extract_from_tokens;
use crate::count::{count_tokens, TokenizerConfig};
use crate::diag::{tag_program, DiagKind, Diagnostic};
use crate::error::{Error, Result};
use crate::lexer::{tokenize, TokenKind};
use crate::preprocess::{
    parse_labels, render_code, render_labels, strip_and_label, strip_line_numbers,
    NumberingMode, TrainingExample,
};
use crate::source::{decode_source, SourceUnit};

pub const DEFAULT_TOKEN_BUDGET: usize = 2048;

pub const SOURCE_EXTENSIONS: [&str; 4] = ["c", "cc", "cpp", "h"];

/// The eight most common MPI functions in domain-decomposition code.
pub const COMMON_CORE: [&str; 8] = [
    "MPI_Finalize",
    "MPI_Init",
    "MPI_Comm_rank",
    "MPI_Send",
    "MPI_Comm_size",
    "MPI_Recv",
    "MPI_Bcast",
    "MPI_Reduce",
];

/// One line of the output dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub program: String,
    /// Stripped code, rendered in the configured numbering mode.
    pub code: String,
    /// Label tail, one `(line, call)` per line.
    pub mpi_label: String,
}

impl DatasetRecord {
    pub fn from_example(program: impl Into<String>, example: &TrainingExample) -> Self {
        DatasetRecord {
            program: program.into(),
            code: render_code(example),
            mpi_label: render_labels(&example.labels),
        }
    }

    /// Back to a training example with bare code.
    pub fn to_example(&self) -> TrainingExample {
        let labels = parse_labels(&self.mpi_label).labels;
        TrainingExample::new(strip_line_numbers(&self.code), labels)
            .with_numbering(NumberingMode::Bare)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total_ingested: usize,
    pub total_after_filter: usize,
    pub total_after_dedup: usize,
    pub total_records: usize,
    /// Every extracted call in the deduplicated corpus, by function name.
    pub per_function_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub units: Vec<SourceUnit>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Reads a directory tree of C/C++ sources or a JSONL file of
/// `{program_id, origin, text}` records.
pub fn ingest(path: &Path) -> Result<Ingested> {
    let meta = std::fs::metadata(path).map_err(|e| Error::io(path, e))?;
    if meta.is_dir() {
        Ok(ingest_dir(path))
    } else {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        ingest_jsonl(std::io::BufReader::new(file), &stem).map_err(|e| Error::io(path, e))
    }
}

fn is_source_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| SOURCE_EXTENSIONS.contains(&e))
}

/// Files are visited in sorted path order. The program id is the path
/// relative to `root`; the origin is its first directory component.
pub fn ingest_dir(root: &Path) -> Ingested {
    let mut out = Ingested::default();
    let mut paths: Vec<PathBuf> = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        match entry {
            Ok(e) if e.file_type().is_file() && is_source_file(e.path()) => {
                paths.push(e.into_path())
            }
            Ok(_) => {}
            Err(err) => out.diagnostics.push(Diagnostic::new(
                DiagKind::UnreadableFile,
                format!("cannot walk: {err}"),
            )),
        }
    }
    for path in paths {
        let rel = path.strip_prefix(root).unwrap_or(&path);
        let program_id = rel.to_string_lossy().replace('\\', "/");
        let origin = match rel.components().count() {
            0 | 1 => String::new(),
            _ => rel
                .components()
                .next()
                .map(|c| c.as_os_str().to_string_lossy().into_owned())
                .unwrap_or_default(),
        };
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(err) => {
                out.diagnostics.push(
                    Diagnostic::new(DiagKind::UnreadableFile, format!("cannot read: {err}"))
                        .for_program(&program_id),
                );
                continue;
            }
        };
        let (text, bad_utf8) = decode_source(&bytes);
        if let Some(d) = bad_utf8 {
            out.diagnostics.push(d.for_program(&program_id));
        }
        match SourceUnit::new(&program_id, origin, text) {
            Ok(unit) => out.units.push(unit),
            Err(_) => out.diagnostics.push(
                Diagnostic::new(DiagKind::EmptySource, "empty file skipped").for_program(&program_id),
            ),
        }
    }
    out
}

#[derive(Deserialize)]
struct SourceRecord {
    program_id: Option<String>,
    origin: Option<String>,
    text: String,
}

/// One unit per well-formed line. Missing ids become `<stem>:<line>`.
pub fn ingest_jsonl<R: BufRead>(reader: R, stem: &str) -> std::io::Result<Ingested> {
    let mut out = Ingested::default();
    for (i, line) in reader.split(b'\n').enumerate() {
        let raw = line?;
        let (line, bad_utf8) = decode_source(&raw);
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: SourceRecord = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(err) => {
                out.diagnostics.push(
                    Diagnostic::new(DiagKind::MalformedRecord, format!("skipped: {err}"))
                        .at_line(lineno),
                );
                continue;
            }
        };
        let program_id = record
            .program_id
            .unwrap_or_else(|| format!("{stem}:{lineno}"));
        if let Some(d) = bad_utf8 {
            out.diagnostics.push(d.for_program(&program_id));
        }
        match SourceUnit::new(&program_id, record.origin.unwrap_or_default(), record.text) {
            Ok(unit) => out.units.push(unit),
            Err(_) => out.diagnostics.push(
                Diagnostic::new(DiagKind::EmptySource, "empty text skipped")
                    .for_program(&program_id)
                    .at_line(lineno),
            ),
        }
    }
    Ok(out)
}

/// True when the program calls both `MPI_Init` and `MPI_Finalize` and fits
/// in `budget` tokens (inclusive).
pub fn filter_mpi_program(unit: &SourceUnit, budget: usize, tokenizer: &TokenizerConfig) -> bool {
    let text = unit.text();
    let lexed = tokenize(text);
    let sites = extract_from_tokens(text, &lexed).sites;
    let has = |name: &str| sites.iter().any(|s| s.function_name == name);
    has("MPI_Init") && has("MPI_Finalize") && count_tokens(text, tokenizer) <= budget
}

/// Comments dropped, whitespace runs collapsed to one space.
pub fn normalize_for_dedup(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut space = false;
    for tok in tokenize(text).tokens {
        match tok.kind {
            TokenKind::Whitespace | TokenKind::Comment => space = true,
            _ => {
                if space && !out.is_empty() {
                    out.push(' ');
                }
                space = false;
                if tok.kind == TokenKind::PreprocessorDirective {
                    out.push_str(&tok.text.split_whitespace().collect::<Vec<_>>().join(" "));
                } else {
                    out.push_str(tok.text);
                }
            }
        }
    }
    out
}

pub fn content_hash(text: &str) -> [u8; 32] {
    Sha256::digest(normalize_for_dedup(text).as_bytes()).into()
}

/// Keeps the first unit of each normalization class, in input order.
pub fn deduplicate(units: Vec<SourceUnit>) -> Vec<SourceUnit> {
    let hashes: Vec<[u8; 32]> = units.par_iter().map(|u| content_hash(u.text())).collect();
    let mut seen = HashSet::with_capacity(units.len());
    units
        .into_iter()
        .zip(hashes)
        .filter_map(|(unit, h)| seen.insert(h).then_some(unit))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct Built {
    pub records: Vec<DatasetRecord>,
    pub per_function_counts: BTreeMap<String, usize>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Strips and labels every unit. Units with no removable call are
/// excluded. Call counts cover every extracted site of every unit.
pub fn build_dataset(units: &[SourceUnit], numbering: NumberingMode) -> Built {
    let per_unit: Vec<_> = units
        .par_iter()
        .map(|unit| {
            let stripped = strip_and_label(unit);
            let mut diagnostics = stripped.diagnostics;
            let names: Vec<String> = stripped.sites.iter().map(|s| s.function_name.clone()).collect();
            let record = if stripped.example.labels.is_empty() {
                diagnostics.push(Diagnostic::new(
                    DiagKind::ExcludedProgram,
                    "no removable MPI call statement; program excluded",
                ));
                None
            } else {
                let example = stripped.example.with_numbering(numbering);
                Some(DatasetRecord::from_example(&unit.program_id, &example))
            };
            tag_program(&mut diagnostics, &unit.program_id);
            (record, names, diagnostics)
        })
        .collect();

    let mut built = Built::default();
    for (record, names, diagnostics) in per_unit {
        built.records.extend(record);
        for name in names {
            *built.per_function_counts.entry(name).or_default() += 1;
        }
        built.diagnostics.extend(diagnostics);
    }
    built
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub token_budget: usize,
    pub tokenizer: TokenizerConfig,
    pub numbering: NumberingMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            token_budget: DEFAULT_TOKEN_BUDGET,
            tokenizer: TokenizerConfig::Lexical,
            numbering: NumberingMode::Prefixed,
        }
    }
}

/// filter, then dedup, then strip-and-label. Runs on the current rayon pool.
pub fn run_pipeline(units: Vec<SourceUnit>, cfg: &PipelineConfig) -> (Built, CorpusStats) {
    let total_ingested = units.len();
    let keep: Vec<bool> = units
        .par_iter()
        .map(|u| filter_mpi_program(u, cfg.token_budget, &cfg.tokenizer))
        .collect();
    let filtered: Vec<SourceUnit> = units
        .into_iter()
        .zip(keep)
        .filter_map(|(u, k)| k.then_some(u))
        .collect();
    let total_after_filter = filtered.len();
    let deduped = deduplicate(filtered);
    let built = build_dataset(&deduped, cfg.numbering);
    let stats = CorpusStats {
        total_ingested,
        total_after_filter,
        total_after_dedup: deduped.len(),
        total_records: built.records.len(),
        per_function_counts: built.per_function_counts.clone(),
    };
    (built, stats)
}

/// Rows for the common-core functions, zero-filled, most frequent first.
/// Ties keep the canonical order of [`COMMON_CORE`].
pub fn common_core_distribution(stats: &CorpusStats) -> Vec<(String, usize)> {
    let mut rows: Vec<(String, usize)> = COMMON_CORE
        .iter()
        .map(|f| (f.to_string(), stats.per_function_counts.get(*f).copied().unwrap_or(0)))
        .collect();
    rows.sort_by_key(|r| std::cmp::Reverse(r.1));
    rows
}

/// Call counts recovered from dataset records: the labels plus any calls
/// still embedded in the stripped code.
pub fn count_calls_in_records(records: &[DatasetRecord]) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for record in records {
        let example = record.to_example();
        let embedded = crate::calls::extract_mpi_calls(&example.stripped_code).sites;
        let names = example
            .labels
            .iter()
            .filter_map(|l| l.function_name())
            .chain(embedded.into_iter().map(|s| s.function_name));
        for name in names {
            *counts.entry(name).or_default() += 1;
        }
    }
    counts
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    use std::io::Write;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for row in rows {
        let line = serde_json::to_string(row).map_err(|e| Error::json(path, e))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Strict reader: the first malformed line is an error.
pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| Error::json(path, e))?);
    }
    Ok(rows)
}
