//! `mpistrip`: build MPI call-completion corpora and score predictions.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use mpistrip_core::analytics::{emit_report, ReportFormat};
use mpistrip_core::anonymize::{anonymize_with, deanonymize, AnonymizationMap, AnonymizeOptions, DEFAULT_SEED};
use mpistrip_core::corpus::{
    common_core_distribution, count_calls_in_records, ingest, read_jsonl, run_pipeline,
    write_jsonl, CorpusStats, DatasetRecord, PipelineConfig, DEFAULT_TOKEN_BUDGET,
};
use mpistrip_core::eval::{evaluate_corpus, EvalReport, MatchConfig, PredictionRecord, DEFAULT_MAX_N};
use mpistrip_core::preprocess::{render_example, strip_text};
use mpistrip_core::source::decode_source;
use mpistrip_core::{Diagnostic, Error, NumberingMode, TokenizerConfig};

const EXIT_CODES: &str = "\
Exit status:
  0  success
  1  unexpected failure
  2  usage error (unknown flag, bad value)
  3  missing or unreadable file, or a write failure
  4  malformed input (JSON/JSONL, unknown placeholder)
  5  invalid configuration (config file, tokenizer, merges)

Errors are printed to standard error as one JSON object; diagnostics are
streamed to standard error as JSON lines.";

#[derive(Parser, Debug)]
#[command(name = "mpistrip", version, about = "Build MPI call-completion corpora and score predictions", after_help = EXIT_CODES)]
struct Cli {
    /// Worker threads for build-corpus and evaluate [default: all cores]
    #[arg(long, global = true, env = "MPISTRIP_JOBS")]
    jobs: Option<usize>,

    /// JSON file with default settings; command-line flags take precedence
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Do not print diagnostics
    #[arg(long, short, global = true)]
    quiet: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ingest, filter, deduplicate and strip a corpus into dataset.jsonl and stats.json
    BuildCorpus(BuildCorpusArgs),
    /// Print the stripped, labeled form of one source file
    Preprocess(PreprocessArgs),
    /// Replace identifiers and literals with placeholders
    Anonymize(AnonymizeArgs),
    /// Undo anonymize using its map
    Deanonymize(DeanonymizeArgs),
    /// Score predictions against a dataset
    Evaluate(EvaluateArgs),
    /// Common-core call distribution of a corpus or dataset
    Stats(StatsArgs),
    /// Turn an evaluation report into plot-ready files
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct CorpusOpts {
    /// Maximum tokens per program, inclusive [default: 2048]
    #[arg(long)]
    token_budget: Option<usize>,
    /// Token counting scheme: lexical or bpe [default: lexical]
    #[arg(long)]
    tokenizer: Option<String>,
    /// BPE merges file (merges.txt or tokenizer.json), required for bpe
    #[arg(long, value_name = "FILE")]
    merges: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BuildCorpusArgs {
    /// Directory of .c/.cc/.cpp/.h files, or JSONL of {program_id, origin, text}
    input: PathBuf,
    /// Output directory
    output: PathBuf,
    #[command(flatten)]
    corpus: CorpusOpts,
    /// Line numbering of the code field: prefixed or bare [default: prefixed]
    #[arg(long)]
    numbering: Option<NumberingMode>,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    file: PathBuf,
    /// prefixed or bare [default: prefixed]
    #[arg(long)]
    numbering: Option<NumberingMode>,
}

#[derive(Args, Debug)]
struct AnonymizeArgs {
    file: PathBuf,
    /// Placeholder seed [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Write the anonymization map here
    #[arg(long, value_name = "FILE")]
    map: Option<PathBuf>,
    /// Also replace string and character literals
    #[arg(long)]
    strings: bool,
}

#[derive(Args, Debug)]
struct DeanonymizeArgs {
    file: PathBuf,
    /// Map written by anonymize
    #[arg(long, value_name = "FILE")]
    map: PathBuf,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Ground-truth dataset JSONL
    #[arg(long, value_name = "FILE")]
    gt: PathBuf,
    /// Predictions JSONL of {program_id, format, payload}
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// Line tolerances, comma separated [default: 0,1,2]
    #[arg(long, value_delimiter = ',')]
    variance: Option<Vec<usize>>,
    /// Largest call-count bucket [default: 20]
    #[arg(long)]
    max_n: Option<usize>,
    /// Write the report here instead of standard output
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    /// Dataset JSONL, source JSONL, or a source directory (filtered and deduplicated first)
    input: PathBuf,
    #[command(flatten)]
    corpus: CorpusOpts,
    /// Print JSON instead of a table
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Report written by evaluate
    report: PathBuf,
    /// json or csv [default: json]
    #[arg(long)]
    format: Option<ReportFormat>,
    /// Output directory [default: .]
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// stats.json from build-corpus, for the distribution table
    #[arg(long, value_name = "FILE")]
    stats: Option<PathBuf>,
}

/// Settings file. Every field is optional.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    jobs: Option<usize>,
    token_budget: Option<usize>,
    tokenizer: Option<String>,
    merges: Option<PathBuf>,
    numbering: Option<NumberingMode>,
    variances: Option<Vec<usize>>,
    max_n: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug)]
struct CliError {
    code: u8,
    kind: &'static str,
    message: String,
}

impl CliError {
    fn new(code: u8, kind: &'static str, message: impl Into<String>) -> Self {
        CliError {
            code,
            kind,
            message: message.into(),
        }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::new(3, "io", format!("{}: {e}", path.display()))
    }

    fn to_json_line(&self) -> String {
        serde_json::json!({"error": self.kind, "message": self.message}).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let (code, kind) = match &e {
            Error::Io { .. } => (3, "io"),
            Error::Json { .. } | Error::UnknownPlaceholder(_) | Error::EmptySource => {
                (4, "malformed_input")
            }
            Error::UnknownTokenizer(_) | Error::InvalidMerges { .. } | Error::Config(_) => {
                (5, "config")
            }
        };
        CliError::new(code, kind, e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

struct Ctx {
    file: FileConfig,
    jobs: Option<usize>,
    quiet: bool,
}

impl Ctx {
    fn report(&self, diagnostics: &[Diagnostic]) {
        if self.quiet || diagnostics.is_empty() {
            return;
        }
        let stderr = std::io::stderr();
        let mut err = stderr.lock();
        for d in diagnostics {
            let _ = writeln!(err, "{}", d.to_json_line());
        }
    }

    /// Runs `f` on a pool of `--jobs` threads.
    fn parallel<T: Send>(&self, f: impl FnOnce() -> T + Send) -> CliResult<T> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.jobs.or(self.file.jobs) {
            if n == 0 {
                return Err(CliError::new(5, "config", "jobs must be at least 1"));
            }
            builder = builder.num_threads(n);
        }
        let pool = builder
            .build()
            .map_err(|e| CliError::new(1, "internal", e.to_string()))?;
        Ok(pool.install(f))
    }

    fn pipeline(&self, opts: &CorpusOpts, numbering: Option<NumberingMode>) -> CliResult<PipelineConfig> {
        let name = opts
            .tokenizer
            .as_deref()
            .or(self.file.tokenizer.as_deref())
            .unwrap_or("lexical");
        let merges = opts.merges.as_deref().or(self.file.merges.as_deref());
        Ok(PipelineConfig {
            token_budget: opts
                .token_budget
                .or(self.file.token_budget)
                .unwrap_or(DEFAULT_TOKEN_BUDGET),
            tokenizer: TokenizerConfig::from_name(name, merges)?,
            numbering: numbering.or(self.file.numbering).unwrap_or_default(),
        })
    }
}

fn read_text(path: &Path) -> CliResult<(String, Option<Diagnostic>)> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(decode_source(&bytes))
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::new(4, "malformed_input", format!("{}: {e}", path.display())))
}

fn print(text: &str) -> CliResult<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| CliError::new(3, "io", format!("standard output: {e}")))
}

fn build_corpus(ctx: &Ctx, args: &BuildCorpusArgs) -> CliResult<()> {
    let cfg = ctx.pipeline(&args.corpus, args.numbering)?;
    let ingested = ingest(&args.input)?;
    ctx.report(&ingested.diagnostics);
    let (built, stats) = ctx.parallel(|| run_pipeline(ingested.units, &cfg))?;
    ctx.report(&built.diagnostics);
    std::fs::create_dir_all(&args.output).map_err(|e| CliError::io(&args.output, e))?;
    write_jsonl(&args.output.join("dataset.jsonl"), &built.records)?;
    let stats_path = args.output.join("stats.json");
    let mut text = serde_json::to_string_pretty(&stats).expect("stats serialize");
    text.push('\n');
    write_text(&stats_path, &text)
}

fn preprocess(ctx: &Ctx, args: &PreprocessArgs) -> CliResult<()> {
    let (text, diag) = read_text(&args.file)?;
    ctx.report(diag.as_slice());
    let stripped = strip_text(&text);
    ctx.report(&stripped.diagnostics);
    let mode = args.numbering.or(ctx.file.numbering).unwrap_or_default();
    print(&render_example(&stripped.example.with_numbering(mode)))
}

fn anonymize_cmd(ctx: &Ctx, args: &AnonymizeArgs) -> CliResult<()> {
    let (text, diag) = read_text(&args.file)?;
    ctx.report(diag.as_slice());
    let opts = AnonymizeOptions {
        seed: args.seed.or(ctx.file.seed).unwrap_or(DEFAULT_SEED),
        strings: args.strings,
    };
    let out = anonymize_with(&text, &opts);
    ctx.report(&out.diagnostics);
    if let Some(map_path) = &args.map {
        let mut json = out.map.to_json();
        json.push('\n');
        write_text(map_path, &json)?;
    }
    print(&out.code)
}

fn deanonymize_cmd(args: &DeanonymizeArgs) -> CliResult<()> {
    let map: AnonymizationMap = read_json(&args.map)?;
    let text = std::fs::read_to_string(&args.file).map_err(|e| CliError::io(&args.file, e))?;
    print(&deanonymize(&text, &map)?)
}

fn evaluate(ctx: &Ctx, args: &EvaluateArgs) -> CliResult<()> {
    let cfg = MatchConfig {
        variances: args
            .variance
            .clone()
            .or_else(|| ctx.file.variances.clone())
            .unwrap_or_else(|| MatchConfig::default().variances),
        max_n: args.max_n.or(ctx.file.max_n).unwrap_or(DEFAULT_MAX_N),
    };
    let gt: Vec<DatasetRecord> = read_jsonl(&args.gt)?;
    let preds: Vec<PredictionRecord> = read_jsonl(&args.pred)?;
    let report = ctx.parallel(|| evaluate_corpus(&gt, &preds, &cfg))??;
    ctx.report(&report.diagnostics);
    let mut json = serde_json::to_string_pretty(&report).expect("report serializes");
    json.push('\n');
    match &args.out {
        Some(path) => write_text(path, &json),
        None => print(&json),
    }
}

enum JsonlKind {
    Dataset,
    Sources,
}

fn sniff_jsonl(path: &Path) -> CliResult<JsonlKind> {
    use std::io::BufRead;
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| CliError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| {
            CliError::new(4, "malformed_input", format!("{}: {e}", path.display()))
        })?;
        return Ok(if value.get("mpi_label").is_some() {
            JsonlKind::Dataset
        } else {
            JsonlKind::Sources
        });
    }
    Ok(JsonlKind::Dataset)
}

fn stats(ctx: &Ctx, args: &StatsArgs) -> CliResult<()> {
    let meta = std::fs::metadata(&args.input).map_err(|e| CliError::io(&args.input, e))?;
    let stats = if !meta.is_dir() && matches!(sniff_jsonl(&args.input)?, JsonlKind::Dataset) {
        let records: Vec<DatasetRecord> = read_jsonl(&args.input)?;
        CorpusStats {
            total_ingested: records.len(),
            total_after_filter: records.len(),
            total_after_dedup: records.len(),
            total_records: records.len(),
            per_function_counts: count_calls_in_records(&records),
        }
    } else {
        let cfg = ctx.pipeline(&args.corpus, None)?;
        let ingested = ingest(&args.input)?;
        ctx.report(&ingested.diagnostics);
        let (built, stats) = ctx.parallel(|| run_pipeline(ingested.units, &cfg))?;
        ctx.report(&built.diagnostics);
        stats
    };
    let rows = common_core_distribution(&stats);
    if args.json {
        let doc = serde_json::json!({
            "distribution": rows.iter().map(|(f, c)| serde_json::json!({"function": f, "count": c})).collect::<Vec<_>>(),
            "stats": stats,
        });
        return print(&format!("{}\n", serde_json::to_string_pretty(&doc).unwrap()));
    }
    let mut table = format!("{:<16}{:>10}\n", "function", "count");
    for (function, count) in &rows {
        table.push_str(&format!("{function:<16}{count:>10}\n"));
    }
    table.push_str(&format!("{:<16}{:>10}\n", "programs", stats.total_records));
    print(&table)
}

fn report(args: &ReportArgs) -> CliResult<()> {
    let report: EvalReport = read_json(&args.report)?;
    let stats: Option<CorpusStats> = args.stats.as_deref().map(read_json).transpose()?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let format = args.format.unwrap_or(ReportFormat::Json);
    for path in emit_report(&report, stats.as_ref(), format, &out)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::new(5, "config", format!("{}: {e}", path.display())))?
        }
        None => FileConfig::default(),
    };
    let ctx = Ctx {
        file,
        jobs: cli.jobs,
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::BuildCorpus(a) => build_corpus(&ctx, a),
        Command::Preprocess(a) => preprocess(&ctx, a),
        Command::Anonymize(a) => anonymize_cmd(&ctx, a),
        Command::Deanonymize(a) => deanonymize_cmd(a),
        Command::Evaluate(a) => evaluate(&ctx, a),
        Command::Stats(a) => stats(&ctx, a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::new(2, "usage", first).to_json_line());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.code)
        }
    }
}
