//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use common::oracle::{as_oracle, exhaustive, fixtures, greedy};
use mpistrip_core::anonymize::{anonymize_with, deanonymize, AnonymizeOptions};
use mpistrip_core::calls::extract_mpi_calls;
use mpistrip_core::corpus::{read_jsonl, DatasetRecord, COMMON_CORE};
use mpistrip_core::eval::{score_program, scored_calls, PredictionRecord};
use mpistrip_core::preprocess::{reinsert, strip_text, Label};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn mpistrip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mpistrip"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> Result<&[u8], String> {
    if out.status.success() {
        Ok(&out.stdout)
    } else {
        Err(format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)))
    }
}

fn check(cond: bool, detail: impl Into<String>) -> Outcome {
    let detail = detail.into();
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: Duration) -> Outcome {
    check(elapsed < limit, format!("{:.2}s (limit {:.0}s)", elapsed.as_secs_f64(), limit.as_secs_f64()))
}

fn write_program_dir(dir: &Path, programs: &[String]) {
    for (i, text) in programs.iter().enumerate() {
        std::fs::write(dir.join(format!("prog{i:04}.c")), text).unwrap();
    }
}

fn golden_pi() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pi.c");
    std::fs::write(&path, common::pi_program()).unwrap();
    let start = Instant::now();
    let out = mpistrip(&["preprocess", path.to_str().unwrap(), "--numbering", "bare"]);
    let elapsed = start.elapsed();
    let text = String::from_utf8(ok(&out)?.to_vec()).unwrap();
    let tail: Vec<&str> = text.lines().filter(|l| l.starts_with('(')).take(4).collect();
    let want = [
        "(6, MPI_Init(&argc,&argv);)",
        "(7, MPI_Comm_size(MPI_COMM_WORLD, &numprocs);)",
        "(8, MPI_Comm_rank(MPI_COMM_WORLD, &rank);)",
        "(12, MPI_Bcast(&n, 1, MPI_INT, 0, MPI_COMM_WORLD);)",
    ];
    if tail != want {
        return Err(format!("got {tail:?}"));
    }
    within(elapsed, Duration::from_secs(1))
}

fn round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let programs: Vec<String> = (0..200)
        .map(|_| {
            let n = rng.gen_range(1..=20);
            let filler = rng.gen_range(0..60);
            let style = common::random_style(&mut rng);
            common::program(&mut rng, n, filler, style).text
        })
        .collect();
    let start = Instant::now();
    let exact = programs.iter().filter(|p| reinsert(&strip_text(p).example).0 == **p).count();
    let elapsed = start.elapsed();
    check(exact == programs.len(), format!("{exact}/{} exact", programs.len()))?;
    within(elapsed, Duration::from_secs(5)).map(|t| format!("{exact}/{} exact, {t}", programs.len()))
}

fn self_evaluation() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    std::fs::create_dir(&src).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut programs: Vec<String> = (0..150)
        .map(|_| {
            let n = rng.gen_range(2..=22);
            let style = common::random_style(&mut rng);
            common::program(&mut rng, n, 10, style).text
        })
        .collect();
    // one removable call; Init is embedded in a condition
    programs.push(
        "int main(int argc, char **argv) {\n    if (MPI_Init(&argc, &argv) != MPI_SUCCESS)\n        return 1;\n    MPI_Finalize();\n    return 0;\n}\n"
            .into(),
    );
    write_program_dir(&src, &programs);
    let out_dir = dir.path().join("out");
    ok(&mpistrip(&["build-corpus", src.to_str().unwrap(), out_dir.to_str().unwrap(), "--token-budget", "100000", "-q"]))?;
    let dataset = out_dir.join("dataset.jsonl");
    let records: Vec<DatasetRecord> = read_jsonl(&dataset).map_err(|e| e.to_string())?;
    let preds: Vec<String> = records
        .iter()
        .map(|r| serde_json::to_string(&PredictionRecord::labels(&r.program, &r.mpi_label)).unwrap())
        .collect();
    let pred_path = dir.path().join("pred.jsonl");
    std::fs::write(&pred_path, preds.join("\n") + "\n").unwrap();
    let report_path = dir.path().join("eval.json");
    ok(&mpistrip(&[
        "evaluate",
        "--gt",
        dataset.to_str().unwrap(),
        "--pred",
        pred_path.to_str().unwrap(),
        "--variance",
        "0,1,2",
        "--max-n",
        "20",
        "--out",
        report_path.to_str().unwrap(),
    ]))?;
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    let mut cells = 0;
    for v in ["0", "1", "2"] {
        for n in 1..=20 {
            let b = &report["variance"][v][n.to_string()];
            if b["programs"].as_u64().unwrap_or(0) == 0 {
                return Err(format!("bucket v={v} n={n} is empty"));
            }
            for metric in ["location", "function", "argument"] {
                if b[metric].as_f64() != Some(1.0) {
                    return Err(format!("v={v} n={n} {metric} = {}", b[metric]));
                }
            }
            cells += 1;
        }
    }
    check(true, format!("{} programs, {cells} buckets x 3 metrics at 1.0", records.len()))
}

fn variance_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut held = 0;
    let pairs = 500;
    for _ in 0..pairs {
        let n = rng.gen_range(1..=20);
        let style = common::random_style(&mut rng);
        let filler = rng.gen_range(0..30);
        let p = common::program(&mut rng, n, filler, style);
        let gt = strip_text(&p.text).example.labels;
        let mut pred = Vec::new();
        for l in &gt {
            let line = (l.line as i64 + rng.gen_range(-3i64..=3)).max(1) as usize;
            match rng.gen_range(0..6) {
                0 => {}
                1 => pred.push(Label::new(line, "MPI_Barrier(MPI_COMM_WORLD);")),
                2 => {
                    pred.push(Label::new(line, l.call_text.clone()));
                    pred.push(Label::new(line + 1, l.call_text.clone()));
                }
                _ => pred.push(Label::new(line, l.call_text.clone())),
            }
        }
        let (g, p) = (scored_calls(&gt), scored_calls(&pred));
        let acc: Vec<f64> = (0..=2).map(|v| score_program(&g, &p, v).location_accuracy()).collect();
        if acc[0] <= acc[1] && acc[1] <= acc[2] {
            held += 1;
        }
    }
    check(held == pairs, format!("{held}/{pairs} pairs"))
}

fn metric_oracle() -> Outcome {
    let mut agree = 0;
    let all = fixtures();
    for (gt, pred) in &all {
        if (0..=2).all(|v| as_oracle(&greedy(gt, pred, v)) == exhaustive(gt, pred, v)) {
            agree += 1;
        }
    }
    let (gt, pred) = &all[2];
    let s = greedy(gt, pred, 0);
    let bcast = s.argument_ratio_sum / s.argument_pairs_scored as f64;
    check(
        agree == all.len() && bcast == 0.8,
        format!("{agree}/{} fixtures agree at variances 0-2, Bcast argument score {bcast}", all.len()),
    )
}

fn anonymizer() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(600);
    let mut files = vec![common::pi_program().to_string()];
    while files.len() < 600 {
        let n = rng.gen_range(1..=20);
        let mut style = common::random_style(&mut rng);
        style.embedded = rng.gen_bool(0.3);
        let filler = rng.gen_range(0..80);
        files.push(common::program(&mut rng, n, filler, style).text);
    }
    let multiset = |code: &str| {
        let mut m: BTreeMap<String, usize> = BTreeMap::new();
        for s in extract_mpi_calls(code).sites {
            *m.entry(s.function_name).or_default() += 1;
        }
        m
    };
    let (mut exact, mut same_calls, mut deterministic) = (0, 0, 0);
    for (i, code) in files.iter().enumerate() {
        let opts = AnonymizeOptions { seed: i as u64, strings: i % 2 == 0 };
        let a = anonymize_with(code, &opts);
        let b = anonymize_with(code, &opts);
        exact += usize::from(deanonymize(&a.code, &a.map).ok().as_deref() == Some(code.as_str()));
        same_calls += usize::from(multiset(&a.code) == multiset(code));
        deterministic += usize::from(a.code == b.code && a.map == b.map);
    }
    let n = files.len();
    check(
        exact == n && same_calls == n && deterministic == n,
        format!("{n} files: round trip {exact}, call multiset {same_calls}, deterministic {deterministic}"),
    )
}

fn substring_count(text: &str, name: &str) -> usize {
    let needle = format!("{name}(");
    text.match_indices(&needle)
        .filter(|(i, _)| *i == 0 || !matches!(text.as_bytes()[i - 1], b'a'..=b'z' | b'A'..=b'Z' | b'0'..=b'9' | b'_'))
        .count()
}

fn distribution() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let programs: Vec<String> = (0..80)
        .map(|_| {
            let n = rng.gen_range(2..=20);
            let style = common::Style {
                noise: false,
                embedded: rng.gen_bool(0.5),
                ..common::random_style(&mut rng)
            };
            let filler = rng.gen_range(0..40);
            common::program(&mut rng, n, filler, style).text
        })
        .collect();
    write_program_dir(dir.path(), &programs);
    let out = mpistrip(&["stats", dir.path().to_str().unwrap(), "--json", "--token-budget", "100000", "-q"]);
    let doc: serde_json::Value = serde_json::from_slice(ok(&out)?).map_err(|e| e.to_string())?;
    if doc["stats"]["total_records"].as_u64() != Some(programs.len() as u64) {
        return Err(format!("kept {} of {} programs", doc["stats"]["total_records"], programs.len()));
    }
    let got: BTreeMap<String, u64> = doc["distribution"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["function"].as_str().unwrap().to_string(), r["count"].as_u64().unwrap()))
        .collect();
    let want: BTreeMap<String, u64> = COMMON_CORE
        .iter()
        .map(|f| (f.to_string(), programs.iter().map(|p| substring_count(p, f) as u64).sum()))
        .collect();
    check(got == want, format!("{} functions, total {} calls", want.len(), want.values().sum::<u64>()))
        .map_err(|d| format!("{d}; got {got:?}, want {want:?}"))
}

fn throughput() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    std::fs::create_dir(&src).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let mut lines = 0;
    let programs: Vec<String> = (0..1000)
        .map(|_| {
            let n = rng.gen_range(4..=20);
            let style = common::random_style(&mut rng);
            let mut text = common::program(&mut rng, n, 60, style).text;
            while text.lines().count() < 200 {
                text.push_str("static int pad_");
                text.push_str(&rng.gen::<u32>().to_string());
                text.push_str(" = 0;\n");
            }
            lines += text.lines().count();
            text
        })
        .collect();
    write_program_dir(&src, &programs);
    let out_dir = dir.path().join("out");
    let start = Instant::now();
    ok(&mpistrip(&["--jobs", "1", "-q", "build-corpus", src.to_str().unwrap(), out_dir.to_str().unwrap()]))?;
    let elapsed = start.elapsed();
    let records = std::fs::read_to_string(out_dir.join("dataset.jsonl")).unwrap().lines().count();
    within(elapsed, Duration::from_secs(10))
        .map(|t| format!("1000 files, {} lines on average, {records} records, {t}", lines / 1000))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("pi program golden labels", golden_pi),
        ("strip and reinsert round trip", round_trip),
        ("self-evaluation identity", self_evaluation),
        ("variance monotonicity", variance_monotonicity),
        ("metric oracle equivalence", metric_oracle),
        ("anonymizer properties", anonymizer),
        ("common core distribution", distribution),
        ("build-corpus throughput", throughput),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
