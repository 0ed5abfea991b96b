//! Synthetic MPI programs for tests.
#![allow(dead_code)]

pub mod oracle;

use rand::seq::SliceRandom;
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct Style {
    pub unit: &'static str,
    /// String literals and comments that mention MPI names.
    pub noise: bool,
    /// `if (MPI_...(...) != MPI_SUCCESS)` calls that are never removed.
    pub embedded: bool,
}

impl Default for Style {
    fn default() -> Self {
        Style {
            unit: "    ",
            noise: true,
            embedded: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Program {
    pub text: String,
    /// (1-based line, function name) of every removable statement.
    pub calls: Vec<(usize, String)>,
    /// Function names of embedded calls.
    pub embedded: Vec<String>,
}

const UNITS: [&str; 3] = ["    ", "  ", "\t"];

pub fn random_style<R: Rng>(rng: &mut R) -> Style {
    Style {
        unit: UNITS[rng.gen_range(0..UNITS.len())],
        noise: rng.gen_bool(0.5),
        embedded: false,
    }
}

/// A single-line MPI statement and its function name.
pub fn mpi_statement<R: Rng>(rng: &mut R) -> (String, &'static str) {
    let (text, name) = match rng.gen_range(0..12) {
        0 => ("MPI_Comm_rank(MPI_COMM_WORLD, &rank);", "MPI_Comm_rank"),
        1 => ("MPI_Comm_size(MPI_COMM_WORLD,&size);", "MPI_Comm_size"),
        2 => (
            "MPI_Send(buf, count, MPI_DOUBLE, (rank + 1) % size, tag, MPI_COMM_WORLD);",
            "MPI_Send",
        ),
        3 => (
            "MPI_Recv(buf, count, MPI_DOUBLE, MPI_ANY_SOURCE, tag, MPI_COMM_WORLD, &status);",
            "MPI_Recv",
        ),
        4 => ("MPI_Bcast(&n, 1, MPI_INT, 0, MPI_COMM_WORLD);", "MPI_Bcast"),
        5 => (
            "MPI_Reduce(&local, &total, 1, MPI_DOUBLE, MPI_SUM, 0, MPI_COMM_WORLD);",
            "MPI_Reduce",
        ),
        6 => ("MPI_Barrier(MPI_COMM_WORLD);", "MPI_Barrier"),
        7 => (
            "rc = MPI_Allreduce(&local, &total, 1, MPI_DOUBLE, MPI_MAX, MPI_COMM_WORLD);",
            "MPI_Allreduce",
        ),
        8 => ("rc = MPI_Barrier(MPI_COMM_WORLD);", "MPI_Barrier"),
        9 => (
            "MPI_Isend(buf, count, MPI_DOUBLE, 0, tag, MPI_COMM_WORLD, &req);",
            "MPI_Isend",
        ),
        10 => ("MPI_Wait(&req, &status);", "MPI_Wait"),
        _ => ("t0 = MPI_Wtime();", "MPI_Wtime"),
    };
    (text.to_string(), name)
}

fn plain_statement<R: Rng>(rng: &mut R, style: &Style) -> String {
    let pool = [
        "local = local * 0.5 + i;",
        "count = count + 1;",
        "buf[i % 64] = (double) i / (n + 1);",
        "tag++;",
        "if (rank == 0) total = 0.0;",
        "n = n > 100 ? n / 2 : n + 3;",
    ];
    let noisy = [
        "printf(\"rank %d calls MPI_Send(buf);\\n\", rank);",
        "/* MPI_Recv(buf, 1, MPI_INT); is not needed */",
        "// MPI_Bcast(&n, 1, MPI_INT, 0, comm);",
    ];
    if style.noise && rng.gen_bool(0.2) {
        noisy.choose(rng).unwrap().to_string()
    } else {
        pool.choose(rng).unwrap().to_string()
    }
}

struct Builder<'a, R> {
    rng: &'a mut R,
    style: Style,
    lines: Vec<String>,
    calls: Vec<(usize, String)>,
    embedded: Vec<String>,
}

impl<R: Rng> Builder<'_, R> {
    fn push(&mut self, depth: usize, text: &str) {
        self.lines.push(format!("{}{}", self.style.unit.repeat(depth), text));
    }

    fn call(&mut self, depth: usize, text: &str, name: &str) {
        self.push(depth, text);
        self.calls.push((self.lines.len(), name.to_string()));
    }

    /// `calls` MPI statements spread over `filler` other lines, with nested
    /// blocks.
    fn body(&mut self, depth: usize, mut calls: usize, filler: usize) {
        let mut plain = filler;
        while calls > 0 || plain > 0 {
            let pick_call = calls > 0 && (plain == 0 || self.rng.gen_bool(0.4));
            if pick_call {
                let (text, name) = mpi_statement(self.rng);
                self.call(depth, &text, name);
                calls -= 1;
                continue;
            }
            plain -= 1;
            match self.rng.gen_range(0..10) {
                0 if depth < 4 => {
                    let inner_calls = self.rng.gen_range(0..=calls.min(3));
                    let inner_plain = self.rng.gen_range(0..=plain.min(4));
                    if self.rng.gen_bool(0.5) {
                        self.push(depth, "for (i = 0; i < n; i++) {");
                    } else {
                        self.push(depth, "while (count < n)");
                        self.push(depth, "{");
                    }
                    self.body(depth + 1, inner_calls, inner_plain);
                    self.push(depth, "}");
                    calls -= inner_calls;
                    plain -= inner_plain;
                }
                1 => self.lines.push(String::new()),
                2 if self.style.embedded => {
                    self.push(depth, "if (MPI_Comm_rank(MPI_COMM_WORLD, &rank) != MPI_SUCCESS)");
                    self.push(depth + 1, "return 1;");
                    self.push(depth, "count = 0;");
                    self.embedded.push("MPI_Comm_rank".to_string());
                }
                _ => {
                    let s = plain_statement(self.rng, &self.style);
                    self.push(depth, &s);
                }
            }
        }
    }
}

/// A complete program with `n_calls` (≥ 1) removable single-line MPI
/// statements, starting with `MPI_Init` and, when `n_calls > 1`, ending
/// with `MPI_Finalize`. `filler` controls the number of other lines.
pub fn program<R: Rng>(rng: &mut R, n_calls: usize, filler: usize, style: Style) -> Program {
    assert!(n_calls >= 1);
    let id: u32 = rng.gen();
    let mut b = Builder {
        rng,
        style,
        lines: Vec::new(),
        calls: Vec::new(),
        embedded: Vec::new(),
    };
    b.push(0, "#include <mpi.h>");
    b.push(0, "#include <stdio.h>");
    b.push(0, "");
    b.push(0, &format!("/* program {id} */"));
    b.push(0, "static double scale(double v) {");
    b.push(1, &format!("return v * {id}.5;"));
    b.push(0, "}");
    b.push(0, "");
    b.push(0, "int main(int argc, char **argv) {");
    b.push(1, "int rank = 0, size = 1, rc, i, n = 16, tag = 0, count = 0;");
    b.push(1, "double buf[64], local = 0.0, total = 0.0, t0;");
    b.push(1, "MPI_Status status;");
    b.push(1, "MPI_Request req;");
    b.call(1, "MPI_Init(&argc,&argv);", "MPI_Init");
    let middle = n_calls.saturating_sub(2);
    b.body(1, middle, filler);
    if n_calls > 1 {
        b.call(1, "MPI_Finalize();", "MPI_Finalize");
    }
    b.push(1, "return 0;");
    b.push(0, "}");
    let mut text = b.lines.join("\n");
    text.push('\n');
    Program {
        text,
        calls: b.calls,
        embedded: b.embedded,
    }
}

/// The pi program fixture (Init, Comm_size, Comm_rank, Bcast, Reduce,
/// Finalize).
pub fn pi_program() -> &'static str {
    include_str!("../fixtures/pi.c")
}
