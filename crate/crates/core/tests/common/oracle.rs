//! Exhaustive matching oracle and small scoring fixtures.

use mpistrip_core::eval::{score_program, scored_calls, ProgramScore};
use mpistrip_core::preprocess::Label;

pub fn labels(v: &[(usize, &str)]) -> Vec<Label> {
    v.iter().map(|&(l, t)| Label::new(l, t)).collect()
}

/// Name and whitespace-free arguments, parsed by hand from `NAME(a, b);`
/// or `lhs = NAME(a, b);`.
fn parse_call(text: &str) -> (String, Vec<String>) {
    let start = text.find("MPI_").unwrap();
    let open = start + text[start..].find('(').unwrap();
    let close = text.rfind(')').unwrap();
    let mut args = vec![String::new()];
    let mut depth = 0;
    for c in text[open + 1..close].chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            ',' if depth == 0 => {
                args.push(String::new());
                continue;
            }
            c if c.is_whitespace() => continue,
            _ => {}
        }
        args.last_mut().unwrap().push(c);
    }
    if args.len() == 1 && args[0].is_empty() {
        args.clear();
    }
    (text[start..open].to_string(), args)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleScore {
    pub matched: usize,
    pub correct: usize,
    pub arg_sum: f64,
    pub arg_pairs: usize,
}

/// Best score over every one-to-one assignment of ground truth to
/// predictions within `variance` lines: most matches, then least total
/// displacement, then most correct names, then largest argument sum.
pub fn exhaustive(gt: &[Label], pred: &[Label], variance: usize) -> OracleScore {
    let g: Vec<_> = gt.iter().map(|l| (l.line, parse_call(&l.call_text))).collect();
    let p: Vec<_> = pred.iter().map(|l| (l.line, parse_call(&l.call_text))).collect();
    let mut best = (OracleScore { matched: 0, correct: 0, arg_sum: 0.0, arg_pairs: 0 }, None);
    let mut used = vec![false; p.len()];
    let mut chosen: Vec<Option<usize>> = vec![None; g.len()];

    fn rec(
        i: usize,
        g: &[(usize, (String, Vec<String>))],
        p: &[(usize, (String, Vec<String>))],
        variance: usize,
        used: &mut Vec<bool>,
        chosen: &mut Vec<Option<usize>>,
        best: &mut (OracleScore, Option<(usize, i64, usize, f64)>),
    ) {
        if i == g.len() {
            let mut s = OracleScore { matched: 0, correct: 0, arg_sum: 0.0, arg_pairs: 0 };
            let mut displacement = 0;
            for (gi, c) in chosen.iter().enumerate() {
                let Some(pi) = c else { continue };
                s.matched += 1;
                displacement += g[gi].0.abs_diff(p[*pi].0);
                let ((gn, ga), (pn, pa)) = (&g[gi].1, &p[*pi].1);
                if gn == pn {
                    s.correct += 1;
                    s.arg_pairs += 1;
                    s.arg_sum += if ga.is_empty() {
                        1.0
                    } else {
                        ga.iter().zip(pa).filter(|(a, b)| a == b).count() as f64 / ga.len() as f64
                    };
                }
            }
            let key = (s.matched, -(displacement as i64), s.correct, s.arg_sum);
            if best.1.is_none_or(|b| key.partial_cmp(&b) == Some(std::cmp::Ordering::Greater)) {
                *best = (s, Some(key));
            }
            return;
        }
        chosen[i] = None;
        rec(i + 1, g, p, variance, used, chosen, best);
        for pi in 0..p.len() {
            if !used[pi] && g[i].0.abs_diff(p[pi].0) <= variance {
                used[pi] = true;
                chosen[i] = Some(pi);
                rec(i + 1, g, p, variance, used, chosen, best);
                used[pi] = false;
                chosen[i] = None;
            }
        }
    }
    rec(0, &g, &p, variance, &mut used, &mut chosen, &mut best);
    best.0
}

pub fn greedy(gt: &[Label], pred: &[Label], variance: usize) -> ProgramScore {
    score_program(&scored_calls(gt), &scored_calls(pred), variance)
}

pub fn as_oracle(s: &ProgramScore) -> OracleScore {
    OracleScore {
        matched: s.matched_locations,
        correct: s.correct_functions,
        arg_sum: s.argument_ratio_sum,
        arg_pairs: s.argument_pairs_scored,
    }
}

pub const BCAST: &str = "MPI_Bcast(&n, 1, MPI_INT, 0, MPI_COMM_WORLD);";

/// Ten small ground-truth/prediction pairs.
pub fn fixtures() -> Vec<(Vec<Label>, Vec<Label>)> {
    let init = "MPI_Init(&argc,&argv);";
    let size = "MPI_Comm_size(MPI_COMM_WORLD, &numprocs);";
    let rank = "MPI_Comm_rank(MPI_COMM_WORLD, &rank);";
    let fin = "MPI_Finalize();";
    let send = "MPI_Send(buf, 10, MPI_INT, 1, 0, MPI_COMM_WORLD);";
    let recv = "MPI_Recv(buf, 10, MPI_INT, 0, 0, MPI_COMM_WORLD, &st);";
    vec![
        // 1: the 2x2 table
        (labels(&[(6, init), (7, size)]), labels(&[(7, init), (7, size)])),
        // 2: exact copy of a six-call program
        (
            labels(&[(6, init), (7, size), (8, rank), (12, BCAST), (22, send), (25, fin)]),
            labels(&[(6, init), (7, size), (8, rank), (12, BCAST), (22, send), (25, fin)]),
        ),
        // 3: one wrong argument
        (labels(&[(12, BCAST)]), labels(&[(12, "MPI_Bcast(&n, 1, MPI_INT, 0, MPI_COMM_SELF);")])),
        // 4: everything one line late
        (
            labels(&[(3, init), (5, rank), (9, fin)]),
            labels(&[(4, init), (6, rank), (10, fin)]),
        ),
        // 5: swapped neighbours
        (labels(&[(4, send), (5, recv)]), labels(&[(4, recv), (5, send)])),
        // 6: wrong function names
        (
            labels(&[(2, init), (4, send), (7, fin)]),
            labels(&[(2, init), (4, "MPI_Isend(buf, 10, MPI_INT, 1, 0, MPI_COMM_WORLD, &req);"), (7, fin)]),
        ),
        // 7: missing and extra predictions
        (
            labels(&[(2, init), (5, send), (8, recv), (11, fin)]),
            labels(&[(2, init), (6, send), (15, "MPI_Barrier(MPI_COMM_WORLD);"), (11, fin)]),
        ),
        // 8: prediction drifts by two
        (
            labels(&[(10, send), (20, recv), (30, fin)]),
            labels(&[(12, send), (18, recv), (33, fin)]),
        ),
        // 9: two candidates for one call
        (labels(&[(5, rank), (9, size)]), labels(&[(4, rank), (6, rank), (9, size)])),
        // 10: fewer arguments and empty predictions
        (
            labels(&[(3, send), (4, recv), (6, fin)]),
            labels(&[(3, "MPI_Send(buf, 10);"), (4, "MPI_Recv(buf, 10, MPI_INT, 0, 0, MPI_COMM_WORLD, &st);")]),
        ),
    ]
}

