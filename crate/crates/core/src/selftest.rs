//! Randomized differential harness: every query the index answers is checked
//! against the brute-force oracle on the decompressed text.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::compress::{compute_splits, SplitMode, SplitsOutcome};
use crate::index::Index;
use crate::oracle;
use crate::{CoOccurrence, SymbolId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Drop the last reported pair from index answers (harness validation).
    DropLastPair,
}

#[derive(Debug, Clone)]
pub struct Config {
    pub cases: u64,
    pub max_len: usize,
    pub seed: u64,
    pub pairs_per_case: u32,
    pub fault: Option<Fault>,
}

impl Default for Config {
    fn default() -> Config {
        Config { cases: 50, max_len: 200, seed: 1, pairs_per_case: 6, fault: None }
    }
}

#[derive(Debug, Default)]
pub struct Report {
    pub cases: u64,
    pub queries: u64,
}

#[derive(Debug)]
pub struct Mismatch {
    pub text: Vec<u8>,
    pub p1: Vec<u8>,
    pub p2: Vec<u8>,
    pub b: u64,
    pub got: Vec<CoOccurrence>,
    pub want: Vec<CoOccurrence>,
    /// Set when the failure came from a non-query check.
    pub note: Option<String>,
}

impl std::fmt::Display for Mismatch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if let Some(note) = &self.note {
            return write!(
                f,
                "mismatch: {} (text={:?})",
                note,
                String::from_utf8_lossy(&self.text)
            );
        }
        writeln!(
            f,
            "mismatch: text={:?} p1={:?} p2={:?} b={}",
            String::from_utf8_lossy(&self.text),
            String::from_utf8_lossy(&self.p1),
            String::from_utf8_lossy(&self.p2),
            self.b
        )?;
        writeln!(f, "  index:  {:?}", pairs(&self.got))?;
        write!(f, "  oracle: {:?}", pairs(&self.want))
    }
}

fn pairs(v: &[CoOccurrence]) -> Vec<(u64, u64)> {
    v.iter().map(|c| (c.q1, c.q2)).collect()
}

fn apply_fault(fault: Option<Fault>, mut v: Vec<CoOccurrence>) -> Vec<CoOccurrence> {
    if fault == Some(Fault::DropLastPair) {
        v.pop();
    }
    v
}

/// One differential check; `Err` carries the failing instance.
#[allow(clippy::result_large_err)]
fn check_one(
    idx: &Index,
    text: &[u8],
    p1: &[u8],
    p2: &[u8],
    b: u64,
    fault: Option<Fault>,
) -> Result<(), Mismatch> {
    let got = apply_fault(fault, idx.query_close(p1, p2, b as i64).expect("valid query"));
    let want = oracle::naive_b_close(text, p1, p2, b);
    if got != want {
        return Err(Mismatch {
            text: text.to_vec(),
            p1: p1.to_vec(),
            p2: p2.to_vec(),
            b,
            got,
            want,
            note: None,
        });
    }
    Ok(())
}

fn random_text(rng: &mut StdRng, max_len: usize) -> Vec<u8> {
    let n = rng.gen_range(1..=max_len.max(1));
    let alpha = rng.gen_range(1..=4u8);
    (0..n).map(|_| b'a' + rng.gen_range(0..alpha)).collect()
}

fn random_pattern(rng: &mut StdRng, text: &[u8], max_m: usize) -> Vec<u8> {
    let m = rng.gen_range(1..=max_m).min(text.len());
    if rng.gen_bool(0.85) {
        let at = rng.gen_range(0..=text.len() - m);
        text[at..at + m].to_vec()
    } else {
        (0..m).map(|_| b'a' + rng.gen_range(0..4)).collect()
    }
}

pub fn run(config: &Config) -> Result<Report, Box<Mismatch>> {
    let mut rng = StdRng::seed_from_u64(config.seed);
    let mut report = Report::default();
    for case in 0..config.cases {
        let text = random_text(&mut rng, config.max_len);
        let idx = Index::build_from_text(&text, config.seed.wrapping_add(case)).expect("build");
        for _ in 0..config.pairs_per_case {
            let p1 = random_pattern(&mut rng, &text, 12);
            let p2 = if rng.gen_bool(0.2) && p1.len() > 1 {
                let l = rng.gen_range(1..=p1.len());
                let at = rng.gen_range(0..=p1.len() - l);
                p1[at..at + l].to_vec()
            } else {
                random_pattern(&mut rng, &text, 12)
            };
            for b in [0u64, 1, 2, 5, text.len() as u64] {
                report.queries += 1;
                if let Err(m) = check_one(&idx, &text, &p1, &p2, b, config.fault) {
                    return Err(Box::new(minimize(m, config)));
                }
            }
            // Consecutive-occurrence reporting (no distance bound).
            report.queries += 1;
            let got = apply_fault(config.fault, idx.report_all(&p1, &p2).expect("valid query"));
            let want = oracle::naive_co_occurrences(&text, &p1, &p2);
            if got != want {
                let m = Mismatch {
                    text: text.clone(),
                    p1,
                    p2,
                    b: u64::MAX,
                    got,
                    want,
                    note: Some("consecutive-occurrence report".into()),
                };
                return Err(Box::new(m));
            }
            // Split soundness: every oracle split is in the fast set.
            let p = random_pattern(&mut rng, &text, 8);
            if p.len() >= 2 {
                let fast = match compute_splits(&idx.grammar, &idx.fps, &p, SplitMode::Fast)
                    .expect("non-empty pattern")
                {
                    SplitsOutcome::Splits(s) => s.splits,
                    SplitsOutcome::NoOccurrence => Vec::new(),
                };
                let want = oracle::naive_splits(&idx.grammar, &p).expect("small grammar");
                for s in &want {
                    if !fast.contains(s) {
                        return Err(Box::new(Mismatch {
                            text: text.clone(),
                            p1: p.clone(),
                            p2: Vec::new(),
                            b: *s,
                            got: Vec::new(),
                            want: Vec::new(),
                            note: Some(format!("split {s} of {p:?} missing from fast mode")),
                        }));
                    }
                }
            }
        }
        // Exercise the per-non-terminal primitives on a sample of cases.
        if case % 5 == 0 && text.len() <= 120 {
            if let Err(note) = check_primitives(&idx, &text, &mut rng) {
                return Err(Box::new(Mismatch {
                    text: text.clone(),
                    p1: Vec::new(),
                    p2: Vec::new(),
                    b: 0,
                    got: Vec::new(),
                    want: Vec::new(),
                    note: Some(note),
                }));
            }
        }
        report.cases += 1;
    }
    Ok(report)
}

/// Greedy shrink of a failing instance: halve the text from either end while
/// the mismatch reproduces.
fn minimize(m: Mismatch, config: &Config) -> Mismatch {
    let mut best = m;
    loop {
        let n = best.text.len();
        if n <= 2 {
            return best;
        }
        let candidates: Vec<Vec<u8>> = vec![
            best.text[n / 2..].to_vec(),
            best.text[..n / 2].to_vec(),
            best.text[n / 4..n - n / 4].to_vec(),
        ];
        let mut improved = false;
        for candidate in candidates {
            if candidate.len() < best.p1.len().max(best.p2.len()).max(1) {
                continue;
            }
            if let Ok(idx) = Index::build_from_text(&candidate, config.seed) {
                if let Err(shrunk) =
                    check_one(&idx, &candidate, &best.p1, &best.p2, best.b, config.fault)
                {
                    best = shrunk;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            return best;
        }
    }
}

/// Differential sweep of the per-non-terminal primitives on one text.
pub fn check_primitives(idx: &Index, text: &[u8], rng: &mut StdRng) -> Result<u64, String> {
    use crate::occindex::{Direction, Extreme, Part};
    let g = &idx.grammar;
    let mut queries = 0;
    let exps = oracle::expand_all(g, 1 << 22).map_err(|e| e.to_string())?;
    for _ in 0..4 {
        let p = random_pattern(rng, text, 8);
        let h = idx.preprocess(&p).map_err(|e| e.to_string())?;
        for s in 0..g.len() as u32 {
            let sym = SymbolId(s);
            let exp = &exps[s as usize];
            let occ = oracle::naive_occurrences(exp, &p);
            queries += 4;
            if idx.occ.occurs_in(g, &h, sym) != !occ.is_empty() {
                return Err(format!("occurs_in mismatch sym={s} p={p:?}"));
            }
            let rel: Vec<u64> = oracle::naive_relevant(g, sym, &p)
                .map_err(|e| e.to_string())?
                .into_iter()
                .map(|(q, _)| q)
                .collect();
            if idx.occ.relevant_occurrences(g, &h, sym) != rel {
                return Err(format!("relevant mismatch sym={s} p={p:?}"));
            }
            if idx.occ.extremal(g, &h, sym, Extreme::Leftmost, Part::Whole) != occ.first().copied()
            {
                return Err(format!("leftmost mismatch sym={s} p={p:?}"));
            }
            if idx.occ.extremal(g, &h, sym, Extreme::Rightmost, Part::Whole) != occ.last().copied()
            {
                return Err(format!("rightmost mismatch sym={s} p={p:?}"));
            }
            if exp.len() <= 300 {
                for pp in 0..exp.len() as u64 {
                    queries += 2;
                    let want_pred = occ.iter().rev().find(|&&q| q <= pp).copied();
                    let want_succ = occ.iter().find(|&&q| q >= pp).copied();
                    let got_pred = idx
                        .occ
                        .pred_succ(g, &h, sym, pp, Direction::Pred)
                        .map_err(|e| e.to_string())?;
                    if got_pred != want_pred {
                        return Err(format!("pred mismatch sym={s} p={p:?} pos={pp}"));
                    }
                    let got_succ = idx
                        .occ
                        .pred_succ(g, &h, sym, pp, Direction::Succ)
                        .map_err(|e| e.to_string())?;
                    if got_succ != want_succ {
                        return Err(format!("succ mismatch sym={s} p={p:?} pos={pp}"));
                    }
                }
            }
        }
    }
    Ok(queries)
}
