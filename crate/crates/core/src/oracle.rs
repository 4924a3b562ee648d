//! Brute-force ground truth over decompressed text and small grammars.
//!
//! Everything here is definition-literal and deliberately simple; these
//! functions are the trust anchor for the differential test suites.

use crate::grammar::{Grammar, SymbolId};
use crate::{CoOccurrence, GrammarError};

/// All positions `i` with `t[i..i+|p|] == p`, sorted. Occurrences may overlap.
pub fn naive_occurrences(t: &[u8], p: &[u8]) -> Vec<u64> {
    assert!(!p.is_empty(), "empty pattern");
    if p.len() > t.len() {
        return Vec::new();
    }
    (0..=t.len() - p.len())
        .filter(|&i| &t[i..i + p.len()] == p)
        .map(|i| i as u64)
        .collect()
}

/// Co-occurrences per the definition: `q1 <= q2`, no occurrence of `p1` in
/// `(q1, q2]`, no occurrence of `p2` in `[q1, q2)`.
pub fn naive_co_occurrences(t: &[u8], p1: &[u8], p2: &[u8]) -> Vec<CoOccurrence> {
    let occ1 = naive_occurrences(t, p1);
    let occ2 = naive_occurrences(t, p2);
    co_occurrences_from_lists(&occ1, &occ2)
}

/// Derives the co-occurrence list from the two sorted occurrence lists.
pub fn co_occurrences_from_lists(occ1: &[u64], occ2: &[u64]) -> Vec<CoOccurrence> {
    let mut out = Vec::new();
    for &q2 in occ2 {
        // Rightmost occurrence of p1 at or before q2; by maximality no
        // occurrence of p1 lies in (q1, q2].
        let i = occ1.partition_point(|&q| q <= q2);
        if i == 0 {
            continue;
        }
        let q1 = occ1[i - 1];
        // No occurrence of p2 in [q1, q2).
        let j = occ2.partition_point(|&q| q < q2);
        if j > 0 && occ2[j - 1] >= q1 {
            continue;
        }
        out.push(CoOccurrence::new(q1, q2));
    }
    out
}

/// Co-occurrences with `q2 - q1 <= b`.
pub fn naive_b_close(t: &[u8], p1: &[u8], p2: &[u8], b: u64) -> Vec<CoOccurrence> {
    naive_co_occurrences(t, p1, p2)
        .into_iter()
        .filter(|c| c.q2 - c.q1 <= b)
        .collect()
}

/// A relevant occurrence of `p` in the expansion of `a`: position `q` with
/// split `s = head_len - q` in `[1, |p|-1]`, i.e. the occurrence has at least
/// one character on each side of the head/tail boundary.
pub fn naive_relevant(
    g: &Grammar,
    a: SymbolId,
    p: &[u8],
) -> Result<Vec<(u64, u64)>, GrammarError> {
    let m = p.len() as u64;
    let exp = g.expand(a)?;
    let head = g.head_len(a);
    let mut out = Vec::new();
    for q in naive_occurrences(&exp, p) {
        if q < head && q + m > head {
            out.push((q, head - q));
        }
    }
    Ok(out)
}

/// Splits of `p` over all non-terminals: for run-length rules this includes
/// the reversed clause (crossings of the last copy boundary).
pub fn naive_splits(g: &Grammar, p: &[u8]) -> Result<Vec<u64>, GrammarError> {
    let m = p.len() as u64;
    let mut set = std::collections::BTreeSet::new();
    for s in 0..g.len() as u32 {
        let sym = SymbolId(s);
        for (_, split) in naive_relevant(g, sym, p)? {
            set.insert(split);
        }
        if let crate::grammar::Production::Power(b, k) = g.production(sym) {
            // Crossings of the last internal boundary, shifted maximally right.
            let lb = g.exp_len(b);
            let last = (k - 1) * lb;
            let exp = g.expand(sym)?;
            for q in naive_occurrences(&exp, p) {
                if q < last && q + m > last {
                    set.insert(last - q);
                }
            }
        }
    }
    Ok(set.into_iter().collect())
}

/// Smallest period of `x` via the KMP failure function.
pub fn period(x: &[u8]) -> u64 {
    assert!(!x.is_empty());
    let n = x.len();
    let mut fail = vec![0usize; n];
    let mut k = 0;
    for i in 1..n {
        while k > 0 && x[i] != x[k] {
            k = fail[k - 1];
        }
        if x[i] == x[k] {
            k += 1;
        }
        fail[i] = k;
    }
    (n - fail[n - 1]) as u64
}

/// `x` is periodic if its period is at most half its length.
pub fn is_periodic(x: &[u8]) -> bool {
    period(x) * 2 <= x.len() as u64
}

/// KMP search, used where the scan length matters (long texts).
pub fn kmp_occurrences(t: &[u8], p: &[u8]) -> Vec<u64> {
    assert!(!p.is_empty());
    let m = p.len();
    if m > t.len() {
        return Vec::new();
    }
    let mut fail = vec![0usize; m];
    let mut k = 0;
    for i in 1..m {
        while k > 0 && p[i] != p[k] {
            k = fail[k - 1];
        }
        if p[i] == p[k] {
            k += 1;
        }
        fail[i] = k;
    }
    let mut out = Vec::new();
    let mut q = 0;
    for (i, &c) in t.iter().enumerate() {
        while q > 0 && c != p[q] {
            q = fail[q - 1];
        }
        if c == p[q] {
            q += 1;
        }
        if q == m {
            out.push((i + 1 - m) as u64);
            q = fail[q - 1];
        }
    }
    out
}

/// Expansion of every non-terminal, for exhaustive small-grammar sweeps.
pub fn expand_all(g: &Grammar, cap: u64) -> Result<Vec<Vec<u8>>, GrammarError> {
    (0..g.len() as u32)
        .map(|s| g.expand_with_cap(SymbolId(s), cap))
        .collect()
}

/// Fibonacci word of length exactly `n` (prefix of the infinite word).
pub fn fibonacci_word(n: usize) -> Vec<u8> {
    let (mut a, mut b) = (vec![b'a'], vec![b'a', b'b']);
    // f(k+1) = f(k) ++ f(k-1)
    while b.len() < n {
        let next = [b.as_slice(), a.as_slice()].concat();
        a = b;
        b = next;
    }
    b.truncate(n.max(1));
    if n == 0 {
        b.clear();
    }
    b
}

/// Thue-Morse word of length `n`.
pub fn thue_morse_word(n: usize) -> Vec<u8> {
    (0..n)
        .map(|i| if (i as u64).count_ones().is_multiple_of(2) { b'a' } else { b'b' })
        .collect()
}
