//! Per-non-terminal occurrence queries over the run-length grammar.
//!
//! Two tries index, for every non-terminal `A`, the reversed head expansion
//! and the tail expansion. For each `(A, heavy path, heavy path)` triple a
//! staircase holds the label depths at which descendants of `A` hang off the
//! two paths; a pattern occurs in `⟨A⟩` iff for some split the loci of the
//! pattern halves dominate a stored point. Extremal and predecessor/successor
//! occurrences recurse down the production DAG on top of these tests.

use std::collections::HashMap;

use crate::compress::{compute_splits, SplitMode, SplitsOutcome};
use crate::error::QueryError;
use crate::fingerprint::{GrammarFps, PatternFps};
use crate::grammar::{Grammar, Production, SymbolId};
use crate::range::Staircase;
use crate::trie::{CompactTrie, EntryBase, Locus, TrieEntry};
use crate::CoOccurrence;

/// Reflexive ancestor bitsets over non-terminals.
#[derive(Debug, Clone)]
pub struct AncestorBits {
    words: usize,
    bits: Vec<u64>,
}

impl AncestorBits {
    pub fn build(g: &Grammar) -> AncestorBits {
        let n = g.len();
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; words * n];
        for s in 0..n {
            bits[s * words + s / 64] |= 1u64 << (s % 64);
        }
        // Parents first: every ancestor of A has pushed into A's row before
        // A pushes into its children.
        for &sym in g.topo().iter().rev() {
            let a = sym.ix();
            let push = |bits: &mut Vec<u64>, from: usize, to: usize| {
                for w in 0..words {
                    let v = bits[from * words + w];
                    bits[to * words + w] |= v;
                }
            };
            match g.production(sym) {
                Production::Leaf(_) => {}
                Production::Pair(b, c) => {
                    push(&mut bits, a, b.ix());
                    push(&mut bits, a, c.ix());
                }
                Production::Power(b, _) => push(&mut bits, a, b.ix()),
            }
        }
        AncestorBits { words, bits }
    }

    #[inline]
    pub fn is_ancestor(&self, a: SymbolId, of: SymbolId) -> bool {
        let row = of.ix() * self.words;
        self.bits[row + a.ix() / 64] & (1u64 << (a.ix() % 64)) != 0
    }

    pub fn ancestors_of(&self, of: SymbolId) -> impl Iterator<Item = SymbolId> + '_ {
        let row = of.ix() * self.words;
        (0..self.words).flat_map(move |w| {
            let mut word = self.bits[row + w];
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros();
                word &= word - 1;
                Some(SymbolId((w * 64) as u32 + b))
            })
        })
    }

    pub(crate) fn words(&self) -> usize {
        self.words
    }

    pub(crate) fn raw(&self) -> &[u64] {
        &self.bits
    }

    pub(crate) fn from_raw(words: usize, bits: Vec<u64>) -> AncestorBits {
        AncestorBits { words, bits }
    }
}

/// A preprocessed pattern: split set plus trie loci per split.
#[derive(Debug, Clone)]
pub struct PatternHandle {
    pub pattern: Vec<u8>,
    pub m: u64,
    /// Fast-mode split computation proved the pattern absent from the text.
    pub absent: bool,
    /// Ascending.
    pub splits: Vec<u64>,
    /// Locus of rev(P[..s]) in the occurrence T_pre, per split.
    pub occ_pre: Vec<Locus>,
    /// Locus of P[s..] in the occurrence T_suf, per split.
    pub occ_suf: Vec<Locus>,
    /// Same loci against the anchor tries (filled by the co-index).
    pub anchor_pre: Vec<Locus>,
    pub anchor_suf: Vec<Locus>,
}

impl PatternHandle {
    pub fn single_byte(&self) -> Option<u8> {
        if self.m == 1 {
            Some(self.pattern[0])
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Leftmost,
    Rightmost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Whole,
    Head,
    Tail,
}

#[derive(Debug)]
pub struct OccIndex {
    pub t_pre: CompactTrie,
    pub t_suf: CompactTrie,
    /// Entry index (into the respective trie) per non-terminal.
    pub pre_entry_of: Vec<u32>,
    pub suf_entry_of: Vec<Option<u32>>,
    pub anc: AncestorBits,
    points: HashMap<u64, Staircase>,
    hp_pre_count: u64,
    hp_suf_count: u64,
    total_points: u64,
}

impl OccIndex {
    pub fn build(g: &Grammar, fps: &GrammarFps) -> OccIndex {
        let n = g.len();
        let mut pre_entries = Vec::with_capacity(n);
        let mut suf_entries = Vec::new();
        let mut pre_entry_of = Vec::with_capacity(n);
        let mut suf_entry_of = vec![None; n];
        for s in 0..n as u32 {
            let sym = SymbolId(s);
            let pre = match g.production(sym) {
                Production::Leaf(ch) => TrieEntry::new(g, EntryBase::Byte(ch), 1, true),
                Production::Pair(b, _) => TrieEntry::new(g, EntryBase::Sym(b), 1, true),
                Production::Power(b, _) => TrieEntry::new(g, EntryBase::Sym(b), 1, true),
            };
            pre_entry_of.push(pre_entries.len() as u32);
            pre_entries.push(pre);
            let suf = match g.production(sym) {
                Production::Leaf(_) => None,
                Production::Pair(_, c) => Some(TrieEntry::new(g, EntryBase::Sym(c), 1, false)),
                Production::Power(b, k) => {
                    Some(TrieEntry::new(g, EntryBase::Sym(b), k - 1, false))
                }
            };
            if let Some(e) = suf {
                suf_entry_of[s as usize] = Some(suf_entries.len() as u32);
                suf_entries.push(e);
            }
        }
        let t_pre = CompactTrie::build(g, fps, pre_entries);
        let t_suf = CompactTrie::build(g, fps, suf_entries);
        let anc = AncestorBits::build(g);

        let hp_pre_count = t_pre.hp_count() as u64;
        let hp_suf_count = t_suf.hp_count() as u64;
        let mut raw: Vec<(u64, u64, u64)> = Vec::new();
        for s in 0..n as u32 {
            let sym = SymbolId(s);
            let Some(suf_e) = suf_entry_of[s as usize] else { continue };
            let pre_chain = t_pre.chain(pre_entry_of[s as usize]);
            let suf_chain = t_suf.chain(suf_e);
            for a in anc.ancestors_of(sym) {
                let base = a.0 as u64 * hp_pre_count;
                for &(h1, d1) in pre_chain {
                    let k1 = (base + h1 as u64) * hp_suf_count;
                    for &(h2, d2) in suf_chain {
                        raw.push((k1 + h2 as u64, d1, d2));
                    }
                }
            }
        }
        let total_points = raw.len() as u64;
        raw.sort_unstable();
        let mut points = HashMap::new();
        let mut i = 0;
        while i < raw.len() {
            let key = raw[i].0;
            let mut j = i;
            let mut pts = Vec::new();
            while j < raw.len() && raw[j].0 == key {
                pts.push((raw[j].1, raw[j].2));
                j += 1;
            }
            points.insert(key, Staircase::build(pts));
            i = j;
        }

        OccIndex {
            t_pre,
            t_suf,
            pre_entry_of,
            suf_entry_of,
            anc,
            points,
            hp_pre_count,
            hp_suf_count,
            total_points,
        }
    }

    /// Number of points across all staircases, before deduplication.
    pub fn total_points(&self) -> u64 {
        self.total_points
    }

    pub(crate) fn point_store(&self) -> &HashMap<u64, Staircase> {
        &self.points
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn restore(
        t_pre: CompactTrie,
        t_suf: CompactTrie,
        pre_entry_of: Vec<u32>,
        suf_entry_of: Vec<Option<u32>>,
        anc: AncestorBits,
        points: HashMap<u64, Staircase>,
        hp_pre_count: u64,
        hp_suf_count: u64,
        total_points: u64,
    ) -> OccIndex {
        OccIndex {
            t_pre,
            t_suf,
            pre_entry_of,
            suf_entry_of,
            anc,
            points,
            hp_pre_count,
            hp_suf_count,
            total_points,
        }
    }

    /// Computes splits and locates all loci. A handle with `absent` set (or
    /// with no found loci) yields empty answers everywhere downstream.
    pub fn preprocess_pattern(
        &self,
        g: &Grammar,
        fps: &GrammarFps,
        p: &[u8],
    ) -> Result<PatternHandle, QueryError> {
        if p.is_empty() {
            return Err(QueryError::EmptyPattern);
        }
        let m = p.len() as u64;
        let (splits, absent) = match compute_splits(g, fps, p, SplitMode::Fast)
            .map_err(|e| match e {
                crate::CompressError::EmptyPattern => QueryError::EmptyPattern,
                crate::CompressError::Grammar(ge) => QueryError::Grammar(ge),
                _ => QueryError::EmptyPattern,
            })? {
            SplitsOutcome::Splits(s) => (s.splits, false),
            SplitsOutcome::NoOccurrence => (Vec::new(), true),
        };
        Ok(self.locate_handle(g, fps, p, m, splits, absent))
    }

    /// Same, but with a caller-provided split set (broad-mode testing).
    pub fn preprocess_with_splits(
        &self,
        g: &Grammar,
        fps: &GrammarFps,
        p: &[u8],
        splits: Vec<u64>,
    ) -> PatternHandle {
        self.locate_handle(g, fps, p, p.len() as u64, splits, false)
    }

    fn locate_handle(
        &self,
        g: &Grammar,
        fps: &GrammarFps,
        p: &[u8],
        m: u64,
        splits: Vec<u64>,
        absent: bool,
    ) -> PatternHandle {
        let pfps = PatternFps::new(fps.params, p);
        let rev: Vec<u8> = p.iter().rev().copied().collect();
        let rfps = PatternFps::new(fps.params, &rev);
        let pre_offsets: Vec<usize> = splits.iter().map(|&s| (m - s) as usize).collect();
        let suf_offsets: Vec<usize> = splits.iter().map(|&s| s as usize).collect();
        let occ_pre = self.t_pre.batch_locus(g, fps, &rev, &rfps, &pre_offsets);
        let occ_suf = self.t_suf.batch_locus(g, fps, p, &pfps, &suf_offsets);
        PatternHandle {
            pattern: p.to_vec(),
            m,
            absent,
            splits,
            occ_pre,
            occ_suf,
            anchor_pre: Vec::new(),
            anchor_suf: Vec::new(),
        }
    }

    /// Relevant occurrences of the pattern in `⟨A⟩`, sorted ascending:
    /// `head_len - s` for each split whose halves prefix the head (reversed)
    /// and the tail.
    pub fn relevant_occurrences(&self, g: &Grammar, h: &PatternHandle, a: SymbolId) -> Vec<u64> {
        let mut out = Vec::new();
        if h.m < 2 || h.absent {
            return out;
        }
        let Some(suf_e) = self.suf_entry_of[a.ix()] else { return out };
        let pre_rank = self.t_pre.rank_of_entry(self.pre_entry_of[a.ix()]);
        let suf_rank = self.t_suf.rank_of_entry(suf_e);
        for i in (0..h.splits.len()).rev() {
            if h.occ_pre[i].contains_rank(pre_rank) && h.occ_suf[i].contains_rank(suf_rank) {
                out.push(g.head_len(a) - h.splits[i]);
            }
        }
        out
    }

    /// Whether the pattern occurs in `⟨A⟩`.
    pub fn occurs_in(&self, g: &Grammar, h: &PatternHandle, a: SymbolId) -> bool {
        if h.absent {
            return false;
        }
        if let Some(ch) = h.single_byte() {
            return g.contains_byte(a, ch);
        }
        if h.m > g.exp_len(a) {
            return false;
        }
        for i in 0..h.splits.len() {
            let (u, v) = (&h.occ_pre[i], &h.occ_suf[i]);
            if !u.found || !v.found {
                continue;
            }
            let h1 = self.t_pre.node(u.node).hp as u64;
            let h2 = self.t_suf.node(v.node).hp as u64;
            let key = (a.0 as u64 * self.hp_pre_count + h1) * self.hp_suf_count + h2;
            if let Some(st) = self.points.get(&key) {
                if st.dominant_exists(u.depth, v.depth) {
                    return true;
                }
            }
        }
        false
    }

    /// Leftmost/rightmost occurrence in the whole expansion, the head or the
    /// tail of `A`, in coordinates local to the queried part.
    pub fn extremal(
        &self,
        g: &Grammar,
        h: &PatternHandle,
        a: SymbolId,
        which: Extreme,
        part: Part,
    ) -> Option<u64> {
        match part {
            Part::Whole => self.extremal_whole(g, h, a, which),
            Part::Head => match g.production(a) {
                Production::Leaf(ch) => {
                    (h.single_byte() == Some(ch)).then_some(0)
                }
                Production::Pair(b, _) | Production::Power(b, _) => {
                    self.extremal_whole(g, h, b, which)
                }
            },
            Part::Tail => match g.production(a) {
                Production::Leaf(_) => None,
                Production::Pair(_, c) => self.extremal_whole(g, h, c, which),
                Production::Power(b, k) => self.extremal_in_copies(g, h, a, b, k - 1, which),
            },
        }
    }

    fn extremal_whole(
        &self,
        g: &Grammar,
        h: &PatternHandle,
        a: SymbolId,
        which: Extreme,
    ) -> Option<u64> {
        if !self.occurs_in(g, h, a) {
            return None;
        }
        match g.production(a) {
            Production::Leaf(_) => Some(0),
            Production::Pair(b, c) => {
                let lb = g.exp_len(b);
                match which {
                    Extreme::Leftmost => {
                        if self.occurs_in(g, h, b) {
                            return self.extremal_whole(g, h, b, which);
                        }
                        let rel = self.relevant_occurrences(g, h, a);
                        if let Some(&q) = rel.first() {
                            return Some(q);
                        }
                        self.extremal_whole(g, h, c, which).map(|q| lb + q)
                    }
                    Extreme::Rightmost => {
                        if self.occurs_in(g, h, c) {
                            return self.extremal_whole(g, h, c, which).map(|q| lb + q);
                        }
                        let rel = self.relevant_occurrences(g, h, a);
                        if let Some(&q) = rel.last() {
                            return Some(q);
                        }
                        self.extremal_whole(g, h, b, which)
                    }
                }
            }
            Production::Power(b, k) => self.extremal_in_copies(g, h, a, b, k, which),
        }
    }

    /// Extremal occurrence inside `⟨B⟩^copies` (a prefix of `⟨A⟩`, so the
    /// crossing occurrences are exactly the relevant ones of `A` that fit).
    fn extremal_in_copies(
        &self,
        g: &Grammar,
        h: &PatternHandle,
        a: SymbolId,
        b: SymbolId,
        copies: u64,
        which: Extreme,
    ) -> Option<u64> {
        let lb = g.exp_len(b);
        let span = lb * copies;
        if h.m > span {
            return None;
        }
        let in_b = self.occurs_in(g, h, b);
        let rel = self.relevant_occurrences(g, h, a);
        match which {
            Extreme::Leftmost => {
                if in_b {
                    return self.extremal_whole(g, h, b, which);
                }
                rel.iter().copied().find(|&q| q + h.m <= span)
            }
            Extreme::Rightmost => {
                let mut best: Option<u64> = None;
                if in_b {
                    let q = self.extremal_whole(g, h, b, which).expect("occurs in b");
                    best = Some(q + (copies - 1) * lb);
                }
                for &q in &rel {
                    if q + h.m > span {
                        continue;
                    }
                    let shift = (span - h.m - q) / lb;
                    let cand = q + shift * lb;
                    if best.is_none_or(|x| cand > x) {
                        best = Some(cand);
                    }
                }
                best
            }
        }
    }

    /// Rightmost occurrence `q <= p` (Pred) or leftmost `q >= p` (Succ).
    pub fn pred_succ(
        &self,
        g: &Grammar,
        h: &PatternHandle,
        a: SymbolId,
        p: u64,
        dir: Direction,
    ) -> Result<Option<u64>, QueryError> {
        if p >= g.exp_len(a) {
            return Err(QueryError::Grammar(crate::GrammarError::OutOfBounds {
                pos: p,
                len: g.exp_len(a),
            }));
        }
        Ok(match dir {
            Direction::Pred => self.pred(g, h, a, p),
            Direction::Succ => self.succ(g, h, a, p),
        })
    }

    pub(crate) fn pred(&self, g: &Grammar, h: &PatternHandle, a: SymbolId, p: u64) -> Option<u64> {
        if !self.occurs_in(g, h, a) {
            return None;
        }
        match g.production(a) {
            Production::Leaf(_) => Some(0),
            Production::Pair(b, c) => {
                let lb = g.exp_len(b);
                if p >= lb {
                    if self.occurs_in(g, h, c) {
                        let pc = (p - lb).min(g.exp_len(c) - 1);
                        if let Some(q) = self.pred(g, h, c, pc) {
                            return Some(lb + q);
                        }
                    }
                    let rel = self.relevant_occurrences(g, h, a);
                    if let Some(&q) = rel.last() {
                        return Some(q);
                    }
                    self.extremal_whole(g, h, b, Extreme::Rightmost)
                } else {
                    let mut best = self
                        .relevant_occurrences(g, h, a)
                        .into_iter().rfind(|&q| q <= p);
                    if self.occurs_in(g, h, b) {
                        if let Some(q) = self.pred(g, h, b, p) {
                            if best.is_none_or(|x| q > x) {
                                best = Some(q);
                            }
                        }
                    }
                    best
                }
            }
            Production::Power(b, k) => {
                let lb = g.exp_len(b);
                let la = g.exp_len(a);
                let mut best: Option<u64> = None;
                for q in self.relevant_occurrences(g, h, a) {
                    if q > p || q + h.m > la {
                        continue;
                    }
                    let shift = ((p - q) / lb).min((la - h.m - q) / lb);
                    let cand = q + shift * lb;
                    if best.is_none_or(|x| cand > x) {
                        best = Some(cand);
                    }
                }
                if self.occurs_in(g, h, b) {
                    let c = (p / lb).min(k - 1);
                    let mut incopy = self
                        .pred(g, h, b, (p - c * lb).min(lb - 1))
                        .map(|q| c * lb + q);
                    if incopy.is_none() && c >= 1 {
                        incopy = self
                            .extremal_whole(g, h, b, Extreme::Rightmost)
                            .map(|q| (c - 1) * lb + q);
                    }
                    if let Some(q) = incopy {
                        if best.is_none_or(|x| q > x) {
                            best = Some(q);
                        }
                    }
                }
                best
            }
        }
    }

    pub(crate) fn succ(&self, g: &Grammar, h: &PatternHandle, a: SymbolId, p: u64) -> Option<u64> {
        if !self.occurs_in(g, h, a) {
            return None;
        }
        match g.production(a) {
            Production::Leaf(_) => (p == 0).then_some(0),
            Production::Pair(b, c) => {
                let lb = g.exp_len(b);
                if p < lb {
                    if self.occurs_in(g, h, b) {
                        if let Some(q) = self.succ(g, h, b, p) {
                            return Some(q);
                        }
                    }
                    let rel = self.relevant_occurrences(g, h, a);
                    if let Some(q) = rel.into_iter().find(|&q| q >= p) {
                        return Some(q);
                    }
                }
                if self.occurs_in(g, h, c) {
                    let pc = p.saturating_sub(lb);
                    if pc < g.exp_len(c) {
                        if let Some(q) = self.succ(g, h, c, pc) {
                            return Some(lb + q);
                        }
                    }
                }
                None
            }
            Production::Power(b, k) => {
                let lb = g.exp_len(b);
                let la = g.exp_len(a);
                let mut best: Option<u64> = None;
                for q in self.relevant_occurrences(g, h, a) {
                    let shift = if p <= q { 0 } else { (p - q).div_ceil(lb) };
                    let cand = q + shift * lb;
                    if cand + h.m <= la && best.is_none_or(|x| cand < x) {
                        best = Some(cand);
                    }
                }
                if self.occurs_in(g, h, b) {
                    let c = p / lb;
                    let mut incopy = self.succ(g, h, b, p - c * lb).map(|q| c * lb + q);
                    if incopy.is_none() && c < k - 1 {
                        incopy = self
                            .extremal_whole(g, h, b, Extreme::Leftmost)
                            .map(|q| (c + 1) * lb + q);
                    }
                    if let Some(q) = incopy {
                        if q + h.m <= la && best.is_none_or(|x| q < x) {
                            best = Some(q);
                        }
                    }
                }
                best
            }
        }
    }

    /// All co-occurrences of the two patterns in the text, sorted: repeated
    /// successor/successor/predecessor sweeps from the start symbol.
    pub fn report_co_occurrences(
        &self,
        g: &Grammar,
        h1: &PatternHandle,
        h2: &PatternHandle,
    ) -> Vec<CoOccurrence> {
        let mut out = Vec::new();
        let start = g.start();
        let n = g.text_len();
        let mut i = 0u64;
        while i < n {
            let Some(q1p) = self.succ(g, h1, start, i) else { break };
            let Some(q2) = self.succ(g, h2, start, q1p) else { break };
            let q1 = self
                .pred(g, h1, start, q2)
                .expect("q1' <= q2 is an occurrence");
            out.push(CoOccurrence::new(q1, q2));
            i = q2 + 1;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Pred,
    Succ,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress;
    use crate::fingerprint::{FingerprintParams, MERSENNE61};
    use crate::grammar::GrammarKind;
    use crate::oracle;

    fn setup(text: &[u8], seed: u64) -> (Grammar, GrammarFps, OccIndex) {
        let (g, _) = compress::to_rlslp_from_text(text, seed).unwrap();
        let fps = GrammarFps::new(&g, FingerprintParams::new(MERSENNE61, 1_000_003));
        let idx = OccIndex::build(&g, &fps);
        (g, fps, idx)
    }

    /// Hand-built grammar for "aababacacabc" mirroring the worked example:
    /// A -> B C, <B> = "aabab", C -> C1 C2, <C1> = "acac", <C2> = "abc".
    pub(crate) fn figure_grammar() -> Grammar {
        let prods = vec![
            Production::Leaf(b'a'),              // 0
            Production::Leaf(b'b'),              // 1
            Production::Leaf(b'c'),              // 2
            Production::Pair(SymbolId(0), SymbolId(0)), // 3:  aa
            Production::Pair(SymbolId(0), SymbolId(1)), // 4:  ab
            Production::Pair(SymbolId(1), SymbolId(4)), // 5:  bab
            Production::Pair(SymbolId(3), SymbolId(5)), // 6:  B = aabab
            Production::Pair(SymbolId(0), SymbolId(2)), // 7:  ac
            Production::Pair(SymbolId(7), SymbolId(7)), // 8:  C1 = acac
            Production::Pair(SymbolId(4), SymbolId(2)), // 9:  C2 = abc
            Production::Pair(SymbolId(8), SymbolId(9)), // 10: C = acacabc
            Production::Pair(SymbolId(6), SymbolId(10)), // 11: A = S
        ];
        Grammar::validate_and_index(prods, SymbolId(11), GrammarKind::Rlslp).unwrap()
    }

    const C_SYM: SymbolId = SymbolId(10);
    const A_SYM: SymbolId = SymbolId(11);

    fn fig_setup() -> (Grammar, GrammarFps, OccIndex) {
        let g = figure_grammar();
        let fps = GrammarFps::new(&g, FingerprintParams::new(MERSENNE61, 1_000_003));
        let idx = OccIndex::build(&g, &fps);
        (g, fps, idx)
    }

    #[test]
    fn figure_grammar_expands_to_sample() {
        let g = figure_grammar();
        assert_eq!(g.expand(g.start()).unwrap(), b"aababacacabc");
    }

    #[test]
    fn relevant_occurrences_on_figure_grammar() {
        let (g, fps, idx) = fig_setup();
        let h = idx.preprocess_pattern(&g, &fps, b"cab").unwrap();
        // The occurrence at 3 of "cab" in <C> is relevant with split 1.
        assert_eq!(idx.relevant_occurrences(&g, &h, C_SYM), vec![3]);
        // <A> has no relevant occurrences of "cab".
        assert_eq!(idx.relevant_occurrences(&g, &h, A_SYM), Vec::<u64>::new());
        // Emptiness still sees the occurrence through the descendant.
        assert!(idx.occurs_in(&g, &h, A_SYM));
        assert!(!idx.occurs_in(&g, &h, SymbolId(0)));
    }

    #[test]
    fn figure_grammar_point_for_worked_example() {
        // Searching "cab" with split 1: u = locus of "c" in T_pre, v = locus
        // of "ab" in T_suf. The symbol C (head "acac", tail "abc") must have
        // contributed a point to P(A, hp(u), hp(v)) dominating
        // (|λ(u)|, |λ(v)|), which is what makes the emptiness query on the
        // start symbol succeed.
        let (g, fps, idx) = fig_setup();
        let h = idx.preprocess_pattern(&g, &fps, b"cab").unwrap();
        let i = h.splits.iter().position(|&s| s == 1).expect("split 1 present");
        let (u, v) = (&h.occ_pre[i], &h.occ_suf[i]);
        assert!(u.found && v.found);
        let hu = idx.t_pre.node(u.node).hp;
        let hv = idx.t_suf.node(v.node).hp;
        let pre_chain = idx.t_pre.chain(idx.pre_entry_of[C_SYM.ix()]);
        let suf_chain = idx.t_suf.chain(idx.suf_entry_of[C_SYM.ix()].unwrap());
        let pd = pre_chain.iter().find(|&&(hp, _)| hp == hu).expect("C hangs off hp(u)").1;
        let sd = suf_chain.iter().find(|&&(hp, _)| hp == hv).expect("C hangs off hp(v)").1;
        assert!(pd >= u.depth && sd >= v.depth, "point ({pd},{sd}) vs loci ({},{})", u.depth, v.depth);
        assert!(idx.occurs_in(&g, &h, A_SYM));
    }

    #[test]
    fn occurs_matches_oracle_on_figure_grammar() {
        let (g, fps, idx) = fig_setup();
        for p in [&b"cab"[..], b"ab", b"ba", b"aba", b"ac", b"ca", b"abc", b"zz", b"a", b"c"] {
            let h = idx.preprocess_pattern(&g, &fps, p).unwrap();
            for s in 0..g.len() as u32 {
                let sym = SymbolId(s);
                let exp = g.expand(sym).unwrap();
                let want = !oracle::naive_occurrences(&exp, p).is_empty();
                assert_eq!(idx.occurs_in(&g, &h, sym), want, "p={:?} sym={}", p, s);
            }
        }
    }

    #[test]
    fn power_rule_occurrence() {
        // A -> B^3 with <B> = "ab": "ba" occurs in <A>.
        let prods = vec![
            Production::Leaf(b'a'),
            Production::Leaf(b'b'),
            Production::Pair(SymbolId(0), SymbolId(1)),
            Production::Power(SymbolId(2), 3),
        ];
        let g = Grammar::validate_and_index(prods, SymbolId(3), GrammarKind::Rlslp).unwrap();
        let fps = GrammarFps::new(&g, FingerprintParams::new(MERSENNE61, 1_000_003));
        let idx = OccIndex::build(&g, &fps);
        let h = idx.preprocess_pattern(&g, &fps, b"ba").unwrap();
        assert!(idx.occurs_in(&g, &h, SymbolId(3)));
        assert!(!idx.occurs_in(&g, &h, SymbolId(2)));
        assert_eq!(idx.relevant_occurrences(&g, &h, SymbolId(3)), vec![1]);
    }

    #[test]
    fn extremal_on_sample_text() {
        let (g, fps, idx) = setup(b"aababacacabc", 5);
        let h = idx.preprocess_pattern(&g, &fps, b"ab").unwrap();
        let start = g.start();
        assert_eq!(idx.extremal(&g, &h, start, Extreme::Leftmost, Part::Whole), Some(1));
        assert_eq!(idx.extremal(&g, &h, start, Extreme::Rightmost, Part::Whole), Some(9));
        let habs = idx.preprocess_pattern(&g, &fps, b"zz").unwrap();
        assert_eq!(idx.extremal(&g, &habs, start, Extreme::Leftmost, Part::Whole), None);
    }

    #[test]
    fn pred_succ_on_sample_text() {
        let (g, fps, idx) = setup(b"aababacacabc", 5);
        let h = idx.preprocess_pattern(&g, &fps, b"ab").unwrap();
        let start = g.start();
        assert_eq!(idx.pred_succ(&g, &h, start, 8, Direction::Pred).unwrap(), Some(3));
        assert_eq!(idx.pred_succ(&g, &h, start, 4, Direction::Succ).unwrap(), Some(9));
        assert_eq!(idx.pred_succ(&g, &h, start, 0, Direction::Pred).unwrap(), None);
        assert!(idx.pred_succ(&g, &h, start, 12, Direction::Pred).is_err());
    }

    #[test]
    fn report_co_occurrences_on_sample_text() {
        let (g, fps, idx) = setup(b"aababacacabc", 5);
        let h1 = idx.preprocess_pattern(&g, &fps, b"ab").unwrap();
        let h2 = idx.preprocess_pattern(&g, &fps, b"ac").unwrap();
        assert_eq!(idx.report_co_occurrences(&g, &h1, &h2), vec![CoOccurrence::new(3, 5)]);
        let h1 = idx.preprocess_pattern(&g, &fps, b"a").unwrap();
        let h2 = idx.preprocess_pattern(&g, &fps, b"c").unwrap();
        assert_eq!(
            idx.report_co_occurrences(&g, &h1, &h2),
            vec![CoOccurrence::new(5, 6), CoOccurrence::new(7, 8), CoOccurrence::new(9, 11)]
        );
        let h2 = idx.preprocess_pattern(&g, &fps, b"z").unwrap();
        assert!(idx.report_co_occurrences(&g, &h1, &h2).is_empty());
    }

    #[test]
    fn differential_sweep_random_texts() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(42);
        for case in 0..40u64 {
            let n = rng.gen_range(1..=80);
            let alpha = rng.gen_range(1..=3u8);
            let text: Vec<u8> = (0..n).map(|_| b'a' + rng.gen_range(0..alpha)).collect();
            let (g, fps, idx) = setup(&text, case);
            let exps = oracle::expand_all(&g, 1 << 20).unwrap();
            for _ in 0..5 {
                let mlen = rng.gen_range(1..=5usize).min(text.len());
                let from_text = rng.gen_bool(0.8);
                let p: Vec<u8> = if from_text {
                    let at = rng.gen_range(0..=text.len() - mlen);
                    text[at..at + mlen].to_vec()
                } else {
                    (0..mlen).map(|_| b'a' + rng.gen_range(0..3)).collect()
                };
                let h = idx.preprocess_pattern(&g, &fps, &p).unwrap();
                for s in 0..g.len() as u32 {
                    let sym = SymbolId(s);
                    let exp = &exps[s as usize];
                    let occ = oracle::naive_occurrences(exp, &p);
                    assert_eq!(
                        idx.occurs_in(&g, &h, sym),
                        !occ.is_empty(),
                        "occurs case={case} p={p:?} sym={s} text={text:?}"
                    );
                    let rel: Vec<u64> = oracle::naive_relevant(&g, sym, &p)
                        .unwrap()
                        .into_iter()
                        .map(|(q, _)| q)
                        .collect();
                    assert_eq!(
                        idx.relevant_occurrences(&g, &h, sym),
                        rel,
                        "relevant case={case} p={p:?} sym={s} text={text:?}"
                    );
                    assert_eq!(
                        idx.extremal(&g, &h, sym, Extreme::Leftmost, Part::Whole),
                        occ.first().copied(),
                        "leftmost case={case} p={p:?} sym={s}"
                    );
                    assert_eq!(
                        idx.extremal(&g, &h, sym, Extreme::Rightmost, Part::Whole),
                        occ.last().copied(),
                        "rightmost case={case} p={p:?} sym={s}"
                    );
                    for pp in 0..exp.len() as u64 {
                        let want_pred = occ.iter().rev().find(|&&q| q <= pp).copied();
                        let want_succ = occ.iter().find(|&&q| q >= pp).copied();
                        assert_eq!(
                            idx.pred_succ(&g, &h, sym, pp, Direction::Pred).unwrap(),
                            want_pred,
                            "pred case={case} p={p:?} sym={s} pos={pp} text={text:?}"
                        );
                        assert_eq!(
                            idx.pred_succ(&g, &h, sym, pp, Direction::Succ).unwrap(),
                            want_succ,
                            "succ case={case} p={p:?} sym={s} pos={pp} text={text:?}"
                        );
                    }
                }
                // Whole-text co-occurrence reporting.
                let p2: Vec<u8> = {
                    let mlen = rng.gen_range(1..=4usize).min(text.len());
                    let at = rng.gen_range(0..=text.len() - mlen);
                    text[at..at + mlen].to_vec()
                };
                let h2 = idx.preprocess_pattern(&g, &fps, &p2).unwrap();
                assert_eq!(
                    idx.report_co_occurrences(&g, &h, &h2),
                    oracle::naive_co_occurrences(&text, &p, &p2),
                    "cooc case={case} p={p:?} p2={p2:?} text={text:?}"
                );
            }
        }
    }

    #[test]
    fn head_tail_extremal_sweep() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(9);
        for case in 0..20u64 {
            let n = rng.gen_range(2..=60);
            let text: Vec<u8> = (0..n).map(|_| b'a' + rng.gen_range(0..2)).collect();
            let (g, fps, idx) = setup(&text, 100 + case);
            for _ in 0..4 {
                let mlen = rng.gen_range(1..=4usize).min(text.len());
                let at = rng.gen_range(0..=text.len() - mlen);
                let p = text[at..at + mlen].to_vec();
                let h = idx.preprocess_pattern(&g, &fps, &p).unwrap();
                for s in 0..g.len() as u32 {
                    let sym = SymbolId(s);
                    let head: Vec<u8> = match g.head(sym) {
                        crate::grammar::Head::Term(ch) => vec![ch],
                        crate::grammar::Head::Sym(b) => g.expand(b).unwrap(),
                    };
                    let tail: Vec<u8> = match g.tail(sym) {
                        crate::grammar::Tail::Empty => Vec::new(),
                        crate::grammar::Tail::Sym(c) => g.expand(c).unwrap(),
                        crate::grammar::Tail::Copies(b, j) => {
                            g.expand(b).unwrap().repeat(j as usize)
                        }
                    };
                    let ho = if head.len() >= p.len() {
                        oracle::naive_occurrences(&head, &p)
                    } else {
                        Vec::new()
                    };
                    assert_eq!(
                        idx.extremal(&g, &h, sym, Extreme::Leftmost, Part::Head),
                        ho.first().copied(),
                        "head-l case={case} sym={s} p={p:?}"
                    );
                    assert_eq!(
                        idx.extremal(&g, &h, sym, Extreme::Rightmost, Part::Head),
                        ho.last().copied(),
                        "head-r case={case} sym={s} p={p:?}"
                    );
                    let to = if tail.len() >= p.len() {
                        oracle::naive_occurrences(&tail, &p)
                    } else {
                        Vec::new()
                    };
                    assert_eq!(
                        idx.extremal(&g, &h, sym, Extreme::Leftmost, Part::Tail),
                        to.first().copied(),
                        "tail-l case={case} sym={s} p={p:?}"
                    );
                    assert_eq!(
                        idx.extremal(&g, &h, sym, Extreme::Rightmost, Part::Tail),
                        to.last().copied(),
                        "tail-r case={case} sym={s} p={p:?}"
                    );
                }
            }
        }
    }

    #[test]
    fn point_count_is_bounded() {
        let (g, _, idx) = setup(b"aababacacabcaababacacabcbbbbcacaca", 13);
        let gp = g.len() as f64;
        let bound = 4.0 * gp * (gp.log2() + 1.0) * (gp.log2() + 1.0);
        assert!((idx.total_points() as f64) <= bound);
    }
}
