//! Close co-occurrence queries over the run-length grammar.
//!
//! Query strategy: locate the non-terminals whose expansion contains a
//! b-close *relevant* co-occurrence (one crossing the head/tail boundary),
//! enumerate those relevant co-occurrences with the per-non-terminal
//! occurrence primitives, then propagate each of them to every position of
//! the non-terminal via the pruned parse tree.
//!
//! Candidate non-terminals come from per-split-pair anchor strings `S1`,
//! `S2` (locus labels around the pattern halves). For a fixed quadruple of
//! anchor-trie loci the index holds: up to six occurrence-distance entries
//! per non-terminal, the list of non-terminals carrying a relevant `S2`
//! occurrence, per-scale occurrence triples of `S1` inside `S2`, and, when
//! `S1` is periodic, a progression tree resolving overlapping occurrences.
//! Records are materialized on first use and memoized; an optional eager
//! mode precomputes every quadruple under a size cap.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{IndexError, QueryError};
use crate::fingerprint::GrammarFps;
use crate::grammar::{Grammar, Production, SymbolId};
use crate::occindex::{Extreme, OccIndex, Part, PatternHandle};
use crate::oracle;
use crate::trie::{CompactTrie, EntryBase, TrieEntry};
use crate::CoOccurrence;

const NO_PNODE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PLabel {
    Sym(SymbolId),
    /// Collapsed rightmost `copies` children of a run rule.
    PowTail(SymbolId, u64),
}

#[derive(Debug, Clone, Copy)]
pub struct PNode {
    pub label: PLabel,
    /// Leaves of the parse tree strictly left of this subtree.
    pub off: u64,
    pub parent: u32,
    /// Nearest ancestor that is the root, carries a multiply-used label, or
    /// is the first child of a run node (where copy expansion must happen).
    pub anc: u32,
    /// Next node with the same symbol label in preorder.
    pub next: u32,
    /// Set to the sibling copy count when this is the first child of a run
    /// node.
    pub run_sibling: Option<u64>,
}

/// Parse tree with duplicate-symbol subtrees and run repetitions collapsed.
#[derive(Debug, Clone)]
pub struct PrunedTree {
    pub nodes: Vec<PNode>,
    pub first_node_of: Vec<Option<u32>>,
}

impl PrunedTree {
    pub fn build(g: &Grammar) -> PrunedTree {
        let n = g.len();
        let mut nodes: Vec<PNode> = Vec::new();
        let mut first_node_of: Vec<Option<u32>> = vec![None; n];
        let mut last_node_of: Vec<u32> = vec![NO_PNODE; n];
        let mut stack: Vec<(PLabel, u64, u32, Option<u64>)> =
            vec![(PLabel::Sym(g.start()), 0, NO_PNODE, None)];
        while let Some((label, off, parent, run_sibling)) = stack.pop() {
            let id = nodes.len() as u32;
            nodes.push(PNode { label, off, parent, anc: NO_PNODE, next: NO_PNODE, run_sibling });
            if let PLabel::Sym(s) = label {
                if last_node_of[s.ix()] != NO_PNODE {
                    nodes[last_node_of[s.ix()] as usize].next = id;
                }
                last_node_of[s.ix()] = id;
                if first_node_of[s.ix()].is_none() {
                    first_node_of[s.ix()] = Some(id);
                    match g.production(s) {
                        Production::Leaf(_) => {}
                        Production::Pair(b, c) => {
                            stack.push((PLabel::Sym(c), off + g.exp_len(b), id, None));
                            stack.push((PLabel::Sym(b), off, id, None));
                        }
                        Production::Power(b, k) => {
                            stack.push((
                                PLabel::PowTail(b, k - 1),
                                off + g.exp_len(b),
                                id,
                                None,
                            ));
                            stack.push((PLabel::Sym(b), off, id, Some(k - 1)));
                        }
                    }
                }
            }
        }
        // Multiply-labeled symbols are known only now; anc needs them.
        let multi: Vec<bool> = (0..n)
            .map(|s| {
                first_node_of[s]
                    .map(|f| nodes[f as usize].next != NO_PNODE)
                    .unwrap_or(false)
            })
            .collect();
        let is_stop = |nd: &PNode| -> bool {
            if nd.parent == NO_PNODE || nd.run_sibling.is_some() {
                return true;
            }
            matches!(nd.label, PLabel::Sym(s) if multi[s.ix()])
        };
        // Parents precede children in creation order.
        for v in 0..nodes.len() {
            let p = nodes[v].parent;
            if p == NO_PNODE {
                continue;
            }
            nodes[v].anc = if is_stop(&nodes[p as usize]) {
                p
            } else {
                nodes[p as usize].anc
            };
        }
        PrunedTree { nodes, first_node_of }
    }

    /// Offset of the leftmost parse-tree node labeled by `s`.
    pub fn canonical_offset(&self, s: SymbolId) -> Option<u64> {
        self.first_node_of[s.ix()].map(|id| self.nodes[id as usize].off)
    }
}

/// Anchor string for a locus pair: `rev(λ(u)) ++ λ(v)` with its global
/// occurrence list.
#[derive(Debug)]
pub struct AnchorInfo {
    pub bytes: Vec<u8>,
    /// |rev(λ(u))|: where the pattern splits inside the anchor.
    pub l: u64,
    /// Sorted occurrences in the text.
    pub occ: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KTriple {
    /// Rightmost occurrence of S1 in S2 ending at or before `l2 - 2^k`.
    pub before: Option<u64>,
    /// Leftmost occurrence covering `l2 - 2^k`.
    pub cover_l: Option<u64>,
    /// Rightmost occurrence covering `l2 - 2^k`.
    pub cover_r: Option<u64>,
}

/// Everything the query needs for one `(u1, u2, v1, v2)` anchor quadruple.
#[derive(Debug)]
pub struct QuadrupleRecord {
    pub l1: u64,
    pub l2: u64,
    pub s1_len: u64,
    pub s2_len: u64,
    /// (p2 - p1, non-terminal) for the six per-non-terminal cases, sorted.
    pub t1: Vec<(i64, u32)>,
    /// Non-terminals with a relevant occurrence of S2 with split l2.
    pub l_list: Vec<u32>,
    /// Indexed by k; occurrences of S1 in S2 around `l2 - 2^k`.
    pub ktriples: Vec<KTriple>,
    /// Period of S1 when S1 is periodic.
    pub pi1: Option<u64>,
    /// p2 - p1' (independent of the non-terminal); set iff some T2 entry
    /// exists.
    pub ov: Option<u64>,
    /// ((p1' - p1) / pi1, non-terminal), sorted by value.
    pub t2: Vec<(i64, u32)>,
}

#[derive(Debug, Default)]
pub struct Counters {
    /// Duplicates removed by the output set; the propagation argument says
    /// this stays zero.
    pub dup_suppressed: AtomicU64,
    /// Run-copy shifts clipped for falling outside the parent expansion.
    pub clipped: AtomicU64,
    /// Disagreements between per-non-terminal overlap values.
    pub ov_mismatch: AtomicU64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcase {
    T1Range,
    InsideS2,
    PeriodicOverlap,
}

pub type QuadKey = (u32, u32, u32, u32);

type MemoCell<T> = Arc<OnceLock<Arc<T>>>;

pub struct CoIndex {
    pub t_pre: CompactTrie,
    pub t_suf: CompactTrie,
    /// Anchor-trie entry per non-terminal (None for byte leaves).
    pub pre_entry_of: Vec<Option<u32>>,
    pub suf_entry_of: Vec<Option<u32>>,
    pub pruned: PrunedTree,
    memo: Mutex<HashMap<QuadKey, MemoCell<QuadrupleRecord>>>,
    anchor_memo: Mutex<HashMap<(u32, u32), MemoCell<AnchorInfo>>>,
    text: OnceLock<Vec<u8>>,
    pub counters: Counters,
}

impl std::fmt::Debug for CoIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoIndex")
            .field("pre_entries", &self.t_pre.len())
            .field("suf_entries", &self.t_suf.len())
            .field("pruned_nodes", &self.pruned.nodes.len())
            .finish()
    }
}

impl CoIndex {
    pub fn build(g: &Grammar, fps: &GrammarFps) -> CoIndex {
        let n = g.len();
        let mut pre_entries: Vec<TrieEntry> = Vec::new();
        let mut suf_entries: Vec<TrieEntry> = Vec::new();
        let mut pre_key: HashMap<(u32, u64), u32> = HashMap::new();
        let mut suf_key: HashMap<(u32, u64), u32> = HashMap::new();
        let mut pre_entry_of = vec![None; n];
        let mut suf_entry_of = vec![None; n];
        let mut add_pre = |g: &Grammar, base: SymbolId, copies: u64| -> u32 {
            *pre_key.entry((base.0, copies)).or_insert_with(|| {
                pre_entries.push(TrieEntry::new(g, EntryBase::Sym(base), copies, true));
                pre_entries.len() as u32 - 1
            })
        };
        let mut add_suf = |g: &Grammar, base: SymbolId, copies: u64| -> u32 {
            *suf_key.entry((base.0, copies)).or_insert_with(|| {
                suf_entries.push(TrieEntry::new(g, EntryBase::Sym(base), copies, false));
                suf_entries.len() as u32 - 1
            })
        };
        for s in 0..n as u32 {
            let sym = SymbolId(s);
            match g.production(sym) {
                Production::Leaf(_) => {}
                Production::Pair(b, c) => {
                    pre_entry_of[s as usize] = Some(add_pre(g, b, 1));
                    suf_entry_of[s as usize] = Some(add_suf(g, c, 1));
                }
                Production::Power(b, k) => {
                    // The per-rule anchor strings: B, B^2, B^(k-2), B^(k-1),
                    // both sides; degenerate counts omitted or deduplicated.
                    pre_entry_of[s as usize] = Some(add_pre(g, b, 1));
                    suf_entry_of[s as usize] = Some(add_suf(g, b, k - 1));
                    for copies in [1, 2, k - 2, k - 1] {
                        if copies >= 1 && copies <= k {
                            add_pre(g, b, copies);
                            add_suf(g, b, copies);
                        }
                    }
                }
            }
        }
        let t_pre = CompactTrie::build(g, fps, pre_entries);
        let t_suf = CompactTrie::build(g, fps, suf_entries);
        let pruned = PrunedTree::build(g);
        CoIndex {
            t_pre,
            t_suf,
            pre_entry_of,
            suf_entry_of,
            pruned,
            memo: Mutex::new(HashMap::new()),
            anchor_memo: Mutex::new(HashMap::new()),
            text: OnceLock::new(),
            counters: Counters::default(),
        }
    }

    /// Locates the pattern-half loci against the anchor tries.
    pub fn attach_anchor_loci(&self, g: &Grammar, fps: &GrammarFps, h: &mut PatternHandle) {
        let pfps = crate::fingerprint::PatternFps::new(fps.params, &h.pattern);
        let rev: Vec<u8> = h.pattern.iter().rev().copied().collect();
        let rfps = crate::fingerprint::PatternFps::new(fps.params, &rev);
        let pre_offsets: Vec<usize> = h.splits.iter().map(|&s| (h.m - s) as usize).collect();
        let suf_offsets: Vec<usize> = h.splits.iter().map(|&s| s as usize).collect();
        h.anchor_pre = self.t_pre.batch_locus(g, fps, &rev, &rfps, &pre_offsets);
        h.anchor_suf = self.t_suf.batch_locus(g, fps, &h.pattern, &pfps, &suf_offsets);
    }

    fn text<'a>(&'a self, g: &Grammar) -> &'a [u8] {
        self.text
            .get_or_init(|| g.expand(g.start()).expect("text within expansion cap"))
    }

    fn anchor(&self, g: &Grammar, u: u32, v: u32) -> Arc<AnchorInfo> {
        let cell = {
            let mut memo = self.anchor_memo.lock().unwrap();
            memo.entry((u, v)).or_default().clone()
        };
        cell.get_or_init(|| {
            let mut bytes = self.t_pre.label_bytes(g, u);
            bytes.reverse();
            let l = bytes.len() as u64;
            bytes.extend_from_slice(&self.t_suf.label_bytes(g, v));
            let occ = oracle::kmp_occurrences(self.text(g), &bytes);
            Arc::new(AnchorInfo { bytes, l, occ })
        })
        .clone()
    }

    /// The memoized per-quadruple record; materialized on first use.
    pub fn quadruple(&self, g: &Grammar, key: QuadKey) -> Arc<QuadrupleRecord> {
        let cell = {
            let mut memo = self.memo.lock().unwrap();
            memo.entry(key).or_default().clone()
        };
        cell.get_or_init(|| Arc::new(self.materialize(g, key))).clone()
    }

    pub fn memoized_len(&self) -> usize {
        self.memo.lock().unwrap().len()
    }

    /// Completed memo entries, for serialization.
    pub fn memoized_records(&self) -> Vec<(QuadKey, Arc<QuadrupleRecord>)> {
        self.memo
            .lock()
            .unwrap()
            .iter()
            .filter_map(|(k, cell)| cell.get().map(|r| (*k, r.clone())))
            .collect()
    }

    /// Installs a previously materialized record (index load path).
    pub fn install_record(&self, key: QuadKey, rec: Arc<QuadrupleRecord>) {
        let cell = {
            let mut memo = self.memo.lock().unwrap();
            memo.entry(key).or_default().clone()
        };
        let _ = cell.set(rec);
    }

    fn materialize(&self, g: &Grammar, (u1, u2, v1, v2): QuadKey) -> QuadrupleRecord {
        let a1 = self.anchor(g, u1, v1);
        let a2 = self.anchor(g, u2, v2);
        let (s1, s2) = (&a1.bytes, &a2.bytes);
        let (l1, l2) = (a1.l, a2.l);
        let (s1_len, s2_len) = (s1.len() as u64, s2.len() as u64);

        let pi1 = {
            let p = oracle::period(s1);
            (p * 2 <= s1_len).then_some(p)
        };

        // Occurrences of S1 inside the string S2, for the per-k triples.
        let occ12 = if s1_len <= s2_len {
            oracle::kmp_occurrences(s2, s1)
        } else {
            Vec::new()
        };
        let mut ktriples = Vec::new();
        let mut k = 0u32;
        while l2 >= (1u64 << k) {
            let t = l2 - (1u64 << k);
            let before = occ12
                .iter()
                .copied()
                .take_while(|&p| p + s1_len <= t + 1)
                .last();
            let covering: Vec<u64> = occ12
                .iter()
                .copied()
                .filter(|&p| p <= t && t < p + s1_len)
                .collect();
            ktriples.push(KTriple {
                before,
                cover_l: covering.first().copied(),
                cover_r: covering.last().copied(),
            });
            if 1u64 << k > l2 {
                break;
            }
            k += 1;
            if k > 63 {
                break;
            }
        }

        let mut t1: Vec<(i64, u32)> = Vec::new();
        let mut l_list: Vec<u32> = Vec::new();
        let mut t2: Vec<(i64, u32)> = Vec::new();
        let mut ov: Option<u64> = None;

        for sym in 0..g.len() as u32 {
            let a = SymbolId(sym);
            if matches!(g.production(a), Production::Leaf(_)) {
                continue;
            }
            // Occurrence containment tests run against the canonical copy of
            // `⟨A⟩` in the text; unreachable symbols never label parse-tree
            // nodes and cannot contribute reported pairs.
            let Some(pos) = self.pruned.canonical_offset(a) else { continue };
            let len_a = g.exp_len(a);
            let len_head = g.head_len(a);
            let o1 = local_occurrences(&a1.occ, pos, len_a, s1_len);
            let o2 = local_occurrences(&a2.occ, pos, len_a, s2_len);

            let rel1 = self.is_relevant_anchor(a, u1, v1);
            let rel2 = self.is_relevant_anchor(a, u2, v2);
            debug_assert_eq!(
                rel1,
                l1 <= len_head && o1.binary_search(&(len_head - l1)).is_ok(),
                "membership vs occurrence list, sym {sym}"
            );

            let p2_tail = o2
                .get(o2.partition_point(|&p| p < len_head)..)
                .and_then(|s| s.first())
                .copied();
            // Case 1: rightmost S1 fully inside the head, leftmost S2 in the
            // tail.
            let p1_head = o1
                .iter()
                .copied()
                .take_while(|&p| p + s1_len <= len_head)
                .last();
            if let (Some(p1), Some(p2)) = (p1_head, p2_tail) {
                t1.push((p2 as i64 - p1 as i64, sym));
            }
            let p1r = rel1.then(|| len_head - l1);
            let p2r = rel2.then(|| len_head - l2);
            // Case 2: relevant S1, leftmost tail S2.
            if let (Some(p1), Some(p2)) = (p1r, p2_tail) {
                t1.push((p2 as i64 - p1 as i64, sym));
            }
            // Case 3: both relevant.
            if let (Some(p1), Some(p2)) = (p1r, p2r) {
                t1.push((p2 as i64 - p1 as i64, sym));
            }
            if let Some(p2) = p2r {
                l_list.push(sym);
                // Case 4: rightmost S1 ending strictly before the relevant S2.
                if p2 >= s1_len {
                    if let Some(p1) = o1
                        .iter()
                        .copied()
                        .take_while(|&p| p + s1_len <= p2)
                        .last()
                    {
                        t1.push((p2 as i64 - p1 as i64, sym));
                    }
                }
                // Case 5: the (up to two) leftmost S1 occurrences overlapping
                // p2 from the left.
                let over: Vec<u64> = o1
                    .iter()
                    .copied()
                    .filter(|&p| p < p2 && p2 < p + s1_len && p + s1_len < p2 + s2_len)
                    .take(2)
                    .collect();
                for &p1 in &over {
                    t1.push((p2 as i64 - p1 as i64, sym));
                }
                // Progression tree: S1 occurrences reaching at least one
                // period past p2. Any two such occurrences overlap each
                // other in >= pi positions, so their distances are multiples
                // of the period and the leftmost/rightmost pair describes
                // the whole progression.
                if let Some(pi) = pi1 {
                    let cover: Vec<u64> = o1
                        .iter()
                        .copied()
                        .filter(|&p| {
                            p <= p2 && p + s1_len >= p2 + pi && p + s1_len <= p2 + s2_len
                        })
                        .collect();
                    if let (Some(&pl), Some(&pr)) = (cover.first(), cover.last()) {
                        debug_assert_eq!((pr - pl) % pi, 0);
                        t2.push((((pr - pl) / pi) as i64, sym));
                        let this_ov = p2 - pr;
                        if let Some(prev) = ov {
                            if prev != this_ov {
                                self.counters.ov_mismatch.fetch_add(1, Ordering::Relaxed);
                            }
                        } else {
                            ov = Some(this_ov);
                        }
                    }
                }
            }
        }
        t1.sort_unstable();
        t2.sort_unstable();
        QuadrupleRecord { l1, l2, s1_len, s2_len, t1, l_list, ktriples, pi1, ov, t2 }
    }

    /// Relevant occurrence of the anchor in `⟨A⟩` with the split at the
    /// locus labels' junction: both anchor halves extend the head and tail
    /// expansions of `A`.
    fn is_relevant_anchor(&self, a: SymbolId, u: u32, v: u32) -> bool {
        let (Some(pe), Some(se)) = (self.pre_entry_of[a.ix()], self.suf_entry_of[a.ix()])
        else {
            return false;
        };
        let pre_rank = self.t_pre.rank_of_entry(pe);
        let suf_rank = self.t_suf.rank_of_entry(se);
        let un = self.t_pre.node(u);
        let vn = self.t_suf.node(v);
        pre_rank >= un.lo && pre_rank < un.hi && suf_rank >= vn.lo && suf_rank < vn.hi
    }

    /// Superset of the non-terminals whose expansion carries a b-close
    /// relevant co-occurrence; every returned non-terminal is guaranteed to
    /// contain some b-close pair.
    pub fn candidate_nonterminals(
        &self,
        g: &Grammar,
        h1: &PatternHandle,
        h2: &PatternHandle,
        b: u64,
    ) -> Vec<(SymbolId, (u64, u64), Subcase)> {
        let mut out = Vec::new();
        let (m1, m2) = (h1.m as i64, h2.m as i64);
        for i in 0..h1.splits.len() {
            let s1 = h1.splits[i];
            let (au1, av1) = (&h1.anchor_pre[i], &h1.anchor_suf[i]);
            if !au1.found || !av1.found {
                continue;
            }
            for j in 0..h2.splits.len() {
                let s2 = h2.splits[j];
                let (au2, av2) = (&h2.anchor_pre[j], &h2.anchor_suf[j]);
                if !au2.found || !av2.found {
                    continue;
                }
                let key = (au1.node, au2.node, av1.node, av2.node);
                let rec = self.quadruple(g, key);
                let d1 = rec.l1 as i64 - s1 as i64;
                let d2 = rec.l2 as i64 - s2 as i64;
                let delta = d1 - d2;

                // Each anchor contains its pattern at the Δ offset, so every
                // anchor occurrence induces a pattern occurrence there.
                #[cfg(debug_assertions)]
                {
                    let a1 = self.anchor(g, au1.node, av1.node);
                    let a2 = self.anchor(g, au2.node, av2.node);
                    debug_assert_eq!(
                        &a1.bytes[d1 as usize..d1 as usize + h1.m as usize],
                        &h1.pattern[..]
                    );
                    debug_assert_eq!(
                        &a2.bytes[d2 as usize..d2 as usize + h2.m as usize],
                        &h2.pattern[..]
                    );
                }

                // Subcases with both anchor occurrences stored explicitly:
                // distances in [Δ, Δ + b].
                let lo = rec.t1.partition_point(|&(d, _)| d < delta);
                for &(d, sym) in &rec.t1[lo..] {
                    if d > delta + b as i64 {
                        break;
                    }
                    out.push((SymbolId(sym), (s1, s2), Subcase::T1Range));
                }

                // S1 (and the induced P1 occurrence) inside S2: decide on the
                // string S2 itself, then credit every non-terminal with a
                // relevant S2 occurrence.
                if !rec.l_list.is_empty() {
                    let a2 = self.anchor(g, au2.node, av2.node);
                    if self.inside_s2_close(&rec, &a2.bytes, &h1.pattern, d1, d2, m2, b) {
                        for &sym in &rec.l_list {
                            out.push((SymbolId(sym), (s1, s2), Subcase::InsideS2));
                        }
                    }
                }

                // Periodic overlap: resolved on the progression tree.
                if let (Some(pi), Some(ov)) = (rec.pi1, rec.ov) {
                    if !rec.t2.is_empty() {
                        let pi = pi as i64;
                        let ell = -((rec.s1_len as i64 - m1 - d1) / pi);
                        let a_lo = div_ceil_i64(delta - ov as i64, pi);
                        let b_hi = div_floor_i64(delta - ov as i64 + b as i64, pi);
                        if a_lo <= b_hi && ell <= b_hi {
                            let from = rec.t2.partition_point(|&(q, _)| q < a_lo);
                            for &(_, sym) in &rec.t2[from..] {
                                out.push((SymbolId(sym), (s1, s2), Subcase::PeriodicOverlap));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Does S2 contain a b-close pair (a P1 occurrence, the P2 occurrence at
    /// offset d2)? Checked against the stored triples at k = ceil(log2 s2)
    /// plus a direct scan of the window around the split.
    #[allow(clippy::too_many_arguments)]
    fn inside_s2_close(
        &self,
        rec: &QuadrupleRecord,
        s2_bytes: &[u8],
        p1: &[u8],
        d1: i64,
        d2: i64,
        m2: i64,
        b: u64,
    ) -> bool {
        let m1 = p1.len() as i64;
        let q2 = d2; // occurrence of P2 in S2
        let b = b as i64;
        let s2 = rec.l2 as i64 - d2; // split of P2 (l2 - Δ2)
        debug_assert!(s2 >= 1);
        let k = ceil_log2(s2 as u64) as usize;
        let two_k = 1i64 << k;
        let t = rec.l2 as i64 - two_k;

        // An S1 occurrence at p induces P1 occurrences p+Δ1 (+ i*pi1 while
        // inside S1); b-close iff some induced occurrence lands in
        // [q2 - b, q2].
        let close_via = |p: i64| -> bool {
            let base = p + d1;
            if base > q2 {
                return false;
            }
            let imax = match rec.pi1 {
                Some(pi) => (rec.s1_len as i64 - d1 - m1) / pi as i64,
                None => 0,
            };
            let pi = rec.pi1.unwrap_or(1) as i64;
            let i = imax.min((q2 - base) / pi);
            let q1 = base + i * pi;
            q2 - q1 <= b
        };

        if t >= 0 && k < rec.ktriples.len() {
            let tri = &rec.ktriples[k];
            if let Some(p) = tri.before {
                if close_via(p as i64) {
                    return true;
                }
            }
            match (tri.cover_l, tri.cover_r, rec.pi1) {
                (Some(pl), Some(pr), Some(pi)) => {
                    // P1 occurrences fill the progression between the two
                    // covering anchor occurrences.
                    let imax = (rec.s1_len as i64 + pr as i64 - m1 - pl as i64) / pi as i64;
                    let base = pl as i64 + d1;
                    if base <= q2 {
                        let i = imax.min((q2 - base) / pi as i64);
                        if i >= 0 && q2 - (base + i * pi as i64) <= b {
                            return true;
                        }
                    }
                }
                (pl, pr, _) => {
                    for p in [pl, pr].into_iter().flatten() {
                        if close_via(p as i64) {
                            return true;
                        }
                    }
                }
            }
        }

        // Window scan: occurrences of P1 in S2[t .. Δ2 + m2), restricted to
        // starts in [t + 1, Δ2]. The window length is at most 2*s2 + |P2|.
        let w_lo = t.max(0) as u64;
        let w_hi = ((d2 + m2) as u64).min(rec.s2_len);
        if w_lo >= w_hi || (w_hi - w_lo) < m1 as u64 {
            return false;
        }
        let window = &s2_bytes[w_lo as usize..w_hi as usize];
        for q in oracle::kmp_occurrences(window, p1) {
            let qg = q as i64 + w_lo as i64;
            if qg > t && qg <= q2 && q2 - qg <= b {
                return true;
            }
        }
        false
    }
}

fn ceil_log2(x: u64) -> u32 {
    debug_assert!(x >= 1);
    64 - (x - 1).leading_zeros()
}

impl CoIndex {
    /// All b-close relevant co-occurrences of the two patterns in `⟨A⟩`,
    /// sorted by q1, in coordinates local to `⟨A⟩`.
    ///
    /// A relevant co-occurrence pairs a P2 occurrence that either crosses the
    /// boundary or is the leftmost in the tail with the rightmost preceding
    /// P1 occurrence; every candidate is validated with predecessor queries.
    pub fn relevant_close_co_occurrences(
        &self,
        g: &Grammar,
        occ: &OccIndex,
        h1: &PatternHandle,
        h2: &PatternHandle,
        a: SymbolId,
        b: u64,
    ) -> Vec<CoOccurrence> {
        let mut out = BTreeSet::new();
        if matches!(g.production(a), Production::Leaf(_)) {
            return Vec::new();
        }
        let len_head = g.head_len(a);
        let mut q2_candidates: Vec<u64> = occ.relevant_occurrences(g, h2, a);
        if let Some(q) = occ.extremal(g, h2, a, Extreme::Leftmost, Part::Tail) {
            q2_candidates.push(len_head + q);
        }
        for q2 in q2_candidates {
            // Only pairs whose P2 occurrence ends at or past the boundary are
            // anchored here.
            if q2 + h2.m <= len_head {
                continue;
            }
            let Some(q1) = occ.pred(g, h1, a, q2) else { continue };
            if q1 >= len_head {
                continue; // belongs to a tail descendant
            }
            // No P2 occurrence in [q1, q2).
            if q2 > 0 {
                if let Some(p) = occ.pred(g, h2, a, q2 - 1) {
                    if p >= q1 {
                        continue;
                    }
                }
            }
            if q2 - q1 <= b {
                out.insert(CoOccurrence::new(q1, q2));
            }
        }
        out.into_iter().collect()
    }

    /// Propagates per-non-terminal relevant co-occurrences to every position
    /// of the non-terminal in the parse tree. Run anchors are expanded to
    /// their in-rule copies first; the traversal then follows next links,
    /// run-copy expansions and duplicate-ancestor links up to the root.
    pub fn report_from_anchors(
        &self,
        g: &Grammar,
        anchors: &[(SymbolId, Vec<CoOccurrence>)],
        m1: u64,
        m2: u64,
    ) -> Vec<CoOccurrence> {
        let mut out: BTreeSet<CoOccurrence> = BTreeSet::new();
        let mut queue: VecDeque<(u32, Vec<CoOccurrence>)> = VecDeque::new();
        for (a, pairs) in anchors {
            if pairs.is_empty() {
                continue;
            }
            let Some(first) = self.pruned.first_node_of[a.ix()] else { continue };
            let expanded = match g.production(*a) {
                Production::Power(base, _) => {
                    self.expand_run_pairs(g, *a, g.exp_len(base), pairs, m1, m2)
                }
                _ => pairs.clone(),
            };
            queue.push_back((first, expanded));
        }
        while let Some((v, mut w)) = queue.pop_front() {
            let nd = self.pruned.nodes[v as usize];
            if nd.parent == NO_PNODE {
                for c in w {
                    if !out.insert(c) {
                        self.counters.dup_suppressed.fetch_add(1, Ordering::Relaxed);
                    }
                }
                continue;
            }
            if nd.next != NO_PNODE {
                queue.push_back((nd.next, w.clone()));
            }
            if let Some(copies) = nd.run_sibling {
                let base = match nd.label {
                    PLabel::Sym(s) => s,
                    PLabel::PowTail(..) => unreachable!("first run child is a symbol"),
                };
                let lb = g.exp_len(base);
                let parent_len = lb * (copies + 1);
                let mut expanded = Vec::with_capacity(w.len() * (copies as usize + 1));
                for c in &w {
                    for i in 0..=copies {
                        let (q1, q2) = (c.q1 + i * lb, c.q2 + i * lb);
                        if q1 + m1 > parent_len || q2 + m2 > parent_len {
                            self.counters.clipped.fetch_add(1, Ordering::Relaxed);
                            break;
                        }
                        expanded.push(CoOccurrence::new(q1, q2));
                    }
                }
                w = expanded;
            }
            debug_assert!(nd.anc != NO_PNODE);
            let shift = nd.off - self.pruned.nodes[nd.anc as usize].off;
            let shifted: Vec<CoOccurrence> = w
                .into_iter()
                .map(|c| CoOccurrence::new(c.q1 + shift, c.q2 + shift))
                .collect();
            queue.push_back((nd.anc, shifted));
        }
        out.into_iter().collect()
    }

    /// Copies of relevant pairs across an entire run rule: shifts by whole
    /// base lengths while both occurrences stay inside the expansion.
    fn expand_run_pairs(
        &self,
        g: &Grammar,
        a: SymbolId,
        lb: u64,
        pairs: &[CoOccurrence],
        m1: u64,
        m2: u64,
    ) -> Vec<CoOccurrence> {
        let la = g.exp_len(a);
        let mut out = Vec::new();
        for c in pairs {
            debug_assert!(c.q1 + m1 <= la && c.q2 + m2 <= la);
            let imax = ((la - c.q1 - m1) / lb).min((la - c.q2 - m2) / lb);
            for i in 0..=imax {
                out.push(CoOccurrence::new(c.q1 + i * lb, c.q2 + i * lb));
            }
        }
        out
    }

    /// All b-close co-occurrences of (p1, p2) in the text, sorted by q1.
    pub fn query_close(
        &self,
        g: &Grammar,
        fps: &GrammarFps,
        occ: &OccIndex,
        p1: &[u8],
        p2: &[u8],
        b: i64,
    ) -> Result<Vec<CoOccurrence>, QueryError> {
        if p1.is_empty() || p2.is_empty() {
            return Err(QueryError::EmptyPattern);
        }
        if b < 0 {
            return Err(QueryError::NegativeBound);
        }
        let b = (b as u64).min(g.text_len().saturating_sub(1));
        let mut h1 = occ.preprocess_pattern(g, fps, p1)?;
        let mut h2 = occ.preprocess_pattern(g, fps, p2)?;
        if h1.absent || h2.absent {
            return Ok(Vec::new());
        }
        self.attach_anchor_loci(g, fps, &mut h1);
        self.attach_anchor_loci(g, fps, &mut h2);
        self.query_close_prepared(g, occ, &h1, &h2, b)
    }

    pub fn query_close_prepared(
        &self,
        g: &Grammar,
        occ: &OccIndex,
        h1: &PatternHandle,
        h2: &PatternHandle,
        b: u64,
    ) -> Result<Vec<CoOccurrence>, QueryError> {
        if h1.absent || h2.absent {
            return Ok(Vec::new());
        }
        let (m1, m2) = (h1.m, h2.m);

        // P2 inside P1: every co-occurrence pairs an occurrence q of P1 with
        // q + q2off, so reporting P1's occurrences suffices.
        if m2 <= m1 {
            if let Some(q2off) = oracle::kmp_occurrences(&h1.pattern, &h2.pattern).first() {
                if *q2off > b {
                    return Ok(Vec::new());
                }
                let anchors = self.occurrence_anchors(g, occ, h1, *q2off);
                let out = self.report_from_anchors(g, &anchors, m1, m2);
                #[cfg(debug_assertions)]
                self.verify_reported(g, h1, h2, b, &out);
                return Ok(out);
            }
        }

        // Single-character patterns carry no splits; fall back to scanning
        // non-terminals that contain both patterns.
        let candidates: Vec<SymbolId> = if m1 == 1 || m2 == 1 {
            (0..g.len() as u32)
                .map(SymbolId)
                .filter(|&a| {
                    !matches!(g.production(a), Production::Leaf(_))
                        && occ.occurs_in(g, h1, a)
                        && occ.occurs_in(g, h2, a)
                })
                .collect()
        } else {
            let mut set: BTreeSet<SymbolId> = BTreeSet::new();
            for (a, _, _) in self.candidate_nonterminals(g, h1, h2, b) {
                set.insert(a);
            }
            set.into_iter().collect()
        };

        let mut anchors = Vec::new();
        for a in candidates {
            let pairs = self.relevant_close_co_occurrences(g, occ, h1, h2, a, b);
            if !pairs.is_empty() {
                anchors.push((a, pairs));
            }
        }
        let out = self.report_from_anchors(g, &anchors, m1, m2);
        #[cfg(debug_assertions)]
        self.verify_reported(g, h1, h2, b, &out);
        Ok(out)
    }

    /// Debug-build check: every reported pair is an occurrence pair, nothing
    /// of either pattern lies between, and the distance respects the bound.
    #[cfg(debug_assertions)]
    fn verify_reported(
        &self,
        g: &Grammar,
        h1: &PatternHandle,
        h2: &PatternHandle,
        b: u64,
        out: &[CoOccurrence],
    ) {
        let text = self.text(g);
        let o1 = oracle::kmp_occurrences(text, &h1.pattern);
        let o2 = oracle::kmp_occurrences(text, &h2.pattern);
        for c in out {
            debug_assert!(c.q2 - c.q1 <= b, "{c:?} beyond bound {b}");
            debug_assert!(o1.binary_search(&c.q1).is_ok(), "{c:?}: q1 not an occurrence");
            debug_assert!(o2.binary_search(&c.q2).is_ok(), "{c:?}: q2 not an occurrence");
            let i = o1.partition_point(|&q| q <= c.q1);
            debug_assert!(
                i >= o1.len() || o1[i] > c.q2,
                "{c:?}: intervening first-pattern occurrence"
            );
            let j = o2.partition_point(|&q| q < c.q2);
            debug_assert!(
                j == 0 || o2[j - 1] < c.q1,
                "{c:?}: intervening second-pattern occurrence"
            );
        }
    }

    /// Anchors carrying every occurrence of P1 as a pair (q, q + q2off).
    fn occurrence_anchors(
        &self,
        g: &Grammar,
        occ: &OccIndex,
        h1: &PatternHandle,
        q2off: u64,
    ) -> Vec<(SymbolId, Vec<CoOccurrence>)> {
        let mut anchors = Vec::new();
        if h1.m == 1 {
            let ch = h1.pattern[0];
            for s in 0..g.len() as u32 {
                if matches!(g.production(SymbolId(s)), Production::Leaf(c) if c == ch) {
                    anchors.push((SymbolId(s), vec![CoOccurrence::new(0, q2off)]));
                }
            }
            return anchors;
        }
        for s in 0..g.len() as u32 {
            let a = SymbolId(s);
            let rel = occ.relevant_occurrences(g, h1, a);
            if rel.is_empty() {
                continue;
            }
            let pairs = rel
                .into_iter()
                .map(|q| CoOccurrence::new(q, q + q2off))
                .collect();
            anchors.push((a, pairs));
        }
        anchors
    }

    /// Materializes every anchor quadruple; errors beyond the cap.
    pub fn build_eager(&self, g: &Grammar, cap: u64) -> Result<u64, IndexError> {
        let pre_nodes: Vec<u32> = (0..self.t_pre.nodes().len() as u32)
            .filter(|&i| self.t_pre.node(i).depth >= 1)
            .collect();
        let suf_nodes: Vec<u32> = (0..self.t_suf.nodes().len() as u32)
            .filter(|&i| self.t_suf.node(i).depth >= 1)
            .collect();
        let total = (pre_nodes.len() as u64 * suf_nodes.len() as u64).pow(2);
        if total > cap {
            return Err(IndexError::EagerTooLarge { quadruples: total, cap });
        }
        for &u1 in &pre_nodes {
            for &u2 in &pre_nodes {
                for &v1 in &suf_nodes {
                    for &v2 in &suf_nodes {
                        self.quadruple(g, (u1, u2, v1, v2));
                    }
                }
            }
        }
        Ok(total)
    }
}

/// Occurrences of a string of length `s_len` fully inside the canonical copy
/// of `⟨A⟩` at `pos`, in local coordinates.
fn local_occurrences(occ: &[u64], pos: u64, len_a: u64, s_len: u64) -> Vec<u64> {
    if s_len > len_a {
        return Vec::new();
    }
    let lo = occ.partition_point(|&o| o < pos);
    let hi = occ.partition_point(|&o| o + s_len <= pos + len_a);
    occ[lo..hi.max(lo)].iter().map(|&o| o - pos).collect()
}

fn div_floor_i64(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

fn div_ceil_i64(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress;
    use crate::fingerprint::{FingerprintParams, MERSENNE61};
    use crate::grammar::GrammarKind;

    struct Ctx {
        g: Grammar,
        fps: GrammarFps,
        occ: OccIndex,
        co: CoIndex,
    }

    fn setup(text: &[u8], seed: u64) -> Ctx {
        let (g, _) = compress::to_rlslp_from_text(text, seed).unwrap();
        let fps = GrammarFps::new(&g, FingerprintParams::new(MERSENNE61, 1_000_003));
        let occ = OccIndex::build(&g, &fps);
        let co = CoIndex::build(&g, &fps);
        Ctx { g, fps, occ, co }
    }

    fn query(ctx: &Ctx, p1: &[u8], p2: &[u8], b: i64) -> Vec<CoOccurrence> {
        ctx.co.query_close(&ctx.g, &ctx.fps, &ctx.occ, p1, p2, b).unwrap()
    }

    #[test]
    fn anchor_tries_hold_rule_sides() {
        // Grammar {X1 -> a, X2 -> b, X3 -> X1 X2}: T_suf holds "b", T_pre
        // holds (reversed) "a".
        let prods = vec![
            Production::Leaf(b'a'),
            Production::Leaf(b'b'),
            Production::Pair(SymbolId(0), SymbolId(1)),
        ];
        let g = Grammar::validate_and_index(prods, SymbolId(2), GrammarKind::Rlslp).unwrap();
        let fps = GrammarFps::new(&g, FingerprintParams::new(MERSENNE61, 1_000_003));
        let co = CoIndex::build(&g, &fps);
        assert_eq!(co.t_pre.len(), 1);
        assert_eq!(co.t_suf.len(), 1);
        assert_eq!(co.t_suf.entry_at_rank(0).prefix_bytes(&g, 1), b"b");
        let mut rev = co.t_pre.entry_at_rank(0).prefix_bytes(&g, 1);
        rev.reverse();
        assert_eq!(rev, b"a");
    }

    #[test]
    fn anchor_tries_power_rule_entries() {
        // A -> B^5 stores <B>, <B^2>, <B^3>, <B^4> on the suffix side.
        let prods = vec![
            Production::Leaf(b'a'),
            Production::Leaf(b'b'),
            Production::Pair(SymbolId(0), SymbolId(1)),
            Production::Power(SymbolId(2), 5),
        ];
        let g = Grammar::validate_and_index(prods, SymbolId(3), GrammarKind::Rlslp).unwrap();
        let fps = GrammarFps::new(&g, FingerprintParams::new(MERSENNE61, 1_000_003));
        let co = CoIndex::build(&g, &fps);
        let mut lens: Vec<u64> = (0..co.t_suf.len() as u32)
            .map(|r| co.t_suf.entry_at_rank(r).len)
            .collect();
        lens.sort_unstable();
        // "b" (tail of X2's pair rule is the leaf b), and the B powers 2,4,6,8.
        assert!(lens.contains(&2) && lens.contains(&4) && lens.contains(&6) && lens.contains(&8));
    }

    #[test]
    fn pruned_tree_shape() {
        // {X1 -> a, X2 -> b, X3 -> X1 X2, X4 -> X3 X3}: the second X3 child
        // is a pruned leaf reached by a next link from the first.
        let prods = vec![
            Production::Leaf(b'a'),
            Production::Leaf(b'b'),
            Production::Pair(SymbolId(0), SymbolId(1)),
            Production::Pair(SymbolId(2), SymbolId(2)),
        ];
        let g = Grammar::validate_and_index(prods, SymbolId(3), GrammarKind::Rlslp).unwrap();
        let t = PrunedTree::build(&g);
        let first = t.first_node_of[2].unwrap();
        let next = t.nodes[first as usize].next;
        assert_ne!(next, NO_PNODE);
        assert_eq!(t.nodes[next as usize].off, 2);
        assert_eq!(t.nodes[next as usize].next, NO_PNODE);
        // Every non-root node reaches the root through anc links.
        for v in 1..t.nodes.len() {
            let mut cur = v as u32;
            let mut steps = 0;
            while t.nodes[cur as usize].parent != NO_PNODE {
                cur = t.nodes[cur as usize].anc;
                steps += 1;
                assert!(steps <= t.nodes.len());
            }
        }
    }

    #[test]
    fn report_from_anchors_pair_rule() {
        let prods = vec![
            Production::Leaf(b'a'),
            Production::Leaf(b'b'),
            Production::Pair(SymbolId(0), SymbolId(1)),
            Production::Pair(SymbolId(2), SymbolId(2)),
        ];
        let g = Grammar::validate_and_index(prods, SymbolId(3), GrammarKind::Rlslp).unwrap();
        let fps = GrammarFps::new(&g, FingerprintParams::new(MERSENNE61, 1_000_003));
        let co = CoIndex::build(&g, &fps);
        let anchors = vec![(SymbolId(2), vec![CoOccurrence::new(0, 1)])];
        let got = co.report_from_anchors(&g, &anchors, 1, 1);
        assert_eq!(got, vec![CoOccurrence::new(0, 1), CoOccurrence::new(2, 3)]);
        assert_eq!(co.counters.dup_suppressed.load(Ordering::Relaxed), 0);
    }

    #[test]
    fn report_from_anchors_power_rule() {
        // A -> B^3 with <B> = "ab": anchor (1, 2) for (b, a) replicates to
        // (3, 4) but not past the end.
        let prods = vec![
            Production::Leaf(b'a'),
            Production::Leaf(b'b'),
            Production::Pair(SymbolId(0), SymbolId(1)),
            Production::Power(SymbolId(2), 3),
        ];
        let g = Grammar::validate_and_index(prods, SymbolId(3), GrammarKind::Rlslp).unwrap();
        let fps = GrammarFps::new(&g, FingerprintParams::new(MERSENNE61, 1_000_003));
        let co = CoIndex::build(&g, &fps);
        let anchors = vec![(SymbolId(3), vec![CoOccurrence::new(1, 2)])];
        let got = co.report_from_anchors(&g, &anchors, 1, 1);
        assert_eq!(got, vec![CoOccurrence::new(1, 2), CoOccurrence::new(3, 4)]);
    }

    #[test]
    fn relevant_close_basic() {
        // <A> = "abac" with head "ab", tail "ac".
        let prods = vec![
            Production::Leaf(b'a'),
            Production::Leaf(b'b'),
            Production::Leaf(b'c'),
            Production::Pair(SymbolId(0), SymbolId(1)),
            Production::Pair(SymbolId(0), SymbolId(2)),
            Production::Pair(SymbolId(3), SymbolId(4)),
        ];
        let g = Grammar::validate_and_index(prods, SymbolId(5), GrammarKind::Rlslp).unwrap();
        let fps = GrammarFps::new(&g, FingerprintParams::new(MERSENNE61, 1_000_003));
        let occ = OccIndex::build(&g, &fps);
        let co = CoIndex::build(&g, &fps);
        let h1 = occ.preprocess_pattern(&g, &fps, b"ab").unwrap();
        let h2 = occ.preprocess_pattern(&g, &fps, b"ac").unwrap();
        let a = SymbolId(5);
        assert_eq!(
            co.relevant_close_co_occurrences(&g, &occ, &h1, &h2, a, 2),
            vec![CoOccurrence::new(0, 2)]
        );
        assert!(co.relevant_close_co_occurrences(&g, &occ, &h1, &h2, a, 1).is_empty());
        // Single characters: <X3> = "ab", P1 = "a", P2 = "b".
        let h1 = occ.preprocess_pattern(&g, &fps, b"a").unwrap();
        let h2 = occ.preprocess_pattern(&g, &fps, b"b").unwrap();
        assert_eq!(
            co.relevant_close_co_occurrences(&g, &occ, &h1, &h2, SymbolId(3), 1),
            vec![CoOccurrence::new(0, 1)]
        );
    }

    #[test]
    fn query_close_sample_text() {
        let ctx = setup(b"aababacacabc", 7);
        assert_eq!(query(&ctx, b"ab", b"ac", 2), vec![CoOccurrence::new(3, 5)]);
        assert_eq!(query(&ctx, b"ab", b"ac", 1), vec![]);
        assert_eq!(
            query(&ctx, b"a", b"c", 2),
            vec![CoOccurrence::new(5, 6), CoOccurrence::new(7, 8), CoOccurrence::new(9, 11)]
        );
        assert_eq!(
            query(&ctx, b"a", b"c", 1),
            vec![CoOccurrence::new(5, 6), CoOccurrence::new(7, 8)]
        );
        assert_eq!(query(&ctx, b"a", b"z", 5), vec![]);
        assert!(ctx.co.query_close(&ctx.g, &ctx.fps, &ctx.occ, b"", b"a", 1).is_err());
        assert!(ctx.co.query_close(&ctx.g, &ctx.fps, &ctx.occ, b"a", b"a", -1).is_err());
    }

    #[test]
    fn query_close_substring_case() {
        let ctx = setup(b"aababacacabc", 7);
        // P2 = "b" occurs inside P1 = "ab" at offset 1.
        let want: Vec<CoOccurrence> =
            oracle::naive_b_close(b"aababacacabc", b"ab", b"b", 3);
        assert_eq!(query(&ctx, b"ab", b"b", 3), want);
        // Identical patterns.
        let want: Vec<CoOccurrence> =
            oracle::naive_b_close(b"aababacacabc", b"ab", b"ab", 0);
        assert_eq!(query(&ctx, b"ab", b"ab", 0), want);
        // q2off beyond b yields nothing.
        assert_eq!(query(&ctx, b"ab", b"b", 0), vec![]);
    }

    #[test]
    fn differential_query_close_random() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(77);
        for case in 0..50u64 {
            let n = rng.gen_range(1..=120);
            let alpha = rng.gen_range(1..=3u8);
            let text: Vec<u8> = (0..n).map(|_| b'a' + rng.gen_range(0..alpha)).collect();
            let ctx = setup(&text, 1000 + case);
            for _ in 0..8 {
                let sample = |rng: &mut StdRng, lo: usize| -> Vec<u8> {
                    let mlen = rng.gen_range(lo..=6usize).min(text.len());
                    if rng.gen_bool(0.85) {
                        let at = rng.gen_range(0..=text.len() - mlen);
                        text[at..at + mlen].to_vec()
                    } else {
                        (0..mlen).map(|_| b'a' + rng.gen_range(0..3)).collect()
                    }
                };
                let p1 = sample(&mut rng, 1);
                let p2 = if rng.gen_bool(0.2) && p1.len() > 1 {
                    // Forced substring case.
                    let l = rng.gen_range(1..=p1.len());
                    let at = rng.gen_range(0..=p1.len() - l);
                    p1[at..at + l].to_vec()
                } else {
                    sample(&mut rng, 1)
                };
                for b in [0i64, 1, 2, 5, n as i64] {
                    let want = oracle::naive_b_close(&text, &p1, &p2, b as u64);
                    let got = query(&ctx, &p1, &p2, b);
                    assert_eq!(
                        got, want,
                        "case={case} text={} p1={} p2={} b={b}",
                        String::from_utf8_lossy(&text),
                        String::from_utf8_lossy(&p1),
                        String::from_utf8_lossy(&p2)
                    );
                }
            }
            assert_eq!(ctx.co.counters.dup_suppressed.load(Ordering::Relaxed), 0);
            assert_eq!(ctx.co.counters.ov_mismatch.load(Ordering::Relaxed), 0);
        }
    }

    #[test]
    fn candidate_superset_and_soundness() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(5);
        for case in 0..25u64 {
            let n = rng.gen_range(4..=70);
            let text: Vec<u8> = (0..n).map(|_| b'a' + rng.gen_range(0..2)).collect();
            let ctx = setup(&text, 2000 + case);
            let exps = crate::oracle::expand_all(&ctx.g, 1 << 20).unwrap();
            for _ in 0..4 {
                let mlen = rng.gen_range(2..=5usize).min(text.len());
                let at = rng.gen_range(0..=text.len() - mlen);
                let p1 = text[at..at + mlen].to_vec();
                let mlen2 = rng.gen_range(2..=5usize).min(text.len());
                let at2 = rng.gen_range(0..=text.len() - mlen2);
                let p2 = text[at2..at2 + mlen2].to_vec();
                if !crate::oracle::kmp_occurrences(&p1, &p2).is_empty() {
                    continue;
                }
                let b = rng.gen_range(0..=n as u64);
                let mut h1 = ctx.occ.preprocess_pattern(&ctx.g, &ctx.fps, &p1).unwrap();
                let mut h2 = ctx.occ.preprocess_pattern(&ctx.g, &ctx.fps, &p2).unwrap();
                if h1.absent || h2.absent {
                    continue;
                }
                ctx.co.attach_anchor_loci(&ctx.g, &ctx.fps, &mut h1);
                ctx.co.attach_anchor_loci(&ctx.g, &ctx.fps, &mut h2);
                let got: BTreeSet<u32> = ctx
                    .co
                    .candidate_nonterminals(&ctx.g, &h1, &h2, b)
                    .into_iter()
                    .map(|(s, _, _)| s.0)
                    .collect();
                for s in 0..ctx.g.len() as u32 {
                    let exp = &exps[s as usize];
                    // Oracle: does <A> contain a b-close relevant co-occurrence?
                    let len_head = match ctx.g.production(SymbolId(s)) {
                        Production::Leaf(_) => continue,
                        _ => ctx.g.head_len(SymbolId(s)),
                    };
                    let has_relevant = crate::oracle::naive_co_occurrences(exp, &p1, &p2)
                        .into_iter()
                        .any(|c| {
                            c.q2 - c.q1 <= b
                                && c.q1 < len_head
                                && c.q2 + p2.len() as u64 > len_head
                        });
                    if has_relevant {
                        assert!(
                            got.contains(&s),
                            "missing candidate {s} case={case} p1={p1:?} p2={p2:?} b={b} text={text:?}"
                        );
                    }
                    // Soundness: every candidate contains some b-close pair.
                    if got.contains(&s) {
                        let o1 = crate::oracle::naive_occurrences(exp, &p1);
                        let o2 = crate::oracle::naive_occurrences(exp, &p2);
                        let pair = o1.iter().any(|&q1| {
                            o2.iter().any(|&q2| q2 >= q1 && q2 - q1 <= b)
                        });
                        assert!(
                            pair,
                            "unsound candidate {s} case={case} p1={p1:?} p2={p2:?} b={b} text={text:?}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn eager_mode_small_grammar() {
        let prods = vec![
            Production::Leaf(b'a'),
            Production::Leaf(b'b'),
            Production::Pair(SymbolId(0), SymbolId(1)),
        ];
        let g = Grammar::validate_and_index(prods, SymbolId(2), GrammarKind::Rlslp).unwrap();
        let fps = GrammarFps::new(&g, FingerprintParams::new(MERSENNE61, 1_000_003));
        let co = CoIndex::build(&g, &fps);
        let total = co.build_eager(&g, 1 << 12).unwrap();
        assert!(total >= 1);
        assert_eq!(co.memoized_len() as u64, total);
        assert!(matches!(
            co.build_eager(&g, 0),
            Err(IndexError::EagerTooLarge { .. })
        ));
    }
}

#[cfg(test)]
mod periodic_tests {
    use super::tests_support::*;
    use super::*;
    use crate::oracle;

    /// Highly periodic texts exercise the progression tree and the overlap
    /// subcases hardest.
    #[test]
    fn differential_on_periodic_texts() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(4242);
        let mut case = 0u64;
        let blocks: Vec<&[u8]> = vec![b"a", b"ab", b"aab", b"aabab", b"abc"];
        for &block in &blocks {
            for reps in [3usize, 8, 40] {
                let mut text: Vec<u8> =
                    block.iter().cycle().take(block.len() * reps).copied().collect();
                // Occasionally disturb one position to break pure periodicity.
                if rng.gen_bool(0.5) && text.len() > 4 {
                    let at = rng.gen_range(0..text.len());
                    text[at] = b'a' + (text[at] - b'a' + 1) % 3;
                }
                case += 1;
                let ctx = setup_ctx(&text, case);
                for _ in 0..10 {
                    let m1 = rng.gen_range(1..=8usize).min(text.len());
                    let at1 = rng.gen_range(0..=text.len() - m1);
                    let p1 = text[at1..at1 + m1].to_vec();
                    let m2 = rng.gen_range(1..=8usize).min(text.len());
                    let at2 = rng.gen_range(0..=text.len() - m2);
                    let p2 = text[at2..at2 + m2].to_vec();
                    for b in [0i64, 1, 3, 7, text.len() as i64] {
                        let got = ctx
                            .co
                            .query_close(&ctx.g, &ctx.fps, &ctx.occ, &p1, &p2, b)
                            .unwrap();
                        let want = oracle::naive_b_close(&text, &p1, &p2, b as u64);
                        assert_eq!(
                            got,
                            want,
                            "case={case} text={} p1={} p2={} b={b}",
                            String::from_utf8_lossy(&text),
                            String::from_utf8_lossy(&p1),
                            String::from_utf8_lossy(&p2)
                        );
                    }
                }
                assert_eq!(ctx.co.counters.dup_suppressed.load(Ordering::Relaxed), 0);
            }
        }
    }

    /// Fibonacci word: many near-periodicities, moderate grammar.
    #[test]
    fn differential_on_fibonacci_prefixes() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(99);
        let text = oracle::fibonacci_word(610);
        let ctx = setup_ctx(&text, 1);
        for _ in 0..60 {
            let m1 = rng.gen_range(1..=10usize);
            let at1 = rng.gen_range(0..=text.len() - m1);
            let p1 = text[at1..at1 + m1].to_vec();
            let m2 = rng.gen_range(1..=10usize);
            let at2 = rng.gen_range(0..=text.len() - m2);
            let p2 = text[at2..at2 + m2].to_vec();
            for b in [0i64, 2, 13, 89] {
                let got = ctx
                    .co
                    .query_close(&ctx.g, &ctx.fps, &ctx.occ, &p1, &p2, b)
                    .unwrap();
                let want = oracle::naive_b_close(&text, &p1, &p2, b as u64);
                assert_eq!(got, want, "p1={p1:?} p2={p2:?} b={b}");
            }
        }
    }
}



#[cfg(test)]
mod structure_tests {
    use super::*;
    use crate::fingerprint::{FingerprintParams, GrammarFps, MERSENNE61};
    use crate::grammar::GrammarKind;
    use crate::oracle;

    fn full_check(g: Grammar) {
        let text = g.expand(g.start()).unwrap();
        let fps = GrammarFps::new(&g, FingerprintParams::new(MERSENNE61, 1_000_003));
        let occ = OccIndex::build(&g, &fps);
        let co = CoIndex::build(&g, &fps);
        let pats: Vec<Vec<u8>> = {
            let mut v = Vec::new();
            for m in 1..=4usize.min(text.len()) {
                for at in 0..=text.len() - m {
                    v.push(text[at..at + m].to_vec());
                }
            }
            v.sort();
            v.dedup();
            v
        };
        for p1 in &pats {
            for p2 in &pats {
                for b in [0i64, 1, 3, text.len() as i64] {
                    let got = co.query_close(&g, &fps, &occ, p1, p2, b).unwrap();
                    let want = oracle::naive_b_close(&text, p1, p2, b as u64);
                    assert_eq!(got, want, "text={text:?} p1={p1:?} p2={p2:?} b={b}");
                }
            }
        }
        assert_eq!(co.counters.dup_suppressed.load(Ordering::Relaxed), 0);
    }

    /// Anchors deep below a uniquely-labeled run node must still replicate
    /// across the run copies on their way to the root.
    #[test]
    fn propagation_through_unique_run_node() {
        // R -> P X2, P -> Q^3, Q -> D E, D -> ab, E -> c: text "abcabcabcb".
        let prods = vec![
            Production::Leaf(b'a'),                      // 0
            Production::Leaf(b'b'),                      // 1
            Production::Leaf(b'c'),                      // 2
            Production::Pair(SymbolId(0), SymbolId(1)),  // 3: D = ab
            Production::Pair(SymbolId(3), SymbolId(2)),  // 4: Q = abc
            Production::Power(SymbolId(4), 3),           // 5: P = abcabcabc
            Production::Pair(SymbolId(5), SymbolId(1)),  // 6: R
        ];
        let g = Grammar::validate_and_index(prods, SymbolId(6), GrammarKind::Rlslp).unwrap();
        assert_eq!(g.expand(g.start()).unwrap(), b"abcabcabcb");
        full_check(g);
    }

    /// Hand-written grammars can nest run rules directly.
    #[test]
    fn nested_power_rules() {
        // X2 = a^2, X3 = (aa)^3 = a^6, X4 = X3 b
        let prods = vec![
            Production::Leaf(b'a'),
            Production::Leaf(b'b'),
            Production::Power(SymbolId(0), 2),
            Production::Power(SymbolId(2), 3),
            Production::Pair(SymbolId(3), SymbolId(1)),
        ];
        let g = Grammar::validate_and_index(prods, SymbolId(4), GrammarKind::Rlslp).unwrap();
        assert_eq!(g.expand(g.start()).unwrap(), b"aaaaaab");
        full_check(g);
    }

    /// Run rule with exponent exactly 2 (tail is a single copy).
    #[test]
    fn power_exponent_two() {
        let prods = vec![
            Production::Leaf(b'a'),
            Production::Leaf(b'b'),
            Production::Pair(SymbolId(0), SymbolId(1)),
            Production::Power(SymbolId(2), 2),
            Production::Pair(SymbolId(3), SymbolId(3)),
        ];
        let g = Grammar::validate_and_index(prods, SymbolId(4), GrammarKind::Rlslp).unwrap();
        assert_eq!(g.expand(g.start()).unwrap(), b"abababab");
        full_check(g);
    }
}
