//! Compact tries over implicit grammar affixes.
//!
//! An entry denotes `⟨base⟩^copies` or its reverse and is never materialized;
//! comparisons go through a short byte cache, then fingerprint-guided lcp
//! binary search, then one character extracted from the grammar. Nodes are
//! intervals of the sorted entry array paired with a string depth, augmented
//! with a heavy-path decomposition.

use std::collections::HashMap;

use crate::fingerprint::{Fingerprint, GrammarFps, PatternFps, Side};
use crate::grammar::{Affix, Grammar, SymbolId};

const CACHE: usize = 16;
pub const NO_NODE: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryBase {
    Sym(SymbolId),
    Byte(u8),
}

/// One indexed string: a power of a non-terminal expansion or a single byte,
/// optionally reversed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrieEntry {
    pub base: EntryBase,
    pub copies: u64,
    pub reversed: bool,
    pub len: u64,
    cache: [u8; CACHE],
    cache_len: u8,
}

impl TrieEntry {
    pub fn new(g: &Grammar, base: EntryBase, copies: u64, reversed: bool) -> TrieEntry {
        let unit = match base {
            EntryBase::Sym(s) => g.exp_len(s),
            EntryBase::Byte(_) => 1,
        };
        let len = unit * copies;
        assert!(len >= 1, "empty trie entry");
        let mut e = TrieEntry { base, copies, reversed, len, cache: [0; CACHE], cache_len: 0 };
        let take = (CACHE as u64).min(len) as usize;
        for i in 0..take {
            e.cache[i] = e.char_at(g, i as u64);
        }
        e.cache_len = take as u8;
        e
    }

    /// Character `i` of the denoted string.
    pub fn char_at(&self, g: &Grammar, i: u64) -> u8 {
        debug_assert!(i < self.len);
        match self.base {
            EntryBase::Byte(ch) => ch,
            EntryBase::Sym(s) => {
                let unit = g.exp_len(s);
                let j = i % unit;
                let j = if self.reversed { unit - 1 - j } else { j };
                g.random_access(s, j).expect("within expansion")
            }
        }
    }

    pub fn prefix_fp(&self, g: &Grammar, fps: &GrammarFps, l: u64) -> Fingerprint {
        debug_assert!(l <= self.len);
        match self.base {
            EntryBase::Byte(ch) => {
                let f = fps.params.of_byte(ch);
                fps.params.repeat(f, l)
            }
            EntryBase::Sym(s) => {
                fps.power_affix(g, s, self.copies, Side::Prefix, self.reversed, l)
            }
        }
    }

    /// First `l` bytes of the denoted string, O(l).
    pub fn prefix_bytes(&self, g: &Grammar, l: u64) -> Vec<u8> {
        debug_assert!(l <= self.len);
        match self.base {
            EntryBase::Byte(ch) => vec![ch; l as usize],
            EntryBase::Sym(s) => {
                let unit = g.exp_len(s);
                let full = l / unit;
                let rest = l % unit;
                let mut out = Vec::with_capacity(l as usize);
                if full > 0 {
                    let mut one = g.expand(s).expect("unit fits in requested prefix");
                    if self.reversed {
                        one.reverse();
                    }
                    for _ in 0..full {
                        out.extend_from_slice(&one);
                    }
                }
                if rest > 0 {
                    if self.reversed {
                        let mut part = g.extract_affix(s, Affix::Suffix, rest).unwrap();
                        part.reverse();
                        out.extend_from_slice(&part);
                    } else {
                        out.extend_from_slice(&g.extract_affix(s, Affix::Prefix, rest).unwrap());
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Node {
    pub lo: u32,
    pub hi: u32,
    /// |λ(u)|: length of the node's label.
    pub depth: u64,
    pub parent: u32,
    pub hp: u32,
}

/// Interval of sorted entries prefixed by a query string.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Locus {
    pub lo: u32,
    pub hi: u32,
    pub found: bool,
    pub node: u32,
    pub depth: u64,
}

impl Locus {
    pub fn not_found(at: u32) -> Locus {
        Locus { lo: at, hi: at, found: false, node: NO_NODE, depth: 0 }
    }

    #[inline]
    pub fn contains_rank(&self, rank: u32) -> bool {
        self.found && rank >= self.lo && rank < self.hi
    }
}

#[derive(Debug, Clone)]
pub struct CompactTrie {
    pub entries: Vec<TrieEntry>,
    /// Entry indices in lexicographic order of denoted strings (ties by id).
    order: Vec<u32>,
    /// rank_of[entry_idx] = position in `order`.
    rank_of: Vec<u32>,
    nodes: Vec<Node>,
    /// Deepest node per distinct interval (the root is the only shallower
    /// node that can share an interval).
    by_interval: HashMap<(u32, u32), u32>,
    /// Deepest node containing each sorted position.
    leaf_node: Vec<u32>,
    /// Per entry rank: (heavy path, depth of its lowest node containing the
    /// entry), from the entry's terminal node up to the root.
    chains: Vec<Vec<(u32, u64)>>,
    hp_count: u32,
}

impl CompactTrie {
    pub fn build(g: &Grammar, fps: &GrammarFps, entries: Vec<TrieEntry>) -> CompactTrie {
        let n = entries.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        order.sort_by(|&a, &b| {
            cmp_entries(g, fps, &entries[a as usize], &entries[b as usize])
                .then(a.cmp(&b))
        });
        let mut rank_of = vec![0u32; n];
        for (rank, &e) in order.iter().enumerate() {
            rank_of[e as usize] = rank as u32;
        }
        let lcp: Vec<u64> = (1..n)
            .map(|i| {
                entry_lcp(
                    g,
                    fps,
                    &entries[order[i - 1] as usize],
                    &entries[order[i] as usize],
                )
            })
            .collect();

        let (nodes, leaf_node) = build_interval_tree(
            &lcp,
            &order
                .iter()
                .map(|&e| entries[e as usize].len)
                .collect::<Vec<_>>(),
        );
        let (nodes, hp_count) = assign_heavy_paths(nodes);

        let mut by_interval: HashMap<(u32, u32), u32> = HashMap::new();
        for (i, nd) in nodes.iter().enumerate() {
            let key = (nd.lo, nd.hi);
            match by_interval.get(&key) {
                Some(&j) if nodes[j as usize].depth >= nd.depth => {}
                _ => {
                    by_interval.insert(key, i as u32);
                }
            }
        }

        let mut chains = Vec::with_capacity(n);
        for &leaf in leaf_node.iter().take(n) {
            let mut chain = Vec::new();
            let mut cur = leaf;
            chain.push((nodes[cur as usize].hp, nodes[cur as usize].depth));
            while nodes[cur as usize].parent != NO_NODE {
                let p = nodes[cur as usize].parent;
                if nodes[p as usize].hp != nodes[cur as usize].hp {
                    chain.push((nodes[p as usize].hp, nodes[p as usize].depth));
                }
                cur = p;
            }
            chains.push(chain);
        }

        CompactTrie { entries, order, rank_of, nodes, by_interval, leaf_node, chains, hp_count }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    #[inline]
    pub fn rank_of_entry(&self, entry_idx: u32) -> u32 {
        self.rank_of[entry_idx as usize]
    }

    #[inline]
    pub fn entry_at_rank(&self, rank: u32) -> &TrieEntry {
        &self.entries[self.order[rank as usize] as usize]
    }

    #[inline]
    pub fn node(&self, id: u32) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn hp_count(&self) -> u32 {
        self.hp_count
    }

    /// Heavy-path id of a node (the root's path is id 0).
    #[inline]
    pub fn hp_of(&self, node: u32) -> u32 {
        self.nodes[node as usize].hp
    }

    /// |λ(node)|.
    #[inline]
    pub fn depth(&self, node: u32) -> u64 {
        self.nodes[node as usize].depth
    }

    /// Deepest node containing the sorted position `rank`.
    pub fn terminal_node(&self, rank: u32) -> u32 {
        self.leaf_node[rank as usize]
    }

    /// Heavy path and lowest-containing depth per heavy path on the root
    /// path of an entry, deepest first.
    pub fn chain(&self, entry_idx: u32) -> &[(u32, u64)] {
        &self.chains[self.rank_of[entry_idx as usize] as usize]
    }

    /// λ(node) materialized from a witness entry.
    pub fn label_bytes(&self, g: &Grammar, node: u32) -> Vec<u8> {
        let nd = self.node(node);
        self.entry_at_rank(nd.lo).prefix_bytes(g, nd.depth)
    }

    /// Locus of each `pattern[off..]`; the empty suffix maps to the root.
    pub fn batch_locus(
        &self,
        g: &Grammar,
        fps: &GrammarFps,
        pattern: &[u8],
        pfps: &PatternFps,
        offsets: &[usize],
    ) -> Vec<Locus> {
        offsets.iter().map(|&off| self.locus(g, fps, pattern, pfps, off)).collect()
    }

    fn locus(
        &self,
        g: &Grammar,
        fps: &GrammarFps,
        pattern: &[u8],
        pfps: &PatternFps,
        off: usize,
    ) -> Locus {
        let q = &pattern[off..];
        let qlen = q.len() as u64;
        if q.is_empty() {
            let root = self.root();
            return Locus {
                lo: 0,
                hi: self.len() as u32,
                found: true,
                node: root,
                depth: self.nodes[root as usize].depth,
            };
        }
        let n = self.len();
        let lo = partition_by(n, |rank| {
            self.cmp_rank_vs_pattern(g, fps, rank as u32, pattern, pfps, off) == PatOrd::Before
        });
        let hi = partition_by(n, |rank| {
            self.cmp_rank_vs_pattern(g, fps, rank as u32, pattern, pfps, off) != PatOrd::After
        });
        if lo >= hi {
            return Locus::not_found(lo as u32);
        }
        let (node, depth) = self.resolve_node(lo as u32, hi as u32, qlen);
        Locus { lo: lo as u32, hi: hi as u32, found: true, node, depth }
    }

    fn root(&self) -> u32 {
        0
    }

    fn resolve_node(&self, lo: u32, hi: u32, min_depth: u64) -> (u32, u64) {
        let id = *self
            .by_interval
            .get(&(lo, hi))
            .expect("locus interval corresponds to a trie node");
        let nd = &self.nodes[id as usize];
        // The root may share the interval with the deepest stored node; the
        // locus is the shallowest node at depth >= |Q|.
        if min_depth == 0 && nd.lo == 0 && nd.hi == self.len() as u32 {
            return (self.root(), self.nodes[0].depth);
        }
        debug_assert!(nd.depth >= min_depth);
        (id, nd.depth)
    }

    fn cmp_rank_vs_pattern(
        &self,
        g: &Grammar,
        fps: &GrammarFps,
        rank: u32,
        pattern: &[u8],
        pfps: &PatternFps,
        off: usize,
    ) -> PatOrd {
        let e = self.entry_at_rank(rank);
        let q = &pattern[off..];
        let qlen = q.len() as u64;
        let bound = e.len.min(qlen);
        // Cache fast path.
        let cached = (e.cache_len as u64).min(bound) as usize;
        let mut k = 0u64;
        while (k as usize) < cached {
            let (a, b) = (e.cache[k as usize], q[k as usize]);
            if a != b {
                return if a < b { PatOrd::Before } else { PatOrd::After };
            }
            k += 1;
        }
        if k < bound {
            // Fingerprint lcp over [k, bound].
            let mut lo = k;
            let mut hi = bound;
            while lo < hi {
                let mid = (lo + hi).div_ceil(2);
                let ef = e.prefix_fp(g, fps, mid);
                let qf = pfps.range(off, off + mid as usize);
                if ef == qf {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            k = lo;
            if k < bound {
                let (a, b) = (e.char_at(g, k), q[k as usize]);
                return if a < b { PatOrd::Before } else { PatOrd::After };
            }
        }
        // One string is a prefix of the other.
        if k == qlen {
            PatOrd::HasPrefix
        } else {
            // Entry is a proper prefix of the query: sorts before it.
            PatOrd::Before
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PatOrd {
    /// Entry sorts strictly before the query.
    Before,
    /// Entry has the query as a prefix.
    HasPrefix,
    /// Entry sorts strictly after the query (first mismatch above).
    After,
}

fn partition_by<F: Fn(usize) -> bool>(n: usize, pred: F) -> usize {
    let mut lo = 0;
    let mut hi = n;
    while lo < hi {
        let mid = (lo + hi) / 2;
        if pred(mid) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Exact lcp of two entries; fingerprint binary search after the byte caches.
pub fn entry_lcp(g: &Grammar, fps: &GrammarFps, a: &TrieEntry, b: &TrieEntry) -> u64 {
    let bound = a.len.min(b.len);
    let cached = (a.cache_len.min(b.cache_len) as u64).min(bound);
    let mut k = 0u64;
    while k < cached {
        if a.cache[k as usize] != b.cache[k as usize] {
            return k;
        }
        k += 1;
    }
    if k == bound {
        return k;
    }
    let mut lo = k;
    let mut hi = bound;
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if a.prefix_fp(g, fps, mid) == b.prefix_fp(g, fps, mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    lo
}

pub fn cmp_entries(
    g: &Grammar,
    fps: &GrammarFps,
    a: &TrieEntry,
    b: &TrieEntry,
) -> std::cmp::Ordering {
    use std::cmp::Ordering;
    let k = entry_lcp(g, fps, a, b);
    if k == a.len && k == b.len {
        return Ordering::Equal;
    }
    if k == a.len {
        return Ordering::Less;
    }
    if k == b.len {
        return Ordering::Greater;
    }
    a.char_at(g, k).cmp(&b.char_at(g, k))
}

/// Builds the lcp-interval tree over sorted positions. `lcp[i]` is the lcp of
/// positions i and i+1; `lens[i]` the full length of position i's string.
fn build_interval_tree(lcp: &[u64], lens: &[u64]) -> (Vec<Node>, Vec<u32>) {
    let n = lens.len();
    let mut nodes = vec![Node { lo: 0, hi: n as u32, depth: 0, parent: NO_NODE, hp: 0 }];
    if n == 0 {
        return (nodes, Vec::new());
    }
    let mut leaf_node = vec![NO_NODE; n];
    let mut stack: Vec<u32> = vec![0];
    for i in 0..n {
        if i > 0 {
            let l = lcp[i - 1];
            let mut last: Option<u32> = None;
            while nodes[*stack.last().unwrap() as usize].depth > l {
                let x = stack.pop().unwrap();
                nodes[x as usize].hi = i as u32;
                if let Some(prev) = last {
                    nodes[prev as usize].parent = x;
                }
                last = Some(x);
            }
            let top = *stack.last().unwrap();
            if nodes[top as usize].depth == l {
                if let Some(prev) = last {
                    nodes[prev as usize].parent = top;
                }
            } else {
                let lo = nodes[last.expect("popped at least the previous leaf") as usize].lo;
                let fresh = nodes.len() as u32;
                nodes.push(Node { lo, hi: 0, depth: l, parent: NO_NODE, hp: 0 });
                nodes[last.unwrap() as usize].parent = fresh;
                stack.push(fresh);
            }
        }
        // Terminal node for position i: merge into the top when the whole
        // string already ends there (duplicate or prefix entries).
        let top = *stack.last().unwrap();
        if nodes[top as usize].depth == lens[i] {
            leaf_node[i] = top;
        } else {
            debug_assert!(nodes[top as usize].depth < lens[i]);
            let fresh = nodes.len() as u32;
            nodes.push(Node {
                lo: i as u32,
                hi: 0,
                depth: lens[i],
                parent: NO_NODE,
                hp: 0,
            });
            leaf_node[i] = fresh;
            stack.push(fresh);
        }
    }
    let mut last: Option<u32> = None;
    while let Some(x) = stack.pop() {
        nodes[x as usize].hi = n as u32;
        if let Some(prev) = last {
            nodes[prev as usize].parent = x;
        }
        last = Some(x);
    }
    (nodes, leaf_node)
}

/// Heavy child: most entries below, ties to the smaller interval start.
fn assign_heavy_paths(mut nodes: Vec<Node>) -> (Vec<Node>, u32) {
    let n = nodes.len();
    let mut children: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (i, nd) in nodes.iter().enumerate() {
        if nd.parent != NO_NODE {
            children[nd.parent as usize].push(i as u32);
        }
    }
    let mut heavy = vec![NO_NODE; n];
    for (i, kids) in children.iter().enumerate() {
        let mut best: Option<(u32, u32)> = None; // (width, lo) of best child
        for &c in kids {
            let w = nodes[c as usize].hi - nodes[c as usize].lo;
            let lo = nodes[c as usize].lo;
            let better = match best {
                None => true,
                Some((bw, blo)) => w > bw || (w == bw && lo < blo),
            };
            if better {
                best = Some((w, lo));
                heavy[i] = c;
            }
        }
    }
    // Walk paths: a node starts a new heavy path unless it is its parent's
    // heavy child.
    let mut hp_count = 0u32;
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.sort_by_key(|&i| nodes[i as usize].depth); // parents before children
    for &i in &order {
        let nd = nodes[i as usize];
        if nd.parent == NO_NODE {
            nodes[i as usize].hp = hp_count;
            hp_count += 1;
        } else if heavy[nd.parent as usize] == i {
            nodes[i as usize].hp = nodes[nd.parent as usize].hp;
        } else {
            nodes[i as usize].hp = hp_count;
            hp_count += 1;
        }
    }
    (nodes, hp_count)
}
