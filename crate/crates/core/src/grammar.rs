//! Straight-line programs and their run-length extension.
//!
//! A grammar is a dense table of productions, one per non-terminal. Terminals
//! are bytes and appear only on the right-hand side of `Leaf` productions.
//! After validation the grammar carries expansion lengths, a topological
//! order, parse-tree heights and per-symbol byte sets, and is immutable.

use std::fmt;

use crate::error::GrammarError;

/// Default ceiling for full expansion; `expand` exists for tests and oracles.
pub const DEFAULT_EXPAND_CAP: u64 = 1 << 26;

/// Expansion lengths must stay below 2^63 so signed position arithmetic
/// never overflows.
pub const MAX_TEXT_LEN: u64 = (1 << 63) - 1;

/// Identifier of a non-terminal. Ids are dense from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolId(pub u32);

impl SymbolId {
    #[inline]
    pub fn ix(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SymbolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Right-hand side of a production.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Production {
    Leaf(u8),
    Pair(SymbolId, SymbolId),
    /// `Power(base, k)` expands to k copies of the base, k >= 2. RLSLP only.
    Power(SymbolId, u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrammarKind {
    Slp,
    Rlslp,
}

/// First symbol of a production's expansion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Head {
    Sym(SymbolId),
    Term(u8),
}

/// Remainder of a production's expansion after the head.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tail {
    Sym(SymbolId),
    /// `k-1` further copies of the base of a power rule.
    Copies(SymbolId, u64),
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Affix {
    Prefix,
    Suffix,
}

#[derive(Debug, Clone)]
pub struct Grammar {
    kind: GrammarKind,
    start: SymbolId,
    prods: Vec<Production>,
    exp_len: Vec<u64>,
    /// Children-before-parents order.
    topo: Vec<SymbolId>,
    height: Vec<u32>,
    /// 256-bit byte-presence set per symbol.
    charset: Vec<[u64; 4]>,
}

impl Grammar {
    /// Validates a production table and computes the derived per-symbol data.
    ///
    /// Rejects cyclic grammars, dangling symbol references, power exponents
    /// below 2 (or any power rule in an SLP) and expansions of length >= 2^63.
    pub fn validate_and_index(
        prods: Vec<Production>,
        start: SymbolId,
        kind: GrammarKind,
    ) -> Result<Grammar, GrammarError> {
        let n = prods.len();
        if start.ix() >= n {
            return Err(GrammarError::MissingProduction(start.0));
        }
        for p in &prods {
            let check = |s: SymbolId| {
                if s.ix() >= n {
                    Err(GrammarError::MissingProduction(s.0))
                } else {
                    Ok(())
                }
            };
            match *p {
                Production::Leaf(_) => {}
                Production::Pair(b, c) => {
                    check(b)?;
                    check(c)?;
                }
                Production::Power(b, k) => {
                    check(b)?;
                    if k < 2 {
                        return Err(GrammarError::BadExponent { symbol: 0, exponent: k });
                    }
                    if kind == GrammarKind::Slp {
                        return Err(GrammarError::PowerInSlp);
                    }
                }
            }
        }

        // Iterative DFS: detects cycles and yields a children-first order.
        let mut state = vec![0u8; n]; // 0 unseen, 1 on stack, 2 done
        let mut topo = Vec::with_capacity(n);
        let mut stack: Vec<(u32, u8)> = Vec::new();
        for root in 0..n as u32 {
            if state[root as usize] != 0 {
                continue;
            }
            stack.push((root, 0));
            while let Some(&mut (sym, ref mut phase)) = stack.last_mut() {
                let s = sym as usize;
                if *phase == 0 {
                    if state[s] == 1 {
                        return Err(GrammarError::CyclicGrammar(sym));
                    }
                    if state[s] == 2 {
                        stack.pop();
                        continue;
                    }
                    state[s] = 1;
                    *phase = 1;
                    match prods[s] {
                        Production::Leaf(_) => {}
                        Production::Pair(b, c) => {
                            if state[c.ix()] == 1 {
                                return Err(GrammarError::CyclicGrammar(c.0));
                            }
                            if state[b.ix()] == 1 {
                                return Err(GrammarError::CyclicGrammar(b.0));
                            }
                            stack.push((c.0, 0));
                            stack.push((b.0, 0));
                        }
                        Production::Power(b, _) => {
                            if state[b.ix()] == 1 {
                                return Err(GrammarError::CyclicGrammar(b.0));
                            }
                            stack.push((b.0, 0));
                        }
                    }
                } else {
                    state[s] = 2;
                    topo.push(SymbolId(sym));
                    stack.pop();
                }
            }
        }

        let mut exp_len = vec![0u64; n];
        let mut height = vec![0u32; n];
        let mut charset = vec![[0u64; 4]; n];
        for &sym in &topo {
            let s = sym.ix();
            match prods[s] {
                Production::Leaf(ch) => {
                    exp_len[s] = 1;
                    height[s] = 1;
                    charset[s][(ch >> 6) as usize] |= 1u64 << (ch & 63);
                }
                Production::Pair(b, c) => {
                    exp_len[s] = exp_len[b.ix()]
                        .checked_add(exp_len[c.ix()])
                        .filter(|&l| l < MAX_TEXT_LEN)
                        .ok_or(GrammarError::ExpansionOverflow(sym.0))?;
                    height[s] = 1 + height[b.ix()].max(height[c.ix()]);
                    let (cb, cc) = (charset[b.ix()], charset[c.ix()]);
                    charset[s] = [cb[0] | cc[0], cb[1] | cc[1], cb[2] | cc[2], cb[3] | cc[3]];
                }
                Production::Power(b, k) => {
                    exp_len[s] = exp_len[b.ix()]
                        .checked_mul(k)
                        .filter(|&l| l < MAX_TEXT_LEN)
                        .ok_or(GrammarError::ExpansionOverflow(sym.0))?;
                    height[s] = 1 + height[b.ix()];
                    charset[s] = charset[b.ix()];
                }
            }
        }

        Ok(Grammar { kind, start, prods, exp_len, topo, height, charset })
    }

    #[inline]
    pub fn kind(&self) -> GrammarKind {
        self.kind
    }

    #[inline]
    pub fn start(&self) -> SymbolId {
        self.start
    }

    /// Number of productions.
    #[inline]
    pub fn len(&self) -> usize {
        self.prods.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.prods.is_empty()
    }

    #[inline]
    pub fn production(&self, s: SymbolId) -> Production {
        self.prods[s.ix()]
    }

    #[inline]
    pub fn exp_len(&self, s: SymbolId) -> u64 {
        self.exp_len[s.ix()]
    }

    /// Length of the represented text.
    #[inline]
    pub fn text_len(&self) -> u64 {
        self.exp_len(self.start)
    }

    #[inline]
    pub fn topo(&self) -> &[SymbolId] {
        &self.topo
    }

    /// Parse-tree height below (and including) the node labeled by `s`.
    #[inline]
    pub fn height(&self, s: SymbolId) -> u32 {
        self.height[s.ix()]
    }

    pub fn parse_height(&self) -> u32 {
        self.height(self.start)
    }

    pub fn head(&self, s: SymbolId) -> Head {
        match self.production(s) {
            Production::Leaf(ch) => Head::Term(ch),
            Production::Pair(b, _) => Head::Sym(b),
            Production::Power(b, _) => Head::Sym(b),
        }
    }

    pub fn tail(&self, s: SymbolId) -> Tail {
        match self.production(s) {
            Production::Leaf(_) => Tail::Empty,
            Production::Pair(_, c) => Tail::Sym(c),
            Production::Power(b, k) => Tail::Copies(b, k - 1),
        }
    }

    /// Expansion length of the head of `s`.
    pub fn head_len(&self, s: SymbolId) -> u64 {
        match self.production(s) {
            Production::Leaf(_) => 1,
            Production::Pair(b, _) => self.exp_len(b),
            Production::Power(b, _) => self.exp_len(b),
        }
    }

    /// True iff byte `ch` occurs in the expansion of `s`.
    #[inline]
    pub fn contains_byte(&self, s: SymbolId, ch: u8) -> bool {
        self.charset[s.ix()][(ch >> 6) as usize] & (1u64 << (ch & 63)) != 0
    }

    /// Full expansion of `s`, fenced by `cap`.
    pub fn expand_with_cap(&self, s: SymbolId, cap: u64) -> Result<Vec<u8>, GrammarError> {
        let total = self.exp_len(s);
        if total > cap {
            return Err(GrammarError::ExpansionTooLarge { len: total, cap });
        }
        let mut out = Vec::with_capacity(total as usize);
        expand_into(self, s, &mut out)?;
        debug_assert_eq!(out.len() as u64, total);
        Ok(out)
    }

    /// Full expansion of `s`, fenced by the default cap (overridable through
    /// the `COOC_EXPAND_CAP` environment variable).
    pub fn expand(&self, s: SymbolId) -> Result<Vec<u8>, GrammarError> {
        self.expand_with_cap(s, expand_cap_from_env())
    }

    /// Character at text position `i` of the expansion of `s`.
    pub fn random_access(&self, mut s: SymbolId, mut i: u64) -> Result<u8, GrammarError> {
        if i >= self.exp_len(s) {
            return Err(GrammarError::OutOfBounds { pos: i, len: self.exp_len(s) });
        }
        loop {
            match self.production(s) {
                Production::Leaf(ch) => return Ok(ch),
                Production::Pair(b, c) => {
                    let lb = self.exp_len(b);
                    if i < lb {
                        s = b;
                    } else {
                        s = c;
                        i -= lb;
                    }
                }
                Production::Power(b, _) => {
                    let lb = self.exp_len(b);
                    s = b;
                    i %= lb;
                }
            }
        }
    }

    /// Length-`l` prefix or suffix of the expansion of `s`, touching only the
    /// boundary path of the parse tree (O(l) symbols, not O(|expansion|)).
    pub fn extract_affix(
        &self,
        s: SymbolId,
        side: Affix,
        l: u64,
    ) -> Result<Vec<u8>, GrammarError> {
        if l > self.exp_len(s) {
            return Err(GrammarError::OutOfBounds { pos: l, len: self.exp_len(s) });
        }
        let mut out = Vec::with_capacity(l as usize);
        match side {
            Affix::Prefix => self.extract_prefix_into(s, l, &mut out)?,
            Affix::Suffix => self.extract_suffix_into(s, l, &mut out)?,
        }
        debug_assert_eq!(out.len() as u64, l);
        Ok(out)
    }

    fn extract_prefix_into(
        &self,
        s: SymbolId,
        l: u64,
        out: &mut Vec<u8>,
    ) -> Result<(), GrammarError> {
        let mut todo = vec![(s, l)];
        while let Some((sym, want)) = todo.pop() {
            if want == 0 {
                continue;
            }
            if want == self.exp_len(sym) {
                expand_into(self, sym, out)?;
                continue;
            }
            match self.production(sym) {
                Production::Leaf(ch) => out.push(ch),
                Production::Pair(b, c) => {
                    let lb = self.exp_len(b);
                    if want <= lb {
                        todo.push((b, want));
                    } else {
                        todo.push((c, want - lb));
                        todo.push((b, lb));
                    }
                }
                Production::Power(b, _) => {
                    let lb = self.exp_len(b);
                    let full = want / lb;
                    let rest = want - full * lb;
                    let at = out.len();
                    if full > 0 {
                        expand_into(self, b, out)?;
                        let copy = out[at..].to_vec();
                        for _ in 1..full {
                            out.extend_from_slice(&copy);
                        }
                    }
                    if rest > 0 {
                        todo.push((b, rest));
                    }
                }
            }
        }
        Ok(())
    }

    fn extract_suffix_into(
        &self,
        s: SymbolId,
        l: u64,
        out: &mut Vec<u8>,
    ) -> Result<(), GrammarError> {
        // A suffix decomposes as one partial segment followed by full
        // expansions collected on the way down. Walk down iteratively, then
        // emit the pending full segments in reverse discovery order.
        enum Pending {
            Full(SymbolId),
            Copies(SymbolId, u64),
        }
        let mut pending: Vec<Pending> = Vec::new();
        let mut cur = s;
        let mut want = l;
        loop {
            if want == 0 {
                break;
            }
            if want == self.exp_len(cur) {
                pending.push(Pending::Full(cur));
                break;
            }
            match self.production(cur) {
                Production::Leaf(ch) => {
                    out.push(ch);
                    break;
                }
                Production::Pair(b, c) => {
                    let lc = self.exp_len(c);
                    if want <= lc {
                        cur = c;
                    } else {
                        pending.push(Pending::Full(c));
                        want -= lc;
                        cur = b;
                    }
                }
                Production::Power(b, _) => {
                    let lb = self.exp_len(b);
                    let full = want / lb;
                    let rest = want - full * lb;
                    if full > 0 {
                        pending.push(Pending::Copies(b, full));
                    }
                    if rest == 0 {
                        break;
                    }
                    want = rest;
                    cur = b;
                }
            }
        }
        for item in pending.into_iter().rev() {
            match item {
                Pending::Full(sym) => expand_into(self, sym, out)?,
                Pending::Copies(sym, n) => {
                    let at = out.len();
                    expand_into(self, sym, out)?;
                    let copy = out[at..].to_vec();
                    for _ in 1..n {
                        out.extend_from_slice(&copy);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Expands `sym` fully into `out` (no cap; callers bound the total length).
///
/// Power rules expand their base once and replicate the produced bytes, so a
/// run `B^k` costs O(|⟨B⟩| + k·|⟨B⟩|) appends rather than k descents.
fn expand_into(g: &Grammar, sym: SymbolId, out: &mut Vec<u8>) -> Result<(), GrammarError> {
    let mut stack = vec![sym];
    while let Some(s) = stack.pop() {
        match g.production(s) {
            Production::Leaf(ch) => out.push(ch),
            Production::Pair(b, c) => {
                stack.push(c);
                stack.push(b);
            }
            Production::Power(b, k) => {
                let at = out.len();
                expand_into(g, b, out)?;
                let copy = out[at..].to_vec();
                for _ in 1..k {
                    out.extend_from_slice(&copy);
                }
            }
        }
    }
    Ok(())
}

pub fn expand_cap_from_env() -> u64 {
    match std::env::var("COOC_EXPAND_CAP") {
        Ok(v) => v.parse().unwrap_or(DEFAULT_EXPAND_CAP),
        Err(_) => DEFAULT_EXPAND_CAP,
    }
}
