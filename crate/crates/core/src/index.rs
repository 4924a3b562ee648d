//! The full index bundle and its on-disk format.
//!
//! Layout: magic, version, then tagged sections each carrying a length and
//! an FNV-1a checksum. Trie entry tables store (base, copies, reversed)
//! triples only; denoted strings are never materialized. Point stores and
//! ancestor bitsets are serialized; trie node structures are rebuilt
//! deterministically on load. Memoized quadruple records are an optional
//! trailing section.

use std::collections::HashMap;
use std::io::{self, Read, Write};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::SeedableRng;

use crate::coindex::{CoIndex, KTriple, QuadrupleRecord};
use crate::compress::{self, Level, LevelScheme, PairColoring};
use crate::error::{IndexError, QueryError};
use crate::fingerprint::{choose_params, FingerprintParams, GrammarFps, MERSENNE61};
use crate::grammar::{Grammar, GrammarKind, Production, SymbolId};
use crate::occindex::{AncestorBits, OccIndex, PatternHandle};
use crate::range::Staircase;
use crate::trie::{CompactTrie, EntryBase, TrieEntry};
use crate::CoOccurrence;

const MAGIC: &[u8; 8] = b"COOCIDX\x01";
const VERSION: u32 = 1;

/// Cap on the total materialized entry length for the exhaustive fingerprint
/// verification; larger sets fall back to adjacency spot checks.
const FULL_VERIFY_CAP: u64 = 1 << 20;

pub struct Index {
    pub grammar: Grammar,
    pub scheme: LevelScheme,
    pub fps: GrammarFps,
    pub occ: OccIndex,
    pub co: CoIndex,
}

impl Index {
    pub fn build_from_text(text: &[u8], seed: u64) -> Result<Index, IndexError> {
        let (g, scheme) = compress::to_rlslp_from_text(text, seed)
            .map_err(|e| IndexError::Format(e.to_string()))?;
        Index::build_from_rlslp(g, scheme, seed)
    }

    pub fn build_from_slp(slp: &Grammar, seed: u64) -> Result<Index, IndexError> {
        let (g, scheme) = compress::to_rlslp_seeded(slp, seed)
            .map_err(|e| IndexError::Format(e.to_string()))?;
        Index::build_from_rlslp(g, scheme, seed)
    }

    pub fn build_from_rlslp(
        g: Grammar,
        scheme: LevelScheme,
        seed: u64,
    ) -> Result<Index, IndexError> {
        let mut rng = StdRng::seed_from_u64(seed ^ 0x5eed_f00d);
        let params = choose_params(MERSENNE61, &mut rng, 64, |p| {
            verify_fingerprint_params(&g, p)
        })?;
        let fps = GrammarFps::new(&g, params);
        let occ = OccIndex::build(&g, &fps);
        let co = CoIndex::build(&g, &fps);
        Ok(Index { grammar: g, scheme, fps, occ, co })
    }

    /// Pattern handle with loci against both trie families.
    pub fn preprocess(&self, p: &[u8]) -> Result<PatternHandle, QueryError> {
        let mut h = self.occ.preprocess_pattern(&self.grammar, &self.fps, p)?;
        self.co.attach_anchor_loci(&self.grammar, &self.fps, &mut h);
        Ok(h)
    }

    pub fn query_close(
        &self,
        p1: &[u8],
        p2: &[u8],
        b: i64,
    ) -> Result<Vec<CoOccurrence>, QueryError> {
        self.co
            .query_close(&self.grammar, &self.fps, &self.occ, p1, p2, b)
    }

    pub fn report_all(&self, p1: &[u8], p2: &[u8]) -> Result<Vec<CoOccurrence>, QueryError> {
        let h1 = self.occ.preprocess_pattern(&self.grammar, &self.fps, p1)?;
        let h2 = self.occ.preprocess_pattern(&self.grammar, &self.fps, p2)?;
        Ok(self.occ.report_co_occurrences(&self.grammar, &h1, &h2))
    }
}

/// No two distinct equal-length prefixes of the indexed strings may share a
/// fingerprint. Small sets are verified exhaustively by grouping every
/// distinct entry prefix by (length, phi); large ones by adjacency checks on
/// the sorted entries.
pub fn verify_fingerprint_params(g: &Grammar, params: &FingerprintParams) -> bool {
    let specs = indexed_entry_specs(g);
    let total: u64 = specs.iter().map(|s| s.2).sum();
    if total <= FULL_VERIFY_CAP {
        let mut strings: Vec<Vec<u8>> = specs
            .iter()
            .map(|&(base, copies, _len, reversed)| {
                let e = TrieEntry::new(g, base, copies, reversed);
                e.prefix_bytes(g, e.len)
            })
            .collect();
        strings.sort();
        strings.dedup();
        let mut seen: HashMap<(u64, u64), (usize, u64)> = HashMap::new();
        for (i, s) in strings.iter().enumerate() {
            let lcp = if i == 0 {
                0
            } else {
                common_prefix(&strings[i - 1], s)
            };
            // Prefixes up to the lcp were recorded for the previous string.
            let mut f = params.of_bytes(&s[..lcp]);
            for l in lcp + 1..=s.len() {
                f = params.combine(f, params.of_byte(s[l - 1]));
                if seen.insert((l as u64, f.phi), (i, l as u64)).is_some() {
                    return false; // distinct strings, same (length, phi)
                }
            }
        }
        true
    } else {
        // Adjacency spot check through the fingerprint lcp machinery.
        let fps = GrammarFps::new(g, *params);
        let entries: Vec<TrieEntry> = specs
            .iter()
            .map(|&(base, copies, _len, reversed)| TrieEntry::new(g, base, copies, reversed))
            .collect();
        let mut order: Vec<u32> = (0..entries.len() as u32).collect();
        order.sort_by(|&a, &b| {
            crate::trie::cmp_entries(g, &fps, &entries[a as usize], &entries[b as usize])
        });
        for w in order.windows(2) {
            let (a, b) = (&entries[w[0] as usize], &entries[w[1] as usize]);
            let l = crate::trie::entry_lcp(g, &fps, a, b);
            if l < a.len && l < b.len && a.char_at(g, l) == b.char_at(g, l) {
                return false; // lcp overshot: a collision mid-string
            }
        }
        true
    }
}

fn common_prefix(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

/// (base, copies, length, reversed) of every string the tries index.
fn indexed_entry_specs(g: &Grammar) -> Vec<(EntryBase, u64, u64, bool)> {
    let mut out = Vec::new();
    let mut push = |base: EntryBase, copies: u64, reversed: bool| {
        let unit = match base {
            EntryBase::Sym(s) => g.exp_len(s),
            EntryBase::Byte(_) => 1,
        };
        out.push((base, copies, unit * copies, reversed));
    };
    for s in 0..g.len() as u32 {
        let sym = SymbolId(s);
        match g.production(sym) {
            Production::Leaf(ch) => push(EntryBase::Byte(ch), 1, true),
            Production::Pair(b, c) => {
                push(EntryBase::Sym(b), 1, true);
                push(EntryBase::Sym(c), 1, false);
                // Anchor sides coincide with the occurrence sides for pairs.
            }
            Production::Power(b, k) => {
                push(EntryBase::Sym(b), 1, true);
                push(EntryBase::Sym(b), k - 1, false);
                for copies in [1, 2, k - 2, k - 1] {
                    if copies >= 1 && copies <= k {
                        push(EntryBase::Sym(b), copies, false);
                        push(EntryBase::Sym(b), copies, true);
                    }
                }
            }
        }
    }
    out
}

// ---- binary format helpers ----

fn fnv1a(data: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in data {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

struct Section {
    tag: [u8; 4],
    payload: Vec<u8>,
}

fn put_u32(v: &mut Vec<u8>, x: u32) {
    v.extend_from_slice(&x.to_le_bytes());
}

fn put_u64(v: &mut Vec<u8>, x: u64) {
    v.extend_from_slice(&x.to_le_bytes());
}

fn put_i64(v: &mut Vec<u8>, x: i64) {
    v.extend_from_slice(&x.to_le_bytes());
}

struct Cursor<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Cursor<'a> {
        Cursor { data, at: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], IndexError> {
        if self.at + n > self.data.len() {
            return Err(IndexError::Format("truncated section".into()));
        }
        let s = &self.data[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, IndexError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, IndexError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, IndexError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64, IndexError> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.at == self.data.len()
    }
}

fn write_sections<W: Write>(mut w: W, sections: &[Section]) -> io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for s in sections {
        w.write_all(&s.tag)?;
        w.write_all(&(s.payload.len() as u64).to_le_bytes())?;
        w.write_all(&s.payload)?;
        w.write_all(&fnv1a(&s.payload).to_le_bytes())?;
    }
    Ok(())
}

fn read_sections<R: Read>(mut r: R) -> Result<Vec<Section>, IndexError> {
    let mut all = Vec::new();
    r.read_to_end(&mut all)?;
    if all.len() < 12 || &all[..8] != MAGIC {
        return Err(IndexError::Format("bad magic".into()));
    }
    let version = u32::from_le_bytes(all[8..12].try_into().unwrap());
    if version != VERSION {
        return Err(IndexError::Version(version));
    }
    let mut at = 12;
    let mut out = Vec::new();
    while at < all.len() {
        if at + 12 > all.len() {
            return Err(IndexError::Format("truncated section header".into()));
        }
        let tag: [u8; 4] = all[at..at + 4].try_into().unwrap();
        let len = u64::from_le_bytes(all[at + 4..at + 12].try_into().unwrap()) as usize;
        at += 12;
        if at + len + 8 > all.len() {
            return Err(IndexError::Format("truncated section payload".into()));
        }
        let payload = all[at..at + len].to_vec();
        at += len;
        let want = u64::from_le_bytes(all[at..at + 8].try_into().unwrap());
        at += 8;
        if fnv1a(&payload) != want {
            return Err(IndexError::Checksum(match &tag {
                b"GRMR" => "GRMR",
                b"SCHM" => "SCHM",
                b"FPRM" => "FPRM",
                b"OCCX" => "OCCX",
                b"COIX" => "COIX",
                b"QMEM" => "QMEM",
                _ => "unknown",
            }));
        }
        out.push(Section { tag, payload });
    }
    Ok(out)
}

fn grammar_payload(g: &Grammar) -> Vec<u8> {
    let mut v = Vec::new();
    v.push(match g.kind() {
        GrammarKind::Slp => 0u8,
        GrammarKind::Rlslp => 1,
    });
    put_u32(&mut v, g.start().0);
    put_u32(&mut v, g.len() as u32);
    for s in 0..g.len() as u32 {
        match g.production(SymbolId(s)) {
            Production::Leaf(ch) => {
                v.push(0);
                v.push(ch);
            }
            Production::Pair(b, c) => {
                v.push(1);
                put_u32(&mut v, b.0);
                put_u32(&mut v, c.0);
            }
            Production::Power(b, k) => {
                v.push(2);
                put_u32(&mut v, b.0);
                put_u64(&mut v, k);
            }
        }
    }
    v
}

fn parse_grammar_payload(data: &[u8]) -> Result<Grammar, IndexError> {
    let mut c = Cursor::new(data);
    let kind = match c.u8()? {
        0 => GrammarKind::Slp,
        1 => GrammarKind::Rlslp,
        k => return Err(IndexError::Format(format!("bad grammar kind {k}"))),
    };
    let start = SymbolId(c.u32()?);
    let n = c.u32()? as usize;
    let mut prods = Vec::with_capacity(n);
    for _ in 0..n {
        prods.push(match c.u8()? {
            0 => Production::Leaf(c.u8()?),
            1 => Production::Pair(SymbolId(c.u32()?), SymbolId(c.u32()?)),
            2 => Production::Power(SymbolId(c.u32()?), c.u64()?),
            t => return Err(IndexError::Format(format!("bad production tag {t}"))),
        });
    }
    Ok(Grammar::validate_and_index(prods, start, kind)?)
}

fn scheme_payload(scheme: &LevelScheme) -> Vec<u8> {
    let mut v = Vec::new();
    put_u32(&mut v, scheme.levels.len() as u32);
    for l in &scheme.levels {
        match l {
            Level::Run => v.push(0),
            Level::Pair(PairColoring::Seeded(s)) => {
                v.push(1);
                put_u64(&mut v, *s);
            }
            Level::Pair(PairColoring::Forced(l, r)) => {
                v.push(2);
                put_u32(&mut v, l.0);
                put_u32(&mut v, r.0);
            }
        }
    }
    v
}

fn parse_scheme_payload(data: &[u8]) -> Result<LevelScheme, IndexError> {
    let mut c = Cursor::new(data);
    let n = c.u32()?;
    let mut levels = Vec::with_capacity(n as usize);
    for _ in 0..n {
        levels.push(match c.u8()? {
            0 => Level::Run,
            1 => Level::Pair(PairColoring::Seeded(c.u64()?)),
            2 => Level::Pair(PairColoring::Forced(SymbolId(c.u32()?), SymbolId(c.u32()?))),
            t => return Err(IndexError::Format(format!("bad level tag {t}"))),
        });
    }
    Ok(LevelScheme { levels })
}

fn occx_payload(occ: &OccIndex) -> Vec<u8> {
    let mut v = Vec::new();
    // Trie entry tables.
    for trie in [&occ.t_pre, &occ.t_suf] {
        put_u32(&mut v, trie.len() as u32);
        for e in &trie.entries {
            match e.base {
                EntryBase::Byte(ch) => {
                    v.push(0);
                    v.push(ch);
                }
                EntryBase::Sym(s) => {
                    v.push(1);
                    put_u32(&mut v, s.0);
                }
            }
            put_u64(&mut v, e.copies);
            v.push(e.reversed as u8);
        }
    }
    put_u32(&mut v, occ.pre_entry_of.len() as u32);
    for &e in &occ.pre_entry_of {
        put_u32(&mut v, e);
    }
    for &e in &occ.suf_entry_of {
        match e {
            None => put_u32(&mut v, u32::MAX),
            Some(x) => put_u32(&mut v, x),
        }
    }
    // Ancestor bitsets.
    put_u64(&mut v, occ.anc.words() as u64);
    for &w in occ.anc.raw() {
        put_u64(&mut v, w);
    }
    // Point store: sorted frontier arrays.
    let mut keys: Vec<u64> = occ.point_store().keys().copied().collect();
    keys.sort_unstable();
    put_u64(&mut v, keys.len() as u64);
    for k in keys {
        put_u64(&mut v, k);
        let st = &occ.point_store()[&k];
        put_u32(&mut v, st.frontier().len() as u32);
        for &(x, y) in st.frontier() {
            put_u64(&mut v, x);
            put_u64(&mut v, y);
        }
    }
    put_u64(&mut v, occ.total_points());
    v
}

fn parse_entry(c: &mut Cursor, g: &Grammar) -> Result<TrieEntry, IndexError> {
    let base = match c.u8()? {
        0 => EntryBase::Byte(c.u8()?),
        1 => EntryBase::Sym(SymbolId(c.u32()?)),
        t => return Err(IndexError::Format(format!("bad entry tag {t}"))),
    };
    let copies = c.u64()?;
    let reversed = c.u8()? != 0;
    Ok(TrieEntry::new(g, base, copies, reversed))
}

fn parse_occx(data: &[u8], g: &Grammar, fps: &GrammarFps) -> Result<OccIndex, IndexError> {
    let mut c = Cursor::new(data);
    let mut tries = Vec::new();
    for _ in 0..2 {
        let n = c.u32()? as usize;
        let mut entries = Vec::with_capacity(n);
        for _ in 0..n {
            entries.push(parse_entry(&mut c, g)?);
        }
        tries.push(CompactTrie::build(g, fps, entries));
    }
    let t_suf = tries.pop().unwrap();
    let t_pre = tries.pop().unwrap();
    let n = c.u32()? as usize;
    let mut pre_entry_of = Vec::with_capacity(n);
    for _ in 0..n {
        pre_entry_of.push(c.u32()?);
    }
    let mut suf_entry_of = Vec::with_capacity(n);
    for _ in 0..n {
        let x = c.u32()?;
        suf_entry_of.push(if x == u32::MAX { None } else { Some(x) });
    }
    let words = c.u64()? as usize;
    let mut bits = Vec::with_capacity(words * n);
    for _ in 0..words * n {
        bits.push(c.u64()?);
    }
    let anc = AncestorBits::from_raw(words, bits);
    let keys = c.u64()?;
    let mut points = HashMap::new();
    for _ in 0..keys {
        let k = c.u64()?;
        let m = c.u32()? as usize;
        let mut pts = Vec::with_capacity(m);
        for _ in 0..m {
            let x = c.u64()?;
            let y = c.u64()?;
            pts.push((x, y));
        }
        points.insert(k, Staircase::build(pts));
    }
    let total = c.u64()?;
    if !c.done() {
        return Err(IndexError::Format("trailing bytes in OCCX".into()));
    }
    let hp_pre = t_pre.hp_count() as u64;
    let hp_suf = t_suf.hp_count() as u64;
    Ok(OccIndex::restore(
        t_pre,
        t_suf,
        pre_entry_of,
        suf_entry_of,
        anc,
        points,
        hp_pre,
        hp_suf,
        total,
    ))
}

fn coix_payload(co: &CoIndex) -> Vec<u8> {
    let mut v = Vec::new();
    for trie in [&co.t_pre, &co.t_suf] {
        put_u32(&mut v, trie.len() as u32);
        for e in &trie.entries {
            match e.base {
                EntryBase::Byte(ch) => {
                    v.push(0);
                    v.push(ch);
                }
                EntryBase::Sym(s) => {
                    v.push(1);
                    put_u32(&mut v, s.0);
                }
            }
            put_u64(&mut v, e.copies);
            v.push(e.reversed as u8);
        }
    }
    v
}

fn qmem_payload(co: &CoIndex) -> Vec<u8> {
    let mut v = Vec::new();
    let mut recs = co.memoized_records();
    recs.sort_by_key(|(k, _)| *k);
    put_u32(&mut v, recs.len() as u32);
    for ((u1, u2, v1, v2), r) in recs {
        for x in [u1, u2, v1, v2] {
            put_u32(&mut v, x);
        }
        put_u64(&mut v, r.l1);
        put_u64(&mut v, r.l2);
        put_u64(&mut v, r.s1_len);
        put_u64(&mut v, r.s2_len);
        put_u32(&mut v, r.t1.len() as u32);
        for &(d, s) in &r.t1 {
            put_i64(&mut v, d);
            put_u32(&mut v, s);
        }
        put_u32(&mut v, r.l_list.len() as u32);
        for &s in &r.l_list {
            put_u32(&mut v, s);
        }
        put_u32(&mut v, r.ktriples.len() as u32);
        for t in &r.ktriples {
            for o in [t.before, t.cover_l, t.cover_r] {
                match o {
                    None => put_u64(&mut v, u64::MAX),
                    Some(x) => put_u64(&mut v, x),
                }
            }
        }
        match r.pi1 {
            None => put_u64(&mut v, u64::MAX),
            Some(x) => put_u64(&mut v, x),
        }
        match r.ov {
            None => put_u64(&mut v, u64::MAX),
            Some(x) => put_u64(&mut v, x),
        }
        put_u32(&mut v, r.t2.len() as u32);
        for &(q, s) in &r.t2 {
            put_i64(&mut v, q);
            put_u32(&mut v, s);
        }
    }
    v
}

type QuadRecords = Vec<((u32, u32, u32, u32), QuadrupleRecord)>;
type QuadRecordsResult = Result<QuadRecords, IndexError>;

fn parse_qmem(data: &[u8]) -> QuadRecordsResult {
    let mut c = Cursor::new(data);
    let n = c.u32()?;
    let mut out = Vec::with_capacity(n as usize);
    let opt = |x: u64| if x == u64::MAX { None } else { Some(x) };
    for _ in 0..n {
        let key = (c.u32()?, c.u32()?, c.u32()?, c.u32()?);
        let l1 = c.u64()?;
        let l2 = c.u64()?;
        let s1_len = c.u64()?;
        let s2_len = c.u64()?;
        let t1n = c.u32()?;
        let mut t1 = Vec::with_capacity(t1n as usize);
        for _ in 0..t1n {
            let d = c.i64()?;
            let s = c.u32()?;
            t1.push((d, s));
        }
        let ln = c.u32()?;
        let mut l_list = Vec::with_capacity(ln as usize);
        for _ in 0..ln {
            l_list.push(c.u32()?);
        }
        let kn = c.u32()?;
        let mut ktriples = Vec::with_capacity(kn as usize);
        for _ in 0..kn {
            let before = opt(c.u64()?);
            let cover_l = opt(c.u64()?);
            let cover_r = opt(c.u64()?);
            ktriples.push(KTriple { before, cover_l, cover_r });
        }
        let pi1 = opt(c.u64()?);
        let ov = opt(c.u64()?);
        let t2n = c.u32()?;
        let mut t2 = Vec::with_capacity(t2n as usize);
        for _ in 0..t2n {
            let q = c.i64()?;
            let s = c.u32()?;
            t2.push((q, s));
        }
        out.push((key, QuadrupleRecord { l1, l2, s1_len, s2_len, t1, l_list, ktriples, pi1, ov, t2 }));
    }
    Ok(out)
}

impl Index {
    pub fn write_to<W: Write>(&self, w: W) -> io::Result<()> {
        let mut sections = vec![
            Section { tag: *b"GRMR", payload: grammar_payload(&self.grammar) },
            Section { tag: *b"SCHM", payload: scheme_payload(&self.scheme) },
            Section {
                tag: *b"FPRM",
                payload: {
                    let mut v = Vec::new();
                    put_u64(&mut v, self.fps.params.p);
                    put_u64(&mut v, self.fps.params.r);
                    v
                },
            },
            Section { tag: *b"OCCX", payload: occx_payload(&self.occ) },
            Section { tag: *b"COIX", payload: coix_payload(&self.co) },
        ];
        if self.co.memoized_len() > 0 {
            sections.push(Section { tag: *b"QMEM", payload: qmem_payload(&self.co) });
        }
        write_sections(w, &sections)
    }

    pub fn read_from<R: Read>(r: R) -> Result<Index, IndexError> {
        let sections = read_sections(r)?;
        let find = |tag: &[u8; 4]| -> Result<&Section, IndexError> {
            sections
                .iter()
                .find(|s| &s.tag == tag)
                .ok_or_else(|| IndexError::Format(format!("missing section {tag:?}")))
        };
        let grammar = parse_grammar_payload(&find(b"GRMR")?.payload)?;
        let scheme = parse_scheme_payload(&find(b"SCHM")?.payload)?;
        let fprm = &find(b"FPRM")?.payload;
        let mut c = Cursor::new(fprm);
        let p = c.u64()?;
        let r = c.u64()?;
        let params = FingerprintParams::new(p, r);
        let fps = GrammarFps::new(&grammar, params);
        let occ = parse_occx(&find(b"OCCX")?.payload, &grammar, &fps)?;
        // The co-index is reconstructed from its entry tables; this keeps the
        // derived structures (pruned tree, loci) consistent with the grammar.
        let coix = &find(b"COIX")?.payload;
        let co = {
            let rebuilt = CoIndex::build(&grammar, &fps);
            // Consistency check: serialized entry tables must match.
            let mut c = Cursor::new(coix);
            for trie in [&rebuilt.t_pre, &rebuilt.t_suf] {
                let n = c.u32()? as usize;
                if n != trie.len() {
                    return Err(IndexError::Format("anchor trie mismatch".into()));
                }
                for e in &trie.entries {
                    let got = parse_entry(&mut c, &grammar)?;
                    if got != *e {
                        return Err(IndexError::Format("anchor entry mismatch".into()));
                    }
                }
            }
            rebuilt
        };
        if let Some(q) = sections.iter().find(|s| &s.tag == b"QMEM") {
            for (key, rec) in parse_qmem(&q.payload)? {
                co.install_record(key, Arc::new(rec));
            }
        }
        Ok(Index { grammar, scheme, fps, occ, co })
    }
}
