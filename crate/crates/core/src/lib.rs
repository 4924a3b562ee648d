//! Index a grammar-compressed string for consecutive-occurrence queries.
//!
//! Given a text represented by a straight-line program, the index answers:
//! which pairs `(q1, q2)` are consecutive occurrences of two query patterns
//! `P1`, `P2` with `q2 - q1 <= b`, without decompressing the text at query
//! time. The building blocks (per-non-terminal occurrence queries, compact
//! tries over grammar affixes, Karp-Rabin fingerprints, range emptiness) are
//! exposed as standalone modules.

pub mod compress;
pub mod coindex;
pub mod error;
pub mod fingerprint;
pub mod grammar;
pub mod index;
pub mod occindex;
pub mod oracle;
pub mod range;
pub mod selftest;
pub mod textfmt;
pub mod trie;

pub use error::{CompressError, FingerprintError, GrammarError, IndexError, QueryError};
pub use grammar::{Affix, Grammar, GrammarKind, Production, SymbolId};

/// A pair `(q1, q2)`: an occurrence `q1` of the first pattern and `q2 >= q1`
/// of the second with no first-pattern occurrence in `(q1, q2]` and no
/// second-pattern occurrence in `[q1, q2)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CoOccurrence {
    pub q1: u64,
    pub q2: u64,
}

impl CoOccurrence {
    pub fn new(q1: u64, q2: u64) -> Self {
        CoOccurrence { q1, q2 }
    }
}
