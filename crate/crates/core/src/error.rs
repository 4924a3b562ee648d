use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GrammarError {
    #[error("grammar is cyclic at symbol {0}")]
    CyclicGrammar(u32),
    #[error("reference to undefined symbol {0}")]
    MissingProduction(u32),
    #[error("power rule for symbol {symbol} has exponent {exponent} < 2")]
    BadExponent { symbol: u32, exponent: u64 },
    #[error("power rule in a plain SLP")]
    PowerInSlp,
    #[error("expansion length of symbol {0} exceeds 2^63 - 1")]
    ExpansionOverflow(u32),
    #[error("expansion of length {len} exceeds the cap {cap}")]
    ExpansionTooLarge { len: u64, cap: u64 },
    #[error("position {pos} out of bounds (length {len})")]
    OutOfBounds { pos: u64, len: u64 },
    #[error("grammar file: {0}")]
    Parse(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompressError {
    #[error("input text is empty")]
    EmptyText,
    #[error("pattern is empty")]
    EmptyPattern,
    #[error("level compression made no progress after exhausting the seed budget")]
    SeedExhausted,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FingerprintError {
    #[error("operand of length {operand} does not fit in fingerprint of length {len}")]
    LengthMismatch { operand: u64, len: u64 },
    #[error("no collision-free fingerprint parameters found within the retry budget")]
    ParamSearchExhausted,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("pattern is empty")]
    EmptyPattern,
    #[error("distance bound is negative")]
    NegativeBound,
    #[error(transparent)]
    Grammar(#[from] GrammarError),
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("eager quadruple table would hold {quadruples} records, above the cap {cap}")]
    EagerTooLarge { quadruples: u64, cap: u64 },
    #[error("bad index file: {0}")]
    Format(String),
    #[error("index file section {0} failed its checksum")]
    Checksum(&'static str),
    #[error("unsupported index file version {0}")]
    Version(u32),
    #[error(transparent)]
    Grammar(#[from] GrammarError),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
