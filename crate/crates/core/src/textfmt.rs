//! Human-readable grammar files.
//!
//! ```text
//! SLPX <g> <startId>          # or RLSLP <g> <startId>
//! 0 = 'a'
//! 1 = 'b'
//! 2 = 0 1
//! 3 = 2 ^ 4
//! !scheme run                 # optional level scheme, RLSLP files only
//! !scheme pair 12345
//! ```
//!
//! Ids are decimal and dense from 0. `'#'` starts a comment. Bytes outside
//! printable ASCII are written as `'\xNN'`.

use std::fmt::Write as _;

use crate::compress::{Level, LevelScheme, PairColoring};
use crate::error::GrammarError;
use crate::grammar::{Grammar, GrammarKind, Production, SymbolId};

pub fn write_grammar(g: &Grammar, scheme: Option<&LevelScheme>) -> String {
    let mut out = String::new();
    let header = match g.kind() {
        GrammarKind::Slp => "SLPX",
        GrammarKind::Rlslp => "RLSLP",
    };
    let _ = writeln!(out, "{} {} {}", header, g.len(), g.start());
    for id in 0..g.len() as u32 {
        match g.production(SymbolId(id)) {
            Production::Leaf(ch) => {
                let _ = writeln!(out, "{} = '{}'", id, escape_byte(ch));
            }
            Production::Pair(b, c) => {
                let _ = writeln!(out, "{} = {} {}", id, b, c);
            }
            Production::Power(b, k) => {
                let _ = writeln!(out, "{} = {} ^ {}", id, b, k);
            }
        }
    }
    if let Some(scheme) = scheme {
        for level in &scheme.levels {
            match level {
                Level::Run => {
                    let _ = writeln!(out, "!scheme run");
                }
                Level::Pair(PairColoring::Seeded(seed)) => {
                    let _ = writeln!(out, "!scheme pair {}", seed);
                }
                Level::Pair(PairColoring::Forced(l, r)) => {
                    let _ = writeln!(out, "!scheme pairforced {} {}", l, r);
                }
            }
        }
    }
    out
}

fn escape_byte(ch: u8) -> String {
    match ch {
        b'\\' => "\\\\".to_string(),
        b'\'' => "\\'".to_string(),
        b'\n' => "\\n".to_string(),
        b'\t' => "\\t".to_string(),
        b'\r' => "\\r".to_string(),
        0x20..=0x7e => (ch as char).to_string(),
        _ => format!("\\x{:02x}", ch),
    }
}

fn parse_quoted_byte(s: &str) -> Result<u8, GrammarError> {
    let inner = s
        .strip_prefix('\'')
        .and_then(|t| t.strip_suffix('\''))
        .ok_or_else(|| GrammarError::Parse(format!("expected quoted byte, got `{s}`")))?;
    let bytes = inner.as_bytes();
    match bytes {
        [b] if *b != b'\\' => Ok(*b),
        [b'\\', b'\\'] => Ok(b'\\'),
        [b'\\', b'\''] => Ok(b'\''),
        [b'\\', b'n'] => Ok(b'\n'),
        [b'\\', b't'] => Ok(b'\t'),
        [b'\\', b'r'] => Ok(b'\r'),
        [b'\\', b'x', h1, h2] => {
            let hex = std::str::from_utf8(&[*h1, *h2])
                .ok()
                .and_then(|h| u8::from_str_radix(h, 16).ok());
            hex.ok_or_else(|| GrammarError::Parse(format!("bad escape `{inner}`")))
        }
        _ => Err(GrammarError::Parse(format!("bad byte literal `{s}`"))),
    }
}

pub fn parse_grammar(input: &str) -> Result<(Grammar, Option<LevelScheme>), GrammarError> {
    let mut lines = input.lines().map(strip_comment).filter(|l| !l.is_empty());
    let header = lines
        .next()
        .ok_or_else(|| GrammarError::Parse("empty file".into()))?;
    let mut hparts = header.split_whitespace();
    let kind = match hparts.next() {
        Some("SLPX") => GrammarKind::Slp,
        Some("RLSLP") => GrammarKind::Rlslp,
        other => {
            return Err(GrammarError::Parse(format!("unknown header {:?}", other)));
        }
    };
    let count: usize = parse_num(hparts.next(), "production count")?;
    let start: u32 = parse_num(hparts.next(), "start id")?;

    let mut prods: Vec<Option<Production>> = vec![None; count];
    let mut scheme: Vec<Level> = Vec::new();
    for line in lines {
        if let Some(rest) = line.strip_prefix("!scheme") {
            let mut parts = rest.split_whitespace();
            match parts.next() {
                Some("run") => scheme.push(Level::Run),
                Some("pair") => {
                    let seed: u64 = parse_num(parts.next(), "pair seed")?;
                    scheme.push(Level::Pair(PairColoring::Seeded(seed)));
                }
                Some("pairforced") => {
                    let l: u32 = parse_num(parts.next(), "forced left")?;
                    let r: u32 = parse_num(parts.next(), "forced right")?;
                    scheme.push(Level::Pair(PairColoring::Forced(SymbolId(l), SymbolId(r))));
                }
                other => {
                    return Err(GrammarError::Parse(format!("bad scheme line {:?}", other)));
                }
            }
            continue;
        }
        let (lhs, rhs) = line
            .split_once('=')
            .ok_or_else(|| GrammarError::Parse(format!("missing `=` in `{line}`")))?;
        let id: usize = parse_num(Some(lhs.trim()), "production id")?;
        if id >= count {
            return Err(GrammarError::Parse(format!("id {id} out of range (count {count})")));
        }
        if prods[id].is_some() {
            return Err(GrammarError::Parse(format!("duplicate production for {id}")));
        }
        let rhs = rhs.trim();
        let prod = if rhs.starts_with('\'') {
            Production::Leaf(parse_quoted_byte(rhs)?)
        } else {
            let parts: Vec<&str> = rhs.split_whitespace().collect();
            match parts.as_slice() {
                [b, c] => Production::Pair(
                    SymbolId(parse_num(Some(b), "pair left")?),
                    SymbolId(parse_num(Some(c), "pair right")?),
                ),
                [b, "^", k] => Production::Power(
                    SymbolId(parse_num(Some(b), "power base")?),
                    parse_num(Some(k), "power exponent")?,
                ),
                _ => {
                    return Err(GrammarError::Parse(format!("bad production `{line}`")));
                }
            }
        };
        prods[id] = Some(prod);
    }

    let prods: Vec<Production> = prods
        .into_iter()
        .enumerate()
        .map(|(id, p)| p.ok_or(GrammarError::MissingProduction(id as u32)))
        .collect::<Result<_, _>>()?;
    let g = Grammar::validate_and_index(prods, SymbolId(start), kind)?;
    let scheme = if scheme.is_empty() {
        None
    } else {
        Some(LevelScheme { levels: scheme })
    };
    Ok((g, scheme))
}

fn strip_comment(line: &str) -> &str {
    // A '#' inside a quoted byte literal does not start a comment.
    let bytes = line.as_bytes();
    let mut in_quote = false;
    for (i, &b) in bytes.iter().enumerate() {
        match b {
            b'\'' => in_quote = !in_quote,
            b'#' if !in_quote => return line[..i].trim(),
            _ => {}
        }
    }
    line.trim()
}

fn parse_num<T: std::str::FromStr>(s: Option<&str>, what: &str) -> Result<T, GrammarError> {
    s.and_then(|t| t.trim().parse().ok())
        .ok_or_else(|| GrammarError::Parse(format!("missing or invalid {what}")))
}
