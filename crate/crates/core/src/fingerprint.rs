//! Karp-Rabin fingerprints of affixes of non-terminal expansions.
//!
//! A fingerprint of a string `X` is `(r^{|X|-1}, r^{-(|X|-1)}, phi(X), |X|)`
//! with `phi(X) = sum X[k] * r^k mod p`. Fingerprints of `X`, `Y` and `XY`
//! are mutually derivable in constant time, which is what makes affix
//! fingerprints of run-length rules cheap (doubling).
//!
//! The modulus defaults to the Mersenne prime `2^61 - 1`; `r` is drawn at
//! random and re-drawn until the indexed string set verifies collision-free.

use rand::Rng;

use crate::error::FingerprintError;
use crate::grammar::{Grammar, Production, SymbolId};

pub const MERSENNE61: u64 = (1 << 61) - 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FingerprintParams {
    pub p: u64,
    pub r: u64,
    rinv: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Fingerprint {
    /// `r^{len-1} mod p` (1 when the string is empty).
    pub pow: u64,
    /// `r^{-(len-1)} mod p` (1 when the string is empty).
    pub ipow: u64,
    pub phi: u64,
    pub len: u64,
}

impl FingerprintParams {
    pub fn new(p: u64, r: u64) -> FingerprintParams {
        assert!(r > 1 && r < p - 1, "unit must satisfy 1 < r < p - 1");
        let rinv = mod_pow(r, p - 2, p);
        FingerprintParams { p, r, rinv }
    }

    #[inline]
    fn mul(&self, a: u64, b: u64) -> u64 {
        if self.p == MERSENNE61 {
            mul_mersenne61(a, b)
        } else {
            ((a as u128 * b as u128) % self.p as u128) as u64
        }
    }

    #[inline]
    fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.p {
            s - self.p
        } else {
            s
        }
    }

    #[inline]
    fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.p - b
        }
    }

    pub fn empty(&self) -> Fingerprint {
        Fingerprint { pow: 1, ipow: 1, phi: 0, len: 0 }
    }

    pub fn of_byte(&self, ch: u8) -> Fingerprint {
        Fingerprint { pow: 1, ipow: 1, phi: ch as u64 % self.p, len: 1 }
    }

    pub fn of_bytes(&self, x: &[u8]) -> Fingerprint {
        let mut f = self.empty();
        for &ch in x {
            f = self.combine(f, self.of_byte(ch));
        }
        f
    }

    /// `r^{len}` given a fingerprint of that length.
    #[inline]
    fn shift(&self, f: &Fingerprint) -> u64 {
        if f.len == 0 {
            1
        } else {
            self.mul(f.pow, self.r)
        }
    }

    #[inline]
    fn ishift(&self, f: &Fingerprint) -> u64 {
        if f.len == 0 {
            1
        } else {
            self.mul(f.ipow, self.rinv)
        }
    }

    /// Fingerprint of `XY` from fingerprints of `X` and `Y`.
    pub fn combine(&self, x: Fingerprint, y: Fingerprint) -> Fingerprint {
        if x.len == 0 {
            return y;
        }
        if y.len == 0 {
            return x;
        }
        Fingerprint {
            pow: self.mul(self.mul(x.pow, y.pow), self.r),
            ipow: self.mul(self.mul(x.ipow, y.ipow), self.rinv),
            phi: self.add(x.phi, self.mul(self.shift(&x), y.phi)),
            len: x.len + y.len,
        }
    }

    /// Fingerprint of `Y` where `XY = Z`, from `Z` and its prefix `X`.
    pub fn subtract_prefix(
        &self,
        z: Fingerprint,
        x: Fingerprint,
    ) -> Result<Fingerprint, FingerprintError> {
        if x.len > z.len {
            return Err(FingerprintError::LengthMismatch { operand: x.len, len: z.len });
        }
        if x.len == 0 {
            return Ok(z);
        }
        if x.len == z.len {
            return Ok(self.empty());
        }
        let phi = self.mul(self.sub(z.phi, x.phi), self.ishift(&x));
        Ok(Fingerprint {
            pow: self.mul(self.mul(z.pow, x.ipow), self.rinv),
            ipow: self.mul(self.mul(z.ipow, x.pow), self.r),
            phi,
            len: z.len - x.len,
        })
    }

    /// Fingerprint of `X` where `XY = Z`, from `Z` and its suffix `Y`.
    pub fn subtract_suffix(
        &self,
        z: Fingerprint,
        y: Fingerprint,
    ) -> Result<Fingerprint, FingerprintError> {
        if y.len > z.len {
            return Err(FingerprintError::LengthMismatch { operand: y.len, len: z.len });
        }
        if y.len == 0 {
            return Ok(z);
        }
        if y.len == z.len {
            return Ok(self.empty());
        }
        // r^{len_x} = r^{(len_z-1) - (len_y-1)}
        let shift_x = self.mul(z.pow, y.ipow);
        let ishift_x = self.mul(z.ipow, y.pow);
        let phi = self.sub(z.phi, self.mul(shift_x, y.phi));
        Ok(Fingerprint {
            pow: self.mul(shift_x, self.rinv),
            ipow: self.mul(ishift_x, self.r),
            phi,
            len: z.len - y.len,
        })
    }

    /// Fingerprint of `k` concatenated copies of the string behind `f`.
    pub fn repeat(&self, f: Fingerprint, k: u64) -> Fingerprint {
        let mut acc = self.empty();
        let mut cur = f;
        let mut k = k;
        while k > 0 {
            if k & 1 == 1 {
                acc = self.combine(acc, cur);
            }
            k >>= 1;
            if k > 0 {
                cur = self.combine(cur, cur);
            }
        }
        acc
    }
}

#[inline]
pub fn mul_mersenne61(a: u64, b: u64) -> u64 {
    let prod = a as u128 * b as u128;
    let lo = (prod & MERSENNE61 as u128) as u64;
    let hi = (prod >> 61) as u64;
    let mut s = lo + hi;
    if s >= MERSENNE61 {
        s -= MERSENNE61;
    }
    s
}

fn mod_pow(mut base: u64, mut exp: u64, p: u64) -> u64 {
    let mut acc: u64 = 1;
    base %= p;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = ((acc as u128 * base as u128) % p as u128) as u64;
        }
        base = ((base as u128 * base as u128) % p as u128) as u64;
        exp >>= 1;
    }
    acc
}

/// Forward and reversed whole-expansion fingerprints for every symbol, plus
/// the affix recursion. Build once per grammar; immutable afterwards.
#[derive(Debug, Clone)]
pub struct GrammarFps {
    pub params: FingerprintParams,
    full_fwd: Vec<Fingerprint>,
    full_rev: Vec<Fingerprint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Prefix,
    Suffix,
}

impl GrammarFps {
    pub fn new(g: &Grammar, params: FingerprintParams) -> GrammarFps {
        let n = g.len();
        let mut full_fwd = vec![params.empty(); n];
        let mut full_rev = vec![params.empty(); n];
        for &sym in g.topo() {
            let s = sym.ix();
            match g.production(sym) {
                Production::Leaf(ch) => {
                    full_fwd[s] = params.of_byte(ch);
                    full_rev[s] = params.of_byte(ch);
                }
                Production::Pair(b, c) => {
                    full_fwd[s] = params.combine(full_fwd[b.ix()], full_fwd[c.ix()]);
                    full_rev[s] = params.combine(full_rev[c.ix()], full_rev[b.ix()]);
                }
                Production::Power(b, k) => {
                    full_fwd[s] = params.repeat(full_fwd[b.ix()], k);
                    full_rev[s] = params.repeat(full_rev[b.ix()], k);
                }
            }
        }
        GrammarFps { params, full_fwd, full_rev }
    }

    #[inline]
    pub fn full(&self, s: SymbolId, reversed: bool) -> Fingerprint {
        if reversed {
            self.full_rev[s.ix()]
        } else {
            self.full_fwd[s.ix()]
        }
    }

    /// Fingerprint of the length-`l` prefix or suffix of the expansion of `a`
    /// (of the reversed expansion when `reversed`). O(height + log l) steps.
    pub fn affix(
        &self,
        g: &Grammar,
        a: SymbolId,
        side: Side,
        reversed: bool,
        l: u64,
    ) -> Result<Fingerprint, FingerprintError> {
        if l > g.exp_len(a) {
            return Err(FingerprintError::Grammar(crate::GrammarError::OutOfBounds {
                pos: l,
                len: g.exp_len(a),
            }));
        }
        Ok(self.affix_inner(g, a, side, reversed, l))
    }

    fn affix_inner(&self, g: &Grammar, a: SymbolId, side: Side, reversed: bool, l: u64) -> Fingerprint {
        if l == 0 {
            return self.params.empty();
        }
        if l == g.exp_len(a) {
            return self.full(a, reversed);
        }
        match g.production(a) {
            Production::Leaf(_) => self.full(a, reversed), // l == 1 == exp_len
            Production::Pair(b, c) => {
                // Effective child order under reversal.
                let (left, right) = if reversed { (c, b) } else { (b, c) };
                let ll = g.exp_len(left);
                let lr = g.exp_len(right);
                match side {
                    Side::Prefix => {
                        if l <= ll {
                            self.affix_inner(g, left, side, reversed, l)
                        } else {
                            let rest = self.affix_inner(g, right, side, reversed, l - ll);
                            self.params.combine(self.full(left, reversed), rest)
                        }
                    }
                    Side::Suffix => {
                        if l <= lr {
                            self.affix_inner(g, right, side, reversed, l)
                        } else {
                            let rest = self.affix_inner(g, left, side, reversed, l - lr);
                            self.params.combine(rest, self.full(right, reversed))
                        }
                    }
                }
            }
            Production::Power(b, _) => self.power_affix(g, b, u64::MAX, side, reversed, l),
        }
    }

    /// Affix fingerprint of `base^copies`; `copies` only bounds `l`, which the
    /// caller has already validated.
    pub fn power_affix(
        &self,
        g: &Grammar,
        base: SymbolId,
        copies: u64,
        side: Side,
        reversed: bool,
        l: u64,
    ) -> Fingerprint {
        debug_assert!(copies == u64::MAX || l <= g.exp_len(base).saturating_mul(copies));
        let lb = g.exp_len(base);
        let full = l / lb;
        let rest = l - full * lb;
        let whole = self.params.repeat(self.full(base, reversed), full);
        if rest == 0 {
            return whole;
        }
        let part = self.affix_inner(g, base, side, reversed, rest);
        match side {
            Side::Prefix => self.params.combine(whole, part),
            Side::Suffix => self.params.combine(part, whole),
        }
    }
}

/// Rolling prefix fingerprints of a pattern; any substring fingerprint is
/// derivable in constant time.
#[derive(Debug, Clone)]
pub struct PatternFps {
    params: FingerprintParams,
    /// prefix[i] = fingerprint of p[..i]
    prefix: Vec<Fingerprint>,
}

impl PatternFps {
    pub fn new(params: FingerprintParams, p: &[u8]) -> PatternFps {
        let mut prefix = Vec::with_capacity(p.len() + 1);
        let mut f = params.empty();
        prefix.push(f);
        for &ch in p {
            f = params.combine(f, params.of_byte(ch));
            prefix.push(f);
        }
        PatternFps { params, prefix }
    }

    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Fingerprint of `p[i..j]`.
    pub fn range(&self, i: usize, j: usize) -> Fingerprint {
        self.params
            .subtract_prefix(self.prefix[j], self.prefix[i])
            .expect("prefix within range")
    }
}

/// Draws fingerprint parameters and verifies them against the indexed string
/// set via `verify`; retries with a fresh unit on any detected collision.
pub fn choose_params<R: Rng, F: Fn(&FingerprintParams) -> bool>(
    p: u64,
    rng: &mut R,
    budget: u32,
    verify: F,
) -> Result<FingerprintParams, FingerprintError> {
    assert!(p > 4, "modulus too small to host a unit 1 < r < p - 1");
    for _ in 0..budget {
        let r = rng.gen_range(2..=p - 2);
        let params = FingerprintParams::new(p, r);
        if verify(&params) {
            return Ok(params);
        }
    }
    Err(FingerprintError::ParamSearchExhausted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{Affix, Grammar, GrammarKind};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn params101() -> FingerprintParams {
        FingerprintParams::new(101, 10)
    }

    #[test]
    fn combine_matches_polynomial() {
        // With p=101, r=10 and byte values 1, 2: phi("ab") = 1 + 10*2 = 21.
        let pr = params101();
        let fa = pr.of_byte(1);
        let fb = pr.of_byte(2);
        assert_eq!(fa.phi, 1);
        assert_eq!(fb.phi, 2);
        let fab = pr.combine(fa, fb);
        assert_eq!(fab.phi, 21);
        assert_eq!(fab.len, 2);
        // Identity on the empty string.
        assert_eq!(pr.combine(fab, pr.empty()), fab);
        assert_eq!(pr.combine(pr.empty(), fab), fab);
    }

    #[test]
    fn subtract_recovers_parts() {
        let pr = params101();
        let fa = pr.of_byte(1);
        let fb = pr.of_byte(2);
        let fab = pr.combine(fa, fb);
        let back_b = pr.subtract_prefix(fab, fa).unwrap();
        assert_eq!(back_b, fb);
        let back_a = pr.subtract_suffix(fab, fb).unwrap();
        assert_eq!(back_a, fa);
        assert!(pr.subtract_prefix(fa, fab).is_err());
    }

    #[test]
    fn combine_associative_in_effect() {
        let pr = FingerprintParams::new(MERSENNE61, 123456789);
        let (a, b, c) = (pr.of_bytes(b"ab"), pr.of_bytes(b"cde"), pr.of_bytes(b"f"));
        let left = pr.combine(pr.combine(a, b), c);
        let right = pr.combine(a, pr.combine(b, c));
        assert_eq!(left, right);
        assert_eq!(left, pr.of_bytes(b"abcdef"));
    }

    fn sample_grammar() -> Grammar {
        // 0:'a' 1:'b' 2:ab 3:abab 4:(ab)^5
        let prods = vec![
            Production::Leaf(b'a'),
            Production::Leaf(b'b'),
            Production::Pair(SymbolId(0), SymbolId(1)),
            Production::Pair(SymbolId(2), SymbolId(2)),
            Production::Power(SymbolId(2), 5),
        ];
        Grammar::validate_and_index(prods, SymbolId(3), GrammarKind::Rlslp).unwrap()
    }

    #[test]
    fn affix_matches_direct_evaluation() {
        let g = sample_grammar();
        let pr = FingerprintParams::new(MERSENNE61, 1_000_003);
        let fps = GrammarFps::new(&g, pr);
        // Whole string "abab" equals combine of halves.
        let whole = fps.affix(&g, SymbolId(3), Side::Prefix, false, 4).unwrap();
        assert_eq!(whole, pr.combine(pr.of_bytes(b"ab"), pr.of_bytes(b"ab")));
        // Empty affix.
        assert_eq!(fps.affix(&g, SymbolId(3), Side::Prefix, false, 0).unwrap(), pr.empty());
        // Power rule: prefix of length 7 of (ab)^5 = "abababa".
        let f7 = fps.affix(&g, SymbolId(4), Side::Prefix, false, 7).unwrap();
        assert_eq!(f7, pr.of_bytes(b"abababa"));
        // Exhaustive against extraction for every symbol/side/length.
        for s in 0..g.len() as u32 {
            let sym = SymbolId(s);
            let exp = g.expand(sym).unwrap();
            for l in 0..=exp.len() {
                let pre = fps.affix(&g, sym, Side::Prefix, false, l as u64).unwrap();
                assert_eq!(pre, pr.of_bytes(&exp[..l]), "prefix {s} {l}");
                let suf = fps.affix(&g, sym, Side::Suffix, false, l as u64).unwrap();
                assert_eq!(suf, pr.of_bytes(&exp[exp.len() - l..]), "suffix {s} {l}");
                let rev: Vec<u8> = exp.iter().rev().copied().collect();
                let rpre = fps.affix(&g, sym, Side::Prefix, true, l as u64).unwrap();
                assert_eq!(rpre, pr.of_bytes(&rev[..l]), "rev prefix {s} {l}");
                let rsuf = fps.affix(&g, sym, Side::Suffix, true, l as u64).unwrap();
                assert_eq!(rsuf, pr.of_bytes(&rev[rev.len() - l..]), "rev suffix {s} {l}");
            }
        }
    }

    #[test]
    fn pattern_fps_substrings() {
        let pr = FingerprintParams::new(MERSENNE61, 777);
        let p = b"acabac";
        let pf = PatternFps::new(pr, p);
        for i in 0..p.len() {
            for j in i..=p.len() {
                assert_eq!(pf.range(i, j), pr.of_bytes(&p[i..j]));
            }
        }
    }

    #[test]
    fn retry_path_on_forced_collision() {
        // Raw strings [3,1] and [1,2] collide under p=5 exactly when r = 2:
        // 3 + r = 1 + 2r (mod 5). The verifier rejects r=2, accepts r=3.
        let colliding = |pr: &FingerprintParams| {
            pr.of_bytes(&[3, 1]).phi != pr.of_bytes(&[1, 2]).phi
        };
        assert!(!colliding(&FingerprintParams::new(5, 2)));
        assert!(colliding(&FingerprintParams::new(5, 3)));
        let mut rng = StdRng::seed_from_u64(0);
        let got = choose_params(5, &mut rng, 64, colliding).unwrap();
        assert_eq!(got.r, 3);
        // Exhausted budget surfaces as an error.
        let mut rng = StdRng::seed_from_u64(0);
        assert!(matches!(
            choose_params(5, &mut rng, 8, |_| false),
            Err(FingerprintError::ParamSearchExhausted)
        ));
    }

    #[test]
    fn extract_affix_consistency() {
        let g = sample_grammar();
        assert_eq!(g.extract_affix(SymbolId(3), Affix::Prefix, 3).unwrap(), b"aba");
        assert_eq!(g.extract_affix(SymbolId(4), Affix::Suffix, 0).unwrap(), b"");
        assert_eq!(g.extract_affix(SymbolId(4), Affix::Suffix, 3).unwrap(), b"bab");
    }
}
