use proptest::prelude::*;

use cooc_core::compress;
use cooc_core::fingerprint::{FingerprintParams, MERSENNE61};
use cooc_core::oracle;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Compression round trip: the run-length grammar expands back to the
    /// original text for arbitrary byte strings.
    #[test]
    fn compress_round_trip(text in proptest::collection::vec(any::<u8>(), 1..300), seed in any::<u64>()) {
        let slp = compress::build_slp(&text).unwrap();
        prop_assert_eq!(&slp.expand(slp.start()).unwrap(), &text);
        let (g, _) = compress::to_rlslp_seeded(&slp, seed).unwrap();
        prop_assert_eq!(&g.expand(g.start()).unwrap(), &text);
    }

    /// Splitting a string anywhere and re-combining the fingerprints equals
    /// fingerprinting it whole; subtracting recovers the halves.
    #[test]
    fn fingerprint_split_combine(bytes in proptest::collection::vec(any::<u8>(), 0..80), cut in any::<prop::sample::Index>()) {
        let params = FingerprintParams::new(MERSENNE61, 1_000_003);
        let k = if bytes.is_empty() { 0 } else { cut.index(bytes.len() + 1) };
        let whole = params.of_bytes(&bytes);
        let left = params.of_bytes(&bytes[..k]);
        let right = params.of_bytes(&bytes[k..]);
        prop_assert_eq!(params.combine(left, right), whole);
        prop_assert_eq!(params.subtract_prefix(whole, left).unwrap(), right);
        prop_assert_eq!(params.subtract_suffix(whole, right).unwrap(), left);
    }

    /// The period function returns a true period, and no smaller one exists.
    #[test]
    fn period_is_minimal(x in proptest::collection::vec(0u8..3, 1..60)) {
        let p = oracle::period(&x) as usize;
        prop_assert!(p >= 1 && p <= x.len());
        for i in 0..x.len() - p {
            prop_assert_eq!(x[i], x[i + p]);
        }
        for q in 1..p {
            let holds = (0..x.len() - q).all(|i| x[i] == x[i + q]);
            prop_assert!(!holds, "smaller period {} exists", q);
        }
    }

    /// Co-occurrences are strictly increasing in both coordinates and each
    /// reported pair satisfies the consecutiveness predicate.
    #[test]
    fn co_occurrences_are_consecutive(
        text in proptest::collection::vec(0u8..3, 2..120),
        a in proptest::collection::vec(0u8..3, 1..4),
        b in proptest::collection::vec(0u8..3, 1..4),
    ) {
        let pairs = oracle::naive_co_occurrences(&text, &a, &b);
        for w in pairs.windows(2) {
            prop_assert!(w[0].q1 < w[1].q1 && w[0].q2 < w[1].q2);
        }
        let occ1 = oracle::naive_occurrences(&text, &a);
        let occ2 = oracle::naive_occurrences(&text, &b);
        for c in &pairs {
            prop_assert!(occ1.contains(&c.q1) && occ2.contains(&c.q2));
            prop_assert!(!occ1.iter().any(|&q| q > c.q1 && q <= c.q2));
            prop_assert!(!occ2.iter().any(|&q| q >= c.q1 && q < c.q2));
        }
    }
}
