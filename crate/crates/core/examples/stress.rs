use cooc_core::index::Index;
use cooc_core::oracle;

fn main() {
    let text = b"abaababaabaababaaba".to_vec();
    let p1 = b"abaaba".to_vec();
    let p2 = b"abaabaababaa".to_vec();
    let idx = Index::build_from_text(&text, 851).unwrap();
    let g = &idx.grammar;
    let h1 = idx.preprocess(&p1).unwrap();
    let h2 = idx.preprocess(&p2).unwrap();
    for (i, &s1) in h1.splits.iter().enumerate() {
        let (u1, v1) = (&h1.anchor_pre[i], &h1.anchor_suf[i]);
        for (j, &s2) in h2.splits.iter().enumerate() {
            let (u2, v2) = (&h2.anchor_pre[j], &h2.anchor_suf[j]);
            if !u1.found || !v1.found || !u2.found || !v2.found {
                println!("({s1},{s2}): loci not found");
                continue;
            }
            let rec = idx.co.quadruple(g, (u1.node, u2.node, v1.node, v2.node));
            let d1 = rec.l1 as i64 - s1 as i64;
            let d2 = rec.l2 as i64 - s2 as i64;
            println!("split pair ({s1},{s2}): l1={} l2={} |S1|={} |S2|={} D1={d1} D2={d2} D={}",
                rec.l1, rec.l2, rec.s1_len, rec.s2_len, d1 - d2);
            println!("  t1 = {:?}", rec.t1);
            println!("  l_list = {:?}  pi1={:?} ov={:?} t2={:?}", rec.l_list, rec.pi1, rec.ov, rec.t2);
            println!("  ktriples = {:?}", rec.ktriples);
        }
    }
    // Also dump oracle occ of the anchors in the text to sanity check.
    let _ = oracle::naive_occurrences(&text, &p1);
}
