//! Two-sided 2D orthogonal range emptiness over point multisets.
//!
//! Queries ask whether any input point dominates `(α, β)` coordinate-wise.
//! The structure is the Pareto frontier of the input under (>=, >=), with a
//! binary search per query. Identical answers to the classic O(log log N)
//! structures; the log factor is irrelevant at this scale.

/// Pareto-maximal points, x strictly increasing and y strictly decreasing.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Staircase {
    frontier: Vec<(u64, u64)>,
}

impl Staircase {
    pub fn build(mut points: Vec<(u64, u64)>) -> Staircase {
        points.sort_unstable();
        points.dedup();
        let mut frontier: Vec<(u64, u64)> = Vec::new();
        // Scanning right to left keeps exactly the points with y above
        // everything to their right.
        let mut best_y: Option<u64> = None;
        for &(x, y) in points.iter().rev() {
            if best_y.is_none_or(|b| y > b) {
                frontier.push((x, y));
                best_y = Some(y);
            }
        }
        frontier.reverse();
        Staircase { frontier }
    }

    /// True iff some input point `(x, y)` has `x >= alpha` and `y >= beta`.
    pub fn dominant_exists(&self, alpha: u64, beta: u64) -> bool {
        // Max y over points with x >= alpha is attained at the smallest
        // frontier x >= alpha.
        let i = self.frontier.partition_point(|&(x, _)| x < alpha);
        i < self.frontier.len() && self.frontier[i].1 >= beta
    }

    pub fn frontier(&self) -> &[(u64, u64)] {
        &self.frontier
    }

    pub fn is_empty(&self) -> bool {
        self.frontier.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frontier_shapes() {
        let s = Staircase::build(vec![(1, 3), (2, 2), (4, 1)]);
        assert_eq!(s.frontier(), &[(1, 3), (2, 2), (4, 1)]);
        let s = Staircase::build(vec![(1, 1), (1, 1)]);
        assert_eq!(s.frontier(), &[(1, 1)]);
        let s = Staircase::build(vec![]);
        assert!(s.is_empty());
        // Dominated points drop out.
        let s = Staircase::build(vec![(1, 1), (2, 2), (3, 3)]);
        assert_eq!(s.frontier(), &[(3, 3)]);
    }

    #[test]
    fn queries() {
        let s = Staircase::build(vec![(1, 3), (2, 2), (4, 1)]);
        assert!(s.dominant_exists(2, 2));
        assert!(!s.dominant_exists(3, 2));
        assert!(s.dominant_exists(0, 0));
        assert!(!Staircase::build(vec![]).dominant_exists(0, 0));
    }

    #[test]
    fn agrees_with_linear_scan() {
        use rand::{rngs::StdRng, Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..200 {
            let n = rng.gen_range(0..20);
            let pts: Vec<(u64, u64)> = (0..n)
                .map(|_| (rng.gen_range(0..8), rng.gen_range(0..8)))
                .collect();
            let s = Staircase::build(pts.clone());
            for a in 0..9 {
                for b in 0..9 {
                    let want = pts.iter().any(|&(x, y)| x >= a && y >= b);
                    assert_eq!(s.dominant_exists(a, b), want, "{pts:?} {a} {b}");
                }
            }
        }
    }
}
