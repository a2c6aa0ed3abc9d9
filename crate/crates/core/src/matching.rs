//! Normalized tree-matching score between canonical expression trees.
//!
//! An alignment pairs nodes of the two trees one-to-one such that paired
//! nodes agree on kind and label, roots pair only with roots, and a non-root
//! pair requires its parents to be paired too. Children of ordered nodes
//! (power, functions, derivatives) pair only at equal positions; children of
//! sums and products pair freely. The score is the size of the largest such
//! alignment divided by the larger tree's node count.

use alloc::vec;
use alloc::vec::Vec;

use crate::expr::ExprTree;
use crate::pde::CanonicalPde;

/// Size of the largest alignment rooted at `(a, b)`.
pub fn matched_nodes(a: &ExprTree, b: &ExprTree) -> usize {
    if !a.node.label_matches(&b.node) {
        return 0;
    }
    if a.children.is_empty() || b.children.is_empty() {
        return 1;
    }
    if a.node.is_commutative() {
        let w: Vec<Vec<i64>> = a
            .children
            .iter()
            .map(|ca| {
                b.children
                    .iter()
                    .map(|cb| matched_nodes(ca, cb) as i64)
                    .collect()
            })
            .collect();
        1 + max_weight_assignment(&w) as usize
    } else {
        1 + a
            .children
            .iter()
            .zip(&b.children)
            .map(|(ca, cb)| matched_nodes(ca, cb))
            .sum::<usize>()
    }
}

/// `|M(T1,T2)| / max(|T1|,|T2|)`.
pub fn tree_score(a: &ExprTree, b: &ExprTree) -> f64 {
    let denom = a.node_count().max(b.node_count());
    matched_nodes(a, b) as f64 / denom as f64
}

/// Symbolic equivalence of two canonical PDEs, on their residual trees.
pub fn sym_score(e1: &CanonicalPde, e2: &CanonicalPde) -> f64 {
    tree_score(e1.residual(), e2.residual())
}

/// Maximum total weight of a matching in a bipartite graph with
/// nonnegative weights `w[i][j]` (rows and columns may differ in count).
pub fn max_weight_assignment(w: &[Vec<i64>]) -> i64 {
    let rows = w.len();
    let cols = w.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0;
    }
    let n = rows.max(cols);
    let max_w = w.iter().flatten().copied().max().unwrap_or(0);
    // square cost matrix, minimize (max_w - w); padding cells cost max_w
    let cost = |i: usize, j: usize| -> i64 {
        if i < rows && j < cols {
            max_w - w[i][j]
        } else {
            max_w
        }
    };
    // Hungarian algorithm with potentials, 1-based rows/cols
    let inf = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n)
        .filter(|&j| p[j] >= 1 && p[j] <= rows && j <= cols)
        .map(|j| w[p[j] - 1][j - 1])
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canon::canonicalize;
    use crate::parse::parse;

    fn canon(s: &str) -> ExprTree {
        canonicalize(&parse(s).unwrap())
    }

    /// Brute force over all permutations of the padded matrix.
    fn brute_assignment(w: &[Vec<i64>]) -> i64 {
        fn go(w: &[Vec<i64>], row: usize, used: &mut Vec<bool>) -> i64 {
            if row == w.len() {
                return 0;
            }
            let mut best = go(w, row + 1, used);
            for j in 0..used.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(w[row][j] + go(w, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        let cols = w.first().map_or(0, Vec::len);
        go(w, 0, &mut vec![false; cols])
    }

    #[test]
    fn assignment_matches_brute_force() {
        let mut seed = 12345u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (seed >> 33) as i64
        };
        for _ in 0..300 {
            let rows = (next() % 5 + 1) as usize;
            let cols = (next() % 5 + 1) as usize;
            let w: Vec<Vec<i64>> = (0..rows)
                .map(|_| (0..cols).map(|_| next() % 7).collect())
                .collect();
            assert_eq!(max_weight_assignment(&w), brute_assignment(&w), "{w:?}");
        }
    }

    #[test]
    fn identical_trees_score_one() {
        let t = canon("u_t + u*u_x - 0.01*u_xx");
        assert_eq!(tree_score(&t, &t), 1.0);
    }

    #[test]
    fn heat_vs_wave_is_five_sevenths() {
        let heat = canon("u_t - 0.1*u_xx");
        let wave = canon("u_tt - 0.1*u_xx");
        // sum + product(-0.1, D x 2 u) match; D t 1 vs D t 2 do not
        assert_eq!(matched_nodes(&heat, &wave), 5);
        assert!((tree_score(&heat, &wave) - 5.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn coefficient_tolerance() {
        let a = canon("u_t - 0.1*u_xx");
        let b = canon("u_t - 0.1000000000001*u_xx");
        assert_eq!(tree_score(&a, &b), 1.0);
        let c = canon("u_t - 0.2*u_xx");
        assert!(tree_score(&a, &c) < 1.0);
    }

    #[test]
    fn different_roots_score_zero() {
        assert_eq!(tree_score(&canon("u"), &canon("v")), 0.0);
    }
}
