mod support;

use pinnforge_core::matching::matched_nodes;
use pinnforge_core::tree_score;
use support::*;

#[test]
fn class_sizes_match_hand_count() {
    let classes = enumerate_classes(6);
    let sizes: Vec<usize> = classes.iter().skip(1).map(|c| c.len()).collect();
    // size 3: 8 unary chains, 4 powers, 3 sums, 3 products
    assert_eq!(sizes, vec![2, 4, 18, 76, 354, 1706]);
}

#[test]
fn exhaustive_agreement_up_to_nine_nodes() {
    let mut worst = 0usize;
    let visited = for_each_pair(9, |a, b| {
        let want = oracle_matched(a, b);
        let got = matched_nodes(a, b);
        if want != got {
            panic!("{a:?} vs {b:?}: oracle {want}, matcher {got}");
        }
        worst = worst.max(want);
        assert!((tree_score(a, b) - oracle_score(a, b)).abs() < 1e-12);
    });
    assert_eq!(visited, expected_pairs(9));
    assert!(worst >= 4);
}

