use pinnforge_core::{canonicalize, parse, tree_score, ExprTree};

const PAIRS: &str = include_str!("data/notation_pairs.tsv");

fn pairs() -> Vec<(&'static str, &'static str, &'static str)> {
    PAIRS
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            (f[0], f[1], f[2])
        })
        .collect()
}

fn canon(src: &str) -> ExprTree {
    canonicalize(&parse(src).unwrap_or_else(|e| panic!("{src}: {e}")))
}

#[test]
fn corpus_covers_each_variant_kind() {
    let p = pairs();
    assert_eq!(p.len(), 40);
    for kind in ["leibniz", "reorder", "folding", "combined"] {
        assert_eq!(p.iter().filter(|x| x.2 == kind).count(), 10, "{kind}");
    }
}

#[test]
fn every_variant_scores_exactly_one() {
    let failures: Vec<String> = pairs()
        .into_iter()
        .filter_map(|(a, b, _)| {
            let s = tree_score(&canon(a), &canon(b));
            (s != 1.0).then(|| format!("{a}  vs  {b}: {s}"))
        })
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn a_changed_coefficient_is_not_a_variant() {
    let s = tree_score(&canon("u_t - 0.01*u_xx"), &canon("u_t - 0.02*u_xx"));
    assert!(s < 1.0);
}
