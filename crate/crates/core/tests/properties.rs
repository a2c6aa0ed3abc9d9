use pinnforge_core::consensus::combine;
use pinnforge_core::feedback::{
    accuracy_metric, complexity_metric, convergence_metric, overall_score, robustness_metric, smoothness,
    ComplexityMode,
};
use pinnforge_core::pinn::{match_score, ArchCapability, MatchWeights, PdeFeatures};
use pinnforge_core::{canonicalize, is_canonical, tree_score, ExprTree};
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = ExprTree> {
    prop_oneof![
        (-3i32..=3).prop_map(|v| ExprTree::num(v as f64)),
        Just(ExprTree::num(0.5)),
        prop::sample::select(vec!["u", "x", "y", "nu"]).prop_map(ExprTree::var),
        Just(ExprTree::constant("pi")),
    ]
}

fn tree() -> impl Strategy<Value = ExprTree> {
    leaf().prop_recursive(4, 24, 3, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 2..4).prop_map(ExprTree::sum),
            prop::collection::vec(inner.clone(), 2..4).prop_map(ExprTree::product),
            (inner.clone(), 2i32..=3).prop_map(|(b, e)| ExprTree::power(b, ExprTree::num(e as f64))),
            (prop::sample::select(vec!["sin", "exp"]), inner.clone()).prop_map(|(f, a)| ExprTree::func(f, a)),
            (prop::sample::select(vec!["x", "y"]), 1u32..=2, inner.clone())
                .prop_map(|(a, k, c)| ExprTree::dx(a, k, c)),
            inner.prop_map(|c| ExprTree::dt(1, c)),
        ]
    })
}

/// Reverses the children of every sum and product.
fn mirrored(t: &ExprTree) -> ExprTree {
    let mut out = t.clone();
    out.children = t.children.iter().map(mirrored).collect();
    if t.node.is_commutative() {
        out.children.reverse();
    }
    out
}

fn unit() -> impl Strategy<Value = f64> {
    0.0..=1.0f64
}

fn features() -> impl Strategy<Value = PdeFeatures> {
    (unit(), unit(), unit())
        .prop_filter("nonzero", |(a, b, c)| a + b + c > 1e-6)
        .prop_map(|(per, geo, ms)| PdeFeatures { per, geo, ms })
}

fn capability(i: usize) -> impl Strategy<Value = ArchCapability> {
    (0.1..=0.9f64, 0.1..=0.9f64, 0.1..=0.9f64)
        .prop_map(move |(p, g, m)| ArchCapability::new(&format!("A{i}"), p, g, m).unwrap())
}

fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

proptest! {
    #[test]
    fn canonicalize_is_idempotent(t in tree()) {
        let c = canonicalize(&t);
        prop_assert!(is_canonical(&c));
        prop_assert_eq!(canonicalize(&c), c);
    }

    #[test]
    fn tree_score_is_symmetric_and_bounded(a in tree(), b in tree()) {
        let (a, b) = (canonicalize(&a), canonicalize(&b));
        let s = tree_score(&a, &b);
        prop_assert!((0.0..=1.0).contains(&s));
        prop_assert_eq!(s, tree_score(&b, &a));
        prop_assert_eq!(tree_score(&a, &a), 1.0);
    }

    #[test]
    fn operand_order_never_matters(t in tree()) {
        let a = canonicalize(&t);
        let b = canonicalize(&mirrored(&t));
        prop_assert_eq!(tree_score(&a, &b), 1.0);
    }

    #[test]
    fn composite_is_monotone(a in unit(), s1 in unit(), s2 in unit(), m in unit()) {
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        prop_assert!(combine(a, lo, m) <= combine(a, hi, m));
        prop_assert!(combine(a, m, lo) <= combine(a, m, hi));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn match_argmax_ignores_weight_scale(
        phi in features(),
        psis in (capability(0), capability(1), capability(2), capability(3), capability(4)),
        w in (0.05..=5.0f64, 0.05..=5.0f64, 0.05..=5.0f64),
        c in 1e-3..=1e3f64,
    ) {
        let w = MatchWeights { per: w.0, geo: w.1, ms: w.2 };
        let psis = [psis.0, psis.1, psis.2, psis.3, psis.4];
        let base: Vec<f64> = psis.iter().map(|p| match_score(&phi, p, &w).unwrap()).collect();
        let scaled: Vec<f64> = psis.iter().map(|p| match_score(&phi, p, &w.scaled(c)).unwrap()).collect();
        for s in base.iter().chain(&scaled) {
            prop_assert!((0.0..=1.0).contains(s));
        }
        prop_assert_eq!(argmax(&base), argmax(&scaled));
    }

    #[test]
    fn convergence_never_rewards_slower_runs(t_min in 1.0..100.0f64, span in 1.0..1e4f64, a in unit(), b in unit()) {
        let t_max = t_min + span;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let n = t_max.ceil() as usize;
        let trace = |frac: f64| {
            let hit = (t_min + frac * span).round().max(1.0) as usize;
            (1..=n).map(|t| if t >= hit { 1e-6 } else { 1.0 }).collect::<Vec<f64>>()
        };
        let (fast, slow) = (convergence_metric(&trace(lo), 1e-3, t_min, t_max), convergence_metric(&trace(hi), 1e-3, t_min, t_max));
        prop_assert!(fast.1 <= slow.1);
        prop_assert!(fast.0 >= slow.0);
        prop_assert!((0.0..=1.0).contains(&fast.0) && (0.0..=1.0).contains(&slow.0));
    }

    #[test]
    fn accuracy_strictly_prefers_lower_error(m in 0.0..1e6f64, gap in 1e-6..1e6f64) {
        let (a, b) = (accuracy_metric(m), accuracy_metric(m + gap));
        prop_assert!(a.1 > b.1);
        prop_assert!(a.0 > b.0);
        prop_assert!(a.1 > 0.0 && a.1 <= 1.0);
    }

    #[test]
    fn complexity_strictly_prefers_smaller_nets(max in 2usize..100_000, x in unit(), y in unit()) {
        let p1 = 1 + (x * (max - 1) as f64) as usize;
        let p2 = 1 + (y * (max - 1) as f64) as usize;
        prop_assume!(p1 != p2);
        let (small, big) = (p1.min(p2), p1.max(p2));
        let (a, b) = (complexity_metric(small, max, ComplexityMode::Inverted), complexity_metric(big, max, ComplexityMode::Inverted));
        prop_assert!(a.1 > b.1);
        prop_assert!((0.0..=1.0).contains(&a.1) && (0.0..=1.0).contains(&b.1));
    }

    #[test]
    fn robustness_penalizes_oscillation(base in 1.0..100.0f64, k1 in unit(), k2 in unit(), half in 1usize..50) {
        let (lo, hi) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        let zigzag = |k: f64| (0..2 * half).map(|t| base + if t % 2 == 0 { k * base } else { -k * base }).collect::<Vec<f64>>();
        let (calm, wild) = (smoothness(&zigzag(lo * 0.99)).unwrap(), smoothness(&zigzag(hi * 0.99)).unwrap());
        prop_assert!(calm >= wild);
        let inside = robustness_metric(&zigzag(lo), 1.0, 10, 1e-8, 1e2, 0.5).unwrap();
        let outside = robustness_metric(&zigzag(lo), 1e4, 10, 1e-8, 1e2, 0.5).unwrap();
        prop_assert!(inside.score >= outside.score);
        prop_assert!((0.0..=1.0).contains(&inside.score));
    }

    #[test]
    fn overall_is_monotone_and_linear(
        m in prop::array::uniform4(unit()),
        n in prop::array::uniform4(unit()),
        raw in prop::array::uniform4(0.0..1.0f64),
        i in 0usize..4,
        bump in unit(),
        a in unit(),
    ) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-3);
        let w = raw.map(|x| x / total);
        prop_assume!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        let s = overall_score(m, w).unwrap();
        let mut up = m;
        up[i] = (up[i] + bump).min(1.0);
        prop_assert!(overall_score(up, w).unwrap() >= s - 1e-15);
        let mix: [f64; 4] = std::array::from_fn(|j| a * m[j] + (1.0 - a) * n[j]);
        let lhs = overall_score(mix, w).unwrap();
        let rhs = a * s + (1.0 - a) * overall_score(n, w).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}
