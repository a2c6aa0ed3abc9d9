//! Test oracles shared by the integration and acceptance suites.
#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity)]

use pinnforge_core::{ExprTree, Node};

/// Largest root-anchored alignment found by enumerating every partial
/// injective pairing of children (positional for ordered nodes).
pub fn oracle_matched(a: &ExprTree, b: &ExprTree) -> usize {
    if !labels_equal(&a.node, &b.node) {
        return 0;
    }
    let commutative = matches!(a.node, Node::Sum | Node::Product);
    let mut used = vec![false; b.children.len()];
    1 + best_mapping(a, b, 0, &mut used, commutative)
}

fn best_mapping(a: &ExprTree, b: &ExprTree, i: usize, used: &mut Vec<bool>, commutative: bool) -> usize {
    if i == a.children.len() {
        return 0;
    }
    // leave child i unpaired
    let mut best = best_mapping(a, b, i + 1, used, commutative);
    for j in 0..b.children.len() {
        if used[j] || (!commutative && j != i) {
            continue;
        }
        used[j] = true;
        let here = oracle_matched(&a.children[i], &b.children[j]);
        best = best.max(here + best_mapping(a, b, i + 1, used, commutative));
        used[j] = false;
    }
    best
}

/// Label equality written out independently of the production code.
fn labels_equal(x: &Node, y: &Node) -> bool {
    match (x, y) {
        (Node::Num(p), Node::Num(q)) => (p - q).abs() <= 1e-9 * 1f64.max(p.abs()).max(q.abs()),
        (Node::Var(p), Node::Var(q)) | (Node::Const(p), Node::Const(q)) | (Node::Func(p), Node::Func(q)) => p == q,
        (Node::TimeDeriv { order: p }, Node::TimeDeriv { order: q }) => p == q,
        (Node::SpaceDeriv { axis: a, order: p }, Node::SpaceDeriv { axis: b, order: q }) => a == b && p == q,
        (Node::Sum, Node::Sum) | (Node::Product, Node::Product) | (Node::Power, Node::Power) => true,
        _ => false,
    }
}

pub fn count_nodes(t: &ExprTree) -> usize {
    1 + t.children.iter().map(count_nodes).sum::<usize>()
}

pub fn oracle_score(a: &ExprTree, b: &ExprTree) -> f64 {
    oracle_matched(a, b) as f64 / count_nodes(a).max(count_nodes(b)) as f64
}

/// Representative alphabet: two leaf labels, two unary labels, the ordered
/// binary power, and the two commutative operators.
pub const LEAF_U: u8 = 0;
pub const LEAF_TWO: u8 = 1;
pub const DERIV_X: u8 = 2;
pub const SIN: u8 = 3;
pub const POW: u8 = 4;
pub const SUM: u8 = 5;
pub const PROD: u8 = 6;

/// Every tree of one node count, stored as fixed-width preorder
/// `(label, child count)` byte pairs.
pub struct SizeClass {
    pub size: usize,
    pub data: Vec<u8>,
}

impl SizeClass {
    pub fn len(&self) -> usize {
        if self.size == 0 {
            return 0;
        }
        self.data.len() / (2 * self.size)
    }

    pub fn get(&self, i: usize) -> &[u8] {
        let w = 2 * self.size;
        &self.data[i * w..(i + 1) * w]
    }
}

/// Trees with flattened sums and products and commutative children taken
/// as multisets: the shapes canonicalization can produce, up to child order.
pub fn enumerate_classes(max: usize) -> Vec<SizeClass> {
    let mut classes: Vec<SizeClass> = vec![SizeClass { size: 0, data: vec![] }];
    for n in 1..=max {
        let mut data = Vec::new();
        if n == 1 {
            data.extend_from_slice(&[LEAF_U, 0, LEAF_TWO, 0]);
        }
        if n >= 2 {
            for op in [DERIV_X, SIN] {
                let c = &classes[n - 1];
                for i in 0..c.len() {
                    data.extend_from_slice(&[op, 1]);
                    data.extend_from_slice(c.get(i));
                }
            }
        }
        if n >= 3 {
            for a in 1..n - 1 {
                let (ca, cb) = (&classes[a], &classes[n - 1 - a]);
                for i in 0..ca.len() {
                    for j in 0..cb.len() {
                        data.extend_from_slice(&[POW, 2]);
                        data.extend_from_slice(ca.get(i));
                        data.extend_from_slice(cb.get(j));
                    }
                }
            }
            for op in [SUM, PROD] {
                let mut picks = Vec::new();
                multisets(&classes, op, n - 1, (1, 0), &mut picks, &mut |picks: &[(usize, usize)]| {
                    if picks.len() < 2 {
                        return;
                    }
                    data.extend_from_slice(&[op, picks.len() as u8]);
                    for &(s, i) in picks {
                        data.extend_from_slice(classes[s].get(i));
                    }
                });
            }
        }
        classes.push(SizeClass { size: n, data });
    }
    classes
}

/// Non-decreasing sequences of `(size, index)` children summing to `remaining`
/// nodes whose roots are not `op`.
fn multisets(
    classes: &[SizeClass],
    op: u8,
    remaining: usize,
    min: (usize, usize),
    picks: &mut Vec<(usize, usize)>,
    emit: &mut dyn FnMut(&[(usize, usize)]),
) {
    if remaining == 0 {
        emit(picks);
        return;
    }
    for s in min.0..=remaining {
        let c = &classes[s];
        let start = if s == min.0 { min.1 } else { 0 };
        for i in start..c.len() {
            if c.get(i)[0] == op {
                continue;
            }
            picks.push((s, i));
            multisets(classes, op, remaining - s, (s, i), picks, emit);
            picks.pop();
        }
    }
}

pub fn decode(code: &[u8]) -> ExprTree {
    fn go(code: &[u8], pos: &mut usize) -> ExprTree {
        let (label, n) = (code[*pos], code[*pos + 1] as usize);
        *pos += 2;
        let children: Vec<ExprTree> = (0..n).map(|_| go(code, pos)).collect();
        let node = match label {
            LEAF_U => Node::Var("u".into()),
            LEAF_TWO => Node::Num(2.0),
            DERIV_X => Node::SpaceDeriv {
                axis: "x".into(),
                order: 1,
            },
            SIN => Node::Func("sin".into()),
            POW => Node::Power,
            SUM => Node::Sum,
            _ => Node::Product,
        };
        ExprTree { node, children }
    }
    go(code, &mut 0)
}

/// Ordered pairs with total node count at most `budget`; calls `check` on each
/// and returns the number of pairs visited.
pub fn for_each_pair(budget: usize, mut check: impl FnMut(&ExprTree, &ExprTree)) -> u64 {
    let classes = enumerate_classes(budget - 1);
    let small_max = budget / 2;
    let decoded: Vec<Vec<ExprTree>> = classes
        .iter()
        .take(small_max + 1)
        .map(|c| (0..c.len()).map(|i| decode(c.get(i))).collect())
        .collect();
    let mut visited = 0u64;
    for big in 1..budget {
        for small in 1..=(budget - big).min(big) {
            if small == big {
                let trees = &decoded[small];
                for a in trees {
                    for b in trees {
                        check(a, b);
                        visited += 1;
                    }
                }
                continue;
            }
            let class = &classes[big];
            for i in 0..class.len() {
                let a = decode(class.get(i));
                for b in &decoded[small] {
                    check(&a, b);
                    check(b, &a);
                    visited += 2;
                }
            }
        }
    }
    visited
}

/// Exact number of ordered pairs `for_each_pair` should visit, from class sizes.
pub fn expected_pairs(budget: usize) -> u64 {
    let classes = enumerate_classes(budget - 1);
    let mut total = 0u64;
    for a in 1..budget {
        for b in 1..budget {
            if a + b <= budget {
                total += classes[a].len() as u64 * classes[b].len() as u64;
            }
        }
    }
    total
}
