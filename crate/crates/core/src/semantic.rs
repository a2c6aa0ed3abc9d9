//! Structured PDE summaries and similarity between them.
//!
//! Summaries never mention variable or axis names, so two PDEs that differ
//! only by renaming summarize identically.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::expr::{ExprTree, Node};
use crate::pde::{field_degree, fields_of, BcKind, CanonicalPde};
use crate::provider::ProviderError;

/// Closed vocabulary of operator tags.
pub const TAG_VOCABULARY: &[&str] = &[
    "advection-linear",
    "advection-nonlinear",
    "biharmonic",
    "diffusion",
    "mixed-derivative",
    "nonlocal",
    "reaction",
    "wave",
];

pub const VOCABULARY_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticSummary {
    pub tags: BTreeSet<String>,
    pub dimensionality: u32,
    pub order: u32,
    pub linear: bool,
    pub forcing_present: bool,
    /// Sorted multiset.
    pub bc_kinds: Vec<BcKind>,
    pub domain_class: String,
    pub text: String,
}

impl SemanticSummary {
    pub fn render(&self) -> String {
        render(self)
    }
}

fn render(s: &SemanticSummary) -> String {
    let tags: Vec<&str> = s.tags.iter().map(String::as_str).collect();
    let bcs: Vec<&str> = s.bc_kinds.iter().map(|k| k.as_str()).collect();
    format!(
        "A {}, order-{} PDE in {} spatial dimension(s) on a {} domain. Operators: {}. Forcing: {}. Boundary conditions: {}.",
        if s.linear { "linear" } else { "nonlinear" },
        s.order,
        s.dimensionality,
        s.domain_class,
        if tags.is_empty() { String::from("none") } else { tags.join(", ") },
        if s.forcing_present { "present" } else { "absent" },
        if bcs.is_empty() { String::from("none") } else { bcs.join(", ") },
    )
}

/// Derivative chain under `t`: (time order, spatial orders, innermost expr).
fn chain(t: &ExprTree) -> Option<(u32, Vec<u32>, &ExprTree)> {
    let mut time = 0;
    let mut space = Vec::new();
    let mut cur = t;
    let mut any = false;
    loop {
        match &cur.node {
            Node::TimeDeriv { order } => time += order,
            Node::SpaceDeriv { order, .. } => space.push(*order),
            _ => break,
        }
        any = true;
        cur = &cur.children[0];
    }
    any.then_some((time, space, cur))
}

fn term_factors(term: &ExprTree) -> Vec<&ExprTree> {
    if term.node == Node::Product {
        term.children.iter().collect()
    } else {
        alloc::vec![term]
    }
}

pub fn summarize(e: &CanonicalPde) -> SemanticSummary {
    let residual = e.residual();
    let fields = fields_of(residual);
    let terms: Vec<&ExprTree> = if residual.node == Node::Sum {
        residual.children.iter().collect()
    } else {
        alloc::vec![residual]
    };

    let mut tags = BTreeSet::new();
    let mut forcing = false;
    let mut has_tt = false;
    let mut has_xx = false;

    for term in &terms {
        let factors = term_factors(term);
        let mut derivs = Vec::new();
        let mut field_factors = 0u32;
        for f in &factors {
            if let Some(c) = chain(f) {
                derivs.push(c);
            } else if field_degree(f, &fields) > 0 {
                field_factors += 1;
            }
        }
        if derivs.is_empty() {
            if field_degree(term, &fields) == 0 {
                forcing = true;
            } else {
                tags.insert("reaction");
            }
            continue;
        }
        for (time, space, _) in &derivs {
            if space.len() > 1 {
                tags.insert("mixed-derivative");
            }
            let spatial: u32 = space.iter().sum();
            if *time >= 2 {
                has_tt = true;
            }
            if spatial == 2 && *time == 0 && space.len() == 1 {
                has_xx = true;
            }
            if spatial >= 4 && *time == 0 {
                tags.insert("biharmonic");
            }
            if spatial == 1 && *time == 0 {
                if field_factors > 0 || derivs.len() > 1 {
                    tags.insert("advection-nonlinear");
                } else {
                    tags.insert("advection-linear");
                }
            }
        }
    }
    if has_tt {
        tags.insert("wave");
    } else if has_xx {
        tags.insert("diffusion");
    }
    if e.metadata().nonlocal {
        tags.insert("nonlocal");
    }

    let mut bc_kinds: Vec<BcKind> = e.bcs.iter().map(|b| b.kind).collect();
    bc_kinds.sort();
    let domain_class = format!(
        "{}/{}",
        geometry_word(e.domain.geometry),
        disc_word(e.domain.discretization)
    );
    let mut s = SemanticSummary {
        tags: tags.into_iter().map(String::from).collect(),
        dimensionality: e.domain.dims,
        order: e.metadata().max_order,
        linear: e.metadata().linear,
        forcing_present: forcing,
        bc_kinds,
        domain_class,
        text: String::new(),
    };
    s.text = render(&s);
    s
}

fn geometry_word(g: crate::pde::GeometryClass) -> &'static str {
    use crate::pde::GeometryClass::*;
    match g {
        Rectilinear => "rectilinear",
        Curved => "curved",
        MultiComponent => "multi-component",
        HighlyIrregular => "highly-irregular",
    }
}

fn disc_word(d: crate::pde::DiscretizationClass) -> &'static str {
    use crate::pde::DiscretizationClass::*;
    match d {
        Cartesian => "cartesian",
        StructuredCurvilinear => "curvilinear",
        UnstructuredFem => "unstructured",
    }
}

/// Pluggable similarity between summaries, in `[0,1]`.
pub trait SimilarityProvider {
    fn similarity(&self, a: &SemanticSummary, b: &SemanticSummary) -> Result<f64, ProviderError>;
}

/// Weights of the baseline similarity: tag Jaccard, linearity, order, dimensionality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineWeights {
    pub tags: f64,
    pub linearity: f64,
    pub order: f64,
    pub dimensionality: f64,
}

impl Default for BaselineWeights {
    fn default() -> Self {
        BaselineWeights {
            tags: 0.5,
            linearity: 0.2,
            order: 0.2,
            dimensionality: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BaselineSimilarity {
    pub weights: BaselineWeights,
}

impl BaselineSimilarity {
    pub fn score(&self, a: &SemanticSummary, b: &SemanticSummary) -> f64 {
        let w = &self.weights;
        let ind = |c: bool| if c { 1.0 } else { 0.0 };
        let s = w.tags * jaccard(&a.tags, &b.tags)
            + w.linearity * ind(a.linear == b.linear)
            + w.order * ind(a.order == b.order)
            + w.dimensionality * ind(a.dimensionality == b.dimensionality);
        // Normalizing by the weight total keeps identical summaries at exactly 1.
        let total = w.tags + w.linearity + w.order + w.dimensionality;
        if total <= 0.0 {
            return 0.0;
        }
        (s / total).clamp(0.0, 1.0)
    }
}

impl SimilarityProvider for BaselineSimilarity {
    fn similarity(&self, a: &SemanticSummary, b: &SemanticSummary) -> Result<f64, ProviderError> {
        Ok(self.score(a, b))
    }
}

/// Jaccard index; two empty sets count as identical.
pub fn jaccard(a: &BTreeSet<String>, b: &BTreeSet<String>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

pub fn sem_score(
    a: &SemanticSummary,
    b: &SemanticSummary,
    provider: &dyn SimilarityProvider,
) -> Result<f64, ProviderError> {
    provider.similarity(a, b).map(|s| s.clamp(0.0, 1.0))
}

/// Cosine of two embedding vectors clamped to `[0,1]`.
pub fn clamped_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = libm::sqrt(a.iter().map(|x| x * x).sum::<f64>());
    let nb = libm::sqrt(b.iter().map(|x| x * x).sum::<f64>());
    if na == 0.0 || nb == 0.0 || a.len() != b.len() {
        return 0.0;
    }
    (dot / (na * nb)).clamp(0.0, 1.0)
}
