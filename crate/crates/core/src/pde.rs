//! Canonical PDE: residual tree plus conditions, domain and metadata.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::canon::canonicalize;
use crate::expr::{ExprTree, Node};
use crate::prefix::{from_prefix, to_prefix};

impl Serialize for ExprTree {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_prefix(self))
    }
}

impl<'de> Deserialize<'de> for ExprTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        from_prefix(&text).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BcKind {
    Dirichlet,
    Neumann,
    Periodic,
    Robin,
}

impl BcKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BcKind::Dirichlet => "dirichlet",
            BcKind::Neumann => "neumann",
            BcKind::Periodic => "periodic",
            BcKind::Robin => "robin",
        }
    }
}

/// Which face(s) of an axis a condition applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Min,
    Max,
    Both,
}

/// `kind` on the `side` face(s) of spatial axis `axis` (1-based).
///
/// Dirichlet: `u = value`; Neumann: `∂u/∂axis = value`;
/// Robin: `u + ∂u/∂axis = value`; periodic: `u(min) = u(max)` (value ignored).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCondition {
    pub kind: BcKind,
    pub axis: u32,
    #[serde(default = "side_both")]
    pub side: Side,
    #[serde(default = "zero_expr")]
    pub value: ExprTree,
}

fn side_both() -> Side {
    Side::Both
}

fn zero_expr() -> ExprTree {
    ExprTree::num(0.0)
}

/// Domain irregularity class; codes 0, 0.3, 0.6, 0.9.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryClass {
    #[default]
    Rectilinear,
    Curved,
    MultiComponent,
    HighlyIrregular,
}

impl GeometryClass {
    pub fn code(self) -> f64 {
        match self {
            GeometryClass::Rectilinear => 0.0,
            GeometryClass::Curved => 0.3,
            GeometryClass::MultiComponent => 0.6,
            GeometryClass::HighlyIrregular => 0.9,
        }
    }
}

/// Discretization irregularity class; codes 0, 0.5, 0.8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscretizationClass {
    #[default]
    Cartesian,
    StructuredCurvilinear,
    UnstructuredFem,
}

impl DiscretizationClass {
    pub fn code(self) -> f64 {
        match self {
            DiscretizationClass::Cartesian => 0.0,
            DiscretizationClass::StructuredCurvilinear => 0.5,
            DiscretizationClass::UnstructuredFem => 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub dims: u32,
    /// `[lo, hi]` per spatial axis.
    pub extents: Vec<[f64; 2]>,
    #[serde(default)]
    pub time: Option<[f64; 2]>,
    /// 1-based periodic axes.
    #[serde(default)]
    pub periodic: Vec<u32>,
    #[serde(default)]
    pub geometry: GeometryClass,
    #[serde(default)]
    pub discretization: DiscretizationClass,
    /// Axis names; defaults to x, y, z (or x1..xd beyond three dimensions).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub axes: Vec<String>,
}

impl Domain {
    pub fn unit_box(dims: u32) -> Self {
        Domain {
            dims,
            extents: (0..dims).map(|_| [0.0, 1.0]).collect(),
            time: None,
            periodic: Vec::new(),
            geometry: GeometryClass::Rectilinear,
            discretization: DiscretizationClass::Cartesian,
            axes: Vec::new(),
        }
    }

    pub fn with_time(mut self, t0: f64, t1: f64) -> Self {
        self.time = Some([t0, t1]);
        self
    }

    pub fn axis_name(&self, axis: u32) -> String {
        if let Some(n) = self.axes.get(axis as usize - 1) {
            return n.clone();
        }
        if self.dims <= 3 {
            ["x", "y", "z"][axis as usize - 1].to_string()
        } else {
            format!("x{axis}")
        }
    }

    pub fn axis_names(&self) -> Vec<String> {
        (1..=self.dims).map(|a| self.axis_name(a)).collect()
    }

    pub fn min_extent(&self) -> f64 {
        let spatial = self.extents.iter().map(|[a, b]| b - a);
        let time = self.time.iter().map(|[a, b]| b - a);
        spatial.chain(time).fold(f64::INFINITY, f64::min)
    }

    fn check(&self) -> Result<(), PdeError> {
        if self.dims == 0 {
            return Err(PdeError::Invalid("domain needs at least one spatial dimension".into()));
        }
        if self.extents.len() != self.dims as usize {
            return Err(PdeError::Invalid(format!(
                "domain has {} extents for {} dimensions",
                self.extents.len(),
                self.dims
            )));
        }
        let bad = |r: &[f64; 2]| !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]);
        if self.extents.iter().any(bad) || self.time.as_ref().is_some_and(bad) {
            return Err(PdeError::Invalid("domain extent must satisfy lo < hi".into()));
        }
        if let Some(p) = self.periodic.iter().find(|p| **p == 0 || **p > self.dims) {
            return Err(PdeError::Invalid(format!("periodic axis {p} outside 1..{}", self.dims)));
        }
        if !self.axes.is_empty() && self.axes.len() != self.dims as usize {
            return Err(PdeError::Invalid("axis name list does not match dims".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub linear: bool,
    pub max_order: u32,
    #[serde(default)]
    pub re: Option<f64>,
    #[serde(default)]
    pub pe: Option<f64>,
    #[serde(default)]
    pub nonlocal: bool,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PdeError {
    #[error("invalid PDE: {0}")]
    Invalid(String),
    #[error("metadata disagrees with residual: {0}")]
    Metadata(String),
}

/// Residual-form PDE (`residual = 0`) with its conditions and domain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PdeJson", into = "PdeJson")]
pub struct CanonicalPde {
    residual: ExprTree,
    pub bcs: Vec<BoundaryCondition>,
    pub ic: Option<ExprTree>,
    pub domain: Domain,
    metadata: Metadata,
}

/// Optional inputs not derivable from the residual.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhysicsHints {
    pub re: Option<f64>,
    pub pe: Option<f64>,
    pub nonlocal: bool,
}

impl CanonicalPde {
    pub fn new(
        residual: &ExprTree,
        bcs: Vec<BoundaryCondition>,
        ic: Option<ExprTree>,
        domain: Domain,
        hints: PhysicsHints,
    ) -> Result<Self, PdeError> {
        residual
            .validate()
            .map_err(|e| PdeError::Invalid(e.to_string()))?;
        domain.check()?;
        for v in [hints.re, hints.pe].into_iter().flatten() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PdeError::Invalid("Re/Pe must be finite and nonnegative".into()));
            }
        }
        let residual = canonicalize(residual);
        let metadata = Metadata {
            linear: is_linear(&residual),
            max_order: max_derivative_order(&residual),
            re: hints.re,
            pe: hints.pe,
            nonlocal: hints.nonlocal,
        };
        Ok(CanonicalPde {
            residual,
            bcs,
            ic: ic.map(|t| canonicalize(&t)),
            domain,
            metadata,
        })
    }

    pub fn residual(&self) -> &ExprTree {
        &self.residual
    }

    pub fn metadata(&self) -> &Metadata {
        &self.metadata
    }

    pub fn is_time_dependent(&self) -> bool {
        self.residual
            .contains(&|t| matches!(t.node, Node::TimeDeriv { .. }))
    }

    /// Unknown fields: variables differentiated somewhere in the residual.
    pub fn fields(&self) -> BTreeSet<String> {
        fields_of(&self.residual)
    }

    /// Same PDE with variables renamed (fields, coefficients and axes).
    pub fn renamed(&self, f: &dyn Fn(&str) -> Option<String>) -> Self {
        let mut out = self.clone();
        out.residual = canonicalize(&self.residual.rename_vars(f));
        out.ic = self.ic.as_ref().map(|t| canonicalize(&t.rename_vars(f)));
        for bc in &mut out.bcs {
            bc.value = canonicalize(&bc.value.rename_vars(f));
        }
        if out.domain.axes.is_empty() {
            out.domain.axes = self.domain.axis_names();
        }
        for a in &mut out.domain.axes {
            if let Some(n) = f(a) {
                *a = n;
            }
        }
        out
    }
}

/// Wire shape of [`CanonicalPde`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PdeJson {
    pub residual: ExprTree,
    #[serde(default)]
    pub bc: Vec<BoundaryCondition>,
    #[serde(default)]
    pub ic: Option<ExprTree>,
    pub domain: Domain,
    #[serde(default)]
    pub metadata: Option<MetadataJson>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetadataJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linear: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_order: Option<u32>,
    #[serde(default)]
    pub re: Option<f64>,
    #[serde(default)]
    pub pe: Option<f64>,
    #[serde(default)]
    pub nonlocal: bool,
}

impl TryFrom<PdeJson> for CanonicalPde {
    type Error = PdeError;

    fn try_from(j: PdeJson) -> Result<Self, PdeError> {
        let meta = j.metadata.unwrap_or_default();
        let pde = CanonicalPde::new(
            &j.residual,
            j.bc,
            j.ic,
            j.domain,
            PhysicsHints {
                re: meta.re,
                pe: meta.pe,
                nonlocal: meta.nonlocal,
            },
        )?;
        if let Some(m) = meta.max_order {
            if m != pde.metadata.max_order {
                return Err(PdeError::Metadata(format!(
                    "max_order {m} but residual has order {}",
                    pde.metadata.max_order
                )));
            }
        }
        if let Some(l) = meta.linear {
            if l != pde.metadata.linear {
                return Err(PdeError::Metadata(format!(
                    "linear = {l} but residual is {}",
                    if pde.metadata.linear { "linear" } else { "nonlinear" }
                )));
            }
        }
        Ok(pde)
    }
}

impl From<CanonicalPde> for PdeJson {
    fn from(p: CanonicalPde) -> Self {
        PdeJson {
            residual: p.residual,
            bc: p.bcs,
            ic: p.ic,
            domain: p.domain,
            metadata: Some(MetadataJson {
                linear: Some(p.metadata.linear),
                max_order: Some(p.metadata.max_order),
                re: p.metadata.re,
                pe: p.metadata.pe,
                nonlocal: p.metadata.nonlocal,
            }),
        }
    }
}

/// Largest total order of a derivative chain (mixed partials sum their orders).
pub fn max_derivative_order(t: &ExprTree) -> u32 {
    fn chain(t: &ExprTree) -> u32 {
        match t.node {
            Node::TimeDeriv { order } | Node::SpaceDeriv { order, .. } => {
                order + chain(&t.children[0])
            }
            _ => 0,
        }
    }
    let here = chain(t);
    t.children
        .iter()
        .map(max_derivative_order)
        .fold(here, u32::max)
}

/// Innermost variables of derivative chains.
pub fn fields_of(t: &ExprTree) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    t.walk(&mut |n| {
        if matches!(n.node, Node::TimeDeriv { .. } | Node::SpaceDeriv { .. }) {
            n.children[0].walk(&mut |leaf| {
                if let Node::Var(v) = &leaf.node {
                    out.insert(v.clone());
                }
            });
        }
    });
    out
}

/// Polynomial degree of `t` in the given fields and their derivatives;
/// `u32::MAX` for non-polynomial dependence.
pub fn field_degree(t: &ExprTree, fields: &BTreeSet<String>) -> u32 {
    match &t.node {
        Node::Var(v) => u32::from(fields.contains(v)),
        Node::Num(_) | Node::Const(_) => 0,
        Node::TimeDeriv { .. } | Node::SpaceDeriv { .. } => field_degree(&t.children[0], fields),
        Node::Sum => t
            .children
            .iter()
            .map(|c| field_degree(c, fields))
            .max()
            .unwrap_or(0),
        Node::Product => t
            .children
            .iter()
            .map(|c| field_degree(c, fields))
            .fold(0u32, |a, b| a.saturating_add(b)),
        Node::Power => {
            let b = field_degree(&t.children[0], fields);
            if b == 0 {
                return if field_degree(&t.children[1], fields) == 0 { 0 } else { u32::MAX };
            }
            match t.children[1].as_num() {
                Some(n) if n >= 0.0 && libm::trunc(n) == n && n < 64.0 => b.saturating_mul(n as u32),
                _ => u32::MAX,
            }
        }
        Node::Func(_) => {
            if field_degree(&t.children[0], fields) == 0 {
                0
            } else {
                u32::MAX
            }
        }
    }
}

pub fn is_linear(residual: &ExprTree) -> bool {
    let fields = fields_of(residual);
    field_degree(residual, &fields) <= 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;
    use alloc::vec;

    fn heat() -> CanonicalPde {
        CanonicalPde::new(
            &parse("u_t - 0.1*u_xx").unwrap(),
            vec![BoundaryCondition {
                kind: BcKind::Dirichlet,
                axis: 1,
                side: Side::Both,
                value: ExprTree::num(0.0),
            }],
            Some(parse("sin(pi*x)").unwrap()),
            Domain::unit_box(1).with_time(0.0, 1.0),
            PhysicsHints::default(),
        )
        .unwrap()
    }

    #[test]
    fn metadata_is_derived() {
        let h = heat();
        assert!(h.metadata().linear);
        assert_eq!(h.metadata().max_order, 2);
        assert!(h.is_time_dependent());
        let b = CanonicalPde::new(
            &parse("u_t + u*u_x - 0.01*u_xx").unwrap(),
            vec![],
            None,
            Domain::unit_box(1),
            PhysicsHints::default(),
        )
        .unwrap();
        assert!(!b.metadata().linear);
        let ks = parse("u_t + u*u_x + u_xx + u_xxxx").unwrap();
        assert_eq!(max_derivative_order(&ks), 4);
        assert_eq!(max_derivative_order(&parse("u_txx").unwrap()), 3);
    }

    #[test]
    fn forcing_does_not_break_linearity() {
        let p = parse("u_xx + pi^2*sin(pi*x)").unwrap();
        assert!(is_linear(&p));
        assert!(!is_linear(&parse("u_xx + sin(u)").unwrap()));
        assert!(!is_linear(&parse("u_t - u_xx + u^3").unwrap()));
    }

    #[test]
    fn periodic_axis_must_exist() {
        let mut d = Domain::unit_box(2);
        d.periodic = vec![3];
        let r = CanonicalPde::new(
            &parse("u_xx + u_yy").unwrap(),
            vec![],
            None,
            d,
            PhysicsHints::default(),
        );
        assert!(matches!(r, Err(PdeError::Invalid(_))));
    }

    #[test]
    fn axis_names() {
        assert_eq!(Domain::unit_box(2).axis_names(), vec!["x", "y"]);
        assert_eq!(Domain::unit_box(5).axis_name(4), "x4");
    }
}
