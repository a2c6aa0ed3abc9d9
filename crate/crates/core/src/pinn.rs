//! Architecture selection: PDE feature vectors, architecture capability
//! vectors, weighted cosine matching and history reuse.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::consensus::composite_score;
use crate::pde::CanonicalPde;
use crate::semantic::BaselineSimilarity;

/// `(periodicity, geometry complexity, multi-scale demand)`, each in `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdeFeatures {
    pub per: f64,
    pub geo: f64,
    pub ms: f64,
}

impl PdeFeatures {
    pub fn as_array(&self) -> [f64; 3] {
        [self.per, self.geo, self.ms]
    }
}

/// Coefficients of the feature formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureCoefficients {
    pub lambda_geo: f64,
    pub lambda_disc: f64,
    /// Weight of the high-order indicator (m >= 3).
    pub a: f64,
    /// Weight of the nonlinearity indicator.
    pub b: f64,
    /// Weight of `log(1 + Re/Pe)`.
    pub c: f64,
    /// Weight of the nonlocal/fractional indicator.
    pub e: f64,
    pub eta: f64,
}

impl Default for FeatureCoefficients {
    fn default() -> Self {
        FeatureCoefficients {
            lambda_geo: 0.5,
            lambda_disc: 0.5,
            a: 2.0,
            b: 2.0,
            c: 1.0,
            e: 2.0,
            eta: 0.5,
        }
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// The governing nondimensional number: the larger of Re and Pe when both
/// are given, zero when neither is.
fn nondimensional_number(re: Option<f64>, pe: Option<f64>) -> f64 {
    re.into_iter().chain(pe).fold(0.0, f64::max)
}

pub fn extract_features(e: &CanonicalPde, k: &FeatureCoefficients) -> PdeFeatures {
    let d = e.domain.dims.max(1) as f64;
    let mut periodic = e.domain.periodic.clone();
    periodic.sort_unstable();
    periodic.dedup();
    let per = periodic.len() as f64 / d;

    let geo = (k.lambda_geo * e.domain.geometry.code()
        + k.lambda_disc * e.domain.discretization.code())
    .clamp(0.0, 1.0);

    let meta = e.metadata();
    let ind = |c: bool| if c { 1.0 } else { 0.0 };
    let ratio = nondimensional_number(meta.re, meta.pe);
    let z = k.a * ind(meta.max_order >= 3)
        + k.b * ind(!meta.linear)
        + k.c * libm::log1p(ratio)
        + k.e * ind(meta.nonlocal);
    let ms = (logistic(z) * k.eta).clamp(0.0, 1.0);
    PdeFeatures {
        per: per.clamp(0.0, 1.0),
        geo,
        ms,
    }
}

/// Capability vector of one architecture, components in `[0.1, 0.9]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchCapability {
    pub name: String,
    pub per: f64,
    pub geo: f64,
    pub ms: f64,
}

impl ArchCapability {
    pub fn new(name: &str, per: f64, geo: f64, ms: f64) -> Result<Self, PinnError> {
        let cap = ArchCapability {
            name: name.to_string(),
            per,
            geo,
            ms,
        };
        if cap.as_array().iter().any(|v| !(0.1..=0.9).contains(v)) {
            return Err(PinnError::CapabilityOutOfRange(cap.name));
        }
        Ok(cap)
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.per, self.geo, self.ms]
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PinnError {
    #[error("unknown architecture `{0}`")]
    UnknownArchitecture(String),
    #[error("capability of `{0}` outside [0.1, 0.9]")]
    CapabilityOutOfRange(String),
    #[error("zero-norm vector in weighted cosine")]
    DegenerateVector,
    #[error("match weights must be strictly positive")]
    NonPositiveWeight,
    #[error("architecture registry is empty")]
    EmptyRegistry,
}

/// Ordered architecture registry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Registry {
    pub entries: Vec<ArchCapability>,
}

impl Default for Registry {
    fn default() -> Self {
        let row = |n, p, g, m| ArchCapability::new(n, p, g, m).expect("shipped table in range");
        Registry {
            entries: alloc::vec![
                row("Fourier-MLP", 0.9, 0.2, 0.5),
                row("GNN", 0.1, 0.8, 0.5),
                row("Transformer", 0.2, 0.5, 0.7),
                row("CNN", 0.2, 0.4, 0.3),
                row("MLP", 0.1, 0.2, 0.4),
            ],
        }
    }
}

impl Registry {
    pub fn capability_of(&self, arch: &str) -> Result<&ArchCapability, PinnError> {
        self.entries
            .iter()
            .find(|a| a.name == arch)
            .ok_or_else(|| PinnError::UnknownArchitecture(arch.to_string()))
    }

    pub fn validate(&self) -> Result<(), PinnError> {
        if self.entries.is_empty() {
            return Err(PinnError::EmptyRegistry);
        }
        for a in &self.entries {
            ArchCapability::new(&a.name, a.per, a.geo, a.ms)?;
        }
        Ok(())
    }

    /// Moves the capability components of `arch` toward a realized quality
    /// score, each in proportion to how strongly the PDE exercises that axis:
    /// `a_i <- (1 - rate*phi_i) a_i + rate*phi_i*score`, clipped to `[0.1, 0.9]`.
    pub fn refine(
        &mut self,
        arch: &str,
        phi: &PdeFeatures,
        score: f64,
        rate: f64,
    ) -> Result<(), PinnError> {
        let entry = self
            .entries
            .iter_mut()
            .find(|a| a.name == arch)
            .ok_or_else(|| PinnError::UnknownArchitecture(arch.to_string()))?;
        let f = phi.as_array();
        let mut a = entry.as_array();
        for i in 0..3 {
            let step = (rate * f[i]).clamp(0.0, 1.0);
            a[i] = ((1.0 - step) * a[i] + step * score).clamp(0.1, 0.9);
        }
        [entry.per, entry.geo, entry.ms] = a;
        Ok(())
    }
}

/// Shipped capability table lookup.
pub fn capability_of(arch: &str) -> Result<ArchCapability, PinnError> {
    Registry::default().capability_of(arch).cloned()
}

/// Diagonal weights on (periodicity, geometry, multi-scale).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchWeights {
    pub per: f64,
    pub geo: f64,
    pub ms: f64,
}

impl Default for MatchWeights {
    fn default() -> Self {
        MatchWeights {
            per: 1.0,
            geo: 2.0,
            ms: 3.0,
        }
    }
}

impl MatchWeights {
    pub fn identity() -> Self {
        MatchWeights {
            per: 1.0,
            geo: 1.0,
            ms: 1.0,
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        MatchWeights {
            per: self.per * c,
            geo: self.geo * c,
            ms: self.ms * c,
        }
    }

    pub fn validate(&self) -> Result<(), PinnError> {
        if [self.per, self.geo, self.ms].iter().all(|w| *w > 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(PinnError::NonPositiveWeight)
        }
    }
}

/// Weighted cosine `(W phi)ᵀ psi / (‖W phi‖ ‖psi‖)`.
pub fn match_score(
    phi: &PdeFeatures,
    psi: &ArchCapability,
    w: &MatchWeights,
) -> Result<f64, PinnError> {
    let wphi = [w.per * phi.per, w.geo * phi.geo, w.ms * phi.ms];
    let psi = psi.as_array();
    let norm = |v: &[f64; 3]| libm::sqrt(v.iter().map(|x| x * x).sum::<f64>());
    let (nw, np) = (norm(&wphi), norm(&psi));
    if nw == 0.0 || np == 0.0 {
        return Err(PinnError::DegenerateVector);
    }
    let dot: f64 = wphi.iter().zip(&psi).map(|(a, b)| a * b).sum();
    Ok(dot / (nw * np))
}

/// A previously solved PDE and the architecture it ran with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistoryRecord {
    pub pde: CanonicalPde,
    pub arch: String,
    pub score: f64,
    pub timestamp: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Reused,
    Matched,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchScore {
    pub arch: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchSelection {
    pub arch: String,
    pub provenance: Provenance,
    pub features: PdeFeatures,
    /// Registry-order scores; empty when a degenerate feature vector makes
    /// matching undefined.
    pub scores: Vec<ArchScore>,
    /// Composite similarity of the reused history record, if any.
    pub reuse_similarity: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub weights: MatchWeights,
    pub reuse_threshold: f64,
    /// Composite-score weight used for the history similarity test.
    pub alpha: f64,
    pub features: FeatureCoefficients,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        SelectionConfig {
            weights: MatchWeights::default(),
            reuse_threshold: 0.95,
            alpha: 0.6,
            features: FeatureCoefficients::default(),
        }
    }
}

/// History reuse first (most recent qualifying record), then the registry
/// argmax of [`match_score`] with ties broken by registry order. Names in
/// `exclude` are skipped on both paths.
pub fn select_architecture(
    e: &CanonicalPde,
    registry: &Registry,
    history: &[HistoryRecord],
    cfg: &SelectionConfig,
    exclude: &[String],
) -> Result<ArchSelection, PinnError> {
    registry.validate()?;
    cfg.weights.validate()?;
    let features = extract_features(e, &cfg.features);
    let allowed = |name: &str| !exclude.iter().any(|x| x == name);

    let sim = BaselineSimilarity::default();
    let mut best_hist: Option<(u64, usize, f64)> = None;
    for (i, rec) in history.iter().enumerate() {
        if !allowed(&rec.arch) || registry.capability_of(&rec.arch).is_err() {
            continue;
        }
        let s = composite_score(e, &rec.pde, cfg.alpha, &sim).unwrap_or(0.0);
        if s >= cfg.reuse_threshold {
            let newer = match best_hist {
                None => true,
                Some((ts, _, _)) => rec.timestamp >= ts,
            };
            if newer {
                best_hist = Some((rec.timestamp, i, s));
            }
        }
    }

    let mut scores = Vec::with_capacity(registry.entries.len());
    let mut degenerate = false;
    for cap in &registry.entries {
        match match_score(&features, cap, &cfg.weights) {
            Ok(s) => scores.push(ArchScore {
                arch: cap.name.clone(),
                score: s,
            }),
            Err(PinnError::DegenerateVector) => {
                degenerate = true;
                break;
            }
            Err(other) => return Err(other),
        }
    }
    if degenerate {
        scores.clear();
    }

    if let Some((_, i, s)) = best_hist {
        return Ok(ArchSelection {
            arch: history[i].arch.clone(),
            provenance: Provenance::Reused,
            features,
            scores,
            reuse_similarity: Some(s),
        });
    }

    // A zero feature vector has no preferred direction; fall back to the
    // first allowed entry.
    let mut best: Option<&ArchScore> = None;
    for s in scores.iter().filter(|s| allowed(&s.arch)) {
        if best.is_none_or(|b| s.score > b.score) {
            best = Some(s);
        }
    }
    let arch = match best {
        Some(b) => b.arch.clone(),
        None => registry
            .entries
            .iter()
            .find(|a| allowed(&a.name))
            .map(|a| a.name.clone())
            .ok_or(PinnError::EmptyRegistry)?,
    };
    Ok(ArchSelection {
        arch,
        provenance: Provenance::Matched,
        features,
        scores,
        reuse_similarity: None,
    })
}
