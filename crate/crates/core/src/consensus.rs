//! Candidate validation, composite scoring and consensus selection.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::canon::is_canonical;
use crate::expr::Node;
use crate::matching::sym_score;
use crate::pde::CanonicalPde;
use crate::provider::ProviderError;
use crate::semantic::{sem_score, summarize, SimilarityProvider};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "lowercase")]
pub enum Validation {
    Valid,
    Rejected(String),
}

pub fn validate_template(candidate: &CanonicalPde) -> Validation {
    let r = candidate.residual();
    if !is_canonical(r) {
        return Validation::Rejected("residual not in canonical form".into());
    }
    if r.as_num().is_some() {
        return Validation::Rejected("empty residual".into());
    }
    if !r.contains(&|t| matches!(t.node, Node::TimeDeriv { .. } | Node::SpaceDeriv { .. })) {
        return Validation::Rejected("residual has no differential operator".into());
    }
    let d = candidate.domain.dims;
    if candidate.bcs.iter().any(|bc| bc.axis == 0 || bc.axis > d) {
        return Validation::Rejected("axis out of range".into());
    }
    if candidate.is_time_dependent() && candidate.ic.is_none() {
        return Validation::Rejected("missing initial condition".into());
    }
    Validation::Valid
}

/// `alpha * sym + (1 - alpha) * sem`.
pub fn composite_score(
    ei: &CanonicalPde,
    ej: &CanonicalPde,
    alpha: f64,
    sim: &dyn SimilarityProvider,
) -> Result<f64, ProviderError> {
    let sym = sym_score(ei, ej);
    if alpha >= 1.0 {
        return Ok(sym);
    }
    let sem = sem_score(&summarize(ei), &summarize(ej), sim)?;
    Ok(combine(alpha, sym, sem))
}

pub fn combine(alpha: f64, sym: f64, sem: f64) -> f64 {
    alpha * sym + (1.0 - alpha) * sem
}

/// One provider sample after cleaning.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawCandidate {
    pub trajectory: String,
    pub description: String,
    pub pde: Option<CanonicalPde>,
    pub rejection: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateSet {
    pub raw: Vec<RawCandidate>,
    /// Indices into `raw` of the surviving candidates.
    pub surviving: Vec<usize>,
    /// Pairwise composite scores over surviving candidates.
    pub scores: Vec<Vec<f64>>,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConsensusError {
    #[error("no candidate survived validation")]
    EmptyCandidateSet,
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl CandidateSet {
    /// Validate parsed candidates and fill the score matrix.
    pub fn build(
        mut raw: Vec<RawCandidate>,
        alpha: f64,
        sim: &dyn SimilarityProvider,
    ) -> Result<Self, ProviderError> {
        let mut surviving = Vec::new();
        for (i, c) in raw.iter_mut().enumerate() {
            let Some(pde) = &c.pde else { continue };
            match validate_template(pde) {
                Validation::Valid => surviving.push(i),
                Validation::Rejected(reason) => c.rejection = Some(reason),
            }
        }
        let m = surviving.len();
        let mut scores = alloc::vec![alloc::vec![1.0; m]; m];
        for a in 0..m {
            for b in a + 1..m {
                let pa = raw[surviving[a]].pde.as_ref().unwrap();
                let pb = raw[surviving[b]].pde.as_ref().unwrap();
                let s = composite_score(pa, pb, alpha, sim)?;
                scores[a][b] = s;
                scores[b][a] = s;
            }
        }
        Ok(CandidateSet {
            raw,
            surviving,
            scores,
            alpha,
        })
    }

    pub fn surviving_pde(&self, k: usize) -> &CanonicalPde {
        self.raw[self.surviving[k]].pde.as_ref().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    /// Index among surviving candidates.
    pub winner: usize,
    /// Index into the raw candidate list.
    pub raw_index: usize,
    pub averages: Vec<f64>,
}

/// Highest mean off-diagonal score; ties go to the lowest index.
pub fn consensus_select(scores: &[Vec<f64>]) -> Result<(usize, Vec<f64>), ConsensusError> {
    let m = scores.len();
    if m == 0 {
        return Err(ConsensusError::EmptyCandidateSet);
    }
    if m == 1 {
        return Ok((0, alloc::vec![1.0]));
    }
    let averages: Vec<f64> = (0..m)
        .map(|i| {
            (0..m).filter(|&j| j != i).map(|j| scores[i][j]).sum::<f64>() / (m - 1) as f64
        })
        .collect();
    let mut best = 0;
    for i in 1..m {
        if averages[i] > averages[best] {
            best = i;
        }
    }
    Ok((best, averages))
}

pub fn select(set: &CandidateSet) -> Result<(CanonicalPde, Selection), ConsensusError> {
    let (winner, averages) = consensus_select(&set.scores)?;
    Ok((
        set.surviving_pde(winner).clone(),
        Selection {
            winner,
            raw_index: set.surviving[winner],
            averages,
        },
    ))
}

/// Final fenced code block of a provider trajectory, and the prose before it
/// with whitespace collapsed.
pub fn extract_final_block(text: &str) -> Option<(String, String)> {
    let mut blocks: Vec<(usize, String)> = Vec::new();
    let mut open: Option<(usize, String)> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim();
        match &mut open {
            None if trimmed.starts_with("```") => open = Some((offset, String::new())),
            Some(_) if trimmed.starts_with("```") => {
                blocks.push(open.take().unwrap());
            }
            Some((_, body)) => body.push_str(line),
            None => {}
        }
        offset += line.len();
    }
    let (start, body) = blocks.pop()?;
    let description = text[..start].split_whitespace().collect::<Vec<_>>().join(" ");
    Some((body.trim().to_string(), description))
}

/// Mean of the off-diagonal row entries, used by property tests.
pub fn row_average(scores: &[Vec<f64>], i: usize) -> f64 {
    let m = scores.len();
    if m <= 1 {
        return 1.0;
    }
    (0..m).filter(|&j| j != i).map(|j| scores[i][j]).sum::<f64>() / (m - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse;
    use crate::pde::{BcKind, BoundaryCondition, Domain, PhysicsHints, Side};
    use crate::expr::ExprTree;
    use crate::semantic::BaselineSimilarity;
    use alloc::vec;

    fn heat(ic: bool, axis: u32, dims: u32) -> CanonicalPde {
        CanonicalPde::new(
            &parse("u_t - 0.1*u_xx").unwrap(),
            vec![BoundaryCondition {
                kind: BcKind::Dirichlet,
                axis,
                side: Side::Both,
                value: ExprTree::num(0.0),
            }],
            ic.then(|| parse("sin(pi*x)").unwrap()),
            Domain::unit_box(dims).with_time(0.0, 1.0),
            PhysicsHints::default(),
        )
        .unwrap()
    }

    #[test]
    fn template_validation() {
        assert_eq!(validate_template(&heat(true, 1, 1)), Validation::Valid);
        assert_eq!(
            validate_template(&heat(false, 1, 1)),
            Validation::Rejected("missing initial condition".into())
        );
        assert_eq!(
            validate_template(&heat(true, 3, 2)),
            Validation::Rejected("axis out of range".into())
        );
    }

    #[test]
    fn composite_degenerate_weights() {
        let a = heat(true, 1, 1);
        let b = CanonicalPde::new(
            &parse("u_tt - 0.1*u_xx").unwrap(),
            vec![],
            None,
            Domain::unit_box(1),
            PhysicsHints::default(),
        )
        .unwrap();
        let sim = BaselineSimilarity::default();
        let sym = sym_score(&a, &b);
        let sem = sim.score(&summarize(&a), &summarize(&b));
        assert_eq!(composite_score(&a, &b, 1.0, &sim).unwrap(), sym);
        assert_eq!(composite_score(&a, &b, 0.0, &sim).unwrap(), sem);
        assert!((combine(0.5, 0.8, 0.6) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn selection_rules() {
        assert_eq!(consensus_select(&[vec![1.0]]).unwrap().0, 0);
        let ones = vec![vec![1.0; 3]; 3];
        assert_eq!(consensus_select(&ones).unwrap().0, 0);
        assert_eq!(consensus_select(&[]), Err(ConsensusError::EmptyCandidateSet));
    }

    #[test]
    fn final_block_extraction() {
        let text = "Think.\n```\nfirst\n```\nMore   thinking\nhere.\n```pde\n{\"a\": 1}\n```\ntrailer";
        let (block, desc) = extract_final_block(text).unwrap();
        assert_eq!(block, "{\"a\": 1}");
        assert_eq!(desc, "Think. ``` first ``` More thinking here.");
        assert!(extract_final_block("no fences").is_none());
        assert!(extract_final_block("```\nunterminated").is_none());
    }
}
