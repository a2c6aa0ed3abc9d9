//! Candidate formulation: K provider samples, each cleaned into a parsed
//! canonical PDE, then validated and reduced to one by consensus voting.

use pinnforge_core::consensus::{extract_final_block, select, CandidateSet, ConsensusError, RawCandidate, Selection};
use pinnforge_core::pde::CanonicalPde;
use pinnforge_core::provider::{CompletionParams, CompletionProvider, ProviderError};
use pinnforge_core::semantic::SimilarityProvider;
use pinnforge_core::{from_prefix, parse, to_prefix};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PdeAgentError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("no candidate yields a PDE: {0}")]
    AllParsesFailed(String),
    #[error(transparent)]
    Consensus(#[from] ConsensusError),
}

/// Prompt for sample `k` (1-based) of `n`.
pub fn formulation_prompt(description: &str, k: usize, n: usize, repair: Option<&str>) -> String {
    let mut p = format!(
        "Translate the task below into a PDE in residual form (residual = 0).\n\
         Reason step by step, then give the answer as a JSON object in a final fenced code block \
         with fields `residual`, `bc`, `ic` and `domain`; write expressions in prefix notation.\n\
         Sample {k} of {n}.\n\nTask:\n{}\n",
        description.trim()
    );
    if let Some(r) = repair {
        p.push_str(&format!("\nA previous formulation failed downstream: {r}\n"));
    }
    p
}

/// Accepts prefix or infix notation, and `lhs = rhs` for the residual.
fn normalize_expr(text: &str, equation: bool) -> Result<String, String> {
    if let Ok(t) = from_prefix(text) {
        return Ok(to_prefix(&t));
    }
    let infix = match text.split_once('=') {
        Some((lhs, rhs)) if equation && !rhs.contains('=') => format!("({lhs}) - ({rhs})"),
        _ => text.to_string(),
    };
    parse(&infix).map(|t| to_prefix(&t)).map_err(|e| format!("`{text}`: {e}"))
}

fn normalize_field(obj: &mut serde_json::Map<String, Value>, key: &str, equation: bool) -> Result<(), String> {
    if let Some(Value::String(s)) = obj.get(key) {
        let n = normalize_expr(s, equation)?;
        obj.insert(key.to_string(), Value::String(n));
    }
    Ok(())
}

/// Parses the JSON answer block of one trajectory.
pub fn parse_candidate(block: &str) -> Result<CanonicalPde, String> {
    let mut v: Value = serde_json::from_str(block).map_err(|e| format!("answer is not JSON: {e}"))?;
    let obj = v.as_object_mut().ok_or("answer is not a JSON object")?;
    normalize_field(obj, "residual", true)?;
    normalize_field(obj, "ic", false)?;
    if let Some(Value::Array(bcs)) = obj.get_mut("bc") {
        for bc in bcs {
            if let Some(o) = bc.as_object_mut() {
                normalize_field(o, "value", false)?;
            }
        }
    }
    serde_json::from_value(v).map_err(|e| e.to_string())
}

pub fn clean(trajectory: String) -> RawCandidate {
    let Some((block, description)) = extract_final_block(&trajectory) else {
        let description = trajectory.split_whitespace().collect::<Vec<_>>().join(" ");
        return RawCandidate {
            trajectory,
            description,
            pde: None,
            rejection: Some("no fenced answer block".into()),
        };
    };
    let (pde, rejection) = match parse_candidate(&block) {
        Ok(p) => (Some(p), None),
        Err(e) => (None, Some(e)),
    };
    RawCandidate {
        trajectory,
        description,
        pde,
        rejection,
    }
}

pub fn formulate_candidates(
    description: &str,
    k: usize,
    provider: &dyn CompletionProvider,
    params: &CompletionParams,
    repair: Option<&str>,
) -> Result<Vec<RawCandidate>, PdeAgentError> {
    assert!(k >= 1, "K must be positive");
    let mut out = Vec::with_capacity(k);
    for i in 1..=k {
        let text = provider.complete(&formulation_prompt(description, i, k, repair), params)?;
        out.push(clean(text));
    }
    if out.iter().all(|c| c.pde.is_none()) {
        let reasons: Vec<String> = out.iter().filter_map(|c| c.rejection.clone()).collect();
        return Err(PdeAgentError::AllParsesFailed(reasons.join("; ")));
    }
    Ok(out)
}

/// A well-formed provider reply proposing `pde`.
pub fn answer_trajectory(pde: &CanonicalPde) -> String {
    let block = serde_json::to_string_pretty(pde).expect("PDE serializes");
    format!(
        "Identify the unknown field, the governing balance law, the domain and the conditions, \
         then write the residual.\n\n```json\n{block}\n```\n"
    )
}

/// Mock replies answering every formulation prompt for `description` with `pde`.
pub fn insert_answers(
    mock: &mut crate::provider::MockProvider,
    description: &str,
    k: usize,
    params: &CompletionParams,
    pde: &CanonicalPde,
) {
    let text = answer_trajectory(pde);
    for i in 1..=k {
        mock.insert(&formulation_prompt(description, i, k, None), params, text.clone());
    }
}

/// What the PDE agent reports for one task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CandidateReport {
    pub candidates: CandidateSet,
    pub selection: Selection,
    pub chosen: CanonicalPde,
}

pub fn run_pde_agent(
    description: &str,
    k: usize,
    alpha: f64,
    provider: &dyn CompletionProvider,
    params: &CompletionParams,
    sim: &dyn SimilarityProvider,
    repair: Option<&str>,
) -> Result<CandidateReport, PdeAgentError> {
    let raw = formulate_candidates(description, k, provider, params, repair)?;
    let candidates = CandidateSet::build(raw, alpha, sim)?;
    let (chosen, selection) = select(&candidates)?;
    Ok(CandidateReport {
        candidates,
        selection,
        chosen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_infix_prefix_and_equations() {
        let a = parse_candidate(
            r#"{"residual": "(+ (D t 1 u) (* -0.1 (D x 2 u)))", "ic": "(sin (* pi x))",
                "bc": [{"kind": "dirichlet", "axis": 1}], "domain": {"dims": 1, "extents": [[0, 1]], "time": [0, 1]}}"#,
        )
        .unwrap();
        let b = parse_candidate(
            r#"{"residual": "du/dt = 0.1*d2u/dx2", "ic": "sin(pi*x)",
                "bc": [{"kind": "dirichlet", "axis": 1, "value": "0"}], "domain": {"dims": 1, "extents": [[0, 1]], "time": [0, 1]}}"#,
        )
        .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn answers_round_trip() {
        let pde = parse_candidate(
            r#"{"residual": "(+ (D t 1 u) (* -0.1 (D x 2 u)))", "ic": "(sin (* pi x))",
                "domain": {"dims": 1, "extents": [[0, 1]], "time": [0, 1]}}"#,
        )
        .unwrap();
        assert_eq!(clean(answer_trajectory(&pde)).pde, Some(pde));
    }

    #[test]
    fn prose_without_block_is_rejected() {
        let c = clean("I think it is some kind of wave.".into());
        assert!(c.pde.is_none());
        assert_eq!(c.rejection.as_deref(), Some("no fenced answer block"));
    }
}
