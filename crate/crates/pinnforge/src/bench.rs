//! Translation benchmark: description/ground-truth pairs at four difficulty
//! levels, scored per level and per family.

use std::collections::BTreeMap;
use std::path::Path;

use pinnforge_core::matching::sym_score;
use pinnforge_core::pde::CanonicalPde;
use pinnforge_core::provider::{CompletionParams, CompletionProvider};
use pinnforge_core::semantic::{sem_score, summarize, SimilarityProvider};
use serde::{Deserialize, Serialize};

use crate::config::PdeAgentConfig;
use crate::pde_agent::{insert_answers, run_pde_agent};
use crate::provider::MockProvider;

/// The corpus shipped with the crate.
pub const BUNDLED_SAMPLE: &str = include_str!("../data/bench_sample.jsonl");

/// Scores at or above this count as exact.
const EXACT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSample {
    pub id: String,
    pub pde_family: String,
    pub level: u8,
    pub description: String,
    pub ground_truth: CanonicalPde,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("dataset line {line}: {message}")]
    DatasetMalformed { line: usize, message: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub fn parse_dataset(text: &str) -> Result<Vec<TaskSample>, BenchError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| BenchError::DatasetMalformed { line: i + 1, message };
        let s: TaskSample = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        if !(1..=4).contains(&s.level) {
            return Err(bad(format!("level {} outside 1..4", s.level)));
        }
        if s.id.is_empty() || s.description.trim().is_empty() {
            return Err(bad("empty id or description".into()));
        }
        out.push(s);
    }
    Ok(out)
}

pub fn load_dataset(path: &Path) -> Result<Vec<TaskSample>, BenchError> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

pub fn bundled_dataset() -> Vec<TaskSample> {
    parse_dataset(BUNDLED_SAMPLE).expect("bundled corpus is well formed")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub id: String,
    pub family: String,
    pub level: u8,
    pub sym: f64,
    pub sem: f64,
    /// `sym == 1`.
    pub exact: bool,
    /// Why the sample produced no PDE; scored as zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub failed: usize,
    pub sym_mean: f64,
    pub sem_mean: f64,
    /// Fraction of samples with `sym == 1`.
    pub exact_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub per_level: BTreeMap<u8, Aggregate>,
    pub per_family: BTreeMap<String, Aggregate>,
    /// Keyed `family/level`.
    pub per_family_level: BTreeMap<String, Aggregate>,
    pub rows: Vec<Row>,
}

fn aggregate<'a>(rows: impl Iterator<Item = &'a Row>) -> Aggregate {
    // Sum in id order so aggregates do not depend on dataset order.
    let mut rows: Vec<&Row> = rows.collect();
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    let n = rows.len();
    if n == 0 {
        return Aggregate::default();
    }
    let sum = |f: &dyn Fn(&Row) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / n as f64;
    Aggregate {
        count: n,
        failed: rows.iter().filter(|r| r.error.is_some()).count(),
        sym_mean: sum(&|r| r.sym),
        sem_mean: sum(&|r| r.sem),
        exact_rate: sum(&|r| f64::from(u8::from(r.exact))),
    }
}

impl BenchReport {
    pub fn from_rows(rows: Vec<Row>) -> Self {
        let mut r = BenchReport {
            rows,
            ..BenchReport::default()
        };
        let levels: Vec<u8> = r.rows.iter().map(|x| x.level).collect();
        for l in levels {
            r.per_level.entry(l).or_default();
        }
        for l in r.per_level.clone().keys() {
            r.per_level.insert(*l, aggregate(r.rows.iter().filter(|x| x.level == *l)));
        }
        let families: Vec<String> = r.rows.iter().map(|x| x.family.clone()).collect();
        for f in families {
            if r.per_family.contains_key(&f) {
                continue;
            }
            let agg = aggregate(r.rows.iter().filter(|x| x.family == f));
            r.per_family.insert(f.clone(), agg);
            for l in 1..=4u8 {
                let cell = aggregate(r.rows.iter().filter(|x| x.family == f && x.level == l));
                if cell.count > 0 {
                    r.per_family_level.insert(format!("{f}/{l}"), cell);
                }
            }
        }
        r
    }

    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["id", "family", "level", "sym", "sem", "exact"])?;
        for r in &self.rows {
            w.write_record([
                r.id.clone(),
                r.family.clone(),
                r.level.to_string(),
                r.sym.to_string(),
                r.sem.to_string(),
                r.exact.to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}

fn score_sample(
    s: &TaskSample,
    cfg: &PdeAgentConfig,
    provider: &dyn CompletionProvider,
    sim: &dyn SimilarityProvider,
) -> Result<(f64, f64), String> {
    let rep =
        run_pde_agent(&s.description, cfg.k, cfg.alpha, provider, &cfg.params, sim, None).map_err(|e| e.to_string())?;
    let sym = sym_score(&rep.chosen, &s.ground_truth);
    let sem = sem_score(&summarize(&rep.chosen), &summarize(&s.ground_truth), sim).map_err(|e| e.to_string())?;
    Ok((sym, sem))
}

/// Runs the PDE agent on every sample; a failing sample scores zero and
/// the run continues.
pub fn evaluate(
    samples: &[TaskSample],
    cfg: &PdeAgentConfig,
    provider: &dyn CompletionProvider,
    sim: &dyn SimilarityProvider,
) -> BenchReport {
    let rows = samples
        .iter()
        .map(|s| {
            let (sym, sem, error) = match score_sample(s, cfg, provider, sim) {
                Ok((sym, sem)) => (sym, sem, None),
                Err(e) => (0.0, 0.0, Some(e)),
            };
            Row {
                id: s.id.clone(),
                family: s.pde_family.clone(),
                level: s.level,
                sym,
                sem,
                exact: sym >= EXACT,
                error,
            }
        })
        .collect();
    BenchReport::from_rows(rows)
}

/// Mock replies answering each sample with `answer(sample)`.
pub fn fixture_set(
    samples: &[TaskSample],
    k: usize,
    params: &CompletionParams,
    answer: impl Fn(&TaskSample) -> CanonicalPde,
) -> MockProvider {
    let mut mock = MockProvider::new();
    for s in samples {
        insert_answers(&mut mock, &s.description, k, params, &answer(s));
    }
    mock
}

/// Every sample answered with its own ground truth.
pub fn exact_fixtures(samples: &[TaskSample], k: usize, params: &CompletionParams) -> MockProvider {
    fixture_set(samples, k, params, |s| s.ground_truth.clone())
}

/// Samples whose family name starts with `prefix` answered with `wrong`; the rest exactly.
pub fn wrong_family_fixtures(
    samples: &[TaskSample],
    k: usize,
    params: &CompletionParams,
    prefix: &str,
    wrong: &CanonicalPde,
) -> MockProvider {
    fixture_set(samples, k, params, |s| {
        if s.pde_family.starts_with(prefix) {
            wrong.clone()
        } else {
            s.ground_truth.clone()
        }
    })
}

/// Ground truth of the first sample of `family`.
pub fn family_truth(samples: &[TaskSample], family: &str) -> Option<CanonicalPde> {
    samples.iter().find(|s| s.pde_family == family).map(|s| s.ground_truth.clone())
}
