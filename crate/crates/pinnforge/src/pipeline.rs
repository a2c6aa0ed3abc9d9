//! The four-agent pipeline as an explicit state machine, its run report,
//! and deterministic replay.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};


use pinnforge_core::codegen::{
    assemble, execute, generate_module, CodegenError, ExecutionPlan, GenContext, Manifest, ModuleKind, ModuleSource, ProgramBundle, Source,
    Target,
};
use pinnforge_core::feedback::{refine_decision, score_trace, Decision, Directive, DirectiveTarget, QualityScore};
use pinnforge_core::pde::CanonicalPde;
use pinnforge_core::pinn::{select_architecture, ArchSelection, HistoryRecord};
use pinnforge_core::provider::ProviderError;
use pinnforge_core::semantic::SimilarityProvider;
use pinnforge_core::trainer::{Activation, LossTrace, NetSpec, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::config::{CodeSource, Config, ConfigError};
use crate::formats::{to_pretty, trace_to_jsonl, write_json, write_text, FormatError};
use crate::history;
use crate::localize::localize_error;
use crate::pde_agent::{run_pde_agent, CandidateReport, PdeAgentError};
use crate::provider::{sha256_hex, Backend, MockProvider, ProviderSummary, Recorded};

pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Formulating,
    SelectingArch,
    Generating,
    Executing,
    Scoring,
    Refining,
    Done,
    Failed,
}

impl Phase {
    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Done | Phase::Failed)
    }
}

/// The fixed transition graph; any live phase may also stop at `Failed`.
pub fn is_legal(from: Phase, to: Phase) -> bool {
    use Phase::*;
    if to == Failed {
        return !from.is_terminal();
    }
    matches!(
        (from, to),
        (Formulating, SelectingArch)
            | (SelectingArch, Generating)
            | (Generating, Executing)
            | (Executing, Scoring)
            | (Scoring, Done)
            | (Scoring, Refining)
            | (Refining, Generating)
            | (Refining, SelectingArch)
            | (Refining, Formulating)
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Done,
    Failed,
}

/// One generate → execute → score → decide cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub arch: String,
    pub net: NetSpec,
    pub lr: f64,
    /// Modules produced in this iteration.
    pub regenerated: Vec<ModuleKind>,
    /// sha256 of every module source executed in this iteration.
    pub modules: BTreeMap<ModuleKind, String>,
    pub failure: Option<String>,
    pub steps: usize,
    pub final_loss: Option<f64>,
    pub trace_sha256: Option<String>,
    pub score: Option<QualityScore>,
    pub decision: Option<Decision>,
    /// What the feedback agent asked for next.
    pub directive: Option<Directive>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub description: String,
    pub seed: u64,
    pub config: Config,
    /// History records visible to architecture selection.
    pub history_used: usize,
    pub candidates: Option<CandidateReport>,
    pub chosen_pde: Option<CanonicalPde>,
    pub architecture: Option<ArchSelection>,
    pub phases: Vec<Phase>,
    pub iterations: Vec<IterationRecord>,
    pub refinements: usize,
    /// Manifest of the last accepted bundle.
    pub bundle: Option<Manifest>,
    pub bundle_verified: bool,
    pub final_score: Option<QualityScore>,
    pub accepted_scores: Vec<f64>,
    pub status: Status,
    pub failure: Option<String>,
    pub provider: ProviderSummary,
    pub wall_clock_ms: u64,
}

impl PartialEq for CandidateReport {
    fn eq(&self, other: &Self) -> bool {
        serde_json::to_value(self).ok() == serde_json::to_value(other).ok()
    }
}

impl RunReport {
    /// Every directive the feedback agent issued.
    pub fn directives(&self) -> Vec<&Directive> {
        self.iterations.iter().filter_map(|i| i.directive.as_ref()).collect()
    }

    /// The report as JSON with wall-clock fields zeroed.
    pub fn canonical_json(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_ms = 0;
        to_pretty(&r)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("history cache: {0}")]
    History(#[from] std::io::Error),
    #[error("replay mismatch: {0}")]
    ReplayMismatch(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// Inputs of a run besides the task text.
pub struct RunContext<'a> {
    pub config: &'a Config,
    pub seed: u64,
    pub provider: &'a Recorded,
    pub sim: &'a dyn SimilarityProvider,
    /// Loads at most this many history records; `None` reads them all.
    pub history_limit: Option<usize>,
    /// Append the outcome to the history cache.
    pub record_history: bool,
}

/// Network and optimizer settings a refinement may change.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Knobs {
    net: NetSpec,
    train: TrainConfig,
}

struct Accepted {
    bundle: ProgramBundle,
    knobs: Knobs,
    score: QualityScore,
    trace: LossTrace,
}

/// Builtin executions train an MLP stand-in; Fourier features become sine activations.
pub fn net_for(arch: &str, inputs: usize, cfg: &Config) -> NetSpec {
    let mut net = NetSpec::new(inputs, cfg.trainer.depth, cfg.trainer.width);
    net.activation = if arch == "Fourier-MLP" {
        Activation::Sine
    } else {
        cfg.trainer.activation
    };
    net
}

fn inputs_of(pde: &CanonicalPde) -> usize {
    pde.domain.dims as usize + usize::from(pde.is_time_dependent())
}

const METRIC_NAMES: [&str; 4] = ["convergence", "accuracy", "complexity", "robustness"];

/// After a successful run: target the weakest normalized metric not yet
/// tried since the last accepted program.
pub fn refinement_directive(score: &QualityScore, tried: &[&str]) -> Option<Directive> {
    let m = [score.conv, score.acc, score.comp, score.rob];
    let weakest = (0..4)
        .filter(|i| !tried.contains(&METRIC_NAMES[*i]))
        .min_by(|a, b| m[*a].total_cmp(&m[*b]))?;
    let kind = match weakest {
        0 | 3 => ModuleKind::TrainingLoop,
        _ => ModuleKind::Model,
    };
    Some(Directive {
        target: DirectiveTarget::Module(kind),
        reason: format!("refine: improve {}", METRIC_NAMES[weakest]),
        signature: "refinement".into(),
    })
}

/// Template-mode refinement policy: a deterministic change of the knob the
/// weakest metric depends on.
fn tweak(knobs: Knobs, directive: &Directive) -> Knobs {
    let mut k = knobs;
    match directive.reason.as_str() {
        "refine: improve convergence" => k.train.lr *= 2.0,
        "refine: improve robustness" => k.train.lr *= 0.5,
        "refine: improve accuracy" => k.net.width = (k.net.width * 2).min(256),
        "refine: improve complexity" => k.net.width = (k.net.width / 2).max(4),
        _ => {}
    }
    k
}

/// Prompt note attached to a regeneration request.
pub fn repair_note(d: &Directive) -> String {
    d.reason.clone()
}

fn digests(modules: &[ModuleSource]) -> BTreeMap<ModuleKind, String> {
    modules.iter().map(|m| (m.kind, sha256_hex(m.text.as_bytes()))).collect()
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

struct Machine<'a> {
    rc: &'a RunContext<'a>,
    description: &'a str,
    report: RunReport,
    phase: Phase,
    pde: Option<CanonicalPde>,
    arch: Option<String>,
    excluded: Vec<String>,
    knobs: Option<Knobs>,
    /// Modules of the program under construction.
    modules: Vec<ModuleSource>,
    /// Kinds to regenerate, with the note for the provider.
    pending: Vec<ModuleKind>,
    repair: Option<String>,
    formulation_repair: Option<String>,
    assembled: Option<Result<ProgramBundle, String>>,
    executed: Option<Result<LossTrace, String>>,
    accepted: Option<Accepted>,
    /// Metrics refined since the last acceptance.
    tried: Vec<&'static str>,
    next_directive: Option<Directive>,
    history: Vec<HistoryRecord>,
}

impl<'a> Machine<'a> {
    fn goto(&mut self, next: Phase) {
        debug_assert!(is_legal(self.phase, next), "{:?} -> {:?}", self.phase, next);
        self.phase = next;
        self.report.phases.push(next);
    }

    fn fail(&mut self, why: String) {
        self.report.failure = Some(why);
        self.goto(Phase::Failed);
    }

    fn cfg(&self) -> &Config {
        self.rc.config
    }

    fn formulate(&mut self) -> Result<(), PipelineError> {
        let c = &self.cfg().pde_agent;
        let out = run_pde_agent(
            self.description,
            c.k,
            c.alpha,
            self.rc.provider,
            &c.params,
            self.rc.sim,
            self.formulation_repair.as_deref(),
        );
        match out {
            Ok(rep) => {
                self.pde = Some(rep.chosen.clone());
                self.report.chosen_pde = Some(rep.chosen.clone());
                self.report.candidates = Some(rep);
                self.excluded.clear();
                self.goto(Phase::SelectingArch);
                Ok(())
            }
            Err(PdeAgentError::Provider(e)) => Err(e.into()),
            Err(e) => {
                self.fail(e.to_string());
                Ok(())
            }
        }
    }

    fn select_arch(&mut self) -> Result<(), PipelineError> {
        let pde = self.pde.clone().expect("formulated");
        let registry = self.cfg().registry()?;
        match select_architecture(&pde, &registry, &self.history, &self.cfg().selection(), &self.excluded) {
            Ok(sel) => {
                let net = net_for(&sel.arch, inputs_of(&pde), self.cfg());
                let mut train = self.cfg().trainer.train;
                train.seed = self.rc.seed;
                self.knobs = Some(Knobs { net, train });
                self.arch = Some(sel.arch.clone());
                self.report.architecture = Some(sel);
                self.modules.clear();
                self.accepted = None;
                self.pending = ModuleKind::ALL.to_vec();
                self.repair = None;
                self.goto(Phase::Generating);
            }
            Err(e) => self.fail(format!("architecture selection: {e}")),
        }
        Ok(())
    }

    fn generate(&mut self) -> Result<(), PipelineError> {
        let pde = self.pde.clone().expect("formulated");
        let arch = self.arch.clone().expect("selected");
        let knobs = self.knobs.expect("selected");
        let cfg = self.rc.config;
        let ctx = GenContext {
            pde: &pde,
            arch: &arch,
            net: knobs.net,
            train: knobs.train,
        };
        let mut produced = Vec::new();
        let mut failure = None;
        for kind in self.pending.clone() {
            let source = match cfg.code_agent.source {
                CodeSource::Template => Source::Template(cfg.code_agent.target),
                CodeSource::Provider => Source::Provider {
                    provider: self.rc.provider,
                    params: cfg.code_agent.params,
                    target: cfg.code_agent.target,
                    repair: self.repair.as_deref(),
                },
            };
            match generate_module(kind, &ctx, source) {
                Ok(m) => produced.push(m),
                Err(CodegenError::Provider(e)) => return Err(e.into()),
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            }
        }
        for m in &produced {
            match self.modules.iter_mut().find(|x| x.kind == m.kind) {
                Some(slot) => *slot = m.clone(),
                None => self.modules.push(m.clone()),
            }
        }
        self.report.iterations.push(IterationRecord {
            iteration: self.report.iterations.len() + 1,
            arch,
            net: knobs.net,
            lr: knobs.train.lr,
            regenerated: produced.iter().map(|m| m.kind).collect(),
            modules: digests(&self.modules),
            failure: None,
            steps: 0,
            final_loss: None,
            trace_sha256: None,
            score: None,
            decision: None,
            directive: None,
        });
        self.assembled = Some(match failure {
            Some(f) => Err(f),
            None => assemble(self.modules.clone(), &pde, cfg.code_agent.verify_threshold).map_err(|e| e.to_string()),
        });
        self.goto(Phase::Executing);
        Ok(())
    }

    fn run_bundle(&mut self) {
        let pde = self.pde.clone().expect("formulated");
        self.executed = Some(match self.assembled.take().expect("generated") {
            Err(e) => Err(e),
            Ok(bundle) => {
                let out = ExecutionPlan::from_bundle(&bundle).map_err(|e| e.to_string()).and_then(|plan| {
                    // Provider-written modules may change the settings; keep what actually ran.
                    self.knobs = Some(Knobs {
                        net: plan.net,
                        train: plan.train,
                    });
                    if let Some(it) = self.report.iterations.last_mut() {
                        it.net = plan.net;
                        it.lr = plan.train.lr;
                    }
                    execute(&plan, &pde, None).map_err(|e| e.to_string())
                });
                out.map(|exec| {
                    self.assembled = Some(Ok(bundle));
                    exec.trace
                })
            }
        });
        self.goto(Phase::Scoring);
    }

    fn score(&mut self) {
        let knobs = self.knobs.expect("selected");
        let cfg = self.rc.config;
        let executed = self.executed.take().expect("executed");
        let it = self.report.iterations.last_mut().expect("iteration recorded");
        let trace = match executed {
            Err(text) => {
                it.failure = Some(text.clone());
                if let Some(acc) = &self.accepted {
                    // A refinement broke a working program: fall back to it.
                    it.decision = Some(Decision::Revert);
                    self.modules = acc.bundle.modules.clone();
                    self.knobs = Some(acc.knobs);
                    self.after_success_decision();
                    return;
                }
                let d = localize_error(&text);
                it.directive = Some(d.clone());
                self.next_directive = Some(d);
                self.goto(Phase::Refining);
                return;
            }
            Ok(t) => t,
        };
        it.steps = trace.records.len();
        it.final_loss = trace.records.last().map(|r| r.loss);
        it.trace_sha256 = Some(sha256_hex(trace_to_jsonl(&trace).as_bytes()));
        let params = knobs.net.parameter_count();
        let reference = NetSpec::new(knobs.net.inputs, cfg.trainer.reference_depth, cfg.trainer.reference_width);
        let max_params = reference.parameter_count().max(params);
        let losses = trace.losses();
        let grad = trace.records.last().map(|r| r.grad_norm).unwrap_or(0.0);
        let mse = trace.final_mse.unwrap_or(f64::INFINITY);
        let score = match score_trace(&losses, grad, mse, params, max_params, &cfg.feedback) {
            Ok(s) => s,
            Err(e) => {
                let text = format!("metric computation fault: {e}");
                it.failure = Some(text.clone());
                let d = localize_error(&text);
                it.directive = Some(d.clone());
                self.next_directive = Some(d);
                self.goto(Phase::Refining);
                return;
            }
        };
        it.score = Some(score);
        let decision = refine_decision(score.s, self.accepted.as_ref().map(|a| a.score.s));
        it.decision = Some(decision);
        match decision {
            Decision::Accept => {
                let bundle = self.assembled.take().expect("assembled").expect("executed bundles assembled");
                self.report.accepted_scores.push(score.s);
                self.tried.clear();
                self.accepted = Some(Accepted {
                    bundle,
                    knobs,
                    score,
                    trace,
                });
            }
            Decision::Revert => {
                let acc = self.accepted.as_ref().expect("revert needs an accepted bundle");
                self.modules = acc.bundle.modules.clone();
                self.knobs = Some(acc.knobs);
            }
        }
        self.after_success_decision();
    }

    fn after_success_decision(&mut self) {
        if self.report.refinements >= self.cfg().caps.max_refinements {
            self.goto(Phase::Done);
            return;
        }
        let score = self.accepted.as_ref().expect("accepted").score;
        let Some(d) = refinement_directive(&score, &self.tried) else {
            self.goto(Phase::Done);
            return;
        };
        let metric = d.reason.trim_start_matches("refine: improve ");
        if let Some(m) = METRIC_NAMES.iter().find(|m| **m == metric) {
            self.tried.push(m);
        }
        self.report.iterations.last_mut().expect("iteration").directive = Some(d.clone());
        self.report.refinements += 1;
        self.next_directive = Some(d);
        self.goto(Phase::Refining);
    }

    fn refine(&mut self) {
        let d = self.next_directive.take().expect("directive");
        match d.target {
            DirectiveTarget::Module(kind) => {
                if d.signature == "refinement" && self.cfg().code_agent.source == CodeSource::Template {
                    self.knobs = self.knobs.map(|k| tweak(k, &d));
                }
                self.pending = vec![kind];
                self.repair = Some(repair_note(&d));
                self.goto(Phase::Generating);
            }
            DirectiveTarget::PinnAgent => {
                if let Some(a) = self.arch.take() {
                    self.excluded.push(a);
                }
                self.goto(Phase::SelectingArch);
            }
            DirectiveTarget::PdeAgent => {
                self.formulation_repair = Some(d.reason.clone());
                self.goto(Phase::Formulating);
            }
        }
    }
}

pub fn run_pipeline(description: &str, rc: &RunContext<'_>) -> Result<(RunReport, Option<FinalArtifacts>), PipelineError> {
    let started = Instant::now();
    rc.config.validate()?;
    if rc.config.code_agent.target != Target::Builtin {
        return Err(ConfigError::Invalid(
            "`run` executes builtin bundles only; use `generate` for the external runtime".into(),
        )
        .into());
    }
    let mut history = match &rc.config.pinn_agent.history {
        Some(p) => history::load(p)?,
        None => Vec::new(),
    };
    if let Some(n) = rc.history_limit {
        history.truncate(n);
    }
    let mut m = Machine {
        rc,
        description,
        report: RunReport {
            version: REPORT_VERSION,
            description: description.to_string(),
            seed: rc.seed,
            config: rc.config.clone(),
            history_used: history.len(),
            candidates: None,
            chosen_pde: None,
            architecture: None,
            phases: vec![Phase::Formulating],
            iterations: Vec::new(),
            refinements: 0,
            bundle: None,
            bundle_verified: false,
            final_score: None,
            accepted_scores: Vec::new(),
            status: Status::Failed,
            failure: None,
            provider: ProviderSummary::default(),
            wall_clock_ms: 0,
        },
        phase: Phase::Formulating,
        pde: None,
        arch: None,
        excluded: Vec::new(),
        knobs: None,
        modules: Vec::new(),
        pending: Vec::new(),
        repair: None,
        formulation_repair: None,
        assembled: None,
        executed: None,
        accepted: None,
        tried: Vec::new(),
        next_directive: None,
        history,
    };
    let hard_cap = rc.config.caps.hard_cap;
    while !m.phase.is_terminal() {
        match m.phase {
            Phase::Formulating => m.formulate()?,
            Phase::SelectingArch => m.select_arch()?,
            Phase::Generating => {
                if m.report.iterations.len() >= hard_cap {
                    m.fail(format!("hard cap of {hard_cap} iterations reached"));
                } else {
                    m.generate()?;
                }
            }
            Phase::Executing => m.run_bundle(),
            Phase::Scoring => m.score(),
            Phase::Refining => m.refine(),
            Phase::Done | Phase::Failed => unreachable!(),
        }
    }
    let mut report = m.report;
    let mut artifacts = None;
    if let Some(acc) = m.accepted {
        // The cap ends a run that already holds a working program as done.
        report.status = Status::Done;
        if m.phase == Phase::Failed {
            report.phases.pop();
            report.phases.push(Phase::Done);
        }
        report.bundle = Some(acc.bundle.manifest(&acc.knobs.train));
        report.bundle_verified = acc.bundle.verification.verified && acc.bundle.interfaces_ok;
        report.final_score = Some(acc.score);
        artifacts = Some(FinalArtifacts {
            bundle: acc.bundle,
            train: acc.knobs.train,
            trace: acc.trace,
        });
    } else if m.phase == Phase::Done {
        report.status = Status::Done;
    }
    if rc.record_history && report.status == Status::Done {
        if let (Some(path), Some(pde), Some(arch), Some(s)) = (
            &rc.config.pinn_agent.history,
            &report.chosen_pde,
            &report.architecture,
            &report.final_score,
        ) {
            history::append(
                path,
                &HistoryRecord {
                    pde: pde.clone(),
                    arch: arch.arch.clone(),
                    score: s.s,
                    timestamp: now_secs(),
                },
            )?;
        }
    }
    report.provider = rc.provider.summary();
    report.wall_clock_ms = started.elapsed().as_millis() as u64;
    Ok((report, artifacts))
}

/// The accepted program of a finished run.
#[derive(Debug, Clone)]
pub struct FinalArtifacts {
    pub bundle: ProgramBundle,
    pub train: TrainConfig,
    pub trace: LossTrace,
}

/// Bundle directory: one source file per module plus `manifest.json`.
pub fn write_bundle(dir: &Path, bundle: &ProgramBundle, train: &TrainConfig) -> Result<Manifest, FormatError> {
    let manifest = bundle.manifest(train);
    for m in &bundle.modules {
        write_text(&dir.join(&manifest.files[&m.kind]), &m.text)?;
    }
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Re-runs a mock-provider report against `fixtures` and requires an
/// identical report, wall-clock aside.
pub fn replay(report: &RunReport, fixtures: MockProvider, sim: &dyn SimilarityProvider) -> Result<RunReport, PipelineError> {
    if report.provider.kind != "mock" {
        return Err(PipelineError::ReplayMismatch(format!(
            "report was produced with the {} provider",
            report.provider.kind
        )));
    }
    if let Some(x) = report.provider.transcript.iter().find(|x| !fixtures.contains(&x.key)) {
        return Err(PipelineError::ReplayMismatch(format!("missing fixture {}", x.key)));
    }
    let recorded = Recorded::new(Backend::Mock(fixtures));
    let rc = RunContext {
        config: &report.config,
        seed: report.seed,
        provider: &recorded,
        sim,
        history_limit: Some(report.history_used),
        record_history: false,
    };
    let (again, _) = match run_pipeline(&report.description, &rc) {
        Ok(r) => r,
        Err(PipelineError::Provider(e)) => return Err(PipelineError::ReplayMismatch(e.to_string())),
        Err(e) => return Err(e),
    };
    let (a, b) = (report.canonical_json(), again.canonical_json());
    if a != b {
        let line = a
            .lines()
            .zip(b.lines())
            .position(|(x, y)| x != y)
            .unwrap_or_else(|| a.lines().count().min(b.lines().count()));
        let show = |s: &str| s.lines().nth(line).unwrap_or("<end>").trim().to_string();
        return Err(PipelineError::ReplayMismatch(format!(
            "line {}: recorded `{}`, replayed `{}`",
            line + 1,
            show(&a),
            show(&b)
        )));
    }
    Ok(again)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graph_edges() {
        use Phase::*;
        assert!(is_legal(Formulating, SelectingArch));
        assert!(is_legal(Scoring, Refining));
        assert!(is_legal(Refining, Formulating));
        assert!(is_legal(Executing, Failed));
        assert!(!is_legal(Formulating, Generating));
        assert!(!is_legal(Done, Failed));
        assert!(!is_legal(Refining, Executing));
    }
}
