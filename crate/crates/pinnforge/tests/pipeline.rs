mod support;

use pinnforge::config::{CodeSource, Config};
use pinnforge::pipeline::{is_legal, replay, run_pipeline, write_bundle, PipelineError, RunContext, RunReport, Status};
use pinnforge::provider::{Backend, MockProvider, Recorded};
use pinnforge_core::codegen::ModuleKind;
use pinnforge_core::feedback::DirectiveTarget;
use pinnforge_core::matching::sym_score;
use pinnforge_core::semantic::BaselineSimilarity;
use support::*;

fn quick() -> Config {
    let mut cfg = Config::default();
    cfg.trainer.train.steps = 200;
    cfg
}

fn run(cfg: &Config, mock: MockProvider, seed: u64) -> Result<RunReport, PipelineError> {
    let rec = Recorded::new(Backend::Mock(mock));
    let sim = BaselineSimilarity::default();
    let rc = RunContext { config: cfg, seed, provider: &rec, sim: &sim, history_limit: None, record_history: true };
    Ok(run_pipeline(HEAT, &rc)?.0)
}

fn assert_legal_path(r: &RunReport) {
    for w in r.phases.windows(2) {
        assert!(is_legal(w[0], w[1]), "{:?} -> {:?}", w[0], w[1]);
    }
    assert!(r.phases.last().unwrap().is_terminal());
}

#[test]
fn golden_path_reaches_done_and_replays() {
    let cfg = quick();
    let report = run(&cfg, formulation_fixtures(&cfg, HEAT, &heat()), 3).unwrap();
    assert_eq!(report.status, Status::Done, "{:?}", report.failure);
    assert_legal_path(&report);
    assert_eq!(sym_score(report.chosen_pde.as_ref().unwrap(), &heat()), 1.0);
    assert!(report.bundle_verified);
    let s = report.final_score.unwrap().s;
    assert!(s > 0.0 && s <= 1.0);
    assert!(report.accepted_scores.windows(2).all(|w| w[1] > w[0]));
    let again = replay(&report, formulation_fixtures(&cfg, HEAT, &heat()), &BaselineSimilarity::default()).unwrap();
    assert_eq!(again.canonical_json(), report.canonical_json());
}

#[test]
fn replay_names_missing_fixture() {
    let cfg = quick();
    let report = run(&cfg, formulation_fixtures(&cfg, HEAT, &heat()), 0).unwrap();
    let key = report.provider.transcript[0].key.clone();
    match replay(&report, MockProvider::new(), &BaselineSimilarity::default()) {
        Err(PipelineError::ReplayMismatch(m)) => assert!(m.contains(&key), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn broken_loss_is_repaired_in_place() {
    let mut cfg = quick();
    cfg.code_agent.source = CodeSource::Provider;
    let fx = code_fixtures(&cfg, HEAT, &heat(), 0, false);
    let report = run(&cfg, fx.mock, 0).unwrap();
    assert_eq!(report.status, Status::Done, "{:?}", report.failure);
    assert_legal_path(&report);
    let repairs: Vec<_> = report.directives().into_iter().filter(|d| d.signature != "refinement").collect();
    assert_eq!(repairs.len(), 1, "{repairs:?}");
    assert_eq!(repairs[0].target, DirectiveTarget::Module(ModuleKind::PdeLoss));
    let (first, second) = (&report.iterations[0], &report.iterations[1]);
    assert!(first.failure.as_deref().unwrap().contains("residual mismatch"));
    assert_eq!(second.regenerated, [ModuleKind::PdeLoss]);
    for k in ModuleKind::ALL {
        if k != ModuleKind::PdeLoss {
            assert_eq!(first.modules[&k], second.modules[&k], "{k}");
        }
    }
    assert_ne!(first.modules[&ModuleKind::PdeLoss], second.modules[&ModuleKind::PdeLoss]);
    assert!(report.accepted_scores.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn persistent_failure_stops_at_hard_cap() {
    let mut cfg = quick();
    cfg.code_agent.source = CodeSource::Provider;
    let fx = code_fixtures(&cfg, HEAT, &heat(), 0, true);
    let report = run(&cfg, fx.mock, 0).unwrap();
    assert_eq!(report.status, Status::Failed);
    assert_eq!(report.iterations.len(), 50);
    assert!(report.failure.as_deref().unwrap().contains("hard cap"));
    assert_legal_path(&report);
}

#[test]
fn template_target_must_be_builtin() {
    let mut cfg = quick();
    cfg.code_agent.target = pinnforge_core::codegen::Target::ExternalRuntime;
    assert!(matches!(run(&cfg, MockProvider::new(), 0), Err(PipelineError::Config(_))));
}

#[test]
fn missing_formulation_fixture_aborts() {
    assert!(matches!(run(&quick(), MockProvider::new(), 0), Err(PipelineError::Provider(_))));
}

#[test]
fn done_runs_feed_the_history_cache() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick();
    cfg.caps.max_refinements = 0;
    cfg.pinn_agent.history = Some(dir.path().join("history.jsonl"));
    let first = run(&cfg, formulation_fixtures(&cfg, HEAT, &heat()), 0).unwrap();
    assert_eq!(first.history_used, 0);
    let second = run(&cfg, formulation_fixtures(&cfg, HEAT, &heat()), 0).unwrap();
    assert_eq!(second.history_used, 1);
    let sel = second.architecture.as_ref().unwrap();
    assert_eq!(sel.provenance, pinnforge_core::pinn::Provenance::Reused);
    assert_eq!(sel.arch, first.architecture.unwrap().arch);
    let again = replay(&second, formulation_fixtures(&cfg, HEAT, &heat()), &BaselineSimilarity::default()).unwrap();
    assert_eq!(again.history_used, 1);
    assert_eq!(pinnforge::history::load(cfg.pinn_agent.history.as_ref().unwrap()).unwrap().len(), 2);
}

#[test]
fn bundle_directory_layout() {
    let mut cfg = quick();
    cfg.caps.max_refinements = 0;
    let rec = Recorded::new(Backend::Mock(formulation_fixtures(&cfg, HEAT, &heat())));
    let sim = BaselineSimilarity::default();
    let rc = RunContext { config: &cfg, seed: 0, provider: &rec, sim: &sim, history_limit: None, record_history: false };
    let (_, art) = run_pipeline(HEAT, &rc).unwrap();
    let art = art.unwrap();
    let dir = tempfile::tempdir().unwrap();
    let manifest = write_bundle(dir.path(), &art.bundle, &art.train).unwrap();
    for f in manifest.files.values() {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert!(dir.path().join("manifest.json").is_file());
}

#[test]
fn replay_survives_a_json_round_trip() {
    let cfg = quick();
    let report = run(&cfg, formulation_fixtures(&cfg, HEAT, &heat()), 1).unwrap();
    let text = pinnforge::formats::to_pretty(&report);
    let loaded: RunReport = serde_json::from_str(&text).unwrap();
    assert_eq!(loaded.canonical_json(), report.canonical_json());
    replay(&loaded, formulation_fixtures(&cfg, HEAT, &heat()), &BaselineSimilarity::default()).unwrap();
}
