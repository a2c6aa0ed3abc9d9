//! Fixture builders shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use pinnforge::config::Config;
use pinnforge::localize::localize_error;
use pinnforge::pde_agent::insert_answers;
use pinnforge::pipeline::{net_for, repair_note};
use pinnforge::provider::MockProvider;
use pinnforge_core::codegen::{assemble, generate_module, module_prompt, GenContext, ModuleKind, Source, Target};
use pinnforge_core::pde::CanonicalPde;
use pinnforge_core::pinn::select_architecture;

pub const HEAT: &str = "A thin rod of unit length starts with temperature sin(pi x). Both ends are held at zero \
                        temperature. Heat diffuses along the rod with diffusivity 0.01, and we follow it for one time unit.";

pub fn heat() -> CanonicalPde {
    serde_json::from_str(
        r#"{"residual": "(+ (D t 1 u) (* -0.01 (D x 2 u)))", "ic": "(sin (* pi x))",
            "bc": [{"kind": "dirichlet", "axis": 1}], "domain": {"dims": 1, "extents": [[0, 1]], "time": [0, 1]}}"#,
    )
    .unwrap()
}

/// Heat fixtures for the PDE agent only.
pub fn formulation_fixtures(cfg: &Config, description: &str, pde: &CanonicalPde) -> MockProvider {
    let mut mock = MockProvider::new();
    insert_answers(&mut mock, description, cfg.pde_agent.k, &cfg.pde_agent.params, pde);
    mock
}

pub fn reply(text: &str) -> String {
    format!("Here is the module.\n\n```\n{text}```\n")
}

/// Provider-mode code fixtures plus the sources they contain.
pub struct CodeFixtures {
    pub mock: MockProvider,
    pub good: BTreeMap<ModuleKind, String>,
    pub broken_loss: String,
    /// Assembly diagnostic the broken loss module produces.
    pub diagnostic: String,
}

/// Fixtures for a provider-mode run on `pde` whose first loss module carries
/// the wrong residual. With `persistent`, the repaired loss module is broken
/// the same way; otherwise it is correct. Refinement prompts on the training
/// loop answer with the learning rate scaled up or down.
pub fn code_fixtures(cfg: &Config, description: &str, pde: &CanonicalPde, seed: u64, persistent: bool) -> CodeFixtures {
    let mut mock = formulation_fixtures(cfg, description, pde);
    let registry = cfg.registry().unwrap();
    let sel = select_architecture(pde, &registry, &[], &cfg.selection(), &[]).unwrap();
    let inputs = pde.domain.dims as usize + usize::from(pde.is_time_dependent());
    let net = net_for(&sel.arch, inputs, cfg);
    let mut train = cfg.trainer.train;
    train.seed = seed;
    let ctx = GenContext { pde, arch: &sel.arch, net, train };
    let params = cfg.code_agent.params;
    let render = |kind, ctx: &GenContext<'_>| generate_module(kind, ctx, Source::Template(Target::Builtin)).unwrap();

    let good: BTreeMap<ModuleKind, String> = ModuleKind::ALL.iter().map(|k| (*k, render(*k, &ctx).text)).collect();
    let residual = pinnforge_core::to_prefix(pde.residual());
    let broken_loss = good[&ModuleKind::PdeLoss].replace(&residual, "(+ (D t 1 u) (* -0.5 (D x 2 u)))");
    assert_ne!(broken_loss, good[&ModuleKind::PdeLoss]);

    for k in ModuleKind::ALL {
        let text = if k == ModuleKind::PdeLoss { &broken_loss } else { &good[&k] };
        mock.insert(&module_prompt(k, Target::Builtin, &ctx, None), &params, reply(text));
    }
    let mut modules: Vec<_> = ModuleKind::ALL.iter().map(|k| render(*k, &ctx)).collect();
    modules[1].text = broken_loss.clone();
    let diagnostic = assemble(modules, pde, cfg.code_agent.verify_threshold).unwrap_err().to_string();
    let repair = repair_note(&localize_error(&diagnostic));
    let fixed = if persistent { &broken_loss } else { &good[&ModuleKind::PdeLoss] };
    mock.insert(&module_prompt(ModuleKind::PdeLoss, Target::Builtin, &ctx, Some(&repair)), &params, reply(fixed));

    for (metric, kind, factor) in [
        ("convergence", ModuleKind::TrainingLoop, 2.0),
        ("robustness", ModuleKind::TrainingLoop, 0.5),
        ("accuracy", ModuleKind::Model, 1.0),
        ("complexity", ModuleKind::Model, 1.0),
    ] {
        let mut t = train;
        t.lr *= factor;
        let c = GenContext { pde, arch: &sel.arch, net, train: t };
        let note = format!("refine: improve {metric}");
        mock.insert(&module_prompt(kind, Target::Builtin, &ctx, Some(&note)), &params, reply(&render(kind, &c).text));
    }
    CodeFixtures { mock, good, broken_loss, diagnostic }
}
