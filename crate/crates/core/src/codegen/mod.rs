//! Six-module program generation, interface checking, loss verification by
//! residual parse-back, and bundle assembly.
//!
//! Every module source starts with a header the interface is read from:
//!
//! ```text
//! # kind: pde_loss
//! # target: builtin
//! # provides: loss/2, residual/2
//! # requires: forward/1
//! ```
//!
//! The loss module additionally carries its residual in prefix notation
//! between `# >>> residual` and `# <<< residual`.

mod plan;
mod templates;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::canon::canonicalize;
use crate::consensus::extract_final_block;
use crate::expr::ExprTree;
use crate::matching::tree_score;
use crate::parse::parse;
use crate::pde::CanonicalPde;
use crate::prefix::{from_prefix, to_prefix};
use crate::provider::{CompletionParams, CompletionProvider, ProviderError};
use crate::trainer::{NetSpec, TrainConfig};

/// Function names with their arities.
type Arities = &'static [(&'static str, usize)];

pub use plan::{execute, ExactSolution, Execution, ExecutionPlan, PlanError};
pub use templates::{render, template};

pub const RESIDUAL_OPEN: &str = "# >>> residual";
pub const RESIDUAL_CLOSE: &str = "# <<< residual";
pub const DEFAULT_VERIFY_THRESHOLD: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModuleKind {
    Model,
    PdeLoss,
    Preprocessing,
    TrainingLoop,
    Validation,
    Main,
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 6] = [
        ModuleKind::Model,
        ModuleKind::PdeLoss,
        ModuleKind::Preprocessing,
        ModuleKind::TrainingLoop,
        ModuleKind::Validation,
        ModuleKind::Main,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModuleKind::Model => "model",
            ModuleKind::PdeLoss => "pde_loss",
            ModuleKind::Preprocessing => "preprocessing",
            ModuleKind::TrainingLoop => "training_loop",
            ModuleKind::Validation => "validation",
            ModuleKind::Main => "main",
        }
    }

    pub fn parse(s: &str) -> Option<ModuleKind> {
        ModuleKind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    /// The contract every implementation of this kind must satisfy.
    pub fn contract(self) -> Interface {
        let syms = |list: &[(&str, usize)]| {
            list.iter()
                .map(|(n, a)| Symbol {
                    name: n.to_string(),
                    arity: *a,
                })
                .collect()
        };
        let (provides, requires): (Arities, Arities) = match self {
            ModuleKind::Model => (&[("forward", 1), ("init", 1)], &[]),
            ModuleKind::PdeLoss => (&[("loss", 2), ("residual", 2)], &[("forward", 1)]),
            ModuleKind::Preprocessing => (&[("sample_batch", 1)], &[]),
            ModuleKind::TrainingLoop => (
                &[("train", 2)],
                &[("loss", 2), ("sample_batch", 1), ("init", 1)],
            ),
            ModuleKind::Validation => (&[("evaluate", 1)], &[("residual", 2), ("sample_batch", 1)]),
            ModuleKind::Main => (&[("main", 0)], &[("train", 2), ("evaluate", 1)]),
        };
        Interface {
            provides: syms(provides),
            requires: syms(requires),
        }
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    Builtin,
    ExternalRuntime,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Builtin => "builtin",
            Target::ExternalRuntime => "external-runtime",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Target::Builtin => "txt",
            Target::ExternalRuntime => "py",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Symbol {
    pub name: String,
    pub arity: usize,
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.arity)
    }
}

impl Symbol {
    fn parse(s: &str) -> Option<Symbol> {
        let (name, arity) = s.trim().split_once('/')?;
        let name = name.trim();
        let ok = !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
        ok.then_some(())?;
        Some(Symbol {
            name: name.to_string(),
            arity: arity.trim().parse().ok()?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Interface {
    pub provides: Vec<Symbol>,
    pub requires: Vec<Symbol>,
}

fn header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines().find_map(|l| {
        let rest = l.trim().strip_prefix('#')?.trim_start();
        rest.strip_prefix(key)?.trim_start().strip_prefix(':').map(str::trim)
    })
}

fn symbol_list(v: &str) -> Option<Vec<Symbol>> {
    v.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(Symbol::parse)
        .collect()
}

/// Reads the `provides`/`requires` header lines of a module source.
pub fn extract_interface(text: &str) -> Option<Interface> {
    Some(Interface {
        provides: symbol_list(header_value(text, "provides")?)?,
        requires: symbol_list(header_value(text, "requires")?)?,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleSource {
    pub kind: ModuleKind,
    pub text: String,
    pub interface: Interface,
    pub target: Target,
    /// `template:<kind>@<target>` or `provider:<hash>`.
    pub provenance: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CodegenError {
    #[error("no template for {kind} on target {target}")]
    TemplateMissing { kind: ModuleKind, target: &'static str },
    #[error("template placeholder `{0}` has no value")]
    UnboundPlaceholder(String),
    #[error("{kind} source does not declare its interface: {detail}")]
    InterfaceNotExtractable { kind: ModuleKind, detail: String },
    #[error("loss module has no residual block")]
    ResidualBlockMissing,
    #[error("precondition failed: {0}")]
    PreconditionFailed(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// Everything a module generator may need.
#[derive(Debug, Clone, Copy)]
pub struct GenContext<'a> {
    pub pde: &'a CanonicalPde,
    pub arch: &'a str,
    pub net: NetSpec,
    pub train: TrainConfig,
}

impl GenContext<'_> {
    /// Input coordinates of the network: spatial axes, then `t`.
    pub fn coords(&self) -> Vec<String> {
        let mut c = self.pde.domain.axis_names();
        if self.pde.is_time_dependent() {
            c.push(crate::expr::TIME_AXIS.to_string());
        }
        c
    }

    pub fn vars(&self) -> BTreeMap<&'static str, String> {
        let t = &self.train;
        let n = &self.net;
        let mut v = BTreeMap::new();
        v.insert("arch", self.arch.to_string());
        v.insert("inputs", format!("{}", n.inputs));
        v.insert("depth", format!("{}", n.depth));
        v.insert("width", format!("{}", n.width));
        v.insert("activation", n.activation.as_str().to_string());
        v.insert("init", n.init.as_str().to_string());
        v.insert("residual", to_prefix(self.pde.residual()));
        v.insert("penalty", format!("{:?}", t.penalty));
        v.insert("fd_step", format!("{:?}", t.fd_step));
        v.insert("interior", format!("{}", t.interior));
        v.insert("boundary", format!("{}", t.boundary));
        v.insert("seed", format!("{}", t.seed));
        v.insert("lr", format!("{:?}", t.lr));
        v.insert("beta1", format!("{:?}", t.beta1));
        v.insert("beta2", format!("{:?}", t.beta2));
        v.insert("adam_eps", format!("{:?}", t.adam_eps));
        v.insert("steps", format!("{}", t.steps));
        v.insert("grid", format!("{}", t.grid));
        v.insert(
            "axes",
            serde_json::to_string(&self.coords()).unwrap_or_default(),
        );
        v.insert(
            "domain_json",
            serde_json::to_string(&self.pde.domain).unwrap_or_default(),
        );
        v
    }
}

/// How a module's source is produced.
pub enum Source<'p> {
    Template(Target),
    Provider {
        provider: &'p dyn CompletionProvider,
        params: CompletionParams,
        target: Target,
        /// Failure reported for the previous attempt, if regenerating.
        repair: Option<&'p str>,
    },
}

fn symbols(list: &[Symbol]) -> String {
    if list.is_empty() {
        return String::from("(none)");
    }
    list.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ")
}

/// The prompt sent to a provider for one module.
pub fn module_prompt(kind: ModuleKind, target: Target, ctx: &GenContext<'_>, repair: Option<&str>) -> String {
    let c = kind.contract();
    let mut p = format!(
        "Write the `{kind}` module of a physics-informed training program for the {} target.\n\
         It must provide: {}.\nIt may require: {}.\n\
         Start the source with header comments `# kind:`, `# target:`, `# provides:` and `# requires:`.\n\
         PDE residual (prefix notation): {}\n\
         Architecture: {} with {} hidden layers of width {} ({} activation).\n\
         Return the module source in a final fenced code block.",
        target.as_str(),
        symbols(&c.provides),
        symbols(&c.requires),
        to_prefix(ctx.pde.residual()),
        ctx.arch,
        ctx.net.depth,
        ctx.net.width,
        ctx.net.activation.as_str(),
    );
    if kind == ModuleKind::PdeLoss {
        p.push_str(&format!(
            "\nCarry the residual in prefix notation between `{RESIDUAL_OPEN}` and `{RESIDUAL_CLOSE}`."
        ));
    }
    if let Some(r) = repair {
        p.push_str(&format!("\nPrevious attempt failed: {r}"));
    }
    p
}

/// 64-bit FNV-1a, used for provider provenance ids.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn generate_module(kind: ModuleKind, ctx: &GenContext<'_>, source: Source<'_>) -> Result<ModuleSource, CodegenError> {
    match source {
        Source::Template(target) => {
            let tpl = template(kind, target).ok_or(CodegenError::TemplateMissing {
                kind,
                target: target.as_str(),
            })?;
            let text = render(tpl, &ctx.vars()).map_err(CodegenError::UnboundPlaceholder)?;
            let interface = extract_interface(&text).ok_or_else(|| CodegenError::InterfaceNotExtractable {
                kind,
                detail: "template header malformed".into(),
            })?;
            Ok(ModuleSource {
                kind,
                text,
                interface,
                target,
                provenance: format!("template:{kind}@{}", target.as_str()),
            })
        }
        Source::Provider {
            provider,
            params,
            target,
            repair,
        } => {
            let prompt = module_prompt(kind, target, ctx, repair);
            let reply = provider.complete(&prompt, &params)?;
            let text = match extract_final_block(&reply) {
                Some((block, _)) => block,
                None => reply.trim().to_string(),
            };
            let mut text = text;
            if !text.ends_with('\n') {
                text.push('\n');
            }
            let interface = extract_interface(&text).ok_or_else(|| CodegenError::InterfaceNotExtractable {
                kind,
                detail: "no provides/requires header".into(),
            })?;
            let contract = kind.contract();
            if let Some(missing) = contract.provides.iter().find(|s| !interface.provides.contains(s)) {
                return Err(CodegenError::InterfaceNotExtractable {
                    kind,
                    detail: format!("missing provided symbol {missing}"),
                });
            }
            Ok(ModuleSource {
                kind,
                text,
                interface,
                target,
                provenance: format!("provider:{:016x}", fnv1a(reply.as_bytes())),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Missing,
    Duplicate,
    ArityMismatch { provided: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub module: ModuleKind,
    pub symbol: Symbol,
    pub problem: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.problem {
            ViolationKind::Missing => write!(f, "{}: required symbol {} is not provided", self.module, self.symbol),
            ViolationKind::Duplicate => write!(f, "{}: symbol {} is provided more than once", self.module, self.symbol),
            ViolationKind::ArityMismatch { provided } => write!(
                f,
                "{}: requires {} but {}/{} is provided",
                self.module, self.symbol, self.symbol.name, provided
            ),
        }
    }
}

/// Every required symbol must be provided by exactly one other module, with matching arity.
pub fn check_interfaces(modules: &[ModuleSource]) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    let mut providers: BTreeMap<&str, Vec<(ModuleKind, usize)>> = BTreeMap::new();
    for m in modules {
        for s in &m.interface.provides {
            let entry = providers.entry(s.name.as_str()).or_default();
            if !entry.is_empty() {
                out.push(Violation {
                    module: m.kind,
                    symbol: s.clone(),
                    problem: ViolationKind::Duplicate,
                });
            }
            entry.push((m.kind, s.arity));
        }
    }
    for m in modules {
        for req in &m.interface.requires {
            let others: Vec<&(ModuleKind, usize)> = providers
                .get(req.name.as_str())
                .map(|v| v.iter().filter(|(k, _)| *k != m.kind).collect())
                .unwrap_or_default();
            match others.as_slice() {
                [] => out.push(Violation {
                    module: m.kind,
                    symbol: req.clone(),
                    problem: ViolationKind::Missing,
                }),
                [(_, arity)] if *arity != req.arity => out.push(Violation {
                    module: m.kind,
                    symbol: req.clone(),
                    problem: ViolationKind::ArityMismatch { provided: *arity },
                }),
                _ => {}
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

/// The residual text between the block markers, comment prefixes removed.
pub fn residual_block(text: &str) -> Option<String> {
    let mut inside = false;
    let mut body = String::new();
    for line in text.lines() {
        let t = line.trim();
        if t == RESIDUAL_OPEN {
            inside = true;
            continue;
        }
        if t == RESIDUAL_CLOSE {
            return inside.then(|| body.trim().to_string());
        }
        if inside {
            let content = t.strip_prefix('#').unwrap_or(t).trim();
            if !body.is_empty() {
                body.push(' ');
            }
            body.push_str(content);
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossVerification {
    pub verified: bool,
    /// Recovered residual `Ê` in prefix notation.
    pub recovered: Option<String>,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

/// Parses the residual block back and scores it against `E`.
pub fn verify_loss(module: &ModuleSource, e: &CanonicalPde, threshold: f64) -> Result<LossVerification, CodegenError> {
    let block = residual_block(&module.text).ok_or(CodegenError::ResidualBlockMissing)?;
    let tree: Result<ExprTree, String> = from_prefix(&block)
        .or_else(|_| parse(&block))
        .map_err(|err| err.to_string());
    Ok(match tree {
        Ok(t) => {
            let recovered = canonicalize(&t);
            let score = tree_score(&recovered, e.residual());
            LossVerification {
                verified: score >= threshold,
                recovered: Some(to_prefix(&recovered)),
                score,
                parse_error: None,
            }
        }
        Err(err) => LossVerification {
            verified: false,
            recovered: None,
            score: 0.0,
            parse_error: Some(err),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramBundle {
    /// One module per kind, in [`ModuleKind::ALL`] order.
    pub modules: Vec<ModuleSource>,
    pub target: Target,
    pub interfaces_ok: bool,
    pub verification: LossVerification,
    /// Concatenated program text for the external target.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
}

impl ProgramBundle {
    pub fn module(&self, kind: ModuleKind) -> &ModuleSource {
        self.modules.iter().find(|m| m.kind == kind).expect("bundle holds every kind")
    }

    /// The module list with `module` substituted for its kind.
    pub fn replace(&self, module: ModuleSource) -> Vec<ModuleSource> {
        self.modules
            .iter()
            .map(|m| if m.kind == module.kind { module.clone() } else { m.clone() })
            .collect()
    }

    /// Manifest of the bundle: kinds, interfaces, residual string.
    pub fn manifest(&self, train: &TrainConfig) -> Manifest {
        Manifest {
            target: self.target,
            kinds: self.modules.iter().map(|m| m.kind).collect(),
            interfaces: self.modules.iter().map(|m| (m.kind, m.interface.clone())).collect(),
            files: self
                .modules
                .iter()
                .map(|m| (m.kind, format!("{}.{}", m.kind, m.target.extension())))
                .collect(),
            residual: self.verification.recovered.clone().unwrap_or_default(),
            provenance: self.modules.iter().map(|m| (m.kind, m.provenance.clone())).collect(),
            trainer: *train,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub target: Target,
    pub kinds: Vec<ModuleKind>,
    pub interfaces: BTreeMap<ModuleKind, Interface>,
    pub files: BTreeMap<ModuleKind, String>,
    pub residual: String,
    pub provenance: BTreeMap<ModuleKind, String>,
    pub trainer: TrainConfig,
}

/// Gates, in order: every kind present once, one target, interfaces, loss verification.
pub fn assemble(modules: Vec<ModuleSource>, e: &CanonicalPde, threshold: f64) -> Result<ProgramBundle, CodegenError> {
    let fail = |m: String| Err(CodegenError::PreconditionFailed(m));
    let mut ordered = Vec::with_capacity(6);
    for kind in ModuleKind::ALL {
        let mut of_kind = modules.iter().filter(|m| m.kind == kind);
        match (of_kind.next(), of_kind.next()) {
            (None, _) => return fail(format!("missing kind: {kind}")),
            (Some(_), Some(_)) => return fail(format!("duplicate kind: {kind}")),
            (Some(m), None) => ordered.push(m.clone()),
        }
    }
    let target = ordered[0].target;
    if let Some(m) = ordered.iter().find(|m| m.target != target) {
        return fail(format!("mixed targets: {} is {}", m.kind, m.target.as_str()));
    }
    if let Err(v) = check_interfaces(&ordered) {
        let list: Vec<String> = v.iter().map(|x| x.to_string()).collect();
        return fail(format!("interface check: {}", list.join("; ")));
    }
    let verification = verify_loss(&ordered[1], e, threshold)?;
    if !verification.verified {
        return fail(format!(
            "loss verification: residual mismatch, score {:.6} below {}",
            verification.score, threshold
        ));
    }
    let program = (target == Target::ExternalRuntime).then(|| {
        ordered
            .iter()
            .map(|m| format!("# ---- {}.py ----\n{}", m.kind, m.text))
            .collect::<Vec<_>>()
            .join("\n")
    });
    Ok(ProgramBundle {
        modules: ordered,
        target,
        interfaces_ok: true,
        verification,
        program,
    })
}

/// Generates all six modules from templates.
pub fn generate_all(ctx: &GenContext<'_>, target: Target) -> Result<Vec<ModuleSource>, CodegenError> {
    ModuleKind::ALL
        .into_iter()
        .map(|k| generate_module(k, ctx, Source::Template(target)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::{BcKind, BoundaryCondition, Domain, PhysicsHints, Side};
    use alloc::vec;

    fn heat(src: &str) -> CanonicalPde {
        CanonicalPde::new(
            &parse(src).unwrap(),
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

    fn ctx(pde: &CanonicalPde) -> GenContext<'_> {
        GenContext {
            pde,
            arch: "MLP",
            net: NetSpec::new(2, 3, 32),
            train: TrainConfig::default(),
        }
    }

    #[test]
    fn templates_round_trip_and_check() {
        let e = heat("u_t - 0.1*u_xx");
        for target in [Target::Builtin, Target::ExternalRuntime] {
            let mods = generate_all(&ctx(&e), target).unwrap();
            assert_eq!(check_interfaces(&mods), Ok(()));
            for m in &mods {
                assert_eq!(m.interface, m.kind.contract(), "{} {:?}", m.kind, target);
            }
            let v = verify_loss(&mods[1], &e, DEFAULT_VERIFY_THRESHOLD).unwrap();
            assert!(v.verified);
            assert_eq!(v.score, 1.0);
            let b = assemble(mods.clone(), &e, DEFAULT_VERIFY_THRESHOLD).unwrap();
            assert_eq!(b.program.is_some(), target == Target::ExternalRuntime);
        }
    }

    #[test]
    fn model_declares_forward() {
        let e = heat("u_t - 0.1*u_xx");
        let m = generate_module(ModuleKind::Model, &ctx(&e), Source::Template(Target::Builtin)).unwrap();
        assert!(m.interface.provides.contains(&Symbol {
            name: "forward".into(),
            arity: 1
        }));
        let again = generate_module(ModuleKind::Model, &ctx(&e), Source::Template(Target::Builtin)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn interface_violations() {
        let e = heat("u_t - 0.1*u_xx");
        let mut mods = generate_all(&ctx(&e), Target::Builtin).unwrap();
        mods[1].interface.provides[0].arity = 3;
        let v = check_interfaces(&mods).unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].module, ModuleKind::TrainingLoop);
        assert_eq!(v[0].problem, ViolationKind::ArityMismatch { provided: 3 });

        let mut mods = generate_all(&ctx(&e), Target::Builtin).unwrap();
        mods[5].interface.provides.push(Symbol {
            name: "forward".into(),
            arity: 1,
        });
        let v = check_interfaces(&mods).unwrap_err();
        assert!(v.iter().any(|x| x.problem == ViolationKind::Duplicate && x.module == ModuleKind::Main));
    }

    #[test]
    fn sign_flip_fails_verification() {
        let e = heat("u_t - 0.1*u_xx");
        let flipped = heat("u_t + 0.1*u_xx");
        let m = generate_module(ModuleKind::PdeLoss, &ctx(&flipped), Source::Template(Target::Builtin)).unwrap();
        let v = verify_loss(&m, &e, DEFAULT_VERIFY_THRESHOLD).unwrap();
        assert!(!v.verified);
        assert!(v.score < 1.0);
        let mut stripped = m.clone();
        stripped.text = stripped.text.replace(RESIDUAL_OPEN, "");
        assert_eq!(verify_loss(&stripped, &e, 0.99), Err(CodegenError::ResidualBlockMissing));
    }

    #[test]
    fn assembly_gates_and_isolation() {
        let e = heat("u_t - 0.1*u_xx");
        let mods = generate_all(&ctx(&e), Target::Builtin).unwrap();
        let without: Vec<_> = mods.iter().filter(|m| m.kind != ModuleKind::Validation).cloned().collect();
        assert_eq!(
            assemble(without, &e, 0.99),
            Err(CodegenError::PreconditionFailed("missing kind: validation".into()))
        );
        let bundle = assemble(mods, &e, 0.99).unwrap();
        let mut c = ctx(&e);
        c.net.width = 16;
        let model = generate_module(ModuleKind::Model, &c, Source::Template(Target::Builtin)).unwrap();
        let swapped = assemble(bundle.replace(model), &e, 0.99).unwrap();
        for k in ModuleKind::ALL {
            if k != ModuleKind::Model {
                assert_eq!(bundle.module(k).text, swapped.module(k).text);
            }
        }
        assert_ne!(bundle.module(ModuleKind::Model).text, swapped.module(ModuleKind::Model).text);
    }

    #[test]
    fn header_parsing() {
        let i = extract_interface("# kind: x\n# provides: a/1, b_c/2\n# requires:\nbody").unwrap();
        assert_eq!(i.provides.len(), 2);
        assert!(i.requires.is_empty());
        assert!(extract_interface("# provides: a\n# requires:").is_none());
        assert!(extract_interface("no header").is_none());
    }
}
