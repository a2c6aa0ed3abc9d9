//! In-process execution of builtin bundles: module directives are parsed
//! into a trainer configuration and run by the desk-scale trainer.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{residual_block, ModuleKind, ProgramBundle, Target};
use crate::expr::ExprTree;
use crate::parse::parse;
use crate::pde::{CanonicalPde, PhysicsHints};
use crate::prefix::from_prefix;
use crate::trainer::{
    evaluate_mse, train, Activation, Init, LossTrace, Mlp, NetSpec, Problem, TrainConfig, TrainError,
};

/// A failure attributed to one module, with diagnostic text for error localization.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct PlanError {
    pub module: ModuleKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionPlan {
    pub arch: String,
    pub net: NetSpec,
    pub residual: ExprTree,
    pub train: TrainConfig,
}

fn directive<'a>(text: &'a str, head: &str) -> Option<BTreeMap<&'a str, &'a str>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.starts_with('#'))
        .find_map(|l| {
            let mut words = l.split_whitespace();
            (words.next() == Some(head)).then(|| words.filter_map(|w| w.split_once('=')).collect())
        })
}

struct Fields<'a> {
    module: ModuleKind,
    map: BTreeMap<&'a str, &'a str>,
    prefix: &'static str,
}

impl Fields<'_> {
    fn get<T: core::str::FromStr>(&self, key: &str) -> Result<T, PlanError> {
        let raw = self.map.get(key).ok_or_else(|| self.err(format!("missing `{key}`")))?;
        raw.parse().map_err(|_| self.err(format!("bad value `{raw}` for `{key}`")))
    }

    fn err(&self, detail: String) -> PlanError {
        PlanError {
            module: self.module,
            message: format!("{}: {detail}", self.prefix),
        }
    }
}

fn fields<'a>(bundle: &'a ProgramBundle, kind: ModuleKind, head: &str, prefix: &'static str) -> Result<Fields<'a>, PlanError> {
    let text = &bundle.module(kind).text;
    let map = directive(text, head).ok_or_else(|| PlanError {
        module: kind,
        message: format!("{prefix}: no `{head}` directive"),
    })?;
    Ok(Fields {
        module: kind,
        map,
        prefix,
    })
}

impl ExecutionPlan {
    pub fn from_bundle(bundle: &ProgramBundle) -> Result<Self, PlanError> {
        if bundle.target != Target::Builtin {
            return Err(PlanError {
                module: ModuleKind::Main,
                message: "entry point: bundle targets the external runtime".into(),
            });
        }
        let model = fields(bundle, ModuleKind::Model, "net", "shape mismatch in model definition")?;
        let activation = match model.map.get("activation").copied() {
            Some("tanh") => Activation::Tanh,
            Some("sine") => Activation::Sine,
            other => return Err(model.err(format!("unknown activation {other:?}"))),
        };
        let init = match model.map.get("init").copied() {
            Some("xavier") | None => Init::Xavier,
            Some("zero_output") => Init::ZeroOutput,
            Some(other) => return Err(model.err(format!("unknown init `{other}`"))),
        };
        let net = NetSpec {
            inputs: model.get("inputs")?,
            depth: model.get("depth")?,
            width: model.get("width")?,
            activation,
            init,
        };
        if net.inputs == 0 || net.width == 0 {
            return Err(model.err("zero-sized layer dimension".into()));
        }

        let loss_text = &bundle.module(ModuleKind::PdeLoss).text;
        let block = residual_block(loss_text).ok_or_else(|| PlanError {
            module: ModuleKind::PdeLoss,
            message: "undefined residual: no residual block".into(),
        })?;
        let residual = from_prefix(&block).or_else(|_| parse(&block)).map_err(|e| PlanError {
            module: ModuleKind::PdeLoss,
            message: format!("unparseable residual in loss module: {e}"),
        })?;
        let loss = fields(bundle, ModuleKind::PdeLoss, "loss", "undefined residual weighting")?;
        let pre = fields(bundle, ModuleKind::Preprocessing, "collocation", "collocation path error")?;
        let opt = fields(bundle, ModuleKind::TrainingLoop, "optimizer", "optimizer fault")?;
        if opt.map.is_empty() {
            return Err(opt.err("no optimizer settings".into()));
        }
        let eval = fields(bundle, ModuleKind::Validation, "evaluate", "metric computation fault")?;
        let main = &bundle.module(ModuleKind::Main).text;
        if directive(main, "run").is_none() {
            return Err(PlanError {
                module: ModuleKind::Main,
                message: "entry point: no `run` directive".into(),
            });
        }
        let train = TrainConfig {
            steps: opt.get("steps")?,
            lr: opt.get("lr")?,
            beta1: opt.get("beta1")?,
            beta2: opt.get("beta2")?,
            adam_eps: opt.get("eps")?,
            interior: pre.get("interior")?,
            boundary: pre.get("boundary")?,
            seed: pre.get("seed")?,
            penalty: loss.get("penalty")?,
            fd_step: loss.get("fd_step")?,
            grid: eval.get("grid")?,
            ..TrainConfig::default()
        };
        let arch = model.map.get("arch").map(|s| s.to_string()).unwrap_or_default();
        Ok(ExecutionPlan {
            arch,
            net,
            residual,
            train,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub trace: LossTrace,
    pub params: Vec<f64>,
    pub net: NetSpec,
    pub residual_mse: f64,
    /// Solution MSE when a reference solution was supplied.
    pub solution_mse: Option<f64>,
}

/// Exact solution evaluated at a collocation point.
pub type ExactSolution<'a> = &'a dyn Fn(&[f64]) -> f64;

/// Runs a plan on the domain and conditions of `pde`, using the plan's residual.
pub fn execute(
    plan: &ExecutionPlan,
    pde: &CanonicalPde,
    reference: Option<ExactSolution<'_>>,
) -> Result<Execution, PlanError> {
    let hints = PhysicsHints {
        re: pde.metadata().re,
        pe: pde.metadata().pe,
        nonlocal: pde.metadata().nonlocal,
    };
    let to_plan_err = |e: TrainError| {
        let module = match &e {
            TrainError::UnsupportedPde(_) => ModuleKind::Main,
            TrainError::Residual(_) => ModuleKind::PdeLoss,
            TrainError::ConfigInvalid(_) => ModuleKind::TrainingLoop,
            TrainError::ShapeMismatch { .. } => ModuleKind::Model,
            TrainError::Diverged { .. } => ModuleKind::TrainingLoop,
        };
        PlanError {
            module,
            message: e.to_string(),
        }
    };
    let run_pde = CanonicalPde::new(&plan.residual, pde.bcs.clone(), pde.ic.clone(), pde.domain.clone(), hints)
        .map_err(|e| PlanError {
            module: ModuleKind::PdeLoss,
            message: format!("unparseable residual: {e}"),
        })?;
    let problem = Problem::new(&run_pde, &plan.train.sampling()).map_err(to_plan_err)?;
    let out = train(&problem, &plan.net, &plan.train).map_err(to_plan_err)?;
    let mlp = Mlp::new(plan.net);
    let residual_mse = problem.residual_mse(&mlp, &out.params, plan.train.grid);
    if !residual_mse.is_finite() {
        return Err(PlanError {
            module: ModuleKind::Validation,
            message: "metric computation fault: non-finite residual MSE".into(),
        });
    }
    let solution_mse = reference.map(|f| evaluate_mse(&plan.net, &out.params, &problem.lo, &problem.hi, plan.train.grid, f));
    let mut trace = out.trace;
    trace.final_mse = Some(solution_mse.unwrap_or(residual_mse));
    Ok(Execution {
        trace,
        params: out.params,
        net: plan.net,
        residual_mse,
        solution_mse,
    })
}
