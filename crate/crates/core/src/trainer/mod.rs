//! Desk-scale PINN trainer: a small fully-connected network fitted by Adam
//! to a residual-plus-boundary-penalty objective, with spatial derivatives
//! taken by central finite differences at stencil points.

mod net;
mod problem;
mod program;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

pub use net::{uniform, Activation, Init, Mlp, NetSpec};
pub use problem::{check_fd_step, classify, midpoint_grid, BoundaryTerm, Family, Problem, Sampling, Workspace};
pub use program::{CompileError, Program, Symbols};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub interior: usize,
    pub boundary: usize,
    pub fd_step: f64,
    pub penalty: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Evaluation grid points per axis.
    pub grid: usize,
    /// A loss above `blowup × max(L_1, 1)` counts as divergence.
    pub blowup: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2000,
            lr: 1e-3,
            interior: 128,
            boundary: 32,
            fd_step: 1e-3,
            penalty: 10.0,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            grid: 256,
            blowup: 1e6,
        }
    }
}

impl TrainConfig {
    pub fn sampling(&self) -> Sampling {
        Sampling {
            interior: self.interior,
            boundary: self.boundary,
            fd_step: self.fd_step,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::ConfigInvalid(m.into()));
        if self.steps == 0 {
            return bad("steps must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.interior == 0 {
            return bad("interior collocation count must be positive");
        }
        if self.penalty.is_nan() || self.penalty <= 0.0 {
            return bad("boundary penalty must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)");
        }
        if self.grid == 0 {
            return bad("evaluation grid must be non-empty");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub loss: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTrace {
    pub records: Vec<TraceRecord>,
    #[serde(default)]
    pub final_mse: Option<f64>,
    /// First step whose loss was non-finite or exploded; records stop before it.
    #[serde(default)]
    pub diverged_at: Option<usize>,
}

impl LossTrace {
    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// Step indices strictly increasing from 1; all values finite and nonnegative.
    pub fn check(&self) -> Result<(), String> {
        for (i, r) in self.records.iter().enumerate() {
            if r.t != i + 1 {
                return Err(alloc::format!("record {} has step {}, expected {}", i, r.t, i + 1));
            }
            if !(r.loss.is_finite() && r.loss >= 0.0) {
                return Err(alloc::format!("step {}: loss {} is not a finite nonnegative value", r.t, r.loss));
            }
            if !(r.grad_norm.is_finite() && r.grad_norm >= 0.0) {
                return Err(alloc::format!("step {}: grad_norm {} is not a finite nonnegative value", r.t, r.grad_norm));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("unsupported PDE family: {0}")]
    UnsupportedPde(String),
    #[error("{0}")]
    Residual(String),
    #[error("invalid trainer config: {0}")]
    ConfigInvalid(String),
    #[error("shape mismatch: expected {expected} inputs, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("{reason} at step {step}")]
    Diverged {
        step: usize,
        reason: &'static str,
        trace: LossTrace,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub trace: LossTrace,
    pub params: Vec<f64>,
}

/// Adam moment state over a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1,
            beta2,
            eps,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - libm::pow(self.beta1, self.t as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.t as f64);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (libm::sqrt(vh) + self.eps);
        }
    }
}

pub fn initial_params(net: &NetSpec, seed: u64) -> Vec<f64> {
    use rand_chacha::rand_core::SeedableRng;
    // Offset the stream so parameters and collocation points never share draws.
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    Mlp::new(*net).init_params(&mut rng)
}

/// Trains `net` on `problem`; `trace.final_mse` is left for the caller.
pub fn train(problem: &Problem, net: &NetSpec, cfg: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if net.inputs != problem.inputs() {
        return Err(TrainError::ShapeMismatch {
            expected: problem.inputs(),
            got: net.inputs,
        });
    }
    let mlp = Mlp::new(*net);
    let mut params = initial_params(net, cfg.seed);
    let mut grad = vec![0.0; params.len()];
    let mut adam = Adam::new(params.len(), cfg.beta1, cfg.beta2, cfg.adam_eps);
    let mut ws = Workspace::new(&mlp, problem);
    let mut trace = LossTrace::default();
    let mut first = None;
    for t in 1..=cfg.steps {
        let loss = problem.loss(&mlp, &params, cfg.penalty, Some(&mut grad), &mut ws);
        let grad_norm = libm::sqrt(grad.iter().map(|g| g * g).sum::<f64>());
        let l1: f64 = *first.get_or_insert(loss);
        let reason = if !loss.is_finite() || !grad_norm.is_finite() {
            Some("non-finite loss")
        } else if loss > cfg.blowup * l1.max(1.0) {
            Some("exploding loss")
        } else {
            None
        };
        if let Some(reason) = reason {
            trace.diverged_at = Some(t);
            return Err(TrainError::Diverged { step: t, reason, trace });
        }
        trace.records.push(TraceRecord { t, loss, grad_norm });
        adam.step(&mut params, &grad, cfg.lr);
    }
    Ok(TrainOutcome { trace, params })
}

/// Mean squared difference from `reference` over a midpoint grid of `n` points per axis.
pub fn evaluate_mse(
    net: &NetSpec,
    params: &[f64],
    lo: &[f64],
    hi: &[f64],
    n: usize,
    reference: &dyn Fn(&[f64]) -> f64,
) -> f64 {
    let mlp = Mlp::new(*net);
    let mut cache = mlp.cache();
    let grid = midpoint_grid(lo, hi, n);
    let total: f64 = grid
        .iter()
        .map(|p| {
            let d = mlp.forward(params, p, &mut cache) - reference(p);
            d * d
        })
        .sum();
    total / grid.len().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use crate::parse::parse;
    use crate::pde::{BcKind, BoundaryCondition, CanonicalPde, Domain, PhysicsHints, Side};
    use crate::expr::ExprTree;

    fn dirichlet(axis: u32) -> BoundaryCondition {
        BoundaryCondition {
            kind: BcKind::Dirichlet,
            axis,
            side: Side::Both,
            value: ExprTree::num(0.0),
        }
    }

    fn pde(src: &str, dims: u32, time: bool, ic: Option<&str>) -> CanonicalPde {
        let mut domain = Domain::unit_box(dims);
        if time {
            domain = domain.with_time(0.0, 1.0);
        }
        CanonicalPde::new(
            &parse(src).unwrap(),
            (1..=dims).map(dirichlet).collect(),
            ic.map(|s| parse(s).unwrap()),
            domain,
            PhysicsHints::default(),
        )
        .unwrap()
    }

    #[test]
    fn families() {
        let f = |p: &CanonicalPde| classify(p);
        assert_eq!(f(&pde("u_xx + sin(x)", 1, false, None)), Ok(Family::Poisson1d));
        assert_eq!(f(&pde("u_t - u_xx", 1, true, Some("sin(pi*x)"))), Ok(Family::Heat1d));
        assert_eq!(
            f(&pde("u_t + u*u_x - 0.01*u_xx", 1, true, Some("sin(pi*x)"))),
            Ok(Family::Burgers1d)
        );
        assert_eq!(f(&pde("u_xx + u_yy", 2, false, None)), Ok(Family::Poisson2d));
        let ks = pde("u_t + u*u_x + u_xx + u_xxxx", 1, true, Some("sin(x)"));
        assert_eq!(
            f(&ks).unwrap_err().to_string(),
            "unsupported PDE family: order-4 operator"
        );
    }

    #[test]
    fn zero_init_on_homogeneous_poisson_has_zero_loss() {
        let p = pde("u_xx", 1, false, None);
        let cfg = TrainConfig {
            steps: 3,
            ..TrainConfig::default()
        };
        let problem = Problem::new(&p, &cfg.sampling()).unwrap();
        let mut net = NetSpec::new(1, 2, 8);
        net.init = Init::ZeroOutput;
        let out = train(&problem, &net, &cfg).unwrap();
        assert_eq!(out.trace.records[0].loss, 0.0);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let p = pde("u_xx", 1, false, None);
        let cfg = TrainConfig::default();
        let problem = Problem::new(&p, &cfg.sampling()).unwrap();
        let err = train(&problem, &NetSpec::new(2, 1, 4), &cfg).unwrap_err();
        assert_eq!(err.to_string(), "shape mismatch: expected 1 inputs, got 2");
    }

    #[test]
    fn fd_step_bound() {
        let p = pde("u_xx", 1, false, None);
        let cfg = TrainConfig {
            fd_step: 0.2,
            ..TrainConfig::default()
        };
        assert!(matches!(Problem::new(&p, &cfg.sampling()), Err(TrainError::ConfigInvalid(_))));
    }

    #[test]
    fn midpoint_grid_layout() {
        let g = midpoint_grid(&[0.0, 0.0], &[1.0, 2.0], 2);
        assert_eq!(g, vec![vec![0.25, 0.5], vec![0.75, 0.5], vec![0.25, 1.5], vec![0.75, 1.5]]);
    }
}
