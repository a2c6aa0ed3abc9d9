//! A PDE compiled into a collocation objective: finite-difference stencils
//! for every derivative in the residual, plus boundary and initial terms.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use super::net::{uniform, Cache, Mlp};
use super::program::{CompileError, Dual, Program, Signature, Symbols, MAX_QUANTITIES};
use super::TrainError;
use crate::expr::{Node, TIME_AXIS};
use crate::pde::{BcKind, CanonicalPde, Side};

/// The four equation families the desk-scale trainer accepts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Poisson1d,
    Heat1d,
    Burgers1d,
    Poisson2d,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::Poisson1d => "poisson-1d",
            Family::Heat1d => "heat-1d",
            Family::Burgers1d => "burgers-1d",
            Family::Poisson2d => "poisson-2d",
        }
    }
}

fn max_time_order(pde: &CanonicalPde) -> u32 {
    let mut m = 0;
    pde.residual().walk(&mut |t| {
        if let Node::TimeDeriv { order } = t.node {
            m = m.max(order);
        }
    });
    m
}

pub fn classify(pde: &CanonicalPde) -> Result<Family, TrainError> {
    let meta = pde.metadata();
    let d = pde.domain.dims;
    let unsupported = |what: String| Err(TrainError::UnsupportedPde(what));
    if pde.fields().len() != 1 {
        return unsupported(format!("{}-field system", pde.fields().len()));
    }
    if meta.nonlocal {
        return unsupported("nonlocal operator".into());
    }
    if meta.max_order > 2 {
        return unsupported(format!("order-{} operator", meta.max_order));
    }
    let time = max_time_order(pde);
    if time > 1 {
        return unsupported(format!("order-{time} time derivative"));
    }
    if time == 1 && pde.domain.time.is_none() {
        return unsupported("time derivative without a time interval".into());
    }
    match (d, time, meta.linear) {
        (1, 0, true) => Ok(Family::Poisson1d),
        (1, 1, true) => Ok(Family::Heat1d),
        (1, 1, false) => Ok(Family::Burgers1d),
        (2, 0, true) => Ok(Family::Poisson2d),
        (d, t, linear) => unsupported(format!(
            "{}{}D {}",
            if linear { "linear " } else { "nonlinear " },
            d,
            if t > 0 { "evolution" } else { "steady" }
        )),
    }
}

/// Collocation sizes and the finite-difference step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sampling {
    pub interior: usize,
    /// Points per boundary face (and for the initial slice).
    pub boundary: usize,
    pub fd_step: f64,
    pub seed: u64,
}

/// `Σ coeff · N(x + offset)` for each derivative quantity.
#[derive(Debug, Clone)]
struct Stencil {
    offsets: Vec<Vec<f64>>,
    /// Per quantity slot: `(offset index, coefficient)`.
    weights: Vec<Vec<(usize, f64)>>,
}

impl Stencil {
    fn build(inputs: usize, signatures: &[Signature], h: f64) -> Result<Self, TrainError> {
        let mut s = Stencil {
            offsets: vec![vec![0.0; inputs]],
            weights: vec![vec![(0, 1.0)]],
        };
        for sig in signatures {
            let terms: Vec<(Vec<(usize, f64)>, f64)> = match sig.as_slice() {
                [(a, 1)] => vec![
                    (vec![(*a, h)], 0.5 / h),
                    (vec![(*a, -h)], -0.5 / h),
                ],
                [(a, 2)] => vec![
                    (vec![(*a, h)], 1.0 / (h * h)),
                    (vec![], -2.0 / (h * h)),
                    (vec![(*a, -h)], 1.0 / (h * h)),
                ],
                [(a, 1), (b, 1)] => {
                    let c = 0.25 / (h * h);
                    vec![
                        (vec![(*a, h), (*b, h)], c),
                        (vec![(*a, h), (*b, -h)], -c),
                        (vec![(*a, -h), (*b, h)], -c),
                        (vec![(*a, -h), (*b, -h)], c),
                    ]
                }
                _ => {
                    return Err(TrainError::UnsupportedPde(
                        "derivative beyond second order per axis".into(),
                    ))
                }
            };
            let mut w = Vec::new();
            for (shift, coeff) in terms {
                let mut off = vec![0.0; inputs];
                for (axis, delta) in shift {
                    off[axis] = delta;
                }
                let idx = match s.offsets.iter().position(|o| *o == off) {
                    Some(i) => i,
                    None => {
                        s.offsets.push(off);
                        s.offsets.len() - 1
                    }
                };
                w.push((idx, coeff));
            }
            s.weights.push(w);
        }
        Ok(s)
    }
}

/// One boundary or initial constraint: `Σ coeff · N(point) = target`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryTerm {
    pub points: Vec<(Vec<f64>, f64)>,
    pub target: f64,
}

#[derive(Debug, Clone)]
enum FaceRule {
    /// `a·u + b·∂u/∂axis = value` on the face `coords[axis] = at`.
    Mixed {
        axis: usize,
        at: f64,
        a: f64,
        b: f64,
        value: Program,
    },
    /// `u(axis = lo) = u(axis = hi)`.
    Periodic { axis: usize },
    /// `u(t = t0) = value` with `axis` the time coordinate.
    Initial { axis: usize, value: Program },
}

/// A trainable objective for one PDE.
#[derive(Debug, Clone)]
pub struct Problem {
    pub family: Family,
    /// Input coordinate names: spatial axes, then `t` when time-dependent.
    pub coords: Vec<String>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    residual: Program,
    stencil: Stencil,
    faces: Vec<FaceRule>,
    pub interior: Vec<Vec<f64>>,
    pub boundary: Vec<BoundaryTerm>,
    pub fd_step: f64,
}

fn compile_err(e: CompileError) -> TrainError {
    match e {
        CompileError::FreeSymbol(s) => TrainError::Residual(format!("undefined symbol: {s}")),
        CompileError::UnknownAxis(a) => TrainError::Residual(format!("undefined derivative axis: {a}")),
        CompileError::ComplexDerivative => {
            TrainError::Residual("undefined derivative of a compound expression".into())
        }
        CompileError::TooManyQuantities => {
            TrainError::UnsupportedPde("too many distinct derivative terms".into())
        }
    }
}

/// Axis extents must leave room for the stencil: `h < min extent / 10`.
pub fn check_fd_step(pde: &CanonicalPde, h: f64) -> Result<(), TrainError> {
    let limit = pde.domain.min_extent() / 10.0;
    if !(h > 0.0 && h < limit) {
        return Err(TrainError::ConfigInvalid(format!(
            "fd_step {h} must lie in (0, {limit})"
        )));
    }
    Ok(())
}

impl Problem {
    pub fn new(pde: &CanonicalPde, sampling: &Sampling) -> Result<Self, TrainError> {
        let family = classify(pde)?;
        check_fd_step(pde, sampling.fd_step)?;
        let field = pde.fields().into_iter().next().unwrap();
        let mut coords = pde.domain.axis_names();
        let mut lo: Vec<f64> = pde.domain.extents.iter().map(|e| e[0]).collect();
        let mut hi: Vec<f64> = pde.domain.extents.iter().map(|e| e[1]).collect();
        let time_axis = pde.is_time_dependent().then(|| {
            let [t0, t1] = pde.domain.time.unwrap();
            coords.push(TIME_AXIS.to_string());
            lo.push(t0);
            hi.push(t1);
            coords.len() - 1
        });
        let inputs = coords.len();

        let mut signatures = Vec::new();
        let residual = Program::compile(
            pde.residual(),
            &mut Symbols {
                field: Some(&field),
                coords: &coords,
                signatures: &mut signatures,
            },
        )
        .map_err(compile_err)?;
        let stencil = Stencil::build(inputs, &signatures, sampling.fd_step)?;

        let value_program = |tree| {
            let mut none = Vec::new();
            Program::compile(
                tree,
                &mut Symbols {
                    field: None,
                    coords: &coords,
                    signatures: &mut none,
                },
            )
            .map_err(compile_err)
        };
        let mut faces = Vec::new();
        for bc in &pde.bcs {
            let axis = bc.axis as usize - 1;
            if bc.kind == BcKind::Periodic {
                faces.push(FaceRule::Periodic { axis });
                continue;
            }
            let (a, b) = match bc.kind {
                BcKind::Dirichlet => (1.0, 0.0),
                BcKind::Neumann => (0.0, 1.0),
                _ => (1.0, 1.0),
            };
            let sides: &[f64] = match bc.side {
                Side::Min => &[lo[axis]],
                Side::Max => &[hi[axis]],
                Side::Both => &[lo[axis], hi[axis]],
            };
            for &at in sides {
                faces.push(FaceRule::Mixed {
                    axis,
                    at,
                    a,
                    b,
                    value: value_program(&bc.value)?,
                });
            }
        }
        for p in &pde.domain.periodic {
            let axis = *p as usize - 1;
            if !faces
                .iter()
                .any(|f| matches!(f, FaceRule::Periodic { axis: a } if *a == axis))
            {
                faces.push(FaceRule::Periodic { axis });
            }
        }
        if let (Some(axis), Some(ic)) = (time_axis, &pde.ic) {
            faces.push(FaceRule::Initial {
                axis,
                value: value_program(ic)?,
            });
        }

        let mut problem = Problem {
            family,
            coords,
            lo,
            hi,
            residual,
            stencil,
            faces,
            interior: Vec::new(),
            boundary: Vec::new(),
            fd_step: sampling.fd_step,
        };
        problem.sample(sampling);
        Ok(problem)
    }

    pub fn inputs(&self) -> usize {
        self.coords.len()
    }

    fn random_point<R: RngCore>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| a + (b - a) * uniform(rng))
            .collect()
    }

    /// Draws the fixed collocation set from `sampling.seed`.
    pub fn sample(&mut self, sampling: &Sampling) {
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(sampling.seed);
        self.interior = (0..sampling.interior).map(|_| self.random_point(&mut rng)).collect();
        let h = sampling.fd_step;
        let mut boundary = Vec::new();
        // A face of a one-coordinate domain is a single point.
        let per_face = if self.inputs() == 1 { 1 } else { sampling.boundary };
        for face in &self.faces {
            for _ in 0..per_face {
                let mut p = self.random_point(&mut rng);
                let term = match face {
                    FaceRule::Mixed { axis, at, a, b, value } => {
                        p[*axis] = *at;
                        let mut points = Vec::new();
                        if *a != 0.0 {
                            points.push((p.clone(), *a));
                        }
                        if *b != 0.0 {
                            let mut up = p.clone();
                            up[*axis] += h;
                            let mut dn = p.clone();
                            dn[*axis] -= h;
                            points.push((up, b * 0.5 / h));
                            points.push((dn, -b * 0.5 / h));
                        }
                        BoundaryTerm {
                            target: value.value(&p),
                            points,
                        }
                    }
                    FaceRule::Periodic { axis } => {
                        let mut q = p.clone();
                        p[*axis] = self.lo[*axis];
                        q[*axis] = self.hi[*axis];
                        BoundaryTerm {
                            points: vec![(p, 1.0), (q, -1.0)],
                            target: 0.0,
                        }
                    }
                    FaceRule::Initial { axis, value } => {
                        p[*axis] = self.lo[*axis];
                        BoundaryTerm {
                            target: value.value(&p),
                            points: vec![(p, 1.0)],
                        }
                    }
                };
                boundary.push(term);
            }
        }
        self.boundary = boundary;
    }

    /// Residual value at `p` for the network, with per-offset partials in `dn`.
    fn residual_at(
        &self,
        net: &Mlp,
        params: &[f64],
        p: &[f64],
        ws: &mut Workspace,
    ) -> Dual {
        let inputs = self.inputs();
        for (s, off) in self.stencil.offsets.iter().enumerate() {
            for k in 0..inputs {
                ws.x[k] = p[k] + off[k];
            }
            ws.outputs[s] = net.forward(params, &ws.x[..inputs], &mut ws.caches[s]);
        }
        let mut q = [0.0; MAX_QUANTITIES];
        for (i, w) in self.stencil.weights.iter().enumerate() {
            q[i] = w.iter().map(|(s, c)| c * ws.outputs[*s]).sum();
        }
        self.residual.eval(p, &q, &mut ws.stack)
    }

    /// Total loss; when `grad` is given it is overwritten with `∇θ L`.
    pub fn loss(
        &self,
        net: &Mlp,
        params: &[f64],
        penalty: f64,
        mut grad: Option<&mut [f64]>,
        ws: &mut Workspace,
    ) -> f64 {
        if let Some(g) = grad.as_deref_mut() {
            g.fill(0.0);
        }
        let mut loss = 0.0;
        let ni = self.interior.len().max(1) as f64;
        for p in &self.interior {
            let r = self.residual_at(net, params, p, ws);
            loss += r.v * r.v / ni;
            if let Some(g) = grad.as_deref_mut() {
                ws.upstream.iter_mut().for_each(|u| *u = 0.0);
                for (i, w) in self.stencil.weights.iter().enumerate() {
                    if r.d[i] == 0.0 {
                        continue;
                    }
                    for (s, c) in w {
                        ws.upstream[*s] += r.d[i] * c;
                    }
                }
                for s in 0..self.stencil.offsets.len() {
                    let up = 2.0 * r.v * ws.upstream[s] / ni;
                    if up != 0.0 {
                        net.backward(params, &ws.caches[s], up, g, &mut ws.scratch);
                    }
                }
            }
        }
        let nb = self.boundary.len().max(1) as f64;
        for term in &self.boundary {
            let mut v = -term.target;
            for (j, (x, c)) in term.points.iter().enumerate() {
                v += c * net.forward(params, x, &mut ws.caches[j]);
            }
            loss += penalty * v * v / nb;
            if let Some(g) = grad.as_deref_mut() {
                for (j, (_, c)) in term.points.iter().enumerate() {
                    net.backward(params, &ws.caches[j], penalty * 2.0 * v * c / nb, g, &mut ws.scratch);
                }
            }
        }
        loss
    }

    /// Mean squared residual over a midpoint grid with `n` points per axis.
    pub fn residual_mse(&self, net: &Mlp, params: &[f64], n: usize) -> f64 {
        let mut ws = Workspace::new(net, self);
        let grid = midpoint_grid(&self.lo, &self.hi, n);
        let total: f64 = grid
            .iter()
            .map(|p| {
                let r = self.residual_at(net, params, p, &mut ws).v;
                r * r
            })
            .sum();
        total / grid.len().max(1) as f64
    }
}

/// Cell-midpoint tensor grid over the box `[lo, hi]`.
pub fn midpoint_grid(lo: &[f64], hi: &[f64], n: usize) -> Vec<Vec<f64>> {
    let dims = lo.len();
    let total = n.pow(dims as u32);
    (0..total)
        .map(|mut idx| {
            (0..dims)
                .map(|k| {
                    let i = idx % n;
                    idx /= n;
                    lo[k] + (i as f64 + 0.5) * (hi[k] - lo[k]) / n as f64
                })
                .collect()
        })
        .collect()
}

/// Scratch buffers reused across loss evaluations.
#[derive(Debug, Clone)]
pub struct Workspace {
    caches: Vec<Cache>,
    outputs: Vec<f64>,
    upstream: Vec<f64>,
    x: Vec<f64>,
    stack: Vec<Dual>,
    scratch: Vec<f64>,
}

impl Workspace {
    pub fn new(net: &Mlp, problem: &Problem) -> Self {
        let n = problem.stencil.offsets.len().max(3);
        Workspace {
            caches: (0..n).map(|_| net.cache()).collect(),
            outputs: vec![0.0; n],
            upstream: vec![0.0; n],
            x: vec![0.0; problem.inputs()],
            stack: Vec::new(),
            scratch: Vec::new(),
        }
    }
}
