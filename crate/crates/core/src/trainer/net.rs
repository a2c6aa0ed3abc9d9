//! Fully-connected network over a flat parameter vector.

use alloc::vec;
use alloc::vec::Vec;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Sine,
}

impl Activation {
    pub fn as_str(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sine => "sine",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Xavier-uniform weights, zero biases.
    Xavier,
    /// Xavier hidden layers, zero output layer: the network starts at `u ≡ 0`.
    ZeroOutput,
}

impl Init {
    pub fn as_str(self) -> &'static str {
        match self {
            Init::Xavier => "xavier",
            Init::ZeroOutput => "zero_output",
        }
    }
}

/// `depth` hidden layers of `width` units mapping `inputs` coordinates to one output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetSpec {
    pub inputs: usize,
    pub depth: usize,
    pub width: usize,
    pub activation: Activation,
    pub init: Init,
}

impl NetSpec {
    pub fn new(inputs: usize, depth: usize, width: usize) -> Self {
        NetSpec {
            inputs,
            depth,
            width,
            activation: Activation::Tanh,
            init: Init::Xavier,
        }
    }

    /// `(fan_in, fan_out)` of every affine layer.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::with_capacity(self.depth + 1);
        let mut fan_in = self.inputs;
        for _ in 0..self.depth {
            shapes.push((fan_in, self.width));
            fan_in = self.width;
        }
        shapes.push((fan_in, 1));
        shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_shapes().iter().map(|(i, o)| (i + 1) * o).sum()
    }
}

/// Uniform sample in `[0, 1)` with 53 bits of precision.
pub fn uniform<R: RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    fan_in: usize,
    fan_out: usize,
    w: usize,
    b: usize,
}

/// Network topology plus per-evaluation scratch buffers.
#[derive(Debug, Clone)]
pub struct Mlp {
    pub spec: NetSpec,
    layers: Vec<Layer>,
}

/// Activations of one forward pass, kept for backprop.
#[derive(Debug, Clone, Default)]
pub struct Cache {
    /// `acts[0]` is the input; `acts[l+1]` the output of hidden layer `l`.
    acts: Vec<Vec<f64>>,
    /// Pre-activations of hidden layers (needed for the sine derivative).
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(spec: NetSpec) -> Self {
        let mut off = 0;
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let l = Layer {
                    fan_in,
                    fan_out,
                    w: off,
                    b: off + fan_in * fan_out,
                };
                off += (fan_in + 1) * fan_out;
                l
            })
            .collect();
        Mlp { spec, layers }
    }

    pub fn parameter_count(&self) -> usize {
        self.spec.parameter_count()
    }

    pub fn init_params<R: RngCore>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.parameter_count()];
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            if i == last && self.spec.init == Init::ZeroOutput {
                continue;
            }
            let bound = libm::sqrt(6.0 / (l.fan_in + l.fan_out) as f64);
            for w in &mut p[l.w..l.b] {
                *w = (2.0 * uniform(rng) - 1.0) * bound;
            }
        }
        p
    }

    pub fn cache(&self) -> Cache {
        Cache {
            acts: core::iter::once(self.spec.inputs)
                .chain(self.layers[..self.layers.len() - 1].iter().map(|l| l.fan_out))
                .map(|n| vec![0.0; n])
                .collect(),
            pre: self.layers[..self.layers.len() - 1]
                .iter()
                .map(|l| vec![0.0; l.fan_out])
                .collect(),
        }
    }

    fn activate(&self, z: f64) -> f64 {
        match self.spec.activation {
            Activation::Tanh => libm::tanh(z),
            Activation::Sine => libm::sin(z),
        }
    }

    fn activation_slope(&self, z: f64, a: f64) -> f64 {
        match self.spec.activation {
            Activation::Tanh => 1.0 - a * a,
            Activation::Sine => libm::cos(z),
        }
    }

    pub fn forward(&self, params: &[f64], x: &[f64], cache: &mut Cache) -> f64 {
        cache.acts[0].copy_from_slice(x);
        let hidden = self.layers.len() - 1;
        for (li, l) in self.layers[..hidden].iter().enumerate() {
            let (prev, rest) = cache.acts.split_at_mut(li + 1);
            let input = &prev[li];
            let out = &mut rest[0];
            let pre = &mut cache.pre[li];
            for o in 0..l.fan_out {
                let row = &params[l.w + o * l.fan_in..l.w + (o + 1) * l.fan_in];
                let z = params[l.b + o] + row.iter().zip(input).map(|(w, a)| w * a).sum::<f64>();
                pre[o] = z;
                out[o] = self.activate(z);
            }
        }
        let l = self.layers[hidden];
        let input = &cache.acts[hidden];
        params[l.b] + params[l.w..l.b].iter().zip(input).map(|(w, a)| w * a).sum::<f64>()
    }

    /// Accumulates `upstream · ∂output/∂θ` into `grad` for the pass stored in `cache`.
    pub fn backward(&self, params: &[f64], cache: &Cache, upstream: f64, grad: &mut [f64], scratch: &mut Vec<f64>) {
        let hidden = self.layers.len() - 1;
        let l = self.layers[hidden];
        // delta holds dL/d(activation) of the current layer's input.
        let mut delta: Vec<f64> = core::mem::take(scratch);
        delta.clear();
        delta.resize(l.fan_in, 0.0);
        grad[l.b] += upstream;
        for i in 0..l.fan_in {
            grad[l.w + i] += upstream * cache.acts[hidden][i];
            delta[i] = upstream * params[l.w + i];
        }
        let mut next = Vec::new();
        for li in (0..hidden).rev() {
            let l = self.layers[li];
            let a_out = &cache.acts[li + 1];
            let a_in = &cache.acts[li];
            next.clear();
            next.resize(l.fan_in, 0.0);
            for o in 0..l.fan_out {
                let dz = delta[o] * self.activation_slope(cache.pre[li][o], a_out[o]);
                if dz == 0.0 {
                    continue;
                }
                grad[l.b + o] += dz;
                let row = l.w + o * l.fan_in;
                for i in 0..l.fan_in {
                    grad[row + i] += dz * a_in[i];
                    next[i] += dz * params[row + i];
                }
            }
            core::mem::swap(&mut delta, &mut next);
        }
        *scratch = delta;
    }
}
