//! Dense feed-forward networks in `f64` with a hand-written backward pass.
//!
//! Everything is batched: rows are samples. A forward pass returns a
//! [`ForwardCache`] that a single backward pass consumes; the cache remembers
//! which network (and which parameter version) produced it so a stale cache
//! is rejected instead of silently producing wrong gradients.

mod adam;
mod checkpoint;
pub mod gradcheck;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use adam::Adam;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
    /// Only valid on the last layer.
    Softmax,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
            Activation::Softmax => "softmax",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "relu" => Some(Activation::Relu),
            "linear" => Some(Activation::Linear),
            "softmax" => Some(Activation::Softmax),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `out × in`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }
}

/// Gradients (or any other per-parameter quantity) laid out like a network:
/// one `(weights, biases)` pair per layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl ParamGrads {
    pub fn zeros_like(net: &MlpNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.biases.len())))
                .collect(),
        }
    }

    pub fn scale(&mut self, k: f64) {
        for (w, b) in &mut self.layers {
            *w *= k;
            *b *= k;
        }
    }

    pub fn l2_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|(w, b)| w.iter().chain(b.iter()).map(|x| x * x).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Flattened in checkpoint order (each layer's weights row-major, then biases).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend(w.iter());
            out.extend(b.iter());
        }
        out
    }

    fn same_shape(&self, net: &MlpNet) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|((w, b), l)| w.dim() == l.weights.dim() && b.len() == l.biases.len())
    }
}

/// Values retained by one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    net_id: u64,
    version: u64,
    /// Input to every layer; `inputs[0]` is the network input.
    pub inputs: Vec<Array2<f64>>,
    pub pre_activations: Vec<Array2<f64>>,
    pub activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        self.activations.last().expect("a network has at least one layer")
    }

    pub fn len(&self) -> usize {
        self.activations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.activations.is_empty()
    }
}

static NEXT_NET_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_NET_ID.fetch_add(1, Ordering::Relaxed)
}

/// A multilayer perceptron.
#[derive(Debug)]
pub struct MlpNet {
    layers: Vec<Layer>,
    input_dim: usize,
    id: u64,
    /// Incremented on every parameter mutation.
    version: u64,
}

impl Clone for MlpNet {
    /// The copy is a distinct network: caches of the original are not valid for it.
    fn clone(&self) -> Self {
        Self {
            layers: self.layers.clone(),
            input_dim: self.input_dim,
            id: fresh_id(),
            version: 0,
        }
    }
}

impl PartialEq for MlpNet {
    fn eq(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim && self.layers == other.layers
    }
}

impl MlpNet {
    /// `sizes` lists every width including the input; `activations` has one
    /// entry per layer. Weights are uniform in `±1/√fan_in`, biases zero.
    pub fn new(sizes: &[usize], activations: &[Activation], seed: u64) -> Result<Self> {
        check_topology(sizes, activations)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_fn((fan_out, fan_in), |_| rng.gen_range(-bound..=bound)),
                    biases: Array1::zeros(fan_out),
                    activation,
                }
            })
            .collect();
        Ok(Self::from_parts(layers, sizes[0]))
    }

    /// All parameters zero.
    pub fn zeros(sizes: &[usize], activations: &[Activation]) -> Result<Self> {
        check_topology(sizes, activations)?;
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| Layer {
                weights: Array2::zeros((w[1], w[0])),
                biases: Array1::zeros(w[1]),
                activation,
            })
            .collect();
        Ok(Self::from_parts(layers, sizes[0]))
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Config("a network needs at least one layer".into()))?;
        let input_dim = first.in_dim();
        let mut sizes = vec![input_dim];
        for l in &layers {
            if l.biases.len() != l.out_dim() {
                return Err(Error::Dimension {
                    expected: l.out_dim(),
                    got: l.biases.len(),
                });
            }
            let prev = *sizes.last().unwrap();
            if l.in_dim() != prev {
                return Err(Error::Dimension {
                    expected: prev,
                    got: l.in_dim(),
                });
            }
            sizes.push(l.out_dim());
        }
        let acts: Vec<_> = layers.iter().map(|l| l.activation).collect();
        check_topology(&sizes, &acts)?;
        Ok(Self::from_parts(layers, input_dim))
    }

    fn from_parts(layers: Vec<Layer>, input_dim: usize) -> Self {
        Self {
            layers,
            input_dim,
            id: fresh_id(),
            version: 0,
        }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable access to the parameters. Invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, Layer::out_dim)
    }

    /// Widths including the input.
    pub fn sizes(&self) -> Vec<usize> {
        std::iter::once(self.input_dim)
            .chain(self.layers.iter().map(Layer::out_dim))
            .collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Same sizes and activations.
    pub fn same_topology(&self, other: &MlpNet) -> bool {
        self.sizes() == other.sizes() && self.activations() == other.activations()
    }

    pub fn forward_batch(&self, input: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(input)?;
        let n = self.layers.len();
        let mut cache = ForwardCache {
            net_id: self.id,
            version: self.version,
            inputs: Vec::with_capacity(n),
            pre_activations: Vec::with_capacity(n),
            activations: Vec::with_capacity(n),
        };
        let mut a = input.to_owned();
        for layer in &self.layers {
            let z = affine(layer, a.view());
            let out = activate(layer.activation, &z);
            cache.inputs.push(a);
            cache.pre_activations.push(z);
            a = out.clone();
            cache.activations.push(out);
        }
        Ok((a, cache))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict_batch(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(input)?;
        let mut a = input.to_owned();
        for layer in &self.layers {
            a = activate(layer.activation, &affine(layer, a.view()));
        }
        Ok(a)
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let x = row(input);
        let (y, cache) = self.forward_batch(x.view())?;
        Ok((y.into_raw_vec_and_offset().0, cache))
    }

    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_batch(row(input).view())?.into_raw_vec_and_offset().0)
    }

    /// Reverse mode. `output_grad` is ∂L/∂output for every row of the batch;
    /// parameter gradients are summed over the batch. Returns the parameter
    /// gradients and ∂L/∂input.
    pub fn backward_batch(
        &self,
        cache: ForwardCache,
        output_grad: ArrayView2<f64>,
    ) -> Result<(ParamGrads, Array2<f64>)> {
        if cache.net_id != self.id || cache.version != self.version {
            return Err(Error::Usage(
                "forward cache does not belong to the current parameters of this network".into(),
            ));
        }
        if cache.len() != self.layers.len() {
            return Err(Error::Usage("forward cache is incomplete".into()));
        }
        let out = cache.output();
        if output_grad.dim() != out.dim() {
            return Err(Error::Dimension {
                expected: out.len(),
                got: output_grad.len(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = output_grad.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let dz = match layer.activation {
                Activation::Linear => g,
                Activation::Relu => {
                    let mut dz = g;
                    Zip::from(&mut dz)
                        .and(&cache.pre_activations[i])
                        .for_each(|d, &z| {
                            if z <= 0.0 {
                                *d = 0.0;
                            }
                        });
                    dz
                }
                Activation::Softmax => {
                    let y = &cache.activations[i];
                    let dot = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                    (&g - &dot) * y
                }
            };
            let dw = dz.t().dot(&cache.inputs[i]);
            let db = dz.sum_axis(Axis(0));
            g = dz.dot(&layer.weights);
            grads.push((dw, db));
        }
        grads.reverse();
        Ok((ParamGrads { layers: grads }, g))
    }

    pub fn backward(&self, cache: ForwardCache, output_grad: &[f64]) -> Result<(ParamGrads, Vec<f64>)> {
        let (grads, dx) = self.backward_batch(cache, row(output_grad).view())?;
        Ok((grads, dx.into_raw_vec_and_offset().0))
    }

    /// `self ← (1 − τ)·self + τ·source`, elementwise.
    pub fn soft_update(&mut self, source: &MlpNet, tau: f64) -> Result<()> {
        if !self.same_topology(source) {
            return Err(Error::Config("soft update between different topologies".into()));
        }
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::Config(format!("tau must lie in [0, 1], got {tau}")));
        }
        for (t, s) in self.layers_mut().iter_mut().zip(&source.layers) {
            Zip::from(&mut t.weights)
                .and(&s.weights)
                .for_each(|t, &s| *t = (1.0 - tau) * *t + tau * s);
            Zip::from(&mut t.biases)
                .and(&s.biases)
                .for_each(|t, &s| *t = (1.0 - tau) * *t + tau * s);
        }
        Ok(())
    }

    /// Parameters flattened in checkpoint order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend(l.weights.iter());
            out.extend(l.biases.iter());
        }
        out
    }

    /// Overwrites every parameter from a flat vector in checkpoint order.
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                got: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for l in self.layers_mut() {
            l.weights.iter_mut().for_each(|w| *w = it.next().unwrap());
            l.biases.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    fn check_input(&self, input: ArrayView2<f64>) -> Result<()> {
        if input.ncols() != self.input_dim {
            return Err(Error::Dimension {
                expected: self.input_dim,
                got: input.ncols(),
            });
        }
        Ok(())
    }
}

fn check_topology(sizes: &[usize], activations: &[Activation]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::Config("need at least an input and an output width".into()));
    }
    if activations.len() != sizes.len() - 1 {
        return Err(Error::Config(format!(
            "{} layers but {} activations",
            sizes.len() - 1,
            activations.len()
        )));
    }
    if sizes.contains(&0) {
        return Err(Error::Config("layer widths must be positive".into()));
    }
    if activations[..activations.len() - 1].contains(&Activation::Softmax) {
        return Err(Error::Config("softmax is only allowed on the last layer".into()));
    }
    Ok(())
}

fn row(v: &[f64]) -> Array2<f64> {
    Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row vector shape")
}

fn affine(layer: &Layer, a: ArrayView2<f64>) -> Array2<f64> {
    let mut z = a.dot(&layer.weights.t());
    z += &layer.biases;
    z
}

fn activate(act: Activation, z: &Array2<f64>) -> Array2<f64> {
    match act {
        Activation::Linear => z.clone(),
        Activation::Relu => z.mapv(|v| v.max(0.0)),
        Activation::Softmax => {
            let mut out = z.clone();
            for mut r in out.rows_mut() {
                softmax_in_place(r.as_slice_mut().expect("contiguous rows"));
            }
            out
        }
    }
}

/// Numerically stable softmax (max subtracted before exponentiating).
pub fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let mut out = v.to_vec();
    softmax_in_place(&mut out);
    out
}
