//! Dense feed-forward networks with exact reverse-mode gradients.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;

use super::matrix::{matmul, matmul_a_bt, matmul_at_b, Matrix};
use super::NumericError;

static NEXT_TOKEN: AtomicU64 = AtomicU64::new(1);

fn fresh_token() -> u64 {
    NEXT_TOKEN.fetch_add(1, Ordering::Relaxed)
}

/// Elementwise nonlinearity.
///
/// `Tanh` is the bounded squash used on actor outputs; callers rescale its
/// `[-1, 1]` range onto their action bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the pre-activation `z`.
    #[inline]
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }

    pub(crate) fn code(self) -> u32 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
        }
    }

    pub(crate) fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

/// One affine layer: `weights` is `out_dim × in_dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub(crate) in_dim: usize,
    pub(crate) out_dim: usize,
    pub(crate) weights: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl DenseLayer {
    pub fn new(in_dim: usize, out_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self, NumericError> {
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(NumericError::Shape(format!(
                "layer {out_dim}x{in_dim} given {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(Self { in_dim, out_dim, weights, bias })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Row-major `out_dim × in_dim` weights.
    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }
}

/// Network parameters. Hidden layers share one activation; the last layer has its own.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    hidden: Activation,
    output: Activation,
    /// Changes on every parameter mutation so caches from older parameters are detectable.
    token: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers && self.hidden == other.hidden && self.output == other.output
    }
}

/// Activations retained by a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    token: u64,
    /// Input fed to each layer (`inputs[0]` is the network input).
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    pre: Vec<Matrix>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }

    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre
    }
}

/// Parameter gradients, same shapes as the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| LayerGradient { weights: vec![0.0; l.weights.len()], bias: vec![0.0; l.bias.len()] })
                .collect(),
        }
    }

    /// All gradient entries in parameter order (per layer: weights then bias).
    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }
}

impl Mlp {
    /// Builds a network with layer widths `sizes` (input first, output last).
    ///
    /// Weights are uniform in `[-1/√fan_in, 1/√fan_in]`, biases start at zero.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs at least input and output sizes");
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
                let weights = (0..fan_in * fan_out).map(|_| rng.random_range(-bound..=bound)).collect();
                DenseLayer { in_dim: fan_in, out_dim: fan_out, weights, bias: vec![0.0; fan_out] }
            })
            .collect();
        Self { layers, hidden, output, token: fresh_token() }
    }

    pub fn from_layers(layers: Vec<DenseLayer>, hidden: Activation, output: Activation) -> Result<Self, NumericError> {
        if layers.is_empty() {
            return Err(NumericError::Shape("network has no layers".into()));
        }
        for (j, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(NumericError::Shape(format!(
                    "layer {j} outputs {} but layer {} expects {}",
                    pair[0].out_dim,
                    j + 1,
                    pair[1].in_dim
                )));
            }
        }
        for (j, l) in layers.iter().enumerate() {
            if l.weights.iter().chain(&l.bias).any(|x| !x.is_finite()) {
                return Err(NumericError::NonFinite { layer: j });
            }
        }
        Ok(Self { layers, hidden, output, token: fresh_token() })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Mutable access to the raw parameters. Invalidates existing caches.
    pub fn layers_mut(&mut self) -> &mut [DenseLayer] {
        self.token = fresh_token();
        &mut self.layers
    }

    /// Visits every parameter in the same order as [`Gradients::iter`].
    pub fn parameters(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    fn activation_for(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers.len() {
            self.output
        } else {
            self.hidden
        }
    }

    /// Batched forward pass: each row of `input` is one sample.
    pub fn forward_batch(&self, input: &Matrix) -> Result<(Matrix, ForwardCache), NumericError> {
        if input.cols() != self.input_dim() {
            return Err(NumericError::Shape(format!(
                "input has {} columns, network expects {}",
                input.cols(),
                self.input_dim()
            )));
        }
        let n = input.rows();
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = input.clone();
        for (j, layer) in self.layers.iter().enumerate() {
            let mut z = Matrix::zeros(n, layer.out_dim);
            matmul_a_bt(current.as_slice(), &layer.weights, n, layer.in_dim, layer.out_dim, z.as_mut_slice());
            for r in 0..n {
                for (v, b) in z.row_mut(r).iter_mut().zip(&layer.bias) {
                    *v += b;
                }
            }
            let act = self.activation_for(j);
            let a = Matrix::from_vec(n, layer.out_dim, z.as_slice().iter().map(|&v| act.apply(v)).collect());
            inputs.push(current);
            pre.push(z);
            current = a;
        }
        Ok((current, ForwardCache { token: self.token, inputs, pre }))
    }

    /// Single-sample forward pass with a cache.
    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache), NumericError> {
        let (out, cache) = self.forward_batch(&Matrix::from_vec(1, input.len(), input.to_vec()))?;
        Ok((out.into_vec(), cache))
    }

    /// Single-sample evaluation without retaining a cache.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>, NumericError> {
        if input.len() != self.input_dim() {
            return Err(NumericError::Shape(format!(
                "input has length {}, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut current = input.to_vec();
        for (j, layer) in self.layers.iter().enumerate() {
            let act = self.activation_for(j);
            let next = layer
                .weights
                .chunks_exact(layer.in_dim.max(1))
                .zip(&layer.bias)
                .map(|(row, b)| {
                    let z = row.iter().zip(&current).fold(*b, |acc, (w, x)| acc + w * x);
                    act.apply(z)
                })
                .collect::<Vec<_>>();
            current = if layer.in_dim == 0 { layer.bias.iter().map(|&b| act.apply(b)).collect() } else { next };
        }
        Ok(current)
    }

    fn check_cache(&self, cache: &ForwardCache, output_grad: &Matrix) -> Result<(), NumericError> {
        if cache.token != self.token || cache.inputs.len() != self.layers.len() {
            return Err(NumericError::StaleCache);
        }
        if output_grad.rows() != cache.batch_size() || output_grad.cols() != self.output_dim() {
            return Err(NumericError::Shape(format!(
                "output gradient is {}x{}, expected {}x{}",
                output_grad.rows(),
                output_grad.cols(),
                cache.batch_size(),
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// Gradients of `Σ output ⊙ output_grad` with respect to every parameter and the input.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &Matrix) -> Result<(Gradients, Matrix), NumericError> {
        self.backprop(cache, output_grad, true).map(|(g, x)| (g.expect("parameter gradients requested"), x))
    }

    /// Like [`Mlp::backward`] but skips the parameter gradients.
    pub fn input_gradient(&self, cache: &ForwardCache, output_grad: &Matrix) -> Result<Matrix, NumericError> {
        self.backprop(cache, output_grad, false).map(|(_, x)| x)
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        output_grad: &Matrix,
        want_params: bool,
    ) -> Result<(Option<Gradients>, Matrix), NumericError> {
        self.check_cache(cache, output_grad)?;
        let n = cache.batch_size();
        let mut grads = want_params.then(|| Gradients::zeros_like(self));
        let mut upstream = output_grad.clone();
        for j in (0..self.layers.len()).rev() {
            let layer = &self.layers[j];
            let act = self.activation_for(j);
            let mut dz = upstream;
            for (d, &z) in dz.as_mut_slice().iter_mut().zip(cache.pre[j].as_slice()) {
                *d *= act.derivative(z);
            }
            if let Some(g) = grads.as_mut() {
                let lg = &mut g.layers[j];
                matmul_at_b(dz.as_slice(), cache.inputs[j].as_slice(), n, layer.out_dim, layer.in_dim, &mut lg.weights);
                for r in 0..n {
                    for (b, d) in lg.bias.iter_mut().zip(dz.row(r)) {
                        *b += d;
                    }
                }
            }
            let mut dx = Matrix::zeros(n, layer.in_dim);
            matmul(dz.as_slice(), &layer.weights, n, layer.out_dim, layer.in_dim, dx.as_mut_slice());
            upstream = dx;
        }
        Ok((grads, upstream))
    }
}
