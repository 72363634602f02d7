//! Per-layer forward models and the curiosity reward derived from their prediction error.
//!
//! A forward model maps `state ‖ action` to a predicted next state. Its error
//! `mean_d (s′_d − ŝ′_d)² / 2` is the raw curiosity; a bounded history of raw values turns
//! it into a reward in `[-1, 0]` by min/max scaling, which is then blended with the sparse
//! extrinsic reward through `η`.

use std::collections::VecDeque;

use rand::Rng;

use crate::hindsight::Transition;
use crate::numeric::{adam_step, Activation, AdamState, Matrix, Mlp, NumericError};

/// Raw curiosity of one prediction: half the mean squared componentwise error.
pub fn raw_curiosity(next_state: &[f64], predicted: &[f64]) -> f64 {
    debug_assert_eq!(next_state.len(), predicted.len());
    if next_state.is_empty() {
        return 0.0;
    }
    let sq: f64 = next_state.iter().zip(predicted).map(|(s, p)| (s - p) * (s - p)).sum();
    sq / next_state.len() as f64 / 2.0
}

#[derive(Debug, Clone)]
pub struct LayerForwardModel {
    net: Mlp,
    opt: AdamState,
    state_dim: usize,
    action_dim: usize,
    lr: f64,
}

impl LayerForwardModel {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, action_dim: usize, hidden: &[usize], lr: f64, rng: &mut R) -> Self {
        let mut sizes = vec![state_dim + action_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(state_dim);
        let net = Mlp::new(&sizes, Activation::Relu, Activation::Identity, rng);
        Self::from_net(net, action_dim, lr).expect("sizes chain by construction")
    }

    pub fn from_net(net: Mlp, action_dim: usize, lr: f64) -> Result<Self, NumericError> {
        let state_dim = net.output_dim();
        if net.input_dim() != state_dim + action_dim {
            return Err(NumericError::Shape(format!(
                "forward model takes {} inputs, expected {state_dim} + {action_dim}",
                net.input_dim()
            )));
        }
        let opt = AdamState::new(&net);
        Ok(Self { net, opt, state_dim, action_dim, lr })
    }

    pub fn net(&self) -> &Mlp {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut Mlp {
        &mut self.net
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.opt
    }

    pub fn set_optimizer(&mut self, opt: AdamState) {
        self.opt = opt;
    }

    pub fn input_dim(&self) -> usize {
        self.state_dim + self.action_dim
    }

    /// Predicted next state for one `(state, action)`.
    pub fn predict(&self, state: &[f64], action: &[f64]) -> Result<Vec<f64>, NumericError> {
        if state.len() != self.state_dim || action.len() != self.action_dim {
            return Err(NumericError::Shape(format!(
                "forward model expects state {} and action {}, got {} and {}",
                self.state_dim,
                self.action_dim,
                state.len(),
                action.len()
            )));
        }
        let input: Vec<f64> = state.iter().chain(action).copied().collect();
        self.net.predict(&input)
    }

    fn inputs(&self, batch: &[Transition]) -> (Matrix, Matrix) {
        let n = batch.len();
        let mut x = Vec::with_capacity(n * self.input_dim());
        let mut y = Vec::with_capacity(n * self.state_dim);
        for t in batch {
            x.extend_from_slice(&t.state);
            x.extend_from_slice(&t.action);
            y.extend_from_slice(&t.next_state);
        }
        (Matrix::from_vec(n, self.input_dim(), x), Matrix::from_vec(n, self.state_dim, y))
    }

    /// Raw curiosity for every transition, computed in one batched pass.
    pub fn batch_raw_curiosity(&self, batch: &[Transition]) -> Result<Vec<f64>, NumericError> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let (x, y) = self.inputs(batch);
        let (pred, _) = self.net.forward_batch(&x)?;
        Ok((0..y.rows()).map(|r| raw_curiosity(y.row(r), pred.row(r))).collect())
    }

    /// One ADAM step on the mean raw-curiosity loss; returns the loss before the step.
    ///
    /// A non-finite loss or gradient skips the step and yields `Ok(None)`.
    pub fn train(&mut self, batch: &[Transition]) -> Result<Option<f64>, NumericError> {
        if batch.is_empty() {
            return Err(NumericError::InvalidArgument("empty forward-model batch".into()));
        }
        let (x, y) = self.inputs(batch);
        let (loss, grad, cache) = self.loss_and_output_grad(&x, &y)?;
        if !loss.is_finite() {
            log::warn!("forward model: non-finite loss, step skipped");
            return Ok(None);
        }
        let (grads, _) = self.net.backward(&cache, &grad)?;
        match adam_step(&mut self.net, &grads, &mut self.opt, self.lr) {
            Ok(()) => Ok(Some(loss)),
            Err(NumericError::NonFinite { layer }) => {
                log::warn!("forward model: non-finite gradient in layer {layer}, step skipped");
                Ok(None)
            }
            Err(e) => Err(e),
        }
    }

    fn loss_and_output_grad(&self, x: &Matrix, y: &Matrix) -> Result<(f64, Matrix, crate::numeric::ForwardCache), NumericError> {
        let (pred, cache) = self.net.forward_batch(x)?;
        let scale = (y.rows() * y.cols()) as f64;
        let mut grad = Matrix::zeros(pred.rows(), pred.cols());
        let mut loss = 0.0;
        for ((g, &p), &t) in grad.as_mut_slice().iter_mut().zip(pred.as_slice()).zip(y.as_slice()) {
            let d = p - t;
            loss += 0.5 * d * d / scale;
            *g = d / scale;
        }
        Ok((loss, grad, cache))
    }

    /// Loss value and parameter gradient without stepping (used by gradient checks).
    pub fn loss_and_gradient(net: &Mlp, batch: &[(Vec<f64>, Vec<f64>, Vec<f64>)]) -> (f64, crate::numeric::Gradients) {
        let n = batch.len();
        let sd = net.output_dim();
        let x = Matrix::from_vec(n, net.input_dim(), batch.iter().flat_map(|(s, a, _)| s.iter().chain(a).copied()).collect());
        let y = Matrix::from_vec(n, sd, batch.iter().flat_map(|(_, _, s2)| s2.iter().copied()).collect());
        let model = LayerForwardModel { net: net.clone(), opt: AdamState::new(net), state_dim: sd, action_dim: net.input_dim() - sd, lr: 1.0 };
        let (loss, grad, cache) = model.loss_and_output_grad(&x, &y).expect("shapes built above");
        let (g, _) = model.net.backward(&cache, &grad).expect("fresh cache");
        (loss, g)
    }
}

/// Bounded FIFO of raw curiosity values with their running extrema.
#[derive(Debug, Clone)]
pub struct CuriosityNormalizer {
    /// `None` keeps the whole history.
    capacity: Option<usize>,
    history: VecDeque<f64>,
    min: f64,
    max: f64,
}

impl CuriosityNormalizer {
    pub fn new(capacity: Option<usize>) -> Self {
        assert!(capacity != Some(0), "normalizer capacity must be positive");
        Self { capacity, history: VecDeque::new(), min: f64::INFINITY, max: f64::NEG_INFINITY }
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    /// Current `(min, max)` of the history window.
    pub fn extrema(&self) -> Option<(f64, f64)> {
        (!self.history.is_empty()).then_some((self.min, self.max))
    }

    pub fn history(&self) -> impl Iterator<Item = f64> + '_ {
        self.history.iter().copied()
    }

    pub fn push(&mut self, raw: f64) {
        self.history.push_back(raw);
        self.min = self.min.min(raw);
        self.max = self.max.max(raw);
        if let Some(cap) = self.capacity {
            if self.history.len() > cap {
                let evicted = self.history.pop_front().expect("non-empty");
                if evicted == self.min || evicted == self.max {
                    self.rescan();
                }
            }
        }
    }

    fn rescan(&mut self) {
        let (lo, hi) = self.history.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        self.min = lo;
        self.max = hi;
    }

    /// Appends `raw`, then maps it to `(raw − min)/(max − min) − 1`.
    /// A degenerate window (`max == min`) yields `-1`.
    pub fn normalize(&mut self, raw: f64) -> f64 {
        debug_assert!(raw >= 0.0 && raw.is_finite());
        self.push(raw);
        self.scale(raw)
    }

    /// Scaling against the current window without recording `raw`.
    pub fn scale(&self, raw: f64) -> f64 {
        if self.history.is_empty() || self.max <= self.min {
            return -1.0;
        }
        let clamped = raw.clamp(self.min, self.max);
        (clamped - self.min) / (self.max - self.min) - 1.0
    }
}

/// Mixing weight between extrinsic and curiosity reward, `η ∈ [0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EtaMix(f64);

impl EtaMix {
    pub fn new(eta: f64) -> Option<Self> {
        (0.0..=1.0).contains(&eta).then_some(Self(eta))
    }

    pub fn eta(self) -> f64 {
        self.0
    }

    pub fn mix(self, extrinsic: f64, curiosity: f64) -> f64 {
        mix(self.0, extrinsic, curiosity)
    }
}

/// `η·r_e + (1 − η)·r_c`.
pub fn mix(eta: f64, extrinsic: f64, curiosity: f64) -> f64 {
    eta * extrinsic + (1.0 - eta) * curiosity
}

/// Recomputes a transition's training reward from its extrinsic reward and stored curiosity.
/// Penalty transitions and transitions without curiosity keep their extrinsic reward.
pub fn apply_mix(t: &mut Transition, eta: EtaMix) {
    t.reward = match t.curiosity {
        Some(c) if !t.is_subgoal_test => eta.mix(t.extrinsic_reward, c),
        _ => t.extrinsic_reward,
    };
}
