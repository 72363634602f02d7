use super::mlp::{Gradients, LayerGradient, Mlp};
use super::NumericError;

/// First/second moment estimates for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub(crate) first_moment: Vec<LayerGradient>,
    pub(crate) second_moment: Vec<LayerGradient>,
    pub(crate) step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub const DEFAULT_BETA1: f64 = 0.9;
    pub const DEFAULT_BETA2: f64 = 0.999;
    pub const DEFAULT_EPSILON: f64 = 1e-8;

    pub fn new(mlp: &Mlp) -> Self {
        Self::with_hyperparameters(mlp, Self::DEFAULT_BETA1, Self::DEFAULT_BETA2, Self::DEFAULT_EPSILON)
    }

    pub fn with_hyperparameters(mlp: &Mlp, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros = Gradients::zeros_like(mlp).layers;
        Self { first_moment: zeros.clone(), second_moment: zeros, step_count: 0, beta1, beta2, epsilon }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self) -> &[LayerGradient] {
        &self.first_moment
    }

    pub fn second_moment(&self) -> &[LayerGradient] {
        &self.second_moment
    }

    fn matches(&self, mlp: &Mlp) -> bool {
        self.first_moment.len() == mlp.layers().len()
            && self.first_moment.iter().zip(mlp.layers()).all(|(m, l)| {
                m.weights.len() == l.weights().len() && m.bias.len() == l.bias().len()
            })
    }
}

/// One bias-corrected ADAM update of `mlp` in place.
///
/// Nothing is modified when any gradient entry is non-finite; the error names the
/// first offending layer.
pub fn adam_step(mlp: &mut Mlp, grads: &Gradients, state: &mut AdamState, lr: f64) -> Result<(), NumericError> {
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(NumericError::InvalidArgument(format!("learning rate must be positive, got {lr}")));
    }
    if !state.matches(mlp) || grads.layers.len() != mlp.layers().len() {
        return Err(NumericError::Shape("optimizer state or gradients do not match network".into()));
    }
    for (j, (g, l)) in grads.layers.iter().zip(mlp.layers()).enumerate() {
        if g.weights.len() != l.weights().len() || g.bias.len() != l.bias().len() {
            return Err(NumericError::Shape(format!("gradient shape mismatch at layer {j}")));
        }
        if g.weights.iter().chain(&g.bias).any(|x| !x.is_finite()) {
            return Err(NumericError::NonFinite { layer: j });
        }
    }

    state.step_count += 1;
    let t = state.step_count as f64;
    let (b1, b2, eps) = (state.beta1, state.beta2, state.epsilon);
    let c1 = 1.0 - b1.powf(t);
    let c2 = 1.0 - b2.powf(t);

    let update = |p: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    };

    let AdamState { first_moment, second_moment, .. } = state;
    for (((layer, g), m), v) in mlp
        .layers_mut()
        .iter_mut()
        .zip(&grads.layers)
        .zip(first_moment.iter_mut())
        .zip(second_moment.iter_mut())
    {
        update(&mut layer.weights, &g.weights, &mut m.weights, &mut v.weights);
        update(&mut layer.bias, &g.bias, &mut m.bias, &mut v.bias);
    }
    Ok(())
}
