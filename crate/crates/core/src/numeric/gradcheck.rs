//! Central finite-difference verification of analytic gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::matrix::Matrix;
use super::mlp::{Activation, Gradients, Mlp};

/// Perturbation used for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Floor on the denominator of the relative error.
const REL_FLOOR: f64 = 1e-8;

/// Smallest non-zero gradient component the random suite accepts. With `FD_STEP = 1e-5`
/// the central difference carries roundoff near `ε·|loss|/h ≈ 1e-11`, which is already a
/// 1e-4 relative error on a component of 1e-7.
pub const SUITE_MIN_GRADIENT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Flat parameter index (layer-major, weights then bias) of the worst component.
    pub worst_parameter: usize,
    pub parameters_checked: usize,
}

impl GradCheckReport {
    pub fn within(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// `|a − b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(REL_FLOOR);
    (analytic - numeric).abs() / denom
}

/// Compares the analytic gradient reported by `loss_fn` against central differences
/// of its loss value, perturbing one parameter at a time.
pub fn gradient_check<F>(params: &Mlp, loss_fn: F) -> GradCheckReport
where
    F: Fn(&Mlp) -> (f64, Gradients),
{
    let (_, analytic) = loss_fn(params);
    let analytic: Vec<f64> = analytic.iter().collect();
    let mut probe = params.clone();
    let mut report = GradCheckReport { max_relative_error: 0.0, worst_parameter: 0, parameters_checked: 0 };

    let mut flat = 0;
    for j in 0..params.layers().len() {
        let n_w = params.layers()[j].weights().len();
        let n_b = params.layers()[j].bias().len();
        for idx in 0..n_w + n_b {
            let read = |m: &Mlp| {
                let l = &m.layers()[j];
                if idx < n_w {
                    l.weights()[idx]
                } else {
                    l.bias()[idx - n_w]
                }
            };
            let write = |m: &mut Mlp, v: f64| {
                let l = &mut m.layers_mut()[j];
                if idx < n_w {
                    l.weights[idx] = v;
                } else {
                    l.bias[idx - n_w] = v;
                }
            };
            let original = read(params);
            let plus = original + FD_STEP;
            let minus = original - FD_STEP;
            write(&mut probe, plus);
            let l_plus = loss_fn(&probe).0;
            write(&mut probe, minus);
            let l_minus = loss_fn(&probe).0;
            write(&mut probe, original);

            let numeric = (l_plus - l_minus) / (plus - minus);
            let err = relative_error(analytic[flat], numeric);
            if err > report.max_relative_error {
                report.max_relative_error = err;
                report.worst_parameter = flat;
            }
            flat += 1;
        }
    }
    report.parameters_checked = flat;
    report
}

/// Mean squared error `½·mean‖y − target‖²` of a batch and its parameter gradient.
pub fn half_mse_loss(mlp: &Mlp, input: &Matrix, target: &Matrix) -> (f64, Gradients) {
    let (y, cache) = mlp.forward_batch(input).expect("input matches network");
    let n = input.rows() as f64;
    let mut grad = Matrix::zeros(y.rows(), y.cols());
    let mut loss = 0.0;
    for ((g, &p), &t) in grad.as_mut_slice().iter_mut().zip(y.as_slice()).zip(target.as_slice()) {
        let d = p - t;
        loss += 0.5 * d * d / n;
        *g = d / n;
    }
    let (grads, _) = mlp.backward(&cache, &grad).expect("fresh cache");
    (loss, grads)
}

/// Outcome of [`random_network_suite`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteReport {
    pub networks: usize,
    pub max_relative_error: f64,
    pub parameters_checked: usize,
}

/// Runs [`gradient_check`] on `networks` random small MLPs (≤ 3 hidden layers, widths ≤ 16)
/// under a half-MSE loss. A batch is resampled until every hidden pre-activation sits at
/// least `1e-3` away from the rectifier kink and every gradient component is either exactly
/// zero or at least [`SUITE_MIN_GRADIENT`] in magnitude.
pub fn random_network_suite(networks: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport { networks, max_relative_error: 0.0, parameters_checked: 0 };
    for _ in 0..networks {
        let hidden_layers = rng.random_range(0..=3);
        let mut sizes = vec![rng.random_range(1..=16)];
        for _ in 0..hidden_layers {
            sizes.push(rng.random_range(1..=16));
        }
        sizes.push(rng.random_range(1..=16));
        let output = if rng.random_bool(0.5) { Activation::Identity } else { Activation::Tanh };
        let mut net = Mlp::new(&sizes, Activation::Relu, output, &mut rng);
        for l in net.layers_mut() {
            for b in l.bias.iter_mut() {
                *b = rng.random_range(-0.2..0.2);
            }
        }
        let batch = 3;
        let (input, target) = loop {
            let input = Matrix::from_vec(
                batch,
                sizes[0],
                (0..batch * sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect(),
            );
            let (_, cache) = net.forward_batch(&input).expect("shapes");
            let hidden = &cache.pre_activations()[..cache.pre_activations().len() - 1];
            if !hidden.iter().all(|z| z.as_slice().iter().all(|v| v.abs() > 1e-3)) {
                continue;
            }
            let out = *sizes.last().expect("non-empty");
            let target = Matrix::from_vec(batch, out, (0..batch * out).map(|_| rng.random_range(-1.0..1.0)).collect());
            let (_, grads) = half_mse_loss(&net, &input, &target);
            if grads.iter().all(|g| g == 0.0 || g.abs() >= SUITE_MIN_GRADIENT) {
                break (input, target);
            }
        };
        let r = gradient_check(&net, |m| half_mse_loss(m, &input, &target));
        report.max_relative_error = report.max_relative_error.max(r.max_relative_error);
        report.parameters_checked += r.parameters_checked;
    }
    report
}
