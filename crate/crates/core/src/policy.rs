//! Goal-conditioned deterministic actor-critic, one instance per hierarchy layer.
//!
//! The actor maps `state ‖ goal` to an action squashed into the layer's bounds; the
//! critic maps `state ‖ goal ‖ action` to a Q-value. Targets are built from the current
//! networks and clipped to `[-H, 0]`, which bounds the critic without target networks.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::envs::Bounds;
use crate::hindsight::Transition;
use crate::numeric::{adam_step, Activation, AdamState, Matrix, Mlp, NumericError};

/// Per-layer spaces, discount and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerUmdp {
    pub index: usize,
    pub state_dim: usize,
    pub goal_dim: usize,
    pub action_dim: usize,
    /// Discount in `[0, 1)`.
    pub gamma: f64,
    /// Attempts per goal; also the magnitude of the critic's lower clip.
    pub horizon: usize,
    pub action_bounds: Vec<Bounds>,
}

impl LayerUmdp {
    pub fn validate(&self) -> Result<(), PolicyError> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(PolicyError::Config(format!("gamma {} outside [0, 1)", self.gamma)));
        }
        if self.horizon == 0 {
            return Err(PolicyError::Config("horizon must be positive".into()));
        }
        if self.action_bounds.len() != self.action_dim || self.action_bounds.iter().any(|b| !(b.lo < b.hi)) {
            return Err(PolicyError::Config(format!("layer {} action bounds malformed", self.index)));
        }
        Ok(())
    }
}

/// Exploration: with probability `epsilon_random` a uniform action, otherwise Gaussian
/// noise with standard deviation `sigma · (hi − lo)` per dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub epsilon_random: f64,
    pub sigma: f64,
}

impl NoiseSpec {
    pub fn new(epsilon_random: f64, sigma: f64) -> Result<Self, PolicyError> {
        if !(0.0..=1.0).contains(&epsilon_random) || !(sigma >= 0.0) {
            return Err(PolicyError::Config(format!("invalid noise epsilon={epsilon_random} sigma={sigma}")));
        }
        Ok(Self { epsilon_random, sigma })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("invalid layer configuration: {0}")]
    Config(String),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("transition from layer {got} given to layer {expected}")]
    WrongLayer { got: usize, expected: usize },
    #[error(transparent)]
    Numeric(#[from] NumericError),
}

/// Losses from one [`ActorCritic::update`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats {
    /// Mean `(Q − y)²` before the critic step.
    pub critic_loss: f64,
    /// Mean `Q(s, g, π(s, g))` before the actor step, under the freshly updated critic.
    pub actor_objective: f64,
    /// Set when a non-finite value forced the step to be dropped.
    pub skipped: bool,
}

#[derive(Debug, Clone)]
pub struct ActorCritic {
    umdp: LayerUmdp,
    actor: Mlp,
    critic: Mlp,
    actor_opt: AdamState,
    critic_opt: AdamState,
    lr: f64,
}

/// Stacked columns of a transition batch.
struct BatchTensors {
    state_goal: Matrix,
    next_state_goal: Matrix,
    actions: Matrix,
    rewards: Vec<f64>,
    terminal: Vec<bool>,
}

impl ActorCritic {
    pub fn new<R: Rng + ?Sized>(umdp: LayerUmdp, hidden: &[usize], lr: f64, rng: &mut R) -> Result<Self, PolicyError> {
        umdp.validate()?;
        let sg = umdp.state_dim + umdp.goal_dim;
        let mut actor_sizes = vec![sg];
        actor_sizes.extend_from_slice(hidden);
        actor_sizes.push(umdp.action_dim);
        let mut critic_sizes = vec![sg + umdp.action_dim];
        critic_sizes.extend_from_slice(hidden);
        critic_sizes.push(1);
        let actor = Mlp::new(&actor_sizes, Activation::Relu, Activation::Tanh, rng);
        let critic = Mlp::new(&critic_sizes, Activation::Relu, Activation::Identity, rng);
        Ok(Self::from_parts(umdp, actor, critic, lr))
    }

    pub fn from_parts(umdp: LayerUmdp, actor: Mlp, critic: Mlp, lr: f64) -> Self {
        let actor_opt = AdamState::new(&actor);
        let critic_opt = AdamState::new(&critic);
        Self { umdp, actor, critic, actor_opt, critic_opt, lr }
    }

    pub fn with_optimizers(mut self, actor_opt: AdamState, critic_opt: AdamState) -> Self {
        self.actor_opt = actor_opt;
        self.critic_opt = critic_opt;
        self
    }

    pub fn umdp(&self) -> &LayerUmdp {
        &self.umdp
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn actor_optimizer(&self) -> &AdamState {
        &self.actor_opt
    }

    pub fn critic_optimizer(&self) -> &AdamState {
        &self.critic_opt
    }

    pub fn critic_mut(&mut self) -> &mut Mlp {
        &mut self.critic
    }

    pub fn actor_mut(&mut self) -> &mut Mlp {
        &mut self.actor
    }

    fn scale_action(&self, squashed: &mut [f64]) {
        for (a, b) in squashed.iter_mut().zip(&self.umdp.action_bounds) {
            *a = b.clamp(b.mid() + b.half_width() * *a);
        }
    }

    /// Deterministic actor output.
    pub fn policy_action(&self, state: &[f64], goal: &[f64]) -> Vec<f64> {
        let mut input = Vec::with_capacity(state.len() + goal.len());
        input.extend_from_slice(state);
        input.extend_from_slice(goal);
        let mut a = self.actor.predict(&input).expect("state/goal dimensions match the layer");
        self.scale_action(&mut a);
        a
    }

    /// Action for `(state, goal)`, perturbed when `noise` is given. The second value
    /// reports whether any randomness was applied.
    pub fn act<R: Rng + ?Sized>(&self, state: &[f64], goal: &[f64], noise: Option<&NoiseSpec>, rng: &mut R) -> (Vec<f64>, bool) {
        let bounds = &self.umdp.action_bounds;
        let (action, noisy) = match noise {
            None => (self.policy_action(state, goal), false),
            Some(n) => {
                if rng.random::<f64>() < n.epsilon_random {
                    (bounds.iter().map(|b| rng.random_range(b.lo..=b.hi)).collect(), true)
                } else {
                    let mut a = self.policy_action(state, goal);
                    for (x, b) in a.iter_mut().zip(bounds) {
                        let z: f64 = StandardNormal.sample(rng);
                        *x = b.clamp(*x + n.sigma * (b.hi - b.lo) * z);
                    }
                    (a, true)
                }
            }
        };
        assert!(action.iter().zip(bounds).all(|(a, b)| b.contains(*a)), "action escaped its bounds");
        (action, noisy)
    }

    /// Q-value of a single `(state, goal, action)`.
    pub fn q_value(&self, state: &[f64], goal: &[f64], action: &[f64]) -> f64 {
        let input: Vec<f64> = state.iter().chain(goal).chain(action).copied().collect();
        self.critic.predict(&input).expect("critic input dimensions match the layer")[0]
    }

    /// `clip(r + γ·Q(s′, g, π(s′, g)), −H, 0)`, or `clip(r, −H, 0)` for terminal transitions.
    pub fn bellman_target(&self, t: &Transition) -> f64 {
        let h = self.umdp.horizon as f64;
        if t.is_terminal() {
            return t.reward.clamp(-h, 0.0);
        }
        let a_next = self.policy_action(&t.next_state, &t.goal);
        let q = self.q_value(&t.next_state, &t.goal, &a_next);
        (t.reward + self.umdp.gamma * q).clamp(-h, 0.0)
    }

    fn tensors(&self, batch: &[Transition]) -> Result<BatchTensors, PolicyError> {
        if batch.is_empty() {
            return Err(PolicyError::EmptyBatch);
        }
        if let Some(t) = batch.iter().find(|t| t.layer != self.umdp.index) {
            return Err(PolicyError::WrongLayer { got: t.layer, expected: self.umdp.index });
        }
        let n = batch.len();
        let sg = self.umdp.state_dim + self.umdp.goal_dim;
        let mut state_goal = Vec::with_capacity(n * sg);
        let mut next_state_goal = Vec::with_capacity(n * sg);
        let mut actions = Vec::with_capacity(n * self.umdp.action_dim);
        for t in batch {
            state_goal.extend_from_slice(&t.state);
            state_goal.extend_from_slice(&t.goal);
            next_state_goal.extend_from_slice(&t.next_state);
            next_state_goal.extend_from_slice(&t.goal);
            actions.extend_from_slice(&t.action);
        }
        Ok(BatchTensors {
            state_goal: Matrix::from_vec(n, sg, state_goal),
            next_state_goal: Matrix::from_vec(n, sg, next_state_goal),
            actions: Matrix::from_vec(n, self.umdp.action_dim, actions),
            rewards: batch.iter().map(|t| t.reward).collect(),
            terminal: batch.iter().map(Transition::is_terminal).collect(),
        })
    }

    /// Batched actor: returns scaled actions, the forward cache and the raw squashed outputs.
    fn actor_batch(&self, state_goal: &Matrix) -> Result<(Matrix, crate::numeric::ForwardCache), PolicyError> {
        let (mut out, cache) = self.actor.forward_batch(state_goal)?;
        for r in 0..out.rows() {
            self.scale_action(out.row_mut(r));
        }
        Ok((out, cache))
    }

    /// Bellman targets for a whole batch.
    pub fn batch_targets(&self, batch: &[Transition]) -> Result<Vec<f64>, PolicyError> {
        let t = self.tensors(batch)?;
        self.targets_from(&t)
    }

    fn targets_from(&self, t: &BatchTensors) -> Result<Vec<f64>, PolicyError> {
        let h = self.umdp.horizon as f64;
        let (a_next, _) = self.actor_batch(&t.next_state_goal)?;
        let (q_next, _) = self.critic.forward_batch(&Matrix::hstack(&[&t.next_state_goal, &a_next]))?;
        Ok(t
            .rewards
            .iter()
            .zip(&t.terminal)
            .zip(q_next.as_slice())
            .map(|((&r, &term), &q)| if term { r.clamp(-h, 0.0) } else { (r + self.umdp.gamma * q).clamp(-h, 0.0) })
            .collect())
    }

    /// One critic step on mean squared Bellman error, then one actor step ascending mean Q.
    pub fn update(&mut self, batch: &[Transition]) -> Result<UpdateStats, PolicyError> {
        let t = self.tensors(batch)?;
        let n = batch.len() as f64;
        let h = self.umdp.horizon as f64;
        let skipped = |critic_loss, actor_objective| Ok(UpdateStats { critic_loss, actor_objective, skipped: true });

        let targets = self.targets_from(&t)?;
        if targets.iter().any(|y| !y.is_finite()) {
            log::warn!("layer {}: non-finite Bellman target, update skipped", self.umdp.index);
            return skipped(f64::NAN, f64::NAN);
        }
        assert!(targets.iter().all(|&y| (-h..=0.0).contains(&y)), "Bellman target outside [-H, 0]");

        let critic_in = Matrix::hstack(&[&t.state_goal, &t.actions]);
        let (q, cache) = self.critic.forward_batch(&critic_in)?;
        let mut dq = Matrix::zeros(q.rows(), 1);
        let mut critic_loss = 0.0;
        for ((g, &qv), &y) in dq.as_mut_slice().iter_mut().zip(q.as_slice()).zip(&targets) {
            let d = qv - y;
            critic_loss += d * d / n;
            *g = 2.0 * d / n;
        }
        if !critic_loss.is_finite() {
            log::warn!("layer {}: non-finite critic loss, update skipped", self.umdp.index);
            return skipped(critic_loss, f64::NAN);
        }
        let (critic_grads, _) = self.critic.backward(&cache, &dq)?;
        if let Err(e) = adam_step(&mut self.critic, &critic_grads, &mut self.critic_opt, self.lr) {
            log::warn!("layer {}: critic step rejected: {e}", self.umdp.index);
            return skipped(critic_loss, f64::NAN);
        }

        let (actions, actor_cache) = self.actor_batch(&t.state_goal)?;
        let (q_pi, q_cache) = self.critic.forward_batch(&Matrix::hstack(&[&t.state_goal, &actions]))?;
        let actor_objective = q_pi.as_slice().iter().sum::<f64>() / n;
        if !actor_objective.is_finite() {
            log::warn!("layer {}: non-finite actor objective, update skipped", self.umdp.index);
            return Ok(UpdateStats { critic_loss, actor_objective, skipped: true });
        }
        // Descend −mean Q: seed the critic with −1/n and read the gradient at the action inputs.
        let seed = Matrix::from_vec(q_pi.rows(), 1, vec![-1.0 / n; q_pi.rows()]);
        let d_input = self.critic.input_gradient(&q_cache, &seed)?;
        let sg = self.umdp.state_dim + self.umdp.goal_dim;
        let mut d_squashed = d_input.columns(sg, self.umdp.action_dim);
        for r in 0..d_squashed.rows() {
            for (g, b) in d_squashed.row_mut(r).iter_mut().zip(&self.umdp.action_bounds) {
                *g *= b.half_width();
            }
        }
        let (actor_grads, _) = self.actor.backward(&actor_cache, &d_squashed)?;
        if let Err(e) = adam_step(&mut self.actor, &actor_grads, &mut self.actor_opt, self.lr) {
            log::warn!("layer {}: actor step rejected: {e}", self.umdp.index);
            return Ok(UpdateStats { critic_loss, actor_objective, skipped: true });
        }
        Ok(UpdateStats { critic_loss, actor_objective, skipped: false })
    }
}
