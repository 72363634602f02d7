//! The k-layer rollout recursion.
//!
//! Layer `k − 1` pursues the environment goal. Every layer above 0 proposes subgoals in the
//! environment's goal space and hands them to the layer below, which gets at most `H`
//! attempts to reach them. Layer 0 steps the environment. A lower layer stops early once
//! its own goal or any ancestor's goal is reached, or when the environment episode ends.

use rand::Rng;

use crate::envs::{EnvError, EnvSpec, GoalEnv, TrajectoryStep};
use crate::hindsight::Transition;
use crate::policy::{ActorCritic, LayerUmdp, NoiseSpec, PolicyError};

#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyConfig {
    pub k: usize,
    /// Attempts per goal at every layer.
    pub horizon: usize,
    /// Probability that an exploring attempt above layer 0 tests its subgoal.
    pub subgoal_test_rate: f64,
    pub layers: Vec<LayerUmdp>,
}

impl HierarchyConfig {
    /// Builds the per-layer UMDPs for `spec`: layer 0 acts in the primitive action space,
    /// higher layers act in the goal space. `gammas` holds one discount per layer.
    pub fn for_env(spec: &EnvSpec, k: usize, horizon: usize, subgoal_test_rate: f64, gammas: &[f64]) -> Result<Self, PolicyError> {
        if gammas.len() != k {
            return Err(PolicyError::Config(format!("{} discounts given for {k} layers", gammas.len())));
        }
        let layers = (0..k)
            .map(|i| LayerUmdp {
                index: i,
                state_dim: spec.state_dim,
                goal_dim: spec.goal_dim,
                action_dim: if i == 0 { spec.action_dim } else { spec.goal_dim },
                gamma: gammas[i],
                horizon,
                action_bounds: if i == 0 { spec.action_bounds.clone() } else { spec.goal_bounds.clone() },
            })
            .collect();
        let cfg = Self { k, horizon, subgoal_test_rate, layers };
        cfg.validate(spec)?;
        Ok(cfg)
    }

    pub fn validate(&self, spec: &EnvSpec) -> Result<(), PolicyError> {
        if self.k == 0 || self.layers.len() != self.k {
            return Err(PolicyError::Config(format!("need k >= 1 layers, got k={} with {} UMDPs", self.k, self.layers.len())));
        }
        if self.horizon == 0 {
            return Err(PolicyError::Config("horizon must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.subgoal_test_rate) {
            return Err(PolicyError::Config(format!("subgoal test rate {} outside [0, 1]", self.subgoal_test_rate)));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate()?;
            if l.index != i || l.state_dim != spec.state_dim || l.goal_dim != spec.goal_dim || l.horizon != self.horizon {
                return Err(PolicyError::Config(format!("layer {i} UMDP does not match the environment")));
            }
            let expected = if i == 0 { &spec.action_bounds } else { &spec.goal_bounds };
            if &l.action_bounds != expected {
                return Err(PolicyError::Config(format!("layer {i} action space is not the space the layer below consumes")));
            }
        }
        Ok(())
    }
}

/// Policies of every layer plus their exploration settings.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: HierarchyConfig,
    pub layers: Vec<ActorCritic>,
    pub noise: Vec<NoiseSpec>,
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(config: HierarchyConfig, hidden: &[usize], lr: f64, noise: Vec<NoiseSpec>, rng: &mut R) -> Result<Self, PolicyError> {
        if noise.len() != config.k {
            return Err(PolicyError::Config(format!("{} noise settings for {} layers", noise.len(), config.k)));
        }
        let layers = config.layers.iter().map(|u| ActorCritic::new(u.clone(), hidden, lr, rng)).collect::<Result<_, _>>()?;
        Ok(Self { config, layers, noise })
    }

    pub fn k(&self) -> usize {
        self.config.k
    }
}

/// One attempt of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Attempt {
    /// The transition as executed: `action` is the proposed subgoal above layer 0.
    pub transition: Transition,
    /// Exploration noise (Gaussian or uniform) changed the action.
    pub noisy: bool,
    /// The attempt was made inside a test-mode subtree of some higher layer.
    pub inherited_test: bool,
    /// For layers above 0: whether the layer below reached the proposed subgoal.
    pub subgoal_reached: Option<bool>,
}

/// All attempts a layer made in pursuit of one goal.
pub type Segment = Vec<Attempt>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RolloutRecord {
    /// `layers[i]` lists layer i's goal segments in completion order.
    pub layers: Vec<Vec<Segment>>,
    pub success: bool,
    pub goal: Vec<f64>,
    pub final_state: Vec<f64>,
    /// Every primitive step, in order.
    pub trajectory: Vec<TrajectoryStep>,
}

impl RolloutRecord {
    pub fn primitive_steps(&self) -> usize {
        self.trajectory.len()
    }

    /// Executed transitions of layer `i` in order.
    pub fn transitions(&self, i: usize) -> impl Iterator<Item = &Transition> + '_ {
        self.layers[i].iter().flatten().map(|a| &a.transition)
    }

    /// Subgoals proposed by layer `i > 0`, in order.
    pub fn subgoals(&self, i: usize) -> Vec<Vec<f64>> {
        self.transitions(i).map(|t| t.action.clone()).collect()
    }
}

struct Rollout<'a, R: Rng + ?Sized> {
    env: &'a mut dyn GoalEnv,
    agent: &'a Agent,
    explore: bool,
    rng: &'a mut R,
    env_done: bool,
    record: RolloutRecord,
}

impl<R: Rng + ?Sized> Rollout<'_, R> {
    fn run_layer(&mut self, i: usize, state: Vec<f64>, goal: &[f64], test_mode: bool, ancestors: &mut Vec<Vec<f64>>) -> Result<(Vec<f64>, bool), EnvError> {
        let horizon = self.agent.config.horizon;
        let policy = &self.agent.layers[i];
        let mut s = state;
        let mut achieved = false;
        let mut segment = Segment::new();
        for _ in 0..horizon {
            if self.env_done {
                break;
            }
            let noise = (self.explore && !test_mode).then_some(&self.agent.noise[i]);
            let (action, noisy) = policy.act(&s, goal, noise, self.rng);
            let (next, attempt_test, subgoal_reached) = if i > 0 {
                let tested = test_mode || (self.explore && self.rng.random::<f64>() < self.agent.config.subgoal_test_rate);
                ancestors.push(goal.to_vec());
                let lower = self.run_layer(i - 1, s.clone(), &action, tested, ancestors);
                ancestors.pop();
                let (next, reached) = lower?;
                (next, tested, Some(reached))
            } else {
                let r = self.env.step(&action)?;
                self.env_done = r.done;
                let t = self.record.trajectory.len();
                self.record.trajectory.push(TrajectoryStep {
                    t,
                    state: s.clone(),
                    action: action.clone(),
                    reward: r.extrinsic_reward,
                    achieved: r.achieved,
                });
                (r.next_state, test_mode, None)
            };
            achieved = self.env.achieved(&next, goal);
            segment.push(Attempt {
                transition: Transition {
                    layer: i,
                    state: std::mem::replace(&mut s, next),
                    action,
                    extrinsic_reward: if achieved { 0.0 } else { -1.0 },
                    reward: if achieved { 0.0 } else { -1.0 },
                    next_state: Vec::new(),
                    goal: goal.to_vec(),
                    achieved,
                    is_subgoal_test: false,
                    test_mode: attempt_test,
                    curiosity: None,
                },
                noisy,
                inherited_test: test_mode,
                subgoal_reached,
            });
            segment.last_mut().expect("just pushed").transition.next_state = s.clone();
            if achieved || ancestors.iter().any(|g| self.env.achieved(&s, g)) {
                break;
            }
        }
        self.record.layers[i].push(segment);
        Ok((s, achieved))
    }
}

/// Resets `env` with `seed` and runs one episode with the top layer pursuing the
/// environment goal. With `explore`, actions carry exploration noise and subgoals are
/// tested with the configured rate; otherwise every layer acts greedily.
pub fn run_episode<R: Rng + ?Sized>(env: &mut dyn GoalEnv, agent: &Agent, explore: bool, seed: u64, rng: &mut R) -> Result<RolloutRecord, EnvError> {
    let k = agent.k();
    let (state, goal) = env.reset(seed);
    let mut rollout = Rollout {
        env,
        agent,
        explore,
        rng,
        env_done: false,
        record: RolloutRecord { layers: vec![Vec::new(); k], goal: goal.clone(), ..Default::default() },
    };
    let (final_state, _) = rollout.run_layer(k - 1, state, &goal, false, &mut Vec::new())?;
    let mut record = rollout.record;
    record.success = env.achieved(&final_state, &goal);
    record.final_state = final_state;
    Ok(record)
}
