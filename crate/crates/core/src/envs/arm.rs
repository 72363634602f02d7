use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, sparse_reward, within_thresholds, Bounds, EnvError, EnvSpec, EpisodeClock, GoalEnv, GoalSpace, StepResult};

/// Integration step for commanded joint velocities.
pub const ARM_DT: f64 = 0.25;

pub const JOINT_LIMITS: [Bounds; 3] =
    [Bounds::new(-PI, PI), Bounds::new(-FRAC_PI_2, FRAC_PI_2), Bounds::new(-FRAC_PI_2, FRAC_PI_2)];

/// Kinematic three-joint arm. State `(θ1, θ2, θ3, ω1, ω2, ω3)`; actions are joint
/// velocities integrated with explicit Euler and clamped at the joint limits.
/// Goals are joint configurations drawn uniformly inside the limits.
#[derive(Debug, Clone)]
pub struct ArmReacher3 {
    spec: EnvSpec,
    state: Vec<f64>,
    goal: Vec<f64>,
    clock: EpisodeClock,
}

impl Default for ArmReacher3 {
    fn default() -> Self {
        Self::new()
    }
}

impl ArmReacher3 {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "ArmReacher3",
                state_dim: 6,
                action_dim: 3,
                goal_dim: 3,
                action_bounds: vec![Bounds::new(-1.0, 1.0); 3],
                goal_bounds: JOINT_LIMITS.to_vec(),
                goal_thresholds: vec![0.1; 3],
                max_episode_steps: 50,
            },
            state: Vec::new(),
            goal: Vec::new(),
            clock: EpisodeClock::default(),
        }
    }
}

impl GoalSpace for ArmReacher3 {
    fn goal_thresholds(&self) -> &[f64] {
        &self.spec.goal_thresholds
    }

    fn project_to_goal(&self, state: &[f64]) -> Vec<f64> {
        state[..3].to_vec()
    }
}

impl GoalEnv for ArmReacher3 {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.state = vec![0.0; 6];
        self.goal = JOINT_LIMITS.iter().map(|b| rng.random_range(b.lo..=b.hi)).collect();
        self.clock.restart();
        (self.state.clone(), self.goal.clone())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        self.clock.check()?;
        let omega = check_action(action, &self.spec)?;
        for j in 0..3 {
            self.state[j] = JOINT_LIMITS[j].clamp(self.state[j] + ARM_DT * omega[j]);
            self.state[3 + j] = omega[j];
        }
        let achieved = within_thresholds(&self.state[..3], &self.goal, &self.spec.goal_thresholds);
        let done = self.clock.tick(achieved, self.spec.max_episode_steps);
        Ok(StepResult { next_state: self.state.clone(), extrinsic_reward: sparse_reward(achieved), achieved, done })
    }

    fn goal(&self) -> &[f64] {
        &self.goal
    }

    fn steps_taken(&self) -> usize {
        self.clock.steps
    }
}
