use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::point::{PointDynamics, ARENA};
use super::{check_action, sparse_reward, within_thresholds, Bounds, EnvError, EnvSpec, EpisodeClock, GoalEnv, GoalSpace, StepResult};

/// Button centre; touching the square of half-width [`BUTTON_REACH`] around it opens the lid.
pub const BUTTON: [f64; 2] = [-3.5, 3.5];
pub const BUTTON_REACH: f64 = 0.5;

/// Point mass that must press a button before its target counts as reached.
///
/// State `(x, y, vx, vy, lid)` with `lid ∈ {0, 1}`; goal `(x, y, lid)`. Episode goals
/// always demand `lid = 1`, and the lid threshold of 0.5 makes the lid coordinate an
/// exact open/closed match.
#[derive(Debug, Clone)]
pub struct CausalButton {
    spec: EnvSpec,
    dynamics: PointDynamics,
    state: Vec<f64>,
    goal: Vec<f64>,
    clock: EpisodeClock,
}

impl Default for CausalButton {
    fn default() -> Self {
        Self::new()
    }
}

impl CausalButton {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "CausalButton",
                state_dim: 5,
                action_dim: 2,
                goal_dim: 3,
                action_bounds: vec![Bounds::new(-1.0, 1.0); 2],
                goal_bounds: vec![ARENA, ARENA, Bounds::new(0.0, 1.0)],
                goal_thresholds: vec![0.25, 0.25, 0.5],
                max_episode_steps: 100,
            },
            dynamics: PointDynamics::default(),
            state: Vec::new(),
            goal: Vec::new(),
            clock: EpisodeClock::default(),
        }
    }

    pub fn lid_open(&self) -> bool {
        self.state.get(4).is_some_and(|&l| l == 1.0)
    }

    pub fn set_state(&mut self, state: &[f64], goal: &[f64]) {
        self.state = state.to_vec();
        self.goal = goal.to_vec();
        self.clock.restart();
    }
}

impl GoalSpace for CausalButton {
    fn goal_thresholds(&self) -> &[f64] {
        &self.spec.goal_thresholds
    }

    fn project_to_goal(&self, state: &[f64]) -> Vec<f64> {
        vec![state[0], state[1], state[4]]
    }
}

impl GoalEnv for CausalButton {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rng.random_range(-4.0..=4.0);
        let y = rng.random_range(-4.0..=4.0);
        self.state = vec![x, y, 0.0, 0.0, 0.0];
        self.goal = vec![rng.random_range(-4.5..=4.5), rng.random_range(-4.5..=4.5), 1.0];
        self.clock.restart();
        (self.state.clone(), self.goal.clone())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        self.clock.check()?;
        let a = check_action(action, &self.spec)?;
        let (x, vx) = self.dynamics.integrate_axis(self.state[0], self.state[2], a[0]);
        let (y, vy) = self.dynamics.integrate_axis(self.state[1], self.state[3], a[1]);
        let pressed = (x - BUTTON[0]).abs() <= BUTTON_REACH && (y - BUTTON[1]).abs() <= BUTTON_REACH;
        let lid = if pressed { 1.0 } else { self.state[4] };
        self.state = vec![x, y, vx, vy, lid];
        let achieved = within_thresholds(&self.project_to_goal(&self.state), &self.goal, &self.spec.goal_thresholds);
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lid_starts_closed() {
        let mut env = CausalButton::new();
        for seed in 0..50 {
            let (s, g) = env.reset(seed);
            assert_eq!(s[4], 0.0);
            assert!(!env.lid_open());
            assert_eq!(g[2], 1.0);
        }
    }

    #[test]
    fn target_needs_open_lid() {
        let mut env = CausalButton::new();
        env.set_state(&[2.0, 2.0, 0.0, 0.0, 0.0], &[2.0, 2.0, 1.0]);
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert!(!r.achieved);
        assert_eq!(r.extrinsic_reward, -1.0);

        env.set_state(&[2.0, 2.0, 0.0, 0.0, 1.0], &[2.0, 2.0, 1.0]);
        assert!(env.step(&[0.0, 0.0]).unwrap().achieved);
    }

    #[test]
    fn touching_button_opens_lid_permanently() {
        let mut env = CausalButton::new();
        env.set_state(&[-3.5, 2.5, 0.0, 0.0, 0.0], &[3.0, -3.0, 1.0]);
        let r = env.step(&[0.0, 1.0]).unwrap();
        assert_eq!(r.next_state[4], 1.0);
        let r = env.step(&[1.0, -1.0]).unwrap();
        assert_eq!(r.next_state[4], 1.0);
    }

    #[test]
    fn projection_carries_lid() {
        let env = CausalButton::new();
        assert_eq!(env.project_to_goal(&[1.0, 2.0, 0.3, 0.4, 1.0]), vec![1.0, 2.0, 1.0]);
    }
}
