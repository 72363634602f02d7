use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{check_action, sparse_reward, within_thresholds, Bounds, EnvError, EnvSpec, EpisodeClock, GoalEnv, GoalSpace, StepResult};

pub const ARENA: Bounds = Bounds::new(-5.0, 5.0);

/// Damped double integrator on the square arena.
///
/// `v' = damping·v + a`, `x' = x + v'`, per axis. Hitting the arena edge clamps the
/// position and zeroes that velocity component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointDynamics {
    pub damping: f64,
    pub arena: Bounds,
}

impl Default for PointDynamics {
    fn default() -> Self {
        Self { damping: 0.5, arena: ARENA }
    }
}

impl PointDynamics {
    /// Velocity after applying `accel` on one axis.
    #[inline]
    pub fn next_velocity(&self, v: f64, accel: f64) -> f64 {
        self.damping * v + accel
    }

    /// Moves one axis without obstacles: returns `(position, velocity)`.
    #[inline]
    pub fn integrate_axis(&self, x: f64, v: f64, accel: f64) -> (f64, f64) {
        let v = self.next_velocity(v, accel);
        let target = x + v;
        let clamped = self.arena.clamp(target);
        if clamped != target {
            (clamped, 0.0)
        } else {
            (target, v)
        }
    }
}

/// Point mass reaching a random target; state `(x, y, vx, vy)`, goal `(x, y)`.
#[derive(Debug, Clone)]
pub struct PointReacher2D {
    spec: EnvSpec,
    dynamics: PointDynamics,
    state: Vec<f64>,
    goal: Vec<f64>,
    clock: EpisodeClock,
}

impl Default for PointReacher2D {
    fn default() -> Self {
        Self::new()
    }
}

impl PointReacher2D {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "PointReacher2D",
                state_dim: 4,
                action_dim: 2,
                goal_dim: 2,
                action_bounds: vec![Bounds::new(-1.0, 1.0); 2],
                goal_bounds: vec![ARENA; 2],
                goal_thresholds: vec![0.25; 2],
                max_episode_steps: 50,
            },
            dynamics: PointDynamics::default(),
            state: Vec::new(),
            goal: Vec::new(),
            clock: EpisodeClock::default(),
        }
    }

    pub fn dynamics(&self) -> PointDynamics {
        self.dynamics
    }

    /// Places the agent directly (for scripted tests).
    pub fn set_state(&mut self, state: &[f64], goal: &[f64]) {
        self.state = state.to_vec();
        self.goal = goal.to_vec();
        self.clock.restart();
    }
}

impl GoalSpace for PointReacher2D {
    fn goal_thresholds(&self) -> &[f64] {
        &self.spec.goal_thresholds
    }

    fn project_to_goal(&self, state: &[f64]) -> Vec<f64> {
        state[..2].to_vec()
    }
}

impl GoalEnv for PointReacher2D {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rng.random_range(-4.0..=4.0);
        let y = rng.random_range(-4.0..=4.0);
        self.state = vec![x, y, 0.0, 0.0];
        self.goal = vec![rng.random_range(-4.5..=4.5), rng.random_range(-4.5..=4.5)];
        self.clock.restart();
        (self.state.clone(), self.goal.clone())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        self.clock.check()?;
        let a = check_action(action, &self.spec)?;
        let (x, vx) = self.dynamics.integrate_axis(self.state[0], self.state[2], a[0]);
        let (y, vy) = self.dynamics.integrate_axis(self.state[1], self.state[3], a[1]);
        self.state = vec![x, y, vx, vy];
        let achieved = within_thresholds(&self.state[..2], &self.goal, &self.spec.goal_thresholds);
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
    fn reset_is_deterministic_and_goals_inside_arena() {
        let mut env = PointReacher2D::new();
        assert_eq!(env.reset(42), env.reset(42));
        for seed in 0..1000 {
            let (s, g) = env.reset(seed);
            assert!(g.iter().all(|&v| ARENA.contains(v)));
            assert!(s[..2].iter().all(|&v| ARENA.contains(v)));
            assert_eq!(&s[2..], &[0.0, 0.0]);
        }
    }

    #[test]
    fn zero_action_at_goal_is_achieved() {
        let mut env = PointReacher2D::new();
        env.set_state(&[1.0, -2.0, 0.0, 0.0], &[1.0, -2.0]);
        let r = env.step(&[0.0, 0.0]).unwrap();
        assert!(r.achieved);
        assert_eq!(r.extrinsic_reward, 0.0);
        assert!(r.done);
    }

    #[test]
    fn projection_keeps_position() {
        let env = PointReacher2D::new();
        assert_eq!(env.project_to_goal(&[1.0, 2.0, 3.0, 4.0]), vec![1.0, 2.0]);
    }

    #[test]
    fn actions_are_clamped() {
        let mut a = PointReacher2D::new();
        let mut b = PointReacher2D::new();
        a.set_state(&[0.0, 0.0, 0.0, 0.0], &[4.0, 4.0]);
        b.set_state(&[0.0, 0.0, 0.0, 0.0], &[4.0, 4.0]);
        assert_eq!(a.step(&[7.0, -3.0]).unwrap(), b.step(&[1.0, -1.0]).unwrap());
    }

    #[test]
    fn arena_edge_stops_motion() {
        let mut env = PointReacher2D::new();
        env.set_state(&[4.9, 0.0, 1.0, 0.0], &[-4.0, -4.0]);
        let r = env.step(&[1.0, 0.0]).unwrap();
        assert_eq!(r.next_state[0], 5.0);
        assert_eq!(r.next_state[2], 0.0);
    }
}
