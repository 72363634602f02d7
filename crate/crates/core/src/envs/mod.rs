//! Deterministic goal-conditioned environments with sparse rewards in `{-1, 0}`.
//!
//! Every environment exposes a state space, a lower-dimensional goal space reached by
//! [`GoalSpace::project_to_goal`], and a per-dimension inclusive threshold test.

mod arm;
mod causal;
mod four_rooms;
mod point;
mod trajectory;

pub use arm::ArmReacher3;
pub use causal::CausalButton;
pub use four_rooms::{inside_any_wall, FourRoomsPoint, WallRect};
pub use point::{PointDynamics, PointReacher2D};
pub use trajectory::{write_trajectory_csv, TrajectoryStep};

/// Closed interval `[lo, hi]` for one action or goal dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub lo: f64,
    pub hi: f64,
}

impl Bounds {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    #[inline]
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    #[inline]
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }
}

/// Static description of an environment's spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: &'static str,
    pub state_dim: usize,
    pub action_dim: usize,
    pub goal_dim: usize,
    pub action_bounds: Vec<Bounds>,
    /// Range of valid goals, and therefore of subgoal actions proposed by higher layers.
    pub goal_bounds: Vec<Bounds>,
    pub goal_thresholds: Vec<f64>,
    pub max_episode_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    /// `0.0` when the episode goal is achieved, `-1.0` otherwise.
    pub extrinsic_reward: f64,
    pub achieved: bool,
    /// Goal achieved or step cap reached; further `step` calls fail.
    pub done: bool,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum EnvError {
    #[error("step called after the episode ended")]
    EpisodeOver,
    #[error("step called before reset")]
    NotReset,
    #[error("action has length {got}, expected {expected}")]
    ActionDim { got: usize, expected: usize },
    #[error("unknown environment {0:?}")]
    UnknownEnv(String),
}

/// Inclusive per-dimension threshold test between a projected state and a goal.
pub fn within_thresholds(projected: &[f64], goal: &[f64], thresholds: &[f64]) -> bool {
    debug_assert_eq!(projected.len(), goal.len());
    debug_assert_eq!(goal.len(), thresholds.len());
    projected.iter().zip(goal).zip(thresholds).all(|((p, g), t)| (p - g).abs() <= *t)
}

/// The goal-space view of an environment: projection plus achievement predicate.
pub trait GoalSpace {
    fn goal_thresholds(&self) -> &[f64];

    fn project_to_goal(&self, state: &[f64]) -> Vec<f64>;

    fn achieved(&self, state: &[f64], goal: &[f64]) -> bool {
        within_thresholds(&self.project_to_goal(state), goal, self.goal_thresholds())
    }
}

pub trait GoalEnv: GoalSpace + Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode; the result is a pure function of `seed`.
    fn reset(&mut self, seed: u64) -> (Vec<f64>, Vec<f64>);

    /// Applies `action` (clamped into bounds) and advances one step.
    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError>;

    /// Current episode goal.
    fn goal(&self) -> &[f64];

    fn steps_taken(&self) -> usize;
}

pub const ENV_NAMES: [&str; 4] = ["PointReacher2D", "FourRoomsPoint", "ArmReacher3", "CausalButton"];

/// Instantiates an environment by name.
pub fn make_env(name: &str) -> Result<Box<dyn GoalEnv>, EnvError> {
    match name {
        "PointReacher2D" => Ok(Box::new(PointReacher2D::new())),
        "FourRoomsPoint" => Ok(Box::new(FourRoomsPoint::new())),
        "ArmReacher3" => Ok(Box::new(ArmReacher3::new())),
        "CausalButton" => Ok(Box::new(CausalButton::new())),
        other => Err(EnvError::UnknownEnv(other.to_string())),
    }
}

/// Episode bookkeeping shared by all environments.
#[derive(Debug, Clone, Default)]
pub(crate) struct EpisodeClock {
    pub started: bool,
    pub steps: usize,
    pub done: bool,
}

impl EpisodeClock {
    pub fn restart(&mut self) {
        *self = Self { started: true, steps: 0, done: false };
    }

    pub fn check(&self) -> Result<(), EnvError> {
        if !self.started {
            Err(EnvError::NotReset)
        } else if self.done {
            Err(EnvError::EpisodeOver)
        } else {
            Ok(())
        }
    }

    /// Records one step and returns whether the episode is now over.
    pub fn tick(&mut self, achieved: bool, cap: usize) -> bool {
        self.steps += 1;
        self.done = achieved || self.steps >= cap;
        self.done
    }
}

pub(crate) fn check_action(action: &[f64], spec: &EnvSpec) -> Result<Vec<f64>, EnvError> {
    if action.len() != spec.action_dim {
        return Err(EnvError::ActionDim { got: action.len(), expected: spec.action_dim });
    }
    Ok(action.iter().zip(&spec.action_bounds).map(|(a, b)| if a.is_nan() { b.mid() } else { b.clamp(*a) }).collect())
}

pub(crate) fn sparse_reward(achieved: bool) -> f64 {
    if achieved {
        0.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn threshold_boundary_is_inclusive_and_strict_beyond() {
        assert!(within_thresholds(&[1.25, 0.0], &[1.0, 0.0], &[0.25, 0.25]));
        assert!(!within_thresholds(&[1.25 + 1e-12, 0.0], &[1.0, 0.0], &[0.25, 0.25]));
        assert!(within_thresholds(&[3.0], &[3.0], &[0.1]));
    }

    #[test]
    fn random_pairs_agree_with_direct_check() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for name in ENV_NAMES {
            let mut env = make_env(name).unwrap();
            let (s0, _) = env.reset(1);
            let spec = env.spec().clone();
            for _ in 0..500 {
                let state: Vec<f64> = s0.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
                let goal: Vec<f64> = spec.goal_bounds.iter().map(|b| rng.random_range(b.lo..=b.hi)).collect();
                let p = env.project_to_goal(&state);
                let mut brute = true;
                for d in 0..spec.goal_dim {
                    if (p[d] - goal[d]).abs() > spec.goal_thresholds[d] {
                        brute = false;
                    }
                }
                assert_eq!(env.achieved(&state, &goal), brute);
            }
        }
    }

    #[test]
    fn unknown_name_rejected() {
        assert!(matches!(make_env("Pendulum"), Err(EnvError::UnknownEnv(_))));
    }

    proptest! {
        #[test]
        fn trajectories_are_deterministic_sparse_and_finite(
            env_idx in 0usize..4,
            seed in any::<u64>(),
            actions in proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, 3), 1..60),
        ) {
            let name = ENV_NAMES[env_idx];
            let run = || {
                let mut env = make_env(name).unwrap();
                let mut traj = vec![env.reset(seed)];
                let dim = env.spec().action_dim;
                for a in &actions {
                    match env.step(&a[..dim]) {
                        Ok(r) => {
                            assert!(r.extrinsic_reward == 0.0 || r.extrinsic_reward == -1.0);
                            assert_eq!(r.achieved, r.extrinsic_reward == 0.0);
                            assert_eq!(r.next_state.len(), env.spec().state_dim);
                            assert!(r.next_state.iter().all(|x| x.is_finite()));
                            traj.push((r.next_state, vec![r.extrinsic_reward]));
                            if r.done { break; }
                        }
                        Err(e) => panic!("{e}"),
                    }
                }
                traj
            };
            let a = run();
            let b = run();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert!(x.0.iter().zip(&y.0).all(|(p, q)| p.to_bits() == q.to_bits()));
            }
        }
    }

    #[test]
    fn step_after_done_is_protocol_error() {
        for name in ENV_NAMES {
            let mut env = make_env(name).unwrap();
            assert_eq!(env.step(&vec![0.0; env.spec().action_dim]).unwrap_err(), EnvError::NotReset);
            env.reset(3);
            let cap = env.spec().max_episode_steps;
            let zero = vec![0.0; env.spec().action_dim];
            let mut done = false;
            for _ in 0..cap {
                done = env.step(&zero).unwrap().done;
                if done {
                    break;
                }
            }
            assert!(done);
            assert_eq!(env.step(&zero).unwrap_err(), EnvError::EpisodeOver);
        }
    }
}
