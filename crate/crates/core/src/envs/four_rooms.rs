use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::point::{PointDynamics, ARENA};
use super::{check_action, sparse_reward, within_thresholds, Bounds, EnvError, EnvSpec, EpisodeClock, GoalEnv, GoalSpace, StepResult};

/// Axis-aligned obstacle. Only the open interior is forbidden.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WallRect {
    pub x: Bounds,
    pub y: Bounds,
}

impl WallRect {
    const fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x: Bounds::new(x0, x1), y: Bounds::new(y0, y1) }
    }

    pub fn strictly_contains(&self, x: f64, y: f64) -> bool {
        x > self.x.lo && x < self.x.hi && y > self.y.lo && y < self.y.hi
    }

    fn near(&self, x: f64, y: f64, margin: f64) -> bool {
        x > self.x.lo - margin && x < self.x.hi + margin && y > self.y.lo - margin && y < self.y.hi + margin
    }
}

const HALF_THICKNESS: f64 = 0.1;

/// Cross-shaped wall splitting the arena into four rooms, with one door of width 1.0 in
/// each wall arm: vertical arms open at y ∈ (−3, −2) and (2, 3), horizontal arms at
/// x ∈ (−3, −2) and (2, 3).
pub const WALLS: [WallRect; 6] = [
    WallRect::new(-HALF_THICKNESS, HALF_THICKNESS, -5.0, -3.0),
    WallRect::new(-HALF_THICKNESS, HALF_THICKNESS, -2.0, 2.0),
    WallRect::new(-HALF_THICKNESS, HALF_THICKNESS, 3.0, 5.0),
    WallRect::new(-5.0, -3.0, -HALF_THICKNESS, HALF_THICKNESS),
    WallRect::new(-2.0, 2.0, -HALF_THICKNESS, HALF_THICKNESS),
    WallRect::new(3.0, 5.0, -HALF_THICKNESS, HALF_THICKNESS),
];

/// Episodes start in the lower-left room (both coordinates in this range); goals are drawn
/// from the whole arena, so most of them lie behind at least one door.
pub const START_ROOM: Bounds = Bounds::new(-4.5, -0.5);

/// Keep sampled starts and goals this far from any wall.
const SPAWN_MARGIN: f64 = 0.3;

/// [`super::PointReacher2D`] dynamics inside four rooms connected by doors.
///
/// Motion is resolved one axis at a time (x, then y). If the swept segment of an axis
/// move crosses a wall interior, that coordinate stays where it was and its velocity
/// drops to zero.
#[derive(Debug, Clone)]
pub struct FourRoomsPoint {
    spec: EnvSpec,
    dynamics: PointDynamics,
    state: Vec<f64>,
    goal: Vec<f64>,
    clock: EpisodeClock,
}

impl Default for FourRoomsPoint {
    fn default() -> Self {
        Self::new()
    }
}

fn segment_blocked(axis: usize, from: f64, to: f64, other: f64) -> bool {
    let (lo, hi) = if from <= to { (from, to) } else { (to, from) };
    WALLS.iter().any(|w| {
        let (along, across) = if axis == 0 { (w.x, w.y) } else { (w.y, w.x) };
        other > across.lo && other < across.hi && hi > along.lo && lo < along.hi
    })
}

pub fn inside_any_wall(x: f64, y: f64) -> bool {
    WALLS.iter().any(|w| w.strictly_contains(x, y))
}

impl FourRoomsPoint {
    pub fn new() -> Self {
        Self {
            spec: EnvSpec {
                name: "FourRoomsPoint",
                state_dim: 4,
                action_dim: 2,
                goal_dim: 2,
                action_bounds: vec![Bounds::new(-1.0, 1.0); 2],
                goal_bounds: vec![ARENA; 2],
                goal_thresholds: vec![0.25; 2],
                max_episode_steps: 100,
            },
            dynamics: PointDynamics::default(),
            state: Vec::new(),
            goal: Vec::new(),
            clock: EpisodeClock::default(),
        }
    }

    pub fn walls(&self) -> &'static [WallRect] {
        &WALLS
    }

    pub fn set_state(&mut self, state: &[f64], goal: &[f64]) {
        self.state = state.to_vec();
        self.goal = goal.to_vec();
        self.clock.restart();
    }

    fn sample_free<R: Rng>(rng: &mut R, region: Bounds) -> (f64, f64) {
        loop {
            let x = rng.random_range(region.lo..=region.hi);
            let y = rng.random_range(region.lo..=region.hi);
            if !WALLS.iter().any(|w| w.near(x, y, SPAWN_MARGIN)) {
                return (x, y);
            }
        }
    }

    fn move_axis(&self, axis: usize, pos: [f64; 2], v: f64, accel: f64) -> (f64, f64) {
        let (target, v_next) = self.dynamics.integrate_axis(pos[axis], v, accel);
        if segment_blocked(axis, pos[axis], target, pos[1 - axis]) {
            (pos[axis], 0.0)
        } else {
            (target, v_next)
        }
    }
}

impl GoalSpace for FourRoomsPoint {
    fn goal_thresholds(&self) -> &[f64] {
        &self.spec.goal_thresholds
    }

    fn project_to_goal(&self, state: &[f64]) -> Vec<f64> {
        state[..2].to_vec()
    }
}

impl GoalEnv for FourRoomsPoint {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (x, y) = Self::sample_free(&mut rng, START_ROOM);
        let (gx, gy) = Self::sample_free(&mut rng, Bounds::new(-4.5, 4.5));
        self.state = vec![x, y, 0.0, 0.0];
        self.goal = vec![gx, gy];
        self.clock.restart();
        (self.state.clone(), self.goal.clone())
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        self.clock.check()?;
        let a = check_action(action, &self.spec)?;
        let (x, vx) = self.move_axis(0, [self.state[0], self.state[1]], self.state[2], a[0]);
        let (y, vy) = self.move_axis(1, [x, self.state[1]], self.state[3], a[1]);
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
    use proptest::prelude::*;

    #[test]
    fn pushing_into_wall_keeps_blocked_coordinate() {
        let mut env = FourRoomsPoint::new();
        // Left of the central vertical wall, outside any door, moving right.
        env.set_state(&[-0.5, 1.0, 0.0, 0.0], &[4.0, 4.0]);
        let r = env.step(&[1.0, 0.0]).unwrap();
        assert_eq!(r.next_state[0], -0.5);
        assert_eq!(r.next_state[2], 0.0);
        assert_eq!(r.next_state[1], 1.0);

        // The other axis still moves.
        env.set_state(&[-0.5, 1.0, 0.0, 0.0], &[4.0, 4.0]);
        let r = env.step(&[1.0, 0.5]).unwrap();
        assert_eq!(r.next_state[0], -0.5);
        assert_eq!(r.next_state[1], 1.5);
    }

    #[test]
    fn doors_are_passable() {
        let mut env = FourRoomsPoint::new();
        env.set_state(&[-0.5, 2.5, 0.0, 0.0], &[4.0, 4.0]);
        let r = env.step(&[1.0, 0.0]).unwrap();
        assert_eq!(r.next_state[0], 0.5);
    }

    #[test]
    fn samples_avoid_walls() {
        let mut env = FourRoomsPoint::new();
        for seed in 0..500 {
            let (s, g) = env.reset(seed);
            assert!(!inside_any_wall(s[0], s[1]));
            assert!(!inside_any_wall(g[0], g[1]));
            assert!(START_ROOM.contains(s[0]) && START_ROOM.contains(s[1]));
        }
    }

    proptest! {
        #[test]
        fn never_strictly_inside_a_wall(
            seed in any::<u64>(),
            actions in proptest::collection::vec((-1.0f64..=1.0, -1.0f64..=1.0), 1..100),
        ) {
            let mut env = FourRoomsPoint::new();
            env.reset(seed);
            for (ax, ay) in actions {
                let r = env.step(&[ax, ay]).unwrap();
                prop_assert!(!inside_any_wall(r.next_state[0], r.next_state[1]));
                if r.done { break; }
            }
        }
    }
}
