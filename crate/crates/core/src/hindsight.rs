//! Replay storage and the three hindsight transition factories of hierarchical actor-critic.

use std::collections::VecDeque;
use std::io::Write;

use rand::Rng;

use crate::envs::GoalSpace;

/// One layer-local experience tuple.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub layer: usize,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    /// Sparse extrinsic reward under `goal` (`-H` for subgoal-test penalties).
    pub extrinsic_reward: f64,
    /// Reward used for training, after curiosity mixing.
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub goal: Vec<f64>,
    pub achieved: bool,
    /// Penalty transition produced by a missed test subgoal.
    pub is_subgoal_test: bool,
    /// The attempt ran in test mode: its subtree acted without exploration noise.
    pub test_mode: bool,
    /// Normalized curiosity reward in `[-1, 0]`, shared by every relabeled copy.
    pub curiosity: Option<f64>,
}

impl Transition {
    /// No bootstrapping past goal achievement or a subgoal-test penalty.
    pub fn is_terminal(&self) -> bool {
        self.achieved || self.is_subgoal_test
    }

    fn rescore<S: GoalSpace + ?Sized>(&mut self, reached: &[f64], space: &S) {
        self.achieved = space.achieved(reached, &self.goal);
        self.extrinsic_reward = if self.achieved { 0.0 } else { -1.0 };
        self.reward = self.extrinsic_reward;
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum HindsightError {
    #[error("hindsight action transitions only exist for layers above 0")]
    BottomLayer,
    #[error("subgoal-test transitions require a test-mode attempt above layer 0")]
    NotTestMode,
}

/// Relabels a rollout with the final achieved state as goal.
///
/// Only `goal`, the rewards and `achieved` change; the last copy is always achieved.
/// Rewards are reset to the new extrinsic value, so mixing with the stored curiosity has
/// to be reapplied by the caller.
pub fn hindsight_goal_transitions<S: GoalSpace + ?Sized>(transitions: &[Transition], space: &S) -> Vec<Transition> {
    let Some(last) = transitions.last() else {
        return Vec::new();
    };
    let new_goal = space.project_to_goal(&last.next_state);
    transitions
        .iter()
        .map(|t| {
            let mut c = t.clone();
            c.goal = new_goal.clone();
            c.is_subgoal_test = false;
            c.rescore(&t.next_state, space);
            c
        })
        .collect()
}

/// Replaces the proposed subgoal with the goal-space image of what the lower layer actually
/// reached, then rescores against the transition's own goal.
pub fn hindsight_action_transition<S: GoalSpace + ?Sized>(
    t: &Transition,
    achieved_state: &[f64],
    space: &S,
) -> Result<Transition, HindsightError> {
    if t.layer == 0 {
        return Err(HindsightError::BottomLayer);
    }
    let mut c = t.clone();
    c.action = space.project_to_goal(achieved_state);
    c.is_subgoal_test = false;
    c.rescore(achieved_state, space);
    Ok(c)
}

/// Penalty copy for a test subgoal the lower layer failed to reach; `None` if it was reached.
pub fn subgoal_test_transition(t: &Transition, subgoal_achieved: bool, horizon: usize) -> Result<Option<Transition>, HindsightError> {
    if !t.test_mode || t.layer == 0 {
        return Err(HindsightError::NotTestMode);
    }
    if subgoal_achieved {
        return Ok(None);
    }
    let penalty = -(horizon as f64);
    let mut c = t.clone();
    c.extrinsic_reward = penalty;
    c.reward = penalty;
    c.achieved = false;
    c.is_subgoal_test = true;
    c.curiosity = None;
    Ok(Some(c))
}

/// FIFO ring of transitions with uniform sampling.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<Transition>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self { capacity, items: VecDeque::with_capacity(capacity.min(1 << 16)) }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: Transition) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(t);
    }

    pub fn extend<I: IntoIterator<Item = Transition>>(&mut self, ts: I) {
        for t in ts {
            self.push(t);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition> {
        self.items.iter()
    }

    /// `n` independent uniform draws with replacement; `None` when the buffer is empty.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Option<Vec<Transition>> {
        if self.items.is_empty() {
            return None;
        }
        Some((0..n).map(|_| self.items[rng.random_range(0..self.items.len())].clone()).collect())
    }

    /// One transition per row, oldest first.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let Some(first) = self.items.front() else {
            w.flush()?;
            return Ok(());
        };
        let mut header = vec!["layer".to_string()];
        let cols = |p: &'static str, n: usize| (0..n).map(move |i| format!("{p}{i}"));
        header.extend(cols("s", first.state.len()));
        header.extend(cols("a", first.action.len()));
        header.extend(["reward", "extrinsic_reward"].map(String::from));
        header.extend(cols("next_s", first.next_state.len()));
        header.extend(cols("g", first.goal.len()));
        header.extend(["achieved", "is_subgoal_test", "test_mode", "curiosity"].map(String::from));
        w.write_record(&header)?;
        for t in &self.items {
            let mut row = vec![t.layer.to_string()];
            row.extend(t.state.iter().map(f64::to_string));
            row.extend(t.action.iter().map(f64::to_string));
            row.push(t.reward.to_string());
            row.push(t.extrinsic_reward.to_string());
            row.extend(t.next_state.iter().map(f64::to_string));
            row.extend(t.goal.iter().map(f64::to_string));
            row.push(u8::from(t.achieved).to_string());
            row.push(u8::from(t.is_subgoal_test).to_string());
            row.push(u8::from(t.test_mode).to_string());
            row.push(t.curiosity.map_or(String::new(), |c| c.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::PointReacher2D;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(layer: usize, s: [f64; 2], a: [f64; 2], s2: [f64; 2], g: [f64; 2]) -> Transition {
        let space = PointReacher2D::new();
        let state = vec![s[0], s[1], 0.0, 0.0];
        let next_state = vec![s2[0], s2[1], 0.0, 0.0];
        let achieved = space.achieved(&next_state, &g);
        let r = if achieved { 0.0 } else { -1.0 };
        Transition {
            layer,
            state,
            action: a.to_vec(),
            extrinsic_reward: r,
            reward: r,
            next_state,
            goal: g.to_vec(),
            achieved,
            is_subgoal_test: false,
            test_mode: false,
            curiosity: None,
        }
    }

    /// Per-dimension re-evaluation of the achievement test, independent of `GoalSpace`.
    fn oracle(next_state: &[f64], goal: &[f64]) -> bool {
        (next_state[0] - goal[0]).abs() <= 0.25 && (next_state[1] - goal[1]).abs() <= 0.25
    }

    #[test]
    fn already_successful_rollout_keeps_zero_final_reward() {
        let space = PointReacher2D::new();
        let ts = vec![tr(0, [0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [1.0, 0.1])];
        assert_eq!(ts[0].extrinsic_reward, 0.0);
        let h = hindsight_goal_transitions(&ts, &space);
        assert_eq!(h[0].extrinsic_reward, 0.0);
        assert!(h[0].achieved);
    }

    #[test]
    fn single_transition_relabels_to_success() {
        let space = PointReacher2D::new();
        let ts = vec![tr(0, [0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [4.0, 4.0])];
        let h = hindsight_goal_transitions(&ts, &space);
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].goal, vec![1.0, 0.0]);
        assert_eq!(h[0].reward, 0.0);
        assert!(h[0].achieved);
        assert_eq!((&h[0].state, &h[0].action, &h[0].next_state), (&ts[0].state, &ts[0].action, &ts[0].next_state));
    }

    #[test]
    fn scripted_three_step_rollout_matches_oracle() {
        let space = PointReacher2D::new();
        let ts = vec![
            tr(0, [0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [4.0, 4.0]),
            tr(0, [1.0, 0.0], [0.5, 0.0], [2.3, 0.0], [4.0, 4.0]),
            tr(0, [2.3, 0.0], [0.0, 0.0], [2.45, 0.1], [4.0, 4.0]),
        ];
        let h = hindsight_goal_transitions(&ts, &space);
        for t in &h {
            assert_eq!(t.goal, vec![2.45, 0.1]);
            let ok = oracle(&t.next_state, &t.goal);
            assert_eq!(t.achieved, ok);
            assert_eq!(t.reward, if ok { 0.0 } else { -1.0 });
        }
        assert_eq!(h.iter().map(|t| t.achieved).collect::<Vec<_>>(), vec![false, true, true]);
    }

    #[test]
    fn action_relabel_when_subgoal_reached_is_identity() {
        let space = PointReacher2D::new();
        let t = tr(1, [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [3.0, 3.0]);
        let h = hindsight_action_transition(&t, &t.next_state, &space).unwrap();
        assert_eq!(h, t);
    }

    #[test]
    fn action_relabel_at_goal_is_success() {
        let space = PointReacher2D::new();
        let t = tr(1, [0.0, 0.0], [-2.0, 1.0], [3.0, 3.0], [3.0, 3.0]);
        let h = hindsight_action_transition(&t, &[3.0, 3.0, 0.2, 0.0], &space).unwrap();
        assert_eq!(h.action, vec![3.0, 3.0]);
        assert!(h.achieved);
        assert_eq!(h.reward, 0.0);
    }

    #[test]
    fn action_relabel_at_bottom_layer_fails() {
        let space = PointReacher2D::new();
        let t = tr(0, [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [3.0, 3.0]);
        assert_eq!(hindsight_action_transition(&t, &t.next_state, &space), Err(HindsightError::BottomLayer));
    }

    #[test]
    fn random_action_relabels_match_oracle() {
        let space = PointReacher2D::new();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let mut p = || [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let t = tr(1, p(), p(), p(), p());
            let reached = vec![t.next_state[0], t.next_state[1], 0.0, 0.0];
            let h = hindsight_action_transition(&t, &reached, &space).unwrap();
            assert_eq!(h.achieved, oracle(&reached, &t.goal));
            assert_eq!(h.reward, if h.achieved { 0.0 } else { -1.0 });
        }
    }

    #[test]
    fn subgoal_test_penalties() {
        let mut t = tr(1, [0.0, 0.0], [2.0, 2.0], [1.0, 1.0], [3.0, 3.0]);
        assert_eq!(subgoal_test_transition(&t, false, 10), Err(HindsightError::NotTestMode));
        t.test_mode = true;
        assert_eq!(subgoal_test_transition(&t, true, 10), Ok(None));
        let p = subgoal_test_transition(&t, false, 10).unwrap().unwrap();
        assert_eq!(p.reward, -10.0);
        assert!(p.is_subgoal_test && p.is_terminal() && !p.achieved);
        assert_eq!(p.action, t.action);
    }

    #[test]
    fn sampling_single_item_repeats_it() {
        let mut buf = ReplayBuffer::new(4);
        let t = tr(0, [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [3.0, 3.0]);
        buf.push(t.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(buf.sample(4, &mut rng).unwrap(), vec![t; 4]);
        assert!(ReplayBuffer::new(3).sample(4, &mut rng).is_none());
    }

    #[test]
    fn fifo_eviction() {
        let mut buf = ReplayBuffer::new(3);
        for i in 0..5 {
            buf.push(tr(0, [i as f64, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]));
        }
        assert_eq!(buf.len(), 3);
        let xs: Vec<f64> = buf.iter().map(|t| t.state[0]).collect();
        assert_eq!(xs, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn sampled_batch_is_a_copy() {
        let mut buf = ReplayBuffer::new(4);
        buf.push(tr(0, [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [3.0, 3.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut batch = buf.sample(2, &mut rng).unwrap();
        batch[0].reward = 123.0;
        batch[0].state[0] = 9.0;
        let stored = buf.iter().next().unwrap();
        assert_eq!(stored.reward, -1.0);
        assert_eq!(stored.state[0], 0.0);
    }

    #[test]
    fn uniform_sampling_chi_square() {
        let mut buf = ReplayBuffer::new(10);
        for i in 0..10 {
            buf.push(tr(0, [i as f64, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let mut counts = [0usize; 10];
        for t in buf.sample(100_000, &mut rng).unwrap() {
            counts[t.state[0] as usize] += 1;
        }
        let expected = 10_000.0;
        let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        // 99th percentile of χ² with 9 degrees of freedom.
        assert!(chi2 < 21.666, "chi2 = {chi2}");
    }

    #[test]
    fn csv_dump_has_one_row_per_transition() {
        let mut buf = ReplayBuffer::new(4);
        buf.push(tr(0, [0.0, 0.0], [1.0, 1.0], [1.0, 1.0], [3.0, 3.0]));
        buf.push(tr(0, [1.0, 0.0], [1.0, 1.0], [1.0, 1.0], [3.0, 3.0]));
        let mut out = Vec::new();
        buf.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("layer,s0,s1,s2,s3,a0,a1,reward"));
    }
}
