use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::metrics::{LayerMetrics, MetricsRow};
use super::RunError;
use crate::curiosity::{apply_mix, CuriosityNormalizer, EtaMix, LayerForwardModel};
use crate::envs::{make_env, GoalEnv};
use crate::hierarchy::{run_episode, Agent, HierarchyConfig, RolloutRecord};
use crate::hindsight::{hindsight_action_transition, hindsight_goal_transitions, subgoal_test_transition, ReplayBuffer, Transition};
use crate::policy::NoiseSpec;

/// Forward model plus normalizer of one layer.
#[derive(Debug, Clone)]
pub struct LayerCuriosity {
    pub model: LayerForwardModel,
    pub normalizer: CuriosityNormalizer,
}

#[derive(Debug, Clone, Default)]
struct Accum {
    critic: (f64, usize),
    actor: (f64, usize),
    fw: (f64, usize),
    raw: (f64, usize),
}

fn mean((sum, n): (f64, usize)) -> Option<f64> {
    (n > 0).then(|| sum / n as f64)
}

fn add(acc: &mut (f64, usize), v: f64) {
    acc.0 += v;
    acc.1 += 1;
}

/// One seeded training run: agent, buffers, curiosity state and the run's only RNG.
pub struct Trainer {
    pub config: RunConfig,
    pub seed: u64,
    pub env: Box<dyn GoalEnv>,
    pub agent: Agent,
    pub buffers: Vec<ReplayBuffer>,
    /// Empty when curiosity is disabled.
    pub curiosity: Vec<LayerCuriosity>,
    rng: ChaCha8Rng,
    episodes_done: usize,
    accum: Vec<Accum>,
}

pub fn layer_noise(config: &RunConfig) -> Result<Vec<NoiseSpec>, RunError> {
    (0..config.k)
        .map(|i| NoiseSpec::new(config.epsilon_random, if i == 0 { config.sigma_bottom } else { config.sigma_upper }).map_err(RunError::from))
        .collect()
}

impl Trainer {
    pub fn new(config: RunConfig, seed: u64) -> Result<Self, RunError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let env = make_env(&config.env)?;
        let spec = env.spec().clone();
        let hcfg = HierarchyConfig::for_env(&spec, config.k, config.horizon, config.subgoal_test_rate, &config.gammas())?;
        let agent = Agent::new(hcfg, &config.hidden, config.lr, layer_noise(&config)?, &mut rng)?;
        let mut curiosity = Vec::new();
        for i in 0..config.k {
            // Drawn unconditionally so the rest of the stream does not depend on `curiosity`.
            let fw_seed: u64 = rng.random();
            if config.curiosity {
                let action_dim = agent.config.layers[i].action_dim;
                let model = LayerForwardModel::new(spec.state_dim, action_dim, &config.fw_hidden, config.fw_lr, &mut ChaCha8Rng::seed_from_u64(fw_seed));
                curiosity.push(LayerCuriosity { model, normalizer: CuriosityNormalizer::new(config.normalizer_capacity) });
            }
        }
        let buffers = (0..config.k).map(|_| ReplayBuffer::new(config.buffer_capacity)).collect();
        Ok(Self { accum: vec![Accum::default(); config.k], config, seed, env, agent, buffers, curiosity, rng, episodes_done: 0 })
    }

    pub fn episodes_done(&self) -> usize {
        self.episodes_done
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// One exploratory episode, its storage, and one update round.
    pub fn train_episode(&mut self) -> Result<RolloutRecord, RunError> {
        let env_seed: u64 = self.rng.random();
        let record = run_episode(self.env.as_mut(), &self.agent, true, env_seed, &mut self.rng)?;
        self.store(&record)?;
        self.update_round()?;
        self.episodes_done += 1;
        Ok(record)
    }

    /// Noiseless episodes; returns the fraction that reached the environment goal.
    pub fn test_batch(&mut self) -> Result<f64, RunError> {
        let n = self.config.test_batch_size;
        let mut successes = 0;
        for _ in 0..n {
            let env_seed: u64 = self.rng.random();
            if run_episode(self.env.as_mut(), &self.agent, false, env_seed, &mut self.rng)?.success {
                successes += 1;
            }
        }
        Ok(successes as f64 / n as f64)
    }

    /// The transitions layer `i` learns from for one goal segment, before curiosity.
    /// Returns `(base, penalties)`.
    pub fn segment_transitions(&self, i: usize, segment: &[crate::hierarchy::Attempt]) -> Result<(Vec<Transition>, Vec<Transition>), RunError> {
        let h = self.config.horizon;
        let mut base = Vec::with_capacity(segment.len());
        let mut penalties = Vec::new();
        for a in segment {
            let t = &a.transition;
            if i == 0 {
                base.push(t.clone());
                continue;
            }
            base.push(hindsight_action_transition(t, &t.next_state, self.env.as_ref())?);
            if t.test_mode {
                let reached = a.subgoal_reached.expect("upper-layer attempts record subgoal outcome");
                penalties.extend(subgoal_test_transition(t, reached, h)?);
            }
        }
        Ok((base, penalties))
    }

    /// Turns a rollout into replay transitions for every layer.
    pub fn store(&mut self, record: &RolloutRecord) -> Result<(), RunError> {
        let eta = EtaMix::new(self.config.eta).expect("validated config");
        for i in 0..self.config.k {
            for segment in &record.layers[i] {
                let (mut base, penalties) = self.segment_transitions(i, segment)?;
                if let Some(c) = self.curiosity.get_mut(i) {
                    let raw = c.model.batch_raw_curiosity(&base)?;
                    for (t, r) in base.iter_mut().zip(raw) {
                        add(&mut self.accum[i].raw, r);
                        t.curiosity = Some(c.normalizer.normalize(r));
                        apply_mix(t, eta);
                    }
                }
                let mut relabeled = hindsight_goal_transitions(&base, self.env.as_ref());
                relabeled.iter_mut().for_each(|t| apply_mix(t, eta));
                let buffer = &mut self.buffers[i];
                buffer.extend(base);
                buffer.extend(penalties);
                buffer.extend(relabeled);
            }
        }
        Ok(())
    }

    /// `updates_per_round` steps per layer; each samples one batch and trains the
    /// actor-critic and then the forward model on it.
    pub fn update_round(&mut self) -> Result<(), RunError> {
        for i in 0..self.config.k {
            if self.buffers[i].is_empty() {
                continue;
            }
            for _ in 0..self.config.updates_per_round {
                let batch = self.buffers[i].sample(self.config.batch_size, &mut self.rng).expect("non-empty buffer");
                let stats = self.agent.layers[i].update(&batch)?;
                if !stats.skipped {
                    add(&mut self.accum[i].critic, stats.critic_loss);
                    add(&mut self.accum[i].actor, stats.actor_objective);
                }
                if let Some(c) = self.curiosity.get_mut(i) {
                    if let Some(loss) = c.model.train(&batch)? {
                        add(&mut self.accum[i].fw, loss);
                    }
                }
            }
        }
        Ok(())
    }

    /// Drains the accumulated statistics into per-layer metrics.
    fn take_layer_metrics(&mut self) -> Vec<LayerMetrics> {
        (0..self.config.k)
            .map(|i| {
                let acc = std::mem::take(&mut self.accum[i]);
                let extrema = self.curiosity.get(i).and_then(|c| c.normalizer.extrema());
                LayerMetrics {
                    critic_loss: mean(acc.critic),
                    actor_objective: mean(acc.actor),
                    fw_loss: mean(acc.fw),
                    curiosity_mean: mean(acc.raw),
                    r_min: extrema.map(|e| e.0),
                    r_max: extrema.map(|e| e.1),
                }
            })
            .collect()
    }

    /// Runs the whole schedule, handing each metrics row to `sink` as it is produced.
    pub fn run(&mut self, mut sink: impl FnMut(&MetricsRow) -> Result<(), RunError>) -> Result<Vec<MetricsRow>, RunError> {
        let mut rows = Vec::new();
        while self.episodes_done < self.config.episodes {
            self.train_episode()?;
            if self.episodes_done % self.config.test_every == 0 || self.episodes_done == self.config.episodes {
                let success_rate = self.test_batch()?;
                let row = MetricsRow { seed: self.seed, episode: self.episodes_done, success_rate, layers: self.take_layer_metrics() };
                log::info!("seed {} episode {} success {}", self.seed, row.episode, row.success_rate);
                sink(&row)?;
                rows.push(row);
            }
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(env: &str, k: usize) -> RunConfig {
        RunConfig {
            env: env.into(),
            k,
            hidden: vec![16, 16],
            fw_hidden: vec![16, 16],
            batch_size: 32,
            updates_per_round: 2,
            episodes: 6,
            test_every: 3,
            test_batch_size: 2,
            ..RunConfig::default()
        }
    }

    #[test]
    fn rows_follow_schedule() {
        let mut cfg = small("PointReacher2D", 2);
        cfg.episodes = 7;
        let rows = Trainer::new(cfg, 1).unwrap().run(|_| Ok(())).unwrap();
        assert_eq!(rows.iter().map(|r| r.episode).collect::<Vec<_>>(), vec![3, 6, 7]);
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.success_rate) && r.layers.len() == 2));
    }

    #[test]
    fn eta_one_stores_extrinsic_rewards() {
        let mut cfg = small("FourRoomsPoint", 2);
        cfg.eta = 1.0;
        let mut t = Trainer::new(cfg, 4).unwrap();
        for _ in 0..3 {
            t.train_episode().unwrap();
        }
        for b in &t.buffers {
            assert!(!b.is_empty());
            for tr in b.iter() {
                assert_eq!(tr.reward.to_bits(), tr.extrinsic_reward.to_bits());
            }
        }
    }

    #[test]
    fn mixed_rewards_use_stored_curiosity() {
        let mut cfg = small("PointReacher2D", 2);
        cfg.eta = 0.5;
        let mut t = Trainer::new(cfg, 2).unwrap();
        t.train_episode().unwrap();
        for b in &t.buffers {
            for tr in b.iter() {
                match (tr.is_subgoal_test, tr.curiosity) {
                    (true, c) => {
                        assert_eq!(c, None);
                        assert_eq!(tr.reward, -10.0);
                    }
                    (false, Some(c)) => {
                        assert!((-1.0..=0.0).contains(&c));
                        assert_eq!(tr.reward, 0.5 * tr.extrinsic_reward + 0.5 * c);
                    }
                    (false, None) => panic!("curiosity missing on a stored transition"),
                }
            }
        }
    }

    #[test]
    fn forward_model_inputs_match_layer_actions() {
        let t = Trainer::new(small("CausalButton", 2), 0).unwrap();
        assert_eq!(t.curiosity[0].model.input_dim(), 5 + 2);
        assert_eq!(t.curiosity[1].model.input_dim(), 5 + 3);
    }

    #[test]
    fn disabled_curiosity_has_no_models() {
        let mut cfg = small("PointReacher2D", 1);
        cfg.curiosity = false;
        let mut t = Trainer::new(cfg, 0).unwrap();
        t.train_episode().unwrap();
        assert!(t.curiosity.is_empty());
        assert!(t.buffers[0].iter().all(|tr| tr.curiosity.is_none()));
    }
}
