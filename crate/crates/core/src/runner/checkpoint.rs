//! Checkpoint directories: `config.txt` plus one `.mlp`/`.adam` pair per network, named
//! `layer{i}_actor`, `layer{i}_critic` and, with curiosity enabled, `layer{i}_fw`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::RunConfig;
use super::train::{layer_noise, Trainer};
use super::RunError;
use crate::envs::make_env;
use crate::hierarchy::{run_episode, Agent, HierarchyConfig, RolloutRecord};
use crate::numeric::{read_adam, read_mlp, write_adam, write_mlp, AdamState, Mlp};
use crate::policy::ActorCritic;

fn save_pair(dir: &Path, stem: &str, net: &Mlp, opt: &AdamState) -> Result<(), RunError> {
    let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.mlp")))?);
    write_mlp(net, &mut w)?;
    let mut w = BufWriter::new(File::create(dir.join(format!("{stem}.adam")))?);
    write_adam(opt, &mut w)?;
    Ok(())
}

fn load_pair(dir: &Path, stem: &str) -> Result<(Mlp, AdamState), RunError> {
    let open = |ext: &str| -> Result<BufReader<File>, RunError> {
        let p = dir.join(format!("{stem}.{ext}"));
        File::open(&p).map(BufReader::new).map_err(|e| RunError::Checkpoint(format!("{}: {e}", p.display())))
    };
    let net = read_mlp(&mut open("mlp")?)?;
    let opt = read_adam(&mut open("adam")?)?;
    Ok((net, opt))
}

/// Writes the trainer's agent, forward models and config. The stored config names the
/// trainer's seed as its only seed.
pub fn save_checkpoint(trainer: &Trainer, dir: &Path) -> Result<(), RunError> {
    std::fs::create_dir_all(dir)?;
    let mut cfg = trainer.config.clone();
    cfg.seeds = vec![trainer.seed];
    std::fs::write(dir.join("config.txt"), cfg.to_text())?;
    for (i, layer) in trainer.agent.layers.iter().enumerate() {
        save_pair(dir, &format!("layer{i}_actor"), layer.actor(), layer.actor_optimizer())?;
        save_pair(dir, &format!("layer{i}_critic"), layer.critic(), layer.critic_optimizer())?;
    }
    for (i, c) in trainer.curiosity.iter().enumerate() {
        save_pair(dir, &format!("layer{i}_fw"), c.model.net(), c.model.optimizer())?;
    }
    Ok(())
}

/// Restores the agent stored in `dir`, checking every network against the environment.
pub fn load_agent(dir: &Path) -> Result<(RunConfig, Agent), RunError> {
    let cfg = RunConfig::load(&dir.join("config.txt"))?;
    let env = make_env(&cfg.env)?;
    let spec = env.spec();
    let hcfg = HierarchyConfig::for_env(spec, cfg.k, cfg.horizon, cfg.subgoal_test_rate, &cfg.gammas())?;
    let mut layers = Vec::with_capacity(cfg.k);
    for umdp in &hcfg.layers {
        let i = umdp.index;
        let (actor, actor_opt) = load_pair(dir, &format!("layer{i}_actor"))?;
        let (critic, critic_opt) = load_pair(dir, &format!("layer{i}_critic"))?;
        let sg = umdp.state_dim + umdp.goal_dim;
        if actor.input_dim() != sg || actor.output_dim() != umdp.action_dim {
            return Err(RunError::Checkpoint(format!(
                "layer {i} actor maps {} -> {}, environment {} needs {sg} -> {}",
                actor.input_dim(),
                actor.output_dim(),
                cfg.env,
                umdp.action_dim
            )));
        }
        if critic.input_dim() != sg + umdp.action_dim || critic.output_dim() != 1 {
            return Err(RunError::Checkpoint(format!("layer {i} critic shape does not match environment {}", cfg.env)));
        }
        layers.push(ActorCritic::from_parts(umdp.clone(), actor, critic, cfg.lr).with_optimizers(actor_opt, critic_opt));
    }
    let noise = layer_noise(&cfg)?;
    Ok((cfg, Agent { config: hcfg, layers, noise }))
}

/// Fraction of `n_episodes` noiseless episodes that reach their goal. Episode seeds come
/// from a generator seeded with `seed`.
pub fn evaluate(dir: &Path, n_episodes: usize, seed: u64) -> Result<f64, RunError> {
    if n_episodes == 0 {
        return Err(RunError::Config { key: "episodes".into(), message: "evaluation needs at least one episode".into() });
    }
    let (cfg, agent) = load_agent(dir)?;
    let mut env = make_env(&cfg.env)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0;
    for _ in 0..n_episodes {
        let env_seed: u64 = rng.random();
        if run_episode(env.as_mut(), &agent, false, env_seed, &mut rng)?.success {
            successes += 1;
        }
    }
    Ok(successes as f64 / n_episodes as f64)
}

/// One noiseless episode of the stored agent, for trajectory dumps.
pub fn rollout_checkpoint(dir: &Path, env_seed: u64) -> Result<RolloutRecord, RunError> {
    let (cfg, agent) = load_agent(dir)?;
    let mut env = make_env(&cfg.env)?;
    Ok(run_episode(env.as_mut(), &agent, false, env_seed, &mut ChaCha8Rng::seed_from_u64(env_seed))?)
}
