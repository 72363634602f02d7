use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use super::RunError;
use crate::envs::ENV_NAMES;

/// Everything one training run needs. Parsed from `key = value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub env: String,
    pub k: usize,
    pub horizon: usize,
    pub subgoal_test_rate: f64,
    pub eta: f64,
    /// Forward models exist and curiosity is computed. Off means pure extrinsic reward
    /// with no forward-model state at all.
    pub curiosity: bool,
    /// One discount per layer; a single value is broadcast.
    pub gamma: Vec<f64>,
    pub epsilon_random: f64,
    pub sigma_bottom: f64,
    pub sigma_upper: f64,
    pub lr: f64,
    pub fw_lr: f64,
    pub hidden: Vec<usize>,
    pub fw_hidden: Vec<usize>,
    pub batch_size: usize,
    /// Gradient steps per layer after each training episode.
    pub updates_per_round: usize,
    pub buffer_capacity: usize,
    /// `None` keeps the whole curiosity history.
    pub normalizer_capacity: Option<usize>,
    pub episodes: usize,
    pub test_every: usize,
    pub test_batch_size: usize,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            env: "PointReacher2D".into(),
            k: 2,
            horizon: 10,
            subgoal_test_rate: 0.3,
            eta: 0.5,
            curiosity: true,
            gamma: vec![0.98],
            epsilon_random: 0.1,
            sigma_bottom: 0.05,
            sigma_upper: 0.03,
            lr: 1e-3,
            fw_lr: 1e-3,
            hidden: vec![64, 64, 64],
            fw_hidden: vec![256, 256, 256],
            batch_size: 1024,
            updates_per_round: 10,
            buffer_capacity: 200_000,
            normalizer_capacity: Some(10_000),
            episodes: 1000,
            test_every: 10,
            test_batch_size: 20,
            seeds: vec![0, 1, 2, 3, 4],
            out_dir: PathBuf::from("runs"),
        }
    }
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, RunError> {
    value.parse().map_err(|_| RunError::Config { key: key.to_string(), message: format!("cannot parse {value:?}") })
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, RunError> {
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Parses config text on top of the defaults. Unknown keys and malformed values are
    /// errors naming the key.
    pub fn parse(text: &str) -> Result<Self, RunError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(RunError::Config { key: line.to_string(), message: format!("line {} is not `key = value`", lineno + 1) });
            };
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, RunError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), RunError> {
        match key {
            "env" => self.env = value.to_string(),
            "k" => self.k = parse_value(key, value)?,
            "horizon" => self.horizon = parse_value(key, value)?,
            "subgoal_test_rate" => self.subgoal_test_rate = parse_value(key, value)?,
            "eta" => self.eta = parse_value(key, value)?,
            "curiosity" => self.curiosity = parse_value(key, value)?,
            "gamma" => self.gamma = parse_list(key, value)?,
            "epsilon_random" => self.epsilon_random = parse_value(key, value)?,
            "sigma_bottom" => self.sigma_bottom = parse_value(key, value)?,
            "sigma_upper" => self.sigma_upper = parse_value(key, value)?,
            "lr" => self.lr = parse_value(key, value)?,
            "fw_lr" => self.fw_lr = parse_value(key, value)?,
            "hidden" => self.hidden = parse_list(key, value)?,
            "fw_hidden" => self.fw_hidden = parse_list(key, value)?,
            "batch_size" => self.batch_size = parse_value(key, value)?,
            "updates_per_round" => self.updates_per_round = parse_value(key, value)?,
            "buffer_capacity" => self.buffer_capacity = parse_value(key, value)?,
            "normalizer_capacity" => {
                self.normalizer_capacity = if value == "unbounded" { None } else { Some(parse_value(key, value)?) }
            }
            "episodes" => self.episodes = parse_value(key, value)?,
            "test_every" => self.test_every = parse_value(key, value)?,
            "test_batch_size" => self.test_batch_size = parse_value(key, value)?,
            "seeds" => self.seeds = parse_list(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            _ => return Err(RunError::Config { key: key.to_string(), message: "unknown key".into() }),
        }
        Ok(())
    }

    /// Discount of layer `i`.
    pub fn gamma_for(&self, i: usize) -> f64 {
        if self.gamma.len() == 1 {
            self.gamma[0]
        } else {
            self.gamma[i]
        }
    }

    pub fn gammas(&self) -> Vec<f64> {
        (0..self.k).map(|i| self.gamma_for(i)).collect()
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let bad = |key: &str, message: &str| Err(RunError::Config { key: key.to_string(), message: message.to_string() });
        if !ENV_NAMES.contains(&self.env.as_str()) {
            return bad("env", &format!("unknown environment {:?}", self.env));
        }
        if self.k == 0 {
            return bad("k", "must be at least 1");
        }
        if self.horizon == 0 {
            return bad("horizon", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.subgoal_test_rate) {
            return bad("subgoal_test_rate", "must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad("eta", "must lie in [0, 1]");
        }
        if self.gamma.len() != 1 && self.gamma.len() != self.k {
            return bad("gamma", "give one value or one per layer");
        }
        if self.gamma.iter().any(|g| !(0.0..1.0).contains(g)) {
            return bad("gamma", "must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.epsilon_random) {
            return bad("epsilon_random", "must lie in [0, 1]");
        }
        if !(self.sigma_bottom >= 0.0) {
            return bad("sigma_bottom", "must be non-negative");
        }
        if !(self.sigma_upper >= 0.0) {
            return bad("sigma_upper", "must be non-negative");
        }
        if !(self.lr > 0.0) {
            return bad("lr", "must be positive");
        }
        if !(self.fw_lr > 0.0) {
            return bad("fw_lr", "must be positive");
        }
        if self.hidden.iter().any(|&w| w == 0) {
            return bad("hidden", "widths must be positive");
        }
        if self.fw_hidden.iter().any(|&w| w == 0) {
            return bad("fw_hidden", "widths must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.buffer_capacity == 0 {
            return bad("buffer_capacity", "must be positive");
        }
        if self.normalizer_capacity == Some(0) {
            return bad("normalizer_capacity", "must be positive or `unbounded`");
        }
        if self.test_every == 0 {
            return bad("test_every", "must be positive");
        }
        if self.test_batch_size == 0 {
            return bad("test_batch_size", "must be positive");
        }
        if self.seeds.is_empty() {
            return bad("seeds", "need at least one seed");
        }
        Ok(())
    }

    /// Renders the config in the same format `parse` reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a String");
        kv("env", self.env.clone());
        kv("k", self.k.to_string());
        kv("horizon", self.horizon.to_string());
        kv("subgoal_test_rate", self.subgoal_test_rate.to_string());
        kv("eta", self.eta.to_string());
        kv("curiosity", self.curiosity.to_string());
        kv("gamma", join(&self.gamma));
        kv("epsilon_random", self.epsilon_random.to_string());
        kv("sigma_bottom", self.sigma_bottom.to_string());
        kv("sigma_upper", self.sigma_upper.to_string());
        kv("lr", self.lr.to_string());
        kv("fw_lr", self.fw_lr.to_string());
        kv("hidden", join(&self.hidden));
        kv("fw_hidden", join(&self.fw_hidden));
        kv("batch_size", self.batch_size.to_string());
        kv("updates_per_round", self.updates_per_round.to_string());
        kv("buffer_capacity", self.buffer_capacity.to_string());
        kv("normalizer_capacity", self.normalizer_capacity.map_or("unbounded".into(), |c| c.to_string()));
        kv("episodes", self.episodes.to_string());
        kv("test_every", self.test_every.to_string());
        kv("test_batch_size", self.test_batch_size.to_string());
        kv("seeds", join(&self.seeds));
        kv("out_dir", self.out_dir.display().to_string());
        s
    }
}
