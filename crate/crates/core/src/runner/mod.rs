//! Experiment orchestration: config parsing, seeded training runs, checkpoints, metric
//! aggregation and plotting.

mod aggregate;
mod checkpoint;
mod config;
mod metrics;
mod plot;
mod train;

use std::path::{Path, PathBuf};

pub use aggregate::{aggregate, mean_std, Aggregated};
pub use checkpoint::{evaluate, load_agent, rollout_checkpoint, save_checkpoint};
pub use config::RunConfig;
pub use metrics::{metrics_header, LayerMetrics, MetricsRow, MetricsWriter};
pub use plot::{moving_average, read_curves, render_svg, Curve};
pub use train::{layer_noise, LayerCuriosity, Trainer};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("config key `{key}`: {message}")]
    Config { key: String, message: String },
    #[error(transparent)]
    Env(#[from] crate::envs::EnvError),
    #[error(transparent)]
    Policy(#[from] crate::policy::PolicyError),
    #[error(transparent)]
    Numeric(#[from] crate::numeric::NumericError),
    #[error(transparent)]
    Hindsight(#[from] crate::hindsight::HindsightError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("aggregate: {0}")]
    Aggregate(String),
    #[error("plot: {0}")]
    Plot(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Output locations of one seed inside a run directory.
pub fn seed_dir(out_dir: &Path, seed: u64) -> PathBuf {
    out_dir.join(format!("seed_{seed}"))
}

/// Trains one seed, streaming `metrics.csv` and writing a final checkpoint under
/// `out_dir/seed_{seed}`.
pub fn train_seed(config: &RunConfig, seed: u64, out_dir: &Path) -> Result<Vec<MetricsRow>, RunError> {
    let dir = seed_dir(out_dir, seed);
    std::fs::create_dir_all(&dir)?;
    let mut writer = MetricsWriter::new(std::io::BufWriter::new(std::fs::File::create(dir.join("metrics.csv"))?), config.k)?;
    let mut trainer = Trainer::new(config.clone(), seed)?;
    let rows = trainer.run(|row| writer.write(row).map_err(RunError::from))?;
    save_checkpoint(&trainer, &dir.join("checkpoint"))?;
    Ok(rows)
}
