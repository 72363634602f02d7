use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use chac::envs::write_trajectory_csv;
use chac::numeric::random_network_suite;
use chac::runner::{aggregate, evaluate, read_curves, render_svg, rollout_checkpoint, train_seed, RunConfig};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "chac", version, about = "Curious hierarchical actor-critic experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed listed in the config (or only --seed).
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides `out_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Success rate of a checkpoint over noiseless episodes.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write one noiseless episode (reset with --seed) as a trajectory CSV.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Per-episode mean and standard deviation across metrics files.
    Aggregate {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Series name written into every row, used as the plot legend.
        #[arg(long, default_value = "mean")]
        label: String,
    },
    /// Learning-curve SVG from aggregated CSVs.
    Plot {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Moving-average window; 0 disables smoothing.
        #[arg(long, default_value_t = 0)]
        smooth: usize,
    },
    /// Gradient check over random small networks.
    Gradcheck {
        #[arg(long, default_value_t = 100)]
        networks: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, seed, out } => {
            let cfg = RunConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            let out_dir = out.unwrap_or_else(|| cfg.out_dir.clone());
            let seeds = seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
            for s in seeds {
                let rows = train_seed(&cfg, s, &out_dir)?;
                let last = rows.last().map_or(0.0, |r| r.success_rate);
                println!("seed {s}: {} rows, final success rate {last}", rows.len());
            }
        }
        Command::Evaluate { checkpoint, episodes, seed, trajectory } => {
            let rate = evaluate(&checkpoint, episodes, seed)?;
            println!("{rate}");
            if let Some(path) = trajectory {
                let record = rollout_checkpoint(&checkpoint, seed)?;
                let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_trajectory_csv(&record.trajectory, file)?;
            }
        }
        Command::Aggregate { inputs, out, label } => {
            let agg = aggregate(&inputs, &label)?;
            agg.write_csv(std::fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?)?;
        }
        Command::Plot { inputs, out, smooth } => {
            let svg = render_svg(&read_curves(&inputs)?, smooth)?;
            std::fs::write(&out, svg).with_context(|| format!("writing {}", out.display()))?;
        }
        Command::Gradcheck { networks, seed, tolerance } => {
            let report = random_network_suite(networks, seed);
            println!("{} networks, max relative error {:e}", networks, report.max_relative_error);
            if !(report.max_relative_error < tolerance) {
                bail!("gradient check failed: {:e} >= {tolerance:e}", report.max_relative_error);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let chain: Vec<String> = e.chain().map(ToString::to_string).collect();
            eprintln!("error: {}", chain.join(": "));
            ExitCode::FAILURE
        }
    }
}
