use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use swarm_opt::env::sample_channel_with;
use swarm_opt::harness::{emit_svg_plot, load_config, run_experiment, Aggregate, ConfigOverrides};
use swarm_opt::solvers::{grid_oracle, local_optimum};

#[derive(Parser)]
#[command(name = "swarm-opt", version, about = "Multi-agent prompt-driven power control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured method and seed; write CSV, JSONL and summary.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: ConfigOverrides,
    },
    /// Multi-start local optimum of the configured instance, as JSON.
    Baseline {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: ConfigOverrides,
        #[arg(long)]
        starts: Option<usize>,
    },
    /// Exhaustive grid search of the configured instance, as JSON.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: ConfigOverrides,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Render a trajectories CSV as SVG.
    Plot {
        csv: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "best")]
        aggregate: Aggregate,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, overrides } => {
            let cfg = load_config(config.as_deref(), &overrides)?;
            let art = run_experiment(&cfg)?;
            for f in &art.outcome.failures {
                eprintln!("run failed: {} seed {}: {}", f.method, f.seed, f.error);
            }
            println!("baseline {}", art.outcome.baseline_value());
            println!("wrote {}", art.csv_path.display());
            println!("wrote {}", art.transcript_path.display());
            println!("wrote {}", art.summary_path.display());
        }
        Command::Baseline {
            config,
            overrides,
            starts,
        } => {
            let cfg = load_config(config.as_deref(), &overrides)?;
            let chan = sample_channel_with(cfg.n_cells, cfg.channel_seed, cfg.channel_params())?;
            let res = local_optimum(cfg.objective, &chan, starts.unwrap_or(cfg.baseline_starts), cfg.channel_seed)?;
            println!("{}", serde_json::to_string_pretty(&res)?);
        }
        Command::Oracle {
            config,
            overrides,
            points,
        } => {
            let cfg = load_config(config.as_deref(), &overrides)?;
            let chan = sample_channel_with(cfg.n_cells, cfg.channel_seed, cfg.channel_params())?;
            let res = grid_oracle(cfg.objective, &chan, points.unwrap_or(cfg.grid_points))?;
            println!("{}", serde_json::to_string_pretty(&res)?);
        }
        Command::Plot { csv, out, aggregate } => {
            emit_svg_plot(&csv, &out, aggregate).with_context(|| format!("plotting {}", csv.display()))?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}
