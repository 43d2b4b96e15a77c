use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use evotree::config::{ExperimentConfig, MethodConfig};
use evotree::experiment::{self, SweepParameter};
use evotree::prior::DEFAULT_PSEUDOCOUNT;
use evotree::sequence::{Alphabet, PROTEIN_SYMBOLS};

#[derive(Debug, Parser)]
#[command(name = "evotree", version, about = "Prior-guided tree search for sequence optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Overrides {
    /// Replaces `output_dir` from the config.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the configured method for every trial.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// One run per value of a search or prior parameter.
    Sweep {
        config: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParameter,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run several methods on the same task and seeds.
    Bench {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "mcts,greedy,beam,random")]
        methods: Vec<String>,
        #[arg(long, default_value_t = evotree::baselines::DEFAULT_BEAM_WIDTH)]
        beam_width: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Fit a profile prior to aligned FASTA sequences.
    TrainPrior {
        fasta: PathBuf,
        #[arg(long, default_value_t = DEFAULT_PSEUDOCOUNT)]
        alpha: f64,
        #[arg(long, default_value = PROTEIN_SYMBOLS)]
        alphabet: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Search with frozen positions over an alphabet containing `-`.
    Condense {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

fn load(path: &PathBuf, o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(dir) = &o.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(t) = o.trials {
        cfg.trials = t;
    }
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn method(name: &str, width: usize) -> Result<MethodConfig> {
    Ok(match name {
        "mcts" => MethodConfig::Mcts,
        "greedy" => MethodConfig::Greedy,
        "beam" => MethodConfig::Beam { width },
        "random" => MethodConfig::Random,
        other => anyhow::bail!("unknown method {other:?} (expected mcts, greedy, beam or random)"),
    })
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let summary = experiment::cmd_run(&cfg)?;
            if let Some(agg) = &summary.best_fitness {
                println!(
                    "{} on {}: best fitness {:.6} ± {:.6} over {} trials (start {:.6}), wrote {}",
                    summary.method,
                    summary.task,
                    agg.mean,
                    agg.std,
                    summary.trials.len(),
                    summary.start_fitness,
                    cfg.output_dir.display()
                );
            }
        }
        Command::Sweep { config, param, values, overrides } => {
            let cfg = load(&config, &overrides)?;
            for row in experiment::cmd_sweep(&cfg, param, &values)? {
                println!("{}={}: mean {:.6} std {:.6} median {:.6}", row.parameter, row.value, row.mean_best, row.std_best, row.median_best);
            }
        }
        Command::Bench { config, methods, beam_width, overrides } => {
            let cfg = load(&config, &overrides)?;
            let methods = methods.iter().map(|m| method(m, beam_width)).collect::<Result<Vec<_>>>()?;
            for row in experiment::cmd_bench(&cfg, &methods)? {
                println!("{}: mean {:.6} std {:.6}", row.method, row.mean_best, row.std_best);
            }
        }
        Command::TrainPrior { fasta, alpha, alphabet, out } => {
            let alphabet = Alphabet::new(&alphabet).context("--alphabet")?;
            let report = experiment::cmd_train_prior(&fasta, &alphabet, alpha, &out)?;
            println!(
                "trained on {} sequences of length {}: cross-entropy {:.6} nats → {}",
                report.sequences,
                report.length,
                report.cross_entropy,
                out.display()
            );
        }
        Command::Condense { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let report = experiment::cmd_condense(&cfg)?;
            for s in &report.sequences {
                println!("trial {} fitness {:.6} deletions {} {}", s.trial, s.fitness, s.deletions, s.sequence);
            }
            if report.sequences.is_empty() {
                eprintln!("no sequence reached {} deletions", report.min_deletions);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
