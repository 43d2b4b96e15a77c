//! Experiment orchestration: tasks, seeded trials, sweeps and condensing.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{beam_search, greedy_search, random_search};
use crate::config::{ExperimentConfig, LandscapeConfig, MethodConfig, PriorConfig};
use crate::fasta::{read_fasta, to_states};
use crate::landscape::{
    local_optima, BudgetedOracle, Direction, ExternalOracle, Fallback, Landscape, NkLandscape,
    ProfileLandscape, TableLandscape, MAX_ENUMERATION,
};
use crate::mcts::{self, RunResult};
use crate::metrics::{self, Aggregate, SetMetric};
use crate::output;
use crate::prior::{train_profile, ExternalPrior, MutationPrior, ProfilePrior, UniformPrior};
use crate::rng::{derive_seed, seeded};
use crate::sequence::{Alphabet, SequenceState};
use crate::sidecar::SidecarConfig;
use crate::value::ValueLearner;

type SharedLandscape = Arc<dyn Landscape<f64> + Send + Sync>;

const STREAM_VALUE: u64 = 1;
const STREAM_RANDOM: u64 = 2;

enum LandscapeSource {
    Local(SharedLandscape),
    External(SidecarConfig),
}

enum PriorSource {
    Uniform,
    Profile(ProfilePrior<f64>),
    External(SidecarConfig),
}

/// Everything a trial needs that is shared across trials.
pub struct Task {
    pub alphabet: Alphabet,
    pub length: usize,
    pub start: SequenceState,
    /// Sequences the prior was trained on, when known.
    pub training_set: Option<Vec<SequenceState>>,
    landscape: LandscapeSource,
    prior: PriorSource,
}

fn sidecar(command: &str, args: &[String], timeout_secs: f64) -> SidecarConfig {
    SidecarConfig {
        command: command.to_string(),
        args: args.to_vec(),
        timeout_secs,
    }
}

/// Lowest-fitness sequence when enumerable, else a descent local minimum.
fn lowest_nk(nk: &NkLandscape<f64>, alphabet: &Alphabet, n: usize, seed: u64) -> Result<SequenceState> {
    if (alphabet.size() as f64).powi(n as i32) <= MAX_ENUMERATION {
        return Ok(nk.brute_force_minimum()?.0);
    }
    let found = local_optima(nk, alphabet, n, 1, Direction::Descend, seed)?;
    Ok(found.into_iter().next().expect("one descent").0)
}

impl Task {
    pub fn build(cfg: &ExperimentConfig) -> Result<Self> {
        let alphabet = Alphabet::new(cfg.landscape.alphabet()).context("config key `landscape.alphabet`")?;
        let (landscape, length, auto_start): (LandscapeSource, usize, Option<SequenceState>) = match &cfg.landscape {
            LandscapeConfig::Nk { n, k, seed, .. } => {
                let nk = NkLandscape::<f64>::new(&alphabet, *n, *k, *seed).context("config key `landscape`")?;
                let start = if cfg.start.is_none() {
                    Some(lowest_nk(&nk, &alphabet, *n, *seed)?)
                } else {
                    None
                };
                (LandscapeSource::Local(Arc::new(nk)), *n, start)
            }
            LandscapeConfig::Profile { weights, random_length, seed, offset, .. } => {
                let land = match (weights, random_length) {
                    (Some(rows), None) => ProfileLandscape::from_rows(&alphabet, rows, *offset)?,
                    (None, Some(len)) => {
                        let mut rng = seeded(*seed);
                        let w: Vec<f64> = (0..alphabet.size() * len).map(|_| rng.random::<f64>()).collect();
                        ProfileLandscape::new(&alphabet, *len, w, *offset)?
                    }
                    _ => bail!("config key `landscape`: need exactly one of `weights` or `random_length`"),
                };
                let length = land.length();
                let start = Some(land.minimum().0);
                (LandscapeSource::Local(Arc::new(land)), length, start)
            }
            LandscapeConfig::Table { path, missing_penalty, .. } => {
                let file = File::open(path).with_context(|| format!("opening fitness table {}", path.display()))?;
                let fallback = missing_penalty.map_or(Fallback::Error, Fallback::Penalty);
                let table = TableLandscape::<f64>::from_csv(BufReader::new(file), &alphabet, fallback)?;
                let start = table.minimum().0;
                let length = start.len();
                (LandscapeSource::Local(Arc::new(table)), length, Some(start))
            }
            LandscapeConfig::External { length, command, args, timeout_secs, .. } => {
                (LandscapeSource::External(sidecar(command, args, *timeout_secs)), *length, None)
            }
        };
        let start = match &cfg.start {
            Some(text) => {
                let s = SequenceState::parse(&alphabet, text).context("config key `start`")?;
                if s.len() != length {
                    bail!("config key `start`: length {} does not match landscape length {length}", s.len());
                }
                s
            }
            None => auto_start
                .ok_or_else(|| anyhow!("config key `start`: required for an external landscape"))?,
        };
        let mut training_set = None;
        let prior = match &cfg.prior {
            PriorConfig::Uniform => PriorSource::Uniform,
            PriorConfig::Profile { fasta, pseudocount, train_size } => {
                let records = read_fasta(fasta)?;
                let mut states = to_states(&records, &alphabet)?;
                if let Some(n) = train_size {
                    if *n == 0 || *n > states.len() {
                        bail!("config key `prior.train_size`: {n} requested, {} available", states.len());
                    }
                    states.truncate(*n);
                }
                let (profile, _) = train_profile(&states, *pseudocount)?;
                check_prior_shape(&profile, &alphabet, length)?;
                training_set = Some(states);
                PriorSource::Profile(profile)
            }
            PriorConfig::Artifact { path } => {
                let profile = ProfilePrior::<f64>::load(path)?;
                check_prior_shape(&profile, &alphabet, length)?;
                PriorSource::Profile(profile)
            }
            PriorConfig::HillClimb { train_size, pseudocount, seed } => {
                let LandscapeSource::Local(land) = &landscape else {
                    bail!("config key `prior`: hill_climb needs an in-process landscape");
                };
                if *train_size == 0 {
                    bail!("config key `prior.train_size`: must be >= 1");
                }
                let seed = seed.unwrap_or(cfg.seed);
                let states: Vec<SequenceState> =
                    local_optima(land.as_ref(), &alphabet, length, *train_size, Direction::Ascend, seed)?
                        .into_iter()
                        .map(|(s, _)| s)
                        .collect();
                let (profile, _) = train_profile(&states, *pseudocount)?;
                training_set = Some(states);
                PriorSource::Profile(profile)
            }
            PriorConfig::External { command, args, timeout_secs } => {
                PriorSource::External(sidecar(command, args, *timeout_secs))
            }
        };
        if let Some(path) = &cfg.metrics.training_fasta {
            training_set = Some(to_states(&read_fasta(path)?, &alphabet)?);
        }
        Ok(Self {
            alphabet,
            length,
            start,
            training_set,
            landscape,
            prior,
        })
    }

    fn landscape(&self) -> Result<SharedLandscape> {
        Ok(match &self.landscape {
            LandscapeSource::Local(l) => Arc::clone(l),
            LandscapeSource::External(sc) => Arc::new(ExternalOracle::spawn(sc, &self.alphabet, self.length)?),
        })
    }

    fn prior(&self) -> Result<Box<dyn MutationPrior<f64> + Send>> {
        Ok(match &self.prior {
            PriorSource::Uniform => Box::new(UniformPrior),
            PriorSource::Profile(p) => Box::new(p.clone()),
            PriorSource::External(sc) => Box::new(ExternalPrior::spawn(sc, &self.alphabet, self.length)?),
        })
    }
}

fn check_prior_shape(profile: &ProfilePrior<f64>, alphabet: &Alphabet, length: usize) -> Result<()> {
    if profile.alphabet() != alphabet || profile.length() != length {
        bail!(
            "config key `prior`: profile is for alphabet {} length {}, landscape has {} length {length}",
            profile.alphabet(),
            profile.length(),
            alphabet
        );
    }
    Ok(())
}

pub fn trial_seed(root: u64, trial: usize) -> u64 {
    derive_seed(root, trial as u64)
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: usize,
    pub seed: u64,
    pub result: RunResult<f64>,
    pub wall_time_secs: f64,
}

/// Runs one seeded trial of the configured method.
pub fn run_trial(task: &Task, cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutcome> {
    let seed = trial_seed(cfg.seed, trial);
    let clock = Instant::now();
    let landscape = task.landscape()?;
    let mut oracle = BudgetedOracle::with_mode(landscape, cfg.budget, cfg.count_mode);
    let start = &task.start;
    let result = match &cfg.method {
        MethodConfig::Mcts => {
            let mut prior = task.prior()?;
            let mut learner = ValueLearner::<f64>::new(
                task.alphabet.size(),
                task.length,
                cfg.value_model.clone(),
                derive_seed(seed, STREAM_VALUE),
            );
            mcts::run(start, prior.as_mut(), &mut oracle, &mut learner, &cfg.search)?
        }
        MethodConfig::Greedy => greedy_search(start, task.prior()?.as_mut(), &mut oracle, &cfg.search)?,
        MethodConfig::Beam { width } => beam_search(start, task.prior()?.as_mut(), &mut oracle, *width, &cfg.search)?,
        MethodConfig::Random => random_search(start, &mut oracle, &cfg.search, derive_seed(seed, STREAM_RANDOM))?,
    };
    Ok(TrialOutcome {
        trial,
        seed,
        result,
        wall_time_secs: clock.elapsed().as_secs_f64(),
    })
}

/// Runs every trial; failures are returned alongside successes.
pub fn run_trials(task: &Task, cfg: &ExperimentConfig) -> (Vec<TrialOutcome>, Vec<FailedTrial>) {
    let results: Vec<Result<TrialOutcome>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(task, cfg, t))
        .collect();
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (trial, r) in results.into_iter().enumerate() {
        match r {
            Ok(o) => ok.push(o),
            Err(e) => failed.push(FailedTrial { trial, error: format!("{e:#}") }),
        }
    }
    (ok, failed)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FailedTrial {
    pub trial: usize,
    pub error: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrialSummary {
    pub trial: usize,
    pub seed: u64,
    pub best_sequence: String,
    pub best_fitness: f64,
    pub query_count: usize,
    pub episodes: usize,
    pub stop: mcts::StopReason,
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub task: String,
    pub method: String,
    pub start_sequence: String,
    pub start_fitness: f64,
    /// Absent when every trial failed.
    pub best_fitness: Option<Aggregate>,
    pub trials: Vec<TrialSummary>,
    pub failed: Vec<FailedTrial>,
    pub wall_time_secs: f64,
    pub config: ExperimentConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub k: usize,
    pub diversity: SetMetric,
    pub repetition: Option<SetMetric>,
}

pub fn summarize(
    cfg: &ExperimentConfig,
    task: &Task,
    outcomes: &[TrialOutcome],
    failed: &[FailedTrial],
    wall_time_secs: f64,
) -> Summary {
    let results: Vec<RunResult<f64>> = outcomes.iter().map(|o| o.result.clone()).collect();
    let start_fitness = outcomes
        .iter()
        .flat_map(|o| o.result.evaluated.iter())
        .find(|(s, _)| *s == task.start)
        .map_or(f64::NAN, |(_, f)| *f);
    Summary {
        task: cfg.task.clone(),
        method: cfg.method.name().to_string(),
        start_sequence: task.start.to_string(),
        start_fitness,
        best_fitness: metrics::aggregate(&results),
        trials: outcomes
            .iter()
            .map(|o| TrialSummary {
                trial: o.trial,
                seed: o.seed,
                best_sequence: o.result.best.0.to_string(),
                best_fitness: o.result.best.1,
                query_count: o.result.query_count,
                episodes: o.result.episodes.len(),
                stop: o.result.stop,
                wall_time_secs: o.wall_time_secs,
            })
            .collect(),
        failed: failed.to_vec(),
        wall_time_secs,
        config: cfg.clone(),
    }
}

pub fn compute_metrics(task: &Task, cfg: &ExperimentConfig, outcomes: &[TrialOutcome]) -> Vec<MetricsRow> {
    let results: Vec<RunResult<f64>> = outcomes.iter().map(|o| o.result.clone()).collect();
    let training: Option<HashSet<String>> = task
        .training_set
        .as_ref()
        .map(|set| set.iter().map(|s| s.to_string()).collect());
    cfg.metrics
        .top_k
        .iter()
        .map(|&k| MetricsRow {
            k,
            diversity: metrics::diversity(&results, k),
            repetition: training.as_ref().map(|t| metrics::repetition_rate(&results, k, t)),
        })
        .collect()
}

/// Runs all trials and writes per-trial files, `summary.json` and metrics.
/// Completed trials are written even when others fail; the first failure is
/// then returned.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<Summary> {
    let task = Task::build(cfg)?;
    Ok(run_task(&task, cfg)?.0)
}

fn run_task(task: &Task, cfg: &ExperimentConfig) -> Result<(Summary, Vec<TrialOutcome>)> {
    let clock = Instant::now();
    let (outcomes, failed) = run_trials(task, cfg);
    let summary = summarize(cfg, task, &outcomes, &failed, clock.elapsed().as_secs_f64());
    let rows = compute_metrics(task, cfg, &outcomes);
    output::write_run(&cfg.output_dir, &outcomes, &summary, &rows)?;
    if let Some(f) = failed.first() {
        bail!("trial {} failed: {}", f.trial, f.error);
    }
    Ok((summary, outcomes))
}

fn complete(summary: &Summary) -> &Aggregate {
    summary.best_fitness.as_ref().expect("cmd_run fails when any trial fails")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepParameter {
    CPuct,
    MaxDepth,
    Simulations,
    PriorTrainSize,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::CPuct => "c_puct",
            Self::MaxDepth => "max_depth",
            Self::Simulations => "simulations",
            Self::PriorTrainSize => "prior_train_size",
        }
    }

    /// Copy of `cfg` with the parameter set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut out = cfg.clone();
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                bail!("{} must be a positive integer, got {value}", self.name())
            }
        };
        match self {
            Self::CPuct => out.search.c_puct = value,
            Self::MaxDepth => out.search.max_depth = count()?,
            Self::Simulations => out.search.simulations = count()?,
            Self::PriorTrainSize => match &mut out.prior {
                PriorConfig::Profile { train_size, .. } => *train_size = Some(count()?),
                PriorConfig::HillClimb { train_size, .. } => *train_size = count()?,
                _ => bail!("prior_train_size needs a `profile` or `hill_climb` prior"),
            },
        }
        out.validate()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub trials: usize,
    pub mean_best: f64,
    pub std_best: f64,
    pub median_best: f64,
    pub bests: Vec<f64>,
}

fn format_value(v: f64) -> String {
    format!("{v}")
}

/// One run per value with the same trial seeds; writes `sweep_<param>.csv`.
pub fn cmd_sweep(cfg: &ExperimentConfig, parameter: SweepParameter, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    let mut rows = Vec::with_capacity(values.len());
    for &v in values {
        let mut run_cfg = parameter.apply(cfg, v)?;
        run_cfg.output_dir = cfg
            .output_dir
            .join(format!("sweep_{}", parameter.name()))
            .join(format_value(v));
        let summary = cmd_run(&run_cfg)?;
        rows.push(SweepRow {
            parameter: parameter.name().to_string(),
            value: v,
            trials: summary.trials.len(),
            mean_best: complete(&summary).mean,
            std_best: complete(&summary).std,
            median_best: metrics::median(&complete(&summary).bests),
            bests: complete(&summary).bests.clone(),
        });
    }
    output::write_sweep(&cfg.output_dir.join(format!("sweep_{}.csv", parameter.name())), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub mean_best: f64,
    pub std_best: f64,
    pub bests: Vec<f64>,
}

/// Every listed method on the same task and trial seeds; writes `bench.csv`.
pub fn cmd_bench(cfg: &ExperimentConfig, methods: &[MethodConfig]) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for m in methods {
        let mut run_cfg = cfg.clone();
        run_cfg.method = m.clone();
        run_cfg.output_dir = cfg.output_dir.join(format!("bench_{}", m.name()));
        let summary = cmd_run(&run_cfg)?;
        rows.push(BenchRow {
            method: m.name().to_string(),
            mean_best: complete(&summary).mean,
            std_best: complete(&summary).std,
            bests: complete(&summary).bests.clone(),
        });
    }
    output::write_bench(&cfg.output_dir.join("bench.csv"), &rows)?;
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainPriorReport {
    pub sequences: usize,
    pub length: usize,
    pub pseudocount: f64,
    pub cross_entropy: f64,
    pub artifact: PathBuf,
}

/// Trains a profile prior from FASTA and writes the artifact plus a
/// `<out>.report.json` next to it.
pub fn cmd_train_prior(fasta: &Path, alphabet: &Alphabet, pseudocount: f64, out: &Path) -> Result<TrainPriorReport> {
    let states = to_states(&read_fasta(fasta)?, alphabet)?;
    let (profile, report) = train_profile(&states, pseudocount)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    profile.save(out)?;
    let report = TrainPriorReport {
        sequences: report.sequences,
        length: report.length,
        pseudocount,
        cross_entropy: report.cross_entropy,
        artifact: out.to_path_buf(),
    };
    let mut report_path = out.as_os_str().to_owned();
    report_path.push(".report.json");
    fs::write(PathBuf::from(report_path), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondensedSequence {
    pub trial: usize,
    pub sequence: String,
    pub fitness: f64,
    pub deletions: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondenseReport {
    pub min_deletions: usize,
    pub start_deletions: usize,
    pub max_deletions_seen: Vec<usize>,
    pub sequences: Vec<CondensedSequence>,
}

pub const DELETION: char = crate::sequence::DELETION_SYMBOL;

/// Runs the engine with frozen positions and reports, per trial, the
/// fittest sequences carrying at least `min_deletions` deletions.
pub fn cmd_condense(cfg: &ExperimentConfig) -> Result<CondenseReport> {
    let condense = cfg
        .condense
        .clone()
        .ok_or_else(|| anyhow!("config key `condense`: required for condensing"))?;
    let alphabet = Alphabet::new(cfg.landscape.alphabet())?;
    if !alphabet.contains(DELETION) {
        bail!("config key `landscape.alphabet`: condensing needs the deletion symbol `{DELETION}`");
    }
    let mut run_cfg = cfg.clone();
    run_cfg.search.frozen.extend(condense.frozen.iter().copied());
    run_cfg.search.frozen.sort_unstable();
    run_cfg.search.frozen.dedup();
    let task = Task::build(&run_cfg)?;
    run_cfg.search.open_mask(task.length)?;
    let (_, outcomes) = run_task(&task, &run_cfg)?;
    let mut sequences = Vec::new();
    let mut max_seen = Vec::new();
    for o in &outcomes {
        let mut ranked: Vec<&(SequenceState, f64)> = o.result.evaluated.iter().collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
        max_seen.push(ranked.iter().map(|(s, _)| s.count_symbol(DELETION)).max().unwrap_or(0));
        sequences.extend(
            ranked
                .into_iter()
                .filter(|(s, _)| s.count_symbol(DELETION) >= condense.min_deletions)
                .take(condense.top)
                .map(|(s, f)| CondensedSequence {
                    trial: o.trial,
                    sequence: s.to_string(),
                    fitness: *f,
                    deletions: s.count_symbol(DELETION),
                }),
        );
    }
    let report = CondenseReport {
        min_deletions: condense.min_deletions,
        start_deletions: task.start.count_symbol(DELETION),
        max_deletions_seen: max_seen,
        sequences,
    };
    output::write_condense(&run_cfg.output_dir, &report)?;
    Ok(report)
}
