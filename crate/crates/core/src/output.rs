//! Files written by the CLI commands.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::experiment::{BenchRow, CondenseReport, MetricsRow, Summary, SweepRow, TrialOutcome};
use crate::fasta::write_fasta;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// `trial_<i>/` with `trace.csv`, `episodes.jsonl` and `best.fasta`.
pub fn write_trial(dir: &Path, outcome: &TrialOutcome) -> Result<()> {
    let dir = dir.join(format!("trial_{}", outcome.trial));
    let r = &outcome.result;

    let mut trace = csv::Writer::from_writer(create(&dir.join("trace.csv"))?);
    trace.write_record(["query_index", "best_fitness"])?;
    for p in &r.trace {
        trace.write_record([p.query_index.to_string(), p.best_fitness.to_string()])?;
    }
    trace.flush()?;

    let mut episodes = create(&dir.join("episodes.jsonl"))?;
    for ep in &r.episodes {
        serde_json::to_writer(&mut episodes, ep)?;
        episodes.write_all(b"\n")?;
    }
    episodes.flush()?;

    let header = format!("trial{} fitness={}", outcome.trial, r.best.1);
    let seq = r.best.0.to_string();
    let mut best = create(&dir.join("best.fasta"))?;
    write_fasta(&mut best, [(header.as_str(), seq.as_str())])?;
    best.flush()?;
    Ok(())
}

pub fn write_metrics(dir: &Path, rows: &[MetricsRow]) -> Result<()> {
    write_json(&dir.join("metrics.json"), &rows)?;
    let mut out = csv::Writer::from_writer(create(&dir.join("metrics.csv"))?);
    out.write_record(["k", "diversity_percent", "repetition_percent"])?;
    for row in rows {
        out.write_record([
            row.k.to_string(),
            row.diversity.percent.to_string(),
            row.repetition.as_ref().map_or(String::new(), |m| m.percent.to_string()),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_run(dir: &Path, outcomes: &[TrialOutcome], summary: &Summary, metrics: &[MetricsRow]) -> Result<()> {
    for o in outcomes {
        write_trial(dir, o)?;
    }
    write_json(&dir.join("summary.json"), summary)?;
    write_metrics(dir, metrics)
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record(["parameter", "value", "trials", "mean_best", "std_best", "median_best", "bests"])?;
    for r in rows {
        out.write_record([
            r.parameter.clone(),
            r.value.to_string(),
            r.trials.to_string(),
            r.mean_best.to_string(),
            r.std_best.to_string(),
            r.median_best.to_string(),
            join(&r.bests),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_bench(path: &Path, rows: &[BenchRow]) -> Result<()> {
    let mut out = csv::Writer::from_writer(create(path)?);
    out.write_record(["method", "mean_best", "std_best", "bests"])?;
    for r in rows {
        out.write_record([r.method.clone(), r.mean_best.to_string(), r.std_best.to_string(), join(&r.bests)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_condense(dir: &Path, report: &CondenseReport) -> Result<()> {
    write_json(&dir.join("condense.json"), report)?;
    let headers: Vec<String> = report
        .sequences
        .iter()
        .map(|s| format!("trial{} fitness={} deletions={}", s.trial, s.fitness, s.deletions))
        .collect();
    let mut out = create(&dir.join("condensed.fasta"))?;
    write_fasta(
        &mut out,
        headers.iter().zip(&report.sequences).map(|(h, s)| (h.as_str(), s.sequence.as_str())),
    )?;
    out.flush()?;
    Ok(())
}
