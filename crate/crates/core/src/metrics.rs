//! Post-run analysis over completed trials.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::mcts::RunResult;
use crate::scalar::Scalar;
use crate::sequence::SequenceState;

/// A percentage computed over the top-K contributions of several trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetMetric {
    pub percent: f64,
    pub numerator: usize,
    pub denominator: usize,
    /// `(trial, available)` for trials with fewer than K sequences.
    pub shortfall: Vec<(usize, usize)>,
}

/// The `k` fittest sequences, ties resolved in favour of earlier discovery.
pub fn top_k<T: Scalar>(evaluated: &[(SequenceState, T)], k: usize) -> Vec<SequenceState> {
    let mut idx: Vec<usize> = (0..evaluated.len()).collect();
    idx.sort_by(|&a, &b| {
        evaluated[b]
            .1
            .partial_cmp(&evaluated[a].1)
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx.into_iter().take(k).map(|i| evaluated[i].0.clone()).collect()
}

fn shortfall(contributions: &[Vec<String>], k: usize) -> Vec<(usize, usize)> {
    contributions
        .iter()
        .enumerate()
        .filter(|(_, c)| c.len() < k)
        .map(|(i, c)| (i, c.len()))
        .collect()
}

fn ratio(numerator: usize, trials: usize, k: usize, shortfall: Vec<(usize, usize)>) -> SetMetric {
    let denominator = trials * k;
    SetMetric {
        percent: if denominator == 0 { 0.0 } else { 100.0 * numerator as f64 / denominator as f64 },
        numerator,
        denominator,
        shortfall,
    }
}

/// `100 · unique / (T·K)` over per-trial top-K lists.
pub fn diversity_of(contributions: &[Vec<String>], k: usize) -> SetMetric {
    let contributed: Vec<&String> = contributions.iter().flat_map(|c| c.iter().take(k)).collect();
    let unique: HashSet<&String> = contributed.iter().copied().collect();
    ratio(unique.len(), contributions.len(), k, shortfall(contributions, k))
}

/// `100 · hits / (T·K)`; every contributed sequence found in the training
/// set counts, duplicates included.
pub fn repetition_of(contributions: &[Vec<String>], k: usize, training: &HashSet<String>) -> SetMetric {
    let hits = contributions
        .iter()
        .flat_map(|c| c.iter().take(k))
        .filter(|s| training.contains(*s))
        .count();
    ratio(hits, contributions.len(), k, shortfall(contributions, k))
}

pub fn contributions<T: Scalar>(trials: &[RunResult<T>], k: usize) -> Vec<Vec<String>> {
    trials
        .iter()
        .map(|t| top_k(&t.evaluated, k).iter().map(|s| s.to_string()).collect())
        .collect()
}

pub fn diversity<T: Scalar>(trials: &[RunResult<T>], k: usize) -> SetMetric {
    diversity_of(&contributions(trials, k), k)
}

pub fn repetition_rate<T: Scalar>(trials: &[RunResult<T>], k: usize, training: &HashSet<String>) -> SetMetric {
    repetition_of(&contributions(trials, k), k, training)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    /// Sample standard deviation; 0 when only one trial exists.
    pub std: f64,
    pub single_trial: bool,
    pub bests: Vec<f64>,
}

pub fn aggregate_values(bests: &[f64]) -> Option<Aggregate> {
    let n = bests.len();
    if n == 0 {
        return None;
    }
    let mean = bests.iter().sum::<f64>() / n as f64;
    let std = if n == 1 {
        0.0
    } else {
        (bests.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    };
    Some(Aggregate { mean, std, single_trial: n == 1, bests: bests.to_vec() })
}

pub fn aggregate<T: Scalar>(trials: &[RunResult<T>]) -> Option<Aggregate> {
    let bests: Vec<f64> = trials.iter().map(|t| t.best_fitness().as_f64()).collect();
    aggregate_values(&bests)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => (v[n / 2 - 1] + v[n / 2]) / 2.0,
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap_or(std::cmp::Ordering::Equal));
        let mut out = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let r = (i + j) as f64 / 2.0 + 1.0;
            for &k in &idx[i..=j] {
                out[k] = r;
            }
            i = j + 1;
        }
        out
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}
