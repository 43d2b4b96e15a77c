//! Greedy and beam ablations of the tree search, plus a random control.

use std::collections::HashSet;

use rand::seq::IndexedRandom;

use crate::landscape::{BudgetedOracle, Landscape, OracleError};
use crate::mcts::{EpisodeRecord, MoveRecord, RunResult, SearchConfig, SearchError, StopReason, Termination};
use crate::prior::{distribution_over, MutationPrior};
use crate::rng::seeded;
use crate::scalar::Scalar;
use crate::sequence::{MutationAction, SequenceState};

pub const DEFAULT_BEAM_WIDTH: usize = 8;

/// Consecutive cached draws after which random search gives up.
const RANDOM_PATIENCE: usize = 10_000;

enum Step<T> {
    Value(T),
    Exhausted,
}

fn charge<T: Scalar, L: Landscape<T>>(
    oracle: &mut BudgetedOracle<T, L>,
    state: &SequenceState,
) -> Result<Step<T>, SearchError> {
    match oracle.evaluate(state) {
        Ok(e) => Ok(Step::Value(e.value)),
        Err(OracleError::BudgetExhausted { .. }) => Ok(Step::Exhausted),
        Err(e) => Err(e.into()),
    }
}

fn ranked_actions<T: Scalar, P: MutationPrior<T> + ?Sized>(
    prior: &mut P,
    state: &SequenceState,
    open: &[bool],
) -> Result<Vec<MutationAction>, SearchError> {
    let actions = state.legal_actions_where(|p| open[p]);
    let dist = distribution_over(prior, state, actions)?;
    Ok(dist.ranked().into_iter().map(|(a, _)| a).collect())
}

fn move_record<T>(action: MutationAction, next: &SequenceState, fitness: Option<T>, accepted: bool) -> MoveRecord<T> {
    MoveRecord {
        position: action.position,
        residue: action.residue,
        sequence: next.to_string(),
        fitness,
        accepted,
    }
}

/// Follows the most probable mutation from the start, restarting when a
/// path ends. The first step of each restart skips sequences already seen,
/// which forces a new branch; later steps stop on a revisit. Fitness
/// decreases do not end a path.
pub fn greedy_search<T, P, L>(
    start: &SequenceState,
    prior: &mut P,
    oracle: &mut BudgetedOracle<T, L>,
    config: &SearchConfig,
) -> Result<RunResult<T>, SearchError>
where
    T: Scalar,
    P: MutationPrior<T> + ?Sized,
    L: Landscape<T>,
{
    beam_like("greedy", start, prior, oracle, config, 1)
}

/// Keeps `width` candidates, expanding each by its `width` most probable
/// unseen mutations and keeping the fittest distinct results.
pub fn beam_search<T, P, L>(
    start: &SequenceState,
    prior: &mut P,
    oracle: &mut BudgetedOracle<T, L>,
    width: usize,
    config: &SearchConfig,
) -> Result<RunResult<T>, SearchError>
where
    T: Scalar,
    P: MutationPrior<T> + ?Sized,
    L: Landscape<T>,
{
    if width == 0 {
        return Err(SearchError::InvalidConfig("beam width must be >= 1".into()));
    }
    beam_like("beam", start, prior, oracle, config, width)
}

fn beam_like<T, P, L>(
    method: &str,
    start: &SequenceState,
    prior: &mut P,
    oracle: &mut BudgetedOracle<T, L>,
    config: &SearchConfig,
    width: usize,
) -> Result<RunResult<T>, SearchError>
where
    T: Scalar,
    P: MutationPrior<T> + ?Sized,
    L: Landscape<T>,
{
    config.validate()?;
    let open = config.open_mask(start.len())?;
    let start_fitness = match charge(oracle, start)? {
        Step::Value(v) => v,
        Step::Exhausted => return Err(SearchError::BudgetExhausted { budget: oracle.budget() }),
    };
    let mut seen: HashSet<SequenceState> = HashSet::from([start.clone()]);
    let mut episodes = Vec::new();
    let stop = 'run: loop {
        if oracle.is_exhausted() {
            break StopReason::BudgetExhausted;
        }
        let mut beam = vec![start.clone()];
        let mut moves = Vec::new();
        let mut depth = 0;
        let termination = 'episode: loop {
            if depth >= config.max_depth {
                break Termination::MaxDepth;
            }
            let mut pool: Vec<(MutationAction, SequenceState)> = Vec::new();
            for cand in &beam {
                let ranked = ranked_actions(prior, cand, &open)?;
                let mut taken = 0;
                for action in ranked {
                    if taken == width {
                        break;
                    }
                    let next = cand.apply(action)?;
                    if depth == 0 && seen.contains(&next) {
                        continue;
                    }
                    taken += 1;
                    if !seen.contains(&next) && !pool.iter().any(|(_, s)| *s == next) {
                        pool.push((action, next));
                    }
                }
            }
            if pool.is_empty() {
                break Termination::Revisit;
            }
            let mut scored = Vec::with_capacity(pool.len());
            for (action, next) in pool {
                seen.insert(next.clone());
                match charge(oracle, &next)? {
                    Step::Value(v) => scored.push((action, next, v)),
                    Step::Exhausted => {
                        moves.push(move_record(action, &next, None, false));
                        break 'episode Termination::BudgetExhausted;
                    }
                }
            }
            scored.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap_or(std::cmp::Ordering::Equal));
            scored.truncate(width);
            beam.clear();
            for (action, next, v) in scored {
                moves.push(move_record(action, &next, Some(v), true));
                beam.push(next);
            }
            depth += 1;
        };
        let fresh = !moves.is_empty();
        episodes.push(EpisodeRecord {
            index: episodes.len(),
            start_fitness,
            moves,
            termination,
            queries_after: oracle.query_count(),
            value_loss: None,
        });
        if termination == Termination::BudgetExhausted {
            break 'run StopReason::BudgetExhausted;
        }
        if !fresh {
            break 'run StopReason::Stalled;
        }
    };
    Ok(RunResult::collect(method, start, oracle, episodes, stop, config))
}

/// Uniformly random single mutations of the best sequence found so far.
pub fn random_search<T, L>(
    start: &SequenceState,
    oracle: &mut BudgetedOracle<T, L>,
    config: &SearchConfig,
    seed: u64,
) -> Result<RunResult<T>, SearchError>
where
    T: Scalar,
    L: Landscape<T>,
{
    let open = config.open_mask(start.len())?;
    let mut rng = seeded(seed);
    let mut best = match charge(oracle, start)? {
        Step::Value(v) => (start.clone(), v),
        Step::Exhausted => return Err(SearchError::BudgetExhausted { budget: oracle.budget() }),
    };
    let mut idle = 0;
    let stop = loop {
        if oracle.is_exhausted() {
            break StopReason::BudgetExhausted;
        }
        let actions = best.0.legal_actions_where(|p| open[p]);
        let action = *actions.choose(&mut rng).ok_or(SearchError::NoLegalActions)?;
        let next = best.0.apply(action)?;
        let known = oracle.cached(&next).is_some();
        match charge(oracle, &next)? {
            Step::Value(v) => {
                if v > best.1 {
                    best = (next, v);
                }
            }
            Step::Exhausted => break StopReason::BudgetExhausted,
        }
        idle = if known { idle + 1 } else { 0 };
        if idle >= RANDOM_PATIENCE {
            break StopReason::Stalled;
        }
    };
    Ok(RunResult::collect("random", start, oracle, Vec::new(), stop, config))
}
