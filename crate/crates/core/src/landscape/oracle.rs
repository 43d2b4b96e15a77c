use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Landscape, LandscapeError};
use crate::scalar::Scalar;
use crate::sequence::SequenceState;

/// How calls are charged against the budget.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountMode {
    /// Only previously unseen sequences cost a query.
    #[default]
    Unique,
    /// Every call costs a query, cached or not.
    Raw,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle budget of {budget} queries exhausted")]
    BudgetExhausted { budget: usize },
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<T> {
    pub value: T,
    /// True when the inner landscape was actually queried.
    pub fresh: bool,
}

/// One point of the best-so-far curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint<T> {
    pub query_index: usize,
    pub best_fitness: T,
}

/// Budget-enforcing, caching wrapper around a landscape.
#[derive(Debug)]
pub struct BudgetedOracle<T, L> {
    inner: L,
    budget: usize,
    mode: CountMode,
    cache: HashMap<SequenceState, T>,
    query_count: usize,
    history: Vec<(SequenceState, T)>,
    trace: Vec<TracePoint<T>>,
    best: Option<(SequenceState, T)>,
}

pub const DEFAULT_BUDGET: usize = 1000;

impl<T: Scalar, L: Landscape<T>> BudgetedOracle<T, L> {
    pub fn new(inner: L, budget: usize) -> Self {
        Self::with_mode(inner, budget, CountMode::Unique)
    }

    pub fn with_mode(inner: L, budget: usize, mode: CountMode) -> Self {
        Self {
            inner,
            budget,
            mode,
            cache: HashMap::new(),
            query_count: 0,
            history: Vec::new(),
            trace: Vec::new(),
            best: None,
        }
    }

    pub fn evaluate(&mut self, state: &SequenceState) -> Result<Evaluation<T>, OracleError> {
        if let Some(&value) = self.cache.get(state) {
            if self.mode == CountMode::Raw {
                self.charge()?;
                self.record_trace();
            }
            return Ok(Evaluation {
                value,
                fresh: false,
            });
        }
        if self.query_count >= self.budget {
            return Err(OracleError::BudgetExhausted {
                budget: self.budget,
            });
        }
        let value = self.inner.fitness(state)?;
        self.charge()?;
        self.cache.insert(state.clone(), value);
        self.history.push((state.clone(), value));
        if self.best.as_ref().map_or(true, |(_, b)| value > *b) {
            self.best = Some((state.clone(), value));
        }
        self.record_trace();
        Ok(Evaluation { value, fresh: true })
    }

    fn charge(&mut self) -> Result<(), OracleError> {
        if self.query_count >= self.budget {
            return Err(OracleError::BudgetExhausted {
                budget: self.budget,
            });
        }
        self.query_count += 1;
        Ok(())
    }

    fn record_trace(&mut self) {
        if let Some((_, best)) = &self.best {
            self.trace.push(TracePoint {
                query_index: self.query_count,
                best_fitness: *best,
            });
        }
    }

    pub fn cached(&self, state: &SequenceState) -> Option<T> {
        self.cache.get(state).copied()
    }

    pub fn is_exhausted(&self) -> bool {
        self.query_count >= self.budget
    }

    pub fn query_count(&self) -> usize {
        self.query_count
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn remaining(&self) -> usize {
        self.budget - self.query_count
    }

    pub fn best(&self) -> Option<&(SequenceState, T)> {
        self.best.as_ref()
    }

    pub fn trace(&self) -> &[TracePoint<T>] {
        &self.trace
    }

    /// Distinct sequences in first-evaluation order.
    pub fn history(&self) -> &[(SequenceState, T)] {
        &self.history
    }

    pub fn inner(&self) -> &L {
        &self.inner
    }
}
