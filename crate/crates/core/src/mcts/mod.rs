//! Prior-guided PUCT search over single-site substitutions.

pub mod tree;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landscape::{BudgetedOracle, Landscape, LandscapeError, OracleError, TracePoint};
use crate::prior::{distribution_over, MutationPrior, PriorError};
use crate::scalar::Scalar;
use crate::sequence::{MutationAction, SequenceError, SequenceState};
use crate::value::{ValueError, ValueLearner};

pub use tree::{puct_score, NodeId, SearchTree, TreeNode};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("node is already expanded")]
    AlreadyExpanded,
    #[error("search failure: no root child was visited")]
    NoVisitedChildren,
    #[error("no legal actions: every position is frozen")]
    NoLegalActions,
    #[error("invalid search config: {0}")]
    InvalidConfig(String),
    #[error("oracle budget of {budget} queries exhausted")]
    BudgetExhausted { budget: usize },
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Landscape(#[from] LandscapeError),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error(transparent)]
    Sequence(#[from] SequenceError),
}

impl From<OracleError> for SearchError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::BudgetExhausted { budget } => Self::BudgetExhausted { budget },
            OracleError::Landscape(e) => Self::Landscape(e),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RolloutMode {
    /// Greedy argmax-prior descent to the horizon, scored by the oracle.
    FullRollout,
    /// Value-model prediction at non-terminal leaves.
    #[default]
    ValueBootstrap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub c_puct: f64,
    pub simulations: usize,
    pub max_depth: usize,
    pub rollout_mode: RolloutMode,
    /// Query the oracle at every selected leaf and treat a leaf whose
    /// fitness is below its parent's as terminal.
    pub check_leaf_fitness: bool,
    /// Positions no method may mutate.
    pub frozen: Vec<usize>,
    /// Consecutive episodes without a new query or sequence before a run
    /// gives up on the remaining budget.
    pub stall_patience: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            c_puct: 10.0,
            simulations: 200,
            max_depth: 100,
            rollout_mode: RolloutMode::ValueBootstrap,
            check_leaf_fitness: false,
            frozen: Vec::new(),
            stall_patience: 20,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if !(self.c_puct >= 0.0 && self.c_puct.is_finite()) {
            return Err(SearchError::InvalidConfig(format!("c_puct must be finite and >= 0, got {}", self.c_puct)));
        }
        if self.simulations == 0 {
            return Err(SearchError::InvalidConfig("simulations must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(SearchError::InvalidConfig("max_depth must be >= 1".into()));
        }
        if self.stall_patience == 0 {
            return Err(SearchError::InvalidConfig("stall_patience must be >= 1".into()));
        }
        Ok(())
    }

    /// Open-position mask for sequences of `length`.
    pub fn open_mask(&self, length: usize) -> Result<Vec<bool>, SearchError> {
        let mut open = vec![true; length];
        for &p in &self.frozen {
            if p >= length {
                return Err(SearchError::InvalidConfig(format!(
                    "frozen position {p} out of range for length {length}"
                )));
            }
            open[p] = false;
        }
        if !open.iter().any(|&o| o) {
            return Err(SearchError::NoLegalActions);
        }
        Ok(open)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    MaxDepth,
    Revisit,
    FitnessDecrease,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoveRecord<T> {
    pub position: usize,
    pub residue: usize,
    pub sequence: String,
    /// Absent for revisits and moves cut off by the budget.
    pub fitness: Option<T>,
    /// Whether the episode continued from this sequence.
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord<T> {
    pub index: usize,
    pub start_fitness: T,
    pub moves: Vec<MoveRecord<T>>,
    pub termination: Termination,
    pub queries_after: usize,
    pub value_loss: Option<T>,
}

impl<T: Scalar> EpisodeRecord<T> {
    /// Fitness of the start followed by every accepted move.
    pub fn accepted_fitness(&self) -> Vec<T> {
        std::iter::once(self.start_fitness)
            .chain(self.moves.iter().filter(|m| m.accepted).filter_map(|m| m.fitness))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    BudgetExhausted,
    Stalled,
}

#[derive(Debug, Clone)]
pub struct RunResult<T> {
    pub method: String,
    pub start: SequenceState,
    pub best: (SequenceState, T),
    pub trace: Vec<TracePoint<T>>,
    pub episodes: Vec<EpisodeRecord<T>>,
    pub query_count: usize,
    /// Distinct evaluated sequences in discovery order.
    pub evaluated: Vec<(SequenceState, T)>,
    pub stop: StopReason,
    pub config: SearchConfig,
}

impl<T: Scalar> RunResult<T> {
    pub(crate) fn collect<L: Landscape<T>>(
        method: &str,
        start: &SequenceState,
        oracle: &BudgetedOracle<T, L>,
        episodes: Vec<EpisodeRecord<T>>,
        stop: StopReason,
        config: &SearchConfig,
    ) -> Self {
        let best = oracle.best().cloned().expect("start sequence was evaluated");
        Self {
            method: method.to_string(),
            start: start.clone(),
            best,
            trace: oracle.trace().to_vec(),
            episodes,
            query_count: oracle.query_count(),
            evaluated: oracle.history().to_vec(),
            stop,
            config: config.clone(),
        }
    }

    pub fn best_fitness(&self) -> T {
        self.best.1
    }
}

/// One simulation's selected path and backed-up reward.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord<T> {
    pub path: Vec<NodeId>,
    pub reward: T,
}

/// Search state for one run: the generated-sequence set persists across
/// episodes.
pub struct Engine<'a, T: Scalar, P: ?Sized, L> {
    prior: &'a mut P,
    oracle: &'a mut BudgetedOracle<T, L>,
    learner: &'a mut ValueLearner<T>,
    config: &'a SearchConfig,
    c: T,
    open: Vec<bool>,
    generated: HashSet<SequenceState>,
}

impl<'a, T, P, L> Engine<'a, T, P, L>
where
    T: Scalar,
    P: MutationPrior<T> + ?Sized,
    L: Landscape<T>,
{
    pub fn new(
        prior: &'a mut P,
        oracle: &'a mut BudgetedOracle<T, L>,
        learner: &'a mut ValueLearner<T>,
        config: &'a SearchConfig,
        length: usize,
    ) -> Result<Self, SearchError> {
        config.validate()?;
        let open = config.open_mask(length)?;
        Ok(Self {
            prior,
            oracle,
            learner,
            config,
            c: T::lit(config.c_puct),
            open,
            generated: HashSet::new(),
        })
    }

    pub fn generated(&self) -> &HashSet<SequenceState> {
        &self.generated
    }

    pub fn oracle(&self) -> &BudgetedOracle<T, L> {
        self.oracle
    }

    pub fn learner(&self) -> &ValueLearner<T> {
        self.learner
    }

    pub fn legal_actions(&self, state: &SequenceState) -> Vec<MutationAction> {
        state.legal_actions_where(|p| self.open[p])
    }

    /// Oracle call; fresh evaluations enter the replay buffer.
    pub fn evaluate(&mut self, state: &SequenceState) -> Result<T, SearchError> {
        let eval = self.oracle.evaluate(state)?;
        if eval.fresh {
            self.learner.record(state, eval.value);
        }
        Ok(eval.value)
    }

    pub fn expand(&mut self, tree: &mut SearchTree<T>, id: NodeId) -> Result<(), SearchError> {
        let state = tree.state_of(id);
        let actions = self.legal_actions(&state);
        let dist = distribution_over(&mut *self.prior, &state, actions)?;
        tree.expand(id, &dist)
    }

    /// Reward for a leaf at `depth` mutations from the episode start.
    pub fn rollout_value(&mut self, leaf: &SequenceState, depth: usize) -> Result<T, SearchError> {
        if depth >= self.config.max_depth {
            return self.evaluate(leaf);
        }
        match self.config.rollout_mode {
            RolloutMode::ValueBootstrap => Ok(self.learner.predict(leaf)?),
            RolloutMode::FullRollout => {
                let mut seen = HashSet::from([leaf.clone()]);
                let mut state = leaf.clone();
                for _ in depth..self.config.max_depth {
                    let actions = self.legal_actions(&state);
                    let dist = distribution_over(&mut *self.prior, &state, actions)?;
                    let action = dist.argmax().ok_or(SearchError::NoLegalActions)?;
                    state = state.apply(action)?;
                    if !seen.insert(state.clone()) {
                        break;
                    }
                }
                self.evaluate(&state)
            }
        }
    }

    /// Selection, expansion, rollout and backup.
    pub fn simulate(&mut self, tree: &mut SearchTree<T>) -> Result<SimulationRecord<T>, SearchError> {
        let path = tree.select_path(self.c, self.config.max_depth);
        let leaf = *path.last().expect("path contains the root");
        let depth = tree.node(leaf).depth;
        let state = tree.state_along(&path);
        if self.config.check_leaf_fitness && leaf != tree.root() {
            let fitness = self.evaluate(&state)?;
            tree.set_fitness(leaf, fitness);
            let parent = tree.node(leaf).parent.expect("non-root leaf has a parent");
            let parent_fitness = match tree.node(parent).fitness {
                Some(f) => f,
                None => self.evaluate(&tree.state_of(parent))?,
            };
            if fitness < parent_fitness {
                tree.mark_terminal(leaf);
                tree.backup(leaf, fitness);
                return Ok(SimulationRecord { path, reward: fitness });
            }
        }
        if depth < self.config.max_depth && !tree.node(leaf).expanded {
            self.expand(tree, leaf)?;
        }
        let reward = self.rollout_value(&state, depth)?;
        tree.backup(leaf, reward);
        Ok(SimulationRecord { path, reward })
    }

    /// Expands the root if needed, then runs `count` simulations.
    pub fn search(&mut self, tree: &mut SearchTree<T>, count: usize) -> Result<(), SearchError> {
        if !tree.node(tree.root()).expanded {
            self.simulate(tree)?;
        }
        for _ in 0..count {
            self.simulate(tree)?;
        }
        Ok(())
    }

    /// Most visited root child leading to an ungenerated sequence. When every
    /// visited child is already generated, the unvisited ungenerated child
    /// with the best PUCT score; failing that, the most visited child.
    fn pick_move(&self, tree: &SearchTree<T>) -> Result<(NodeId, MutationAction), SearchError> {
        let root = tree.root_state();
        let fresh = |a: MutationAction| root.apply(a).map_or(false, |s| !self.generated.contains(&s));
        if let Ok(found) = tree.choose_move_where(fresh) {
            return Ok(found);
        }
        let mut best: Option<(NodeId, T)> = None;
        for &child in &tree.node(tree.root()).children {
            let action = tree.node(child).action.expect("child has an action");
            if !fresh(action) {
                continue;
            }
            let score = tree.puct(child, self.c);
            if best.map_or(true, |(_, b)| score > b) {
                best = Some((child, score));
            }
        }
        match best {
            Some((id, _)) => Ok((id, tree.node(id).action.expect("child has an action"))),
            None => tree.choose_move(),
        }
    }

    pub fn run_episode(&mut self, start: &SequenceState, index: usize) -> Result<EpisodeRecord<T>, SearchError> {
        self.generated.insert(start.clone());
        let start_fitness = self.evaluate(start)?;
        let mut tree = SearchTree::new(start.clone(), 0);
        tree.set_fitness(tree.root(), start_fitness);
        let mut current = start_fitness;
        let mut moves = Vec::new();
        let termination = loop {
            if tree.node(tree.root()).depth >= self.config.max_depth {
                break Termination::MaxDepth;
            }
            match self.search(&mut tree, self.config.simulations) {
                Ok(()) => {}
                Err(SearchError::BudgetExhausted { .. }) => break Termination::BudgetExhausted,
                Err(e) => return Err(e),
            }
            let (child, action) = self.pick_move(&tree)?;
            let next = tree.root_state().apply(action)?;
            let mut record = MoveRecord {
                position: action.position,
                residue: action.residue,
                sequence: next.to_string(),
                fitness: None,
                accepted: false,
            };
            if self.generated.contains(&next) {
                moves.push(record);
                break Termination::Revisit;
            }
            self.generated.insert(next.clone());
            let fitness = match self.evaluate(&next) {
                Ok(f) => f,
                Err(SearchError::BudgetExhausted { .. }) => {
                    moves.push(record);
                    break Termination::BudgetExhausted;
                }
                Err(e) => return Err(e),
            };
            record.fitness = Some(fitness);
            if fitness < current {
                moves.push(record);
                break Termination::FitnessDecrease;
            }
            record.accepted = true;
            moves.push(record);
            current = fitness;
            tree.advance(child);
        };
        let value_loss = self.learner.train_update().loss();
        Ok(EpisodeRecord {
            index,
            start_fitness,
            moves,
            termination,
            queries_after: self.oracle.query_count(),
            value_loss,
        })
    }

    /// Episodes from `start` until the budget is spent or the search stalls.
    pub fn run(&mut self, start: &SequenceState) -> Result<RunResult<T>, SearchError> {
        self.evaluate(start)?;
        let mut episodes = Vec::new();
        let mut idle = 0;
        let stop = loop {
            if self.oracle.is_exhausted() {
                break StopReason::BudgetExhausted;
            }
            let before = (self.oracle.query_count(), self.generated.len());
            let episode = self.run_episode(start, episodes.len())?;
            let truncated = episode.termination == Termination::BudgetExhausted;
            episodes.push(episode);
            if truncated {
                break StopReason::BudgetExhausted;
            }
            if (self.oracle.query_count(), self.generated.len()) == before {
                idle += 1;
                if idle >= self.config.stall_patience {
                    break StopReason::Stalled;
                }
            } else {
                idle = 0;
            }
        };
        Ok(RunResult::collect("mcts", start, self.oracle, episodes, stop, self.config))
    }
}

/// Runs a full search with a fresh engine.
pub fn run<T, P, L>(
    start: &SequenceState,
    prior: &mut P,
    oracle: &mut BudgetedOracle<T, L>,
    learner: &mut ValueLearner<T>,
    config: &SearchConfig,
) -> Result<RunResult<T>, SearchError>
where
    T: Scalar,
    P: MutationPrior<T> + ?Sized,
    L: Landscape<T>,
{
    Engine::new(prior, oracle, learner, config, start.len())?.run(start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::landscape::{NkLandscape, ProfileLandscape};
    use crate::prior::UniformPrior;
    use crate::sequence::Alphabet;
    use crate::value::{ValueConfig, ValueModel};

    fn learner(a: usize, l: usize) -> ValueLearner<f64> {
        let cfg = ValueConfig { hidden: vec![8], ..ValueConfig::default() };
        ValueLearner::from_model(ValueModel::zeros(a, l, &cfg.hidden), cfg, 0)
    }

    fn profile() -> (Alphabet, ProfileLandscape<f64>) {
        let a = Alphabet::new("ACDE").unwrap();
        let w: Vec<f64> = (0..4 * 5).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        (a.clone(), ProfileLandscape::new(&a, 5, w, 0.0).unwrap())
    }

    #[test]
    fn value_bootstrap_zero_model_predicts_zero() {
        let (a, land) = profile();
        let mut oracle = BudgetedOracle::new(&land, 100);
        let mut l = learner(4, 5);
        let cfg = SearchConfig::default();
        let mut prior = UniformPrior;
        let mut e = Engine::new(&mut prior, &mut oracle, &mut l, &cfg, 5).unwrap();
        let s = SequenceState::parse(&a, "AAAAA").unwrap();
        assert_eq!(e.rollout_value(&s, 0).unwrap(), 0.0);
        assert_eq!(e.oracle().query_count(), 0);
        let at_horizon = e.rollout_value(&s, 100).unwrap();
        assert_eq!(at_horizon, land.fitness(&s).unwrap());
        assert_eq!(e.learner().buffer().len(), 1);
    }

    #[test]
    fn budget_one_evaluates_only_start() {
        let (a, land) = profile();
        let mut oracle = BudgetedOracle::new(&land, 1);
        let mut l = learner(4, 5);
        let s = SequenceState::parse(&a, "AAAAA").unwrap();
        let r = run(&s, &mut UniformPrior, &mut oracle, &mut l, &SearchConfig::default()).unwrap();
        assert_eq!(r.query_count, 1);
        assert_eq!(r.best, (s.clone(), land.fitness(&s).unwrap()));
    }

    #[test]
    fn max_depth_one_gives_one_move() {
        let a = Alphabet::new("ACGT").unwrap();
        let land = NkLandscape::<f64>::new(&a, 6, 1, 3).unwrap();
        let mut oracle = BudgetedOracle::new(&land, 1000);
        let mut l = learner(4, 6);
        let cfg = SearchConfig { max_depth: 1, simulations: 30, ..SearchConfig::default() };
        let mut prior = UniformPrior;
        let mut e = Engine::new(&mut prior, &mut oracle, &mut l, &cfg, 6).unwrap();
        let s = SequenceState::parse(&a, "ACGTAC").unwrap();
        let ep = e.run_episode(&s, 0).unwrap();
        assert_eq!(ep.moves.len(), 1);
        assert_ne!(ep.termination, Termination::BudgetExhausted);
    }

    #[test]
    fn frozen_everything_is_rejected() {
        let (_, land) = profile();
        let mut oracle = BudgetedOracle::new(&land, 10);
        let mut l = learner(4, 5);
        let cfg = SearchConfig { frozen: (0..5).collect(), ..SearchConfig::default() };
        let mut prior = UniformPrior;
        assert!(matches!(
            Engine::new(&mut prior, &mut oracle, &mut l, &cfg, 5),
            Err(SearchError::NoLegalActions)
        ));
    }

    #[test]
    fn run_is_deterministic() {
        let a = Alphabet::new("ACGT").unwrap();
        let land = NkLandscape::<f64>::new(&a, 8, 2, 11).unwrap();
        let s = SequenceState::parse(&a, "AAAAAAAA").unwrap();
        let go = || {
            let mut oracle = BudgetedOracle::new(&land, 60);
            let mut l = ValueLearner::<f64>::new(4, 8, ValueConfig { hidden: vec![8], ..ValueConfig::default() }, 5);
            let cfg = SearchConfig { simulations: 20, ..SearchConfig::default() };
            let r = run(&s, &mut UniformPrior, &mut oracle, &mut l, &cfg).unwrap();
            (r.trace, r.episodes, r.best)
        };
        assert_eq!(go(), go());
    }
}
