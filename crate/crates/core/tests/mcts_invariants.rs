use std::collections::HashMap;

use evotree::landscape::{BudgetedOracle, Landscape, NkLandscape, ProfileLandscape};
use evotree::mcts::{run, Engine, RolloutMode, SearchConfig, SearchTree, Termination};
use evotree::prior::{distribution_over, MutationPrior, PriorError, ProfilePrior, UniformPrior};
use evotree::rng::seeded;
use evotree::sequence::{Alphabet, SequenceState};
use evotree::value::{ValueConfig, ValueLearner, ValueModel};
use rand::Rng;

fn learner(a: usize, l: usize, seed: u64) -> ValueLearner<f64> {
    ValueLearner::new(a, l, ValueConfig { hidden: vec![8], ..ValueConfig::default() }, seed)
}

fn zero_learner(a: usize, l: usize) -> ValueLearner<f64> {
    let cfg = ValueConfig { hidden: vec![8], ..ValueConfig::default() };
    ValueLearner::from_model(ValueModel::zeros(a, l, &cfg.hidden), cfg, 0)
}

fn random_profile(a: &Alphabet, len: usize, seed: u64) -> ProfileLandscape<f64> {
    let mut rng = seeded(seed);
    let w: Vec<f64> = (0..a.size() * len).map(|_| rng.random::<f64>() / len as f64).collect();
    ProfileLandscape::new(a, len, w, 0.0).unwrap()
}

/// Prior proportional to `exp(beta · weight)` of an additive landscape.
struct Aligned<'a>(&'a ProfileLandscape<f64>, f64);

impl MutationPrior<f64> for Aligned<'_> {
    fn scores(&mut self, _: &SequenceState) -> Result<Vec<f64>, PriorError> {
        Ok(self.0.weights().iter().map(|w| (self.1 * w).exp()).collect())
    }
}

#[test]
fn cold_start_ranks_children_by_prior() {
    let a = Alphabet::new("ACDE").unwrap();
    let land = random_profile(&a, 4, 1);
    let start = SequenceState::parse(&a, "AAAA").unwrap();
    let mut prior = Aligned(&land, 3.0);
    let dist = distribution_over(&mut prior, &start, start.legal_actions()).unwrap();
    let mut tree = SearchTree::<f64>::new(start, 0);
    tree.expand(tree.root(), &dist).unwrap();
    tree.backup(tree.root(), 0.0);
    let children = tree.node(tree.root()).children.clone();
    let mut by_puct = children.clone();
    by_puct.sort_by(|&x, &y| tree.puct(y, 10.0).partial_cmp(&tree.puct(x, 10.0)).unwrap());
    let mut by_prior = children.clone();
    by_prior.sort_by(|&x, &y| tree.node(y).prior.partial_cmp(&tree.node(x).prior).unwrap());
    assert_eq!(by_puct, by_prior);
    assert_eq!(tree.select_path(10.0, 10)[1], by_prior[0]);
}

#[test]
fn value_bootstrap_statistics_are_conserved() {
    let a = Alphabet::new("ACD").unwrap();
    let nk = NkLandscape::<f64>::new(&a, 6, 2, 8).unwrap();
    let start = nk.brute_force_minimum().unwrap().0;
    let config = SearchConfig { max_depth: 4, c_puct: 2.0, ..SearchConfig::default() };
    let mut oracle = BudgetedOracle::new(&nk, 10_000);
    let mut l = learner(3, 6, 4);
    for i in 0..40 {
        let s = SequenceState::from_indices(&a, (0..6).map(|p| ((i + p * i) % 3) as u8).collect()).unwrap();
        l.record(&s, nk.fitness(&s).unwrap());
    }
    for _ in 0..20 {
        l.train_update();
    }
    let mut prior = UniformPrior;
    let mut engine = Engine::new(&mut prior, &mut oracle, &mut l, &config, 6).unwrap();
    let mut tree = SearchTree::new(start, 0);
    let mut rewards: HashMap<usize, Vec<f64>> = HashMap::new();
    for _ in 0..3000 {
        let rec = engine.simulate(&mut tree).unwrap();
        for id in rec.path {
            rewards.entry(id).or_default().push(rec.reward);
        }
    }
    for id in tree.node_ids() {
        let n = tree.node(id);
        let seen = rewards.get(&id).map_or(&[][..], |v| v.as_slice());
        assert_eq!(n.visits as usize, seen.len());
        if n.visits > 0 {
            let mean = seen.iter().sum::<f64>() / seen.len() as f64;
            assert!((n.mean_reward().unwrap() - mean).abs() < 1e-9);
        } else {
            assert!(n.mean_reward().is_none());
        }
    }
}

#[test]
fn one_move_horizon_finds_best_single_mutation() {
    let a = Alphabet::new("ACDE").unwrap();
    let config = SearchConfig {
        c_puct: 1.0,
        max_depth: 1,
        rollout_mode: RolloutMode::FullRollout,
        ..SearchConfig::default()
    };
    for seed in 0..5 {
        let land = random_profile(&a, 5, 100 + seed);
        let start = land.minimum().0;
        let best = start
            .legal_actions()
            .into_iter()
            .map(|x| land.fitness(&start.apply(x).unwrap()).unwrap())
            .fold(f64::NEG_INFINITY, f64::max);
        let mut oracle = BudgetedOracle::new(&land, 1000);
        let mut l = learner(4, 5, seed);
        let mut prior = UniformPrior;
        let mut engine = Engine::new(&mut prior, &mut oracle, &mut l, &config, 5).unwrap();
        let mut tree = SearchTree::new(start.clone(), 0);
        engine.search(&mut tree, 500).unwrap();
        let (_, action) = tree.choose_move().unwrap();
        assert_eq!(land.fitness(&start.apply(action).unwrap()).unwrap(), best);
    }
}

#[test]
fn greedy_rollout_never_ends_below_leaf_on_aligned_profile() {
    let a = Alphabet::new("ACDE").unwrap();
    let land = random_profile(&a, 6, 7);
    let config = SearchConfig {
        max_depth: 6 * 3,
        rollout_mode: RolloutMode::FullRollout,
        ..SearchConfig::default()
    };
    let mut rng = seeded(3);
    for _ in 0..20 {
        let leaf = SequenceState::from_indices(&a, (0..6).map(|_| rng.random_range(0..4u8)).collect()).unwrap();
        let mut oracle = BudgetedOracle::new(&land, 1000);
        let mut l = zero_learner(4, 6);
        let mut prior = Aligned(&land, 5.0);
        let mut engine = Engine::new(&mut prior, &mut oracle, &mut l, &config, 6).unwrap();
        let reward = engine.rollout_value(&leaf, 0).unwrap();
        assert!(reward >= land.fitness(&leaf).unwrap());
    }
}

#[test]
fn accepted_fitness_strictly_increases_on_profile() {
    let a = Alphabet::new("ACDE").unwrap();
    for seed in 0..3 {
        let land = random_profile(&a, 6, seed);
        let start = land.minimum().0;
        let cfg = SearchConfig { simulations: 30, ..SearchConfig::default() };
        let mut oracle = BudgetedOracle::new(&land, 200);
        let mut l = learner(4, 6, seed);
        let r = run(&start, &mut UniformPrior, &mut oracle, &mut l, &cfg).unwrap();
        for ep in &r.episodes {
            let acc = ep.accepted_fitness();
            assert!(acc.windows(2).all(|w| w[1] > w[0]), "{acc:?}");
            let rejected: Vec<_> = ep.moves.iter().filter(|m| !m.accepted).collect();
            assert!(rejected.len() <= 1);
        }
    }
}

#[test]
fn decreasing_landscape_gives_one_move_episodes() {
    let a = Alphabet::new("ACDE").unwrap();
    let land = random_profile(&a, 4, 9);
    let start = land.optimum().0;
    let cfg = SearchConfig { simulations: 10, ..SearchConfig::default() };
    let mut oracle = BudgetedOracle::new(&land, 30);
    let mut l = learner(4, 4, 0);
    let r = run(&start, &mut UniformPrior, &mut oracle, &mut l, &cfg).unwrap();
    let first = &r.episodes[0];
    assert_eq!(first.moves.len(), 1);
    assert_eq!(first.termination, Termination::FitnessDecrease);
    assert_eq!(r.best.0, start);
}

#[test]
fn run_result_invariants() {
    let a = Alphabet::new("ACDE").unwrap();
    let nk = NkLandscape::<f64>::new(&a, 7, 2, 5).unwrap();
    let start = nk.brute_force_minimum().unwrap().0;
    let profile = ProfilePrior::from_rows(&a, &vec![vec![0.25; 7]; 4], 0.0).unwrap();
    for mode in [RolloutMode::ValueBootstrap, RolloutMode::FullRollout] {
        let cfg = SearchConfig { simulations: 25, rollout_mode: mode, ..SearchConfig::default() };
        let mut oracle = BudgetedOracle::new(&nk, 150);
        let mut l = learner(4, 7, 1);
        let r = run(&start, &mut profile.clone(), &mut oracle, &mut l, &cfg).unwrap();
        assert!(r.query_count <= 150);
        assert!(r.trace.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
        assert_eq!(r.trace.last().unwrap().best_fitness, r.best.1);
        let max = r.evaluated.iter().map(|(_, f)| *f).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(max, r.best.1);
        let mut seqs: Vec<_> = r.evaluated.iter().map(|(s, _)| s.clone()).collect();
        let n = seqs.len();
        seqs.sort_by_key(|s| s.to_string());
        seqs.dedup();
        assert_eq!(seqs.len(), n);
        assert_eq!(r.evaluated[0].0, start);
    }
}

#[test]
fn dominant_child_is_chosen() {
    // two actions; one leads to fitness 1, the other to 0
    let a = Alphabet::new("ABC").unwrap();
    let land = ProfileLandscape::from_rows(&a, &[vec![0.0], vec![1.0], vec![0.0]], 0.0).unwrap();
    let start = SequenceState::parse(&a, "A").unwrap();
    let cfg = SearchConfig { max_depth: 1, ..SearchConfig::default() };
    let mut wins = 0;
    for seed in 0..5 {
        let mut oracle = BudgetedOracle::new(&land, 100);
        let mut l = learner(3, 1, seed);
        let mut prior = UniformPrior;
        let mut engine = Engine::new(&mut prior, &mut oracle, &mut l, &cfg, 1).unwrap();
        let mut tree = SearchTree::new(start.clone(), 0);
        engine.search(&mut tree, 200).unwrap();
        if tree.choose_move().unwrap().1.residue == 1 {
            wins += 1;
        }
    }
    assert!(wins >= 4);
}

#[test]
fn runs_are_reproducible_and_f32_runs() {
    let a = Alphabet::new("ACDE").unwrap();
    let nk = NkLandscape::<f64>::new(&a, 6, 1, 2).unwrap();
    let start = nk.brute_force_minimum().unwrap().0;
    let cfg = SearchConfig { simulations: 15, ..SearchConfig::default() };
    let go = || {
        let mut oracle = BudgetedOracle::new(&nk, 80);
        let mut l = learner(4, 6, 11);
        run(&start, &mut UniformPrior, &mut oracle, &mut l, &cfg).unwrap()
    };
    let (x, y) = (go(), go());
    assert_eq!(x.trace, y.trace);
    assert_eq!(x.episodes, y.episodes);

    let nk32 = NkLandscape::<f32>::new(&a, 6, 1, 2).unwrap();
    let mut oracle = BudgetedOracle::new(&nk32, 80);
    let mut l = ValueLearner::<f32>::new(4, 6, ValueConfig { hidden: vec![8], ..ValueConfig::default() }, 11);
    let r = run(&start, &mut UniformPrior, &mut oracle, &mut l, &cfg).unwrap();
    assert!(r.best.1 >= nk32.fitness(&start).unwrap());
}
