use std::collections::HashSet;

use evotree::landscape::{BudgetedOracle, NkLandscape};
use evotree::mcts::{Engine, RolloutMode, SearchConfig, SearchTree};
use evotree::metrics::{aggregate_values, diversity_of, repetition_of};
use evotree::prior::UniformPrior;
use evotree::sequence::{Alphabet, SequenceState};
use evotree::sidecar::softmax_columns;
use evotree::value::{ValueConfig, ValueLearner};
use proptest::prelude::*;

fn contributions() -> impl Strategy<Value = (Vec<Vec<String>>, usize)> {
    (1usize..5).prop_flat_map(|k| {
        (
            proptest::collection::vec(proptest::collection::vec("[a-d]{1,2}", 0..=k), 1..6),
            Just(k),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tree_statistics_are_conserved(seed in 0u64..500, c in 0.0f64..20.0, depth in 1usize..5, sims in 1usize..120, full in any::<bool>()) {
        let a = Alphabet::new("ACD").unwrap();
        let nk = NkLandscape::<f64>::new(&a, 5, 1, seed).unwrap();
        let start = SequenceState::from_indices(&a, vec![0; 5]).unwrap();
        let config = SearchConfig {
            c_puct: c,
            max_depth: depth,
            rollout_mode: if full { RolloutMode::FullRollout } else { RolloutMode::ValueBootstrap },
            ..SearchConfig::default()
        };
        let mut oracle = BudgetedOracle::new(&nk, 1 << 16);
        let mut learner = ValueLearner::<f64>::new(3, 5, ValueConfig { hidden: vec![4], ..ValueConfig::default() }, seed);
        let mut prior = UniformPrior;
        let mut engine = Engine::new(&mut prior, &mut oracle, &mut learner, &config, 5).unwrap();
        let mut tree = SearchTree::new(start, 0);
        let mut total = 0.0;
        for _ in 0..sims {
            total += engine.simulate(&mut tree).unwrap().reward;
        }
        let root = tree.node(tree.root());
        prop_assert_eq!(root.visits as usize, sims);
        prop_assert!((root.total_reward - total).abs() < 1e-9);
        for id in tree.node_ids() {
            let n = tree.node(id);
            prop_assert!(n.depth <= depth);
            if n.expanded {
                let below: u64 = n.children.iter().map(|&ch| tree.node(ch).visits).sum();
                prop_assert_eq!(n.visits, below + n.leaf_evaluations);
            }
            let mut sorted = n.children.clone();
            sorted.sort_by_key(|&ch| tree.node(ch).action.unwrap().flat_index(5));
            prop_assert_eq!(&sorted, &n.children);
        }
    }

    #[test]
    fn metrics_stay_in_range_and_ignore_order((lists, k) in contributions()) {
        let d = diversity_of(&lists, k);
        let nonempty = lists.iter().any(|l| !l.is_empty());
        prop_assert!(d.percent <= 100.0);
        if nonempty {
            prop_assert!(d.percent >= 100.0 / (lists.len() * k) as f64 - 1e-12);
        }
        let training: HashSet<String> = ["a", "b", "ab"].iter().map(|s| s.to_string()).collect();
        let r = repetition_of(&lists, k, &training);
        prop_assert!((0.0..=100.0).contains(&r.percent));
        let mut reversed = lists.clone();
        reversed.reverse();
        prop_assert_eq!(diversity_of(&reversed, k).percent, d.percent);
        prop_assert_eq!(repetition_of(&reversed, k, &training).percent, r.percent);
    }

    #[test]
    fn softmax_columns_normalize(rows in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 3), 1..6)) {
        let out = softmax_columns(&rows);
        let l = rows.len();
        for p in 0..l {
            let s: f64 = (0..3).map(|r| out[r * l + p]).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn aggregate_is_shift_equivariant(values in proptest::collection::vec(-10.0f64..10.0, 1..8), shift in -5.0f64..5.0) {
        let a = aggregate_values(&values).unwrap();
        let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
        let b = aggregate_values(&shifted).unwrap();
        prop_assert!((b.mean - a.mean - shift).abs() < 1e-9);
        prop_assert!((b.std - a.std).abs() < 1e-9);
        prop_assert!(a.std >= 0.0);
    }
}
