use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sumlab_core::bounds::{self, BoundId, ProbBudget};
use sumlab_core::fp::round_value;
use sumlab_core::harness::{self, Experiment, ExperimentConfig};
use sumlab_core::kernels::{self, run_tree_sum};
use sumlab_core::oracles;
use sumlab_core::tree::Child;
use sumlab_core::{CompTree, Precision, Rounder, RoundingMode, TreeShape};

fn precision() -> impl Strategy<Value = Precision> {
    (4u32..=30).prop_map(|t| Precision::new(t).unwrap())
}

fn inputs(max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0e3f64..1.0e3, 2..max)
}

fn random_tree(n: usize, p: Precision, seed: u64) -> CompTree {
    CompTree::random(n, p, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn leaf_set(tree: &CompTree, c: Child, out: &mut Vec<usize>) {
    match c {
        Child::Leaf(i) => out.push(i),
        Child::Node(k) => {
            let node = tree.node(k);
            leaf_set(tree, node.left, out);
            leaf_set(tree, node.right, out);
        }
    }
}

fn rounder(mode: RoundingMode, seed: u64) -> Rounder<ChaCha8Rng> {
    match mode {
        RoundingMode::Stochastic => Rounder::stochastic(ChaCha8Rng::seed_from_u64(seed)),
        _ => Rounder::nearest(),
    }
}

fn mode() -> impl Strategy<Value = RoundingMode> {
    prop_oneof![
        Just(RoundingMode::NearestTiesEven),
        Just(RoundingMode::Stochastic)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn partial_sums_are_leaf_subset_sums(x in inputs(60), seed in any::<u64>()) {
        let tree = random_tree(x.len(), Precision::HALF, seed);
        let s = tree.exact_partial_sums_dd(&x).unwrap();
        for (k, _) in tree.nodes() {
            let mut leaves = Vec::new();
            leaf_set(&tree, Child::Node(k), &mut leaves);
            let direct = sumlab_core::tree::exact_sum(&leaves.iter().map(|&i| x[i - 1]).collect::<Vec<_>>());
            prop_assert_eq!(s[k].to_f64(), direct.to_f64());
        }
    }

    #[test]
    fn tree_height_and_leaf_pair_counts(n in 2usize..300, seed in any::<u64>()) {
        let tree = random_tree(n, Precision::HALF, seed);
        let st = tree.stats();
        let min_h = (usize::BITS - (n - 1).leading_zeros()) as usize;
        prop_assert!(st.height >= min_h && st.height < n);
        prop_assert_eq!(st.leaf_pairs + st.n_tilde + 1, n);
        prop_assert!(st.leaf_pairs >= 1);
        prop_assert_eq!(CompTree::sequential(n, Precision::HALF).unwrap().stats().height, n - 1);
        prop_assert_eq!(CompTree::pairwise(n, Precision::HALF).unwrap().stats().height, min_h);
    }

    #[test]
    fn tree_text_round_trip(n in 2usize..80, seed in any::<u64>()) {
        let tree = random_tree(n, Precision::SINGLE, seed);
        prop_assert_eq!(CompTree::from_text(&tree.to_text()).unwrap(), tree);
    }

    #[test]
    fn rounding_is_idempotent_and_monotone(a in -1.0e6f64..1.0e6, b in -1.0e6f64..1.0e6, p in precision()) {
        let rn = |v: f64| round_value::<ChaCha8Rng>(v, p, RoundingMode::NearestTiesEven, None).unwrap();
        let ra = rn(a);
        prop_assert_eq!(rn(ra), ra);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(rn(lo) <= rn(hi));
        let mut rng = ChaCha8Rng::seed_from_u64(a.to_bits() ^ b.to_bits());
        let sr = round_value(a, p, RoundingMode::Stochastic, Some(&mut rng)).unwrap();
        prop_assert_eq!(round_value(sr, p, RoundingMode::Stochastic, Some(&mut rng)).unwrap(), sr);
        let rel = ((sr - a) / a).abs();
        prop_assert!(a == 0.0 || rel <= 2.0 * p.unit_roundoff());
    }

    #[test]
    fn every_roundoff_within_its_bound(x in inputs(120), p in precision(), m in mode(), seed in any::<u64>()) {
        let tree = random_tree(x.len(), p, seed);
        let mut r = rounder(m, seed);
        let run = run_tree_sum(&tree, &x, &mut r).unwrap();
        for rec in &run.trace {
            prop_assert!(rec.within_bound(), "{:?}", rec);
        }
    }

    #[test]
    fn error_matches_local_product_identity(x in inputs(120), p in precision(), m in mode(), seed in any::<u64>()) {
        let tree = random_tree(x.len(), p, seed);
        let mut r = rounder(m, seed);
        let run = run_tree_sum(&tree, &x, &mut r).unwrap();
        let check = oracles::error_via_local_products(&run, &tree).unwrap();
        prop_assert!(check.holds(1e-10), "{:?}", check);
    }

    #[test]
    fn deterministic_bounds_dominate(x in inputs(200), p in precision(), m in mode(), seed in any::<u64>()) {
        let tree = random_tree(x.len(), p, seed);
        let mut r = rounder(m, seed);
        let run = run_tree_sum(&tree, &run_inputs(&tree, &x), &mut r).unwrap();
        let u = p.unit_roundoff() * m.bound_factor();
        let det = bounds::det_bounds(&tree, &run.exact_partials, &run.inputs, u).unwrap();
        let partial = det.get(BoundId::DetPartial).unwrap();
        let inputs = det.get(BoundId::DetInputs).unwrap();
        prop_assert!(partial <= inputs * (1.0 + 1e-12));
        prop_assert!(run.error.abs() <= partial * (1.0 + 1e-12));
        let local = oracles::local_error_magnitude(&run, &tree).unwrap();
        prop_assert!(run.error.abs() <= local * (1.0 + 1e-12) + f64::MIN_POSITIVE);
    }

    #[test]
    fn probabilistic_partial_below_inputs(x in inputs(200), p in precision(), seed in any::<u64>()) {
        let tree = random_tree(x.len(), p, seed);
        let s = tree.exact_partial_sums(&x).unwrap();
        let u = p.unit_roundoff();
        let budget = ProbBudget::default();
        let prob = bounds::prob_bounds_general(&tree, &s, &x, u, budget).unwrap();
        let partial = prob.get(BoundId::ProbClosedPartial).unwrap();
        let inputs = prob.get(BoundId::ProbClosedInputs).unwrap();
        prop_assert!(partial <= inputs * (1.0 + 1e-12));
        let mixed = bounds::mixed_bounds(&tree, &s, &x, 1.0, budget).unwrap();
        prop_assert!(mixed.get(BoundId::MixClosedPartial).unwrap() <= mixed.get(BoundId::MixClosedInputs).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn mixed_bounds_below_inputs(n in 2usize..400, b in 1usize..40, seed in any::<u64>()) {
        let x = harness::InputDist::Uniform { a: -1.0, b: 1.0 }.sample(n, seed).unwrap();
        let b = b.min(n);
        let tree = CompTree::fabsum(n, b, TreeShape::Sequential, TreeShape::Pairwise, Precision::HALF, Precision::SINGLE).unwrap();
        let s = tree.exact_partial_sums(&x).unwrap();
        let mixed = bounds::mixed_bounds(&tree, &s, &x, 2.0, ProbBudget::default()).unwrap();
        prop_assert!(mixed.get(BoundId::MixClosedPartial).unwrap() <= mixed.get(BoundId::MixClosedInputs).unwrap() * (1.0 + 1e-12));
        prop_assert!(mixed.get(BoundId::MixRec).unwrap() <= mixed.get(BoundId::MixClosedPartial).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn bounds_shrink_as_failure_budget_grows(x in inputs(150), d1 in 1e-6f64..0.5, d2 in 1e-6f64..0.5, seed in any::<u64>()) {
        let tree = random_tree(x.len(), Precision::HALF, seed);
        let s = tree.exact_partial_sums(&x).unwrap();
        let u = Precision::HALF.unit_roundoff();
        let (small, large) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
        let tight = bounds::prob_bounds_general(&tree, &s, &x, u, ProbBudget::new(small, small).unwrap()).unwrap();
        let loose = bounds::prob_bounds_general(&tree, &s, &x, u, ProbBudget::new(large, large).unwrap()).unwrap();
        for id in [BoundId::ProbRec, BoundId::ProbClosedPartial, BoundId::ProbClosedInputs] {
            prop_assert!(loose.get(id).unwrap() <= tight.get(id).unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn compensated_recurrences_hold(x in inputs(100), p in (6u32..=24).prop_map(|t| Precision::new(t).unwrap()), m in mode(), seed in any::<u64>()) {
        let mut r = rounder(m, seed);
        let (run, ct) = kernels::run_compensated(&x, p, &mut r).unwrap();
        prop_assert_eq!(run.trace.len(), 4 * (x.len() - 1));
        let table = oracles::compensated_child_errors(&ct, &run.inputs, p.unit_roundoff(), 1e-10);
        prop_assert!(table.is_ok(), "{:?}", table.err());
    }
}

fn run_inputs(tree: &CompTree, x: &[f64]) -> Vec<f64> {
    let p = tree.coarsest_leaf_precision();
    x.iter()
        .map(|&v| round_value::<ChaCha8Rng>(v, p, RoundingMode::NearestTiesEven, None).unwrap())
        .collect()
}

fn small_config(experiment: Experiment, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        experiment,
        n_grid: vec![64, 300],
        trials: 3,
        seed,
        ..Default::default()
    }
}

#[test]
fn same_seed_same_rows() {
    for exp in [
        Experiment::Seq,
        Experiment::ShiftedPairwise,
        Experiment::Compensated,
        Experiment::Fabsum,
    ] {
        let a = harness::run_experiment(&small_config(exp.clone(), 9)).unwrap();
        let b = harness::run_experiment(&small_config(exp.clone(), 9)).unwrap();
        let c = harness::run_experiment(&small_config(exp.clone(), 10)).unwrap();
        let key = |o: &harness::ExperimentOutput| {
            o.rows
                .iter()
                .map(|r| (r.rel_error.to_bits(), r.seed))
                .collect::<Vec<_>>()
        };
        assert_eq!(key(&a), key(&b), "{exp}");
        assert_ne!(key(&a), key(&c), "{exp}");
    }
}

#[test]
fn stochastic_rounding_is_unbiased() {
    let p = Precision::HALF;
    let x = 1.0 + 0.3 * 2f64.powi(-10);
    let gap = 2f64.powi(-10);
    let trials = 40_000;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mean = (0..trials)
        .map(|_| round_value(x, p, RoundingMode::Stochastic, Some(&mut rng)).unwrap())
        .sum::<f64>()
        / trials as f64;
    assert!((mean - x).abs() <= 4.0 * gap / (trials as f64).sqrt());
}
