use proptest::prelude::*;

use crtprune::ascension::AscensionLaw;
use crtprune::dynamics::mark_tree;
use crtprune::gw::{offspring_law, Caps, GaltonWatson};
use crtprune::metric::oracle::prohorov_brute;
use crtprune::metric::{hausdorff_masks, prohorov_atomic, span_mask, AtomicMeasure, DistanceTable};
use crtprune::rng::from_seed;
use crtprune::stats::leaf_pgf;
use crtprune::tree::newick::{from_newick, to_newick};
use crtprune::{Atom, Mechanism, SubtreeMask, Tree};

fn build(parents: &[usize], lengths: &[f64], truncated: &[bool]) -> Tree {
    let mut t = Tree::new();
    for (i, (&p, &l)) in parents.iter().zip(lengths).enumerate() {
        let id = t.add_child(p % (i + 1), l);
        if truncated[i] && t.children(id).is_empty() {
            t.mark_truncated(id);
        }
    }
    t
}

fn tree_strategy() -> impl Strategy<Value = Tree> {
    (1usize..40).prop_flat_map(|n| {
        (
            prop::collection::vec(any::<usize>(), n),
            prop::collection::vec(1e-6f64..10.0, n),
            prop::collection::vec(prop::bool::weighted(0.2), n),
        )
            .prop_map(|(p, l, tr)| build(&p, &l, &tr))
    })
}

fn critical_mechanism() -> impl Strategy<Value = Mechanism> {
    (0.1f64..2.0, prop::collection::vec((0.1f64..2.0, 0.0f64..2.0), 0..3)).prop_map(|(beta, atoms)| {
        Mechanism::new(0.0, beta, None, atoms.into_iter().map(|(r, m)| Atom { r, m }).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn newick_serialize_is_a_fixed_point(t in tree_strategy()) {
        let text = to_newick(&t);
        let back = from_newick(&text).unwrap();
        prop_assert_eq!(to_newick(&back), text);
        prop_assert!(back.isometric(&t, 1e-12));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn prohorov_matches_brute_force_and_is_symmetric(
        xs in prop::collection::vec(0.0f64..3.0, 2..7),
        mu in prop::collection::vec((any::<usize>(), 0.01f64..1.0), 1..4),
        nu in prop::collection::vec((any::<usize>(), 0.01f64..1.0), 1..4),
    ) {
        let table = DistanceTable::from_fn(xs.len(), |i, j| (xs[i] - xs[j]).abs());
        let mu = AtomicMeasure::new(mu.into_iter().map(|(p, m)| (p % xs.len(), m)).collect()).unwrap();
        let nu = AtomicMeasure::new(nu.into_iter().map(|(p, m)| (p % xs.len(), m)).collect()).unwrap();
        let d = prohorov_atomic(&mu, &nu, &table, 1e-13);
        prop_assert!((d - prohorov_brute(&mu, &nu, &table)).abs() < 1e-9);
        prop_assert!((d - prohorov_atomic(&nu, &mu, &table, 1e-13)).abs() < 1e-9);
        prop_assert!(d >= 0.0 && d <= mu.total().max(nu.total()) + 1e-12);
    }

    #[test]
    fn hausdorff_of_spanned_masks_is_bounded_and_nested(t in tree_strategy(), pick in any::<u64>()) {
        let leaves = t.leaves();
        prop_assume!(!leaves.is_empty());
        let chosen: Vec<_> = leaves.iter().enumerate().filter(|(i, _)| pick >> (i % 64) & 1 == 1).map(|(_, &v)| v).collect();
        let inner = span_mask(&t, &chosen);
        let outer = SubtreeMask::full(&t);
        prop_assert!(inner.is_within(&outer));
        let h = hausdorff_masks(&t, &outer, &inner, f64::INFINITY).unwrap();
        prop_assert!(h >= 0.0 && h <= t.height() + 1e-12);
        prop_assert_eq!(hausdorff_masks(&t, &outer, &outer, f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn pruning_shrinks_the_tree(seed in any::<u64>(), grid in prop::collection::vec(0.0f64..2.0, 1..6)) {
        let mech = Mechanism::quadratic(1.0);
        let mut rng = from_seed(seed);
        let t = GaltonWatson::pruned(&mech, 0.5, 1.0, 1e-12).unwrap().sample(&mut rng, Caps::default()).unwrap();
        let marked = mark_tree(&t, &mech.shift(0.5).unwrap(), 1.0, 2.0, &mut rng).unwrap();
        let mut grid = grid;
        grid.sort_by(f64::total_cmp);
        let masks: Vec<SubtreeMask> = grid.iter().map(|&g| marked.prune_mask(g).unwrap()).collect();
        for w in masks.windows(2) {
            prop_assert!(w[1].is_within(&w[0]));
            prop_assert!(w[1].total_length() <= w[0].total_length() + 1e-12);
        }
        let trees = marked.prune_trajectory(&grid).unwrap();
        for w in trees.windows(2) {
            prop_assert!(w[1].total_length() <= w[0].total_length() + 1e-9);
        }
    }

    #[test]
    fn offspring_laws_are_probability_laws(mech in critical_mechanism(), lam in 0.05f64..20.0) {
        let law = offspring_law(&mech, lam, 1e-10).unwrap();
        let mass: f64 = law.probs().iter().sum::<f64>() + law.tail_mass();
        prop_assert!((mass - 1.0).abs() < 1e-9);
        prop_assert!(law.p(1) == 0.0);
        prop_assert!(law.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn ascension_cdf_is_a_distribution_function(mech in critical_mechanism(), lam in 0.1f64..10.0, us in prop::collection::vec(0.0f64..1.0, 2..8)) {
        let law = AscensionLaw::new(&mech, lam).unwrap();
        let mut thetas: Vec<f64> = us.iter().map(|u| law.theta_lambda() * u).collect();
        thetas.sort_by(f64::total_cmp);
        let values: Vec<f64> = thetas.iter().map(|&x| law.cdf(x).unwrap()).collect();
        prop_assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
        for w in values.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-12);
        }
        prop_assert!(law.cdf(law.theta_lambda()).unwrap() < 1e-9);
    }

    #[test]
    fn leaf_pgf_is_increasing_on_the_unit_interval(mech in critical_mechanism(), theta in 0.1f64..3.0, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = (a.min(b), a.max(b));
        let x = leaf_pgf(&mech, 1.0, theta, lo).unwrap().value;
        let y = leaf_pgf(&mech, 1.0, theta, hi).unwrap().value;
        prop_assert!((0.0..=1.0 + 1e-12).contains(&x) && (0.0..=1.0 + 1e-12).contains(&y));
        prop_assert!(y >= x - 1e-12);
    }
}
