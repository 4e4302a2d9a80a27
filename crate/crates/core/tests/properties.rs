//! Property checks over randomly generated trees, walks and excursions.

use dendrite::bm::{hitting_probability_exact, mean_hitting_time_exact};
use dendrite::diagnostics::{ball_volume_profile, covering_number, ks_distance};
use dendrite::embedding::Embedding;
use dendrite::excursion::{search_depth, tree_from_excursion, Excursion};
use dendrite::gw::{cycle_lemma_rotation, lukasiewicz, sample_conditioned_tree, OffspringDistribution, OffspringLaw};
use dendrite::rng::{replica_rng, Rng};
use dendrite::trees::format::{parse_metric_tree, parse_ordered_tree, write_metric_tree, write_ordered_tree};
use dendrite::trees::{spanning_subtree, VertexMeasure};
use dendrite::{MetricTree, OrderedTree, TreeMeasure, TreePoint};
use proptest::prelude::*;
use rand::Rng as _;

const TOL: f64 = 1e-9;

fn random_metric_tree(rng: &mut Rng) -> MetricTree {
    let mut parents: Vec<Option<usize>> = vec![None];
    let mut leaves = vec![0usize];
    for _ in 0..rng.random_range(1..12) {
        let i = rng.random_range(0..=leaves.len());
        let (v, kids) = if i == leaves.len() {
            (0, 1)
        } else {
            (leaves.swap_remove(i), rng.random_range(2..=3))
        };
        if v == 0 {
            leaves.retain(|&l| l != 0);
        }
        for _ in 0..kids {
            parents.push(Some(v));
            leaves.push(parents.len() - 1);
        }
    }
    let lengths: Vec<f64> = (0..parents.len())
        .map(|v| if v == 0 { 0.0 } else { rng.random_range(0.1..2.0) })
        .collect();
    MetricTree::new(&parents, &lengths, vec![]).unwrap()
}

fn random_point(t: &MetricTree, rng: &mut Rng) -> TreePoint {
    let v = rng.random_range(1..t.len());
    t.point(v, rng.random_range(0.0..t.edge_length(v))).unwrap()
}

fn random_ordered_tree(rng: &mut Rng) -> OrderedTree {
    let dist = OffspringDistribution::new(OffspringLaw::GeometricHalf).unwrap();
    let n = rng.random_range(1..60);
    sample_conditioned_tree(&dist, n, rng).unwrap()
}

fn random_excursion(rng: &mut Rng) -> Excursion {
    let m = rng.random_range(3..40);
    let times: Vec<f64> = (0..=m).map(|i| i as f64 / m as f64).collect();
    let values: Vec<f64> = (0..=m)
        .map(|i| if i == 0 || i == m { 0.0 } else { rng.random_range(0.01..3.0) })
        .collect();
    Excursion::new(times, values).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn four_point_condition(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let t = random_metric_tree(&mut rng);
        let p: Vec<TreePoint> = (0..4).map(|_| random_point(&t, &mut rng)).collect();
        let d = |i: usize, j: usize| t.distance(p[i], p[j]);
        let lhs = d(0, 1) + d(2, 3);
        let rhs = (d(0, 2) + d(1, 3)).max(d(0, 3) + d(1, 2));
        prop_assert!(lhs <= rhs + TOL);
    }

    #[test]
    fn branch_point_is_symmetric(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let t = random_metric_tree(&mut rng);
        let (a, b, c) = (random_point(&t, &mut rng), random_point(&t, &mut rng), random_point(&t, &mut rng));
        let x = t.branch_point(a, b, c);
        for y in [t.branch_point(b, a, c), t.branch_point(c, b, a), t.branch_point(b, c, a)] {
            prop_assert!(t.distance(x, y) < TOL);
        }
        // The branch point lies on all three geodesics.
        prop_assert!((t.distance(a, x) + t.distance(x, b) - t.distance(a, b)).abs() < TOL);
        prop_assert!((t.distance(a, x) + t.distance(x, c) - t.distance(a, c)).abs() < TOL);
        prop_assert!((t.distance(b, x) + t.distance(x, c) - t.distance(b, c)).abs() < TOL);
    }

    #[test]
    fn projection_is_one_lipschitz(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let t = random_metric_tree(&mut rng);
        let k = rng.random_range(1..5);
        let targets: Vec<TreePoint> = (0..k).map(|_| random_point(&t, &mut rng)).collect();
        let sub = spanning_subtree(&t, &targets).unwrap();
        for _ in 0..10 {
            let (x, y) = (random_point(&t, &mut rng), random_point(&t, &mut rng));
            let (px, py) = (sub.project(&t, x).unwrap(), sub.project(&t, y).unwrap());
            prop_assert!(t.distance(px, py) <= t.distance(x, y) + TOL);
        }
    }

    #[test]
    fn projection_distance_shrinks_with_more_marks(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let t = random_metric_tree(&mut rng);
        let marks: Vec<TreePoint> = (0..6).map(|_| random_point(&t, &mut rng)).collect();
        let sups: Vec<f64> = (1..=marks.len())
            .map(|k| spanning_subtree(&t, &marks[..k]).unwrap().max_projection_distance(&t).unwrap())
            .collect();
        for w in sups.windows(2) {
            prop_assert!(w[1] <= w[0] + TOL);
        }
    }

    #[test]
    fn pushforward_preserves_mass(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let t = random_metric_tree(&mut rng);
        let mu = TreeMeasure::uniform_length(&t, rng.random_range(0.5..2.0)).unwrap();
        let targets: Vec<TreePoint> = (0..3).map(|_| random_point(&t, &mut rng)).collect();
        let sub = spanning_subtree(&t, &targets).unwrap();
        let pushed = sub.pushforward(&t, &mu).unwrap();
        prop_assert!((pushed.total_mass() - mu.total_mass()).abs() < 1e-9 * mu.total_mass());
    }

    #[test]
    fn graph_pushforward_preserves_mass(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let t = random_ordered_tree(&mut rng);
        let n = t.len();
        let targets: Vec<usize> = (0..3).map(|_| rng.random_range(0..n)).collect();
        let sub = dendrite::trees::spanning_subtree_graph(&t, &targets).unwrap();
        let pushed = sub.pushforward(&VertexMeasure::uniform(n)).unwrap();
        prop_assert!((pushed.total_mass() - 1.0).abs() < 1e-12);
        prop_assert!(t.preorder().into_iter().all(|v| pushed.0[v] == 0.0 || sub.contains(v)));
    }

    #[test]
    fn excursion_distance_is_a_pseudometric(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let w = random_excursion(&mut rng);
        let s: Vec<f64> = (0..3).map(|_| rng.random_range(0.0..=1.0)).collect();
        let d = |a: f64, b: f64| w.distance(a, b).unwrap();
        prop_assert!(d(s[0], s[2]) <= d(s[0], s[1]) + d(s[1], s[2]) + TOL);
        prop_assert!((d(s[0], s[1]) - d(s[1], s[0])).abs() < TOL);
        prop_assert!(d(s[0], s[0]).abs() < TOL);
    }

    #[test]
    fn nested_samples_give_nested_trees(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let w = random_excursion(&mut rng);
        let u: Vec<f64> = (0..8).map(|_| rng.random_range(0.0..1.0)).collect();
        let big = tree_from_excursion(&w, &u).unwrap();
        let k = rng.random_range(1..u.len());
        let small = tree_from_excursion(&w, &u[..k]).unwrap();
        for i in 0..k {
            for j in 0..k {
                let a = small.distance(small.marks()[i], small.marks()[j]);
                let b = big.distance(big.marks()[i], big.marks()[j]);
                prop_assert!((a - b).abs() < TOL);
                prop_assert!((a - w.distance(u[i], u[j]).unwrap()).abs() < TOL);
            }
        }
    }

    #[test]
    fn rounded_time_is_close(seed in any::<u64>(), s in 0.0f64..=1.0) {
        let mut rng = replica_rng(seed, 0);
        let t = random_ordered_tree(&mut rng);
        let sd = search_depth(&t);
        let n = t.len() as f64;
        prop_assert!((sd.rounded_time(s).unwrap() - s).abs() <= 1.0 / (2.0 * n) + 1e-12);
    }

    #[test]
    fn embedding_isometry_and_truncation(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let host = random_metric_tree(&mut rng);
        let k = rng.random_range(1..6);
        let t = host.with_marks((0..k).map(|_| random_point(&host, &mut rng)).collect()).unwrap();
        let emb = Embedding::new(&t).unwrap();
        let sub = spanning_subtree(&t, t.marks()).unwrap();
        let pts: Vec<TreePoint> = (0..8).map(|_| sub.project(&t, random_point(&t, &mut rng)).unwrap()).collect();
        for &p in &pts {
            let x = emb.embed(p).unwrap();
            prop_assert!(x.0.iter().all(|c| *c >= 0.0));
            prop_assert!((x.norm() - t.depth(p)).abs() < TOL);
            for &q in &pts {
                prop_assert!((x.distance(&emb.embed(q).unwrap()) - t.distance(p, q)).abs() < TOL);
            }
        }
    }

    #[test]
    fn hitting_laws_are_consistent(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let t = random_metric_tree(&mut rng);
        let (s, a, b) = (random_point(&t, &mut rng), random_point(&t, &mut rng), random_point(&t, &mut rng));
        prop_assume!(t.distance(a, b) > 1e-6);
        let p = hitting_probability_exact(&t, s, a, b).unwrap();
        let q = hitting_probability_exact(&t, s, b, a).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        prop_assert!((p + q - 1.0).abs() < TOL);
        let mu = TreeMeasure::uniform_length(&t, rng.random_range(0.2..3.0)).unwrap();
        let e = mean_hitting_time_exact(&t, &mu, a, b).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert!(e <= 2.0 * t.diameter() * mu.total_mass() + TOL);
    }

    #[test]
    fn volume_profile_monotone_and_bounded(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let t = random_metric_tree(&mut rng);
        let mu = TreeMeasure::normalized_length(&t).unwrap();
        let radii = [0.2, 0.5, 1.0, 2.0, 5.0];
        let p = ball_volume_profile(&t, &mu, &radii, Some(0.1)).unwrap();
        for w in p.volumes.windows(2) {
            prop_assert!(w[1] + TOL >= w[0]);
        }
        prop_assert!(p.volumes.iter().all(|v| *v <= 1.0 + TOL && *v > 0.0));
    }

    #[test]
    fn covering_number_non_increasing(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let t = random_metric_tree(&mut rng);
        let counts: Vec<usize> = [0.1, 0.3, 0.7, 1.5, 4.0, 100.0].iter().map(|&r| covering_number(&t, r).unwrap()).collect();
        for w in counts.windows(2) {
            prop_assert!(w[1] <= w[0]);
        }
        prop_assert_eq!(*counts.last().unwrap(), 1);
    }

    #[test]
    fn lukasiewicz_round_trip(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let t = random_ordered_tree(&mut rng);
        let path = lukasiewicz(&t);
        prop_assert_eq!(path.0.iter().sum::<i64>(), -1);
        prop_assert_eq!(path.decode().unwrap(), t.canonical());
        // Only the identity rotation of a valid path is valid.
        prop_assert_eq!(cycle_lemma_rotation(&path.0).unwrap(), 0);
    }

    #[test]
    fn tree_files_round_trip(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let t = random_ordered_tree(&mut rng);
        prop_assert_eq!(parse_ordered_tree(&write_ordered_tree(&t, &["x".into()])).unwrap(), t);
        let host = random_metric_tree(&mut rng);
        let m = host.with_marks(vec![random_point(&host, &mut rng)]).unwrap();
        let back = parse_metric_tree(&write_metric_tree(&m, &[])).unwrap();
        prop_assert_eq!(back.len(), m.len());
        prop_assert!((back.total_length() - m.total_length()).abs() < TOL);
        prop_assert!(back.distance(back.marks()[0], TreePoint::node(0)) - m.depth(m.marks()[0]) < TOL);
    }

    #[test]
    fn ks_is_symmetric_and_bounded(seed in any::<u64>()) {
        let mut rng = replica_rng(seed, 0);
        let a: Vec<f64> = (0..rng.random_range(1..50)).map(|_| rng.random_range(0..10) as f64).collect();
        let b: Vec<f64> = (0..rng.random_range(1..50)).map(|_| rng.random_range(0..10) as f64).collect();
        let d = ks_distance(&a, &b).unwrap();
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(d, ks_distance(&b, &a).unwrap());
        prop_assert_eq!(ks_distance(&a, &a).unwrap(), 0.0);
    }
}
