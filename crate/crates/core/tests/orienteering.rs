mod common;

use common::*;
use pca_core::graph::complete_arc_id;
use pca_core::oracle::brute_force_orienteering;
use pca_core::orienteering::{extract_regret_bounded_subpath, tree_to_path};
use pca_core::{
    solve, Arborescence, DistMatrix, OrienteeringInstance, RouteKind, RoutedSolution, SolverConfig,
};
use proptest::prelude::*;
use rand::Rng;

const EPS: f64 = 0.01;

fn check_route(sol: &RoutedSolution, inst: &OrienteeringInstance, kind: RouteKind) {
    let r = inst.root;
    assert_eq!(sol.nodes[0], r);
    assert!(sol.cost <= inst.budget + 1e-9, "cost {} > {}", sol.cost, inst.budget);
    assert!((inst.metric.walk_cost(&sol.nodes) - sol.cost).abs() < 1e-9);
    let body: &[usize] = match kind {
        RouteKind::Cycle if sol.nodes.len() > 1 => {
            assert_eq!(*sol.nodes.last().unwrap(), r);
            &sol.nodes[..sol.nodes.len() - 1]
        }
        RouteKind::RtPath => {
            assert_eq!(*sol.nodes.last().unwrap(), inst.end.unwrap());
            &sol.nodes
        }
        _ => &sol.nodes,
    };
    let mut seen = body.to_vec();
    seen.sort_unstable();
    seen.dedup();
    assert_eq!(seen.len(), body.len(), "repeated node in {:?}", sol.nodes);
}

fn euclid_instance(r: &mut TestRng, kind: RouteKind) -> OrienteeringInstance {
    let n = r.gen_range(3..=9);
    let m = DistMatrix::euclidean(&random_points(r, n, 100.0)).unwrap();
    let rewards = integer_rewards(r, n);
    let end = (kind == RouteKind::RtPath).then(|| r.gen_range(1..n));
    let floor = end.map_or(0.0, |t| m.get(0, t));
    let budget = floor + r.gen_range(0.0..200.0);
    OrienteeringInstance::new(m, rewards, 0, end, budget).unwrap()
}

fn guard(kind: RouteKind) -> f64 {
    match kind {
        RouteKind::RootedPath => 3.0 / (1.0 - EPS),
        RouteKind::RtPath => 6.0 / (1.0 - EPS),
        RouteKind::Cycle => 4.0 / (1.0 - 2.0 * EPS),
    }
}

#[test]
fn approximation_guards_against_oracle() {
    for (seed, kind) in [(40, RouteKind::RootedPath), (41, RouteKind::RtPath), (42, RouteKind::Cycle)] {
        let mut r = rng(seed);
        for _ in 0..60 {
            let inst = euclid_instance(&mut r, kind);
            let out = solve(&inst, kind, &SolverConfig::default()).unwrap();
            check_route(&out.solution, &inst, kind);
            let opt = brute_force_orienteering(&inst, kind).unwrap();
            let val = out.solution.reward;
            assert!(val <= opt + 1e-9);
            assert!(opt <= out.bound.aggregate + 1e-6, "{kind:?}: Opt {opt} > UB {}", out.bound.aggregate);
            if val > 0.0 {
                assert!(opt / val <= guard(kind) + 1e-9);
            } else {
                assert_eq!(opt, 0.0);
            }
        }
    }
}

#[test]
fn bounds_hold_on_non_metric_matrices() {
    let mut r = rng(43);
    let mut non_metric = 0;
    for kind in [RouteKind::RootedPath, RouteKind::RtPath, RouteKind::Cycle] {
        for _ in 0..40 {
            let n = r.gen_range(3..=7);
            let m = random_symmetric(&mut r, n);
            let end = (kind == RouteKind::RtPath).then(|| r.gen_range(1..n));
            let floor = end.map_or(0.0, |t| m.get(0, t));
            let inst = OrienteeringInstance::new(m, integer_rewards(&mut r, n), 0, end, floor + r.gen_range(0.0..120.0)).unwrap();
            non_metric += usize::from(!inst.is_metric());
            let out = solve(&inst, kind, &SolverConfig::default()).unwrap();
            check_route(&out.solution, &inst, kind);
            let opt = brute_force_orienteering(&inst, kind).unwrap();
            assert!(out.solution.reward <= opt + 1e-9);
            assert!(opt <= out.bound.aggregate + 1e-6, "{kind:?}: Opt {opt} > UB {}", out.bound.aggregate);
        }
    }
    assert!(non_metric > 60);
}

#[test]
fn pruning_keeps_the_value() {
    let mut r = rng(44);
    let no_prune = SolverConfig { prune: false, ..SolverConfig::default() };
    for kind in [RouteKind::RootedPath, RouteKind::RtPath, RouteKind::Cycle] {
        for _ in 0..40 {
            let inst = euclid_instance(&mut r, kind);
            let a = solve(&inst, kind, &SolverConfig::default()).unwrap();
            let b = solve(&inst, kind, &no_prune).unwrap();
            assert_eq!(a.solution.reward, b.solution.reward, "{kind:?}");
        }
    }
}

#[test]
fn trivial_routes() {
    let m = DistMatrix::euclidean(&[(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)]).unwrap();
    let inst = OrienteeringInstance::new(m.clone(), vec![1.0, 2.0, 3.0], 0, None, 0.0).unwrap();
    for kind in [RouteKind::RootedPath, RouteKind::Cycle] {
        let out = solve(&inst, kind, &SolverConfig::default()).unwrap();
        assert_eq!(out.solution.nodes, vec![0]);
        assert_eq!(out.bound.aggregate, 1.0);
    }
    let p2p = OrienteeringInstance::new(m, vec![1.0, 2.0, 3.0], 0, Some(1), 3.0).unwrap();
    let out = solve(&p2p, RouteKind::RtPath, &SolverConfig::default()).unwrap();
    assert_eq!(out.solution.nodes, vec![0, 1]);
    assert_eq!(out.solution.reward, 3.0);
}

fn random_tree(seed: u64, n: usize) -> (Arborescence, DistMatrix) {
    let mut r = rng(seed);
    let m = DistMatrix::euclidean(&random_points(&mut r, n, 100.0)).unwrap();
    let t = Arborescence::from_parents(
        0,
        (1..n).map(|v| {
            let u = r.gen_range(0..v);
            (v, u, complete_arc_id(n, u, v))
        }),
    );
    (t, m)
}

fn regret(seq: &[usize], m: &DistMatrix) -> f64 {
    m.walk_cost(seq) - m.get(seq[0], *seq.last().unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tree_to_path_euler_bound(seed in 0u64..10_000, n in 2usize..=6, wpick in 0usize..100) {
        let (t, m) = random_tree(seed, n);
        let w = 1 + wpick % (n - 1);
        let p = tree_to_path(&t, w).unwrap();
        prop_assert_eq!(p[0], 0);
        prop_assert_eq!(*p.last().unwrap(), w);
        let mut sorted = p.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, t.covered());
        let depth = m.walk_cost(&t.path_to(w).unwrap());
        prop_assert!(m.walk_cost(&p) <= 2.0 * t.metric_cost(&m) - depth + 1e-9);
    }

    #[test]
    fn extraction_is_exhaustive_optimum(seed in 0u64..10_000, budget in 0.0f64..150.0) {
        let mut r = rng(seed);
        let n = 8;
        let m = DistMatrix::euclidean(&random_points(&mut r, n, 100.0)).unwrap();
        let rewards = integer_rewards(&mut r, n);
        let path: Vec<usize> = (0..n).collect();
        let got = extract_regret_bounded_subpath(&path, budget, &m, &rewards);
        let reward = |s: &[usize]| s.iter().map(|&v| rewards[v]).sum::<f64>();
        let mut best = reward(&[0]);
        for i in 1..n {
            for j in i..n {
                let mut s = vec![0];
                s.extend_from_slice(&path[i..=j]);
                if regret(&s, &m) <= budget + 1e-9 {
                    best = best.max(reward(&s));
                }
            }
        }
        prop_assert_eq!(reward(&got), best);
        prop_assert!(regret(&got, &m) <= budget + 1e-9);
        // Greedy-lemma floor.
        let total = reward(&path);
        let creg = regret(&path, &m);
        if budget > 0.0 && creg > 0.0 {
            prop_assert!(reward(&got) >= total / (creg / budget + 1.0) - 1e-9);
        }
    }
}

#[test]
fn extraction_with_ample_budget_returns_whole_path() {
    let mut r = rng(45);
    let m = DistMatrix::euclidean(&random_points(&mut r, 6, 10.0)).unwrap();
    let rewards = vec![0.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    let path = vec![0, 3, 1, 5, 2, 4];
    assert_eq!(extract_regret_bounded_subpath(&path, 1e6, &m, &rewards), path);
}
