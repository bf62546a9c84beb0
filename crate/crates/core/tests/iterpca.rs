mod common;

use std::collections::BTreeSet;

use common::*;
use pca_core::graph::min_cost_arborescence;
use pca_core::iterpca::{
    classify, contract_cycle, iter_pca_traced, lift_tree, shortcut_node, subtract_theta, Classification,
};
use pca_core::oracle::brute_force_pcw_opt;
use pca_core::{iter_pca, iter_pca_stepwise, pcc, Arborescence, Arc, Digraph, PcwInstance};

const TOL: f64 = 1e-6;

fn inst(n: usize, arcs: &[(usize, usize, f64)], pen: &[f64]) -> PcwInstance {
    let g = Digraph::new(n, 0, arcs.iter().map(|&(t, h, c)| Arc { tail: t, head: h, cost: c }).collect()).unwrap();
    PcwInstance::new(g, pen.to_vec()).unwrap()
}

/// Every arborescence rooted at 0 spanning `nodes`, using arcs of `g`, by
/// trying all in-arc choices.
fn brute_min_arborescence(g: &Digraph, nodes: &[usize]) -> Option<f64> {
    let inside: BTreeSet<usize> = nodes.iter().copied().collect();
    let non_root: Vec<usize> = nodes.iter().copied().filter(|&v| v != g.root()).collect();
    let choices: Vec<Vec<usize>> = non_root
        .iter()
        .map(|&v| {
            (0..g.arcs().len())
                .filter(|&a| g.arc(a).head == v && inside.contains(&g.arc(a).tail))
                .collect()
        })
        .collect();
    let mut best: Option<f64> = None;
    let mut pick = vec![0usize; non_root.len()];
    if choices.iter().any(|c| c.is_empty()) {
        return None;
    }
    loop {
        let tree = Arborescence::from_parents(
            g.root(),
            non_root.iter().enumerate().map(|(i, &v)| (v, g.arc(choices[i][pick[i]]).tail, choices[i][pick[i]])),
        );
        if tree.validate(g).is_ok() {
            let c = tree.cost(g);
            best = Some(best.map_or(c, |b: f64| b.min(c)));
        }
        let mut i = 0;
        loop {
            if i == pick.len() {
                return best;
            }
            pick[i] += 1;
            if pick[i] < choices[i].len() {
                break;
            }
            pick[i] = 0;
            i += 1;
        }
    }
}

#[test]
fn sandwich_on_random_digraphs() {
    let mut r = rng(1);
    for _ in 0..300 {
        let i = random_pcw(&mut r, 5);
        let out = iter_pca(&i).unwrap();
        out.tree.validate(&i.graph).unwrap();
        let p = pcc(&out.tree, &i).unwrap();
        let y = out.certificate.total();
        let opt = brute_force_pcw_opt(&i).unwrap();
        assert!(p <= y + TOL && y <= opt + TOL, "pcc {p} Y {y} O* {opt} on {i:?}");
    }
}

#[test]
fn sandwich_on_larger_digraphs() {
    let mut r = rng(2);
    for _ in 0..100 {
        let i = random_pcw(&mut r, 8);
        let out = iter_pca(&i).unwrap();
        let p = pcc(&out.tree, &i).unwrap();
        let y = out.certificate.total();
        let opt = brute_force_pcw_opt(&i).unwrap();
        assert!(p <= y + TOL && y <= opt + TOL, "pcc {p} Y {y} O* {opt}");
    }
}

#[test]
fn theta_shift_identity() {
    let mut r = rng(3);
    for _ in 0..200 {
        let i = random_pcw(&mut r, 5);
        if i.node_count() < 3 {
            continue;
        }
        let tree = iter_pca(&i).unwrap().tree;
        let (red, theta) = subtract_theta(&i).unwrap();
        let lhs = pcc(&tree, &i).unwrap();
        let rhs = pcc(&tree, &red).unwrap() + theta.sum();
        assert!((lhs - rhs).abs() <= TOL, "{lhs} vs {rhs}");
        for v in 1..i.node_count() {
            assert!(theta.theta[v] <= i.penalties[v]);
            let min_in = i.graph.arcs().iter().filter(|a| a.head == v).map(|a| a.cost).fold(f64::INFINITY, f64::min);
            assert!(theta.theta[v] <= min_in);
        }
    }
}

#[test]
fn stepwise_reference_agrees_with_dense_engine() {
    let mut r = rng(4);
    for _ in 0..300 {
        let i = random_pcw(&mut r, 7);
        let dense = iter_pca(&i).unwrap();
        let step = iter_pca_stepwise(&i).unwrap();
        assert_eq!(dense.tree, step.tree);
        assert!((dense.certificate.total() - step.certificate.total()).abs() <= 1e-9);
        let a: Vec<_> = dense.certificate.entries().map(|(s, v)| (s.to_vec(), v)).collect();
        let b: Vec<_> = step.certificate.entries().map(|(s, v)| (s.to_vec(), v)).collect();
        assert_eq!(a.len(), b.len());
        for ((sa, va), (sb, vb)) in a.iter().zip(&b) {
            assert_eq!(sa, sb);
            assert!((va - vb).abs() <= 1e-9);
        }
    }
}

#[test]
fn certificate_shape() {
    let mut r = rng(5);
    for _ in 0..200 {
        let i = random_pcw(&mut r, 6);
        let c = iter_pca(&i).unwrap().certificate;
        let sum: f64 = c.entries().map(|(_, v)| v).sum();
        assert!((sum - c.total()).abs() <= 1e-9 * c.total().max(1.0));
        let mut seen = BTreeSet::new();
        for (set, v) in c.entries() {
            assert!(!set.is_empty() && !set.contains(&0) && v > 0.0);
            assert!(seen.insert(set.to_vec()));
        }
    }
}

#[test]
fn reductions_never_raise_the_optimum() {
    let mut r = rng(6);
    let mut checked = 0;
    for _ in 0..400 {
        let i = random_pcw(&mut r, 6);
        if i.node_count() < 3 {
            continue;
        }
        let (red, _) = subtract_theta(&i).unwrap();
        let pre = brute_force_pcw_opt(&red).unwrap();
        let reduced = match classify(&red).unwrap() {
            Classification::ZeroPenaltyNode(v) => shortcut_node(&red, v).unwrap().0,
            Classification::ZeroCycle(z) => contract_cycle(&red, &z).unwrap().0,
            Classification::ZeroArborescence(_) => continue,
        };
        assert!(brute_force_pcw_opt(&reduced).unwrap() <= pre + TOL);
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn at_most_n_levels() {
    let mut r = rng(7);
    for _ in 0..100 {
        let i = random_pcw(&mut r, 9);
        let (_, lines) = iter_pca_traced(&i).unwrap();
        assert!(lines.len() <= i.node_count());
    }
}

#[test]
fn base_case_two_nodes() {
    let take = inst(2, &[(0, 1, 3.0)], &[0.0, 5.0]);
    let out = iter_pca(&take).unwrap();
    assert_eq!(out.tree.arc_count(), 1);
    assert_eq!(out.certificate.get(&[1]), 3.0);
    assert_eq!(pcc(&out.tree, &take).unwrap(), 3.0);

    let skip = inst(2, &[(0, 1, 5.0)], &[0.0, 3.0]);
    let out = iter_pca(&skip).unwrap();
    assert_eq!(out.tree.arc_count(), 0);
    assert_eq!(out.certificate.total(), 3.0);
}

#[test]
fn negative_input_rejected() {
    let g = Digraph::new(2, 0, vec![Arc { tail: 0, head: 1, cost: 1.0 }]).unwrap();
    assert!(PcwInstance::new(g.clone(), vec![0.0, -1.0]).is_err());
    let mut i = PcwInstance::new(g, vec![0.0, 1.0]).unwrap();
    i.penalties[1] = -2.0;
    assert!(iter_pca(&i).is_err());
}

#[test]
fn contraction_lift_matches_enumeration() {
    // r=0; zero 2-cycle {1,2}; entries into both members; 3 hangs off the cycle.
    let i = inst(
        4,
        &[(0, 1, 4.0), (0, 2, 2.0), (1, 2, 0.0), (2, 1, 0.0), (1, 3, 1.0), (2, 3, 5.0), (0, 3, 9.0)],
        &[0.0, 6.0, 6.0, 6.0],
    );
    let z = vec![2, 3];
    let (bar, trace) = contract_cycle(&i, &z).unwrap();
    let reduced = min_cost_arborescence(&bar.graph, &[0, 1, 2]).unwrap();
    let lifted = lift_tree(&trace, &reduced, &i).unwrap();
    lifted.validate(&i.graph).unwrap();
    assert_eq!(lifted.covered(), vec![0, 1, 2, 3]);
    // Enumerate over the arc set the lift may use.
    let used: BTreeSet<usize> = lifted.arc_ids().into_iter().chain(z.iter().copied()).collect();
    let sub = Digraph::new(4, 0, used.iter().map(|&a| *i.graph.arc(a)).collect()).unwrap();
    let brute = brute_min_arborescence(&sub, &[0, 1, 2, 3]).unwrap();
    assert!((lifted.cost(&i.graph) - brute).abs() < 1e-12);
    assert!(pcc(&lifted, &i).unwrap() <= pcc(&reduced, &bar).unwrap() + 1e-12);
}

#[test]
fn lift_never_increases_pcc() {
    let mut r = rng(8);
    for _ in 0..300 {
        let i = random_pcw(&mut r, 6);
        if i.node_count() < 3 {
            continue;
        }
        let (red, _) = subtract_theta(&i).unwrap();
        let (bar, trace) = match classify(&red).unwrap() {
            Classification::ZeroPenaltyNode(v) => shortcut_node(&red, v).unwrap(),
            Classification::ZeroCycle(z) => contract_cycle(&red, &z).unwrap(),
            Classification::ZeroArborescence(_) => continue,
        };
        let t = iter_pca(&bar).unwrap().tree;
        let lifted = lift_tree(&trace, &t, &red).unwrap();
        lifted.validate(&red.graph).unwrap();
        assert!(pcc(&lifted, &red).unwrap() <= pcc(&t, &bar).unwrap() + TOL);
    }
}

#[test]
fn edmonds_matches_enumeration() {
    let mut r = rng(9);
    let mut checked = 0;
    for _ in 0..300 {
        let i = random_pcw(&mut r, 5);
        let nodes: Vec<usize> = (0..i.node_count()).collect();
        match (min_cost_arborescence(&i.graph, &nodes), brute_min_arborescence(&i.graph, &nodes)) {
            (Ok(t), Some(b)) => {
                assert!((t.cost(&i.graph) - b).abs() < 1e-12);
                checked += 1;
            }
            (Err(_), None) => {}
            (a, b) => panic!("disagree: {a:?} vs {b:?}"),
        }
    }
    assert!(checked > 50);
}

#[test]
fn pcc_monotone_under_zero_extension() {
    let mut r = rng(10);
    for _ in 0..200 {
        let mut i = random_pcw(&mut r, 5);
        let t = iter_pca(&i).unwrap().tree;
        let Some(v) = (0..i.node_count()).find(|&v| !t.contains(v)) else { continue };
        let before = pcc(&t, &i).unwrap();
        let mut arcs = i.graph.arcs().to_vec();
        arcs.push(Arc { tail: 0, head: v, cost: 0.0 });
        let id = arcs.len() - 1;
        i.graph = Digraph::new(i.node_count(), 0, arcs).unwrap();
        let ext = Arborescence::from_parents(0, t.arcs().map(|(u, w, a)| (w, u, a)).chain([(v, 0, id)]));
        assert!(pcc(&ext, &i).unwrap() <= before);
    }
}
