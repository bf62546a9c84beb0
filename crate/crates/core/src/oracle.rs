//! Exhaustive reference solvers for tiny instances.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{PcaError, Result};
use crate::graph::{DistMatrix, NodeId, PcwInstance};
use crate::orienteering::{OrienteeringInstance, RouteKind};

const FEAS_TOL: f64 = 1e-9;

#[derive(PartialEq, PartialOrd)]
struct Key(f64);
impl Eq for Key {}
impl Ord for Key {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0)
    }
}

/// Minimum cost of a collection of root-walks covering exactly the node set
/// `mask` (root always in), per mask. A collection is one walk that may jump
/// back to the root for free.
fn walk_cover_costs(n: usize, root: usize, out: &[Vec<(usize, f64)>]) -> Vec<f64> {
    let full = 1usize << n;
    let mut dist = vec![f64::INFINITY; full * n];
    let mut heap = BinaryHeap::new();
    let start = (1 << root) * n + root;
    dist[start] = 0.0;
    heap.push(Reverse((Key(0.0), start)));
    while let Some(Reverse((Key(d), s))) = heap.pop() {
        if d > dist[s] {
            continue;
        }
        let (mask, u) = (s / n, s % n);
        let mut relax = |t: usize, nd: f64, heap: &mut BinaryHeap<_>| {
            if nd < dist[t] {
                dist[t] = nd;
                heap.push(Reverse((Key(nd), t)));
            }
        };
        relax(mask * n + root, d, &mut heap);
        for &(v, c) in &out[u] {
            relax((mask | 1 << v) * n + v, d + c, &mut heap);
        }
    }
    (0..full).map(|m| dist[m * n + root]).collect()
}

const MAX_STATE_NODES: usize = 14;

/// O*: minimum over rooted walk collections of walk cost plus penalties of
/// unvisited nodes.
pub fn brute_force_pcw_opt(inst: &PcwInstance) -> Result<f64> {
    let n = inst.node_count();
    if n > MAX_STATE_NODES {
        return Err(PcaError::TooLarge(format!("{n} nodes (limit {MAX_STATE_NODES})")));
    }
    let mut out = vec![Vec::new(); n];
    for a in inst.graph.arcs() {
        out[a.tail].push((a.head, a.cost));
    }
    let cover = walk_cover_costs(n, inst.root(), &out);
    let total_pen: f64 = (0..n).map(|v| inst.penalty(v)).sum();
    let mut best = f64::INFINITY;
    for (mask, &c) in cover.iter().enumerate() {
        if c.is_finite() {
            let got: f64 = (0..n).filter(|&v| mask >> v & 1 == 1).map(|v| inst.penalty(v)).sum();
            best = best.min(c + total_pen - got);
        }
    }
    Ok(best)
}

/// L*: minimum cost of rooted walks (both directions of each metric edge)
/// covering at least k nodes, the root included.
pub fn brute_force_kmlp_cost(metric: &DistMatrix, root: NodeId, k: usize) -> Result<f64> {
    let n = metric.len();
    if n > MAX_STATE_NODES {
        return Err(PcaError::TooLarge(format!("{n} nodes (limit {MAX_STATE_NODES})")));
    }
    if k == 0 || k > n {
        return Err(PcaError::Input(format!("k = {k} outside [1, {n}]")));
    }
    let out: Vec<Vec<(usize, f64)>> =
        (0..n).map(|u| (0..n).filter(|&v| v != u).map(|v| (v, metric.get(u, v))).collect()).collect();
    let cover = walk_cover_costs(n, root, &out);
    Ok(cover
        .iter()
        .enumerate()
        .filter(|(m, _)| m.count_ones() as usize >= k)
        .map(|(_, &c)| c)
        .fold(f64::INFINITY, f64::min))
}

const MAX_PATH_NODES: usize = 10;

/// Best reward over simple paths from the root extended node by node.
/// `accept(last, cost)` returns the extra cost to finish at `last` (None = not allowed).
fn enumerate_paths(
    metric: &DistMatrix,
    rewards: &[f64],
    allowed: &[bool],
    root: NodeId,
    budget: f64,
    accept: &dyn Fn(NodeId, u64) -> Option<f64>,
) -> f64 {
    fn dfs(
        m: &DistMatrix,
        rewards: &[f64],
        allowed: &[bool],
        budget: f64,
        accept: &dyn Fn(NodeId, u64) -> Option<f64>,
        u: NodeId,
        mask: u64,
        cost: f64,
        reward: f64,
        best: &mut f64,
    ) {
        if let Some(extra) = accept(u, mask) {
            if cost + extra <= budget + FEAS_TOL && reward > *best {
                *best = reward;
            }
        }
        for v in 0..m.len() {
            if mask >> v & 1 == 1 || !allowed[v] {
                continue;
            }
            let c = cost + m.get(u, v);
            if c <= budget + FEAS_TOL {
                dfs(m, rewards, allowed, budget, accept, v, mask | 1 << v, c, reward + rewards[v], best);
            }
        }
    }
    let mut best = f64::NEG_INFINITY;
    dfs(metric, rewards, allowed, budget, accept, root, 1 << root, 0.0, rewards[root], &mut best);
    best
}

/// Opt for rooted, r-t path, or cycle orienteering by exhaustive search.
/// Non-metric matrices are fine: walks are simple sequences scored as given.
pub fn brute_force_orienteering(inst: &OrienteeringInstance, kind: RouteKind) -> Result<f64> {
    let n = inst.metric.len();
    if n > MAX_PATH_NODES {
        return Err(PcaError::TooLarge(format!("{n} nodes (limit {MAX_PATH_NODES})")));
    }
    let r = inst.root;
    let allowed = vec![true; n];
    let m = &inst.metric;
    let best = match kind {
        RouteKind::RootedPath => enumerate_paths(m, &inst.rewards, &allowed, r, inst.budget, &|_, _| Some(0.0)),
        RouteKind::Cycle => enumerate_paths(m, &inst.rewards, &allowed, r, inst.budget, &|u, _| Some(m.get(u, r))),
        RouteKind::RtPath => {
            let t = inst.end.ok_or_else(|| PcaError::Input("r-t path needs an end node".into()))?;
            enumerate_paths(m, &inst.rewards, &allowed, r, inst.budget, &|u, _| (u == t).then_some(0.0))
        }
    };
    if best == f64::NEG_INFINITY {
        return Err(PcaError::Infeasible("no route satisfies the budget".into()));
    }
    Ok(best)
}

/// Max reward of a root-path inside `nodes` of cost at most `budget` that
/// visits `w` somewhere.
pub fn brute_force_rooted_path_through(
    metric: &DistMatrix,
    nodes: &[NodeId],
    rewards: &[f64],
    root: NodeId,
    w: NodeId,
    budget: f64,
) -> Result<f64> {
    let n = metric.len();
    if n > MAX_PATH_NODES + 2 {
        return Err(PcaError::TooLarge(format!("{n} nodes")));
    }
    let mut allowed = vec![false; n];
    for &v in nodes {
        allowed[v] = true;
    }
    let best = enumerate_paths(metric, rewards, &allowed, root, budget, &|_, mask| (mask >> w & 1 == 1).then_some(0.0));
    if best == f64::NEG_INFINITY {
        return Err(PcaError::Infeasible(format!("node {w} is not within budget")));
    }
    Ok(best)
}
