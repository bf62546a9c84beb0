//! Binary search over the Lagrange multiplier: reward-weighted penalties
//! tuned until the prize-collecting tree meets a cost budget
//! ([`bin_search_pca`]) or a coverage count ([`b_search_kmlp`]).

use std::collections::HashMap;
use std::ops::ControlFlow;

use crate::error::{PcaError, Result};
use crate::graph::{complete_arc_id, zero_tolerance, Arborescence, DistMatrix, NodeId};
use crate::iterpca::DenseJob;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Termination {
    /// Stop when lambda2 - lambda1 <= 1e-6.
    Practical,
    /// Width epsilon * low^2 * LB.
    Theory,
    /// Width low^2 / (m * c_max); costs are integer multiples of 1/m.
    Exact { m: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchConfig {
    pub epsilon: f64,
    pub termination: Termination,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { epsilon: 0.01, termination: Termination::Practical }
    }
}

impl SearchConfig {
    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(PcaError::Input(format!("epsilon {} not in (0, 1)", self.epsilon)));
        }
        if let Termination::Exact { m } = self.termination {
            if !(m.is_finite() && m > 0.0) {
                return Err(PcaError::Input(format!("cost denominator {m} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaProbe {
    pub lambda: f64,
    pub tree_cost: f64,
    /// Covered nodes (global ids, sorted, root included).
    pub covered: Vec<NodeId>,
    pub certificate_total: f64,
    pub tree: Arborescence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeDistribution {
    /// One or two (weight, tree) atoms; empty when the search was aborted.
    pub atoms: Vec<(f64, Arborescence)>,
    /// Every probe the search consulted, in order.
    pub probes: Vec<LambdaProbe>,
    pub aborted: bool,
}

impl TreeDistribution {
    pub fn expected_cost(&self, metric: &DistMatrix) -> f64 {
        self.atoms.iter().map(|(g, t)| g * t.metric_cost(metric)).sum()
    }

    pub fn expected_reward(&self, rewards: &[f64]) -> f64 {
        self.atoms.iter().map(|(g, t)| g * t.covered().iter().map(|&v| rewards[v]).sum::<f64>()).sum()
    }

    pub fn expected_coverage(&self) -> f64 {
        self.atoms.iter().map(|(g, t)| g * t.covered().len() as f64).sum()
    }
}

/// Lagrangian instances over a fixed node set: the bidirected metric on
/// `nodes` with penalties lambda * pi_v and, optionally, a mandatory node
/// carrying penalty n * c_max. Probes are memoized by lambda.
pub struct PcaFamily<'a> {
    metric: &'a DistMatrix,
    nodes: Vec<NodeId>,
    root_pos: usize,
    mandatory_pos: Option<usize>,
    weights: Vec<f64>,
    big: f64,
    c_max: f64,
    tol: f64,
    cache: HashMap<u64, usize>,
    evaluated: Vec<LambdaProbe>,
}

impl<'a> PcaFamily<'a> {
    /// `rewards` is indexed by global node id; `None` means unit weights.
    pub fn new(
        metric: &'a DistMatrix,
        nodes: &[NodeId],
        root: NodeId,
        mandatory: Option<NodeId>,
        rewards: Option<&[f64]>,
    ) -> Result<Self> {
        let mut nodes = nodes.to_vec();
        nodes.sort_unstable();
        nodes.dedup();
        if let Some(&v) = nodes.iter().find(|&&v| v >= metric.len()) {
            return Err(PcaError::Input(format!("node {v} outside the metric")));
        }
        let pos = |v: NodeId, what: &str| {
            nodes.binary_search(&v).map_err(|_| PcaError::Input(format!("{what} {v} not in the node set")))
        };
        let root_pos = pos(root, "root")?;
        let mandatory_pos = mandatory.map(|w| pos(w, "mandatory node")).transpose()?;
        let weights = match rewards {
            Some(r) => {
                if r.len() != metric.len() {
                    return Err(PcaError::Input("reward vector does not match the metric".into()));
                }
                if let Some(v) = nodes.iter().find(|&&v| !(r[v].is_finite() && r[v] >= 0.0)) {
                    return Err(PcaError::Input(format!("reward of node {v} is negative or not finite")));
                }
                nodes.iter().map(|&v| r[v]).collect()
            }
            None => vec![1.0; nodes.len()],
        };
        let mut c_max: f64 = 0.0;
        for &u in &nodes {
            for &v in &nodes {
                c_max = c_max.max(metric.get(u, v));
            }
        }
        let n = nodes.len() as f64;
        let big = if c_max > 0.0 { n * c_max } else { 1.0 };
        Ok(PcaFamily {
            metric,
            nodes,
            root_pos,
            mandatory_pos,
            weights,
            big,
            c_max,
            tol: zero_tolerance(c_max),
            cache: HashMap::new(),
            evaluated: Vec::new(),
        })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn root(&self) -> NodeId {
        self.nodes[self.root_pos]
    }

    pub fn c_max(&self) -> f64 {
        self.c_max
    }

    /// Penalty n * c_max given to the mandatory node.
    pub fn mandatory_penalty(&self) -> f64 {
        self.big
    }

    /// All distinct probes evaluated so far, in evaluation order.
    pub fn evaluated(&self) -> &[LambdaProbe] {
        &self.evaluated
    }

    /// Probe index and whether it was newly computed.
    pub fn probe(&mut self, lambda: f64) -> Result<(usize, bool)> {
        if let Some(&i) = self.cache.get(&lambda.to_bits()) {
            return Ok((i, false));
        }
        let p = self.solve(lambda)?;
        self.evaluated.push(p);
        let i = self.evaluated.len() - 1;
        self.cache.insert(lambda.to_bits(), i);
        Ok((i, true))
    }

    fn solve(&self, lambda: f64) -> Result<LambdaProbe> {
        let n = self.nodes.len();
        let r = self.root_pos;
        let mut cost = vec![f64::INFINITY; n * n];
        for w in (0..n).filter(|&w| w != r) {
            let row = self.metric.row(self.nodes[w]);
            for u in (0..n).filter(|&u| u != w) {
                cost[w * n + u] = row[self.nodes[u]];
            }
        }
        let pen: Vec<f64> = (0..n)
            .map(|v| {
                if v == r {
                    0.0
                } else if Some(v) == self.mandatory_pos {
                    self.big
                } else {
                    lambda * self.weights[v]
                }
            })
            .collect();
        let job = DenseJob { n, root: r, cost, pen, key: None, tol: self.tol, labels: None };
        let res = job.run(None)?;
        let big_n = self.metric.len();
        let tree = Arborescence::from_parents(
            self.nodes[r],
            res.parent.iter().enumerate().filter_map(|(v, p)| {
                p.map(|u| {
                    let (gu, gv) = (self.nodes[u], self.nodes[v]);
                    (gv, gu, complete_arc_id(big_n, gu, gv))
                })
            }),
        );
        Ok(LambdaProbe {
            lambda,
            tree_cost: tree.metric_cost(self.metric),
            covered: tree.covered(),
            certificate_total: res.total,
            tree,
        })
    }
}

/// max{pi_u : u in N, min(c_ru, c_rw) + c_uw <= L}; 0 when no node qualifies.
pub fn lb_param(nodes: &[NodeId], metric: &DistMatrix, rewards: &[f64], budget: f64, root: NodeId, w: NodeId) -> f64 {
    nodes
        .iter()
        .filter(|&&u| metric.get(root, u).min(metric.get(root, w)) + metric.get(u, w) <= budget)
        .map(|&u| rewards[u])
        .fold(0.0, f64::max)
}

fn budget_tol(l: f64) -> f64 {
    1e-9 * l.abs().max(1.0)
}

/// Tree distribution with weighted cost `budget` whose atoms all contain `w`.
pub fn bin_search_pca(
    nodes: &[NodeId],
    metric: &DistMatrix,
    rewards: &[f64],
    budget: f64,
    root: NodeId,
    w: NodeId,
    config: &SearchConfig,
) -> Result<TreeDistribution> {
    let mut family = PcaFamily::new(metric, nodes, root, Some(w), Some(rewards))?;
    bin_search_in(&mut family, rewards, budget, config, &mut |_| ControlFlow::Continue(()))
}

/// [`bin_search_pca`] on a prepared family. `observer` sees each newly
/// evaluated probe and may stop the search (the result is then `aborted`).
pub fn bin_search_in(
    family: &mut PcaFamily,
    rewards: &[f64],
    budget: f64,
    config: &SearchConfig,
    observer: &mut dyn FnMut(&LambdaProbe) -> ControlFlow<()>,
) -> Result<TreeDistribution> {
    config.validate()?;
    let w_pos = family.mandatory_pos.ok_or_else(|| PcaError::Input("budgeted search needs a mandatory node".into()))?;
    let (r, w) = (family.root(), family.nodes[w_pos]);
    let metric = family.metric;
    // On metric inputs this is c(r,w); otherwise the cheapest r-w walk inside N.
    let d_rw = metric.shortest_paths_within(&family.nodes, r)[w];
    if !budget.is_finite() || d_rw > budget + budget_tol(budget) {
        return Err(PcaError::Infeasible(format!("distance {d_rw} from root to node {w} exceeds budget {budget}")));
    }
    let nodes = family.nodes.clone();
    let pi_rest: f64 = nodes.iter().filter(|&&v| v != r).map(|&v| rewards[v]).sum();
    if pi_rest <= 0.0 {
        return Err(PcaError::Degenerate("all non-root rewards are zero".into()));
    }
    let pi_min = nodes.iter().map(|&v| rewards[v]).filter(|&p| p > 0.0).fold(f64::INFINITY, f64::min);
    let high = family.big / pi_min;
    let low = 1.0 / pi_rest;
    let width = match config.termination {
        Termination::Practical => 1e-6,
        Termination::Theory => {
            let lb = lb_param(&nodes, metric, rewards, budget, r, w);
            (config.epsilon * low * low * lb).max(f64::EPSILON)
        }
        Termination::Exact { m } => low * low / (m * family.c_max.max(f64::MIN_POSITIVE)),
    };
    let tol = budget_tol(budget);
    let mut search = Search { family, probes: Vec::new(), observer };

    let hi = search.at(high)?;
    let Some(hi) = hi else { return Ok(search.aborted()) };
    if search.cost(hi) <= budget + tol {
        return Ok(search.single(hi));
    }
    let Some(mut lo) = search.at(low)? else { return Ok(search.aborted()) };
    if (search.cost(lo) - budget).abs() <= tol {
        return Ok(search.single(lo));
    }
    let mut lo_lambda = low;
    if search.cost(lo) > budget {
        // Only possible with non-integral costs; lambda = 0 reaches c(r,w) <= L.
        let Some(z) = search.at(0.0)? else { return Ok(search.aborted()) };
        if search.cost(z) > budget + tol {
            return Err(PcaError::Invariant("tree at lambda = 0 exceeds the budget".into()));
        }
        if (search.cost(z) - budget).abs() <= tol {
            return Ok(search.single(z));
        }
        lo = z;
        lo_lambda = 0.0;
    }
    let (mut hi, mut hi_lambda) = (hi, high);
    while hi_lambda - lo_lambda > width {
        let mid = 0.5 * (lo_lambda + hi_lambda);
        if mid <= lo_lambda || mid >= hi_lambda {
            break;
        }
        let Some(p) = search.at(mid)? else { return Ok(search.aborted()) };
        let c = search.cost(p);
        if (c - budget).abs() <= tol {
            return Ok(search.single(p));
        }
        if c < budget {
            (lo, lo_lambda) = (p, mid);
        } else {
            (hi, hi_lambda) = (p, mid);
        }
    }
    let (c1, c2) = (search.cost(lo), search.cost(hi));
    let a = (c2 - budget) / (c2 - c1);
    Ok(search.pair(a, lo, hi))
}

struct Search<'f, 'a, 'o> {
    family: &'f mut PcaFamily<'a>,
    probes: Vec<usize>,
    observer: &'o mut dyn FnMut(&LambdaProbe) -> ControlFlow<()>,
}

impl Search<'_, '_, '_> {
    fn at(&mut self, lambda: f64) -> Result<Option<usize>> {
        let (i, new) = self.family.probe(lambda)?;
        self.probes.push(i);
        if new && (self.observer)(&self.family.evaluated[i]).is_break() {
            return Ok(None);
        }
        Ok(Some(i))
    }

    fn cost(&self, i: usize) -> f64 {
        self.family.evaluated[i].tree_cost
    }

    fn coverage(&self, i: usize) -> usize {
        self.family.evaluated[i].covered.len()
    }

    fn trace(&self) -> Vec<LambdaProbe> {
        self.probes.iter().map(|&i| self.family.evaluated[i].clone()).collect()
    }

    fn aborted(&self) -> TreeDistribution {
        TreeDistribution { atoms: Vec::new(), probes: self.trace(), aborted: true }
    }

    fn single(&self, i: usize) -> TreeDistribution {
        TreeDistribution { atoms: vec![(1.0, self.family.evaluated[i].tree.clone())], probes: self.trace(), aborted: false }
    }

    fn pair(&self, a: f64, lo: usize, hi: usize) -> TreeDistribution {
        let t = |i: usize| self.family.evaluated[i].tree.clone();
        TreeDistribution { atoms: vec![(a, t(lo)), (1.0 - a, t(hi))], probes: self.trace(), aborted: false }
    }
}

/// Tree distribution with weighted coverage exactly k (root counted) and
/// weighted cost at most the cheapest walk collection covering k nodes.
pub fn b_search_kmlp(nodes: &[NodeId], metric: &DistMatrix, root: NodeId, k: usize, m: f64) -> Result<TreeDistribution> {
    let mut family = PcaFamily::new(metric, nodes, root, None, None)?;
    let n = family.nodes.len();
    if k == 0 || k > n {
        return Err(PcaError::Input(format!("k = {k} outside [1, {n}]")));
    }
    if !(m.is_finite() && m > 0.0) {
        return Err(PcaError::Input(format!("cost denominator {m} must be positive")));
    }
    let high = family.big;
    let width = 1.0 / ((n * n) as f64 * m);
    let mut noop = |_: &LambdaProbe| ControlFlow::Continue(());
    let mut search = Search { family: &mut family, probes: Vec::new(), observer: &mut noop };
    let mut lo = search.at(0.0)?.unwrap();
    if search.coverage(lo) == k {
        return Ok(search.single(lo));
    }
    let mut hi = search.at(high)?.unwrap();
    if search.coverage(hi) == k {
        return Ok(search.single(hi));
    }
    if search.coverage(lo) > k || search.coverage(hi) < k {
        return Err(PcaError::Invariant("coverage does not bracket k".into()));
    }
    let (mut lo_l, mut hi_l) = (0.0, high);
    while hi_l - lo_l > width {
        let mid = 0.5 * (lo_l + hi_l);
        if mid <= lo_l || mid >= hi_l {
            break;
        }
        let p = search.at(mid)?.unwrap();
        let c = search.coverage(p);
        if c == k {
            return Ok(search.single(p));
        }
        if c < k {
            (lo, lo_l) = (p, mid);
        } else {
            (hi, hi_l) = (p, mid);
        }
    }
    let (k1, k2) = (search.coverage(lo) as f64, search.coverage(hi) as f64);
    let a = (k2 - k as f64) / (k2 - k1);
    Ok(search.pair(a, lo, hi))
}
