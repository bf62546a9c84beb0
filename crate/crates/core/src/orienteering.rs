//! Rooted, point-to-point and cycle orienteering via tree distributions,
//! with per-guess Lagrangian upper bounds.
//!
//! Guesses w run in chunks of [`CHUNK`]; guesses inside a chunk run in
//! parallel and prune against the best value of earlier chunks or their own,
//! so results do not depend on the thread count.

use std::ops::ControlFlow;

use rayon::prelude::*;

use crate::error::{PcaError, Result};
use crate::graph::{Arborescence, DistMatrix, NodeId};
use crate::lagrange::{bin_search_in, LambdaProbe, PcaFamily, SearchConfig};

pub const CHUNK: usize = 8;
const FEAS_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RouteKind {
    RootedPath,
    RtPath,
    Cycle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrienteeringInstance {
    pub metric: DistMatrix,
    pub rewards: Vec<f64>,
    pub root: NodeId,
    pub end: Option<NodeId>,
    pub budget: f64,
    non_metric: bool,
}

impl OrienteeringInstance {
    pub fn new(metric: DistMatrix, rewards: Vec<f64>, root: NodeId, end: Option<NodeId>, budget: f64) -> Result<Self> {
        let n = metric.len();
        if rewards.len() != n {
            return Err(PcaError::Input(format!("{} rewards for {n} nodes", rewards.len())));
        }
        if let Some(v) = rewards.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(PcaError::Input(format!("reward of node {v} is negative or not finite")));
        }
        if root >= n {
            return Err(PcaError::Input(format!("root {root} out of range")));
        }
        if let Some(t) = end {
            if t >= n || t == root {
                return Err(PcaError::Input(format!("end node {t} must differ from the root and be in range")));
            }
        }
        if !(budget.is_finite() && budget >= 0.0) {
            return Err(PcaError::Input(format!("budget {budget} must be finite and >= 0")));
        }
        let non_metric = metric.triangle_violation(1e-9).is_some();
        Ok(OrienteeringInstance { metric, rewards, root, end, budget, non_metric })
    }

    pub fn is_metric(&self) -> bool {
        !self.non_metric
    }

    pub fn len(&self) -> usize {
        self.metric.len()
    }

    pub fn is_empty(&self) -> bool {
        self.metric.is_empty()
    }

    pub fn reward_of(&self, nodes: &[NodeId]) -> f64 {
        let mut seen = vec![false; self.len()];
        nodes.iter().filter(|&&v| !std::mem::replace(&mut seen[v], true)).map(|&v| self.rewards[v]).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutedSolution {
    pub kind: RouteKind,
    /// Node sequence; cycles end with the root again.
    pub nodes: Vec<NodeId>,
    pub reward: f64,
    pub cost: f64,
}

impl RoutedSolution {
    fn new(kind: RouteKind, nodes: Vec<NodeId>, inst: &OrienteeringInstance) -> Self {
        let cost = inst.metric.walk_cost(&nodes);
        let reward = inst.reward_of(&nodes);
        RoutedSolution { kind, nodes, reward, cost }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuessBound {
    pub w: NodeId,
    /// pi of the candidate set for this guess.
    pub candidate_reward: f64,
    /// Named formula terms, e.g. the best Lagrangian slack seen.
    pub terms: Vec<(&'static str, f64)>,
    /// Upper bound on any route whose guess is w.
    pub value: f64,
    pub probes: usize,
    pub pruned: bool,
    /// Best reward found under this guess.
    pub best_reward: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperBoundReport {
    pub guesses: Vec<GuessBound>,
    /// Max over guesses of the per-guess bound.
    pub aggregate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrienteeringOutcome {
    pub solution: RoutedSolution,
    pub bound: UpperBoundReport,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub search: SearchConfig,
    pub prune: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { search: SearchConfig::default(), prune: true }
    }
}

/// Simple root-to-`terminal` sequence over the tree's nodes: preorder with
/// ascending children, the child toward `terminal` last, and `terminal`
/// moved to the end.
pub fn tree_to_path(tree: &Arborescence, terminal: NodeId) -> Result<Vec<NodeId>> {
    let spine = tree
        .path_to(terminal)
        .ok_or_else(|| PcaError::Structure(format!("terminal {terminal} is not covered by the tree")))?;
    let on_spine: std::collections::BTreeSet<NodeId> = spine.iter().copied().collect();
    let children = tree.children();
    let mut out = Vec::with_capacity(tree.arc_count() + 1);
    let mut stack = vec![tree.root()];
    while let Some(u) = stack.pop() {
        if u != terminal {
            out.push(u);
        }
        if let Some(ch) = children.get(&u) {
            // Stack pops in reverse: push the spine child first so it comes last.
            let (sp, rest): (Vec<NodeId>, Vec<NodeId>) = ch.iter().partition(|c| on_spine.contains(c));
            stack.extend(sp);
            stack.extend(rest.iter().rev());
        }
    }
    out.push(terminal);
    Ok(out)
}

/// Preorder (children ascending) closed back at the root.
fn double_tree(tree: &Arborescence) -> Vec<NodeId> {
    let children = tree.children();
    let mut out = Vec::with_capacity(tree.arc_count() + 2);
    let mut stack = vec![tree.root()];
    while let Some(u) = stack.pop() {
        out.push(u);
        if let Some(ch) = children.get(&u) {
            stack.extend(ch.iter().rev());
        }
    }
    out.push(tree.root());
    out
}

/// Best contiguous Q of `path[1..]` such that the walk path[0], Q has regret
/// (cost minus direct distance between its ends) at most `regret_budget`.
/// Ties: shorter Q, then earlier start. Returns path[0] followed by Q.
pub fn extract_regret_bounded_subpath(
    path: &[NodeId],
    regret_budget: f64,
    metric: &DistMatrix,
    rewards: &[f64],
) -> Vec<NodeId> {
    let Some(&r) = path.first() else { return Vec::new() };
    let m = path.len() - 1;
    let mut pc = vec![0.0; m + 1];
    let mut pr = vec![0.0; m + 1];
    for i in 1..=m {
        pc[i] = pc[i - 1] + if i >= 2 { metric.get(path[i - 1], path[i]) } else { 0.0 };
        pr[i] = pr[i - 1] + rewards[path[i]];
    }
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 1..=m {
        let head = metric.get(r, path[i]);
        for j in i..=m {
            let regret = head + (pc[j] - pc[i]) - metric.get(r, path[j]);
            if regret > regret_budget + FEAS_TOL {
                continue;
            }
            let reward = pr[j] - pr[i - 1];
            let better = match best {
                None => true,
                Some((br, bi, bj)) => reward > br || (reward == br && (j - i < bj - bi || (j - i == bj - bi && i < bi))),
            };
            if better {
                best = Some((reward, i, j));
            }
        }
    }
    let mut out = vec![r];
    if let Some((reward, i, j)) = best {
        if reward > 0.0 {
            out.extend_from_slice(&path[i..=j]);
        }
    }
    out
}

/// Running state of one guess.
struct GuessState<'i> {
    inst: &'i OrienteeringInstance,
    kind: RouteKind,
    best: Option<RoutedSolution>,
    threshold: f64,
    probes: usize,
    pruned: bool,
}

impl GuessState<'_> {
    fn offer(&mut self, nodes: Vec<NodeId>) {
        let sol = RoutedSolution::new(self.kind, nodes, self.inst);
        if sol.cost > self.inst.budget + FEAS_TOL {
            return;
        }
        if self.best.as_ref().is_none_or(|b| sol.reward > b.reward) {
            self.threshold = self.threshold.max(sol.reward);
            self.best = Some(sol);
        }
    }

    fn best_reward(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.reward)
    }
}

fn slack(budget: f64, p: &LambdaProbe) -> Option<f64> {
    (p.lambda > 0.0).then(|| (budget - p.certificate_total) / p.lambda)
}

struct GuessRun {
    best: Option<RoutedSolution>,
    bound: GuessBound,
}

/// Guess w with its candidate set and shortest in-set distances r-w and
/// w-t (plain distances on metric inputs).
struct Guess {
    w: NodeId,
    nodes: Vec<NodeId>,
    d_rw: f64,
    d_wt: f64,
}

fn make_guesses(
    inst: &OrienteeringInstance,
    skip: &[NodeId],
    order: impl Fn(NodeId) -> f64,
    fits: impl Fn(f64, f64) -> bool,
) -> Vec<Guess> {
    let mut ws: Vec<NodeId> = (0..inst.len()).filter(|v| !skip.contains(v)).collect();
    ws.sort_by(|&a, &b| order(a).total_cmp(&order(b)).then(a.cmp(&b)));
    ws.into_iter()
        .filter_map(|w| {
            let limit = order(w);
            let nodes: Vec<NodeId> = (0..inst.len()).filter(|&u| order(u) <= limit).collect();
            let d_rw = inst.metric.shortest_paths_within(&nodes, inst.root)[w];
            let d_wt = inst.end.map_or(0.0, |t| inst.metric.shortest_paths_within(&nodes, t)[w]);
            fits(d_rw, d_wt).then_some(Guess { w, nodes, d_rw, d_wt })
        })
        .collect()
}

/// Run guesses in deterministic chunks; merge in guess order (ties keep the
/// earlier guess).
fn run_guesses(
    guesses: &[Guess],
    initial: RoutedSolution,
    base_bounds: Vec<GuessBound>,
    run: &(dyn Fn(&Guess, f64) -> Result<GuessRun> + Sync),
) -> Result<OrienteeringOutcome> {
    let mut best = initial;
    let mut bounds = base_bounds;
    for chunk in guesses.chunks(CHUNK) {
        let threshold = best.reward;
        let runs: Vec<Result<GuessRun>> = chunk.par_iter().map(|g| run(g, threshold)).collect();
        for r in runs {
            let r = r?;
            if let Some(s) = r.best {
                if s.reward > best.reward {
                    best = s;
                }
            }
            bounds.push(r.bound);
        }
    }
    let aggregate = bounds.iter().map(|b| b.value).fold(f64::NEG_INFINITY, f64::max);
    Ok(OrienteeringOutcome { solution: best, bound: UpperBoundReport { guesses: bounds, aggregate } })
}

fn has_positive_reward(inst: &OrienteeringInstance, nodes: &[NodeId], root: NodeId) -> bool {
    nodes.iter().any(|&v| v != root && inst.rewards[v] > 0.0)
}

/// Best root path of cost at most B.
pub fn solve_rooted(inst: &OrienteeringInstance, config: &SolverConfig) -> Result<OrienteeringOutcome> {
    let (r, b) = (inst.root, inst.budget);
    let m = &inst.metric;
    let guesses = make_guesses(inst, &[r], |v| m.get(r, v), |d, _| d <= b + FEAS_TOL);
    let trivial = RoutedSolution::new(RouteKind::RootedPath, vec![r], inst);
    let root_bound = GuessBound {
        w: r,
        candidate_reward: inst.rewards[r],
        terms: Vec::new(),
        value: inst.rewards[r],
        probes: 0,
        pruned: false,
        best_reward: inst.rewards[r],
    };
    let run = |g: &Guess, prior: f64| -> Result<GuessRun> {
        let (w, nodes, crw) = (g.w, &g.nodes, g.d_rw);
        let pi_n = inst.reward_of(nodes);
        let mut st = GuessState { inst, kind: RouteKind::RootedPath, best: None, threshold: prior, probes: 0, pruned: false };
        let mut best_slack = f64::INFINITY;
        if has_positive_reward(inst, nodes, r) {
            let mut fam = PcaFamily::new(m, nodes, r, Some(w), Some(&inst.rewards))?;
            let mut obs = |p: &LambdaProbe| {
                st.probes += 1;
                if let Ok(path) = tree_to_path(&p.tree, w) {
                    st.offer(extract_regret_bounded_subpath(&path, b - crw, m, &inst.rewards));
                }
                if let Some(s) = slack(b, p) {
                    best_slack = best_slack.min(s);
                }
                prune_check(config, pi_n + best_slack, pi_n, &mut st)
            };
            bin_search_in(&mut fam, &inst.rewards, b, &config.search, &mut obs)?;
        }
        let value = pi_n.min(pi_n + best_slack);
        Ok(finish(st, w, pi_n, value, vec![("lagrange_slack", best_slack)]))
    };
    run_guesses(&guesses, trivial, vec![root_bound], &run)
}

fn prune_check(config: &SolverConfig, ub: f64, cap: f64, st: &mut GuessState) -> ControlFlow<()> {
    if config.prune && ub.min(cap) <= st.threshold {
        st.pruned = true;
        return ControlFlow::Break(());
    }
    ControlFlow::Continue(())
}

fn finish(st: GuessState, w: NodeId, pi_n: f64, value: f64, terms: Vec<(&'static str, f64)>) -> GuessRun {
    let best_reward = st.best_reward();
    GuessRun {
        bound: GuessBound { w, candidate_reward: pi_n, terms, value, probes: st.probes, pruned: st.pruned, best_reward },
        best: st.best,
    }
}

/// Best r-t path of cost at most B.
pub fn solve_p2p(inst: &OrienteeringInstance, config: &SolverConfig) -> Result<OrienteeringOutcome> {
    let (r, b) = (inst.root, inst.budget);
    let t = inst.end.ok_or_else(|| PcaError::Input("point-to-point orienteering needs an end node".into()))?;
    let m = &inst.metric;
    let crt = m.get(r, t);
    if crt > b + FEAS_TOL {
        return Err(PcaError::Infeasible(format!("c(r,t) = {crt} exceeds budget {b}")));
    }
    let detour = |v: NodeId| m.get(r, v) + m.get(v, t);
    let guesses = make_guesses(inst, &[r, t], detour, |a, c| a + c <= b + FEAS_TOL);
    let trivial = RoutedSolution::new(RouteKind::RtPath, vec![r, t], inst);
    let base_set: Vec<NodeId> = (0..inst.len()).filter(|&u| detour(u) <= crt).collect();
    let base_pi = inst.reward_of(&base_set);
    let base = |w| GuessBound {
        w,
        candidate_reward: base_pi,
        terms: Vec::new(),
        value: base_pi,
        probes: 0,
        pruned: false,
        best_reward: trivial.reward,
    };
    let bases = vec![base(r), base(t)];
    let run = |g: &Guess, prior: f64| -> Result<GuessRun> {
        let (w, nodes, crw, cwt) = (g.w, &g.nodes, g.d_rw, g.d_wt);
        let pi_n = inst.reward_of(nodes);
        let regret = b - crw - cwt;
        let mut st = GuessState { inst, kind: RouteKind::RtPath, best: None, threshold: prior, probes: 0, pruned: false };
        // Smallest (B - Y)/lambda over all probes, and per side with its own budget.
        let (mut any, mut side_r, mut side_t) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let running = |any: f64, sr: f64, st_: f64| (pi_n + any).min(pi_n + sr + pi_n + st_);
        for (root, other, budget) in [(r, t, b - cwt), (t, r, b - crw)] {
            if st.pruned || !has_positive_reward(inst, nodes, root) {
                continue;
            }
            let mut fam = PcaFamily::new(m, nodes, root, Some(w), Some(&inst.rewards))?;
            let mut obs = |p: &LambdaProbe| {
                st.probes += 1;
                if let Ok(mut path) = tree_to_path(&p.tree, w) {
                    path.retain(|&v| v != other);
                    let mut seq = extract_regret_bounded_subpath(&path, regret, m, &inst.rewards);
                    if root == t {
                        seq.reverse();
                        seq.insert(0, r);
                    } else {
                        seq.push(t);
                    }
                    st.offer(seq);
                }
                if let Some(s) = slack(b, p) {
                    any = any.min(s);
                }
                if let Some(s) = slack(budget, p) {
                    if root == r {
                        side_r = side_r.min(s);
                    } else {
                        side_t = side_t.min(s);
                    }
                }
                prune_check(config, running(any, side_r, side_t), pi_n, &mut st)
            };
            bin_search_in(&mut fam, &inst.rewards, budget, &config.search, &mut obs)?;
        }
        let value = pi_n.min(running(any, side_r, side_t));
        Ok(finish(st, w, pi_n, value, vec![("lagrange_slack", any), ("slack_r", side_r), ("slack_t", side_t)]))
    };
    run_guesses(&guesses, trivial, bases, &run)
}

/// Best cycle through the root of cost at most B.
pub fn solve_cycle(inst: &OrienteeringInstance, config: &SolverConfig) -> Result<OrienteeringOutcome> {
    let (r, b) = (inst.root, inst.budget);
    let m = &inst.metric;
    let guesses = make_guesses(inst, &[r], |v| m.get(r, v), |d, _| d <= b / 2.0 + FEAS_TOL);
    let trivial = RoutedSolution::new(RouteKind::Cycle, vec![r], inst);
    let root_bound = GuessBound {
        w: r,
        candidate_reward: inst.rewards[r],
        terms: Vec::new(),
        value: inst.rewards[r],
        probes: 0,
        pruned: false,
        best_reward: inst.rewards[r],
    };
    let run = |g: &Guess, prior: f64| -> Result<GuessRun> {
        let (w, nodes, crw) = (g.w, &g.nodes, g.d_rw);
        let pi_n = inst.reward_of(nodes);
        let ub4_base = 2.0 * pi_n - inst.rewards[r] - inst.rewards[w];
        let mut st = GuessState { inst, kind: RouteKind::Cycle, best: None, threshold: prior, probes: 0, pruned: false };
        let (mut s1, mut s4) = (f64::INFINITY, f64::INFINITY);
        let mut ub = f64::INFINITY;
        if has_positive_reward(inst, nodes, r) {
            let mut fam = PcaFamily::new(m, nodes, r, Some(w), Some(&inst.rewards))?;
            for budget in [b / 2.0, b - crw] {
                if st.pruned {
                    break;
                }
                let mut obs = |p: &LambdaProbe| {
                    st.probes += 1;
                    if p.tree_cost <= b / 2.0 + FEAS_TOL {
                        st.offer(double_tree(&p.tree));
                    }
                    if let Ok(path) = tree_to_path(&p.tree, w) {
                        let mut seq = extract_regret_bounded_subpath(&path, b - 2.0 * crw, m, &inst.rewards);
                        if seq.len() > 1 {
                            seq.push(r);
                        }
                        st.offer(seq);
                    }
                    if p.lambda > 0.0 {
                        let a = (b - p.certificate_total) / p.lambda;
                        let c = (b - 2.0 * p.certificate_total) / p.lambda;
                        s1 = s1.min(a);
                        s4 = s4.min(c);
                        ub = ub.min((pi_n + a).min(ub4_base + c));
                    }
                    prune_check(config, ub, pi_n, &mut st)
                };
                bin_search_in(&mut fam, &inst.rewards, budget, &config.search, &mut obs)?;
            }
        }
        let value = pi_n.min(ub);
        Ok(finish(st, w, pi_n, value, vec![("ub1_slack", s1), ("ub4_slack", s4)]))
    };
    run_guesses(&guesses, trivial, vec![root_bound], &run)
}

pub fn solve(inst: &OrienteeringInstance, kind: RouteKind, config: &SolverConfig) -> Result<OrienteeringOutcome> {
    match kind {
        RouteKind::RootedPath => solve_rooted(inst, config),
        RouteKind::RtPath => solve_p2p(inst, config),
        RouteKind::Cycle => solve_cycle(inst, config),
    }
}
