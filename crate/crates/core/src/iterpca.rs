//! Iterative simplification for prize-collecting arborescences.
//!
//! [`iter_pca`] runs a dense, non-recursive engine: each level stores only
//! what lifting needs (theta, the shortcut rows or the contraction maps),
//! then trees are lifted bottom-up. The public step operations
//! ([`subtract_theta`], [`classify`], [`shortcut_node`], [`contract_cycle`],
//! [`lift_tree`]) work on sparse [`PcwInstance`]s and compose into
//! [`iter_pca_stepwise`], a reference used for cross-checking.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{PcaError, Result};
use crate::graph::{edmonds, Arborescence, Arc, ArcId, Digraph, NodeId, PcwInstance};

const INF: f64 = f64::INFINITY;

/// Sparse vector y over sets of original nodes, plus its total Y.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Certificate {
    entries: BTreeMap<Vec<NodeId>, f64>,
    total: f64,
}

impl Certificate {
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[NodeId], f64)> {
        self.entries.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    pub fn get(&self, set: &[NodeId]) -> f64 {
        self.entries.get(set).copied().unwrap_or(0.0)
    }

    fn add(&mut self, set: &[NodeId], value: f64) {
        self.total += value;
        if value > 0.0 {
            *self.entries.entry(set.to_vec()).or_insert(0.0) += value;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcaOutput {
    pub tree: Arborescence,
    pub certificate: Certificate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThetaVector {
    /// theta[v]; 0 for the root.
    pub theta: Vec<f64>,
}

impl ThetaVector {
    pub fn sum(&self) -> f64 {
        self.theta.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcOrigin {
    Direct(ArcId),
    Composite { into_v: ArcId, out_of_v: ArcId },
}

/// What a reduction did, in terms of pre-reduction node and arc ids.
#[derive(Debug, Clone, PartialEq)]
pub enum ReductionTrace {
    Shortcut {
        v: NodeId,
        /// Reduced node id -> pre-reduction node id.
        node_map: Vec<NodeId>,
        /// Reduced arc id -> origin.
        origins: Vec<ArcOrigin>,
    },
    Contract {
        cycle: Vec<ArcId>,
        members: Vec<NodeId>,
        supernode: NodeId,
        /// Reduced node id -> pre-reduction node id (supernode -> lowest member).
        node_map: Vec<NodeId>,
        /// Reduced arc id -> the pre-reduction arc attaining its cost.
        origins: Vec<ArcId>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classification {
    ZeroPenaltyNode(NodeId),
    ZeroCycle(Vec<ArcId>),
    ZeroArborescence(Arborescence),
}

fn check_input(inst: &PcwInstance) -> Result<()> {
    let n = inst.node_count();
    if inst.penalties.len() != n || inst.labels.len() != n {
        return Err(PcaError::Input("penalty/label vectors do not match the node count".into()));
    }
    if let Some(v) = inst.penalties.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
        return Err(PcaError::Input(format!("penalty of node {v} is negative or not finite")));
    }
    if let Some(a) = inst.graph.arcs().iter().position(|a| !(a.cost.is_finite() && a.cost >= 0.0)) {
        return Err(PcaError::Input(format!("arc {a} has a negative or non-finite cost")));
    }
    Ok(())
}

fn snap(x: f64, tol: f64) -> f64 {
    if x <= tol {
        0.0
    } else {
        x
    }
}

/// theta_v = min(min in-arc cost, penalty); costs into v and pi_v drop by theta_v.
pub fn subtract_theta(inst: &PcwInstance) -> Result<(PcwInstance, ThetaVector)> {
    check_input(inst)?;
    let n = inst.node_count();
    let root = inst.root();
    let mut min_in = vec![INF; n];
    for a in inst.graph.arcs() {
        min_in[a.head] = min_in[a.head].min(a.cost);
    }
    let theta: Vec<f64> = (0..n).map(|v| if v == root { 0.0 } else { min_in[v].min(inst.penalties[v]) }).collect();
    let tol = inst.zero_tol;
    let arcs = inst
        .graph
        .arcs()
        .iter()
        .map(|a| Arc { cost: snap(a.cost - theta[a.head], tol), ..*a })
        .collect();
    let penalties = (0..n).map(|v| if v == root { 0.0 } else { snap(inst.penalties[v] - theta[v], tol) }).collect();
    let out = PcwInstance {
        graph: Digraph::new(n, root, arcs)?,
        penalties,
        labels: inst.labels.clone(),
        zero_tol: tol,
    };
    Ok((out, ThetaVector { theta }))
}

/// Case selection on a theta-reduced instance.
pub fn classify(inst: &PcwInstance) -> Result<Classification> {
    let n = inst.node_count();
    let root = inst.root();
    let tol = inst.zero_tol;
    if let Some(v) = (0..n).find(|&v| v != root && inst.penalties[v] <= tol) {
        return Ok(Classification::ZeroPenaltyNode(v));
    }
    let mut sel: Vec<Option<ArcId>> = vec![None; n];
    for (i, a) in inst.graph.arcs().iter().enumerate() {
        if a.head == root || a.cost > tol {
            continue;
        }
        match sel[a.head] {
            Some(b) if inst.graph.arc(b).tail <= a.tail => {}
            _ => sel[a.head] = Some(i),
        }
    }
    if let Some(v) = (0..n).find(|&v| v != root && sel[v].is_none()) {
        return Err(PcaError::Invariant(format!("node {v} has positive reduced penalty and no zero in-arc")));
    }
    let tail = |v: NodeId| inst.graph.arc(sel[v].unwrap()).tail;
    if let Some(cycle) = find_selection_cycle(n, root, tail) {
        let k = cycle.len();
        let arcs = (0..k).map(|i| sel[cycle[(i + 1) % k]].unwrap()).collect();
        return Ok(Classification::ZeroCycle(arcs));
    }
    Ok(Classification::ZeroArborescence(Arborescence::from_parents(
        root,
        (0..n).filter(|&v| v != root).map(|v| (v, tail(v), sel[v].unwrap())),
    )))
}

/// First cycle of the functional graph v -> tail(v), scanning start nodes in
/// ascending order. Returned in forward (arc) order starting at its lowest node.
fn find_selection_cycle(n: usize, root: usize, tail: impl Fn(usize) -> usize) -> Option<Vec<usize>> {
    let mut stamp = vec![usize::MAX; n];
    for s in 0..n {
        if s == root || stamp[s] != usize::MAX {
            continue;
        }
        let mut v = s;
        while v != root && stamp[v] == usize::MAX {
            stamp[v] = s;
            v = tail(v);
        }
        if v != root && stamp[v] == s {
            // Walking tails goes against arc direction.
            let mut back = vec![v];
            let mut x = tail(v);
            while x != v {
                back.push(x);
                x = tail(x);
            }
            back.reverse();
            let lo = (0..back.len()).min_by_key(|&i| back[i]).unwrap();
            back.rotate_left(lo);
            return Some(back);
        }
    }
    None
}

/// Cheapest arc per ordered pair (ties: lower arc id), as an n*n table indexed [u*n+w].
fn cheapest_arcs(graph: &Digraph) -> Vec<Option<ArcId>> {
    let n = graph.node_count();
    let mut best: Vec<Option<ArcId>> = vec![None; n * n];
    for (i, a) in graph.arcs().iter().enumerate() {
        let slot = &mut best[a.tail * n + a.head];
        match *slot {
            Some(b) if graph.arc(b).cost <= a.cost => {}
            _ => *slot = Some(i),
        }
    }
    best
}

/// Remove a zero-penalty node v, replacing u -> v -> w by composite arcs when
/// strictly cheaper than the direct arc.
pub fn shortcut_node(inst: &PcwInstance, v: NodeId) -> Result<(PcwInstance, ReductionTrace)> {
    let n = inst.node_count();
    let root = inst.root();
    if v >= n || v == root {
        return Err(PcaError::Input(format!("cannot shortcut node {v}")));
    }
    if inst.penalties[v] > inst.zero_tol {
        return Err(PcaError::Input(format!("node {v} has positive penalty {}", inst.penalties[v])));
    }
    let best = cheapest_arcs(&inst.graph);
    let cost = |a: Option<ArcId>| a.map_or(INF, |a| inst.graph.arc(a).cost);
    let node_map: Vec<NodeId> = (0..n).filter(|&x| x != v).collect();
    let new_id = |x: NodeId| x - usize::from(x > v);
    let mut arcs = Vec::new();
    let mut origins = Vec::new();
    for &u in &node_map {
        for &w in &node_map {
            if u == w {
                continue;
            }
            let direct = best[u * n + w];
            let (a_in, a_out) = (best[u * n + v], best[v * n + w]);
            let composite = if w == root { INF } else { cost(a_in) + cost(a_out) };
            if composite < cost(direct) {
                arcs.push(Arc { tail: new_id(u), head: new_id(w), cost: composite });
                origins.push(ArcOrigin::Composite { into_v: a_in.unwrap(), out_of_v: a_out.unwrap() });
            } else if let Some(a) = direct {
                arcs.push(Arc { tail: new_id(u), head: new_id(w), cost: inst.graph.arc(a).cost });
                origins.push(ArcOrigin::Direct(a));
            }
        }
    }
    let out = PcwInstance {
        graph: Digraph::new(n - 1, new_id(root), arcs)?,
        penalties: node_map.iter().map(|&x| inst.penalties[x]).collect(),
        labels: node_map.iter().map(|&x| inst.labels[x].clone()).collect(),
        zero_tol: inst.zero_tol,
    };
    Ok((out, ReductionTrace::Shortcut { v, node_map, origins }))
}

/// Contract a zero-cost cycle (given as consecutive arcs) into one supernode.
pub fn contract_cycle(inst: &PcwInstance, z: &[ArcId]) -> Result<(PcwInstance, ReductionTrace)> {
    let n = inst.node_count();
    let root = inst.root();
    let g = &inst.graph;
    if z.len() < 2 || z.iter().any(|&a| a >= g.arcs().len()) {
        return Err(PcaError::Input("cycle must consist of at least two existing arcs".into()));
    }
    let members: Vec<NodeId> = z.iter().map(|&a| g.arc(a).tail).collect();
    let mut in_cycle = vec![false; n];
    for (i, &a) in z.iter().enumerate() {
        let arc = g.arc(a);
        if arc.head != g.arc(z[(i + 1) % z.len()]).tail {
            return Err(PcaError::Input("arcs do not form a directed cycle".into()));
        }
        if arc.cost > inst.zero_tol {
            return Err(PcaError::Input(format!("cycle arc {a} has nonzero reduced cost")));
        }
        if in_cycle[arc.tail] {
            return Err(PcaError::Input("cycle repeats a node".into()));
        }
        in_cycle[arc.tail] = true;
    }
    if in_cycle[root] {
        return Err(PcaError::Input("cycle passes through the root".into()));
    }
    let lowest = *members.iter().min().unwrap();
    let node_map: Vec<NodeId> = (0..n).filter(|&x| !in_cycle[x] || x == lowest).collect();
    let mut new_of = vec![usize::MAX; n];
    for (i, &x) in node_map.iter().enumerate() {
        new_of[x] = i;
    }
    let sup = new_of[lowest];
    for &x in &members {
        new_of[x] = sup;
    }
    // Cheapest pre-reduction arc per reduced ordered pair.
    let m = node_map.len();
    let mut best: Vec<Option<ArcId>> = vec![None; m * m];
    for (i, a) in g.arcs().iter().enumerate() {
        let (t, h) = (new_of[a.tail], new_of[a.head]);
        if t == h || (t == sup && a.head == root) {
            continue;
        }
        let slot = &mut best[t * m + h];
        match *slot {
            Some(b) if g.arc(b).cost <= a.cost => {}
            _ => *slot = Some(i),
        }
    }
    let mut arcs = Vec::new();
    let mut origins = Vec::new();
    for t in 0..m {
        for h in 0..m {
            if let Some(a) = best[t * m + h] {
                arcs.push(Arc { tail: t, head: h, cost: g.arc(a).cost });
                origins.push(a);
            }
        }
    }
    let mut penalties: Vec<f64> = node_map.iter().map(|&x| inst.penalties[x]).collect();
    penalties[sup] = members.iter().map(|&x| inst.penalties[x]).sum();
    let mut labels: Vec<Vec<NodeId>> = node_map.iter().map(|&x| inst.labels[x].clone()).collect();
    let mut merged: Vec<NodeId> = members.iter().flat_map(|&x| inst.labels[x].iter().copied()).collect();
    merged.sort_unstable();
    labels[sup] = merged;
    let out = PcwInstance {
        graph: Digraph::new(m, new_of[root], arcs)?,
        penalties,
        labels,
        zero_tol: inst.zero_tol,
    };
    Ok((out, ReductionTrace::Contract { cycle: z.to_vec(), members, supernode: sup, node_map, origins }))
}

/// Map a tree of the reduced instance back onto `pre_inst`.
pub fn lift_tree(trace: &ReductionTrace, reduced_tree: &Arborescence, pre_inst: &PcwInstance) -> Result<Arborescence> {
    reduced_tree.validate_shape()?;
    let g = &pre_inst.graph;
    let mismatch = || PcaError::Structure("reduced tree does not belong to this reduction".into());
    let mut chosen: BTreeSet<ArcId> = BTreeSet::new();
    match trace {
        ReductionTrace::Shortcut { origins, .. } => {
            for a in reduced_tree.arc_ids() {
                match origins.get(a).ok_or_else(mismatch)? {
                    ArcOrigin::Direct(x) => {
                        chosen.insert(*x);
                    }
                    ArcOrigin::Composite { into_v, out_of_v } => {
                        chosen.insert(*into_v);
                        chosen.insert(*out_of_v);
                    }
                }
            }
        }
        ReductionTrace::Contract { cycle, supernode, origins, .. } => {
            for a in reduced_tree.arc_ids() {
                chosen.insert(*origins.get(a).ok_or_else(mismatch)?);
            }
            if !reduced_tree.contains(*supernode) {
                let parents = chosen.iter().map(|&a| (g.arc(a).head, g.arc(a).tail, a));
                return Ok(Arborescence::from_parents(g.root(), parents));
            }
            chosen.extend(cycle.iter().copied());
        }
    }
    let mut ids: Vec<ArcId> = chosen.into_iter().collect();
    ids.sort_by_key(|&a| (g.arc(a).tail, g.arc(a).head, a));
    let mut active = vec![false; g.node_count()];
    active[g.root()] = true;
    for &a in &ids {
        active[g.arc(a).head] = true;
    }
    let local: Vec<(usize, usize, f64)> = ids.iter().map(|&a| (g.arc(a).tail, g.arc(a).head, g.arc(a).cost)).collect();
    let sel = edmonds(g.node_count(), g.root(), &local, &active).map_err(PcaError::Unreachable)?;
    Ok(Arborescence::from_parents(
        g.root(),
        sel.iter().enumerate().filter_map(|(v, s)| s.map(|i| (v, local[i].0, ids[i]))),
    ))
}

/// Reference implementation composed from the public step operations.
pub fn iter_pca_stepwise(inst: &PcwInstance) -> Result<PcaOutput> {
    check_input(inst)?;
    let mut certificate = Certificate::default();
    let tree = stepwise(inst, &mut certificate)?;
    Ok(PcaOutput { tree, certificate })
}

fn stepwise(inst: &PcwInstance, cert: &mut Certificate) -> Result<Arborescence> {
    let n = inst.node_count();
    let root = inst.root();
    if n == 1 {
        return Ok(Arborescence::empty(root));
    }
    if n == 2 {
        let v = 1 - root;
        let best = inst.graph.arcs().iter().enumerate().filter(|(_, a)| a.tail == root && a.head == v).fold(
            None,
            |acc: Option<(ArcId, f64)>, (i, a)| match acc {
                Some((_, c)) if c <= a.cost => acc,
                _ => Some((i, a.cost)),
            },
        );
        let c = best.map_or(INF, |b| b.1);
        cert.add(&inst.labels[v], c.min(inst.penalties[v]));
        return Ok(match best {
            Some((a, c)) if inst.penalties[v] > c => Arborescence::from_parents(root, [(v, root, a)]),
            _ => Arborescence::empty(root),
        });
    }
    let (red, theta) = subtract_theta(inst)?;
    let tree = match classify(&red)? {
        Classification::ZeroPenaltyNode(v) => {
            let (bar, trace) = shortcut_node(&red, v)?;
            let t = stepwise(&bar, cert)?;
            lift_tree(&trace, &t, &red)?
        }
        Classification::ZeroCycle(z) => {
            let (bar, trace) = contract_cycle(&red, &z)?;
            let t = stepwise(&bar, cert)?;
            lift_tree(&trace, &t, &red)?
        }
        Classification::ZeroArborescence(t) => t,
    };
    for v in (0..n).filter(|&v| v != root) {
        cert.add(&inst.labels[v], theta.theta[v]);
    }
    Ok(tree)
}

/// IterPCA on an arbitrary digraph instance.
pub fn iter_pca(inst: &PcwInstance) -> Result<PcaOutput> {
    iter_pca_impl(inst, None)
}

/// Like [`iter_pca`], also returning one text line per reduction level.
pub fn iter_pca_traced(inst: &PcwInstance) -> Result<(PcaOutput, Vec<String>)> {
    let mut lines = Vec::new();
    let out = iter_pca_impl(inst, Some(&mut lines))?;
    Ok((out, lines))
}

fn iter_pca_impl(inst: &PcwInstance, trace: Option<&mut Vec<String>>) -> Result<PcaOutput> {
    check_input(inst)?;
    let n = inst.node_count();
    let root = inst.root();
    let best = cheapest_arcs(&inst.graph);
    let mut cost = vec![INF; n * n];
    let mut key = vec![usize::MAX; n * n];
    for u in 0..n {
        for w in 0..n {
            if let Some(a) = best[u * n + w] {
                if w != root {
                    cost[w * n + u] = inst.graph.arc(a).cost;
                    key[w * n + u] = a;
                }
            }
        }
    }
    let pen = (0..n).map(|v| inst.penalty(v)).collect();
    let job = DenseJob { n, root, cost, pen, key: Some(&key), tol: inst.zero_tol, labels: Some(&inst.labels) };
    let res = job.run(trace)?;
    let tree = Arborescence::from_parents(
        root,
        res.parent.iter().enumerate().filter_map(|(v, p)| p.map(|u| (v, u, best[u * n + v].unwrap()))),
    );
    let mut certificate = Certificate { entries: res.entries.unwrap_or_default(), total: res.total };
    certificate.entries.retain(|_, v| *v > 0.0);
    Ok(PcaOutput { tree, certificate })
}

/// One IterPCA call in the dense representation: `cost[w*n+u]` is the cost of
/// arc u -> w (INF when absent, on the diagonal, and into the root).
pub(crate) struct DenseJob<'a> {
    pub n: usize,
    pub root: usize,
    pub cost: Vec<f64>,
    pub pen: Vec<f64>,
    /// Top-level tie key per (u, w), same layout; None orders by node id.
    pub key: Option<&'a [usize]>,
    pub tol: f64,
    /// Original-node labels; when given the full certificate is built.
    pub labels: Option<&'a [Vec<NodeId>]>,
}

pub(crate) struct DenseResult {
    /// Tail of each covered non-root node.
    pub parent: Vec<Option<usize>>,
    pub total: f64,
    pub entries: Option<BTreeMap<Vec<NodeId>, f64>>,
}

enum Step {
    Shortcut {
        v: usize,
        into: Vec<f64>,
        /// Bitset over next-level (w*m+u): arc is a composite through v.
        composite: Vec<u64>,
        map: Vec<usize>,
    },
    Contract {
        members: Vec<usize>,
        sup: usize,
        map: Vec<usize>,
        /// Per next-level tail u: (entered member, reduced cost).
        enter: Vec<(usize, f64)>,
        /// Per next-level head w: member the leaving arc starts from.
        leave: Vec<usize>,
    },
}

struct Level {
    n: usize,
    root: usize,
    step: Step,
}

impl DenseJob<'_> {
    pub(crate) fn run(self, mut trace: Option<&mut Vec<String>>) -> Result<DenseResult> {
        let DenseJob { mut n, mut root, cost, mut pen, key, tol, labels } = self;
        let mut cur = cost;
        let mut next: Vec<f64> = Vec::with_capacity(cur.len());
        let mut total = 0.0;
        let mut labels: Option<Vec<Vec<NodeId>>> = labels.map(|l| l.to_vec());
        let mut entries: BTreeMap<Vec<NodeId>, f64> = BTreeMap::new();
        let mut add = |labels: &Option<Vec<Vec<NodeId>>>, v: usize, x: f64, total: &mut f64| {
            *total += x;
            if let (Some(l), true) = (labels, x > 0.0) {
                *entries.entry(l[v].clone()).or_insert(0.0) += x;
            }
        };
        let mut levels: Vec<Level> = Vec::new();
        let mut theta = vec![0.0; n];
        let bottom: Vec<Option<usize>>;
        loop {
            if n == 1 {
                bottom = vec![None];
                break;
            }
            if n == 2 {
                let v = 1 - root;
                let c = cur[v * n + root];
                add(&labels, v, c.min(pen[v]), &mut total);
                let mut p = vec![None; 2];
                if pen[v] > c {
                    p[v] = Some(root);
                }
                if let Some(t) = trace.as_deref_mut() {
                    t.push(format!("level {}: base n=2 c={c} pi={} arc={}", levels.len(), pen[v], p[v].is_some()));
                }
                bottom = p;
                break;
            }
            // theta subtraction
            for v in 0..n {
                if v == root {
                    theta[v] = 0.0;
                    continue;
                }
                let col = &mut cur[v * n..(v + 1) * n];
                let th = col.iter().copied().fold(INF, f64::min).min(pen[v]);
                theta[v] = th;
                for x in col.iter_mut() {
                    *x = snap(*x - th, tol);
                }
                pen[v] = snap(pen[v] - th, tol);
                add(&labels, v, th, &mut total);
            }
            pen[root] = 0.0;
            let level_key = if levels.is_empty() { key } else { None };

            if let Some(v) = (0..n).find(|&v| v != root && pen[v] == 0.0) {
                let m = n - 1;
                let map: Vec<usize> = (0..n).filter(|&x| x != v).collect();
                let into: Vec<f64> = cur[v * n..(v + 1) * n].to_vec();
                let mut composite = vec![0u64; (m * m).div_ceil(64)];
                next.clear();
                next.resize(m * m, INF);
                for (b, &w) in map.iter().enumerate() {
                    if w == root {
                        continue;
                    }
                    let out_w = cur[w * n + v];
                    for (a, &u) in map.iter().enumerate() {
                        if a == b {
                            continue;
                        }
                        let direct = cur[w * n + u];
                        let via = into[u] + out_w;
                        let idx = b * m + a;
                        if via < direct {
                            next[idx] = via;
                            composite[idx / 64] |= 1 << (idx % 64);
                        } else {
                            next[idx] = direct;
                        }
                    }
                }
                if let Some(t) = trace.as_deref_mut() {
                    t.push(format!("level {}: n={n} theta_sum={} shortcut v={v}", levels.len(), theta.iter().sum::<f64>()));
                }
                pen.remove(v);
                if let Some(l) = labels.as_mut() {
                    l.remove(v);
                }
                levels.push(Level { n, root, step: Step::Shortcut { v, into, composite, map } });
                root -= usize::from(root > v);
                n = m;
                std::mem::swap(&mut cur, &mut next);
                continue;
            }

            let mut sel = vec![usize::MAX; n];
            for v in 0..n {
                if v == root {
                    continue;
                }
                let col = &cur[v * n..(v + 1) * n];
                match col.iter().position(|&x| x == 0.0) {
                    Some(u) => sel[v] = u,
                    None => {
                        return Err(PcaError::Invariant(format!(
                            "node {v} has positive reduced penalty and no zero in-arc"
                        )))
                    }
                }
            }
            match find_selection_cycle(n, root, |v| sel[v]) {
                None => {
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(format!("level {}: n={n} theta_sum={} zero arborescence", levels.len(), theta.iter().sum::<f64>()));
                    }
                    bottom = sel.iter().enumerate().map(|(v, &u)| (v != root).then_some(u)).collect();
                    break;
                }
                Some(cycle) => {
                    let mut in_cycle = vec![false; n];
                    for &x in &cycle {
                        in_cycle[x] = true;
                    }
                    let mut sorted = cycle.clone();
                    sorted.sort_unstable();
                    let lowest = sorted[0];
                    let map: Vec<usize> = (0..n).filter(|&x| !in_cycle[x] || x == lowest).collect();
                    let m = map.len();
                    let sup = map.iter().position(|&x| x == lowest).unwrap();
                    let better = |c: f64, bc: f64, k: usize, bk: usize| c < bc || (c == bc && k < bk);
                    let mut enter = vec![(usize::MAX, INF); m];
                    let mut leave = vec![usize::MAX; m];
                    next.clear();
                    next.resize(m * m, INF);
                    for (b, &w) in map.iter().enumerate() {
                        for (a, &u) in map.iter().enumerate() {
                            if a == b {
                                continue;
                            }
                            let idx = b * m + a;
                            if b == sup {
                                let (mut bz, mut bc, mut bk) = (usize::MAX, INF, usize::MAX);
                                for &z in &sorted {
                                    let c = cur[z * n + u];
                                    let k = level_key.map_or(z, |kk| kk[z * n + u]);
                                    if c < INF && better(c, bc, k, bk) {
                                        (bz, bc, bk) = (z, c, k);
                                    }
                                }
                                next[idx] = bc;
                                enter[a] = (bz, bc);
                            } else if a == sup {
                                if w == root {
                                    continue;
                                }
                                let (mut bz, mut bc, mut bk) = (usize::MAX, INF, usize::MAX);
                                for &z in &sorted {
                                    let c = cur[w * n + z];
                                    let k = level_key.map_or(z, |kk| kk[w * n + z]);
                                    if c < INF && better(c, bc, k, bk) {
                                        (bz, bc, bk) = (z, c, k);
                                    }
                                }
                                next[idx] = bc;
                                leave[b] = bz;
                            } else {
                                next[idx] = cur[w * n + u];
                            }
                        }
                    }
                    let sup_pen: f64 = cycle.iter().map(|&z| pen[z]).sum();
                    let mut new_pen: Vec<f64> = map.iter().map(|&x| pen[x]).collect();
                    new_pen[sup] = sup_pen;
                    pen = new_pen;
                    if let Some(l) = labels.as_mut() {
                        let mut merged: Vec<NodeId> = cycle.iter().flat_map(|&z| l[z].iter().copied()).collect();
                        merged.sort_unstable();
                        let mut nl: Vec<Vec<NodeId>> = map.iter().map(|&x| std::mem::take(&mut l[x])).collect();
                        nl[sup] = merged;
                        *l = nl;
                    }
                    if let Some(t) = trace.as_deref_mut() {
                        t.push(format!(
                            "level {}: n={n} theta_sum={} contract {:?} -> {sup}",
                            levels.len(),
                            theta.iter().sum::<f64>(),
                            cycle
                        ));
                    }
                    let new_root = map.iter().position(|&x| x == root).unwrap();
                    levels.push(Level { n, root, step: Step::Contract { members: cycle, sup, map, enter, leave } });
                    root = new_root;
                    n = m;
                    std::mem::swap(&mut cur, &mut next);
                }
            }
        }

        let mut tree = bottom;
        while let Some(level) = levels.pop() {
            tree = lift_level(&level, &tree)?;
        }
        Ok(DenseResult { parent: tree, total, entries: labels.map(|_| entries) })
    }
}

fn lift_level(level: &Level, child: &[Option<usize>]) -> Result<Vec<Option<usize>>> {
    let n = level.n;
    let m = child.len();
    let mut arcs: Vec<(usize, usize, f64)> = Vec::with_capacity(m + 2);
    let mut active = vec![false; n];
    active[level.root] = true;
    match &level.step {
        Step::Shortcut { v, into, composite, map } => {
            let v = *v;
            for (b, p) in child.iter().enumerate() {
                let Some(a) = *p else { continue };
                let (u, w) = (map[a], map[b]);
                let idx = b * m + a;
                active[w] = true;
                if composite[idx / 64] >> (idx % 64) & 1 == 1 {
                    active[v] = true;
                    if !arcs.iter().any(|&(t, h, _)| t == u && h == v) {
                        arcs.push((u, v, into[u]));
                    }
                    arcs.push((v, w, 0.0));
                } else {
                    arcs.push((u, w, 0.0));
                }
            }
        }
        Step::Contract { members, sup, map, enter, leave } => {
            if child[*sup].is_none() && !child.iter().any(|p| *p == Some(*sup)) {
                let mut out = vec![None; n];
                for (b, p) in child.iter().enumerate() {
                    if let Some(a) = *p {
                        out[map[b]] = Some(map[a]);
                    }
                }
                return Ok(out);
            }
            for (b, p) in child.iter().enumerate() {
                let Some(a) = *p else { continue };
                if b == *sup {
                    let (z, c) = enter[a];
                    arcs.push((map[a], z, c));
                    active[z] = true;
                } else if a == *sup {
                    arcs.push((leave[b], map[b], 0.0));
                    active[map[b]] = true;
                } else {
                    arcs.push((map[a], map[b], 0.0));
                    active[map[b]] = true;
                }
            }
            let k = members.len();
            for i in 0..k {
                arcs.push((members[i], members[(i + 1) % k], 0.0));
                active[members[i]] = true;
            }
        }
    }
    arcs.sort_by_key(|&(t, h, _)| (t, h));
    let sel = edmonds(n, level.root, &arcs, &active).map_err(|v| PcaError::Invariant(format!("lifting lost node {v}")))?;
    Ok(sel.iter().map(|s| s.map(|i| arcs[i].0)).collect())
}
