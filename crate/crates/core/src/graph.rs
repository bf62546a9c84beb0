//! Digraphs, symmetric distance matrices, rooted out-arborescences and the
//! Chu-Liu/Edmonds minimum-cost spanning arborescence.

use std::collections::BTreeMap;

use crate::error::{PcaError, Result};

pub type NodeId = usize;
pub type ArcId = usize;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub tail: NodeId,
    pub head: NodeId,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Digraph {
    n: usize,
    root: NodeId,
    arcs: Vec<Arc>,
}

impl Digraph {
    pub fn new(n: usize, root: NodeId, arcs: Vec<Arc>) -> Result<Self> {
        if n == 0 {
            return Err(PcaError::Input("digraph needs at least one node".into()));
        }
        if root >= n {
            return Err(PcaError::Input(format!("root {root} out of range for {n} nodes")));
        }
        for (i, a) in arcs.iter().enumerate() {
            if a.tail >= n || a.head >= n {
                return Err(PcaError::Input(format!("arc {i} has an endpoint outside [0, {n})")));
            }
            if a.tail == a.head {
                return Err(PcaError::Input(format!("arc {i} is a self-loop")));
            }
            if !(a.cost.is_finite() && a.cost >= 0.0) {
                return Err(PcaError::Input(format!("arc {i} has cost {} (must be finite and >= 0)", a.cost)));
            }
        }
        Ok(Digraph { n, root, arcs })
    }

    /// Both directions of every edge of `metric`, arc ids as in [`complete_arc_id`].
    pub fn bidirected(metric: &DistMatrix, root: NodeId) -> Result<Self> {
        let n = metric.len();
        let mut arcs = Vec::with_capacity(n * n.saturating_sub(1));
        for u in 0..n {
            for v in 0..n {
                if u != v {
                    arcs.push(Arc { tail: u, head: v, cost: metric.get(u, v) });
                }
            }
        }
        Digraph::new(n, root, arcs)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn arc(&self, id: ArcId) -> &Arc {
        &self.arcs[id]
    }

    pub fn max_cost(&self) -> f64 {
        self.arcs.iter().map(|a| a.cost).fold(0.0, f64::max)
    }
}

/// Id of arc (tail, head) in the complete digraph on `n` nodes built by
/// [`Digraph::bidirected`].
pub fn complete_arc_id(n: usize, tail: NodeId, head: NodeId) -> ArcId {
    debug_assert!(tail != head && tail < n && head < n);
    tail * (n - 1) + head - usize::from(head > tail)
}

/// Symmetric, zero-diagonal, nonnegative distance matrix (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct DistMatrix {
    n: usize,
    d: Vec<f64>,
}

impl DistMatrix {
    pub fn new(n: usize, d: Vec<f64>) -> Result<Self> {
        if d.len() != n * n {
            return Err(PcaError::Input(format!("matrix has {} entries, expected {}", d.len(), n * n)));
        }
        for u in 0..n {
            if d[u * n + u] != 0.0 {
                return Err(PcaError::Input(format!("diagonal entry ({u},{u}) is nonzero")));
            }
            for v in 0..n {
                let x = d[u * n + v];
                if !(x.is_finite() && x >= 0.0) {
                    return Err(PcaError::Input(format!("entry ({u},{v}) = {x} is not a finite nonnegative number")));
                }
                if x != d[v * n + u] {
                    return Err(PcaError::Input(format!("matrix is not symmetric at ({u},{v})")));
                }
            }
        }
        Ok(DistMatrix { n, d })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut d = vec![0.0; n * n];
        for u in 0..n {
            for v in (u + 1)..n {
                let x = f(u, v);
                d[u * n + v] = x;
                d[v * n + u] = x;
            }
        }
        DistMatrix::new(n, d)
    }

    pub fn euclidean(points: &[(f64, f64)]) -> Result<Self> {
        DistMatrix::from_fn(points.len(), |u, v| {
            let (dx, dy) = (points[u].0 - points[v].0, points[u].1 - points[v].1);
            dx.hypot(dy)
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn get(&self, u: NodeId, v: NodeId) -> f64 {
        self.d[u * self.n + v]
    }

    pub fn row(&self, u: NodeId) -> &[f64] {
        &self.d[u * self.n..(u + 1) * self.n]
    }

    pub fn max(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    /// First triple (u, v, w) with c_uv > c_uw + c_wv + tol, if any.
    pub fn triangle_violation(&self, tol: f64) -> Option<(NodeId, NodeId, NodeId)> {
        let n = self.n;
        for u in 0..n {
            for v in (u + 1)..n {
                let duv = self.get(u, v);
                for w in 0..n {
                    if self.get(u, w) + self.get(w, v) + tol < duv {
                        return Some((u, v, w));
                    }
                }
            }
        }
        None
    }

    pub fn is_metric(&self) -> bool {
        self.triangle_violation(1e-9).is_none()
    }

    /// Cost of visiting `seq` in order.
    pub fn walk_cost(&self, seq: &[NodeId]) -> f64 {
        seq.windows(2).map(|p| self.get(p[0], p[1])).sum()
    }

    /// Shortest-path distances from `src` using only nodes in `nodes`, indexed
    /// by global id (INF outside). Equals the row of `src` on metric inputs.
    pub fn shortest_paths_within(&self, nodes: &[NodeId], src: NodeId) -> Vec<f64> {
        let mut dist = vec![f64::INFINITY; self.n];
        let mut done = vec![false; self.n];
        dist[src] = 0.0;
        loop {
            let next = nodes
                .iter()
                .copied()
                .filter(|&v| !done[v] && dist[v].is_finite())
                .min_by(|&a, &b| dist[a].total_cmp(&dist[b]));
            let Some(u) = next else { break };
            done[u] = true;
            for &v in nodes {
                let c = dist[u] + self.get(u, v);
                if c < dist[v] {
                    dist[v] = c;
                }
            }
        }
        dist
    }
}

/// Prize-collecting walks instance: digraph plus node penalties. `labels[v]`
/// lists the original nodes merged into `v` by earlier reductions.
#[derive(Debug, Clone, PartialEq)]
pub struct PcwInstance {
    pub graph: Digraph,
    pub penalties: Vec<f64>,
    pub labels: Vec<Vec<NodeId>>,
    /// Absolute tolerance below which reduced costs and penalties snap to 0.
    pub zero_tol: f64,
}

impl PcwInstance {
    pub fn new(graph: Digraph, penalties: Vec<f64>) -> Result<Self> {
        let n = graph.node_count();
        if penalties.len() != n {
            return Err(PcaError::Input(format!("{} penalties for {n} nodes", penalties.len())));
        }
        if let Some(v) = penalties.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(PcaError::Input(format!("penalty of node {v} is {} (must be finite and >= 0)", penalties[v])));
        }
        let zero_tol = zero_tolerance(graph.max_cost());
        let labels = (0..n).map(|v| vec![v]).collect();
        Ok(PcwInstance { graph, penalties, labels, zero_tol })
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn root(&self) -> NodeId {
        self.graph.root()
    }

    /// Penalty used in computations (the root's is ignored).
    pub fn penalty(&self, v: NodeId) -> f64 {
        if v == self.root() {
            0.0
        } else {
            self.penalties[v]
        }
    }
}

pub(crate) fn zero_tolerance(max_cost: f64) -> f64 {
    1e-9 * max_cost.max(1.0)
}

/// Rooted out-arborescence stored as a parent map: covered non-root node ->
/// (tail, arc id).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Arborescence {
    root: NodeId,
    parent: BTreeMap<NodeId, (NodeId, ArcId)>,
}

impl Arborescence {
    pub fn empty(root: NodeId) -> Self {
        Arborescence { root, parent: BTreeMap::new() }
    }

    pub fn from_parents(root: NodeId, parents: impl IntoIterator<Item = (NodeId, NodeId, ArcId)>) -> Self {
        let parent = parents.into_iter().map(|(head, tail, id)| (head, (tail, id))).collect();
        Arborescence { root, parent }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn arc_count(&self) -> usize {
        self.parent.len()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v == self.root || self.parent.contains_key(&v)
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent.get(&v).map(|&(u, _)| u)
    }

    /// Covered nodes in ascending order, root included.
    pub fn covered(&self) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self.parent.keys().copied().collect();
        if let Err(pos) = out.binary_search(&self.root) {
            out.insert(pos, self.root);
        }
        out
    }

    /// (tail, head, arc id) triples ordered by head.
    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId, ArcId)> + '_ {
        self.parent.iter().map(|(&h, &(t, a))| (t, h, a))
    }

    pub fn arc_ids(&self) -> Vec<ArcId> {
        self.parent.values().map(|&(_, a)| a).collect()
    }

    /// Children lists in ascending id order.
    pub fn children(&self) -> BTreeMap<NodeId, Vec<NodeId>> {
        let mut ch: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for (&h, &(t, _)) in &self.parent {
            ch.entry(t).or_default().push(h);
        }
        ch
    }

    /// Tree path root -> v (inclusive), if v is covered.
    pub fn path_to(&self, v: NodeId) -> Option<Vec<NodeId>> {
        if !self.contains(v) {
            return None;
        }
        let mut path = vec![v];
        let mut cur = v;
        while cur != self.root {
            cur = self.parent(cur)?;
            path.push(cur);
            if path.len() > self.parent.len() + 1 {
                return None;
            }
        }
        path.reverse();
        Some(path)
    }

    pub fn cost(&self, graph: &Digraph) -> f64 {
        self.parent.values().map(|&(_, a)| graph.arc(a).cost).sum()
    }

    /// Cost under a symmetric matrix (arc ids ignored).
    pub fn metric_cost(&self, metric: &DistMatrix) -> f64 {
        self.parent.iter().map(|(&h, &(t, _))| metric.get(t, h)).sum()
    }

    pub fn validate(&self, graph: &Digraph) -> Result<()> {
        if self.root != graph.root() {
            return Err(PcaError::Structure(format!("tree root {} differs from graph root {}", self.root, graph.root())));
        }
        for (&h, &(t, a)) in &self.parent {
            let arc = graph
                .arcs()
                .get(a)
                .ok_or_else(|| PcaError::Structure(format!("arc id {a} does not exist")))?;
            if arc.tail != t || arc.head != h {
                return Err(PcaError::Structure(format!("arc {a} is ({},{}), tree records ({t},{h})", arc.tail, arc.head)));
            }
            if h == self.root {
                return Err(PcaError::Structure("root has an incoming tree arc".into()));
            }
        }
        self.validate_shape()
    }

    /// Acyclic and every covered node hangs off the root.
    pub fn validate_shape(&self) -> Result<()> {
        for &v in self.parent.keys() {
            if self.path_to(v).is_none() {
                return Err(PcaError::Structure(format!("node {v} is not connected to the root inside the tree")));
            }
        }
        Ok(())
    }
}

/// PCC(T) = c(T) + penalties of uncovered non-root nodes.
pub fn pcc(tree: &Arborescence, inst: &PcwInstance) -> Result<f64> {
    tree.validate(&inst.graph)?;
    let uncovered: f64 = (0..inst.node_count()).filter(|&v| !tree.contains(v)).map(|v| inst.penalty(v)).sum();
    Ok(tree.cost(&inst.graph) + uncovered)
}

/// Minimum-cost arborescence rooted at the graph root spanning exactly `subset`.
pub fn min_cost_arborescence(graph: &Digraph, subset: &[NodeId]) -> Result<Arborescence> {
    let n = graph.node_count();
    let mut active = vec![false; n];
    for &v in subset {
        if v >= n {
            return Err(PcaError::Input(format!("node {v} out of range")));
        }
        active[v] = true;
    }
    if !active[graph.root()] {
        return Err(PcaError::Input("node subset must contain the root".into()));
    }
    let arcs: Vec<(usize, usize, f64)> = graph.arcs().iter().map(|a| (a.tail, a.head, a.cost)).collect();
    let chosen = edmonds(n, graph.root(), &arcs, &active).map_err(PcaError::Unreachable)?;
    Ok(Arborescence::from_parents(
        graph.root(),
        chosen.iter().enumerate().filter_map(|(v, c)| c.map(|a| (v, graph.arc(a).tail, a))),
    ))
}

/// Chu-Liu/Edmonds on `arcs` = (tail, head, cost), spanning the `active` nodes.
/// Incoming-arc ties break by lower tail, then lower position in `arcs`.
/// Returns the chosen arc position per node (None for the root and inactive
/// nodes), or the lowest unreachable node.
pub(crate) fn edmonds(
    n: usize,
    root: usize,
    arcs: &[(usize, usize, f64)],
    active: &[bool],
) -> std::result::Result<Vec<Option<usize>>, usize> {
    let mut best: Vec<Option<usize>> = vec![None; n];
    for (i, &(u, v, c)) in arcs.iter().enumerate() {
        if u == v || v == root || !active[u] || !active[v] {
            continue;
        }
        match best[v] {
            Some(b) if {
                let (bu, _, bc) = arcs[b];
                !(c < bc || (c == bc && u < bu))
            } => {}
            _ => best[v] = Some(i),
        }
    }
    if let Some(v) = (0..n).find(|&v| active[v] && v != root && best[v].is_none()) {
        return Err(v);
    }

    // Cycles of the selection (each node has one selected in-arc).
    let mut stamp = vec![usize::MAX; n];
    let mut cycle_of: Vec<Option<usize>> = vec![None; n];
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    for s in 0..n {
        if !active[s] || stamp[s] != usize::MAX {
            continue;
        }
        let mut v = s;
        while v != root && stamp[v] == usize::MAX {
            stamp[v] = s;
            v = arcs[best[v].unwrap()].0;
        }
        if v != root && stamp[v] == s && cycle_of[v].is_none() {
            let k = cycles.len();
            let mut cyc = vec![v];
            cycle_of[v] = Some(k);
            let mut x = arcs[best[v].unwrap()].0;
            while x != v {
                cycle_of[x] = Some(k);
                cyc.push(x);
                x = arcs[best[x].unwrap()].0;
            }
            cycles.push(cyc);
        }
    }
    if cycles.is_empty() {
        best[root] = None;
        return Ok(best);
    }

    let mut comp = vec![0usize; n];
    let mut cycle_new: Vec<Option<usize>> = vec![None; cycles.len()];
    let mut m = 0;
    for v in 0..n {
        match cycle_of[v] {
            Some(k) => {
                if cycle_new[k].is_none() {
                    cycle_new[k] = Some(m);
                    m += 1;
                }
                comp[v] = cycle_new[k].unwrap();
            }
            None => {
                comp[v] = m;
                m += 1;
            }
        }
    }
    let mut new_active = vec![false; m];
    for v in 0..n {
        new_active[comp[v]] |= active[v];
    }
    let mut new_arcs = Vec::new();
    let mut origin = Vec::new();
    for (i, &(u, v, c)) in arcs.iter().enumerate() {
        if !active[u] || !active[v] || comp[u] == comp[v] {
            continue;
        }
        let reduced = if cycle_of[v].is_some() { c - arcs[best[v].unwrap()].2 } else { c };
        new_arcs.push((comp[u], comp[v], reduced));
        origin.push(i);
    }
    let inner = edmonds(m, comp[root], &new_arcs, &new_active)
        .map_err(|x| (0..n).find(|&v| comp[v] == x).unwrap_or(x))?;

    let mut out: Vec<Option<usize>> = vec![None; n];
    for v in 0..n {
        if cycle_of[v].is_some() {
            out[v] = best[v];
        }
    }
    for j in inner.into_iter().flatten() {
        let i = origin[j];
        out[arcs[i].1] = Some(i);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(n: usize, root: usize, arcs: &[(usize, usize, f64)]) -> Digraph {
        Digraph::new(n, root, arcs.iter().map(|&(t, h, c)| Arc { tail: t, head: h, cost: c }).collect()).unwrap()
    }

    #[test]
    fn pcc_of_empty_and_partial_trees() {
        let graph = g(3, 0, &[(0, 1, 4.0), (0, 2, 1.0)]);
        let inst = PcwInstance::new(graph, vec![0.0, 3.0, 5.0]).unwrap();
        assert_eq!(pcc(&Arborescence::empty(0), &inst).unwrap(), 8.0);
        let t = Arborescence::from_parents(0, [(1, 0, 0)]);
        assert_eq!(pcc(&t, &inst).unwrap(), 9.0);
    }

    #[test]
    fn pcc_rejects_foreign_arc() {
        let graph = g(3, 0, &[(0, 1, 4.0)]);
        let inst = PcwInstance::new(graph, vec![0.0, 3.0, 5.0]).unwrap();
        let t = Arborescence::from_parents(0, [(2, 0, 0)]);
        assert!(matches!(pcc(&t, &inst), Err(PcaError::Structure(_))));
    }

    #[test]
    fn star_is_its_own_arborescence() {
        let graph = g(3, 0, &[(0, 1, 1.0), (0, 2, 2.0)]);
        let t = min_cost_arborescence(&graph, &[0, 1, 2]).unwrap();
        assert_eq!(t.cost(&graph), 3.0);
        assert_eq!(min_cost_arborescence(&graph, &[0]).unwrap().arc_count(), 0);
    }

    #[test]
    fn cheap_two_cycle_is_broken() {
        // a=1, b=2 with a cheap 2-cycle; entering b is cheaper than entering a.
        let graph = g(3, 0, &[(0, 1, 10.0), (0, 2, 6.0), (1, 2, 1.0), (2, 1, 1.0)]);
        let t = min_cost_arborescence(&graph, &[0, 1, 2]).unwrap();
        assert_eq!(t.cost(&graph), 7.0);
        assert_eq!(t.parent(1), Some(2));
    }

    #[test]
    fn unreachable_node_is_named() {
        let graph = g(4, 0, &[(0, 1, 1.0), (2, 3, 1.0), (3, 2, 1.0)]);
        assert_eq!(min_cost_arborescence(&graph, &[0, 1, 2, 3]).unwrap_err(), PcaError::Unreachable(2));
    }

    #[test]
    fn tie_breaks_by_lower_tail_then_arc_index() {
        let graph = g(3, 0, &[(1, 2, 1.0), (0, 2, 1.0), (0, 1, 0.0), (0, 2, 1.0)]);
        let t = min_cost_arborescence(&graph, &[0, 1, 2]).unwrap();
        assert_eq!(t.arcs().collect::<Vec<_>>(), vec![(0, 1, 2), (0, 2, 1)]);
    }

    #[test]
    fn complete_arc_ids_match_bidirected_layout() {
        let m = DistMatrix::from_fn(4, |u, v| (u + v) as f64).unwrap();
        let graph = Digraph::bidirected(&m, 0).unwrap();
        for (id, a) in graph.arcs().iter().enumerate() {
            assert_eq!(complete_arc_id(4, a.tail, a.head), id);
        }
    }

    #[test]
    fn triangle_violation_detected() {
        let m = DistMatrix::new(3, vec![0.0, 1.0, 5.0, 1.0, 0.0, 1.0, 5.0, 1.0, 0.0]).unwrap();
        assert_eq!(m.triangle_violation(1e-9), Some((0, 2, 1)));
        assert!(DistMatrix::euclidean(&[(0.0, 0.0), (3.0, 0.0), (0.0, 4.0)]).unwrap().is_metric());
    }

    #[test]
    fn asymmetric_matrix_rejected() {
        assert!(DistMatrix::new(2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
    }
}
