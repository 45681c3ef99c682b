use std::collections::BTreeSet;

use crate::model::VarId;

/// Undirected interaction graph over variable ids `0..n`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl UndirectedGraph {
    pub fn new(n: usize) -> Self {
        Self { adj: vec![BTreeSet::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn add_edge(&mut self, a: VarId, b: VarId) {
        if a != b {
            self.adj[a.0].insert(b.0);
            self.adj[b.0].insert(a.0);
        }
    }

    /// Connects every pair in `vars`.
    pub fn add_clique(&mut self, vars: &[VarId]) {
        for (i, &a) in vars.iter().enumerate() {
            for &b in &vars[i + 1..] {
                self.add_edge(a, b);
            }
        }
    }

    pub fn has_edge(&self, a: VarId, b: VarId) -> bool {
        self.adj[a.0].contains(&b.0)
    }

    /// Moral graph of a family list (each child together with its parents).
    pub fn moral<'a, I>(n: usize, families: I) -> Self
    where
        I: IntoIterator<Item = &'a [VarId]>,
    {
        let mut g = Self::new(n);
        for fam in families {
            g.add_clique(fam);
        }
        g
    }

    /// Number of edges eliminating `v` would add among its current neighbours.
    pub fn fill_in(&self, v: VarId) -> usize {
        let nbrs: Vec<usize> = self.adj[v.0].iter().copied().collect();
        let mut missing = 0;
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                if !self.adj[a].contains(&b) {
                    missing += 1;
                }
            }
        }
        missing
    }

    fn eliminate(&mut self, v: usize) {
        let nbrs: Vec<usize> = std::mem::take(&mut self.adj[v]).into_iter().collect();
        for &a in &nbrs {
            self.adj[a].remove(&v);
        }
        for (i, &a) in nbrs.iter().enumerate() {
            for &b in &nbrs[i + 1..] {
                self.adj[a].insert(b);
                self.adj[b].insert(a);
            }
        }
    }
}

/// Min-fill elimination order over every vertex; ties go to the lowest id.
pub fn min_fill_order(graph: &UndirectedGraph) -> Vec<VarId> {
    min_fill_order_of(graph, &vec![true; graph.len()])
}

/// Min-fill order over the vertices flagged in `eliminate`. The other
/// vertices stay in the graph and count towards fill-in.
pub fn min_fill_order_of(graph: &UndirectedGraph, eliminate: &[bool]) -> Vec<VarId> {
    let mut g = graph.clone();
    let mut pending: BTreeSet<usize> = (0..g.len()).filter(|&i| eliminate[i]).collect();
    let mut order = Vec::with_capacity(pending.len());
    while !pending.is_empty() {
        let best = *pending
            .iter()
            .min_by_key(|&&v| (g.fill_in(VarId(v)), v))
            .expect("pending is nonempty");
        pending.remove(&best);
        g.eliminate(best);
        order.push(VarId(best));
    }
    order
}
