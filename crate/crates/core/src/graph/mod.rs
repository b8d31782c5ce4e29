//! Simple undirected graphs, perturbation plans and structural surgery.

mod generate;
mod io;

use std::collections::{HashSet, VecDeque};
use std::fmt;

pub use generate::{clique_groups, erdos_renyi, generate_ba, inject_cliques};
pub use io::{
    load_edge_list, load_labels, load_plan, parse_edge_list, parse_plan, save_edge_list,
    save_labels, save_plan, write_atomic, write_edge_list, write_plan,
};

use crate::error::{Error, Result};

/// Simple undirected unweighted graph over dense node indices `0..n`.
///
/// Each dense index carries an original label; labels are strictly increasing
/// so the dense order and the label order coincide.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    adj: Vec<Vec<usize>>,
    labels: Vec<u64>,
    num_edges: usize,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n())
            .field("edges", &self.num_edges)
            .finish()
    }
}

impl Graph {
    /// Builds a graph on nodes labelled `0..n`. Self-loops and repeated pairs are dropped.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        Self::with_labels((0..n as u64).collect(), edges)
    }

    pub fn with_labels(
        labels: Vec<u64>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(
                "node labels must be strictly increasing".into(),
            ));
        }
        let n = labels.len();
        let mut adj = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            if i == j {
                continue;
            }
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut num_edges = 0;
        for row in &mut adj {
            row.sort_unstable();
            row.dedup();
            num_edges += row.len();
        }
        Ok(Graph {
            adj,
            labels,
            num_edges: num_edges / 2,
        })
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adj[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i].binary_search(&j).is_ok()
    }

    /// Canonical edge list: pairs `(i, j)` with `i < j` in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> u64 {
        self.labels[i]
    }

    pub fn index_of(&self, label: u64) -> Option<usize> {
        self.labels.binary_search(&label).ok()
    }

    pub fn isolated_nodes(&self) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.adj[i].is_empty()).collect()
    }

    /// Relabels nodes by `perm`, where `perm[old] = new`. Labels become `0..n`.
    pub fn permute(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n() {
            return Err(Error::InvalidArgument("permutation length mismatch".into()));
        }
        Graph::from_edges(self.n(), self.edges().map(|(i, j)| (perm[i], perm[j])))
    }

    /// Connected components as sorted node lists, in order of their smallest node.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            queue.push_back(s);
            let mut comp = Vec::new();
            while let Some(u) = queue.pop_front() {
                comp.push(u);
                for &v in &self.adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        queue.push_back(v);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    /// Induced subgraph on `nodes` (sorted, distinct), keeping original labels.
    pub fn induced(&self, nodes: &[usize]) -> Result<Graph> {
        let mut index = vec![usize::MAX; self.n()];
        for (new, &old) in nodes.iter().enumerate() {
            index[old] = new;
        }
        let labels = nodes.iter().map(|&i| self.labels[i]).collect();
        let edges = nodes.iter().flat_map(|&i| {
            let index = &index;
            self.adj[i]
                .iter()
                .filter(move |&&j| index[j] != usize::MAX && j > i)
                .map(move |&j| (index[i], index[j]))
        });
        Graph::with_labels(labels, edges.collect::<Vec<_>>())
    }

    /// Largest connected component, re-indexed densely.
    ///
    /// Among equally large components the one holding the smallest original label wins.
    pub fn largest_connected_component(&self) -> Result<Graph> {
        if self.n() == 0 {
            return Err(Error::EmptyGraph);
        }
        // components() is ordered by smallest member, and labels follow dense order,
        // so the first maximum is the tie winner.
        let comps = self.components();
        let mut best = 0;
        for (k, c) in comps.iter().enumerate() {
            if c.len() > comps[best].len() {
                best = k;
            }
        }
        self.induced(&comps[best])
    }

    /// Applies `plan` op by op; fails on the first invalid or isolating op.
    pub fn apply(&self, plan: &PerturbationPlan) -> Result<Graph> {
        let mut adj: Vec<HashSet<usize>> = self
            .adj
            .iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        for op in &plan.ops {
            let (i, j) = (op.i, op.j);
            if i >= self.n() || j >= self.n() || i == j {
                return Err(Error::InvalidArgument(format!(
                    "plan op ({i}, {j}) out of range"
                )));
            }
            let (li, lj) = (self.labels[i], self.labels[j]);
            let present = adj[i].contains(&j);
            match op.kind {
                OpKind::Add => {
                    if present {
                        return Err(Error::InvalidOp(li, lj, "edge already present".into()));
                    }
                    adj[i].insert(j);
                    adj[j].insert(i);
                }
                OpKind::Delete => {
                    if !present {
                        return Err(Error::InvalidOp(li, lj, "no such edge".into()));
                    }
                    if adj[i].len() == 1 || adj[j].len() == 1 {
                        return Err(Error::IsolatingOp(li, lj));
                    }
                    adj[i].remove(&j);
                    adj[j].remove(&i);
                }
            }
        }
        let edges: Vec<(usize, usize)> = adj
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect();
        Graph::with_labels(self.labels.clone(), edges)
    }

    /// Copy with the pair `(i, j)` toggled. No isolation check.
    pub fn toggled(&self, i: usize, j: usize) -> Graph {
        let mut g = self.clone();
        if i == j {
            return g;
        }
        match g.adj[i].binary_search(&j) {
            Ok(p) => {
                g.adj[i].remove(p);
                let q = g.adj[j].binary_search(&i).expect("symmetric adjacency");
                g.adj[j].remove(q);
                g.num_edges -= 1;
            }
            Err(p) => {
                g.adj[i].insert(p, j);
                let q = g.adj[j].binary_search(&i).unwrap_err();
                g.adj[j].insert(q, i);
                g.num_edges += 1;
            }
        }
        g
    }

    /// Half the L1 distance between adjacency matrices.
    pub fn edit_distance(&self, other: &Graph) -> usize {
        let a: HashSet<(usize, usize)> = self.edges().collect();
        let b: HashSet<(usize, usize)> = other.edges().collect();
        a.symmetric_difference(&b).count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum OpKind {
    Add,
    Delete,
}

/// One edge modification on dense indices, `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeOp {
    pub i: usize,
    pub j: usize,
    pub kind: OpKind,
}

impl EdgeOp {
    pub fn new(a: usize, b: usize, kind: OpKind) -> Self {
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        EdgeOp { i, j, kind }
    }

    /// The op that toggles pair `(a, b)` in `graph`.
    pub fn flip(graph: &Graph, a: usize, b: usize) -> Self {
        let kind = if graph.has_edge(a, b) {
            OpKind::Delete
        } else {
            OpKind::Add
        };
        EdgeOp::new(a, b, kind)
    }
}

/// Ordered list of edge modifications bounded by a budget.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PerturbationPlan {
    pub ops: Vec<EdgeOp>,
    pub budget: usize,
}

impl PerturbationPlan {
    pub fn new(budget: usize) -> Self {
        PerturbationPlan {
            ops: Vec::new(),
            budget,
        }
    }

    pub fn from_ops(ops: Vec<EdgeOp>, budget: usize) -> Result<Self> {
        let mut plan = PerturbationPlan::new(budget);
        for op in ops {
            plan.push(op)?;
        }
        Ok(plan)
    }

    pub fn push(&mut self, op: EdgeOp) -> Result<()> {
        let op = EdgeOp::new(op.i, op.j, op.kind);
        if op.i == op.j {
            return Err(Error::InvalidArgument(format!("self-loop op on {}", op.i)));
        }
        if self.ops.len() >= self.budget {
            return Err(Error::InvalidArgument(format!(
                "plan exceeds budget {}",
                self.budget
            )));
        }
        if self.contains_pair(op.i, op.j) {
            return Err(Error::InvalidArgument(format!(
                "pair ({}, {}) appears twice in plan",
                op.i, op.j
            )));
        }
        self.ops.push(op);
        Ok(())
    }

    pub fn contains_pair(&self, i: usize, j: usize) -> bool {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.ops.iter().any(|o| o.i == i && o.j == j)
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// First `b` ops under budget `b`.
    pub fn truncated(&self, b: usize) -> PerturbationPlan {
        PerturbationPlan {
            ops: self.ops.iter().take(b).copied().collect(),
            budget: b,
        }
    }
}
