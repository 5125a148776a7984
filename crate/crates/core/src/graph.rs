//! Undirected dependence graph over observed variable indices.

use alloc::collections::BTreeSet;
use alloc::vec::Vec;

/// Simple undirected graph: symmetric, irreflexive, vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<BTreeSet<usize>>,
}

impl UndirectedGraph {
    pub fn empty(n: usize) -> Self {
        UndirectedGraph {
            adj: (0..n).map(|_| BTreeSet::new()).collect(),
        }
    }

    pub fn complete(n: usize) -> Self {
        UndirectedGraph {
            adj: (0..n)
                .map(|i| (0..n).filter(|&j| j != i).collect())
                .collect(),
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut g = Self::empty(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    pub fn vertex_count(&self) -> usize {
        self.adj.len()
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a != b {
            self.adj[a].insert(b);
            self.adj[b].insert(a);
        }
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) {
        self.adj[a].remove(&b);
        self.adj[b].remove(&a);
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(&b)
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Neighbors of `v` in ascending order.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[v].iter().copied()
    }

    /// `v` together with its neighbors, ascending.
    pub fn closed_neighborhood(&self, v: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.adj[v].iter().copied().collect();
        let pos = out.partition_point(|&u| u < v);
        out.insert(pos, v);
        out
    }

    /// Edges `(a, b)` with `a < b`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(a, nb)| nb.range(a + 1..).map(move |&b| (a, b)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(BTreeSet::len).sum::<usize>() / 2
    }
}

/// `B_i*`: the index `i` together with its neighbors in the dependence graph.
pub fn neighborhoods(graph: &UndirectedGraph, i: usize) -> Vec<usize> {
    graph.closed_neighborhood(i)
}
