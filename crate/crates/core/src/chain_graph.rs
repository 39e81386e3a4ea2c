//! δ-chain transition graphs, strongly connected components, chain
//! recurrence and chain components.
//!
//! An edge `u → v` exists iff `d(z, v) <= δ` for some successor `z` of `u`.
//! The threshold is inclusive.

use rayon::prelude::*;
use serde::Serialize;

use crate::scalar::Scalar;
use crate::systems::FiniteSystem;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainGraph<T> {
    delta: T,
    adjacency: Vec<Vec<usize>>,
}

impl<T: Scalar> ChainGraph<T> {
    /// Graph from raw adjacency lists; lists are sorted and deduplicated.
    pub fn from_adjacency(delta: T, mut adjacency: Vec<Vec<usize>>) -> Self {
        let n = adjacency.len();
        for row in &mut adjacency {
            row.sort_unstable();
            row.dedup();
            assert!(row.iter().all(|&v| v < n), "edge target out of range");
        }
        ChainGraph { delta, adjacency }
    }

    pub fn delta(&self) -> &T {
        &self.delta
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn out(&self, u: usize) -> &[usize] {
        &self.adjacency[u]
    }

    pub fn adjacency(&self) -> &[Vec<usize>] {
        &self.adjacency
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    /// Reverse adjacency lists (sorted).
    pub fn reversed(&self) -> Vec<Vec<usize>> {
        let mut rev = vec![Vec::new(); self.len()];
        for (u, row) in self.adjacency.iter().enumerate() {
            for &v in row {
                rev[v].push(u);
            }
        }
        rev
    }

    /// Whether every edge of `self` is an edge of `other`.
    pub fn is_subgraph_of(&self, other: &ChainGraph<T>) -> bool {
        self.len() == other.len()
            && (0..self.len()).all(|u| self.out(u).iter().all(|&v| other.has_edge(u, v)))
    }
}

/// Builds the δ-chain graph of `system`. Rows are computed in parallel.
pub fn build_chain_graph<T: Scalar>(system: &FiniteSystem<T>, delta: &T) -> ChainGraph<T> {
    let adjacency = (0..system.len())
        .into_par_iter()
        .map(|u| {
            let step = system.step(u);
            if step.len() == 1 {
                return system.ball(step[0], delta);
            }
            let mut row: Vec<usize> = step.iter().flat_map(|&z| system.ball(z, delta)).collect();
            row.sort_unstable();
            row.dedup();
            row
        })
        .collect();
    ChainGraph {
        delta: delta.clone(),
        adjacency,
    }
}

/// Strongly connected components with their condensation.
///
/// Components are numbered in reverse topological order of the
/// condensation (sinks first), as produced by Tarjan's algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SccDecomposition {
    pub component_of: Vec<usize>,
    pub components: Vec<Vec<usize>>,
    /// Sorted edges between distinct components.
    pub condensation: Vec<Vec<usize>>,
    /// Whether each component contains a cycle (size > 1 or a self-loop).
    pub cyclic: Vec<bool>,
}

impl SccDecomposition {
    pub fn count(&self) -> usize {
        self.components.len()
    }
}

/// Iterative Tarjan.
pub fn scc<T: Scalar>(graph: &ChainGraph<T>) -> SccDecomposition {
    tarjan(graph.adjacency())
}

pub(crate) fn tarjan(adjacency: &[Vec<usize>]) -> SccDecomposition {
    const UNVISITED: usize = usize::MAX;
    let n = adjacency.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut component_of = vec![UNVISITED; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    let mut next_index = 0;
    // (vertex, next edge position)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adjacency[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let id = components.len();
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    component_of[w] = id;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                components.push(comp);
            }
        }
    }

    let mut condensation = vec![Vec::new(); components.len()];
    let mut cyclic: Vec<bool> = components.iter().map(|c| c.len() > 1).collect();
    for (u, row) in adjacency.iter().enumerate() {
        let cu = component_of[u];
        for &v in row {
            let cv = component_of[v];
            if cu == cv {
                if u == v {
                    cyclic[cu] = true;
                }
            } else {
                condensation[cu].push(cv);
            }
        }
    }
    for row in &mut condensation {
        row.sort_unstable();
        row.dedup();
    }
    SccDecomposition {
        component_of,
        components,
        condensation,
        cyclic,
    }
}

/// At a fixed δ, chain transitivity is strong connectivity of the δ-graph.
pub fn is_chain_transitive<T: Scalar>(graph: &ChainGraph<T>) -> bool {
    !graph.is_empty() && scc(graph).count() == 1
}

/// States lying on a cycle of the graph (sorted).
pub fn chain_recurrent_set<T: Scalar>(graph: &ChainGraph<T>) -> Vec<usize> {
    let dec = scc(graph);
    (0..graph.len()).filter(|&x| dec.cyclic[dec.component_of[x]]).collect()
}

/// SCCs restricted to the chain-recurrent set, ordered by smallest member.
pub fn chain_components<T: Scalar>(graph: &ChainGraph<T>) -> Vec<Vec<usize>> {
    let dec = scc(graph);
    let mut out: Vec<Vec<usize>> = dec
        .components
        .into_iter()
        .zip(dec.cyclic)
        .filter_map(|(c, cyc)| cyc.then_some(c))
        .collect();
    out.sort_by_key(|c| c[0]);
    out
}
