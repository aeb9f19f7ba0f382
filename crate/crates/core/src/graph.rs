//! Undirected graphs and raw (possibly asymmetric) Markov blanket families.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{FmplError, Result};

/// Undirected simple graph on nodes `0..p`. Edges are stored once as `(i, j)`
/// with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct UndirectedGraph {
    p: usize,
    edges: BTreeSet<(usize, usize)>,
}

fn canonical(i: usize, j: usize) -> (usize, usize) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl UndirectedGraph {
    pub fn empty(p: usize) -> Self {
        Self { p, edges: BTreeSet::new() }
    }

    pub fn complete(p: usize) -> Self {
        let mut g = Self::empty(p);
        for i in 0..p {
            for j in (i + 1)..p {
                g.edges.insert((i, j));
            }
        }
        g
    }

    pub fn from_edges<I>(p: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::empty(p);
        for (i, j) in edges {
            g.add_edge(i, j)?;
        }
        Ok(g)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn add_edge(&mut self, i: usize, j: usize) -> Result<()> {
        if i == j {
            return Err(FmplError::Input(format!("self-loop on node {i}")));
        }
        if i >= self.p || j >= self.p {
            return Err(FmplError::Input(format!("edge ({i}, {j}) out of range for p = {}", self.p)));
        }
        self.edges.insert(canonical(i, j));
        Ok(())
    }

    pub fn remove_edge(&mut self, i: usize, j: usize) -> bool {
        self.edges.remove(&canonical(i, j))
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.edges.contains(&canonical(i, j))
    }

    /// Edges in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbour set of `j`.
    pub fn markov_blanket(&self, j: usize) -> Vec<usize> {
        (0..self.p).filter(|&i| self.has_edge(i, j)).collect()
    }

    pub fn degree(&self, j: usize) -> usize {
        self.markov_blanket(j).len()
    }

    pub fn blankets(&self) -> MarkovBlanketFamily {
        let mut blankets = vec![Vec::new(); self.p];
        for &(i, j) in &self.edges {
            blankets[i].push(j);
            blankets[j].push(i);
        }
        for b in &mut blankets {
            b.sort_unstable();
        }
        MarkovBlanketFamily { blankets }
    }

    /// Fraction of the `p(p-1)/2` possible edges that are present.
    pub fn density(&self) -> f64 {
        let pairs = self.p * self.p.saturating_sub(1) / 2;
        if pairs == 0 {
            0.0
        } else {
            self.edges.len() as f64 / pairs as f64
        }
    }

    pub fn is_subgraph_of(&self, other: &UndirectedGraph) -> bool {
        self.p == other.p && self.edges.is_subset(&other.edges)
    }

    pub fn to_json(&self) -> String {
        let doc = GraphDoc { p: self.p, edges: self.edges.iter().map(|&(i, j)| [i, j]).collect() };
        serde_json::to_string(&doc).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GraphDoc = serde_json::from_str(text).map_err(|e| FmplError::Input(format!("graph JSON: {e}")))?;
        Self::from_edges(doc.p, doc.edges.into_iter().map(|[i, j]| (i, j)))
    }
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    p: usize,
    edges: Vec<[usize; 2]>,
}

/// Per-node Markov blankets as returned by the search, before symmetrization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovBlanketFamily {
    blankets: Vec<Vec<usize>>,
}

impl MarkovBlanketFamily {
    /// Validates and sorts the blankets. A blanket may not contain its own node.
    pub fn new(mut blankets: Vec<Vec<usize>>) -> Result<Self> {
        let p = blankets.len();
        for (j, b) in blankets.iter_mut().enumerate() {
            b.sort_unstable();
            b.dedup();
            if b.contains(&j) {
                return Err(FmplError::Input(format!("blanket of node {j} contains itself")));
            }
            if let Some(&bad) = b.iter().find(|&&i| i >= p) {
                return Err(FmplError::Input(format!("blanket of node {j} has node {bad} >= p")));
            }
        }
        Ok(Self { blankets })
    }

    pub fn p(&self) -> usize {
        self.blankets.len()
    }

    pub fn blanket(&self, j: usize) -> &[usize] {
        &self.blankets[j]
    }

    pub fn blankets(&self) -> &[Vec<usize>] {
        &self.blankets
    }

    pub fn contains(&self, j: usize, i: usize) -> bool {
        self.blankets[j].binary_search(&i).is_ok()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.p()).all(|j| self.blankets[j].iter().all(|&i| self.contains(i, j)))
    }
}
