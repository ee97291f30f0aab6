use std::collections::BTreeSet;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Static network graph with a generator/load partition.
///
/// Node indices are zero-based. `adjacency[(m, n)] == 1.0` encodes a
/// directed link from node `n` to node `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkTopology {
    adjacency: DMatrix<f64>,
    generators: Vec<usize>,
    loads: Vec<usize>,
}

impl NetworkTopology {
    /// Build from directed `(from, to)` links.
    pub fn new(node_count: usize, links: &[(usize, usize)], generators: &[usize]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::invalid("node_count must be positive"));
        }
        let mut adjacency = DMatrix::zeros(node_count, node_count);
        for &(from, to) in links {
            if from >= node_count || to >= node_count {
                return Err(Error::invalid(format!(
                    "link ({from}, {to}) out of range for {node_count} nodes"
                )));
            }
            if from == to {
                return Err(Error::invalid(format!("self-loop at node {from}")));
            }
            if adjacency[(to, from)] != 0.0 {
                return Err(Error::invalid(format!("duplicate link ({from}, {to})")));
            }
            adjacency[(to, from)] = 1.0;
        }
        let gens: BTreeSet<usize> = generators.iter().copied().collect();
        if gens.len() != generators.len() {
            return Err(Error::invalid("duplicate generator index"));
        }
        if let Some(&g) = gens.iter().find(|&&g| g >= node_count) {
            return Err(Error::invalid(format!("generator index {g} out of range")));
        }
        let loads = (0..node_count).filter(|i| !gens.contains(i)).collect();
        Ok(Self {
            adjacency,
            generators: gens.into_iter().collect(),
            loads,
        })
    }

    /// Build from undirected links; each pair becomes two directed links.
    pub fn undirected(node_count: usize, links: &[(usize, usize)], generators: &[usize]) -> Result<Self> {
        let directed: Vec<(usize, usize)> = links.iter().flat_map(|&(a, b)| [(a, b), (b, a)]).collect();
        Self::new(node_count, &directed, generators)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn loads(&self) -> &[usize] {
        &self.loads
    }

    pub fn link_count(&self) -> usize {
        self.adjacency.iter().filter(|&&w| w != 0.0).count()
    }

    pub fn is_generator(&self, node: usize) -> bool {
        self.generators.binary_search(&node).is_ok()
    }
}
