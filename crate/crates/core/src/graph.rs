//! Plain undirected graphs shared by the oracle and the Hamiltonian builder.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Undirected simple graph on vertices `0..num_vertices`.
///
/// Edges are stored normalized (`a < b`), sorted and without duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawGraph", into = "RawGraph")]
pub struct SimpleGraph {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
    #[serde(skip)]
    neighbors: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct RawGraph {
    num_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<RawGraph> for SimpleGraph {
    type Error = String;

    fn try_from(raw: RawGraph) -> Result<Self, Self::Error> {
        for &(a, b) in &raw.edges {
            if a == b {
                return Err(format!("self-loop on vertex {a}"));
            }
            if a.max(b) >= raw.num_vertices {
                return Err(format!("edge ({a}, {b}) references a missing vertex"));
            }
        }
        Ok(SimpleGraph::new(raw.num_vertices, raw.edges))
    }
}

impl From<SimpleGraph> for RawGraph {
    fn from(g: SimpleGraph) -> Self {
        RawGraph {
            num_vertices: g.num_vertices,
            edges: g.edges,
        }
    }
}

impl SimpleGraph {
    /// Panics on self-loops or out-of-range endpoints.
    pub fn new(num_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut normalized: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| {
                assert!(a != b, "self-loop on vertex {a}");
                assert!(a.max(b) < num_vertices, "edge ({a}, {b}) out of range");
                (a.min(b), a.max(b))
            })
            .collect();
        normalized.sort_unstable();
        normalized.dedup();
        let mut neighbors = vec![Vec::new(); num_vertices];
        for &(a, b) in &normalized {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Self {
            num_vertices,
            edges: normalized,
            neighbors,
        }
    }

    pub fn empty(num_vertices: usize) -> Self {
        Self::new(num_vertices, [])
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// True if no edge has both endpoints in `set` (a bitmask over vertices).
    pub fn is_independent_mask(&self, set: u64) -> bool {
        self.edges
            .iter()
            .all(|&(a, b)| (set >> a) & 1 == 0 || (set >> b) & 1 == 0)
    }

    /// Adjacency as bitmasks; requires at most 64 vertices.
    pub fn adjacency_masks(&self) -> Vec<u64> {
        assert!(
            self.num_vertices <= 64,
            "bitmask adjacency needs ≤ 64 vertices"
        );
        let mut masks = vec![0u64; self.num_vertices];
        for &(a, b) in &self.edges {
            masks[a] |= 1 << b;
            masks[b] |= 1 << a;
        }
        masks
    }

    /// Erdős–Rényi `G(n, p)` sample.
    pub fn random<R: Rng + ?Sized>(num_vertices: usize, p: f64, rng: &mut R) -> Self {
        let mut edges = Vec::new();
        for a in 0..num_vertices {
            for b in a + 1..num_vertices {
                if rng.random::<f64>() < p {
                    edges.push((a, b));
                }
            }
        }
        Self::new(num_vertices, edges)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_edges() {
        let g = SimpleGraph::new(3, [(2, 0), (0, 2), (1, 2)]);
        assert_eq!(g.edges(), &[(0, 2), (1, 2)]);
        assert!(g.has_edge(2, 0));
        assert!(!g.has_edge(0, 1));
        assert_eq!(g.neighbors(2), &[0, 1]);
    }

    #[test]
    fn json_rejects_bad_edges() {
        assert!(
            serde_json::from_str::<SimpleGraph>(r#"{"num_vertices":2,"edges":[[0,2]]}"#).is_err()
        );
        assert!(
            serde_json::from_str::<SimpleGraph>(r#"{"num_vertices":2,"edges":[[1,1]]}"#).is_err()
        );
        let g: SimpleGraph = serde_json::from_str(r#"{"num_vertices":2,"edges":[[1,0]]}"#).unwrap();
        assert!(g.has_edge(0, 1));
    }
}
