//! Exact maximum-independent-set enumeration.
//!
//! Branch and bound over vertex bitmasks. The bound is a greedy clique cover
//! of the remaining candidates; pruning is strict so that every maximum set
//! is reached exactly once.

use serde::Serialize;
use thiserror::Error;

use crate::graph::SimpleGraph;

pub const MAX_ORACLE_VERTICES: usize = 40;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("{0} vertices exceed the exact enumeration limit of {MAX_ORACLE_VERTICES}")]
    TooLarge(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MisResult {
    /// Independence number.
    pub alpha: usize,
    /// All maximum independent sets as sorted vertex lists, in lexicographic order.
    pub maximum_sets: Vec<Vec<usize>>,
}

impl MisResult {
    pub fn as_masks(&self) -> Vec<u64> {
        self.maximum_sets
            .iter()
            .map(|s| s.iter().fold(0u64, |m, &v| m | (1 << v)))
            .collect()
    }
}

pub fn enumerate_mis(graph: &SimpleGraph) -> Result<MisResult, OracleError> {
    let n = graph.num_vertices();
    if n > MAX_ORACLE_VERTICES {
        return Err(OracleError::TooLarge(n));
    }
    let adjacency = graph.adjacency_masks();
    let all = if n == 0 { 0 } else { u64::MAX >> (64 - n) };
    let mut search = Search {
        adjacency: &adjacency,
        best: 0,
        found: Vec::new(),
    };
    search.branch(0, 0, all);
    let mut maximum_sets: Vec<Vec<usize>> = search
        .found
        .iter()
        .map(|&mask| (0..n).filter(|&v| (mask >> v) & 1 == 1).collect())
        .collect();
    maximum_sets.sort();
    maximum_sets.dedup();
    Ok(MisResult {
        alpha: search.best,
        maximum_sets,
    })
}

struct Search<'a> {
    adjacency: &'a [u64],
    best: usize,
    found: Vec<u64>,
}

impl Search<'_> {
    fn branch(&mut self, chosen: u64, size: usize, candidates: u64) {
        if candidates == 0 {
            if size > self.best {
                self.best = size;
                self.found.clear();
            }
            if size == self.best {
                self.found.push(chosen);
            }
            return;
        }
        if size + self.clique_cover(candidates) < self.best {
            return;
        }
        // Branch on the candidate with most candidate neighbours.
        let mut pick = candidates.trailing_zeros() as usize;
        let mut pick_degree = 0;
        let mut rest = candidates;
        while rest != 0 {
            let v = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let degree = (self.adjacency[v] & candidates).count_ones();
            if degree > pick_degree {
                pick = v;
                pick_degree = degree;
            }
        }
        let bit = 1u64 << pick;
        self.branch(
            chosen | bit,
            size + 1,
            candidates & !bit & !self.adjacency[pick],
        );
        self.branch(chosen, size, candidates & !bit);
    }

    /// Number of cliques in a greedy cover: an upper bound on the
    /// independence number of the induced subgraph.
    fn clique_cover(&self, candidates: u64) -> usize {
        let mut remaining = candidates;
        let mut cliques = 0;
        while remaining != 0 {
            let v = remaining.trailing_zeros() as usize;
            let mut clique = 1u64 << v;
            let mut common = self.adjacency[v] & remaining;
            while common != 0 {
                let u = common.trailing_zeros() as usize;
                clique |= 1 << u;
                common &= self.adjacency[u];
                common &= !(1u64 << u);
            }
            remaining &= !clique;
            cliques += 1;
        }
        cliques
    }
}
