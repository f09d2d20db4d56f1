//! 3-SAT → maximum independent set compilation.
//!
//! Every literal occurrence becomes a vertex `(clause, slot)`. Literals of the
//! same clause form a clique (intra edges) and complementary literals in
//! different clauses are joined (inter edges). The formula is satisfiable iff
//! the graph has an independent set with one vertex per clause.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formula::{Assignment, Formula, Literal};
use crate::graph::SimpleGraph;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReductionError {
    #[error("unknown vertex {0}")]
    UnknownVertex(VertexId),
    #[error("vertices {0} and {1} are adjacent")]
    NotIndependent(VertexId, VertexId),
    #[error("selection has {got} vertices, expected one per clause ({expected})")]
    WrongSize { expected: usize, got: usize },
    #[error("internal consistency: variable x{0} demanded both true and false")]
    ConflictingDemands(u32),
    #[error("invalid graph: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VertexId {
    pub clause: usize,
    pub slot: usize,
}

impl VertexId {
    pub fn new(clause: usize, slot: usize) -> Self {
        Self { clause, slot }
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}[{}]", self.clause, self.slot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Intra,
    Inter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MisVertex {
    pub clause: usize,
    pub slot: usize,
    /// Signed DIMACS literal.
    pub literal: i64,
}

impl MisVertex {
    pub fn id(&self) -> VertexId {
        VertexId::new(self.clause, self.slot)
    }

    pub fn literal(&self) -> Literal {
        Literal::from_dimacs(self.literal).expect("validated literal")
    }
}

/// Edge between vertex indices `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MisEdge {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
}

/// The compiled graph. Vertices are clause-major, slot-minor; edges are
/// sorted by endpoint indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMisGraph", into = "RawMisGraph")]
pub struct MisGraph {
    num_variables: usize,
    num_clauses: usize,
    vertices: Vec<MisVertex>,
    edges: Vec<MisEdge>,
    clause_offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawMisGraph {
    num_variables: usize,
    num_clauses: usize,
    vertices: Vec<MisVertex>,
    edges: Vec<MisEdge>,
}

impl From<MisGraph> for RawMisGraph {
    fn from(g: MisGraph) -> Self {
        Self {
            num_variables: g.num_variables,
            num_clauses: g.num_clauses,
            vertices: g.vertices,
            edges: g.edges,
        }
    }
}

impl TryFrom<RawMisGraph> for MisGraph {
    type Error = ReductionError;

    fn try_from(raw: RawMisGraph) -> Result<Self, Self::Error> {
        let bad = |m: String| ReductionError::Invalid(m);
        let mut clause_offsets = Vec::with_capacity(raw.num_clauses + 1);
        for (i, v) in raw.vertices.iter().enumerate() {
            let var = v.literal.unsigned_abs() as usize;
            if var == 0 || var > raw.num_variables {
                return Err(bad(format!(
                    "vertex {i} has literal {} out of range",
                    v.literal
                )));
            }
            if v.slot == 0 {
                if v.clause != clause_offsets.len() {
                    return Err(bad(format!("vertex {i}: clauses must be listed in order")));
                }
                clause_offsets.push(i);
            } else if i == 0
                || raw.vertices[i - 1].clause != v.clause
                || raw.vertices[i - 1].slot + 1 != v.slot
            {
                return Err(bad(format!("vertex {i}: slots must be consecutive")));
            }
        }
        if clause_offsets.len() != raw.num_clauses {
            return Err(bad("clause count does not match vertex list".into()));
        }
        clause_offsets.push(raw.vertices.len());
        let graph = Self {
            num_variables: raw.num_variables,
            num_clauses: raw.num_clauses,
            vertices: raw.vertices,
            edges: Vec::new(),
            clause_offsets,
        };
        // The construction is a pure function of the vertex labels, so any
        // valid edge list must equal the recomputed one.
        let expected = graph.construct_edges();
        let mut given = raw.edges;
        given.sort();
        if given != expected {
            return Err(bad("edge list does not match the vertex literals".into()));
        }
        Ok(Self {
            edges: expected,
            ..graph
        })
    }
}

/// Compiles `formula` into its MIS graph.
pub fn reduce(formula: &Formula) -> MisGraph {
    let mut vertices = Vec::with_capacity(formula.num_literals());
    let mut clause_offsets = Vec::with_capacity(formula.num_clauses() + 1);
    for (j, clause) in formula.clauses().iter().enumerate() {
        clause_offsets.push(vertices.len());
        for (k, lit) in clause.literals().iter().enumerate() {
            vertices.push(MisVertex {
                clause: j,
                slot: k,
                literal: lit.to_dimacs(),
            });
        }
    }
    clause_offsets.push(vertices.len());
    let mut graph = MisGraph {
        num_variables: formula.num_variables(),
        num_clauses: formula.num_clauses(),
        vertices,
        edges: Vec::new(),
        clause_offsets,
    };
    graph.edges = graph.construct_edges();
    graph
}

impl MisGraph {
    fn construct_edges(&self) -> Vec<MisEdge> {
        let mut edges = Vec::new();
        for (a, va) in self.vertices.iter().enumerate() {
            for (b, vb) in self.vertices.iter().enumerate().skip(a + 1) {
                if va.clause == vb.clause {
                    edges.push(MisEdge {
                        a,
                        b,
                        kind: EdgeKind::Intra,
                    });
                } else if va.literal == -vb.literal {
                    edges.push(MisEdge {
                        a,
                        b,
                        kind: EdgeKind::Inter,
                    });
                }
            }
        }
        edges
    }

    pub fn num_variables(&self) -> usize {
        self.num_variables
    }

    pub fn num_clauses(&self) -> usize {
        self.num_clauses
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[MisVertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[MisEdge] {
        &self.edges
    }

    pub fn inter_edges(&self) -> impl Iterator<Item = &MisEdge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Inter)
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Vertex indices belonging to clause `j`.
    pub fn clause_vertices(&self, j: usize) -> std::ops::Range<usize> {
        self.clause_offsets[j]..self.clause_offsets[j + 1]
    }

    pub fn index_of(&self, id: VertexId) -> Option<usize> {
        if id.clause >= self.num_clauses {
            return None;
        }
        let range = self.clause_vertices(id.clause);
        let idx = range.start + id.slot;
        range.contains(&idx).then_some(idx)
    }

    pub fn vertex_id(&self, index: usize) -> VertexId {
        self.vertices[index].id()
    }

    /// Human-readable label such as `¬x1@C1`.
    pub fn label(&self, index: usize) -> String {
        let v = &self.vertices[index];
        format!("{}@C{}", v.literal(), v.clause)
    }

    pub fn simple_graph(&self) -> SimpleGraph {
        SimpleGraph::new(self.vertices.len(), self.edges.iter().map(|e| (e.a, e.b)))
    }

    fn indices(&self, set: &[VertexId]) -> Result<Vec<usize>, ReductionError> {
        set.iter()
            .map(|&id| self.index_of(id).ok_or(ReductionError::UnknownVertex(id)))
            .collect()
    }

    fn first_conflict(&self, indices: &[usize]) -> Option<(usize, usize)> {
        let chosen: BTreeSet<usize> = indices.iter().copied().collect();
        self.edges
            .iter()
            .find(|e| chosen.contains(&e.a) && chosen.contains(&e.b))
            .map(|e| (e.a, e.b))
    }

    pub fn is_independent(&self, set: &[VertexId]) -> Result<bool, ReductionError> {
        let idx = self.indices(set)?;
        Ok(self.first_conflict(&idx).is_none())
    }

    /// Same as [`MisGraph::is_independent`] for vertex indices.
    pub fn is_independent_indices(&self, set: &[usize]) -> bool {
        self.first_conflict(set).is_none()
    }

    /// Reads an assignment off an independent set with one vertex per clause.
    /// Chosen literals are made true; untouched variables default to false.
    pub fn decode(&self, set: &[VertexId]) -> Result<Assignment, ReductionError> {
        let idx = self.indices(set)?;
        self.decode_indices(&idx)
    }

    pub fn decode_indices(&self, set: &[usize]) -> Result<Assignment, ReductionError> {
        let distinct: BTreeSet<usize> = set.iter().copied().collect();
        if let Some(&bad) = distinct.iter().find(|&&i| i >= self.vertices.len()) {
            return Err(ReductionError::Invalid(format!(
                "vertex index {bad} out of range"
            )));
        }
        if let Some((a, b)) = self.first_conflict(set) {
            return Err(ReductionError::NotIndependent(
                self.vertex_id(a),
                self.vertex_id(b),
            ));
        }
        if distinct.len() != self.num_clauses {
            return Err(ReductionError::WrongSize {
                expected: self.num_clauses,
                got: distinct.len(),
            });
        }
        let mut values: Vec<Option<bool>> = vec![None; self.num_variables];
        for &i in &distinct {
            let lit = self.vertices[i].literal();
            let slot = &mut values[lit.variable() as usize - 1];
            let want = !lit.is_negated();
            match *slot {
                Some(v) if v != want => {
                    return Err(ReductionError::ConflictingDemands(lit.variable()))
                }
                _ => *slot = Some(want),
            }
        }
        Ok(Assignment::new(
            values.into_iter().map(|v| v.unwrap_or(false)).collect(),
        ))
    }
}
