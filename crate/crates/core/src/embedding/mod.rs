//! Physical atom layouts for MIS graphs.
//!
//! Literal atoms come first (atom `i` is vertex `i` of the source graph),
//! followed by the auxiliary atoms of each quantum wire in wire order. Edged
//! atoms sit at distance `d`; every other pair must be farther apart than the
//! blockade distance `d_B`. Logical edges that cannot be realized directly
//! are mediated by an even-length chain of auxiliary atoms.

mod hinge;
mod optimize;

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reduction::{MisGraph, VertexId};

pub use hinge::{optimize_hinge_angles, transform_alpha, Hinge, HingeSpec};
pub use optimize::{embed, optimize_layout, EmbedOptions, LayoutProblem, LayoutResult};

/// Default van der Waals coefficient `C6/2π` in MHz·μm⁶.
pub const DEFAULT_C6_MHZ: f64 = 1.0e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmbeddingError {
    #[error("no valid geometry after {restarts} restarts; violations: {}", format_violations(.violations))]
    Infeasible {
        restarts: usize,
        violations: Vec<Violation>,
    },
    #[error("dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("invalid geometry parameters: {0}")]
    BadParams(String),
    #[error("hinge undefined: {0}")]
    HingeUndefined(String),
    #[error("rotation at alpha = {alpha} breaks the geometry: {}", format_violations(.violations))]
    RotationBreaksInvariant {
        alpha: f64,
        violations: Vec<Violation>,
    },
    #[error("alpha must lie in [0, 1], got {0}")]
    BadAlpha(f64),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryParams {
    /// Edge length, μm.
    pub d: f64,
    /// Blockade distance, μm.
    pub d_blockade: f64,
    /// Allowed deviation of an edge from `d`, μm.
    pub edge_tolerance: f64,
    /// Separation the optimizer targets for non-edged pairs, μm (> `d_blockade`).
    pub min_separation: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            d: 7.0,
            d_blockade: 10.0,
            edge_tolerance: 0.01,
            min_separation: 10.2,
        }
    }
}

impl GeometryParams {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        let bad = |m: &str| Err(EmbeddingError::BadParams(m.to_string()));
        if !(self.d > 0.0 && self.d < self.d_blockade) {
            return bad("need 0 < d < d_B");
        }
        if !(self.edge_tolerance > 0.0 && self.edge_tolerance < 0.1 * (self.d_blockade - self.d)) {
            return bad("edge tolerance must be positive and well below d_B - d");
        }
        if self.min_separation <= self.d_blockade {
            return bad("min_separation must exceed d_B");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteRole {
    Literal { vertex: VertexId },
    Auxiliary { wire: usize, position: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSite {
    pub id: usize,
    pub role: SiteRole,
    /// μm
    pub position: [f64; 3],
}

impl AtomSite {
    pub fn vector(&self) -> Vector3<f64> {
        Vector3::from(self.position)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Wire {
    pub id: usize,
    pub endpoints: [VertexId; 2],
    /// Auxiliary atom ids from the first endpoint to the second.
    pub chain: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub dimension: usize,
    pub params: GeometryParams,
    pub graph: MisGraph,
    pub sites: Vec<AtomSite>,
    pub wires: Vec<Wire>,
    /// Pairs `(a, b)` with `a < b`, sorted.
    pub physical_edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    EdgeLength { a: usize, b: usize, distance: f64 },
    Blockade { a: usize, b: usize, distance: f64 },
    NonFinite { atom: usize },
    UncoveredEdge { a: usize, b: usize },
    OddWire { wire: usize, length: usize },
    Malformed { reason: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::EdgeLength { a, b, distance } => {
                write!(f, "edge {a}-{b} has length {distance:.4} μm")
            }
            Self::Blockade { a, b, distance } => {
                write!(
                    f,
                    "non-edged pair {a}-{b} at {distance:.4} μm is inside the blockade distance"
                )
            }
            Self::NonFinite { atom } => write!(f, "atom {atom} has a non-finite position"),
            Self::UncoveredEdge { a, b } => {
                write!(f, "logical edge {a}-{b} is neither physical nor wired")
            }
            Self::OddWire { wire, length } => write!(f, "wire {wire} has odd length {length}"),
            Self::Malformed { reason } => write!(f, "{reason}"),
        }
    }
}

impl Embedding {
    pub fn num_atoms(&self) -> usize {
        self.sites.len()
    }

    pub fn num_literal_atoms(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn positions(&self) -> Vec<Vector3<f64>> {
        self.sites.iter().map(AtomSite::vector).collect()
    }

    pub fn distance(&self, a: usize, b: usize) -> f64 {
        (self.sites[a].vector() - self.sites[b].vector()).norm()
    }

    pub fn is_physical_edge(&self, a: usize, b: usize) -> bool {
        self.physical_edges
            .binary_search(&(a.min(b), a.max(b)))
            .is_ok()
    }

    /// All atom pairs without a physical edge.
    pub fn non_edges(&self) -> Vec<(usize, usize)> {
        let n = self.num_atoms();
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if !self.is_physical_edge(a, b) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    /// Auxiliary atom chains, as atom ids.
    pub fn wire_chains(&self) -> Vec<Vec<usize>> {
        self.wires.iter().map(|w| w.chain.clone()).collect()
    }

    /// Position table for plotting: `id,role,label,x,y,z`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,role,label,x_um,y_um,z_um\n");
        for site in &self.sites {
            let (role, label) = match site.role {
                SiteRole::Literal { vertex } => {
                    let idx = self.graph.index_of(vertex).unwrap_or(site.id);
                    ("literal", self.graph.label(idx))
                }
                SiteRole::Auxiliary { wire, position } => {
                    ("auxiliary", format!("w{wire}.{position}"))
                }
            };
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                site.id, role, label, site.position[0], site.position[1], site.position[2]
            ));
        }
        out
    }

    pub fn with_positions(&self, positions: &[Vector3<f64>]) -> Self {
        let mut out = self.clone();
        for (site, p) in out.sites.iter_mut().zip(positions) {
            site.position = [p.x, p.y, p.z];
        }
        out
    }
}

/// Every way in which `e` fails the geometric contract; empty when valid.
pub fn validate_geometry(e: &Embedding) -> Vec<Violation> {
    let mut out = Vec::new();
    let n = e.num_atoms();
    for (i, site) in e.sites.iter().enumerate() {
        if site.id != i {
            out.push(Violation::Malformed {
                reason: format!("site {i} carries id {}", site.id),
            });
        }
        if site.position.iter().any(|c| !c.is_finite()) {
            out.push(Violation::NonFinite { atom: i });
        }
    }
    if e.physical_edges.iter().any(|&(a, b)| a >= b || b >= n) {
        out.push(Violation::Malformed {
            reason: "physical edge list is not normalized".into(),
        });
        return out;
    }
    for w in &e.wires {
        if w.chain.is_empty() || w.chain.len() % 2 == 1 {
            out.push(Violation::OddWire {
                wire: w.id,
                length: w.chain.len(),
            });
        }
    }
    for &(a, b) in &e.physical_edges {
        let r = e.distance(a, b);
        if (r - e.params.d).abs() > e.params.edge_tolerance || !r.is_finite() {
            out.push(Violation::EdgeLength { a, b, distance: r });
        }
    }
    for (a, b) in e.non_edges() {
        let r = e.distance(a, b);
        if r <= e.params.d_blockade || !r.is_finite() {
            out.push(Violation::Blockade { a, b, distance: r });
        }
    }
    let wired: BTreeSet<(usize, usize)> = e
        .wires
        .iter()
        .filter_map(|w| {
            let a = e.graph.index_of(w.endpoints[0])?;
            let b = e.graph.index_of(w.endpoints[1])?;
            Some((a.min(b), a.max(b)))
        })
        .collect();
    for edge in e.graph.edges() {
        if !e.is_physical_edge(edge.a, edge.b) && !wired.contains(&(edge.a, edge.b)) {
            out.push(Violation::UncoveredEdge {
                a: edge.a,
                b: edge.b,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairResidual {
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    /// `C6 / r⁶` in MHz (divided by 2π).
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualStats {
    pub mean: f64,
    pub max: f64,
    pub pairs: Vec<PairResidual>,
}

/// Van der Waals couplings between atom pairs without a physical edge.
/// `c6_mhz` is `C6/2π` in MHz·μm⁶; strengths are reported in MHz.
pub fn residual_stats(e: &Embedding, c6_mhz: f64) -> ResidualStats {
    let pairs: Vec<PairResidual> = e
        .non_edges()
        .into_iter()
        .map(|(a, b)| {
            let distance = e.distance(a, b);
            PairResidual {
                a,
                b,
                distance,
                strength: c6_mhz / distance.powi(6),
            }
        })
        .collect();
    let mean = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| p.strength).sum::<f64>() / pairs.len() as f64
    };
    let max = pairs.iter().map(|p| p.strength).fold(0.0, f64::max);
    ResidualStats { mean, max, pairs }
}
