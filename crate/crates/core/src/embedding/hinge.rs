//! Out-of-plane folding of clause gadgets about hinge axes.
//!
//! For a star-shaped layout (every inter edge touches one central literal
//! atom) each clause gadget can be rotated rigidly about an axis through the
//! central atom. For a gadget not containing the centre the axis runs along
//! its edge to the centre, so the hinge atom stays put and all edge lengths
//! survive. The centre's own clause tilts about the in-plane perpendicular to
//! the direction of its partner atoms. `alpha` scales every target angle.

use nalgebra::{Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::{residual_stats, validate_geometry, Embedding, EmbeddingError};
use crate::reduction::EdgeKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hinge {
    pub clause: usize,
    /// Atoms that move with this gadget.
    pub atoms: Vec<usize>,
    /// Axis direction; the axis passes through the central atom.
    pub axis: [f64; 3],
    /// Rotation at `alpha = 1`, radians.
    pub angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HingeSpec {
    pub center: usize,
    pub hinges: Vec<Hinge>,
}

impl HingeSpec {
    /// Recognizes the star-of-gadgets pattern. Angles start at zero; see
    /// [`optimize_hinge_angles`].
    pub fn detect(e: &Embedding) -> Result<Self, EmbeddingError> {
        let undefined = |m: String| EmbeddingError::HingeUndefined(m);
        let g = &e.graph;
        if !e.wires.is_empty() {
            return Err(undefined(
                "layouts with quantum wires have no automatic hinges".into(),
            ));
        }
        if e.sites.iter().any(|s| s.position[2].abs() > 1e-9) {
            return Err(undefined("automatic hinges need a planar layout".into()));
        }
        let inter: Vec<_> = g
            .edges()
            .iter()
            .filter(|x| x.kind == EdgeKind::Inter)
            .collect();
        let center = (0..g.num_vertices())
            .filter(|&c| !inter.is_empty() && inter.iter().all(|x| x.a == c || x.b == c))
            .collect::<Vec<_>>();
        let &[center] = center.as_slice() else {
            return Err(undefined(
                "no unique central atom carrying every inter-clause edge".into(),
            ));
        };
        let c_clause = g.vertices()[center].clause;
        let c_pos = e.sites[center].vector();
        let mut hinges = Vec::new();
        for j in 0..g.num_clauses() {
            let members: Vec<usize> = g.clause_vertices(j).collect();
            if j == c_clause {
                let atoms: Vec<usize> = members.into_iter().filter(|&v| v != center).collect();
                if atoms.is_empty() {
                    continue;
                }
                let centroid = atoms
                    .iter()
                    .map(|&v| e.sites[v].vector())
                    .sum::<Vector3<f64>>()
                    / atoms.len() as f64;
                let axis = Vector3::z().cross(&(centroid - c_pos));
                if axis.norm() < 1e-9 {
                    return Err(undefined(format!("clause {j}: tilt axis is degenerate")));
                }
                hinges.push(Hinge {
                    clause: j,
                    atoms,
                    axis: axis.normalize().into(),
                    angle: 0.0,
                });
                continue;
            }
            let hinge_atoms: Vec<usize> = members
                .iter()
                .copied()
                .filter(|&v| g.simple_graph().has_edge(v, center))
                .collect();
            let &[h] = hinge_atoms.as_slice() else {
                return Err(undefined(format!(
                    "clause {j} is attached to the centre by {} atoms, expected exactly one",
                    hinge_atoms.len()
                )));
            };
            let axis = e.sites[h].vector() - c_pos;
            hinges.push(Hinge {
                clause: j,
                atoms: members.into_iter().filter(|&v| v != h).collect(),
                axis: axis.normalize().into(),
                angle: 0.0,
            });
        }
        Ok(Self { center, hinges })
    }

    fn positions_at(&self, e: &Embedding, alpha: f64) -> Vec<Vector3<f64>> {
        let mut positions = e.positions();
        let pivot = positions[self.center];
        for hinge in &self.hinges {
            let axis = Unit::new_normalize(Vector3::from(hinge.axis));
            let rotation = Rotation3::from_axis_angle(&axis, alpha * hinge.angle);
            for &a in &hinge.atoms {
                positions[a] = pivot + rotation * (positions[a] - pivot);
            }
        }
        positions
    }
}

/// Folds the gadgets of `e` by `alpha` times their target angles.
pub fn transform_alpha(
    e: &Embedding,
    alpha: f64,
    spec: &HingeSpec,
) -> Result<Embedding, EmbeddingError> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(EmbeddingError::BadAlpha(alpha));
    }
    if spec.center >= e.num_atoms() {
        return Err(EmbeddingError::HingeUndefined(format!(
            "centre atom {} missing",
            spec.center
        )));
    }
    for h in &spec.hinges {
        if Vector3::from(h.axis).norm() < 1e-12 {
            return Err(EmbeddingError::HingeUndefined(format!(
                "clause {}: zero axis",
                h.clause
            )));
        }
        if let Some(&bad) = h.atoms.iter().find(|&&a| a >= e.num_atoms()) {
            return Err(EmbeddingError::HingeUndefined(format!(
                "atom {bad} missing"
            )));
        }
    }
    if alpha == 0.0 {
        return Ok(e.clone());
    }
    let mut out = e.with_positions(&spec.positions_at(e, alpha));
    if out.sites.iter().any(|s| s.position[2].abs() > 1e-12) {
        out.dimension = 3;
    }
    let violations = validate_geometry(&out);
    if !violations.is_empty() {
        return Err(EmbeddingError::RotationBreaksInvariant { alpha, violations });
    }
    Ok(out)
}

/// Chooses hinge angles minimizing the mean residual at `alpha = 1`, subject
/// to the geometry staying valid along the whole path (checked at `path_points`
/// evenly spaced values of alpha).
pub fn optimize_hinge_angles(
    e: &Embedding,
    spec: &HingeSpec,
    c6_mhz: f64,
    path_points: usize,
) -> HingeSpec {
    let path_points = path_points.max(2);
    let score = |candidate: &HingeSpec| -> Option<f64> {
        for i in 1..=path_points {
            let alpha = i as f64 / path_points as f64;
            let moved = e.with_positions(&candidate.positions_at(e, alpha));
            if !validate_geometry(&moved).is_empty() {
                return None;
            }
            if i == path_points {
                return Some(residual_stats(&moved, c6_mhz).mean);
            }
        }
        None
    };

    let mut best = spec.clone();
    let mut best_score = score(&best).unwrap_or(f64::INFINITY);
    let coarse: Vec<f64> = (0..72)
        .map(|i| -std::f64::consts::PI + i as f64 * std::f64::consts::PI / 36.0)
        .collect();
    for &(grid, width) in &[
        (0usize, 0.0),
        (1, 5f64.to_radians()),
        (2, 0.5f64.to_radians()),
    ] {
        for _sweep in 0..3 {
            for h in 0..best.hinges.len() {
                let centre = best.hinges[h].angle;
                let values: Vec<f64> = if grid == 0 {
                    coarse.clone()
                } else {
                    (-10..=10)
                        .map(|k| centre + width * k as f64 / 10.0)
                        .collect()
                };
                for value in values {
                    let mut trial = best.clone();
                    trial.hinges[h].angle = value;
                    if let Some(s) = score(&trial) {
                        if s < best_score - 1e-12 {
                            best_score = s;
                            best = trial;
                        }
                    }
                }
            }
        }
    }
    best
}
