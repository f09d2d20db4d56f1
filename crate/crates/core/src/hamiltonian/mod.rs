//! Rydberg Hamiltonian `H = Σ U_jk n_j n_k − Δ Σ n_j + (Ω/2) Σ σx_j`.
//!
//! Units: ħ = 1, frequencies in rad/μs (angular MHz), time in μs. Atom `i`
//! is bit `i` of a basis configuration; `|0⟩` is the ground state and `|1⟩`
//! the Rydberg state.
//!
//! Three interaction models are supported. `GraphU` puts a constant `u` on
//! every edge, `VdW` uses `C6/r⁶` between all pairs of an embedding, and
//! `Ideal` treats edges as hard constraints by restricting the Hilbert space
//! to independent sets (the `U → ∞` limit).

mod eigen;
mod space;

use std::f64::consts::TAU;
use std::sync::Arc;

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::Embedding;
use crate::graph::SimpleGraph;
use crate::reduction::MisGraph;

pub use eigen::{
    degenerate, ground_state, lowest_levels, weak_drive_ground_state, Eigenpair, Spectrum,
    DEGENERACY_TOLERANCE,
};
pub use space::Space;

/// Largest atom count for the unrestricted `2^N` space.
pub const DEFAULT_MAX_FULL_ATOMS: usize = 16;
/// Largest atom count for the independent-set subspace.
pub const DEFAULT_MAX_RESTRICTED_ATOMS: usize = 24;

/// Converts a frequency in MHz (cycles) to rad/μs.
pub fn mhz(value: f64) -> f64 {
    value * TAU
}

/// Converts rad/μs back to MHz.
pub fn to_mhz(angular: f64) -> f64 {
    angular / TAU
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HamiltonianError {
    #[error("{atoms} atoms exceed the limit of {limit} for this model")]
    TooManyAtoms { atoms: usize, limit: usize },
    #[error("the van der Waals model needs atom positions")]
    MissingPositions,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("eigensolver did not converge (residual {residual:e})")]
    NoConvergence { residual: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveParams {
    /// Rabi frequency, rad/μs.
    pub omega: f64,
    /// Detuning, rad/μs.
    pub delta: f64,
}

impl DriveParams {
    pub fn new(omega: f64, delta: f64) -> Self {
        Self { omega, delta }
    }

    /// From values in MHz.
    pub fn from_mhz(omega: f64, delta: f64) -> Self {
        Self::new(mhz(omega), mhz(delta))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum InteractionModel {
    Ideal,
    /// Constant interaction on edges, rad/μs.
    GraphU {
        u: f64,
    },
    /// `C6` in rad/μs·μm⁶.
    VdW {
        c6: f64,
    },
}

impl InteractionModel {
    pub fn graph_u_mhz(u: f64) -> Self {
        Self::GraphU { u: mhz(u) }
    }

    pub fn vdw_mhz(c6: f64) -> Self {
        Self::VdW { c6: mhz(c6) }
    }

    fn validate(&self) -> Result<(), HamiltonianError> {
        match *self {
            Self::GraphU { u } if !(u > 0.0 && u.is_finite()) => Err(
                HamiltonianError::InvalidParameter(format!("u must be positive, got {u}")),
            ),
            Self::VdW { c6 } if !(c6 > 0.0 && c6.is_finite()) => Err(
                HamiltonianError::InvalidParameter(format!("c6 must be positive, got {c6}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Anything that can be turned into a set of interacting atoms.
pub trait AtomSource {
    fn num_atoms(&self) -> usize;
    /// Pairs coupled by the blockade graph.
    fn edges(&self) -> Vec<(usize, usize)>;
    fn positions(&self) -> Option<Vec<Vector3<f64>>> {
        None
    }
}

impl AtomSource for SimpleGraph {
    fn num_atoms(&self) -> usize {
        self.num_vertices()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        SimpleGraph::edges(self).to_vec()
    }
}

impl AtomSource for MisGraph {
    fn num_atoms(&self) -> usize {
        self.num_vertices()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        MisGraph::edges(self).iter().map(|e| (e.a, e.b)).collect()
    }
}

impl AtomSource for Embedding {
    fn num_atoms(&self) -> usize {
        Embedding::num_atoms(self)
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.physical_edges.clone()
    }

    fn positions(&self) -> Option<Vec<Vector3<f64>>> {
        Some(Embedding::positions(self))
    }
}

/// Pair couplings for a source under a model.
#[derive(Debug, Clone, PartialEq)]
pub enum Interactions {
    /// Edges that may never be doubly excited.
    Hard(Vec<(usize, usize)>),
    /// Symmetric coupling matrix `U_jk` in rad/μs with zero diagonal.
    Finite(DMatrix<f64>),
}

pub fn interactions(
    source: &impl AtomSource,
    model: InteractionModel,
) -> Result<Interactions, HamiltonianError> {
    model.validate()?;
    let n = source.num_atoms();
    match model {
        InteractionModel::Ideal => Ok(Interactions::Hard(source.edges())),
        InteractionModel::GraphU { u } => {
            let mut m = DMatrix::zeros(n, n);
            for (a, b) in source.edges() {
                m[(a, b)] = u;
                m[(b, a)] = u;
            }
            Ok(Interactions::Finite(m))
        }
        InteractionModel::VdW { c6 } => {
            let positions = source
                .positions()
                .ok_or(HamiltonianError::MissingPositions)?;
            let mut m = DMatrix::zeros(n, n);
            for a in 0..n {
                for b in a + 1..n {
                    let r = (positions[a] - positions[b]).norm();
                    m[(a, b)] = c6 / r.powi(6);
                    m[(b, a)] = m[(a, b)];
                }
            }
            Ok(Interactions::Finite(m))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemOptions {
    pub max_full_atoms: usize,
    pub max_restricted_atoms: usize,
}

impl Default for SystemOptions {
    fn default() -> Self {
        Self {
            max_full_atoms: DEFAULT_MAX_FULL_ATOMS,
            max_restricted_atoms: DEFAULT_MAX_RESTRICTED_ATOMS,
        }
    }
}

#[derive(Debug)]
struct SystemData {
    space: Arc<Space>,
    /// `Σ U_jk n_j n_k` per basis state.
    interaction: Vec<f64>,
    /// Number of Rydberg excitations per basis state.
    excitations: Vec<u32>,
    /// `flips[s * N + i]` is the index of `s` with atom `i` toggled, or `NO_FLIP`.
    flips: Vec<u32>,
}

pub(crate) const NO_FLIP: u32 = u32::MAX;

/// Drive-independent part of the Hamiltonian; produces an [`Operator`] for
/// any [`DriveParams`]. Cheap to clone.
#[derive(Debug, Clone)]
pub struct RydbergSystem {
    data: Arc<SystemData>,
    rabi_factors: Arc<[f64]>,
}

impl RydbergSystem {
    pub fn new(
        source: &impl AtomSource,
        model: InteractionModel,
    ) -> Result<Self, HamiltonianError> {
        Self::with_options(source, model, &SystemOptions::default())
    }

    pub fn with_options(
        source: &impl AtomSource,
        model: InteractionModel,
        options: &SystemOptions,
    ) -> Result<Self, HamiltonianError> {
        let n = source.num_atoms();
        let couplings = interactions(source, model)?;
        let space = match &couplings {
            Interactions::Hard(edges) => {
                if n > options.max_restricted_atoms {
                    return Err(HamiltonianError::TooManyAtoms {
                        atoms: n,
                        limit: options.max_restricted_atoms,
                    });
                }
                Space::independent_sets(n, edges)
            }
            Interactions::Finite(_) => {
                if n > options.max_full_atoms {
                    return Err(HamiltonianError::TooManyAtoms {
                        atoms: n,
                        limit: options.max_full_atoms,
                    });
                }
                Space::full(n)
            }
        };
        let interaction = match &couplings {
            Interactions::Hard(_) => vec![0.0; space.dim()],
            Interactions::Finite(u) => space
                .configs()
                .iter()
                .map(|&s| {
                    let mut e = 0.0;
                    for a in 0..n {
                        if (s >> a) & 1 == 0 {
                            continue;
                        }
                        for b in a + 1..n {
                            if (s >> b) & 1 == 1 {
                                e += u[(a, b)];
                            }
                        }
                    }
                    e
                })
                .collect(),
        };
        let excitations = space.configs().iter().map(|s| s.count_ones()).collect();
        let mut flips = Vec::with_capacity(space.dim() * n);
        for &s in space.configs() {
            for i in 0..n {
                flips.push(space.index_of(s ^ (1 << i)).map_or(NO_FLIP, |t| t as u32));
            }
        }
        Ok(Self {
            data: Arc::new(SystemData {
                space: Arc::new(space),
                interaction,
                excitations,
                flips,
            }),
            rabi_factors: vec![1.0; n].into(),
        })
    }

    /// Per-atom multiplicative factors on Ω.
    pub fn with_rabi_factors(&self, factors: &[f64]) -> Result<Self, HamiltonianError> {
        if factors.len() != self.num_atoms() {
            return Err(HamiltonianError::InvalidParameter(format!(
                "{} Rabi factors for {} atoms",
                factors.len(),
                self.num_atoms()
            )));
        }
        if factors.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(HamiltonianError::InvalidParameter(
                "Rabi factors must be positive".into(),
            ));
        }
        Ok(Self {
            data: Arc::clone(&self.data),
            rabi_factors: factors.into(),
        })
    }

    pub fn rabi_factors(&self) -> &[f64] {
        &self.rabi_factors
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.data.space
    }

    pub fn num_atoms(&self) -> usize {
        self.data.space.num_atoms()
    }

    pub fn dim(&self) -> usize {
        self.data.space.dim()
    }

    pub fn excitations(&self) -> &[u32] {
        &self.data.excitations
    }

    pub(crate) fn flips(&self) -> &[u32] {
        &self.data.flips
    }

    pub fn operator(&self, drive: DriveParams) -> Operator {
        Operator {
            system: self.clone(),
            drive,
        }
    }

    /// Diagonal of `H` at detuning `delta`.
    pub fn diagonal(&self, delta: f64) -> Vec<f64> {
        self.data
            .interaction
            .iter()
            .zip(&self.data.excitations)
            .map(|(u, &k)| u - delta * k as f64)
            .collect()
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_estimate(&self, drive: DriveParams) -> f64 {
        let off: f64 = self
            .rabi_factors
            .iter()
            .map(|f| (drive.omega * f).abs() / 2.0)
            .sum();
        let diag = self
            .data
            .interaction
            .iter()
            .zip(&self.data.excitations)
            .map(|(u, &k)| (u - drive.delta * k as f64).abs())
            .fold(0.0, f64::max);
        diag + off
    }

    /// `y = (H − i·damping) x`, where `damping` is an optional real diagonal.
    pub fn apply<T>(&self, drive: DriveParams, damping: Option<&[f64]>, x: &[T], y: &mut [T])
    where
        T: Kernel,
    {
        let n = self.num_atoms();
        let data = &*self.data;
        let couplings: Vec<f64> = self
            .rabi_factors
            .iter()
            .map(|f| 0.5 * drive.omega * f)
            .collect();
        let row = |s: usize| -> T {
            let d = data.interaction[s] - drive.delta * data.excitations[s] as f64;
            let mut acc = x[s].scale(d);
            if let Some(g) = damping {
                acc = acc.add(x[s].scale_imag(-g[s]));
            }
            if drive.omega != 0.0 {
                for (i, &t) in data.flips[s * n..(s + 1) * n].iter().enumerate() {
                    if t != NO_FLIP {
                        acc = acc.add(x[t as usize].scale(couplings[i]));
                    }
                }
            }
            acc
        };
        if y.len() >= PARALLEL_THRESHOLD {
            y.par_iter_mut()
                .enumerate()
                .for_each(|(s, out)| *out = row(s));
        } else {
            y.iter_mut().enumerate().for_each(|(s, out)| *out = row(s));
        }
    }
}

const PARALLEL_THRESHOLD: usize = 1 << 14;

/// Scalar types the operator kernel can act on.
pub trait Kernel: Copy + Send + Sync {
    fn scale(self, k: f64) -> Self;
    /// Multiplies by `i·k`; a no-op contribution for real scalars.
    fn scale_imag(self, k: f64) -> Self;
    fn add(self, other: Self) -> Self;
}

impl Kernel for f64 {
    fn scale(self, k: f64) -> Self {
        self * k
    }

    fn scale_imag(self, _k: f64) -> Self {
        0.0
    }

    fn add(self, other: Self) -> Self {
        self + other
    }
}

impl Kernel for C64 {
    fn scale(self, k: f64) -> Self {
        self * k
    }

    fn scale_imag(self, k: f64) -> Self {
        C64::new(-self.im * k, self.re * k)
    }

    fn add(self, other: Self) -> Self {
        self + other
    }
}

/// The Hamiltonian at fixed drive parameters.
#[derive(Debug, Clone)]
pub struct Operator {
    system: RydbergSystem,
    drive: DriveParams,
}

impl Operator {
    pub fn system(&self) -> &RydbergSystem {
        &self.system
    }

    pub fn drive(&self) -> DriveParams {
        self.drive
    }

    pub fn num_atoms(&self) -> usize {
        self.system.num_atoms()
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }

    pub fn space(&self) -> &Arc<Space> {
        self.system.space()
    }

    pub fn apply<T: Kernel>(&self, x: &[T], y: &mut [T]) {
        self.system.apply(self.drive, None, x, y);
    }

    pub fn apply_vec<T: Kernel + Default>(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::default(); x.len()];
        self.apply(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.system.diagonal(self.drive.delta)
    }

    pub fn is_diagonal(&self) -> bool {
        self.drive.omega == 0.0
    }

    pub fn norm_estimate(&self) -> f64 {
        self.system.norm_estimate(self.drive)
    }

    /// Dense real matrix; only sensible for small spaces.
    pub fn to_dense(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        let mut e = vec![0.0; dim];
        let mut col = vec![0.0; dim];
        for j in 0..dim {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            for i in 0..dim {
                m[(i, j)] = col[i];
            }
            e[j] = 0.0;
        }
        m
    }
}

/// Builds the operator for `source` under `model` at fixed `drive`.
pub fn build(
    source: &impl AtomSource,
    model: InteractionModel,
    drive: DriveParams,
) -> Result<Operator, HamiltonianError> {
    if !(drive.omega >= 0.0) {
        return Err(HamiltonianError::InvalidParameter(
            "omega must be non-negative".into(),
        ));
    }
    Ok(RydbergSystem::new(source, model)?.operator(drive))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::reduction::reduce;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn edge() -> SimpleGraph {
        SimpleGraph::new(2, [(0, 1)])
    }

    struct Pair(f64);

    impl AtomSource for Pair {
        fn num_atoms(&self) -> usize {
            2
        }

        fn edges(&self) -> Vec<(usize, usize)> {
            vec![(0, 1)]
        }

        fn positions(&self) -> Option<Vec<Vector3<f64>>> {
            Some(vec![Vector3::zeros(), Vector3::new(0.0, self.0, 0.0)])
        }
    }

    #[test]
    fn graph_u_coupling() {
        let Interactions::Finite(m) =
            interactions(&edge(), InteractionModel::GraphU { u: 3.0 }).unwrap()
        else {
            panic!("finite model expected");
        };
        assert_eq!(m[(0, 1)], 3.0);
        assert_eq!(m[(1, 0)], 3.0);
        assert_eq!(m[(0, 0)], 0.0);
    }

    #[test]
    fn vdw_coupling_values() {
        let e = Pair(7.0);
        let Interactions::Finite(m) = interactions(&e, InteractionModel::vdw_mhz(1e6)).unwrap()
        else {
            panic!("finite model expected");
        };
        // 10^6 / 7^6 = 8.4999...
        assert!((to_mhz(m[(0, 1)]) - 1e6 / 117_649.0).abs() < 1e-12);
        assert!((to_mhz(m[(0, 1)]) - 8.50).abs() < 0.01);

        let e = Pair(10.0);
        let Interactions::Finite(m) = interactions(&e, InteractionModel::vdw_mhz(1e6)).unwrap()
        else {
            panic!("finite model expected");
        };
        assert!((to_mhz(m[(0, 1)]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn vdw_needs_positions() {
        assert_eq!(
            interactions(&edge(), InteractionModel::vdw_mhz(1e6)),
            Err(HamiltonianError::MissingPositions)
        );
        assert!(interactions(&edge(), InteractionModel::GraphU { u: -1.0 }).is_err());
    }

    #[test]
    fn single_atom_diagonal() {
        let op = build(
            &SimpleGraph::empty(1),
            InteractionModel::GraphU { u: 1.0 },
            DriveParams::new(0.0, 2.5),
        )
        .unwrap();
        let h0 = op.apply_vec(&[1.0, 0.0]);
        let h1 = op.apply_vec(&[0.0, 1.0]);
        assert_eq!(h0, vec![0.0, 0.0]);
        assert_eq!(h1, vec![0.0, -2.5]);
    }

    #[test]
    fn two_atom_blockade_energies() {
        let (u, delta) = (5.0, 2.0);
        let op = build(
            &edge(),
            InteractionModel::GraphU { u },
            DriveParams::new(0.0, delta),
        )
        .unwrap();
        // Basis order: |00⟩, atom 0 excited, atom 1 excited, both.
        assert_eq!(op.diagonal(), vec![0.0, -delta, -delta, u - 2.0 * delta]);
    }

    #[test]
    fn independent_atoms_spectrum() {
        let omega = 1.3;
        let op = build(
            &SimpleGraph::empty(2),
            InteractionModel::GraphU { u: 1.0 },
            DriveParams::new(omega, 0.0),
        )
        .unwrap();
        let mut eig: Vec<f64> = op
            .to_dense()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        eig.sort_by(f64::total_cmp);
        let expected = [-omega, 0.0, 0.0, omega];
        for (a, b) in eig.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn hermitian_on_random_vectors() {
        let g = reduce(&fixtures::psi1());
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in [InteractionModel::Ideal, InteractionModel::graph_u_mhz(8.5)] {
            let system = RydbergSystem::new(&g, model)
                .unwrap()
                .with_rabi_factors(&[1.0, 0.9, 1.1, 1.0, 0.95, 1.05, 1.0, 0.8])
                .unwrap();
            let op = system.operator(DriveParams::from_mhz(1.0, 0.7));
            let rand_vec = |rng: &mut ChaCha8Rng| -> Vec<C64> {
                (0..op.dim())
                    .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                    .collect()
            };
            let psi = rand_vec(&mut rng);
            let phi = rand_vec(&mut rng);
            let h_phi = op.apply_vec(&phi);
            let h_psi = op.apply_vec(&psi);
            let lhs: C64 = psi.iter().zip(&h_phi).map(|(a, b)| a.conj() * b).sum();
            let rhs: C64 = phi
                .iter()
                .zip(&h_psi)
                .map(|(a, b)| a.conj() * b)
                .sum::<C64>()
                .conj();
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn ideal_subspace_counts_independent_sets() {
        let g = reduce(&fixtures::psi1()).simple_graph();
        let system = RydbergSystem::new(&g, InteractionModel::Ideal).unwrap();
        let count = (0u64..1 << g.num_vertices())
            .filter(|&m| g.is_independent_mask(m))
            .count();
        assert_eq!(system.dim(), count);
    }

    #[test]
    fn atom_limits() {
        let big = SimpleGraph::empty(17);
        assert!(matches!(
            RydbergSystem::new(&big, InteractionModel::GraphU { u: 1.0 }),
            Err(HamiltonianError::TooManyAtoms {
                atoms: 17,
                limit: 16
            })
        ));
        let path = SimpleGraph::new(25, (0..24).map(|i| (i, i + 1)));
        assert!(matches!(
            RydbergSystem::new(&path, InteractionModel::Ideal),
            Err(HamiltonianError::TooManyAtoms {
                atoms: 25,
                limit: 24
            })
        ));
    }
}
