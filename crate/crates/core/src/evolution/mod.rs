//! Quasi-adiabatic sweeps: drive schedules, closed- and open-system
//! integration, fidelities and instantaneous gap scans.
//!
//! Closed dynamics use a fourth-order commutator-free Magnus step whose two
//! exponentials are applied with a scaled Taylor series. Open dynamics either
//! unravel the Lindblad equation into quantum-jump trajectories or integrate
//! the density matrix directly (small systems only).

mod open;
mod propagate;
mod schedule;

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hamiltonian::{self, HamiltonianError, RydbergSystem, Space};

pub use open::{evolve_open, OpenMode, MAX_DENSITY_ATOMS};
pub use propagate::{evolve, evolve_from};
pub use schedule::{default_schedule, Schedule, Segment};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvolutionError {
    #[error("invalid schedule: {0}")]
    BadSchedule(String),
    #[error("invalid options: {0}")]
    BadOptions(String),
    #[error("adaptive stepping failed near t = {time} μs (step {step:e} μs)")]
    StepRejection { time: f64, step: f64 },
    #[error("density-matrix mode supports at most {MAX_DENSITY_ATOMS} atoms, got {0}")]
    DensityTooLarge(usize),
    #[error("state has dimension {state}, reference has {reference}")]
    DimensionMismatch { state: usize, reference: usize },
    #[error(transparent)]
    Hamiltonian(#[from] HamiltonianError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Method {
    Fixed,
    /// Step doubling with a per-step error target on the state vector.
    Adaptive {
        tolerance: f64,
    },
}

/// Collapse rates in rad/μs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseRates {
    pub gamma_decay: f64,
    pub gamma_dephase: f64,
}

impl NoiseRates {
    pub fn from_mhz(gamma_decay: f64, gamma_dephase: f64) -> Self {
        Self {
            gamma_decay: hamiltonian::mhz(gamma_decay),
            gamma_dephase: hamiltonian::mhz(gamma_dephase),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.gamma_decay == 0.0 && self.gamma_dephase == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Step in μs (initial step for the adaptive method).
    pub dt: f64,
    pub method: Method,
    pub trajectories: usize,
    pub noise: NoiseRates,
    /// Per-atom factors on Ω; empty means uniform.
    pub rabi_inhomogeneity: Vec<f64>,
    pub seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            method: Method::Fixed,
            trajectories: 200,
            noise: NoiseRates::default(),
            rabi_inhomogeneity: Vec::new(),
            seed: 1,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: String| Err(EvolutionError::BadOptions(m));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if let Method::Adaptive { tolerance } = self.method {
            if !(tolerance > 0.0) {
                return bad("adaptive tolerance must be positive".into());
            }
        }
        let rates = [self.noise.gamma_decay, self.noise.gamma_dephase];
        if rates.iter().any(|r| !(*r >= 0.0 && r.is_finite())) {
            return bad("noise rates must be non-negative".into());
        }
        if self
            .rabi_inhomogeneity
            .iter()
            .any(|f| !(*f > 0.0 && f.is_finite()))
        {
            return bad("Rabi factors must be positive".into());
        }
        Ok(())
    }

    pub(crate) fn system_for(
        &self,
        system: &RydbergSystem,
    ) -> Result<RydbergSystem, EvolutionError> {
        if self.rabi_inhomogeneity.is_empty() {
            Ok(system.clone())
        } else {
            Ok(system.with_rabi_factors(&self.rabi_inhomogeneity)?)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StateKind {
    Pure(Vec<C64>),
    /// Normalized trajectories, equally weighted.
    Ensemble(Vec<Vec<C64>>),
    Density(DMatrix<C64>),
}

/// A state over the basis of a [`Space`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    pub space: Arc<Space>,
    pub kind: StateKind,
}

impl QuantumState {
    /// `|0…0⟩`.
    pub fn ground(space: Arc<Space>) -> Self {
        let mut v = vec![C64::new(0.0, 0.0); space.dim()];
        let zero = space
            .index_of(0)
            .expect("the empty configuration is always allowed");
        v[zero] = C64::new(1.0, 0.0);
        Self {
            space,
            kind: StateKind::Pure(v),
        }
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Configuration probabilities aligned with `space.configs()`.
    pub fn probabilities(&self) -> Vec<f64> {
        match &self.kind {
            StateKind::Pure(v) => v.iter().map(|a| a.norm_sqr()).collect(),
            StateKind::Ensemble(runs) => {
                let mut p = vec![0.0; self.dim()];
                for v in runs {
                    for (acc, a) in p.iter_mut().zip(v) {
                        *acc += a.norm_sqr();
                    }
                }
                let n = runs.len().max(1) as f64;
                p.iter_mut().for_each(|x| *x /= n);
                p
            }
            StateKind::Density(rho) => (0..self.dim()).map(|i| rho[(i, i)].re).collect(),
        }
    }

    /// `‖ψ‖²`, mean trajectory norm, or `tr ρ`.
    pub fn norm(&self) -> f64 {
        self.probabilities().iter().sum()
    }

    /// Probabilities keyed by configuration bitmask, dropping entries below `threshold`.
    pub fn config_probabilities(&self, threshold: f64) -> Vec<(u64, f64)> {
        self.space
            .configs()
            .iter()
            .copied()
            .zip(self.probabilities())
            .filter(|&(_, p)| p > threshold)
            .collect()
    }

    /// Expectation of a diagonal observable (one value per basis state) and
    /// its standard error over trajectories; the error is zero for pure and
    /// density states.
    pub fn diagonal_expectation(&self, observable: &[f64]) -> (f64, f64) {
        let eval = |v: &[C64]| -> f64 {
            v.iter()
                .zip(observable)
                .map(|(a, o)| a.norm_sqr() * o)
                .sum()
        };
        match &self.kind {
            StateKind::Pure(v) => (eval(v), 0.0),
            StateKind::Density(rho) => (
                (0..self.dim())
                    .map(|i| rho[(i, i)].re * observable[i])
                    .sum(),
                0.0,
            ),
            StateKind::Ensemble(runs) => {
                let values: Vec<f64> = runs.iter().map(|v| eval(v)).collect();
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = if n > 1.0 {
                    values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
                } else {
                    0.0
                };
                (mean, (var / n).sqrt())
            }
        }
    }
}

/// What a fidelity is measured against.
#[derive(Debug, Clone, PartialEq)]
pub enum Reference {
    State(Vec<C64>),
    /// Orthonormal basis of a (degenerate) manifold.
    Manifold(Vec<Vec<C64>>),
}

impl Reference {
    pub fn from_real(vector: &[f64]) -> Self {
        Self::State(vector.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// A real vector over `from`, re-indexed onto `to` by configuration.
    /// Configurations missing from `to` must carry zero amplitude.
    pub fn transfer(from: &Space, vector: &[f64], to: &Space) -> Result<Self, EvolutionError> {
        let mut out = vec![C64::new(0.0, 0.0); to.dim()];
        for (&config, &x) in from.configs().iter().zip(vector) {
            match to.index_of(config) {
                Some(i) => out[i] = C64::new(x, 0.0),
                None if x == 0.0 => {}
                None => {
                    return Err(EvolutionError::DimensionMismatch {
                        state: to.dim(),
                        reference: from.dim(),
                    })
                }
            }
        }
        Ok(Self::State(out))
    }

    /// Manifold spanned by computational configurations.
    pub fn configurations(space: &Space, configs: &[u64]) -> Self {
        Self::Manifold(
            configs
                .iter()
                .filter_map(|&c| space.index_of(c))
                .map(|i| {
                    let mut v = vec![C64::new(0.0, 0.0); space.dim()];
                    v[i] = C64::new(1.0, 0.0);
                    v
                })
                .collect(),
        )
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Self::State(v) => Some(v.len()),
            Self::Manifold(b) => b.first().map(Vec::len),
        }
    }

    fn basis(&self) -> &[Vec<C64>] {
        match self {
            Self::State(v) => std::slice::from_ref(v),
            Self::Manifold(b) => b,
        }
    }
}

fn overlap_sq(basis: &[Vec<C64>], v: &[C64]) -> f64 {
    basis
        .iter()
        .map(|b| {
            b.iter()
                .zip(v)
                .map(|(x, y)| x.conj() * y)
                .sum::<C64>()
                .norm_sqr()
        })
        .sum()
}

/// `Σ_b |⟨b|ψ⟩|²` over the reference basis, averaged over trajectories, or
/// `Σ_b ⟨b|ρ|b⟩` for a density matrix.
pub fn fidelity(state: &QuantumState, reference: &Reference) -> Result<f64, EvolutionError> {
    if let Some(d) = reference.dim() {
        if d != state.dim() {
            return Err(EvolutionError::DimensionMismatch {
                state: state.dim(),
                reference: d,
            });
        }
    }
    let basis = reference.basis();
    let f = match &state.kind {
        StateKind::Pure(v) => overlap_sq(basis, v),
        StateKind::Ensemble(runs) => {
            runs.iter().map(|v| overlap_sq(basis, v)).sum::<f64>() / runs.len().max(1) as f64
        }
        StateKind::Density(rho) => basis
            .iter()
            .map(|b| {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..b.len() {
                    if b[i] == C64::new(0.0, 0.0) {
                        continue;
                    }
                    for j in 0..b.len() {
                        acc += b[i].conj() * rho[(i, j)] * b[j];
                    }
                }
                acc.re
            })
            .sum(),
    };
    Ok(f.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapPoint {
    /// μs
    pub time: f64,
    /// rad/μs
    pub gap: f64,
    pub manifold_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapScan {
    pub points: Vec<GapPoint>,
    pub min_gap: f64,
    pub min_time: f64,
}

/// Largest atom count accepted by [`gap_scan`].
pub const MAX_GAP_SCAN_ATOMS: usize = 14;

/// Gaps between the ground manifold and the next level at `num_points`
/// evenly spaced times, endpoints included.
pub fn gap_scan(
    system: &RydbergSystem,
    schedule: &Schedule,
    num_points: usize,
) -> Result<GapScan, EvolutionError> {
    if system.num_atoms() > MAX_GAP_SCAN_ATOMS {
        return Err(HamiltonianError::TooManyAtoms {
            atoms: system.num_atoms(),
            limit: MAX_GAP_SCAN_ATOMS,
        }
        .into());
    }
    let num_points = num_points.max(2);
    let total = schedule.total_time();
    let mut points = Vec::with_capacity(num_points);
    for i in 0..num_points {
        let time = total * i as f64 / (num_points - 1) as f64;
        let op = system.operator(schedule.at(time));
        let spectrum = hamiltonian::lowest_levels(&op)?;
        points.push(GapPoint {
            time,
            gap: spectrum.gap().unwrap_or(f64::INFINITY),
            manifold_size: spectrum.ground_manifold().len(),
        });
    }
    let min = points
        .iter()
        .min_by(|a, b| a.gap.total_cmp(&b.gap))
        .expect("at least two points");
    Ok(GapScan {
        min_gap: min.gap,
        min_time: min.time,
        points,
    })
}
