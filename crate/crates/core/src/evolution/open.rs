//! Decay (`σ⁻` at `gamma_decay`) and dephasing (`√(γφ/2)·σz`, so that
//! coherences decay at `gamma_dephase`) on every atom.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::propagate::{integrate, step_count, Stepper};
use super::{EvolutionError, QuantumState, Schedule, SimOptions, StateKind};
use crate::hamiltonian::{DriveParams, RydbergSystem, NO_FLIP};

pub const MAX_DENSITY_ATOMS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpenMode {
    Trajectories,
    Density,
}

/// Noisy sweep from `|0…0⟩`. Trajectory mode always uses fixed steps of
/// `options.dt`; trajectory `k` draws from a generator seeded with
/// `options.seed + k`.
pub fn evolve_open(
    system: &RydbergSystem,
    schedule: &Schedule,
    options: &SimOptions,
    mode: OpenMode,
) -> Result<QuantumState, EvolutionError> {
    options.validate()?;
    let system = options.system_for(system)?;
    match mode {
        OpenMode::Trajectories => {
            if options.trajectories == 0 {
                return Err(EvolutionError::BadOptions(
                    "at least one trajectory is needed".into(),
                ));
            }
            let runs = (0..options.trajectories)
                .into_par_iter()
                .map(|k| {
                    trajectory(
                        &system,
                        schedule,
                        options,
                        options.seed.wrapping_add(k as u64),
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(QuantumState {
                space: system.space().clone(),
                kind: StateKind::Ensemble(runs),
            })
        }
        OpenMode::Density => {
            if system.num_atoms() > MAX_DENSITY_ATOMS {
                return Err(EvolutionError::DensityTooLarge(system.num_atoms()));
            }
            let rho = lindblad(&system, schedule, options);
            Ok(QuantumState {
                space: system.space().clone(),
                kind: StateKind::Density(rho),
            })
        }
    }
}

fn damping(system: &RydbergSystem, options: &SimOptions) -> Vec<f64> {
    let n = system.num_atoms() as f64;
    let (gd, gp) = (options.noise.gamma_decay, options.noise.gamma_dephase);
    system
        .excitations()
        .iter()
        .map(|&k| 0.5 * (gd * k as f64 + n * gp / 2.0))
        .collect()
}

fn normalize(psi: &mut [C64]) {
    let n = psi.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    psi.iter_mut().for_each(|a| *a /= n);
}

fn trajectory(
    system: &RydbergSystem,
    schedule: &Schedule,
    options: &SimOptions,
    seed: u64,
) -> Result<Vec<C64>, EvolutionError> {
    let mut psi = vec![C64::default(); system.dim()];
    psi[system.space().index_of(0).expect("empty configuration")] = C64::new(1.0, 0.0);
    let mut stepper = Stepper::new(system.clone());
    if options.noise.is_zero() {
        integrate(&mut stepper, schedule, options, &mut psi)?;
        return Ok(psi);
    }
    let gamma = damping(system, options);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut threshold: f64 = rng.random();
    let mut start = 0.0;
    for (index, segment) in schedule.segments().iter().enumerate() {
        let drive_at = |t: f64| schedule.at_in(index, start, t);
        let n = step_count(segment.duration, options.dt);
        let h = segment.duration / n as f64;
        for k in 0..n {
            stepper.step(drive_at, start + k as f64 * h, h, Some(&gamma), &mut psi);
            let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
            if norm < threshold {
                jump(system, options, &mut psi, &mut rng);
                normalize(&mut psi);
                threshold = rng.random();
            }
        }
        start += segment.duration;
    }
    normalize(&mut psi);
    Ok(psi)
}

/// Applies one collapse operator chosen with probability proportional to
/// `⟨ψ|L†L|ψ⟩`.
fn jump(system: &RydbergSystem, options: &SimOptions, psi: &mut [C64], rng: &mut ChaCha8Rng) {
    let n = system.num_atoms();
    let configs = system.space().configs();
    let norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
    let mut weights = Vec::with_capacity(2 * n);
    for i in 0..n {
        let excited: f64 = configs
            .iter()
            .zip(psi.iter())
            .filter(|(s, _)| (*s >> i) & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        weights.push(options.noise.gamma_decay * excited);
    }
    for _ in 0..n {
        weights.push(options.noise.gamma_dephase / 2.0 * norm);
    }
    let total: f64 = weights.iter().sum();
    let mut pick = rng.random::<f64>() * total;
    let mut channel = weights.len() - 1;
    for (c, w) in weights.iter().enumerate() {
        if pick < *w {
            channel = c;
            break;
        }
        pick -= w;
    }
    let flips = system.flips();
    if channel < n {
        let i = channel;
        let mut out = vec![C64::default(); psi.len()];
        for (s, &config) in configs.iter().enumerate() {
            if (config >> i) & 1 == 1 {
                out[flips[s * n + i] as usize] += psi[s];
            }
        }
        psi.copy_from_slice(&out);
    } else {
        let i = channel - n;
        for (s, &config) in configs.iter().enumerate() {
            if (config >> i) & 1 == 1 {
                psi[s] = -psi[s];
            }
        }
    }
}

/// Lindblad generator applied to a column-major density matrix.
struct Generator<'a> {
    system: &'a RydbergSystem,
    gamma: Vec<f64>,
    decay: f64,
    dephase: f64,
    column: Vec<C64>,
}

impl Generator<'_> {
    fn apply(&mut self, drive: DriveParams, rho: &[C64], out: &mut [C64]) {
        let dim = self.system.dim();
        let n = self.system.num_atoms();
        // A = H_eff ρ, column by column.
        for j in 0..dim {
            self.system.apply(
                drive,
                Some(&self.gamma),
                &rho[j * dim..(j + 1) * dim],
                &mut self.column,
            );
            out[j * dim..(j + 1) * dim].copy_from_slice(&self.column);
        }
        // −i(A − A†)
        let minus_i = C64::new(0.0, -1.0);
        for j in 0..dim {
            for i in 0..=j {
                let a_ij = out[j * dim + i];
                let a_ji = out[i * dim + j];
                let v_ij = minus_i * (a_ij - a_ji.conj());
                out[j * dim + i] = v_ij;
                out[i * dim + j] = v_ij.conj();
            }
        }
        let configs = self.system.space().configs();
        let flips = self.system.flips();
        if self.decay > 0.0 {
            for atom in 0..n {
                for (t, &ct) in configs.iter().enumerate() {
                    if (ct >> atom) & 1 == 0 {
                        continue;
                    }
                    let t2 = flips[t * n + atom];
                    debug_assert_ne!(t2, NO_FLIP);
                    for (s, &cs) in configs.iter().enumerate() {
                        if (cs >> atom) & 1 == 1 {
                            let s2 = flips[s * n + atom] as usize;
                            out[t2 as usize * dim + s2] += self.decay * rho[t * dim + s];
                        }
                    }
                }
            }
        }
        if self.dephase > 0.0 {
            for (t, &ct) in configs.iter().enumerate() {
                for (s, &cs) in configs.iter().enumerate() {
                    // Σ_i z_i(s) z_i(t) = N − 2·popcount(s ⊕ t)
                    let z = n as f64 - 2.0 * (cs ^ ct).count_ones() as f64;
                    out[t * dim + s] += self.dephase / 2.0 * z * rho[t * dim + s];
                }
            }
        }
    }
}

fn lindblad(system: &RydbergSystem, schedule: &Schedule, options: &SimOptions) -> DMatrix<C64> {
    let dim = system.dim();
    let mut rho = vec![C64::default(); dim * dim];
    let zero = system.space().index_of(0).expect("empty configuration");
    rho[zero * dim + zero] = C64::new(1.0, 0.0);
    let mut generator = Generator {
        system,
        gamma: damping(system, options),
        decay: options.noise.gamma_decay,
        dephase: options.noise.gamma_dephase,
        column: vec![C64::default(); dim],
    };
    let mut k = [(); 4].map(|_| vec![C64::default(); dim * dim]);
    let mut stage = vec![C64::default(); dim * dim];
    let mut start = 0.0;
    for (index, segment) in schedule.segments().iter().enumerate() {
        let n = step_count(segment.duration, options.dt);
        let h = segment.duration / n as f64;
        for step in 0..n {
            let t = start + step as f64 * h;
            let drives = [
                schedule.at_in(index, start, t),
                schedule.at_in(index, start, t + h / 2.0),
                schedule.at_in(index, start, t + h / 2.0),
                schedule.at_in(index, start, t + h),
            ];
            let coefficients = [0.0, h / 2.0, h / 2.0, h];
            for s in 0..4 {
                if s == 0 {
                    stage.copy_from_slice(&rho);
                } else {
                    for ((x, r), d) in stage.iter_mut().zip(&rho).zip(&k[s - 1]) {
                        *x = r + d * coefficients[s];
                    }
                }
                generator.apply(drives[s], &stage, &mut k[s]);
            }
            for (i, r) in rho.iter_mut().enumerate() {
                *r += (k[0][i] + k[1][i] * 2.0 + k[2][i] * 2.0 + k[3][i]) * (h / 6.0);
            }
        }
        start += segment.duration;
    }
    DMatrix::from_vec(dim, dim, rho)
}
