use num_complex::Complex64 as C64;

use super::{EvolutionError, Method, QuantumState, Schedule, SimOptions, StateKind};
use crate::hamiltonian::{DriveParams, RydbergSystem};

const SQRT3: f64 = 1.732_050_807_568_877_2;
/// Gauss–Legendre nodes on [0, 1].
const NODES: [f64; 2] = [0.5 - SQRT3 / 6.0, 0.5 + SQRT3 / 6.0];
/// Weights of the two exponentials (the first applied uses `[A2, A1]`).
const A1: f64 = (3.0 - 2.0 * SQRT3) / 12.0;
const A2: f64 = (3.0 + 2.0 * SQRT3) / 12.0;

/// Largest `τ‖H‖` per Taylor substep.
const TAYLOR_THETA: f64 = 0.5;
const TAYLOR_MAX_TERMS: usize = 40;

/// Reusable buffers for propagating one state vector.
pub(crate) struct Stepper {
    system: RydbergSystem,
    term: Vec<C64>,
    next: Vec<C64>,
}

impl Stepper {
    pub(crate) fn new(system: RydbergSystem) -> Self {
        let dim = system.dim();
        Self {
            system,
            term: vec![C64::default(); dim],
            next: vec![C64::default(); dim],
        }
    }

    /// `ψ ← exp(−iτ(H − i·damping))ψ` by a scaled Taylor series.
    fn expm(&mut self, drive: DriveParams, damping: Option<&[f64]>, tau: f64, psi: &mut [C64]) {
        let mut norm = self.system.norm_estimate(drive);
        if let Some(g) = damping {
            norm += g.iter().copied().fold(0.0, f64::max);
        }
        let substeps = ((tau.abs() * norm) / TAYLOR_THETA).ceil().max(1.0) as usize;
        let h = tau / substeps as f64;
        let psi_norm: f64 = psi.iter().map(|a| a.norm_sqr()).sum();
        let cutoff = 1e-32 * psi_norm.max(1e-300);
        for _ in 0..substeps {
            self.term.copy_from_slice(psi);
            for k in 1..=TAYLOR_MAX_TERMS {
                self.system
                    .apply(drive, damping, &self.term, &mut self.next);
                // term_k = (−ih/k) H term_{k−1}
                let c = C64::new(0.0, -h / k as f64);
                let mut size = 0.0;
                for (t, n) in self.term.iter_mut().zip(&self.next) {
                    *t = c * n;
                    size += t.norm_sqr();
                }
                for (p, t) in psi.iter_mut().zip(&self.term) {
                    *p += t;
                }
                if size <= cutoff {
                    break;
                }
            }
        }
    }

    /// One fourth-order commutator-free Magnus step of length `h` starting at
    /// `t`, with the drive evaluated by `drive_at`.
    pub(crate) fn step(
        &mut self,
        drive_at: impl Fn(f64) -> DriveParams,
        t: f64,
        h: f64,
        damping: Option<&[f64]>,
        psi: &mut [C64],
    ) {
        let d1 = drive_at(t + NODES[0] * h);
        let d2 = drive_at(t + NODES[1] * h);
        // a·H(d1) + b·H(d2) = (a + b)·H(d) with d the weighted mean drive, since
        // H is affine in (Ω, Δ) and a + b = 1/2 for both factors.
        let mix = |a: f64, b: f64| {
            DriveParams::new(
                2.0 * (a * d1.omega + b * d2.omega),
                2.0 * (a * d1.delta + b * d2.delta),
            )
        };
        self.expm(mix(A2, A1), damping, 0.5 * h, psi);
        self.expm(mix(A1, A2), damping, 0.5 * h, psi);
    }
}

fn norm_diff(a: &[C64], b: &[C64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Number of equal fixed steps covering `duration` with steps no longer than `dt`.
pub(crate) fn step_count(duration: f64, dt: f64) -> usize {
    ((duration / dt) - 1e-9).ceil().max(1.0) as usize
}

/// Integrates `psi` along `schedule` without noise.
pub(crate) fn integrate(
    stepper: &mut Stepper,
    schedule: &Schedule,
    options: &SimOptions,
    psi: &mut [C64],
) -> Result<(), EvolutionError> {
    let mut start = 0.0;
    for (index, segment) in schedule.segments().iter().enumerate() {
        let drive_at = |t: f64| schedule.at_in(index, start, t);
        match options.method {
            Method::Fixed => {
                let n = step_count(segment.duration, options.dt);
                let h = segment.duration / n as f64;
                for k in 0..n {
                    stepper.step(drive_at, start + k as f64 * h, h, None, psi);
                }
            }
            Method::Adaptive { tolerance } => {
                let end = start + segment.duration;
                let mut t = start;
                let mut h = options.dt.min(segment.duration);
                let mut rejections = 0;
                let mut full = psi.to_vec();
                let mut half = psi.to_vec();
                while t < end - 1e-12 * segment.duration {
                    h = h.min(end - t);
                    full.copy_from_slice(psi);
                    half.copy_from_slice(psi);
                    stepper.step(drive_at, t, h, None, &mut full);
                    stepper.step(drive_at, t, h / 2.0, None, &mut half);
                    stepper.step(drive_at, t + h / 2.0, h / 2.0, None, &mut half);
                    let err = norm_diff(&full, &half) / 15.0;
                    let factor = if err == 0.0 {
                        4.0
                    } else {
                        (0.9 * (tolerance / err).powf(0.2)).clamp(0.2, 4.0)
                    };
                    if err <= tolerance {
                        psi.copy_from_slice(&half);
                        t += h;
                        rejections = 0;
                    } else {
                        rejections += 1;
                        if rejections > 60 || h < 1e-12 * segment.duration {
                            return Err(EvolutionError::StepRejection { time: t, step: h });
                        }
                    }
                    h *= factor;
                }
            }
        }
        start += segment.duration;
    }
    Ok(())
}

/// Closed-system sweep from `|0…0⟩`. Noise rates in `options` are ignored;
/// see [`super::evolve_open`].
pub fn evolve(
    system: &RydbergSystem,
    schedule: &Schedule,
    options: &SimOptions,
) -> Result<QuantumState, EvolutionError> {
    let initial = QuantumState::ground(system.space().clone());
    evolve_from(system, schedule, options, initial)
}

/// Closed-system sweep from a given pure state.
pub fn evolve_from(
    system: &RydbergSystem,
    schedule: &Schedule,
    options: &SimOptions,
    initial: QuantumState,
) -> Result<QuantumState, EvolutionError> {
    options.validate()?;
    let system = options.system_for(system)?;
    let StateKind::Pure(mut psi) = initial.kind else {
        return Err(EvolutionError::BadOptions(
            "closed evolution needs a pure initial state".into(),
        ));
    };
    if psi.len() != system.dim() {
        return Err(EvolutionError::DimensionMismatch {
            state: psi.len(),
            reference: system.dim(),
        });
    }
    let mut stepper = Stepper::new(system.clone());
    integrate(&mut stepper, schedule, options, &mut psi)?;
    Ok(QuantumState {
        space: system.space().clone(),
        kind: StateKind::Pure(psi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolution::{default_schedule, fidelity, Reference, Segment};
    use crate::graph::SimpleGraph;
    use crate::hamiltonian::{ground_state, mhz, InteractionModel};

    fn atom() -> RydbergSystem {
        RydbergSystem::new(&SimpleGraph::empty(1), InteractionModel::Ideal).unwrap()
    }

    fn constant(omega: f64, delta: f64, duration: f64) -> Schedule {
        Schedule::new(vec![Segment {
            duration,
            omega: [omega, omega],
            delta: [delta, delta],
        }])
        .unwrap()
    }

    fn pure(s: &QuantumState) -> &[C64] {
        match &s.kind {
            StateKind::Pure(v) => v,
            _ => panic!("pure state expected"),
        }
    }

    #[test]
    fn resonant_rabi_oscillation() {
        // |⟨1|ψ(t)⟩|² = sin²(Ωt/2) on resonance.
        let omega = mhz(1.0);
        for &t in &[0.1, 0.25, 0.5, 0.8] {
            let s = evolve(&atom(), &constant(omega, 0.0, t), &SimOptions::default()).unwrap();
            let p1 = s.probabilities()[1];
            assert!(
                (p1 - (omega * t / 2.0).sin().powi(2)).abs() < 1e-10,
                "t={t}"
            );
        }
    }

    #[test]
    fn detuned_rabi_matches_closed_form() {
        let (omega, delta, t) = (mhz(1.0), mhz(0.7), 0.9);
        let s = evolve(&atom(), &constant(omega, delta, t), &SimOptions::default()).unwrap();
        let w = omega.hypot(delta);
        let expected = (omega / w).powi(2) * (w * t / 2.0).sin().powi(2);
        assert!((s.probabilities()[1] - expected).abs() < 1e-10);
    }

    #[test]
    fn landau_zener_slow_sweep() {
        let schedule = default_schedule(mhz(2.0), mhz(1.0), 20.0).unwrap();
        let s = evolve(&atom(), &schedule, &SimOptions::default()).unwrap();
        assert!(s.probabilities()[1] >= 0.99);
        assert!((s.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn no_drive_keeps_the_empty_configuration() {
        let g = SimpleGraph::new(3, [(0, 1), (1, 2)]);
        let system = RydbergSystem::new(&g, InteractionModel::graph_u_mhz(10.0)).unwrap();
        let s = evolve(
            &system,
            &constant(0.0, mhz(1.3), 2.0),
            &SimOptions::default(),
        )
        .unwrap();
        assert!((s.probabilities()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn energy_is_conserved_for_constant_drive() {
        let g = SimpleGraph::new(3, [(0, 1), (1, 2)]);
        let system = RydbergSystem::new(&g, InteractionModel::graph_u_mhz(10.0)).unwrap();
        let drive = DriveParams::from_mhz(1.0, 0.5);
        let op = system.operator(drive);
        let energy = |v: &[C64]| -> f64 {
            let hv = op.apply_vec(v);
            v.iter().zip(&hv).map(|(a, b)| (a.conj() * b).re).sum()
        };
        let mut initial = QuantumState::ground(system.space().clone());
        if let StateKind::Pure(v) = &mut initial.kind {
            v[0] = C64::new(0.6, 0.0);
            v[5] = C64::new(0.0, 0.8);
        }
        let e0 = energy(pure(&initial));
        let s = evolve_from(
            &system,
            &constant(drive.omega, drive.delta, 3.0),
            &SimOptions::default(),
            initial,
        )
        .unwrap();
        assert!((energy(pure(&s)) - e0).abs() < 1e-8);
    }

    #[test]
    fn halving_dt_changes_little() {
        let g = SimpleGraph::new(4, [(0, 1), (1, 2), (2, 3), (0, 3)]);
        let system = RydbergSystem::new(&g, InteractionModel::Ideal).unwrap();
        let schedule = default_schedule(mhz(2.0), mhz(1.0), 2.0).unwrap();
        let coarse = evolve(&system, &schedule, &SimOptions::default()).unwrap();
        let fine = evolve(
            &system,
            &schedule,
            &SimOptions {
                dt: 5e-4,
                ..Default::default()
            },
        )
        .unwrap();
        let overlap: C64 = pure(&coarse)
            .iter()
            .zip(pure(&fine))
            .map(|(a, b)| a.conj() * b)
            .sum();
        assert!(1.0 - overlap.norm_sqr() < 1e-6);
    }

    #[test]
    fn adaptive_agrees_with_fixed() {
        let g = SimpleGraph::new(3, [(0, 1), (1, 2)]);
        let system = RydbergSystem::new(&g, InteractionModel::graph_u_mhz(8.0)).unwrap();
        let schedule = default_schedule(mhz(2.0), mhz(1.0), 3.0).unwrap();
        let fixed = evolve(&system, &schedule, &SimOptions::default()).unwrap();
        let options = SimOptions {
            dt: 0.05,
            method: Method::Adaptive { tolerance: 1e-9 },
            ..Default::default()
        };
        let adaptive = evolve(&system, &schedule, &options).unwrap();
        assert!(norm_diff(pure(&fixed), pure(&adaptive)) < 1e-6);
    }

    #[test]
    fn diabatic_quench_stays_near_empty() {
        let g = SimpleGraph::new(3, [(0, 1), (1, 2)]);
        let system = RydbergSystem::new(&g, InteractionModel::Ideal).unwrap();
        let schedule = default_schedule(mhz(2.0), mhz(1.0), 0.004).unwrap();
        let s = evolve(&system, &schedule, &SimOptions::default()).unwrap();
        assert!(s.probabilities()[0] > 0.999);
        let target = ground_state(&system.operator(DriveParams::new(0.0, mhz(2.0))), 1).unwrap();
        let configs: Vec<u64> = target
            .ground_manifold()
            .iter()
            .map(|p| {
                system
                    .space()
                    .config(p.vector.iter().position(|&x| x == 1.0).unwrap())
            })
            .collect();
        let f = fidelity(&s, &Reference::configurations(system.space(), &configs)).unwrap();
        assert!(f < 1e-3);
    }
}
