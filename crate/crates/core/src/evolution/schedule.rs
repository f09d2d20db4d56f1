use serde::{Deserialize, Serialize};

use super::EvolutionError;
use crate::hamiltonian::DriveParams;

/// Linear ramp of Ω and Δ (rad/μs) over `duration` μs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub omega: [f64; 2],
    pub delta: [f64; 2],
}

impl Segment {
    fn at(&self, s: f64) -> DriveParams {
        let lerp = |[a, b]: [f64; 2]| a + (b - a) * s;
        DriveParams::new(lerp(self.omega), lerp(self.delta))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Segment>", into = "Vec<Segment>")]
pub struct Schedule {
    segments: Vec<Segment>,
}

impl TryFrom<Vec<Segment>> for Schedule {
    type Error = EvolutionError;

    fn try_from(segments: Vec<Segment>) -> Result<Self, Self::Error> {
        Self::new(segments)
    }
}

impl From<Schedule> for Vec<Segment> {
    fn from(s: Schedule) -> Self {
        s.segments
    }
}

impl Schedule {
    pub fn new(segments: Vec<Segment>) -> Result<Self, EvolutionError> {
        let bad = |m: String| Err(EvolutionError::BadSchedule(m));
        if segments.is_empty() {
            return bad("no segments".into());
        }
        for (i, s) in segments.iter().enumerate() {
            if !(s.duration > 0.0 && s.duration.is_finite()) {
                return bad(format!("segment {i} has duration {}", s.duration));
            }
            if s.omega.iter().chain(&s.delta).any(|x| !x.is_finite()) {
                return bad(format!("segment {i} has a non-finite value"));
            }
            if s.omega.iter().any(|&w| w < 0.0) {
                return bad(format!("segment {i} has negative Rabi frequency"));
            }
        }
        Ok(Self { segments })
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Segment boundaries, starting at 0 and ending at the total time.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let mut t = 0.0;
        for s in &self.segments {
            t += s.duration;
            out.push(t);
        }
        out
    }

    /// Drive at time `t`, clamped to the schedule. At a boundary the later
    /// segment wins.
    pub fn at(&self, t: f64) -> DriveParams {
        let mut start = 0.0;
        for s in &self.segments {
            if t < start + s.duration {
                return s.at(((t - start) / s.duration).max(0.0));
            }
            start += s.duration;
        }
        self.segments.last().expect("non-empty").at(1.0)
    }

    /// Drive at `t`, evaluated inside segment `index` (so that integrators
    /// never straddle a kink).
    pub(crate) fn at_in(&self, index: usize, start: f64, t: f64) -> DriveParams {
        let s = &self.segments[index];
        s.at(((t - start) / s.duration).clamp(0.0, 1.0))
    }
}

/// Three-segment path: switch on Ω at Δ = −0.7·Δ0, sweep Δ to Δ0, switch Ω
/// off. Durations T/4, T/2, T/4. Arguments in rad/μs and μs.
pub fn default_schedule(
    delta0: f64,
    omega_max: f64,
    total_time: f64,
) -> Result<Schedule, EvolutionError> {
    for (name, v) in [
        ("delta0", delta0),
        ("omega_max", omega_max),
        ("total_time", total_time),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(EvolutionError::BadSchedule(format!(
                "{name} must be positive, got {v}"
            )));
        }
    }
    let start = -0.7 * delta0;
    Schedule::new(vec![
        Segment {
            duration: total_time / 4.0,
            omega: [0.0, omega_max],
            delta: [start, start],
        },
        Segment {
            duration: total_time / 2.0,
            omega: [omega_max, omega_max],
            delta: [start, delta0],
        },
        Segment {
            duration: total_time / 4.0,
            omega: [omega_max, 0.0],
            delta: [delta0, delta0],
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{mhz, to_mhz};
    use proptest::prelude::*;

    #[test]
    fn default_endpoints() {
        let s = default_schedule(mhz(2.0), mhz(1.0), 4.0).unwrap();
        assert_eq!(s.total_time(), 4.0);
        assert_eq!(s.breakpoints(), vec![0.0, 1.0, 3.0, 4.0]);
        assert!((to_mhz(s.at(0.0).delta) + 1.4).abs() < 1e-12);
        assert!((to_mhz(s.at(4.0).delta) - 2.0).abs() < 1e-12);
        assert_eq!(s.at(0.0).omega, 0.0);
        assert_eq!(s.at(4.0).omega, 0.0);
        assert!((to_mhz(s.at(2.0).omega) - 1.0).abs() < 1e-12);
        assert!((to_mhz(s.at(2.0).delta) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn diabatic_schedule_is_valid() {
        let s = default_schedule(mhz(2.0), mhz(1.0), 0.004).unwrap();
        assert!((s.total_time() - 0.004).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(default_schedule(0.0, 1.0, 1.0).is_err());
        assert!(default_schedule(1.0, 1.0, -1.0).is_err());
        assert!(Schedule::new(vec![]).is_err());
        let neg = Segment {
            duration: 1.0,
            omega: [-1.0, 0.0],
            delta: [0.0, 0.0],
        };
        assert!(Schedule::new(vec![neg]).is_err());
    }

    #[test]
    fn serde_round_trip_validates() {
        let s = default_schedule(mhz(2.0), mhz(1.0), 4.0).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<Schedule>(&json).unwrap(), s);
        assert!(serde_json::from_str::<Schedule>("[]").is_err());
    }

    proptest! {
        #[test]
        fn drive_is_continuous_and_off_at_ends(d in 0.1f64..50.0, w in 0.1f64..50.0, t in 0.001f64..100.0) {
            let s = default_schedule(d, w, t).unwrap();
            prop_assert_eq!(s.at(0.0).omega, 0.0);
            prop_assert!(s.at(t).omega.abs() < 1e-12 * w);
            for b in s.breakpoints() {
                let eps = 1e-9 * t;
                let (l, r) = (s.at(b - eps), s.at(b + eps));
                prop_assert!((l.omega - r.omega).abs() < 1e-6 * w.max(d));
                prop_assert!((l.delta - r.delta).abs() < 1e-6 * w.max(d));
            }
        }
    }
}
