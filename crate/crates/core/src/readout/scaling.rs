use serde::{Deserialize, Serialize};

use super::{check_probability, ReadoutError};

/// Per-shot success rate model `1.04^(−N)`.
pub const SCALING_BASE: f64 = 1.04;

/// `1 − (1 − p)^m`, accurate for tiny `p`.
pub fn success_prob(p: f64, m: u64) -> Result<f64, ReadoutError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ReadoutError::BadProbability {
            name: "p",
            value: p,
        });
    }
    if m == 0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    Ok(-(m as f64 * (-p).ln_1p()).exp_m1())
}

/// Smallest `m` with `success_prob(p, m) ≥ target`.
pub fn repetitions_for(p: f64, target: f64) -> Result<u64, ReadoutError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ReadoutError::BadProbability {
            name: "p",
            value: p,
        });
    }
    check_probability("target", target)?;
    if target == 0.0 {
        return Ok(0);
    }
    if p == 0.0 {
        return Err(ReadoutError::Unreachable(p));
    }
    if p == 1.0 {
        return Ok(1);
    }
    let estimate = ((-target).ln_1p() / (-p).ln_1p()).ceil().max(1.0);
    let mut m = estimate as u64;
    // Correct rounding of the logarithm ratio at exact boundaries.
    while m > 1 && success_prob(p, m - 1)? >= target {
        m -= 1;
    }
    while success_prob(p, m)? < target {
        m += 1;
    }
    Ok(m)
}

pub fn scaling_estimate(n_atoms: u64) -> f64 {
    (-(n_atoms as f64) * SCALING_BASE.ln()).exp()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomBounds {
    pub lower: u64,
    pub lower_scheme: String,
    pub upper: u64,
    pub upper_scheme: String,
}

/// Atom count range for `n_clauses` clauses: `3 N_C` (literal atoms only)
/// to `36 N_C²` (crossing lattice).
pub fn atom_bounds(n_clauses: u64) -> AtomBounds {
    AtomBounds {
        lower: 3 * n_clauses,
        lower_scheme: "literal atoms only".into(),
        upper: 36 * n_clauses * n_clauses,
        upper_scheme: "crossing lattice".into(),
    }
}
