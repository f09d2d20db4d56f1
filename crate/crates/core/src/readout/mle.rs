use serde::{Deserialize, Serialize};

use super::{ConfusionModel, Counts, Distribution, ReadoutError};

/// The estimator works on the dense `2^N` simplex.
pub const MAX_MLE_ATOMS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop once an update moves the estimate by less than this in total variation.
    pub tolerance: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MleResult {
    pub distribution: Distribution,
    pub iterations: usize,
    pub converged: bool,
    /// Multinomial log-likelihood `Σ n(y) ln q(y)` before each update and
    /// after the last one.
    pub log_likelihood: Vec<f64>,
}

/// `y = C x` for the product channel (or `Cᵀ x` when `transpose`).
fn apply_channel(confusion: &ConfusionModel, num_atoms: usize, x: &mut [f64], transpose: bool) {
    for atom in 0..num_atoms {
        let (up, down) = confusion.rates(atom);
        if up == 0.0 && down == 0.0 {
            continue;
        }
        let bit = 1usize << atom;
        for j0 in 0..x.len() {
            if j0 & bit != 0 {
                continue;
            }
            let (p0, p1) = (x[j0], x[j0 | bit]);
            if transpose {
                x[j0] = (1.0 - up) * p0 + up * p1;
                x[j0 | bit] = down * p0 + (1.0 - down) * p1;
            } else {
                x[j0] = (1.0 - up) * p0 + down * p1;
                x[j0 | bit] = up * p0 + (1.0 - down) * p1;
            }
        }
    }
}

fn log_likelihood(counts: &[f64], q: &[f64]) -> f64 {
    counts
        .iter()
        .zip(q)
        .filter(|&(&n, _)| n > 0.0)
        .map(|(&n, &q)| n * q.ln())
        .sum()
}

/// Maximum-likelihood estimate of the pre-readout distribution by
/// expectation maximisation under the product confusion channel, started
/// from the uniform distribution.
pub fn mle(
    counts: &Counts,
    confusion: &ConfusionModel,
    options: &MleOptions,
) -> Result<MleResult, ReadoutError> {
    if counts.total() == 0 {
        return Err(ReadoutError::NoShots);
    }
    confusion.validate()?;
    let n = counts.num_atoms();
    if n > MAX_MLE_ATOMS {
        return Err(ReadoutError::TooManyAtoms {
            atoms: n,
            limit: MAX_MLE_ATOMS,
        });
    }
    let dim = 1usize << n;
    let mut observed = vec![0.0; dim];
    for (config, k) in counts.iter() {
        observed[config as usize] = k as f64;
    }
    let total = counts.total() as f64;

    let mut p = vec![1.0 / dim as f64; dim];
    let mut w = vec![0.0; dim];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        w.copy_from_slice(&p);
        apply_channel(confusion, n, &mut w, false);
        trace.push(log_likelihood(&observed, &w));
        for (wy, &k) in w.iter_mut().zip(&observed) {
            *wy = if k > 0.0 && *wy > 0.0 {
                k / (total * *wy)
            } else {
                0.0
            };
        }
        apply_channel(confusion, n, &mut w, true);
        let sum: f64 = p.iter().zip(&w).map(|(a, b)| a * b).sum();
        let mut change = 0.0;
        for (pi, wi) in p.iter_mut().zip(&w) {
            let next = *pi * wi / sum;
            change += (next - *pi).abs();
            *pi = next;
        }
        iterations += 1;
        if 0.5 * change < options.tolerance {
            converged = true;
            break;
        }
    }
    w.copy_from_slice(&p);
    apply_channel(confusion, n, &mut w, false);
    trace.push(log_likelihood(&observed, &w));
    debug_assert!(trace
        .windows(2)
        .all(|t| t[1] >= t[0] - 1e-9 * t[0].abs().max(1.0)));

    // Mass below this level is numerical residue of the uniform start.
    let floor = 1e-14;
    let kept: f64 = p.iter().filter(|&&x| x > floor).sum();
    let distribution = Distribution::new(
        n,
        p.iter()
            .enumerate()
            .filter(|&(_, &x)| x > floor)
            .map(|(c, &x)| (c as u64, x / kept)),
    )?;
    Ok(MleResult {
        distribution,
        iterations,
        converged,
        log_likelihood: trace,
    })
}
