//! Lowest eigenpairs of the real symmetric Hamiltonian.
//!
//! Three paths: sorting the diagonal when Ω = 0, a dense symmetric
//! eigendecomposition for small spaces, and explicitly restarted Lanczos with
//! deflation otherwise.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{DriveParams, HamiltonianError, Operator, RydbergSystem, NO_FLIP};

/// Relative spread below which two levels count as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-9;

const DENSE_LIMIT: usize = 1200;
const KRYLOV_DIM: usize = 120;
const MAX_RESTARTS: usize = 400;

pub fn degenerate(a: f64, b: f64) -> bool {
    (a - b).abs() <= DEGENERACY_TOLERANCE * 1f64.max(a.abs()).max(b.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub energy: f64,
    /// Unit vector over the operator's basis; the largest entry is positive.
    pub vector: Vec<f64>,
}

/// Lowest levels in increasing order. The list is extended past the
/// requested count so that a degenerate level is never split.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub pairs: Vec<Eigenpair>,
}

impl Spectrum {
    pub fn ground_energy(&self) -> f64 {
        self.pairs[0].energy
    }

    /// The degenerate ground manifold.
    pub fn ground_manifold(&self) -> &[Eigenpair] {
        let e0 = self.ground_energy();
        let m = self
            .pairs
            .iter()
            .take_while(|p| degenerate(p.energy, e0))
            .count();
        &self.pairs[..m]
    }

    /// Distance from the ground level to the next distinct level, when computed.
    pub fn gap(&self) -> Option<f64> {
        let m = self.ground_manifold().len();
        self.pairs.get(m).map(|p| p.energy - self.ground_energy())
    }
}

/// The `k` lowest eigenpairs (at least one), plus any partners degenerate
/// with the `k`-th.
pub fn ground_state(op: &Operator, k: usize) -> Result<Spectrum, HamiltonianError> {
    let k = k.max(1).min(op.dim());
    let pairs = if op.is_diagonal() {
        diagonal_levels(op, k)
    } else if op.dim() <= DENSE_LIMIT {
        dense_levels(op, k)
    } else {
        lanczos_levels(op, k)?
    };
    Ok(Spectrum { pairs })
}

/// The `Ω → 0⁺` limit of the ground state at detuning `delta`.
///
/// At `Ω = 0` the ground level is degenerate; second-order perturbation in
/// the drive gives the effective coupling
/// `H_eff[m, m'] = Σ_k V_mk V_km' / (E₀ − E_k)` inside that manifold, with
/// `V = Σ f_i σx_i / 2` per unit Ω. Its lowest eigenvector is the state an
/// infinitely slow sweep ends in. The returned energy is the second-order
/// shift per unit `Ω²`.
pub fn weak_drive_ground_state(
    system: &RydbergSystem,
    delta: f64,
) -> Result<Eigenpair, HamiltonianError> {
    let op = system.operator(DriveParams::new(0.0, delta));
    let diag = op.diagonal();
    let e0 = diag.iter().copied().fold(f64::INFINITY, f64::min);
    let manifold: Vec<usize> = (0..diag.len())
        .filter(|&s| degenerate(diag[s], e0))
        .collect();
    let n = system.num_atoms();
    let flips = system.flips();
    let factors = system.rabi_factors();
    // Intermediate amplitudes: column m holds V|m⟩ outside the manifold, divided by (E₀ − E_k).
    let mut h = DMatrix::<f64>::zeros(manifold.len(), manifold.len());
    for (a, &m) in manifold.iter().enumerate() {
        for i in 0..n {
            let k = flips[m * n + i];
            if k == NO_FLIP || degenerate(diag[k as usize], e0) {
                continue;
            }
            let k = k as usize;
            let v_km = 0.5 * factors[i];
            for j in 0..n {
                let back = flips[k * n + j];
                if back == NO_FLIP {
                    continue;
                }
                if let Ok(b) = manifold.binary_search(&(back as usize)) {
                    h[(b, a)] += 0.5 * factors[j] * v_km / (e0 - diag[k]);
                }
            }
        }
    }
    let eig = SymmetricEigen::new(h);
    let lowest = (0..manifold.len())
        .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
        .expect("non-empty manifold");
    let mut vector = vec![0.0; diag.len()];
    for (a, &m) in manifold.iter().enumerate() {
        vector[m] = eig.eigenvectors[(a, lowest)];
    }
    fix_sign(&mut vector);
    Ok(Eigenpair {
        energy: eig.eigenvalues[lowest],
        vector,
    })
}

/// Convenience: levels until the first one above the ground manifold.
pub fn lowest_levels(op: &Operator) -> Result<Spectrum, HamiltonianError> {
    let mut k = 2;
    loop {
        let s = ground_state(op, k)?;
        if s.gap().is_some() || s.pairs.len() == op.dim() {
            return Ok(s);
        }
        k = s.pairs.len() + 1;
    }
}

fn truncate(sorted: Vec<Eigenpair>, k: usize) -> Vec<Eigenpair> {
    let mut out: Vec<Eigenpair> = Vec::new();
    for p in sorted {
        if out.len() >= k && !degenerate(p.energy, out[k - 1].energy) {
            break;
        }
        out.push(p);
    }
    out
}

fn fix_sign(v: &mut [f64]) {
    let big = v
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() + 1e-12 { x } else { m });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

fn diagonal_levels(op: &Operator, k: usize) -> Vec<Eigenpair> {
    let diag = op.diagonal();
    let mut order: Vec<usize> = (0..diag.len()).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]).then(a.cmp(&b)));
    let sorted = order
        .into_iter()
        .map(|i| {
            let mut vector = vec![0.0; diag.len()];
            vector[i] = 1.0;
            Eigenpair {
                energy: diag[i],
                vector,
            }
        })
        .collect();
    truncate(sorted, k)
}

fn dense_levels(op: &Operator, k: usize) -> Vec<Eigenpair> {
    let eig = SymmetricEigen::new(op.to_dense());
    let mut order: Vec<usize> = (0..op.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let sorted = order
        .into_iter()
        .map(|i| {
            let mut vector: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            fix_sign(&mut vector);
            Eigenpair {
                energy: eig.eigenvalues[i],
                vector,
            }
        })
        .collect();
    truncate(sorted, k)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Removes components along each of `basis` (twice, for stability).
fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
    }
}

fn lanczos_levels(op: &Operator, k: usize) -> Result<Vec<Eigenpair>, HamiltonianError> {
    let mut found: Vec<Eigenpair> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    while found.len() < op.dim() {
        let deflate: Vec<Vec<f64>> = found.iter().map(|p| p.vector.clone()).collect();
        let next = lowest_deflated(op, &deflate, &mut rng)?;
        if found.len() >= k && !degenerate(next.energy, found[k - 1].energy) {
            break;
        }
        found.push(next);
    }
    found.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(found)
}

fn lowest_deflated(
    op: &Operator,
    deflate: &[Vec<f64>],
    rng: &mut ChaCha8Rng,
) -> Result<Eigenpair, HamiltonianError> {
    let dim = op.dim();
    let scale = op.norm_estimate().max(1.0);
    let tolerance = 1e-10 * scale;
    let m = KRYLOV_DIM.min(dim - deflate.len());

    let mut start: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    project_out(&mut start, deflate);
    normalize(&mut start);

    let mut residual = f64::INFINITY;
    let mut w = vec![0.0; dim];
    for _ in 0..MAX_RESTARTS {
        let mut basis: Vec<Vec<f64>> = vec![start.clone()];
        let mut alpha = Vec::with_capacity(m);
        let mut beta: Vec<f64> = Vec::with_capacity(m);
        for j in 0..m {
            op.apply(&basis[j], &mut w);
            project_out(&mut w, deflate);
            let a = dot(&w, &basis[j]);
            alpha.push(a);
            project_out(&mut w, &basis);
            let b = normalize(&mut w);
            if j + 1 == m || b <= 1e-12 * scale {
                break;
            }
            beta.push(b);
            basis.push(w.clone());
        }
        let size = alpha.len();
        let t = DMatrix::from_fn(size, size, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let lowest = (0..size)
            .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .unwrap();
        let mut x = vec![0.0; dim];
        for (i, b) in basis.iter().enumerate() {
            axpy(eig.eigenvectors[(i, lowest)], b, &mut x);
        }
        project_out(&mut x, deflate);
        normalize(&mut x);
        op.apply(&x, &mut w);
        project_out(&mut w, deflate);
        let energy = dot(&x, &w);
        axpy(-energy, &x, &mut w);
        residual = dot(&w, &w).sqrt();
        if residual <= tolerance || size < m {
            fix_sign(&mut x);
            return Ok(Eigenpair { energy, vector: x });
        }
        start = x;
    }
    Err(HamiltonianError::NoConvergence { residual })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::SimpleGraph;
    use crate::hamiltonian::{DriveParams, InteractionModel, RydbergSystem};
    use crate::oracle::enumerate_mis;
    use crate::reduction::reduce;

    fn residual_norm(op: &Operator, p: &Eigenpair) -> f64 {
        let hv = op.apply_vec(&p.vector);
        hv.iter()
            .zip(&p.vector)
            .map(|(h, v)| (h - p.energy * v).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn two_level_atom() {
        // H = [[0, Ω/2], [Ω/2, −Δ]]: E₀ = −Δ/2 − √(Δ² + Ω²)/2.
        let (omega, delta) = (1.7, 0.6);
        let op = RydbergSystem::new(&SimpleGraph::empty(1), InteractionModel::Ideal)
            .unwrap()
            .operator(DriveParams::new(omega, delta));
        let s = ground_state(&op, 1).unwrap();
        let expected = -delta / 2.0 - (delta * delta + omega * omega).sqrt() / 2.0;
        assert!((s.ground_energy() - expected).abs() < 1e-12);
        assert!(residual_norm(&op, &s.pairs[0]) < 1e-10);
    }

    #[test]
    fn blockaded_pair_collective_rabi() {
        // Ideal pair at Δ = 0: E₀ = −Ω/√2.
        let omega = 2.0;
        let op = RydbergSystem::new(&SimpleGraph::new(2, [(0, 1)]), InteractionModel::Ideal)
            .unwrap()
            .operator(DriveParams::new(omega, 0.0));
        let s = ground_state(&op, 1).unwrap();
        assert!((s.ground_energy() + omega / 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn zero_drive_manifold_is_the_maximum_sets() {
        let g = reduce(&fixtures::psi1());
        let delta = 3.0;
        for model in [InteractionModel::Ideal, InteractionModel::graph_u_mhz(20.0)] {
            let op = RydbergSystem::new(&g, model)
                .unwrap()
                .operator(DriveParams::new(0.0, delta));
            let s = lowest_levels(&op).unwrap();
            let mis = enumerate_mis(&g.simple_graph()).unwrap();
            assert!((s.ground_energy() + delta * mis.alpha as f64).abs() < 1e-12);
            let mut configs: Vec<u64> = s
                .ground_manifold()
                .iter()
                .map(|p| {
                    op.space()
                        .config(p.vector.iter().position(|&x| x == 1.0).unwrap())
                })
                .collect();
            configs.sort();
            let mut expected = mis.as_masks();
            expected.sort();
            assert_eq!(configs, expected);
            assert!(s.gap().is_some_and(|g| (g - delta).abs() < 1e-12));
        }
    }

    #[test]
    fn weak_drive_limit_matches_small_omega_ground_state() {
        let g = reduce(&fixtures::psi1());
        let system = RydbergSystem::new(&g, InteractionModel::Ideal).unwrap();
        let delta = 2.0;
        let limit = weak_drive_ground_state(&system, delta).unwrap();
        let omega = 1e-3;
        let op = system.operator(DriveParams::new(omega, delta));
        let exact = ground_state(&op, 1).unwrap();
        let overlap = dot(&limit.vector, &exact.pairs[0].vector);
        assert!(1.0 - overlap * overlap < 1e-5);
        // Second-order energy: E ≈ −3Δ + Ω²·shift.
        let predicted = -3.0 * delta + omega * omega * limit.energy;
        assert!((exact.ground_energy() - predicted).abs() < 1e-8);
        // Supported only on maximum independent sets, all with positive weight.
        let mis = enumerate_mis(&g.simple_graph()).unwrap().as_masks();
        for (i, &x) in limit.vector.iter().enumerate() {
            let config = system.space().config(i);
            assert_eq!(x > 1e-12, mis.contains(&config), "config {config:b}");
        }
    }

    #[test]
    fn lanczos_agrees_with_dense() {
        let g = reduce(&fixtures::psi1());
        let op = RydbergSystem::new(&g, InteractionModel::graph_u_mhz(8.5))
            .unwrap()
            .operator(DriveParams::from_mhz(0.8, 1.5));
        let dense = dense_levels(&op, 4);
        let iterative = lanczos_levels(&op, 4).unwrap();
        assert_eq!(dense.len(), iterative.len());
        for (a, b) in dense.iter().zip(&iterative) {
            assert!((a.energy - b.energy).abs() < 1e-8 * op.norm_estimate());
            assert!(residual_norm(&op, b) < 1e-8 * op.norm_estimate());
        }
        let overlap = dot(&dense[0].vector, &iterative[0].vector);
        assert!((overlap.abs() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn lanczos_resolves_degenerate_levels() {
        // Three disconnected atoms at Ω = 0 plus tiny drive splitting nothing:
        // free atoms have spectrum Σ ±Ω/2 with multiplicities 1, 3, 3, 1.
        let omega = 1.0;
        let op = RydbergSystem::new(&SimpleGraph::empty(3), InteractionModel::Ideal)
            .unwrap()
            .operator(DriveParams::new(omega, 0.0));
        let s = Spectrum {
            pairs: lanczos_levels(&op, 2).unwrap(),
        };
        assert_eq!(s.pairs.len(), 4);
        assert!((s.ground_energy() + 1.5 * omega).abs() < 1e-9);
        assert!((s.pairs[1].energy + 0.5 * omega).abs() < 1e-9);
        assert!((s.pairs[3].energy + 0.5 * omega).abs() < 1e-9);
        for i in 0..4 {
            for j in 0..i {
                assert!(dot(&s.pairs[i].vector, &s.pairs[j].vector).abs() < 1e-9);
            }
        }
    }
}
