//! Penalty-method layout optimization with random restarts.
//!
//! Each restart runs two phases. The first drives the pure constraint
//! penalty to zero from a random start: edges at `d`, non-edges at least
//! `min_separation` apart. The second minimizes the summed residual
//! `C6/r⁶` over non-edges under an increasing penalty weight, which acts as
//! the constraint projection. Restarts that never become feasible fall back
//! to simulated annealing on the penalty.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{
    validate_geometry, AtomSite, Embedding, EmbeddingError, GeometryParams, SiteRole, Violation,
    Wire, DEFAULT_C6_MHZ,
};
use crate::reduction::{EdgeKind, MisEdge, MisGraph};

/// Penalty below which a layout counts as realizing all constraints.
const FEASIBLE_PENALTY: f64 = 1e-10;
const PENALTY_WEIGHTS: [f64; 5] = [1e2, 1e3, 1e4, 1e5, 1e6];

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedOptions {
    pub restarts: usize,
    /// Longest wire tried before declaring an edge unroutable.
    pub max_wire_length: usize,
    /// `C6/2π`, MHz·μm⁶, used by the residual objective.
    pub c6_mhz: f64,
    pub anneal_fallback: bool,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self {
            restarts: 48,
            max_wire_length: 6,
            c6_mhz: DEFAULT_C6_MHZ,
            anneal_fallback: true,
        }
    }
}

/// The geometric problem for a fixed physical graph.
#[derive(Debug, Clone)]
pub struct LayoutProblem {
    pub num_atoms: usize,
    pub dimension: usize,
    pub edges: Vec<(usize, usize)>,
    pub non_edges: Vec<(usize, usize)>,
    pub params: GeometryParams,
    pub c6_mhz: f64,
}

#[derive(Debug, Clone)]
pub struct LayoutResult {
    pub positions: Vec<Vector3<f64>>,
    /// Summed residual `C6/r⁶` over non-edges, MHz.
    pub residual: f64,
    pub penalty: f64,
    pub feasible: bool,
    /// Objective after every accepted step, one list per phase.
    pub trace: Vec<Vec<f64>>,
}

impl LayoutProblem {
    pub fn new(
        num_atoms: usize,
        dimension: usize,
        edges: Vec<(usize, usize)>,
        params: GeometryParams,
        c6_mhz: f64,
    ) -> Self {
        let mut edges: Vec<(usize, usize)> = edges
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        let mut non_edges = Vec::new();
        for a in 0..num_atoms {
            for b in a + 1..num_atoms {
                if edges.binary_search(&(a, b)).is_err() {
                    non_edges.push((a, b));
                }
            }
        }
        Self {
            num_atoms,
            dimension,
            edges,
            non_edges,
            params,
            c6_mhz,
        }
    }

    fn separation(&self, x: &[f64], a: usize, b: usize) -> ([f64; 3], f64) {
        let k = self.dimension;
        let mut diff = [0.0; 3];
        for c in 0..k {
            diff[c] = x[a * k + c] - x[b * k + c];
        }
        let r = diff.iter().map(|v| v * v).sum::<f64>().sqrt();
        (diff, r)
    }

    fn accumulate(&self, grad: &mut [f64], a: usize, b: usize, diff: &[f64; 3], r: f64, dfdr: f64) {
        let k = self.dimension;
        let scale = dfdr / r.max(1e-12);
        for c in 0..k {
            grad[a * k + c] += scale * diff[c];
            grad[b * k + c] -= scale * diff[c];
        }
    }

    /// Constraint penalty `Σ (r − d)² + Σ max(0, s − r)²` and its gradient.
    fn penalty(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let d = self.params.d;
        let s = self.params.min_separation;
        let mut total = 0.0;
        for &(a, b) in &self.edges {
            let (diff, r) = self.separation(x, a, b);
            total += (r - d).powi(2);
            self.accumulate(grad, a, b, &diff, r, 2.0 * (r - d));
        }
        for &(a, b) in &self.non_edges {
            let (diff, r) = self.separation(x, a, b);
            if r < s {
                total += (s - r).powi(2);
                self.accumulate(grad, a, b, &diff, r, -2.0 * (s - r));
            }
        }
        total
    }

    fn residual(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut total = 0.0;
        for &(a, b) in &self.non_edges {
            let (diff, r) = self.separation(x, a, b);
            let r = r.max(1e-6);
            total += self.c6_mhz / r.powi(6);
            self.accumulate(grad, a, b, &diff, r, -6.0 * self.c6_mhz / r.powi(7));
        }
        total
    }

    fn combined(&self, x: &[f64], grad: &mut [f64], weight: f64, scratch: &mut [f64]) -> f64 {
        let res = self.residual(x, grad);
        let pen = self.penalty(x, scratch);
        for (g, p) in grad.iter_mut().zip(scratch.iter()) {
            *g += weight * p;
        }
        res + weight * pen
    }

    fn to_positions(&self, x: &[f64]) -> Vec<Vector3<f64>> {
        let k = self.dimension;
        (0..self.num_atoms)
            .map(|i| {
                let mut v = Vector3::zeros();
                for c in 0..k {
                    v[c] = x[i * k + c];
                }
                v
            })
            .collect()
    }

    fn random_start(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let side = self.params.min_separation * (self.num_atoms as f64).sqrt() * 1.2;
        (0..self.num_atoms * self.dimension)
            .map(|_| rng.random_range(-0.5..0.5) * side)
            .collect()
    }

    /// Simulated annealing on the penalty alone.
    fn anneal(&self, mut x: Vec<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let mut grad = vec![0.0; x.len()];
        let mut energy = self.penalty(&x, &mut grad);
        let steps = 20_000;
        let (t0, t1) = (10.0_f64, 1e-4_f64);
        let k = self.dimension;
        for step in 0..steps {
            let temp = t0 * (t1 / t0).powf(step as f64 / steps as f64);
            let atom = rng.random_range(0..self.num_atoms);
            let old: Vec<f64> = x[atom * k..(atom + 1) * k].to_vec();
            let width = self.params.d * (temp / t0).sqrt().max(0.02);
            for c in 0..k {
                x[atom * k + c] += rng.random_range(-1.0..1.0) * width;
            }
            let candidate = self.penalty(&x, &mut grad);
            if candidate <= energy || rng.random::<f64>() < ((energy - candidate) / temp).exp() {
                energy = candidate;
            } else {
                x[atom * k..(atom + 1) * k].copy_from_slice(&old);
            }
        }
        x
    }
}

/// Runs one seeded restart of the two-phase optimization.
pub fn optimize_layout(problem: &LayoutProblem, seed: u64, anneal_fallback: bool) -> LayoutResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = problem.random_start(&mut rng);
    let mut trace = Vec::new();

    let feasibility = |x: Vec<f64>| {
        lbfgs(
            |x: &[f64], g: &mut [f64]| problem.penalty(x, g),
            x,
            &LbfgsOptions::default(),
        )
    };
    let mut phase = feasibility(x);
    if phase.value > FEASIBLE_PENALTY && anneal_fallback {
        let annealed = problem.anneal(phase.x.clone(), &mut rng);
        let retry = feasibility(annealed);
        if retry.value < phase.value {
            phase = retry;
        }
    }
    trace.push(phase.trace);
    x = phase.x;

    if phase.value <= FEASIBLE_PENALTY {
        let mut scratch = vec![0.0; x.len()];
        for &weight in &PENALTY_WEIGHTS {
            let stage = lbfgs(
                |x: &[f64], g: &mut [f64]| problem.combined(x, g, weight, &mut scratch),
                x,
                &LbfgsOptions::default(),
            );
            trace.push(stage.trace);
            x = stage.x;
        }
    }

    let mut grad = vec![0.0; x.len()];
    let penalty = problem.penalty(&x, &mut grad);
    let residual = problem.residual(&x, &mut grad);
    LayoutResult {
        positions: problem.to_positions(&x),
        residual,
        penalty,
        feasible: penalty <= FEASIBLE_PENALTY,
        trace,
    }
}

struct Candidate {
    direct: Vec<MisEdge>,
    wired: Vec<(MisEdge, usize)>,
}

impl Candidate {
    /// Physical graph: literal atoms first, then wire atoms in wire order.
    fn physical(&self, graph: &MisGraph) -> (usize, Vec<(usize, usize)>) {
        let mut edges: Vec<(usize, usize)> = graph
            .edges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Intra)
            .chain(self.direct.iter())
            .map(|e| (e.a, e.b))
            .collect();
        let mut next = graph.num_vertices();
        for &(edge, length) in &self.wired {
            let mut prev = edge.a;
            for _ in 0..length {
                edges.push((prev, next));
                prev = next;
                next += 1;
            }
            edges.push((prev, edge.b));
        }
        (next, edges)
    }
}

/// Embeds `graph` with `d`-length edges, blockade-free non-edges and quantum
/// wires where direct realization fails. Deterministic given `seed`.
pub fn embed(
    graph: &MisGraph,
    params: GeometryParams,
    dimension: usize,
    seed: u64,
    options: &EmbedOptions,
) -> Result<Embedding, EmbeddingError> {
    if dimension != 2 && dimension != 3 {
        return Err(EmbeddingError::BadDimension(dimension));
    }
    params.validate()?;

    let all_inter: Vec<MisEdge> = graph.inter_edges().copied().collect();
    let search = |candidate: &Candidate, exhaustive: bool| {
        let (n, edges) = candidate.physical(graph);
        let problem = LayoutProblem::new(n, dimension, edges, params, options.c6_mhz);
        best_layout(&problem, seed, options, exhaustive)
    };

    let mut candidate = Candidate {
        direct: all_inter.clone(),
        wired: Vec::new(),
    };
    if search(&candidate, false).is_none() {
        // Realize inter edges one at a time, hub vertices first, wiring an
        // edge only when adding it directly breaks feasibility.
        let mut inter_degree = vec![0usize; graph.num_vertices()];
        for e in &all_inter {
            inter_degree[e.a] += 1;
            inter_degree[e.b] += 1;
        }
        let mut order = all_inter.clone();
        order.sort_by_key(|e| {
            (
                std::cmp::Reverse(inter_degree[e.a].max(inter_degree[e.b])),
                e.a,
                e.b,
            )
        });

        candidate = Candidate {
            direct: Vec::new(),
            wired: Vec::new(),
        };
        for edge in order {
            candidate.direct.push(edge);
            if search(&candidate, false).is_some() {
                continue;
            }
            candidate.direct.pop();
            let mut routed = false;
            for length in (2..=options.max_wire_length).step_by(2) {
                candidate.wired.push((edge, length));
                if search(&candidate, false).is_some() {
                    routed = true;
                    break;
                }
                candidate.wired.pop();
            }
            if !routed {
                return Err(infeasible(
                    graph, &candidate, edge, dimension, params, seed, options,
                ));
            }
        }
    }

    let Some(layout) = search(&candidate, true) else {
        return Err(infeasible_final(
            graph, &candidate, dimension, params, seed, options,
        ));
    };
    let embedding = assemble(graph, &candidate, layout, dimension, params);
    let violations = validate_geometry(&embedding);
    if violations.is_empty() {
        Ok(embedding)
    } else {
        Err(EmbeddingError::Infeasible {
            restarts: options.restarts,
            violations,
        })
    }
}

/// Best validated restart. With `exhaustive == false` returns the first
/// feasible one, which is all a feasibility probe needs.
fn best_layout(
    problem: &LayoutProblem,
    seed: u64,
    options: &EmbedOptions,
    exhaustive: bool,
) -> Option<LayoutResult> {
    let run = |i: usize| {
        let result = optimize_layout(
            problem,
            seed.wrapping_add(i as u64),
            options.anneal_fallback,
        );
        (result.feasible && layout_is_valid(problem, &result.positions)).then_some(result)
    };
    if !exhaustive {
        return (0..options.restarts).find_map(run);
    }
    let results: Vec<Option<LayoutResult>> =
        (0..options.restarts).into_par_iter().map(run).collect();
    let mut best: Option<LayoutResult> = None;
    for result in results.into_iter().flatten() {
        if best.as_ref().is_none_or(|b| result.residual < b.residual) {
            best = Some(result);
        }
    }
    best
}

fn layout_is_valid(problem: &LayoutProblem, positions: &[Vector3<f64>]) -> bool {
    let p = &problem.params;
    problem
        .edges
        .iter()
        .all(|&(a, b)| ((positions[a] - positions[b]).norm() - p.d).abs() <= p.edge_tolerance)
        && problem
            .non_edges
            .iter()
            .all(|&(a, b)| (positions[a] - positions[b]).norm() > p.d_blockade)
}

fn assemble(
    graph: &MisGraph,
    candidate: &Candidate,
    layout: LayoutResult,
    dimension: usize,
    params: GeometryParams,
) -> Embedding {
    let (_, mut edges) = candidate.physical(graph);
    for e in &mut edges {
        *e = (e.0.min(e.1), e.0.max(e.1));
    }
    edges.sort_unstable();
    let mut sites: Vec<AtomSite> = (0..graph.num_vertices())
        .map(|i| AtomSite {
            id: i,
            role: SiteRole::Literal {
                vertex: graph.vertex_id(i),
            },
            position: [0.0; 3],
        })
        .collect();
    let mut wires = Vec::new();
    for (w, &(edge, length)) in candidate.wired.iter().enumerate() {
        let start = sites.len();
        for position in 0..length {
            sites.push(AtomSite {
                id: start + position,
                role: SiteRole::Auxiliary { wire: w, position },
                position: [0.0; 3],
            });
        }
        wires.push(Wire {
            id: w,
            endpoints: [graph.vertex_id(edge.a), graph.vertex_id(edge.b)],
            chain: (start..start + length).collect(),
        });
    }
    // Centre the layout on its centroid for stable fixtures.
    let centroid = layout.positions.iter().sum::<Vector3<f64>>() / layout.positions.len() as f64;
    for (site, p) in sites.iter_mut().zip(&layout.positions) {
        let q = p - centroid;
        site.position = [q.x, q.y, if dimension == 2 { 0.0 } else { q.z }];
    }
    Embedding {
        dimension,
        params,
        graph: graph.clone(),
        sites,
        wires,
        physical_edges: edges,
    }
}

fn violations_of(problem: &LayoutProblem, positions: &[Vector3<f64>]) -> Vec<Violation> {
    let p = &problem.params;
    let mut out = Vec::new();
    for &(a, b) in &problem.edges {
        let r = (positions[a] - positions[b]).norm();
        if (r - p.d).abs() > p.edge_tolerance {
            out.push(Violation::EdgeLength { a, b, distance: r });
        }
    }
    for &(a, b) in &problem.non_edges {
        let r = (positions[a] - positions[b]).norm();
        if r <= p.d_blockade {
            out.push(Violation::Blockade { a, b, distance: r });
        }
    }
    out
}

/// Least-penalty attempt with `edge` wired at the longest allowed length.
fn infeasible(
    graph: &MisGraph,
    candidate: &Candidate,
    edge: MisEdge,
    dimension: usize,
    params: GeometryParams,
    seed: u64,
    options: &EmbedOptions,
) -> EmbeddingError {
    let mut attempt = Candidate {
        direct: candidate.direct.clone(),
        wired: candidate.wired.clone(),
    };
    attempt
        .wired
        .push((edge, options.max_wire_length.max(2) & !1));
    infeasible_final(graph, &attempt, dimension, params, seed, options)
}

fn infeasible_final(
    graph: &MisGraph,
    candidate: &Candidate,
    dimension: usize,
    params: GeometryParams,
    seed: u64,
    options: &EmbedOptions,
) -> EmbeddingError {
    let (n, edges) = candidate.physical(graph);
    let problem = LayoutProblem::new(n, dimension, edges, params, options.c6_mhz);
    let best = (0..options.restarts.max(1))
        .map(|i| {
            optimize_layout(
                &problem,
                seed.wrapping_add(i as u64),
                options.anneal_fallback,
            )
        })
        .min_by(|a, b| a.penalty.total_cmp(&b.penalty))
        .expect("at least one restart");
    EmbeddingError::Infeasible {
        restarts: options.restarts,
        violations: violations_of(&problem, &best.positions),
    }
}

struct LbfgsOptions {
    memory: usize,
    max_iterations: usize,
    gradient_tolerance: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        Self {
            memory: 8,
            max_iterations: 3000,
            gradient_tolerance: 1e-12,
        }
    }
}

struct Minimum {
    x: Vec<f64>,
    value: f64,
    trace: Vec<f64>,
}

/// Limited-memory BFGS with Armijo backtracking. Every accepted step
/// strictly decreases the objective.
fn lbfgs(
    mut f: impl FnMut(&[f64], &mut [f64]) -> f64,
    mut x: Vec<f64>,
    opts: &LbfgsOptions,
) -> Minimum {
    let n = x.len();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let mut grad = vec![0.0; n];
    let mut value = f(&x, &mut grad);
    let mut trace = vec![value];
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut trial = vec![0.0; n];
    let mut trial_grad = vec![0.0; n];

    for _ in 0..opts.max_iterations {
        if dot(&grad, &grad).sqrt() < opts.gradient_tolerance {
            break;
        }
        // Two-loop recursion.
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let a = rho * dot(s, &dir);
            for (d, yi) in dir.iter_mut().zip(y) {
                *d -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = history.last() {
            let gamma = dot(s, y) / dot(y, y);
            dir.iter_mut().for_each(|d| *d *= gamma);
        }
        for ((s, y, rho), a) in history.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &dir);
            for (d, si) in dir.iter_mut().zip(s) {
                *d += (a - b) * si;
            }
        }
        let mut slope = dot(&grad, &dir);
        if slope >= 0.0 {
            history.clear();
            dir = grad.iter().map(|g| -g).collect();
            slope = dot(&grad, &dir);
        }

        let mut step = if history.is_empty() {
            1.0 / dot(&grad, &grad).sqrt().max(1.0)
        } else {
            1.0
        };
        let mut accepted = false;
        for _ in 0..60 {
            for i in 0..n {
                trial[i] = x[i] + step * dir[i];
            }
            let candidate = f(&trial, &mut trial_grad);
            if candidate.is_finite()
                && candidate <= value + 1e-4 * step * slope
                && candidate < value
            {
                let s: Vec<f64> = (0..n).map(|i| trial[i] - x[i]).collect();
                let y: Vec<f64> = (0..n).map(|i| trial_grad[i] - grad[i]).collect();
                let sy = dot(&s, &y);
                if sy > 1e-300 {
                    history.push((s, y, 1.0 / sy));
                    if history.len() > opts.memory {
                        history.remove(0);
                    }
                }
                std::mem::swap(&mut x, &mut trial);
                std::mem::swap(&mut grad, &mut trial_grad);
                value = candidate;
                trace.push(value);
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Minimum { x, value, trace }
}
