//! End-to-end run: formula → graph → layout → sweep → shots → verdict.
//!
//! Every stage consumes and produces serializable artifacts, so a run split
//! across separate invocations gives the same report as [`solve`].

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{
    embed, optimize_hinge_angles, residual_stats, transform_alpha, EmbedOptions, Embedding,
    EmbeddingError, GeometryParams, HingeSpec,
};
use crate::evolution::{
    default_schedule, evolve, evolve_open, fidelity, gap_scan, EvolutionError, Method, NoiseRates,
    OpenMode, QuantumState, Reference, Schedule, SimOptions, MAX_GAP_SCAN_ATOMS,
};
use crate::formula::Formula;
use crate::graph::SimpleGraph;
use crate::hamiltonian::{
    mhz, to_mhz, weak_drive_ground_state, HamiltonianError, InteractionModel, RydbergSystem,
};
use crate::oracle::{enumerate_mis, OracleError};
use crate::readout::{
    mle, postselect_wires, sample_distribution, solution_mass, Accounting, AtomLayout,
    ConfusionModel, Distribution, MleOptions, ReadoutError, Verdict, VerdictOptions,
};
use crate::reduction::{reduce, EdgeKind, MisGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ideal,
    GraphU,
    Vdw,
}

/// Every knob of a run. Frequencies are `/2π` in MHz, lengths in μm, times in μs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub u_mhz: f64,
    pub c6_mhz: f64,

    pub embed_dimension: usize,
    pub embed_seed: u64,
    pub embed_restarts: usize,
    pub max_wire_length: usize,
    pub d_um: f64,
    pub d_blockade_um: f64,
    pub edge_tolerance_um: f64,
    pub min_separation_um: f64,
    pub hinge_alpha: f64,

    pub omega_mhz: f64,
    pub delta0_mhz: f64,
    pub total_time_us: f64,

    pub dt_us: f64,
    /// Zero selects fixed steps.
    pub adaptive_tolerance: f64,
    pub gamma_decay_mhz: f64,
    pub gamma_dephase_mhz: f64,
    pub open_mode: OpenMode,
    pub trajectories: usize,
    pub sim_seed: u64,
    /// Zero skips the gap scan.
    pub gap_points: usize,

    pub p_1_given_0: f64,
    pub p_0_given_1: f64,
    pub shots: u64,
    pub sample_seed: u64,
    pub postselect: bool,
    pub mle_max_iterations: usize,
    pub mle_tolerance: f64,
    pub threshold: f64,
    pub accounting: Accounting,
}

impl Default for RunConfig {
    fn default() -> Self {
        let geometry = GeometryParams::default();
        let embed = EmbedOptions::default();
        let confusion = ConfusionModel::default();
        Self {
            model: ModelKind::Vdw,
            u_mhz: embed.c6_mhz / geometry.d.powi(6),
            c6_mhz: embed.c6_mhz,
            embed_dimension: 2,
            embed_seed: 1,
            embed_restarts: embed.restarts,
            max_wire_length: embed.max_wire_length,
            d_um: geometry.d,
            d_blockade_um: geometry.d_blockade,
            edge_tolerance_um: geometry.edge_tolerance,
            min_separation_um: geometry.min_separation,
            hinge_alpha: 0.0,
            omega_mhz: 1.0,
            delta0_mhz: 2.0,
            total_time_us: 4.0,
            dt_us: 1e-3,
            adaptive_tolerance: 0.0,
            gamma_decay_mhz: 0.03,
            gamma_dephase_mhz: 0.03,
            open_mode: OpenMode::Trajectories,
            trajectories: 200,
            sim_seed: 1,
            gap_points: 41,
            p_1_given_0: confusion.p_1_given_0,
            p_0_given_1: confusion.p_0_given_1,
            shots: 10_000,
            sample_seed: 1,
            postselect: true,
            mle_max_iterations: 1000,
            mle_tolerance: 1e-8,
            threshold: 0.5,
            accounting: Accounting::Raw,
        }
    }
}

impl RunConfig {
    /// Noise-free, error-free variant of `self`.
    pub fn ideal_readout(mut self) -> Self {
        self.gamma_decay_mhz = 0.0;
        self.gamma_dephase_mhz = 0.0;
        self.p_1_given_0 = 0.0;
        self.p_0_given_1 = 0.0;
        self
    }

    pub fn geometry(&self) -> GeometryParams {
        GeometryParams {
            d: self.d_um,
            d_blockade: self.d_blockade_um,
            edge_tolerance: self.edge_tolerance_um,
            min_separation: self.min_separation_um,
        }
    }

    pub fn embed_options(&self) -> EmbedOptions {
        EmbedOptions {
            restarts: self.embed_restarts,
            max_wire_length: self.max_wire_length,
            c6_mhz: self.c6_mhz,
            ..EmbedOptions::default()
        }
    }

    pub fn interaction_model(&self) -> InteractionModel {
        match self.model {
            ModelKind::Ideal => InteractionModel::Ideal,
            ModelKind::GraphU => InteractionModel::graph_u_mhz(self.u_mhz),
            ModelKind::Vdw => InteractionModel::vdw_mhz(self.c6_mhz),
        }
    }

    pub fn schedule(&self) -> Result<Schedule, EvolutionError> {
        default_schedule(
            mhz(self.delta0_mhz),
            mhz(self.omega_mhz),
            self.total_time_us,
        )
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            dt: self.dt_us,
            method: if self.adaptive_tolerance > 0.0 {
                Method::Adaptive {
                    tolerance: self.adaptive_tolerance,
                }
            } else {
                Method::Fixed
            },
            trajectories: self.trajectories,
            noise: NoiseRates::from_mhz(self.gamma_decay_mhz, self.gamma_dephase_mhz),
            rabi_inhomogeneity: Vec::new(),
            seed: self.sim_seed,
        }
    }

    pub fn confusion(&self) -> Result<ConfusionModel, ReadoutError> {
        ConfusionModel::new(self.p_1_given_0, self.p_0_given_1)
    }

    pub fn verdict_options(&self) -> VerdictOptions {
        VerdictOptions {
            threshold: self.threshold,
            accounting: self.accounting,
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let input = |m: String| Err(PipelineError::new(Stage::Config, ErrorKind::Input, m));
        self.geometry()
            .validate()
            .map_err(|e| PipelineError::new(Stage::Config, ErrorKind::Input, e))?;
        self.schedule()
            .map_err(|e| PipelineError::new(Stage::Config, ErrorKind::Input, e))?;
        self.sim_options()
            .validate()
            .map_err(|e| PipelineError::new(Stage::Config, ErrorKind::Input, e))?;
        self.confusion()
            .map_err(|e| PipelineError::new(Stage::Config, ErrorKind::Input, e))?;
        if !(0.0..=1.0).contains(&self.hinge_alpha) {
            return input(format!(
                "hinge_alpha must lie in [0, 1], got {}",
                self.hinge_alpha
            ));
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return input(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            ));
        }
        if self.shots == 0 {
            return input("shots must be positive".into());
        }
        if self.embed_dimension != 2 && self.embed_dimension != 3 {
            return input(format!(
                "embed_dimension must be 2 or 3, got {}",
                self.embed_dimension
            ));
        }
        for (name, v) in [("u_mhz", self.u_mhz), ("c6_mhz", self.c6_mhz)] {
            if !(v > 0.0 && v.is_finite()) {
                return input(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.mle_tolerance > 0.0) || self.mle_max_iterations == 0 {
            return input("MLE needs a positive tolerance and iteration cap".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Reduce,
    Oracle,
    Embed,
    Build,
    Evolve,
    Readout,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Self::Config => "config",
            Self::Reduce => "reduce",
            Self::Oracle => "oracle",
            Self::Embed => "embed",
            Self::Build => "build",
            Self::Evolve => "evolve",
            Self::Readout => "readout",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Geometry,
    Numerical,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{stage}: {message}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: Stage, kind: ErrorKind, message: impl ToString) -> Self {
        Self {
            stage,
            kind,
            message: message.to_string(),
        }
    }

    /// 2 input error, 3 infeasible geometry, 4 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Input => 2,
            ErrorKind::Geometry => 3,
            ErrorKind::Numerical => 4,
        }
    }
}

fn embedding_error(e: EmbeddingError) -> PipelineError {
    let kind = match e {
        EmbeddingError::BadDimension(_)
        | EmbeddingError::BadParams(_)
        | EmbeddingError::BadAlpha(_) => ErrorKind::Input,
        _ => ErrorKind::Geometry,
    };
    PipelineError::new(Stage::Embed, kind, e)
}

fn hamiltonian_error(stage: Stage, e: HamiltonianError) -> PipelineError {
    let kind = match e {
        HamiltonianError::NoConvergence { .. } => ErrorKind::Numerical,
        _ => ErrorKind::Input,
    };
    PipelineError::new(stage, kind, e)
}

fn evolution_error(e: EvolutionError) -> PipelineError {
    match e {
        EvolutionError::Hamiltonian(h) => hamiltonian_error(Stage::Evolve, h),
        EvolutionError::StepRejection { .. } | EvolutionError::DimensionMismatch { .. } => {
            PipelineError::new(Stage::Evolve, ErrorKind::Numerical, e)
        }
        _ => PipelineError::new(Stage::Evolve, ErrorKind::Input, e),
    }
}

fn readout_error(e: ReadoutError) -> PipelineError {
    PipelineError::new(Stage::Readout, ErrorKind::Input, e)
}

fn oracle_error(e: OracleError) -> PipelineError {
    PipelineError::new(Stage::Oracle, ErrorKind::Input, e)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSummary {
    pub variables: usize,
    pub clauses: usize,
    pub vertices: usize,
    pub intra_edges: usize,
    pub inter_edges: usize,
    pub alpha: usize,
    /// `alpha == N_C`.
    pub satisfiable: bool,
    pub maximum_sets: usize,
}

impl fmt::Display for GraphSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} vertices, {} intra, {} inter, alpha={}",
            self.vertices, self.intra_edges, self.inter_edges, self.alpha
        )?;
        if self.satisfiable {
            write!(f, " = N_C={} => SAT", self.clauses)
        } else {
            write!(f, " < N_C={} => UNSAT", self.clauses)
        }
    }
}

pub fn summarize(g: &MisGraph) -> Result<GraphSummary, PipelineError> {
    let mis = enumerate_mis(&g.simple_graph()).map_err(oracle_error)?;
    Ok(GraphSummary {
        variables: g.num_variables(),
        clauses: g.num_clauses(),
        vertices: g.num_vertices(),
        intra_edges: g.count_edges(EdgeKind::Intra),
        inter_edges: g.count_edges(EdgeKind::Inter),
        alpha: mis.alpha,
        satisfiable: mis.alpha == g.num_clauses(),
        maximum_sets: mis.maximum_sets.len(),
    })
}

/// Layout for `g`, folded by `hinge_alpha` when it is non-zero.
pub fn run_embed(g: &MisGraph, config: &RunConfig) -> Result<Embedding, PipelineError> {
    let e = embed(
        g,
        config.geometry(),
        config.embed_dimension,
        config.embed_seed,
        &config.embed_options(),
    )
    .map_err(embedding_error)?;
    if config.hinge_alpha == 0.0 {
        return Ok(e);
    }
    let spec = HingeSpec::detect(&e).map_err(embedding_error)?;
    let spec = optimize_hinge_angles(&e, &spec, config.c6_mhz, 20);
    transform_alpha(&e, config.hinge_alpha, &spec).map_err(embedding_error)
}

pub fn build_system(e: &Embedding, config: &RunConfig) -> Result<RydbergSystem, PipelineError> {
    RydbergSystem::new(e, config.interaction_model())
        .map_err(|h| hamiltonian_error(Stage::Build, h))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSummary {
    pub atoms: usize,
    pub dimension: usize,
    pub total_time_us: f64,
    pub noisy: bool,
    /// Overlap with the span of the maximum independent sets of the atom graph.
    pub manifold_fidelity: f64,
    /// Overlap with the weak-drive limit of the ideal blockade ground state.
    pub single_state_fidelity: Option<f64>,
    pub min_gap_mhz: Option<f64>,
    pub min_gap_time_us: Option<f64>,
}

/// Output of the sweep stage: the ideal measurement distribution plus
/// diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveArtifact {
    pub summary: EvolutionSummary,
    pub distribution: Distribution,
}

fn atom_graph(e: &Embedding) -> SimpleGraph {
    SimpleGraph::new(e.num_atoms(), e.physical_edges.iter().copied())
}

pub fn run_evolve(e: &Embedding, config: &RunConfig) -> Result<EvolveArtifact, PipelineError> {
    let system = build_system(e, config)?;
    let schedule = config.schedule().map_err(evolution_error)?;
    let options = config.sim_options();
    let state: QuantumState = if options.noise.is_zero() {
        evolve(&system, &schedule, &options)
    } else {
        evolve_open(&system, &schedule, &options, config.open_mode)
    }
    .map_err(evolution_error)?;

    let mis = enumerate_mis(&atom_graph(e)).map_err(oracle_error)?;
    let manifold = Reference::configurations(system.space(), &mis.as_masks());
    let manifold_fidelity = fidelity(&state, &manifold).map_err(evolution_error)?;

    let single_state_fidelity = match RydbergSystem::new(e, InteractionModel::Ideal) {
        Ok(ideal) => {
            let limit = weak_drive_ground_state(&ideal, mhz(config.delta0_mhz))
                .map_err(|h| hamiltonian_error(Stage::Evolve, h))?;
            let reference = Reference::transfer(ideal.space(), &limit.vector, system.space())
                .map_err(evolution_error)?;
            Some(fidelity(&state, &reference).map_err(evolution_error)?)
        }
        Err(_) => None,
    };

    let (min_gap_mhz, min_gap_time_us) =
        if config.gap_points > 0 && system.num_atoms() <= MAX_GAP_SCAN_ATOMS {
            let scan = gap_scan(&system, &schedule, config.gap_points).map_err(evolution_error)?;
            (Some(to_mhz(scan.min_gap)), Some(scan.min_time))
        } else {
            (None, None)
        };

    Ok(EvolveArtifact {
        summary: EvolutionSummary {
            atoms: system.num_atoms(),
            dimension: system.dim(),
            total_time_us: schedule.total_time(),
            noisy: !options.noise.is_zero(),
            manifold_fidelity,
            single_state_fidelity,
            min_gap_mhz,
            min_gap_time_us,
        },
        distribution: Distribution::from_state(&state),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadoutSummary {
    pub shots: u64,
    pub retained: u64,
    pub retention: f64,
    /// No shot survived postselection; there is no verdict.
    pub postselection_empty: bool,
    pub mle_iterations: usize,
    pub mle_converged: bool,
    pub verdict: Option<Verdict>,
}

pub fn run_readout(
    distribution: &Distribution,
    e: &Embedding,
    config: &RunConfig,
) -> Result<ReadoutSummary, PipelineError> {
    let confusion = config.confusion().map_err(readout_error)?;
    let counts = sample_distribution(distribution, config.shots, &confusion, config.sample_seed)
        .map_err(readout_error)?;
    let layout = AtomLayout::from_embedding(e);
    let wires = if config.postselect {
        layout.wires().to_vec()
    } else {
        Vec::new()
    };
    let kept = postselect_wires(&counts, &wires).map_err(readout_error)?;
    let mut summary = ReadoutSummary {
        shots: counts.total(),
        retained: kept.retained,
        retention: kept.retention,
        postselection_empty: kept.empty,
        mle_iterations: 0,
        mle_converged: false,
        verdict: None,
    };
    if kept.empty {
        return Ok(summary);
    }
    let options = MleOptions {
        max_iterations: config.mle_max_iterations,
        tolerance: config.mle_tolerance,
    };
    let estimate = mle(&kept.counts, &confusion, &options).map_err(readout_error)?;
    summary.mle_iterations = estimate.iterations;
    summary.mle_converged = estimate.converged;
    summary.verdict = Some(
        solution_mass(
            &estimate.distribution,
            &e.graph,
            &layout,
            &config.verdict_options(),
        )
        .map_err(readout_error)?,
    );
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSummary {
    pub atoms: usize,
    pub wires: usize,
    pub dimension: usize,
    pub residual_mean_mhz: f64,
    pub residual_max_mhz: f64,
}

pub fn summarize_embedding(e: &Embedding, config: &RunConfig) -> EmbeddingSummary {
    let r = residual_stats(e, config.c6_mhz);
    EmbeddingSummary {
        atoms: e.num_atoms(),
        wires: e.wires.len(),
        dimension: e.dimension,
        residual_mean_mhz: r.mean,
        residual_max_mhz: r.max,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub config: RunConfig,
    pub graph: GraphSummary,
    pub embedding: EmbeddingSummary,
    pub evolution: EvolutionSummary,
    pub readout: ReadoutSummary,
}

impl SolveReport {
    pub fn verdict(&self) -> Option<&Verdict> {
        self.readout.verdict.as_ref()
    }
}

/// Everything [`solve`] produced, including the intermediate artifacts.
#[derive(Debug, Clone)]
pub struct SolveOutput {
    pub graph: MisGraph,
    pub embedding: Embedding,
    pub evolution: EvolveArtifact,
    pub report: SolveReport,
    /// Wall-clock seconds per stage, kept out of the report so it stays
    /// reproducible.
    pub timings: Vec<(Stage, f64)>,
}

pub fn solve(formula: &Formula, config: &RunConfig) -> Result<SolveOutput, PipelineError> {
    config.validate()?;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: Stage, timings: &mut Vec<(Stage, f64)>| {
        timings.push((stage, clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    let graph = reduce(formula);
    lap(Stage::Reduce, &mut timings);
    let summary = summarize(&graph)?;
    lap(Stage::Oracle, &mut timings);
    let embedding = run_embed(&graph, config)?;
    lap(Stage::Embed, &mut timings);
    let evolution = run_evolve(&embedding, config)?;
    lap(Stage::Evolve, &mut timings);
    let readout = run_readout(&evolution.distribution, &embedding, config)?;
    lap(Stage::Readout, &mut timings);

    let report = SolveReport {
        config: config.clone(),
        graph: summary,
        embedding: summarize_embedding(&embedding, config),
        evolution: evolution.summary.clone(),
        readout,
    };
    Ok(SolveOutput {
        graph,
        embedding,
        evolution,
        report,
        timings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn fast(model: ModelKind) -> RunConfig {
        RunConfig {
            model,
            total_time_us: 4.0,
            dt_us: 4e-3,
            gap_points: 0,
            shots: 4000,
            ..RunConfig::default().ideal_readout()
        }
    }

    #[test]
    fn defaults_validate() {
        RunConfig::default().validate().unwrap();
        let bad = RunConfig {
            hinge_alpha: 2.0,
            ..RunConfig::default()
        };
        assert_eq!(bad.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn graph_summary_text() {
        let s = summarize(&reduce(&fixtures::psi1())).unwrap();
        assert_eq!(
            s.to_string(),
            "8 vertices, 7 intra, 2 inter, alpha=3 = N_C=3 => SAT"
        );
        let contradiction = Formula::from_ints(1, &[&[1], &[-1]]);
        let s = summarize(&reduce(&contradiction)).unwrap();
        assert_eq!(
            s.to_string(),
            "2 vertices, 0 intra, 1 inter, alpha=1 < N_C=2 => UNSAT"
        );
    }

    #[test]
    fn ideal_psi1_is_satisfiable() {
        let out = solve(&fixtures::psi1(), &fast(ModelKind::Ideal)).unwrap();
        let v = out.report.verdict().unwrap();
        assert!(v.satisfiable);
        assert!(v.solution_mass > 0.7, "{}", v.solution_mass);
        assert_eq!(out.report.readout.retention, 1.0);
    }

    #[test]
    fn contradiction_is_unsatisfiable() {
        let f = Formula::from_ints(1, &[&[1], &[-1]]);
        let out = solve(&f, &fast(ModelKind::Ideal)).unwrap();
        let v = out.report.verdict().unwrap();
        assert!(!v.satisfiable);
        assert_eq!(v.solution_mass, 0.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let config = RunConfig {
            gamma_decay_mhz: 0.03,
            gamma_dephase_mhz: 0.03,
            trajectories: 8,
            p_1_given_0: 0.039,
            p_0_given_1: 0.079,
            ..fast(ModelKind::Ideal)
        };
        let a = solve(&fixtures::psi1(), &config).unwrap();
        let b = solve(&fixtures::psi1(), &config).unwrap();
        assert_eq!(
            serde_json::to_string(&a.report).unwrap(),
            serde_json::to_string(&b.report).unwrap()
        );
    }

    #[test]
    fn split_stages_match_monolithic_run() {
        let config = fast(ModelKind::Ideal);
        let whole = solve(&fixtures::psi1(), &config).unwrap();
        let g: MisGraph =
            serde_json::from_str(&serde_json::to_string(&whole.graph).unwrap()).unwrap();
        let e: Embedding =
            serde_json::from_str(&serde_json::to_string(&run_embed(&g, &config).unwrap()).unwrap())
                .unwrap();
        let evolved: EvolveArtifact = serde_json::from_str(
            &serde_json::to_string(&run_evolve(&e, &config).unwrap()).unwrap(),
        )
        .unwrap();
        let readout = run_readout(&evolved.distribution, &e, &config).unwrap();
        assert_eq!(readout, whole.report.readout);
    }
}
