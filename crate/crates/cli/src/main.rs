//! Command-line front end for the 3-SAT → Rydberg MIS toolchain.
//!
//! Exit codes: 0 success, 2 input error, 3 infeasible geometry, 4 numerical
//! failure.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rydsat::embedding::Embedding;
use rydsat::formula::{brute_force_sat, parse_dimacs, Formula};
use rydsat::hamiltonian::{ground_state, mhz, to_mhz, DriveParams};
use rydsat::oracle::enumerate_mis;
use rydsat::pipeline::{
    build_system, run_embed, run_evolve, run_readout, solve, summarize, summarize_embedding,
    EvolveArtifact, PipelineError, RunConfig,
};
use rydsat::readout::{
    atom_bounds, bar_chart_csv, repetitions_for, scaling_estimate, success_prob,
};
use rydsat::reduction::reduce;
use serde::Serialize;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        Self {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

pub fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, contents).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn to_json(value: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifacts serialize");
    s.push('\n');
    s
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_str(&read(path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn load_formula(path: &Path) -> Result<Formula, CliError> {
    let parsed = parse_dimacs(&read(path)?)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    for w in &parsed.warnings {
        eprintln!("warning: {}: {w}", path.display());
    }
    Ok(parsed.formula)
}

/// Parameter echo and stage timings written next to an artifact.
struct Sidecar {
    text: String,
    clock: Instant,
}

impl Sidecar {
    fn new(command: &str, config: &RunConfig) -> Self {
        let mut text = format!("command: {command}\n");
        for line in toml::to_string(config).expect("config serializes").lines() {
            let _ = writeln!(text, "param {line}");
        }
        Self {
            text,
            clock: Instant::now(),
        }
    }

    fn stage(&mut self, name: impl std::fmt::Display, seconds: f64) {
        let _ = writeln!(self.text, "stage {name}: {seconds:.3} s");
    }

    fn lap(&mut self, name: &str) {
        let s = self.clock.elapsed().as_secs_f64();
        self.stage(name, s);
        self.clock = Instant::now();
    }

    fn save(&self, path: &Path) -> Result<(), CliError> {
        write(path, &self.text)
    }
}

fn log_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.as_os_str().to_owned();
    name.push(".log");
    PathBuf::from(name)
}

#[derive(Parser)]
#[command(
    name = "rydsat",
    version,
    about = "Compile 3-SAT to Rydberg atom arrays, simulate, read out"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArg {
    /// Run configuration (defaults when omitted).
    #[arg(short, long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a configuration file holding every default.
    Init {
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build the MIS graph of a DIMACS CNF file.
    Reduce {
        cnf: PathBuf,
        /// Graph JSON destination.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Enumerate maximum independent sets and check satisfiability exactly.
    Oracle { cnf: PathBuf },
    /// Lay the MIS graph out as atoms.
    Embed {
        cnf: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(short, long)]
        output: PathBuf,
        /// Atom position table.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Lowest levels of the Hamiltonian of an embedding, as CSV.
    Hamiltonian {
        embedding: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 8)]
        levels: usize,
        /// Rabi frequency Omega/2pi in MHz (config omega_mhz when omitted).
        #[arg(long)]
        omega_mhz: Option<f64>,
        /// Detuning Delta/2pi in MHz (config delta0_mhz when omitted).
        #[arg(long)]
        delta_mhz: Option<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sweep an embedding along the control path.
    Evolve {
        embedding: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Sample, postselect, correct and classify an evolved distribution.
    Readout {
        evolved: PathBuf,
        #[arg(short, long)]
        embedding: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(short, long)]
        output: PathBuf,
        /// Bar chart data.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Run every stage and write a report directory.
    Solve {
        cnf: PathBuf,
        #[command(flatten)]
        config: ConfigArg,
        #[arg(short, long)]
        out_dir: PathBuf,
    },
    /// Success probability, repetitions and atom count bounds.
    Scaling {
        #[arg(long, conflicts_with = "clauses", required_unless_present = "clauses")]
        atoms: Option<u64>,
        #[arg(long)]
        clauses: Option<u64>,
        /// Per-shot success probability (1.04^-N_A when omitted).
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 0.2)]
        target: f64,
    },
}

fn cmd_reduce(cnf: &Path, output: Option<&Path>) -> Result<(), CliError> {
    let g = reduce(&load_formula(cnf)?);
    println!("{}", summarize(&g)?);
    if let Some(path) = output {
        write(path, &to_json(&g))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct OracleReport {
    clauses: usize,
    alpha: usize,
    satisfiable: bool,
    maximum_sets: Vec<Vec<String>>,
    assignments: Vec<String>,
    brute_force_satisfiable: bool,
    brute_force_count: u64,
}

fn bits(values: &[bool]) -> String {
    values.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn cmd_oracle(cnf: &Path) -> Result<(), CliError> {
    let f = load_formula(cnf)?;
    let g = reduce(&f);
    let mis = enumerate_mis(&g.simple_graph()).map_err(|e| CliError::input(e.to_string()))?;
    let satisfiable = mis.alpha == g.num_clauses();
    let sat = brute_force_sat(&f).map_err(|e| CliError::input(e.to_string()))?;
    let assignments = if satisfiable {
        mis.maximum_sets
            .iter()
            .map(|s| g.decode_indices(s).map(|a| bits(a.values())))
            .collect::<Result<_, _>>()
            .map_err(|e| CliError {
                code: 4,
                message: e.to_string(),
            })?
    } else {
        Vec::new()
    };
    let report = OracleReport {
        clauses: g.num_clauses(),
        alpha: mis.alpha,
        satisfiable,
        maximum_sets: mis
            .maximum_sets
            .iter()
            .map(|s| s.iter().map(|&v| g.label(v)).collect())
            .collect(),
        assignments,
        brute_force_satisfiable: sat.satisfiable,
        brute_force_count: sat.count,
    };
    print!("{}", to_json(&report));
    Ok(())
}

fn cmd_embed(
    cnf: &Path,
    config: &RunConfig,
    output: &Path,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    let mut log = Sidecar::new("embed", config);
    let g = reduce(&load_formula(cnf)?);
    let e = run_embed(&g, config)?;
    log.lap("embed");
    write(output, &to_json(&e))?;
    if let Some(path) = csv {
        write(path, &e.to_csv())?;
    }
    let s = summarize_embedding(&e, config);
    println!(
        "{} atoms, {} wires, {}D, mean residual {:.4} MHz",
        s.atoms, s.wires, s.dimension, s.residual_mean_mhz
    );
    log.save(&log_path(output))
}

fn cmd_hamiltonian(
    embedding: &Path,
    config: &RunConfig,
    levels: usize,
    omega_mhz: Option<f64>,
    delta_mhz: Option<f64>,
    output: Option<&Path>,
) -> Result<(), CliError> {
    let e: Embedding = read_json(embedding)?;
    let system = build_system(&e, config)?;
    let drive = DriveParams::new(
        mhz(omega_mhz.unwrap_or(config.omega_mhz)),
        mhz(delta_mhz.unwrap_or(config.delta0_mhz)),
    );
    let spectrum = ground_state(&system.operator(drive), levels.max(1)).map_err(|e| CliError {
        code: 4,
        message: e.to_string(),
    })?;
    let ground = spectrum.ground_manifold().len();
    let mut csv = String::from("level,energy_mhz,ground_manifold,dominant_config,weight\n");
    for (i, pair) in spectrum.pairs.iter().enumerate() {
        let (k, amp) = pair
            .vector
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("non-empty eigenvector");
        let _ = writeln!(
            csv,
            "{i},{:.9},{},{},{:.6}",
            to_mhz(pair.energy),
            i < ground,
            rydsat::readout::bitstring(system.space().config(k), system.num_atoms()),
            amp * amp
        );
    }
    match output {
        Some(path) => write(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn cmd_evolve(embedding: &Path, config: &RunConfig, output: &Path) -> Result<(), CliError> {
    let mut log = Sidecar::new("evolve", config);
    let e: Embedding = read_json(embedding)?;
    let artifact = run_evolve(&e, config)?;
    log.lap("evolve");
    write(output, &to_json(&artifact))?;
    let s = &artifact.summary;
    println!("manifold fidelity {:.6}", s.manifold_fidelity);
    if let Some(f) = s.single_state_fidelity {
        println!("single-state fidelity {f:.6}");
    }
    if let Some(g) = s.min_gap_mhz {
        println!("minimum gap {g:.6} MHz");
    }
    log.save(&log_path(output))
}

fn print_verdict(v: Option<&rydsat::readout::Verdict>) {
    match v {
        Some(v) => println!(
            "satisfiable: {} (p = {:.4}, {:?} accounting, threshold {})",
            v.satisfiable, v.solution_mass, v.accounting, v.threshold
        ),
        None => println!("no verdict: postselection kept no shots"),
    }
}

fn cmd_readout(
    evolved: &Path,
    embedding: &Path,
    config: &RunConfig,
    output: &Path,
    csv: Option<&Path>,
) -> Result<(), CliError> {
    let artifact: EvolveArtifact = read_json(evolved)?;
    let e: Embedding = read_json(embedding)?;
    let summary = run_readout(&artifact.distribution, &e, config)?;
    write(output, &to_json(&summary))?;
    if let (Some(path), Some(v)) = (csv, summary.verdict.as_ref()) {
        write(path, &bar_chart_csv(v, false))?;
    }
    print_verdict(summary.verdict.as_ref());
    Ok(())
}

fn cmd_solve(cnf: &Path, config: &RunConfig, out_dir: &Path) -> Result<(), CliError> {
    let formula = load_formula(cnf)?;
    let mut log = Sidecar::new("solve", config);
    let out = solve(&formula, config)?;
    for &(stage, seconds) in &out.timings {
        log.stage(stage, seconds);
    }
    write(&out_dir.join("report.json"), &to_json(&out.report))?;
    write(&out_dir.join("graph.json"), &to_json(&out.graph))?;
    write(&out_dir.join("embedding.json"), &to_json(&out.embedding))?;
    write(&out_dir.join("embedding.csv"), &out.embedding.to_csv())?;
    write(&out_dir.join("evolved.json"), &to_json(&out.evolution))?;
    if let Some(v) = out.report.verdict() {
        write(&out_dir.join("bars.csv"), &bar_chart_csv(v, false))?;
    }
    log.save(&out_dir.join("run.log"))?;
    println!("{}", out.report.graph);
    print_verdict(out.report.verdict());
    Ok(())
}

fn probability(name: &str, value: f64) -> Result<f64, CliError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(CliError::input(format!(
            "{name} must lie in [0, 1], got {value}"
        )))
    }
}

fn scaling_row(n_atoms: u64, p: f64, target: f64) -> String {
    let m = repetitions_for(p, target)
        .map(|m| m.to_string())
        .unwrap_or_else(|_| "unreachable".into());
    format!("{n_atoms:>8}  {p:>12.4e}  {m:>14}")
}

fn cmd_scaling(
    atoms: Option<u64>,
    clauses: Option<u64>,
    p: Option<f64>,
    target: f64,
) -> Result<(), CliError> {
    let target = probability("target", target)?;
    if target >= 1.0 {
        return Err(CliError::input("target must be below 1"));
    }
    let p = p.map(|p| probability("p", p)).transpose()?;
    println!(
        "{:>8}  {:>12}  {:>14}",
        "n_atoms",
        "p",
        format!("M(P_s>={target})")
    );
    if let Some(n) = atoms {
        let p = p.unwrap_or_else(|| scaling_estimate(n));
        println!("{}", scaling_row(n, p, target));
        if let Ok(m) = repetitions_for(p, target) {
            println!(
                "success probability after {m} repetitions: {:.6}",
                success_prob(p, m).unwrap_or(0.0)
            );
        }
    }
    if let Some(nc) = clauses {
        if nc == 0 {
            return Err(CliError::input("clauses must be positive"));
        }
        let b = atom_bounds(nc);
        for n in [b.lower, b.upper] {
            println!(
                "{}",
                scaling_row(n, p.unwrap_or_else(|| scaling_estimate(n)), target)
            );
        }
        println!(
            "bounds for N_C = {nc}: lower {} ({}), upper {} ({})",
            b.lower, b.lower_scheme, b.upper, b.upper_scheme
        );
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Init { output } => match output {
            Some(path) => write(&path, &config::template()),
            None => {
                print!("{}", config::template());
                Ok(())
            }
        },
        Command::Reduce { cnf, output } => cmd_reduce(&cnf, output.as_deref()),
        Command::Oracle { cnf } => cmd_oracle(&cnf),
        Command::Embed {
            cnf,
            config,
            output,
            csv,
        } => cmd_embed(
            &cnf,
            &config::load(config.config.as_deref())?,
            &output,
            csv.as_deref(),
        ),
        Command::Hamiltonian {
            embedding,
            config,
            levels,
            omega_mhz,
            delta_mhz,
            output,
        } => cmd_hamiltonian(
            &embedding,
            &config::load(config.config.as_deref())?,
            levels,
            omega_mhz,
            delta_mhz,
            output.as_deref(),
        ),
        Command::Evolve {
            embedding,
            config,
            output,
        } => cmd_evolve(
            &embedding,
            &config::load(config.config.as_deref())?,
            &output,
        ),
        Command::Readout {
            evolved,
            embedding,
            config,
            output,
            csv,
        } => cmd_readout(
            &evolved,
            &embedding,
            &config::load(config.config.as_deref())?,
            &output,
            csv.as_deref(),
        ),
        Command::Solve {
            cnf,
            config,
            out_dir,
        } => cmd_solve(&cnf, &config::load(config.config.as_deref())?, &out_dir),
        Command::Scaling {
            atoms,
            clauses,
            p,
            target,
        } => cmd_scaling(atoms, clauses, p, target),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
