//! Flat `key = value` run configuration (a TOML subset: top-level keys only).

use std::path::Path;

use rydsat::pipeline::RunConfig;

use crate::CliError;

/// One line of documentation per key, in template order.
const KEYS: &[(&str, &str)] = &[
    ("model", "interaction model: ideal | graph_u | vdw"),
    ("u_mhz", "edge interaction U/2pi for graph_u, MHz"),
    ("c6_mhz", "van der Waals C6/2pi, MHz um^6"),
    ("embed_dimension", "layout dimension, 2 or 3"),
    ("embed_seed", "layout optimizer seed"),
    ("embed_restarts", "random restarts per layout attempt"),
    ("max_wire_length", "longest quantum wire tried, atoms"),
    ("d_um", "edge length, um"),
    ("d_blockade_um", "blockade distance, um"),
    ("edge_tolerance_um", "allowed deviation of edge lengths, um"),
    (
        "min_separation_um",
        "optimizer target for non-edge separation, um",
    ),
    (
        "hinge_alpha",
        "out-of-plane gadget folding, 0 (planar) to 1",
    ),
    ("omega_mhz", "peak Rabi frequency Omega/2pi, MHz"),
    (
        "delta0_mhz",
        "final detuning Delta0/2pi, MHz; the sweep starts at -0.7 Delta0",
    ),
    ("total_time_us", "sweep duration, us"),
    ("dt_us", "integrator step, us"),
    (
        "adaptive_tolerance",
        "per-step error target; 0 selects fixed steps",
    ),
    (
        "gamma_decay_mhz",
        "decay rate gamma/2pi, MHz; 0 with zero dephasing gives a closed system",
    ),
    ("gamma_dephase_mhz", "dephasing rate gamma/2pi, MHz"),
    ("open_mode", "noisy evolution: trajectories | density"),
    ("trajectories", "quantum trajectories for noisy runs"),
    ("sim_seed", "trajectory seed"),
    (
        "gap_points",
        "spectral gap samples along the sweep; 0 skips the scan",
    ),
    ("p_1_given_0", "readout error P(1|0)"),
    ("p_0_given_1", "readout error P(0|1)"),
    ("shots", "measurement repetitions"),
    ("sample_seed", "shot sampling seed"),
    (
        "postselect",
        "discard shots whose wire chains do not alternate",
    ),
    ("mle_max_iterations", "iteration cap for readout correction"),
    (
        "mle_tolerance",
        "total-variation change that stops readout correction",
    ),
    (
        "threshold",
        "solution mass at or above which the instance is called satisfiable",
    ),
    (
        "accounting",
        "solution mass over raw | blockade_free configurations",
    ),
];

/// Commented config with every default spelled out.
pub fn template() -> String {
    let defaults = toml::to_string(&RunConfig::default()).expect("defaults serialize");
    let mut out = String::from("# rydsat run configuration\n");
    for line in defaults.lines().filter(|l| !l.trim().is_empty()) {
        let key = line.split('=').next().unwrap_or_default().trim();
        let doc = KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, d)| *d)
            .unwrap_or_default();
        out += &format!("\n# {doc}\n{line}\n");
    }
    out
}

pub fn parse(text: &str) -> Result<RunConfig, CliError> {
    let config: RunConfig =
        toml::from_str(text).map_err(|e| CliError::input(format!("config: {e}")))?;
    config.validate()?;
    Ok(config)
}

pub fn load(path: Option<&Path>) -> Result<RunConfig, CliError> {
    match path {
        Some(p) => parse(&crate::read(p)?),
        None => Ok(RunConfig::default()),
    }
}
