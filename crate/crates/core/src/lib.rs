//! Compile 3-SAT instances into Rydberg-atom maximum-independent-set graphs,
//! simulate the quasi-adiabatic ground-state search, and read out a
//! satisfiability verdict from (noisy) measurement records.
//!
//! Pipeline: [`formula`] → [`reduction`] → [`embedding`] → [`hamiltonian`] →
//! [`evolution`] → [`readout`], with [`oracle`] as the exact classical check
//! and [`pipeline`] wiring the stages together.

pub mod embedding;
pub mod evolution;
pub mod fixtures;
pub mod formula;
pub mod graph;
pub mod hamiltonian;
pub mod oracle;
pub mod pipeline;
pub mod readout;
pub mod reduction;
