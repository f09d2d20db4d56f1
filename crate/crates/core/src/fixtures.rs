//! The three small instances used throughout the test suites.
//!
//! `C0 = x1 ∨ x2 ∨ x3`, `C1 = ¬x1 ∨ x4`, `C2 = x1 ∨ x5 ∨ x6`,
//! `C1' = ¬x1 ∨ ¬x2`, `C2' = x1 ∨ ¬x3 ∨ x6`.

use crate::embedding::Embedding;
use crate::formula::Formula;

/// `C0 ∧ C1 ∧ C2`
pub fn psi1() -> Formula {
    Formula::from_ints(6, &[&[1, 2, 3], &[-1, 4], &[1, 5, 6]])
}

/// `C0 ∧ C1' ∧ C2`
pub fn psi2() -> Formula {
    Formula::from_ints(6, &[&[1, 2, 3], &[-1, -2], &[1, 5, 6]])
}

/// `C0 ∧ C1' ∧ C2'`
pub fn psi3() -> Formula {
    Formula::from_ints(6, &[&[1, 2, 3], &[-1, -2], &[1, -3, 6]])
}

/// A single clause `x1 ∨ x2 ∨ x3`.
pub fn single_triangle() -> Formula {
    Formula::from_ints(3, &[&[1, 2, 3]])
}

fn shipped(json: &str) -> Embedding {
    serde_json::from_str(json).expect("shipped layout parses")
}

/// Planar layout of `reduce(psi1())`, seed 1, default parameters.
pub fn g1_embedding() -> Embedding {
    shipped(include_str!("../fixtures/g1.json"))
}

/// Planar layout of `reduce(psi2())`, seed 1, default parameters.
pub fn g2_embedding() -> Embedding {
    shipped(include_str!("../fixtures/g2.json"))
}

/// Planar layout of `reduce(psi3())`, seed 1, default parameters.
pub fn g3_embedding() -> Embedding {
    shipped(include_str!("../fixtures/g3.json"))
}
