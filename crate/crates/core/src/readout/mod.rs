//! Measurement emulation and correction.
//!
//! Configurations are atom bitmasks (atom `i` is bit `i`). In JSON and CSV
//! they are written as fixed-width bitstrings with atom 0 leftmost.

mod mle;
mod scaling;
mod verdict;

use std::collections::BTreeMap;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::evolution::QuantumState;

pub use mle::{mle, MleOptions, MleResult, MAX_MLE_ATOMS};
pub use scaling::{atom_bounds, repetitions_for, scaling_estimate, success_prob, AtomBounds};
pub use verdict::{
    bar_chart_csv, classify, config_label, postselect_wires, solution_mass, Accounting, AtomLayout,
    ClassRow, ConfigClass, Postselected, Verdict, VerdictOptions,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadoutError {
    #[error("at least one shot is required")]
    NoShots,
    #[error("invalid probability {name} = {value}")]
    BadProbability { name: &'static str, value: f64 },
    #[error("configuration has {got} atoms, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error("{atoms} atoms exceed the limit of {limit}")]
    TooManyAtoms { atoms: usize, limit: usize },
    #[error("target is unreachable with p = {0}")]
    Unreachable(f64),
    #[error("malformed configuration {0:?}")]
    BadConfiguration(String),
    #[error("distribution sums to {0}")]
    NotNormalized(f64),
}

/// Formats `config` as a bitstring, atom 0 leftmost.
pub fn bitstring(config: u64, num_atoms: usize) -> String {
    (0..num_atoms)
        .map(|i| if (config >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn parse_bitstring(s: &str, num_atoms: usize) -> Result<u64, ReadoutError> {
    if s.chars().count() != num_atoms {
        return Err(ReadoutError::LengthMismatch {
            got: s.chars().count(),
            expected: num_atoms,
        });
    }
    let mut config = 0;
    for (i, c) in s.chars().enumerate() {
        match c {
            '0' => {}
            '1' => config |= 1 << i,
            _ => return Err(ReadoutError::BadConfiguration(s.to_string())),
        }
    }
    Ok(config)
}

fn check_probability(name: &'static str, value: f64) -> Result<(), ReadoutError> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(ReadoutError::BadProbability { name, value })
    }
}

/// Independent per-atom bit-flip readout errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionModel {
    pub p_1_given_0: f64,
    pub p_0_given_1: f64,
    /// Per-atom `(P(1|0), P(0|1))`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<usize, (f64, f64)>,
}

impl Default for ConfusionModel {
    fn default() -> Self {
        Self::new(0.039, 0.079).expect("valid defaults")
    }
}

impl ConfusionModel {
    pub fn new(p_1_given_0: f64, p_0_given_1: f64) -> Result<Self, ReadoutError> {
        let m = Self {
            p_1_given_0,
            p_0_given_1,
            overrides: BTreeMap::new(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn identity() -> Self {
        Self::new(0.0, 0.0).expect("valid")
    }

    pub fn validate(&self) -> Result<(), ReadoutError> {
        check_probability("p_1_given_0", self.p_1_given_0)?;
        check_probability("p_0_given_1", self.p_0_given_1)?;
        for &(a, b) in self.overrides.values() {
            check_probability("p_1_given_0", a)?;
            check_probability("p_0_given_1", b)?;
        }
        Ok(())
    }

    /// `(P(1|0), P(0|1))` for `atom`.
    pub fn rates(&self, atom: usize) -> (f64, f64) {
        self.overrides
            .get(&atom)
            .copied()
            .unwrap_or((self.p_1_given_0, self.p_0_given_1))
    }

    pub fn is_identity(&self, num_atoms: usize) -> bool {
        (0..num_atoms).all(|i| self.rates(i) == (0.0, 0.0))
    }

    /// Applies the readout channel to one ideal configuration.
    pub fn corrupt(&self, config: u64, num_atoms: usize, rng: &mut impl Rng) -> u64 {
        let mut out = config;
        for i in 0..num_atoms {
            let (up, down) = self.rates(i);
            let flip = if (config >> i) & 1 == 1 { down } else { up };
            if flip > 0.0 && rng.random::<f64>() < flip {
                out ^= 1 << i;
            }
        }
        out
    }
}

fn serialize_map<S: Serializer, V: Serialize + Copy>(
    num_atoms: usize,
    map: &BTreeMap<u64, V>,
    serializer: S,
) -> Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    // Sorted by bitstring, which is the order a reader expects.
    let mut entries: Vec<(String, V)> = map
        .iter()
        .map(|(&k, &v)| (bitstring(k, num_atoms), v))
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    let mut m = serializer.serialize_map(Some(entries.len()))?;
    for (k, v) in entries {
        m.serialize_entry(&k, &v)?;
    }
    m.end()
}

/// Shot histogram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counts {
    num_atoms: usize,
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl Counts {
    pub fn new(num_atoms: usize) -> Self {
        Self {
            num_atoms,
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    pub fn from_pairs(
        num_atoms: usize,
        pairs: impl IntoIterator<Item = (u64, u64)>,
    ) -> Result<Self, ReadoutError> {
        let mut c = Self::new(num_atoms);
        for (config, n) in pairs {
            if num_atoms < 64 && config >> num_atoms != 0 {
                return Err(ReadoutError::BadConfiguration(format!("{config:b}")));
            }
            c.add(config, n);
        }
        Ok(c)
    }

    pub fn add(&mut self, config: u64, n: u64) {
        if n > 0 {
            *self.counts.entry(config).or_default() += n;
            self.total += n;
        }
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, config: u64) -> u64 {
        self.counts.get(&config).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&k, &v)| (k, v))
    }

    /// Empirical frequencies.
    pub fn frequencies(&self) -> Result<Distribution, ReadoutError> {
        if self.total == 0 {
            return Err(ReadoutError::NoShots);
        }
        let t = self.total as f64;
        Ok(Distribution {
            num_atoms: self.num_atoms,
            probs: self.iter().map(|(k, v)| (k, v as f64 / t)).collect(),
        })
    }
}

#[derive(Serialize, Deserialize)]
struct RawCounts {
    num_atoms: usize,
    total: u64,
    counts: BTreeMap<String, u64>,
}

impl Serialize for Counts {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            num_atoms: usize,
            total: u64,
            #[serde(serialize_with = "counts_map")]
            counts: (usize, &'a BTreeMap<u64, u64>),
        }
        fn counts_map<S: Serializer>(
            v: &(usize, &BTreeMap<u64, u64>),
            s: S,
        ) -> Result<S::Ok, S::Error> {
            serialize_map(v.0, v.1, s)
        }
        View {
            num_atoms: self.num_atoms,
            total: self.total,
            counts: (self.num_atoms, &self.counts),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Counts {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        let raw = RawCounts::deserialize(deserializer)?;
        let mut c = Counts::new(raw.num_atoms);
        for (k, v) in raw.counts {
            c.add(
                parse_bitstring(&k, raw.num_atoms).map_err(D::Error::custom)?,
                v,
            );
        }
        if c.total != raw.total {
            return Err(D::Error::custom(format!(
                "counts sum to {}, total says {}",
                c.total, raw.total
            )));
        }
        Ok(c)
    }
}

/// Probability distribution over configurations; absent keys have zero mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    num_atoms: usize,
    probs: BTreeMap<u64, f64>,
}

impl Distribution {
    pub fn new(
        num_atoms: usize,
        pairs: impl IntoIterator<Item = (u64, f64)>,
    ) -> Result<Self, ReadoutError> {
        let mut probs = BTreeMap::new();
        for (config, p) in pairs {
            if !(p >= 0.0 && p.is_finite()) {
                return Err(ReadoutError::BadProbability {
                    name: "probability",
                    value: p,
                });
            }
            if num_atoms < 64 && config >> num_atoms != 0 {
                return Err(ReadoutError::BadConfiguration(format!("{config:b}")));
            }
            if p > 0.0 {
                *probs.entry(config).or_insert(0.0) += p;
            }
        }
        let total: f64 = probs.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(ReadoutError::NotNormalized(total));
        }
        Ok(Self { num_atoms, probs })
    }

    /// Measurement distribution of a simulated state, renormalized to absorb
    /// integrator drift.
    pub fn from_state(state: &QuantumState) -> Self {
        let p = state.probabilities();
        let total: f64 = p.iter().sum();
        Self {
            num_atoms: state.space.num_atoms(),
            probs: state
                .space
                .configs()
                .iter()
                .zip(p)
                .filter(|&(_, x)| x > 0.0)
                .map(|(&c, x)| (c, x / total))
                .collect(),
        }
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn get(&self, config: u64) -> f64 {
        self.probs.get(&config).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, f64)> + '_ {
        self.probs.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `½ Σ |p − q|`.
    pub fn total_variation(&self, other: &Distribution) -> f64 {
        let mut keys: Vec<u64> = self
            .probs
            .keys()
            .chain(other.probs.keys())
            .copied()
            .collect();
        keys.sort_unstable();
        keys.dedup();
        0.5 * keys
            .iter()
            .map(|&k| (self.get(k) - other.get(k)).abs())
            .sum::<f64>()
    }

    /// Most likely configuration (lowest bitmask on ties).
    pub fn mode(&self) -> Option<u64> {
        self.iter()
            .fold(None, |best: Option<(u64, f64)>, (k, p)| match best {
                Some((_, q)) if q >= p => best,
                _ => Some((k, p)),
            })
            .map(|(k, _)| k)
    }
}

impl Serialize for Distribution {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            num_atoms: usize,
            #[serde(serialize_with = "probs_map")]
            probabilities: (usize, &'a BTreeMap<u64, f64>),
        }
        fn probs_map<S: Serializer>(
            v: &(usize, &BTreeMap<u64, f64>),
            s: S,
        ) -> Result<S::Ok, S::Error> {
            serialize_map(v.0, v.1, s)
        }
        View {
            num_atoms: self.num_atoms,
            probabilities: (self.num_atoms, &self.probs),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        use serde::de::Error;
        #[derive(Deserialize)]
        struct Raw {
            num_atoms: usize,
            probabilities: BTreeMap<String, f64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        let pairs = raw
            .probabilities
            .iter()
            .map(|(k, &v)| Ok((parse_bitstring(k, raw.num_atoms)?, v)))
            .collect::<Result<Vec<_>, ReadoutError>>()
            .map_err(D::Error::custom)?;
        Distribution::new(raw.num_atoms, pairs).map_err(D::Error::custom)
    }
}

const SHOT_BLOCK: u64 = 4096;

/// Draws `shots` ideal configurations from `dist` and passes each through the
/// readout channel. Block `b` of 4096 shots uses seed `seed + b`, so the
/// result does not depend on the thread count.
pub fn sample_distribution(
    dist: &Distribution,
    shots: u64,
    confusion: &ConfusionModel,
    seed: u64,
) -> Result<Counts, ReadoutError> {
    if shots == 0 {
        return Err(ReadoutError::NoShots);
    }
    confusion.validate()?;
    let configs: Vec<u64> = dist.probs.keys().copied().collect();
    let weights: Vec<f64> = dist.probs.values().copied().collect();
    let index = WeightedIndex::new(&weights).map_err(|_| ReadoutError::NotNormalized(0.0))?;
    let n = dist.num_atoms;
    let blocks = shots.div_ceil(SHOT_BLOCK);
    let partial: Vec<Vec<u64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(b));
            let size = SHOT_BLOCK.min(shots - b * SHOT_BLOCK);
            (0..size)
                .map(|_| confusion.corrupt(configs[index.sample(&mut rng)], n, &mut rng))
                .collect()
        })
        .collect();
    let mut counts = Counts::new(n);
    for shot in partial.into_iter().flatten() {
        counts.add(shot, 1);
    }
    Ok(counts)
}

/// Projective measurement of `state` with readout errors.
pub fn sample(
    state: &QuantumState,
    shots: u64,
    confusion: &ConfusionModel,
    seed: u64,
) -> Result<Counts, ReadoutError> {
    sample_distribution(&Distribution::from_state(state), shots, confusion, seed)
}
