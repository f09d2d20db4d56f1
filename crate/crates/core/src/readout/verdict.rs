use serde::{Deserialize, Serialize};

use super::{bitstring, Counts, Distribution, ReadoutError};
use crate::embedding::Embedding;
use crate::reduction::MisGraph;

/// Keeps the shots in which every wire chain alternates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Postselected {
    pub counts: Counts,
    pub retained: u64,
    pub discarded: u64,
    pub retention: f64,
    /// No shot survived.
    pub empty: bool,
}

fn alternates(config: u64, chain: &[usize]) -> bool {
    chain
        .windows(2)
        .all(|w| ((config >> w[0]) ^ (config >> w[1])) & 1 == 1)
}

pub fn postselect_wires(
    counts: &Counts,
    wires: &[Vec<usize>],
) -> Result<Postselected, ReadoutError> {
    let n = counts.num_atoms();
    if let Some(&bad) = wires.iter().flatten().find(|&&a| a >= n) {
        return Err(ReadoutError::LengthMismatch {
            got: bad + 1,
            expected: n,
        });
    }
    let mut kept = Counts::new(n);
    for (config, k) in counts.iter() {
        if wires.iter().all(|chain| alternates(config, chain)) {
            kept.add(config, k);
        }
    }
    let retained = kept.total();
    Ok(Postselected {
        retained,
        discarded: counts.total() - retained,
        retention: if counts.total() == 0 {
            0.0
        } else {
            retained as f64 / counts.total() as f64
        },
        empty: retained == 0,
        counts: kept,
    })
}

/// How atoms beyond the literal vertices are laid out.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomLayout {
    num_atoms: usize,
    /// Blockade pairs: logical edges plus physical edges.
    edges: Vec<(usize, usize)>,
    wires: Vec<Vec<usize>>,
}

impl AtomLayout {
    /// One atom per literal vertex, no wires.
    pub fn logical(g: &MisGraph) -> Self {
        Self {
            num_atoms: g.num_vertices(),
            edges: g.edges().iter().map(|e| (e.a, e.b)).collect(),
            wires: Vec::new(),
        }
    }

    pub fn from_embedding(e: &Embedding) -> Self {
        let mut edges: Vec<(usize, usize)> = e
            .graph
            .edges()
            .iter()
            .map(|e| (e.a.min(e.b), e.a.max(e.b)))
            .chain(e.physical_edges.iter().copied())
            .collect();
        edges.sort_unstable();
        edges.dedup();
        Self {
            num_atoms: e.num_atoms(),
            edges,
            wires: e.wire_chains(),
        }
    }

    pub fn num_atoms(&self) -> usize {
        self.num_atoms
    }

    pub fn wires(&self) -> &[Vec<usize>] {
        &self.wires
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigClass {
    Solution,
    IndependentNonSolution,
    BlockadeViolating,
}

impl ConfigClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Solution => "solution",
            Self::IndependentNonSolution => "independent_non_solution",
            Self::BlockadeViolating => "blockade_violating",
        }
    }
}

fn check_layout(g: &MisGraph, layout: &AtomLayout) -> Result<(), ReadoutError> {
    if layout.num_atoms < g.num_vertices() {
        return Err(ReadoutError::LengthMismatch {
            got: layout.num_atoms,
            expected: g.num_vertices(),
        });
    }
    Ok(())
}

/// Literal atoms are `0..|V|`; wire atoms follow and only enter the blockade
/// test.
pub fn classify(
    config: u64,
    g: &MisGraph,
    layout: &AtomLayout,
) -> Result<ConfigClass, ReadoutError> {
    check_layout(g, layout)?;
    if layout.num_atoms < 64 && config >> layout.num_atoms != 0 {
        return Err(ReadoutError::LengthMismatch {
            got: 64 - config.leading_zeros() as usize,
            expected: layout.num_atoms,
        });
    }
    let on = |a: usize| (config >> a) & 1 == 1;
    if layout.edges.iter().any(|&(a, b)| on(a) && on(b)) {
        return Ok(ConfigClass::BlockadeViolating);
    }
    let one_per_clause =
        (0..g.num_clauses()).all(|j| g.clause_vertices(j).filter(|&v| on(v)).count() == 1);
    Ok(if one_per_clause {
        ConfigClass::Solution
    } else {
        ConfigClass::IndependentNonSolution
    })
}

/// Literal bits grouped by clause, then each wire chain: `001;01;001|10`.
pub fn config_label(config: u64, g: &MisGraph, layout: &AtomLayout) -> String {
    let bit = |a: usize| if (config >> a) & 1 == 1 { '1' } else { '0' };
    let clauses: Vec<String> = (0..g.num_clauses())
        .map(|j| g.clause_vertices(j).map(bit).collect())
        .collect();
    let mut label = clauses.join(";");
    for chain in &layout.wires {
        label.push('|');
        label.extend(chain.iter().map(|&a| bit(a)));
    }
    label
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Accounting {
    /// Solution mass over the whole distribution.
    #[default]
    Raw,
    /// Solution mass after discarding blockade-violating configurations.
    BlockadeFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerdictOptions {
    pub threshold: f64,
    pub accounting: Accounting,
}

impl Default for VerdictOptions {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            accounting: Accounting::Raw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRow {
    pub config: String,
    pub label: String,
    pub probability: f64,
    pub class: ConfigClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Solution mass under `accounting`.
    pub solution_mass: f64,
    pub satisfiable: bool,
    pub threshold: f64,
    pub accounting: Accounting,
    pub raw_solution_mass: f64,
    pub blockade_free_solution_mass: f64,
    pub solution_total: f64,
    pub independent_total: f64,
    pub violating_total: f64,
    /// Every configuration with non-zero probability, most likely first.
    pub table: Vec<ClassRow>,
}

pub fn solution_mass(
    dist: &Distribution,
    g: &MisGraph,
    layout: &AtomLayout,
    options: &VerdictOptions,
) -> Result<Verdict, ReadoutError> {
    if !(0.0..=1.0).contains(&options.threshold) {
        return Err(ReadoutError::BadProbability {
            name: "threshold",
            value: options.threshold,
        });
    }
    if dist.num_atoms() != layout.num_atoms {
        return Err(ReadoutError::LengthMismatch {
            got: dist.num_atoms(),
            expected: layout.num_atoms,
        });
    }
    let mut table = Vec::with_capacity(dist.len());
    let mut totals = [0.0; 3];
    for (config, p) in dist.iter() {
        let class = classify(config, g, layout)?;
        totals[class as usize] += p;
        table.push(ClassRow {
            config: bitstring(config, layout.num_atoms),
            label: config_label(config, g, layout),
            probability: p,
            class,
        });
    }
    table.sort_by(|a, b| {
        b.probability
            .total_cmp(&a.probability)
            .then_with(|| a.config.cmp(&b.config))
    });
    let [solution, independent, violating] = totals;
    let raw = solution.clamp(0.0, 1.0);
    let kept = solution + independent;
    let blockade_free = if kept > 0.0 {
        (solution / kept).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let p = match options.accounting {
        Accounting::Raw => raw,
        Accounting::BlockadeFree => blockade_free,
    };
    Ok(Verdict {
        solution_mass: p,
        satisfiable: p >= options.threshold,
        threshold: options.threshold,
        accounting: options.accounting,
        raw_solution_mass: raw,
        blockade_free_solution_mass: blockade_free,
        solution_total: solution,
        independent_total: independent,
        violating_total: violating,
        table,
    })
}

/// `config,label,probability,class` rows. Blockade-violating rows are
/// dropped when `hide_violating`; they still count towards the verdict.
pub fn bar_chart_csv(verdict: &Verdict, hide_violating: bool) -> String {
    let mut out = String::from("config,label,probability,class\n");
    for row in &verdict.table {
        if hide_violating && row.class == ConfigClass::BlockadeViolating {
            continue;
        }
        out += &format!(
            "{},{},{:.10},{}\n",
            row.config,
            row.label,
            row.probability,
            row.class.as_str()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle::enumerate_mis;
    use crate::reduction::{reduce, VertexId};
    use proptest::prelude::*;

    /// Mask from `(clause, slot)` pairs.
    fn mask(g: &MisGraph, ids: &[(usize, usize)]) -> u64 {
        ids.iter()
            .map(|&(c, s)| 1u64 << g.index_of(VertexId::new(c, s)).unwrap())
            .sum()
    }

    #[test]
    fn labelled_peaks() {
        let g = reduce(&fixtures::psi1());
        let layout = AtomLayout::logical(&g);
        // x3, x4, x6 excited.
        let peak = mask(&g, &[(0, 2), (1, 1), (2, 2)]);
        assert_eq!(config_label(peak, &g, &layout), "001;01;001");
        assert_eq!(classify(peak, &g, &layout), Ok(ConfigClass::Solution));
        let empty_clause = mask(&g, &[(0, 2), (2, 2)]);
        assert_eq!(config_label(empty_clause, &g, &layout), "001;00;001");
        assert_eq!(
            classify(empty_clause, &g, &layout),
            Ok(ConfigClass::IndependentNonSolution)
        );
        let clash = mask(&g, &[(0, 0), (1, 0)]);
        assert_eq!(
            classify(clash, &g, &layout),
            Ok(ConfigClass::BlockadeViolating)
        );
        assert!(classify(1 << 8, &g, &layout).is_err());
    }

    #[test]
    fn uniform_literal_distribution() {
        let g = reduce(&fixtures::psi1());
        let layout = AtomLayout::logical(&g);
        // Oracle: solutions are the maximum independent sets of size N_C.
        let mis = enumerate_mis(&g.simple_graph()).unwrap();
        assert_eq!(mis.alpha, g.num_clauses());
        let expected = mis.maximum_sets.len() as f64 / 256.0;
        let dist = Distribution::new(8, (0..256u64).map(|c| (c, 1.0 / 256.0))).unwrap();
        let v = solution_mass(&dist, &g, &layout, &VerdictOptions::default()).unwrap();
        assert!((v.solution_mass - expected).abs() < 1e-12);
        assert!(!v.satisfiable);
        assert_eq!(v.table.len(), 256);
        let sum = v.solution_total + v.independent_total + v.violating_total;
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn point_mass_on_a_solution() {
        let g = reduce(&fixtures::psi1());
        let layout = AtomLayout::logical(&g);
        let peak = mask(&g, &[(0, 2), (1, 1), (2, 2)]);
        let dist = Distribution::new(8, [(peak, 1.0)]).unwrap();
        let v = solution_mass(&dist, &g, &layout, &VerdictOptions::default()).unwrap();
        assert_eq!(v.solution_mass, 1.0);
        assert!(v.satisfiable);
        assert_eq!(v.table[0].label, "001;01;001");
    }

    #[test]
    fn accounting_modes() {
        let g = reduce(&fixtures::psi1());
        let layout = AtomLayout::logical(&g);
        let sol = mask(&g, &[(0, 2), (1, 1), (2, 2)]);
        let clash = mask(&g, &[(0, 0), (0, 1)]);
        let dist = Distribution::new(8, [(sol, 0.4), (clash, 0.5), (0, 0.1)]).unwrap();
        let raw = solution_mass(&dist, &g, &layout, &VerdictOptions::default()).unwrap();
        assert!((raw.solution_mass - 0.4).abs() < 1e-12);
        assert!(!raw.satisfiable);
        let opts = VerdictOptions {
            accounting: Accounting::BlockadeFree,
            ..Default::default()
        };
        let free = solution_mass(&dist, &g, &layout, &opts).unwrap();
        assert!((free.solution_mass - 0.8).abs() < 1e-12);
        assert!(free.satisfiable);
        let csv = bar_chart_csv(&free, true);
        assert_eq!(csv.lines().count(), 3);
        assert!(!csv.contains("blockade"));
    }

    #[test]
    fn postselection_rules() {
        let counts =
            Counts::from_pairs(4, [(0b0000, 5), (0b0100, 7), (0b1000, 3), (0b1100, 2)]).unwrap();
        let none = postselect_wires(&counts, &[]).unwrap();
        assert_eq!(none.counts, counts);
        assert_eq!(none.retention, 1.0);
        let one = postselect_wires(&counts, &[vec![2, 3]]).unwrap();
        assert_eq!(
            one.counts.iter().collect::<Vec<_>>(),
            vec![(0b0100, 7), (0b1000, 3)]
        );
        assert_eq!(one.retained, 10);
        assert!((one.retention - 10.0 / 17.0).abs() < 1e-15);
        let gone =
            postselect_wires(&Counts::from_pairs(4, [(0, 3)]).unwrap(), &[vec![2, 3]]).unwrap();
        assert!(gone.empty);
        assert!(postselect_wires(&counts, &[vec![3, 4]]).is_err());
        let long = Counts::from_pairs(4, [(0b0101, 1), (0b1010, 1), (0b0110, 1)]).unwrap();
        assert_eq!(
            postselect_wires(&long, &[vec![0, 1, 2, 3]])
                .unwrap()
                .retained,
            2
        );
    }

    proptest! {
        #[test]
        fn classes_partition_and_solutions_are_independent(config in 0u64..256) {
            let g = reduce(&fixtures::psi2());
            let layout = AtomLayout::logical(&g);
            let class = classify(config, &g, &layout).unwrap();
            let set: Vec<usize> = (0..8).filter(|&v| (config >> v) & 1 == 1).collect();
            let independent = g.is_independent_indices(&set);
            prop_assert_eq!(class == ConfigClass::BlockadeViolating, !independent);
            if class == ConfigClass::Solution {
                prop_assert_eq!(set.len(), g.num_clauses());
                prop_assert!(fixtures::psi2().evaluate(&g.decode_indices(&set).unwrap()).unwrap());
            }
        }

        #[test]
        fn postselection_preserves_ratios(raw in proptest::collection::vec(0u64..20, 16)) {
            let counts = Counts::from_pairs(4, raw.iter().enumerate().map(|(c, &k)| (c as u64, k))).unwrap();
            let p = postselect_wires(&counts, &[vec![1, 2]]).unwrap();
            for (c, k) in p.counts.iter() {
                prop_assert_eq!(k, counts.get(c));
            }
            prop_assert!(p.retained <= counts.total());
        }
    }
}
