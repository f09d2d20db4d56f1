//! CNF formulas restricted to clauses of at most three literals.
//!
//! Includes a DIMACS reader/writer, assignment evaluation and an exhaustive
//! satisfiability oracle used to check the quantum pipeline.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest variable count [`brute_force_sat`] will enumerate.
pub const MAX_ENUMERATION_VARIABLES: usize = 24;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: clause has {len} distinct literals, at most 3 are supported")]
    ClauseTooLong { line: usize, len: usize },
    #[error("line {line}: variable {variable} exceeds declared count {num_variables}")]
    VariableOutOfRange {
        line: usize,
        variable: u32,
        num_variables: usize,
    },
    #[error("line {line}: empty clause (trivially unsatisfiable)")]
    EmptyClause { line: usize },
    #[error("line {line}: unexpected token {token:?}")]
    BadToken { line: usize, token: String },
    #[error("header declares {declared} clauses, found {found}")]
    ClauseCountMismatch { declared: usize, found: usize },
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("assignment has {got} values, formula has {expected} variables")]
    AssignmentLength { expected: usize, got: usize },
    #[error(
        "{num_variables} variables exceed the enumeration limit of {MAX_ENUMERATION_VARIABLES}"
    )]
    TooManyVariables { num_variables: usize },
    #[error("invalid formula: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Literal {
    variable: u32,
    negated: bool,
}

impl Literal {
    pub fn new(variable: u32, negated: bool) -> Self {
        assert!(variable >= 1, "variables are 1-based");
        Self { variable, negated }
    }

    pub fn positive(variable: u32) -> Self {
        Self::new(variable, false)
    }

    pub fn negative(variable: u32) -> Self {
        Self::new(variable, true)
    }

    /// Literal from a signed DIMACS integer (`-3` is the negation of `x3`).
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 || value.unsigned_abs() > u32::MAX as u64 {
            return None;
        }
        Some(Self::new(value.unsigned_abs() as u32, value < 0))
    }

    pub fn to_dimacs(self) -> i64 {
        if self.negated {
            -(self.variable as i64)
        } else {
            self.variable as i64
        }
    }

    pub fn variable(self) -> u32 {
        self.variable
    }

    pub fn is_negated(self) -> bool {
        self.negated
    }

    pub fn negation(self) -> Self {
        Self {
            variable: self.variable,
            negated: !self.negated,
        }
    }

    pub fn is_complement_of(self, other: Literal) -> bool {
        self.variable == other.variable && self.negated != other.negated
    }

    /// Truth value under `assignment`; the variable must be in range.
    pub fn eval(self, assignment: &Assignment) -> bool {
        assignment.value(self.variable) != self.negated
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "¬x{}", self.variable)
        } else {
            write!(f, "x{}", self.variable)
        }
    }
}

/// A disjunction of one to three distinct literals.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Builds a clause, dropping repeated literals (first occurrence wins).
    pub fn new(literals: impl IntoIterator<Item = Literal>) -> Result<Self, FormulaError> {
        let (clause, _) = Self::normalized(literals)?;
        Ok(clause)
    }

    /// Like [`Clause::new`], also reporting whether duplicates were removed.
    fn normalized(
        literals: impl IntoIterator<Item = Literal>,
    ) -> Result<(Self, bool), FormulaError> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let mut deduplicated = false;
        for lit in literals {
            if seen.insert(lit) {
                out.push(lit);
            } else {
                deduplicated = true;
            }
        }
        match out.len() {
            0 => Err(FormulaError::EmptyClause { line: 0 }),
            1..=3 => Ok((Self { literals: out }, deduplicated)),
            len => Err(FormulaError::ClauseTooLong { line: 0, len }),
        }
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    /// True when the clause contains some literal together with its negation.
    pub fn is_tautology(&self) -> bool {
        self.literals.iter().enumerate().any(|(i, a)| {
            self.literals[i + 1..]
                .iter()
                .any(|b| a.is_complement_of(*b))
        })
    }

    pub fn eval(&self, assignment: &Assignment) -> bool {
        self.literals.iter().any(|l| l.eval(assignment))
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, lit) in self.literals.iter().enumerate() {
            if i > 0 {
                write!(f, " ∨ ")?;
            }
            write!(f, "{lit}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Formula {
    num_variables: usize,
    clauses: Vec<Clause>,
}

impl Formula {
    pub fn new(num_variables: usize, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        if num_variables == 0 {
            return Err(FormulaError::Invalid(
                "at least one variable required".into(),
            ));
        }
        if clauses.is_empty() {
            return Err(FormulaError::Invalid("at least one clause required".into()));
        }
        for clause in &clauses {
            for lit in clause.literals() {
                if lit.variable() as usize > num_variables {
                    return Err(FormulaError::VariableOutOfRange {
                        line: 0,
                        variable: lit.variable(),
                        num_variables,
                    });
                }
            }
        }
        Ok(Self {
            num_variables,
            clauses,
        })
    }

    /// Convenience constructor from signed DIMACS-style integers.
    ///
    /// Panics on malformed input; intended for fixtures and tests.
    pub fn from_ints(num_variables: usize, clauses: &[&[i64]]) -> Self {
        let clauses = clauses
            .iter()
            .map(|c| {
                Clause::new(
                    c.iter()
                        .map(|&v| Literal::from_dimacs(v).expect("nonzero literal")),
                )
                .expect("valid clause")
            })
            .collect();
        Self::new(num_variables, clauses).expect("valid formula")
    }

    pub fn num_variables(&self) -> usize {
        self.num_variables
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_literals(&self) -> usize {
        self.clauses.iter().map(Clause::len).sum()
    }

    pub fn evaluate(&self, assignment: &Assignment) -> Result<bool, FormulaError> {
        if assignment.len() != self.num_variables {
            return Err(FormulaError::AssignmentLength {
                expected: self.num_variables,
                got: assignment.len(),
            });
        }
        Ok(self.clauses.iter().all(|c| c.eval(assignment)))
    }

    /// Canonical DIMACS text: header, one clause per line, LF endings.
    pub fn to_dimacs(&self) -> String {
        let mut out = format!("p cnf {} {}\n", self.num_variables, self.clauses.len());
        for clause in &self.clauses {
            for lit in clause.literals() {
                out.push_str(&lit.to_dimacs().to_string());
                out.push(' ');
            }
            out.push_str("0\n");
        }
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, clause) in self.clauses.iter().enumerate() {
            if i > 0 {
                write!(f, " ∧ ")?;
            }
            write!(f, "{clause}")?;
        }
        Ok(())
    }
}

/// Boolean values for variables `1..=n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Assignment {
    values: Vec<bool>,
}

impl Assignment {
    pub fn new(values: Vec<bool>) -> Self {
        Self { values }
    }

    pub fn all_false(n: usize) -> Self {
        Self::new(vec![false; n])
    }

    /// Bit `n - k` of `mask` (x1 is the most significant bit) gives `x_k`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self::new((0..n).map(|k| (mask >> (n - 1 - k)) & 1 == 1).collect())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value of the 1-based `variable`.
    pub fn value(&self, variable: u32) -> bool {
        self.values[variable as usize - 1]
    }

    pub fn set(&mut self, variable: u32, value: bool) {
        self.values[variable as usize - 1] = value;
    }

    pub fn values(&self) -> &[bool] {
        &self.values
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.values {
            write!(f, "{}", u8::from(*v))?;
        }
        Ok(())
    }
}

/// Non-fatal observations made while parsing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseWarning {
    DuplicateLiteral { line: usize, clause: usize },
    Tautology { line: usize, clause: usize },
}

impl fmt::Display for ParseWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::DuplicateLiteral { line, clause } => {
                write!(
                    f,
                    "line {line}: duplicate literal removed from clause {clause}"
                )
            }
            Self::Tautology { line, clause } => {
                write!(f, "line {line}: clause {clause} is tautological")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Parsed {
    pub formula: Formula,
    pub warnings: Vec<ParseWarning>,
}

/// Parses DIMACS CNF. Clauses may span lines; LF and CRLF are accepted.
pub fn parse_dimacs(text: &str) -> Result<Parsed, FormulaError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses = Vec::new();
    let mut warnings = Vec::new();
    let mut pending: Vec<Literal> = Vec::new();
    let mut pending_line = 0;

    let finish = |lits: &mut Vec<Literal>,
                  line: usize,
                  clauses: &mut Vec<Clause>,
                  warnings: &mut Vec<ParseWarning>|
     -> Result<(), FormulaError> {
        let idx = clauses.len();
        let (clause, dedup) = Clause::normalized(lits.drain(..)).map_err(|e| match e {
            FormulaError::EmptyClause { .. } => FormulaError::EmptyClause { line },
            FormulaError::ClauseTooLong { len, .. } => FormulaError::ClauseTooLong { line, len },
            other => other,
        })?;
        if dedup {
            warnings.push(ParseWarning::DuplicateLiteral { line, clause: idx });
        }
        if clause.is_tautology() {
            warnings.push(ParseWarning::Tautology { line, clause: idx });
        }
        clauses.push(clause);
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r').trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(FormulaError::MalformedHeader {
                    line: line_no,
                    reason: "duplicate header".into(),
                });
            }
            header = Some(parse_header(line, line_no)?);
            continue;
        }
        let Some((num_variables, _)) = header else {
            return Err(FormulaError::MissingHeader);
        };
        for token in line.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| FormulaError::BadToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if value == 0 {
                if pending.is_empty() {
                    return Err(FormulaError::EmptyClause { line: line_no });
                }
                finish(&mut pending, pending_line, &mut clauses, &mut warnings)?;
                continue;
            }
            let lit = Literal::from_dimacs(value).ok_or_else(|| FormulaError::BadToken {
                line: line_no,
                token: token.to_string(),
            })?;
            if lit.variable() as usize > num_variables {
                return Err(FormulaError::VariableOutOfRange {
                    line: line_no,
                    variable: lit.variable(),
                    num_variables,
                });
            }
            if pending.is_empty() {
                pending_line = line_no;
            }
            pending.push(lit);
        }
    }
    // Tolerate a final clause without its terminating zero.
    if !pending.is_empty() {
        finish(&mut pending, pending_line, &mut clauses, &mut warnings)?;
    }

    let (num_variables, declared) = header.ok_or(FormulaError::MissingHeader)?;
    if declared != clauses.len() {
        return Err(FormulaError::ClauseCountMismatch {
            declared,
            found: clauses.len(),
        });
    }
    let formula = Formula::new(num_variables, clauses)?;
    Ok(Parsed { formula, warnings })
}

fn parse_header(line: &str, line_no: usize) -> Result<(usize, usize), FormulaError> {
    let bad = |reason: &str| FormulaError::MalformedHeader {
        line: line_no,
        reason: reason.to_string(),
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
        return Err(bad("expected `p cnf <variables> <clauses>`"));
    }
    let n: usize = fields[2]
        .parse()
        .map_err(|_| bad("variable count is not an integer"))?;
    let m: usize = fields[3]
        .parse()
        .map_err(|_| bad("clause count is not an integer"))?;
    if n == 0 {
        return Err(bad("variable count must be positive"));
    }
    if m == 0 {
        return Err(bad("clause count must be positive"));
    }
    Ok((n, m))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SatReport {
    pub satisfiable: bool,
    /// Lexicographically first satisfying assignment, ordering `false < true`
    /// with `x1` compared first.
    pub witness: Option<Assignment>,
    pub count: u64,
}

/// Exhaustive satisfiability check over all `2^n` assignments.
pub fn brute_force_sat(formula: &Formula) -> Result<SatReport, FormulaError> {
    let n = formula.num_variables();
    if n > MAX_ENUMERATION_VARIABLES {
        return Err(FormulaError::TooManyVariables { num_variables: n });
    }
    // Variable k lives at bit n - k so that counting up visits assignments in
    // lexicographic order.
    let masks: Vec<(u64, u64)> = formula
        .clauses()
        .iter()
        .map(|c| {
            c.literals().iter().fold((0u64, 0u64), |(pos, neg), lit| {
                let bit = 1u64 << (n - lit.variable() as usize);
                if lit.is_negated() {
                    (pos, neg | bit)
                } else {
                    (pos | bit, neg)
                }
            })
        })
        .collect();
    let mut count = 0u64;
    let mut witness = None;
    for mask in 0..(1u64 << n) {
        if masks
            .iter()
            .all(|&(pos, neg)| mask & pos != 0 || !mask & neg != 0)
        {
            if witness.is_none() {
                witness = Some(mask);
            }
            count += 1;
        }
    }
    Ok(SatReport {
        satisfiable: count > 0,
        witness: witness.map(|m| Assignment::from_mask(n, m)),
        count,
    })
}
