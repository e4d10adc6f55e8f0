//! CNF formulas: DIMACS / JSON ingestion and clause-level evaluation of
//! assignments (unsatisfied count, positional divergence, hierarchical cost,
//! satisfied weight).

use std::fmt;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A literal on a 1-based DIMACS variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    variable: u32,
    negated: bool,
}

impl Literal {
    pub fn new(variable: u32, negated: bool) -> Self {
        assert!(variable >= 1, "DIMACS variables are 1-based");
        Self { variable, negated }
    }

    /// Builds a literal from a signed DIMACS integer (`-3` is `¬v3`).
    pub fn from_dimacs(value: i64) -> Option<Self> {
        if value == 0 {
            return None;
        }
        let variable = u32::try_from(value.unsigned_abs()).ok()?;
        Some(Self::new(variable, value < 0))
    }

    pub fn variable(&self) -> u32 {
        self.variable
    }

    pub fn is_negated(&self) -> bool {
        self.negated
    }

    pub fn to_dimacs(&self) -> i64 {
        if self.negated {
            -i64::from(self.variable)
        } else {
            i64::from(self.variable)
        }
    }

    /// A literal holds when its variable's bit differs from its sign bit.
    #[inline]
    pub fn holds(&self, a: &Assignment) -> bool {
        a.get(self.variable as usize - 1) != self.negated
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.negated {
            write!(f, "¬v{}", self.variable)
        } else {
            write!(f, "v{}", self.variable)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Clause {
    index: usize,
    literals: Vec<Literal>,
    weight: f64,
}

impl Clause {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// The clause indicator `z_i`: true iff at least one literal holds.
    pub fn eval(&self, a: &Assignment) -> bool {
        self.literals.iter().any(|l| l.holds(a))
    }
}

/// Error raised when a formula is assembled programmatically.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormulaError {
    #[error("clause {clause}: empty clause")]
    EmptyClause { clause: usize },
    #[error("clause {clause}: variable {variable} out of range 1..={n}")]
    VariableOutOfRange { clause: usize, variable: u32, n: usize },
    #[error("clause {clause}: variable {variable} appears more than once")]
    DuplicateVariable { clause: usize, variable: u32 },
    #[error("clause {clause}: weight {weight} is not a nonnegative finite number")]
    BadWeight { clause: usize, weight: f64 },
}

/// A CNF instance with `n` variables and clauses indexed `1..=m` in order.
#[derive(Clone, Debug, PartialEq)]
pub struct CnfFormula {
    n: usize,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    /// Builds a formula from `(literals, weight)` pairs. Clause indices are
    /// assigned in iteration order starting from 1.
    pub fn new<I>(n: usize, clauses: I) -> Result<Self, FormulaError>
    where
        I: IntoIterator<Item = (Vec<Literal>, f64)>,
    {
        let mut out = Vec::new();
        for (pos, (literals, weight)) in clauses.into_iter().enumerate() {
            let index = pos + 1;
            check_clause(index, &literals, n)?;
            if !(weight.is_finite() && weight >= 0.0) {
                return Err(FormulaError::BadWeight { clause: index, weight });
            }
            out.push(Clause { index, literals, weight });
        }
        Ok(Self { n, clauses: out })
    }

    /// The same formula with variable `v` renamed to `n + 1 - v`.
    pub fn reverse_variables(&self) -> Self {
        let clauses = self
            .clauses
            .iter()
            .map(|c| {
                let lits = c.literals.iter().map(|l| Literal::new(self.n as u32 + 1 - l.variable(), l.is_negated()));
                Clause { index: c.index, literals: lits.collect(), weight: c.weight }
            })
            .collect();
        Self { n: self.n, clauses }
    }

    /// Unit-weight formula from signed DIMACS integers.
    pub fn from_dimacs_clauses(n: usize, clauses: &[&[i64]]) -> Result<Self, FormulaError> {
        Self::new(
            n,
            clauses.iter().map(|c| {
                let lits = c.iter().filter_map(|&v| Literal::from_dimacs(v)).collect();
                (lits, 1.0)
            }),
        )
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_literals(&self) -> usize {
        self.clauses.iter().map(|c| c.literals.len()).sum()
    }

    /// Replaces the weight of clause `index` (1-based).
    pub fn set_weight(&mut self, index: usize, weight: f64) -> Result<(), FormulaError> {
        if !(weight.is_finite() && weight >= 0.0) {
            return Err(FormulaError::BadWeight { clause: index, weight });
        }
        if let Some(c) = index.checked_sub(1).and_then(|i| self.clauses.get_mut(i)) {
            c.weight = weight;
        }
        Ok(())
    }

    /// Serializes to DIMACS. Weights are not representable and are dropped.
    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.n, self.clauses.len());
        for c in &self.clauses {
            for l in &c.literals {
                let _ = write!(s, "{} ", l.to_dimacs());
            }
            s.push_str("0\n");
        }
        s
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let doc: JsonInstance = serde_json::from_str(text)?;
        let clauses = doc
            .clauses
            .into_iter()
            .map(|c| {
                let lits = c
                    .lits
                    .iter()
                    .map(|&v| Literal::from_dimacs(v).ok_or(InstanceError::ZeroLiteral))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((lits, c.w))
            })
            .collect::<Result<Vec<_>, InstanceError>>()?;
        Ok(Self::new(doc.n, clauses)?)
    }

    pub fn to_json(&self) -> String {
        let doc = JsonInstance {
            n: self.n,
            clauses: self
                .clauses
                .iter()
                .map(|c| JsonClause { lits: c.literals.iter().map(Literal::to_dimacs).collect(), w: c.weight })
                .collect(),
        };
        serde_json::to_string(&doc).expect("instance serialization cannot fail")
    }
}

fn check_clause(index: usize, literals: &[Literal], n: usize) -> Result<(), FormulaError> {
    if literals.is_empty() {
        return Err(FormulaError::EmptyClause { clause: index });
    }
    for (k, l) in literals.iter().enumerate() {
        if l.variable as usize > n {
            return Err(FormulaError::VariableOutOfRange { clause: index, variable: l.variable, n });
        }
        if literals[..k].iter().any(|o| o.variable == l.variable) {
            return Err(FormulaError::DuplicateVariable { clause: index, variable: l.variable });
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct JsonInstance {
    n: usize,
    clauses: Vec<JsonClause>,
}

#[derive(Serialize, Deserialize)]
struct JsonClause {
    lits: Vec<i64>,
    #[serde(default = "unit_weight")]
    w: f64,
}

fn unit_weight() -> f64 {
    1.0
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("malformed JSON instance: {0}")]
    Json(#[from] serde_json::Error),
    #[error("literal 0 is not allowed in a JSON instance")]
    ZeroLiteral,
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

/// DIMACS parse failure. Every variant carries the 1-based line it refers to.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("line {line}: clause data before the 'p cnf' header")]
    MissingHeader { line: usize },
    #[error("line {line}: malformed header '{text}' (expected 'p cnf <vars> <clauses>')")]
    BadHeader { line: usize, text: String },
    #[error("line {line}: duplicate 'p' header")]
    DuplicateHeader { line: usize },
    #[error("line {line}: invalid token '{token}'")]
    InvalidToken { line: usize, token: String },
    #[error("line {line}: variable {variable} out of range 1..={n}")]
    VariableOutOfRange { line: usize, variable: u64, n: usize },
    #[error("line {line}: variable {variable} repeated within one clause")]
    DuplicateVariable { line: usize, variable: u32 },
    #[error("line {line}: empty clause")]
    EmptyClause { line: usize },
    #[error("line {line}: final clause is not terminated by 0")]
    UnterminatedClause { line: usize },
    #[error("line {line}: header promises {expected} clauses, found {found}")]
    ClauseCountMismatch { line: usize, expected: usize, found: usize },
}

impl ParseError {
    pub fn line(&self) -> usize {
        match self {
            Self::MissingHeader { line }
            | Self::BadHeader { line, .. }
            | Self::DuplicateHeader { line }
            | Self::InvalidToken { line, .. }
            | Self::VariableOutOfRange { line, .. }
            | Self::DuplicateVariable { line, .. }
            | Self::EmptyClause { line }
            | Self::UnterminatedClause { line }
            | Self::ClauseCountMismatch { line, .. } => *line,
        }
    }
}

/// Parses a DIMACS CNF document.
///
/// Comment lines start with `c`. A line starting with `%` ends the clause
/// section; SATLIB's uniform random files carry such a trailer (`%` then `0`).
pub fn parse_dimacs(text: &str) -> Result<CnfFormula, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<(Vec<Literal>, f64)> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut current_start = 0;
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('c') {
            continue;
        }
        if trimmed.starts_with('%') {
            break;
        }
        if trimmed.starts_with('p') {
            if header.is_some() {
                return Err(ParseError::DuplicateHeader { line });
            }
            header = Some(parse_header(trimmed, line)?);
            continue;
        }
        let Some((n, _)) = header else {
            return Err(ParseError::MissingHeader { line });
        };
        for token in trimmed.split_whitespace() {
            let value: i64 = token.parse().map_err(|_| ParseError::InvalidToken { line, token: token.to_string() })?;
            if value == 0 {
                if current.is_empty() {
                    return Err(ParseError::EmptyClause { line });
                }
                clauses.push((std::mem::take(&mut current), 1.0));
                continue;
            }
            let variable = value.unsigned_abs();
            if variable > n as u64 {
                return Err(ParseError::VariableOutOfRange { line, variable, n });
            }
            let lit = Literal::new(variable as u32, value < 0);
            if current.iter().any(|l| l.variable == lit.variable) {
                return Err(ParseError::DuplicateVariable { line, variable: lit.variable });
            }
            if current.is_empty() {
                current_start = line;
            }
            current.push(lit);
        }
    }

    let Some((n, m)) = header else {
        return Err(ParseError::MissingHeader { line: last_line.max(1) });
    };
    if !current.is_empty() {
        return Err(ParseError::UnterminatedClause { line: current_start });
    }
    if clauses.len() != m {
        return Err(ParseError::ClauseCountMismatch { line: last_line.max(1), expected: m, found: clauses.len() });
    }
    Ok(CnfFormula::new(n, clauses).expect("parser enforces clause invariants"))
}

fn parse_header(text: &str, line: usize) -> Result<(usize, usize), ParseError> {
    let bad = || ParseError::BadHeader { line, text: text.to_string() };
    let fields: Vec<&str> = text.split_whitespace().collect();
    match fields.as_slice() {
        ["p", "cnf", n, m] => {
            let n = n.parse().map_err(|_| bad())?;
            let m = m.parse().map_err(|_| bad())?;
            Ok((n, m))
        }
        _ => Err(bad()),
    }
}

/// A truth assignment, one bit per variable; bit `j` is DIMACS variable `j+1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment(Vec<bool>);

impl Assignment {
    pub fn new(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    /// Parses `[1, 0, 1]`-style 0/1 lists.
    pub fn from_bits(bits: &[u8]) -> Self {
        Self(bits.iter().map(|&b| b != 0).collect())
    }

    #[inline]
    pub fn get(&self, j: usize) -> bool {
        self.0[j]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.0.iter().map(|&b| u8::from(b)).collect()
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (j, b) in self.0.iter().enumerate() {
            if j > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{}", u8::from(*b))?;
        }
        f.write_str("]")
    }
}

/// Weights of the hierarchical cost `g = zeta * h + vartheta * d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub zeta: f64,
    pub vartheta: f64,
}

impl CostParams {
    /// Checks `zeta > vartheta * d_max` for a formula with `m` clauses, which
    /// makes one extra unsatisfied clause outweigh any divergence.
    pub fn dominates(&self, m: usize) -> bool {
        self.zeta > 0.0 && self.vartheta > 0.0 && self.zeta > self.vartheta * max_divergence(m) as f64
    }
}

/// `sum_{i=1..m} i^2`, the divergence of an assignment violating every clause.
pub fn max_divergence(m: usize) -> u64 {
    let m = m as u64;
    m * (m + 1) * (2 * m + 1) / 6
}

pub fn eval_clause(clause: &Clause, a: &Assignment) -> bool {
    clause.eval(a)
}

/// Number of unsatisfied clauses.
pub fn h_count(f: &CnfFormula, a: &Assignment) -> usize {
    f.clauses.iter().filter(|c| !c.eval(a)).count()
}

/// Sum of `i^2` over the 1-based indices of unsatisfied clauses.
pub fn divergence(f: &CnfFormula, a: &Assignment) -> u64 {
    f.clauses.iter().filter(|c| !c.eval(a)).map(|c| (c.index as u64).pow(2)).sum()
}

pub fn g_cost(f: &CnfFormula, a: &Assignment, params: &CostParams) -> f64 {
    let (h, d) =
        f.clauses.iter().filter(|c| !c.eval(a)).fold((0u64, 0u64), |(h, d), c| (h + 1, d + (c.index as u64).pow(2)));
    params.zeta * h as f64 + params.vartheta * d as f64
}

pub fn satisfied_weight(f: &CnfFormula, a: &Assignment) -> f64 {
    f.clauses.iter().filter(|c| c.eval(a)).map(|c| c.weight).sum()
}

/// `vartheta = 1`, `zeta = d_max + 1`.
pub fn default_params(f: &CnfFormula) -> CostParams {
    CostParams { zeta: (max_divergence(f.num_clauses()) + 1) as f64, vartheta: 1.0 }
}

/// Bitmask form of a formula for evaluating assignments packed into a `u64`
/// rank (bit `j` = variable `j+1`). Only valid for `n <= 64`.
#[derive(Clone, Debug)]
pub struct PackedFormula {
    pos: Vec<u64>,
    neg: Vec<u64>,
    n: usize,
}

impl PackedFormula {
    pub fn new(f: &CnfFormula) -> Self {
        assert!(f.n <= 64, "packed evaluation needs n <= 64");
        let mut pos = Vec::with_capacity(f.clauses.len());
        let mut neg = Vec::with_capacity(f.clauses.len());
        for c in &f.clauses {
            let (mut p, mut q) = (0u64, 0u64);
            for l in &c.literals {
                let bit = 1u64 << (l.variable - 1);
                if l.negated {
                    q |= bit;
                } else {
                    p |= bit;
                }
            }
            pos.push(p);
            neg.push(q);
        }
        Self { pos, neg, n: f.n }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Unsatisfied clause count for a packed assignment.
    #[inline]
    pub fn h(&self, rank: u64) -> u32 {
        let inv = !rank;
        self.pos.iter().zip(&self.neg).filter(|(&p, &q)| (rank & p) | (inv & q) == 0).count() as u32
    }

    /// `(h, d)` for a packed assignment.
    #[inline]
    pub fn h_and_divergence(&self, rank: u64) -> (u32, u64) {
        let inv = !rank;
        let mut h = 0;
        let mut d = 0;
        for (i, (&p, &q)) in self.pos.iter().zip(&self.neg).enumerate() {
            if (rank & p) | (inv & q) == 0 {
                h += 1;
                d += (i as u64 + 1).pow(2);
            }
        }
        (h, d)
    }

    #[inline]
    pub fn g(&self, rank: u64, params: &CostParams) -> f64 {
        let (h, d) = self.h_and_divergence(rank);
        params.zeta * f64::from(h) + params.vartheta * d as f64
    }
}
