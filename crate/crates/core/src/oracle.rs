//! Exhaustive references over all `2^n` assignments: exact `h` counts,
//! satisfying assignments, and infinite-shot outcome distributions and shaped
//! costs for given circuit angles.
//!
//! Ranks are split into fixed blocks that may be processed in parallel; block
//! results are merged in block order so serial and parallel runs agree bit for
//! bit.

use std::collections::BTreeMap;

use ordered_float::OrderedFloat;
use rayon::prelude::*;
use thiserror::Error;

use crate::cnf::{Assignment, CnfFormula, CostParams, PackedFormula};
use crate::qsim::{assignment_of_rank, prepare_state, AngleVector, QuantumState};
use crate::shaping::{nearest_rank, CostHistogram, QuantileSet, TableRow};

pub const DEFAULT_MAX_VARS: usize = 26;

const BLOCK_BITS: u32 = 14;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("exhaustive enumeration refused: {n} variables exceeds the limit of {max} (2^{n} assignments)")]
    TooManyVariables { n: usize, max: usize },
}

/// Exact distribution of `h` over assignments.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionTable {
    rows: BTreeMap<u32, (Option<u64>, f64)>,
    domain_size: u64,
}

impl DistributionTable {
    pub fn domain_size(&self) -> u64 {
        self.domain_size
    }

    /// Number of assignments with `h` unsatisfied clauses (enumeration tables only).
    pub fn count(&self, h: u32) -> Option<u64> {
        match self.rows.get(&h) {
            Some(row) => row.0,
            None => self.is_enumeration().then_some(0),
        }
    }

    pub fn probability(&self, h: u32) -> f64 {
        self.rows.get(&h).map_or(0.0, |r| r.1)
    }

    pub fn is_enumeration(&self) -> bool {
        self.rows.values().all(|r| r.0.is_some())
    }

    /// `(h, count, probability)` in ascending `h`, omitting empty buckets.
    pub fn entries(&self) -> impl Iterator<Item = (u32, Option<u64>, f64)> + '_ {
        self.rows.iter().map(|(&h, &(c, p))| (h, c, p))
    }

    pub fn counts(&self) -> Vec<(u32, u64)> {
        self.rows.iter().filter_map(|(&h, &(c, _))| c.map(|c| (h, c))).collect()
    }

    pub fn mean(&self) -> f64 {
        self.rows.iter().map(|(&h, &(_, p))| f64::from(h) * p).sum()
    }

    /// Nearest-rank quantile over probability mass, same rule as
    /// [`crate::shaping::quantile`].
    pub fn quantile(&self, p: f64) -> u32 {
        let total: f64 = self.rows.values().map(|r| r.1).sum();
        nearest_rank(self.rows.iter().map(|(&h, &(_, q))| (f64::from(h), q)), total, p) as u32
    }

    pub fn rows(&self) -> Vec<TableRow> {
        let mut cum = 0.0;
        self.rows
            .iter()
            .map(|(&h, &(count, probability))| {
                cum += probability;
                TableRow { value: f64::from(h), count, probability, cumfreq: cum }
            })
            .collect()
    }

    /// Enumeration tables as a histogram of `h` values.
    pub fn to_histogram(&self) -> Option<CostHistogram> {
        if !self.is_enumeration() {
            return None;
        }
        Some(CostHistogram::from_counts(self.counts().into_iter().map(|(h, c)| (f64::from(h), c))))
    }
}

/// Exhaustive enumerator with a configurable size guard.
#[derive(Clone, Copy, Debug)]
pub struct Oracle {
    pub max_vars: usize,
}

impl Default for Oracle {
    fn default() -> Self {
        Self { max_vars: DEFAULT_MAX_VARS }
    }
}

fn blocks(n: usize) -> impl IndexedParallelIterator<Item = std::ops::Range<u64>> {
    let domain = 1u64 << n;
    let block = 1u64 << BLOCK_BITS.min(n as u32);
    let count = (domain / block) as usize;
    (0..count).into_par_iter().map(move |b| b as u64 * block..(b as u64 + 1) * block)
}

/// Per-rank outcome probabilities from two half-tables: `p(r) = lo[r & mask] * hi[r >> k]`.
struct ProbabilityTable {
    lo: Vec<f64>,
    hi: Vec<f64>,
    k: usize,
}

impl ProbabilityTable {
    fn new(state: &QuantumState) -> Self {
        let n = state.num_qubits();
        let k = n / 2;
        let p1: Vec<f64> = (0..n).map(|j| state.prob_one(j)).collect();
        let table = |qubits: &[f64]| -> Vec<f64> {
            let mut t = vec![1.0];
            for &p in qubits {
                t = t.iter().map(|&x| x * (1.0 - p)).chain(t.iter().map(|&x| x * p)).collect();
            }
            t
        };
        Self { lo: table(&p1[..k]), hi: table(&p1[k..]), k }
    }

    #[inline]
    fn get(&self, rank: u64) -> f64 {
        let mask = (1u64 << self.k) - 1;
        self.lo[(rank & mask) as usize] * self.hi[(rank >> self.k) as usize]
    }
}

impl Oracle {
    fn guard(&self, f: &CnfFormula) -> Result<(), OracleError> {
        let n = f.num_vars();
        if n > self.max_vars || n > 62 {
            return Err(OracleError::TooManyVariables { n, max: self.max_vars.min(62) });
        }
        Ok(())
    }

    /// Counts assignments per number of unsatisfied clauses.
    pub fn enumerate_h(&self, f: &CnfFormula) -> Result<DistributionTable, OracleError> {
        self.guard(f)?;
        let packed = PackedFormula::new(f);
        let m = f.num_clauses();
        let counts = blocks(f.num_vars())
            .map(|range| {
                let mut local = vec![0u64; m + 1];
                for r in range {
                    local[packed.h(r) as usize] += 1;
                }
                local
            })
            .reduce(
                || vec![0u64; m + 1],
                |mut a, b| {
                    a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                    a
                },
            );
        let domain_size = 1u64 << f.num_vars();
        let rows = counts
            .into_iter()
            .enumerate()
            .filter(|(_, c)| *c > 0)
            .map(|(h, c)| (h as u32, (Some(c), c as f64 / domain_size as f64)))
            .collect();
        Ok(DistributionTable { rows, domain_size })
    }

    /// All satisfying assignments in ascending rank order.
    pub fn list_solutions(&self, f: &CnfFormula) -> Result<Vec<Assignment>, OracleError> {
        self.guard(f)?;
        let packed = PackedFormula::new(f);
        let ranks: Vec<Vec<u64>> =
            blocks(f.num_vars()).map(|range| range.filter(|&r| packed.h(r) == 0).collect()).collect();
        Ok(ranks.into_iter().flatten().map(|r| assignment_of_rank(r, f.num_vars())).collect())
    }

    /// Infinite-shot distribution of `h` for the state prepared with `angles`.
    pub fn exact_h_distribution(&self, f: &CnfFormula, angles: &AngleVector) -> Result<DistributionTable, OracleError> {
        self.guard(f)?;
        Ok(self.h_distribution_of_state(f, &prepare_state(f.num_vars(), angles)))
    }

    /// Infinite-shot distribution of `h` for an already prepared state.
    pub fn h_distribution_of_state(&self, f: &CnfFormula, state: &QuantumState) -> DistributionTable {
        assert_eq!(state.num_qubits(), f.num_vars());
        let packed = PackedFormula::new(f);
        let table = ProbabilityTable::new(state);
        let m = f.num_clauses();
        let partial: Vec<Vec<f64>> = blocks(f.num_vars())
            .map(|range| {
                let mut local = vec![0.0; m + 1];
                for r in range {
                    local[packed.h(r) as usize] += table.get(r);
                }
                local
            })
            .collect();
        let mut mass = vec![0.0; m + 1];
        for block in partial {
            mass.iter_mut().zip(block).for_each(|(x, y)| *x += y);
        }
        let rows = mass.into_iter().enumerate().filter(|(_, p)| *p > 0.0).map(|(h, p)| (h as u32, (None, p))).collect();
        DistributionTable { rows, domain_size: 1u64 << f.num_vars() }
    }

    /// Exact distribution of `g` as ascending `(value, probability)` pairs.
    pub fn exact_g_distribution(
        &self,
        f: &CnfFormula,
        angles: &AngleVector,
        params: &CostParams,
    ) -> Result<Vec<(f64, f64)>, OracleError> {
        self.guard(f)?;
        let packed = PackedFormula::new(f);
        let table = ProbabilityTable::new(&prepare_state(f.num_vars(), angles));
        let partial: Vec<BTreeMap<OrderedFloat<f64>, f64>> = blocks(f.num_vars())
            .map(|range| {
                let mut local = BTreeMap::new();
                for r in range {
                    *local.entry(OrderedFloat(packed.g(r, params))).or_insert(0.0) += table.get(r);
                }
                local
            })
            .collect();
        let mut merged: BTreeMap<OrderedFloat<f64>, f64> = BTreeMap::new();
        for block in partial {
            for (g, p) in block {
                *merged.entry(g).or_insert(0.0) += p;
            }
        }
        Ok(merged.into_iter().filter(|(_, p)| *p > 0.0).map(|(g, p)| (g.0, p)).collect())
    }

    /// Exact mean of `g` plus the exact quantiles `e_p` for `p` in `levels`.
    pub fn exact_shaped_cost(
        &self,
        f: &CnfFormula,
        angles: &AngleVector,
        params: &CostParams,
        levels: &QuantileSet,
    ) -> Result<f64, OracleError> {
        let dist = self.exact_g_distribution(f, angles, params)?;
        Ok(shaped_cost_of_distribution(&dist, levels))
    }
}

/// Mean plus quantiles of a `(value, probability)` distribution sorted by value.
pub fn shaped_cost_of_distribution(dist: &[(f64, f64)], levels: &QuantileSet) -> f64 {
    let total: f64 = dist.iter().map(|d| d.1).sum();
    let mean: f64 = dist.iter().map(|(v, p)| v * p).sum::<f64>() / total;
    mean + levels.levels().iter().map(|&p| nearest_rank(dist.iter().copied(), total, p)).sum::<f64>()
}

pub fn enumerate_h(f: &CnfFormula) -> Result<DistributionTable, OracleError> {
    Oracle::default().enumerate_h(f)
}

pub fn list_solutions(f: &CnfFormula) -> Result<Vec<Assignment>, OracleError> {
    Oracle::default().list_solutions(f)
}

pub fn exact_h_distribution(f: &CnfFormula, angles: &AngleVector) -> Result<DistributionTable, OracleError> {
    Oracle::default().exact_h_distribution(f, angles)
}

pub fn exact_shaped_cost(
    f: &CnfFormula,
    angles: &AngleVector,
    params: &CostParams,
    levels: &QuantileSet,
) -> Result<f64, OracleError> {
    Oracle::default().exact_shaped_cost(f, angles, params, levels)
}
