//! Cost histograms and the quantile-shaped objective.
//!
//! The shaped cost of a sampled distribution is its mean plus the sum of its
//! nearest-rank quantiles `e_p` over a set of levels `E`, where `e_p` is the
//! smallest observed value whose cumulative relative frequency reaches `p`
//! (accumulated from the smallest value upward).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cnf::{CnfFormula, CostParams, PackedFormula};
use crate::qsim::ShotSet;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuantileSetError {
    #[error("quantile set is empty")]
    Empty,
    #[error("quantile level {0} is outside (0, 1)")]
    OutOfRange(f64),
    #[error("quantile level {0} given twice")]
    Duplicate(f64),
    #[error("cannot parse quantile level '{0}'")]
    Parse(String),
}

/// Sorted, distinct probability levels in `(0, 1)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct QuantileSet(Vec<f64>);

impl QuantileSet {
    pub fn new(mut levels: Vec<f64>) -> Result<Self, QuantileSetError> {
        if levels.is_empty() {
            return Err(QuantileSetError::Empty);
        }
        if let Some(&bad) = levels.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(QuantileSetError::OutOfRange(bad));
        }
        levels.sort_by(f64::total_cmp);
        if let Some(w) = levels.windows(2).find(|w| w[0] == w[1]) {
            return Err(QuantileSetError::Duplicate(w[0]));
        }
        Ok(Self(levels))
    }

    /// Parses a comma-separated list such as `0.01,0.05,0.1`.
    pub fn parse(text: &str) -> Result<Self, QuantileSetError> {
        let levels = text
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|_| QuantileSetError::Parse(s.to_string())))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(levels)
    }

    pub fn levels(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for QuantileSet {
    fn default() -> Self {
        Self(vec![0.01, 0.05, 0.1])
    }
}

impl TryFrom<Vec<f64>> for QuantileSet {
    type Error = QuantileSetError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<QuantileSet> for Vec<f64> {
    fn from(q: QuantileSet) -> Self {
        q.0
    }
}

/// Exact value counts of a sampled cost.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CostHistogram {
    counts: BTreeMap<OrderedFloat<f64>, u64>,
    total: u64,
}

impl CostHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_counts<I: IntoIterator<Item = (f64, u64)>>(counts: I) -> Self {
        let mut h = Self::new();
        for (v, c) in counts {
            h.add(v, c);
        }
        h
    }

    pub fn add(&mut self, value: f64, count: u64) {
        if count == 0 {
            return;
        }
        *self.counts.entry(OrderedFloat(value)).or_insert(0) += count;
        self.total += count;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn count(&self, value: f64) -> u64 {
        self.counts.get(&OrderedFloat(value)).copied().unwrap_or(0)
    }

    pub fn frequency(&self, value: f64) -> f64 {
        self.count(value) as f64 / self.total as f64
    }

    /// `(value, count)` in ascending value order.
    pub fn entries(&self) -> impl Iterator<Item = (f64, u64)> + '_ {
        self.counts.iter().map(|(v, &c)| (v.0, c))
    }

    pub fn mean(&self) -> f64 {
        assert!(!self.is_empty(), "mean of an empty histogram");
        let sum: f64 = self.entries().map(|(v, c)| v * c as f64).sum();
        sum / self.total as f64
    }

    /// Relative frequency of values `<= value`.
    pub fn cumulative_frequency(&self, value: f64) -> f64 {
        let below: u64 = self.counts.range(..=OrderedFloat(value)).map(|(_, c)| c).sum();
        below as f64 / self.total as f64
    }

    pub fn rows(&self) -> Vec<TableRow> {
        let mut cum = 0u64;
        self.entries()
            .map(|(value, count)| {
                cum += count;
                TableRow {
                    value,
                    count: Some(count),
                    probability: count as f64 / self.total as f64,
                    cumfreq: cum as f64 / self.total as f64,
                }
            })
            .collect()
    }
}

/// Histogram of `g` over all shots.
pub fn cost_histogram(f: &CnfFormula, shots: &ShotSet, params: &CostParams) -> CostHistogram {
    assert!(!shots.is_empty(), "cost histogram needs at least one shot");
    let packed = PackedFormula::new(f);
    tally(shots, |r| packed.g(r, params))
}

/// Histogram of the unsatisfied-clause count `h` over all shots.
pub fn h_histogram(f: &CnfFormula, shots: &ShotSet) -> CostHistogram {
    let packed = PackedFormula::new(f);
    tally(shots, |r| f64::from(packed.h(r)))
}

fn tally(shots: &ShotSet, value: impl Fn(u64) -> f64) -> CostHistogram {
    let mut counts: BTreeMap<OrderedFloat<f64>, u64> = BTreeMap::new();
    for &r in shots.ranks() {
        *counts.entry(OrderedFloat(value(r))).or_insert(0) += 1;
    }
    CostHistogram { counts, total: shots.len() as u64 }
}

/// Nearest-rank quantile over `(value, mass)` pairs sorted by value: the first
/// value whose cumulative share of `total` reaches `p`. `cf` before the first
/// entry is 0.
pub fn nearest_rank<I>(entries: I, total: f64, p: f64) -> f64
where
    I: IntoIterator<Item = (f64, f64)>,
{
    let mut cum = 0.0;
    let mut last = f64::NAN;
    for (value, mass) in entries {
        cum += mass;
        last = value;
        if cum / total >= p {
            return value;
        }
    }
    // rounding left the final cumulative share a hair below p
    last
}

/// `e_p` of a histogram; always a member of its support.
pub fn quantile(hist: &CostHistogram, p: f64) -> f64 {
    assert!(!hist.is_empty(), "quantile of an empty histogram");
    nearest_rank(hist.entries().map(|(v, c)| (v, c as f64)), hist.total as f64, p)
}

/// Mean plus the sum of `e_p` for every level in `levels`.
pub fn shaped_cost(hist: &CostHistogram, levels: &QuantileSet) -> f64 {
    hist.mean() + levels.levels().iter().map(|&p| quantile(hist, p)).sum::<f64>()
}

/// One line of a histogram or distribution report. Probabilities here are
/// fractions; CSV output renders them as percentages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub count: Option<u64>,
    pub probability: f64,
    pub cumfreq: f64,
}

/// CSV with columns `<label>,count,probability,cumfreq`; probability and
/// cumfreq are percentages, count is blank for probability-only tables.
pub fn rows_to_csv(label: &str, rows: &[TableRow]) -> String {
    let mut s = format!("{label},count,probability,cumfreq\n");
    for r in rows {
        let count = r.count.map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{:.6},{:.6}", r.value, count, r.probability * 100.0, r.cumfreq * 100.0);
    }
    s
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten)]
    value: BTreeMap<&'a str, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    count: Option<u64>,
    probability: f64,
    cumfreq: f64,
}

/// JSON array of `{"<label>":v,"count":c,"probability":pct,"cumfreq":pct}`.
pub fn rows_to_json(label: &str, rows: &[TableRow]) -> String {
    let out: Vec<JsonRow<'_>> = rows
        .iter()
        .map(|r| JsonRow {
            value: BTreeMap::from([(label, r.value)]),
            count: r.count,
            probability: r.probability * 100.0,
            cumfreq: r.cumfreq * 100.0,
        })
        .collect();
    serde_json::to_string_pretty(&out).expect("rows serialize")
}
