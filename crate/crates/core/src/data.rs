//! Domain types shared by every design.

use alloc::vec::Vec;
use core::fmt;
use core::ops::Index;

use crate::error::{Error, Result};

/// Observed responses and sample size of one basket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Basket {
    pub responses: u32,
    pub size: u32,
}

impl Basket {
    pub fn new(responses: u32, size: u32) -> Result<Self> {
        if responses > size {
            return Err(Error::Domain("responses exceed sample size"));
        }
        Ok(Self { responses, size })
    }

    pub fn failures(&self) -> u32 {
        self.size - self.responses
    }

    /// Observed response rate; `None` for an empty basket.
    pub fn rate(&self) -> Option<f64> {
        (self.size > 0).then(|| self.responses as f64 / self.size as f64)
    }
}

/// Data of all baskets of one trial.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasketData {
    baskets: Vec<Basket>,
}

impl BasketData {
    pub fn new(baskets: Vec<Basket>) -> Result<Self> {
        if baskets.len() < 2 {
            return Err(Error::Domain("a basket trial needs at least two baskets"));
        }
        if baskets.iter().any(|b| b.responses > b.size) {
            return Err(Error::Domain("responses exceed sample size"));
        }
        Ok(Self { baskets })
    }

    /// Build from parallel slices of responses and sample sizes.
    pub fn from_counts(responses: &[u32], sizes: &[u32]) -> Result<Self> {
        if responses.len() != sizes.len() {
            return Err(Error::Domain("responses and sizes differ in length"));
        }
        let baskets = responses
            .iter()
            .zip(sizes)
            .map(|(&r, &n)| Basket::new(r, n))
            .collect::<Result<Vec<_>>>()?;
        Self::new(baskets)
    }

    pub fn len(&self) -> usize {
        self.baskets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.baskets.is_empty()
    }

    pub fn baskets(&self) -> &[Basket] {
        &self.baskets
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Basket> {
        self.baskets.iter()
    }
}

impl Index<usize> for BasketData {
    type Output = Basket;

    fn index(&self, k: usize) -> &Basket {
        &self.baskets[k]
    }
}

/// Square matrix of borrowing weights, row `k` holding the weights basket `k`
/// applies to every basket.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl WeightMatrix {
    /// The identity: no borrowing.
    pub fn identity(dim: usize) -> Self {
        let mut entries = alloc::vec![0.0; dim * dim];
        for k in 0..dim {
            entries[k * dim + k] = 1.0;
        }
        Self { dim, entries }
    }

    /// Full borrowing: every entry 1.
    pub fn ones(dim: usize) -> Self {
        Self { dim, entries: alloc::vec![1.0; dim * dim] }
    }

    /// Build from row-major entries, checking the unit diagonal and `[0, 1]` range.
    pub fn from_rows(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Domain("weight matrix must be square"));
        }
        if entries.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Domain("weights must lie in [0, 1]"));
        }
        if (0..dim).any(|k| entries[k * dim + k] != 1.0) {
            return Err(Error::Domain("weight matrix diagonal must be 1"));
        }
        Ok(Self { dim, entries })
    }

    /// Build from a pairwise function for the off-diagonal entries.
    pub(crate) fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = alloc::vec![0.0; dim * dim];
        for k in 0..dim {
            for i in 0..dim {
                entries[k * dim + i] = if k == i { 1.0 } else { f(k, i) };
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.entries[k * self.dim + i]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.entries[k * self.dim..(k + 1) * self.dim]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|k| (0..k).all(|i| self.get(k, i) == self.get(i, k)))
    }
}

/// Null response rate `p0` of the one-sided basket hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullRate(f64);

impl NullRate {
    pub fn new(p0: f64) -> Result<Self> {
        if !(p0 > 0.0 && p0 < 1.0) {
            return Err(Error::Domain("null rate must lie in (0, 1)"));
        }
        Ok(Self(p0))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for NullRate {
    fn default() -> Self {
        Self(0.15)
    }
}

/// Pattern of true response rates across baskets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pattern {
    Null,
    Alternative,
    Ascending,
    Descending,
    /// Big good nugget: only the largest basket is active.
    Bgn,
    /// Small good nugget: only the smallest basket is active.
    Sgn,
}

impl Pattern {
    pub const ALL: [Pattern; 6] = [
        Pattern::Null,
        Pattern::Alternative,
        Pattern::Ascending,
        Pattern::Descending,
        Pattern::Bgn,
        Pattern::Sgn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::Null => "Null",
            Pattern::Alternative => "Alternative",
            Pattern::Ascending => "Ascending",
            Pattern::Descending => "Descending",
            Pattern::Bgn => "BGN",
            Pattern::Sgn => "SGN",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sample size layout of a scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SizeFamily {
    Linear,
    Grouped,
    HighVariance,
}

impl SizeFamily {
    pub const ALL: [SizeFamily; 3] = [SizeFamily::Linear, SizeFamily::Grouped, SizeFamily::HighVariance];

    pub fn name(self) -> &'static str {
        match self {
            SizeFamily::Linear => "linear",
            SizeFamily::Grouped => "grouped",
            SizeFamily::HighVariance => "high-variance",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.to_ascii_lowercase();
        match s.as_str() {
            "linear" => Some(SizeFamily::Linear),
            "grouped" => Some(SizeFamily::Grouped),
            "high-variance" | "highvariance" | "high_variance" => Some(SizeFamily::HighVariance),
            _ => None,
        }
    }
}

impl fmt::Display for SizeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One simulation scenario: sample sizes and true response rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub id: u32,
    pub sample_sizes: Vec<u32>,
    pub true_rates: Vec<f64>,
    pub pattern: Pattern,
    pub size_family: SizeFamily,
}

impl Scenario {
    pub fn new(
        id: u32,
        sample_sizes: Vec<u32>,
        true_rates: Vec<f64>,
        pattern: Pattern,
        size_family: SizeFamily,
    ) -> Result<Self> {
        let s = Self { id, sample_sizes, true_rates, pattern, size_family };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_sizes.len() < 2 {
            return Err(Error::Domain("a scenario needs at least two baskets"));
        }
        if self.sample_sizes.len() != self.true_rates.len() {
            return Err(Error::Domain("sample sizes and true rates differ in length"));
        }
        if self.sample_sizes.contains(&0) {
            return Err(Error::Domain("sample sizes must be positive"));
        }
        if self.true_rates.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("true rates must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.sample_sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_sizes.is_empty()
    }

    /// Which baskets are truly active (`p_k > p0`).
    pub fn active(&self, p0: NullRate) -> Vec<bool> {
        self.true_rates.iter().map(|&p| p > p0.get()).collect()
    }
}
