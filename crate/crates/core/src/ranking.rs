//! Ordering of scored records and bounded top-k selection.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Meaning of a per-subspace factor.
///
/// Under `Frequency` the factor is the normalized frequency of the record's
/// projection, so smaller combined scores are more outlying and records are
/// ranked ascending. Under `Rarity` the factor is its complement and records
/// are ranked descending.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Polarity {
    #[default]
    Frequency,
    Rarity,
}

impl Polarity {
    /// Factor in `[0, 1]` for a projection seen `count` times among `total`.
    #[inline]
    pub fn factor(self, count: u64, total: u64) -> f64 {
        let f = count as f64 / total as f64;
        match self {
            Polarity::Frequency => f,
            Polarity::Rarity => 1.0 - f,
        }
    }

    /// Key under which smaller means more outlying.
    #[inline]
    pub(crate) fn key(self, score: f64) -> f64 {
        match self {
            Polarity::Frequency => score,
            Polarity::Rarity => -score,
        }
    }
}

impl FromStr for Polarity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frequency" => Ok(Polarity::Frequency),
            "rarity" => Ok(Polarity::Rarity),
            other => Err(Error::usage(format!(
                "unknown polarity `{other}` (expected `frequency` or `rarity`)"
            ))),
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Frequency => "frequency",
            Polarity::Rarity => "rarity",
        })
    }
}

/// How many records to report.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Selection {
    K(usize),
    /// Fraction of the dataset in `(0, 1]`, resolved by rounding half up.
    TopRatio(f64),
}

impl Selection {
    pub fn resolve(self, n: usize) -> Result<usize> {
        let k = match self {
            Selection::K(k) => k,
            Selection::TopRatio(r) => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::usage(format!("top ratio {r} outside (0, 1]")));
                }
                round_half_up(r * n as f64).max(1)
            }
        };
        if k == 0 {
            return Err(Error::usage("k must be at least 1"));
        }
        if k > n {
            return Err(Error::usage(format!(
                "k = {k} exceeds the number of records ({n})"
            )));
        }
        Ok(k)
    }
}

/// Rounds half up, tolerating representation error in products like `0.05 * 148`.
pub(crate) fn round_half_up(x: f64) -> usize {
    let snapped = (x * 1e9).round() / 1e9;
    (snapped + 0.5).floor().max(0.0) as usize
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoredRecord {
    pub record: usize,
    pub score: f64,
    /// 1-based position in the ranking.
    pub rank: usize,
}

/// A ranking candidate; smaller compares as more outlying, ties broken by
/// ascending record index.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Candidate {
    key: f64,
    score: f64,
    record: usize,
}

impl Candidate {
    pub(crate) fn new(score: f64, record: usize, polarity: Polarity) -> Self {
        Candidate {
            key: polarity.key(score),
            score,
            record,
        }
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key
            .total_cmp(&other.key)
            .then(self.record.cmp(&other.record))
    }
}

/// Keeps the `k` most outlying candidates seen so far.
#[derive(Debug)]
pub(crate) struct TopK {
    k: usize,
    heap: BinaryHeap<Candidate>,
    peak: usize,
}

impl TopK {
    pub(crate) fn new(k: usize) -> Self {
        TopK {
            k,
            heap: BinaryHeap::with_capacity(k.min(1 << 16) + 1),
            peak: 0,
        }
    }

    pub(crate) fn push(&mut self, c: Candidate) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(worst) = self.heap.peek() {
            if c < *worst {
                self.heap.pop();
                self.heap.push(c);
            }
        }
        self.peak = self.peak.max(self.heap.len());
    }

    pub(crate) fn merge(mut self, other: TopK) -> TopK {
        let peak = self.peak.max(other.peak);
        for c in other.heap {
            self.push(c);
        }
        self.peak = self.peak.max(peak);
        self
    }

    /// Largest number of entries held at any time.
    pub(crate) fn peak(&self) -> usize {
        self.peak
    }

    pub(crate) fn into_ranking(self) -> Vec<ScoredRecord> {
        self.heap
            .into_sorted_vec()
            .into_iter()
            .enumerate()
            .map(|(i, c)| ScoredRecord {
                record: c.record,
                score: c.score,
                rank: i + 1,
            })
            .collect()
    }
}
