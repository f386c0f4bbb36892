//! Two-scan detector over one-dimensional subspaces.
//!
//! The first scan builds one histogram per attribute. The second scan turns
//! each record's attribute values into normalized frequencies, fuses them with
//! the configured [`Combiner`], and keeps the `k` most outlying records in a
//! bounded heap.

use std::ops::Range;

use rayon::prelude::*;

use crate::combiner::Combiner;
use crate::dataset::{Dataset, ValueId, ABSENT};
use crate::error::Result;
use crate::histogram::HistogramSet;
use crate::ranking::{Candidate, Polarity, ScoredRecord, Selection, TopK};

#[derive(Clone, Debug, PartialEq)]
pub struct Soe1Config {
    pub selection: Selection,
    pub combiner: Combiner,
    pub polarity: Polarity,
    /// Score the product operator as a sum of logarithms.
    pub log_space: bool,
    /// Split both scans into record ranges processed on the rayon pool.
    pub parallel: bool,
}

impl Soe1Config {
    pub fn new(selection: Selection, combiner: Combiner, polarity: Polarity) -> Self {
        Soe1Config {
            selection,
            combiner,
            polarity,
            log_space: false,
            parallel: true,
        }
    }

    pub fn log_space(mut self, on: bool) -> Self {
        self.log_space = on;
        self
    }

    pub fn parallel(mut self, on: bool) -> Self {
        self.parallel = on;
        self
    }
}

/// Instrumentation gathered during [`detect_with_stats`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScanStats {
    /// Records visited across both scans.
    pub records_read: usize,
    /// Observed histogram entries held in memory.
    pub histogram_entries: usize,
    /// Largest size reached by any single top-k heap.
    pub heap_peak: usize,
    /// Records whose every factor was absent.
    pub excluded: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Detection {
    pub ranking: Vec<ScoredRecord>,
    pub stats: ScanStats,
}

/// Normalized factor of `record` in the one-dimensional subspace `attr`, or
/// `None` for an absent cell.
pub fn subspace_factor(
    hs: &HistogramSet,
    ds: &Dataset,
    record: usize,
    attr: usize,
    polarity: Polarity,
) -> Result<Option<f64>> {
    let id = ds.codes(attr)?[record];
    Ok(factor_of(hs, attr, id, polarity))
}

#[inline]
fn factor_of(hs: &HistogramSet, attr: usize, id: ValueId, polarity: Polarity) -> Option<f64> {
    if id == ABSENT {
        return None;
    }
    let h = &hs.histograms()[attr];
    Some(polarity.factor(h.frequency(id), h.total()))
}

/// Factor vector of `record` in attribute order, `None` for absent cells.
pub fn factor_vector(
    hs: &HistogramSet,
    ds: &Dataset,
    record: usize,
    polarity: Polarity,
) -> Result<Vec<Option<f64>>> {
    (0..ds.d())
        .map(|a| subspace_factor(hs, ds, record, a, polarity))
        .collect()
}

/// Top-k most outlying records.
pub fn detect(ds: &Dataset, cfg: &Soe1Config) -> Result<Vec<ScoredRecord>> {
    detect_with_stats(ds, cfg).map(|d| d.ranking)
}

/// Full ranking of every scorable record.
pub fn score_all(ds: &Dataset, cfg: &Soe1Config) -> Result<Vec<ScoredRecord>> {
    let cfg = Soe1Config {
        selection: Selection::K(ds.n()),
        ..cfg.clone()
    };
    detect(ds, &cfg)
}

pub fn detect_with_stats(ds: &Dataset, cfg: &Soe1Config) -> Result<Detection> {
    ds.ensure_categorical()?;
    let k = cfg.selection.resolve(ds.n())?;

    let hs = if cfg.parallel {
        HistogramSet::build_parallel(ds)?
    } else {
        HistogramSet::build(ds)?
    };
    debug_assert!(hs.is_conserved());

    let columns: Vec<&[ValueId]> = (0..ds.d()).map(|a| ds.codes(a)).collect::<Result<_>>()?;
    let scorer = Scorer {
        hs: &hs,
        columns: &columns,
        cfg,
    };
    let pass = if cfg.parallel {
        partitions(ds.n())
            .into_par_iter()
            .map(|range| scorer.scan(range, k))
            .try_reduce(|| ScanPartial::new(k), |a, b| Ok(a.merge(b)))?
    } else {
        scorer.scan(0..ds.n(), k)?
    };

    let mut excluded = pass.excluded;
    excluded.sort_unstable();
    if !excluded.is_empty() {
        log::warn!(
            "{} record(s) have no non-missing attribute and were not ranked",
            excluded.len()
        );
    }
    Ok(Detection {
        stats: ScanStats {
            records_read: hs.n() + pass.read,
            histogram_entries: hs.entry_count(),
            heap_peak: pass.heap_peak,
            excluded,
        },
        ranking: pass.top.into_ranking(),
    })
}

const PARTITION_ROWS: usize = 1 << 13;

pub(crate) fn partitions(n: usize) -> Vec<Range<usize>> {
    (0..n)
        .step_by(PARTITION_ROWS)
        .map(|s| s..(s + PARTITION_ROWS).min(n))
        .collect()
}

struct Scorer<'a> {
    hs: &'a HistogramSet,
    columns: &'a [&'a [ValueId]],
    cfg: &'a Soe1Config,
}

struct ScanPartial {
    top: TopK,
    read: usize,
    heap_peak: usize,
    excluded: Vec<usize>,
}

impl ScanPartial {
    fn new(k: usize) -> Self {
        ScanPartial {
            top: TopK::new(k),
            read: 0,
            heap_peak: 0,
            excluded: Vec::new(),
        }
    }

    fn merge(mut self, other: ScanPartial) -> ScanPartial {
        self.heap_peak = self.heap_peak.max(other.heap_peak);
        self.read += other.read;
        self.excluded.extend(other.excluded);
        self.top = self.top.merge(other.top);
        self
    }
}

impl Scorer<'_> {
    fn scan(&self, range: Range<usize>, k: usize) -> Result<ScanPartial> {
        let mut partial = ScanPartial::new(k);
        let mut factors = Vec::with_capacity(self.columns.len());
        for r in range {
            partial.read += 1;
            factors.clear();
            for (attr, col) in self.columns.iter().enumerate() {
                if let Some(f) = factor_of(self.hs, attr, col[r], self.cfg.polarity) {
                    factors.push(f);
                }
            }
            if factors.is_empty() {
                partial.excluded.push(r);
                continue;
            }
            let score = fuse(&self.cfg.combiner, &factors, self.cfg.log_space)?;
            partial
                .top
                .push(Candidate::new(score, r, self.cfg.polarity));
        }
        partial.heap_peak = partial.top.peak();
        Ok(partial)
    }
}

#[inline]
pub(crate) fn fuse(combiner: &Combiner, factors: &[f64], log_space: bool) -> Result<f64> {
    if log_space {
        combiner.combine_log(factors)
    } else {
        combiner.combine(factors)
    }
}
