//! General subspace ensembles.
//!
//! Step one fits a detector to every subspace of a [`SubspaceSet`] and derives
//! one factor per record; step two fuses each record's factors with a
//! [`Combiner`] and ranks. Factors are fused in the canonical subspace order,
//! so the ranking does not depend on the order subspaces were listed in.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::combiner::Combiner;
use crate::dataset::{Dataset, ValueId, ABSENT};
use crate::error::{Error, Result};
use crate::ranking::{Candidate, Polarity, ScoredRecord, Selection, TopK};
use crate::soe1::{fuse, partitions};

/// A non-empty attribute set in canonical (ascending) order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Subspace(Vec<usize>);

impl Subspace {
    /// Validates against an attribute count `d` and sorts.
    pub fn new(mut attrs: Vec<usize>, d: usize) -> Result<Self> {
        if attrs.is_empty() {
            return Err(Error::usage("a subspace needs at least one attribute"));
        }
        attrs.sort_unstable();
        if attrs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::usage(format!("duplicate attribute in subspace {attrs:?}")));
        }
        if let Some(&a) = attrs.iter().find(|&&a| a >= d) {
            return Err(Error::usage(format!(
                "attribute index {a} out of range (d = {d})"
            )));
        }
        Ok(Subspace(attrs))
    }

    pub fn attrs(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_subset_of(&self, other: &Subspace) -> bool {
        self.0.iter().all(|a| other.0.binary_search(a).is_ok())
    }

    pub fn display_names<'a>(&'a self, ds: &'a Dataset) -> impl fmt::Display + 'a {
        SubspaceNames(self, ds)
    }
}

struct SubspaceNames<'a>(&'a Subspace, &'a Dataset);

impl fmt::Display for SubspaceNames<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &a) in self.0.attrs().iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            f.write_str(self.1.attribute_name(a))?;
        }
        Ok(())
    }
}

/// Canonical order: by dimensionality, then lexicographically.
impl Ord for Subspace {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dim().cmp(&other.dim()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Subspace {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Computes per-record outlier factors in one subspace.
///
/// Factors must lie in `[0, 1]` and be deterministic for a fixed dataset. The
/// detector declares which [`Polarity`] its factors follow.
pub trait SubspaceDetector: Send + Sync {
    fn name(&self) -> &str;

    fn polarity(&self) -> Polarity;

    fn fit(&self, ds: &Dataset, subspace: &Subspace) -> Result<Box<dyn SubspaceModel>>;
}

/// A detector fitted to one subspace.
pub trait SubspaceModel: Send + Sync {
    /// Factor of `record`, or `None` when the record cannot be scored here.
    fn factor(&self, ds: &Dataset, record: usize) -> Option<f64>;

    /// Entries held by the fitted model.
    fn size(&self) -> usize;
}

/// Frequency of the record's full projected tuple over the records whose
/// projection has no absent cell. On a single attribute this is exactly the
/// one-dimensional histogram factor.
#[derive(Clone, Copy, Debug, Default)]
pub struct JointFrequency {
    pub polarity: Polarity,
}

impl JointFrequency {
    pub fn new(polarity: Polarity) -> Self {
        JointFrequency { polarity }
    }
}

struct JointFrequencyModel {
    attrs: Vec<usize>,
    counts: HashMap<Box<[ValueId]>, u64>,
    total: u64,
    polarity: Polarity,
}

fn projected(ds: &Dataset, attrs: &[usize], record: usize, buf: &mut Vec<ValueId>) -> bool {
    buf.clear();
    for &a in attrs {
        let id = ds.codes(a).map(|c| c[record]).unwrap_or(ABSENT);
        if id == ABSENT {
            return false;
        }
        buf.push(id);
    }
    true
}

impl SubspaceDetector for JointFrequency {
    fn name(&self) -> &str {
        "joint-frequency"
    }

    fn polarity(&self) -> Polarity {
        self.polarity
    }

    fn fit(&self, ds: &Dataset, subspace: &Subspace) -> Result<Box<dyn SubspaceModel>> {
        for &a in subspace.attrs() {
            ds.codes(a)?;
        }
        let mut counts: HashMap<Box<[ValueId]>, u64> = HashMap::new();
        let mut total = 0;
        let mut buf = Vec::with_capacity(subspace.dim());
        for r in 0..ds.n() {
            if projected(ds, subspace.attrs(), r, &mut buf) {
                match counts.get_mut(buf.as_slice()) {
                    Some(c) => *c += 1,
                    None => {
                        counts.insert(buf.clone().into_boxed_slice(), 1);
                    }
                }
                total += 1;
            }
        }
        Ok(Box::new(JointFrequencyModel {
            attrs: subspace.attrs().to_vec(),
            counts,
            total,
            polarity: self.polarity,
        }))
    }
}

impl SubspaceModel for JointFrequencyModel {
    fn factor(&self, ds: &Dataset, record: usize) -> Option<f64> {
        let mut buf = Vec::with_capacity(self.attrs.len());
        if !projected(ds, &self.attrs, record, &mut buf) {
            return None;
        }
        let count = self.counts.get(buf.as_slice()).copied().unwrap_or(0);
        Some(self.polarity.factor(count, self.total))
    }

    fn size(&self) -> usize {
        self.counts.len()
    }
}

/// Joint-frequency factor of one record (one pass over the data).
pub fn joint_frequency_factor(
    ds: &Dataset,
    subspace: &Subspace,
    record: usize,
    polarity: Polarity,
) -> Result<Option<f64>> {
    if record >= ds.n() {
        return Err(Error::usage(format!("record {record} out of range")));
    }
    let model = JointFrequency::new(polarity).fit(ds, subspace)?;
    Ok(model.factor(ds, record))
}

/// Subspaces with their detectors, kept in canonical order.
#[derive(Clone)]
pub struct SubspaceSet {
    entries: Vec<(Subspace, Arc<dyn SubspaceDetector>)>,
}

impl fmt::Debug for SubspaceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list()
            .entries(self.entries.iter().map(|(s, d)| (s, d.name())))
            .finish()
    }
}

impl SubspaceSet {
    pub fn new(entries: Vec<(Subspace, Arc<dyn SubspaceDetector>)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::usage("the subspace set is empty"));
        }
        let mut entries = entries;
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::usage(format!(
                "duplicate subspace {:?}",
                w[0].0.attrs()
            )));
        }
        Ok(SubspaceSet { entries })
    }

    /// Binds one detector to every subspace.
    pub fn uniform(
        subspaces: Vec<Subspace>,
        detector: Arc<dyn SubspaceDetector>,
    ) -> Result<Self> {
        Self::new(
            subspaces
                .into_iter()
                .map(|s| (s, Arc::clone(&detector)))
                .collect(),
        )
    }

    /// Every single attribute with a joint-frequency detector.
    pub fn singletons(d: usize, polarity: Polarity) -> Result<Self> {
        let subspaces = (0..d).map(|a| Subspace(vec![a])).collect();
        Self::uniform(subspaces, Arc::new(JointFrequency::new(polarity)))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn subspaces(&self) -> impl Iterator<Item = &Subspace> {
        self.entries.iter().map(|(s, _)| s)
    }
}

/// Number of subspaces of dimension `1..=max_dim` over `d` attributes.
pub fn subspace_count(d: usize, max_dim: usize) -> u128 {
    let mut total = 0u128;
    let mut binom = 1u128;
    for i in 1..=max_dim.min(d) {
        binom = binom * (d - i + 1) as u128 / i as u128;
        total = total.saturating_add(binom);
    }
    total
}

pub const DEFAULT_SUBSPACE_CAP: u128 = 100_000;

/// All subspaces of dimension at most `max_dim`, in canonical order.
pub fn enumerate_subspaces(d: usize, max_dim: usize, cap: u128) -> Result<Vec<Subspace>> {
    if max_dim == 0 || max_dim > d {
        return Err(Error::usage(format!(
            "max dimension {max_dim} must lie in 1..={d}"
        )));
    }
    let count = subspace_count(d, max_dim);
    if count > cap {
        return Err(Error::usage(format!(
            "{count} subspaces of dimension <= {max_dim} over {d} attributes exceed the cap of {cap}"
        )));
    }
    let mut out = Vec::with_capacity(count as usize);
    for dim in 1..=max_dim {
        let mut combo: Vec<usize> = (0..dim).collect();
        loop {
            out.push(Subspace(combo.clone()));
            // Advance to the next combination in lexicographic order.
            let mut i = dim;
            while i > 0 && combo[i - 1] == d - dim + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            combo[i - 1] += 1;
            for j in i..dim {
                combo[j] = combo[j - 1] + 1;
            }
        }
    }
    Ok(out)
}

/// Parses one comma-separated list of attribute names per line; blank lines
/// and `#` comments are skipped.
pub fn parse_subspace_file(text: &str, ds: &Dataset) -> Result<Vec<Subspace>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let attrs = line
            .split(',')
            .map(|name| {
                let name = name.trim();
                ds.attribute_index(name).ok_or_else(|| Error::Parse {
                    row: i + 1,
                    msg: format!("unknown attribute `{name}`"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(Subspace::new(attrs, ds.d())?);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameworkOptions {
    pub log_space: bool,
    /// Largest factor matrix (in bytes) materialized between the two steps;
    /// beyond it factors are recomputed from the fitted models per record batch.
    pub memory_budget: usize,
    pub parallel: bool,
}

impl Default for FrameworkOptions {
    fn default() -> Self {
        FrameworkOptions {
            log_space: false,
            memory_budget: 256 << 20,
            parallel: true,
        }
    }
}

struct Fitted<'a> {
    models: Vec<Box<dyn SubspaceModel>>,
    matrix: Option<Vec<Vec<Option<f64>>>>,
    ds: &'a Dataset,
}

impl Fitted<'_> {
    #[inline]
    fn factor(&self, subspace: usize, record: usize) -> Option<f64> {
        match &self.matrix {
            Some(m) => m[subspace][record],
            None => self.models[subspace].factor(self.ds, record),
        }
    }
}

fn fit_all<'a>(
    ds: &'a Dataset,
    ss: &SubspaceSet,
    polarity: Polarity,
    opts: &FrameworkOptions,
) -> Result<Fitted<'a>> {
    if let Some((s, det)) = ss.entries.iter().find(|(_, d)| d.polarity() != polarity) {
        return Err(Error::usage(format!(
            "detector `{}` on subspace {:?} uses {} polarity but {polarity} ranking was requested",
            det.name(),
            s.attrs(),
            det.polarity()
        )));
    }
    let fit_one = |(s, det): &(Subspace, Arc<dyn SubspaceDetector>)| det.fit(ds, s);
    let models: Vec<Box<dyn SubspaceModel>> = if opts.parallel {
        ss.entries.par_iter().map(fit_one).collect::<Result<_>>()?
    } else {
        ss.entries.iter().map(fit_one).collect::<Result<_>>()?
    };
    let bytes = ds
        .n()
        .saturating_mul(ss.len())
        .saturating_mul(std::mem::size_of::<Option<f64>>());
    let matrix = (bytes <= opts.memory_budget).then(|| {
        let column = |m: &dyn SubspaceModel| -> Vec<Option<f64>> {
            (0..ds.n()).map(|r| m.factor(ds, r)).collect()
        };
        if opts.parallel {
            models.par_iter().map(|m| column(m.as_ref())).collect()
        } else {
            models.iter().map(|m| column(m.as_ref())).collect()
        }
    });
    Ok(Fitted { models, matrix, ds })
}

/// Runs both steps and returns the top records under `polarity`.
pub fn run_framework(
    ds: &Dataset,
    ss: &SubspaceSet,
    combiner: Combiner,
    selection: Selection,
    polarity: Polarity,
    opts: &FrameworkOptions,
) -> Result<Vec<ScoredRecord>> {
    let k = selection.resolve(ds.n())?;
    let fitted = fit_all(ds, ss, polarity, opts)?;
    let m = ss.len();
    let scan = |range: std::ops::Range<usize>| -> Result<TopK> {
        let mut top = TopK::new(k);
        let mut factors = Vec::with_capacity(m);
        for r in range {
            factors.clear();
            factors.extend((0..m).filter_map(|s| fitted.factor(s, r)));
            if factors.is_empty() {
                continue;
            }
            let score = fuse(&combiner, &factors, opts.log_space)?;
            top.push(Candidate::new(score, r, polarity));
        }
        Ok(top)
    };
    let top = if opts.parallel {
        partitions(ds.n())
            .into_par_iter()
            .map(scan)
            .try_reduce(|| TopK::new(k), |a, b| Ok(a.merge(b)))?
    } else {
        scan(0..ds.n())?
    };
    Ok(top.into_ranking())
}

/// Ranks records separately in every subspace without fusing.
pub fn run_per_subspace(
    ds: &Dataset,
    ss: &SubspaceSet,
    selection: Selection,
    polarity: Polarity,
    opts: &FrameworkOptions,
) -> Result<Vec<(Subspace, Vec<ScoredRecord>)>> {
    let k = selection.resolve(ds.n())?;
    let fitted = fit_all(ds, ss, polarity, opts)?;
    Ok(ss
        .entries
        .iter()
        .enumerate()
        .map(|(s, (subspace, _))| {
            let mut top = TopK::new(k);
            for r in 0..ds.n() {
                if let Some(f) = fitted.factor(s, r) {
                    top.push(Candidate::new(f, r, polarity));
                }
            }
            (subspace.clone(), top.into_ranking())
        })
        .collect())
}
