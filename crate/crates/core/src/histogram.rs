//! Per-attribute value-frequency tables.
//!
//! Value ids are dense per attribute, so each table is a count vector indexed
//! by id. A [`HistogramSet`] is built in one pass over the records; partial
//! sets over disjoint record ranges can be merged.

use std::io::Write;
use std::ops::Range;

use rayon::prelude::*;

use crate::dataset::{Dataset, ValueId, ABSENT};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Histogram {
    attr: usize,
    counts: Vec<u64>,
    total: u64,
}

impl Histogram {
    fn empty(attr: usize, cardinality: usize) -> Self {
        Histogram {
            attr,
            counts: vec![0; cardinality],
            total: 0,
        }
    }

    pub fn attr(&self) -> usize {
        self.attr
    }

    /// Frequency of `value`; zero when it was never observed.
    #[inline]
    pub fn frequency(&self, value: ValueId) -> u64 {
        self.counts.get(value as usize).copied().unwrap_or(0)
    }

    /// Number of cells that contributed.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Observed `(value, frequency)` pairs in id order.
    pub fn iter(&self) -> impl Iterator<Item = (ValueId, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(v, &c)| (v as ValueId, c))
    }

    /// Number of observed values.
    pub fn entries(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    fn is_conserved(&self) -> bool {
        self.counts.iter().sum::<u64>() == self.total
    }
}

/// One histogram per detection attribute.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HistogramSet {
    per_attr: Vec<Histogram>,
    n: usize,
}

const PARTITION_ROWS: usize = 1 << 14;

impl HistogramSet {
    /// Set with zero counts shaped for `ds`; the identity for [`merge`](Self::merge).
    pub fn empty(ds: &Dataset) -> Result<Self> {
        ds.ensure_categorical()?;
        Ok(HistogramSet {
            per_attr: (0..ds.d())
                .map(|a| Histogram::empty(a, ds.value_table(a).len()))
                .collect(),
            n: 0,
        })
    }

    /// Single sequential pass over every record.
    pub fn build(ds: &Dataset) -> Result<Self> {
        Self::build_range(ds, 0..ds.n())
    }

    pub fn build_range(ds: &Dataset, range: Range<usize>) -> Result<Self> {
        Self::build_records(ds, range)
    }

    /// Counts the given records. Missing cells count as their own value under
    /// the special policy; absent cells are skipped.
    pub fn build_records(ds: &Dataset, records: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut hs = Self::empty(ds)?;
        let columns: Vec<&[ValueId]> = (0..ds.d()).map(|a| ds.codes(a)).collect::<Result<_>>()?;
        for r in records {
            for (h, col) in hs.per_attr.iter_mut().zip(&columns) {
                let id = col[r];
                if id != ABSENT {
                    h.counts[id as usize] += 1;
                    h.total += 1;
                }
            }
            hs.n += 1;
        }
        Ok(hs)
    }

    /// Builds fixed-size record partitions concurrently and merges them.
    pub fn build_parallel(ds: &Dataset) -> Result<Self> {
        let n = ds.n();
        let chunks: Vec<Range<usize>> = (0..n)
            .step_by(PARTITION_ROWS)
            .map(|s| s..(s + PARTITION_ROWS).min(n))
            .collect();
        let zero = Self::empty(ds)?;
        chunks
            .into_par_iter()
            .map(|range| Self::build_range(ds, range))
            .try_reduce(|| zero.clone(), |a, b| a.merge(&b))
    }

    /// Pointwise sum of counts; the sets must describe the same schema.
    pub fn merge(&self, other: &HistogramSet) -> Result<HistogramSet> {
        if self.per_attr.len() != other.per_attr.len()
            || self
                .per_attr
                .iter()
                .zip(&other.per_attr)
                .any(|(a, b)| a.counts.len() != b.counts.len())
        {
            return Err(Error::data("cannot merge histograms of different schemas"));
        }
        let per_attr = self
            .per_attr
            .iter()
            .zip(&other.per_attr)
            .map(|(a, b)| Histogram {
                attr: a.attr,
                counts: a.counts.iter().zip(&b.counts).map(|(x, y)| x + y).collect(),
                total: a.total + b.total,
            })
            .collect();
        Ok(HistogramSet {
            per_attr,
            n: self.n + other.n,
        })
    }

    pub fn get(&self, attr: usize) -> Option<&Histogram> {
        self.per_attr.get(attr)
    }

    pub fn histograms(&self) -> &[Histogram] {
        &self.per_attr
    }

    /// Records folded into this set.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Frequency of `value` in attribute `attr`; zero when unobserved.
    pub fn frequency(&self, attr: usize, value: ValueId) -> u64 {
        self.per_attr[attr].frequency(value)
    }

    /// Observed entries across all attributes.
    pub fn entry_count(&self) -> usize {
        self.per_attr.iter().map(Histogram::entries).sum()
    }

    /// Whether every attribute's counts sum to its total.
    pub fn is_conserved(&self) -> bool {
        self.per_attr.iter().all(Histogram::is_conserved)
    }

    /// Writes `attribute<TAB>value<TAB>frequency` lines.
    pub fn write_tsv<W: Write>(&self, ds: &Dataset, mut out: W) -> Result<()> {
        writeln!(out, "attribute\tvalue\tfrequency")?;
        for h in &self.per_attr {
            let name = ds.attribute_name(h.attr);
            for (v, f) in h.iter() {
                writeln!(out, "{name}\t{}\t{f}", ds.token(h.attr, v).unwrap_or(""))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{LoadOptions, MissingPolicy};
    use proptest::prelude::*;

    fn column(tokens: &[&str], policy: MissingPolicy) -> Dataset {
        let rows: Vec<[&str; 1]> = tokens.iter().map(|t| [*t]).collect();
        Dataset::from_rows(&["a"], &rows, &LoadOptions::default().with_policy(policy)).unwrap()
    }

    fn brute_count(tokens: &[&str], t: &str) -> u64 {
        tokens.iter().filter(|&&x| x == t).count() as u64
    }

    #[test]
    fn toy_column_counts() {
        let tokens = ["a", "a", "a", "b", "c"];
        let ds = column(&tokens, MissingPolicy::Special);
        let hs = HistogramSet::build(&ds).unwrap();
        for t in ["a", "b", "c"] {
            let id = ds.value_table(0).iter().position(|v| v == t).unwrap() as ValueId;
            assert_eq!(hs.frequency(0, id), brute_count(&tokens, t));
        }
        assert_eq!(hs.get(0).unwrap().total(), 5);
        assert_eq!(hs.frequency(0, 0), 3);
        assert_eq!(hs.frequency(0, 99), 0);
    }

    #[test]
    fn constant_column() {
        let ds = column(&["q"; 7], MissingPolicy::Special);
        let hs = HistogramSet::build(&ds).unwrap();
        assert_eq!(hs.get(0).unwrap().iter().collect::<Vec<_>>(), [(0, 7)]);
    }

    #[test]
    fn missing_policies() {
        let ignore = column(&["a", "?", "a"], MissingPolicy::Ignore);
        let hs = HistogramSet::build(&ignore).unwrap();
        assert_eq!(hs.get(0).unwrap().iter().collect::<Vec<_>>(), [(0, 2)]);
        assert_eq!(hs.get(0).unwrap().total(), 2);

        let special = column(&["a", "?", "a"], MissingPolicy::Special);
        let hs = HistogramSet::build(&special).unwrap();
        let m = special.missing_id(0).unwrap();
        assert_eq!(hs.frequency(0, 0), 2);
        assert_eq!(hs.frequency(0, m), 1);
        assert_eq!(hs.get(0).unwrap().total(), 3);
    }

    #[test]
    fn merge_pointwise_and_identity() {
        let ds = column(&["a", "a", "a", "b"], MissingPolicy::Special);
        let h1 = HistogramSet::build_range(&ds, 0..2).unwrap();
        let h2 = HistogramSet::build_range(&ds, 2..4).unwrap();
        let merged = h1.merge(&h2).unwrap();
        assert_eq!(merged.frequency(0, 0), 3);
        assert_eq!(merged.frequency(0, 1), 1);
        assert_eq!(merged, HistogramSet::build(&ds).unwrap());
        let empty = HistogramSet::empty(&ds).unwrap();
        assert_eq!(merged.merge(&empty).unwrap(), merged);
    }

    #[test]
    fn merge_schema_mismatch() {
        let a = HistogramSet::build(&column(&["a", "b"], MissingPolicy::Special)).unwrap();
        let b = HistogramSet::build(&column(&["a"], MissingPolicy::Special)).unwrap();
        assert!(a.merge(&b).is_err());
    }

    #[test]
    fn tsv_dump() {
        let ds = column(&["a", "b", "a"], MissingPolicy::Special);
        let hs = HistogramSet::build(&ds).unwrap();
        let mut out = Vec::new();
        hs.write_tsv(&ds, &mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "attribute\tvalue\tfrequency\na\ta\t2\na\tb\t1\n"
        );
    }

    #[test]
    fn parallel_build_matches_sequential() {
        let tokens: Vec<String> = (0..40_000).map(|i| format!("v{}", (i * 7) % 13)).collect();
        let refs: Vec<&str> = tokens.iter().map(String::as_str).collect();
        let ds = column(&refs, MissingPolicy::Special);
        assert_eq!(
            HistogramSet::build_parallel(&ds).unwrap(),
            HistogramSet::build(&ds).unwrap()
        );
    }

    proptest! {
        #[test]
        fn build_is_order_independent(
            rows in prop::collection::vec(prop::collection::vec(0u8..4, 3), 1..60),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let toks: Vec<Vec<String>> = rows.iter().map(|r| r.iter().map(|v| v.to_string()).collect()).collect();
            let mut shuffled = toks.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = Dataset::from_rows(&["x", "y", "z"], &toks, &LoadOptions::default()).unwrap();
            let b = Dataset::from_rows(&["x", "y", "z"], &shuffled, &LoadOptions::default()).unwrap();
            let ha = HistogramSet::build(&a).unwrap();
            let hb = HistogramSet::build(&b).unwrap();
            for attr in 0..3 {
                for (id, tok) in a.value_table(attr).iter().enumerate() {
                    let other = b.value_table(attr).iter().position(|t| t == tok).unwrap();
                    prop_assert_eq!(ha.frequency(attr, id as ValueId), hb.frequency(attr, other as ValueId));
                }
            }
        }
    }
}
