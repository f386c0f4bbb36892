//! Rare-class coverage evaluation.
//!
//! Records of small classes stand in for ground-truth outliers. A full ranking
//! is cut at several top ratios and each cut is scored by how many rare
//! records it contains.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ranking::{round_half_up, ScoredRecord};

#[derive(Clone, Debug, PartialEq)]
pub enum RareClassSpec {
    /// These class labels are rare.
    Labels(Vec<String>),
    /// Classes holding less than this fraction of the records are rare.
    Below(f64),
}

impl FromStr for RareClassSpec {
    type Err = Error;

    /// `lt:<fraction>` or a comma-separated label list.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(t) = s.strip_prefix("lt:") {
            let t: f64 = t
                .parse()
                .map_err(|_| Error::usage(format!("invalid rare threshold `{t}`")))?;
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::usage(format!("rare threshold {t} outside (0, 1)")));
            }
            return Ok(RareClassSpec::Below(t));
        }
        let labels: Vec<String> = s
            .split(',')
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect();
        if labels.is_empty() {
            return Err(Error::usage("no rare class labels given"));
        }
        Ok(RareClassSpec::Labels(labels))
    }
}

/// Class labels that count as rare under `spec`, in first-occurrence order.
pub fn rare_labels(ds: &Dataset, spec: &RareClassSpec) -> Result<Vec<String>> {
    let class = ds
        .class()
        .ok_or_else(|| Error::usage("rare-class labelling needs a class column"))?;
    let counts = class.counts();
    Ok(match spec {
        RareClassSpec::Labels(labels) => {
            for l in labels {
                if !counts.iter().any(|(c, _)| c == l) {
                    log::warn!("rare class label `{l}` does not occur in the data");
                }
            }
            counts
                .iter()
                .filter(|(c, _)| labels.iter().any(|l| l == c))
                .map(|(c, _)| c.to_string())
                .collect()
        }
        RareClassSpec::Below(t) => {
            if !(*t > 0.0 && *t < 1.0) {
                return Err(Error::usage(format!("rare threshold {t} outside (0, 1)")));
            }
            let n = ds.n() as f64;
            counts
                .iter()
                .filter(|(_, c)| (*c as f64) / n < *t)
                .map(|(c, _)| c.to_string())
                .collect()
        }
    })
}

/// Records whose class is rare under `spec`.
pub fn label_rare(ds: &Dataset, spec: &RareClassSpec) -> Result<BTreeSet<usize>> {
    let labels = rare_labels(ds, spec)?;
    let class = ds.class().expect("checked by rare_labels");
    Ok((0..ds.n())
        .filter(|&r| labels.iter().any(|l| l == class.label(r)))
        .collect())
}

/// Turns a top ratio into a record count: `k = round_half_up(ratio * base)`,
/// where `base` defaults to the number of records.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct KRule {
    pub base: Option<usize>,
}

impl KRule {
    pub fn with_base(base: usize) -> Self {
        KRule { base: Some(base) }
    }

    pub fn resolve(&self, ratio: f64, n: usize) -> Result<usize> {
        if !(ratio > 0.0 && ratio <= 1.0) {
            return Err(Error::usage(format!("top ratio {ratio} outside (0, 1]")));
        }
        let base = self.base.unwrap_or(n);
        Ok(round_half_up(ratio * base as f64).clamp(1, n))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverageRow {
    pub top_ratio: f64,
    pub k: usize,
    /// Rare records among the first `k` of the ranking.
    pub detected: usize,
    pub total_rare: usize,
    pub coverage: f64,
}

/// Coverage at explicit cut-offs; `n` is the dataset size used to report ratios.
pub fn coverage_at(
    ranking: &[ScoredRecord],
    rare: &BTreeSet<usize>,
    ks: &[usize],
    n: usize,
) -> Vec<CoverageRow> {
    ks.iter()
        .map(|&k| {
            let detected = ranking
                .iter()
                .take(k)
                .filter(|s| rare.contains(&s.record))
                .count();
            CoverageRow {
                top_ratio: k as f64 / n as f64,
                k,
                detected,
                total_rare: rare.len(),
                coverage: if rare.is_empty() {
                    0.0
                } else {
                    detected as f64 / rare.len() as f64
                },
            }
        })
        .collect()
}

/// Coverage at each top ratio of a full ranking over `n` records.
pub fn coverage_table(
    ranking: &[ScoredRecord],
    rare: &BTreeSet<usize>,
    ratios: &[f64],
    n: usize,
    rule: KRule,
) -> Result<Vec<CoverageRow>> {
    let ks = ratios
        .iter()
        .map(|&r| rule.resolve(r, n))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = coverage_at(ranking, rare, &ks, n);
    for (row, &r) in rows.iter_mut().zip(ratios) {
        row.top_ratio = r;
    }
    Ok(rows)
}

fn check_grids(tables: &[(String, Vec<CoverageRow>)]) -> Result<()> {
    let Some((_, first)) = tables.first() else {
        return Err(Error::usage("no tables to compare"));
    };
    for (name, t) in tables {
        if t.len() != first.len() || t.iter().zip(first).any(|(a, b)| a.k != b.k) {
            return Err(Error::usage(format!(
                "table `{name}` uses a different ratio grid"
            )));
        }
    }
    Ok(())
}

fn ratio_label(row: &CoverageRow) -> String {
    format!("{}%({})", fmt_percent(row.top_ratio * 100.0), row.k)
}

fn fmt_percent(p: f64) -> String {
    let rounded = (p * 100.0).round() / 100.0;
    if rounded.fract() == 0.0 {
        format!("{rounded:.0}")
    } else {
        format!("{rounded}")
    }
}

/// Side-by-side text table, one column per named configuration, in the
/// order given.
pub fn compare_report(tables: &[(String, Vec<CoverageRow>)]) -> Result<String> {
    check_grids(tables)?;
    let mut header = vec!["top ratio (records)".to_string()];
    header.extend(tables.iter().map(|(n, _)| n.clone()));
    let mut lines = vec![header];
    for i in 0..tables[0].1.len() {
        let mut line = vec![ratio_label(&tables[0].1[i])];
        for (_, t) in tables {
            let row = &t[i];
            line.push(format!(
                "{} ({}%)",
                row.detected,
                fmt_percent(row.coverage * 100.0)
            ));
        }
        lines.push(line);
    }
    let widths: Vec<usize> = (0..lines[0].len())
        .map(|c| lines.iter().map(|l| l[c].len()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for line in &lines {
        let cells: Vec<String> = line
            .iter()
            .zip(&widths)
            .map(|(cell, w)| format!("{cell:<w$}"))
            .collect();
        writeln!(out, "{}", cells.join("  ").trim_end()).unwrap();
    }
    Ok(out)
}

/// Long-form TSV: `config  top_ratio  k  detected  total_rare  coverage`.
pub fn compare_tsv(tables: &[(String, Vec<CoverageRow>)]) -> Result<String> {
    check_grids(tables)?;
    let mut out = String::from("config\ttop_ratio\tk\tdetected\ttotal_rare\tcoverage\n");
    for (name, rows) in tables {
        for r in rows {
            writeln!(
                out,
                "{name}\t{}\t{}\t{}\t{}\t{}",
                r.top_ratio, r.k, r.detected, r.total_rare, r.coverage
            )
            .unwrap();
        }
    }
    Ok(out)
}
