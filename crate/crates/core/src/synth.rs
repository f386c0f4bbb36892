//! Synthetic labelled categorical data and the scaling benchmark.
//!
//! Each record draws a class uniformly; each attribute then takes the
//! class's mode for that attribute with probability `class_skew` and a
//! uniform value otherwise. Generation is sequential over one seeded
//! ChaCha stream, so a spec always yields the same dataset.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{Dataset, ValueId};
use crate::error::{Error, Result};
use crate::soe1::{self, Soe1Config};

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub rows: usize,
    pub attrs: usize,
    pub classes: usize,
    pub seed: u64,
    pub values_per_attr: usize,
    pub class_skew: f64,
}

pub const DEFAULT_SEED: u64 = 5;

impl SynthSpec {
    pub fn new(rows: usize, attrs: usize, classes: usize, seed: u64) -> Self {
        SynthSpec {
            rows,
            attrs,
            classes,
            seed,
            values_per_attr: 10,
            class_skew: 0.5,
        }
    }

    /// `DS1`..`DS4`: 100,000 rows with 10/20/30/40 attributes and classes.
    pub fn preset(name: &str) -> Option<Self> {
        let width = match name.to_ascii_uppercase().as_str() {
            "DS1" => 10,
            "DS2" => 20,
            "DS3" => 30,
            "DS4" => 40,
            _ => return None,
        };
        Some(SynthSpec::new(100_000, width, width, DEFAULT_SEED))
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.attrs == 0 || self.classes == 0 {
            return Err(Error::usage("rows, attrs and classes must be positive"));
        }
        if self.rows < self.classes {
            return Err(Error::usage("rows must be at least the number of classes"));
        }
        if self.values_per_attr < 2 {
            return Err(Error::usage("values per attribute must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.class_skew) {
            return Err(Error::usage("class skew must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Ids handed out in first-occurrence order over a small raw alphabet.
struct FirstSeen {
    ids: Vec<Option<ValueId>>,
    values: Vec<String>,
}

impl FirstSeen {
    fn new(size: usize) -> Self {
        FirstSeen {
            ids: vec![None; size],
            values: Vec::new(),
        }
    }

    fn id(&mut self, raw: usize, label: impl FnOnce() -> String) -> ValueId {
        *self.ids[raw].get_or_insert_with(|| {
            self.values.push(label());
            (self.values.len() - 1) as ValueId
        })
    }
}

pub fn generate(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let modes: Vec<Vec<usize>> = (0..spec.classes)
        .map(|_| {
            (0..spec.attrs)
                .map(|_| rng.gen_range(0..spec.values_per_attr))
                .collect()
        })
        .collect();

    let mut tables: Vec<FirstSeen> = (0..spec.attrs)
        .map(|_| FirstSeen::new(spec.values_per_attr))
        .collect();
    let mut columns: Vec<Vec<ValueId>> = (0..spec.attrs)
        .map(|_| Vec::with_capacity(spec.rows))
        .collect();
    let mut class_table = FirstSeen::new(spec.classes);
    let mut labels = Vec::with_capacity(spec.rows);

    for _ in 0..spec.rows {
        let class = rng.gen_range(0..spec.classes);
        labels.push(class_table.id(class, || format!("c{class}")));
        for (a, (col, table)) in columns.iter_mut().zip(&mut tables).enumerate() {
            let raw = if rng.gen::<f64>() < spec.class_skew {
                modes[class][a]
            } else {
                rng.gen_range(0..spec.values_per_attr)
            };
            col.push(table.id(raw, || format!("v{raw}")));
        }
    }

    let names = (1..=spec.attrs).map(|i| format!("a{i}")).collect();
    let columns = columns
        .into_iter()
        .zip(tables)
        .map(|(ids, t)| (ids, t.values))
        .collect();
    Ok(Dataset::from_codes(
        names,
        columns,
        Some(("class".to_string(), labels, class_table.values)),
        spec.rows,
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchResult {
    pub name: String,
    pub threads: usize,
    /// Swept parameter: record counts for a row sweep, attribute counts for
    /// an attribute sweep.
    pub sizes: Vec<usize>,
    pub fractions: Vec<f64>,
    /// Median wall-clock seconds per size.
    pub wall_times: Vec<f64>,
    /// Least-squares slope of log time against log size.
    pub slope: Option<f64>,
}

impl BenchResult {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("dataset\tthreads\tfraction\tsize\tseconds\n");
        for ((f, s), t) in self.fractions.iter().zip(&self.sizes).zip(&self.wall_times) {
            writeln!(out, "{}\t{}\t{f}\t{s}\t{t:.6}", self.name, self.threads).unwrap();
        }
        match self.slope {
            Some(s) => writeln!(out, "# loglog_slope\t{s:.4}").unwrap(),
            None => writeln!(out, "# loglog_slope\tNA").unwrap(),
        }
        out
    }

    /// Whitespace-separated `size seconds` pairs for plotting tools.
    pub fn to_plot_data(&self) -> String {
        let mut out = format!("# {} size seconds\n", self.name);
        for (s, t) in self.sizes.iter().zip(&self.wall_times) {
            writeln!(out, "{s} {t:.6}").unwrap();
        }
        out
    }
}

/// Least-squares slope of `ln y` on `ln x`; `None` for fewer than two
/// distinct points.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

fn median_seconds(ds: &Dataset, cfg: &Soe1Config, repeats: usize) -> Result<f64> {
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let top = soe1::detect(ds, cfg)?;
        let elapsed = start.elapsed().as_secs_f64();
        std::hint::black_box(top);
        times.push(elapsed.max(1e-9));
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

/// Times detection on row prefixes of the generated dataset.
pub fn scaling_run(
    spec: &SynthSpec,
    fractions: &[f64],
    cfg: &Soe1Config,
    repeats: usize,
) -> Result<BenchResult> {
    if fractions.is_empty() {
        return Err(Error::usage("no fractions given"));
    }
    if fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(Error::usage("fractions must lie in (0, 1]"));
    }
    if fractions.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::usage("fractions must be strictly increasing"));
    }
    let full = generate(spec)?;
    let mut sizes = Vec::with_capacity(fractions.len());
    let mut wall_times = Vec::with_capacity(fractions.len());
    for &f in fractions {
        let rows = ((f * spec.rows as f64).round() as usize).max(1);
        let ds = full.prefix(rows);
        sizes.push(rows);
        wall_times.push(median_seconds(&ds, cfg, repeats)?);
    }
    let xs: Vec<f64> = sizes.iter().map(|&s| s as f64).collect();
    Ok(BenchResult {
        name: format!("{}x{}", spec.rows, spec.attrs),
        threads: rayon::current_num_threads(),
        slope: loglog_slope(&xs, &wall_times),
        sizes,
        fractions: fractions.to_vec(),
        wall_times,
    })
}

/// Times detection at a fixed row count while varying the attribute count.
pub fn attribute_scaling_run(
    spec: &SynthSpec,
    attr_counts: &[usize],
    cfg: &Soe1Config,
    repeats: usize,
) -> Result<BenchResult> {
    let mut wall_times = Vec::with_capacity(attr_counts.len());
    for &attrs in attr_counts {
        let ds = generate(&SynthSpec {
            attrs,
            ..spec.clone()
        })?;
        wall_times.push(median_seconds(&ds, cfg, repeats)?);
    }
    let xs: Vec<f64> = attr_counts.iter().map(|&a| a as f64).collect();
    let max = *attr_counts.iter().max().unwrap_or(&1) as f64;
    Ok(BenchResult {
        name: format!("{}xd", spec.rows),
        threads: rayon::current_num_threads(),
        slope: loglog_slope(&xs, &wall_times),
        sizes: attr_counts.to_vec(),
        fractions: xs.iter().map(|x| x / max).collect(),
        wall_times,
    })
}
