//! Brute-force references and random fixtures shared by the integration suites.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soe_core::{Combiner, Dataset, LoadOptions, MissingPolicy, Polarity};

pub const MISSING: &str = "?";

/// Raw token grid with its header.
#[derive(Clone, Debug)]
pub struct RandomTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RandomTable {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn d(&self) -> usize {
        self.header.len()
    }

    pub fn load(&self, policy: MissingPolicy) -> Dataset {
        Dataset::from_rows(
            &self.header,
            &self.rows,
            &LoadOptions::default().with_policy(policy),
        )
        .expect("random table loads")
    }
}

/// `n <= 200`, `d <= 8`, at most 5 symbols per attribute, with some missing
/// cells in about half of the tables.
pub fn random_table(seed: u64) -> RandomTable {
    random_table_sized(seed, None)
}

/// Like [`random_table`], with a fixed record count when `rows` is given.
pub fn random_table_sized(seed: u64, rows: Option<usize>) -> RandomTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drawn = rng.gen_range(1..=200);
    let n = rows.unwrap_or(drawn);
    let d = rng.gen_range(1..=8);
    let missing_rate = [0.0, 0.0, 0.05, 0.3][rng.gen_range(0..4)];
    let alphabets: Vec<usize> = (0..d).map(|_| rng.gen_range(1..=5)).collect();
    let header = (0..d).map(|a| format!("a{a}")).collect();
    let rows = (0..n)
        .map(|_| {
            alphabets
                .iter()
                .map(|&k| {
                    if rng.gen_bool(missing_rate) {
                        MISSING.to_string()
                    } else {
                        format!("s{}", rng.gen_range(0..k))
                    }
                })
                .collect()
        })
        .collect();
    RandomTable { header, rows }
}

/// Factors of one record found by recounting its tokens over the whole table.
pub fn naive_factors(
    t: &RandomTable,
    record: usize,
    policy: MissingPolicy,
    polarity: Polarity,
) -> Vec<f64> {
    let skip = |tok: &str| policy == MissingPolicy::Ignore && tok == MISSING;
    let mut out = Vec::new();
    for a in 0..t.d() {
        let tok = &t.rows[record][a];
        if skip(tok) {
            continue;
        }
        let mut count = 0u64;
        let mut total = 0u64;
        for row in &t.rows {
            if skip(&row[a]) {
                continue;
            }
            total += 1;
            if row[a] == *tok {
                count += 1;
            }
        }
        let f = count as f64 / total as f64;
        out.push(match polarity {
            Polarity::Frequency => f,
            Polarity::Rarity => 1.0 - f,
        });
    }
    out
}

/// Fuses left to right, returning a lone factor unchanged.
pub fn naive_combine(op: Combiner, vs: &[f64]) -> f64 {
    assert!(!vs.is_empty());
    if vs.len() == 1 {
        return vs[0];
    }
    match op {
        Combiner::Product => {
            let mut acc = 1.0;
            for v in vs {
                acc *= v;
            }
            acc
        }
        Combiner::Addition | Combiner::Sq(1) => {
            let mut acc = 0.0;
            for v in vs {
                acc += v;
            }
            acc
        }
        Combiner::Sq(q) => {
            let mut acc = 0.0;
            for v in vs {
                acc += v.powi(q as i32);
            }
            acc.powf(1.0 / q as f64)
        }
        Combiner::SInf => {
            let mut acc = vs[0];
            for &v in &vs[1..] {
                if v > acc {
                    acc = v;
                }
            }
            acc
        }
    }
}

/// Full ranking by sorting every scorable record: most outlying first, ties by
/// ascending index.
pub fn naive_ranking(
    t: &RandomTable,
    op: Combiner,
    policy: MissingPolicy,
    polarity: Polarity,
) -> Vec<(usize, f64)> {
    let mut scored: Vec<(usize, f64)> = (0..t.n())
        .filter_map(|r| {
            let f = naive_factors(t, r, policy, polarity);
            (!f.is_empty()).then(|| (r, naive_combine(op, &f)))
        })
        .collect();
    scored.sort_by(|a, b| {
        let ord = match polarity {
            Polarity::Frequency => a.1.total_cmp(&b.1),
            Polarity::Rarity => b.1.total_cmp(&a.1),
        };
        ord.then(a.0.cmp(&b.0))
    });
    scored
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

/// A benchmark CSV from `$SOE_DATA_DIR`, then `<workspace>/data`, then the
/// vendored test fixtures.
pub fn find_dataset(file: &str) -> Option<PathBuf> {
    let mut dirs = Vec::new();
    if let Ok(d) = std::env::var("SOE_DATA_DIR") {
        dirs.push(PathBuf::from(d));
    }
    dirs.push(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data"));
    dirs.push(data_dir());
    dirs.into_iter().map(|d| d.join(file)).find(|p| p.is_file())
}
