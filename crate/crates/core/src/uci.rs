//! Canonical CSV layouts for the UCI benchmark datasets.
//!
//! The converters take the raw `.data` files as distributed by the UCI
//! repository and produce headed CSVs with the class in a final `class`
//! column. Downloading is left to the caller.

use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const UCI_BASE: &str = "https://archive.ics.uci.edu/ml/machine-learning-databases";

/// A dataset the evaluation reproduces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Benchmark {
    Lymphography,
    Wisconsin,
    Arrhythmia,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [
        Benchmark::Lymphography,
        Benchmark::Wisconsin,
        Benchmark::Arrhythmia,
    ];

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "lymphography" => Some(Benchmark::Lymphography),
            "wisconsin" => Some(Benchmark::Wisconsin),
            "arrhythmia" => Some(Benchmark::Arrhythmia),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Benchmark::Lymphography => "lymphography",
            Benchmark::Wisconsin => "wisconsin",
            Benchmark::Arrhythmia => "arrhythmia",
        }
    }

    /// Path of the raw file below [`UCI_BASE`].
    pub fn remote_path(self) -> &'static str {
        match self {
            Benchmark::Lymphography => "lymphography/lymphography.data",
            Benchmark::Wisconsin => "breast-cancer-wisconsin/breast-cancer-wisconsin.data",
            Benchmark::Arrhythmia => "arrhythmia/arrhythmia.data",
        }
    }

    /// File name of the converted CSV.
    pub fn file_name(self) -> &'static str {
        match self {
            Benchmark::Lymphography => "lymphography.csv",
            Benchmark::Wisconsin => "wisconsin_reduced.csv",
            Benchmark::Arrhythmia => "arrhythmia.csv",
        }
    }

    pub fn convert(self, raw: &str) -> Result<String> {
        match self {
            Benchmark::Lymphography => lymphography_from_uci(raw),
            Benchmark::Wisconsin => wisconsin_reduced_from_uci(raw),
            Benchmark::Arrhythmia => arrhythmia_from_uci(raw),
        }
    }
}

pub const LYMPHOGRAPHY_ATTRIBUTES: [&str; 18] = [
    "lymphatics",
    "block_of_affere",
    "bl_of_lymph_c",
    "bl_of_lymph_s",
    "by_pass",
    "extravasates",
    "regeneration_of",
    "early_uptake_in",
    "lym_nodes_dimin",
    "lym_nodes_enlar",
    "changes_in_lym",
    "defect_in_node",
    "changes_in_node",
    "changes_in_stru",
    "special_forms",
    "dislocation_of",
    "exclusion_of_no",
    "no_of_nodes_in",
];

pub const WISCONSIN_ATTRIBUTES: [&str; 9] = [
    "clump_thickness",
    "cell_size_uniformity",
    "cell_shape_uniformity",
    "marginal_adhesion",
    "epithelial_cell_size",
    "bare_nuclei",
    "bland_chromatin",
    "normal_nucleoli",
    "mitoses",
];

/// Malignant records kept in the reduced Wisconsin set.
pub const WISCONSIN_MALIGNANT_KEPT: usize = 39;

pub const ARRHYTHMIA_ATTRIBUTES: usize = 279;

fn records(raw: &str, width: usize) -> Result<Vec<Vec<&str>>> {
    raw.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let fields: Vec<&str> = l.split(',').map(str::trim).collect();
            if fields.len() != width {
                return Err(Error::Parse {
                    row: i + 1,
                    msg: format!("expected {width} fields, found {}", fields.len()),
                });
            }
            Ok(fields)
        })
        .collect()
}

fn push_line(out: &mut String, fields: &[&str]) {
    writeln!(out, "{}", fields.join(",")).unwrap();
}

/// Class code first, then 18 attribute codes; the class moves to the end.
pub fn lymphography_from_uci(raw: &str) -> Result<String> {
    let mut out = String::new();
    let mut header: Vec<&str> = LYMPHOGRAPHY_ATTRIBUTES.to_vec();
    header.push("class");
    push_line(&mut out, &header);
    for rec in records(raw, 19)? {
        let mut row = rec[1..].to_vec();
        row.push(rec[0]);
        push_line(&mut out, &row);
    }
    Ok(out)
}

/// Drops the sample id, removes records with missing values, relabels
/// 2/4 as benign/malignant, and keeps only the first 39 malignant records in
/// file order.
pub fn wisconsin_reduced_from_uci(raw: &str) -> Result<String> {
    let mut out = String::new();
    let mut header: Vec<&str> = WISCONSIN_ATTRIBUTES.to_vec();
    header.push("class");
    push_line(&mut out, &header);
    let mut malignant = 0;
    for (i, rec) in records(raw, 11)?.into_iter().enumerate() {
        if rec.contains(&"?") {
            continue;
        }
        let label = match rec[10] {
            "2" => "benign",
            "4" => {
                malignant += 1;
                if malignant > WISCONSIN_MALIGNANT_KEPT {
                    continue;
                }
                "malignant"
            }
            other => {
                return Err(Error::Parse {
                    row: i + 1,
                    msg: format!("unknown class code `{other}`"),
                })
            }
        };
        let mut row = rec[1..10].to_vec();
        row.push(label);
        push_line(&mut out, &row);
    }
    Ok(out)
}

/// 279 measurements followed by the class code; names the columns and keeps
/// `?` for missing cells.
pub fn arrhythmia_from_uci(raw: &str) -> Result<String> {
    let names: Vec<String> = (1..=ARRHYTHMIA_ATTRIBUTES)
        .map(|i| format!("attr_{i:03}"))
        .collect();
    let mut header: Vec<&str> = names.iter().map(String::as_str).collect();
    header.push("class");
    let mut out = String::new();
    push_line(&mut out, &header);
    for rec in records(raw, ARRHYTHMIA_ATTRIBUTES + 1)? {
        push_line(&mut out, &rec);
    }
    Ok(out)
}

/// Class labels of the arrhythmia classes held by less than 5% of records.
pub const ARRHYTHMIA_RARE_CLASSES: [&str; 8] = ["3", "4", "5", "7", "8", "9", "14", "15"];
