//! Columnar categorical datasets.
//!
//! A [`Dataset`] holds `n` records over `d` detection attributes. Categorical
//! cells are interned per attribute into dense [`ValueId`]s assigned in
//! first-occurrence order; numeric cells keep their raw reals until
//! [`Dataset::discretize_equal_width`] replaces them with bin ids. An optional
//! class column is carried alongside for evaluation and never takes part in
//! detection.

use std::collections::HashMap;
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Interned value of one attribute; an index into that attribute's value table.
pub type ValueId = u32;

/// Cell marker for a missing value under [`MissingPolicy::Ignore`].
pub const ABSENT: ValueId = ValueId::MAX;

/// How missing cells take part in histograms and scoring.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum MissingPolicy {
    /// The missing token is an ordinary categorical value.
    #[default]
    Special,
    /// Missing cells are left out of histograms and of the factor vector.
    Ignore,
}

impl FromStr for MissingPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "special" => Ok(MissingPolicy::Special),
            "ignore" => Ok(MissingPolicy::Ignore),
            other => Err(Error::usage(format!(
                "unknown missing policy `{other}` (expected `special` or `ignore`)"
            ))),
        }
    }
}

impl fmt::Display for MissingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MissingPolicy::Special => "special",
            MissingPolicy::Ignore => "ignore",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ColumnKind {
    Categorical,
    Numeric,
}

/// Per-column kind overrides applied while loading.
#[derive(Clone, Debug, PartialEq)]
pub enum SchemaHints {
    /// One kind per input column, class column included (its entry is ignored).
    Positional(Vec<ColumnKind>),
    /// Kinds by column name; unnamed columns get `default`.
    Named {
        default: ColumnKind,
        overrides: Vec<(String, ColumnKind)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadOptions {
    /// Without hints every column is categorical.
    pub schema_hints: Option<SchemaHints>,
    pub missing_token: String,
    pub policy: MissingPolicy,
    /// Name of the class column, excluded from detection.
    pub class_column: Option<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            schema_hints: None,
            missing_token: "?".to_string(),
            policy: MissingPolicy::Special,
            class_column: None,
        }
    }
}

impl LoadOptions {
    pub fn with_class_column(mut self, name: impl Into<String>) -> Self {
        self.class_column = Some(name.into());
        self
    }

    pub fn with_policy(mut self, policy: MissingPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_hints(mut self, hints: SchemaHints) -> Self {
        self.schema_hints = Some(hints);
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum AttributeKind {
    Categorical,
    /// Raw reals; `range` is the observed `(min, max)` over non-missing cells.
    Numeric { range: Option<(f64, f64)> },
    /// Equal-width bins over the observed range.
    Binned {
        bin_count: usize,
        range: Option<(f64, f64)>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttributeSpec {
    pub name: String,
    pub kind: AttributeKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Schema {
    attributes: Vec<AttributeSpec>,
    class_column: Option<usize>,
}

impl Schema {
    pub fn attributes(&self) -> &[AttributeSpec] {
        &self.attributes
    }

    /// Position of the class column in the source file.
    pub fn class_column(&self) -> Option<usize> {
        self.class_column
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.attributes.iter().map(|a| a.name.as_str())
    }
}

#[derive(Clone, Debug)]
enum Column {
    Codes {
        ids: Vec<ValueId>,
        values: Vec<String>,
        missing: Option<ValueId>,
    },
    /// NaN marks a missing cell.
    Reals(Vec<f64>),
}

/// Class labels, interned like a categorical attribute.
#[derive(Clone, Debug)]
pub struct ClassColumn {
    name: String,
    labels: Vec<ValueId>,
    values: Vec<String>,
}

impl ClassColumn {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn labels(&self) -> &[ValueId] {
        &self.labels
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn label(&self, record: usize) -> &str {
        &self.values[self.labels[record] as usize]
    }

    /// `(label, record count)` in first-occurrence order.
    pub fn counts(&self) -> Vec<(&str, usize)> {
        let mut counts = vec![0usize; self.values.len()];
        for &l in &self.labels {
            counts[l as usize] += 1;
        }
        self.values.iter().map(String::as_str).zip(counts).collect()
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    schema: Schema,
    n: usize,
    columns: Vec<Column>,
    class: Option<ClassColumn>,
    policy: MissingPolicy,
    missing_token: String,
}

#[derive(Default)]
struct Interner {
    ids: HashMap<String, ValueId>,
    values: Vec<String>,
}

impl Interner {
    fn intern(&mut self, token: &str) -> ValueId {
        if let Some(&id) = self.ids.get(token) {
            return id;
        }
        let id = self.values.len() as ValueId;
        self.ids.insert(token.to_string(), id);
        self.values.push(token.to_string());
        id
    }
}

enum ColumnBuilder {
    Codes {
        interner: Interner,
        ids: Vec<ValueId>,
        missing: Option<ValueId>,
    },
    Reals(Vec<f64>),
}

struct Loader<'a> {
    opts: &'a LoadOptions,
    names: Vec<String>,
    width: usize,
    class_pos: Option<usize>,
    columns: Vec<ColumnBuilder>,
    class: Option<(Interner, Vec<ValueId>)>,
    rows: usize,
}

impl<'a> Loader<'a> {
    fn new(header: &[String], opts: &'a LoadOptions) -> Result<Self> {
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(Error::data("empty input: no header row"));
        }
        let width = header.len();
        let mut seen = HashMap::new();
        for (i, name) in header.iter().enumerate() {
            if let Some(prev) = seen.insert(name.as_str(), i) {
                return Err(Error::data(format!(
                    "duplicate column name `{name}` (columns {} and {})",
                    prev + 1,
                    i + 1
                )));
            }
        }
        let class_pos = match &opts.class_column {
            Some(c) => Some(
                header
                    .iter()
                    .position(|h| h == c)
                    .ok_or_else(|| Error::usage(format!("class column `{c}` not in header")))?,
            ),
            None => None,
        };
        let kinds: Vec<ColumnKind> = match &opts.schema_hints {
            None => vec![ColumnKind::Categorical; width],
            Some(SchemaHints::Positional(kinds)) => {
                if kinds.len() != width {
                    return Err(Error::usage(format!(
                        "schema hints name {} columns but the input has {width}",
                        kinds.len()
                    )));
                }
                kinds.clone()
            }
            Some(SchemaHints::Named { default, overrides }) => {
                let mut kinds = vec![*default; width];
                for (name, kind) in overrides {
                    let pos = header.iter().position(|h| h == name).ok_or_else(|| {
                        Error::usage(format!("schema hint names unknown column `{name}`"))
                    })?;
                    kinds[pos] = *kind;
                }
                kinds
            }
        };
        let mut names = Vec::with_capacity(width);
        let mut columns = Vec::with_capacity(width);
        for (i, (name, kind)) in header.iter().zip(&kinds).enumerate() {
            if Some(i) == class_pos {
                continue;
            }
            names.push(name.clone());
            columns.push(match kind {
                ColumnKind::Categorical => ColumnBuilder::Codes {
                    interner: Interner::default(),
                    ids: Vec::new(),
                    missing: None,
                },
                ColumnKind::Numeric => ColumnBuilder::Reals(Vec::new()),
            });
        }
        Ok(Loader {
            opts,
            names,
            width,
            class_pos,
            columns,
            class: class_pos.map(|_| (Interner::default(), Vec::new())),
            rows: 0,
        })
    }

    /// `row` is the 1-based line number used in error messages.
    fn push(&mut self, row: usize, fields: &[&str]) -> Result<()> {
        if fields.len() != self.width {
            return Err(Error::Parse {
                row,
                msg: format!("expected {} fields, found {}", self.width, fields.len()),
            });
        }
        let missing_token = self.opts.missing_token.as_str();
        let mut col = 0;
        for (i, &token) in fields.iter().enumerate() {
            if Some(i) == self.class_pos {
                if let Some((interner, labels)) = &mut self.class {
                    labels.push(interner.intern(token));
                }
                continue;
            }
            match &mut self.columns[col] {
                ColumnBuilder::Codes {
                    interner,
                    ids,
                    missing,
                } => {
                    if token == missing_token {
                        match self.opts.policy {
                            MissingPolicy::Ignore => ids.push(ABSENT),
                            MissingPolicy::Special => {
                                let id = interner.intern(token);
                                *missing = Some(id);
                                ids.push(id);
                            }
                        }
                    } else {
                        ids.push(interner.intern(token));
                    }
                }
                ColumnBuilder::Reals(values) => {
                    if token == missing_token {
                        values.push(f64::NAN);
                    } else {
                        let v: f64 = token.parse().map_err(|_| Error::Parse {
                            row,
                            msg: format!(
                                "column `{}`: `{token}` is not a number",
                                self.names[col]
                            ),
                        })?;
                        if !v.is_finite() {
                            return Err(Error::Parse {
                                row,
                                msg: format!("column `{}`: non-finite value", self.names[col]),
                            });
                        }
                        values.push(v);
                    }
                }
            }
            col += 1;
        }
        self.rows += 1;
        Ok(())
    }

    fn finish(self) -> Result<Dataset> {
        if self.rows == 0 {
            return Err(Error::data("input has a header but no data rows"));
        }
        let mut attributes = Vec::with_capacity(self.columns.len());
        let mut columns = Vec::with_capacity(self.columns.len());
        for (name, builder) in self.names.into_iter().zip(self.columns) {
            match builder {
                ColumnBuilder::Codes {
                    interner,
                    ids,
                    missing,
                } => {
                    attributes.push(AttributeSpec {
                        name,
                        kind: AttributeKind::Categorical,
                    });
                    columns.push(Column::Codes {
                        ids,
                        values: interner.values,
                        missing,
                    });
                }
                ColumnBuilder::Reals(values) => {
                    attributes.push(AttributeSpec {
                        name,
                        kind: AttributeKind::Numeric {
                            range: observed_range(&values),
                        },
                    });
                    columns.push(Column::Reals(values));
                }
            }
        }
        let class = match (self.class, &self.opts.class_column) {
            (Some((interner, labels)), Some(name)) => Some(ClassColumn {
                name: name.clone(),
                labels,
                values: interner.values,
            }),
            _ => None,
        };
        Ok(Dataset {
            schema: Schema {
                attributes,
                class_column: self.class_pos,
            },
            n: self.rows,
            columns,
            class,
            policy: self.opts.policy,
            missing_token: self.opts.missing_token.clone(),
        })
    }
}

fn observed_range(values: &[f64]) -> Option<(f64, f64)> {
    values
        .iter()
        .filter(|v| !v.is_nan())
        .fold(None, |acc, &v| match acc {
            None => Some((v, v)),
            Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
        })
}

/// Equal-width bin of `v` over `[min, max]`; `v == max` lands in the top bin
/// and a degenerate range maps everything to bin 0.
pub fn equal_width_bin(v: f64, min: f64, max: f64, bin_count: usize) -> usize {
    debug_assert!(bin_count >= 1);
    if max <= min {
        return 0;
    }
    let raw = ((v - min) * bin_count as f64 / (max - min)).floor();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(bin_count - 1)
    }
}

/// Loads a headed, comma-delimited UTF-8 file.
pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    Dataset::load_csv(path, opts)
}

impl Dataset {
    pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::read_csv(std::io::BufReader::new(file), opts)
    }

    pub fn read_csv<R: Read>(reader: R, opts: &LoadOptions) -> Result<Dataset> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut records = rdr.records();
        let header = match records.next() {
            None => return Err(Error::data("empty input: no header row")),
            Some(h) => h?,
        };
        let header: Vec<String> = header.iter().map(str::to_string).collect();
        let mut loader = Loader::new(&header, opts)?;
        for (i, record) in records.enumerate() {
            let record = record?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(i + 2);
            // Blank lines are skipped by the csv reader; a lone empty field is too.
            if record.len() == 1 && record[0].is_empty() {
                continue;
            }
            let fields: Vec<&str> = record.iter().collect();
            loader.push(line, &fields)?;
        }
        loader.finish()
    }

    /// Builds a dataset from in-memory tokens; `header` names every column.
    pub fn from_rows<H, R, S>(header: &[H], rows: &[R], opts: &LoadOptions) -> Result<Dataset>
    where
        H: AsRef<str>,
        R: AsRef<[S]>,
        S: AsRef<str>,
    {
        let header: Vec<String> = header.iter().map(|h| h.as_ref().to_string()).collect();
        let mut loader = Loader::new(&header, opts)?;
        let mut fields: Vec<&str> = Vec::with_capacity(header.len());
        for (i, row) in rows.iter().enumerate() {
            fields.clear();
            fields.extend(row.as_ref().iter().map(|s| s.as_ref()));
            loader.push(i + 2, &fields)?;
        }
        loader.finish()
    }

    /// Assembles a categorical dataset from pre-interned columns. Ids must
    /// index into their value tables.
    pub(crate) fn from_codes(
        names: Vec<String>,
        columns: Vec<(Vec<ValueId>, Vec<String>)>,
        class: Option<(String, Vec<ValueId>, Vec<String>)>,
        n: usize,
    ) -> Dataset {
        let attributes = names
            .into_iter()
            .map(|name| AttributeSpec {
                name,
                kind: AttributeKind::Categorical,
            })
            .collect::<Vec<_>>();
        let class_pos = class.as_ref().map(|_| attributes.len());
        Dataset {
            schema: Schema {
                attributes,
                class_column: class_pos,
            },
            n,
            columns: columns
                .into_iter()
                .map(|(ids, values)| {
                    debug_assert_eq!(ids.len(), n);
                    Column::Codes {
                        ids,
                        values,
                        missing: None,
                    }
                })
                .collect(),
            class: class.map(|(name, labels, values)| ClassColumn {
                name,
                labels,
                values,
            }),
            policy: MissingPolicy::Special,
            missing_token: "?".to_string(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of detection attributes.
    pub fn d(&self) -> usize {
        self.columns.len()
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn policy(&self) -> MissingPolicy {
        self.policy
    }

    pub fn missing_token(&self) -> &str {
        &self.missing_token
    }

    pub fn class(&self) -> Option<&ClassColumn> {
        self.class.as_ref()
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.schema.attribute_index(name)
    }

    pub fn attribute_name(&self, attr: usize) -> &str {
        &self.schema.attributes[attr].name
    }

    pub fn is_categorical(&self, attr: usize) -> bool {
        matches!(self.columns.get(attr), Some(Column::Codes { .. }))
    }

    /// Fails when any attribute still holds raw reals.
    pub fn ensure_categorical(&self) -> Result<()> {
        match (0..self.d()).find(|&a| !self.is_categorical(a)) {
            None => Ok(()),
            Some(a) => Err(Error::usage(format!(
                "attribute `{}` is numeric; discretize it first",
                self.attribute_name(a)
            ))),
        }
    }

    /// Value ids of a categorical attribute, one per record.
    pub fn codes(&self, attr: usize) -> Result<&[ValueId]> {
        match self.columns.get(attr) {
            Some(Column::Codes { ids, .. }) => Ok(ids),
            Some(Column::Reals(_)) => Err(Error::usage(format!(
                "attribute `{}` is numeric",
                self.attribute_name(attr)
            ))),
            None => Err(self.attr_out_of_range(attr)),
        }
    }

    pub fn reals(&self, attr: usize) -> Option<&[f64]> {
        match self.columns.get(attr) {
            Some(Column::Reals(v)) => Some(v),
            _ => None,
        }
    }

    /// Value table of a categorical attribute (empty for numeric ones).
    pub fn value_table(&self, attr: usize) -> &[String] {
        match &self.columns[attr] {
            Column::Codes { values, .. } => values,
            Column::Reals(_) => &[],
        }
    }

    /// Id of the missing token under [`MissingPolicy::Special`], if it occurs.
    pub fn missing_id(&self, attr: usize) -> Option<ValueId> {
        match &self.columns[attr] {
            Column::Codes { missing, .. } => *missing,
            Column::Reals(_) => None,
        }
    }

    pub fn token(&self, attr: usize, id: ValueId) -> Option<&str> {
        self.value_table(attr).get(id as usize).map(String::as_str)
    }

    /// Number of distinct ids present in the column.
    pub fn distinct_count(&self, attr: usize) -> usize {
        match &self.columns[attr] {
            Column::Codes { ids, values, .. } => {
                let mut seen = vec![false; values.len()];
                ids.iter()
                    .filter(|&&id| id != ABSENT)
                    .for_each(|&id| seen[id as usize] = true);
                seen.into_iter().filter(|&s| s).count()
            }
            Column::Reals(_) => 0,
        }
    }

    /// Record tokens in attribute order; absent cells decode to the missing token.
    pub fn decode_record(&self, record: usize) -> Vec<String> {
        self.columns
            .iter()
            .map(|c| match c {
                Column::Codes { ids, values, .. } => match ids[record] {
                    ABSENT => self.missing_token.clone(),
                    id => values[id as usize].clone(),
                },
                Column::Reals(v) if v[record].is_nan() => self.missing_token.clone(),
                Column::Reals(v) => v[record].to_string(),
            })
            .collect()
    }

    /// Projection of a record onto a set of categorical attributes, in the
    /// order given. Absent cells appear as [`ABSENT`].
    pub fn project(&self, record: usize, attrs: &[usize]) -> Result<Vec<ValueId>> {
        if record >= self.n {
            return Err(Error::usage(format!(
                "record {record} out of range (n = {})",
                self.n
            )));
        }
        attrs
            .iter()
            .map(|&a| self.codes(a).map(|ids| ids[record]))
            .collect()
    }

    /// The first `rows` records; value tables are kept whole.
    pub fn prefix(&self, rows: usize) -> Dataset {
        let rows = rows.min(self.n);
        let columns = self
            .columns
            .iter()
            .map(|c| match c {
                Column::Codes {
                    ids,
                    values,
                    missing,
                } => Column::Codes {
                    ids: ids[..rows].to_vec(),
                    values: values.clone(),
                    missing: *missing,
                },
                Column::Reals(v) => Column::Reals(v[..rows].to_vec()),
            })
            .collect();
        Dataset {
            schema: self.schema.clone(),
            n: rows,
            columns,
            class: self.class.as_ref().map(|c| ClassColumn {
                name: c.name.clone(),
                labels: c.labels[..rows].to_vec(),
                values: c.values.clone(),
            }),
            policy: self.policy,
            missing_token: self.missing_token.clone(),
        }
    }

    /// Replaces a numeric attribute with `bin_count` equal-width bins over its
    /// observed range. Bin `b` has id `b`; a missing cell becomes the missing
    /// token (id `bin_count`) or [`ABSENT`], following the dataset's policy.
    pub fn discretize_equal_width(mut self, attr: usize, bin_count: usize) -> Result<Dataset> {
        if bin_count == 0 {
            return Err(Error::usage("bin count must be at least 1"));
        }
        let raw = match self.columns.get(attr) {
            Some(Column::Reals(v)) => v,
            Some(Column::Codes { .. }) => {
                return Err(Error::usage(format!(
                    "attribute `{}` is not numeric",
                    self.attribute_name(attr)
                )))
            }
            None => return Err(self.attr_out_of_range(attr)),
        };
        let range = observed_range(raw);
        let (min, max) = range.unwrap_or((0.0, 0.0));
        let mut values: Vec<String> = (0..bin_count)
            .map(|b| bin_label(min, max, bin_count, b))
            .collect();
        let mut missing = None;
        let mut ids = Vec::with_capacity(raw.len());
        for &v in raw {
            if v.is_nan() {
                match self.policy {
                    MissingPolicy::Ignore => ids.push(ABSENT),
                    MissingPolicy::Special => {
                        let id = *missing.get_or_insert_with(|| {
                            values.push(self.missing_token.clone());
                            bin_count as ValueId
                        });
                        ids.push(id);
                    }
                }
            } else {
                ids.push(equal_width_bin(v, min, max, bin_count) as ValueId);
            }
        }
        self.columns[attr] = Column::Codes {
            ids,
            values,
            missing,
        };
        self.schema.attributes[attr].kind = AttributeKind::Binned { bin_count, range };
        Ok(self)
    }

    /// Discretizes every numeric attribute with the same bin count.
    pub fn discretize_all(mut self, bin_count: usize) -> Result<Dataset> {
        for attr in 0..self.d() {
            if !self.is_categorical(attr) {
                self = self.discretize_equal_width(attr, bin_count)?;
            }
        }
        Ok(self)
    }

    /// Writes a headed CSV of the decoded records, class column last.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = self.schema.names().collect();
        if let Some(c) = &self.class {
            header.push(&c.name);
        }
        w.write_record(&header)?;
        for r in 0..self.n {
            let mut row = self.decode_record(r);
            if let Some(c) = &self.class {
                row.push(c.label(r).to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    fn attr_out_of_range(&self, attr: usize) -> Error {
        Error::usage(format!(
            "attribute index {attr} out of range (d = {})",
            self.d()
        ))
    }
}

fn bin_label(min: f64, max: f64, bin_count: usize, bin: usize) -> String {
    let width = (max - min) / bin_count as f64;
    let lo = min + width * bin as f64;
    if bin + 1 == bin_count {
        format!("[{lo}, {max}]")
    } else {
        format!("[{lo}, {})", min + width * (bin + 1) as f64)
    }
}
