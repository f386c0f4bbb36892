use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::Context as _;
use log::{info, warn};
use soe_core::eval::{
    compare_report, compare_tsv, coverage_at, coverage_table, label_rare, rare_labels, KRule,
    RareClassSpec,
};
use soe_core::framework::{
    enumerate_subspaces, parse_subspace_file, run_framework, run_per_subspace, FrameworkOptions,
    JointFrequency, SubspaceSet,
};
use soe_core::soe1::{detect_with_stats, factor_vector, score_all};
use soe_core::synth::{attribute_scaling_run, generate, scaling_run, SynthSpec};
use soe_core::uci::Benchmark;
use soe_core::{
    ColumnKind, Combiner, Dataset, Error, HistogramSet, LoadOptions, Polarity, SchemaHints,
    Selection, Soe1Config,
};

use crate::table::Table;
use crate::{
    BenchArgs, DetectArgs, EvalArgs, FetchArgs, FrameworkArgs, LoadArgs, SelectArgs, SynthArgs,
};

pub struct Context {
    pub pretty: bool,
    pub seed: u64,
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Error::Usage(msg.into()).into()
}

fn emit(table: &Table, pretty: bool) -> anyhow::Result<()> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match table.write(&mut out, pretty).and_then(|_| out.flush()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn emit_text(text: &str) -> anyhow::Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

/// `(column, bins)` pairs; `None` names every non-class column.
fn parse_bins(specs: &[String]) -> anyhow::Result<Vec<(Option<String>, usize)>> {
    specs
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let (col, b) = s
                .split_once('=')
                .ok_or_else(|| usage(format!("--bins expects <column>=<B>, got `{s}`")))?;
            let b: usize = b
                .trim()
                .parse()
                .ok()
                .filter(|&b| b >= 1)
                .ok_or_else(|| usage(format!("invalid bin count in `{s}`")))?;
            let col = col.trim();
            Ok(((col != "all").then(|| col.to_string()), b))
        })
        .collect()
}

fn load(args: &LoadArgs, class_col: Option<&str>) -> anyhow::Result<Dataset> {
    let bins = parse_bins(&args.bins)?;
    let all = bins.iter().rev().find(|(c, _)| c.is_none()).map(|(_, b)| *b);
    let named: BTreeMap<&str, usize> = bins
        .iter()
        .filter_map(|(c, b)| c.as_deref().map(|c| (c, *b)))
        .collect();
    let mut opts = LoadOptions {
        missing_token: args.missing_token.clone(),
        policy: args.missing_policy,
        class_column: class_col.map(str::to_string),
        schema_hints: None,
    };
    if all.is_some() || !named.is_empty() {
        opts.schema_hints = Some(SchemaHints::Named {
            default: if all.is_some() {
                ColumnKind::Numeric
            } else {
                ColumnKind::Categorical
            },
            overrides: named
                .keys()
                .map(|c| (c.to_string(), ColumnKind::Numeric))
                .collect(),
        });
    }
    let mut ds = Dataset::load_csv(&args.input, &opts)
        .with_context(|| format!("loading {}", args.input.display()))?;
    for attr in 0..ds.d() {
        if ds.is_categorical(attr) {
            continue;
        }
        let b = named
            .get(ds.attribute_name(attr))
            .copied()
            .or(all)
            .expect("numeric columns come from --bins");
        ds = ds.discretize_equal_width(attr, b)?;
    }
    info!("loaded {} records x {} attributes", ds.n(), ds.d());
    Ok(ds)
}

fn selection(s: &SelectArgs) -> Selection {
    match (s.k, s.top_ratio) {
        (Some(k), _) => Selection::K(k),
        (None, Some(r)) => Selection::TopRatio(r),
        (None, None) => unreachable!("clap requires one of --k and --top-ratio"),
    }
}

fn warn_even_q(op: &Combiner) {
    if let Some(w) = op.even_q_warning() {
        warn!("{w}");
    }
}

/// CSV header plus the raw fields of selected records, keyed by record index.
type Echo = (Vec<String>, BTreeMap<usize, Vec<String>>);

fn echo_rows(path: &Path, wanted: &BTreeSet<usize>) -> anyhow::Result<Echo> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?.iter().map(str::to_string).collect(),
        None => Vec::new(),
    };
    let mut rows = BTreeMap::new();
    let mut index = 0;
    for rec in records {
        let rec = rec?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if wanted.contains(&index) {
            rows.insert(index, rec.iter().map(str::to_string).collect());
        }
        index += 1;
    }
    Ok((header, rows))
}

fn fmt_factor(f: Option<f64>) -> String {
    f.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub fn detect(ctx: &Context, a: DetectArgs) -> anyhow::Result<()> {
    let ds = load(&a.load, a.class_col.as_deref())?;
    warn_even_q(&a.score.operator);
    let cfg = Soe1Config::new(selection(&a.select), a.score.operator, a.score.polarity)
        .log_space(a.score.log_space);
    let d = detect_with_stats(&ds, &cfg)?;
    if !d.stats.excluded.is_empty() {
        warn!(
            "{} records have no present attribute and were not scored",
            d.stats.excluded.len()
        );
    }
    info!(
        "{} record reads, {} histogram entries, heap peak {}",
        d.stats.records_read, d.stats.histogram_entries, d.stats.heap_peak
    );

    let needs_hist = a.explain || a.dump_histograms.is_some();
    let hs = if needs_hist {
        Some(HistogramSet::build(&ds)?)
    } else {
        None
    };
    if let (Some(path), Some(hs)) = (&a.dump_histograms, &hs) {
        let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut w = BufWriter::new(f);
        hs.write_tsv(&ds, &mut w)?;
        w.flush()?;
    }

    let mut header = vec!["rank".to_string(), "record".into(), "score".into()];
    let echoed = if a.echo_rows {
        let wanted = d.ranking.iter().map(|s| s.record).collect();
        let (cols, rows) = echo_rows(&a.load.input, &wanted)?;
        header.extend(cols);
        Some(rows)
    } else {
        None
    };
    if a.explain {
        header.extend((0..ds.d()).map(|i| format!("factor:{}", ds.attribute_name(i))));
    }
    let mut table = Table::new(header);
    for s in &d.ranking {
        let mut row = vec![s.rank.to_string(), s.record.to_string(), s.score.to_string()];
        if let Some(rows) = &echoed {
            row.extend(rows.get(&s.record).cloned().unwrap_or_default());
        }
        if let Some(hs) = &hs.as_ref().filter(|_| a.explain) {
            let fv = factor_vector(hs, &ds, s.record, a.score.polarity)?;
            row.extend(fv.into_iter().map(fmt_factor));
        }
        table.push(row);
    }
    emit(&table, ctx.pretty)
}

pub fn framework(ctx: &Context, a: FrameworkArgs) -> anyhow::Result<()> {
    let ds = load(&a.load, a.class_col.as_deref())?;
    warn_even_q(&a.score.operator);
    let subspaces = match a.subspaces.strip_prefix("all:") {
        Some(dim) => {
            let dim: usize = dim
                .parse()
                .map_err(|_| usage(format!("invalid dimensionality in `{}`", a.subspaces)))?;
            enumerate_subspaces(ds.d(), dim, a.max_subspaces)?
        }
        None => {
            let text = std::fs::read_to_string(&a.subspaces)
                .with_context(|| format!("reading {}", a.subspaces))?;
            parse_subspace_file(&text, &ds)?
        }
    };
    let ss = SubspaceSet::uniform(subspaces, Arc::new(JointFrequency::new(a.score.polarity)))?;
    info!("{} subspaces", ss.len());
    let opts = FrameworkOptions {
        log_space: a.score.log_space,
        memory_budget: a.memory_budget,
        parallel: true,
    };
    let sel = selection(&a.select);
    if a.no_ensemble {
        let mut table = Table::new(["subspace", "rank", "record", "score"]);
        for (s, ranking) in run_per_subspace(&ds, &ss, sel, a.score.polarity, &opts)? {
            let name = s.display_names(&ds).to_string();
            for r in ranking {
                table.push(vec![
                    name.clone(),
                    r.rank.to_string(),
                    r.record.to_string(),
                    r.score.to_string(),
                ]);
            }
        }
        return emit(&table, ctx.pretty);
    }
    let ranking = run_framework(&ds, &ss, a.score.operator, sel, a.score.polarity, &opts)?;
    let mut table = Table::new(["rank", "record", "score"]);
    for r in ranking {
        table.push(vec![r.rank.to_string(), r.record.to_string(), r.score.to_string()]);
    }
    emit(&table, ctx.pretty)
}

const DEFAULT_RATIOS: [f64; 5] = [5.0, 10.0, 15.0, 20.0, 25.0];

pub fn eval(ctx: &Context, a: EvalArgs) -> anyhow::Result<()> {
    let ds = load(&a.load, Some(&a.class_col))?;
    let spec: RareClassSpec = a.rare.parse()?;
    let labels = rare_labels(&ds, &spec)?;
    let rare = label_rare(&ds, &spec)?;
    info!("rare classes {labels:?}: {} records", rare.len());
    if rare.is_empty() {
        warn!("no record belongs to a rare class");
    }
    let polarities: Vec<Polarity> = match a.polarity.as_str() {
        "both" => vec![Polarity::Frequency, Polarity::Rarity],
        p => vec![p.parse()?],
    };
    if a.operators.is_empty() {
        return Err(usage("no operators given"));
    }
    for op in &a.operators {
        warn_even_q(op);
    }
    let rule = KRule { base: a.k_base };
    let ratios: Vec<f64> = if a.cutoffs.ratios.is_empty() {
        DEFAULT_RATIOS.to_vec()
    } else {
        a.cutoffs.ratios.clone()
    };

    let mut tables = Vec::new();
    for &pol in &polarities {
        for &op in &a.operators {
            let cfg = Soe1Config::new(Selection::K(1), op, pol).log_space(a.log_space);
            let ranking = score_all(&ds, &cfg)?;
            let rows = if a.cutoffs.ks.is_empty() {
                let fractions: Vec<f64> = ratios.iter().map(|r| r / 100.0).collect();
                coverage_table(&ranking, &rare, &fractions, ds.n(), rule)?
            } else {
                if let Some(&k) = a.cutoffs.ks.iter().find(|&&k| k == 0 || k > ds.n()) {
                    return Err(usage(format!("k = {k} outside 1..={}", ds.n())));
                }
                coverage_at(&ranking, &rare, &a.cutoffs.ks, ds.n())
            };
            let name = if polarities.len() > 1 {
                format!("{op}/{pol}")
            } else {
                op.to_string()
            };
            tables.push((name, rows));
        }
    }
    let text = if ctx.pretty {
        compare_report(&tables)?
    } else {
        compare_tsv(&tables)?
    };
    emit_text(&text)
}

pub fn synth(ctx: &Context, a: SynthArgs) -> anyhow::Result<()> {
    let mut spec = match &a.preset {
        Some(p) => SynthSpec::preset(p).ok_or_else(|| usage(format!("unknown preset `{p}`")))?,
        None => SynthSpec::new(100_000, 10, 10, ctx.seed),
    };
    spec.seed = ctx.seed;
    if let Some(v) = a.rows {
        spec.rows = v;
    }
    if let Some(v) = a.attrs {
        spec.attrs = v;
    }
    if let Some(v) = a.classes {
        spec.classes = v;
    }
    if let Some(v) = a.values_per_attr {
        spec.values_per_attr = v;
    }
    if let Some(v) = a.class_skew {
        spec.class_skew = v;
    }
    let ds = generate(&spec)?;
    match &a.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            ds.write_csv(BufWriter::new(f))?;
        }
        None => match ds.write_csv(io::stdout().lock()) {
            Err(Error::Csv(e)) if is_broken_pipe(&e) => {}
            r => r?,
        },
    }
    Ok(())
}

fn is_broken_pipe(e: &csv::Error) -> bool {
    matches!(e.kind(), csv::ErrorKind::Io(io) if io.kind() == io::ErrorKind::BrokenPipe)
}

pub fn bench(ctx: &Context, a: BenchArgs) -> anyhow::Result<()> {
    let preset = a
        .spec
        .clone()
        .or_else(|| (a.rows.is_none() && a.attrs.is_none()).then(|| "DS1".to_string()));
    let mut spec = match &preset {
        Some(p) => SynthSpec::preset(p).ok_or_else(|| usage(format!("unknown spec `{p}`")))?,
        None => SynthSpec::new(100_000, 10, 10, ctx.seed),
    };
    spec.seed = ctx.seed;
    if let Some(v) = a.rows {
        spec.rows = v;
    }
    if let Some(v) = a.attrs {
        spec.attrs = v;
    }
    spec.classes = a.classes.unwrap_or(if preset.is_some() { spec.classes } else { spec.attrs });
    if a.repeats == 0 {
        return Err(usage("--repeats must be at least 1"));
    }
    warn_even_q(&a.operator);
    let cfg = Soe1Config::new(Selection::K(a.k), a.operator, Polarity::Frequency);
    let mut result = if a.attr_sweep.is_empty() {
        scaling_run(&spec, &a.fractions, &cfg, a.repeats)?
    } else {
        attribute_scaling_run(&spec, &a.attr_sweep, &cfg, a.repeats)?
    };
    if let Some(p) = &preset {
        if a.rows.is_none() && a.attrs.is_none() {
            result.name = p.to_ascii_uppercase();
        }
    }
    if let Some(path) = &a.plot_data {
        std::fs::write(path, result.to_plot_data())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if ctx.pretty {
        let mut table = Table::new(["dataset", "threads", "fraction", "size", "seconds"]);
        for ((f, s), t) in result.fractions.iter().zip(&result.sizes).zip(&result.wall_times) {
            table.push(vec![
                result.name.clone(),
                result.threads.to_string(),
                f.to_string(),
                s.to_string(),
                format!("{t:.6}"),
            ]);
        }
        emit(&table, true)?;
        let slope = result.slope.map_or("NA".to_string(), |s| format!("{s:.4}"));
        emit_text(&format!("log-log slope: {slope}\n"))
    } else {
        emit_text(&result.to_tsv())
    }
}

pub fn fetch(ctx: &Context, a: FetchArgs) -> anyhow::Result<()> {
    let targets: Vec<Benchmark> = if a.datasets.is_empty() {
        Benchmark::ALL.to_vec()
    } else {
        a.datasets
            .iter()
            .map(|n| Benchmark::parse(n).ok_or_else(|| usage(format!("unknown dataset `{n}`"))))
            .collect::<anyhow::Result<_>>()?
    };
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let mut table = Table::new(["dataset", "path", "records"]);
    for b in targets {
        let url = format!("{}/{}", a.base_url.trim_end_matches('/'), b.remote_path());
        info!("downloading {url}");
        let raw = ureq::get(&url)
            .call()
            .with_context(|| format!("downloading {url}"))?
            .into_string()
            .with_context(|| format!("reading {url}"))?;
        let csv = b.convert(&raw)?;
        let path = a.out.join(b.file_name());
        std::fs::write(&path, &csv).with_context(|| format!("writing {}", path.display()))?;
        table.push(vec![
            b.name().to_string(),
            path.display().to_string(),
            (csv.lines().count() - 1).to_string(),
        ]);
    }
    emit(&table, ctx.pretty)
}
