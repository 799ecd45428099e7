// SPDX-License-Identifier: MIT OR Apache-2.0

//! Command implementations behind the `tempcomp` binary.
//!
//! Every command resolves a full [`ExperimentConfig`], does its work, and
//! returns a [`Report`]; nothing is written until the command has succeeded.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use tempcomp::bench::bench_curve;
use tempcomp::config::{ExperimentConfig, Normalize};
use tempcomp::ingestion::{parse_archive_file_with, LabelMap};
use tempcomp::pipeline::{run_classification, run_segmentation};
use tempcomp::SegmentBoundaries;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("input error: {0}")]
    Input(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("training diverged: {0}")]
    Divergence(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Config(_) => 3,
            CliError::Divergence(_) => 4,
        }
    }
}

impl From<tempcomp::Error> for CliError {
    fn from(e: tempcomp::Error) -> Self {
        match e {
            tempcomp::Error::Config { .. } => CliError::Config(e.to_string()),
            tempcomp::Error::NonFiniteGradient { .. } => CliError::Divergence(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            other => Err(format!("unknown format `{other}` (expected text or csv)")),
        }
    }
}

/// Line-oriented `key: value` report with list sections, a CSV table and a
/// trailing timing section that is the only nondeterministic part.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub fields: Vec<(String, String)>,
    pub sections: Vec<(String, Vec<String>)>,
    pub table_header: Vec<String>,
    pub table: Vec<Vec<String>>,
    pub timing: Vec<(String, String)>,
}

impl Report {
    fn new(command: &str) -> Self {
        let mut r = Self::default();
        r.field("schema_version", SCHEMA_VERSION);
        r.field("command", command);
        r
    }

    pub fn field(&mut self, key: &str, value: impl ToString) {
        self.fields.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn section(&mut self, name: &str, items: Vec<String>) {
        self.sections.push((name.to_string(), items));
    }

    fn embed_config(&mut self, cfg: &ExperimentConfig) {
        let items = cfg
            .entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect();
        self.section("config", items);
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{k}: {v}");
        }
        for (name, items) in &self.sections {
            let _ = writeln!(out, "{name}:");
            for item in items {
                let _ = writeln!(out, "  - {item}");
            }
        }
        if !self.timing.is_empty() {
            let _ = writeln!(out, "timing:");
            for (k, v) in &self.timing {
                let _ = writeln!(out, "  {k}: {v}");
            }
        }
        out
    }

    pub fn render_csv(&self) -> CliResult<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Input(e.to_string());
        w.write_record(&self.table_header).map_err(io)?;
        for row in &self.table {
            w.write_record(row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Input(e.to_string()))
    }

    pub fn render(&self, format: Format) -> CliResult<String> {
        match format {
            Format::Text => Ok(self.render_text()),
            Format::Csv => self.render_csv(),
        }
    }
}

/// Flags shared by every command.
#[derive(Debug, Clone, Default)]
pub struct CommonArgs {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub k: Option<usize>,
    pub normalize: Option<Normalize>,
}

/// Config file (or defaults) with command-line overrides applied on top.
pub fn resolve_config(args: &CommonArgs) -> CliResult<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::parse(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    // a lambda override applies to both phases
    if let Some(l1) = args.lambda1 {
        cfg.schedule.early.0 = l1;
        cfg.schedule.late.0 = l1;
    }
    if let Some(l2) = args.lambda2 {
        cfg.schedule.early.1 = l2;
        cfg.schedule.late.1 = l2;
    }
    if let Some(k) = args.k {
        cfg.segment_count = Some(k);
    }
    if let Some(n) = args.normalize {
        cfg.normalize = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Ground-truth file: one line per series, first field the series length,
/// remaining fields the cut indices; tab, comma or space separated.
pub fn parse_ground_truth(text: &str) -> CliResult<Vec<SegmentBoundaries>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line
            .split(['\t', ',', ' '])
            .filter(|f| !f.is_empty())
            .collect();
        let nums = fields
            .iter()
            .enumerate()
            .map(|(j, f)| {
                f.parse::<usize>().map_err(|_| {
                    CliError::Input(format!(
                        "ground truth line {}, column {}: expected a non-negative integer, got `{f}`",
                        i + 1,
                        j + 1
                    ))
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let b = SegmentBoundaries::new(nums[1..].to_vec(), nums[0])
            .map_err(|e| CliError::Input(format!("ground truth line {}: {e}", i + 1)))?;
        out.push(b);
    }
    Ok(out)
}

pub fn format_ground_truth(truth: &[SegmentBoundaries]) -> String {
    let mut out = String::new();
    for b in truth {
        let _ = write!(out, "{}", b.series_len());
        for c in b.cuts() {
            let _ = write!(out, "\t{c}");
        }
        out.push('\n');
    }
    out
}

fn join<T: ToString>(xs: &[T], sep: &str) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

pub fn cmd_segment(input: &Path, gt: Option<&Path>, args: &CommonArgs) -> CliResult<Report> {
    let cfg = resolve_config(args)?;
    let start = Instant::now();
    let data = parse_archive_file_with(input, &mut LabelMap::default())?;
    let truth = match gt {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
            Some(parse_ground_truth(&text)?)
        }
        None => None,
    };
    let run = run_segmentation(&data.series, truth.as_deref(), cfg.segment_count, &cfg)?;

    let mut r = Report::new("segment");
    r.field("input", input.display());
    r.field("series", data.series.len());
    if let Some(w) = data.ragged {
        r.field("warning", w);
    }
    r.field(
        "segment_rule",
        match cfg.segment_count {
            Some(k) => format!("fixed count {k}"),
            None => "all salient peaks".to_string(),
        },
    );
    if let Some(s) = &run.covering {
        r.field("covering_mean", format!("{:.6}", s.mean));
        r.field("covering_std", format!("{:.6}", s.std));
    }
    let mut items = Vec::new();
    r.table_header = vec![
        "id".into(),
        "length".into(),
        "segments".into(),
        "cuts".into(),
    ];
    if run.covering.is_some() {
        r.table_header.push("covering".into());
    }
    for s in &run.series {
        let cuts = join(s.boundaries.cuts(), " ");
        let mut item = format!(
            "{} length={} segments={} cuts=[{}]",
            s.id,
            s.boundaries.series_len(),
            s.boundaries.segment_count(),
            cuts
        );
        let mut row = vec![
            s.id.clone(),
            s.boundaries.series_len().to_string(),
            s.boundaries.segment_count().to_string(),
            cuts,
        ];
        if let Some(c) = s.covering {
            let _ = write!(item, " covering={c:.6}");
            row.push(format!("{c:.6}"));
        }
        items.push(item);
        r.table.push(row);
    }
    r.section("boundaries", items);
    r.embed_config(&cfg);
    r.timing.push((
        "elapsed_ms".into(),
        format!("{:.1}", start.elapsed().as_secs_f64() * 1e3),
    ));
    Ok(r)
}

pub fn cmd_train(
    train: &Path,
    test: &Path,
    checkpoint: Option<&Path>,
    args: &CommonArgs,
) -> CliResult<Report> {
    let cfg = resolve_config(args)?;
    let start = Instant::now();
    let mut labels = LabelMap::default();
    let train_data = parse_archive_file_with(train, &mut labels)?;
    let test_data = parse_archive_file_with(test, &mut labels)?;
    let run = run_classification(&train_data.series, &test_data.series, &cfg)?;
    if let Some(p) = checkpoint {
        run.checkpoint
            .save(p)
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
    }

    let mut r = Report::new("train");
    r.field("train", train.display());
    r.field("test", test.display());
    r.field("classes", run.dims.classes);
    r.field(
        "label_map",
        labels
            .entries()
            .map(|(o, i)| format!("{o}->{i}"))
            .collect::<Vec<_>>()
            .join(" "),
    );
    r.field("segment_count", run.segment_count);
    r.field("padded_length", run.padded_len);
    r.field("parameters", run.dims.param_count());
    r.field("train_series", run.train_size);
    r.field("validation_series", run.val_size);
    r.field("test_series", run.test_size);
    r.field("epochs_run", run.outcome.log.len());
    r.field("best_epoch", run.outcome.best_epoch);
    r.field("stopped_early", run.outcome.stopped_early);
    r.field("test_accuracy", format!("{:.6}", run.test_accuracy));
    r.field("probe_accuracy", format!("{:.6}", run.probe_accuracy));
    r.field(
        "probe",
        "nearest class centroid over dense features of the training split",
    );
    if cfg.schedule.late.1 == 0.0 {
        r.field(
            "note",
            "classifier head untrained (lambda2 = 0); use probe_accuracy",
        );
    }
    if let Some(p) = checkpoint {
        r.field("checkpoint", p.display());
    }
    r.table_header = [
        "epoch",
        "lambda1",
        "lambda2",
        "mae_loss",
        "ce_loss",
        "total",
        "val_mae",
        "val_ce",
        "val_total",
        "val_accuracy",
    ]
    .map(String::from)
    .to_vec();
    let mut items = Vec::new();
    for e in &run.outcome.log {
        let row = vec![
            e.epoch.to_string(),
            e.lambda1.to_string(),
            e.lambda2.to_string(),
            format!("{:.9e}", e.mae_loss),
            format!("{:.9e}", e.ce_loss),
            format!("{:.9e}", e.total),
            format!("{:.9e}", e.val_mae),
            format!("{:.9e}", e.val_ce),
            format!("{:.9e}", e.val_total),
            format!("{:.6}", e.val_accuracy),
        ];
        items.push(
            r.table_header
                .iter()
                .zip(&row)
                .map(|(h, v)| format!("{h}={v}"))
                .collect::<Vec<_>>()
                .join(" "),
        );
        r.table.push(row);
    }
    r.section("epochs", items);
    r.section("test_predictions", vec![join(&run.test_predictions, " ")]);
    r.embed_config(&cfg);
    r.timing.push((
        "elapsed_ms".into(),
        format!("{:.1}", start.elapsed().as_secs_f64() * 1e3),
    ));
    Ok(r)
}

pub fn cmd_bench(length: usize, reps: usize, args: &CommonArgs) -> CliResult<Report> {
    let cfg = resolve_config(args)?;
    let b = bench_curve(length, &cfg.change_space, reps, cfg.train.seed)?;
    let mut r = Report::new("bench");
    r.field("length", b.length);
    r.field("repetitions", b.reps);
    r.field("scales_used", b.scales_used);
    r.field("threads", 1);
    r.table_header = [
        "length",
        "repetitions",
        "scales_used",
        "median_ms",
        "min_ms",
        "max_ms",
    ]
    .map(String::from)
    .to_vec();
    r.table.push(vec![
        b.length.to_string(),
        b.reps.to_string(),
        b.scales_used.to_string(),
        format!("{:.3}", b.median_ms),
        format!("{:.3}", b.min_ms),
        format!("{:.3}", b.max_ms),
    ]);
    r.embed_config(&cfg);
    r.timing
        .push(("median_ms".into(), format!("{:.3}", b.median_ms)));
    r.timing.push(("min_ms".into(), format!("{:.3}", b.min_ms)));
    r.timing.push(("max_ms".into(), format!("{:.3}", b.max_ms)));
    Ok(r)
}

/// Writes `text` to `out`, or stdout when absent.
pub fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
