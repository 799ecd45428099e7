// SPDX-License-Identifier: MIT OR Apache-2.0

//! Archive-style datasets: one series per line, class label first.

use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Field separator of an archive file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    Tab,
    Comma,
    /// Runs of spaces; accepted for older archive dumps.
    Whitespace,
}

impl Delimiter {
    fn detect(line: &str) -> Self {
        if line.contains('\t') {
            Delimiter::Tab
        } else if line.contains(',') {
            Delimiter::Comma
        } else {
            Delimiter::Whitespace
        }
    }

    fn split(self, line: &str) -> Vec<&str> {
        match self {
            Delimiter::Tab => line.split('\t').map(str::trim).collect(),
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Whitespace => line.split_whitespace().collect(),
        }
    }
}

/// Maps archive labels to contiguous class ids in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelMap {
    originals: Vec<i64>,
}

impl LabelMap {
    pub fn id_of(&mut self, original: i64) -> usize {
        match self.originals.iter().position(|&o| o == original) {
            Some(i) => i,
            None => {
                self.originals.push(original);
                self.originals.len() - 1
            }
        }
    }

    pub fn get(&self, original: i64) -> Option<usize> {
        self.originals.iter().position(|&o| o == original)
    }

    pub fn original(&self, id: usize) -> Option<i64> {
        self.originals.get(id).copied()
    }

    pub fn class_count(&self) -> usize {
        self.originals.len()
    }

    /// `(original, id)` pairs in id order.
    pub fn entries(&self) -> impl Iterator<Item = (i64, usize)> + '_ {
        self.originals.iter().enumerate().map(|(i, &o)| (o, i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub series: Vec<TimeSeries>,
    pub labels: LabelMap,
    pub delimiter: Delimiter,
    /// Set when series lengths differ; padding happens at tokenization.
    pub ragged: Option<RaggedLengthWarning>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RaggedLengthWarning {
    pub min_len: usize,
    pub max_len: usize,
}

impl std::fmt::Display for RaggedLengthWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "series lengths vary from {} to {}",
            self.min_len, self.max_len
        )
    }
}

fn parse_label(field: &str, line: usize) -> Result<i64> {
    if let Ok(v) = field.parse::<i64>() {
        return Ok(v);
    }
    // some archives write labels as floats, e.g. "1.0000000e+00"
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() && v.fract() == 0.0 && v.abs() < 9.0e15 => Ok(v as i64),
        _ => Err(Error::Parse {
            line,
            column: 1,
            reason: format!("non-numeric label `{field}`"),
        }),
    }
}

/// Parses archive text, assigning class ids through `labels` so a test file
/// can share the mapping of its training file.
pub fn parse_archive_with(text: &str, name: &str, labels: &mut LabelMap) -> Result<Dataset> {
    let mut delimiter = None;
    let mut series = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let delim = *delimiter.get_or_insert_with(|| Delimiter::detect(line));
        let fields = delim.split(line);
        let label = parse_label(fields[0], line_no)?;
        let mut values = Vec::with_capacity(fields.len() - 1);
        for (j, f) in fields.iter().enumerate().skip(1) {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                column: j + 1,
                reason: format!("non-numeric value `{f}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    column: j + 1,
                    reason: "non-finite value".into(),
                });
            }
            values.push(v);
        }
        let id = format!("{name}:{}", series.len());
        let s =
            TimeSeries::new(values, Some(labels.id_of(label)), id).map_err(|e| Error::Parse {
                line: line_no,
                column: 2,
                reason: e.to_string(),
            })?;
        series.push(s);
    }
    if series.is_empty() {
        return Err(Error::EmptyFile);
    }
    let min_len = series.iter().map(TimeSeries::len).min().unwrap_or(0);
    let max_len = series.iter().map(TimeSeries::len).max().unwrap_or(0);
    Ok(Dataset {
        series,
        labels: labels.clone(),
        delimiter: delimiter.unwrap_or(Delimiter::Tab),
        ragged: (min_len != max_len).then_some(RaggedLengthWarning { min_len, max_len }),
    })
}

pub fn parse_archive_str(text: &str, name: &str) -> Result<Dataset> {
    parse_archive_with(text, name, &mut LabelMap::default())
}

pub fn parse_archive_file(path: impl AsRef<Path>) -> Result<Dataset> {
    parse_archive_file_with(path, &mut LabelMap::default())
}

pub fn parse_archive_file_with(path: impl AsRef<Path>, labels: &mut LabelMap) -> Result<Dataset> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_archive_with(&text, &name, labels)
}

/// Emits series in archive format with their original labels. Unlabeled
/// series are written with label 0.
pub fn serialize(series: &[TimeSeries], labels: &LabelMap, delimiter: Delimiter) -> String {
    let sep = match delimiter {
        Delimiter::Tab => "\t",
        Delimiter::Comma => ",",
        Delimiter::Whitespace => " ",
    };
    let mut out = String::new();
    for s in series {
        let label = s.label.and_then(|l| labels.original(l)).unwrap_or(0);
        write!(out, "{label}").expect("string write");
        for v in &s.values {
            // `{:?}` is the shortest representation that parses back exactly
            write!(out, "{sep}{v:?}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Per-series z-normalization with population standard deviation.
pub fn z_normalize(s: &TimeSeries) -> TimeSeries {
    s.z_normalized()
}

/// Stratified held-out indices: `max(1, round(fraction * n))` series, spread
/// over classes in proportion to their size, never taking a class's last
/// training example. Both returned lists are ascending.
pub fn split_indices(
    labels: &[Option<usize>],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    if n < 2 {
        return Err(Error::TooFewSeries(n));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config("val_fraction", "must be in (0, 1)"));
    }
    let n_val = ((fraction * n as f64).round() as usize).clamp(1, n - 1);

    // group by label; unlabeled series form their own group
    let mut keys: Vec<Option<usize>> = labels.to_vec();
    keys.sort_unstable();
    keys.dedup();
    let groups: Vec<Vec<usize>> = keys
        .iter()
        .map(|k| (0..n).filter(|&i| labels[i] == *k).collect())
        .collect();

    // largest-remainder apportionment, capped at size - 1 when possible
    let exact: Vec<f64> = groups
        .iter()
        .map(|g| n_val as f64 * g.len() as f64 / n as f64)
        .collect();
    let cap: Vec<usize> = groups.iter().map(|g| g.len().saturating_sub(1)).collect();
    let mut quota: Vec<usize> = exact
        .iter()
        .zip(&cap)
        .map(|(e, &c)| (e.floor() as usize).min(c))
        .collect();
    let mut order: Vec<usize> = (0..groups.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - quota[a] as f64;
        let fb = exact[b] - quota[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut assigned: usize = quota.iter().sum();
    for relaxed in [false, true] {
        for &g in order.iter().cycle().take(order.len() * n) {
            if assigned == n_val {
                break;
            }
            let limit = if relaxed { groups[g].len() } else { cap[g] };
            if quota[g] < limit {
                quota[g] += 1;
                assigned += 1;
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut val = Vec::with_capacity(n_val);
    for (g, q) in groups.iter().zip(&quota) {
        let mut members = g.clone();
        members.shuffle(&mut rng);
        val.extend_from_slice(&members[..*q]);
    }
    val.sort_unstable();
    let train = (0..n).filter(|i| val.binary_search(i).is_err()).collect();
    Ok((train, val))
}

pub fn train_val_split(
    train: &[TimeSeries],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<TimeSeries>, Vec<TimeSeries>)> {
    let labels: Vec<Option<usize>> = train.iter().map(|s| s.label).collect();
    let (tr, va) = split_indices(&labels, fraction, seed)?;
    Ok((
        tr.into_iter().map(|i| train[i].clone()).collect(),
        va.into_iter().map(|i| train[i].clone()).collect(),
    ))
}
