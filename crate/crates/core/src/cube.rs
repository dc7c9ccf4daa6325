//! Loading, validating, normalizing, and persisting node×metric×time usage
//! data.
//!
//! The central type is [`UsageCube`]: `T` slices of an `N×M` matrix holding
//! one value per (node, metric, timestep), together with the axis labels, an
//! optional observation mask, and the per-metric normalization constants once
//! [`UsageCube::normalize`] has run.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcsv::{read_matrix_csv, write_matrix_csv};

/// Layout of an input CSV file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsvFormat {
    /// Header `timestamp,node,metric,value`, one cell per row.
    Long,
    /// Header `timestamp,node,<metric1>,...,<metricM>`, one (timestamp, node)
    /// per row.
    Wide,
}

/// What to do with absent (node, metric, time) cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Any absent cell is an error.
    Reject,
    /// Absent cells get value 0 and are marked unobserved in the mask.
    ImputeZero,
}

/// Whether to z-score the cube after loading.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    ZScore,
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub format: CsvFormat,
    pub missing_policy: MissingPolicy,
    pub normalization: Normalization,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            format: CsvFormat::Long,
            missing_policy: MissingPolicy::Reject,
            normalization: Normalization::None,
        }
    }
}

/// Per-metric normalization constants recorded by [`UsageCube::normalize`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub std: f64,
}

/// How a cube directory stores its value slices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CubeStorage {
    /// Single `values.bin` of little-endian f64, t-major, n-row, m-column.
    Binary,
    /// One `slices/t<index>.csv` matrix per timestep.
    Csv,
}

const CUBE_FORMAT_VERSION: &str = "1";

#[derive(Serialize, Deserialize)]
struct CubeManifest {
    format_version: String,
    storage: String,
    node_ids: Vec<String>,
    metric_ids: Vec<String>,
    timestamps: Vec<i64>,
    normalization: Option<Vec<MetricStats>>,
    has_mask: bool,
}

/// Observed node×metric×time data.
///
/// Slices are indexed by timestep `t`; within a slice, rows are nodes and
/// columns are metrics. Values of masked (unobserved) cells are stored as 0
/// and ignored by every computation in this crate.
#[derive(Clone, Debug, PartialEq)]
pub struct UsageCube {
    node_ids: Vec<String>,
    metric_ids: Vec<String>,
    timestamps: Vec<i64>,
    values: Vec<DMatrix<f64>>,
    mask: Option<Vec<DMatrix<bool>>>,
    normalization: Option<Vec<MetricStats>>,
}

fn validate_label(kind: &str, label: &str) -> Result<()> {
    if label.is_empty() {
        return Err(Error::InvalidConfig(format!("empty {kind} label")));
    }
    if label.contains([',', '"', '\n', '\r']) {
        return Err(Error::InvalidConfig(format!(
            "{kind} label {label:?} contains a character reserved by the CSV formats"
        )));
    }
    Ok(())
}

fn validate_unique(kind: &str, labels: &[String]) -> Result<()> {
    let mut seen = std::collections::HashSet::new();
    for l in labels {
        validate_label(kind, l)?;
        if !seen.insert(l) {
            return Err(Error::InvalidConfig(format!("duplicate {kind} label {l:?}")));
        }
    }
    Ok(())
}

impl UsageCube {
    /// Assemble a cube from raw parts, checking every structural invariant.
    ///
    /// `mask` may be `None` when every cell is observed. Stored values of
    /// masked cells are not validated (they are ignored downstream).
    pub fn new(
        node_ids: Vec<String>,
        metric_ids: Vec<String>,
        timestamps: Vec<i64>,
        values: Vec<DMatrix<f64>>,
        mask: Option<Vec<DMatrix<bool>>>,
    ) -> Result<Self> {
        let (n, m, t) = (node_ids.len(), metric_ids.len(), timestamps.len());
        if n == 0 || m == 0 || t == 0 {
            return Err(Error::DimensionMismatch(format!(
                "need N ≥ 1, M ≥ 1, T ≥ 1, got N={n}, M={m}, T={t}"
            )));
        }
        validate_unique("node", &node_ids)?;
        validate_unique("metric", &metric_ids)?;
        if !timestamps.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "timestamps must be strictly increasing".into(),
            ));
        }
        if values.len() != t {
            return Err(Error::DimensionMismatch(format!(
                "expected {t} value slices, got {}",
                values.len()
            )));
        }
        for (ti, slice) in values.iter().enumerate() {
            if slice.nrows() != n || slice.ncols() != m {
                return Err(Error::DimensionMismatch(format!(
                    "slice {ti} is {}×{}, expected {n}×{m}",
                    slice.nrows(),
                    slice.ncols()
                )));
            }
        }
        if let Some(mask) = &mask {
            if mask.len() != t {
                return Err(Error::DimensionMismatch(format!(
                    "expected {t} mask slices, got {}",
                    mask.len()
                )));
            }
            for (ti, slice) in mask.iter().enumerate() {
                if slice.nrows() != n || slice.ncols() != m {
                    return Err(Error::DimensionMismatch(format!(
                        "mask slice {ti} is {}×{}, expected {n}×{m}",
                        slice.nrows(),
                        slice.ncols()
                    )));
                }
            }
        }
        let cube = UsageCube {
            node_ids,
            metric_ids,
            timestamps,
            values,
            mask,
            normalization: None,
        };
        for ti in 0..t {
            for ni in 0..n {
                for mi in 0..m {
                    if cube.is_observed(ni, mi, ti) && !cube.values[ti][(ni, mi)].is_finite() {
                        return Err(Error::InvalidConfig(format!(
                            "non-finite value at (node {}, metric {}, timestamp {})",
                            cube.node_ids[ni], cube.metric_ids[mi], cube.timestamps[ti]
                        )));
                    }
                }
            }
        }
        Ok(cube)
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn n_metrics(&self) -> usize {
        self.metric_ids.len()
    }

    pub fn n_steps(&self) -> usize {
        self.timestamps.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn metric_ids(&self) -> &[String] {
        &self.metric_ids
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    /// The `N×M` slice at timestep `t`. Panics when `t` is out of range.
    pub fn slice(&self, t: usize) -> &DMatrix<f64> {
        &self.values[t]
    }

    /// Stored value at (node `n`, metric `m`, timestep `t`).
    /// Panics when an index is out of range.
    pub fn value(&self, n: usize, m: usize, t: usize) -> f64 {
        self.values[t][(n, m)]
    }

    pub fn is_observed(&self, n: usize, m: usize, t: usize) -> bool {
        match &self.mask {
            Some(mask) => mask[t][(n, m)],
            None => true,
        }
    }

    pub fn is_fully_observed(&self) -> bool {
        match &self.mask {
            Some(mask) => mask.iter().all(|s| s.iter().all(|&b| b)),
            None => true,
        }
    }

    /// Number of observed cells.
    pub fn n_observed(&self) -> usize {
        match &self.mask {
            Some(mask) => mask.iter().map(|s| s.iter().filter(|&&b| b).count()).sum(),
            None => self.n_nodes() * self.n_metrics() * self.n_steps(),
        }
    }

    /// Per-metric (mean, std) recorded at normalize time, if any.
    pub fn normalization(&self) -> Option<&[MetricStats]> {
        self.normalization.as_deref()
    }

    pub fn node_index(&self, label: &str) -> Option<usize> {
        self.node_ids.iter().position(|l| l == label)
    }

    pub fn metric_index(&self, label: &str) -> Option<usize> {
        self.metric_ids.iter().position(|l| l == label)
    }

    /// Load a cube from a long- or wide-format CSV file, applying the
    /// missing-cell policy and (optionally) z-score normalization.
    pub fn load_csv(path: impl AsRef<Path>, config: &IngestConfig) -> Result<Self> {
        let path = path.as_ref();
        let cells = match config.format {
            CsvFormat::Long => parse_long_csv(path)?,
            CsvFormat::Wide => parse_wide_csv(path)?,
        };
        let cube = assemble(path, cells, config.missing_policy)?;
        match config.normalization {
            Normalization::ZScore => cube.normalize(),
            Normalization::None => Ok(cube),
        }
    }

    /// Write the observed cells as a long-format CSV, sorted by timestamp,
    /// then node label, then metric label.
    pub fn write_long_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let node_order = label_order(&self.node_ids);
        let metric_order = label_order(&self.metric_ids);
        let mut out = String::from("timestamp,node,metric,value\n");
        for (t, &ts) in self.timestamps.iter().enumerate() {
            for &n in &node_order {
                for &m in &metric_order {
                    if self.is_observed(n, m, t) {
                        out.push_str(&format!(
                            "{ts},{},{},{}\n",
                            self.node_ids[n],
                            self.metric_ids[m],
                            self.values[t][(n, m)]
                        ));
                    }
                }
            }
        }
        let mut file = fs::File::create(path).map_err(Error::io(path))?;
        file.write_all(out.as_bytes()).map_err(Error::io(path))?;
        Ok(())
    }

    /// Z-score every metric over its observed cells: `(z − μ_m) / σ_m` with
    /// population statistics. Constant metrics are centered and recorded with
    /// `std = 1`, so they become exactly 0. Masked cells stay 0.
    pub fn normalize(mut self) -> Result<Self> {
        if self.normalization.is_some() {
            return Err(Error::AlreadyNormalized);
        }
        let (n, m, t) = (self.n_nodes(), self.n_metrics(), self.n_steps());
        let mut stats = Vec::with_capacity(m);
        for mi in 0..m {
            let mut observed = Vec::new();
            for ti in 0..t {
                for ni in 0..n {
                    if self.is_observed(ni, mi, ti) {
                        observed.push(self.values[ti][(ni, mi)]);
                    }
                }
            }
            let constant = observed.windows(2).all(|w| w[0] == w[1]);
            let (mean, std) = if observed.is_empty() {
                (0.0, 1.0)
            } else if constant {
                // Center by the exact common value so the result is exactly 0.
                (observed[0], 1.0)
            } else {
                let (mean, std) = crate::stats::pop_mean_std(observed.iter().copied());
                (mean, if std > 0.0 { std } else { 1.0 })
            };
            stats.push(MetricStats { mean, std });
            for ti in 0..t {
                for ni in 0..n {
                    if self.is_observed(ni, mi, ti) {
                        let z = self.values[ti][(ni, mi)];
                        self.values[ti][(ni, mi)] = (z - mean) / std;
                    }
                }
            }
        }
        self.normalization = Some(stats);
        Ok(self)
    }

    /// Persist the cube as a directory with a JSON manifest plus value
    /// slices in the chosen storage.
    pub fn save(&self, dir: impl AsRef<Path>, storage: CubeStorage) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
        let manifest = CubeManifest {
            format_version: CUBE_FORMAT_VERSION.into(),
            storage: match storage {
                CubeStorage::Binary => "f64le".into(),
                CubeStorage::Csv => "csv".into(),
            },
            node_ids: self.node_ids.clone(),
            metric_ids: self.metric_ids.clone(),
            timestamps: self.timestamps.clone(),
            normalization: self.normalization.clone(),
            has_mask: self.mask.is_some(),
        };
        let manifest_path = dir.join("manifest.json");
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)?)
            .map_err(Error::io(&manifest_path))?;
        match storage {
            CubeStorage::Binary => {
                let mut bytes =
                    Vec::with_capacity(self.n_steps() * self.n_nodes() * self.n_metrics() * 8);
                for t in 0..self.n_steps() {
                    for ni in 0..self.n_nodes() {
                        for mi in 0..self.n_metrics() {
                            bytes.extend_from_slice(&self.values[t][(ni, mi)].to_le_bytes());
                        }
                    }
                }
                let p = dir.join("values.bin");
                fs::write(&p, bytes).map_err(Error::io(&p))?;
                if let Some(mask) = &self.mask {
                    let mut bytes = Vec::new();
                    for t in 0..self.n_steps() {
                        for ni in 0..self.n_nodes() {
                            for mi in 0..self.n_metrics() {
                                bytes.push(mask[t][(ni, mi)] as u8);
                            }
                        }
                    }
                    let p = dir.join("mask.bin");
                    fs::write(&p, bytes).map_err(Error::io(&p))?;
                }
            }
            CubeStorage::Csv => {
                let slices = dir.join("slices");
                fs::create_dir_all(&slices).map_err(Error::io(&slices))?;
                for t in 0..self.n_steps() {
                    write_matrix_csv(&slices.join(format!("t{t}.csv")), &self.values[t])?;
                }
                if let Some(mask) = &self.mask {
                    let mdir = dir.join("mask");
                    fs::create_dir_all(&mdir).map_err(Error::io(&mdir))?;
                    for t in 0..self.n_steps() {
                        let as_f64 =
                            DMatrix::from_fn(mask[t].nrows(), mask[t].ncols(), |r, c| {
                                mask[t][(r, c)] as u8 as f64
                            });
                        write_matrix_csv(&mdir.join(format!("t{t}.csv")), &as_f64)?;
                    }
                }
            }
        }
        Ok(())
    }

    /// Load a cube previously written by [`UsageCube::save`].
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let manifest_path = dir.join("manifest.json");
        let text = fs::read_to_string(&manifest_path).map_err(Error::io(&manifest_path))?;
        let manifest: CubeManifest = serde_json::from_str(&text)?;
        if manifest.format_version != CUBE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported cube format version {:?}",
                manifest.format_version
            )));
        }
        let (n, m, t) = (
            manifest.node_ids.len(),
            manifest.metric_ids.len(),
            manifest.timestamps.len(),
        );
        let (values, mask) = match manifest.storage.as_str() {
            "f64le" => {
                let p = dir.join("values.bin");
                let bytes = fs::read(&p).map_err(Error::io(&p))?;
                if bytes.len() != n * m * t * 8 {
                    return Err(Error::Format(format!(
                        "values.bin holds {} bytes, expected {}",
                        bytes.len(),
                        n * m * t * 8
                    )));
                }
                let mut values = Vec::with_capacity(t);
                let mut off = 0;
                for _ in 0..t {
                    let mut slice = DMatrix::zeros(n, m);
                    for ni in 0..n {
                        for mi in 0..m {
                            let raw: [u8; 8] = bytes[off..off + 8].try_into().unwrap();
                            slice[(ni, mi)] = f64::from_le_bytes(raw);
                            off += 8;
                        }
                    }
                    values.push(slice);
                }
                let mask = if manifest.has_mask {
                    let p = dir.join("mask.bin");
                    let bytes = fs::read(&p).map_err(Error::io(&p))?;
                    if bytes.len() != n * m * t {
                        return Err(Error::Format(format!(
                            "mask.bin holds {} bytes, expected {}",
                            bytes.len(),
                            n * m * t
                        )));
                    }
                    let mut mask = Vec::with_capacity(t);
                    let mut off = 0;
                    for _ in 0..t {
                        let mut slice = DMatrix::from_element(n, m, false);
                        for ni in 0..n {
                            for mi in 0..m {
                                slice[(ni, mi)] = bytes[off] != 0;
                                off += 1;
                            }
                        }
                        mask.push(slice);
                    }
                    Some(mask)
                } else {
                    None
                };
                (values, mask)
            }
            "csv" => {
                let mut values = Vec::with_capacity(t);
                for ti in 0..t {
                    values.push(read_matrix_csv(
                        &dir.join("slices").join(format!("t{ti}.csv")),
                        n,
                        m,
                    )?);
                }
                let mask = if manifest.has_mask {
                    let mut mask = Vec::with_capacity(t);
                    for ti in 0..t {
                        let raw =
                            read_matrix_csv(&dir.join("mask").join(format!("t{ti}.csv")), n, m)?;
                        mask.push(DMatrix::from_fn(n, m, |r, c| raw[(r, c)] != 0.0));
                    }
                    Some(mask)
                } else {
                    None
                };
                (values, mask)
            }
            other => {
                return Err(Error::Format(format!("unknown cube storage {other:?}")));
            }
        };
        let mut cube = UsageCube::new(
            manifest.node_ids,
            manifest.metric_ids,
            manifest.timestamps,
            values,
            mask,
        )?;
        cube.normalization = manifest.normalization;
        Ok(cube)
    }
}

/// Indices of `labels` sorted by label value.
pub(crate) fn label_order(labels: &[String]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| labels[a].cmp(&labels[b]));
    order
}

struct Cell {
    timestamp: i64,
    node: String,
    metric: String,
    value: f64,
}

fn open_csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(Error::io(path))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(file))
}

fn record_line(record: &csv::StringRecord) -> usize {
    record.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn csv_error_line(err: &csv::Error) -> usize {
    err.position().map(|p| p.line() as usize).unwrap_or(0)
}

fn parse_long_csv(path: &Path) -> Result<Vec<Cell>> {
    let mut reader = open_csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::malformed(path, 1, e.to_string()))?
        .clone();
    let expected = ["timestamp", "node", "metric", "value"];
    if headers.iter().map(str::trim).ne(expected) {
        return Err(Error::malformed(
            path,
            1,
            format!("expected header `timestamp,node,metric,value`, found {headers:?}"),
        ));
    }
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::malformed(path, csv_error_line(&e), e.to_string()))?;
        let line = record_line(&record);
        let timestamp: i64 = record[0]
            .trim()
            .parse()
            .map_err(|e| Error::malformed(path, line, format!("bad timestamp: {e}")))?;
        let node = record[1].to_string();
        let metric = record[2].to_string();
        validate_label("node", &node).map_err(|e| Error::malformed(path, line, e.to_string()))?;
        validate_label("metric", &metric)
            .map_err(|e| Error::malformed(path, line, e.to_string()))?;
        let value: f64 = record[3]
            .trim()
            .parse()
            .map_err(|e| Error::malformed(path, line, format!("bad value: {e}")))?;
        if !value.is_finite() {
            return Err(Error::malformed(path, line, "non-finite value"));
        }
        cells.push(Cell {
            timestamp,
            node,
            metric,
            value,
        });
    }
    Ok(cells)
}

fn parse_wide_csv(path: &Path) -> Result<Vec<Cell>> {
    let mut reader = open_csv_reader(path)?;
    let headers = reader
        .headers()
        .map_err(|e| Error::malformed(path, 1, e.to_string()))?
        .clone();
    let fields: Vec<String> = headers.iter().map(|h| h.trim().to_string()).collect();
    if fields.len() < 3 || fields[0] != "timestamp" || fields[1] != "node" {
        return Err(Error::malformed(
            path,
            1,
            format!("expected header `timestamp,node,<metric>,...`, found {headers:?}"),
        ));
    }
    let metrics = &fields[2..];
    for m in metrics {
        validate_label("metric", m).map_err(|e| Error::malformed(path, 1, e.to_string()))?;
    }
    {
        let mut seen = std::collections::HashSet::new();
        for m in metrics {
            if !seen.insert(m) {
                return Err(Error::malformed(path, 1, format!("duplicate metric column {m:?}")));
            }
        }
    }
    let mut cells = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::malformed(path, csv_error_line(&e), e.to_string()))?;
        let line = record_line(&record);
        let timestamp: i64 = record[0]
            .trim()
            .parse()
            .map_err(|e| Error::malformed(path, line, format!("bad timestamp: {e}")))?;
        let node = record[1].to_string();
        validate_label("node", &node).map_err(|e| Error::malformed(path, line, e.to_string()))?;
        for (mi, metric) in metrics.iter().enumerate() {
            let field = record[2 + mi].trim();
            if field.is_empty() {
                // An empty field is an absent cell, handled by the policy.
                continue;
            }
            let value: f64 = field
                .parse()
                .map_err(|e| Error::malformed(path, line, format!("bad value: {e}")))?;
            if !value.is_finite() {
                return Err(Error::malformed(path, line, "non-finite value"));
            }
            cells.push(Cell {
                timestamp,
                node: node.clone(),
                metric: metric.clone(),
                value,
            });
        }
    }
    Ok(cells)
}

fn assemble(path: &Path, cells: Vec<Cell>, policy: MissingPolicy) -> Result<UsageCube> {
    if cells.is_empty() {
        return Err(Error::EmptyInput(path.display().to_string()));
    }
    let mut node_ids: Vec<String> = cells.iter().map(|c| c.node.clone()).collect();
    node_ids.sort();
    node_ids.dedup();
    let mut metric_ids: Vec<String> = cells.iter().map(|c| c.metric.clone()).collect();
    metric_ids.sort();
    metric_ids.dedup();
    let mut timestamps: Vec<i64> = cells.iter().map(|c| c.timestamp).collect();
    timestamps.sort_unstable();
    timestamps.dedup();

    let node_idx: HashMap<&str, usize> = node_ids
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let metric_idx: HashMap<&str, usize> = metric_ids
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let time_idx: HashMap<i64, usize> = timestamps.iter().enumerate().map(|(i, &t)| (t, i)).collect();

    let (n, m, t) = (node_ids.len(), metric_ids.len(), timestamps.len());
    let mut values = vec![DMatrix::zeros(n, m); t];
    let mut seen = vec![DMatrix::from_element(n, m, false); t];
    for cell in &cells {
        let ni = node_idx[cell.node.as_str()];
        let mi = metric_idx[cell.metric.as_str()];
        let ti = time_idx[&cell.timestamp];
        if seen[ti][(ni, mi)] {
            return Err(Error::DuplicateCell {
                node: cell.node.clone(),
                metric: cell.metric.clone(),
                timestamp: cell.timestamp,
            });
        }
        seen[ti][(ni, mi)] = true;
        values[ti][(ni, mi)] = cell.value;
    }

    let complete = seen.iter().all(|s| s.iter().all(|&b| b));
    let mask = if complete {
        None
    } else {
        match policy {
            MissingPolicy::Reject => {
                // Deterministic: report the first hole in t-major order.
                for ti in 0..t {
                    for ni in 0..n {
                        for mi in 0..m {
                            if !seen[ti][(ni, mi)] {
                                return Err(Error::MissingCell {
                                    node: node_ids[ni].clone(),
                                    metric: metric_ids[mi].clone(),
                                    timestamp: timestamps[ti],
                                });
                            }
                        }
                    }
                }
                unreachable!("incomplete grid must contain a hole");
            }
            MissingPolicy::ImputeZero => Some(seen),
        }
    };
    UsageCube::new(node_ids, metric_ids, timestamps, values, mask)
}
