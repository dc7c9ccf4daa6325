//! Per-node, per-timestep anomaly scores and their alignment with externally
//! observed error events.
//!
//! The score of node `n` at timestep `t` is the mean absolute reconstruction
//! residual over that node's observed metrics. Flagging is threshold-based
//! (quantile or z-score over all scores) and intentionally strict: a score
//! equal to the threshold is not flagged, so a degenerate all-equal score
//! distribution flags nothing.

use std::collections::HashSet;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;

use crate::cube::{label_order, UsageCube};
use crate::error::{Error, Result};
use crate::model::LatentModel;
use crate::stats::{pop_mean_std, quantile_sorted};

/// Scores for every (timestep, node) cell, plus optional flags once a
/// threshold has been chosen.
#[derive(Clone, Debug, PartialEq)]
pub struct AnomalyScoreSeries {
    node_ids: Vec<String>,
    timestamps: Vec<i64>,
    scores: DMatrix<f64>, // T×N
    threshold: Option<f64>,
    flags: Option<DMatrix<bool>>, // T×N
    unscorable: Vec<(usize, usize)>, // (t, n) cells with no observed metric
}

impl AnomalyScoreSeries {
    /// Wrap a T×N score matrix, checking shape and that every score is
    /// finite and non-negative.
    pub fn new(node_ids: Vec<String>, timestamps: Vec<i64>, scores: DMatrix<f64>) -> Result<Self> {
        if scores.nrows() != timestamps.len() || scores.ncols() != node_ids.len() {
            return Err(Error::DimensionMismatch(format!(
                "scores are {}×{}, expected {}×{}",
                scores.nrows(),
                scores.ncols(),
                timestamps.len(),
                node_ids.len()
            )));
        }
        if node_ids.is_empty() || timestamps.is_empty() {
            return Err(Error::DimensionMismatch("empty score series".into()));
        }
        if let Some(bad) = scores.iter().find(|s| !s.is_finite() || **s < 0.0) {
            return Err(Error::InvalidConfig(format!(
                "scores must be finite and ≥ 0, got {bad}"
            )));
        }
        Ok(AnomalyScoreSeries {
            node_ids,
            timestamps,
            scores,
            threshold: None,
            flags: None,
            unscorable: Vec::new(),
        })
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn n_steps(&self) -> usize {
        self.timestamps.len()
    }

    /// The T×N score matrix.
    pub fn scores(&self) -> &DMatrix<f64> {
        &self.scores
    }

    pub fn score(&self, t: usize, n: usize) -> f64 {
        self.scores[(t, n)]
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn flags(&self) -> Option<&DMatrix<bool>> {
        self.flags.as_ref()
    }

    pub fn is_flagged(&self, t: usize, n: usize) -> bool {
        self.flags.as_ref().map(|f| f[(t, n)]).unwrap_or(false)
    }

    /// (t, n) cells whose every metric was masked; their score is 0.
    pub fn unscorable(&self) -> &[(usize, usize)] {
        &self.unscorable
    }

    pub fn n_flagged(&self) -> usize {
        self.flags
            .as_ref()
            .map(|f| f.iter().filter(|&&b| b).count())
            .unwrap_or(0)
    }

    /// Choose a threshold over all scores and fill the flags with the strict
    /// rule `score > threshold`.
    pub fn flag(mut self, method: FlagMethod) -> Result<Self> {
        let threshold = match method {
            FlagMethod::Quantile(q) => {
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "quantile must lie in (0, 1), got {q}"
                    )));
                }
                let mut sorted: Vec<f64> = self.scores.iter().copied().collect();
                sorted.sort_by(|a, b| a.partial_cmp(b).expect("scores are finite"));
                quantile_sorted(&sorted, q)
            }
            FlagMethod::ZScore(k) => {
                if !(k > 0.0) {
                    return Err(Error::InvalidConfig(format!(
                        "z-score multiplier must be > 0, got {k}"
                    )));
                }
                let (mean, std) = pop_mean_std(self.scores.iter().copied());
                mean + k * std
            }
        };
        let flags = self.scores.map(|s| s > threshold);
        self.threshold = Some(threshold);
        self.flags = Some(flags);
        Ok(self)
    }

    /// Write the series as CSV with header `timestamp,node,score,flag`,
    /// sorted by timestamp then node label. Without flags the flag column is
    /// empty.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let order = label_order(&self.node_ids);
        let mut out = String::from("timestamp,node,score,flag\n");
        for (t, &ts) in self.timestamps.iter().enumerate() {
            for &n in &order {
                let flag = match &self.flags {
                    Some(f) => {
                        if f[(t, n)] {
                            "true"
                        } else {
                            "false"
                        }
                    }
                    None => "",
                };
                out.push_str(&format!(
                    "{ts},{},{},{flag}\n",
                    self.node_ids[n],
                    self.scores[(t, n)]
                ));
            }
        }
        let mut file = fs::File::create(path).map_err(Error::io(path))?;
        file.write_all(out.as_bytes()).map_err(Error::io(path))?;
        Ok(())
    }

    /// Read a series written by [`AnomalyScoreSeries::save_csv`]. When flags
    /// are present the threshold is reconstructed as the largest unflagged
    /// score, which reproduces the flags under the strict `>` rule.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(Error::io(path))?;
        let mut reader = csv::ReaderBuilder::new().from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| Error::malformed(path, 1, e.to_string()))?
            .clone();
        if headers.iter().map(str::trim).ne(["timestamp", "node", "score", "flag"]) {
            return Err(Error::malformed(
                path,
                1,
                format!("expected header `timestamp,node,score,flag`, found {headers:?}"),
            ));
        }
        struct Row {
            ts: i64,
            node: String,
            score: f64,
            flag: Option<bool>,
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record
                .map_err(|e| Error::malformed(path, e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string()))?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            let ts: i64 = record[0]
                .trim()
                .parse()
                .map_err(|e| Error::malformed(path, line, format!("bad timestamp: {e}")))?;
            let score: f64 = record[2]
                .trim()
                .parse()
                .map_err(|e| Error::malformed(path, line, format!("bad score: {e}")))?;
            let flag = match record[3].trim() {
                "" => None,
                "true" => Some(true),
                "false" => Some(false),
                other => {
                    return Err(Error::malformed(path, line, format!("bad flag {other:?}")));
                }
            };
            rows.push(Row {
                ts,
                node: record[1].to_string(),
                score,
                flag,
            });
        }
        if rows.is_empty() {
            return Err(Error::EmptyInput(path.display().to_string()));
        }
        let mut node_ids: Vec<String> = rows.iter().map(|r| r.node.clone()).collect();
        node_ids.sort();
        node_ids.dedup();
        let mut timestamps: Vec<i64> = rows.iter().map(|r| r.ts).collect();
        timestamps.sort_unstable();
        timestamps.dedup();
        let (t_len, n_len) = (timestamps.len(), node_ids.len());
        let mut scores = DMatrix::zeros(t_len, n_len);
        let mut flags = DMatrix::from_element(t_len, n_len, false);
        let mut seen = DMatrix::from_element(t_len, n_len, false);
        let mut any_flag_field = false;
        let mut all_flag_fields = true;
        for row in &rows {
            let t = timestamps.binary_search(&row.ts).expect("timestamp present");
            let n = node_ids.binary_search(&row.node).expect("node present");
            if seen[(t, n)] {
                return Err(Error::DuplicateCell {
                    node: row.node.clone(),
                    metric: "score".into(),
                    timestamp: row.ts,
                });
            }
            seen[(t, n)] = true;
            scores[(t, n)] = row.score;
            match row.flag {
                Some(f) => {
                    flags[(t, n)] = f;
                    any_flag_field = true;
                }
                None => all_flag_fields = false,
            }
        }
        if !seen.iter().all(|&b| b) {
            return Err(Error::Format(format!(
                "{} is not a complete timestamp×node grid",
                path.display()
            )));
        }
        if any_flag_field && !all_flag_fields {
            return Err(Error::Format(format!(
                "{} mixes flagged and unflagged rows",
                path.display()
            )));
        }
        let mut series = AnomalyScoreSeries::new(node_ids, timestamps, scores)?;
        if any_flag_field {
            let unflagged_max = series
                .scores
                .iter()
                .zip(flags.iter())
                .filter(|(_, &f)| !f)
                .map(|(&s, _)| s)
                .fold(f64::NEG_INFINITY, f64::max);
            let threshold = if unflagged_max.is_finite() {
                unflagged_max
            } else {
                // Everything flagged: any value below the minimum works.
                series.scores.min() - 1.0
            };
            series.threshold = Some(threshold);
            series.flags = Some(flags);
        }
        Ok(series)
    }
}

/// Threshold selection rule for [`AnomalyScoreSeries::flag`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FlagMethod {
    /// Threshold at the q-th quantile of all scores (linear interpolation).
    Quantile(f64),
    /// Threshold at mean + k·std of all scores.
    ZScore(f64),
}

impl std::str::FromStr for FlagMethod {
    type Err = Error;

    /// Parses `quantile:0.99` or `zscore:3`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, value) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidConfig(format!("expected method:value, got {s:?}")))?;
        let value: f64 = value
            .parse()
            .map_err(|e| Error::InvalidConfig(format!("bad flag parameter {value:?}: {e}")))?;
        match name {
            "quantile" => Ok(FlagMethod::Quantile(value)),
            "zscore" => Ok(FlagMethod::ZScore(value)),
            other => Err(Error::InvalidConfig(format!(
                "unknown flag method {other:?} (expected quantile or zscore)"
            ))),
        }
    }
}

/// Mean absolute residual per (timestep, node) over observed metrics.
///
/// A cell whose metrics are all masked gets score 0 and is listed in
/// [`AnomalyScoreSeries::unscorable`].
pub fn score(model: &LatentModel, cube: &UsageCube) -> Result<AnomalyScoreSeries> {
    if model.n_nodes() != cube.n_nodes()
        || model.n_metrics() != cube.n_metrics()
        || model.n_steps() != cube.n_steps()
    {
        return Err(Error::DimensionMismatch(format!(
            "model is {}×{}×{}, cube is {}×{}×{}",
            model.n_nodes(),
            model.n_metrics(),
            model.n_steps(),
            cube.n_nodes(),
            cube.n_metrics(),
            cube.n_steps()
        )));
    }
    let (t_len, n_len, m_len) = (cube.n_steps(), cube.n_nodes(), cube.n_metrics());
    let mut scores = DMatrix::zeros(t_len, n_len);
    let mut unscorable = Vec::new();
    for t in 0..t_len {
        let recon = model.reconstruct_slice(t)?;
        for n in 0..n_len {
            let mut sum = 0.0;
            let mut count = 0usize;
            for m in 0..m_len {
                if cube.is_observed(n, m, t) {
                    sum += (cube.value(n, m, t) - recon[(n, m)]).abs();
                    count += 1;
                }
            }
            if count > 0 {
                scores[(t, n)] = sum / count as f64;
            } else {
                unscorable.push((t, n));
            }
        }
    }
    let mut series = AnomalyScoreSeries::new(
        cube.node_ids().to_vec(),
        cube.timestamps().to_vec(),
        scores,
    )?;
    series.unscorable = unscorable;
    Ok(series)
}

/// Kinds of error events extracted upstream from system logs.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ErrorType {
    WriteError,
    Segfault,
    InodeError,
    Other(String),
}

impl ErrorType {
    pub fn parse(s: &str) -> ErrorType {
        match s {
            "write_error" => ErrorType::WriteError,
            "segfault" => ErrorType::Segfault,
            "inode_error" => ErrorType::InodeError,
            other => ErrorType::Other(other.to_string()),
        }
    }
}

impl std::fmt::Display for ErrorType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ErrorType::WriteError => write!(f, "write_error"),
            ErrorType::Segfault => write!(f, "segfault"),
            ErrorType::InodeError => write!(f, "inode_error"),
            ErrorType::Other(label) => write!(f, "{label}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventRecord {
    pub node_id: String,
    pub timestamp: i64,
    pub error_type: ErrorType,
}

/// Externally supplied (node, timestamp, error-type) records.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EventLog {
    pub records: Vec<EventRecord>,
}

impl EventLog {
    /// Read a CSV with header `timestamp,node,error_type`.
    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(Error::io(path))?;
        let mut reader = csv::ReaderBuilder::new().from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| Error::malformed(path, 1, e.to_string()))?
            .clone();
        if headers.iter().map(str::trim).ne(["timestamp", "node", "error_type"]) {
            return Err(Error::malformed(
                path,
                1,
                format!("expected header `timestamp,node,error_type`, found {headers:?}"),
            ));
        }
        let mut records = Vec::new();
        for record in reader.records() {
            let record = record
                .map_err(|e| Error::malformed(path, e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string()))?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            let timestamp: i64 = record[0]
                .trim()
                .parse()
                .map_err(|e| Error::malformed(path, line, format!("bad timestamp: {e}")))?;
            records.push(EventRecord {
                node_id: record[1].to_string(),
                timestamp,
                error_type: ErrorType::parse(record[2].trim()),
            });
        }
        Ok(EventLog { records })
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("timestamp,node,error_type\n");
        let mut sorted: Vec<&EventRecord> = self.records.iter().collect();
        sorted.sort_by(|a, b| (a.timestamp, &a.node_id).cmp(&(b.timestamp, &b.node_id)));
        for r in sorted {
            out.push_str(&format!("{},{},{}\n", r.timestamp, r.node_id, r.error_type));
        }
        let mut file = fs::File::create(path).map_err(Error::io(path))?;
        file.write_all(out.as_bytes()).map_err(Error::io(path))?;
        Ok(())
    }
}

/// A score timestep falling inside an event's window.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchedStep {
    pub t_index: usize,
    pub timestamp: i64,
    pub score: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventAlignment {
    pub record: EventRecord,
    pub node_index: usize,
    pub matches: Vec<MatchedStep>,
    pub co_occurs: bool,
}

/// Per-error-type aggregate of the alignment.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeSummary {
    pub error_type: ErrorType,
    pub events: usize,
    pub co_occurrence_rate: f64,
    /// Distinct (t, n) cells inside any of this type's event windows.
    pub adjacent_cells: usize,
    pub adjacent_mean_score: f64,
    pub background_mean_score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentReport {
    pub window_seconds: i64,
    pub events: Vec<EventAlignment>,
    /// Events whose node label is not present in the score series.
    pub unresolved: Vec<EventRecord>,
    pub per_type: Vec<TypeSummary>,
    /// Fraction of all cells that are flagged.
    pub flagged_fraction: f64,
    /// Fraction of all (node, t) cells whose ±window neighborhood at that
    /// node contains at least one flag — the co-occurrence rate an event
    /// placed uniformly at random would see.
    pub background_co_occurrence_rate: f64,
}

/// For each event, find the score timesteps within ±`window_seconds` at the
/// event's node (inclusive on both ends) and whether a flag co-occurs.
///
/// Requires flagged scores; flag first.
pub fn align_events(
    scores: &AnomalyScoreSeries,
    events: &EventLog,
    window_seconds: i64,
) -> Result<AlignmentReport> {
    if window_seconds <= 0 {
        return Err(Error::InvalidConfig(format!(
            "window must be positive, got {window_seconds}"
        )));
    }
    if scores.flags.is_none() {
        return Err(Error::InvalidConfig(
            "event alignment needs flagged scores; apply a flag method first".into(),
        ));
    }
    let timestamps = scores.timestamps();
    let window_range = |ts: i64| {
        let lo = timestamps.partition_point(|&t| t < ts - window_seconds);
        let hi = timestamps.partition_point(|&t| t <= ts + window_seconds);
        lo..hi
    };

    let mut aligned = Vec::new();
    let mut unresolved = Vec::new();
    for record in &events.records {
        let Some(node_index) = scores.node_ids.iter().position(|l| l == &record.node_id) else {
            unresolved.push(record.clone());
            continue;
        };
        let matches: Vec<MatchedStep> = window_range(record.timestamp)
            .map(|t| MatchedStep {
                t_index: t,
                timestamp: timestamps[t],
                score: scores.score(t, node_index),
                flagged: scores.is_flagged(t, node_index),
            })
            .collect();
        let co_occurs = matches.iter().any(|m| m.flagged);
        aligned.push(EventAlignment {
            record: record.clone(),
            node_index,
            matches,
            co_occurs,
        });
    }

    // Per-type summaries over the resolved events.
    let mut types: Vec<ErrorType> = Vec::new();
    for ev in &aligned {
        if !types.contains(&ev.record.error_type) {
            types.push(ev.record.error_type.clone());
        }
    }
    let total_cells = scores.n_steps() * scores.n_nodes();
    let mut per_type = Vec::new();
    for ty in types {
        let of_type: Vec<&EventAlignment> =
            aligned.iter().filter(|e| e.record.error_type == ty).collect();
        let co = of_type.iter().filter(|e| e.co_occurs).count();
        let mut adjacent: HashSet<(usize, usize)> = HashSet::new();
        for ev in &of_type {
            for m in &ev.matches {
                adjacent.insert((m.t_index, ev.node_index));
            }
        }
        let mut adj_sum = 0.0;
        let mut bg_sum = 0.0;
        let mut bg_count = 0usize;
        for t in 0..scores.n_steps() {
            for n in 0..scores.n_nodes() {
                if adjacent.contains(&(t, n)) {
                    adj_sum += scores.score(t, n);
                } else {
                    bg_sum += scores.score(t, n);
                    bg_count += 1;
                }
            }
        }
        per_type.push(TypeSummary {
            error_type: ty,
            events: of_type.len(),
            co_occurrence_rate: co as f64 / of_type.len() as f64,
            adjacent_cells: adjacent.len(),
            adjacent_mean_score: if adjacent.is_empty() {
                0.0
            } else {
                adj_sum / adjacent.len() as f64
            },
            background_mean_score: if bg_count == 0 {
                0.0
            } else {
                bg_sum / bg_count as f64
            },
        });
    }

    let flagged_fraction = scores.n_flagged() as f64 / total_cells as f64;
    let mut neighborhoods_with_flag = 0usize;
    for n in 0..scores.n_nodes() {
        for t in 0..scores.n_steps() {
            let any = window_range(timestamps[t]).any(|tt| scores.is_flagged(tt, n));
            if any {
                neighborhoods_with_flag += 1;
            }
        }
    }
    Ok(AlignmentReport {
        window_seconds,
        events: aligned,
        unresolved,
        per_type,
        flagged_fraction,
        background_co_occurrence_rate: neighborhoods_with_flag as f64 / total_cells as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{cube_from_model, labels, random_model};

    fn series_from(scores: Vec<f64>, t_len: usize, n_len: usize) -> AnomalyScoreSeries {
        AnomalyScoreSeries::new(
            labels("n", n_len),
            (0..t_len as i64).map(|i| i * 600).collect(),
            DMatrix::from_row_slice(t_len, n_len, &scores),
        )
        .unwrap()
    }

    #[test]
    fn perfect_fit_scores_zero() {
        let model = random_model(3, 4, 2, 2, 1);
        let cube = cube_from_model(&model, 0.0, 0);
        let series = score(&model, &cube).unwrap();
        assert!(series.scores().iter().all(|&s| s < 1e-12));
    }

    #[test]
    fn score_is_the_mean_absolute_residual() {
        // One node, three metrics, residuals exactly [1, 2, 3].
        let model = crate::testutil::tiny_model(
            1,
            3,
            1,
            1,
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(3, 1, 0.0),
            vec![DMatrix::from_element(1, 1, 1.0)],
        );
        let cube = crate::cube::UsageCube::new(
            model.node_ids().to_vec(),
            model.metric_ids().to_vec(),
            model.timestamps().to_vec(),
            vec![DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 3.0])],
            None,
        )
        .unwrap();
        let series = score(&model, &cube).unwrap();
        assert!((series.score(0, 0) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn score_matches_cell_loop_oracle() {
        let model = random_model(4, 5, 3, 2, 2);
        let data = random_model(4, 5, 3, 2, 3);
        let cube = cube_from_model(&data, 0.0, 0);
        let series = score(&model, &cube).unwrap();
        for t in 0..3 {
            for n in 0..4 {
                let mut sum = 0.0;
                for m in 0..5 {
                    sum += (cube.value(n, m, t) - model.reconstruct_cell(n, m, t).unwrap()).abs();
                }
                assert!((series.score(t, n) - sum / 5.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn score_is_invariant_to_factor_rescaling() {
        let model = random_model(3, 4, 2, 2, 4);
        let data = random_model(3, 4, 2, 2, 5);
        let cube = cube_from_model(&data, 0.0, 0);
        // Scale ū coordinate-wise by c and û by 1/c: the product is unchanged.
        let c = [2.5, -0.4];
        let mut u_bar = model.u_bar().clone();
        let mut u_hat: Vec<DMatrix<f64>> = model.u_hat_slices().to_vec();
        for k in 0..2 {
            for n in 0..3 {
                u_bar[(n, k)] *= c[k];
                for slice in u_hat.iter_mut() {
                    slice[(n, k)] /= c[k];
                }
            }
        }
        let rescaled = crate::model::LatentModel::new(
            model.node_ids().to_vec(),
            model.metric_ids().to_vec(),
            model.timestamps().to_vec(),
            u_bar,
            model.v().clone(),
            u_hat,
        )
        .unwrap();
        let a = score(&model, &cube).unwrap();
        let b = score(&rescaled, &cube).unwrap();
        assert!((a.scores() - b.scores()).norm() < 1e-9);
    }

    #[test]
    fn fully_masked_cell_is_unscorable() {
        let model = random_model(2, 2, 2, 1, 6);
        let base = cube_from_model(&model, 0.0, 0);
        let mut mask = vec![DMatrix::from_element(2, 2, true); 2];
        mask[1][(0, 0)] = false;
        mask[1][(0, 1)] = false;
        let cube = crate::cube::UsageCube::new(
            base.node_ids().to_vec(),
            base.metric_ids().to_vec(),
            base.timestamps().to_vec(),
            (0..2).map(|t| base.slice(t).clone()).collect(),
            Some(mask),
        )
        .unwrap();
        let series = score(&model, &cube).unwrap();
        assert_eq!(series.unscorable(), &[(1, 0)]);
        assert_eq!(series.score(1, 0), 0.0);
    }

    #[test]
    fn degenerate_distribution_flags_nothing() {
        let series = series_from(vec![3.0; 12], 3, 4);
        let flagged = series.flag(FlagMethod::Quantile(0.99)).unwrap();
        assert_eq!(flagged.n_flagged(), 0);
        assert_eq!(flagged.threshold(), Some(3.0));
    }

    #[test]
    fn single_hot_cell_is_flagged_by_high_quantile() {
        let mut scores = vec![0.0; 1000];
        scores[777] = 10.0;
        let series = series_from(scores, 100, 10);
        let flagged = series.flag(FlagMethod::Quantile(0.995)).unwrap();
        assert_eq!(flagged.n_flagged(), 1);
        assert!(flagged.is_flagged(77, 7));
    }

    #[test]
    fn lower_quantile_flags_a_superset() {
        let model = random_model(5, 4, 10, 2, 7);
        let data = random_model(5, 4, 10, 2, 8);
        let cube = cube_from_model(&data, 0.0, 0);
        let base = score(&model, &cube).unwrap();
        let loose = base.clone().flag(FlagMethod::Quantile(0.7)).unwrap();
        let tight = base.flag(FlagMethod::Quantile(0.95)).unwrap();
        for t in 0..10 {
            for n in 0..5 {
                if tight.is_flagged(t, n) {
                    assert!(loose.is_flagged(t, n));
                }
            }
        }
        assert!(loose.n_flagged() >= tight.n_flagged());
    }

    #[test]
    fn zscore_threshold_is_mean_plus_k_std() {
        let series = series_from(vec![1.0, 2.0, 3.0, 4.0], 2, 2);
        let flagged = series.flag(FlagMethod::ZScore(1.0)).unwrap();
        let (mean, std) = pop_mean_std([1.0, 2.0, 3.0, 4.0].into_iter());
        assert!((flagged.threshold().unwrap() - (mean + std)).abs() < 1e-12);
    }

    #[test]
    fn invalid_flag_parameters_are_rejected() {
        let series = series_from(vec![0.0; 4], 2, 2);
        assert!(series.clone().flag(FlagMethod::Quantile(0.0)).is_err());
        assert!(series.clone().flag(FlagMethod::Quantile(1.0)).is_err());
        assert!(series.flag(FlagMethod::ZScore(0.0)).is_err());
    }

    #[test]
    fn flag_method_parses() {
        assert_eq!(
            "quantile:0.99".parse::<FlagMethod>().unwrap(),
            FlagMethod::Quantile(0.99)
        );
        assert_eq!(
            "zscore:3".parse::<FlagMethod>().unwrap(),
            FlagMethod::ZScore(3.0)
        );
        assert!("best-effort:1".parse::<FlagMethod>().is_err());
        assert!("quantile".parse::<FlagMethod>().is_err());
    }

    #[test]
    fn scores_csv_round_trip() {
        let model = random_model(3, 4, 4, 2, 9);
        let data = random_model(3, 4, 4, 2, 10);
        let cube = cube_from_model(&data, 0.0, 0);
        let series = score(&model, &cube)
            .unwrap()
            .flag(FlagMethod::Quantile(0.9))
            .unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        series.save_csv(file.path()).unwrap();
        let back = AnomalyScoreSeries::load_csv(file.path()).unwrap();
        assert_eq!(back.scores(), series.scores());
        assert_eq!(back.flags(), series.flags());
        assert_eq!(back.node_ids(), series.node_ids());
        // The reconstructed threshold reproduces the same flags.
        let re = AnomalyScoreSeries::new(
            back.node_ids().to_vec(),
            back.timestamps().to_vec(),
            back.scores().clone(),
        )
        .unwrap();
        let reflagged = re
            .flag(FlagMethod::Quantile(0.9))
            .unwrap();
        assert_eq!(reflagged.flags(), series.flags());
    }

    fn flagged_series_with_hot_cell() -> AnomalyScoreSeries {
        // 5 timesteps × 2 nodes, flag only (t=2, n=0).
        let mut scores = vec![0.1; 10];
        scores[2 * 2] = 5.0;
        series_from(scores, 5, 2)
            .flag(FlagMethod::Quantile(0.9))
            .unwrap()
    }

    #[test]
    fn event_at_flagged_cell_co_occurs() {
        let series = flagged_series_with_hot_cell();
        let events = EventLog {
            records: vec![EventRecord {
                node_id: "n000".into(),
                timestamp: 1200, // exactly t=2
                error_type: ErrorType::Segfault,
            }],
        };
        let report = align_events(&series, &events, 600).unwrap();
        assert!(report.events[0].co_occurs);
        assert_eq!(report.per_type[0].co_occurrence_rate, 1.0);
    }

    #[test]
    fn window_boundary_is_inclusive() {
        let series = flagged_series_with_hot_cell();
        // Timestep boundary at t=2 is 1200; event at 1799 is 599 s after,
        // event at 1801 is 601 s after.
        for (ts, include) in [(1799, true), (1801, false)] {
            let events = EventLog {
                records: vec![EventRecord {
                    node_id: "n000".into(),
                    timestamp: ts,
                    error_type: ErrorType::InodeError,
                }],
            };
            let report = align_events(&series, &events, 600).unwrap();
            let hit = report.events[0].matches.iter().any(|m| m.t_index == 2);
            assert_eq!(hit, include, "ts={ts}");
        }
    }

    #[test]
    fn unknown_node_is_collected_not_dropped() {
        let series = flagged_series_with_hot_cell();
        let events = EventLog {
            records: vec![EventRecord {
                node_id: "ghost".into(),
                timestamp: 1200,
                error_type: ErrorType::WriteError,
            }],
        };
        let report = align_events(&series, &events, 600).unwrap();
        assert!(report.events.is_empty());
        assert_eq!(report.unresolved.len(), 1);
    }

    #[test]
    fn alignment_requires_flags_and_positive_window() {
        let series = series_from(vec![0.0; 4], 2, 2);
        let events = EventLog::default();
        assert!(align_events(&series, &events, 600).is_err());
        let flagged = series.flag(FlagMethod::Quantile(0.5)).unwrap();
        assert!(align_events(&flagged, &events, 0).is_err());
    }

    #[test]
    fn events_csv_round_trip() {
        let log = EventLog {
            records: vec![
                EventRecord {
                    node_id: "a".into(),
                    timestamp: 100,
                    error_type: ErrorType::WriteError,
                },
                EventRecord {
                    node_id: "b".into(),
                    timestamp: 50,
                    error_type: ErrorType::Other("oom".into()),
                },
            ],
        };
        let file = tempfile::NamedTempFile::new().unwrap();
        log.save_csv(file.path()).unwrap();
        let back = EventLog::load_csv(file.path()).unwrap();
        // save_csv sorts by (timestamp, node).
        assert_eq!(back.records[0].timestamp, 50);
        assert_eq!(back.records[1].error_type, ErrorType::WriteError);
        assert_eq!(back.records[0].error_type, ErrorType::Other("oom".into()));
    }

    #[test]
    fn increasing_a_residual_increases_the_score() {
        let model = random_model(2, 3, 1, 1, 11);
        let base = cube_from_model(&model, 0.0, 0);
        let mut values = vec![base.slice(0).clone()];
        values[0][(0, 1)] += 1.0;
        let bumped = crate::cube::UsageCube::new(
            base.node_ids().to_vec(),
            base.metric_ids().to_vec(),
            base.timestamps().to_vec(),
            values,
            None,
        )
        .unwrap();
        let s0 = score(&model, &base).unwrap();
        let s1 = score(&model, &bumped).unwrap();
        assert!(s1.score(0, 0) > s0.score(0, 0));
    }
}
