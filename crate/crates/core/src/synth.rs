//! Synthetic usage cubes with planted factors and labeled anomaly
//! injections, plus the metrics used to evaluate detectors against that
//! ground truth.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::anomaly::AnomalyScoreSeries;
use crate::cube::UsageCube;
use crate::error::{Error, Result};
use crate::model::LatentModel;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub mean: f64,
    pub std: f64,
}

/// Temporal profile of an injection. Both shapes add the same constant
/// offset over the chosen cells; `Spike` is meant for single-step or very
/// short ranges, `LevelShift` for sustained ones. The shape is carried into
/// the ground truth so evaluations can group by it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectionShape {
    Spike,
    LevelShift,
}

/// One planted anomaly: an additive offset of `magnitude × noise_std` on
/// the given node, metric subset, and inclusive timestep range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Injection {
    pub node: usize,
    pub start_step: usize,
    pub end_step: usize,
    pub metrics: Vec<usize>,
    /// In multiples of `noise_std`.
    pub magnitude: f64,
    pub shape: InjectionShape,
}

fn default_static() -> GaussianSpec {
    GaussianSpec { mean: 0.0, std: 1.0 }
}

fn default_metric() -> GaussianSpec {
    GaussianSpec { mean: 0.0, std: 1.0 }
}

/// Dynamic factors are drawn around 1 so they modulate the static profile
/// instead of annihilating it.
fn default_dynamic() -> GaussianSpec {
    GaussianSpec { mean: 1.0, std: 0.2 }
}

fn default_start_timestamp() -> i64 {
    1_000_000_000
}

fn default_step_seconds() -> i64 {
    600
}

/// Recipe for a synthetic cube: planted factor distributions, observation
/// noise, and anomaly injections.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_nodes: usize,
    pub n_metrics: usize,
    pub n_steps: usize,
    pub k_true: usize,
    pub noise_std: f64,
    #[serde(default = "default_static")]
    pub static_factors: GaussianSpec,
    #[serde(default = "default_metric")]
    pub metric_factors: GaussianSpec,
    #[serde(default = "default_dynamic")]
    pub dynamic_factors: GaussianSpec,
    #[serde(default)]
    pub injections: Vec<Injection>,
    pub seed: u64,
    #[serde(default = "default_start_timestamp")]
    pub start_timestamp: i64,
    #[serde(default = "default_step_seconds")]
    pub step_seconds: i64,
}

impl SynthSpec {
    /// The benchmark used throughout the test suites: a 50×20×200 cube from
    /// 5 planted dimensions with 0.1σ noise and twenty 8σ spikes, each five
    /// steps long on five metrics — 100 anomalous (node, t) cells, i.e. 1%
    /// of the grid.
    pub fn standard_benchmark(seed: u64) -> SynthSpec {
        let injections = (0..20)
            .map(|i| Injection {
                node: 2 * i + 5,
                start_step: 12 + 8 * i,
                end_step: 12 + 8 * i + 4,
                metrics: (0..5).map(|j| (i + 4 * j) % 20).collect(),
                magnitude: 8.0,
                shape: InjectionShape::Spike,
            })
            .collect();
        SynthSpec {
            n_nodes: 50,
            n_metrics: 20,
            n_steps: 200,
            k_true: 5,
            noise_std: 0.1,
            static_factors: default_static(),
            metric_factors: default_metric(),
            dynamic_factors: default_dynamic(),
            injections,
            seed,
            start_timestamp: default_start_timestamp(),
            step_seconds: default_step_seconds(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 1 || self.n_metrics < 1 || self.n_steps < 1 || self.k_true < 1 {
            return Err(Error::InvalidConfig(
                "dimensions and k_true must all be at least 1".into(),
            ));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise_std must be ≥ 0, got {}",
                self.noise_std
            )));
        }
        for g in [self.static_factors, self.metric_factors, self.dynamic_factors] {
            if !(g.std >= 0.0) || !g.mean.is_finite() || !g.std.is_finite() {
                return Err(Error::InvalidConfig(format!("bad factor distribution {g:?}")));
            }
        }
        if self.step_seconds <= 0 {
            return Err(Error::InvalidConfig("step_seconds must be positive".into()));
        }
        if !self.injections.is_empty() && self.noise_std == 0.0 {
            return Err(Error::InvalidConfig(
                "injections are scaled by noise_std, which is 0".into(),
            ));
        }
        for (i, inj) in self.injections.iter().enumerate() {
            if inj.node >= self.n_nodes {
                return Err(Error::InvalidConfig(format!(
                    "injection {i}: node {} outside N={}",
                    inj.node, self.n_nodes
                )));
            }
            if inj.start_step > inj.end_step || inj.end_step >= self.n_steps {
                return Err(Error::InvalidConfig(format!(
                    "injection {i}: step range {}..={} outside T={}",
                    inj.start_step, inj.end_step, self.n_steps
                )));
            }
            if inj.metrics.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "injection {i}: empty metric subset"
                )));
            }
            let mut seen = BTreeSet::new();
            for &m in &inj.metrics {
                if m >= self.n_metrics {
                    return Err(Error::InvalidConfig(format!(
                        "injection {i}: metric {m} outside M={}",
                        self.n_metrics
                    )));
                }
                if !seen.insert(m) {
                    return Err(Error::InvalidConfig(format!(
                        "injection {i}: duplicate metric {m}"
                    )));
                }
            }
            if !inj.magnitude.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "injection {i}: non-finite magnitude"
                )));
            }
        }
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<SynthSpec> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let spec: SynthSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Which (node, t) cells were injected, with the injection list for
/// reference.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    positives: BTreeSet<(usize, usize)>, // (node, t)
    pub injections: Vec<Injection>,
}

impl GroundTruth {
    pub fn is_positive(&self, node: usize, t: usize) -> bool {
        self.positives.contains(&(node, t))
    }

    pub fn n_positives(&self) -> usize {
        self.positives.len()
    }

    pub fn positives(&self) -> impl Iterator<Item = &(usize, usize)> {
        self.positives.iter()
    }

    /// Write the injected cells as CSV rows `timestamp,node`, sorted by
    /// timestamp then node label.
    pub fn save_csv(
        &self,
        node_ids: &[String],
        timestamps: &[i64],
        path: impl AsRef<Path>,
    ) -> Result<()> {
        let path = path.as_ref();
        let mut rows: Vec<(i64, &str)> = self
            .positives
            .iter()
            .map(|&(n, t)| (timestamps[t], node_ids[n].as_str()))
            .collect();
        rows.sort();
        let mut out = String::from("timestamp,node\n");
        for (ts, node) in rows {
            out.push_str(&format!("{ts},{node}\n"));
        }
        let mut file = fs::File::create(path).map_err(Error::io(path))?;
        file.write_all(out.as_bytes()).map_err(Error::io(path))?;
        Ok(())
    }

    /// Read cells written by [`GroundTruth::save_csv`], resolving labels
    /// against the given axes. The injection list is not persisted.
    pub fn load_csv(
        path: impl AsRef<Path>,
        node_ids: &[String],
        timestamps: &[i64],
    ) -> Result<GroundTruth> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(Error::io(path))?;
        let mut reader = csv::ReaderBuilder::new().from_reader(file);
        let headers = reader
            .headers()
            .map_err(|e| Error::malformed(path, 1, e.to_string()))?
            .clone();
        if headers.iter().map(str::trim).ne(["timestamp", "node"]) {
            return Err(Error::malformed(
                path,
                1,
                format!("expected header `timestamp,node`, found {headers:?}"),
            ));
        }
        let mut positives = BTreeSet::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                Error::malformed(path, e.position().map(|p| p.line() as usize).unwrap_or(0), e.to_string())
            })?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            let ts: i64 = record[0]
                .trim()
                .parse()
                .map_err(|e| Error::malformed(path, line, format!("bad timestamp: {e}")))?;
            let t = timestamps
                .iter()
                .position(|&x| x == ts)
                .ok_or_else(|| Error::malformed(path, line, format!("unknown timestamp {ts}")))?;
            let node = &record[1];
            let n = node_ids
                .iter()
                .position(|l| l == node)
                .ok_or_else(|| Error::malformed(path, line, format!("unknown node {node:?}")))?;
            positives.insert((n, t));
        }
        Ok(GroundTruth {
            positives,
            injections: Vec::new(),
        })
    }
}

/// Generate a cube from planted factors: reconstruction + i.i.d. Gaussian
/// noise + injections. Deterministic given `spec.seed`; returns the planted
/// model and the injected-cell labels.
pub fn generate(spec: &SynthSpec) -> Result<(UsageCube, LatentModel, GroundTruth)> {
    spec.validate()?;
    let (n, m, t, k) = (spec.n_nodes, spec.n_metrics, spec.n_steps, spec.k_true);
    let mut rng = ChaCha12Rng::seed_from_u64(spec.seed);
    let dist = |g: GaussianSpec| {
        Normal::new(g.mean, g.std).map_err(|e| Error::InvalidConfig(format!("bad distribution: {e}")))
    };
    let static_dist = dist(spec.static_factors)?;
    let metric_dist = dist(spec.metric_factors)?;
    let dynamic_dist = dist(spec.dynamic_factors)?;

    let draw = |rows: usize, cols: usize, d: &Normal<f64>, rng: &mut ChaCha12Rng| {
        let mut out = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out[(r, c)] = d.sample(rng);
            }
        }
        out
    };
    let u_bar = draw(n, k, &static_dist, &mut rng);
    let v = draw(m, k, &metric_dist, &mut rng);
    let u_hat: Vec<DMatrix<f64>> = (0..t)
        .map(|_| draw(n, k, &dynamic_dist, &mut rng))
        .collect();

    let node_width = ((n.max(2) - 1).ilog10() as usize + 1).max(3);
    let metric_width = ((m.max(2) - 1).ilog10() as usize + 1).max(2);
    let node_ids: Vec<String> = (0..n).map(|i| format!("node{i:0node_width$}")).collect();
    let metric_ids: Vec<String> = (0..m).map(|i| format!("metric{i:0metric_width$}")).collect();
    let timestamps: Vec<i64> = (0..t)
        .map(|i| spec.start_timestamp + i as i64 * spec.step_seconds)
        .collect();

    let model = LatentModel::new(
        node_ids.clone(),
        metric_ids.clone(),
        timestamps.clone(),
        u_bar,
        v,
        u_hat,
    )?;

    let noise = Normal::new(0.0, spec.noise_std)
        .map_err(|e| Error::InvalidConfig(format!("bad noise distribution: {e}")))?;
    let mut values: Vec<DMatrix<f64>> = (0..t)
        .map(|ti| model.reconstruct_slice(ti).expect("t in range"))
        .collect();
    if spec.noise_std > 0.0 {
        for slice in values.iter_mut() {
            for ni in 0..n {
                for mi in 0..m {
                    slice[(ni, mi)] += noise.sample(&mut rng);
                }
            }
        }
    }

    let mut positives = BTreeSet::new();
    for inj in &spec.injections {
        let delta = inj.magnitude * spec.noise_std;
        for ti in inj.start_step..=inj.end_step {
            for &mi in &inj.metrics {
                values[ti][(inj.node, mi)] += delta;
            }
            positives.insert((inj.node, ti));
        }
    }

    let cube = UsageCube::new(node_ids, metric_ids, timestamps, values, None)?;
    let truth = GroundTruth {
        positives,
        injections: spec.injections.clone(),
    };
    Ok((cube, model, truth))
}

/// Precision/recall bookkeeping for a flagged score series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlagMetrics {
    pub flagged: usize,
    pub true_flags: usize,
    pub false_flags: usize,
    /// `None` when nothing is flagged.
    pub precision: Option<f64>,
    /// `None` when the truth has no positives.
    pub recall: Option<f64>,
    pub false_alarms_per_node_day: f64,
}

/// Detector quality against the injection ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorReport {
    /// Ranking quality over all (node, t) cells, ties counted half.
    /// `None` when the truth is degenerate (no positives or no negatives).
    pub auc: Option<f64>,
    /// Present when the series carries flags.
    pub flag_metrics: Option<FlagMetrics>,
    pub positives: usize,
    pub cells: usize,
}

impl DetectorReport {
    /// Single-row CSV; empty fields for undefined values.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = String::from(
            "auc,positives,cells,flagged,true_flags,false_flags,precision,recall,false_alarms_per_node_day\n",
        );
        let (flagged, tf, ff, prec, rec, fpnd) = match &self.flag_metrics {
            Some(fm) => (
                fm.flagged.to_string(),
                fm.true_flags.to_string(),
                fm.false_flags.to_string(),
                fmt_opt(fm.precision),
                fmt_opt(fm.recall),
                fm.false_alarms_per_node_day.to_string(),
            ),
            None => Default::default(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            fmt_opt(self.auc),
            self.positives,
            self.cells,
            flagged,
            tf,
            ff,
            prec,
            rec,
            fpnd
        ));
        let mut file = fs::File::create(path).map_err(Error::io(path))?;
        file.write_all(out.as_bytes()).map_err(Error::io(path))?;
        Ok(())
    }
}

fn check_truth_bounds(scores: &AnomalyScoreSeries, truth: &GroundTruth) -> Result<()> {
    for &(n, t) in truth.positives() {
        if n >= scores.n_nodes() || t >= scores.n_steps() {
            return Err(Error::DimensionMismatch(format!(
                "truth cell (node {n}, t {t}) outside {}×{}",
                scores.n_nodes(),
                scores.n_steps()
            )));
        }
    }
    Ok(())
}

/// ROC AUC of the scores against the truth via the rank-sum formulation
/// with average ranks for ties (equivalent to counting tied pairs as half).
fn roc_auc(scores: &AnomalyScoreSeries, truth: &GroundTruth) -> Option<f64> {
    let cells = scores.n_steps() * scores.n_nodes();
    let p = truth.n_positives();
    if p == 0 || p == cells {
        return None;
    }
    let mut indexed: Vec<(f64, bool)> = Vec::with_capacity(cells);
    for t in 0..scores.n_steps() {
        for n in 0..scores.n_nodes() {
            indexed.push((scores.score(t, n), truth.is_positive(n, t)));
        }
    }
    indexed.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("scores are finite"));
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < cells {
        let mut j = i;
        while j < cells && indexed[j].0 == indexed[i].0 {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the average rank.
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = indexed[i..j].iter().filter(|(_, p)| *p).count();
        rank_sum_pos += avg_rank * pos_in_group as f64;
        i = j;
    }
    let neg = cells - p;
    Some((rank_sum_pos - (p * (p + 1)) as f64 / 2.0) / (p as f64 * neg as f64))
}

fn observation_days(scores: &AnomalyScoreSeries) -> f64 {
    let ts = scores.timestamps();
    let step = if ts.len() >= 2 {
        let mut diffs: Vec<i64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
        diffs.sort_unstable();
        diffs[diffs.len() / 2]
    } else {
        86_400
    };
    let span = (ts[ts.len() - 1] - ts[0] + step) as f64;
    span / 86_400.0
}

/// Score a detector's output against the injection ground truth: ROC AUC
/// over all cells, plus precision/recall and false-alarm statistics when
/// the series has been flagged.
pub fn evaluate_detector(
    scores: &AnomalyScoreSeries,
    truth: &GroundTruth,
) -> Result<DetectorReport> {
    check_truth_bounds(scores, truth)?;
    let cells = scores.n_steps() * scores.n_nodes();
    let p = truth.n_positives();
    let auc = roc_auc(scores, truth);

    let flag_metrics = scores.flags().map(|flags| {
        let mut flagged = 0usize;
        let mut true_flags = 0usize;
        for t in 0..scores.n_steps() {
            for n in 0..scores.n_nodes() {
                if flags[(t, n)] {
                    flagged += 1;
                    if truth.is_positive(n, t) {
                        true_flags += 1;
                    }
                }
            }
        }
        let false_flags = flagged - true_flags;
        let node_days = scores.n_nodes() as f64 * observation_days(scores);
        FlagMetrics {
            flagged,
            true_flags,
            false_flags,
            precision: (flagged > 0).then(|| true_flags as f64 / flagged as f64),
            recall: (p > 0).then(|| true_flags as f64 / p as f64),
            false_alarms_per_node_day: false_flags as f64 / node_days,
        }
    });

    Ok(DetectorReport {
        auc,
        flag_metrics,
        positives: p,
        cells,
    })
}

/// Operating point of a score ranking at a requested recall level.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecallPoint {
    /// Flagging every cell with score ≥ this value attains the recall.
    pub threshold: f64,
    pub recall: f64,
    pub flagged: usize,
    pub false_flags: usize,
}

/// Walk thresholds from the highest score down (tied scores atomically) and
/// return the first operating point whose recall reaches `target_recall`.
/// `None` when the truth has no positives or the target is unreachable.
pub fn false_flags_at_recall(
    scores: &AnomalyScoreSeries,
    truth: &GroundTruth,
    target_recall: f64,
) -> Result<Option<RecallPoint>> {
    check_truth_bounds(scores, truth)?;
    let p = truth.n_positives();
    if p == 0 {
        return Ok(None);
    }
    let mut indexed: Vec<(f64, bool)> = Vec::new();
    for t in 0..scores.n_steps() {
        for n in 0..scores.n_nodes() {
            indexed.push((scores.score(t, n), truth.is_positive(n, t)));
        }
    }
    indexed.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("scores are finite"));
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < indexed.len() {
        let mut j = i;
        while j < indexed.len() && indexed[j].0 == indexed[i].0 {
            if indexed[j].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            j += 1;
        }
        let recall = tp as f64 / p as f64;
        if recall >= target_recall {
            return Ok(Some(RecallPoint {
                threshold: indexed[i].0,
                recall,
                flagged: tp + fp,
                false_flags: fp,
            }));
        }
        i = j;
    }
    Ok(None)
}
