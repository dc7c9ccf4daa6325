//! Implementations behind the CLI subcommands: load inputs, call into the
//! library, write stable-ordered outputs plus a run manifest.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use dynmf::anomaly::{align_events, AlignmentReport};
use dynmf::cube::{CsvFormat, CubeStorage, IngestConfig, MissingPolicy, Normalization};
use dynmf::synth::{self, SynthSpec};
use dynmf::{
    analysis, anomaly, cp, trainer, AnomalyScoreSeries, EventLog, FitConfig, FlagMethod,
    GroundTruth, LatentModel, UsageCube,
};

use crate::manifest::RunManifest;
use crate::{Cli, Command, FormatArg, MissingArg, ProjectTarget, StorageArg};

impl From<FormatArg> for CsvFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Long => CsvFormat::Long,
            FormatArg::Wide => CsvFormat::Wide,
        }
    }
}

impl From<MissingArg> for MissingPolicy {
    fn from(m: MissingArg) -> Self {
        match m {
            MissingArg::Reject => MissingPolicy::Reject,
            MissingArg::ImputeZero => MissingPolicy::ImputeZero,
        }
    }
}

impl From<StorageArg> for CubeStorage {
    fn from(s: StorageArg) -> Self {
        match s {
            StorageArg::Binary => CubeStorage::Binary,
            StorageArg::Csv => CubeStorage::Csv,
        }
    }
}

fn write_trace_csv(path: &Path, trace: &[(usize, f64)]) -> Result<()> {
    let mut out = String::from("iteration,objective\n");
    for (iter, obj) in trace {
        out.push_str(&format!("{iter},{obj}\n"));
    }
    fs::write(path, out).with_context(|| format!("writing trace {}", path.display()))?;
    Ok(())
}

fn fit_config(
    cli: &Cli,
    k: usize,
    iters: usize,
    seed: u64,
    alpha: f64,
    beta1: f64,
    beta2: f64,
    l2: f64,
    minibatch: Option<usize>,
) -> FitConfig {
    FitConfig {
        k,
        max_iter: iters,
        seed,
        l2_lambda: l2,
        minibatch_slices: minibatch,
        reproducible_reduction: cli.reproducible,
        adam: dynmf::AdamHyper {
            alpha,
            beta1,
            beta2,
            ..dynmf::AdamHyper::default()
        },
        ..FitConfig::default()
    }
}

pub(crate) fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Ingest {
            input,
            format,
            missing,
            normalize,
            output,
            storage,
        } => {
            let config = IngestConfig {
                format: (*format).into(),
                missing_policy: (*missing).into(),
                normalization: if *normalize {
                    Normalization::ZScore
                } else {
                    Normalization::None
                },
            };
            let cube = UsageCube::load_csv(input, &config)
                .with_context(|| format!("ingesting {}", input.display()))?;
            cube.save(output, (*storage).into())?;
            println!(
                "ingested nodes={} metrics={} steps={} observed={}",
                cube.n_nodes(),
                cube.n_metrics(),
                cube.n_steps(),
                cube.n_observed()
            );
            RunManifest {
                subcommand: "ingest",
                config: json!({
                    "input": input, "format": format!("{format:?}"),
                    "missing": format!("{missing:?}"), "normalize": normalize,
                    "storage": format!("{storage:?}"), "output": output,
                }),
                inputs: vec![input.clone()],
                outputs: vec![output.clone()],
                threads: cli.threads,
                reproducible: cli.reproducible,
            }
            .write()
        }

        Command::Fit {
            cube,
            k,
            iters,
            seed,
            alpha,
            beta1,
            beta2,
            l2,
            minibatch,
            output,
            trace,
        } => {
            let data = UsageCube::load(cube)?;
            let config = fit_config(cli, *k, *iters, *seed, *alpha, *beta1, *beta2, *l2, *minibatch);
            let (model, report) = trainer::fit(&data, &config)?;
            model.save(output)?;
            write_trace_csv(trace, &report.objective_trace)?;
            println!(
                "fit k={} final_objective={} final_avg_abs_error={}",
                k, report.final_objective, report.final_avg_abs_error
            );
            RunManifest {
                subcommand: "fit",
                config: serde_json::to_value(&config)?,
                inputs: vec![cube.clone()],
                outputs: vec![output.clone(), trace.clone()],
                threads: cli.threads,
                reproducible: cli.reproducible,
            }
            .write()
        }

        Command::Sweep {
            cube,
            ks,
            iters,
            seed,
            alpha,
            beta1,
            beta2,
            l2,
            minibatch,
            output,
            trace_dir,
        } => {
            let data = UsageCube::load(cube)?;
            let config = fit_config(cli, 1, *iters, *seed, *alpha, *beta1, *beta2, *l2, *minibatch);
            let reports = trainer::k_sweep(&data, ks, &config)?;
            fs::create_dir_all(trace_dir)
                .with_context(|| format!("creating {}", trace_dir.display()))?;
            let mut summary = String::from("k,final_objective,final_avg_abs_error\n");
            for (k, report) in ks.iter().zip(&reports) {
                write_trace_csv(&trace_dir.join(format!("trace_k{k}.csv")), &report.objective_trace)?;
                summary.push_str(&format!(
                    "{k},{},{}\n",
                    report.final_objective, report.final_avg_abs_error
                ));
                println!(
                    "sweep k={k} final_objective={} final_avg_abs_error={}",
                    report.final_objective, report.final_avg_abs_error
                );
            }
            fs::write(output, summary)
                .with_context(|| format!("writing summary {}", output.display()))?;
            RunManifest {
                subcommand: "sweep",
                config: json!({
                    "cube": cube, "ks": ks, "iters": iters, "seed": seed,
                    "alpha": alpha, "beta1": beta1, "beta2": beta2, "l2": l2,
                    "minibatch": minibatch, "output": output, "trace_dir": trace_dir,
                }),
                inputs: vec![cube.clone()],
                outputs: vec![output.clone(), trace_dir.clone()],
                threads: cli.threads,
                reproducible: cli.reproducible,
            }
            .write()
        }

        Command::Score {
            cube,
            model,
            output,
            flag,
        } => {
            let data = UsageCube::load(cube)?;
            let fitted = LatentModel::load(model)?;
            let mut series = anomaly::score(&fitted, &data)?;
            if let Some(spec) = flag {
                let method: FlagMethod = spec.parse()?;
                series = series.flag(method)?;
            }
            series.save_csv(output)?;
            println!(
                "scored cells={} flagged={}",
                series.n_steps() * series.n_nodes(),
                series.n_flagged()
            );
            RunManifest {
                subcommand: "score",
                config: json!({ "cube": cube, "model": model, "flag": flag, "output": output }),
                inputs: vec![cube.clone(), model.clone()],
                outputs: vec![output.clone()],
                threads: cli.threads,
                reproducible: cli.reproducible,
            }
            .write()
        }

        Command::Flag {
            scores,
            method,
            output,
        } => {
            let series = AnomalyScoreSeries::load_csv(scores)?;
            let method_parsed: FlagMethod = method.parse()?;
            let flagged = series.flag(method_parsed)?;
            flagged.save_csv(output)?;
            println!(
                "flagged {} of {} cells (threshold {})",
                flagged.n_flagged(),
                flagged.n_steps() * flagged.n_nodes(),
                flagged.threshold().expect("flag() sets the threshold")
            );
            RunManifest {
                subcommand: "flag",
                config: json!({ "scores": scores, "method": method, "output": output }),
                inputs: vec![scores.clone()],
                outputs: vec![output.clone()],
                threads: cli.threads,
                reproducible: cli.reproducible,
            }
            .write()
        }

        Command::Align {
            scores,
            events,
            window_seconds,
            output,
        } => {
            let series = AnomalyScoreSeries::load_csv(scores)?;
            let log = EventLog::load_csv(events)?;
            let report = align_events(&series, &log, *window_seconds)?;
            write_alignment_csv(output, &report)?;
            for summary in &report.per_type {
                println!(
                    "align type={} events={} co_occurrence_rate={} adjacent_mean_score={} background_mean_score={}",
                    summary.error_type,
                    summary.events,
                    summary.co_occurrence_rate,
                    summary.adjacent_mean_score,
                    summary.background_mean_score
                );
            }
            println!(
                "align flagged_fraction={} background_co_occurrence_rate={} unresolved={}",
                report.flagged_fraction,
                report.background_co_occurrence_rate,
                report.unresolved.len()
            );
            RunManifest {
                subcommand: "align",
                config: json!({
                    "scores": scores, "events": events,
                    "window_seconds": window_seconds, "output": output,
                }),
                inputs: vec![scores.clone(), events.clone()],
                outputs: vec![output.clone()],
                threads: cli.threads,
                reproducible: cli.reproducible,
            }
            .write()
        }

        Command::Project {
            model,
            target,
            output,
        } => {
            let fitted = LatentModel::load(model)?;
            let projection = match target {
                ProjectTarget::Metrics => {
                    analysis::pca_2d(fitted.v(), fitted.metric_ids())?
                }
                ProjectTarget::NodesStatic => {
                    analysis::pca_2d(fitted.u_bar(), fitted.node_ids())?
                }
            };
            projection.save_csv(output)?;
            println!(
                "projected points={} explained_variance={},{}",
                projection.labels.len(),
                projection.explained[0],
                projection.explained[1]
            );
            RunManifest {
                subcommand: "project",
                config: json!({ "model": model, "target": format!("{target:?}"), "output": output }),
                inputs: vec![model.clone()],
                outputs: vec![output.clone()],
                threads: cli.threads,
                reproducible: cli.reproducible,
            }
            .write()
        }

        Command::Correlate { model, output } => {
            let fitted = LatentModel::load(model)?;
            let corr = analysis::latent_correlations(&fitted)?;
            corr.save_csv(output)?;
            if !corr.degenerate_dims.is_empty() {
                println!("correlate degenerate_dims={:?}", corr.degenerate_dims);
            }
            println!("correlated k={}", corr.k());
            RunManifest {
                subcommand: "correlate",
                config: json!({ "model": model, "output": output }),
                inputs: vec![model.clone()],
                outputs: vec![output.clone()],
                threads: cli.threads,
                reproducible: cli.reproducible,
            }
            .write()
        }

        Command::Baseline {
            cube,
            rank,
            iters,
            seed,
            output,
        } => {
            let data = UsageCube::load(cube)?;
            let fit = cp::cp_als_fit(&data, *rank, *iters, *seed)?;
            let series = cp::cp_node_scores(&fit.model, &data)?;
            series.save_csv(output)?;
            println!(
                "baseline rank={} final_error={} least_norm_fallbacks={}",
                rank,
                fit.sweep_errors.last().expect("at least one sweep"),
                fit.least_norm_fallbacks
            );
            RunManifest {
                subcommand: "baseline",
                config: json!({
                    "cube": cube, "rank": rank, "iters": iters,
                    "seed": seed, "output": output,
                }),
                inputs: vec![cube.clone()],
                outputs: vec![output.clone()],
                threads: cli.threads,
                reproducible: cli.reproducible,
            }
            .write()
        }

        Command::Synth {
            spec,
            output,
            truth,
            seed,
            storage,
        } => {
            let mut synth_spec = SynthSpec::load_json(spec)?;
            if let Some(seed) = seed {
                synth_spec.seed = *seed;
            }
            let (cube, _model, ground_truth) = synth::generate(&synth_spec)?;
            cube.save(output, (*storage).into())?;
            let mut outputs = vec![output.clone()];
            if let Some(truth_path) = truth {
                ground_truth.save_csv(cube.node_ids(), cube.timestamps(), truth_path)?;
                outputs.push(truth_path.clone());
            }
            println!(
                "synthesized nodes={} metrics={} steps={} injected_cells={}",
                cube.n_nodes(),
                cube.n_metrics(),
                cube.n_steps(),
                ground_truth.n_positives()
            );
            RunManifest {
                subcommand: "synth",
                config: json!({
                    "spec": spec, "seed": synth_spec.seed,
                    "output": output, "truth": truth, "storage": format!("{storage:?}"),
                }),
                inputs: vec![spec.clone()],
                outputs,
                threads: cli.threads,
                reproducible: cli.reproducible,
            }
            .write()
        }

        Command::Eval {
            scores,
            truth,
            output,
        } => {
            let series = AnomalyScoreSeries::load_csv(scores)?;
            let ground_truth =
                GroundTruth::load_csv(truth, series.node_ids(), series.timestamps())?;
            let report = synth::evaluate_detector(&series, &ground_truth)?;
            report.save_csv(output)?;
            match report.auc {
                Some(auc) => println!("eval auc={auc} positives={}", report.positives),
                None => println!("eval auc=undefined positives={}", report.positives),
            }
            RunManifest {
                subcommand: "eval",
                config: json!({ "scores": scores, "truth": truth, "output": output }),
                inputs: vec![scores.clone(), truth.clone()],
                outputs: vec![output.clone()],
                threads: cli.threads,
                reproducible: cli.reproducible,
            }
            .write()
        }
    }
}

/// One row per event (timestamp, node, type, window stats, co-occurrence),
/// unresolved events included with `resolved=false`; rows sorted by
/// timestamp then node.
fn write_alignment_csv(path: &PathBuf, report: &AlignmentReport) -> Result<()> {
    struct Row {
        timestamp: i64,
        node: String,
        error_type: String,
        resolved: bool,
        steps: usize,
        max_score: Option<f64>,
        mean_score: Option<f64>,
        co_occurs: Option<bool>,
    }
    let mut rows = Vec::new();
    for ev in &report.events {
        let scores: Vec<f64> = ev.matches.iter().map(|m| m.score).collect();
        let max_score = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        rows.push(Row {
            timestamp: ev.record.timestamp,
            node: ev.record.node_id.clone(),
            error_type: ev.record.error_type.to_string(),
            resolved: true,
            steps: ev.matches.len(),
            max_score: (!scores.is_empty()).then_some(max_score),
            mean_score: (!scores.is_empty())
                .then(|| scores.iter().sum::<f64>() / scores.len() as f64),
            co_occurs: Some(ev.co_occurs),
        });
    }
    for ev in &report.unresolved {
        rows.push(Row {
            timestamp: ev.timestamp,
            node: ev.node_id.clone(),
            error_type: ev.error_type.to_string(),
            resolved: false,
            steps: 0,
            max_score: None,
            mean_score: None,
            co_occurs: None,
        });
    }
    rows.sort_by(|a, b| (a.timestamp, &a.node).cmp(&(b.timestamp, &b.node)));
    let mut out =
        String::from("timestamp,node,error_type,resolved,steps_in_window,max_score,mean_score,co_occurs\n");
    let opt_num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let opt_bool = |v: Option<bool>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.timestamp,
            r.node,
            r.error_type,
            r.resolved,
            r.steps,
            opt_num(r.max_score),
            opt_num(r.mean_score),
            opt_bool(r.co_occurs)
        ));
    }
    let mut file =
        fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
    file.write_all(out.as_bytes())?;
    Ok(())
}
