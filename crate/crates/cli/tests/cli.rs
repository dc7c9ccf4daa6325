//! Black-box tests of the `dynmf` binary: exit codes, output files, and
//! manifest emission.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dynmf"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn dynmf")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

const SPEC_JSON: &str = r#"{
  "n_nodes": 10, "n_metrics": 8, "n_steps": 40,
  "k_true": 2, "noise_std": 0.1, "seed": 7,
  "injections": [
    {"node": 3, "start_step": 10, "end_step": 11,
     "metrics": [0, 2, 4], "magnitude": 8.0, "shape": "spike"},
    {"node": 7, "start_step": 25, "end_step": 26,
     "metrics": [1, 3, 5], "magnitude": 8.0, "shape": "spike"}
  ]
}"#;

#[test]
fn version_prints_and_exits_zero() {
    let out = bin().arg("--version").output().unwrap();
    assert_ok(&out);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains(env!("CARGO_PKG_VERSION")), "{text}");
}

#[test]
fn missing_required_flag_is_a_usage_error() {
    let out = bin().arg("fit").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("--cube"), "{err}");
    assert!(err.to_lowercase().contains("usage"), "{err}");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = bin().arg("transmogrify").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_error_exits_one_with_json_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "fit", "--cube", "no-such-cube", "--k", "2", "--iters", "10", "--output", "m",
            "--trace", "t.csv",
        ],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    let line = err.lines().last().unwrap();
    let parsed: serde_json::Value = serde_json::from_str(line).expect("stderr is JSON");
    assert!(parsed["error"].is_string(), "{line}");
}

#[test]
fn pipeline_produces_outputs_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("spec.json"), SPEC_JSON).unwrap();

    assert_ok(&run_in(
        dir.path(),
        &["synth", "--spec", "spec.json", "--output", "cube", "--truth", "truth.csv"],
    ));
    assert!(dir.path().join("cube/manifest.json").exists());
    assert!(dir.path().join("cube/run_manifest.json").exists());
    assert!(dir.path().join("truth.csv.manifest.json").exists());

    assert_ok(&run_in(
        dir.path(),
        &[
            "fit", "--cube", "cube", "--k", "2", "--iters", "1200", "--seed", "1", "--output",
            "model", "--trace", "trace.csv",
        ],
    ));
    assert!(dir.path().join("model/U_bar.csv").exists());
    assert!(dir.path().join("model/U_hat/t39.csv").exists());
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,objective\n"));

    assert_ok(&run_in(
        dir.path(),
        &[
            "score", "--cube", "cube", "--model", "model", "--output", "scores.csv", "--flag",
            "quantile:0.99",
        ],
    ));
    let scores = fs::read_to_string(dir.path().join("scores.csv")).unwrap();
    assert!(scores.starts_with("timestamp,node,score,flag\n"));

    assert_ok(&run_in(
        dir.path(),
        &["eval", "--scores", "scores.csv", "--truth", "truth.csv", "--output", "metrics.csv"],
    ));
    let metrics = fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let header = metrics.lines().next().unwrap();
    assert!(header.split(',').any(|c| c == "auc"), "{header}");
    let run_manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("metrics.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(run_manifest["subcommand"], "eval");
    assert_eq!(run_manifest["inputs"].as_array().unwrap().len(), 2);
    assert!(run_manifest["inputs"][0]["sha256"].as_str().unwrap().len() == 64);
    // Reproducible mode leaves no wall-clock in the manifest.
    assert!(run_manifest["created_unix"].is_null());
}

#[test]
fn ingest_flag_align_project_correlate_baseline_sweep_work() {
    let dir = tempfile::tempdir().unwrap();
    let csv = "timestamp,node,metric,value\n\
        600,a,cpu,1.0\n600,a,mem,5.0\n600,b,cpu,2.0\n600,b,mem,6.0\n\
        1200,a,cpu,1.5\n1200,a,mem,5.5\n1200,b,cpu,2.5\n1200,b,mem,6.5\n\
        1800,a,cpu,1.2\n1800,a,mem,5.2\n1800,b,cpu,2.2\n1800,b,mem,6.2\n\
        2400,a,cpu,1.8\n2400,a,mem,5.8\n2400,b,cpu,2.8\n2400,b,mem,6.8\n";
    fs::write(dir.path().join("usage.csv"), csv).unwrap();

    assert_ok(&run_in(
        dir.path(),
        &[
            "ingest", "--input", "usage.csv", "--format", "long", "--missing", "reject",
            "--normalize", "--output", "cube", "--storage", "csv",
        ],
    ));
    assert!(dir.path().join("cube/slices/t0.csv").exists());

    assert_ok(&run_in(
        dir.path(),
        &[
            "fit", "--cube", "cube", "--k", "2", "--iters", "300", "--seed", "3", "--output",
            "model", "--trace", "trace.csv",
        ],
    ));
    assert_ok(&run_in(
        dir.path(),
        &["score", "--cube", "cube", "--model", "model", "--output", "scores.csv"],
    ));
    // Unflagged scores have an empty flag column; `flag` fills it.
    assert_ok(&run_in(
        dir.path(),
        &["flag", "--scores", "scores.csv", "--method", "quantile:0.5", "--output", "flagged.csv"],
    ));
    let flagged = fs::read_to_string(dir.path().join("flagged.csv")).unwrap();
    assert!(flagged.contains(",true") || flagged.contains(",false"));

    fs::write(
        dir.path().join("events.csv"),
        "timestamp,node,error_type\n1200,a,segfault\n1800,zz,write_error\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &[
            "align", "--scores", "flagged.csv", "--events", "events.csv", "--window-seconds",
            "600", "--output", "alignment.csv",
        ],
    );
    assert_ok(&out);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("unresolved=1"), "{stdout}");
    let alignment = fs::read_to_string(dir.path().join("alignment.csv")).unwrap();
    assert!(alignment.starts_with("timestamp,node,error_type,resolved"));
    assert_eq!(alignment.lines().count(), 3);

    assert_ok(&run_in(
        dir.path(),
        &["project", "--model", "model", "--target", "metrics", "--output", "proj.csv"],
    ));
    let proj = fs::read_to_string(dir.path().join("proj.csv")).unwrap();
    assert!(proj.starts_with("label,pc1,pc2\n"));

    assert_ok(&run_in(
        dir.path(),
        &["correlate", "--model", "model", "--output", "corr.csv"],
    ));
    let corr = fs::read_to_string(dir.path().join("corr.csv")).unwrap();
    assert!(corr.starts_with("dim,0,1\n"));

    assert_ok(&run_in(
        dir.path(),
        &[
            "baseline", "--cube", "cube", "--rank", "2", "--iters", "30", "--seed", "4",
            "--output", "scores_baseline.csv",
        ],
    ));
    let base = fs::read_to_string(dir.path().join("scores_baseline.csv")).unwrap();
    assert!(base.starts_with("timestamp,node,score,flag\n"));

    assert_ok(&run_in(
        dir.path(),
        &[
            "sweep", "--cube", "cube", "--ks", "1,2", "--iters", "200", "--seed", "3",
            "--output", "sweep.csv", "--trace-dir", "traces",
        ],
    ));
    let sweep = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("k,final_objective,final_avg_abs_error\n"));
    assert!(dir.path().join("traces/trace_k1.csv").exists());
    assert!(dir.path().join("traces/trace_k2.csv").exists());
}

#[test]
fn ingest_reports_missing_cells_under_reject() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("gap.csv"),
        "timestamp,node,metric,value\n600,a,cpu,1.0\n1200,a,cpu,2.0\n600,b,cpu,3.0\n",
    )
    .unwrap();
    let out = run_in(
        dir.path(),
        &["ingest", "--input", "gap.csv", "--output", "cube"],
    );
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("missing cell"), "{err}");
    assert!(err.contains('b') && err.contains("1200"), "{err}");
}
