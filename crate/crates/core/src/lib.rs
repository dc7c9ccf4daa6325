//! Time-dependent matrix factorization of node×metric resource-usage data.
//!
//! A usage cube (`T` slices of an `N×M` node×metric matrix) is decomposed
//! into static node factors, metric factors, and per-timestep dynamic node
//! factors, fitted with Adam against the squared reconstruction error. The
//! fitted factors drive per-node anomaly scores (mean absolute residual),
//! latent-space analysis (PCA projections, dimension correlations), and a
//! CP tensor baseline for comparison. A synthetic-data generator with
//! planted factors and labeled injections provides the evaluation harness.
//!
//! ```
//! use dynmf::{synth, trainer, anomaly, FitConfig, FlagMethod, SynthSpec};
//!
//! // A small planted cube with one 8σ spike.
//! let mut spec = SynthSpec {
//!     n_nodes: 8, n_metrics: 6, n_steps: 30, k_true: 2,
//!     noise_std: 0.1, seed: 7,
//!     ..SynthSpec::standard_benchmark(7)
//! };
//! spec.injections = vec![synth::Injection {
//!     node: 3, start_step: 10, end_step: 10,
//!     metrics: vec![0, 2, 4], magnitude: 8.0,
//!     shape: synth::InjectionShape::Spike,
//! }];
//! let (cube, _planted, truth) = synth::generate(&spec).unwrap();
//!
//! let config = FitConfig { k: 2, max_iter: 1500, ..FitConfig::default() };
//! let (model, report) = trainer::fit(&cube, &config).unwrap();
//! assert!(report.final_objective < report.objective_trace[0].1);
//!
//! let scores = anomaly::score(&model, &cube).unwrap()
//!     .flag(FlagMethod::Quantile(0.99)).unwrap();
//! let metrics = synth::evaluate_detector(&scores, &truth).unwrap();
//! assert!(metrics.auc.unwrap() > 0.8);
//! ```

pub mod adam;
pub mod analysis;
pub mod anomaly;
pub mod cp;
pub mod cube;
pub mod error;
mod matcsv;
pub mod model;
mod stats;
pub mod synth;
pub mod trainer;

#[cfg(test)]
mod testutil;

pub use adam::{Adam, AdamHyper};
pub use analysis::{latent_correlations, pca_2d, CorrelationMatrix, Projection2D};
pub use anomaly::{
    align_events, score, AlignmentReport, AnomalyScoreSeries, ErrorType, EventLog, EventRecord,
    FlagMethod,
};
pub use cp::{cp_als_fit, cp_node_scores, CpFit, CpModel};
pub use cube::{CsvFormat, CubeStorage, IngestConfig, MetricStats, MissingPolicy, UsageCube};
pub use error::{Error, Result};
pub use model::{Gradients, LatentModel};
pub use synth::{
    evaluate_detector, generate, DetectorReport, GroundTruth, Injection, InjectionShape, SynthSpec,
};
pub use trainer::{fit, init_model, k_sweep, FitConfig, FitReport};

// Run every code block in the guide as a doctest so the book can never
// drift from the library. Only compiled during doctest collection.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub mod $name {}
        };
    }
    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(data_model, "../../../book/src/data-model.md");
    chapter!(factorization, "../../../book/src/factorization.md");
    chapter!(optimization, "../../../book/src/optimization.md");
    chapter!(anomaly_detection, "../../../book/src/anomaly-detection.md");
    chapter!(latent_analysis, "../../../book/src/latent-analysis.md");
    chapter!(baseline, "../../../book/src/baseline.md");
    chapter!(synthetic_data, "../../../book/src/synthetic-data.md");
    chapter!(cli, "../../../book/src/cli.md");
    chapter!(formats, "../../../book/src/formats.md");
}
