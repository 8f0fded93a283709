//! Assessment of speech pseudonymisation systems from speaker-verification
//! trial scores.
//!
//! The chain: parse trial scores and a segment/speaker manifest, oracle-
//! calibrate each score set with PAV isotonic regression, build the three
//! voice similarity matrices (original/original, original/protected,
//! protected/protected), compute the de-identification and voice
//! distinctiveness metrics, and render the composite quadrant heatmap.
//!
//! A deterministic synthetic generator ([`synth`]) produces cohorts for the
//! canonical protection regimes so the whole pipeline runs without any
//! external speech stack, and doubles as the brute-force oracle for tests.

pub mod calibration;
pub mod cohort;
pub mod heatmap;
pub mod ingest;
pub mod metrics;
mod numeric;
pub mod pipeline;
pub mod similarity;
pub mod synth;

pub use calibration::{
    calibrate_set, pav_apply, pav_fit, CalibratedTrial, CalibrationError, CalibrationMap,
    CalibrationOptions,
};
pub use cohort::{
    build_manifest, from_utt2spk, CohortError, CohortManifest, Domain, MatrixKind, SegmentId,
    SpeakerId,
};
pub use heatmap::{
    color_of, render_composite_ppm, render_composite_svg, render_single_ppm, render_single_svg,
    ColorMap, CompositeLayout, HeatmapError,
};
pub use ingest::{
    parse_embeddings, parse_scores, parse_trials, partition_trials, score_cosine, EmbeddingTable,
    IngestError, ScorePartition, ScoreSet, Trial, TrialLabel,
};
pub use metrics::{
    d_diag, de_id, gain_vd, report, GainDb, MetricFlag, MetricsError, MetricsReport,
};
pub use pipeline::{evaluate_partition, EvaluationArtifacts, EvaluationOptions, PipelineError};
pub use similarity::{
    build_all, build_matrix, export_matrix, parse_matrix, sigmoid, SimilarityError,
    SimilarityMatrix,
};
pub use synth::{
    brute_force_similarity, exhaustive_pairs, exhaustive_trials, generate, run_pipeline,
    run_pipeline_artifacts, Scenario, SynthCohort, SynthConfig, SynthError,
};
