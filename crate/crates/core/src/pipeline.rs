//! End-to-end evaluation: calibrate the three score sets, build the three
//! matrices over the shared speaker order, and assemble the metrics report.

use thiserror::Error;

use crate::calibration::{
    calibrate_set_with, CalibratedTrial, CalibrationError, CalibrationOptions,
};
use crate::cohort::{CohortError, CohortManifest, MatrixKind};
use crate::heatmap::HeatmapError;
use crate::ingest::{IngestError, ScorePartition, ScoreSet};
use crate::metrics::{report, MetricsError, MetricsReport};
use crate::similarity::{build_matrix, SimilarityError, SimilarityMatrix};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Cohort(#[from] CohortError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("calibrating the {kind} set: {source}")]
    Calibration {
        kind: MatrixKind,
        source: CalibrationError,
    },
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Heatmap(#[from] HeatmapError),
    #[error("the {kind} score set has no trials")]
    EmptyScoreSet { kind: MatrixKind },
}

impl PipelineError {
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Cohort(e) => e.kind(),
            PipelineError::Ingest(e) => e.kind(),
            PipelineError::Calibration { source, .. } => source.kind(),
            PipelineError::Similarity(e) => e.kind(),
            PipelineError::Metrics(e) => e.kind(),
            PipelineError::Heatmap(e) => e.kind(),
            PipelineError::EmptyScoreSet { .. } => "EmptyScoreSet",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            PipelineError::Cohort(e) => e.line(),
            PipelineError::Ingest(e) => e.line(),
            PipelineError::Similarity(e) => e.line(),
            _ => None,
        }
    }
}

/// How the scores reach the matrices.
#[derive(Debug, Clone, Default)]
pub struct EvaluationOptions {
    /// Treat raw scores as already-calibrated llrs and skip PAV.
    pub pre_calibrated: bool,
    pub calibration: CalibrationOptions,
}

/// Everything one evaluation produces.
#[derive(Debug, Clone)]
pub struct EvaluationArtifacts {
    pub m_oo: SimilarityMatrix,
    pub m_op: SimilarityMatrix,
    pub m_pp: SimilarityMatrix,
    pub report: MetricsReport,
}

fn calibrated(
    set: &ScoreSet,
    options: &EvaluationOptions,
) -> Result<Vec<CalibratedTrial>, PipelineError> {
    if set.is_empty() {
        return Err(PipelineError::EmptyScoreSet { kind: set.kind });
    }
    if options.pre_calibrated {
        Ok(set
            .trials
            .iter()
            .map(|t| CalibratedTrial {
                left: t.left.clone(),
                right: t.right.clone(),
                llr: t.raw_score,
            })
            .collect())
    } else {
        calibrate_set_with(set, &options.calibration).map_err(|source| PipelineError::Calibration {
            kind: set.kind,
            source,
        })
    }
}

/// Runs calibration, matrix construction and metrics over a partition.
///
/// The three sets are independent: each is calibrated on itself only.
pub fn evaluate_partition(
    manifest: &CohortManifest,
    partition: &ScorePartition,
    set_name: &str,
    options: &EvaluationOptions,
) -> Result<EvaluationArtifacts, PipelineError> {
    let oo = calibrated(&partition.oo, options)?;
    let op = calibrated(&partition.op, options)?;
    let pp = calibrated(&partition.pp, options)?;
    let m_oo = build_matrix(MatrixKind::OO, manifest, &oo)?;
    let m_op = build_matrix(MatrixKind::OP, manifest, &op)?;
    let m_pp = build_matrix(MatrixKind::PP, manifest, &pp)?;
    let report = report(&m_oo, &m_op, &m_pp, set_name)?;
    Ok(EvaluationArtifacts {
        m_oo,
        m_op,
        m_pp,
        report,
    })
}
