//! Oracle calibration of trial scores via pool-adjacent-violators (PAV)
//! isotonic regression.
//!
//! Each score set is calibrated on itself: labels (target = 1, impostor = 0)
//! are regressed against the scores under a monotonicity constraint, block
//! posteriors are clamped away from 0 and 1 with the small-sample correction
//! `eps = 1 / (2 * (T + 1))`, and the empirical prior log-odds are subtracted
//! so the resulting log-likelihood-ratios are equal-prior. Trial lists are
//! usually heavily impostor-skewed; without the prior removal the sigmoid of
//! an averaged llr would not be interpretable as an equal-prior posterior.

use thiserror::Error;

use crate::cohort::SegmentId;
use crate::ingest::{ScoreSet, TrialLabel};

/// Natural-log odds of a probability in (0, 1).
pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// One maximal block of the isotonic fit.
///
/// The block covers the closed score interval `[score_lo, score_hi]` spanned
/// by the training scores pooled into it.
#[derive(Debug, Clone, PartialEq)]
pub struct Breakpoint {
    pub score_lo: f64,
    pub score_hi: f64,
    pub posterior: f64,
}

/// Monotone step function from raw score to calibrated posterior / llr.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationMap {
    breakpoints: Vec<Breakpoint>,
    prior_log_odds: f64,
    epsilon: f64,
}

/// Result of applying a calibration map to one score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedScore {
    pub llr: f64,
    /// Set when the score fell outside every training block; the nearest
    /// block was used. Never set in the oracle setting.
    pub outside_support: bool,
}

/// A trial with its calibrated log-likelihood-ratio (natural-log units).
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedTrial {
    pub left: SegmentId,
    pub right: SegmentId,
    pub llr: f64,
}

/// Knobs for the choices the calibration method leaves open.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    /// Posterior clamp; `None` selects the small-sample default
    /// `1 / (2 * (T + 1))`.
    pub epsilon: Option<f64>,
    /// Subtract the empirical prior log-odds so llrs are equal-prior.
    pub subtract_prior: bool,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            epsilon: None,
            subtract_prior: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum CalibrationError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("calibration needs both classes; got {targets} targets out of {total} trials")]
    DegenerateLabels { targets: usize, total: usize },
    #[error("score at index {index} is not finite")]
    NonFiniteScore { index: usize },
}

impl CalibrationError {
    pub fn kind(&self) -> &'static str {
        match self {
            CalibrationError::LengthMismatch { .. } => "LengthMismatch",
            CalibrationError::DegenerateLabels { .. } => "DegenerateLabels",
            CalibrationError::NonFiniteScore { .. } => "NonFiniteScore",
        }
    }
}

impl CalibrationMap {
    pub fn breakpoints(&self) -> &[Breakpoint] {
        &self.breakpoints
    }

    pub fn prior_log_odds(&self) -> f64 {
        self.prior_log_odds
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Calibrated posterior for a score, with an outside-support marker.
    ///
    /// Scores in a gap between two blocks snap to the nearer block boundary
    /// (ties to the lower block); scores beyond either end use the end block.
    pub fn posterior(&self, score: f64) -> (f64, bool) {
        let bp = &self.breakpoints;
        let k = bp.partition_point(|b| b.score_hi < score);
        if k == bp.len() {
            return (bp[bp.len() - 1].posterior, true);
        }
        let block = &bp[k];
        if score >= block.score_lo {
            return (block.posterior, false);
        }
        if k == 0 {
            return (block.posterior, true);
        }
        let prev = &bp[k - 1];
        if score - prev.score_hi <= block.score_lo - score {
            (prev.posterior, true)
        } else {
            (block.posterior, true)
        }
    }

    /// Calibrated llr: `logit(posterior(score)) - prior_log_odds`.
    pub fn apply(&self, score: f64) -> CalibratedScore {
        let (posterior, outside_support) = self.posterior(score);
        CalibratedScore {
            llr: logit(posterior) - self.prior_log_odds,
            outside_support,
        }
    }
}

/// Fits the PAV isotonic regression of labels against scores.
///
/// Trials sharing an identical raw score are pooled into one block before the
/// regression, so output never depends on how ties were ordered.
pub fn pav_fit(scores: &[f64], labels: &[TrialLabel]) -> Result<CalibrationMap, CalibrationError> {
    pav_fit_with(scores, labels, &CalibrationOptions::default())
}

pub fn pav_fit_with(
    scores: &[f64],
    labels: &[TrialLabel],
    options: &CalibrationOptions,
) -> Result<CalibrationMap, CalibrationError> {
    if scores.len() != labels.len() {
        return Err(CalibrationError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(CalibrationError::NonFiniteScore { index });
    }
    let total = scores.len();
    let targets = labels.iter().filter(|l| **l == TrialLabel::Target).count();
    if targets == 0 || targets == total {
        return Err(CalibrationError::DegenerateLabels { targets, total });
    }

    let mut order: Vec<usize> = (0..total).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Blocks carry exact integer sums as f64, so all pooling decisions are
    // exact comparisons of rationals (cross-multiplied).
    struct Block {
        lo: f64,
        hi: f64,
        target_sum: f64,
        weight: f64,
    }
    let mut stack: Vec<Block> = Vec::new();
    let mut i = 0;
    while i < total {
        let score = scores[order[i]];
        let mut target_sum = 0.0;
        let mut weight = 0.0;
        while i < total && scores[order[i]] == score {
            if labels[order[i]] == TrialLabel::Target {
                target_sum += 1.0;
            }
            weight += 1.0;
            i += 1;
        }
        let mut block = Block {
            lo: score,
            hi: score,
            target_sum,
            weight,
        };
        while let Some(top) = stack.last() {
            // violation: previous block mean exceeds the new one
            if top.target_sum * block.weight > block.target_sum * top.weight {
                let top = stack.pop().expect("stack non-empty");
                block = Block {
                    lo: top.lo,
                    hi: block.hi,
                    target_sum: top.target_sum + block.target_sum,
                    weight: top.weight + block.weight,
                };
            } else {
                break;
            }
        }
        stack.push(block);
    }

    let epsilon = options
        .epsilon
        .unwrap_or_else(|| 1.0 / (2.0 * (total as f64 + 1.0)));
    let breakpoints = stack
        .into_iter()
        .map(|b| Breakpoint {
            score_lo: b.lo,
            score_hi: b.hi,
            posterior: (b.target_sum / b.weight).clamp(epsilon, 1.0 - epsilon),
        })
        .collect();
    let prior_log_odds = if options.subtract_prior {
        logit(targets as f64 / total as f64)
    } else {
        0.0
    };
    Ok(CalibrationMap {
        breakpoints,
        prior_log_odds,
        epsilon,
    })
}

/// Free-function form of [`CalibrationMap::apply`].
pub fn pav_apply(map: &CalibrationMap, score: f64) -> CalibratedScore {
    map.apply(score)
}

/// Oracle-calibrates a score set: the map is fit on the set and applied to
/// the very same trials, one [`CalibratedTrial`] per input trial.
pub fn calibrate_set(set: &ScoreSet) -> Result<Vec<CalibratedTrial>, CalibrationError> {
    calibrate_set_with(set, &CalibrationOptions::default())
}

pub fn calibrate_set_with(
    set: &ScoreSet,
    options: &CalibrationOptions,
) -> Result<Vec<CalibratedTrial>, CalibrationError> {
    let scores = set.scores();
    let map = pav_fit_with(&scores, &set.labels, options)?;
    Ok(set
        .trials
        .iter()
        .map(|trial| {
            let applied = map.apply(trial.raw_score);
            debug_assert!(!applied.outside_support, "oracle scores are in-support");
            CalibratedTrial {
                left: trial.left.clone(),
                right: trial.right.clone(),
                llr: applied.llr,
            }
        })
        .collect())
}
