//! Diagonal dominance, de-identification and gain of voice distinctiveness.
//!
//! `d_diag` is the absolute difference between the mean diagonal and the mean
//! off-diagonal similarity: 0 for a constant matrix, 1 for the identity
//! pattern. De-identification compares the dominance of the cross matrix to
//! the original one, and the distinctiveness gain compares protected space to
//! original space on a decibel scale.

use std::collections::BTreeSet;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::numeric::{pairwise_sum, round6};
use crate::similarity::SimilarityMatrix;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("d_diag needs at least two speakers, got {n}")]
    TooFewSpeakers { n: usize },
    #[error("D_diag(M_OO) is zero; de-identification and gain are undefined")]
    ZeroDdiagOO,
    #[error("matrices disagree on the speaker axis")]
    SpeakerOrderMismatch,
}

impl MetricsError {
    pub fn kind(&self) -> &'static str {
        match self {
            MetricsError::TooFewSpeakers { .. } => "TooFewSpeakers",
            MetricsError::ZeroDdiagOO => "ZeroDdiagOO",
            MetricsError::SpeakerOrderMismatch => "SpeakerOrderMismatch",
        }
    }
}

/// Diagnostic flags surfaced alongside the metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MetricFlag {
    /// `D_diag(M_OP) > D_diag(M_OO)`: the cross matrix is more dominant than
    /// the original one, so the negative DeID is reported as-is.
    AssumptionViolatedOPgtOO,
    /// `D_diag(M_OO) = 0`: both metrics are undefined.
    ZeroDdiagOO,
    /// `D_diag(M_PP) = 0`: the gain is negative infinity.
    ZeroDdiagPP,
}

impl MetricFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            MetricFlag::AssumptionViolatedOPgtOO => "AssumptionViolatedOPgtOO",
            MetricFlag::ZeroDdiagOO => "ZeroDdiagOO",
            MetricFlag::ZeroDdiagPP => "ZeroDdiagPP",
        }
    }
}

/// Gain of voice distinctiveness in decibels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GainDb {
    Db(f64),
    /// `D_diag(M_PP) = 0`; an epsilon floor would manufacture a fake finite
    /// gain, so the sentinel is kept explicit all the way to the report.
    NegInfinity,
}

/// Absolute difference between mean diagonal and mean off-diagonal cells.
pub fn d_diag(matrix: &SimilarityMatrix) -> Result<f64, MetricsError> {
    let n = matrix.n();
    if n < 2 {
        return Err(MetricsError::TooFewSpeakers { n });
    }
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n * (n - 1));
    for i in 0..n {
        for j in 0..n {
            if i == j {
                diag.push(matrix.cell(i, j));
            } else {
                off.push(matrix.cell(i, j));
            }
        }
    }
    // summing in sorted order makes the value exactly invariant under
    // simultaneous row/column permutations
    diag.sort_by(f64::total_cmp);
    off.sort_by(f64::total_cmp);
    let diag_mean = pairwise_sum(&diag) / n as f64;
    let off_mean = pairwise_sum(&off) / (n * (n - 1)) as f64;
    Ok((diag_mean - off_mean).abs())
}

/// Outcome of the de-identification metric.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeIdOutcome {
    pub percent: f64,
    pub assumption_violated: bool,
}

/// De-identification in percent: `(1 - ddiag_op / ddiag_oo) * 100`.
///
/// A cross matrix more dominant than the original yields a negative value
/// with the violation marked, not a clamped zero.
pub fn de_id(ddiag_oo: f64, ddiag_op: f64) -> Result<DeIdOutcome, MetricsError> {
    if ddiag_oo == 0.0 {
        return Err(MetricsError::ZeroDdiagOO);
    }
    Ok(DeIdOutcome {
        percent: (1.0 - ddiag_op / ddiag_oo) * 100.0,
        assumption_violated: ddiag_op > ddiag_oo,
    })
}

/// Outcome of the voice-distinctiveness gain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainOutcome {
    pub gain: GainDb,
    pub zero_ddiag_pp: bool,
}

/// Gain of voice distinctiveness: `10 * log10(ddiag_pp / ddiag_oo)` dB.
pub fn gain_vd(ddiag_oo: f64, ddiag_pp: f64) -> Result<GainOutcome, MetricsError> {
    if ddiag_oo == 0.0 {
        return Err(MetricsError::ZeroDdiagOO);
    }
    if ddiag_pp == 0.0 {
        return Ok(GainOutcome {
            gain: GainDb::NegInfinity,
            zero_ddiag_pp: true,
        });
    }
    Ok(GainOutcome {
        gain: GainDb::Db(10.0 * (ddiag_pp / ddiag_oo).log10()),
        zero_ddiag_pp: false,
    })
}

/// Full assessment of one evaluation set.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub set_name: String,
    pub n_speakers: usize,
    pub ddiag_oo: f64,
    pub ddiag_op: f64,
    pub ddiag_pp: f64,
    /// Absent when `ddiag_oo` is zero.
    pub deid_percent: Option<f64>,
    /// Absent when `ddiag_oo` is zero.
    pub gvd_db: Option<GainDb>,
    pub flags: BTreeSet<MetricFlag>,
}

/// Assembles the metrics report from the three matrices.
pub fn report(
    m_oo: &SimilarityMatrix,
    m_op: &SimilarityMatrix,
    m_pp: &SimilarityMatrix,
    set_name: &str,
) -> Result<MetricsReport, MetricsError> {
    if m_oo.speakers() != m_op.speakers() || m_op.speakers() != m_pp.speakers() {
        return Err(MetricsError::SpeakerOrderMismatch);
    }
    let ddiag_oo = d_diag(m_oo)?;
    let ddiag_op = d_diag(m_op)?;
    let ddiag_pp = d_diag(m_pp)?;

    let mut flags = BTreeSet::new();
    let (deid_percent, gvd_db) = if ddiag_oo == 0.0 {
        flags.insert(MetricFlag::ZeroDdiagOO);
        (None, None)
    } else {
        let deid = de_id(ddiag_oo, ddiag_op).expect("ddiag_oo is positive");
        if deid.assumption_violated {
            flags.insert(MetricFlag::AssumptionViolatedOPgtOO);
        }
        let gain = gain_vd(ddiag_oo, ddiag_pp).expect("ddiag_oo is positive");
        if gain.zero_ddiag_pp {
            flags.insert(MetricFlag::ZeroDdiagPP);
        }
        (Some(deid.percent), Some(gain.gain))
    };

    Ok(MetricsReport {
        set_name: set_name.to_string(),
        n_speakers: m_oo.n(),
        ddiag_oo,
        ddiag_op,
        ddiag_pp,
        deid_percent,
        gvd_db,
        flags,
    })
}

impl Serialize for MetricsReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut fields = 6;
        if self.deid_percent.is_some() {
            fields += 1;
        }
        if self.gvd_db.is_some() {
            fields += 1;
        }
        let mut st = serializer.serialize_struct("MetricsReport", fields)?;
        st.serialize_field("ddiag_oo", &round6(self.ddiag_oo))?;
        st.serialize_field("ddiag_op", &round6(self.ddiag_op))?;
        st.serialize_field("ddiag_pp", &round6(self.ddiag_pp))?;
        if let Some(deid) = self.deid_percent {
            st.serialize_field("deid_percent", &round6(deid))?;
        }
        match self.gvd_db {
            Some(GainDb::Db(db)) => st.serialize_field("gvd_db", &round6(db))?,
            Some(GainDb::NegInfinity) => st.serialize_field("gvd_db", "-inf")?,
            None => {}
        }
        let flags: Vec<&str> = self.flags.iter().map(|f| f.as_str()).collect();
        st.serialize_field("flags", &flags)?;
        st.serialize_field("n_speakers", &self.n_speakers)?;
        st.serialize_field("set_name", &self.set_name)?;
        st.end()
    }
}

impl MetricsReport {
    /// Deterministic JSON rendering (fixed key order, 1e-6 precision,
    /// trailing newline).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }
}
