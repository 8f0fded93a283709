//! Voice similarity matrices built from calibrated llrs.
//!
//! Cell (i, j) is the sigmoid of the mean llr over all admissible segment
//! pairs between speakers i and j: the posterior of the averaged llr, not the
//! average of posteriors. Within one domain a segment is never compared to
//! itself (such scores would overestimate self-similarity), so a diagonal
//! cell needs at least two segments for its speaker.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::calibration::CalibratedTrial;
use crate::cohort::{CohortManifest, Domain, MatrixKind, SegmentId, SpeakerId};
use crate::numeric::{pairwise_sum, round6};

/// Logistic function, `1 / (1 + exp(-y))`, computed stably on both tails.
pub fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// An N x N grid of speaker-pair similarities in posterior space.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    kind: MatrixKind,
    n: usize,
    speakers: Vec<SpeakerId>,
    cells: Vec<f64>,
    pair_counts: Vec<u32>,
}

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("no admissible llr for speaker pair ({row}, {col}) in the {kind} matrix")]
    EmptyCell {
        row: SpeakerId,
        col: SpeakerId,
        kind: MatrixKind,
    },
    #[error("segment {segment} not present in the manifest ({domain} domain)")]
    UnknownSegment { segment: SegmentId, domain: Domain },
    #[error("trial ({left}, {right}) has domains {found} but the matrix kind is {expected}")]
    KindMismatch {
        left: SegmentId,
        right: SegmentId,
        found: MatrixKind,
        expected: MatrixKind,
    },
    #[error("llr for trial ({left}, {right}) is not finite")]
    NonFiniteLlr { left: SegmentId, right: SegmentId },
    #[error("matrices disagree on the speaker axis")]
    SpeakerOrderMismatch,
    #[error("matrix table line {line}: {reason}")]
    MalformedTable { line: usize, reason: String },
    #[error("cell ({row}, {col}) = {value} is outside [0, 1]")]
    CellOutOfRange { row: usize, col: usize, value: f64 },
}

impl SimilarityError {
    pub fn kind(&self) -> &'static str {
        match self {
            SimilarityError::EmptyCell { .. } => "EmptyCell",
            SimilarityError::UnknownSegment { .. } => "UnknownSegment",
            SimilarityError::KindMismatch { .. } => "KindMismatch",
            SimilarityError::NonFiniteLlr { .. } => "NonFiniteLlr",
            SimilarityError::SpeakerOrderMismatch => "SpeakerOrderMismatch",
            SimilarityError::MalformedTable { .. } => "MalformedTable",
            SimilarityError::CellOutOfRange { .. } => "CellOutOfRange",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            SimilarityError::MalformedTable { line, .. } => Some(*line),
            _ => None,
        }
    }
}

impl SimilarityMatrix {
    /// Assembles a matrix from raw parts.
    ///
    /// Cells must be finite and within the closed interval [0, 1]; the open
    /// interval is guaranteed only for matrices built from llrs, while
    /// hand-written tables (e.g. the identity pattern) may use the endpoints.
    pub fn from_parts(
        kind: MatrixKind,
        speakers: Vec<SpeakerId>,
        cells: Vec<f64>,
        pair_counts: Vec<u32>,
    ) -> Result<Self, SimilarityError> {
        let n = speakers.len();
        assert_eq!(cells.len(), n * n, "cells must be an n x n grid");
        assert_eq!(
            pair_counts.len(),
            n * n,
            "pair_counts must be an n x n grid"
        );
        for i in 0..n {
            for j in 0..n {
                let value = cells[i * n + j];
                if !value.is_finite() || !(0.0..=1.0).contains(&value) {
                    return Err(SimilarityError::CellOutOfRange {
                        row: i,
                        col: j,
                        value,
                    });
                }
            }
        }
        Ok(Self {
            kind,
            n,
            speakers,
            cells,
            pair_counts,
        })
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn speakers(&self) -> &[SpeakerId] {
        &self.speakers
    }

    pub fn cell(&self, i: usize, j: usize) -> f64 {
        self.cells[i * self.n + j]
    }

    pub fn pair_count(&self, i: usize, j: usize) -> u32 {
        self.pair_counts[i * self.n + j]
    }

    pub fn cells(&self) -> &[f64] {
        &self.cells
    }

    /// The matrix with every cell rounded to the 1e-6 export precision.
    pub fn rounded(&self) -> SimilarityMatrix {
        SimilarityMatrix {
            kind: self.kind,
            n: self.n,
            speakers: self.speakers.clone(),
            cells: self.cells.iter().map(|&c| round6(c)).collect(),
            pair_counts: self.pair_counts.clone(),
        }
    }
}

// An admissible contribution is one unordered segment pair; trials stating
// the same pair in both orientations collapse into a single contribution.
struct PairPool {
    // key -> (llr sum, trial count)
    pairs: HashMap<(SegmentId, SegmentId), (f64, u32)>,
}

impl PairPool {
    fn new() -> Self {
        Self {
            pairs: HashMap::new(),
        }
    }

    fn add(&mut self, key: (SegmentId, SegmentId), llr: f64) {
        let entry = self.pairs.entry(key).or_insert((0.0, 0));
        entry.0 += llr;
        entry.1 += 1;
    }
}

/// Builds one similarity matrix from calibrated trials.
///
/// Every speaker pair required by `kind` must have at least one admissible
/// llr; sparsity is tolerated by averaging over the pairs actually present,
/// but an empty cell is an error rather than a silent filler value.
pub fn build_matrix(
    kind: MatrixKind,
    manifest: &CohortManifest,
    trials: &[CalibratedTrial],
) -> Result<SimilarityMatrix, SimilarityError> {
    let n = manifest.speaker_count();
    // per speaker-pair pools, keyed (min_idx, max_idx)
    let mut pools: HashMap<(usize, usize), PairPool> = HashMap::new();

    for trial in trials {
        if !trial.llr.is_finite() {
            return Err(SimilarityError::NonFiniteLlr {
                left: trial.left.clone(),
                right: trial.right.clone(),
            });
        }
        let (left_spk, left_dom) = resolve(manifest, &trial.left, kind, true)?;
        let (right_spk, right_dom) = resolve(manifest, &trial.right, kind, false)?;
        let found = MatrixKind::from_domains(left_dom, right_dom);
        if found != kind {
            return Err(SimilarityError::KindMismatch {
                left: trial.left.clone(),
                right: trial.right.clone(),
                found,
                expected: kind,
            });
        }
        // a segment compared to itself carries no pair information
        if left_dom == right_dom && trial.left == trial.right {
            continue;
        }
        // orient the segment-pair key: by domain for OP, by id within a domain
        let key = if left_dom == right_dom {
            if trial.left <= trial.right {
                (trial.left.clone(), trial.right.clone())
            } else {
                (trial.right.clone(), trial.left.clone())
            }
        } else if left_dom == Domain::Original {
            (trial.left.clone(), trial.right.clone())
        } else {
            (trial.right.clone(), trial.left.clone())
        };
        let cell = (left_spk.min(right_spk), left_spk.max(right_spk));
        pools
            .entry(cell)
            .or_insert_with(PairPool::new)
            .add(key, trial.llr);
    }

    let mut cells = vec![0.0; n * n];
    let mut pair_counts = vec![0u32; n * n];
    for i in 0..n {
        for j in i..n {
            let pool = pools.get(&(i, j));
            let contributions: Vec<((SegmentId, SegmentId), f64)> = match pool {
                Some(pool) => {
                    let mut list: Vec<_> = pool
                        .pairs
                        .iter()
                        .map(|(k, (sum, cnt))| (k.clone(), sum / f64::from(*cnt)))
                        .collect();
                    // fixed order so the pairwise summation is reproducible
                    list.sort_by(|a, b| a.0.cmp(&b.0));
                    list
                }
                None => Vec::new(),
            };
            if contributions.is_empty() {
                return Err(SimilarityError::EmptyCell {
                    row: manifest.speaker_order()[i].clone(),
                    col: manifest.speaker_order()[j].clone(),
                    kind,
                });
            }
            let llrs: Vec<f64> = contributions.iter().map(|(_, llr)| *llr).collect();
            let mean = pairwise_sum(&llrs) / llrs.len() as f64;
            let value = sigmoid(mean);
            cells[i * n + j] = value;
            cells[j * n + i] = value;
            let count = llrs.len() as u32;
            pair_counts[i * n + j] = count;
            pair_counts[j * n + i] = count;
        }
    }

    Ok(SimilarityMatrix {
        kind,
        n,
        speakers: manifest.speaker_order().to_vec(),
        cells,
        pair_counts,
    })
}

fn resolve(
    manifest: &CohortManifest,
    segment: &SegmentId,
    kind: MatrixKind,
    left: bool,
) -> Result<(usize, Domain), SimilarityError> {
    let hits = manifest.resolve(segment);
    let pick = match hits.as_slice() {
        [] => None,
        [hit] => Some(*hit),
        hits => {
            // id present in both domains: the matrix kind disambiguates
            let wanted = match (kind, left) {
                (MatrixKind::OO, _) => Domain::Original,
                (MatrixKind::PP, _) => Domain::Protected,
                // OP trials are oriented during pooling, so either domain is
                // plausible here; prefer original on the left
                (MatrixKind::OP, true) => Domain::Original,
                (MatrixKind::OP, false) => Domain::Protected,
            };
            hits.iter().find(|(_, d)| *d == wanted).copied()
        }
    };
    pick.ok_or_else(|| SimilarityError::UnknownSegment {
        segment: segment.clone(),
        domain: match kind {
            MatrixKind::OO => Domain::Original,
            MatrixKind::PP => Domain::Protected,
            MatrixKind::OP => {
                if left {
                    Domain::Original
                } else {
                    Domain::Protected
                }
            }
        },
    })
}

/// Builds the OO, OP and PP matrices over the shared speaker order.
///
/// Only three matrices are materialised; the protected/original matrix is
/// the transpose of the original/protected one and carries no extra
/// information once similarity is symmetric.
pub fn build_all(
    manifest: &CohortManifest,
    oo: &[CalibratedTrial],
    op: &[CalibratedTrial],
    pp: &[CalibratedTrial],
) -> Result<(SimilarityMatrix, SimilarityMatrix, SimilarityMatrix), SimilarityError> {
    let m_oo = build_matrix(MatrixKind::OO, manifest, oo)?;
    let m_op = build_matrix(MatrixKind::OP, manifest, op)?;
    let m_pp = build_matrix(MatrixKind::PP, manifest, pp)?;
    Ok((m_oo, m_op, m_pp))
}

/// Serialises a matrix as a tab-separated table at 1e-6 precision.
///
/// The first header row and column carry the speaker ids; a `# counts`
/// section repeats the grid with the per-cell pair counts.
pub fn export_matrix(matrix: &SimilarityMatrix) -> String {
    let mut out = String::new();
    writeln!(out, "# kind: {}", matrix.kind()).expect("string write");
    let header: Vec<&str> = matrix.speakers().iter().map(SpeakerId::as_str).collect();
    writeln!(out, "\t{}", header.join("\t")).expect("string write");
    for i in 0..matrix.n() {
        out.push_str(matrix.speakers()[i].as_str());
        for j in 0..matrix.n() {
            write!(out, "\t{:.6}", matrix.cell(i, j)).expect("string write");
        }
        out.push('\n');
    }
    writeln!(out, "# counts").expect("string write");
    writeln!(out, "\t{}", header.join("\t")).expect("string write");
    for i in 0..matrix.n() {
        out.push_str(matrix.speakers()[i].as_str());
        for j in 0..matrix.n() {
            write!(out, "\t{}", matrix.pair_count(i, j)).expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Parses a table produced by [`export_matrix`].
///
/// The `# counts` section is optional for hand-written tables; absent counts
/// default to 1.
pub fn parse_matrix(text: &str) -> Result<SimilarityMatrix, SimilarityError> {
    let mut kind: Option<MatrixKind> = None;
    let mut speakers: Vec<SpeakerId> = Vec::new();
    let mut cells: Vec<f64> = Vec::new();
    let mut counts: Vec<u32> = Vec::new();
    let mut in_counts = false;
    let mut header_seen = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if let Some(rest) = raw.strip_prefix('#') {
            let rest = rest.trim();
            if let Some(k) = rest.strip_prefix("kind:") {
                let k = k.trim();
                kind =
                    Some(
                        MatrixKind::parse(k).ok_or_else(|| SimilarityError::MalformedTable {
                            line,
                            reason: format!("unknown matrix kind {k:?}"),
                        })?,
                    );
            } else if rest == "counts" {
                in_counts = true;
                header_seen = false;
            }
            continue;
        }
        if raw.starts_with('\t') {
            if header_seen {
                return Err(SimilarityError::MalformedTable {
                    line,
                    reason: "repeated header row".to_string(),
                });
            }
            header_seen = true;
            let ids: Result<Vec<SpeakerId>, _> =
                raw.split('\t').skip(1).map(SpeakerId::new).collect();
            let ids = ids.map_err(|e| SimilarityError::MalformedTable {
                line,
                reason: e.to_string(),
            })?;
            if speakers.is_empty() {
                speakers = ids;
            } else if speakers != ids {
                return Err(SimilarityError::MalformedTable {
                    line,
                    reason: "counts header disagrees with the matrix header".to_string(),
                });
            }
            continue;
        }
        let fields: Vec<&str> = raw.split('\t').collect();
        if speakers.is_empty() || fields.len() != speakers.len() + 1 {
            return Err(SimilarityError::MalformedTable {
                line,
                reason: format!(
                    "expected a row label plus {} cells, found {} fields",
                    speakers.len(),
                    fields.len().saturating_sub(1)
                ),
            });
        }
        for field in &fields[1..] {
            if in_counts {
                let c: u32 = field.parse().map_err(|_| SimilarityError::MalformedTable {
                    line,
                    reason: format!("count {field:?} is not a non-negative integer"),
                })?;
                counts.push(c);
            } else {
                let v: f64 = field.parse().map_err(|_| SimilarityError::MalformedTable {
                    line,
                    reason: format!("cell {field:?} is not a decimal number"),
                })?;
                cells.push(v);
            }
        }
    }

    let kind = kind.ok_or(SimilarityError::MalformedTable {
        line: 0,
        reason: "missing `# kind:` header".to_string(),
    })?;
    let n = speakers.len();
    if cells.len() != n * n {
        return Err(SimilarityError::MalformedTable {
            line: 0,
            reason: format!("expected {} cells, found {}", n * n, cells.len()),
        });
    }
    let pair_counts = if counts.is_empty() {
        vec![1; n * n]
    } else if counts.len() == n * n {
        counts
    } else {
        return Err(SimilarityError::MalformedTable {
            line: 0,
            reason: format!("expected {} counts, found {}", n * n, counts.len()),
        });
    };
    SimilarityMatrix::from_parts(kind, speakers, cells, pair_counts)
}
