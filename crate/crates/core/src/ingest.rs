//! Parsing of trial-score files and embedding tables, trial labelling, and
//! the cosine stand-in scorer.
//!
//! A score file carries one trial per line, `<seg-left> <seg-right> <score>`,
//! fields separated by runs of spaces or tabs. Segment domains are inferred
//! from the manifest, every trial is labelled target or impostor by speaker
//! identity, and trials are routed into the OO, OP and PP score sets.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::cohort::{CohortManifest, Domain, MatrixKind, SegmentId};

/// One scored comparison of two segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub left: SegmentId,
    pub right: SegmentId,
    pub raw_score: f64,
    pub left_domain: Domain,
    pub right_domain: Domain,
}

impl Trial {
    pub fn kind(&self) -> MatrixKind {
        MatrixKind::from_domains(self.left_domain, self.right_domain)
    }
}

/// Target (same speaker) or impostor (different speakers) trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialLabel {
    Target,
    Impostor,
}

impl fmt::Display for TrialLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrialLabel::Target => f.write_str("target"),
            TrialLabel::Impostor => f.write_str("impostor"),
        }
    }
}

/// All trials of one kind together with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSet {
    pub kind: MatrixKind,
    pub trials: Vec<Trial>,
    pub labels: Vec<TrialLabel>,
}

impl ScoreSet {
    fn empty(kind: MatrixKind) -> Self {
        Self {
            kind,
            trials: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.raw_score).collect()
    }

    pub fn target_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| **l == TrialLabel::Target)
            .count()
    }
}

/// The three score sets of one evaluation, partitioned by kind.
#[derive(Debug, Clone, PartialEq)]
pub struct ScorePartition {
    pub oo: ScoreSet,
    pub op: ScoreSet,
    pub pp: ScoreSet,
}

impl ScorePartition {
    pub fn get(&self, kind: MatrixKind) -> &ScoreSet {
        match kind {
            MatrixKind::OO => &self.oo,
            MatrixKind::OP => &self.op,
            MatrixKind::PP => &self.pp,
        }
    }
}

/// Fixed-dimension embedding vectors keyed by segment id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    order: Vec<SegmentId>,
    rows: HashMap<SegmentId, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            order: Vec::new(),
            rows: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn get(&self, segment: &SegmentId) -> Option<&[f64]> {
        self.rows.get(segment).map(Vec::as_slice)
    }

    /// Segment ids in insertion order.
    pub fn segments(&self) -> &[SegmentId] {
        &self.order
    }

    pub fn insert(&mut self, segment: SegmentId, vector: Vec<f64>) -> Result<(), IngestError> {
        if vector.len() != self.dim {
            return Err(IngestError::DimensionMismatch {
                line: 0,
                expected: self.dim,
                got: vector.len(),
            });
        }
        if self.rows.contains_key(&segment) {
            return Err(IngestError::DuplicateEmbedding { segment, line: 0 });
        }
        self.order.push(segment.clone());
        self.rows.insert(segment, vector);
        Ok(())
    }

    /// Merges two tables with disjoint segment ids into one.
    pub fn merged(&self, other: &EmbeddingTable) -> Result<EmbeddingTable, IngestError> {
        if self.dim != other.dim {
            return Err(IngestError::DimensionMismatch {
                line: 0,
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut out = self.clone();
        for segment in other.segments() {
            out.insert(segment.clone(), other.rows[segment].clone())?;
        }
        Ok(out)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: segment {segment} not present in the manifest")]
    UnknownSegment { segment: SegmentId, line: usize },
    #[error(
        "line {line}: segment {segment} exists in both domains; trial domain cannot be inferred"
    )]
    AmbiguousSegment { segment: SegmentId, line: usize },
    #[error("line {line}: score {value} is not finite")]
    NonFiniteScore { value: f64, line: usize },
    #[error("line {line}: trial ({left}, {right}) listed twice")]
    DuplicateTrial {
        left: SegmentId,
        right: SegmentId,
        line: usize,
    },
    #[error("line {line}: expected {expected} embedding values, found {got}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("line {line}: embedding for segment {segment} listed twice")]
    DuplicateEmbedding { segment: SegmentId, line: usize },
    #[error("segment {segment} has a zero-norm embedding; cosine is undefined")]
    ZeroNormVector { segment: SegmentId },
}

impl IngestError {
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::MalformedLine { .. } => "MalformedLine",
            IngestError::UnknownSegment { .. } => "UnknownSegment",
            IngestError::AmbiguousSegment { .. } => "AmbiguousSegment",
            IngestError::NonFiniteScore { .. } => "NonFiniteScore",
            IngestError::DuplicateTrial { .. } => "DuplicateTrial",
            IngestError::DimensionMismatch { .. } => "DimensionMismatch",
            IngestError::DuplicateEmbedding { .. } => "DuplicateEmbedding",
            IngestError::ZeroNormVector { .. } => "ZeroNormVector",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            IngestError::MalformedLine { line, .. }
            | IngestError::UnknownSegment { line, .. }
            | IngestError::AmbiguousSegment { line, .. }
            | IngestError::NonFiniteScore { line, .. }
            | IngestError::DuplicateTrial { line, .. }
            | IngestError::DimensionMismatch { line, .. }
            | IngestError::DuplicateEmbedding { line, .. } => {
                if *line == 0 {
                    None
                } else {
                    Some(*line)
                }
            }
            IngestError::ZeroNormVector { .. } => None,
        }
    }
}

fn resolve_segment(
    manifest: &CohortManifest,
    token: &str,
    line: usize,
) -> Result<(SegmentId, Domain), IngestError> {
    let segment = SegmentId::new(token).map_err(|_| IngestError::MalformedLine {
        line,
        reason: format!("invalid segment id {token:?}"),
    })?;
    let hits = manifest.resolve(&segment);
    match hits.as_slice() {
        [] => Err(IngestError::UnknownSegment { segment, line }),
        [(_, domain)] => Ok((segment, *domain)),
        _ => Err(IngestError::AmbiguousSegment { segment, line }),
    }
}

/// Parses a score file into trials, in line order.
pub fn parse_trials(text: &str, manifest: &CohortManifest) -> Result<Vec<Trial>, IngestError> {
    let mut trials = Vec::new();
    let mut seen: HashSet<(SegmentId, SegmentId)> = HashSet::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(IngestError::MalformedLine {
                line,
                reason: format!(
                    "expected `<seg-left> <seg-right> <score>`, found {} fields",
                    fields.len()
                ),
            });
        }
        // syntactic checks first, then resolution against the manifest
        let raw_score: f64 = fields[2].parse().map_err(|_| IngestError::MalformedLine {
            line,
            reason: format!("score {:?} is not a decimal number", fields[2]),
        })?;
        if !raw_score.is_finite() {
            return Err(IngestError::NonFiniteScore {
                value: raw_score,
                line,
            });
        }
        let (left, left_domain) = resolve_segment(manifest, fields[0], line)?;
        let (right, right_domain) = resolve_segment(manifest, fields[1], line)?;
        if !seen.insert((left.clone(), right.clone())) {
            return Err(IngestError::DuplicateTrial { left, right, line });
        }
        trials.push(Trial {
            left,
            right,
            raw_score,
            left_domain,
            right_domain,
        });
    }
    Ok(trials)
}

/// Labels trials by speaker identity and routes them into the three sets.
pub fn partition_trials(
    manifest: &CohortManifest,
    trials: Vec<Trial>,
) -> Result<ScorePartition, IngestError> {
    let mut partition = ScorePartition {
        oo: ScoreSet::empty(MatrixKind::OO),
        op: ScoreSet::empty(MatrixKind::OP),
        pp: ScoreSet::empty(MatrixKind::PP),
    };
    for trial in trials {
        let left_spk = lookup_speaker(manifest, &trial.left, trial.left_domain)?;
        let right_spk = lookup_speaker(manifest, &trial.right, trial.right_domain)?;
        let label = if left_spk == right_spk {
            TrialLabel::Target
        } else {
            TrialLabel::Impostor
        };
        let set = match trial.kind() {
            MatrixKind::OO => &mut partition.oo,
            MatrixKind::OP => &mut partition.op,
            MatrixKind::PP => &mut partition.pp,
        };
        set.trials.push(trial);
        set.labels.push(label);
    }
    Ok(partition)
}

fn lookup_speaker(
    manifest: &CohortManifest,
    segment: &SegmentId,
    domain: Domain,
) -> Result<usize, IngestError> {
    manifest
        .resolve(segment)
        .into_iter()
        .find(|(_, d)| *d == domain)
        .map(|(spk, _)| spk)
        .ok_or_else(|| IngestError::UnknownSegment {
            segment: segment.clone(),
            line: 0,
        })
}

/// Parses and partitions a score file in one step.
pub fn parse_scores(text: &str, manifest: &CohortManifest) -> Result<ScorePartition, IngestError> {
    let trials = parse_trials(text, manifest)?;
    partition_trials(manifest, trials)
}

/// Formats trials back to score-file lines (shortest round-trip floats).
pub fn format_score_lines(trials: &[Trial]) -> String {
    let mut out = String::new();
    for t in trials {
        out.push_str(&format!("{} {} {}\n", t.left, t.right, t.raw_score));
    }
    out
}

/// Parses an embedding file: `<seg-id> v1 v2 ... vd` per line.
pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable, IngestError> {
    let mut table: Option<EmbeddingTable> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut fields = raw.split_whitespace();
        let id_token = fields.next().expect("non-blank line has a first field");
        let segment = SegmentId::new(id_token).map_err(|_| IngestError::MalformedLine {
            line,
            reason: format!("invalid segment id {id_token:?}"),
        })?;
        let mut vector = Vec::new();
        for field in fields {
            let value: f64 = field.parse().map_err(|_| IngestError::MalformedLine {
                line,
                reason: format!("embedding value {field:?} is not a decimal number"),
            })?;
            if !value.is_finite() {
                return Err(IngestError::MalformedLine {
                    line,
                    reason: format!("embedding value {value} is not finite"),
                });
            }
            vector.push(value);
        }
        if vector.is_empty() {
            return Err(IngestError::MalformedLine {
                line,
                reason: "embedding row has no values".to_string(),
            });
        }
        let table = table.get_or_insert_with(|| EmbeddingTable::new(vector.len()));
        if vector.len() != table.dim() {
            return Err(IngestError::DimensionMismatch {
                line,
                expected: table.dim(),
                got: vector.len(),
            });
        }
        if table.rows.contains_key(&segment) {
            return Err(IngestError::DuplicateEmbedding { segment, line });
        }
        table.order.push(segment.clone());
        table.rows.insert(segment, vector);
    }
    table.ok_or(IngestError::MalformedLine {
        line: 0,
        reason: "embedding file is empty".to_string(),
    })
}

/// Formats an embedding table back to file lines, insertion order.
pub fn format_embedding_lines(table: &EmbeddingTable) -> String {
    let mut out = String::new();
    for segment in table.segments() {
        out.push_str(segment.as_str());
        for v in table.get(segment).expect("segment listed in order") {
            out.push(' ');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    out
}

/// Scores segment pairs with scaled cosine similarity.
///
/// A stand-in for an external verification back-end so the pipeline runs
/// self-contained; `raw_score = scale * cos(left, right)`. Domains are
/// resolved through the manifest.
pub fn score_cosine(
    table: &EmbeddingTable,
    pairs: &[(SegmentId, SegmentId)],
    scale: f64,
    manifest: &CohortManifest,
) -> Result<Vec<Trial>, IngestError> {
    assert!(
        scale > 0.0 && scale.is_finite(),
        "scale must be a positive real"
    );
    let mut trials = Vec::with_capacity(pairs.len());
    for (left, right) in pairs {
        let lv = table.get(left).ok_or_else(|| IngestError::UnknownSegment {
            segment: left.clone(),
            line: 0,
        })?;
        let rv = table
            .get(right)
            .ok_or_else(|| IngestError::UnknownSegment {
                segment: right.clone(),
                line: 0,
            })?;
        let raw_score = scale * cosine(lv, rv, left, right)?;
        let (_, left_domain) = resolve_for_scoring(manifest, left)?;
        let (_, right_domain) = resolve_for_scoring(manifest, right)?;
        trials.push(Trial {
            left: left.clone(),
            right: right.clone(),
            raw_score,
            left_domain,
            right_domain,
        });
    }
    Ok(trials)
}

fn resolve_for_scoring(
    manifest: &CohortManifest,
    segment: &SegmentId,
) -> Result<(usize, Domain), IngestError> {
    let hits = manifest.resolve(segment);
    match hits.as_slice() {
        [] => Err(IngestError::UnknownSegment {
            segment: segment.clone(),
            line: 0,
        }),
        [hit] => Ok(*hit),
        _ => Err(IngestError::AmbiguousSegment {
            segment: segment.clone(),
            line: 0,
        }),
    }
}

fn cosine(x: &[f64], y: &[f64], left: &SegmentId, right: &SegmentId) -> Result<f64, IngestError> {
    let mut dot = 0.0;
    let mut nx = 0.0;
    let mut ny = 0.0;
    for i in 0..x.len() {
        dot += x[i] * y[i];
        nx += x[i] * x[i];
        ny += y[i] * y[i];
    }
    if nx == 0.0 {
        return Err(IngestError::ZeroNormVector {
            segment: left.clone(),
        });
    }
    if ny == 0.0 {
        return Err(IngestError::ZeroNormVector {
            segment: right.clone(),
        });
    }
    Ok(dot / (nx.sqrt() * ny.sqrt()))
}
