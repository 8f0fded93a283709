//! Segment/speaker bookkeeping shared by every other module.
//!
//! A [`CohortManifest`] maps each speech segment to its speaker and to the
//! domain it lives in (original or protected recordings), and fixes the
//! canonical speaker ordering used for the rows and columns of every
//! similarity matrix built from it.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

/// Identifier of a single speech segment (utterance).
///
/// A segment id is a non-empty token without whitespace; comparison is exact
/// byte equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SegmentId(String);

impl SegmentId {
    pub fn new(value: impl Into<String>) -> Result<Self, CohortError> {
        let value = value.into();
        if value.is_empty() || value.chars().any(char::is_whitespace) {
            return Err(CohortError::InvalidToken { token: value });
        }
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SegmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Identifier of a speaker.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SpeakerId(String);

impl SpeakerId {
    pub fn new(value: impl Into<String>) -> Result<Self, CohortError> {
        let value = value.into();
        if value.is_empty() || value.chars().any(char::is_whitespace) {
            return Err(CohortError::InvalidToken { token: value });
        }
        Ok(Self(value))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SpeakerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Which side of the pseudonymisation mapping a segment belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Original,
    Protected,
}

impl Domain {
    pub const ALL: [Domain; 2] = [Domain::Original, Domain::Protected];

    fn index(self) -> usize {
        match self {
            Domain::Original => 0,
            Domain::Protected => 1,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Domain::Original => f.write_str("original"),
            Domain::Protected => f.write_str("protected"),
        }
    }
}

/// Which pair of domains a score set or similarity matrix compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    /// Original vs original.
    OO,
    /// Original vs protected (either orientation).
    OP,
    /// Protected vs protected.
    PP,
}

impl MatrixKind {
    pub const ALL: [MatrixKind; 3] = [MatrixKind::OO, MatrixKind::OP, MatrixKind::PP];

    pub fn from_domains(a: Domain, b: Domain) -> Self {
        match (a, b) {
            (Domain::Original, Domain::Original) => MatrixKind::OO,
            (Domain::Protected, Domain::Protected) => MatrixKind::PP,
            _ => MatrixKind::OP,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::OO => "OO",
            MatrixKind::OP => "OP",
            MatrixKind::PP => "PP",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "OO" => Some(MatrixKind::OO),
            "OP" => Some(MatrixKind::OP),
            "PP" => Some(MatrixKind::PP),
            _ => None,
        }
    }
}

impl fmt::Display for MatrixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum CohortError {
    #[error("identifier {token:?} must be a non-empty token without whitespace")]
    InvalidToken { token: String },
    #[error("manifest input is empty")]
    EmptyInput,
    #[error("segment {segment} listed twice in the {domain} domain")]
    DuplicateSegment { segment: SegmentId, domain: Domain },
    #[error("speaker {speaker} has no segments in the {domain} domain")]
    MissingDomainCoverage { speaker: SpeakerId, domain: Domain },
    #[error("unknown speaker {speaker}")]
    UnknownSpeaker { speaker: SpeakerId },
    #[error("utt2spk line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
}

impl CohortError {
    pub fn kind(&self) -> &'static str {
        match self {
            CohortError::InvalidToken { .. } => "InvalidToken",
            CohortError::EmptyInput => "EmptyInput",
            CohortError::DuplicateSegment { .. } => "DuplicateSegment",
            CohortError::MissingDomainCoverage { .. } => "MissingDomainCoverage",
            CohortError::UnknownSpeaker { .. } => "UnknownSpeaker",
            CohortError::MalformedLine { .. } => "MalformedLine",
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            CohortError::MalformedLine { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Immutable registry of segments, their speakers and domains.
///
/// `speaker_order` is the first-appearance order of speakers in the input;
/// every matrix built from the same manifest shares it, so rows and columns
/// stay aligned across the OO, OP and PP matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortManifest {
    entries: Vec<(SegmentId, SpeakerId, Domain)>,
    speaker_order: Vec<SpeakerId>,
    speaker_index: HashMap<SpeakerId, usize>,
    // one segment->speaker map per domain
    segment_speaker: [HashMap<SegmentId, usize>; 2],
    // per speaker, per domain, segments in insertion order
    speaker_segments: [Vec<Vec<SegmentId>>; 2],
}

impl CohortManifest {
    /// Number of speakers.
    pub fn speaker_count(&self) -> usize {
        self.speaker_order.len()
    }

    /// Canonical speaker ordering (first appearance in the input).
    pub fn speaker_order(&self) -> &[SpeakerId] {
        &self.speaker_order
    }

    pub fn speaker_position(&self, speaker: &SpeakerId) -> Option<usize> {
        self.speaker_index.get(speaker).copied()
    }

    /// All `(segment, speaker, domain)` entries in insertion order.
    pub fn entries(&self) -> &[(SegmentId, SpeakerId, Domain)] {
        &self.entries
    }

    /// Resolves a segment id to its speaker index and domain.
    ///
    /// Returns one hit per domain the id appears in; ids are unique within a
    /// domain but may legally recur across domains.
    pub fn resolve(&self, segment: &SegmentId) -> Vec<(usize, Domain)> {
        let mut hits = Vec::new();
        for domain in Domain::ALL {
            if let Some(&spk) = self.segment_speaker[domain.index()].get(segment) {
                hits.push((spk, domain));
            }
        }
        hits
    }

    /// Segments of one speaker in one domain, in insertion order.
    pub fn segments_of(
        &self,
        speaker: &SpeakerId,
        domain: Domain,
    ) -> Result<&[SegmentId], CohortError> {
        let idx = self.speaker_index.get(speaker).copied().ok_or_else(|| {
            CohortError::UnknownSpeaker {
                speaker: speaker.clone(),
            }
        })?;
        Ok(&self.speaker_segments[domain.index()][idx])
    }

    /// Like [`segments_of`](Self::segments_of) but by speaker position.
    pub fn segments_at(&self, speaker_idx: usize, domain: Domain) -> &[SegmentId] {
        &self.speaker_segments[domain.index()][speaker_idx]
    }

    /// Serialises one domain back to utt2spk lines (insertion order).
    pub fn utt2spk_lines(&self, domain: Domain) -> String {
        let mut out = String::new();
        for (segment, speaker, d) in &self.entries {
            if *d == domain {
                out.push_str(segment.as_str());
                out.push(' ');
                out.push_str(speaker.as_str());
                out.push('\n');
            }
        }
        out
    }
}

/// Builds a manifest from `(segment, speaker, domain)` triples.
///
/// Speaker order is the first-appearance order in `mapping`. When both
/// domains are populated, every speaker must own at least one segment in
/// each; pseudonymisation maps each speaker's utterances, so a speaker
/// missing on either side is an error rather than a silently shrunken axis.
pub fn build_manifest(
    mapping: impl IntoIterator<Item = (SegmentId, SpeakerId, Domain)>,
) -> Result<CohortManifest, CohortError> {
    let entries: Vec<(SegmentId, SpeakerId, Domain)> = mapping.into_iter().collect();
    if entries.is_empty() {
        return Err(CohortError::EmptyInput);
    }

    let mut speaker_order: Vec<SpeakerId> = Vec::new();
    let mut speaker_index: HashMap<SpeakerId, usize> = HashMap::new();
    let mut segment_speaker: [HashMap<SegmentId, usize>; 2] = [HashMap::new(), HashMap::new()];
    let mut speaker_segments: [Vec<Vec<SegmentId>>; 2] = [Vec::new(), Vec::new()];

    for (segment, speaker, domain) in &entries {
        let idx = match speaker_index.get(speaker) {
            Some(&idx) => idx,
            None => {
                let idx = speaker_order.len();
                speaker_order.push(speaker.clone());
                speaker_index.insert(speaker.clone(), idx);
                speaker_segments[0].push(Vec::new());
                speaker_segments[1].push(Vec::new());
                idx
            }
        };
        let d = domain.index();
        if segment_speaker[d].insert(segment.clone(), idx).is_some() {
            return Err(CohortError::DuplicateSegment {
                segment: segment.clone(),
                domain: *domain,
            });
        }
        speaker_segments[d][idx].push(segment.clone());
    }

    let both_domains = !segment_speaker[0].is_empty() && !segment_speaker[1].is_empty();
    if both_domains {
        for (idx, speaker) in speaker_order.iter().enumerate() {
            for domain in Domain::ALL {
                if speaker_segments[domain.index()][idx].is_empty() {
                    return Err(CohortError::MissingDomainCoverage {
                        speaker: speaker.clone(),
                        domain,
                    });
                }
            }
        }
    }

    Ok(CohortManifest {
        entries,
        speaker_order,
        speaker_index,
        segment_speaker,
        speaker_segments,
    })
}

fn parse_utt2spk(
    text: &str,
    domain: Domain,
) -> Result<Vec<(SegmentId, SpeakerId, Domain)>, CohortError> {
    let mut triples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_number = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(CohortError::MalformedLine {
                line: line_number,
                reason: format!(
                    "expected `<segment-id> <speaker-id>`, found {} fields",
                    fields.len()
                ),
            });
        }
        let segment = SegmentId::new(fields[0])?;
        let speaker = SpeakerId::new(fields[1])?;
        triples.push((segment, speaker, domain));
    }
    Ok(triples)
}

/// Parses one utt2spk file per domain into a manifest.
///
/// Original entries are scanned before protected ones, so the speaker order
/// is the first-appearance order in the original-domain file.
pub fn from_utt2spk(original: &str, protected: &str) -> Result<CohortManifest, CohortError> {
    let mut triples = parse_utt2spk(original, Domain::Original)?;
    triples.extend(parse_utt2spk(protected, Domain::Protected)?);
    build_manifest(triples)
}
