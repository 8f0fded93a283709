//! Deterministic synthetic cohorts for exercising the full pipeline.
//!
//! Speakers are Gaussian clusters in embedding space: each speaker gets a
//! mean drawn with `between_speaker_std`, each segment adds noise with
//! `within_speaker_std`, and scores are scaled cosines. The scenarios realise
//! the canonical pseudonymisation regimes:
//!
//! * `Nop` — protection does nothing; the protected table is a copy.
//! * `Collapse` — every speaker is mapped onto one shared pseudo voice;
//!   de-identification is strong but distinctiveness is destroyed.
//! * `Ideal` — each speaker gets its own fresh pseudo voice, orthogonal to
//!   all original voices; strong de-identification, distinctiveness kept.
//! * `Shift` — a small shared deterministic offset; partial de-identification
//!   with distinctiveness essentially preserved.
//!
//! All randomness comes from ChaCha20 seeded via `seed_from_u64`, with
//! normals produced by the Box–Muller transform (two 53-bit uniforms per
//! variate, `z = sqrt(-2 ln u1) * cos(2 pi u2)`), so golden files can be
//! reproduced from the documented draw order alone.

use std::collections::HashMap;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::cohort::{build_manifest, CohortManifest, Domain, MatrixKind, SegmentId, SpeakerId};
use crate::ingest::{partition_trials, score_cosine, EmbeddingTable, Trial};
use crate::metrics::MetricsReport;
use crate::pipeline::{evaluate_partition, EvaluationArtifacts, EvaluationOptions, PipelineError};
use crate::similarity::{sigmoid, SimilarityMatrix};

/// Protection behaviour to synthesise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Nop,
    Collapse,
    Ideal,
    Shift,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Nop,
        Scenario::Collapse,
        Scenario::Ideal,
        Scenario::Shift,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Nop => "nop",
            Scenario::Collapse => "collapse",
            Scenario::Ideal => "ideal",
            Scenario::Shift => "shift",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "nop" => Some(Scenario::Nop),
            "collapse" => Some(Scenario::Collapse),
            "ideal" => Some(Scenario::Ideal),
            "shift" => Some(Scenario::Shift),
            _ => None,
        }
    }
}

/// Per-coordinate magnitude of the `Shift` offset, in units of
/// `between_speaker_std`.
const SHIFT_OFFSET_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub segments_per_speaker: usize,
    pub embedding_dim: usize,
    pub between_speaker_std: f64,
    pub within_speaker_std: f64,
    pub scenario: Scenario,
    pub seed: u64,
    /// Also emit the cross-domain pairs that compare a segment with its own
    /// protected version. Off by default: the exhaustive lists then mirror
    /// the within-domain pair structure, which keeps the no-op scenario an
    /// exact fixed point of the metrics.
    pub include_same_source_op: bool,
}

impl SynthConfig {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        Self {
            scenario,
            seed,
            ..Self::default()
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_speakers: 10,
            segments_per_speaker: 5,
            embedding_dim: 16,
            between_speaker_std: 1.0,
            within_speaker_std: 0.1,
            scenario: Scenario::Nop,
            seed: 0,
            include_same_source_op: false,
        }
    }
}

/// A generated cohort: manifest plus one embedding table per domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub label: String,
    pub manifest: CohortManifest,
    pub embeddings_o: EmbeddingTable,
    pub embeddings_p: EmbeddingTable,
    include_same_source_op: bool,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {reason}")]
    InvalidConfig { reason: String },
    #[error("cohort too large for the brute-force oracle ({n_speakers} speakers, {segments} segments/speaker; limits are 4 and 3)")]
    TooLargeForOracle { n_speakers: usize, segments: usize },
}

impl SynthError {
    pub fn kind(&self) -> &'static str {
        match self {
            SynthError::InvalidConfig { .. } => "InvalidConfig",
            SynthError::TooLargeForOracle { .. } => "TooLargeForOracle",
        }
    }
}

/// ChaCha20-backed source of standard normals (Box–Muller).
pub struct GaussianSource {
    rng: ChaCha20Rng,
}

impl GaussianSource {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
        }
    }

    // uniform in [0, 1) with 53 random bits
    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// One standard normal; consumes exactly two generator words.
    pub fn standard_normal(&mut self) -> f64 {
        // u1 in (0, 1] so the log is finite
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    // vector supported on coords [lo, hi), zero elsewhere; draws are consumed
    // for the supported coordinates only
    fn masked_vector(&mut self, dim: usize, lo: usize, hi: usize, std: f64) -> Vec<f64> {
        (0..dim)
            .map(|k| {
                if (lo..hi).contains(&k) {
                    std * self.standard_normal()
                } else {
                    0.0
                }
            })
            .collect()
    }
}

fn validate(config: &SynthConfig) -> Result<(), SynthError> {
    let mut problems = Vec::new();
    if config.n_speakers < 2 {
        problems.push("n_speakers must be at least 2");
    }
    if config.segments_per_speaker < 2 {
        problems.push("segments_per_speaker must be at least 2");
    }
    if config.embedding_dim < 1 {
        problems.push("embedding_dim must be at least 1");
    }
    if !(config.between_speaker_std > 0.0 && config.between_speaker_std.is_finite()) {
        problems.push("between_speaker_std must be a positive real");
    }
    if !(config.within_speaker_std > 0.0 && config.within_speaker_std.is_finite()) {
        problems.push("within_speaker_std must be a positive real");
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(SynthError::InvalidConfig {
            reason: problems.join("; "),
        })
    }
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn id_width(count: usize) -> usize {
    count.to_string().len().max(2)
}

/// Generates a cohort; identical configs produce identical cohorts.
///
/// Original voices occupy the first `ceil(dim / 2)` embedding coordinates;
/// the remaining coordinates are reserved for the `Ideal` pseudo voices,
/// which makes them orthogonal to every original segment by construction
/// (their dot products are exact zeros, not merely small numbers).
pub fn generate(config: &SynthConfig) -> Result<SynthCohort, SynthError> {
    validate(config)?;
    let n = config.n_speakers;
    let segs = config.segments_per_speaker;
    let dim = config.embedding_dim;
    let voice_dims = dim.div_ceil(2);
    if config.scenario == Scenario::Ideal && voice_dims == dim {
        return Err(SynthError::InvalidConfig {
            reason: "the ideal scenario needs embedding_dim >= 2".to_string(),
        });
    }
    let mut source = GaussianSource::new(config.seed);

    // draw order: speaker means, then original noise, then scenario draws;
    // all variates are coordinate-minor within a vector
    let means: Vec<Vec<f64>> = (0..n)
        .map(|_| source.masked_vector(dim, 0, voice_dims, config.between_speaker_std))
        .collect();
    let originals: Vec<Vec<Vec<f64>>> = means
        .iter()
        .map(|mean| {
            (0..segs)
                .map(|_| {
                    add(
                        mean,
                        &source.masked_vector(dim, 0, voice_dims, config.within_speaker_std),
                    )
                })
                .collect()
        })
        .collect();

    let protected: Vec<Vec<Vec<f64>>> = match config.scenario {
        Scenario::Nop => originals.clone(),
        Scenario::Collapse => {
            let shared = source.masked_vector(dim, 0, voice_dims, config.between_speaker_std);
            (0..n)
                .map(|_| {
                    (0..segs)
                        .map(|_| {
                            add(
                                &shared,
                                &source.masked_vector(
                                    dim,
                                    0,
                                    voice_dims,
                                    config.within_speaker_std,
                                ),
                            )
                        })
                        .collect()
                })
                .collect()
        }
        Scenario::Ideal => {
            // every utterance of a speaker is rendered with the speaker's own
            // pseudo voice, supported on the coordinates no original voice
            // touches
            (0..n)
                .map(|_| {
                    let pseudo =
                        source.masked_vector(dim, voice_dims, dim, config.between_speaker_std);
                    (0..segs).map(|_| pseudo.clone()).collect()
                })
                .collect()
        }
        Scenario::Shift => {
            let mut offset = vec![0.0; dim];
            for o in offset.iter_mut().take(voice_dims) {
                *o = SHIFT_OFFSET_FACTOR * config.between_speaker_std;
            }
            originals
                .iter()
                .map(|segs| segs.iter().map(|x| add(x, &offset)).collect())
                .collect()
        }
    };

    let sw = id_width(n);
    let kw = id_width(segs);
    let speaker_ids: Vec<SpeakerId> = (0..n)
        .map(|i| SpeakerId::new(format!("s{:0sw$}", i + 1)).expect("generated id is a token"))
        .collect();

    let mut triples = Vec::new();
    let mut table_o = EmbeddingTable::new(dim);
    let mut table_p = EmbeddingTable::new(dim);
    for domain in Domain::ALL {
        for (i, speaker) in speaker_ids.iter().enumerate() {
            for k in 0..segs {
                let tag = match domain {
                    Domain::Original => 'o',
                    Domain::Protected => 'p',
                };
                let segment =
                    SegmentId::new(format!("{}_{tag}{:0kw$}", speaker, k + 1)).expect("token");
                triples.push((segment.clone(), speaker.clone(), domain));
                let (table, values) = match domain {
                    Domain::Original => (&mut table_o, &originals[i][k]),
                    Domain::Protected => (&mut table_p, &protected[i][k]),
                };
                table
                    .insert(segment, values.clone())
                    .expect("generated ids are unique");
            }
        }
    }
    let manifest = build_manifest(triples).expect("generated manifest is well-formed");

    Ok(SynthCohort {
        label: format!("{}-seed{}", config.scenario.as_str(), config.seed),
        manifest,
        embeddings_o: table_o,
        embeddings_p: table_p,
        include_same_source_op: config.include_same_source_op,
    })
}

/// The exhaustive trial pair lists for a cohort.
///
/// Within a domain every unordered segment pair appears once; across domains
/// one orientation per unordered pair of segment indices is emitted, so the
/// cross list mirrors the within-domain structure pair for pair.
pub struct ExhaustivePairs {
    pub oo: Vec<(SegmentId, SegmentId)>,
    pub op: Vec<(SegmentId, SegmentId)>,
    pub pp: Vec<(SegmentId, SegmentId)>,
}

pub fn exhaustive_pairs(cohort: &SynthCohort) -> ExhaustivePairs {
    let o = cohort.embeddings_o.segments();
    let p = cohort.embeddings_p.segments();
    debug_assert_eq!(o.len(), p.len());
    let m = o.len();
    let mut oo = Vec::new();
    let mut op = Vec::new();
    let mut pp = Vec::new();
    for a in 0..m {
        for b in (a + 1)..m {
            oo.push((o[a].clone(), o[b].clone()));
            op.push((o[a].clone(), p[b].clone()));
            pp.push((p[a].clone(), p[b].clone()));
        }
    }
    if cohort.include_same_source_op {
        for a in 0..m {
            op.push((o[a].clone(), p[a].clone()));
        }
    }
    ExhaustivePairs { oo, op, pp }
}

/// Scores the exhaustive lists with the cosine scorer.
pub fn exhaustive_trials(cohort: &SynthCohort, scale: f64) -> Result<Vec<Trial>, PipelineError> {
    let pairs = exhaustive_pairs(cohort);
    let table = cohort.embeddings_o.merged(&cohort.embeddings_p)?;
    let mut trials = score_cosine(&table, &pairs.oo, scale, &cohort.manifest)?;
    trials.extend(score_cosine(&table, &pairs.op, scale, &cohort.manifest)?);
    trials.extend(score_cosine(&table, &pairs.pp, scale, &cohort.manifest)?);
    Ok(trials)
}

/// Full chain over a cohort: cosine scores, oracle calibration, matrices.
pub fn run_pipeline_artifacts(
    cohort: &SynthCohort,
    scale: f64,
) -> Result<EvaluationArtifacts, PipelineError> {
    let trials = exhaustive_trials(cohort, scale)?;
    let partition = partition_trials(&cohort.manifest, trials)?;
    evaluate_partition(
        &cohort.manifest,
        &partition,
        &cohort.label,
        &EvaluationOptions::default(),
    )
}

/// Full chain over a cohort, reduced to the metrics report.
pub fn run_pipeline(cohort: &SynthCohort, scale: f64) -> Result<MetricsReport, PipelineError> {
    Ok(run_pipeline_artifacts(cohort, scale)?.report)
}

// ---------------------------------------------------------------------------
// Brute-force oracle: an independent route to the three matrices, built from
// naive loops and a window-minimax isotonic fit instead of the PAV stack.
// ---------------------------------------------------------------------------

const ORACLE_MAX_SPEAKERS: usize = 4;
const ORACLE_MAX_SEGMENTS: usize = 3;

/// Least-squares isotonic fit by the minimax-of-window-averages formula:
/// `mu_i = min over v >= i of (max over u <= i of avg(y[u..=v]))`.
fn isotonic_minimax(groups: &[(f64, f64, f64)]) -> Vec<f64> {
    let k = groups.len();
    let mut target_prefix = vec![0.0; k + 1];
    let mut weight_prefix = vec![0.0; k + 1];
    for (i, (_, target_sum, weight)) in groups.iter().enumerate() {
        target_prefix[i + 1] = target_prefix[i] + target_sum;
        weight_prefix[i + 1] = weight_prefix[i] + weight;
    }
    let avg = |u: usize, v: usize| {
        (target_prefix[v + 1] - target_prefix[u]) / (weight_prefix[v + 1] - weight_prefix[u])
    };
    (0..k)
        .map(|i| {
            let mut outer = f64::INFINITY;
            for v in i..k {
                let mut inner = f64::NEG_INFINITY;
                for u in 0..=i {
                    inner = inner.max(avg(u, v));
                }
                outer = outer.min(inner);
            }
            outer
        })
        .collect()
}

struct OracleCalibration {
    // (score, posterior) per tie-group, ascending
    groups: Vec<(f64, f64)>,
    prior_log_odds: f64,
}

impl OracleCalibration {
    fn fit(mut scored: Vec<(f64, bool)>) -> Self {
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut groups: Vec<(f64, f64, f64)> = Vec::new();
        for (score, target) in &scored {
            let y = if *target { 1.0 } else { 0.0 };
            match groups.last_mut() {
                Some(g) if g.0 == *score => {
                    g.1 += y;
                    g.2 += 1.0;
                }
                _ => groups.push((*score, y, 1.0)),
            }
        }
        let total = scored.len() as f64;
        let targets: f64 = groups.iter().map(|g| g.1).sum();
        let epsilon = 1.0 / (2.0 * (total + 1.0));
        let fitted = isotonic_minimax(&groups);
        let out = groups
            .iter()
            .zip(fitted)
            .map(|(g, mu)| (g.0, mu.clamp(epsilon, 1.0 - epsilon)))
            .collect();
        Self {
            groups: out,
            prior_log_odds: (targets / (total - targets)).ln(),
        }
    }

    fn llr(&self, score: f64) -> f64 {
        let p = self
            .groups
            .iter()
            .find(|(s, _)| *s == score)
            .expect("oracle scores come from the fitted set")
            .1;
        (p / (1.0 - p)).ln() - self.prior_log_odds
    }
}

/// Independent recomputation of the three matrices by naive enumeration.
///
/// Restricted to small cohorts; this is a test oracle, not a fast path.
pub fn brute_force_similarity(
    cohort: &SynthCohort,
    scale: f64,
) -> Result<(SimilarityMatrix, SimilarityMatrix, SimilarityMatrix), SynthError> {
    let manifest = &cohort.manifest;
    let n = manifest.speaker_count();
    let max_segments = (0..n)
        .flat_map(|i| {
            Domain::ALL
                .iter()
                .map(move |d| manifest.segments_at(i, *d).len())
        })
        .max()
        .unwrap_or(0);
    if n > ORACLE_MAX_SPEAKERS || max_segments > ORACLE_MAX_SEGMENTS {
        return Err(SynthError::TooLargeForOracle {
            n_speakers: n,
            segments: max_segments,
        });
    }

    // naive segment -> (speaker, domain) lookup, and segment -> vector
    let mut segment_info: HashMap<SegmentId, (usize, Domain)> = HashMap::new();
    let mut vectors: HashMap<SegmentId, Vec<f64>> = HashMap::new();
    for i in 0..n {
        for domain in Domain::ALL {
            for segment in manifest.segments_at(i, domain) {
                segment_info.insert(segment.clone(), (i, domain));
                let table = match domain {
                    Domain::Original => &cohort.embeddings_o,
                    Domain::Protected => &cohort.embeddings_p,
                };
                vectors.insert(
                    segment.clone(),
                    table
                        .get(segment)
                        .expect("manifest segment has a vector")
                        .to_vec(),
                );
            }
        }
    }

    let cos = |a: &SegmentId, b: &SegmentId| -> f64 {
        let x = &vectors[a];
        let y = &vectors[b];
        let mut dot = 0.0;
        let mut nx = 0.0;
        let mut ny = 0.0;
        for i in 0..x.len() {
            dot += x[i] * y[i];
            nx += x[i] * x[i];
            ny += y[i] * y[i];
        }
        scale * dot / (nx.sqrt() * ny.sqrt())
    };

    let pairs = exhaustive_pairs(cohort);
    let mut matrices = Vec::new();
    for (kind, list) in [
        (MatrixKind::OO, &pairs.oo),
        (MatrixKind::OP, &pairs.op),
        (MatrixKind::PP, &pairs.pp),
    ] {
        // score and label every pair, fit the oracle calibration
        let mut scored = Vec::with_capacity(list.len());
        for (a, b) in list {
            let target = segment_info[a].0 == segment_info[b].0;
            scored.push((cos(a, b), target));
        }
        let calibration = OracleCalibration::fit(scored);
        let mut llr_of: HashMap<(SegmentId, SegmentId), f64> = HashMap::new();
        for (a, b) in list {
            llr_of.insert((a.clone(), b.clone()), calibration.llr(cos(a, b)));
        }

        // nested loops over the speakers' segment lists
        let mut cells = vec![0.0; n * n];
        let mut counts = vec![0u32; n * n];
        for i in 0..n {
            for j in i..n {
                let mut sum = 0.0;
                let mut count = 0u32;
                let mut take = |key: (SegmentId, SegmentId)| {
                    if let Some(llr) = llr_of.get(&key) {
                        sum += llr;
                        count += 1;
                    }
                };
                match kind {
                    MatrixKind::OO | MatrixKind::PP => {
                        let domain = if kind == MatrixKind::OO {
                            Domain::Original
                        } else {
                            Domain::Protected
                        };
                        for a in manifest.segments_at(i, domain) {
                            for b in manifest.segments_at(j, domain) {
                                if a < b {
                                    take((a.clone(), b.clone()));
                                }
                            }
                        }
                    }
                    MatrixKind::OP => {
                        for a in manifest.segments_at(i, Domain::Original) {
                            for b in manifest.segments_at(j, Domain::Protected) {
                                take((a.clone(), b.clone()));
                            }
                        }
                        if i != j {
                            for a in manifest.segments_at(j, Domain::Original) {
                                for b in manifest.segments_at(i, Domain::Protected) {
                                    take((a.clone(), b.clone()));
                                }
                            }
                        }
                    }
                }
                assert!(count > 0, "oracle cell ({i}, {j}) has no pairs");
                let value = sigmoid(sum / f64::from(count));
                cells[i * n + j] = value;
                cells[j * n + i] = value;
                counts[i * n + j] = count;
                counts[j * n + i] = count;
            }
        }
        matrices.push(
            SimilarityMatrix::from_parts(kind, manifest.speaker_order().to_vec(), cells, counts)
                .expect("oracle cells are in range"),
        );
    }
    let m_pp = matrices.pop().expect("three matrices");
    let m_op = matrices.pop().expect("three matrices");
    let m_oo = matrices.pop().expect("three matrices");
    Ok((m_oo, m_op, m_pp))
}
