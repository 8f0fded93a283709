//! Shared fixtures for the benchmarks.

use voicesim_core::{
    exhaustive_trials, generate, partition_trials, Scenario, ScorePartition, SynthCohort,
    SynthConfig, TrialLabel,
};

pub const SCALE: f64 = 10.0;

/// A cohort sized like a small development set.
pub fn bench_cohort(n_speakers: usize) -> SynthCohort {
    let config = SynthConfig {
        n_speakers,
        segments_per_speaker: 5,
        embedding_dim: 16,
        scenario: Scenario::Shift,
        seed: 42,
        ..SynthConfig::default()
    };
    generate(&config).expect("valid config")
}

/// The cohort's exhaustive trials, already partitioned by kind.
pub fn bench_partition(cohort: &SynthCohort) -> ScorePartition {
    let trials = exhaustive_trials(cohort, SCALE).expect("scoring succeeds");
    partition_trials(&cohort.manifest, trials).expect("partition succeeds")
}

/// A synthetic calibration problem with heavy class imbalance and ties.
pub fn bench_scores(n: usize) -> (Vec<f64>, Vec<TrialLabel>) {
    let mut state = 0x1234_5678_9abc_def0_u64;
    let mut next = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        state
    };
    let scores: Vec<f64> = (0..n).map(|_| (next() % 10_000) as f64 / 100.0).collect();
    let labels: Vec<TrialLabel> = (0..n)
        .map(|i| {
            if i % 10 == 0 || next() % 50 == 0 {
                TrialLabel::Target
            } else {
                TrialLabel::Impostor
            }
        })
        .collect();
    (scores, labels)
}
