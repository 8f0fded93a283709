//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`). Tolerances are fixed here and
//! nowhere else.

use std::time::Instant;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

use voicesim_core::{
    brute_force_similarity, build_manifest, color_of, d_diag, de_id, exhaustive_trials, gain_vd,
    generate, parse_matrix, partition_trials, pav_fit, render_composite_ppm,
    run_pipeline_artifacts, sigmoid, CohortManifest, CompositeLayout, EvaluationOptions, GainDb,
    MatrixKind, Scenario, SimilarityMatrix, SpeakerId, SynthConfig, TrialLabel,
};

const SCENARIO_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
const SCALE: f64 = 10.0;

fn speakers(n: usize) -> Vec<SpeakerId> {
    (0..n)
        .map(|i| SpeakerId::new(format!("s{i}")).unwrap())
        .collect()
}

fn pattern(kind: MatrixKind, n: usize, diag: f64, off: f64) -> SimilarityMatrix {
    let mut cells = vec![off; n * n];
    for i in 0..n {
        cells[i * n + i] = diag;
    }
    SimilarityMatrix::from_parts(kind, speakers(n), cells, vec![1; n * n]).unwrap()
}

#[test]
fn criterion_1_ddiag_endpoints() {
    let start = Instant::now();
    for n in [2, 3, 7, 10] {
        let identity = pattern(MatrixKind::OO, n, 1.0, 0.0);
        assert_eq!(d_diag(&identity).unwrap(), 1.0);
        let constant = pattern(MatrixKind::OO, n, 0.5, 0.5);
        assert_eq!(d_diag(&constant).unwrap(), 0.0);
        // all-zero diagonal with all-one off-diagonal is just as dominant
        let inverted = pattern(MatrixKind::OO, n, 0.0, 1.0);
        assert_eq!(d_diag(&inverted).unwrap(), 1.0);
    }
    assert!(start.elapsed().as_millis() < 1000);
    println!("[criterion 1] PASS - d_diag is exactly 1.0 on the identity pattern and 0.0 on a constant matrix");
}

#[test]
fn criterion_2_deid_and_gain_endpoints() {
    let start = Instant::now();
    // operation-level endpoints, exact
    for ddiag_oo in [0.1, 0.5, 0.9754] {
        assert_eq!(de_id(ddiag_oo, 0.0).unwrap().percent, 100.0);
        assert_eq!(de_id(ddiag_oo, ddiag_oo).unwrap().percent, 0.0);
        assert_eq!(gain_vd(ddiag_oo, ddiag_oo).unwrap().gain, GainDb::Db(0.0));
    }
    // report-level endpoints through real matrices
    let oo = pattern(MatrixKind::OO, 5, 0.83, 0.21);
    let op_same = pattern(MatrixKind::OP, 5, 0.83, 0.21);
    let op_flat = pattern(MatrixKind::OP, 5, 0.4, 0.4);
    let pp_same = pattern(MatrixKind::PP, 5, 0.83, 0.21);
    let flat = voicesim_core::report(&oo, &op_flat, &pp_same, "flat-op").unwrap();
    assert_eq!(flat.deid_percent, Some(100.0));
    let same = voicesim_core::report(&oo, &op_same, &pp_same, "no-op").unwrap();
    assert_eq!(same.deid_percent, Some(0.0));
    assert_eq!(same.gvd_db, Some(GainDb::Db(0.0)));
    assert!(start.elapsed().as_millis() < 1000);
    println!("[criterion 2] PASS - DeID endpoints 100%/0% and the 0 dB gain endpoint are exact");
}

// exhaustive least-squares isotonic fit over tie-pooled groups by block
// partition enumeration; independent of the PAV implementation
fn exhaustive_isotonic(scores: &[f64], labels: &[TrialLabel]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut groups: Vec<(f64, f64, f64)> = Vec::new();
    for &idx in &order {
        let y = if labels[idx] == TrialLabel::Target {
            1.0
        } else {
            0.0
        };
        match groups.last_mut() {
            Some(g) if g.0 == scores[idx] => {
                g.1 += y;
                g.2 += 1.0;
            }
            _ => groups.push((scores[idx], y, 1.0)),
        }
    }
    let k = groups.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0..(1u32 << (k - 1)) {
        let mut fitted = vec![0.0; k];
        let mut means = Vec::new();
        let mut start = 0;
        for end in 0..k {
            if end == k - 1 || mask & (1 << end) != 0 {
                let targets: f64 = groups[start..=end].iter().map(|g| g.1).sum();
                let weight: f64 = groups[start..=end].iter().map(|g| g.2).sum();
                let mean = targets / weight;
                for f in fitted.iter_mut().take(end + 1).skip(start) {
                    *f = mean;
                }
                means.push(mean);
                start = end + 1;
            }
        }
        if means.windows(2).any(|w| w[0] > w[1]) {
            continue;
        }
        let sse: f64 = groups
            .iter()
            .zip(&fitted)
            .map(|(g, f)| g.1 * (1.0 - f).powi(2) + (g.2 - g.1) * f.powi(2))
            .sum();
        if best.as_ref().map(|(b, _)| sse < *b).unwrap_or(true) {
            best = Some((sse, fitted));
        }
    }
    let fitted = best.expect("a feasible partition exists").1;
    scores
        .iter()
        .map(|s| {
            let g = groups.iter().position(|(score, _, _)| score == s).unwrap();
            fitted[g]
        })
        .collect()
}

struct XorShift(u64);

impl XorShift {
    fn next(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }
}

#[test]
fn criterion_3_pav_matches_exhaustive_isotonic_oracle() {
    let start = Instant::now();
    let mut rng = XorShift(0x5eed_cafe_f00d_1234);
    let mut checked = 0;
    while checked < 1000 {
        let n = 2 + (rng.next() % 9) as usize; // 2..=10
                                               // small score grid so ties occur often
        let scores: Vec<f64> = (0..n).map(|_| (rng.next() % 7) as f64 / 2.0).collect();
        let labels: Vec<TrialLabel> = (0..n)
            .map(|_| {
                if rng.next() & 1 == 0 {
                    TrialLabel::Target
                } else {
                    TrialLabel::Impostor
                }
            })
            .collect();
        let targets = labels.iter().filter(|l| **l == TrialLabel::Target).count();
        if targets == 0 || targets == n {
            continue;
        }
        let map = pav_fit(&scores, &labels).unwrap();
        let eps = map.epsilon();
        let oracle = exhaustive_isotonic(&scores, &labels);
        for (score, expected) in scores.iter().zip(&oracle) {
            let (posterior, outside) = map.posterior(*score);
            assert!(!outside);
            assert!(
                (posterior - expected.clamp(eps, 1.0 - eps)).abs() < 1e-9,
                "score {score}: {posterior} vs {expected}"
            );
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}");
    println!("[criterion 3] PASS - PAV equals the exhaustive isotonic fit on 1000 instances (n <= 10) within 1e-9");
}

#[test]
fn criterion_4_similarity_matches_brute_force_oracle() {
    let start = Instant::now();
    let mut runs = 0;
    for n_speakers in 2..=4 {
        for segments in 2..=3 {
            for seed in 0..20u64 {
                let scenario = Scenario::ALL[(seed % 4) as usize];
                let config = SynthConfig {
                    n_speakers,
                    segments_per_speaker: segments,
                    embedding_dim: 8,
                    scenario,
                    seed,
                    ..SynthConfig::default()
                };
                let cohort = generate(&config).unwrap();
                let artifacts = run_pipeline_artifacts(&cohort, SCALE).unwrap();
                let (b_oo, b_op, b_pp) = brute_force_similarity(&cohort, SCALE).unwrap();
                for (ours, oracle) in [
                    (&artifacts.m_oo, &b_oo),
                    (&artifacts.m_op, &b_op),
                    (&artifacts.m_pp, &b_pp),
                ] {
                    for i in 0..ours.n() {
                        for j in 0..ours.n() {
                            assert!(
                                (ours.cell(i, j) - oracle.cell(i, j)).abs() < 1e-9,
                                "{n_speakers} speakers, {segments} segs, seed {seed}, {} cell ({i},{j})",
                                ours.kind()
                            );
                        }
                    }
                }
                runs += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}");
    println!("[criterion 4] PASS - pipeline matrices match the brute-force oracle within 1e-9 over {runs} cohorts");
}

fn scenario_report(scenario: Scenario, seed: u64) -> voicesim_core::MetricsReport {
    let cohort = generate(&SynthConfig::new(scenario, seed)).unwrap();
    voicesim_core::run_pipeline(&cohort, SCALE).unwrap()
}

fn finite_gain(report: &voicesim_core::MetricsReport) -> f64 {
    match report.gvd_db {
        Some(GainDb::Db(db)) => db,
        other => panic!("expected a finite gain, got {other:?}"),
    }
}

#[test]
fn criterion_5_scenario_regimes() {
    let start = Instant::now();
    // regenerate the committed golden table to pin every value bitwise
    let mut table = String::from("scenario\tseed\tdeid_percent\tgvd_db\n");
    for scenario in Scenario::ALL {
        for seed in SCENARIO_SEEDS {
            let report = scenario_report(scenario, seed);
            let deid = report.deid_percent.unwrap();
            let gvd = match report.gvd_db.unwrap() {
                GainDb::Db(db) => format!("{db:.6}"),
                GainDb::NegInfinity => "-inf".to_string(),
            };
            table.push_str(&format!(
                "{}\t{seed}\t{deid:.6}\t{gvd}\n",
                scenario.as_str()
            ));

            match scenario {
                Scenario::Nop => {
                    assert_eq!(report.deid_percent, Some(0.0), "nop seed {seed}");
                    assert_eq!(report.gvd_db, Some(GainDb::Db(0.0)), "nop seed {seed}");
                }
                Scenario::Ideal => {
                    assert!(deid >= 95.0, "ideal seed {seed}: DeID {deid}");
                    assert!(finite_gain(&report).abs() <= 1.0, "ideal seed {seed}");
                }
                Scenario::Collapse => {
                    assert!(
                        finite_gain(&report) <= -10.0,
                        "collapse seed {seed}: gain {}",
                        finite_gain(&report)
                    );
                }
                Scenario::Shift => {}
            }
        }
    }
    let golden = include_str!("golden/scenario_metrics.tsv");
    assert_eq!(
        table, golden,
        "scenario metrics drifted from the golden run"
    );
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!("[criterion 5] PASS - nop exactly 0%/0dB, ideal >= 95% and |gain| <= 1 dB, collapse <= -10 dB on all 10 seeds");
}

#[test]
fn criterion_6_baseline_ordering_pattern() {
    let start = Instant::now();
    for seed in SCENARIO_SEEDS {
        let collapse = scenario_report(Scenario::Collapse, seed);
        let shift = scenario_report(Scenario::Shift, seed);
        assert!(
            collapse.deid_percent.unwrap() > shift.deid_percent.unwrap(),
            "seed {seed}: DeID ordering violated"
        );
        assert!(
            finite_gain(&shift) > finite_gain(&collapse),
            "seed {seed}: gain ordering violated"
        );
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}");
    println!("[criterion 6] PASS - DeID(collapse) > DeID(shift) and gain(shift) > gain(collapse) on every seed");
}

#[test]
fn criterion_7_colormap_and_golden_composite() {
    let start = Instant::now();
    assert_eq!(color_of(0.0).unwrap(), [255, 247, 0]);
    assert_eq!(color_of(1.0).unwrap(), [209, 20, 20]);
    assert_eq!(color_of(0.5).unwrap(), [232, 134, 10]);

    // fixed cohort, rendered from the re-parsed exported tables
    let config = SynthConfig {
        n_speakers: 4,
        segments_per_speaker: 3,
        embedding_dim: 8,
        scenario: Scenario::Ideal,
        seed: 7,
        ..SynthConfig::default()
    };
    let cohort = generate(&config).unwrap();
    let artifacts = run_pipeline_artifacts(&cohort, SCALE).unwrap();
    let reparse = |m: &SimilarityMatrix| parse_matrix(&voicesim_core::export_matrix(m)).unwrap();
    let ppm = render_composite_ppm(
        &reparse(&artifacts.m_oo),
        &reparse(&artifacts.m_op),
        &reparse(&artifacts.m_pp),
        &CompositeLayout { cell_size: 4 },
    )
    .unwrap();
    let golden: &[u8] = include_bytes!("golden/composite_ideal.ppm");
    assert_eq!(
        ppm, golden,
        "composite render drifted from the golden image"
    );
    assert!(start.elapsed().as_secs() < 10);
    println!("[criterion 7] PASS - colormap endpoints/midpoint exact; composite PPM byte-identical to the golden image");
}

// ---------------------------------------------------------------------------
// criterion 8: property suite, >= 100 generated cases per invariant
// ---------------------------------------------------------------------------

const PROP_CASES: u32 = 128;

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: PROP_CASES,
        ..Config::default()
    })
}

fn small_config_strategy() -> impl Strategy<Value = SynthConfig> {
    (
        2usize..=4,
        2usize..=3,
        2usize..=10,
        0u64..1_000_000,
        0usize..4,
    )
        .prop_map(|(n_speakers, segments, dim, seed, scenario)| SynthConfig {
            n_speakers,
            segments_per_speaker: segments,
            embedding_dim: dim,
            scenario: Scenario::ALL[scenario],
            seed,
            ..SynthConfig::default()
        })
}

#[test]
fn criterion_8a_matrix_symmetry_and_range() {
    runner()
        .run(&small_config_strategy(), |config| {
            let cohort = generate(&config).unwrap();
            let artifacts = run_pipeline_artifacts(&cohort, SCALE).unwrap();
            for m in [&artifacts.m_oo, &artifacts.m_op, &artifacts.m_pp] {
                for i in 0..m.n() {
                    for j in 0..m.n() {
                        prop_assert_eq!(m.cell(i, j), m.cell(j, i));
                        prop_assert!(m.cell(i, j) > 0.0 && m.cell(i, j) < 1.0);
                        prop_assert!(m.pair_count(i, j) >= 1);
                    }
                }
            }
            Ok(())
        })
        .unwrap();
    println!(
        "[criterion 8] PASS - matrix symmetry and open-interval cell range ({PROP_CASES} cases)"
    );
}

#[test]
fn criterion_8b_sigmoid_symmetry() {
    runner()
        .run(&(-30.0f64..30.0, -30.0f64..30.0), |(a, b)| {
            prop_assert!((sigmoid(-a) - (1.0 - sigmoid(a))).abs() <= 2.0 * f64::EPSILON);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            if lo < hi {
                prop_assert!(sigmoid(lo) < sigmoid(hi));
            }
            Ok(())
        })
        .unwrap();
    println!("[criterion 8] PASS - sigmoid symmetry and strict monotonicity ({PROP_CASES} cases)");
}

fn pav_instance_strategy() -> impl Strategy<Value = (Vec<f64>, Vec<TrialLabel>)> {
    proptest::collection::vec((0u32..12, proptest::bool::ANY), 2..60).prop_map(|rows| {
        let mut scores: Vec<f64> = rows.iter().map(|(s, _)| f64::from(*s) / 3.0).collect();
        let mut labels: Vec<TrialLabel> = rows
            .iter()
            .map(|(_, t)| {
                if *t {
                    TrialLabel::Target
                } else {
                    TrialLabel::Impostor
                }
            })
            .collect();
        // force both classes
        scores.push(0.1);
        labels.push(TrialLabel::Target);
        scores.push(0.2);
        labels.push(TrialLabel::Impostor);
        (scores, labels)
    })
}

#[test]
fn criterion_8c_pav_monotonicity() {
    runner()
        .run(&pav_instance_strategy(), |(scores, labels)| {
            let map = pav_fit(&scores, &labels).unwrap();
            let mut sorted = scores.clone();
            sorted.sort_by(f64::total_cmp);
            for pair in sorted.windows(2) {
                prop_assert!(map.apply(pair[0]).llr <= map.apply(pair[1]).llr);
            }
            // clamping keeps every llr finite and bounded
            let bound =
                voicesim_core::calibration::logit(1.0 - map.epsilon()) + map.prior_log_odds().abs();
            for s in &scores {
                let llr = map.apply(*s).llr;
                prop_assert!(llr.is_finite() && llr.abs() <= bound + 1e-12);
            }
            Ok(())
        })
        .unwrap();
    println!("[criterion 8] PASS - PAV monotonicity and clamping bound ({PROP_CASES} cases)");
}

fn permuted_manifest(cohort_manifest: &CohortManifest, perm: &[usize]) -> CohortManifest {
    let speakers = cohort_manifest.speaker_order();
    let mut triples = Vec::new();
    for domain in [
        voicesim_core::Domain::Original,
        voicesim_core::Domain::Protected,
    ] {
        for &idx in perm {
            for segment in cohort_manifest.segments_at(idx, domain) {
                triples.push((segment.clone(), speakers[idx].clone(), domain));
            }
        }
    }
    build_manifest(triples).unwrap()
}

#[test]
fn criterion_8d_permutation_equivariance() {
    let strategy = (small_config_strategy(), any::<u64>());
    runner()
        .run(&strategy, |(config, perm_seed)| {
            let cohort = generate(&config).unwrap();
            let base = run_pipeline_artifacts(&cohort, SCALE).unwrap();

            // a deterministic permutation of the speakers
            let n = config.n_speakers;
            let mut perm: Vec<usize> = (0..n).collect();
            let mut rng = XorShift(perm_seed | 1);
            for i in (1..n).rev() {
                let j = (rng.next() % (i as u64 + 1)) as usize;
                perm.swap(i, j);
            }

            let manifest = permuted_manifest(&cohort.manifest, &perm);
            let trials = exhaustive_trials(&cohort, SCALE).unwrap();
            let partition = partition_trials(&manifest, trials).unwrap();
            let permuted = voicesim_core::evaluate_partition(
                &manifest,
                &partition,
                "perm",
                &EvaluationOptions::default(),
            )
            .unwrap();

            for (a, b) in [
                (&base.m_oo, &permuted.m_oo),
                (&base.m_op, &permuted.m_op),
                (&base.m_pp, &permuted.m_pp),
            ] {
                for k in 0..n {
                    for l in 0..n {
                        prop_assert_eq!(b.cell(k, l), a.cell(perm[k], perm[l]));
                    }
                }
            }
            // the metrics are invariant, exactly
            prop_assert_eq!(base.report.ddiag_oo, permuted.report.ddiag_oo);
            prop_assert_eq!(base.report.ddiag_op, permuted.report.ddiag_op);
            prop_assert_eq!(base.report.ddiag_pp, permuted.report.ddiag_pp);
            prop_assert_eq!(base.report.deid_percent, permuted.report.deid_percent);
            Ok(())
        })
        .unwrap();
    println!("[criterion 8] PASS - permutation equivariance of matrices and invariance of metrics ({PROP_CASES} cases)");
}

#[test]
fn criterion_8e_end_to_end_determinism() {
    runner()
        .run(&small_config_strategy(), |config| {
            let a = run_pipeline_artifacts(&generate(&config).unwrap(), SCALE).unwrap();
            let b = run_pipeline_artifacts(&generate(&config).unwrap(), SCALE).unwrap();
            prop_assert_eq!(a.report.to_json(), b.report.to_json());
            for (x, y) in [(&a.m_oo, &b.m_oo), (&a.m_op, &b.m_op), (&a.m_pp, &b.m_pp)] {
                prop_assert_eq!(
                    voicesim_core::export_matrix(x),
                    voicesim_core::export_matrix(y)
                );
            }
            let layout = CompositeLayout { cell_size: 2 };
            prop_assert_eq!(
                render_composite_ppm(&a.m_oo, &a.m_op, &a.m_pp, &layout).unwrap(),
                render_composite_ppm(&b.m_oo, &b.m_op, &b.m_pp, &layout).unwrap()
            );
            Ok(())
        })
        .unwrap();
    println!("[criterion 8] PASS - end-to-end determinism of reports, tables and renders ({PROP_CASES} cases)");
}
