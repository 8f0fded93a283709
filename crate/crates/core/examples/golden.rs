//! Regenerates the committed golden fixtures: the per-scenario metrics table
//! and the composite PPM for the pinned demo cohort.
//!
//! Usage: `cargo run -p voicesim-core --example golden -- <output-dir>`
//! With no argument the fixtures are printed to stdout for inspection.

use std::fmt::Write as _;
use std::path::PathBuf;

use voicesim_core::{
    export_matrix, parse_matrix, render_composite_ppm, run_pipeline, CompositeLayout, GainDb,
    Scenario, SynthConfig,
};

pub const SCENARIO_SEEDS: [u64; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];
pub const SCENARIO_SCALE: f64 = 10.0;

fn scenario_table() -> String {
    let mut out = String::new();
    writeln!(out, "scenario\tseed\tdeid_percent\tgvd_db").expect("string write");
    for scenario in Scenario::ALL {
        for seed in SCENARIO_SEEDS {
            let cohort =
                voicesim_core::generate(&SynthConfig::new(scenario, seed)).expect("valid config");
            let report = run_pipeline(&cohort, SCENARIO_SCALE).expect("pipeline runs");
            let deid = report.deid_percent.expect("ddiag_oo positive");
            let gvd = match report.gvd_db.expect("ddiag_oo positive") {
                GainDb::Db(db) => format!("{db:.6}"),
                GainDb::NegInfinity => "-inf".to_string(),
            };
            writeln!(out, "{}\t{seed}\t{deid:.6}\t{gvd}", scenario.as_str()).expect("string write");
        }
    }
    out
}

pub fn golden_ppm_config() -> SynthConfig {
    SynthConfig {
        n_speakers: 4,
        segments_per_speaker: 3,
        embedding_dim: 8,
        scenario: Scenario::Ideal,
        seed: 7,
        ..SynthConfig::default()
    }
}

fn golden_ppm() -> Vec<u8> {
    let cohort = voicesim_core::generate(&golden_ppm_config()).expect("valid config");
    let artifacts =
        voicesim_core::run_pipeline_artifacts(&cohort, SCENARIO_SCALE).expect("pipeline runs");
    // render from the re-parsed exported tables: the same cells any consumer
    // of the table files would see
    let m_oo = parse_matrix(&export_matrix(&artifacts.m_oo)).expect("round trip");
    let m_op = parse_matrix(&export_matrix(&artifacts.m_op)).expect("round trip");
    let m_pp = parse_matrix(&export_matrix(&artifacts.m_pp)).expect("round trip");
    render_composite_ppm(&m_oo, &m_op, &m_pp, &CompositeLayout { cell_size: 4 })
        .expect("render succeeds")
}

fn main() {
    let table = scenario_table();
    let ppm = golden_ppm();
    match std::env::args().nth(1) {
        Some(dir) => {
            let dir = PathBuf::from(dir);
            std::fs::create_dir_all(&dir).expect("output dir");
            std::fs::write(dir.join("scenario_metrics.tsv"), &table).expect("write table");
            std::fs::write(dir.join("composite_ideal.ppm"), &ppm).expect("write ppm");
            eprintln!(
                "wrote scenario_metrics.tsv and composite_ideal.ppm to {}",
                dir.display()
            );
        }
        None => {
            print!("{table}");
            eprintln!("composite_ideal.ppm: {} bytes", ppm.len());
        }
    }
}
