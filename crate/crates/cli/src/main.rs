//! `voicesim`: assess pseudonymisation systems from trial-score files.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (with a JSON error
//! object on stderr), 3 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use voicesim_core::{
    evaluate_partition, exhaustive_trials, export_matrix, from_utt2spk, generate, parse_matrix,
    parse_trials, partition_trials, render_composite_ppm, render_composite_svg, CalibratedTrial,
    CohortManifest, CompositeLayout, EvaluationOptions, MatrixKind, PipelineError, Scenario,
    SynthConfig, Trial,
};

mod io;

use io::{write_atomic, CliError, DATA, INTERNAL};

const OUT_DIR_ENV: &str = "VOICESIM_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "voicesim",
    version,
    about = "Voice similarity matrices and pseudonymisation assessment metrics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full assessment: calibrate three score sets, build the matrices,
    /// write metrics and heatmaps
    Evaluate(EvaluateArgs),
    /// Oracle-calibrate a score file and write the llrs in the same format
    Calibrate(CalibrateArgs),
    /// Render the composite heatmap from three exported matrix tables
    Render(RenderArgs),
    /// Generate a synthetic cohort with score files for the full pipeline
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct EvaluateArgs {
    /// Original/original trial scores
    #[arg(long, value_name = "FILE")]
    scores_oo: PathBuf,
    /// Original/protected trial scores
    #[arg(long, value_name = "FILE")]
    scores_op: PathBuf,
    /// Protected/protected trial scores
    #[arg(long, value_name = "FILE")]
    scores_pp: PathBuf,
    /// utt2spk for the original domain
    #[arg(long, value_name = "FILE")]
    utt2spk_o: PathBuf,
    /// utt2spk for the protected domain
    #[arg(long, value_name = "FILE")]
    utt2spk_p: PathBuf,
    /// Output directory (default: $VOICESIM_OUT_DIR, else `.`)
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Name recorded in the metrics report
    #[arg(long, default_value = "eval")]
    set_name: String,
    /// Scores are already calibrated llrs; skip PAV
    #[arg(long)]
    pre_calibrated: bool,
    /// Pixels per heatmap cell
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..))]
    cell_size: u32,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Trial scores to calibrate
    #[arg(long, value_name = "FILE")]
    scores: PathBuf,
    /// utt2spk for the original domain
    #[arg(long, value_name = "FILE")]
    utt2spk_o: PathBuf,
    /// utt2spk for the protected domain
    #[arg(long, value_name = "FILE")]
    utt2spk_p: PathBuf,
    /// Output file (default: calibrated_scores.txt in the output directory)
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderFormat {
    Ppm,
    Svg,
}

#[derive(Args)]
struct RenderArgs {
    /// Exported original/original matrix table
    #[arg(long, value_name = "FILE")]
    matrix_oo: PathBuf,
    /// Exported original/protected matrix table
    #[arg(long, value_name = "FILE")]
    matrix_op: PathBuf,
    /// Exported protected/protected matrix table
    #[arg(long, value_name = "FILE")]
    matrix_pp: PathBuf,
    #[arg(long, value_enum, default_value = "ppm")]
    format: RenderFormat,
    /// Output image path
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Pixels per heatmap cell
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u32).range(1..))]
    cell_size: u32,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Nop,
    Collapse,
    Ideal,
    Shift,
}

impl From<ScenarioArg> for Scenario {
    fn from(value: ScenarioArg) -> Self {
        match value {
            ScenarioArg::Nop => Scenario::Nop,
            ScenarioArg::Collapse => Scenario::Collapse,
            ScenarioArg::Ideal => Scenario::Ideal,
            ScenarioArg::Shift => Scenario::Shift,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(2..))]
    speakers: u64,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(2..))]
    segments: u64,
    #[arg(long, default_value_t = 16, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,
    #[arg(long, default_value_t = 1.0)]
    between_std: f64,
    #[arg(long, default_value_t = 0.1)]
    within_std: f64,
    /// Scale applied to the cosine scores
    #[arg(long, default_value_t = 10.0)]
    scale: f64,
    /// Also emit cross-domain trials pairing a segment with its own
    /// protected version
    #[arg(long)]
    include_same_source_op: bool,
    /// Output directory (default: $VOICESIM_OUT_DIR, else `.`)
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => {
                    print!("{err}");
                    return ExitCode::SUCCESS;
                }
                _ => 1,
            };
            eprint!("{err}");
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Calibrate(args) => cmd_calibrate(args),
        Command::Render(args) => cmd_render(args),
        Command::Simulate(args) => cmd_simulate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.to_json());
            ExitCode::from(err.exit_code())
        }
    }
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn check_inputs_exist(paths: &[&Path]) -> Result<(), CliError> {
    for path in paths {
        if !path.is_file() {
            return Err(CliError::new(
                DATA,
                "MissingInput",
                format!("input file {} does not exist", path.display()),
            ));
        }
    }
    Ok(())
}

fn read_input(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| {
        CliError::new(
            DATA,
            "UnreadableInput",
            format!("cannot read {}: {e}", path.display()),
        )
    })
}

fn load_manifest(utt2spk_o: &Path, utt2spk_p: &Path) -> Result<CohortManifest, CliError> {
    let original = read_input(utt2spk_o)?;
    let protected = read_input(utt2spk_p)?;
    from_utt2spk(&original, &protected)
        .map_err(|e| CliError::data(e.kind(), format!("{}: {e}", utt2spk_o.display()), e.line()))
}

// parse one score file and insist every trial matches the expected kind
fn load_score_file(
    path: &Path,
    manifest: &CohortManifest,
    expected: MatrixKind,
) -> Result<Vec<Trial>, CliError> {
    let text = read_input(path)?;
    let trials = parse_trials(&text, manifest)
        .map_err(|e| CliError::data(e.kind(), format!("{}: {e}", path.display()), e.line()))?;
    for (index, trial) in trials.iter().enumerate() {
        if trial.kind() != expected {
            return Err(CliError::data(
                "KindMismatch",
                format!(
                    "{}: trial ({}, {}) is a {} comparison but this file holds the {} set",
                    path.display(),
                    trial.left,
                    trial.right,
                    trial.kind(),
                    expected
                ),
                Some(index + 1),
            ));
        }
    }
    Ok(trials)
}

fn pipeline_error(err: PipelineError) -> CliError {
    CliError::data(err.kind(), err.to_string(), err.line())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    check_inputs_exist(&[
        &args.scores_oo,
        &args.scores_op,
        &args.scores_pp,
        &args.utt2spk_o,
        &args.utt2spk_p,
    ])?;
    let manifest = load_manifest(&args.utt2spk_o, &args.utt2spk_p)?;
    let mut trials = load_score_file(&args.scores_oo, &manifest, MatrixKind::OO)?;
    trials.extend(load_score_file(&args.scores_op, &manifest, MatrixKind::OP)?);
    trials.extend(load_score_file(&args.scores_pp, &manifest, MatrixKind::PP)?);
    let partition = partition_trials(&manifest, trials)
        .map_err(|e| CliError::data(e.kind(), e.to_string(), e.line()))?;

    let options = EvaluationOptions {
        pre_calibrated: args.pre_calibrated,
        ..Default::default()
    };
    let artifacts = evaluate_partition(&manifest, &partition, &args.set_name, &options)
        .map_err(pipeline_error)?;

    let dir = out_dir(args.out_dir);
    std::fs::create_dir_all(&dir).map_err(|e| {
        CliError::new(
            INTERNAL,
            "OutputDir",
            format!("cannot create {}: {e}", dir.display()),
        )
    })?;

    let tables = [
        ("matrix_oo.txt", export_matrix(&artifacts.m_oo)),
        ("matrix_op.txt", export_matrix(&artifacts.m_op)),
        ("matrix_pp.txt", export_matrix(&artifacts.m_pp)),
    ];
    for (name, text) in &tables {
        write_atomic(&dir.join(name), text.as_bytes())?;
    }
    write_atomic(
        &dir.join("metrics.json"),
        artifacts.report.to_json().as_bytes(),
    )?;

    // render from the re-parsed tables so `render` on the exported files
    // reproduces these bytes exactly
    let m_oo = parse_matrix(&tables[0].1).expect("own export parses");
    let m_op = parse_matrix(&tables[1].1).expect("own export parses");
    let m_pp = parse_matrix(&tables[2].1).expect("own export parses");
    let layout = CompositeLayout {
        cell_size: args.cell_size,
    };
    let ppm = render_composite_ppm(&m_oo, &m_op, &m_pp, &layout)
        .map_err(|e| CliError::data(e.kind(), e.to_string(), None))?;
    write_atomic(&dir.join("composite.ppm"), &ppm)?;
    let svg = render_composite_svg(&m_oo, &m_op, &m_pp, &layout)
        .map_err(|e| CliError::data(e.kind(), e.to_string(), None))?;
    write_atomic(&dir.join("composite.svg"), svg.as_bytes())?;

    println!(
        "{}: wrote metrics.json, 3 matrix tables, composite.ppm, composite.svg to {}",
        args.set_name,
        dir.display()
    );
    Ok(())
}

fn cmd_calibrate(args: CalibrateArgs) -> Result<(), CliError> {
    check_inputs_exist(&[&args.scores, &args.utt2spk_o, &args.utt2spk_p])?;
    let manifest = load_manifest(&args.utt2spk_o, &args.utt2spk_p)?;
    let text = read_input(&args.scores)?;
    let trials = parse_trials(&text, &manifest).map_err(|e| {
        CliError::data(
            e.kind(),
            format!("{}: {e}", args.scores.display()),
            e.line(),
        )
    })?;
    let partition = partition_trials(&manifest, trials.clone())
        .map_err(|e| CliError::data(e.kind(), e.to_string(), e.line()))?;

    let mut llr_of = std::collections::HashMap::new();
    for set in [&partition.oo, &partition.op, &partition.pp] {
        if set.is_empty() {
            continue;
        }
        let calibrated = voicesim_core::calibrate_set(set).map_err(|e| {
            CliError::data(
                e.kind(),
                format!("calibrating the {} set: {e}", set.kind),
                None,
            )
        })?;
        for CalibratedTrial { left, right, llr } in calibrated {
            llr_of.insert((left, right), llr);
        }
    }

    let mut out = String::new();
    for trial in &trials {
        let llr = llr_of[&(trial.left.clone(), trial.right.clone())];
        out.push_str(&format!("{} {} {}\n", trial.left, trial.right, llr));
    }
    let path = args
        .out
        .unwrap_or_else(|| out_dir(None).join("calibrated_scores.txt"));
    write_atomic(&path, out.as_bytes())?;
    println!(
        "wrote {} calibrated trials to {}",
        trials.len(),
        path.display()
    );
    Ok(())
}

fn cmd_render(args: RenderArgs) -> Result<(), CliError> {
    check_inputs_exist(&[&args.matrix_oo, &args.matrix_op, &args.matrix_pp])?;
    let mut matrices = Vec::new();
    for path in [&args.matrix_oo, &args.matrix_op, &args.matrix_pp] {
        let text = read_input(path)?;
        matrices.push(
            parse_matrix(&text).map_err(|e| {
                CliError::data(e.kind(), format!("{}: {e}", path.display()), e.line())
            })?,
        );
    }
    let layout = CompositeLayout {
        cell_size: args.cell_size,
    };
    let bytes = match args.format {
        RenderFormat::Ppm => {
            render_composite_ppm(&matrices[0], &matrices[1], &matrices[2], &layout)
                .map_err(|e| CliError::data(e.kind(), e.to_string(), None))?
        }
        RenderFormat::Svg => {
            render_composite_svg(&matrices[0], &matrices[1], &matrices[2], &layout)
                .map_err(|e| CliError::data(e.kind(), e.to_string(), None))?
                .into_bytes()
        }
    };
    write_atomic(&args.out, &bytes)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), CliError> {
    let config = SynthConfig {
        n_speakers: args.speakers as usize,
        segments_per_speaker: args.segments as usize,
        embedding_dim: args.dim as usize,
        between_speaker_std: args.between_std,
        within_speaker_std: args.within_std,
        scenario: args.scenario.into(),
        seed: args.seed,
        include_same_source_op: args.include_same_source_op,
    };
    if !(args.scale > 0.0 && args.scale.is_finite()) {
        return Err(CliError::data(
            "InvalidConfig",
            "scale must be a positive real".to_string(),
            None,
        ));
    }
    let cohort = generate(&config).map_err(|e| CliError::data(e.kind(), e.to_string(), None))?;
    let trials = exhaustive_trials(&cohort, args.scale).map_err(pipeline_error)?;
    let mut by_kind: [Vec<Trial>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for trial in trials {
        let slot = match trial.kind() {
            MatrixKind::OO => 0,
            MatrixKind::OP => 1,
            MatrixKind::PP => 2,
        };
        by_kind[slot].push(trial);
    }

    let dir = out_dir(args.out_dir);
    std::fs::create_dir_all(&dir).map_err(|e| {
        CliError::new(
            INTERNAL,
            "OutputDir",
            format!("cannot create {}: {e}", dir.display()),
        )
    })?;
    let manifest = &cohort.manifest;
    let files = [
        (
            "utt2spk_o.txt",
            manifest.utt2spk_lines(voicesim_core::Domain::Original),
        ),
        (
            "utt2spk_p.txt",
            manifest.utt2spk_lines(voicesim_core::Domain::Protected),
        ),
        (
            "embeddings_o.txt",
            voicesim_core::ingest::format_embedding_lines(&cohort.embeddings_o),
        ),
        (
            "embeddings_p.txt",
            voicesim_core::ingest::format_embedding_lines(&cohort.embeddings_p),
        ),
        (
            "scores_oo.txt",
            voicesim_core::ingest::format_score_lines(&by_kind[0]),
        ),
        (
            "scores_op.txt",
            voicesim_core::ingest::format_score_lines(&by_kind[1]),
        ),
        (
            "scores_pp.txt",
            voicesim_core::ingest::format_score_lines(&by_kind[2]),
        ),
    ];
    for (name, text) in &files {
        write_atomic(&dir.join(name), text.as_bytes())?;
    }
    println!(
        "{}: wrote manifest, embeddings and exhaustive score files to {}",
        cohort.label,
        dir.display()
    );
    Ok(())
}
