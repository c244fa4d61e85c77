//! Command-line front end for the `mtmc-eval` binary.
//!
//! Exit codes: 0 on success, 1 for invalid input (parse, validation, missing
//! input files), 2 for internal failures and unwritable output.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::event_measures::MotaMismatches;
use crate::io::save_detections;
use crate::model::{CameraId, OverlapMode, Scenario};
use crate::report::{evaluate, write_report, EvalOptions, Measures};
use crate::synth::{random_scenario, CorruptionRates, Preset, RandomParams};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_INTERNAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mtmc-eval", version, about = "Evaluate multi-camera trackers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score a tracker output against ground truth.
    Evaluate(EvaluateArgs),
    /// Write a synthetic ground truth / tracker pair.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Iou,
    Ground,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MismatchArg {
    Phi,
    Mu,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Ground-truth CSV.
    #[arg(long)]
    pub gt: PathBuf,
    /// Tracker CSV.
    #[arg(long)]
    pub res: PathBuf,
    #[arg(long, value_enum, default_value = "iou")]
    pub mode: ModeArg,
    /// IoU threshold or ground-plane distance in meters.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Comma-separated subset of id,clear,mcta.
    #[arg(long, default_value = "id,clear,mcta")]
    pub measures: String,
    /// Add one row per camera plus the multi-camera row.
    #[arg(long)]
    pub per_camera: bool,
    /// Directory of camera<k>.txt homography files.
    #[arg(long)]
    pub homographies: Option<PathBuf>,
    /// Write the JSON report here (stdout when neither --json nor --text is given).
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the human-readable report here.
    #[arg(long)]
    pub text: Option<PathBuf>,
    /// Write the truth-to-result mapping as truth,computed,fn,fp lines.
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "phi")]
    pub mota_mismatches: MismatchArg,
    /// Add handover difficulty and handover classification.
    #[arg(long)]
    pub diagnostics: bool,
    /// Per-camera frame offset as CAMERA=OFFSET; repeatable.
    #[arg(long = "frame-offset", value_name = "CAMERA=OFFSET")]
    pub frame_offsets: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "fig1a")]
    pub preset: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; receives gt.csv and res.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "iou")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 2)]
    pub cameras: u32,
    #[arg(long, default_value_t = 4)]
    pub identities: u32,
    #[arg(long, default_value_t = 30)]
    pub mean_length: u32,
    #[arg(long, default_value_t = 0.25)]
    pub overlap_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    pub fragment_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub merge_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub flip_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub drop_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    pub spurious_rate: f64,
    /// Position jitter in meters.
    #[arg(long, default_value_t = 0.0)]
    pub jitter: f64,
}

fn overlap_mode(mode: ModeArg, delta: Option<f64>) -> OverlapMode {
    match mode {
        ModeArg::Iou => OverlapMode::iou(delta.unwrap_or(OverlapMode::DEFAULT_IOU)),
        ModeArg::Ground => {
            OverlapMode::ground_plane(delta.unwrap_or(OverlapMode::DEFAULT_DISTANCE))
        }
    }
}

fn parse_offsets(specs: &[String]) -> Result<BTreeMap<CameraId, i64>> {
    let mut out = BTreeMap::new();
    for s in specs {
        let parsed = s
            .split_once('=')
            .and_then(|(c, o)| Some((c.trim().parse().ok()?, o.trim().parse().ok()?)));
        let Some((cam, off)) = parsed else {
            return Err(Error::validation(format!(
                "frame offset `{s}` is not of the form CAMERA=OFFSET"
            )));
        };
        out.insert(cam, off);
    }
    Ok(out)
}

/// Loads the two CSVs and assembles a scenario from the evaluate flags.
pub fn load_scenario(args: &EvaluateArgs) -> Result<Scenario> {
    let mode = overlap_mode(args.mode, args.delta);
    let offsets = parse_offsets(&args.frame_offsets)?;
    crate::io::load_scenario(
        &args.gt,
        &args.res,
        mode,
        args.homographies.as_deref(),
        &offsets,
    )
}

fn run_evaluate(args: &EvaluateArgs) -> std::result::Result<(), (i32, Error)> {
    let input = |e: Error| (EXIT_INPUT, e);
    let output = |e: Error| (EXIT_INTERNAL, e);

    let measures: Measures = args.measures.parse().map_err(input)?;
    let scenario = load_scenario(args).map_err(input)?;
    let opts = EvalOptions {
        measures,
        per_camera: args.per_camera,
        diagnostics: args.diagnostics,
        mapping: args.mapping.is_some(),
        mota_mismatches: match args.mota_mismatches {
            MismatchArg::Phi => MotaMismatches::Phi,
            MismatchArg::Mu => MotaMismatches::Mu,
        },
    };
    let doc = evaluate(&scenario, &opts).map_err(|e| {
        let code = if e.is_user_error() {
            EXIT_INPUT
        } else {
            EXIT_INTERNAL
        };
        (code, e)
    })?;

    if args.json.is_none() && args.text.is_none() {
        print!("{}", doc.to_json().map_err(output)?);
    }
    write_report(&doc, args.json.as_deref(), args.text.as_deref()).map_err(output)?;
    if let Some(path) = &args.mapping {
        write_mapping(path, doc.mapping.as_deref().unwrap_or_default()).map_err(output)?;
    }
    Ok(())
}

fn write_mapping(path: &Path, lines: &[crate::report::MappingLine]) -> Result<()> {
    let mut text = String::new();
    for l in lines {
        text.push_str(&format!("{},{},{},{}\n", l.truth, l.computed, l.fn_, l.fp));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn run_synth(args: &SynthArgs) -> std::result::Result<(), (i32, Error)> {
    let input = |e: Error| (EXIT_INPUT, e);
    let output = |e: Error| (EXIT_INTERNAL, e);

    let preset: Preset = args.preset.parse().map_err(input)?;
    let scenario = match preset.scenario() {
        Some(s) => s,
        None => {
            let params = RandomParams {
                cameras: args.cameras,
                identities: args.identities,
                mean_length: args.mean_length,
                overlap_fraction: args.overlap_fraction,
                rates: CorruptionRates {
                    fragment: args.fragment_rate,
                    merge: args.merge_rate,
                    flip: args.flip_rate,
                    drop: args.drop_rate,
                    spurious: args.spurious_rate,
                    jitter: args.jitter,
                },
                seed: args.seed,
                mode: overlap_mode(args.mode, None),
            };
            random_scenario(&params).map_err(input)?.1
        }
    };
    std::fs::create_dir_all(&args.out).map_err(|e| output(Error::io(&args.out, e)))?;
    let (truth, computed) = scenario.to_rows();
    save_detections(args.out.join("gt.csv"), &truth).map_err(output)?;
    save_detections(args.out.join("res.csv"), &computed).map_err(output)?;
    Ok(())
}

/// Runs the parsed command and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let result = match &cli.command {
        Command::Evaluate(a) => run_evaluate(a),
        Command::Synth(a) => run_synth(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err((code, e)) => {
            eprintln!("mtmc-eval: {e}");
            code
        }
    }
}

pub fn main() -> i32 {
    match Cli::try_parse() {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_INPUT
            } else {
                EXIT_OK
            }
        }
    }
}
