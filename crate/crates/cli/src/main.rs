//! Command-line front end for the foot-pose pipeline.
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data or format
//! errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use footpose::decode::{extract_peaks, group_keypoints};
use footpose::geom::{Intrinsics, Pt2, Pt3};
use footpose::occlude::occlusion_mask;
use footpose::pnp::{solve_pnp, FootModel, PnpError};
use footpose::targets::NUM_KEYPOINTS;
use footpose::{MatchedPairs, Stabilizer};
use footpose_cli::config::{HarnessConfig, PrevPoseSourceConfig, TranslationPredictionConfig};
use footpose_cli::io::pose::{read_jsonl, write_jsonl, PairRecord, PoseRecord};
use footpose_cli::io::{pgm, tensor};
use footpose_cli::pipeline::{run_pipeline, PipelineOptions};
use footpose_cli::sim::{simulate_sequence, FrameRecord};
use footpose_cli::{bench, HarnessError};
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "footpose",
    about = "Synthetic foot-pose pipeline: simulation, decoding, pose estimation, stabilization and occlusion",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic sequence into a directory.
    Simulate(SimulateArgs),
    /// Decode a stacked tensor file into grouped foot instances.
    Decode(DecodeArgs),
    /// Recover a 6-DoF pose from decoded keypoints.
    Pnp(PnpArgs),
    /// Run the pose filter over measured poses and corner pairs.
    Stabilize(StabilizeArgs),
    /// Build the occlusion mask from shoe and leg masks.
    Occlude(OccludeArgs),
    /// Run the pipeline over a simulated directory and write a report.
    Eval(EvalArgs),
    /// Measure single-threaded pipeline throughput.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config; omit for defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    /// Stacked 24-channel tensor file.
    #[arg(long)]
    tensors: PathBuf,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    nms_radius: Option<f64>,
    #[arg(long)]
    min_score: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args, Clone, Copy)]
struct CameraArgs {
    #[arg(long, default_value_t = 300.0)]
    fx: f64,
    #[arg(long, default_value_t = 300.0)]
    fy: f64,
    #[arg(long, default_value_t = 128.0)]
    cx: f64,
    #[arg(long, default_value_t = 128.0)]
    cy: f64,
}

impl CameraArgs {
    fn intrinsics(&self) -> Result<Intrinsics, HarnessError> {
        Intrinsics::new(self.fx, self.fy, self.cx, self.cy)
            .map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Args)]
struct PnpArgs {
    /// Keypoints JSON: either `decode` output or `{"keypoints": [[x,y];8]}`.
    #[arg(long)]
    keypoints: PathBuf,
    /// Foot model file; the built-in model when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Instance index when the input holds several.
    #[arg(long, default_value_t = 0)]
    instance: usize,
    /// Multiplier applied to keypoints first (e.g. 4 for 64-cell grid
    /// coordinates in a 256 px image).
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[command(flatten)]
    camera: CameraArgs,
    /// Output JSON path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StabilizeArgs {
    /// Measured poses, JSONL.
    #[arg(long)]
    poses: PathBuf,
    /// Matched corner pairs, JSONL.
    #[arg(long)]
    pairs: PathBuf,
    /// Base the flow prediction on the measured translation, exactly as
    /// the update formula is printed.
    #[arg(long)]
    literal_eq5: bool,
    /// Expose the raw affine-log weight instead of clamping to [0, 1].
    #[arg(long)]
    no_clamp: bool,
    /// Feed the raw measured pose back as the previous pose.
    #[arg(long)]
    raw_prev: bool,
    /// Foot model file; the built-in model when omitted.
    #[arg(long)]
    model: Option<PathBuf>,
    #[command(flatten)]
    camera: CameraArgs,
    /// Output JSONL path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OccludeArgs {
    #[arg(long)]
    shoe_mask: PathBuf,
    #[arg(long)]
    leg_mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Directory produced by `simulate`.
    #[arg(long)]
    run: PathBuf,
    /// Report JSON output path.
    #[arg(long)]
    report: PathBuf,
    /// Disable the stabilizer (refined stream copies the measured one).
    #[arg(long)]
    no_stabilize: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 300)]
    frames: usize,
    #[arg(long, default_value_t = 11)]
    seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Decode(args) => cmd_decode(args),
        Command::Pnp(args) => cmd_pnp(args),
        Command::Stabilize(args) => cmd_stabilize(args),
        Command::Occlude(args) => cmd_occlude(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args),
    }
}

fn frame_stem(index: usize) -> String {
    format!("frame_{index:04}")
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), HarnessError> {
    let cfg = match &args.config {
        Some(path) => HarnessConfig::load(path)?,
        None => HarnessConfig::default(),
    };
    let frames = simulate_sequence(&cfg)?;

    fs::create_dir_all(&args.out).map_err(|e| HarnessError::io(&args.out, e))?;
    let config_json = serde_json::to_string_pretty(&cfg)?;
    fs::write(args.out.join("config.json"), config_json)
        .map_err(|e| HarnessError::io(args.out.join("config.json"), e))?;

    let mut truth: Vec<PoseRecord> = Vec::new();
    let mut pairs: Vec<PairRecord> = Vec::new();
    for frame in &frames {
        for (foot, pose) in frame.true_poses.iter().enumerate() {
            truth.push(PoseRecord::from_pose(frame.index, foot, pose, vec![]));
        }
        for (foot, p) in frame.pairs.iter().enumerate() {
            pairs.push(PairRecord::from_pairs(frame.index, foot, p));
        }
        let stem = frame_stem(frame.index);
        tensor::write_tensor(
            &args.out.join(format!("{stem}.arst")),
            &tensor::stack(&frame.tensors),
        )?;
        pgm::write_mask(&args.out.join(format!("{stem}.shoe.pgm")), &frame.shoe_mask)?;
        pgm::write_mask(&args.out.join(format!("{stem}.leg.pgm")), &frame.leg_mask)?;
    }
    write_jsonl(&args.out.join("truth.jsonl"), &truth)?;
    write_jsonl(&args.out.join("pairs.jsonl"), &pairs)?;
    println!("wrote {} frames to {}", frames.len(), args.out.display());
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DecodedInstanceJson {
    completeness: usize,
    mean_confidence: f64,
    /// Grid (tensor-cell) coordinates, one slot per keypoint channel.
    keypoints: Vec<Option<[f64; 2]>>,
    confidences: Vec<Option<f64>>,
}

#[derive(Serialize, Deserialize)]
struct DecodeOutputJson {
    grid: [usize; 2],
    instances: Vec<DecodedInstanceJson>,
}

fn cmd_decode(args: DecodeArgs) -> Result<(), HarnessError> {
    let cfg = HarnessConfig::default();
    let stacked = tensor::read_tensor(&args.tensors)?;
    let tensors = tensor::unstack(&stacked)?;
    let skeleton = cfg.skeleton()?;
    let mut params = cfg.decode.to_params();
    if let Some(v) = args.threshold {
        params.threshold = v;
    }
    if let Some(v) = args.nms_radius {
        params.nms_radius = v;
    }
    if let Some(v) = args.min_score {
        params.min_score = v;
    }
    if let Some(v) = args.samples {
        params.n_samples = v;
    }

    let peaks = extract_peaks(&tensors.heatmap, params.threshold, params.nms_radius);
    let instances = group_keypoints(
        &peaks,
        &tensors.pafmap,
        &skeleton,
        params.min_score,
        params.n_samples,
    );

    let out = DecodeOutputJson {
        grid: [tensors.heatmap.height(), tensors.heatmap.width()],
        instances: instances
            .iter()
            .map(|inst| DecodedInstanceJson {
                completeness: inst.completeness(),
                mean_confidence: inst.mean_confidence(),
                keypoints: inst
                    .keypoints()
                    .iter()
                    .map(|kp| kp.as_ref().map(|kp| [kp.position.x, kp.position.y]))
                    .collect(),
                confidences: inst
                    .keypoints()
                    .iter()
                    .map(|kp| kp.as_ref().map(|kp| kp.confidence))
                    .collect(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&out)?;
    fs::write(&args.out, json).map_err(|e| HarnessError::io(&args.out, e))?;
    println!("decoded {} instance(s)", out.instances.len());
    Ok(())
}

#[derive(Deserialize)]
struct KeypointListJson {
    keypoints: Vec<[f64; 2]>,
}

fn load_model(path: &Option<PathBuf>) -> Result<FootModel, HarnessError> {
    match path {
        Some(p) => footpose_cli::io::read_model(p),
        None => Ok(FootModel::standard()),
    }
}

fn cmd_pnp(args: PnpArgs) -> Result<(), HarnessError> {
    let text =
        fs::read_to_string(&args.keypoints).map_err(|e| HarnessError::io(&args.keypoints, e))?;
    let keypoints: Vec<Option<Pt2>> = if let Ok(decoded) =
        serde_json::from_str::<DecodeOutputJson>(&text)
    {
        let instance = decoded.instances.get(args.instance).ok_or_else(|| {
            HarnessError::Format(format!(
                "instance {} out of range ({} available)",
                args.instance,
                decoded.instances.len()
            ))
        })?;
        instance
            .keypoints
            .iter()
            .map(|kp| kp.map(|[x, y]| Pt2::new(x, y)))
            .collect()
    } else {
        let list: KeypointListJson = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Format(format!("{}: {e}", args.keypoints.display())))?;
        if list.keypoints.len() != NUM_KEYPOINTS {
            return Err(HarnessError::Format(format!(
                "expected {NUM_KEYPOINTS} keypoints, got {}",
                list.keypoints.len()
            )));
        }
        list.keypoints
            .iter()
            .map(|&[x, y]| Some(Pt2::new(x, y)))
            .collect()
    };

    let model = load_model(&args.model)?;
    let k = args.camera.intrinsics()?;
    let correspondences: Vec<(Pt2, Pt3)> = keypoints
        .iter()
        .enumerate()
        .filter_map(|(c, kp)| {
            kp.map(|p| {
                (
                    Pt2::new(p.x * args.scale, p.y * args.scale),
                    model.keypoints3d()[c],
                )
            })
        })
        .collect();

    let solution = match solve_pnp(&correspondences, &k) {
        Ok(s) => s,
        Err(PnpError::NonConvergence { best }) => {
            eprintln!("warning: refinement stalled; reporting best pose");
            best
        }
        Err(e) => return Err(HarnessError::Format(e.to_string())),
    };

    #[derive(Serialize)]
    struct PnpOutput {
        pose: PoseRecord,
        residual_px: f64,
        iterations: usize,
    }
    let out = PnpOutput {
        pose: PoseRecord::from_pose(0, 0, &solution.pose, vec![]),
        residual_px: solution.residual_px,
        iterations: solution.iterations,
    };
    let json = serde_json::to_string_pretty(&out)?;
    match &args.out {
        Some(path) => fs::write(path, json).map_err(|e| HarnessError::io(path, e))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cmd_stabilize(args: StabilizeArgs) -> Result<(), HarnessError> {
    let poses: Vec<PoseRecord> = read_jsonl(&args.poses)?;
    let pair_records: Vec<PairRecord> = read_jsonl(&args.pairs)?;
    let model = load_model(&args.model)?;
    let k = args.camera.intrinsics()?;

    let mut cfg = HarnessConfig::default().stabilize;
    if args.no_clamp {
        cfg.weight_clamp = false;
    }
    if args.raw_prev {
        cfg.prev_pose_source = PrevPoseSourceConfig::Raw;
    }
    if args.literal_eq5 {
        cfg.translation_prediction = TranslationPredictionConfig::MeasuredBase;
    }

    // Independent filter stream per foot id, frames in file order.
    let feet: Vec<usize> = {
        let mut ids: Vec<usize> = poses.iter().map(|p| p.foot).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let mut refined: Vec<PoseRecord> = Vec::with_capacity(poses.len());
    for foot in feet {
        let mut filter = Stabilizer::new(cfg.to_core());
        for record in poses.iter().filter(|p| p.foot == foot) {
            let measured = record.to_pose()?;
            let pairs = pair_records
                .iter()
                .find(|p| p.frame == record.frame && p.foot == foot)
                .map(|p| p.to_pairs())
                .transpose()?
                .unwrap_or_else(MatchedPairs::empty);
            let pose = filter.step(&measured, &pairs, model.cloud(), &k).map_err(|e| {
                HarnessError::Format(format!("frame {} foot {foot}: {e}", record.frame))
            })?;
            refined.push(PoseRecord::from_pose(
                record.frame,
                foot,
                &pose,
                vec!["refined".into()],
            ));
        }
    }
    refined.sort_by_key(|r| (r.frame, r.foot));

    match &args.out {
        Some(path) => write_jsonl(path, &refined)?,
        None => {
            for record in &refined {
                println!("{}", serde_json::to_string(record)?);
            }
        }
    }
    Ok(())
}

fn cmd_occlude(args: OccludeArgs) -> Result<(), HarnessError> {
    let shoe = pgm::read_mask(&args.shoe_mask)?;
    let leg = pgm::read_mask(&args.leg_mask)?;
    let mask = occlusion_mask(&shoe, &leg).map_err(|e| HarnessError::Format(e.to_string()))?;
    pgm::write_mask(&args.out, &mask)?;
    println!("occlusion pixels: {}", mask.count_ones());
    Ok(())
}

/// Rebuilds frame records from a `simulate` output directory.
fn load_run_dir(dir: &Path) -> Result<(HarnessConfig, Vec<FrameRecord>, f64), HarnessError> {
    let cfg = HarnessConfig::load(&dir.join("config.json"))?;
    let truth: Vec<PoseRecord> = read_jsonl(&dir.join("truth.jsonl"))?;
    let pair_records: Vec<PairRecord> = read_jsonl(&dir.join("pairs.jsonl"))?;
    let model = FootModel::standard();
    let k = cfg.camera()?;

    let t0 = Instant::now();
    let mut frames = Vec::with_capacity(cfg.trajectory.frames);
    for index in 0..cfg.trajectory.frames {
        let stem = frame_stem(index);
        let stacked = tensor::read_tensor(&dir.join(format!("{stem}.arst")))?;
        let tensors = tensor::unstack(&stacked)?;
        let shoe_mask = pgm::read_mask(&dir.join(format!("{stem}.shoe.pgm")))?;
        let leg_mask = pgm::read_mask(&dir.join(format!("{stem}.leg.pgm")))?;

        let mut true_poses = Vec::new();
        for record in truth.iter().filter(|r| r.frame == index) {
            true_poses.push(record.to_pose()?);
        }
        if true_poses.is_empty() {
            return Err(HarnessError::Format(format!(
                "truth.jsonl has no poses for frame {index}"
            )));
        }
        let mut pairs = vec![MatchedPairs::empty(); true_poses.len()];
        for record in pair_records.iter().filter(|r| r.frame == index) {
            if record.foot < pairs.len() {
                pairs[record.foot] = record.to_pairs()?;
            }
        }

        // Recreate projected keypoints for completeness of the record.
        let mut true_keypoints_px = Vec::with_capacity(true_poses.len());
        for pose in &true_poses {
            let projected = footpose::pnp::project_model_keypoints(&model, pose, &k)
                .map_err(|e| HarnessError::Format(e.to_string()))?;
            true_keypoints_px.push(projected);
        }

        frames.push(FrameRecord {
            index,
            timestamp_s: index as f64 / 30.0,
            true_poses,
            true_keypoints_px: true_keypoints_px.clone(),
            noisy_keypoints_px: true_keypoints_px,
            tensors,
            pairs,
            leg_mask,
            shoe_mask,
        });
    }
    let load_ms = t0.elapsed().as_secs_f64() * 1000.0 / cfg.trajectory.frames as f64;
    Ok((cfg, frames, load_ms))
}

fn cmd_eval(args: EvalArgs) -> Result<(), HarnessError> {
    let (cfg, frames, load_ms) = load_run_dir(&args.run)?;
    let model = FootModel::standard();
    let options = PipelineOptions {
        stabilize_enabled: !args.no_stabilize,
        network_stand_in_ms: Some(load_ms),
    };
    let report = run_pipeline(&frames, &model, &cfg, &options)?;
    report.save(&args.report)?;
    let a = &report.aggregates;
    println!(
        "frames {} | euler {:.3} deg | translation {:.3} cm | jitter raw {:.3} px, refined {:.3} px | {:.1} fps",
        a.frames,
        a.mean_euler_deg,
        a.mean_translation_cm,
        a.jitter_raw_px,
        a.jitter_refined_px,
        a.timing.pipeline_fps
    );
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<(), HarnessError> {
    let result = bench::run_bench(args.frames, args.seed)?;
    print!("{}", bench::format_table(&result));
    Ok(())
}
