//! Single-threaded throughput measurement of the pipeline stages.

use std::time::Instant;

use footpose::pnp::FootModel;

use crate::config::HarnessConfig;
use crate::pipeline::{run_pipeline, PipelineOptions};
use crate::report::RunReport;
use crate::sim::simulate_sequence;
use crate::HarnessError;

pub struct BenchResult {
    pub report: RunReport,
    /// Simulation (network stand-in) time per frame, ms.
    pub simulate_ms_per_frame: f64,
}

/// Simulates a noisy sequence and times decode + grouping + PnP +
/// stabilization + occlusion over it, single threaded.
pub fn run_bench(frames: usize, seed: u64) -> Result<BenchResult, HarnessError> {
    let mut cfg = HarnessConfig::default();
    cfg.trajectory.frames = frames;
    cfg.trajectory.seed = seed;
    cfg.trajectory.keypoint_noise_px = 1.0;
    cfg.trajectory.pair_noise_px = 0.3;

    let t0 = Instant::now();
    let records = simulate_sequence(&cfg)?;
    let simulate_ms_per_frame = t0.elapsed().as_secs_f64() * 1000.0 / frames as f64;

    let model = FootModel::standard();
    let options = PipelineOptions {
        stabilize_enabled: true,
        network_stand_in_ms: Some(simulate_ms_per_frame),
    };
    let report = run_pipeline(&records, &model, &cfg, &options)?;
    Ok(BenchResult {
        report,
        simulate_ms_per_frame,
    })
}

pub fn format_table(result: &BenchResult) -> String {
    let t = &result.report.aggregates.timing;
    let mut out = String::new();
    out.push_str(&format!(
        "frames processed                     : {}\n",
        result.report.aggregates.frames
    ));
    out.push_str(&format!(
        "network forwarding (simulated)       : {:8.3} ms/frame\n",
        result.simulate_ms_per_frame
    ));
    out.push_str(&format!(
        "pose estimation and stabilization    : {:8.3} ms/frame\n",
        t.pose_estimation_and_stabilization_ms
    ));
    out.push_str(&format!(
        "rendering and occlusion generation   : {:8.3} ms/frame\n",
        t.rendering_and_occlusion_ms
    ));
    out.push_str(&format!(
        "pipeline throughput                  : {:8.1} frames/s\n",
        t.pipeline_fps
    ));
    out
}
