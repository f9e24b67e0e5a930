//! Run reports: per-frame records plus aggregates that can always be
//! recomputed from those records.

use std::fs;
use std::path::Path;

use footpose::geom::Intrinsics;
use footpose::pnp::{pose_error, FootModel};
use footpose::Pose;
use serde::{Deserialize, Serialize};

use crate::config::CameraConfig;
use crate::io::pose::PoseRecord;
use crate::pipeline::jitter_from_optional;
use crate::HarnessError;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FrameRow {
    pub frame: usize,
    pub truth: Vec<PoseRecord>,
    pub measured: Vec<Option<PoseRecord>>,
    pub refined: Vec<Option<PoseRecord>>,
    pub residual_px: Vec<Option<f64>>,
    pub occlusion_pixels: Option<usize>,
    pub decode_ms: f64,
    pub pose_ms: f64,
    pub occlusion_ms: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
}

/// Per-stage wall-clock summary. The first row stands in for network
/// inference (simulation or tensor loading time), since no network runs
/// here; the remaining rows time the actual pipeline stages.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    /// Simulation / tensor ingest per frame; not part of the pipeline fps.
    pub network_stand_in_ms: Option<f64>,
    /// Decode + grouping + PnP + stabilization, mean per frame.
    pub pose_estimation_and_stabilization_ms: f64,
    /// Occlusion-region generation, mean per frame.
    pub rendering_and_occlusion_ms: f64,
    /// Frames per second over all pipeline stages (excluding the stand-in).
    pub pipeline_fps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub frames: usize,
    pub feet: usize,
    /// Mean Euler-angle error of the refined stream, degrees.
    pub mean_euler_deg: f64,
    /// Mean translation error of the refined stream, centimeters.
    pub mean_translation_cm: f64,
    /// Same metrics for the raw measured stream.
    pub mean_euler_deg_raw: f64,
    pub mean_translation_cm_raw: f64,
    pub mean_residual_px: f64,
    /// Frame-to-frame reprojected keypoint displacement, primary foot.
    pub jitter_raw_px: f64,
    pub jitter_refined_px: f64,
    pub timing: TimingSummary,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub camera: CameraConfig,
    pub stabilizer_enabled: bool,
    pub frames: Vec<FrameRow>,
    pub aggregates: Aggregates,
}

impl RunReport {
    pub fn save(&self, path: &Path) -> Result<(), HarnessError> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json).map_err(|e| HarnessError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Recomputes every aggregate from the per-frame rows; used by the
    /// pipeline itself, so stored aggregates always satisfy this identity.
    pub fn recompute_aggregates(
        &self,
        model: &FootModel,
        network_stand_in_ms: Option<f64>,
    ) -> Result<Aggregates, HarnessError> {
        let k = Intrinsics::new(self.camera.fx, self.camera.fy, self.camera.cx, self.camera.cy)
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        compute_aggregates(&self.frames, model, &k, network_stand_in_ms)
    }
}

fn to_pose(record: &Option<PoseRecord>) -> Option<Pose> {
    record.as_ref().and_then(|r| r.to_pose().ok())
}

pub fn compute_aggregates(
    rows: &[FrameRow],
    model: &FootModel,
    k: &Intrinsics,
    network_stand_in_ms: Option<f64>,
) -> Result<Aggregates, HarnessError> {
    let frames = rows.len();
    let feet = rows.iter().map(|r| r.truth.len()).max().unwrap_or(0);

    let mut refined_euler = MeanAcc::default();
    let mut refined_trans = MeanAcc::default();
    let mut raw_euler = MeanAcc::default();
    let mut raw_trans = MeanAcc::default();
    let mut residual = MeanAcc::default();
    let mut decode_ms = MeanAcc::default();
    let mut pose_ms = MeanAcc::default();
    let mut occl_ms = MeanAcc::default();

    for row in rows {
        decode_ms.push(row.decode_ms);
        pose_ms.push(row.pose_ms);
        occl_ms.push(row.occlusion_ms);
        for foot in 0..row.truth.len() {
            let truth = row.truth[foot].to_pose()?;
            if let Some(m) = row.measured.get(foot).and_then(to_pose) {
                let e = pose_error(&m, &truth);
                raw_euler.push(e.mean_euler_deg);
                raw_trans.push(e.translation_cm);
            }
            if let Some(r) = row.refined.get(foot).and_then(to_pose) {
                let e = pose_error(&r, &truth);
                refined_euler.push(e.mean_euler_deg);
                refined_trans.push(e.translation_cm);
            }
            if let Some(Some(res)) = row.residual_px.get(foot) {
                residual.push(*res);
            }
        }
    }

    // Jitter over the primary foot's streams.
    let measured0: Vec<Option<Pose>> = rows
        .iter()
        .map(|r| r.measured.first().and_then(to_pose))
        .collect();
    let refined0: Vec<Option<Pose>> = rows
        .iter()
        .map(|r| r.refined.first().and_then(to_pose))
        .collect();
    let jitter_raw_px = jitter_from_optional(&measured0, model, k);
    let jitter_refined_px = jitter_from_optional(&refined0, model, k);

    let per_frame_ms = decode_ms.mean() + pose_ms.mean() + occl_ms.mean();
    let pipeline_fps = if per_frame_ms > 0.0 {
        1000.0 / per_frame_ms
    } else {
        f64::INFINITY
    };

    Ok(Aggregates {
        frames,
        feet,
        mean_euler_deg: refined_euler.mean(),
        mean_translation_cm: refined_trans.mean(),
        mean_euler_deg_raw: raw_euler.mean(),
        mean_translation_cm_raw: raw_trans.mean(),
        mean_residual_px: residual.mean(),
        jitter_raw_px,
        jitter_refined_px,
        timing: TimingSummary {
            network_stand_in_ms,
            pose_estimation_and_stabilization_ms: decode_ms.mean() + pose_ms.mean(),
            rendering_and_occlusion_ms: occl_ms.mean(),
            pipeline_fps,
        },
    })
}

#[derive(Default)]
struct MeanAcc {
    sum: f64,
    count: usize,
}

impl MeanAcc {
    fn push(&mut self, v: f64) {
        self.sum += v;
        self.count += 1;
    }

    fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }
}
