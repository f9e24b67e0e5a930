//! End-to-end pipeline over simulated (or loaded) frames: decode →
//! grouping → PnP → stabilization → occlusion, with per-stage timings and
//! per-frame fault isolation.

use std::time::Instant;

use footpose::decode::{extract_peaks, group_keypoints, FootInstance};
use footpose::geom::{Intrinsics, Pt2, Pt3};
use footpose::occlude::occlusion_mask;
use footpose::pnp::{project_model_keypoints, solve_pnp, FootModel, PnpError};
use footpose::{MatchedPairs, Pose, Stabilizer};

use crate::config::HarnessConfig;
use crate::io::pose::PoseRecord;
use crate::report::{compute_aggregates, FrameRow, RunReport};
use crate::sim::FrameRecord;
use crate::HarnessError;

#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions {
    /// When off, the refined stream is a copy of the measured stream.
    pub stabilize_enabled: bool,
    /// Reported as the network-forwarding stand-in (simulation or tensor
    /// load time per frame), never counted into the pipeline fps.
    pub network_stand_in_ms: Option<f64>,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            stabilize_enabled: true,
            network_stand_in_ms: None,
        }
    }
}

/// Mean frame-to-frame reprojected keypoint displacement in pixels.
///
/// For each consecutive pose pair, the model keypoints are projected under
/// both poses and the mean L2 displacement is taken; the metric averages
/// those over the sequence.
pub fn jitter_metric(
    poses: &[Pose],
    model: &FootModel,
    k: &Intrinsics,
) -> Result<f64, HarnessError> {
    if poses.len() < 2 {
        return Err(HarnessError::Config(
            "jitter metric needs at least 2 poses".into(),
        ));
    }
    let mut total = 0.0;
    for pair in poses.windows(2) {
        total += pair_displacement(&pair[0], &pair[1], model, k)?;
    }
    Ok(total / (poses.len() - 1) as f64)
}

fn pair_displacement(
    a: &Pose,
    b: &Pose,
    model: &FootModel,
    k: &Intrinsics,
) -> Result<f64, HarnessError> {
    let pa = project_model_keypoints(model, a, k)
        .map_err(|e| HarnessError::Format(e.to_string()))?;
    let pb = project_model_keypoints(model, b, k)
        .map_err(|e| HarnessError::Format(e.to_string()))?;
    let mean = pa
        .iter()
        .zip(pb.iter())
        .map(|(x, y)| (y - x).norm())
        .sum::<f64>()
        / pa.len() as f64;
    Ok(mean)
}

/// Jitter over a stream with gaps: consecutive present pairs only; 0 when
/// fewer than one pair exists.
pub fn jitter_from_optional(poses: &[Option<Pose>], model: &FootModel, k: &Intrinsics) -> f64 {
    let mut total = 0.0;
    let mut pairs = 0usize;
    for w in poses.windows(2) {
        if let (Some(a), Some(b)) = (&w[0], &w[1]) {
            if let Ok(d) = pair_displacement(a, b, model, k) {
                total += d;
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    }
}

/// Mean keypoint position of an instance in image pixels.
fn instance_center(instance: &FootInstance, tensor_scale: f64) -> Pt2 {
    let mut x = 0.0;
    let mut y = 0.0;
    let mut n = 0usize;
    for kp in instance.keypoints().iter().flatten() {
        x += kp.position.x * tensor_scale;
        y += kp.position.y * tensor_scale;
        n += 1;
    }
    if n == 0 {
        Pt2::origin()
    } else {
        Pt2::new(x / n as f64, y / n as f64)
    }
}

/// Assigns decoded instances to persistent foot tracks.
///
/// Initialized tracks take the nearest instance (greedy over increasing
/// distance); uninitialized tracks fill up left to right so track 0 is the
/// leftmost foot on the first frame.
fn associate_tracks(
    instances: &[FootInstance],
    last_centers: &[Option<Pt2>],
    tensor_scale: f64,
) -> Vec<Option<usize>> {
    let feet = last_centers.len();
    let mut assignment: Vec<Option<usize>> = vec![None; feet];
    let mut taken = vec![false; instances.len()];

    // Greedy nearest pairing for initialized tracks.
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (track, center) in last_centers.iter().enumerate() {
        let Some(center) = center else { continue };
        for (i, inst) in instances.iter().enumerate() {
            let d = (instance_center(inst, tensor_scale) - center).norm();
            candidates.push((d, track, i));
        }
    }
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    for (_, track, i) in candidates {
        if assignment[track].is_none() && !taken[i] {
            assignment[track] = Some(i);
            taken[i] = true;
        }
    }

    // Remaining instances to uninitialized tracks, leftmost first.
    let mut leftovers: Vec<(f64, usize)> = instances
        .iter()
        .enumerate()
        .filter(|(i, _)| !taken[*i])
        .map(|(i, inst)| (instance_center(inst, tensor_scale).x, i))
        .collect();
    leftovers.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut next = leftovers.into_iter();
    for slot in assignment.iter_mut() {
        if slot.is_none() {
            if let Some((_, i)) = next.next() {
                *slot = Some(i);
            }
        }
    }
    assignment
}

pub fn run_pipeline(
    frames: &[FrameRecord],
    model: &FootModel,
    cfg: &HarnessConfig,
    options: &PipelineOptions,
) -> Result<RunReport, HarnessError> {
    if frames.is_empty() {
        return Err(HarnessError::Config("no frames to process".into()));
    }
    let k = cfg.camera()?;
    let skeleton = cfg.skeleton()?;
    let decode_params = cfg.decode.to_params();
    let tensor_scale = cfg.tensor_scale();
    let feet = cfg.trajectory.feet;

    let mut stabilizers: Vec<Stabilizer> = (0..feet)
        .map(|_| Stabilizer::new(cfg.stabilize.to_core()))
        .collect();
    let mut last_centers: Vec<Option<Pt2>> = vec![None; feet];
    let mut rows: Vec<FrameRow> = Vec::with_capacity(frames.len());

    for frame in frames {
        let mut errors: Vec<String> = Vec::new();

        // Decode and group.
        let t0 = Instant::now();
        let peaks = extract_peaks(
            &frame.tensors.heatmap,
            decode_params.threshold,
            decode_params.nms_radius,
        );
        let grouped = group_keypoints(
            &peaks,
            &frame.tensors.pafmap,
            &skeleton,
            decode_params.min_score,
            decode_params.n_samples,
        );
        let decode_ms = t0.elapsed().as_secs_f64() * 1000.0;

        // Keep instances usable for pose recovery, best first, one per foot.
        let usable: Vec<FootInstance> = grouped
            .into_iter()
            .filter(|i| i.completeness() >= 6)
            .take(feet)
            .collect();
        let assignment = associate_tracks(&usable, &last_centers, tensor_scale);

        // Pose estimation and stabilization.
        let t1 = Instant::now();
        let mut measured: Vec<Option<Pose>> = vec![None; feet];
        let mut refined: Vec<Option<Pose>> = vec![None; feet];
        let mut residuals: Vec<Option<f64>> = vec![None; feet];
        for track in 0..feet {
            let Some(instance_idx) = assignment[track] else {
                errors.push(format!("foot {track}: no decoded instance"));
                continue;
            };
            let instance = &usable[instance_idx];
            let image_instance = instance.scaled(tensor_scale);
            let correspondences: Vec<(Pt2, Pt3)> = (0..footpose::targets::NUM_KEYPOINTS)
                .filter_map(|c| {
                    image_instance
                        .keypoint(c)
                        .map(|kp| (kp.position, model.keypoints3d()[c]))
                })
                .collect();
            let solution = match solve_pnp(&correspondences, &k) {
                Ok(s) => s,
                Err(PnpError::NonConvergence { best }) => {
                    errors.push(format!("foot {track}: pose refinement stalled"));
                    best
                }
                Err(e) => {
                    errors.push(format!("foot {track}: {e}"));
                    continue;
                }
            };
            measured[track] = Some(solution.pose);
            residuals[track] = Some(solution.residual_px);
            last_centers[track] = Some(instance_center(instance, tensor_scale));

            if options.stabilize_enabled {
                let empty = MatchedPairs::empty();
                let pairs = frame.pairs.get(track).unwrap_or(&empty);
                match stabilizers[track].step(&solution.pose, pairs, &model.cloud().clone(), &k) {
                    Ok(pose) => refined[track] = Some(pose),
                    Err(e) => {
                        errors.push(format!("foot {track}: stabilize: {e}"));
                        refined[track] = Some(solution.pose);
                    }
                }
            } else {
                refined[track] = Some(solution.pose);
            }
        }
        let pose_ms = t1.elapsed().as_secs_f64() * 1000.0;

        // Occlusion generation.
        let t2 = Instant::now();
        let occlusion_pixels = match occlusion_mask(&frame.shoe_mask, &frame.leg_mask) {
            Ok(mask) => Some(mask.count_ones()),
            Err(e) => {
                errors.push(format!("occlusion: {e}"));
                None
            }
        };
        let occlusion_ms = t2.elapsed().as_secs_f64() * 1000.0;

        rows.push(FrameRow {
            frame: frame.index,
            truth: frame
                .true_poses
                .iter()
                .enumerate()
                .map(|(foot, p)| PoseRecord::from_pose(frame.index, foot, p, vec![]))
                .collect(),
            measured: measured
                .iter()
                .enumerate()
                .map(|(foot, p)| {
                    p.map(|p| PoseRecord::from_pose(frame.index, foot, &p, vec![]))
                })
                .collect(),
            refined: refined
                .iter()
                .enumerate()
                .map(|(foot, p)| {
                    p.map(|p| {
                        PoseRecord::from_pose(frame.index, foot, &p, vec!["refined".into()])
                    })
                })
                .collect(),
            residual_px: residuals,
            occlusion_pixels,
            decode_ms,
            pose_ms,
            occlusion_ms,
            errors,
        });
    }

    let aggregates = compute_aggregates(&rows, model, &k, options.network_stand_in_ms)?;
    Ok(RunReport {
        camera: cfg.trajectory.camera,
        stabilizer_enabled: options.stabilize_enabled,
        frames: rows,
        aggregates,
    })
}
