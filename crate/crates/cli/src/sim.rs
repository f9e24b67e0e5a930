//! Deterministic synthetic sequence generator.
//!
//! Stands in for the camera and the network: builds ground-truth pose
//! trajectories, projects the foot model, perturbs keypoints with Gaussian
//! noise, encodes the output grids, synthesizes matched corner pairs from
//! the true inter-frame motion, and rasterizes leg and shoe masks from the
//! projected geometry. Runs are bitwise reproducible for a given seed: the
//! only randomness source is a ChaCha8 stream seeded from the config, with
//! normal deviates drawn by the Box-Muller transform.

use footpose::decode::{FootInstance, Keypoint};
use footpose::geom::{matrix_to_quat, project_point, Intrinsics, Mat3, Pose, Pt2, Pt3, Vec3};
use footpose::pnp::{project_model_keypoints, FootModel};
use footpose::raster::fill_polygon;
use footpose::targets::{
    encode_heatmaps, encode_pafs, encode_segmentation, OutputTensors, NUM_KEYPOINTS,
};
use footpose::{BinaryMask, MatchedPairs};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{HarnessConfig, MotionProfile};
use crate::HarnessError;

/// Every cloud point with this stride becomes a synthetic tracked corner.
const CORNER_STRIDE: usize = 5;

/// One simulated frame: ground truth plus everything the pipeline sees.
#[derive(Clone, Debug)]
pub struct FrameRecord {
    pub index: usize,
    pub timestamp_s: f64,
    /// Ground-truth pose per foot.
    pub true_poses: Vec<Pose>,
    /// Noise-free projected keypoints per foot, image pixels.
    pub true_keypoints_px: Vec<[Pt2; NUM_KEYPOINTS]>,
    /// Keypoints after observation noise, image pixels.
    pub noisy_keypoints_px: Vec<[Pt2; NUM_KEYPOINTS]>,
    /// Encoded network-style grids (from the noisy keypoints).
    pub tensors: OutputTensors,
    /// Matched corner pairs per foot; empty on the first frame.
    pub pairs: Vec<MatchedPairs>,
    /// Leg mask for the primary foot, image resolution.
    pub leg_mask: BinaryMask,
    /// Rendered-shoe mask (with opening hole) for the primary foot.
    pub shoe_mask: BinaryMask,
}

/// The fixed viewing rotation: camera looks down-forward at a foot whose
/// toe points up-screen. Columns map the model axes (heel→toe, left, up)
/// into the camera frame.
fn base_rotation() -> Mat3 {
    Mat3::from_columns(&[
        Vec3::new(0.0, -0.8, 0.6),
        Vec3::new(-1.0, 0.0, 0.0),
        Vec3::new(0.0, -0.6, -0.8),
    ])
}

fn base_translation(foot: usize, feet: usize) -> Vec3 {
    if feet == 1 {
        Vec3::new(0.0, 0.10, 0.62)
    } else {
        let side = if foot == 0 { -1.0 } else { 1.0 };
        Vec3::new(side * 0.105, 0.10, 0.65)
    }
}

/// Ground-truth pose of one foot at one frame.
pub fn trajectory_pose(cfg: &HarnessConfig, foot: usize, frame: usize) -> Pose {
    let t = &cfg.trajectory;
    let rotation = matrix_to_quat(&base_rotation());
    let translation = base_translation(foot, t.feet);
    let l = frame as f64;
    match t.profile {
        MotionProfile::Static => Pose::new(rotation, translation),
        MotionProfile::Sinusoid => {
            let dz = t.amplitude_m * (core::f64::consts::TAU * l / 60.0).sin();
            let yaw = t.amplitude_rad * (core::f64::consts::TAU * l / 90.0).sin();
            let spin =
                footpose::geom::rotation_from_euler_xyz(0.0, 0.0, yaw);
            Pose::new(rotation * spin, translation + Vec3::new(0.0, 0.0, dz))
        }
        MotionProfile::Walk => {
            // Lateral sway, vertical bounce and a pitch oscillation with the
            // step cycle.
            let phase = core::f64::consts::TAU * l / 40.0;
            let sway = 0.5 * t.amplitude_m * phase.sin();
            let bounce = 0.3 * t.amplitude_m * (2.0 * phase).cos();
            let pitch = t.amplitude_rad * phase.sin();
            let spin = footpose::geom::rotation_from_euler_xyz(0.0, pitch, 0.0);
            Pose::new(
                rotation * spin,
                translation + Vec3::new(sway, bounce, 0.0),
            )
        }
    }
}

/// Standard normal deviate via the Box-Muller transform.
pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (core::f64::consts::TAU * u2).cos()
}

/// Andrew's monotone-chain convex hull, counterclockwise.
pub fn convex_hull(points: &[Pt2]) -> Vec<Pt2> {
    let mut pts: Vec<Pt2> = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup_by(|a, b| (*a - *b).norm() < 1e-12);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: &Pt2, a: &Pt2, b: &Pt2| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    let mut lower: Vec<Pt2> = Vec::new();
    for p in &pts {
        while lower.len() >= 2
            && cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p) <= 0.0
        {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Pt2> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2
            && cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p) <= 0.0
        {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Shoe-opening ring in the model frame: an ankle ellipse inside the foot
/// volume so its projection falls strictly inside the outer silhouette.
fn opening_ring() -> Vec<Pt3> {
    let center = Pt3::new(0.07, 0.0, 0.05);
    let (rx, ry) = (0.032, 0.026);
    (0..16)
        .map(|i| {
            let theta = core::f64::consts::TAU * i as f64 / 16.0;
            Pt3::new(
                center.x + rx * theta.cos(),
                center.y + ry * theta.sin(),
                center.z,
            )
        })
        .collect()
}

/// Model-frame segment of the leg axis: ankle center to above the ankle.
fn leg_axis() -> (Pt3, Pt3) {
    (Pt3::new(0.07, 0.0, 0.05), Pt3::new(0.07, 0.0, 0.45))
}

fn project_cloud(
    model: &FootModel,
    pose: &Pose,
    k: &Intrinsics,
    frame: usize,
) -> Result<Vec<Pt2>, HarnessError> {
    model
        .cloud()
        .points
        .iter()
        .map(|p| {
            project_point(&pose.transform_point(p), k).map_err(|e| HarnessError::Simulation {
                frame,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Rasterizes the rendered-shoe mask (outer hull minus opening hole) and
/// the leg-strip mask for one foot.
fn render_masks(
    model: &FootModel,
    pose: &Pose,
    k: &Intrinsics,
    size: usize,
    frame: usize,
) -> Result<(BinaryMask, BinaryMask, Vec<Pt2>, Vec<Pt2>), HarnessError> {
    let projected = project_cloud(model, pose, k, frame)?;
    let hull = convex_hull(&projected);

    let ring: Vec<Pt2> = opening_ring()
        .iter()
        .map(|p| {
            project_point(&pose.transform_point(p), k).map_err(|e| HarnessError::Simulation {
                frame,
                message: e.to_string(),
            })
        })
        .collect::<Result<_, _>>()?;

    let shoe = fill_polygon(&hull, size, size)
        .subtract(&fill_polygon(&ring, size, size))
        .map_err(|e| HarnessError::Format(e.to_string()))?;

    // Leg strip: a quad from the ankle upward along the projected leg axis,
    // wide in proportion to depth, extended past the image border.
    let (ankle3, top3) = leg_axis();
    let ankle_cam = pose.transform_point(&ankle3);
    let ankle = project_point(&ankle_cam, k).map_err(|e| HarnessError::Simulation {
        frame,
        message: e.to_string(),
    })?;
    let top = project_point(&pose.transform_point(&top3), k).map_err(|e| {
        HarnessError::Simulation {
            frame,
            message: e.to_string(),
        }
    })?;
    let dir = top - ankle;
    let dir = dir / dir.norm().max(1e-9);
    let end = ankle + dir * (2.0 * size as f64);
    let half_w = 0.03 * k.fx / ankle_cam.z;
    let perp = Pt2::new(-dir.y, dir.x) - Pt2::origin();
    let leg_poly = vec![
        ankle - perp * half_w,
        ankle + perp * half_w,
        end + perp * half_w,
        end - perp * half_w,
    ];
    let leg = fill_polygon(&leg_poly, size, size);

    Ok((shoe, leg, hull, leg_poly))
}

/// Generates the full sequence for a config. Bitwise deterministic per
/// seed.
pub fn simulate_sequence(cfg: &HarnessConfig) -> Result<Vec<FrameRecord>, HarnessError> {
    cfg.validate()?;
    simulate_sequence_with_model(cfg, &FootModel::standard())
}

pub fn simulate_sequence_with_model(
    cfg: &HarnessConfig,
    model: &FootModel,
) -> Result<Vec<FrameRecord>, HarnessError> {
    let t = &cfg.trajectory;
    let k = cfg.camera()?;
    let skeleton = cfg.skeleton()?;
    let mut rng = ChaCha8Rng::seed_from_u64(t.seed);
    let scale = 1.0 / cfg.tensor_scale();
    let grid = t.tensor_size;

    let mut frames = Vec::with_capacity(t.frames);
    let mut prev_poses: Vec<Pose> = Vec::new();

    for index in 0..t.frames {
        let true_poses: Vec<Pose> = (0..t.feet)
            .map(|foot| trajectory_pose(cfg, foot, index))
            .collect();

        let mut true_keypoints_px = Vec::with_capacity(t.feet);
        let mut noisy_keypoints_px = Vec::with_capacity(t.feet);
        let mut instances: Vec<FootInstance> = Vec::with_capacity(t.feet);
        for pose in &true_poses {
            let projected =
                project_model_keypoints(model, pose, &k).map_err(|e| HarnessError::Simulation {
                    frame: index,
                    message: e.to_string(),
                })?;
            let mut noisy = projected;
            for p in noisy.iter_mut() {
                p.x += t.keypoint_noise_px * gauss(&mut rng);
                p.y += t.keypoint_noise_px * gauss(&mut rng);
            }
            let mut instance = FootInstance::empty();
            for (c, p) in noisy.iter().enumerate() {
                instance.set_keypoint(c, Keypoint::new(Pt2::new(p.x * scale, p.y * scale), 1.0));
            }
            true_keypoints_px.push(projected);
            noisy_keypoints_px.push(noisy);
            instances.push(instance);
        }

        // Render masks from the primary foot; collect polygons for the
        // segmentation channels of every foot.
        let (shoe_mask, leg_mask, hull_px, leg_poly_px) =
            render_masks(model, &true_poses[0], &k, t.image_size, index)?;
        let mut foot_polys: Vec<Vec<Pt2>> = vec![scale_poly(&hull_px, scale)];
        for pose in true_poses.iter().skip(1) {
            let projected = project_cloud(model, pose, &k, index)?;
            foot_polys.push(scale_poly(&convex_hull(&projected), scale));
        }
        let leg_polys = vec![scale_poly(&leg_poly_px, scale)];

        let heatmap = encode_heatmaps(&instances, cfg.targets.sigma, grid, grid);
        let (pafmap, _) = encode_pafs(
            &instances,
            &skeleton,
            cfg.targets.paf_half_width,
            grid,
            grid,
        );
        let segmap = encode_segmentation(&leg_polys, &foot_polys, grid, grid)
            .map_err(|e| HarnessError::Simulation {
                frame: index,
                message: e.to_string(),
            })?;
        let tensors = OutputTensors::new(heatmap, pafmap, segmap)
            .map_err(|e| HarnessError::Format(e.to_string()))?;

        // Synthetic matched corners: a strided cloud subset projected under
        // the previous and current true poses plus pair noise.
        let mut pairs = Vec::with_capacity(t.feet);
        for foot in 0..t.feet {
            if index == 0 {
                pairs.push(MatchedPairs::empty());
                continue;
            }
            let mut matched = MatchedPairs::empty();
            for point in model.cloud().points.iter().step_by(CORNER_STRIDE) {
                let project = |pose: &Pose| {
                    project_point(&pose.transform_point(point), &k).map_err(|e| {
                        HarnessError::Simulation {
                            frame: index,
                            message: e.to_string(),
                        }
                    })
                };
                let mut prev = project(&prev_poses[foot])?;
                let mut cur = project(&true_poses[foot])?;
                prev.x += t.pair_noise_px * gauss(&mut rng);
                prev.y += t.pair_noise_px * gauss(&mut rng);
                cur.x += t.pair_noise_px * gauss(&mut rng);
                cur.y += t.pair_noise_px * gauss(&mut rng);
                matched.push(prev, cur);
            }
            pairs.push(matched);
        }

        prev_poses = true_poses.clone();
        frames.push(FrameRecord {
            index,
            timestamp_s: index as f64 / 30.0,
            true_poses,
            true_keypoints_px,
            noisy_keypoints_px,
            tensors,
            pairs,
            leg_mask,
            shoe_mask,
        });
    }
    Ok(frames)
}

fn scale_poly(poly: &[Pt2], s: f64) -> Vec<Pt2> {
    poly.iter().map(|p| Pt2::new(p.x * s, p.y * s)).collect()
}
