//! Divergence-weighted pose stabilization.
//!
//! Fuses the flow-predicted motion of the previous pose with the measured
//! pose of the current frame. The mean corner displacement is lifted to
//! camera space under a constant-depth assumption and added to the previous
//! translation; the model cloud is projected under both the prediction and
//! the measurement, and their mean per-point L1 pixel distance `D` drives
//! the blend weights `w_R = clamp(α·ln D + β, 0, 1)` and `w_T = w_R²`.
//! Small divergence holds the previous pose, large divergence defers to
//! the measurement.

use core::fmt;

use nalgebra::ComplexField;

use crate::geom::{project_point, Intrinsics, PointCloud, Pose, UnitQuat, Vec2, Vec3};
use crate::track::MatchedPairs;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivergenceSide {
    Predicted,
    Measured,
}

impl fmt::Display for DivergenceSide {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DivergenceSide::Predicted => write!(f, "predicted"),
            DivergenceSide::Measured => write!(f, "measured"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StabilizeError {
    /// No matched pairs; the caller falls back to the measured pose.
    NoMatches,
    /// Depth must be positive to lift pixel displacement to camera space.
    InvalidDepth { t_z: f64 },
    /// The divergence cloud must be nonempty.
    EmptyCloud,
    /// A cloud point fell behind the camera under the named pose.
    BehindCamera { side: DivergenceSide },
    /// Blended quaternion collapsed to (near) zero norm.
    DegenerateBlend,
}

impl fmt::Display for StabilizeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StabilizeError::NoMatches => write!(f, "no matched corner pairs"),
            StabilizeError::InvalidDepth { t_z } => {
                write!(f, "depth {t_z} must be positive")
            }
            StabilizeError::EmptyCloud => write!(f, "divergence cloud is empty"),
            StabilizeError::BehindCamera { side } => {
                write!(f, "cloud point behind camera under the {side} pose")
            }
            StabilizeError::DegenerateBlend => write!(f, "quaternion blend collapsed to zero"),
        }
    }
}

#[cfg(any(feature = "std", test))]
impl std::error::Error for StabilizeError {}

/// Which pose becomes the next frame's "previous pose".
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PrevPoseSource {
    /// Recursive smoothing: feed the refined pose back.
    #[default]
    Refined,
    /// Feed the raw measured pose back.
    Raw,
}

/// Base translation for the flow prediction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TranslationPrediction {
    /// Add the lifted displacement to the previous translation.
    #[default]
    PropagatePrev,
    /// Add the lifted displacement to the current measured translation,
    /// matching the update formula as literally printed.
    MeasuredBase,
}

/// Stabilizer tuning; every field is a configuration key.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilizerConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Divergence floor applied before the logarithm, pixels.
    pub d_floor: f64,
    /// Clamp `w_R` into [0, 1]; off exposes the raw affine-log value.
    pub weight_clamp: bool,
    pub prev_pose_source: PrevPoseSource,
    pub translation_prediction: TranslationPrediction,
}

impl Default for StabilizerConfig {
    fn default() -> Self {
        Self {
            alpha: 0.432,
            beta: 2.388,
            d_floor: 1e-3,
            weight_clamp: true,
            prev_pose_source: PrevPoseSource::default(),
            translation_prediction: TranslationPrediction::default(),
        }
    }
}

/// Mean pixel displacement of the matched pairs.
pub fn mean_displacement(pairs: &MatchedPairs) -> Result<Vec2, StabilizeError> {
    if pairs.is_empty() {
        return Err(StabilizeError::NoMatches);
    }
    let mut sum = Vec2::zeros();
    for (p, c) in pairs.iter() {
        sum += c - p;
    }
    Ok(sum / pairs.len() as f64)
}

/// Lifts a pixel displacement to camera space at constant depth `t_z`:
/// `(vx·t_z/fx, vy·t_z/fy, 0)`.
pub fn lift_displacement(
    v_pix: &Vec2,
    t_z: f64,
    k: &Intrinsics,
) -> Result<Vec3, StabilizeError> {
    if t_z <= 0.0 {
        return Err(StabilizeError::InvalidDepth { t_z });
    }
    Ok(Vec3::new(v_pix.x * t_z / k.fx, v_pix.y * t_z / k.fy, 0.0))
}

/// Flow-predicted translation: base plus camera-space displacement, with
/// the depth component carried over unchanged.
pub fn predict_translation(base: &Vec3, v_cam: &Vec3) -> Vec3 {
    Vec3::new(base.x + v_cam.x, base.y + v_cam.y, base.z)
}

/// Mean per-point L1 pixel distance between the cloud projected under the
/// prediction `[R_prev | t_pred]` and the measurement `[R_cur | t_cur]`.
pub fn divergence(
    cloud: &PointCloud,
    r_prev: &UnitQuat,
    t_pred: &Vec3,
    r_cur: &UnitQuat,
    t_cur: &Vec3,
    k: &Intrinsics,
) -> Result<f64, StabilizeError> {
    if cloud.is_empty() {
        return Err(StabilizeError::EmptyCloud);
    }
    let predicted = Pose::new(*r_prev, *t_pred);
    let measured = Pose::new(*r_cur, *t_cur);
    let mut total = 0.0;
    for p in &cloud.points {
        let a = project_point(&predicted.transform_point(p), k).map_err(|_| {
            StabilizeError::BehindCamera {
                side: DivergenceSide::Predicted,
            }
        })?;
        let b = project_point(&measured.transform_point(p), k).map_err(|_| {
            StabilizeError::BehindCamera {
                side: DivergenceSide::Measured,
            }
        })?;
        total += ComplexField::abs(a.x - b.x) + ComplexField::abs(a.y - b.y);
    }
    Ok(total / cloud.len() as f64)
}

/// Rotation update weight `α·ln(max(D, d_floor)) + β`, clamped to [0, 1]
/// unless the clamp is disabled.
pub fn rotation_weight(d: f64, cfg: &StabilizerConfig) -> f64 {
    let raw = cfg.alpha * ComplexField::ln(d.max(cfg.d_floor)) + cfg.beta;
    if cfg.weight_clamp {
        raw.clamp(0.0, 1.0)
    } else {
        raw
    }
}

/// Translation update weight `w_T = w_R²`.
pub fn translation_weight(w_r: f64) -> f64 {
    w_r * w_r
}

/// Normalized linear quaternion blend with hemisphere alignment.
///
/// `w = 1` returns `q_cur` and `w = 0` returns `q_prev` exactly (bitwise);
/// otherwise `q_cur` is sign-aligned to `q_prev`, blended linearly and
/// renormalized.
pub fn blend_rotation(
    q_prev: &UnitQuat,
    q_cur: &UnitQuat,
    w_r: f64,
) -> Result<UnitQuat, StabilizeError> {
    if w_r == 1.0 {
        return Ok(*q_cur);
    }
    if w_r == 0.0 {
        return Ok(*q_prev);
    }
    let mut cur = *q_cur.quaternion();
    if q_prev.quaternion().coords.dot(&cur.coords) < 0.0 {
        cur = -cur;
    }
    let blended = cur * w_r + *q_prev.quaternion() * (1.0 - w_r);
    if blended.norm() < 1e-9 {
        return Err(StabilizeError::DegenerateBlend);
    }
    Ok(UnitQuat::from_quaternion(blended))
}

/// Componentwise translation blend `w_T·t_cur + (1−w_T)·t_pred`, with the
/// endpoints returned exactly.
pub fn blend_translation(t_cur: &Vec3, t_pred: &Vec3, w_t: f64) -> Vec3 {
    if w_t == 1.0 {
        return *t_cur;
    }
    if w_t == 0.0 {
        return *t_pred;
    }
    t_cur * w_t + t_pred * (1.0 - w_t)
}

/// Per-stream pose filter state. One stream per tracked foot; streams are
/// independent and strictly sequential within themselves.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Stabilizer {
    config: StabilizerConfig,
    prev_pose: Option<Pose>,
}

impl Stabilizer {
    pub fn new(config: StabilizerConfig) -> Self {
        Self {
            config,
            prev_pose: None,
        }
    }

    pub fn config(&self) -> &StabilizerConfig {
        &self.config
    }

    /// The pose the next step will treat as the previous frame, if any.
    pub fn prev_pose(&self) -> Option<&Pose> {
        self.prev_pose.as_ref()
    }

    pub fn is_initialized(&self) -> bool {
        self.prev_pose.is_some()
    }

    pub fn reset(&mut self) {
        self.prev_pose = None;
    }

    /// Advances the filter by one frame.
    ///
    /// The first frame and frames without matched pairs pass the measured
    /// pose through. On error the state is left unchanged.
    pub fn step(
        &mut self,
        measured: &Pose,
        pairs: &MatchedPairs,
        cloud: &PointCloud,
        k: &Intrinsics,
    ) -> Result<Pose, StabilizeError> {
        let Some(prev) = self.prev_pose else {
            self.commit(measured, measured);
            return Ok(*measured);
        };

        if pairs.is_empty() {
            // No flow information: defer fully to the measurement.
            self.commit(measured, measured);
            return Ok(*measured);
        }

        let v_pix = mean_displacement(pairs)?;
        let base = match self.config.translation_prediction {
            TranslationPrediction::PropagatePrev => prev.translation,
            TranslationPrediction::MeasuredBase => measured.translation,
        };
        let v_cam = lift_displacement(&v_pix, base.z, k)?;
        let t_pred = predict_translation(&base, &v_cam);

        let d = divergence(
            cloud,
            &prev.rotation,
            &t_pred,
            &measured.rotation,
            &measured.translation,
            k,
        )?;
        let w_r = rotation_weight(d, &self.config);
        let w_t = translation_weight(w_r);

        let rotation = blend_rotation(&prev.rotation, &measured.rotation, w_r)?;
        let translation = blend_translation(&measured.translation, &t_pred, w_t);
        let refined = Pose::new(rotation, translation);

        self.commit(measured, &refined);
        Ok(refined)
    }

    fn commit(&mut self, measured: &Pose, refined: &Pose) {
        self.prev_pose = Some(match self.config.prev_pose_source {
            PrevPoseSource::Refined => *refined,
            PrevPoseSource::Raw => *measured,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{rotation_from_euler_xyz, Pt2, Pt3};
    use approx::assert_relative_eq;

    fn camera() -> Intrinsics {
        Intrinsics::new(300.0, 300.0, 128.0, 128.0).unwrap()
    }

    fn pairs_from(displacements: &[(f64, f64)]) -> MatchedPairs {
        let mut pairs = MatchedPairs::empty();
        for (i, &(dx, dy)) in displacements.iter().enumerate() {
            let p = Pt2::new(10.0 + i as f64, 20.0);
            pairs.push(p, Pt2::new(p.x + dx, p.y + dy));
        }
        pairs
    }

    fn flat_cloud() -> PointCloud {
        // Points spread around the model origin at z = 0.
        let mut points = Vec::new();
        for i in 0..5 {
            for j in 0..4 {
                points.push(Pt3::new(i as f64 * 0.05 - 0.1, j as f64 * 0.04 - 0.06, 0.0));
            }
        }
        PointCloud::new(points)
    }

    #[test]
    fn mean_displacement_examples() {
        let pairs = pairs_from(&[(1.0, 2.0); 5]);
        assert_eq!(mean_displacement(&pairs).unwrap(), Vec2::new(1.0, 2.0));

        let pairs = pairs_from(&[(1.0, 0.0), (3.0, 0.0)]);
        assert_eq!(mean_displacement(&pairs).unwrap(), Vec2::new(2.0, 0.0));

        assert_eq!(
            mean_displacement(&MatchedPairs::empty()),
            Err(StabilizeError::NoMatches)
        );
    }

    #[test]
    fn mean_displacement_matches_brute_force_sum() {
        let mut state = 0xabcdef12345u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 20.0 - 10.0
        };
        let mut pairs = MatchedPairs::empty();
        let mut sx = 0.0f64;
        let mut sy = 0.0f64;
        let n = 1000;
        for _ in 0..n {
            let p = Pt2::new(next(), next());
            let d = (next(), next());
            sx += d.0;
            sy += d.1;
            pairs.push(p, Pt2::new(p.x + d.0, p.y + d.1));
        }
        let mean = mean_displacement(&pairs).unwrap();
        assert_relative_eq!(mean.x, sx / n as f64, epsilon = 1e-12);
        assert_relative_eq!(mean.y, sy / n as f64, epsilon = 1e-12);
    }

    #[test]
    fn lift_displacement_examples() {
        let k = camera();
        let v = lift_displacement(&Vec2::new(k.fx, k.fy), 1.0, &k).unwrap();
        assert_eq!(v, Vec3::new(1.0, 1.0, 0.0));

        let v = lift_displacement(&Vec2::zeros(), 0.7, &k).unwrap();
        assert_eq!(v, Vec3::zeros());

        let k500 = Intrinsics::new(500.0, 500.0, 0.0, 0.0).unwrap();
        let v = lift_displacement(&Vec2::new(100.0, 0.0), 2.0, &k500).unwrap();
        assert_relative_eq!(v.x, 0.4, epsilon = 1e-15);
        assert_eq!(v.y, 0.0);
        assert_eq!(v.z, 0.0);

        assert_eq!(
            lift_displacement(&Vec2::zeros(), 0.0, &k),
            Err(StabilizeError::InvalidDepth { t_z: 0.0 })
        );
    }

    #[test]
    fn predict_translation_preserves_depth() {
        let base = Vec3::new(0.0, 0.0, 1.0);
        assert_eq!(predict_translation(&base, &Vec3::zeros()), base);
        assert_eq!(
            predict_translation(&base, &Vec3::new(0.1, -0.2, 0.0)),
            Vec3::new(0.1, -0.2, 1.0)
        );
        // Depth component of the displacement is ignored by construction.
        assert_eq!(
            predict_translation(&base, &Vec3::new(0.0, 0.0, 5.0)).z,
            base.z
        );
    }

    #[test]
    fn divergence_zero_for_identical_poses() {
        let k = camera();
        let cloud = flat_cloud();
        let q = rotation_from_euler_xyz(0.2, -0.1, 0.4);
        let t = Vec3::new(0.02, -0.03, 0.8);
        let d = divergence(&cloud, &q, &t, &q, &t, &k).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn divergence_closed_form_for_pure_x_shift() {
        // Same rotation, translation differing by Δ along x, all points at
        // one depth: every point moves fx·Δ/z horizontally.
        let k = camera();
        let cloud = flat_cloud();
        let q = UnitQuat::identity();
        let z = 1.25;
        let delta = 0.04;
        let t1 = Vec3::new(0.0, 0.0, z);
        let t2 = Vec3::new(delta, 0.0, z);
        let d = divergence(&cloud, &q, &t1, &q, &t2, &k).unwrap();
        assert_relative_eq!(d, k.fx * delta / z, epsilon = 1e-9);
    }

    #[test]
    fn divergence_matches_brute_force_oracle() {
        let k = camera();
        let cloud = flat_cloud();
        let qa = rotation_from_euler_xyz(0.1, 0.2, -0.3);
        let qb = rotation_from_euler_xyz(0.15, 0.18, -0.28);
        let ta = Vec3::new(0.01, 0.02, 0.9);
        let tb = Vec3::new(-0.01, 0.03, 1.05);
        let d = divergence(&cloud, &qa, &ta, &qb, &tb, &k).unwrap();

        // Independent recomputation, point by point.
        let pa = Pose::new(qa, ta);
        let pb = Pose::new(qb, tb);
        let mut total = 0.0;
        for p in &cloud.points {
            let a = project_point(&pa.transform_point(p), &k).unwrap();
            let b = project_point(&pb.transform_point(p), &k).unwrap();
            total += (a.x - b.x).abs() + (a.y - b.y).abs();
        }
        assert_relative_eq!(d, total / cloud.len() as f64, epsilon = 1e-9);
    }

    #[test]
    fn divergence_names_offending_side() {
        let k = camera();
        let cloud = flat_cloud();
        let q = UnitQuat::identity();
        let good = Vec3::new(0.0, 0.0, 1.0);
        let behind = Vec3::new(0.0, 0.0, -1.0);
        assert_eq!(
            divergence(&cloud, &q, &behind, &q, &good, &k),
            Err(StabilizeError::BehindCamera {
                side: DivergenceSide::Predicted
            })
        );
        assert_eq!(
            divergence(&cloud, &q, &good, &q, &behind, &k),
            Err(StabilizeError::BehindCamera {
                side: DivergenceSide::Measured
            })
        );
        assert_eq!(
            divergence(&PointCloud::new(vec![]), &q, &good, &q, &good, &k),
            Err(StabilizeError::EmptyCloud)
        );
    }

    #[test]
    fn rotation_weight_boundaries() {
        let cfg = StabilizerConfig::default();
        // ln(1) = 0 leaves the raw value at β, clamped to 1.
        assert_eq!(rotation_weight(1.0, &cfg), 1.0);
        let raw_cfg = StabilizerConfig {
            weight_clamp: false,
            ..cfg
        };
        assert_relative_eq!(rotation_weight(1.0, &raw_cfg), 2.388, epsilon = 1e-12);

        // Exact clamp boundaries.
        let d_one = ((1.0 - cfg.beta) / cfg.alpha).exp();
        assert_relative_eq!(rotation_weight(d_one, &raw_cfg), 1.0, epsilon = 1e-9);
        assert_eq!(rotation_weight(d_one, &cfg), rotation_weight(d_one, &cfg).clamp(0.0, 1.0));

        let d_zero = (-cfg.beta / cfg.alpha).exp();
        assert!(rotation_weight(d_zero, &cfg).abs() <= 1e-9);

        // Below the floor the weight pins to the floor value (zero here).
        assert_eq!(rotation_weight(0.0, &cfg), 0.0);
        assert_eq!(rotation_weight(1e-9, &cfg), 0.0);
    }

    #[test]
    fn rotation_weight_monotone_in_divergence() {
        let cfg = StabilizerConfig::default();
        let mut prev = -1.0;
        for i in 0..1000 {
            let d = 1e-4 * 1.02f64.powi(i);
            let w = rotation_weight(d, &cfg);
            assert!(w >= prev - 1e-15, "w_R not monotone at D={d}");
            assert!((0.0..=1.0).contains(&w));
            prev = w;
        }
    }

    #[test]
    fn translation_weight_is_square() {
        assert_eq!(translation_weight(1.0), 1.0);
        assert_eq!(translation_weight(0.5), 0.25);
        assert_eq!(translation_weight(0.0), 0.0);
    }

    #[test]
    fn blend_rotation_endpoints_are_exact() {
        let a = rotation_from_euler_xyz(0.3, 0.2, 0.1);
        let b = rotation_from_euler_xyz(-0.4, 0.25, 0.9);
        assert_eq!(blend_rotation(&a, &b, 1.0).unwrap(), b);
        assert_eq!(blend_rotation(&a, &b, 0.0).unwrap(), a);
    }

    #[test]
    fn blend_rotation_half_matches_slerp_for_small_angles() {
        // Slerp oracle.
        fn slerp(a: &UnitQuat, b: &UnitQuat, t: f64) -> UnitQuat {
            let mut dot = a.quaternion().coords.dot(&b.quaternion().coords);
            let mut bq = *b.quaternion();
            if dot < 0.0 {
                bq = -bq;
                dot = -dot;
            }
            let theta = dot.clamp(-1.0, 1.0).acos();
            if theta < 1e-12 {
                return *a;
            }
            let sa = ((1.0 - t) * theta).sin() / theta.sin();
            let sb = (t * theta).sin() / theta.sin();
            UnitQuat::from_quaternion(*a.quaternion() * sa + bq * sb)
        }

        let prev = UnitQuat::identity();
        let cur = rotation_from_euler_xyz(0.0, 0.0, 10f64.to_radians());
        let blended = blend_rotation(&prev, &cur, 0.5).unwrap();
        let oracle = slerp(&prev, &cur, 0.5);
        let angle = blended.angle_to(&oracle).to_degrees();
        assert!(angle < 0.01, "nlerp vs slerp differ by {angle}°");
        // The blend itself is 5° about z.
        assert_relative_eq!(
            blended.angle_to(&prev).to_degrees(),
            5.0,
            epsilon = 0.01
        );
    }

    #[test]
    fn blend_rotation_aligns_hemispheres() {
        let prev = rotation_from_euler_xyz(0.1, 0.0, 0.0);
        let cur = rotation_from_euler_xyz(0.12, 0.0, 0.0);
        // Same rotation, opposite quaternion sign.
        let cur_neg = UnitQuat::from_quaternion(-*cur.quaternion());
        let a = blend_rotation(&prev, &cur, 0.5).unwrap();
        let b = blend_rotation(&prev, &cur_neg, 0.5).unwrap();
        assert!(a.angle_to(&b) < 1e-12);
    }

    #[test]
    fn blend_rotation_perpendicular_quaternions_do_not_degenerate() {
        // A 180° apart pair has orthogonal quaternions; after alignment the
        // half blend has norm √2/2, well away from degeneracy.
        let prev = UnitQuat::identity();
        let cur = rotation_from_euler_xyz(core::f64::consts::PI, 0.0, 0.0);
        let blended = blend_rotation(&prev, &cur, 0.5).unwrap();
        assert!((blended.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn blend_translation_examples() {
        let cur = Vec3::new(1.0, 0.0, 1.0);
        let pred = Vec3::new(0.0, 0.0, 1.0);
        assert_eq!(blend_translation(&cur, &pred, 1.0), cur);
        assert_eq!(blend_translation(&cur, &pred, 0.0), pred);
        assert_eq!(
            blend_translation(&cur, &pred, 0.25),
            Vec3::new(0.25, 0.0, 1.0)
        );
    }

    fn static_scene() -> (Pose, PointCloud, Intrinsics) {
        (
            Pose::new(
                rotation_from_euler_xyz(0.1, -0.2, 0.05),
                Vec3::new(0.01, 0.02, 0.8),
            ),
            flat_cloud(),
            camera(),
        )
    }

    #[test]
    fn first_frame_passes_through_and_initializes() {
        let (pose, cloud, k) = static_scene();
        let mut filter = Stabilizer::new(StabilizerConfig::default());
        assert!(!filter.is_initialized());
        let refined = filter.step(&pose, &MatchedPairs::empty(), &cloud, &k).unwrap();
        assert_eq!(refined, pose);
        assert!(filter.is_initialized());
    }

    #[test]
    fn static_zero_noise_stream_is_identity() {
        let (pose, cloud, k) = static_scene();
        let mut filter = Stabilizer::new(StabilizerConfig::default());
        let pairs = pairs_from(&[(0.0, 0.0); 8]);
        for _ in 0..10 {
            let refined = filter.step(&pose, &pairs, &cloud, &k).unwrap();
            // D = 0 holds the previous pose, which equals the measurement.
            assert_eq!(refined, pose);
        }
    }

    #[test]
    fn no_matches_falls_back_to_measured() {
        let (pose, cloud, k) = static_scene();
        let mut filter = Stabilizer::new(StabilizerConfig::default());
        filter.step(&pose, &pairs_from(&[(0.0, 0.0)]), &cloud, &k).unwrap();
        let moved = Pose::new(pose.rotation, pose.translation + Vec3::new(0.05, 0.0, 0.0));
        let refined = filter.step(&moved, &MatchedPairs::empty(), &cloud, &k).unwrap();
        assert_eq!(refined, moved);
        assert_eq!(filter.prev_pose(), Some(&moved));
    }

    #[test]
    fn large_divergence_passes_measurement_through_bitwise() {
        let (start, cloud, k) = static_scene();
        let mut filter = Stabilizer::new(StabilizerConfig::default());
        let pairs = pairs_from(&[(0.0, 0.0); 10]);
        filter.step(&start, &pairs, &cloud, &k).unwrap();

        // 5 cm jumps at 0.8 m with f = 300 give D well above 1 px.
        for i in 1..6 {
            let pose = Pose::new(
                start.rotation,
                start.translation + Vec3::new(0.05 * i as f64, 0.0, 0.0),
            );
            let refined = filter.step(&pose, &pairs, &cloud, &k).unwrap();
            assert_eq!(refined.rotation, pose.rotation, "rotation must pass through");
            assert_eq!(refined.translation, pose.translation);
        }
    }

    #[test]
    fn hold_property_below_lower_threshold() {
        // Construct a measurement whose divergence from the prediction is
        // under exp(−β/α): the refined rotation must equal the previous
        // rotation and the refined translation the flow prediction.
        let (start, cloud, k) = static_scene();
        let cfg = StabilizerConfig::default();
        let mut filter = Stabilizer::new(cfg);
        let pairs = pairs_from(&[(0.0, 0.0); 10]);
        filter.step(&start, &pairs, &cloud, &k).unwrap();

        // Tiny translation offset: D = fx·Δ/z ≈ 300·2e-6/0.8 = 7.5e-4 px,
        // below exp(−β/α) ≈ 3.97e-3 px.
        let measured = Pose::new(
            start.rotation,
            start.translation + Vec3::new(2e-6, 0.0, 0.0),
        );
        let refined = filter.step(&measured, &pairs, &cloud, &k).unwrap();
        assert_eq!(refined.rotation, start.rotation);
        // Flow prediction: prev translation + 0 displacement.
        assert_eq!(refined.translation, start.translation);
    }

    #[test]
    fn refined_quaternion_always_unit() {
        let (start, cloud, k) = static_scene();
        let mut filter = Stabilizer::new(StabilizerConfig::default());
        let mut state = 77u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let mut pairs = MatchedPairs::empty();
        for i in 0..6 {
            pairs.push(
                Pt2::new(40.0 + i as f64, 50.0),
                Pt2::new(40.0 + i as f64 + next(), 50.0 + next()),
            );
        }
        for _ in 0..50 {
            let measured = Pose::new(
                rotation_from_euler_xyz(0.1 + next() * 0.02, -0.2 + next() * 0.02, 0.05),
                start.translation + Vec3::new(next() * 0.003, next() * 0.003, next() * 0.003),
            );
            let refined = filter.step(&measured, &pairs, &cloud, &k).unwrap();
            assert!((refined.rotation.norm() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn measured_base_mode_uses_current_translation() {
        let (start, cloud, k) = static_scene();
        let cfg = StabilizerConfig {
            translation_prediction: TranslationPrediction::MeasuredBase,
            ..StabilizerConfig::default()
        };
        let mut filter = Stabilizer::new(cfg);
        let pairs = pairs_from(&[(3.0, 0.0); 4]);
        filter.step(&start, &pairs, &cloud, &k).unwrap();

        // With the measured base, the prediction starts from the current
        // measurement, so a tiny measured offset plus flow yields a
        // prediction offset from the measurement by exactly v_cam.
        let measured = Pose::new(start.rotation, start.translation);
        let refined = filter.step(&measured, &pairs, &cloud, &k).unwrap();
        let v_cam = lift_displacement(&Vec2::new(3.0, 0.0), start.translation.z, &k).unwrap();
        // D = fx·v_x/z ≈ 3 px → full weight → measurement wins.
        assert_eq!(refined.translation, measured.translation);
        assert!(v_cam.x > 0.0);
    }

    #[test]
    fn raw_prev_source_feeds_measurement_back() {
        let (start, cloud, k) = static_scene();
        let cfg = StabilizerConfig {
            prev_pose_source: PrevPoseSource::Raw,
            ..StabilizerConfig::default()
        };
        let mut filter = Stabilizer::new(cfg);
        let pairs = pairs_from(&[(0.0, 0.0); 4]);
        filter.step(&start, &pairs, &cloud, &k).unwrap();
        let moved = Pose::new(start.rotation, start.translation + Vec3::new(0.05, 0.0, 0.0));
        filter.step(&moved, &pairs, &cloud, &k).unwrap();
        assert_eq!(filter.prev_pose(), Some(&moved));
    }
}
