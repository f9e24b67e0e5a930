//! 6-DoF pose recovery from 2D–3D correspondences.
//!
//! [`solve_pnp`] initializes with a direct linear transform on normalized
//! image coordinates and refines with Levenberg–Marquardt over the
//! `(w, x, y, z)` quaternion and translation, minimizing squared pixel
//! reprojection error. [`FootModel`] carries the canonical 3D keypoints and
//! dense point cloud the rest of the pipeline projects.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{ComplexField, Matrix2x3, Matrix3, SMatrix, SVector, Vector3};

use crate::geom::{
    euler_xyz_from_rotation, project_point, GeomError, Intrinsics, PointCloud, Pose, Pt2, Pt3,
    Quat, UnitQuat, Vec3,
};
use crate::targets::NUM_KEYPOINTS;

/// Levenberg–Marquardt iteration cap.
const LM_MAX_ITERATIONS: usize = 50;
/// Convergence threshold on the max-norm of the cost gradient.
const LM_GRADIENT_TOL: f64 = 1e-10;
/// Initial damping factor; accepted steps divide it by 10, rejected steps
/// multiply by 10.
const LM_DAMPING_INIT: f64 = 1e-3;
/// Consecutive rejected steps before the solver gives up.
const LM_MAX_REJECTIONS: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub enum PnpError {
    /// Fewer than 6 correspondences.
    InsufficientData { got: usize },
    /// The refinement stopped without reducing the residual; carries the
    /// best pose found so far.
    NonConvergence { best: PnpSolution },
    /// Model keypoints are too close to a common plane.
    CoplanarKeypoints,
    /// The model point cloud must be nonempty.
    EmptyCloud,
    Geom(GeomError),
}

impl fmt::Display for PnpError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PnpError::InsufficientData { got } => {
                write!(f, "need at least 6 correspondences, got {got}")
            }
            PnpError::NonConvergence { best } => write!(
                f,
                "refinement did not converge; best residual {:.6} px",
                best.residual_px
            ),
            PnpError::CoplanarKeypoints => write!(f, "model keypoints are coplanar"),
            PnpError::EmptyCloud => write!(f, "model point cloud is empty"),
            PnpError::Geom(e) => write!(f, "{e}"),
        }
    }
}

#[cfg(any(feature = "std", test))]
impl std::error::Error for PnpError {}

impl From<GeomError> for PnpError {
    fn from(e: GeomError) -> Self {
        PnpError::Geom(e)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ModelParseError {
    MissingHeader,
    UnsupportedVersion(String),
    BadCounts { line: usize },
    BadPoint { line: usize },
    WrongPointCount { expected: usize, got: usize },
    Invalid(PnpError),
}

impl fmt::Display for ModelParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelParseError::MissingHeader => write!(f, "missing 'footmodel v1' header"),
            ModelParseError::UnsupportedVersion(v) => write!(f, "unsupported model version {v}"),
            ModelParseError::BadCounts { line } => write!(f, "bad count line at line {line}"),
            ModelParseError::BadPoint { line } => write!(f, "bad point at line {line}"),
            ModelParseError::WrongPointCount { expected, got } => {
                write!(f, "expected {expected} points, found {got}")
            }
            ModelParseError::Invalid(e) => write!(f, "invalid model: {e}"),
        }
    }
}

#[cfg(any(feature = "std", test))]
impl std::error::Error for ModelParseError {}

/// Canonical 3D foot: 8 keypoints matching the keypoint channels, plus a
/// dense surface cloud used by the stabilizer's divergence computation.
///
/// Model frame: `+x` heel→toe, `+y` to the left, `+z` up, meters, sole on
/// the `z = 0` plane.
#[derive(Clone, Debug, PartialEq)]
pub struct FootModel {
    keypoints3d: [Pt3; NUM_KEYPOINTS],
    cloud: PointCloud,
    scale_length: f64,
}

impl FootModel {
    /// Validates that the keypoints span 3D (not coplanar) and the cloud is
    /// nonempty. The heel-to-toe scale length is derived from keypoints 0,
    /// 2 (heel pair) and 1 (toe).
    pub fn new(keypoints3d: [Pt3; NUM_KEYPOINTS], cloud: PointCloud) -> Result<Self, PnpError> {
        if cloud.is_empty() {
            return Err(PnpError::EmptyCloud);
        }
        let centroid = keypoints3d
            .iter()
            .fold(Vec3::zeros(), |acc, p| acc + p.coords)
            / NUM_KEYPOINTS as f64;
        let mut m = SMatrix::<f64, NUM_KEYPOINTS, 3>::zeros();
        for (i, p) in keypoints3d.iter().enumerate() {
            m.set_row(i, &(p.coords - centroid).transpose());
        }
        let svd = m.svd(false, false);
        let s_max = svd.singular_values[0];
        let s_min = svd.singular_values[2];
        if s_min < 1e-6 * s_max {
            return Err(PnpError::CoplanarKeypoints);
        }

        let heel_mid = Pt3::from((keypoints3d[0].coords + keypoints3d[2].coords) / 2.0);
        let scale_length = (keypoints3d[1] - heel_mid).norm();
        Ok(Self {
            keypoints3d,
            cloud,
            scale_length,
        })
    }

    /// The built-in 26 cm foot: hand-placed keypoints and a surface cloud
    /// of elliptical cross sections lofted along a length profile. Also
    /// shipped as `data/footmodel_v1.txt` in this crate.
    pub fn standard() -> Self {
        let keypoints3d = [
            Pt3::new(0.000, 0.030, 0.040),  // 0: heel, left side
            Pt3::new(0.260, 0.000, 0.020),  // 1: toe
            Pt3::new(0.000, -0.030, 0.040), // 2: heel, right side
            Pt3::new(0.190, 0.048, 0.018),  // 3: front side, left
            Pt3::new(0.190, -0.048, 0.018), // 4: front side, right
            Pt3::new(0.080, 0.042, 0.030),  // 5: rear side, left
            Pt3::new(0.080, -0.042, 0.030), // 6: rear side, right
            Pt3::new(0.130, 0.000, 0.075),  // 7: instep center
        ];

        // Length stations with half-width and height, linearly interpolated.
        const PROFILE: [(f64, f64, f64); 7] = [
            (0.00, 0.026, 0.055),
            (0.15, 0.040, 0.070),
            (0.35, 0.044, 0.080),
            (0.55, 0.046, 0.070),
            (0.75, 0.042, 0.040),
            (0.90, 0.030, 0.028),
            (1.00, 0.010, 0.022),
        ];
        let length = 0.26;
        let profile_at = |s: f64| -> (f64, f64) {
            let mut prev = PROFILE[0];
            for &cur in &PROFILE[1..] {
                if s <= cur.0 {
                    let t = (s - prev.0) / (cur.0 - prev.0);
                    return (prev.1 + t * (cur.1 - prev.1), prev.2 + t * (cur.2 - prev.2));
                }
                prev = cur;
            }
            (PROFILE[6].1, PROFILE[6].2)
        };

        let stations = 20usize;
        let ring = 10usize;
        let mut points = Vec::with_capacity(stations * ring);
        for i in 0..stations {
            let s = i as f64 / (stations - 1) as f64;
            let (w, h) = profile_at(s);
            for j in 0..ring {
                let theta = core::f64::consts::TAU * j as f64 / ring as f64;
                points.push(Pt3::new(
                    s * length,
                    w * ComplexField::cos(theta),
                    h / 2.0 + (h / 2.0) * ComplexField::sin(theta),
                ));
            }
        }

        Self::new(keypoints3d, PointCloud::new(points)).expect("standard model is valid")
    }

    pub fn keypoints3d(&self) -> &[Pt3; NUM_KEYPOINTS] {
        &self.keypoints3d
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.cloud
    }

    /// Heel-to-toe length in meters.
    pub fn scale_length(&self) -> f64 {
        self.scale_length
    }

    /// Parses the `footmodel v1` text format: a header line, a count line
    /// `"<keypoints> <cloud points>"`, then one `x y z` point per line,
    /// keypoints first, meters. Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, ModelParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (_, header) = lines.next().ok_or(ModelParseError::MissingHeader)?;
        if header != "footmodel v1" {
            if header.starts_with("footmodel") {
                return Err(ModelParseError::UnsupportedVersion(String::from(header)));
            }
            return Err(ModelParseError::MissingHeader);
        }

        let (count_line_no, counts) =
            lines.next().ok_or(ModelParseError::BadCounts { line: 2 })?;
        let mut it = counts.split_whitespace();
        let nk: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(ModelParseError::BadCounts {
                line: count_line_no,
            })?;
        let nc: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or(ModelParseError::BadCounts {
                line: count_line_no,
            })?;
        if nk != NUM_KEYPOINTS || it.next().is_some() {
            return Err(ModelParseError::BadCounts {
                line: count_line_no,
            });
        }

        let mut points = Vec::with_capacity(nk + nc);
        for (line_no, line) in lines {
            let mut xyz = line.split_whitespace().map(|s| s.parse::<f64>());
            let (x, y, z) = match (xyz.next(), xyz.next(), xyz.next(), xyz.next()) {
                (Some(Ok(x)), Some(Ok(y)), Some(Ok(z)), None) => (x, y, z),
                _ => return Err(ModelParseError::BadPoint { line: line_no }),
            };
            points.push(Pt3::new(x, y, z));
        }
        if points.len() != nk + nc {
            return Err(ModelParseError::WrongPointCount {
                expected: nk + nc,
                got: points.len(),
            });
        }

        let mut keypoints3d = [Pt3::origin(); NUM_KEYPOINTS];
        keypoints3d.copy_from_slice(&points[..NUM_KEYPOINTS]);
        let cloud = PointCloud::new(points[NUM_KEYPOINTS..].to_vec());
        Self::new(keypoints3d, cloud).map_err(ModelParseError::Invalid)
    }

    /// Serializes to the `footmodel v1` text format.
    pub fn to_file_string(&self) -> String {
        let mut out = String::from("footmodel v1\n");
        out.push_str(&format!("{} {}\n", NUM_KEYPOINTS, self.cloud.points.len()));
        for p in self.keypoints3d.iter().chain(self.cloud.points.iter()) {
            out.push_str(&format!("{:.6} {:.6} {:.6}\n", p.x, p.y, p.z));
        }
        out
    }
}

/// A recovered pose with its reprojection quality.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PnpSolution {
    pub pose: Pose,
    /// Mean Euclidean reprojection error over the correspondences, pixels.
    pub residual_px: f64,
    /// Levenberg–Marquardt iterations spent.
    pub iterations: usize,
}

/// Recovers the pose minimizing mean squared reprojection error.
///
/// Requires at least 6 correspondences of `(pixel, model point)`.
/// Initializes with a DLT on normalized coordinates, then runs
/// Levenberg–Marquardt on the quaternion and translation. The returned
/// residual is the mean per-point pixel error recomputed at the solution.
pub fn solve_pnp(correspondences: &[(Pt2, Pt3)], k: &Intrinsics) -> Result<PnpSolution, PnpError> {
    let n = correspondences.len();
    if n < 6 {
        return Err(PnpError::InsufficientData { got: n });
    }

    let init = dlt_init(correspondences, k);
    let (pose, iterations, converged) = lm_refine(&init, correspondences, k);
    let residual_px = mean_reprojection_error(&pose, correspondences, k);

    let init_residual = mean_reprojection_error(&init, correspondences, k);
    let depths_ok = correspondences
        .iter()
        .all(|(_, x)| pose.transform_point(x).z > 0.0);
    let best = PnpSolution {
        pose,
        residual_px,
        iterations,
    };
    if (!converged && residual_px > init_residual) || !depths_ok {
        return Err(PnpError::NonConvergence { best });
    }
    Ok(best)
}

/// Mean per-point Euclidean reprojection error in pixels. Points behind
/// the camera count as infinite error.
pub fn mean_reprojection_error(
    pose: &Pose,
    correspondences: &[(Pt2, Pt3)],
    k: &Intrinsics,
) -> f64 {
    let mut total = 0.0;
    for (px, x) in correspondences {
        let cam = pose.transform_point(x);
        match project_point(&cam, k) {
            Ok(projected) => total += (projected - px).norm(),
            Err(_) => return f64::INFINITY,
        }
    }
    total / correspondences.len() as f64
}

/// Direct linear transform estimate of `[R|t]` from normalized coordinates.
fn dlt_init(correspondences: &[(Pt2, Pt3)], k: &Intrinsics) -> Pose {
    let n = correspondences.len();

    // Condition the 3D side: centered, average norm √3.
    let centroid = correspondences
        .iter()
        .fold(Vec3::zeros(), |acc, (_, x)| acc + x.coords)
        / n as f64;
    let mean_norm = correspondences
        .iter()
        .map(|(_, x)| (x.coords - centroid).norm())
        .sum::<f64>()
        / n as f64;
    let scale = if mean_norm > 1e-12 {
        ComplexField::sqrt(3.0) / mean_norm
    } else {
        1.0
    };

    let mut ata = SMatrix::<f64, 12, 12>::zeros();
    for (px, x) in correspondences {
        let xn = (x.coords - centroid) * scale;
        let u = (px.x - k.cx) / k.fx;
        let v = (px.y - k.cy) / k.fy;
        let mut r1 = SVector::<f64, 12>::zeros();
        let mut r2 = SVector::<f64, 12>::zeros();
        for i in 0..3 {
            r1[i] = xn[i];
            r1[8 + i] = -u * xn[i];
            r2[4 + i] = xn[i];
            r2[8 + i] = -v * xn[i];
        }
        r1[3] = 1.0;
        r1[11] = -u;
        r2[7] = 1.0;
        r2[11] = -v;
        ata += r1 * r1.transpose();
        ata += r2 * r2.transpose();
    }

    let eig = ata.symmetric_eigen();
    let mut min_idx = 0;
    for i in 1..12 {
        if eig.eigenvalues[i] < eig.eigenvalues[min_idx] {
            min_idx = i;
        }
    }
    let p = eig.eigenvectors.column(min_idx);

    let mut m = SMatrix::<f64, 3, 4>::zeros();
    for r in 0..3 {
        for c in 0..4 {
            m[(r, c)] = p[r * 4 + c];
        }
    }

    // Choose the sign putting points in front of the camera.
    let mut depth_sign = 0.0;
    for (_, x) in correspondences {
        let xn = (x.coords - centroid) * scale;
        depth_sign += m[(2, 0)] * xn.x + m[(2, 1)] * xn.y + m[(2, 2)] * xn.z + m[(2, 3)];
    }
    if depth_sign < 0.0 {
        m = -m;
    }

    // Undo the 3D conditioning: M_orig = M · [scale·I, −scale·centroid; 0 1].
    let b_scaled: Matrix3<f64> = m.fixed_view::<3, 3>(0, 0).into_owned();
    let b = b_scaled * scale;
    let t_col = Vector3::new(m[(0, 3)], m[(1, 3)], m[(2, 3)]) - b_scaled * (centroid * scale);

    // Nearest rotation and common scale.
    let svd = b.svd(true, true);
    let u_m = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let det = (u_m * v_t).determinant();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if det < 0.0 { -1.0 } else { 1.0 }));
    let rot = u_m * fix * v_t;
    let lambda = svd.singular_values.sum() / 3.0;
    let translation = t_col / lambda;

    Pose::new(
        UnitQuat::from_rotation_matrix(&nalgebra::Rotation3::from_matrix_unchecked(rot)),
        translation,
    )
}

/// Packs the pose as `(qw, qx, qy, qz, tx, ty, tz)`.
fn pack(pose: &Pose) -> SVector<f64, 7> {
    let q = pose.rotation.quaternion();
    SVector::<f64, 7>::from_column_slice(&[
        q.w,
        q.i,
        q.j,
        q.k,
        pose.translation.x,
        pose.translation.y,
        pose.translation.z,
    ])
}

fn unpack(theta: &SVector<f64, 7>) -> Option<Pose> {
    let q = Quat::new(theta[0], theta[1], theta[2], theta[3]);
    if q.norm() < 1e-12 {
        return None;
    }
    Some(Pose::new(
        UnitQuat::from_quaternion(q),
        Vec3::new(theta[4], theta[5], theta[6]),
    ))
}

/// Sum of squared pixel residuals; infinite when a point leaves the
/// positive-depth region.
fn cost(pose: &Pose, correspondences: &[(Pt2, Pt3)], k: &Intrinsics) -> f64 {
    let mut total = 0.0;
    for (px, x) in correspondences {
        let cam = pose.transform_point(x);
        if cam.z <= 1e-9 {
            return f64::INFINITY;
        }
        let u = k.fx * cam.x / cam.z + k.cx;
        let v = k.fy * cam.y / cam.z + k.cy;
        total += (u - px.x) * (u - px.x) + (v - px.y) * (v - px.y);
    }
    total
}

/// Jacobian of the rotated point w.r.t. the quaternion at unit norm, for
/// the normalized rotation map `y(q) = R(q/|q|)·x`.
fn rotation_jacobian_q(q: &UnitQuat, x: &Pt3) -> SMatrix<f64, 3, 4> {
    let w = q.w;
    let v = Vec3::new(q.i, q.j, q.k);
    let xv = x.coords;

    let y = (w * w - v.dot(&v)) * xv + 2.0 * v.dot(&xv) * v + 2.0 * w * v.cross(&xv);

    let d_w = 2.0 * w * xv + 2.0 * v.cross(&xv);
    let cross_x = Matrix3::new(
        0.0, -xv.z, xv.y, //
        xv.z, 0.0, -xv.x, //
        -xv.y, xv.x, 0.0,
    );
    let d_v: Matrix3<f64> = -2.0 * xv * v.transpose()
        + 2.0 * v * xv.transpose()
        + 2.0 * v.dot(&xv) * Matrix3::identity()
        - 2.0 * w * cross_x;

    // Quotient rule through |q|² at |q| = 1: subtract y · 2qᵀ.
    let mut j = SMatrix::<f64, 3, 4>::zeros();
    j.set_column(0, &(d_w - 2.0 * w * y));
    for c in 0..3 {
        j.set_column(c + 1, &(d_v.column(c) - 2.0 * v[c] * y));
    }
    j
}

fn lm_refine(init: &Pose, correspondences: &[(Pt2, Pt3)], k: &Intrinsics) -> (Pose, usize, bool) {
    let mut theta = pack(init);
    let mut pose = *init;
    let mut current_cost = cost(&pose, correspondences, k);
    let mut lambda = LM_DAMPING_INIT;
    let mut rejections = 0usize;
    let mut converged = false;
    let mut iterations = 0usize;

    for iter in 0..LM_MAX_ITERATIONS {
        iterations = iter + 1;

        let mut h = SMatrix::<f64, 7, 7>::zeros();
        let mut g = SVector::<f64, 7>::zeros();
        for (px, x) in correspondences {
            let cam = pose.transform_point(x);
            if cam.z <= 1e-9 {
                break;
            }
            let inv_z = 1.0 / cam.z;
            let proj = Matrix2x3::new(
                k.fx * inv_z,
                0.0,
                -k.fx * cam.x * inv_z * inv_z,
                0.0,
                k.fy * inv_z,
                -k.fy * cam.y * inv_z * inv_z,
            );
            let jq = proj * rotation_jacobian_q(&pose.rotation, x);
            let mut j = SMatrix::<f64, 2, 7>::zeros();
            j.fixed_view_mut::<2, 4>(0, 0).copy_from(&jq);
            j.fixed_view_mut::<2, 3>(0, 4).copy_from(&proj);

            let u = k.fx * cam.x * inv_z + k.cx;
            let v = k.fy * cam.y * inv_z + k.cy;
            let r = nalgebra::Vector2::new(u - px.x, v - px.y);

            h += j.transpose() * j;
            g += j.transpose() * r;
        }

        if g.amax() < LM_GRADIENT_TOL {
            converged = true;
            break;
        }

        let mut damped = h;
        for i in 0..7 {
            // Marquardt scaling with a floor for the gauge direction.
            damped[(i, i)] += lambda * h[(i, i)].max(1e-12);
        }
        let Some(chol) = damped.cholesky() else {
            lambda *= 10.0;
            rejections += 1;
            if rejections > LM_MAX_REJECTIONS {
                break;
            }
            continue;
        };
        let delta = chol.solve(&(-g));

        let candidate_theta = theta + delta;
        let Some(candidate) = unpack(&candidate_theta) else {
            lambda *= 10.0;
            rejections += 1;
            if rejections > LM_MAX_REJECTIONS {
                break;
            }
            continue;
        };
        let candidate_cost = cost(&candidate, correspondences, k);
        if candidate_cost < current_cost {
            pose = candidate;
            theta = pack(&pose);
            current_cost = candidate_cost;
            lambda = (lambda / 10.0).max(1e-12);
            rejections = 0;
            if current_cost < 1e-24 {
                converged = true;
                break;
            }
        } else {
            lambda = (lambda * 10.0).min(1e12);
            rejections += 1;
            if rejections > LM_MAX_REJECTIONS {
                break;
            }
        }
    }

    (pose, iterations, converged)
}

/// Projects the model's 8 keypoints under a pose; fails if any keypoint
/// falls behind the camera.
pub fn project_model_keypoints(
    model: &FootModel,
    pose: &Pose,
    k: &Intrinsics,
) -> Result<[Pt2; NUM_KEYPOINTS], PnpError> {
    let mut out = [Pt2::origin(); NUM_KEYPOINTS];
    for (i, kp) in model.keypoints3d.iter().enumerate() {
        out[i] = project_point(&pose.transform_point(kp), k)?;
    }
    Ok(out)
}

/// Pose comparison metrics: rotation as the mean absolute intrinsic X-Y-Z
/// Euler angle of the relative rotation in degrees, translation as the
/// Euclidean distance in centimeters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoseError {
    pub mean_euler_deg: f64,
    pub translation_cm: f64,
}

pub fn pose_error(estimate: &Pose, truth: &Pose) -> PoseError {
    let relative = estimate.rotation.inverse() * truth.rotation;
    let (rx, ry, rz) = euler_xyz_from_rotation(&relative);
    let mean_euler_deg = (ComplexField::abs(rx) + ComplexField::abs(ry) + ComplexField::abs(rz))
        / 3.0
        * 180.0
        / core::f64::consts::PI;
    let translation_cm = (estimate.translation - truth.translation).norm() * 100.0;
    PoseError {
        mean_euler_deg,
        translation_cm,
    }
}

/// Rotation distance in radians, independent of any Euler convention.
pub fn rotation_angle_between(a: &UnitQuat, b: &UnitQuat) -> f64 {
    a.angle_to(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::rotation_from_euler_xyz;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn camera() -> Intrinsics {
        Intrinsics::new(300.0, 300.0, 128.0, 128.0).unwrap()
    }

    fn project_exact(model: &FootModel, pose: &Pose, k: &Intrinsics) -> Vec<(Pt2, Pt3)> {
        model
            .keypoints3d()
            .iter()
            .map(|x| (project_point(&pose.transform_point(x), k).unwrap(), *x))
            .collect()
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose {
        // Rotation within 60° of frontal, depth 0.5–2 m.
        let axis = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let angle = rng.gen_range(0.0..60f64.to_radians());
        let rotation = UnitQuat::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        let translation = Vec3::new(
            rng.gen_range(-0.1..0.1),
            rng.gen_range(-0.1..0.1),
            rng.gen_range(0.5..2.0),
        );
        Pose::new(rotation, translation)
    }

    #[test]
    fn recovers_identity_rotation_and_unit_depth() {
        let model = FootModel::standard();
        let k = camera();
        let truth = Pose::new(UnitQuat::identity(), Vec3::new(0.0, 0.0, 1.0));
        let corr = project_exact(&model, &truth, &k);
        let sol = solve_pnp(&corr, &k).unwrap();
        assert!(rotation_angle_between(&sol.pose.rotation, &truth.rotation) < 1e-4);
        assert!((sol.pose.translation - truth.translation).norm() < 1e-5);
        assert!(sol.residual_px < 1e-6);
    }

    #[test]
    fn hundred_random_poses_zero_noise() {
        let model = FootModel::standard();
        let k = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut max_rot_deg = 0.0f64;
        let mut max_rel_t = 0.0f64;
        for _ in 0..100 {
            let truth = random_pose(&mut rng);
            let corr = project_exact(&model, &truth, &k);
            let sol = solve_pnp(&corr, &k).unwrap();
            let rot_deg = rotation_angle_between(&sol.pose.rotation, &truth.rotation).to_degrees();
            let rel_t =
                (sol.pose.translation - truth.translation).norm() / truth.translation.norm();
            max_rot_deg = max_rot_deg.max(rot_deg);
            max_rel_t = max_rel_t.max(rel_t);
        }
        assert!(max_rot_deg < 0.1, "max rotation error {max_rot_deg}°");
        assert!(max_rel_t < 1e-3, "max relative translation error {max_rel_t}");
    }

    #[test]
    fn insufficient_correspondences_error() {
        let k = camera();
        let corr = vec![(Pt2::new(0.0, 0.0), Pt3::new(0.0, 0.0, 1.0)); 5];
        assert_eq!(
            solve_pnp(&corr, &k),
            Err(PnpError::InsufficientData { got: 5 })
        );
    }

    #[test]
    fn residual_equals_recomputed_reprojection_error() {
        let model = FootModel::standard();
        let k = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let truth = random_pose(&mut rng);
        let mut corr = project_exact(&model, &truth, &k);
        // Perturb one coordinate so the residual is nonzero.
        corr[3].0.x += 2.0;
        let sol = solve_pnp(&corr, &k).unwrap();
        let recomputed = mean_reprojection_error(&sol.pose, &corr, &k);
        assert_relative_eq!(sol.residual_px, recomputed, epsilon = 1e-9);
        assert!(sol.residual_px > 0.0);
        // Pose error stays bounded for a 2 px single-coordinate fault.
        let err = pose_error(&sol.pose, &truth);
        assert!(err.mean_euler_deg < 5.0);
        assert!(err.translation_cm < 5.0);
    }

    #[test]
    fn noise_monotonicity_monte_carlo() {
        let model = FootModel::standard();
        let k = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let noise_levels = [0.0, 0.5, 1.0, 2.0];
        let trials_per_level = 250;
        let mut mean_errors = Vec::new();
        for &sigma in &noise_levels {
            let mut total = 0.0;
            for _ in 0..trials_per_level {
                let truth = random_pose(&mut rng);
                let mut corr = project_exact(&model, &truth, &k);
                for (px, _) in corr.iter_mut() {
                    px.x += sigma * gauss(&mut rng);
                    px.y += sigma * gauss(&mut rng);
                }
                let sol = match solve_pnp(&corr, &k) {
                    Ok(s) => s,
                    Err(PnpError::NonConvergence { best }) => best,
                    Err(e) => panic!("unexpected error {e}"),
                };
                total += rotation_angle_between(&sol.pose.rotation, &truth.rotation);
            }
            mean_errors.push(total / trials_per_level as f64);
        }
        for w in mean_errors.windows(2) {
            assert!(
                w[1] >= w[0] - 1e-9,
                "pose error not monotone in noise: {mean_errors:?}"
            );
        }
    }

    fn gauss(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller.
        let u1: f64 = rng.gen_range(1e-12..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (core::f64::consts::TAU * u2).cos()
    }

    #[test]
    fn equivariant_under_model_rotation() {
        let model = FootModel::standard();
        let k = camera();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let truth = random_pose(&mut rng);
        let corr = project_exact(&model, &truth, &k);

        let q = rotation_from_euler_xyz(0.4, -0.2, 0.7);
        let rotated: Vec<(Pt2, Pt3)> = corr
            .iter()
            .map(|(px, x)| (*px, q.transform_point(x)))
            .collect();
        let sol = solve_pnp(&rotated, &k).unwrap();
        let expected = truth.rotation * q.inverse();
        assert!(
            rotation_angle_between(&sol.pose.rotation, &expected) < 1e-6,
            "equivariance violated"
        );
    }

    #[test]
    fn quaternion_jacobian_matches_finite_differences() {
        let q = UnitQuat::from_quaternion(Quat::new(0.8, -0.3, 0.4, 0.25));
        let x = Pt3::new(0.2, -0.1, 0.35);
        let analytic = rotation_jacobian_q(&q, &x);

        let h = 1e-7;
        let base = q.quaternion().coords;
        for col in 0..4 {
            // coords order is (i, j, k, w); map to (w, i, j, k) columns.
            let coord_idx = [3usize, 0, 1, 2][col];
            let mut plus = base;
            plus[coord_idx] += h;
            let mut minus = base;
            minus[coord_idx] -= h;
            let qp = UnitQuat::from_quaternion(Quat::from_vector(plus));
            let qm = UnitQuat::from_quaternion(Quat::from_vector(minus));
            let numeric = (qp.transform_point(&x) - qm.transform_point(&x)) / (2.0 * h);
            for r in 0..3 {
                assert_relative_eq!(analytic[(r, col)], numeric[r], epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn pose_error_identity_is_zero() {
        let p = Pose::new(
            rotation_from_euler_xyz(0.3, 0.1, -0.2),
            Vec3::new(0.0, 0.1, 0.9),
        );
        let e = pose_error(&p, &p);
        assert_eq!(e.mean_euler_deg, 0.0);
        assert_eq!(e.translation_cm, 0.0);
    }

    #[test]
    fn pose_error_three_degrees_each_axis() {
        let deg3 = 3.0f64.to_radians();
        let base = Pose::new(
            rotation_from_euler_xyz(0.2, -0.5, 1.0),
            Vec3::new(0.0, 0.0, 1.0),
        );
        let truth = Pose::new(
            base.rotation * rotation_from_euler_xyz(deg3, deg3, deg3),
            base.translation,
        );
        let e = pose_error(&base, &truth);
        assert!((e.mean_euler_deg - 3.0).abs() < 0.1, "{e:?}");
    }

    #[test]
    fn pose_error_translation_345() {
        let a = Pose::new(UnitQuat::identity(), Vec3::new(0.0, 0.0, 1.0));
        let b = Pose::new(UnitQuat::identity(), Vec3::new(0.003, 0.0, 1.004));
        let e = pose_error(&a, &b);
        assert_relative_eq!(e.translation_cm, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn projecting_model_keypoints_matches_manual_composition() {
        let model = FootModel::standard();
        let k = camera();
        let pose = Pose::new(UnitQuat::identity(), Vec3::new(-0.13, 0.0, 1.0));
        let projected = project_model_keypoints(&model, &pose, &k).unwrap();
        for (i, x) in model.keypoints3d().iter().enumerate() {
            let manual = project_point(&pose.transform_point(x), &k).unwrap();
            assert_eq!(projected[i], manual);
        }
        // Doubling fx doubles horizontal offsets from cx.
        let k2 = Intrinsics::new(600.0, 300.0, 128.0, 128.0).unwrap();
        let projected2 = project_model_keypoints(&model, &pose, &k2).unwrap();
        for (a, b) in projected.iter().zip(projected2.iter()) {
            assert_relative_eq!(b.x - 128.0, 2.0 * (a.x - 128.0), epsilon = 1e-9);
            assert_relative_eq!(b.y, a.y, epsilon = 1e-12);
        }
    }

    #[test]
    fn behind_camera_keypoint_propagates_error() {
        let model = FootModel::standard();
        let k = camera();
        let pose = Pose::new(UnitQuat::identity(), Vec3::new(0.0, 0.0, -1.0));
        assert!(matches!(
            project_model_keypoints(&model, &pose, &k),
            Err(PnpError::Geom(GeomError::BehindCamera { .. }))
        ));
    }

    #[test]
    fn model_constructor_rejects_coplanar_and_empty() {
        let mut flat = *FootModel::standard().keypoints3d();
        for p in flat.iter_mut() {
            p.z = 0.01;
        }
        let cloud = PointCloud::new(vec![Pt3::new(0.0, 0.0, 0.0)]);
        assert_eq!(
            FootModel::new(flat, cloud.clone()),
            Err(PnpError::CoplanarKeypoints)
        );
        assert_eq!(
            FootModel::new(
                *FootModel::standard().keypoints3d(),
                PointCloud::new(vec![])
            ),
            Err(PnpError::EmptyCloud)
        );
    }

    #[test]
    fn model_file_round_trip() {
        let model = FootModel::standard();
        let text = model.to_file_string();
        let parsed = FootModel::parse(&text).unwrap();
        assert_eq!(parsed.cloud().len(), model.cloud().len());
        for (a, b) in model.keypoints3d().iter().zip(parsed.keypoints3d().iter()) {
            assert_relative_eq!(a.coords, b.coords, epsilon = 1e-6);
        }
        assert_relative_eq!(model.scale_length(), parsed.scale_length(), epsilon = 1e-5);
    }

    #[test]
    fn model_parse_errors() {
        assert_eq!(FootModel::parse(""), Err(ModelParseError::MissingHeader));
        assert!(matches!(
            FootModel::parse("footmodel v2\n8 1\n"),
            Err(ModelParseError::UnsupportedVersion(_))
        ));
        assert!(matches!(
            FootModel::parse("footmodel v1\n7 1\n"),
            Err(ModelParseError::BadCounts { .. })
        ));
        assert!(matches!(
            FootModel::parse("footmodel v1\n8 1\n0 0 zebra\n"),
            Err(ModelParseError::BadPoint { line: 3 })
        ));
        assert!(matches!(
            FootModel::parse("footmodel v1\n8 1\n0 0 0\n"),
            Err(ModelParseError::WrongPointCount { .. })
        ));
    }

    #[test]
    fn standard_model_has_sane_scale() {
        let model = FootModel::standard();
        assert!((model.scale_length() - 0.26).abs() < 0.01);
        assert_eq!(model.cloud().len(), 200);
    }
}
