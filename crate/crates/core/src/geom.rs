//! Rigid-body pose, pinhole camera and conversion primitives.
//!
//! Conventions used across the crate:
//!
//! * Quaternions are `(w, x, y, z)`; the scalar part comes first everywhere
//!   a quaternion is constructed, destructured or serialized.
//! * Angles are radians internally. Degrees only appear in reported metrics.
//! * The camera frame is right-handed with `+z` along the optical axis;
//!   points must have `z > 0` to project.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::{ComplexField, Matrix3, Matrix4, RealField, Rotation3, UnitQuaternion};

pub type Vec2 = nalgebra::Vector2<f64>;
pub type Vec3 = nalgebra::Vector3<f64>;
pub type Pt2 = nalgebra::Point2<f64>;
pub type Pt3 = nalgebra::Point3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Quat = nalgebra::Quaternion<f64>;
pub type UnitQuat = UnitQuaternion<f64>;

/// Quaternions below this norm cannot be normalized into a rotation.
const MIN_QUAT_NORM: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum GeomError {
    /// Quaternion with (near-)zero norm cannot represent a rotation.
    ZeroQuaternion,
    /// Focal lengths must be strictly positive.
    InvalidIntrinsics { fx: f64, fy: f64 },
    /// Point at or behind the camera plane cannot be projected.
    BehindCamera { z: f64 },
}

impl fmt::Display for GeomError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeomError::ZeroQuaternion => write!(f, "zero quaternion is not a valid rotation"),
            GeomError::InvalidIntrinsics { fx, fy } => {
                write!(f, "focal lengths must be positive, got fx={fx}, fy={fy}")
            }
            GeomError::BehindCamera { z } => {
                write!(f, "point with z={z} is behind the camera")
            }
        }
    }
}

#[cfg(any(feature = "std", test))]
impl std::error::Error for GeomError {}

/// Rigid transform from the model frame to the camera frame.
///
/// Stored as a unit quaternion plus a translation in meters. The quaternion
/// is kept unit-norm by construction; [`Pose::from_quaternion`] renormalizes
/// arbitrary input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuat,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: UnitQuat, translation: Vec3) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(UnitQuat::identity(), Vec3::zeros())
    }

    /// Builds a pose from a raw `(w, x, y, z)` quaternion, renormalizing it.
    pub fn from_quaternion(q: Quat, translation: Vec3) -> Result<Self, GeomError> {
        if q.norm() < MIN_QUAT_NORM {
            return Err(GeomError::ZeroQuaternion);
        }
        Ok(Self::new(UnitQuat::from_quaternion(q), translation))
    }

    pub fn rotation_matrix(&self) -> Mat3 {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// `R·p + t`.
    pub fn transform_point(&self, p: &Pt3) -> Pt3 {
        self.rotation.transform_point(p) + self.translation
    }

    /// The equivalent 4×4 homogeneous matrix.
    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&self.rotation_matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }
}

/// Pinhole camera parameters in pixels, no distortion.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64) -> Result<Self, GeomError> {
        if fx <= 0.0 || fy <= 0.0 {
            return Err(GeomError::InvalidIntrinsics { fx, fy });
        }
        Ok(Self { fx, fy, cx, cy })
    }

    /// The 3×3 calibration matrix `K`.
    pub fn matrix(&self) -> Mat3 {
        Mat3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Pixel ray of `(u, v)` scaled to the given depth.
    pub fn back_project(&self, pixel: &Pt2, depth: f64) -> Pt3 {
        Pt3::new(
            (pixel.x - self.cx) * depth / self.fx,
            (pixel.y - self.cy) * depth / self.fy,
            depth,
        )
    }
}

/// Ordered set of model-frame 3D points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Pt3>,
}

impl PointCloud {
    pub fn new(points: Vec<Pt3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Converts a raw quaternion to its rotation matrix, renormalizing first.
///
/// Returns [`GeomError::ZeroQuaternion`] when the input cannot be normalized.
pub fn quat_to_matrix(q: &Quat) -> Result<Mat3, GeomError> {
    if q.norm() < MIN_QUAT_NORM {
        return Err(GeomError::ZeroQuaternion);
    }
    Ok(UnitQuat::from_quaternion(*q)
        .to_rotation_matrix()
        .into_inner())
}

/// Recovers the unit quaternion of a rotation matrix.
///
/// Inverse of [`quat_to_matrix`] up to the global quaternion sign.
pub fn matrix_to_quat(m: &Mat3) -> UnitQuat {
    UnitQuat::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*m))
}

/// Applies `pose` to every point of the cloud.
pub fn transform_points(cloud: &PointCloud, pose: &Pose) -> Vec<Pt3> {
    cloud.points.iter().map(|p| pose.transform_point(p)).collect()
}

/// Central projection `u = fx·x/z + cx`, `v = fy·y/z + cy`.
///
/// The point must be strictly in front of the camera.
pub fn project_point(p: &Pt3, k: &Intrinsics) -> Result<Pt2, GeomError> {
    if p.z <= 0.0 {
        return Err(GeomError::BehindCamera { z: p.z });
    }
    Ok(Pt2::new(
        k.fx * p.x / p.z + k.cx,
        k.fy * p.y / p.z + k.cy,
    ))
}

/// Rotation from intrinsic X-Y-Z Euler angles: `R = Rx(rx)·Ry(ry)·Rz(rz)`.
pub fn rotation_from_euler_xyz(rx: f64, ry: f64, rz: f64) -> UnitQuat {
    let qx = UnitQuat::from_axis_angle(&Vec3::x_axis(), rx);
    let qy = UnitQuat::from_axis_angle(&Vec3::y_axis(), ry);
    let qz = UnitQuat::from_axis_angle(&Vec3::z_axis(), rz);
    qx * qy * qz
}

/// Decomposes a rotation into intrinsic X-Y-Z Euler angles (radians).
///
/// Inverse of [`rotation_from_euler_xyz`] away from the `ry = ±π/2` gimbal
/// lock, where the split between `rx` and `rz` is no longer unique and `rx`
/// is reported as 0.
pub fn euler_xyz_from_rotation(q: &UnitQuat) -> (f64, f64, f64) {
    let m = q.to_rotation_matrix();
    let m = m.matrix();
    // R = Rx·Ry·Rz has m[(0,2)] = sin(ry).
    let sy = m[(0, 2)].clamp(-1.0, 1.0);
    let ry = ComplexField::asin(sy);
    if ComplexField::abs(sy) > 1.0 - 1e-12 {
        // Gimbal lock: only rx ± rz is observable.
        let rz = RealField::atan2(m[(1, 0)], m[(1, 1)]);
        (0.0, ry, rz)
    } else {
        let rx = RealField::atan2(-m[(1, 2)], m[(2, 2)]);
        let rz = RealField::atan2(-m[(0, 1)], m[(0, 0)]);
        (rx, ry, rz)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use core::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_quaternion_maps_to_identity_matrix() {
        let m = quat_to_matrix(&Quat::new(1.0, 0.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(m, Mat3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn zero_quaternion_is_rejected() {
        assert_eq!(
            quat_to_matrix(&Quat::new(0.0, 0.0, 0.0, 0.0)),
            Err(GeomError::ZeroQuaternion)
        );
        assert!(Pose::from_quaternion(Quat::new(0.0, 0.0, 0.0, 0.0), Vec3::zeros()).is_err());
    }

    #[test]
    fn quarter_turn_about_z_maps_x_axis_to_y_axis() {
        // Oracle: rotate the basis vectors with the explicit Rodrigues formula
        // for an angle/axis rotation and compare.
        let half = FRAC_PI_2 / 2.0;
        let q = Quat::new(half.cos(), 0.0, 0.0, half.sin());
        let m = quat_to_matrix(&q).unwrap();
        for basis in [Vec3::x(), Vec3::y(), Vec3::z()] {
            let expected = rodrigues(&Vec3::z(), FRAC_PI_2, &basis);
            assert_relative_eq!(m * basis, expected, epsilon = 1e-12);
        }
        assert_relative_eq!(m * Vec3::x(), Vec3::y(), epsilon = 1e-12);
    }

    fn rodrigues(axis: &Vec3, angle: f64, v: &Vec3) -> Vec3 {
        v * angle.cos() + axis.cross(v) * angle.sin() + axis * axis.dot(v) * (1.0 - angle.cos())
    }

    #[test]
    fn matrix_round_trip_reproduces_quaternion_up_to_sign() {
        let mut state = 0x2545f4914f6cdd1du64;
        for _ in 0..200 {
            let q = random_unit_quat(&mut state);
            let m = quat_to_matrix(&q.into_inner()).unwrap();
            let back = matrix_to_quat(&m);
            let d = q.coords.dot(&back.coords).abs();
            assert!(d > 1.0 - 1e-9, "round trip drifted: dot={d}");
        }
    }

    fn random_unit_quat(state: &mut u64) -> UnitQuat {
        let mut next = || {
            *state ^= *state << 13;
            *state ^= *state >> 7;
            *state ^= *state << 17;
            (*state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        };
        UnitQuat::from_quaternion(Quat::new(next(), next(), next(), next()))
    }

    #[test]
    fn transform_identity_and_translation() {
        let cloud = PointCloud::new(vec![Pt3::new(0.0, 0.0, 0.0), Pt3::new(1.0, 2.0, 3.0)]);
        let out = transform_points(&cloud, &Pose::identity());
        assert_eq!(out, cloud.points);

        let shifted = transform_points(
            &cloud,
            &Pose::new(UnitQuat::identity(), Vec3::new(0.0, 0.0, 1.0)),
        );
        assert_eq!(shifted[0], Pt3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn transform_quarter_turn() {
        let pose = Pose::new(
            UnitQuat::from_axis_angle(&Vec3::z_axis(), FRAC_PI_2),
            Vec3::zeros(),
        );
        let out = pose.transform_point(&Pt3::new(1.0, 0.0, 0.0));
        assert_relative_eq!(out, Pt3::new(0.0, 1.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn principal_axis_projects_to_principal_point() {
        let k = Intrinsics::new(500.0, 500.0, 128.0, 128.0).unwrap();
        let px = project_point(&Pt3::new(0.0, 0.0, 1.0), &k).unwrap();
        assert_eq!(px, Pt2::new(128.0, 128.0));
        let px = project_point(&Pt3::new(1.0, 0.0, 1.0), &k).unwrap();
        assert_eq!(px, Pt2::new(628.0, 128.0));
    }

    #[test]
    fn behind_camera_is_rejected() {
        let k = Intrinsics::new(500.0, 500.0, 128.0, 128.0).unwrap();
        assert!(matches!(
            project_point(&Pt3::new(0.0, 0.0, 0.0), &k),
            Err(GeomError::BehindCamera { .. })
        ));
        assert!(matches!(
            project_point(&Pt3::new(0.0, 0.0, -2.0), &k),
            Err(GeomError::BehindCamera { .. })
        ));
    }

    #[test]
    fn invalid_intrinsics_are_rejected() {
        assert!(Intrinsics::new(0.0, 500.0, 0.0, 0.0).is_err());
        assert!(Intrinsics::new(500.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn back_project_is_algebraic_inverse_of_projection() {
        let k = Intrinsics::new(420.0, 460.0, 130.0, 120.0).unwrap();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..100 {
            let z = 0.5 + 2.5 * next();
            let p = Pt3::new(next() * 2.0 - 1.0, next() * 2.0 - 1.0, z);
            let px = project_point(&p, &k).unwrap();
            let back = k.back_project(&px, p.z);
            let px2 = project_point(&back, &k).unwrap();
            assert_relative_eq!(px, px2, epsilon = 1e-9);
            assert_relative_eq!(back, p, epsilon = 1e-9);
        }
    }

    #[test]
    fn euler_xyz_round_trip() {
        let cases = [
            (0.1, -0.4, 0.9),
            (0.0, 0.0, 0.0),
            (-1.2, 0.7, 2.9),
            (3.0, -1.2, -3.0),
        ];
        for (rx, ry, rz) in cases {
            let q = rotation_from_euler_xyz(rx, ry, rz);
            let (ax, ay, az) = euler_xyz_from_rotation(&q);
            let q2 = rotation_from_euler_xyz(ax, ay, az);
            let d = q.coords.dot(&q2.coords).abs();
            assert!(d > 1.0 - 1e-12, "euler round trip drifted for {cases:?}");
        }
    }

    #[test]
    fn transform_then_project_matches_homogeneous_product() {
        let k = Intrinsics::new(300.0, 310.0, 128.0, 126.0).unwrap();
        let pose = Pose::new(
            rotation_from_euler_xyz(0.3, -0.2, 0.5),
            Vec3::new(0.05, -0.02, 0.8),
        );
        let p = Pt3::new(0.1, -0.05, 0.2);

        let direct = project_point(&pose.transform_point(&p), &k).unwrap();

        let h = pose.to_homogeneous() * p.to_homogeneous();
        let hp = Pt3::new(h.x / h.w, h.y / h.w, h.z / h.w);
        let via_matrix = project_point(&hp, &k).unwrap();

        assert_relative_eq!(direct, via_matrix, epsilon = 1e-12);
    }
}
