//! Reference frames, the pinhole camera and the value types shared by every
//! other module.
//!
//! World frame is right-handed with x east, y north, z up. The body frame is
//! x forward, y left, z up. The camera frame has z along the optical axis,
//! x to the right of the image and y down the image.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

const ORTHO_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera (depth {0} m)")]
    BehindCamera(f64),
    #[error("degenerate observation: apparent radius {0} px")]
    DegenerateObservation(f64),
    #[error("matrix is not a proper rotation (orthonormality error {ortho:e}, det {det})")]
    NotARotation { ortho: f64, det: f64 },
    #[error("invalid camera intrinsics: {0}")]
    InvalidIntrinsics(String),
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w += 2.0 * PI;
    }
    w
}

/// Proper rotation matrix (orthonormal, det +1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    pub fn new(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        let ortho = (m * m.transpose() - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if ortho > ORTHO_TOL || (det - 1.0).abs() > ORTHO_TOL {
            return Err(GeometryError::NotARotation { ortho, det });
        }
        Ok(Self(m))
    }

    /// Z-Y-X intrinsic (yaw, then pitch, then roll) body-to-world rotation.
    pub fn from_ypr(yaw: f64, pitch: f64, roll: f64) -> Self {
        let (sy, cy) = yaw.sin_cos();
        let (sp, cp) = pitch.sin_cos();
        let (sr, cr) = roll.sin_cos();
        let rz = Matrix3::new(cy, -sy, 0.0, sy, cy, 0.0, 0.0, 0.0, 1.0);
        let ry = Matrix3::new(cp, 0.0, sp, 0.0, 1.0, 0.0, -sp, 0.0, cp);
        let rx = Matrix3::new(1.0, 0.0, 0.0, 0.0, cr, -sr, 0.0, sr, cr);
        Self(rz * ry * rx)
    }

    pub fn yaw(yaw: f64) -> Self {
        Self::from_ypr(yaw, 0.0, 0.0)
    }

    /// Camera looking along body +x, image right = body -y, image down = body -z.
    pub fn forward_camera() -> Self {
        Self(Matrix3::new(
            0.0, 0.0, 1.0, //
            -1.0, 0.0, 0.0, //
            0.0, -1.0, 0.0,
        ))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn compose(&self, rhs: &RotationMatrix) -> Self {
        Self(self.0 * rhs.0)
    }

    pub fn apply(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }
}

impl Default for RotationMatrix {
    fn default() -> Self {
        Self::identity()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraIntrinsics {
    pub focal_px: f64,
    pub width_px: f64,
    pub height_px: f64,
}

impl CameraIntrinsics {
    pub fn new(focal_px: f64, width_px: f64, height_px: f64) -> Result<Self, GeometryError> {
        let cam = Self { focal_px, width_px, height_px };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.focal_px) && ok(self.width_px) && ok(self.height_px) {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics(format!("{self:?}")))
        }
    }

    pub fn diagonal_px(&self) -> f64 {
        self.width_px.hypot(self.height_px)
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self { focal_px: 900.0, width_px: 1280.0, height_px: 720.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub position: Vec3,
    pub velocity: Vec3,
    /// Heading in (-pi, pi].
    pub yaw: f64,
    pub yaw_rate: f64,
    pub roll: f64,
    pub pitch: f64,
}

impl VehicleState {
    pub fn at(position: Vec3, yaw: f64) -> Self {
        Self { position, yaw: wrap_angle(yaw), ..Default::default() }
    }

    pub fn body_to_world(&self) -> RotationMatrix {
        RotationMatrix::from_ypr(self.yaw, self.pitch, self.roll)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelObservation {
    pub t_x: f64,
    pub t_y: f64,
    pub apparent_radius: f64,
    pub t: f64,
}

/// Shifts raw pixel coordinates so the image centre is the origin.
pub fn center_pixels(obs: &PixelObservation, cam: &CameraIntrinsics) -> (f64, f64) {
    (obs.t_x - cam.width_px / 2.0, obs.t_y - cam.height_px / 2.0)
}

/// Unit ray from the camera centre through the centred pixel (p_x, p_y).
pub fn los_unit_vector(p_x: f64, p_y: f64, focal_px: f64) -> Vec3 {
    let n = (p_x * p_x + p_y * p_y + focal_px * focal_px).sqrt();
    Vec3::new(p_x / n, p_y / n, focal_px / n)
}

/// Result of projecting a sphere into the image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    InView(PixelObservation),
    OutOfView(PixelObservation),
}

impl Projection {
    pub fn in_view(&self) -> Option<PixelObservation> {
        match self {
            Projection::InView(o) => Some(*o),
            Projection::OutOfView(_) => None,
        }
    }
}

/// Projects a sphere of radius `object_radius` centred at `point_cam` (camera frame).
pub fn project(
    point_cam: &Vec3,
    object_radius: f64,
    cam: &CameraIntrinsics,
    t: f64,
) -> Result<Projection, GeometryError> {
    if point_cam.z <= 0.0 {
        return Err(GeometryError::BehindCamera(point_cam.z));
    }
    let f = cam.focal_px;
    let obs = PixelObservation {
        t_x: cam.width_px / 2.0 + f * point_cam.x / point_cam.z,
        t_y: cam.height_px / 2.0 + f * point_cam.y / point_cam.z,
        apparent_radius: f * object_radius / point_cam.z,
        t,
    };
    let inside = (0.0..=cam.width_px).contains(&obs.t_x) && (0.0..=cam.height_px).contains(&obs.t_y);
    Ok(if inside { Projection::InView(obs) } else { Projection::OutOfView(obs) })
}

/// Depth along the optical axis from the apparent size of a sphere of known radius.
pub fn depth_from_size(apparent_radius: f64, object_radius: f64, focal_px: f64) -> Result<f64, GeometryError> {
    if !(apparent_radius > 0.0) {
        return Err(GeometryError::DegenerateObservation(apparent_radius));
    }
    Ok(focal_px * object_radius / apparent_radius)
}

/// `R_b2i * R_c2b * v`.
pub fn camera_to_world(v_cam: &Vec3, c2b: &RotationMatrix, b2i: &RotationMatrix) -> Vec3 {
    b2i.compose(c2b).apply(v_cam)
}

/// Camera placement in the world: optical centre plus the two rotations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub c2b: RotationMatrix,
    pub b2i: RotationMatrix,
}

impl CameraPose {
    /// Camera rigidly mounted at `mount_body` (body frame offset) on `vehicle`.
    pub fn mounted(vehicle: &VehicleState, mount_body: &Vec3, c2b: RotationMatrix) -> Self {
        let b2i = vehicle.body_to_world();
        Self { position: vehicle.position + b2i.apply(mount_body), c2b, b2i }
    }

    pub fn camera_to_world(&self) -> RotationMatrix {
        self.b2i.compose(&self.c2b)
    }

    pub fn world_to_camera_point(&self, p: &Vec3) -> Vec3 {
        self.camera_to_world().transpose().apply(&(p - self.position))
    }

    pub fn camera_to_world_point(&self, p_cam: &Vec3) -> Vec3 {
        self.position + camera_to_world(p_cam, &self.c2b, &self.b2i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn cam640() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 640.0, 480.0).unwrap()
    }

    fn obs(t_x: f64, t_y: f64) -> PixelObservation {
        PixelObservation { t_x, t_y, apparent_radius: 1.0, t: 0.0 }
    }

    #[test]
    fn center_pixels_examples() {
        let cam = cam640();
        assert_eq!(center_pixels(&obs(320.0, 240.0), &cam), (0.0, 0.0));
        assert_eq!(center_pixels(&obs(640.0, 480.0), &cam), (320.0, 240.0));
        assert_eq!(center_pixels(&obs(100.0, 50.0), &cam), (-220.0, -190.0));
    }

    #[test]
    fn los_examples() {
        assert_relative_eq!(los_unit_vector(0.0, 0.0, 1000.0), Vec3::z(), epsilon = 1e-15);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert_relative_eq!(los_unit_vector(1000.0, 0.0, 1000.0), Vec3::new(h, 0.0, h), epsilon = 1e-15);
        assert_relative_eq!(
            los_unit_vector(3.0, 4.0, 12.0),
            Vec3::new(3.0 / 13.0, 4.0 / 13.0, 12.0 / 13.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn project_examples() {
        let cam = cam640();
        let p = project(&Vec3::new(0.0, 0.0, 5.0), 0.05, &cam, 0.0).unwrap().in_view().unwrap();
        assert_eq!((p.t_x, p.t_y), (320.0, 240.0));
        let p = project(&Vec3::new(0.0, 0.0, 1.0), 0.05, &cam, 0.0).unwrap();
        assert_relative_eq!(p.in_view().unwrap().apparent_radius, 50.0, epsilon = 1e-12);
        let cam500 = CameraIntrinsics::new(500.0, 640.0, 480.0).unwrap();
        let p = project(&Vec3::new(1.0, 0.0, 2.0), 0.05, &cam500, 0.0).unwrap();
        assert_eq!(p.in_view().unwrap().t_x, 570.0);
        let far_off = project(&Vec3::new(5.0, 0.0, 1.0), 0.05, &cam, 0.0).unwrap();
        assert!(matches!(far_off, Projection::OutOfView(_)));
        assert!(matches!(project(&Vec3::new(0.0, 0.0, -1.0), 0.05, &cam, 0.0), Err(GeometryError::BehindCamera(_))));
    }

    #[test]
    fn depth_examples() {
        assert_relative_eq!(depth_from_size(50.0, 0.05, 1000.0).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(depth_from_size(100.0, 0.05, 1000.0).unwrap(), 0.5, epsilon = 1e-15);
        assert_relative_eq!(depth_from_size(12.5, 0.05, 1000.0).unwrap(), 4.0, epsilon = 1e-15);
        assert!(depth_from_size(0.0, 0.05, 1000.0).is_err());
    }

    #[test]
    fn camera_to_world_examples() {
        let id = RotationMatrix::identity();
        let v = Vec3::new(1.0, 2.0, 3.0);
        assert_eq!(camera_to_world(&v, &id, &id), v);
        let yaw90 = RotationMatrix::yaw(std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(camera_to_world(&Vec3::x(), &id, &yaw90), Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn composed_rotation_matches_manual_product() {
        let a = RotationMatrix::from_ypr(0.3, -0.2, 0.9);
        let b = RotationMatrix::from_ypr(-1.4, 0.5, 0.1);
        let v = Vec3::new(0.2, -1.0, 4.0);
        let (ma, mb) = (a.matrix(), b.matrix());
        // explicit index loops, independent of nalgebra's product
        let mut prod = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    prod[i][j] += mb[(i, k)] * ma[(k, j)];
                }
            }
        }
        let mut expect = [0.0; 3];
        for i in 0..3 {
            for j in 0..3 {
                expect[i] += prod[i][j] * v[j];
            }
        }
        let got = camera_to_world(&v, &a, &b);
        for i in 0..3 {
            assert_relative_eq!(got[i], expect[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn rotation_constructors_are_proper() {
        assert!(RotationMatrix::new(*RotationMatrix::forward_camera().matrix()).is_ok());
        assert!(RotationMatrix::new(*RotationMatrix::from_ypr(1.0, 0.4, -2.0).matrix()).is_ok());
        assert!(RotationMatrix::new(Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0)).is_err());
    }

    #[test]
    fn forward_camera_axis_maps_to_body_x() {
        let c2b = RotationMatrix::forward_camera();
        assert_eq!(c2b.apply(&Vec3::z()), Vec3::x());
        assert_eq!(c2b.apply(&Vec3::x()), -Vec3::y());
        assert_eq!(c2b.apply(&Vec3::y()), -Vec3::z());
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn los_is_unit(px in -1e4f64..1e4, py in -1e4f64..1e4, f in 1e-3f64..1e4) {
            prop_assert!((los_unit_vector(px, py, f).norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn depth_round_trips_projection(z in 0.05f64..200.0, r in 0.01f64..1.0, f in 100.0f64..3000.0) {
            let cam = CameraIntrinsics::new(f, 640.0, 480.0).unwrap();
            let p = project(&Vec3::new(0.0, 0.0, z), r, &cam, 0.0).unwrap().in_view().unwrap();
            let back = depth_from_size(p.apparent_radius, r, f).unwrap();
            prop_assert!(((back - z) / z).abs() < 1e-9);
        }

        #[test]
        fn camera_to_world_preserves_norms_and_angles(
            y1 in -PI..PI, p1 in -1.5f64..1.5, r1 in -PI..PI,
            y2 in -PI..PI, p2 in -1.5f64..1.5, r2 in -PI..PI,
            a in prop::array::uniform3(-10.0f64..10.0),
            b in prop::array::uniform3(-10.0f64..10.0),
        ) {
            let c2b = RotationMatrix::from_ypr(y1, p1, r1);
            let b2i = RotationMatrix::from_ypr(y2, p2, r2);
            let (va, vb) = (Vec3::from(a), Vec3::from(b));
            let (wa, wb) = (camera_to_world(&va, &c2b, &b2i), camera_to_world(&vb, &c2b, &b2i));
            prop_assert!((wa.norm() - va.norm()).abs() < 1e-12);
            prop_assert!((wa.dot(&wb) - va.dot(&vb)).abs() < 1e-10);
        }

        #[test]
        fn center_pixels_shift_is_exact(ix in 0u32..=640 * 256, iy in 0u32..=480 * 256) {
            // sub-pixel positions on a 1/256 grid
            let (tx, ty) = (ix as f64 / 256.0, iy as f64 / 256.0);
            let cam = cam640();
            let (px, py) = center_pixels(&obs(tx, ty), &cam);
            prop_assert_eq!(px + cam.width_px / 2.0, tx);
            prop_assert_eq!(py + cam.height_px / 2.0, ty);
        }
    }
}
