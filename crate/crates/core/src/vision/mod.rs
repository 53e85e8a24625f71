//! Blob scoring, search regions, balloon localisation and box tracking over
//! synthetic detections.

mod assignment;
mod contour;
mod region;
pub mod replay;
mod track;

pub use assignment::{assignment_cost, hungarian};
pub use contour::{circularity, min_enclosing_circle, score, BallSearchConfig, ContourStats};
pub use region::{grab_region, wedge_region, SearchRegion};
pub use track::{
    associate, kalman_predict_update, Association, BoxDetection, BoxTrack, BoxTracker, DetectionClass, TrackerConfig,
};

use thiserror::Error;

use crate::geometry::{los_unit_vector, CameraIntrinsics, CameraPose, Vec3};

/// Blobs below this circularity are not taken as balloons.
pub const BALLOON_CIRCULARITY_MIN: f64 = 0.75;

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("degenerate contour (perimeter {0})")]
    DegenerateContour(f64),
    #[error("non-positive depth {0} m")]
    NonPositiveDepth(f64),
    #[error("blob rejected: circularity {0:.3} below threshold")]
    RejectedBlob(f64),
    #[error("detection replay: {0}")]
    Replay(#[from] csv::Error),
}

/// World position of a spherical balloon from its blob. Depth along the optical
/// axis follows from the known radius; the point lies on the ray through the
/// blob centre.
pub fn balloon_position(
    blob: &ContourStats,
    balloon_radius_m: f64,
    cam: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<Vec3, VisionError> {
    let c = circularity(blob)?;
    if c < BALLOON_CIRCULARITY_MIN {
        return Err(VisionError::RejectedBlob(c));
    }
    if !(blob.enclosing_radius > 0.0) {
        return Err(VisionError::DegenerateContour(blob.enclosing_radius));
    }
    let depth = cam.focal_px * balloon_radius_m / blob.enclosing_radius;
    let p_x = blob.center.0 - cam.width_px / 2.0;
    let p_y = blob.center.1 - cam.height_px / 2.0;
    let ray = los_unit_vector(p_x, p_y, cam.focal_px);
    let slant = depth / ray.z;
    Ok(pose.camera_to_world_point(&(ray * slant)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project, RotationMatrix, VehicleState};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_pose() -> CameraPose {
        CameraPose { position: Vec3::zeros(), c2b: RotationMatrix::identity(), b2i: RotationMatrix::identity() }
    }

    #[test]
    fn unit_depth_when_radius_equals_f_times_r() {
        let cam = CameraIntrinsics::new(1000.0, 640.0, 480.0).unwrap();
        let blob = ContourStats::disc((320.0, 240.0), 150.0, 0.0);
        let p = balloon_position(&blob, 0.15, &cam, &identity_pose()).unwrap();
        assert_relative_eq!(p, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn elongated_blob_is_rejected() {
        let cam = CameraIntrinsics::default();
        let sq = [(0.0, 0.0), (60.0, 0.0), (60.0, 20.0), (0.0, 20.0)];
        let blob = ContourStats::from_polygon(&sq, 0.0);
        assert!(matches!(balloon_position(&blob, 0.15, &cam, &identity_pose()), Err(VisionError::RejectedBlob(_))));
    }

    #[test]
    fn projected_balloon_round_trips() {
        let cam = CameraIntrinsics::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let uav = VehicleState::at(
                Vec3::new(rng.random_range(0.0..50.0), rng.random_range(0.0..50.0), 3.0),
                rng.random_range(-3.0..3.0),
            );
            let pose = CameraPose::mounted(&uav, &Vec3::new(0.0, -0.6, 0.0), RotationMatrix::forward_camera());
            let fwd = pose.camera_to_world().apply(&Vec3::z());
            let lat = pose.camera_to_world().apply(&Vec3::x());
            let target = pose.position
                + fwd * rng.random_range(2.0..20.0)
                + lat * rng.random_range(-1.0..1.0)
                + Vec3::z() * rng.random_range(-0.5..0.5);
            let pc = pose.world_to_camera_point(&target);
            let obs = project(&pc, 0.15, &cam, 0.0).unwrap().in_view().unwrap();
            let blob = ContourStats::disc((obs.t_x, obs.t_y), obs.apparent_radius, 0.0);
            let est = balloon_position(&blob, 0.15, &cam, &pose).unwrap();
            assert!((est - target).norm() < 1e-6);
        }
    }
}
