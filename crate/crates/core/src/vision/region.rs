use serde::{Deserialize, Serialize};

use super::{BallSearchConfig, BoxTrack, VisionError};
use crate::geometry::CameraIntrinsics;

const WEDGE_HALF_ANGLE: f64 = 25.0 * std::f64::consts::PI / 180.0;

/// Image-plane region in which the next ball candidate is searched for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SearchRegion {
    /// Opens downward from `apex` (bottom centre of the carrier's box).
    Wedge {
        apex: (f64, f64),
        /// Expected rod length in the image, px.
        offset_px: f64,
        /// Half-height of the admissible band around `offset_px`.
        band_half_px: f64,
        /// Half-width at the apex; grows with depth below the apex.
        base_half_width_px: f64,
        half_angle: f64,
    },
    Square {
        center: (f64, f64),
        half_side_px: f64,
    },
}

impl SearchRegion {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match *self {
            SearchRegion::Wedge { apex, offset_px, band_half_px, base_half_width_px, half_angle } => {
                let dy = y - apex.1;
                dy >= 0.0
                    && (dy - offset_px).abs() <= band_half_px
                    && (x - apex.0).abs() <= base_half_width_px + dy * half_angle.tan()
            }
            SearchRegion::Square { center, half_side_px } => {
                (x - center.0).abs() <= half_side_px && (y - center.1).abs() <= half_side_px
            }
        }
    }
}

/// Wedge below the carrier's box, placed at the rod length projected at the
/// previous ball depth and sized from the previous ball radius.
pub fn wedge_region(
    uav_box: &BoxTrack,
    prev_depth_m: f64,
    prev_radius_px: f64,
    cfg: &BallSearchConfig,
    cam: &CameraIntrinsics,
) -> Result<SearchRegion, VisionError> {
    if !(prev_depth_m > 0.0) {
        return Err(VisionError::NonPositiveDepth(prev_depth_m));
    }
    let [cx, cy, _w, h] = uav_box.bbox();
    let offset_px = cfg.rod_length_m * cam.focal_px / prev_depth_m;
    Ok(SearchRegion::Wedge {
        apex: (cx, cy + h / 2.0),
        offset_px,
        band_half_px: 3.0 * prev_radius_px + 0.25 * offset_px,
        base_half_width_px: 3.0 * prev_radius_px,
        half_angle: WEDGE_HALF_ANGLE,
    })
}

/// Terminal-phase square around the predicted ball centre.
pub fn grab_region(predicted_center: (f64, f64), prev_radius_px: f64) -> SearchRegion {
    SearchRegion::Square { center: predicted_center, half_side_px: (4.0 * prev_radius_px).max(20.0) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vision::BoxDetection;
    use approx::assert_relative_eq;

    fn uav_box() -> BoxTrack {
        BoxTrack::new(1, &BoxDetection::new(640.0, 100.0, 80.0, 20.0), &crate::vision::TrackerConfig::default())
    }

    fn offset(r: &SearchRegion) -> f64 {
        match r {
            SearchRegion::Wedge { offset_px, .. } => *offset_px,
            _ => panic!("expected wedge"),
        }
    }

    #[test]
    fn wedge_offset_is_projected_rod_length() {
        let cam = CameraIntrinsics::new(1000.0, 1280.0, 720.0).unwrap();
        let cfg = BallSearchConfig::default();
        let w = wedge_region(&uav_box(), 1.45, 5.0, &cfg, &cam).unwrap();
        assert_relative_eq!(offset(&w), 1000.0, epsilon = 1e-9);
        let w = wedge_region(&uav_box(), 2.9, 5.0, &cfg, &cam).unwrap();
        assert_relative_eq!(offset(&w), 500.0, epsilon = 1e-9);
        let w = wedge_region(&uav_box(), 1e9, 5.0, &cfg, &cam).unwrap();
        assert!(offset(&w) < 1e-5);
        assert!(wedge_region(&uav_box(), 0.0, 5.0, &cfg, &cam).is_err());
    }

    #[test]
    fn wedge_contains_expected_ball_and_rejects_above() {
        let cam = CameraIntrinsics::new(1000.0, 1280.0, 720.0).unwrap();
        let w = wedge_region(&uav_box(), 2.9, 5.0, &BallSearchConfig::default(), &cam).unwrap();
        // apex at (640, 110); ball expected 500 px lower
        assert!(w.contains(640.0, 610.0));
        assert!(w.contains(700.0, 610.0));
        assert!(!w.contains(640.0, 50.0));
        assert!(!w.contains(640.0, 300.0));
    }

    #[test]
    fn grab_square() {
        let r = grab_region((100.0, 100.0), 10.0);
        assert!(r.contains(139.0, 61.0));
        assert!(!r.contains(141.0, 100.0));
    }
}
