//! Inter-vehicle collision-cone avoidance and convex geo-fencing.

mod cone;
mod hull;

pub use cone::{
    avoidance_accel, in_collision_cone, relative_kinematics, relative_kinematics_raw, AvoidanceParams,
    RelativeKinematics,
};
pub use hull::{closest_on_triangle, quickhull3, FenceHull, HullFace};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SafetyError {
    #[error("coincident positions")]
    Coincident,
    #[error("degenerate hull: {0}")]
    DegenerateHull(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FenceParams {
    /// Distance from a face at which repulsion starts, m.
    pub activation_m: f64,
    pub gain: f64,
}

impl Default for FenceParams {
    fn default() -> Self {
        Self { activation_m: 1.5, gain: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FenceResponse {
    /// Inward velocity, m/s.
    pub velocity: Vec3,
    pub breach: bool,
}

/// Inward velocity from every face closer than `activation`. Outside the hull
/// each violated face pushes back at full strength and a breach is flagged.
pub fn fence_repulsion(p: &Vec3, hull: &FenceHull, activation: f64, gain: f64) -> FenceResponse {
    let mut v = Vec3::zeros();
    let mut breach = false;
    for f in &hull.faces {
        let plane = f.normal.dot(p) - f.offset;
        if plane > 1e-9 {
            breach = true;
            v -= f.normal * (gain * activation);
            continue;
        }
        let (_, dist) = hull.face_distance(f, p);
        if dist < activation {
            v -= f.normal * (gain * (activation - dist));
        }
    }
    FenceResponse { velocity: v, breach }
}
