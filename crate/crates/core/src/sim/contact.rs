use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContactParams {
    /// Net radius plus ball radius.
    pub grab_r_eq_m: f64,
    /// Popper radius plus balloon radius.
    pub pop_r_eq_m: f64,
    /// Minimum relative speed for the ball to tear off its magnet, m/s.
    pub detach_speed_mps: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { grab_r_eq_m: 0.15, pop_r_eq_m: 0.1 + 0.15, detach_speed_mps: 0.3 }
    }
}

/// Closest distance to the origin along the segment `a -> b`.
pub fn segment_origin_distance(a: &Vec3, b: &Vec3) -> f64 {
    let d = b - a;
    let dd = d.norm_squared();
    let s = if dd > 0.0 { (-a.dot(&d) / dd).clamp(0.0, 1.0) } else { 0.0 };
    (a + d * s).norm()
}

/// Swept sphere test over one tick, in the effector's frame of reference.
/// Returns the relative speed on contact.
pub fn swept_contact(eff0: &Vec3, eff1: &Vec3, obj0: &Vec3, obj1: &Vec3, r_eq: f64, dt: f64) -> Option<f64> {
    let a = obj0 - eff0;
    let b = obj1 - eff1;
    (segment_origin_distance(&a, &b) <= r_eq).then(|| (b - a).norm() / dt)
}
