use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;
use crate::guidance::GuidanceCommand;

/// Adds the safety accelerations over one tick to the mission velocity and
/// caps the result. Yaw rate passes through.
pub fn blend_commands(mission: &GuidanceCommand, accels: &[Vec3], dt: f64) -> GuidanceCommand {
    let dv: Vec3 = accels.iter().sum::<Vec3>() * dt;
    GuidanceCommand { v_des: mission.v_des + dv, r_des: mission.r_des }.capped()
}

/// Leaky integral of the avoidance accelerations. A single tick's `a * dt` is
/// far too small to move a vehicle, so the correction is accumulated while the
/// conflict lasts and bleeds off afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AvoidanceIntegrator {
    pub v: Vec3,
    pub tau_s: f64,
}

impl Default for AvoidanceIntegrator {
    fn default() -> Self {
        Self { v: Vec3::zeros(), tau_s: 1.5 }
    }
}

impl AvoidanceIntegrator {
    pub fn update(&mut self, accels: &[Vec3], dt: f64) -> Vec3 {
        self.v = self.v * (-dt / self.tau_s).exp() + accels.iter().sum::<Vec3>() * dt;
        self.v
    }

    /// Integrates without leaking, for while a conflict is still in range.
    pub fn hold(&mut self, accels: &[Vec3], dt: f64) -> Vec3 {
        self.v += accels.iter().sum::<Vec3>() * dt;
        self.v
    }
}
