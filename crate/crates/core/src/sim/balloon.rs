use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalloonModel {
    pub radius_m: f64,
    /// Height of the pole top the balloon is tied to, m.
    pub pole_height_m: f64,
    pub sway_amplitude_m: f64,
    pub sway_period_s: f64,
}

impl Default for BalloonModel {
    fn default() -> Self {
        Self { radius_m: 0.15, pole_height_m: 1.5, sway_amplitude_m: 0.1, sway_period_s: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Balloon {
    pub id: usize,
    /// Ground position of the pole.
    pub base: Vec3,
    pub phase: f64,
    pub alive: bool,
}

impl Balloon {
    pub fn center(&self, m: &BalloonModel, t: f64) -> Vec3 {
        let w = TAU / m.sway_period_s;
        let a = w * t + self.phase;
        Vec3::new(
            self.base.x + m.sway_amplitude_m * a.sin(),
            self.base.y + 0.5 * m.sway_amplitude_m * (1.3 * a).cos(),
            self.base.z + m.pole_height_m + m.radius_m,
        )
    }
}
