//! Reference-model velocity controller feeding the autopilot.

use serde::{Deserialize, Serialize};

use crate::geometry::{Vec3, VehicleState};
use crate::guidance::GuidanceCommand;

/// Per-axis gains for `x, y, z` velocity and yaw rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SacGains {
    pub k_e: [f64; 4],
    pub k_x: [f64; 4],
    pub k_u: [f64; 4],
}

impl Default for SacGains {
    fn default() -> Self {
        Self::uniform(0.4, 0.2, 0.8)
    }
}

impl SacGains {
    pub fn uniform(k_e: f64, k_x: f64, k_u: f64) -> Self {
        Self { k_e: [k_e; 4], k_x: [k_x; 4], k_u: [k_u; 4] }
    }

    pub fn pass_through() -> Self {
        Self::uniform(0.0, 0.0, 1.0)
    }
}

/// First-order lag per axis toward the commanded value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReferenceModel {
    pub tau: f64,
    /// `[vx, vy, vz, r]`
    pub state: [f64; 4],
}

impl ReferenceModel {
    pub fn new(tau: f64) -> Self {
        assert!(tau > 0.0, "reference model time constant must be positive");
        Self { tau, state: [0.0; 4] }
    }

    /// Exact discretisation of the lag over `dt`.
    pub fn advance(&mut self, cmd: &[f64; 4], dt: f64) {
        let a = (-dt / self.tau).exp();
        for (s, c) in self.state.iter_mut().zip(cmd) {
            *s = c + (*s - c) * a;
        }
    }
}

impl Default for ReferenceModel {
    fn default() -> Self {
        Self::new(0.5)
    }
}

fn axes(v: &Vec3, r: f64) -> [f64; 4] {
    [v.x, v.y, v.z, r]
}

/// One controller tick: advance the reference model, then
/// `V_d = k_e (V_r - V) + k_x V_r + k_u V_des` per axis.
pub fn sac_step(
    cmd: &GuidanceCommand,
    actual: &VehicleState,
    reference: &mut ReferenceModel,
    g: &SacGains,
    dt: f64,
) -> GuidanceCommand {
    let des = axes(&cmd.v_des, cmd.r_des);
    reference.advance(&des, dt);
    sac_output(&des, &reference.state, &axes(&actual.velocity, actual.yaw_rate), g)
}

/// The linear output law on its own.
pub fn sac_output(des: &[f64; 4], v_r: &[f64; 4], actual: &[f64; 4], g: &SacGains) -> GuidanceCommand {
    let mut out = [0.0; 4];
    for i in 0..4 {
        let e = v_r[i] - actual[i];
        out[i] = g.k_e[i] * e + g.k_x[i] * v_r[i] + g.k_u[i] * des[i];
    }
    GuidanceCommand { v_des: Vec3::new(out[0], out[1], out[2]), r_des: out[3] }
}
