use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, VehicleState};
use crate::guidance::{GuidanceCommand, SPEED_CAP};

/// Autopilot abstraction: velocity and yaw rate follow their commands as
/// first-order lags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantModel {
    pub tau_v: f64,
    pub tau_r: f64,
    pub speed_cap: f64,
    pub yaw_rate_cap: f64,
}

impl Default for PlantModel {
    fn default() -> Self {
        Self { tau_v: 0.3, tau_r: 0.15, speed_cap: SPEED_CAP, yaw_rate_cap: 1.5 }
    }
}

/// Exact discretisation of the lag over `dt` for a command held constant.
pub fn plant_step(s: &VehicleState, cmd: &GuidanceCommand, p: &PlantModel, dt: f64) -> VehicleState {
    let mut vc = cmd.v_des;
    let n = vc.norm();
    if n > p.speed_cap {
        vc *= p.speed_cap / n;
    }
    let rc = cmd.r_des.clamp(-p.yaw_rate_cap, p.yaw_rate_cap);

    let av = (-dt / p.tau_v).exp();
    let ar = (-dt / p.tau_r).exp();
    let mut out = *s;
    out.velocity = vc + (s.velocity - vc) * av;
    out.position = s.position + vc * dt + (s.velocity - vc) * (p.tau_v * (1.0 - av));
    out.yaw_rate = rc + (s.yaw_rate - rc) * ar;
    out.yaw = wrap_angle(s.yaw + rc * dt + (s.yaw_rate - rc) * (p.tau_r * (1.0 - ar)));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{sac_step, ReferenceModel, SacGains};
    use crate::geometry::Vec3;
    use proptest::prelude::*;

    #[test]
    fn zero_command_stays_put() {
        let s = VehicleState::at(Vec3::new(1.0, 2.0, 3.0), 0.5);
        let mut x = s;
        for _ in 0..100 {
            x = plant_step(&x, &GuidanceCommand::hold(), &PlantModel::default(), 0.02);
        }
        assert_eq!(x.position, s.position);
        assert_eq!(x.yaw, s.yaw);
    }

    #[test]
    fn step_response_matches_closed_form() {
        let p = PlantModel::default();
        let cmd = GuidanceCommand { v_des: Vec3::new(1.0, 0.0, 0.0), r_des: 0.0 };
        let mut s = VehicleState::default();
        let dt = 0.02;
        for k in 1..=250 {
            s = plant_step(&s, &cmd, &p, dt);
            let t = k as f64 * dt;
            let v = 1.0 - (-t / p.tau_v).exp();
            let x = t - p.tau_v * (1.0 - (-t / p.tau_v).exp());
            assert!((s.velocity.x - v).abs() < 1e-9);
            assert!((s.position.x - x).abs() < 1e-9);
        }
    }

    #[test]
    fn controller_step_settles_without_large_overshoot() {
        let p = PlantModel::default();
        let cmd = GuidanceCommand { v_des: Vec3::new(1.0, 0.0, 0.0), r_des: 0.0 };
        let (mut s, mut rm, g, dt) = (VehicleState::default(), ReferenceModel::default(), SacGains::default(), 0.02);
        let mut peak: f64 = 0.0;
        let mut settled_at = None;
        for k in 1..=1000 {
            let out = sac_step(&cmd, &s, &mut rm, &g, dt);
            s = plant_step(&s, &out, &p, dt);
            peak = peak.max(s.velocity.x);
            if settled_at.is_none() && (s.velocity.x - 1.0).abs() <= 0.05 {
                settled_at = Some(k as f64 * dt);
            }
        }
        assert!(peak <= 1.2, "overshoot {peak}");
        let t = settled_at.expect("never settled");
        // reference lag plus plant lag
        assert!(t <= 5.0 * (p.tau_v + ReferenceModel::default().tau), "settled at {t}");
        assert!((s.velocity.x - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn speed_never_exceeds_commanded_history(cmds in prop::collection::vec((-6.0f64..6.0, -6.0f64..6.0, -2.0f64..2.0), 1..80)) {
            let p = PlantModel::default();
            let mut s = VehicleState::default();
            let mut max_cmd: f64 = 0.0;
            for (x, y, z) in cmds {
                let c = GuidanceCommand { v_des: Vec3::new(x, y, z), r_des: 0.0 };
                max_cmd = max_cmd.max(c.v_des.norm().min(p.speed_cap));
                s = plant_step(&s, &c, &p, 0.02);
                prop_assert!(s.velocity.norm() <= max_cmd + 1e-12);
            }
        }
    }
}
