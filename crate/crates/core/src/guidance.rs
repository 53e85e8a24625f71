//! Image-based guidance laws: potential-field tracking at a standoff
//! distance, pure pursuit for grabbing and the balloon approach variant.

use serde::{Deserialize, Serialize};

use crate::geometry::{
    camera_to_world, center_pixels, depth_from_size, los_unit_vector, wrap_angle, CameraIntrinsics, PixelObservation,
    RotationMatrix, Vec3, VehicleState,
};

/// Platform speed cap, m/s (30 km/h).
pub const SPEED_CAP: f64 = 30.0 / 3.6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackingParams {
    /// Equilibrium distance, m.
    pub d_track: f64,
    /// Potential gain, 1/s.
    pub k_pot: f64,
    pub v_max_track: f64,
    pub kp_yaw: f64,
    pub kd_yaw: f64,
}

impl Default for TrackingParams {
    fn default() -> Self {
        Self { d_track: 8.0, k_pot: 3.0, v_max_track: SPEED_CAP, kp_yaw: 4.0, kd_yaw: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GrabParams {
    /// Estimated target speed, m/s.
    pub v_t: f64,
    pub v_excess: f64,
    pub kp_yaw: f64,
    pub kd_yaw: f64,
}

impl Default for GrabParams {
    fn default() -> Self {
        Self { v_t: 2.0, v_excess: 0.5, kp_yaw: 1.5, kd_yaw: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GuidanceCommand {
    /// World frame, m/s.
    pub v_des: Vec3,
    /// rad/s
    pub r_des: f64,
}

impl GuidanceCommand {
    pub fn hold() -> Self {
        Self::default()
    }

    /// Scales the velocity down to the platform cap if needed.
    pub fn capped(mut self) -> Self {
        let n = self.v_des.norm();
        if n > SPEED_CAP {
            self.v_des *= SPEED_CAP / n;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuidanceEvent {
    LostTarget,
}

/// A command plus anything the mission layer should hear about.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guided {
    pub command: GuidanceCommand,
    pub event: Option<GuidanceEvent>,
}

impl Guided {
    fn ok(command: GuidanceCommand) -> Self {
        Self { command, event: None }
    }

    fn lost() -> Self {
        Self { command: GuidanceCommand::hold(), event: Some(GuidanceEvent::LostTarget) }
    }
}

/// Previous heading error and output, owned by the caller.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct YawState {
    pub e_prev: Option<f64>,
    pub r_prev: f64,
}

/// PD yaw-rate law pointing the nose along the horizontal part of `o_world`.
pub fn yaw_command(o_world: &Vec3, yaw: f64, kp: f64, kd: f64, st: &mut YawState, dt: f64) -> f64 {
    if o_world.x.hypot(o_world.y) < 1e-9 {
        return st.r_prev;
    }
    let psi_des = o_world.y.atan2(o_world.x);
    let e = wrap_angle(psi_des - yaw);
    let e_dot = match st.e_prev {
        Some(p) if dt > 0.0 => wrap_angle(e - p) / dt,
        _ => 0.0,
    };
    let r = kp * e + kd * e_dot;
    st.e_prev = Some(e);
    st.r_prev = r;
    r
}

/// Line of sight to the observed target in the world frame.
pub fn los_world(obs: &PixelObservation, state: &VehicleState, cam: &CameraIntrinsics, c2b: &RotationMatrix) -> Vec3 {
    let (p_x, p_y) = center_pixels(obs, cam);
    let o_c = los_unit_vector(p_x, p_y, cam.focal_px);
    camera_to_world(&o_c, c2b, &state.body_to_world())
}

/// Potential-field speed toward or away from the target along the line of sight.
pub fn potential_speed(d_target: f64, p: &TrackingParams) -> f64 {
    (p.k_pot * (d_target - p.d_track).abs()).clamp(0.0, p.v_max_track)
}

#[allow(clippy::too_many_arguments)]
pub fn track_command(
    obs: Option<&PixelObservation>,
    state: &VehicleState,
    params: &TrackingParams,
    object_radius_m: f64,
    cam: &CameraIntrinsics,
    c2b: &RotationMatrix,
    yaw: &mut YawState,
    dt: f64,
) -> Guided {
    let Some(obs) = obs else {
        return Guided::lost();
    };
    let Ok(d_target) = depth_from_size(obs.apparent_radius, object_radius_m, cam.focal_px) else {
        return Guided::lost();
    };
    let o_w = los_world(obs, state, cam, c2b);
    let speed = potential_speed(d_target, params);
    let sign = if d_target >= params.d_track { 1.0 } else { -1.0 };
    let r_des = yaw_command(&o_w, state.yaw, params.kp_yaw, params.kd_yaw, yaw, dt);
    Guided::ok(GuidanceCommand { v_des: o_w * (sign * speed), r_des }.capped())
}

/// Pure pursuit at `V_t + V_excess` along the line of sight. The apparent size
/// is never read.
pub fn grab_command(
    obs: Option<&PixelObservation>,
    state: &VehicleState,
    params: &GrabParams,
    cam: &CameraIntrinsics,
    c2b: &RotationMatrix,
    yaw: &mut YawState,
    dt: f64,
) -> Guided {
    let Some(obs) = obs else {
        return Guided::lost();
    };
    let o_w = los_world(obs, state, cam, c2b);
    let r_des = yaw_command(&o_w, state.yaw, params.kp_yaw, params.kd_yaw, yaw, dt);
    Guided::ok(GuidanceCommand { v_des: o_w * (params.v_t + params.v_excess), r_des }.capped())
}

/// Index of the nearest balloon by depth from apparent size.
pub fn nearest_balloon(obs: &[PixelObservation], balloon_radius_m: f64, focal_px: f64) -> Option<usize> {
    obs.iter()
        .enumerate()
        .filter_map(|(i, o)| depth_from_size(o.apparent_radius, balloon_radius_m, focal_px).ok().map(|d| (i, d)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
}

/// Pursuit of a stationary balloon at `v_approach`; picks the nearest visible one.
#[allow(clippy::too_many_arguments)]
pub fn balloon_command(
    obs: &[PixelObservation],
    balloon_radius_m: f64,
    state: &VehicleState,
    cam: &CameraIntrinsics,
    c2b: &RotationMatrix,
    v_approach: f64,
    kp_yaw: f64,
    yaw: &mut YawState,
    dt: f64,
) -> Guided {
    let chosen = nearest_balloon(obs, balloon_radius_m, cam.focal_px).map(|i| &obs[i]);
    let p = GrabParams { v_t: 0.0, v_excess: v_approach, kp_yaw, kd_yaw: 0.0 };
    grab_command(chosen, state, &p, cam, c2b, yaw, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::project;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 640.0, 480.0).unwrap()
    }

    fn obs_at(t_x: f64, t_y: f64, r: f64) -> PixelObservation {
        PixelObservation { t_x, t_y, apparent_radius: r, t: 0.0 }
    }

    fn level() -> VehicleState {
        VehicleState::at(Vec3::zeros(), 0.0)
    }

    #[test]
    fn equilibrium_gives_zero_speed() {
        let p = TrackingParams::default();
        // 0.05 m ball at 8 m -> 6.25 px
        let o = obs_at(320.0, 240.0, 1000.0 * 0.05 / 8.0);
        let g = track_command(
            Some(&o),
            &level(),
            &p,
            0.05,
            &cam(),
            &RotationMatrix::forward_camera(),
            &mut YawState::default(),
            0.02,
        );
        assert!(g.command.v_des.norm() < 1e-12);
    }

    #[test]
    fn far_target_is_approached_near_target_is_backed_off() {
        let p = TrackingParams::default();
        let c2b = RotationMatrix::forward_camera();
        let far = obs_at(400.0, 200.0, 1000.0 * 0.05 / 12.0);
        let near = obs_at(400.0, 200.0, 1000.0 * 0.05 / 4.0);
        let o_w = camera_to_world(&los_unit_vector(80.0, -40.0, 1000.0), &c2b, &level().body_to_world());
        let g = track_command(Some(&far), &level(), &p, 0.05, &cam(), &c2b, &mut YawState::default(), 0.02);
        assert!(g.command.v_des.dot(&o_w) > 0.0);
        assert_relative_eq!(g.command.v_des.normalize(), o_w, epsilon = 1e-12);
        let g = track_command(Some(&near), &level(), &p, 0.05, &cam(), &c2b, &mut YawState::default(), 0.02);
        assert!(g.command.v_des.dot(&o_w) < 0.0);
    }

    #[test]
    fn missing_observation_holds() {
        let g = grab_command(
            None,
            &level(),
            &GrabParams::default(),
            &cam(),
            &RotationMatrix::forward_camera(),
            &mut YawState::default(),
            0.02,
        );
        assert_eq!(g.command, GuidanceCommand::hold());
        assert_eq!(g.event, Some(GuidanceEvent::LostTarget));
        let g = track_command(
            None,
            &level(),
            &TrackingParams::default(),
            0.05,
            &cam(),
            &RotationMatrix::forward_camera(),
            &mut YawState::default(),
            0.02,
        );
        assert_eq!(g.event, Some(GuidanceEvent::LostTarget));
    }

    #[test]
    fn centred_ball_pursuit_is_along_nose() {
        let p = GrabParams { v_t: 2.0, v_excess: 0.5, ..GrabParams::default() };
        let g = grab_command(
            Some(&obs_at(320.0, 240.0, 5.0)),
            &level(),
            &p,
            &cam(),
            &RotationMatrix::forward_camera(),
            &mut YawState::default(),
            0.02,
        );
        assert_relative_eq!(g.command.v_des, Vec3::new(2.5, 0.0, 0.0), epsilon = 1e-12);
    }

    #[test]
    fn yaw_examples() {
        let mut st = YawState::default();
        assert_eq!(yaw_command(&Vec3::x(), 0.0, 1.0, 0.0, &mut st, 0.02), 0.0);
        let mut st = YawState::default();
        assert_relative_eq!(yaw_command(&Vec3::y(), 0.0, 1.0, 0.0, &mut st, 0.02), PI / 2.0, epsilon = 1e-12);
        let d = PI / 180.0;
        let o = Vec3::new((179.0 * d).cos(), (179.0 * d).sin(), 0.0);
        let mut st = YawState::default();
        // shortest turn from -179 to 179 deg is 2 deg clockwise
        assert_relative_eq!(yaw_command(&o, -179.0 * d, 1.0, 0.0, &mut st, 0.02), -2.0 * d, epsilon = 1e-9);
        // vertical line of sight keeps the previous output
        st.r_prev = 0.3;
        assert_eq!(yaw_command(&Vec3::z(), 0.0, 1.0, 0.0, &mut st, 0.02), 0.3);
    }

    #[test]
    fn yaw_error_decreases_monotonically_under_kp() {
        let o = Vec3::new(-1.0, 0.3, 0.0);
        let (kp, dt) = (2.0, 0.05);
        let mut yaw = 0.0;
        let mut st = YawState::default();
        let mut last = f64::INFINITY;
        for _ in 0..300 {
            let r = yaw_command(&o, yaw, kp, 0.0, &mut st, dt);
            let e = st.e_prev.unwrap().abs();
            assert!(e <= last);
            last = e;
            yaw = wrap_angle(yaw + r * dt);
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn nearest_balloon_is_picked_regardless_of_order() {
        let f = 1000.0;
        let a = obs_at(100.0, 100.0, f * 0.15 / 6.0);
        let b = obs_at(500.0, 100.0, f * 0.15 / 3.0);
        assert_eq!(nearest_balloon(&[a, b], 0.15, f), Some(1));
        assert_eq!(nearest_balloon(&[b, a], 0.15, f), Some(0));
        assert_eq!(nearest_balloon(&[], 0.15, f), None);
        let g = balloon_command(
            &[a, b],
            0.15,
            &level(),
            &cam(),
            &RotationMatrix::forward_camera(),
            1.5,
            1.0,
            &mut YawState::default(),
            0.02,
        );
        assert_relative_eq!(g.command.v_des.norm(), 1.5, epsilon = 1e-12);
    }

    /// Straight-line target, camera at the body origin; the command must stay
    /// parallel to the true camera-to-ball line of sight.
    #[test]
    fn closed_loop_pursuit_stays_on_line_of_sight() {
        let c = CameraIntrinsics::new(900.0, 1e6, 1e6).unwrap();
        let c2b = RotationMatrix::forward_camera();
        let p = GrabParams { v_t: 2.0, v_excess: 0.5, kp_yaw: 2.0, kd_yaw: 0.0 };
        let mut uav = VehicleState::at(Vec3::zeros(), 0.0);
        let mut ball = Vec3::new(15.0, 4.0, 1.0);
        let vb = Vec3::new(0.0, 2.0, 0.0);
        let dt = 0.02;
        let mut yaw = YawState::default();
        for k in 0..2000 {
            let rel = ball - uav.position;
            if rel.norm() < 0.1 {
                assert!(k > 10);
                return;
            }
            let pc = uav.body_to_world().compose(&c2b).transpose().apply(&rel);
            let o = project(&pc, 0.05, &c, k as f64 * dt).unwrap().in_view().unwrap();
            let g = grab_command(Some(&o), &uav, &p, &c, &c2b, &mut yaw, dt);
            let cos = g.command.v_des.normalize().dot(&rel.normalize());
            assert!((1.0 - cos).abs() < 1e-9);
            uav.position += g.command.v_des * dt;
            uav.yaw = wrap_angle(uav.yaw + g.command.r_des * dt);
            ball += vb * dt;
        }
        panic!("no interception");
    }

    proptest! {
        #[test]
        fn grab_speed_is_constant_and_ignores_size(
            tx in 0.0f64..640.0, ty in 0.0f64..480.0, r1 in 0.1f64..300.0, r2 in 0.1f64..300.0,
            yaw in -3.0f64..3.0, vt in 0.0f64..4.0, vx in 0.1f64..2.0
        ) {
            let p = GrabParams { v_t: vt, v_excess: vx, ..GrabParams::default() };
            let s = VehicleState::at(Vec3::zeros(), yaw);
            let c2b = RotationMatrix::forward_camera();
            let g1 = grab_command(Some(&obs_at(tx, ty, r1)), &s, &p, &cam(), &c2b, &mut YawState::default(), 0.02);
            let g2 = grab_command(Some(&obs_at(tx, ty, r2)), &s, &p, &cam(), &c2b, &mut YawState::default(), 0.02);
            prop_assert_eq!(g1.command, g2.command);
            prop_assert!((g1.command.v_des.norm() - (vt + vx).min(SPEED_CAP)).abs() < 1e-9);
        }

        #[test]
        fn tracking_speed_respects_cap(r in 0.05f64..200.0, tx in 0.0f64..640.0) {
            let p = TrackingParams { k_pot: 50.0, ..TrackingParams::default() };
            let g = track_command(Some(&obs_at(tx, 240.0, r)), &level(), &p, 0.05, &cam(), &RotationMatrix::forward_camera(), &mut YawState::default(), 0.02);
            prop_assert!(g.command.v_des.norm() <= SPEED_CAP + 1e-9);
        }
    }
}
