//! Balloon popping state machine: explore, approach, confirm, done.

use serde::{Deserialize, Serialize};

use super::{ExplorePlan, MissionEventKind};
use crate::geometry::{CameraIntrinsics, CameraPose, PixelObservation, Vec3, VehicleState};
use crate::guidance::{balloon_command, yaw_command, GuidanceCommand, YawState};
use crate::vision::{balloon_position, ContourStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalloonPhase {
    Explore,
    Approach,
    Confirm,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BalloonMissionParams {
    /// Empty frames needed to leave approach and to confirm a pop.
    pub k_frames: u32,
    pub target_count: u32,
    pub max_empty_rounds: u32,
    pub v_explore_mps: f64,
    pub v_approach_mps: f64,
    /// How far past the balloon to keep flying once it drops out of view.
    pub overshoot_m: f64,
    /// A sighting within this distance of the estimate is the same balloon.
    pub match_radius_m: f64,
    pub arrive_tol_m: f64,
    pub kp_yaw: f64,
    pub balloon_radius_m: f64,
}

impl Default for BalloonMissionParams {
    fn default() -> Self {
        Self {
            k_frames: 10,
            target_count: 5,
            max_empty_rounds: 2,
            v_explore_mps: 3.0,
            v_approach_mps: 1.5,
            overshoot_m: 2.0,
            match_radius_m: 1.5,
            arrive_tol_m: 0.5,
            kp_yaw: 1.5,
            balloon_radius_m: 0.15,
        }
    }
}

/// Inputs for one tick.
pub struct BalloonInput<'a> {
    pub state: &'a VehicleState,
    /// Camera at the end-effector.
    pub pose: &'a CameraPose,
    pub cam: &'a CameraIntrinsics,
    pub sightings: &'a [PixelObservation],
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalloonMission {
    pub params: BalloonMissionParams,
    pub phase: BalloonPhase,
    pub plan: ExplorePlan,
    pub wp: usize,
    pub p_reg: Option<Vec3>,
    pub p_balloon: Option<Vec3>,
    pub count: u32,
    pub empty_rounds: u32,
    detected_this_round: bool,
    frames_without: u32,
    seen_negative: bool,
    confirm_empty: u32,
    done_reported: bool,
    #[serde(skip)]
    yaw: YawState,
}

/// Velocity toward `goal` at up to `speed`, slowing inside the last metre.
pub fn goto_velocity(from: &Vec3, goal: &Vec3, speed: f64) -> Vec3 {
    let d = goal - from;
    let n = d.norm();
    if n < 1e-9 {
        return Vec3::zeros();
    }
    d * (speed.min(n) / n)
}

fn heading_to(d: &Vec3) -> Vec3 {
    Vec3::new(d.x, d.y, 0.0)
}

impl BalloonMission {
    pub fn new(params: BalloonMissionParams, plan: ExplorePlan) -> Self {
        Self {
            params,
            phase: BalloonPhase::Explore,
            plan,
            wp: 0,
            p_reg: None,
            p_balloon: None,
            count: 0,
            empty_rounds: 0,
            detected_this_round: false,
            frames_without: 0,
            seen_negative: false,
            confirm_empty: 0,
            done_reported: false,
            yaw: YawState::default(),
        }
    }

    fn estimates(&self, inp: &BalloonInput) -> Vec<(PixelObservation, Vec3)> {
        inp.sightings
            .iter()
            .filter_map(|o| {
                let blob = ContourStats::disc((o.t_x, o.t_y), o.apparent_radius, 0.0);
                balloon_position(&blob, self.params.balloon_radius_m, inp.cam, inp.pose).ok().map(|p| (*o, p))
            })
            .collect()
    }

    /// The sighting that matches the current balloon estimate, if any.
    fn matching(&self, est: &[(PixelObservation, Vec3)], eff: &Vec3) -> Option<(PixelObservation, Vec3)> {
        let pb = self.p_balloon?;
        let gate = self.params.match_radius_m.max(0.1 * (pb - eff).norm());
        est.iter()
            .filter(|(_, p)| (p - pb).norm() <= gate)
            .min_by(|a, b| (a.1 - pb).norm().total_cmp(&(b.1 - pb).norm()))
            .copied()
    }

    fn start_approach(&mut self, eff: Vec3, p_b: Vec3) {
        self.phase = BalloonPhase::Approach;
        self.p_reg = Some(eff);
        self.p_balloon = Some(p_b);
        self.frames_without = 0;
        self.seen_negative = false;
        self.yaw = YawState::default();
    }

    pub fn step(&mut self, inp: &BalloonInput) -> (GuidanceCommand, Vec<MissionEventKind>) {
        let mut events = Vec::new();
        let eff = inp.pose.position;
        let est = self.estimates(inp);
        let p = self.params;
        let cmd = match self.phase {
            BalloonPhase::Explore => {
                let nearest = est.iter().min_by(|a, b| (a.1 - eff).norm().total_cmp(&(b.1 - eff).norm())).copied();
                if let Some((_, pb)) = nearest {
                    self.detected_this_round = true;
                    self.start_approach(eff, pb);
                    events.push(MissionEventKind::BalloonDetected);
                    return self.step_approach(inp, &est, &mut events);
                }
                let goal = self.plan.waypoints[self.wp];
                if (goal - inp.state.position).norm() < 1.0 {
                    self.wp += 1;
                    if self.wp == self.plan.waypoints.len() {
                        self.wp = 0;
                        if !self.detected_this_round {
                            self.empty_rounds += 1;
                        }
                        self.detected_this_round = false;
                        if self.empty_rounds >= p.max_empty_rounds {
                            self.phase = BalloonPhase::Done;
                        }
                    }
                }
                let goal = self.plan.waypoints[self.wp];
                let v = goto_velocity(&inp.state.position, &goal, p.v_explore_mps);
                let look = match self.plan.headings[self.wp] {
                    Some(h) => Vec3::new(h.cos(), h.sin(), 0.0),
                    None => heading_to(&(goal - inp.state.position)),
                };
                let r = yaw_command(&look, inp.state.yaw, p.kp_yaw, 0.0, &mut self.yaw, inp.dt);
                GuidanceCommand { v_des: v, r_des: r }
            }
            BalloonPhase::Approach => return self.step_approach(inp, &est, &mut events),
            BalloonPhase::Confirm => {
                let (Some(reg), Some(pb)) = (self.p_reg, self.p_balloon) else {
                    self.phase = BalloonPhase::Explore;
                    return (GuidanceCommand::hold(), events);
                };
                let look = heading_to(&(pb - eff));
                let r = yaw_command(&look, inp.state.yaw, p.kp_yaw, 0.0, &mut self.yaw, inp.dt);
                let facing = {
                    let want = look.y.atan2(look.x);
                    crate::geometry::wrap_angle(want - inp.state.yaw).abs() < 10f64.to_radians()
                };
                if let Some((_, seen)) = self.matching(&est, &eff) {
                    // still there: go again
                    self.start_approach(eff, seen);
                    return self.step_approach(inp, &est, &mut events);
                }
                if (eff - reg).norm() <= p.arrive_tol_m && facing {
                    self.confirm_empty += 1;
                    if self.confirm_empty >= p.k_frames {
                        self.count += 1;
                        events.push(MissionEventKind::BalloonPopped);
                        self.p_balloon = None;
                        self.phase =
                            if self.count >= p.target_count { BalloonPhase::Done } else { BalloonPhase::Explore };
                    }
                }
                GuidanceCommand { v_des: goto_velocity(&eff, &reg, p.v_explore_mps), r_des: r }
            }
            BalloonPhase::Done => GuidanceCommand::hold(),
        };
        if self.phase == BalloonPhase::Done && !self.done_reported {
            self.done_reported = true;
            events.push(MissionEventKind::ExplorationComplete);
        }
        (cmd, events)
    }

    fn step_approach(
        &mut self,
        inp: &BalloonInput,
        est: &[(PixelObservation, Vec3)],
        events: &mut Vec<MissionEventKind>,
    ) -> (GuidanceCommand, Vec<MissionEventKind>) {
        let p = self.params;
        let eff = inp.pose.position;
        let (Some(reg), Some(_)) = (self.p_reg, self.p_balloon) else {
            self.phase = BalloonPhase::Explore;
            return (GuidanceCommand::hold(), std::mem::take(events));
        };
        let cmd = if let Some((obs, pb)) = self.matching(est, &eff) {
            self.p_balloon = Some(pb);
            self.frames_without = 0;
            balloon_command(
                &[obs],
                p.balloon_radius_m,
                inp.state,
                inp.cam,
                &inp.pose.c2b,
                p.v_approach_mps,
                p.kp_yaw,
                &mut self.yaw,
                inp.dt,
            )
            .command
        } else {
            self.frames_without += 1;
            let pb = self.p_balloon.unwrap_or(reg);
            let dir = heading_to(&(pb - reg));
            let dir = if dir.norm() > 1e-9 { dir.normalize() } else { Vec3::zeros() };
            let goal = pb + dir * p.overshoot_m;
            GuidanceCommand { v_des: goto_velocity(&eff, &goal, p.v_approach_mps), r_des: 0.0 }
        };
        let pb = self.p_balloon.unwrap_or(reg);
        let dot = (reg - eff).dot(&(pb - eff));
        if dot < 0.0 {
            self.seen_negative = true;
        }
        let beyond = self.seen_negative && dot > 0.0;
        if self.frames_without >= p.k_frames && beyond {
            self.phase = BalloonPhase::Confirm;
            self.confirm_empty = 0;
            self.yaw = YawState::default();
        }
        (cmd, std::mem::take(events))
    }
}
