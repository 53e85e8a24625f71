//! Onboard logic of one UAV: per-task behaviour, ball validation, path
//! estimation and the safety filter in front of the controller.

use nalgebra::Vector2;
use std::collections::{BTreeSet, VecDeque};

use super::config::{AgentConfig, ScenarioConfig};
use crate::control::{sac_step, ReferenceModel};
use crate::estimation::{ekf_step_position, fit_curve, predict_ahead, standoff_point, EkfState};
use crate::geometry::{depth_from_size, wrap_angle, CameraPose, PixelObservation, RotationMatrix, Vec3, VehicleState};
use crate::guidance::{grab_command, track_command, yaw_command, GrabParams, GuidanceCommand, YawState};
use crate::oms::{
    blend_commands, exploration_waypoints, goto_velocity, AgentId, AgentSnapshot, AvoidanceIntegrator, BalloonInput,
    BalloonMission, Directive, EventReport, ExploreKind, ExploreParams, ExplorePlan, MissionEvent, MissionEventKind,
    Role, TaskKind,
};
use crate::safety::{avoidance_accel, fence_repulsion, in_collision_cone, relative_kinematics_raw, FenceHull};
use crate::sim::Detections;
use crate::vision::{
    grab_region, score, wedge_region, BoxTracker, ContourStats, TrackerConfig, BALLOON_CIRCULARITY_MIN,
};

/// Below this height the floor face of the fence is ignored.
const LAND_REPORTS: u8 = 3;
const GROUND_ZONE_M: f64 = 1.0;
const LANDED_M: f64 = 0.05;
/// Period for re-sending an unanswered event.
const RESEND_S: f64 = 1.0;
/// Ticks between path samples.
const SAMPLE_EVERY: u32 = 5;
/// Extra miss distance kept when stripping the closing part of the mission velocity.
const PROJECTION_MARGIN_M: f64 = 0.5;

/// Shared, read-only inputs for one tick.
pub struct Ctx<'a> {
    pub cfg: &'a ScenarioConfig,
    pub hull: &'a FenceHull,
    /// Same fence without the floor, for take-off and landing.
    pub open_hull: &'a FenceHull,
    pub t: f64,
}

/// One frame of what the vehicle knows about itself.
pub struct Sensed<'a> {
    pub state: &'a VehicleState,
    pub pose: &'a CameraPose,
    pub det: &'a Detections,
    /// Load-cell reading at the effector.
    pub payload_kg: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentOutput {
    pub command: GuidanceCommand,
    pub events: Vec<EventReport>,
    pub ball_visible: bool,
    pub ball_depth_m: Option<f64>,
    /// Fence response flagged the vehicle outside.
    pub breach: bool,
}

/// Gate for ball candidates: box tracker on the carrier, wedge below it, then
/// a small square around the prediction once locked.
struct BallEyes {
    tracker: BoxTracker,
    last: Option<PixelObservation>,
    prev: Option<PixelObservation>,
    streak: u32,
    missing: u32,
}

impl BallEyes {
    fn new(cfg: &ScenarioConfig) -> Self {
        Self {
            tracker: BoxTracker::new(TrackerConfig::with_image_diagonal(cfg.world.camera.diagonal_px())),
            last: None,
            prev: None,
            streak: 0,
            missing: u32::MAX / 2,
        }
    }

    fn predicted(&self) -> Option<(f64, f64, f64)> {
        let l = self.last?;
        let (dx, dy) = match self.prev {
            Some(p) => (l.t_x - p.t_x, l.t_y - p.t_y),
            None => (0.0, 0.0),
        };
        let k = (self.missing + 1) as f64;
        Some((l.t_x + dx * k, l.t_y + dy * k, l.apparent_radius))
    }

    fn observe(&mut self, det: &Detections, cfg: &ScenarioConfig) -> Option<PixelObservation> {
        let boxes: Vec<_> = det.target_box.into_iter().collect();
        self.tracker.step(&boxes);
        let cam = &cfg.world.camera;
        let search = &cfg.guidance.ball_search;
        let locked = self.missing < cfg.guidance.lost_debounce_frames;
        let valid = det.ball.and_then(|b| {
            let (x, y) = (b.obs.t_x, b.obs.t_y);
            let in_square =
                locked && self.predicted().is_some_and(|(px, py, r)| grab_region((px, py), r).contains(x, y));
            if in_square {
                return Some(b.obs);
            }
            let depth = depth_from_size(b.obs.apparent_radius, search.ball_radius_m, cam.focal_px).ok()?;
            let in_wedge = self
                .tracker
                .confirmed()
                .any(|tr| wedge_region(tr, depth, b.obs.apparent_radius, search, cam).is_ok_and(|w| w.contains(x, y)));
            (in_wedge && score(&b.blob, search) >= BALLOON_CIRCULARITY_MIN).then_some(b.obs)
        });
        match valid {
            Some(o) => {
                self.prev = if self.missing == 0 { self.last } else { None };
                self.last = Some(o);
                self.streak += 1;
                self.missing = 0;
            }
            None => {
                self.streak = 0;
                self.missing = self.missing.saturating_add(1);
            }
        }
        valid
    }
}

/// Ball positions from the tracker's camera, filtered and decimated, plus the
/// path fit once enough of the loop has been seen.
struct PathEstimator {
    ekf: Option<EkfState>,
    samples: Vec<Vec3>,
    /// Time of each sample.
    times: Vec<f64>,
    tick: u32,
    started: Option<f64>,
    last_fit_t: f64,
    reported: Option<Vec3>,
}

impl PathEstimator {
    fn new() -> Self {
        Self {
            ekf: None,
            samples: Vec::new(),
            times: Vec::new(),
            tick: 0,
            started: None,
            last_fit_t: f64::NEG_INFINITY,
            reported: None,
        }
    }

    fn feed(&mut self, p: &Vec3, t: f64, dt: f64) {
        let z = Vector2::new(p.x, p.y);
        let s = match self.ekf {
            // random-walk model: smooths without assuming the turn geometry
            None => EkfState::new(z, z, 0.0).with_noise(0.01, 0.06),
            Some(s) => ekf_step_position(&s, &z, dt).unwrap_or(s),
        };
        self.ekf = Some(s);
        self.started.get_or_insert(t);
        self.tick += 1;
        if self.tick.is_multiple_of(SAMPLE_EVERY) {
            self.samples.push(Vec3::new(s.t_hat.x, s.t_hat.y, p.z));
            self.times.push(t);
        }
    }

    fn speed(&self) -> Option<f64> {
        let n = 20.min(self.samples.len());
        let pr = predict_ahead(&self.samples, n, 10).ok()?;
        let dt = (self.times[self.times.len() - 1] - self.times[self.times.len() - n]) / (n - 1) as f64;
        (dt > 0.0).then(|| pr.delta.0.hypot(pr.delta.1) / (10.0 * dt))
    }

    /// A new stand-off point when the fit is good and it moved noticeably.
    fn try_fit(&mut self, t: f64, ctx: &Ctx, offset_body: &Vec3) -> Option<(Vec3, f64, Option<f64>)> {
        let g = &ctx.cfg.guidance;
        let started = self.started?;
        if t - started < g.fit_after_s || t - self.last_fit_t < g.fit_every_s {
            return None;
        }
        self.last_fit_t = t;
        let fit = fit_curve(&self.samples).ok()?;
        if fit.residual_rms > g.fit_max_rms_m {
            return None;
        }
        let (q, heading) = standoff_point(&fit, ctx.hull, &g.standoff).ok()?;
        // keep the whole airframe inside as well as the effector
        let body = q - RotationMatrix::yaw(heading).apply(offset_body);
        if ctx.hull.signed_distance(&body) > -g.standoff.fence_margin_m {
            return None;
        }
        if self.reported.is_some_and(|r| (r - q).norm() < 2.0) {
            return None;
        }
        self.reported = Some(q);
        Some((q, heading, self.speed()))
    }
}

pub struct Agent {
    pub id: AgentId,
    pub name: String,
    pub role: Role,
    pub pad: Vec3,
    pub altitude_m: f64,
    pub task: Option<TaskKind>,
    pub directive: Option<Directive>,
    pub landed: bool,
    land_reports: u8,
    lane_y_m: f64,
    offset_body: Vec3,
    yaw: YawState,
    reference: ReferenceModel,
    avoid: AvoidanceIntegrator,
    neighbours: Vec<Option<AgentSnapshot>>,
    eyes: BallEyes,
    est: PathEstimator,
    ball_plan: Option<ExplorePlan>,
    ball_wp: usize,
    balloons: Option<BalloonMission>,
    grab_min_depth: f64,
    depths: VecDeque<f64>,
    last_seen_world: Option<(Vec3, f64)>,
    raised: BTreeSet<MissionEventKind>,
    last_sent: f64,
}

impl Agent {
    pub fn new(id: AgentId, ac: &AgentConfig, cfg: &ScenarioConfig, n_agents: usize) -> Self {
        let reference = ReferenceModel { state: [0.0; 4], ..cfg.control.reference };
        Self {
            id,
            name: ac.name.clone(),
            role: ac.role,
            pad: ac.pad.unwrap_or(ac.start),
            altitude_m: ac.altitude_m,
            task: None,
            directive: None,
            landed: false,
            land_reports: 0,
            lane_y_m: ac.lane_y_m,
            offset_body: cfg.world.effector_offset_body,
            yaw: YawState::default(),
            reference,
            avoid: AvoidanceIntegrator { v: Vec3::zeros(), tau_s: cfg.safety.avoidance_tau_s },
            neighbours: vec![None; n_agents],
            eyes: BallEyes::new(cfg),
            est: PathEstimator::new(),
            ball_plan: None,
            ball_wp: 0,
            balloons: None,
            grab_min_depth: f64::INFINITY,
            depths: VecDeque::new(),
            last_seen_world: None,
            raised: BTreeSet::new(),
            last_sent: f64::NEG_INFINITY,
        }
    }

    pub fn apply(&mut self, d: &Directive) {
        if self.directive.as_ref() == Some(d) {
            return;
        }
        if self.task != Some(d.task) {
            self.raised.clear();
            self.yaw = YawState::default();
            self.grab_min_depth = f64::INFINITY;
            self.depths.clear();
            if d.task != TaskKind::Land {
                self.landed = false;
            }
        }
        self.task = Some(d.task);
        self.directive = Some(*d);
    }

    pub fn observe_neighbour(&mut self, other: AgentId, s: AgentSnapshot) {
        if other != self.id && other < self.neighbours.len() {
            self.neighbours[other] = Some(s);
        }
    }

    pub fn forget_neighbour(&mut self, other: AgentId) {
        if other < self.neighbours.len() {
            self.neighbours[other] = None;
        }
    }

    pub fn snapshot(&self, s: &VehicleState) -> AgentSnapshot {
        AgentSnapshot {
            position: s.position,
            velocity: s.velocity,
            yaw: s.yaw,
            task: self.task.unwrap_or(TaskKind::Takeoff),
        }
    }

    fn raise(&mut self, out: &mut Vec<EventReport>, kind: MissionEventKind, t: f64) {
        self.raise_with(out, EventReport::plain(MissionEvent::new(kind, self.id, t)), t);
    }

    /// Sends once, then again every `RESEND_S` until the task changes.
    fn raise_with(&mut self, out: &mut Vec<EventReport>, r: EventReport, t: f64) {
        let kind = r.event.kind;
        if self.raised.insert(kind) || t - self.last_sent >= RESEND_S {
            self.last_sent = t;
            out.push(r);
        }
    }

    fn body_goal_for_effector(&self, effector: &Vec3, heading: f64) -> Vec3 {
        effector - RotationMatrix::yaw(heading).apply(&self.offset_body)
    }

    fn face(&mut self, dir: &Vec3, s: &VehicleState, kp: f64, dt: f64) -> f64 {
        yaw_command(dir, s.yaw, kp, 0.0, &mut self.yaw, dt)
    }

    fn ball_world(&self, obs: &PixelObservation, pose: &CameraPose, cfg: &ScenarioConfig) -> Option<Vec3> {
        let blob = ContourStats::disc((obs.t_x, obs.t_y), obs.apparent_radius, 0.0);
        crate::vision::balloon_position(&blob, cfg.guidance.ball_search.ball_radius_m, &cfg.world.camera, pose).ok()
    }

    /// Mission command for the active task, before the safety layer.
    fn mission_command(&mut self, ctx: &Ctx, x: &Sensed, out: &mut AgentOutput) -> GuidanceCommand {
        let cfg = ctx.cfg;
        let g = &cfg.guidance;
        let dt = cfg.world.dt;
        let t = ctx.t;
        let s = x.state;
        let cam = &cfg.world.camera;
        let c2b = x.pose.c2b;
        let ball = self.eyes.observe(x.det, cfg);
        let depth =
            ball.and_then(|o| depth_from_size(o.apparent_radius, g.ball_search.ball_radius_m, cam.focal_px).ok());
        out.ball_visible = ball.is_some();
        out.ball_depth_m = depth;
        if let Some(o) = &ball {
            if let Some(p) = self.ball_world(o, x.pose, cfg) {
                self.last_seen_world = Some((p, t));
            }
        }
        let Some(task) = self.task else {
            return GuidanceCommand::hold();
        };
        let cruise = g.cruise_mps;
        match task {
            TaskKind::Takeoff => {
                let goal = Vec3::new(s.position.x, s.position.y, self.altitude_m);
                if (s.position.z - self.altitude_m).abs() < 0.2 {
                    self.raise(&mut out.events, MissionEventKind::TaskDone, t);
                }
                GuidanceCommand { v_des: goto_velocity(&s.position, &goal, g.climb_mps), r_des: 0.0 }
            }
            TaskKind::ExploreBall => {
                if self.eyes.streak >= g.detect_frames {
                    self.raise(&mut out.events, MissionEventKind::BallDetected, t);
                }
                let plan = match &self.ball_plan {
                    Some(p) => p.clone(),
                    None => {
                        let params = ExploreParams {
                            altitude_m: self.altitude_m,
                            lane_y_m: self.lane_y_m,
                            ..ExploreParams::default()
                        };
                        match exploration_waypoints(ExploreKind::Ball, ctx.hull, &params) {
                            Ok(p) => {
                                self.ball_plan = Some(p.clone());
                                p
                            }
                            Err(e) => {
                                log::warn!("{}: no ball search lane: {e}", self.name);
                                return GuidanceCommand::hold();
                            }
                        }
                    }
                };
                let n = plan.waypoints.len();
                if (plan.waypoints[self.ball_wp % n] - s.position).norm() < 1.0 {
                    self.ball_wp = (self.ball_wp + 1) % n;
                }
                let wp = self.ball_wp % n;
                let goal = plan.waypoints[wp];
                let dir = match (ball, plan.headings[wp]) {
                    (Some(o), _) => crate::guidance::los_world(&o, s, cam, &c2b),
                    (None, Some(h)) => Vec3::new(h.cos(), h.sin(), 0.0),
                    (None, None) => goal - s.position,
                };
                let r = self.face(&dir, s, g.tracking.kp_yaw, dt);
                GuidanceCommand { v_des: goto_velocity(&s.position, &goal, cruise), r_des: r }
            }
            TaskKind::Track => {
                if let Some(o) = &ball {
                    if let Some(p) = self.ball_world(o, x.pose, cfg) {
                        self.est.feed(&p, t, dt);
                    }
                    if let Some((q, h, v)) = self.est.try_fit(t, ctx, &self.offset_body) {
                        let mut r = EventReport::plain(MissionEvent::new(MissionEventKind::PathEstimated, self.id, t));
                        r.point = Some(q);
                        r.heading = Some(h);
                        r.speed = v;
                        self.raised.remove(&MissionEventKind::PathEstimated);
                        self.raise_with(&mut out.events, r, t);
                    }
                    self.raised.remove(&MissionEventKind::BallLost);
                    let guided = track_command(
                        Some(o),
                        s,
                        &g.tracking,
                        g.ball_search.ball_radius_m,
                        cam,
                        &c2b,
                        &mut self.yaw,
                        dt,
                    );
                    return guided.command;
                }
                if self.eyes.last.is_some() && self.eyes.missing >= g.lost_debounce_frames {
                    self.raise(&mut out.events, MissionEventKind::BallLost, t);
                }
                self.search(s, t, cruise, dt, cfg)
            }
            TaskKind::GrabStandby => {
                let d = self.directive.unwrap_or_else(|| Directive::new(self.id, task));
                let heading = d.heading.unwrap_or(s.yaw);
                let goal = match d.point {
                    Some(p) if d.on_path => self.body_goal_for_effector(&p, heading),
                    Some(p) => p,
                    None => s.position,
                };
                if let (Some(dep), true) = (depth, d.on_path) {
                    self.depths.push_back(dep);
                    if self.depths.len() > 25 {
                        self.depths.pop_front();
                    }
                    let closing = self.depths.len() == 25 && self.depths[0] - dep > 0.5;
                    // only the sweep that comes straight at the waiting point
                    let aligned = ball.is_some_and(|o| {
                        let los = crate::guidance::los_world(&o, s, cam, &c2b);
                        wrap_angle(los.y.atan2(los.x) - heading).abs() <= g.grab_cone_deg.to_radians()
                    });
                    let settled = (goal - s.position).norm() <= g.settle_radius_m;
                    if dep <= g.grab_trigger_m && closing && aligned && settled && self.eyes.streak >= g.detect_frames {
                        self.raise(&mut out.events, MissionEventKind::BallDetected, t);
                    }
                } else {
                    self.depths.clear();
                }
                let dir = match (ball, d.heading) {
                    (Some(o), _) => crate::guidance::los_world(&o, s, cam, &c2b),
                    (None, Some(h)) => Vec3::new(h.cos(), h.sin(), 0.0),
                    (None, None) => ctx.hull.centroid() - s.position,
                };
                let r = self.face(&dir, s, g.tracking.kp_yaw, dt);
                GuidanceCommand { v_des: goto_velocity(&s.position, &goal, cruise), r_des: r }
            }
            TaskKind::Grab => {
                if x.payload_kg > 0.0 {
                    if let Ok(ev) = MissionEvent::grab_success(self.id, x.payload_kg, t) {
                        self.raise_with(&mut out.events, EventReport::plain(ev), t);
                    }
                    return GuidanceCommand::hold();
                }
                let v_t = self.directive.and_then(|d| d.target_speed).unwrap_or(g.grab.v_t);
                let params = GrabParams { v_t, ..g.grab };
                if let Some(dep) = depth {
                    self.grab_min_depth = self.grab_min_depth.min(dep);
                    if dep > self.grab_min_depth + g.grab_abort_margin_m {
                        self.raise(&mut out.events, MissionEventKind::GrabFailed, t);
                    }
                }
                if ball.is_none() && self.eyes.missing >= g.lost_debounce_frames {
                    self.raise(&mut out.events, MissionEventKind::GrabFailed, t);
                    return self.search(s, t, cruise, dt, cfg);
                }
                let guided = grab_command(ball.as_ref(), s, &params, cam, &c2b, &mut self.yaw, dt);
                match ball {
                    Some(_) => guided.command,
                    // brief dropout: keep the last heading and speed
                    None => GuidanceCommand { v_des: s.velocity, r_des: 0.0 },
                }
            }
            TaskKind::Land => {
                let above = Vec3::new(self.pad.x, self.pad.y, s.position.z);
                let horizontal = (above - s.position).norm();
                if self.landed || s.position.z < LANDED_M && horizontal < 0.5 {
                    if !self.landed {
                        self.landed = true;
                        self.land_reports = 0;
                    }
                    // a few repeats cover a lossy link, then stay quiet on the pad
                    if self.land_reports < LAND_REPORTS {
                        let before = out.events.len();
                        self.raise(&mut out.events, MissionEventKind::TaskDone, t);
                        self.land_reports += u8::from(out.events.len() > before);
                    }
                    return GuidanceCommand::hold();
                }
                if horizontal > 0.3 {
                    GuidanceCommand { v_des: goto_velocity(&s.position, &above, cruise), r_des: 0.0 }
                } else {
                    let vz = g.descend_mps.min(0.5 + s.position.z);
                    let mut v = goto_velocity(&s.position, &above, 1.0);
                    v.z = -vz;
                    GuidanceCommand { v_des: v, r_des: 0.0 }
                }
            }
            TaskKind::ExploreBalloon | TaskKind::Pop => {
                let bm = match &mut self.balloons {
                    Some(b) => b,
                    None => {
                        let params = ExploreParams { altitude_m: self.altitude_m, ..ExploreParams::default() };
                        match exploration_waypoints(ExploreKind::Balloon, ctx.hull, &params) {
                            Ok(plan) => self.balloons.insert(BalloonMission::new(cfg.balloon_mission, plan)),
                            Err(e) => {
                                log::warn!("{}: no balloon search pattern: {e}", self.name);
                                return GuidanceCommand::hold();
                            }
                        }
                    }
                };
                let sightings: Vec<PixelObservation> = x.det.balloons.iter().map(|(_, o)| *o).collect();
                let inp = BalloonInput { state: s, pose: x.pose, cam, sightings: &sightings, dt };
                let (cmd, kinds) = bm.step(&inp);
                for k in kinds {
                    self.raised.remove(&k);
                    self.raise(&mut out.events, k, t);
                }
                cmd
            }
            TaskKind::Restart | TaskKind::CollisionAvoidance | TaskKind::Geofence => GuidanceCommand::hold(),
        }
    }

    /// Heads for where the ball was last seen, extrapolated with the recent
    /// path samples.
    fn search(&mut self, s: &VehicleState, t: f64, speed: f64, dt: f64, cfg: &ScenarioConfig) -> GuidanceCommand {
        let Some((p, seen)) = self.last_seen_world else {
            return GuidanceCommand::hold();
        };
        let ahead = ((t - seen) / (SAMPLE_EVERY as f64 * dt)).round().max(1.0) as usize;
        let n = 20.min(self.est.samples.len());
        let goal = if n >= 2 { predict_ahead(&self.est.samples, n, ahead).map(|pr| pr.point).unwrap_or(p) } else { p };
        let to = goal - s.position;
        let keep = cfg.guidance.tracking.d_track;
        let v = if to.norm() > keep {
            goto_velocity(&s.position, &(goal - to.normalize() * keep), speed)
        } else {
            Vec3::zeros()
        };
        let r = self.face(&to, s, cfg.guidance.tracking.kp_yaw, dt);
        GuidanceCommand { v_des: v, r_des: r }
    }

    /// Fence repulsion and collision-cone avoidance on top of `mission`, then
    /// the reference-model controller. Returns the autopilot command and
    /// whether the vehicle is outside the fence.
    pub fn safe_command(&mut self, ctx: &Ctx, s: &VehicleState, mission: &GuidanceCommand) -> (GuidanceCommand, bool) {
        let sc = &ctx.cfg.safety;
        let dt = ctx.cfg.world.dt;
        let ground = matches!(self.task, Some(TaskKind::Takeoff | TaskKind::Land)) || s.position.z < GROUND_ZONE_M;
        let hull = if ground { ctx.open_hull } else { ctx.hull };
        let fence = fence_repulsion(&s.position, hull, sc.fence.activation_m, sc.fence.gain);
        let my_rank = self.task.map_or(0, TaskKind::avoidance_rank);
        let mut mission_v = mission.v_des;
        let mut accels = Vec::new();
        // the accumulated correction only bleeds off once every conflict is out of range
        let mut engaged = false;
        for nb in self.neighbours.iter().flatten() {
            let prio = my_rank.cmp(&nb.task.avoidance_rank());
            let Ok(k) = relative_kinematics_raw(&s.position, &s.velocity, &nb.position, &nb.velocity) else {
                continue;
            };
            accels.push(avoidance_accel(&k, prio, &sc.avoidance));
            engaged |= prio != std::cmp::Ordering::Greater && k.r0 < sc.avoidance.d_act;
            // safety outranks the mission: a yielding vehicle drops the part of
            // its mission velocity that would close on the other one
            if prio != std::cmp::Ordering::Greater && k.r0 < sc.avoidance.d_act {
                if let Ok(km) = relative_kinematics_raw(&s.position, &mission_v, &nb.position, &nb.velocity) {
                    let closing = mission_v.dot(&k.los);
                    if closing > 0.0 && in_collision_cone(&km, sc.avoidance.r_safe + PROJECTION_MARGIN_M) {
                        mission_v -= k.los * closing;
                    }
                }
            }
        }
        let carried = if engaged { self.avoid.v } else { self.avoid.v * (-dt / self.avoid.tau_s).exp() };
        let base = GuidanceCommand { v_des: mission_v + fence.velocity + carried, r_des: mission.r_des };
        let blended = blend_commands(&base, &accels, dt);
        if engaged {
            self.avoid.hold(&accels, dt);
        } else {
            self.avoid.update(&accels, dt);
        }
        let out = sac_step(&blended, s, &mut self.reference, &ctx.cfg.control.gains, dt);
        (out, fence.breach)
    }

    pub fn step(&mut self, ctx: &Ctx, x: &Sensed) -> AgentOutput {
        let mut out = AgentOutput {
            command: GuidanceCommand::hold(),
            events: Vec::new(),
            ball_visible: false,
            ball_depth_m: None,
            breach: false,
        };
        let mission = self.mission_command(ctx, x, &mut out);
        if self.landed {
            self.reference.state = [0.0; 4];
            self.avoid.v = Vec3::zeros();
            out.command = GuidanceCommand { v_des: Vec3::new(0.0, 0.0, -0.2), r_des: 0.0 };
            return out;
        }
        let (cmd, breach) = self.safe_command(ctx, x.state, &mission);
        out.command = cmd;
        out.breach = breach;
        out
    }
}
