//! Single-behaviour runs used for tuning and acceptance: tracking, tail-chase
//! grab, balloon popping, head-on avoidance and the fence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::TAU;
use std::time::Instant;

use super::agent::{Agent, Ctx, Sensed};
use super::config::{AgentConfig, ScenarioConfig};
use super::run::{Mission, MissionSummary};
use super::telemetry::TraceRow;
use super::MissionError;
use crate::geometry::{wrap_angle, Vec3, VehicleState};
use crate::oms::{goto_velocity, Directive, Role, TaskKind};
use crate::safety::{quickhull3, FenceHull};
use crate::sim::{BallHolder, Effector, SensorNoise, World, WorldConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackReport {
    pub samples: usize,
    /// Share of post-transient ticks within the distance band.
    pub in_band_fraction: f64,
    /// Share of post-transient ticks with the ball within the yaw band.
    pub yaw_fraction: f64,
    pub mean_abs_error_m: f64,
    pub ball_lost_events: usize,
    pub sim_time_s: f64,
    pub runtime_s: f64,
    /// Every tick, kept out of the JSON summary.
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrabReport {
    pub seed: u64,
    pub success: bool,
    pub time_s: Option<f64>,
    pub min_distance_m: f64,
    /// Every tick, kept out of the JSON summary.
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AvoidReport {
    pub lateral_offset_m: f64,
    pub min_distance_m: f64,
    /// Closest approach without avoidance, from the straight tracks.
    pub unavoided_miss_m: f64,
    /// Every tick, kept out of the JSON summary.
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FenceReport {
    pub breaches: u32,
    /// Smallest distance to the fence from inside, m.
    pub min_clearance_m: f64,
    pub final_position: Vec3,
    /// Every tick, kept out of the JSON summary.
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

fn hulls(cfg: &ScenarioConfig) -> Result<(FenceHull, FenceHull), MissionError> {
    let hull = quickhull3(&cfg.arena)?;
    let open = FenceHull {
        vertices: hull.vertices.clone(),
        faces: hull.faces.iter().filter(|f| f.normal.z > -0.9).cloned().collect(),
    };
    Ok((hull, open))
}

fn trace_row(world: &World, distance_m: f64) -> TraceRow {
    let s = world.agents[0].state;
    let to = world.ball_position() - world.effector_position(0);
    TraceRow {
        t: world.t,
        distance_m,
        yaw_offset_deg: wrap_angle(to.y.atan2(to.x) - s.yaw).to_degrees(),
        vx: s.velocity.x,
        vy: s.velocity.y,
        vz: s.velocity.z,
    }
}

fn pair_row(t: f64, states: &[VehicleState], distance_m: f64) -> TraceRow {
    let v = states[0].velocity;
    TraceRow { t, distance_m, yaw_offset_deg: 0.0, vx: v.x, vy: v.y, vz: v.z }
}

/// A grabber placed `behind` metres back along the ball's track, at its height,
/// facing it.
fn chaser_world(wc: WorldConfig, behind: f64) -> World {
    let mut w = World::new(wc, &[(VehicleState::default(), Effector::Net)]);
    let ball = w.target.ball;
    let dir = w.target.velocity.normalize();
    let yaw = dir.y.atan2(dir.x);
    let eff = ball - dir * behind;
    let offset = w.cfg.effector_offset_body;
    let body = eff - crate::geometry::RotationMatrix::yaw(yaw).apply(&offset);
    w.agents[0].state = VehicleState::at(body, yaw);
    w
}

fn step_single(agent: &mut Agent, world: &mut World, ctx: &Ctx) -> super::AgentOutput {
    let det = world.sense(0);
    let sa = world.agents[0];
    let pose = world.camera_pose(0);
    let out = agent.step(ctx, &Sensed { state: &sa.state, pose: &pose, det: &det, payload_kg: sa.payload_kg });
    world.step(&[out.command]);
    out
}

pub fn run_track(cfg: &ScenarioConfig) -> Result<TrackReport, MissionError> {
    let started = Instant::now();
    let sc = &cfg.track;
    let (hull, open) = hulls(cfg)?;
    let wc = WorldConfig { target: sc.target, balloons: Vec::new(), ..cfg.world.clone() };
    let mut world = chaser_world(wc, cfg.guidance.tracking.d_track);
    let mut agent = Agent::new(0, &AgentConfig::default(), cfg, 1);
    agent.apply(&Directive::new(0, TaskKind::Track));
    let d_track = cfg.guidance.tracking.d_track;
    let (mut n, mut band, mut yaw_ok, mut err, mut lost) = (0usize, 0usize, 0usize, 0.0, 0usize);
    let end = (sc.duration_s / cfg.world.dt).round() as u64;
    let mut trace = Vec::with_capacity(end as usize);
    while world.tick < end {
        let ctx = Ctx { cfg, hull: &hull, open_hull: &open, t: world.t };
        let out = step_single(&mut agent, &mut world, &ctx);
        lost += out.events.iter().filter(|e| e.event.kind == crate::oms::MissionEventKind::BallLost).count();
        let d = world.camera_ball_distance(0);
        trace.push(trace_row(&world, d));
        if world.t < sc.transient_s {
            continue;
        }
        let to = world.ball_position() - world.effector_position(0);
        let off = wrap_angle(to.y.atan2(to.x) - world.agents[0].state.yaw);
        n += 1;
        err += (d - d_track).abs();
        band += usize::from((d - d_track).abs() <= sc.band_m);
        yaw_ok += usize::from(off.abs() <= sc.yaw_band_deg.to_radians());
    }
    let nf = n.max(1) as f64;
    Ok(TrackReport {
        samples: n,
        in_band_fraction: band as f64 / nf,
        yaw_fraction: yaw_ok as f64 / nf,
        mean_abs_error_m: err / nf,
        ball_lost_events: lost,
        sim_time_s: world.t,
        runtime_s: started.elapsed().as_secs_f64(),
        trace,
    })
}

/// Tail chase from behind the ball. The seed picks where on the loop the
/// target starts and drives the sensor noise.
pub fn run_grab(cfg: &ScenarioConfig, seed: u64, noisy: bool) -> Result<GrabReport, MissionError> {
    let sc = &cfg.grab;
    let (hull, open) = hulls(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = crate::sim::TargetModel { start_t: rng.random::<f64>() * TAU, ..sc.target };
    let noise = if noisy { cfg.world.noise } else { SensorNoise::noiseless() };
    let wc = WorldConfig { target, noise, seed, balloons: Vec::new(), ..cfg.world.clone() };
    let mut world = chaser_world(wc, sc.start_behind_m);
    let mut agent = Agent::new(0, &AgentConfig::default(), cfg, 1);
    let mut d = Directive::new(0, TaskKind::Grab);
    d.target_speed = Some(sc.interceptor_speed_mps - cfg.guidance.grab.v_excess);
    agent.apply(&d);
    let end = (sc.timeout_s / cfg.world.dt).round() as u64;
    let mut min_d = f64::INFINITY;
    let mut trace = Vec::new();
    while world.tick < end && world.ball_holder == BallHolder::Target {
        let ctx = Ctx { cfg, hull: &hull, open_hull: &open, t: world.t };
        step_single(&mut agent, &mut world, &ctx);
        let d = world.camera_ball_distance(0);
        min_d = min_d.min(d);
        trace.push(trace_row(&world, d));
    }
    let success = world.ball_holder == BallHolder::Agent(0);
    if let Some(last) = trace.last_mut().filter(|_| success) {
        // the ball sits in the basket
        last.distance_m = 0.0;
    }
    Ok(GrabReport { seed, success, time_s: success.then_some(world.t), min_distance_m: min_d, trace })
}

/// The full mission runner with only the poppers.
pub fn run_pop(cfg: &ScenarioConfig) -> Result<MissionSummary, MissionError> {
    let mut c = cfg.clone();
    c.agents.retain(|a| a.role == Role::Popper);
    if c.agents.is_empty() {
        return Err(MissionError::Invalid("no popper in the scenario".into()));
    }
    Ok(Mission::new(c)?.run())
}

/// Two UAVs flying straight at each other along mirrored tracks `offset`
/// apart sideways.
pub fn run_avoid(cfg: &ScenarioConfig, offset: f64) -> Result<AvoidReport, MissionError> {
    let sc = &cfg.avoid;
    let (hull, open) = hulls(cfg)?;
    let c = hull.centroid();
    let half = sc.start_separation_m / 2.0;
    let starts = [
        Vec3::new(c.x - half, c.y - offset / 2.0, sc.altitude_m),
        Vec3::new(c.x + half, c.y + offset / 2.0, sc.altitude_m),
    ];
    let goals = [
        Vec3::new(c.x + half, c.y - offset / 2.0, sc.altitude_m),
        Vec3::new(c.x - half, c.y + offset / 2.0, sc.altitude_m),
    ];
    let mut states = [VehicleState::at(starts[0], 0.0), VehicleState::at(starts[1], std::f64::consts::PI)];
    let mut agents: Vec<Agent> = (0..2).map(|i| Agent::new(i, &AgentConfig::default(), cfg, 2)).collect();
    let dt = cfg.world.dt;
    let mut min_d = f64::INFINITY;
    let end = (sc.duration_s / dt).round() as usize;
    let mut trace = Vec::with_capacity(end);
    for k in 0..end {
        let t = k as f64 * dt;
        let ctx = Ctx { cfg, hull: &hull, open_hull: &open, t };
        let snaps = [agents[0].snapshot(&states[0]), agents[1].snapshot(&states[1])];
        let mut cmds = Vec::with_capacity(2);
        for i in 0..2 {
            agents[i].observe_neighbour(1 - i, snaps[1 - i]);
            let mission = crate::guidance::GuidanceCommand {
                v_des: goto_velocity(&states[i].position, &goals[i], sc.speed_mps),
                r_des: 0.0,
            };
            cmds.push(agents[i].safe_command(&ctx, &states[i], &mission).0);
        }
        for i in 0..2 {
            states[i] = crate::sim::plant_step(&states[i], &cmds[i], &cfg.world.plant, dt);
        }
        let d = (states[0].position - states[1].position).norm();
        min_d = min_d.min(d);
        trace.push(pair_row((k + 1) as f64 * dt, &states, d));
    }
    Ok(AvoidReport { lateral_offset_m: offset, min_distance_m: min_d, unavoided_miss_m: offset.abs(), trace })
}

/// One UAV commanded at a constant velocity that would take it through the fence.
pub fn run_fence(cfg: &ScenarioConfig) -> Result<FenceReport, MissionError> {
    let sc = &cfg.fence;
    let (hull, open) = hulls(cfg)?;
    let mut s = VehicleState::at(sc.start, 0.0);
    let mut agent = Agent::new(0, &AgentConfig::default(), cfg, 1);
    agent.apply(&Directive::new(0, TaskKind::GrabStandby));
    let dt = cfg.world.dt;
    let (mut breaches, mut inside, mut min_c) = (0u32, true, f64::INFINITY);
    let end = (sc.duration_s / dt).round() as usize;
    let mut trace = Vec::with_capacity(end);
    for k in 0..end {
        let ctx = Ctx { cfg, hull: &hull, open_hull: &open, t: k as f64 * dt };
        let mission = crate::guidance::GuidanceCommand { v_des: sc.velocity, r_des: 0.0 };
        let (cmd, _) = agent.safe_command(&ctx, &s, &mission);
        s = crate::sim::plant_step(&s, &cmd, &cfg.world.plant, dt);
        let sd = hull.signed_distance(&s.position);
        let now_inside = sd <= 1e-6;
        if inside && !now_inside {
            breaches += 1;
        }
        inside = now_inside;
        min_c = min_c.min(-sd);
        trace.push(pair_row((k + 1) as f64 * dt, &[s], -sd));
    }
    Ok(FenceReport { breaches, min_clearance_m: min_c, final_position: s.position, trace })
}
