use serde::Serialize;
use std::path::Path;
use std::time::Instant;

use super::agent::{Agent, Ctx, Sensed};
use super::config::ScenarioConfig;
use super::telemetry::{csv_bytes, write_csv, CsvRow, EventRow, TelemetryRow};
use super::MissionError;
use crate::geometry::{wrap_angle, Vec3, VehicleState};
use crate::guidance::GuidanceCommand;
use crate::oms::{
    AgentRecord, Bus, BusMessage, Directive, EventReport, Master, MasterSnapshot, MissionEvent, MissionEventKind, Node,
    Payload, Role, TaskKind, TaskSwitch, Topic,
};
use crate::safety::{quickhull3, FenceHull};
use crate::sim::{BallHolder, Effector, SimEvent, World, WorldConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MissionSummary {
    pub name: String,
    pub seed: u64,
    pub sim_time_s: f64,
    pub ticks: u64,
    pub grab_success: bool,
    pub grab_time_s: Option<f64>,
    pub grabbed_by: Option<String>,
    pub balloons_total: usize,
    /// Balloons actually destroyed in the world.
    pub balloons_popped: u32,
    /// Pops counted by the master from agent reports.
    pub balloons_confirmed: u32,
    pub min_separation_m: f64,
    pub fence_breaches: u32,
    pub all_landed: bool,
    pub aborted: bool,
    pub unrecoverable: Vec<String>,
    /// Wall-clock time of the run; the only non-reproducible field.
    pub runtime_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct TaskLogRow {
    t: f64,
    agent: String,
    old_task: String,
    new_task: String,
    trigger: String,
}

impl CsvRow for TaskLogRow {
    const HEADER: &'static [&'static str] = &["t", "agent", "old_task", "new_task", "trigger"];
}

/// Fence hull without its downward-facing faces.
fn without_floor(h: &FenceHull) -> FenceHull {
    FenceHull { vertices: h.vertices.clone(), faces: h.faces.iter().filter(|f| f.normal.z > -0.9).cloned().collect() }
}

fn topic_for(kind: MissionEventKind) -> Topic {
    use MissionEventKind::*;
    match kind {
        BallDetected | BallLost | GrabSuccess | GrabFailed | PathEstimated => Topic::BallStatus,
        BalloonDetected | BalloonPopped | ExplorationComplete => Topic::BalloonStatus,
        _ => Topic::RoutineStatus,
    }
}

pub struct Mission {
    pub cfg: ScenarioConfig,
    pub world: World,
    pub bus: Bus,
    pub master: Master,
    pub agents: Vec<Agent>,
    pub hull: FenceHull,
    open_hull: FenceHull,
    pub telemetry: Vec<Vec<TelemetryRow>>,
    pub events: Vec<EventRow>,
    pub snapshots: Vec<MasterSnapshot>,
    pending: Vec<Vec<String>>,
    inside: Vec<bool>,
    pub min_separation_m: f64,
    pub fence_breaches: u32,
    pub balloons_popped: u32,
    pub grab_time_s: Option<f64>,
    kills_done: Vec<bool>,
    comms_done: Vec<bool>,
    resets_done: Vec<bool>,
    started: Instant,
}

impl Mission {
    pub fn new(cfg: ScenarioConfig) -> Result<Self, MissionError> {
        cfg.validate()?;
        if cfg.agents.is_empty() {
            return Err(MissionError::Invalid("no agents".into()));
        }
        let hull = quickhull3(&cfg.arena)?;
        let open_hull = without_floor(&hull);
        let starts: Vec<(VehicleState, Effector)> = cfg
            .agents
            .iter()
            .map(|a| {
                let eff = match a.role {
                    Role::Grabber => Effector::Net,
                    Role::Popper => Effector::Popper,
                };
                (VehicleState::at(a.start, a.yaw_deg.to_radians()), eff)
            })
            .collect();
        for (i, (s, _)) in starts.iter().enumerate() {
            if hull.signed_distance(&s.position) > 1e-6 {
                return Err(MissionError::Invalid(format!("agent {i} starts outside the fence")));
            }
        }
        let n = cfg.agents.len();
        // one seed drives the whole run
        let world = World::new(WorldConfig { seed: cfg.seed, ..cfg.world.clone() }, &starts);
        let bus = Bus::new(n, cfg.faults.link, cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let records = cfg.agents.iter().map(|a| AgentRecord::new(a.role, a.start, a.standby)).collect();
        let master = Master::new(records);
        let agents = cfg.agents.iter().enumerate().map(|(i, a)| Agent::new(i, a, &cfg, n)).collect();
        let (nk, nc, nr) = (cfg.faults.kills.len(), cfg.faults.comms_lost.len(), cfg.faults.resets.len());
        Ok(Self {
            world,
            bus,
            master,
            agents,
            hull,
            open_hull,
            telemetry: vec![Vec::new(); n],
            events: Vec::new(),
            snapshots: Vec::new(),
            pending: vec![Vec::new(); n],
            inside: vec![true; n],
            min_separation_m: f64::INFINITY,
            fence_breaches: 0,
            balloons_popped: 0,
            grab_time_s: None,
            kills_done: vec![false; nk],
            comms_done: vec![false; nc],
            resets_done: vec![false; nr],
            started: Instant::now(),
            cfg,
        })
    }

    fn note(&mut self, t: f64, source: &str, agent: Option<usize>, event: &str, detail: String) {
        self.events.push(EventRow { t, source: source.into(), agent, event: event.into(), detail });
    }

    fn inject_faults(&mut self, t: f64, reports: &mut Vec<EventReport>) {
        let f = self.cfg.faults.clone();
        for (k, kill) in f.kills.iter().enumerate() {
            if !self.kills_done[k] && t >= kill.t_s && kill.agent < self.agents.len() {
                self.kills_done[k] = true;
                self.world.agents[kill.agent].alive = false;
                reports.push(EventReport::plain(MissionEvent::new(MissionEventKind::AgentFailed, kill.agent, t)));
                self.note(t, "fault", Some(kill.agent), "agent_failed", String::new());
            }
        }
        for (k, c) in f.comms_lost.iter().enumerate() {
            if !self.comms_done[k] && t >= c.t_s && c.agent < self.agents.len() {
                self.comms_done[k] = true;
                self.bus.cut(Node::Agent(c.agent));
                reports.push(EventReport::plain(MissionEvent::new(MissionEventKind::CommsLost, c.agent, t)));
                self.note(t, "fault", Some(c.agent), "comms_lost", String::new());
            }
        }
        for (k, r) in f.resets.iter().enumerate() {
            if !self.resets_done[k] && t >= r.t_s {
                self.resets_done[k] = true;
                self.snapshots.push(self.master.snapshot(t));
                let mut rep = EventReport::plain(MissionEvent::new(MissionEventKind::Reset, 0, t));
                rep.speed = Some(r.pause_s);
                reports.push(rep);
                self.note(t, "fault", None, "reset", format!("pause {:.1} s", r.pause_s));
            }
        }
    }

    fn master_tick(&mut self, t: f64, tick: u64, inbox: &[BusMessage]) {
        let payloads: Vec<_> = inbox
            .iter()
            .filter_map(|m| match m.sender {
                Node::Agent(a) => Some((a, m.payload)),
                Node::Master => None,
            })
            .collect();
        let mut reports = self.master.ingest(&payloads);
        self.inject_faults(t, &mut reports);
        let mut directives: Vec<Directive> = if tick == 0 { self.master.start(t) } else { Vec::new() };
        for r in &reports {
            match self.master.allocate(Some(r), t) {
                Ok(ds) => directives.extend(ds),
                Err(e) => {
                    log::warn!("allocation rejected {}: {e}", r.event.kind);
                    self.note(t, "master", Some(r.event.agent), "rejected", e.to_string());
                }
            }
        }
        if let Ok(ds) = self.master.allocate(None, t) {
            directives.extend(ds);
        }
        for d in directives {
            let msg = BusMessage { topic: Topic::Directive, sender: Node::Master, payload: Payload::Directive(d), t };
            self.bus.send(msg, tick);
        }
    }

    /// One tick: bus delivery, master, agents, world, metrics.
    pub fn step(&mut self) {
        let t = self.world.t;
        let tick = self.world.tick;
        let inbox = self.bus.deliver(tick);
        self.master_tick(t, tick, &inbox.master);

        let n = self.agents.len();
        let mut commands = vec![GuidanceCommand::hold(); n];
        let ctx = Ctx { cfg: &self.cfg, hull: &self.hull, open_hull: &self.open_hull, t };
        let mut outgoing = Vec::new();
        let mut raised: Vec<(usize, EventReport)> = Vec::new();
        for i in 0..n {
            if !self.world.agents[i].alive {
                continue;
            }
            let agent = &mut self.agents[i];
            for m in &inbox.agents[i] {
                match (m.payload, m.sender) {
                    (Payload::Directive(d), _) => agent.apply(&d),
                    (Payload::State(s), Node::Agent(j)) => agent.observe_neighbour(j, s),
                    _ => {}
                }
            }
            let det = self.world.sense(i);
            let sa = self.world.agents[i];
            let pose = self.world.camera_pose(i);
            let out = agent.step(&ctx, &Sensed { state: &sa.state, pose: &pose, det: &det, payload_kg: sa.payload_kg });
            commands[i] = out.command;
            let me = Node::Agent(i);
            outgoing.push(BusMessage {
                topic: Topic::State,
                sender: me,
                payload: Payload::State(agent.snapshot(&sa.state)),
                t,
            });
            outgoing.push(BusMessage {
                topic: Topic::BallStatus,
                sender: me,
                payload: Payload::BallStatus { visible: out.ball_visible, depth_m: out.ball_depth_m },
                t,
            });
            for e in out.events {
                outgoing.push(BusMessage { topic: topic_for(e.event.kind), sender: me, payload: Payload::Event(e), t });
                raised.push((i, e));
            }
        }
        for m in outgoing {
            self.bus.send(m, tick);
        }
        for (i, e) in raised {
            self.pending[i].push(e.event.kind.name().to_string());
            let detail = match (e.point, e.heading) {
                (Some(p), Some(h)) => {
                    format!("point ({:.2} {:.2} {:.2}) heading {:.1} deg", p.x, p.y, p.z, h.to_degrees())
                }
                _ => String::new(),
            };
            self.note(t, "agent", Some(i), e.event.kind.name(), detail);
        }

        for ev in self.world.step(&commands) {
            let t1 = self.world.t;
            match ev {
                SimEvent::Grabbed { agent, speed } => {
                    self.grab_time_s.get_or_insert(t1);
                    self.note(t1, "world", Some(agent), "grabbed", format!("relative speed {speed:.2} m/s"));
                }
                SimEvent::Bumped { agent, speed } => {
                    self.note(t1, "world", Some(agent), "bumped", format!("relative speed {speed:.2} m/s"));
                }
                SimEvent::Popped { agent, balloon } => {
                    self.balloons_popped += 1;
                    self.note(t1, "world", Some(agent), "popped", format!("balloon {balloon}"));
                }
            }
        }
        self.metrics();
        if self.world.tick.is_multiple_of(self.cfg.telemetry_every as u64) {
            self.record();
        }
    }

    fn metrics(&mut self) {
        let alive: Vec<usize> = (0..self.agents.len()).filter(|&i| self.world.agents[i].alive).collect();
        for (k, &i) in alive.iter().enumerate() {
            for &j in &alive[k + 1..] {
                let d = (self.world.agents[i].state.position - self.world.agents[j].state.position).norm();
                self.min_separation_m = self.min_separation_m.min(d);
            }
        }
        for &i in &alive {
            let inside = self.hull.signed_distance(&self.world.agents[i].state.position) <= 1e-6;
            if self.inside[i] && !inside {
                self.fence_breaches += 1;
                let t = self.world.t;
                self.note(t, "world", Some(i), "fence_breach", String::new());
            }
            self.inside[i] = inside;
        }
    }

    fn record(&mut self) {
        let t = self.world.t;
        for i in 0..self.agents.len() {
            let s = self.world.agents[i].state;
            let task =
                if self.world.agents[i].alive { self.agents[i].task.map_or("none", TaskKind::name) } else { "failed" };
            self.telemetry[i].push(TelemetryRow {
                t,
                x: s.position.x,
                y: s.position.y,
                z: s.position.z,
                vx: s.velocity.x,
                vy: s.velocity.y,
                vz: s.velocity.z,
                yaw: wrap_angle(s.yaw),
                active_task: task.to_string(),
                events: std::mem::take(&mut self.pending[i]).join(";"),
            });
        }
    }

    /// Every live agent has landed after its work, or nobody is left.
    pub fn finished(&self) -> bool {
        if self.master.aborted {
            return true;
        }
        let live: Vec<usize> = (0..self.agents.len()).filter(|&i| self.world.agents[i].alive).collect();
        !live.is_empty() && live.iter().all(|&i| self.agents[i].landed && self.agents[i].task == Some(TaskKind::Land))
    }

    pub fn run(&mut self) -> MissionSummary {
        let end = (self.cfg.duration_s / self.cfg.world.dt).round() as u64;
        while self.world.tick < end && !self.finished() {
            self.step();
        }
        log::info!(
            "{}: stopped at t = {:.1} s, grab {}, balloons {}",
            self.cfg.name,
            self.world.t,
            self.grab_time_s.is_some(),
            self.balloons_popped
        );
        self.summary()
    }

    pub fn summary(&self) -> MissionSummary {
        let holder = match self.world.ball_holder {
            BallHolder::Agent(i) => Some(self.agents[i].name.clone()),
            BallHolder::Target => None,
        };
        MissionSummary {
            name: self.cfg.name.clone(),
            seed: self.cfg.seed,
            sim_time_s: self.world.t,
            ticks: self.world.tick,
            grab_success: holder.is_some(),
            grab_time_s: self.grab_time_s,
            grabbed_by: holder,
            balloons_total: self.world.balloons.len(),
            balloons_popped: self.balloons_popped,
            balloons_confirmed: self.master.balloons_popped,
            min_separation_m: self.min_separation_m,
            fence_breaches: self.fence_breaches,
            all_landed: self.finished() && !self.master.aborted,
            aborted: self.master.aborted,
            unrecoverable: self.master.unrecoverable.clone(),
            runtime_s: self.started.elapsed().as_secs_f64(),
        }
    }

    /// Telemetry of every agent concatenated, for reproducibility checks.
    pub fn telemetry_bytes(&self) -> Result<Vec<u8>, MissionError> {
        let mut all = Vec::new();
        for rows in &self.telemetry {
            all.extend(csv_bytes(rows)?);
        }
        Ok(all)
    }

    fn task_log_rows(&self) -> Vec<TaskLogRow> {
        self.master
            .log
            .iter()
            .map(|s| TaskLogRow {
                t: s.t,
                agent: self.agents[s.agent].name.clone(),
                old_task: s.old_task.map_or("none", TaskKind::name).to_string(),
                new_task: s.new_task.name().to_string(),
                trigger: s.trigger.clone(),
            })
            .collect()
    }

    pub fn write_outputs(&self, dir: &Path) -> Result<MissionSummary, MissionError> {
        std::fs::create_dir_all(dir)?;
        for (i, rows) in self.telemetry.iter().enumerate() {
            let f = std::fs::File::create(dir.join(format!("telemetry_{}.csv", self.agents[i].name)))?;
            write_csv(f, rows)?;
        }
        write_csv(std::fs::File::create(dir.join("task_log.csv"))?, &self.task_log_rows())?;
        write_csv(std::fs::File::create(dir.join("events.csv"))?, &self.events)?;
        if !self.snapshots.is_empty() {
            std::fs::write(dir.join("snapshot.json"), serde_json::to_string_pretty(&self.snapshots)?)?;
        }
        let summary = self.summary();
        std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
        Ok(summary)
    }

    /// Every task switch the master made, in order.
    pub fn task_log(&self) -> &[TaskSwitch] {
        &self.master.log
    }

    /// Mission task sequence of one agent, consecutive repeats collapsed.
    pub fn task_sequence(&self, agent: usize) -> Vec<TaskKind> {
        let mut seq: Vec<TaskKind> = Vec::new();
        for s in self.master.log.iter().filter(|s| s.agent == agent) {
            if seq.last() != Some(&s.new_task) {
                seq.push(s.new_task);
            }
        }
        seq
    }

    pub fn agent_position(&self, i: usize) -> Vec3 {
        self.world.agents[i].state.position
    }
}
