//! Master node: task allocation and event-driven reallocation.

use serde::{Deserialize, Serialize};

use super::{
    AgentId, AgentSnapshot, Directive, EventReport, MissionEvent, MissionEventKind, OmsError, Payload, TaskBoard,
    TaskClass, TaskKind, TaskStatus,
};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Grabber,
    Popper,
}

impl Role {
    fn explore_task(self) -> TaskKind {
        match self {
            Role::Grabber => TaskKind::ExploreBall,
            Role::Popper => TaskKind::ExploreBalloon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub role: Role,
    pub alive: bool,
    pub reachable: bool,
    pub task: Option<TaskKind>,
    pub position: Vec3,
    pub velocity: Vec3,
    pub ball_visible: bool,
    /// Waiting point used before the target's path is known.
    pub standby_point: Vec3,
}

impl AgentRecord {
    pub fn new(role: Role, position: Vec3, standby_point: Vec3) -> Self {
        Self {
            role,
            alive: true,
            reachable: true,
            task: None,
            position,
            velocity: Vec3::zeros(),
            ball_visible: false,
            standby_point,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathInfo {
    pub standoff: Vec3,
    pub heading: f64,
    pub speed: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSwitch {
    pub t: f64,
    pub agent: AgentId,
    pub old_task: Option<TaskKind>,
    pub new_task: TaskKind,
    pub trigger: String,
}

/// Mission counters and task statuses, enough to resume after a reset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterSnapshot {
    pub t: f64,
    pub tasks: Vec<Option<TaskKind>>,
    pub board: TaskBoard,
    pub grab_done: bool,
    pub balloons_popped: u32,
    pub path: Option<PathInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Master {
    pub agents: Vec<AgentRecord>,
    pub board: TaskBoard,
    pub path: Option<PathInfo>,
    pub grab_done: bool,
    pub balloons_popped: u32,
    pub popper_done: bool,
    pub log: Vec<TaskSwitch>,
    pub unrecoverable: Vec<String>,
    pub aborted: bool,
    paused_until: Option<(f64, Vec<Option<TaskKind>>)>,
}

/// Agents at or above this height count as airborne at start.
const AIRBORNE_M: f64 = 1.0;

impl Master {
    pub fn new(agents: Vec<AgentRecord>) -> Self {
        let mut board = TaskBoard::default();
        for (i, a) in agents.iter().enumerate() {
            board.add(TaskKind::CollisionAvoidance, TaskClass::Static, Some(i));
            board.add(TaskKind::Geofence, TaskClass::Static, Some(i));
            board.add(TaskKind::Takeoff, TaskClass::Static, Some(i));
            board.add(a.role.explore_task(), TaskClass::Static, Some(i));
            board.add(TaskKind::Land, TaskClass::Static, Some(i));
        }
        Self {
            agents,
            board,
            path: None,
            grab_done: false,
            balloons_popped: 0,
            popper_done: false,
            log: Vec::new(),
            unrecoverable: Vec::new(),
            aborted: false,
            paused_until: None,
        }
    }

    pub fn live(&self) -> Vec<AgentId> {
        (0..self.agents.len()).filter(|&i| self.agents[i].alive).collect()
    }

    fn partners(&self, a: AgentId) -> Vec<AgentId> {
        (0..self.agents.len())
            .filter(|&i| i != a && self.agents[i].alive && self.agents[i].role == Role::Grabber)
            .collect()
    }

    fn holder(&self, kind: TaskKind) -> Option<AgentId> {
        (0..self.agents.len()).find(|&i| self.agents[i].alive && self.agents[i].task == Some(kind))
    }

    fn assign(&mut self, out: &mut Vec<Directive>, d: Directive, t: f64, trigger: &str) {
        let a = d.agent;
        let old = self.agents[a].task;
        if old != Some(d.task) {
            let prev_status = match (old, d.task) {
                (Some(TaskKind::Takeoff), _) | (Some(TaskKind::ExploreBall), TaskKind::Track) => TaskStatus::Done,
                (Some(TaskKind::Grab), TaskKind::Land) => TaskStatus::Done,
                (Some(TaskKind::Grab), _) => TaskStatus::Failed,
                _ => TaskStatus::Done,
            };
            if self.board.activate(a, d.task, prev_status).is_ok() {
                self.log.push(TaskSwitch {
                    t,
                    agent: a,
                    old_task: old,
                    new_task: d.task,
                    trigger: trigger.to_string(),
                });
                self.agents[a].task = Some(d.task);
            }
        }
        out.push(d);
    }

    fn standby(&self, a: AgentId, hold_here: bool) -> Directive {
        let mut d = Directive::new(a, TaskKind::GrabStandby);
        if hold_here {
            d.point = Some(self.agents[a].position);
        } else if let Some(p) = self.path {
            d.point = Some(p.standoff);
            d.heading = Some(p.heading);
            d.on_path = true;
            d.target_speed = p.speed;
        } else {
            d.point = Some(self.agents[a].standby_point);
        }
        d
    }

    fn grab(&self, a: AgentId) -> Directive {
        let mut d = Directive::new(a, TaskKind::Grab);
        d.target_speed = self.path.and_then(|p| p.speed);
        d
    }

    /// Initial static allocation: takeoff for grounded agents, otherwise
    /// straight to the exploration task of the agent's role.
    pub fn start(&mut self, t: f64) -> Vec<Directive> {
        let mut out = Vec::new();
        for a in self.live() {
            let kind = if self.agents[a].position.z >= AIRBORNE_M {
                self.agents[a].role.explore_task()
            } else {
                TaskKind::Takeoff
            };
            self.assign(&mut out, Directive::new(a, kind), t, "start");
        }
        out
    }

    /// Updates the agent table from state and status traffic; returns the
    /// events carried.
    pub fn ingest(&mut self, payloads: &[(AgentId, Payload)]) -> Vec<EventReport> {
        let mut events = Vec::new();
        for (a, p) in payloads {
            let Some(rec) = self.agents.get_mut(*a) else { continue };
            match p {
                Payload::State(AgentSnapshot { position, velocity, .. }) => {
                    rec.position = *position;
                    rec.velocity = *velocity;
                }
                Payload::BallStatus { visible, .. } => rec.ball_visible = *visible,
                Payload::Event(e) => events.push(*e),
                _ => {}
            }
        }
        events
    }

    /// Reacts to one event (or to the passage of time when `None`).
    pub fn allocate(&mut self, report: Option<&EventReport>, t: f64) -> Result<Vec<Directive>, OmsError> {
        let mut out = Vec::new();
        if self.aborted {
            return Ok(out);
        }
        let Some(report) = report else {
            if let Some((until, tasks)) = self.paused_until.clone() {
                if t >= until {
                    self.paused_until = None;
                    for a in self.live() {
                        if let Some(k) = tasks[a] {
                            let mut d = Directive::new(a, k);
                            if k == TaskKind::GrabStandby {
                                d = self.standby(a, false);
                            } else if k == TaskKind::Grab {
                                d = self.grab(a);
                            }
                            self.assign(&mut out, d, t, "resume");
                        }
                    }
                }
            }
            return Ok(out);
        };
        let MissionEvent { kind, agent: a, .. } = report.event;
        if a >= self.agents.len() {
            return Err(OmsError::UnknownAgent(a));
        }
        let trig = kind.name();
        let task = self.agents[a].task;
        if self.paused_until.is_some() && !matches!(kind, MissionEventKind::AgentFailed | MissionEventKind::CommsLost) {
            return Ok(out);
        }
        match kind {
            MissionEventKind::TaskDone => match task {
                Some(TaskKind::Takeoff) => {
                    let next = self.agents[a].role.explore_task();
                    let d = if next == TaskKind::ExploreBall && self.holder(TaskKind::Track).is_some() {
                        self.standby(a, false)
                    } else if self.agents[a].role == Role::Grabber && self.grab_done
                        || self.agents[a].role == Role::Popper && self.popper_done
                    {
                        Directive::new(a, TaskKind::Land)
                    } else {
                        Directive::new(a, next)
                    };
                    self.assign(&mut out, d, t, trig);
                }
                Some(TaskKind::Land) => {
                    self.board.activate(a, TaskKind::Land, TaskStatus::Done).ok();
                }
                _ => {}
            },
            MissionEventKind::BallDetected if !self.grab_done => match task {
                Some(TaskKind::ExploreBall) | Some(TaskKind::Takeoff) => {
                    if self.holder(TaskKind::Track).is_none() && self.holder(TaskKind::Grab).is_none() {
                        self.assign(&mut out, Directive::new(a, TaskKind::Track), t, trig);
                        for p in self.partners(a) {
                            let d = self.standby(p, false);
                            self.assign(&mut out, d, t, trig);
                        }
                    } else {
                        let d = self.standby(a, false);
                        self.assign(&mut out, d, t, trig);
                    }
                }
                Some(TaskKind::GrabStandby) => {
                    if self.holder(TaskKind::Grab).is_some() {
                        // someone is already committed
                    } else if let Some(tr) = self.holder(TaskKind::Track) {
                        let d = self.grab(a);
                        self.assign(&mut out, d, t, trig);
                        let d = self.standby(tr, true);
                        self.assign(&mut out, d, t, trig);
                    } else {
                        self.assign(&mut out, Directive::new(a, TaskKind::Track), t, trig);
                    }
                }
                _ => {}
            },
            MissionEventKind::BallLost if !self.grab_done => match task {
                Some(TaskKind::Track) => {
                    if let Some(p) = self.partners(a).into_iter().find(|&p| self.agents[p].ball_visible) {
                        self.assign(&mut out, Directive::new(p, TaskKind::Track), t, trig);
                        let d = self.standby(a, false);
                        self.assign(&mut out, d, t, trig);
                    }
                }
                Some(TaskKind::Grab) => self.grab_failed(a, &mut out, t, trig),
                _ => {}
            },
            MissionEventKind::GrabFailed if !self.grab_done => {
                if task == Some(TaskKind::Grab) {
                    self.grab_failed(a, &mut out, t, trig);
                }
            }
            MissionEventKind::GrabSuccess => {
                self.grab_done = true;
                self.assign(&mut out, Directive::new(a, TaskKind::Land), t, trig);
                for p in self.partners(a) {
                    self.assign(&mut out, Directive::new(p, TaskKind::Land), t, trig);
                }
            }
            MissionEventKind::PathEstimated => {
                if let Some(point) = report.point {
                    self.path =
                        Some(PathInfo { standoff: point, heading: report.heading.unwrap_or(0.0), speed: report.speed });
                    if !self.grab_done {
                        for p in self.partners(a) {
                            if self.agents[p].task == Some(TaskKind::GrabStandby) {
                                let d = self.standby(p, false);
                                self.assign(&mut out, d, t, trig);
                            }
                        }
                    }
                }
            }
            MissionEventKind::BalloonDetected => {
                if matches!(task, Some(TaskKind::ExploreBalloon)) {
                    self.assign(&mut out, Directive::new(a, TaskKind::Pop), t, trig);
                }
            }
            MissionEventKind::BalloonPopped => {
                self.balloons_popped += 1;
                if matches!(task, Some(TaskKind::Pop)) {
                    self.assign(&mut out, Directive::new(a, TaskKind::ExploreBalloon), t, trig);
                }
            }
            MissionEventKind::ExplorationComplete => {
                if self.agents[a].role == Role::Popper {
                    self.popper_done = true;
                }
                self.assign(&mut out, Directive::new(a, TaskKind::Land), t, trig);
            }
            MissionEventKind::AgentFailed => self.agent_failed(a, &mut out, t, trig),
            MissionEventKind::CommsLost => self.agents[a].reachable = false,
            MissionEventKind::Reset => {
                let tasks: Vec<_> = self.agents.iter().map(|r| r.task).collect();
                let pause = report.speed.unwrap_or(5.0);
                for i in self.live() {
                    self.assign(&mut out, Directive::new(i, TaskKind::Restart), t, trig);
                }
                self.paused_until = Some((t + pause, tasks));
            }
            _ => {}
        }
        Ok(out)
    }

    fn grab_failed(&mut self, a: AgentId, out: &mut Vec<Directive>, t: f64, trig: &str) {
        if let Some(p) = self.partners(a).into_iter().find(|&p| self.agents[p].ball_visible) {
            let d = self.grab(p);
            self.assign(out, d, t, trig);
            let d = self.standby(a, false);
            self.assign(out, d, t, trig);
        } else {
            // nobody else sees it: the chaser is closest, fall back to tracking
            for p in self.partners(a) {
                if self.agents[p].task == Some(TaskKind::Track) {
                    let d = self.standby(p, true);
                    self.assign(out, d, t, trig);
                }
            }
            self.assign(out, Directive::new(a, TaskKind::Track), t, trig);
        }
    }

    fn agent_failed(&mut self, a: AgentId, out: &mut Vec<Directive>, t: f64, trig: &str) {
        if !self.agents[a].alive {
            return;
        }
        self.agents[a].alive = false;
        let released = self.board.release(a);
        self.agents[a].task = None;
        if self.live().is_empty() {
            self.aborted = true;
            self.unrecoverable.push(format!("t={t:.2}: no live agents, mission aborted"));
            return;
        }
        let Some(kind) = released else { return };
        let capable: Vec<AgentId> =
            self.live().into_iter().filter(|&i| self.agents[i].role == self.agents[a].role).collect();
        match (kind, capable.first()) {
            (_, None) => self.unrecoverable.push(format!("t={t:.2}: {kind} of agent {a} has no capable agent")),
            (TaskKind::Track | TaskKind::Grab, Some(&p)) if !self.grab_done => {
                self.assign(out, Directive::new(p, TaskKind::Track), t, trig);
            }
            // the partner's own task already covers the rest
            _ => {}
        }
    }

    pub fn snapshot(&self, t: f64) -> MasterSnapshot {
        MasterSnapshot {
            t,
            tasks: self.agents.iter().map(|r| r.task).collect(),
            board: self.board.clone(),
            grab_done: self.grab_done,
            balloons_popped: self.balloons_popped,
            path: self.path,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn master(airborne: bool) -> Master {
        let z = if airborne { 8.0 } else { 0.0 };
        Master::new(vec![
            AgentRecord::new(Role::Grabber, Vec3::new(10.0, 10.0, z), Vec3::new(20.0, 20.0, 8.0)),
            AgentRecord::new(Role::Grabber, Vec3::new(10.0, 30.0, z), Vec3::new(80.0, 20.0, 8.0)),
            AgentRecord::new(Role::Popper, Vec3::new(90.0, 20.0, z), Vec3::new(90.0, 20.0, 2.5)),
        ])
    }

    fn ev(kind: MissionEventKind, a: AgentId) -> EventReport {
        EventReport::plain(MissionEvent::new(kind, a, 1.0))
    }

    fn tasks(m: &Master) -> Vec<Option<TaskKind>> {
        m.agents.iter().map(|r| r.task).collect()
    }

    #[test]
    fn start_allocation() {
        let mut m = master(true);
        m.start(0.0);
        assert_eq!(
            tasks(&m),
            vec![Some(TaskKind::ExploreBall), Some(TaskKind::ExploreBall), Some(TaskKind::ExploreBalloon)]
        );
        m.board.check(&m.live()).unwrap();
        let mut g = master(false);
        g.start(0.0);
        assert!(tasks(&g).iter().all(|t| *t == Some(TaskKind::Takeoff)));
        g.allocate(Some(&ev(MissionEventKind::TaskDone, 2)), 3.0).unwrap();
        assert_eq!(g.agents[2].task, Some(TaskKind::ExploreBalloon));
    }

    #[test]
    fn detection_assigns_track_and_standby() {
        let mut m = master(true);
        m.start(0.0);
        let d = m.allocate(Some(&ev(MissionEventKind::BallDetected, 0)), 1.0).unwrap();
        assert_eq!(tasks(&m)[..2], [Some(TaskKind::Track), Some(TaskKind::GrabStandby)]);
        assert_eq!(d.len(), 2);
        assert_eq!(d[1].point, Some(Vec3::new(80.0, 20.0, 8.0)));
        m.board.check(&m.live()).unwrap();
    }

    #[test]
    fn failed_grab_hands_over_to_the_partner_that_sees_the_ball() {
        let mut m = master(true);
        m.start(0.0);
        m.allocate(Some(&ev(MissionEventKind::BallDetected, 1)), 1.0).unwrap();
        m.allocate(Some(&ev(MissionEventKind::BallDetected, 0)), 2.0).unwrap();
        assert_eq!(tasks(&m)[..2], [Some(TaskKind::Grab), Some(TaskKind::GrabStandby)]);
        m.agents[1].ball_visible = true;
        m.allocate(Some(&ev(MissionEventKind::GrabFailed, 0)), 3.0).unwrap();
        assert_eq!(tasks(&m)[..2], [Some(TaskKind::GrabStandby), Some(TaskKind::Grab)]);
        m.board.check(&m.live()).unwrap();
    }

    #[test]
    fn lost_ball_swaps_roles_when_partner_sees_it() {
        let mut m = master(true);
        m.start(0.0);
        m.allocate(Some(&ev(MissionEventKind::BallDetected, 0)), 1.0).unwrap();
        m.allocate(Some(&ev(MissionEventKind::BallLost, 0)), 2.0).unwrap();
        assert_eq!(m.agents[0].task, Some(TaskKind::Track));
        m.agents[1].ball_visible = true;
        m.allocate(Some(&ev(MissionEventKind::BallLost, 0)), 3.0).unwrap();
        assert_eq!(tasks(&m)[..2], [Some(TaskKind::GrabStandby), Some(TaskKind::Track)]);
    }

    #[test]
    fn grab_success_lands_both_grabbers() {
        let mut m = master(true);
        m.start(0.0);
        m.allocate(Some(&ev(MissionEventKind::BallDetected, 0)), 1.0).unwrap();
        m.allocate(Some(&ev(MissionEventKind::BallDetected, 1)), 2.0).unwrap();
        m.allocate(Some(&ev(MissionEventKind::GrabSuccess, 1)), 3.0).unwrap();
        assert_eq!(tasks(&m)[..2], [Some(TaskKind::Land), Some(TaskKind::Land)]);
        assert!(m.grab_done);
    }

    #[test]
    fn failures_reallocate_or_are_logged() {
        let mut m = master(true);
        m.start(0.0);
        m.allocate(Some(&ev(MissionEventKind::BallDetected, 0)), 1.0).unwrap();
        m.allocate(Some(&ev(MissionEventKind::AgentFailed, 0)), 2.0).unwrap();
        assert_eq!(m.agents[1].task, Some(TaskKind::Track));
        m.board.check(&m.live()).unwrap();
        m.allocate(Some(&ev(MissionEventKind::AgentFailed, 2)), 3.0).unwrap();
        assert_eq!(m.unrecoverable.len(), 1);
        m.allocate(Some(&ev(MissionEventKind::AgentFailed, 1)), 4.0).unwrap();
        assert!(m.aborted);
    }

    #[test]
    fn reset_pauses_then_resumes() {
        let mut m = master(true);
        m.start(0.0);
        let mut r = ev(MissionEventKind::Reset, 0);
        r.speed = Some(2.0);
        m.allocate(Some(&r), 10.0).unwrap();
        assert!(tasks(&m).iter().all(|t| *t == Some(TaskKind::Restart)));
        assert!(m.allocate(None, 11.0).unwrap().is_empty());
        m.allocate(None, 12.0).unwrap();
        assert_eq!(tasks(&m)[2], Some(TaskKind::ExploreBalloon));
        let snap = serde_json::to_string(&m.snapshot(12.0)).unwrap();
        assert!(snap.contains("explore_balloon"));
    }

    #[test]
    fn task_switch_log_records_triggers() {
        let mut m = master(false);
        m.start(0.0);
        m.allocate(Some(&ev(MissionEventKind::TaskDone, 0)), 1.0).unwrap();
        let last = m.log.last().unwrap();
        assert_eq!(
            (last.old_task, last.new_task, last.trigger.as_str()),
            (Some(TaskKind::Takeoff), TaskKind::ExploreBall, "task_done")
        );
    }
}
