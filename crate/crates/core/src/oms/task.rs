use serde::{Deserialize, Serialize};
use std::fmt;

use super::OmsError;

pub type AgentId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Takeoff,
    ExploreBall,
    ExploreBalloon,
    Track,
    Grab,
    GrabStandby,
    Pop,
    Land,
    Restart,
    /// Always-on safety layers; never occupy the mission slot.
    CollisionAvoidance,
    Geofence,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Takeoff => "takeoff",
            TaskKind::ExploreBall => "explore_ball",
            TaskKind::ExploreBalloon => "explore_balloon",
            TaskKind::Track => "track",
            TaskKind::Grab => "grab",
            TaskKind::GrabStandby => "grab_standby",
            TaskKind::Pop => "pop",
            TaskKind::Land => "land",
            TaskKind::Restart => "restart",
            TaskKind::CollisionAvoidance => "collision_avoidance",
            TaskKind::Geofence => "geofence",
        }
    }

    pub fn priority(self) -> TaskPriority {
        match self {
            TaskKind::CollisionAvoidance | TaskKind::Geofence => TaskPriority::Safety,
            _ => TaskPriority::Mission,
        }
    }

    /// Rank used to decide who yields in an encounter: grab > track > others.
    pub fn avoidance_rank(self) -> u8 {
        match self {
            TaskKind::Grab => 2,
            TaskKind::Track => 1,
            _ => 0,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskClass {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskPriority {
    Mission,
    Safety,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Pending,
    Active,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Task {
    pub id: u64,
    pub kind: TaskKind,
    pub class: TaskClass,
    pub priority: TaskPriority,
    pub assignee: Option<AgentId>,
    pub status: TaskStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissionEventKind {
    BallDetected,
    BallLost,
    GrabSuccess,
    GrabFailed,
    BalloonDetected,
    BalloonPopped,
    ExplorationComplete,
    AgentFailed,
    CommsLost,
    Reset,
    /// The tracker has fitted the target's path; carries the stand-off point.
    PathEstimated,
    /// Routine status: the agent finished its current static task.
    TaskDone,
}

impl MissionEventKind {
    pub fn name(self) -> &'static str {
        match self {
            MissionEventKind::BallDetected => "ball_detected",
            MissionEventKind::BallLost => "ball_lost",
            MissionEventKind::GrabSuccess => "grab_success",
            MissionEventKind::GrabFailed => "grab_failed",
            MissionEventKind::BalloonDetected => "balloon_detected",
            MissionEventKind::BalloonPopped => "balloon_popped",
            MissionEventKind::ExplorationComplete => "exploration_complete",
            MissionEventKind::AgentFailed => "agent_failed",
            MissionEventKind::CommsLost => "comms_lost",
            MissionEventKind::Reset => "reset",
            MissionEventKind::PathEstimated => "path_estimated",
            MissionEventKind::TaskDone => "task_done",
        }
    }
}

impl fmt::Display for MissionEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MissionEvent {
    pub kind: MissionEventKind,
    pub agent: AgentId,
    pub t: f64,
}

impl MissionEvent {
    pub fn new(kind: MissionEventKind, agent: AgentId, t: f64) -> Self {
        Self { kind, agent, t }
    }

    /// Grab success is only reported with the ball's weight on the effector.
    pub fn grab_success(agent: AgentId, payload_kg: f64, t: f64) -> Result<Self, OmsError> {
        if payload_kg < MIN_GRAB_PAYLOAD_KG {
            return Err(OmsError::PayloadTooLight(payload_kg));
        }
        Ok(Self::new(MissionEventKind::GrabSuccess, agent, t))
    }
}

/// Limit-switch threshold for grab detection, kg.
pub const MIN_GRAB_PAYLOAD_KG: f64 = 0.05;

/// Registry of static and dynamic tasks. Each live agent holds exactly one
/// active mission task; safety tasks run alongside.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskBoard {
    pub tasks: Vec<Task>,
    next_id: u64,
}

impl TaskBoard {
    pub fn add(&mut self, kind: TaskKind, class: TaskClass, assignee: Option<AgentId>) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        self.tasks.push(Task { id, kind, class, priority: kind.priority(), assignee, status: TaskStatus::Pending });
        id
    }

    pub fn active_mission_task(&self, agent: AgentId) -> Option<&Task> {
        self.tasks.iter().find(|t| {
            t.assignee == Some(agent) && t.status == TaskStatus::Active && t.priority == TaskPriority::Mission
        })
    }

    /// Makes `kind` the agent's active mission task, closing the previous one
    /// with `prev_status`.
    pub fn activate(&mut self, agent: AgentId, kind: TaskKind, prev_status: TaskStatus) -> Result<u64, OmsError> {
        if kind.priority() == TaskPriority::Safety {
            return Err(OmsError::SafetyInMissionSlot(kind));
        }
        for t in self.tasks.iter_mut() {
            if t.assignee == Some(agent) && t.status == TaskStatus::Active && t.priority == TaskPriority::Mission {
                t.status = prev_status;
            }
        }
        let pending = self
            .tasks
            .iter_mut()
            .find(|t| t.assignee == Some(agent) && t.kind == kind && t.status == TaskStatus::Pending);
        let id = match pending {
            Some(t) => {
                t.status = TaskStatus::Active;
                t.id
            }
            None => {
                let id = self.add(kind, TaskClass::Dynamic, Some(agent));
                self.tasks.last_mut().expect("just pushed").status = TaskStatus::Active;
                id
            }
        };
        Ok(id)
    }

    /// Returns the agent's active mission task to the pending pool, unassigned.
    pub fn release(&mut self, agent: AgentId) -> Option<TaskKind> {
        let t = self.tasks.iter_mut().find(|t| {
            t.assignee == Some(agent) && t.status == TaskStatus::Active && t.priority == TaskPriority::Mission
        })?;
        t.status = TaskStatus::Pending;
        t.assignee = None;
        Some(t.kind)
    }

    /// Scheduler invariants over the given live agents.
    pub fn check(&self, live: &[AgentId]) -> Result<(), OmsError> {
        for &a in live {
            let n = self
                .tasks
                .iter()
                .filter(|t| {
                    t.assignee == Some(a) && t.status == TaskStatus::Active && t.priority == TaskPriority::Mission
                })
                .count();
            if n != 1 {
                return Err(OmsError::SlotCount { agent: a, active: n });
            }
        }
        for kind in [TaskKind::Track, TaskKind::Grab] {
            let n = self.tasks.iter().filter(|t| t.kind == kind && t.status == TaskStatus::Active).count();
            if n > 1 {
                return Err(OmsError::Conflict(kind));
            }
        }
        Ok(())
    }
}
