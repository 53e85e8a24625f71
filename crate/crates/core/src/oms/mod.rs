//! Operation management: master/slave message bus, task registry,
//! allocation and the mission-mode state machines.

mod allocate;
mod balloon;
mod blend;
mod bus;
mod explore;
mod task;

pub use allocate::{AgentRecord, Master, MasterSnapshot, PathInfo, Role, TaskSwitch};
pub use balloon::{goto_velocity, BalloonInput, BalloonMission, BalloonMissionParams, BalloonPhase};
pub use blend::{blend_commands, AvoidanceIntegrator};
pub use bus::{AgentSnapshot, Bus, BusMessage, Directive, EventReport, Inboxes, LinkFaults, Node, Payload, Topic};
pub use explore::{exploration_waypoints, ExploreKind, ExploreParams, ExplorePlan};
pub use task::{
    AgentId, MissionEvent, MissionEventKind, Task, TaskBoard, TaskClass, TaskKind, TaskPriority, TaskStatus,
    MIN_GRAB_PAYLOAD_KG,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OmsError {
    #[error("payload {0} kg is below the grab detection limit")]
    PayloadTooLight(f64),
    #[error("safety task {0} cannot occupy the mission slot")]
    SafetyInMissionSlot(TaskKind),
    #[error("agent {agent} has {active} active mission tasks")]
    SlotCount { agent: AgentId, active: usize },
    #[error("more than one agent holds {0}")]
    Conflict(TaskKind),
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
    #[error("no exploration waypoints fit inside the fence")]
    NoCoverage,
}
