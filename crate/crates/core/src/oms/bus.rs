use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::{AgentId, MissionEvent, TaskKind};
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Master,
    Agent(AgentId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topic {
    /// Position and velocity, shared with everyone.
    State,
    BallStatus,
    BalloonStatus,
    RoutineStatus,
    Directive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentSnapshot {
    pub position: Vec3,
    pub velocity: Vec3,
    pub yaw: f64,
    pub task: TaskKind,
}

/// A task assignment from the master.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    pub agent: AgentId,
    pub task: TaskKind,
    /// Where to wait (stand-by tasks).
    pub point: Option<Vec3>,
    pub heading: Option<f64>,
    /// Estimated target speed, m/s.
    pub target_speed: Option<f64>,
    /// Whether the waiting point lies on the fitted path (head-on grab allowed).
    pub on_path: bool,
}

impl Directive {
    pub fn new(agent: AgentId, task: TaskKind) -> Self {
        Self { agent, task, point: None, heading: None, target_speed: None, on_path: false }
    }
}

/// Event plus optional geometry (stand-off point and heading for
/// `path_estimated`, sighting for `balloon_detected`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventReport {
    pub event: MissionEvent,
    pub point: Option<Vec3>,
    pub heading: Option<f64>,
    pub speed: Option<f64>,
}

impl EventReport {
    pub fn plain(event: MissionEvent) -> Self {
        Self { event, point: None, heading: None, speed: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Payload {
    State(AgentSnapshot),
    BallStatus { visible: bool, depth_m: Option<f64> },
    BalloonStatus { popped: u32 },
    Event(EventReport),
    Directive(Directive),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BusMessage {
    pub topic: Topic,
    pub sender: Node,
    pub payload: Payload,
    pub t: f64,
}

impl BusMessage {
    fn receivers(&self, n_agents: usize) -> Vec<Node> {
        match (self.topic, &self.payload) {
            (Topic::State, _) => std::iter::once(Node::Master)
                .chain((0..n_agents).map(Node::Agent))
                .filter(|n| *n != self.sender)
                .collect(),
            (Topic::Directive, Payload::Directive(d)) => vec![Node::Agent(d.agent)],
            (Topic::Directive, _) => Vec::new(),
            _ => vec![Node::Master],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct LinkFaults {
    /// Per-link, per-message drop probability.
    pub drop_rate: f64,
    /// Extra ticks before delivery.
    pub latency_ticks: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Inboxes {
    pub master: Vec<BusMessage>,
    pub agents: Vec<Vec<BusMessage>>,
}

/// Buffers everything sent during a tick and hands it out at a later tick
/// boundary. Sends never become visible within the tick they were made.
pub struct Bus {
    n_agents: usize,
    faults: LinkFaults,
    rng: ChaCha8Rng,
    queue: Vec<(u64, u64, Node, BusMessage)>,
    seq: u64,
    cut_off: BTreeSet<Node>,
}

impl Bus {
    pub fn new(n_agents: usize, faults: LinkFaults, seed: u64) -> Self {
        Self {
            n_agents,
            faults,
            rng: ChaCha8Rng::seed_from_u64(seed),
            queue: Vec::new(),
            seq: 0,
            cut_off: BTreeSet::new(),
        }
    }

    /// Isolates a node: nothing it sends or is sent gets through.
    pub fn cut(&mut self, node: Node) {
        self.cut_off.insert(node);
    }

    pub fn is_cut(&self, node: Node) -> bool {
        self.cut_off.contains(&node)
    }

    pub fn send(&mut self, msg: BusMessage, tick: u64) {
        for to in msg.receivers(self.n_agents) {
            if self.cut_off.contains(&msg.sender) || self.cut_off.contains(&to) {
                continue;
            }
            if self.faults.drop_rate > 0.0 && self.rng.random::<f64>() < self.faults.drop_rate {
                continue;
            }
            self.queue.push((tick + 1 + self.faults.latency_ticks, self.seq, to, msg));
            self.seq += 1;
        }
    }

    /// Delivers everything due by `tick`, in send order.
    pub fn deliver(&mut self, tick: u64) -> Inboxes {
        let mut out = Inboxes { master: Vec::new(), agents: vec![Vec::new(); self.n_agents] };
        let (due, keep): (Vec<_>, Vec<_>) = self.queue.drain(..).partition(|(at, ..)| *at <= tick);
        self.queue = keep;
        let mut due = due;
        due.sort_by_key(|(at, seq, ..)| (*at, *seq));
        for (_, _, to, m) in due {
            match to {
                Node::Master => out.master.push(m),
                Node::Agent(i) => out.agents[i].push(m),
            }
        }
        out
    }
}
