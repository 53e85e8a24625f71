//! Fixed-step world: vehicle plants, the target and its ball, balloons,
//! synthetic camera frames and contact events.

mod balloon;
mod contact;
mod plant;
mod sense;
mod target;

pub use balloon::{Balloon, BalloonModel};
pub use contact::{segment_origin_distance, swept_contact, ContactParams};
pub use plant::{plant_step, PlantModel};
pub use sense::{BallSighting, Detections, SensorNoise};
pub use target::{FigureEight, TargetModel, TargetState};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::geometry::{CameraIntrinsics, CameraPose, RotationMatrix, Vec3, VehicleState};
use crate::guidance::GuidanceCommand;
use crate::vision::ContourStats;
use sense::Sensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effector {
    Net,
    Popper,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub dt: f64,
    pub seed: u64,
    pub plant: PlantModel,
    pub target: TargetModel,
    pub balloon: BalloonModel,
    /// Ground positions of the balloon poles.
    pub balloons: Vec<Vec3>,
    pub noise: SensorNoise,
    pub contact: ContactParams,
    pub camera: CameraIntrinsics,
    /// End-effector (and camera) offset in the body frame.
    pub effector_offset_body: Vec3,
    /// Airframe extent seen by other cameras.
    pub uav_span_m: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            seed: 1,
            plant: PlantModel::default(),
            target: TargetModel::default(),
            balloon: BalloonModel::default(),
            balloons: Vec::new(),
            noise: SensorNoise::default(),
            contact: ContactParams::default(),
            camera: CameraIntrinsics::default(),
            effector_offset_body: Vec3::new(0.0, -0.6, 0.0),
            uav_span_m: 1.2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimAgent {
    pub state: VehicleState,
    pub effector: Effector,
    pub alive: bool,
    pub payload_kg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BallHolder {
    Target,
    Agent(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SimEvent {
    Grabbed {
        agent: usize,
        speed: f64,
    },
    /// Touched the ball too gently to detach it.
    Bumped {
        agent: usize,
        speed: f64,
    },
    Popped {
        agent: usize,
        balloon: usize,
    },
}

pub struct World {
    pub cfg: WorldConfig,
    pub t: f64,
    pub tick: u64,
    pub path: FigureEight,
    pub target: TargetState,
    pub ball_holder: BallHolder,
    pub balloons: Vec<Balloon>,
    pub agents: Vec<SimAgent>,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(cfg: WorldConfig, starts: &[(VehicleState, Effector)]) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let path = FigureEight::new(cfg.target);
        let target = TargetState::start(&path);
        let balloons = cfg
            .balloons
            .iter()
            .enumerate()
            .map(|(id, b)| Balloon { id, base: *b, phase: rng.random::<f64>() * TAU, alive: true })
            .collect();
        let agents =
            starts.iter().map(|(s, e)| SimAgent { state: *s, effector: *e, alive: true, payload_kg: 0.0 }).collect();
        Self { cfg, t: 0.0, tick: 0, path, target, ball_holder: BallHolder::Target, balloons, agents, rng }
    }

    pub fn camera_pose(&self, i: usize) -> CameraPose {
        CameraPose::mounted(&self.agents[i].state, &self.cfg.effector_offset_body, RotationMatrix::forward_camera())
    }

    pub fn effector_position(&self, i: usize) -> Vec3 {
        self.camera_pose(i).position
    }

    pub fn ball_position(&self) -> Vec3 {
        match self.ball_holder {
            BallHolder::Target => self.target.ball,
            BallHolder::Agent(i) => self.effector_position(i),
        }
    }

    pub fn balloon_center(&self, b: &Balloon) -> Vec3 {
        b.center(&self.cfg.balloon, self.t)
    }

    pub fn balloons_alive(&self) -> usize {
        self.balloons.iter().filter(|b| b.alive).count()
    }

    /// Advances one tick. Dead agents receive no command and stay where they are.
    pub fn step(&mut self, commands: &[GuidanceCommand]) -> Vec<SimEvent> {
        let dt = self.cfg.dt;
        let eff0: Vec<Vec3> = (0..self.agents.len()).map(|i| self.effector_position(i)).collect();
        let ball0 = self.target.ball;
        let balloon0: Vec<Vec3> = self.balloons.iter().map(|b| self.balloon_center(b)).collect();

        for (a, c) in self.agents.iter_mut().zip(commands) {
            if !a.alive {
                continue;
            }
            let mut s = plant_step(&a.state, c, &self.cfg.plant, dt);
            if s.position.z < 0.0 {
                s.position.z = 0.0;
                s.velocity.z = s.velocity.z.max(0.0);
            }
            a.state = s;
        }
        self.target.step(&self.path, dt);
        self.t += dt;
        self.tick += 1;

        let mut events = Vec::new();
        let cp = self.cfg.contact;
        for i in 0..self.agents.len() {
            if !self.agents[i].alive {
                continue;
            }
            let eff1 = self.effector_position(i);
            match self.agents[i].effector {
                Effector::Net if self.ball_holder == BallHolder::Target => {
                    if let Some(speed) = swept_contact(&eff0[i], &eff1, &ball0, &self.target.ball, cp.grab_r_eq_m, dt) {
                        if speed >= cp.detach_speed_mps {
                            self.ball_holder = BallHolder::Agent(i);
                            self.agents[i].payload_kg += self.cfg.target.ball_mass_kg;
                            events.push(SimEvent::Grabbed { agent: i, speed });
                        } else {
                            events.push(SimEvent::Bumped { agent: i, speed });
                        }
                    }
                }
                Effector::Popper => {
                    for (k, b) in self.balloons.iter_mut().enumerate() {
                        if !b.alive {
                            continue;
                        }
                        let c1 = b.center(&self.cfg.balloon, self.t);
                        if swept_contact(&eff0[i], &eff1, &balloon0[k], &c1, cp.pop_r_eq_m, dt).is_some() {
                            b.alive = false;
                            events.push(SimEvent::Popped { agent: i, balloon: b.id });
                        }
                    }
                }
                _ => {}
            }
        }
        events
    }

    /// Synthetic camera frame for agent `i`.
    pub fn sense(&mut self, i: usize) -> Detections {
        let pose = self.camera_pose(i);
        let tm = self.cfg.target;
        let ball_free = self.ball_holder == BallHolder::Target;
        let body = self.target.body_center(&tm);
        let ball = self.target.ball;
        let centers: Vec<(usize, Vec3)> =
            self.balloons.iter().filter(|b| b.alive).map(|b| (b.id, self.balloon_center(b))).collect();
        let mut s =
            Sensor { pose: &pose, cam: &self.cfg.camera, noise: &self.cfg.noise, rng: &mut self.rng, t: self.t };
        let target_box = s.airframe(&body, tm.body_span_m, tm.body_height_m);
        let ball = if ball_free {
            s.sphere(&ball, tm.ball_radius_m).map(|obs| {
                let below = target_box.map(|b| obs.t_y - (b.cy + b.h / 2.0)).unwrap_or(f64::NAN);
                BallSighting { obs, blob: ContourStats::disc((obs.t_x, obs.t_y), obs.apparent_radius, below) }
            })
        } else {
            None
        };
        let balloons =
            centers.iter().filter_map(|(id, c)| s.sphere(c, self.cfg.balloon.radius_m).map(|o| (*id, o))).collect();
        Detections { target_box, ball, balloons }
    }

    /// True geometry for scoring: distance from agent `i`'s camera to the ball.
    pub fn camera_ball_distance(&self, i: usize) -> f64 {
        (self.ball_position() - self.effector_position(i)).norm()
    }
}
