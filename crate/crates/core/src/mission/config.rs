use serde::{Deserialize, Serialize};
use std::path::Path;

use super::MissionError;
use crate::control::{ReferenceModel, SacGains};
use crate::estimation::StandoffParams;
use crate::geometry::Vec3;
use crate::guidance::{GrabParams, TrackingParams};
use crate::oms::{BalloonMissionParams, LinkFaults, Role};
use crate::safety::{AvoidanceParams, FenceParams};
use crate::sim::{TargetModel, WorldConfig};
use crate::vision::BallSearchConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub name: String,
    pub role: Role,
    pub start: Vec3,
    pub yaw_deg: f64,
    /// Landing spot; the start position when absent.
    pub pad: Option<Vec3>,
    /// Waiting point for the stand-by role before the path is known.
    pub standby: Vec3,
    /// Exploration altitude.
    pub altitude_m: f64,
    /// Ball sweep line (world y).
    pub lane_y_m: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            name: "uav".into(),
            role: Role::Grabber,
            start: Vec3::zeros(),
            yaw_deg: 0.0,
            pad: None,
            standby: Vec3::new(50.0, 20.0, 8.0),
            altitude_m: 8.4,
            lane_y_m: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuidanceConfig {
    pub tracking: TrackingParams,
    /// `v_t` is the fallback when no speed estimate is available.
    pub grab: GrabParams,
    pub ball_search: BallSearchConfig,
    pub cruise_mps: f64,
    pub climb_mps: f64,
    pub descend_mps: f64,
    /// Frames without the ball before it counts as lost.
    pub lost_debounce_frames: u32,
    /// Consecutive validated frames before the ball counts as found.
    pub detect_frames: u32,
    /// A waiting grabber launches when the approaching ball is this close.
    pub grab_trigger_m: f64,
    /// Largest bearing of the ball off the waiting heading that still launches a grab.
    pub grab_cone_deg: f64,
    /// The waiting grabber must be this close to its point to launch.
    pub settle_radius_m: f64,
    /// Abandon a grab once the ball is this much farther than its closest point.
    pub grab_abort_margin_m: f64,
    /// Tracking time collected before the first path fit.
    pub fit_after_s: f64,
    pub fit_every_s: f64,
    pub fit_max_rms_m: f64,
    pub standoff: StandoffParams,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            tracking: TrackingParams::default(),
            grab: GrabParams::default(),
            ball_search: BallSearchConfig::default(),
            cruise_mps: 3.0,
            climb_mps: 1.5,
            descend_mps: 1.0,
            lost_debounce_frames: 15,
            detect_frames: 3,
            grab_trigger_m: 12.0,
            grab_cone_deg: 20.0,
            settle_radius_m: 1.5,
            grab_abort_margin_m: 3.0,
            fit_after_s: 60.0,
            fit_every_s: 5.0,
            fit_max_rms_m: 1.0,
            standoff: StandoffParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyConfig {
    pub avoidance: AvoidanceParams,
    pub fence: FenceParams,
    /// Leak time constant of the accumulated avoidance velocity.
    pub avoidance_tau_s: f64,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self { avoidance: AvoidanceParams::default(), fence: FenceParams::default(), avoidance_tau_s: 1.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlConfig {
    pub gains: SacGains,
    pub reference: ReferenceModel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimedFault {
    pub agent: usize,
    pub t_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetFault {
    pub t_s: f64,
    pub pause_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultConfig {
    pub link: LinkFaults,
    pub kills: Vec<TimedFault>,
    pub comms_lost: Vec<TimedFault>,
    pub resets: Vec<ResetFault>,
}

/// Single-UAV tracking run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackScenario {
    pub target: TargetModel,
    pub duration_s: f64,
    pub transient_s: f64,
    /// Tolerance band around the tracking distance.
    pub band_m: f64,
    pub yaw_band_deg: f64,
}

impl Default for TrackScenario {
    fn default() -> Self {
        Self {
            target: TargetModel { a_m: 24.0, b_m: 12.0, speed_mps: 4.0, ..TargetModel::default() },
            duration_s: 120.0,
            transient_s: 10.0,
            band_m: 1.5,
            yaw_band_deg: 10.0,
        }
    }
}

/// Single-UAV tail-chase grab.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrabScenario {
    pub target: TargetModel,
    pub interceptor_speed_mps: f64,
    /// Initial distance behind the ball.
    pub start_behind_m: f64,
    pub timeout_s: f64,
}

impl Default for GrabScenario {
    fn default() -> Self {
        Self {
            target: TargetModel { a_m: 24.0, b_m: 12.0, speed_mps: 2.0, ..TargetModel::default() },
            interceptor_speed_mps: 2.5,
            start_behind_m: 8.0,
            timeout_s: 120.0,
        }
    }
}

/// Mirrored pair flying at each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AvoidScenario {
    pub speed_mps: f64,
    pub start_separation_m: f64,
    /// Sideways offset between the two tracks.
    pub lateral_offset_m: f64,
    pub altitude_m: f64,
    pub duration_s: f64,
}

impl Default for AvoidScenario {
    fn default() -> Self {
        Self { speed_mps: 2.0, start_separation_m: 30.0, lateral_offset_m: 0.0, altitude_m: 10.0, duration_s: 30.0 }
    }
}

/// One UAV driven at the fence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FenceScenario {
    pub start: Vec3,
    pub velocity: Vec3,
    pub duration_s: f64,
}

impl Default for FenceScenario {
    fn default() -> Self {
        Self { start: Vec3::new(80.0, 30.0, 10.0), velocity: Vec3::new(3.0, 2.0, 0.5), duration_s: 30.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub duration_s: f64,
    /// Telemetry row every this many ticks.
    pub telemetry_every: u32,
    /// Fence boundary points; their convex hull is the arena.
    pub arena: Vec<Vec3>,
    pub world: WorldConfig,
    pub agents: Vec<AgentConfig>,
    pub guidance: GuidanceConfig,
    pub safety: SafetyConfig,
    pub control: ControlConfig,
    pub balloon_mission: BalloonMissionParams,
    pub faults: FaultConfig,
    pub track: TrackScenario,
    pub grab: GrabScenario,
    pub avoid: AvoidScenario,
    pub fence: FenceScenario,
}

fn box_corners(min: Vec3, max: Vec3) -> Vec<Vec3> {
    let mut v = Vec::with_capacity(8);
    for &x in &[min.x, max.x] {
        for &y in &[min.y, max.y] {
            for &z in &[min.z, max.z] {
                v.push(Vec3::new(x, y, z));
            }
        }
    }
    v
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::nominal()
    }
}

impl ScenarioConfig {
    /// Two grabbers and one popper in a 100 x 40 x 20 m arena.
    pub fn nominal() -> Self {
        let world = WorldConfig {
            target: TargetModel {
                center: Vec3::new(50.0, 20.0, 10.0),
                a_m: 30.0,
                b_m: 16.0,
                speed_mps: 2.0,
                ..TargetModel::default()
            },
            balloons: vec![
                Vec3::new(22.0, 8.0, 0.0),
                Vec3::new(38.0, 31.0, 0.0),
                Vec3::new(57.0, 14.0, 0.0),
                Vec3::new(71.0, 27.0, 0.0),
                Vec3::new(84.0, 9.0, 0.0),
            ],
            ..WorldConfig::default()
        };
        let agents = vec![
            AgentConfig {
                name: "uav1".into(),
                role: Role::Grabber,
                start: Vec3::new(10.0, 10.0, 0.0),
                yaw_deg: 90.0,
                pad: None,
                standby: Vec3::new(50.0, 4.0, 8.4),
                altitude_m: 8.4,
                lane_y_m: 4.0,
            },
            AgentConfig {
                name: "uav2".into(),
                role: Role::Grabber,
                start: Vec3::new(10.0, 30.0, 0.0),
                yaw_deg: -90.0,
                pad: None,
                standby: Vec3::new(50.0, 36.0, 8.4),
                altitude_m: 8.4,
                lane_y_m: 36.0,
            },
            AgentConfig {
                name: "uav3".into(),
                role: Role::Popper,
                start: Vec3::new(92.0, 20.0, 0.0),
                yaw_deg: 180.0,
                pad: None,
                standby: Vec3::new(92.0, 20.0, 2.5),
                altitude_m: 2.5,
                lane_y_m: 20.0,
            },
        ];
        Self {
            name: "nominal".into(),
            seed: 1,
            duration_s: 900.0,
            telemetry_every: 5,
            arena: box_corners(Vec3::zeros(), Vec3::new(100.0, 40.0, 20.0)),
            world,
            agents,
            guidance: GuidanceConfig::default(),
            safety: SafetyConfig::default(),
            control: ControlConfig::default(),
            balloon_mission: BalloonMissionParams::default(),
            faults: FaultConfig::default(),
            track: TrackScenario::default(),
            grab: GrabScenario::default(),
            avoid: AvoidScenario::default(),
            fence: FenceScenario::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, MissionError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| MissionError::Config {
            path: e.path().to_string(),
            line: e.inner().line(),
            column: e.inner().column(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, MissionError> {
        let text = std::fs::read_to_string(path).map_err(|e| MissionError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), MissionError> {
        let bad = |m: &str| Err(MissionError::Invalid(m.to_string()));
        if !(self.duration_s >= 0.0) {
            return bad("duration_s must be non-negative");
        }
        if !(self.world.dt > 0.0) {
            return bad("world.dt must be positive");
        }
        if self.telemetry_every == 0 {
            return bad("telemetry_every must be at least 1");
        }
        if !(self.world.target.speed_mps > 0.0) {
            return bad("target speed must be positive");
        }
        if self.world.balloons.len() > 5 {
            return bad("at most 5 balloons");
        }
        if !(self.world.plant.tau_v > 0.0 && self.world.plant.tau_r > 0.0) {
            return bad("plant time constants must be positive");
        }
        Ok(())
    }
}
