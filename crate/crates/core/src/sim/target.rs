//! Figure-of-eight target carrying a ball on a rigid rod.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::geometry::{RotationMatrix, Vec3};

const G: f64 = 9.81;
const TABLE: usize = 2048;

// 5-point Gauss-Legendre on [-1, 1]
const GL_X: [f64; 5] =
    [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
const GL_W: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TargetModel {
    pub center: Vec3,
    /// Semi-axes of `x = A sin t, y = B sin t cos t`, m.
    pub a_m: f64,
    pub b_m: f64,
    /// Orientation of the path plane: yaw, pitch, roll (rad).
    pub plane_ypr: [f64; 3],
    pub speed_mps: f64,
    pub rod_length_m: f64,
    pub ball_radius_m: f64,
    pub ball_mass_kg: f64,
    /// Airframe extent seen by the cameras: span and height, m. The
    /// reference point is the rod hinge at the bottom of the airframe.
    pub body_span_m: f64,
    pub body_height_m: f64,
    /// Time constant of the ball's lateral swing.
    pub swing_tau_s: f64,
    /// Initial path parameter.
    pub start_t: f64,
}

impl Default for TargetModel {
    fn default() -> Self {
        Self {
            center: Vec3::new(50.0, 20.0, 10.0),
            a_m: 30.0,
            b_m: 16.0,
            plane_ypr: [0.0, 0.0, 0.0],
            speed_mps: 3.0,
            rod_length_m: 1.45,
            ball_radius_m: 0.05,
            ball_mass_kg: 0.06,
            body_span_m: 1.2,
            body_height_m: 0.4,
            swing_tau_s: 0.8,
            start_t: 0.0,
        }
    }
}

/// Arc-length parameterised figure-of-eight.
#[derive(Debug, Clone)]
pub struct FigureEight {
    model: TargetModel,
    rot: RotationMatrix,
    /// Cumulative arc length at `t_k = k * 2pi / TABLE`.
    s_table: Vec<f64>,
}

impl FigureEight {
    pub fn new(model: TargetModel) -> Self {
        let [y, p, r] = model.plane_ypr;
        let mut f = Self { model, rot: RotationMatrix::from_ypr(y, p, r), s_table: Vec::with_capacity(TABLE + 1) };
        let h = TAU / TABLE as f64;
        let mut s = 0.0;
        f.s_table.push(0.0);
        for k in 0..TABLE {
            s += f.arc(k as f64 * h, (k + 1) as f64 * h);
            f.s_table.push(s);
        }
        f
    }

    pub fn model(&self) -> &TargetModel {
        &self.model
    }

    fn local(&self, t: f64) -> Vec3 {
        let (s, c) = t.sin_cos();
        Vec3::new(self.model.a_m * s, self.model.b_m * s * c, 0.0)
    }

    pub fn point(&self, t: f64) -> Vec3 {
        self.model.center + self.rot.apply(&self.local(t))
    }

    /// d point / dt
    pub fn derivative(&self, t: f64) -> Vec3 {
        self.rot.apply(&Vec3::new(self.model.a_m * t.cos(), self.model.b_m * (2.0 * t).cos(), 0.0))
    }

    fn arc(&self, t0: f64, t1: f64) -> f64 {
        let (m, hw) = ((t0 + t1) / 2.0, (t1 - t0) / 2.0);
        GL_X.iter().zip(GL_W).map(|(x, w)| w * self.derivative(m + hw * x).norm()).sum::<f64>() * hw
    }

    pub fn length(&self) -> f64 {
        self.s_table[TABLE]
    }

    pub fn period(&self) -> f64 {
        self.length() / self.model.speed_mps
    }

    pub fn arc_at(&self, t: f64) -> f64 {
        let turns = (t / TAU).floor();
        let tl = t - turns * TAU;
        let h = TAU / TABLE as f64;
        let k = ((tl / h) as usize).min(TABLE - 1);
        turns * self.length() + self.s_table[k] + self.arc(k as f64 * h, tl)
    }

    /// Path parameter at arc length `s` (table bracket, then Newton).
    pub fn param_at(&self, s: f64) -> f64 {
        let l = self.length();
        let turns = (s / l).floor();
        let sl = s - turns * l;
        let k = self.s_table.partition_point(|&x| x <= sl).clamp(1, TABLE) - 1;
        let h = TAU / TABLE as f64;
        let (t_lo, t_hi) = (k as f64 * h, (k + 1) as f64 * h);
        let mut t = t_lo + h * (sl - self.s_table[k]) / (self.s_table[k + 1] - self.s_table[k]);
        for _ in 0..8 {
            let err = self.s_table[k] + self.arc(t_lo, t) - sl;
            let d = self.derivative(t).norm();
            let step = err / d;
            t = (t - step).clamp(t_lo, t_hi);
            if step.abs() < 1e-15 {
                break;
            }
        }
        turns * TAU + t
    }
}

/// Target and ball state.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetState {
    pub s: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    /// Horizontal tilt of the rod (`dx/dz`, `dy/dz` ratios).
    pub tilt: Vector2<f64>,
    pub ball: Vec3,
    pub ball_velocity: Vec3,
}

impl TargetState {
    pub fn start(path: &FigureEight) -> Self {
        let s = path.arc_at(path.model.start_t);
        let mut st = Self {
            s,
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            tilt: Vector2::zeros(),
            ball: Vec3::zeros(),
            ball_velocity: Vec3::zeros(),
        };
        st.place(path);
        st.ball_velocity = st.velocity;
        st
    }

    fn place(&mut self, path: &FigureEight) {
        let t = path.param_at(self.s);
        self.position = path.point(t);
        self.velocity = path.derivative(t).normalize() * path.model.speed_mps;
        self.ball = rod_end(&self.position, &self.tilt, &path.model);
    }

    /// Centre of the airframe box.
    pub fn body_center(&self, m: &TargetModel) -> Vec3 {
        self.position + Vec3::new(0.0, 0.0, m.body_height_m / 2.0)
    }

    pub fn step(&mut self, path: &FigureEight, dt: f64) {
        let v_prev = self.velocity;
        let ball_prev = self.ball;
        self.s += path.model.speed_mps * dt;
        let t = path.param_at(self.s);
        self.position = path.point(t);
        self.velocity = path.derivative(t).normalize() * path.model.speed_mps;
        let acc = (self.velocity - v_prev) / dt;
        // lags behind the horizontal acceleration like a damped pendulum
        let eq = Vector2::new(-acc.x / G, -acc.y / G);
        let a = (-dt / path.model.swing_tau_s).exp();
        self.tilt = eq + (self.tilt - eq) * a;
        self.ball = rod_end(&self.position, &self.tilt, &path.model);
        self.ball_velocity = (self.ball - ball_prev) / dt;
    }
}

fn rod_end(pos: &Vec3, tilt: &Vector2<f64>, m: &TargetModel) -> Vec3 {
    let dir = Vec3::new(tilt.x, tilt.y, -1.0).normalize();
    pos + dir * m.rod_length_m
}
