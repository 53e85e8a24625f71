//! Constant-velocity Kalman trackers over image boxes and their association
//! with new detections.

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::assignment::hungarian;

type State = SVector<f64, 8>;
type Cov = SMatrix<f64, 8, 8>;
type Meas = SVector<f64, 4>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectionClass {
    Uav,
    Ball,
    Balloon,
}

/// Axis-aligned box `[cx, cy, w, h]` in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDetection {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoxDetection {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    fn as_meas(&self) -> Meas {
        Meas::new(self.cx, self.cy, self.w, self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Process noise, px/frame^2.
    pub sigma_process: f64,
    /// Measurement noise, px.
    pub sigma_meas: f64,
    /// Center-distance gate, px. Matches further apart than this are broken.
    pub gate_px: f64,
    pub max_misses: u32,
    pub confirm_hits: u32,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            sigma_process: 1.0,
            sigma_meas: 2.0,
            // half the diagonal of a 1280x720 frame
            gate_px: 0.5 * 1280f64.hypot(720.0),
            max_misses: 10,
            confirm_hits: 3,
        }
    }
}

impl TrackerConfig {
    pub fn with_image_diagonal(diagonal_px: f64) -> Self {
        Self { gate_px: 0.5 * diagonal_px, ..Self::default() }
    }
}

/// One tracked box. State is `[cx, cy, w, h, vcx, vcy, vw, vh]` with
/// velocities in px/frame.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxTrack {
    pub id: u64,
    state: State,
    covariance: Cov,
    pub age: u32,
    pub misses: u32,
    pub hits_in_row: u32,
    pub confirmed: bool,
}

impl BoxTrack {
    pub fn new(id: u64, det: &BoxDetection, cfg: &TrackerConfig) -> Self {
        let mut state = State::zeros();
        state.fixed_rows_mut::<4>(0).copy_from(&det.as_meas());
        let mut covariance = Cov::zeros();
        for i in 0..4 {
            covariance[(i, i)] = cfg.sigma_meas * cfg.sigma_meas;
            // unknown initial velocity
            covariance[(i + 4, i + 4)] = 100.0;
        }
        Self { id, state, covariance, age: 1, misses: 0, hits_in_row: 1, confirmed: cfg.confirm_hits <= 1 }
    }

    pub fn bbox(&self) -> [f64; 4] {
        [self.state[0], self.state[1], self.state[2], self.state[3]]
    }

    pub fn velocity(&self) -> [f64; 4] {
        [self.state[4], self.state[5], self.state[6], self.state[7]]
    }

    pub fn center(&self) -> (f64, f64) {
        (self.state[0], self.state[1])
    }

    pub fn covariance(&self) -> &SMatrix<f64, 8, 8> {
        &self.covariance
    }

    /// State after a constant-velocity prediction of one frame, without mutating.
    pub fn predicted_bbox(&self) -> [f64; 4] {
        let s = transition() * self.state;
        [s[0], s[1], s[2], s[3]]
    }
}

fn transition() -> Cov {
    let mut f = Cov::identity();
    for i in 0..4 {
        f[(i, i + 4)] = 1.0;
    }
    f
}

fn process_noise(sigma: f64) -> Cov {
    // discrete white-noise acceleration, dt = 1 frame
    let q = sigma * sigma;
    let mut m = Cov::zeros();
    for i in 0..4 {
        m[(i, i)] = q * 0.25;
        m[(i, i + 4)] = q * 0.5;
        m[(i + 4, i)] = q * 0.5;
        m[(i + 4, i + 4)] = q;
    }
    m
}

/// One predict step and, when a detection is supplied, one measurement update.
pub fn kalman_predict_update(track: &BoxTrack, detection: Option<&BoxDetection>, cfg: &TrackerConfig) -> BoxTrack {
    let f = transition();
    let mut out = track.clone();
    out.state = f * track.state;
    out.covariance = f * track.covariance * f.transpose() + process_noise(cfg.sigma_process);
    out.age += 1;

    match detection {
        Some(det) => {
            let h = SMatrix::<f64, 4, 8>::identity();
            let r = SMatrix::<f64, 4, 4>::identity() * (cfg.sigma_meas * cfg.sigma_meas);
            let innov = det.as_meas() - h * out.state;
            let s = h * out.covariance * h.transpose() + r;
            // s is SPD (covariance + positive diagonal)
            let s_inv = s.cholesky().expect("innovation covariance is SPD").inverse();
            let k = out.covariance * h.transpose() * s_inv;
            out.state += k * innov;
            let ikh = Cov::identity() - k * h;
            // Joseph form keeps the covariance symmetric PSD
            let p = ikh * out.covariance * ikh.transpose() + k * r * k.transpose();
            out.covariance = (p + p.transpose()) * 0.5;
            out.misses = 0;
            out.hits_in_row += 1;
            if out.hits_in_row >= cfg.confirm_hits {
                out.confirmed = true;
            }
        }
        None => {
            out.covariance = (out.covariance + out.covariance.transpose()) * 0.5;
            out.misses += 1;
            out.hits_in_row = 0;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Association {
    /// `(track index, detection index)`
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Matches predicted track boxes to detections by minimum total Euclidean
/// distance over `[cx, cy, w, h]`; pairs whose centres are further apart than
/// `gate_px` are broken.
pub fn associate(tracks: &[BoxTrack], detections: &[BoxDetection], gate_px: f64) -> Association {
    let preds: Vec<[f64; 4]> = tracks.iter().map(BoxTrack::predicted_bbox).collect();
    let cost: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| {
            detections
                .iter()
                .map(|d| {
                    let dm = [d.cx, d.cy, d.w, d.h];
                    p.iter().zip(dm.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
                })
                .collect()
        })
        .collect();
    let mut out = Association::default();
    let mut det_used = vec![false; detections.len()];
    let assignment =
        if tracks.is_empty() || detections.is_empty() { vec![None; tracks.len()] } else { hungarian(&cost) };
    for (ti, a) in assignment.iter().enumerate() {
        match a {
            Some(di) => {
                let p = preds[ti];
                let d = detections[*di];
                if (p[0] - d.cx).hypot(p[1] - d.cy) <= gate_px {
                    out.matches.push((ti, *di));
                    det_used[*di] = true;
                } else {
                    out.unmatched_tracks.push(ti);
                }
            }
            None => out.unmatched_tracks.push(ti),
        }
    }
    out.unmatched_detections = det_used.iter().enumerate().filter(|(_, u)| !**u).map(|(i, _)| i).collect();
    out
}

/// Registry of box tracks for one camera stream.
#[derive(Debug, Clone)]
pub struct BoxTracker {
    cfg: TrackerConfig,
    tracks: Vec<BoxTrack>,
    next_id: u64,
}

impl BoxTracker {
    pub fn new(cfg: TrackerConfig) -> Self {
        Self { cfg, tracks: Vec::new(), next_id: 1 }
    }

    pub fn tracks(&self) -> &[BoxTrack] {
        &self.tracks
    }

    pub fn confirmed(&self) -> impl Iterator<Item = &BoxTrack> {
        self.tracks.iter().filter(|t| t.confirmed)
    }

    pub fn get(&self, id: u64) -> Option<&BoxTrack> {
        self.tracks.iter().find(|t| t.id == id)
    }

    /// Advances all tracks by one frame. Returns, per detection, the id of the
    /// track it was assigned to (new tracks included).
    pub fn step(&mut self, detections: &[BoxDetection]) -> Vec<u64> {
        let assoc = associate(&self.tracks, detections, self.cfg.gate_px);
        let mut det_ids = vec![0u64; detections.len()];
        let mut next: Vec<BoxTrack> = Vec::with_capacity(self.tracks.len() + detections.len());
        let mut matched = vec![None; self.tracks.len()];
        for &(ti, di) in &assoc.matches {
            matched[ti] = Some(di);
        }
        for (ti, track) in self.tracks.iter().enumerate() {
            let det = matched[ti].map(|di| &detections[di]);
            let updated = kalman_predict_update(track, det, &self.cfg);
            if let Some(di) = matched[ti] {
                det_ids[di] = updated.id;
            }
            if updated.misses <= self.cfg.max_misses {
                next.push(updated);
            }
        }
        for di in assoc.unmatched_detections {
            let t = BoxTrack::new(self.next_id, &detections[di], &self.cfg);
            det_ids[di] = t.id;
            self.next_id += 1;
            next.push(t);
        }
        self.tracks = next;
        det_ids
    }
}
