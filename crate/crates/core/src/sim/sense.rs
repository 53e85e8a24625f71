use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::{project, CameraIntrinsics, CameraPose, PixelObservation, Vec3};
use crate::vision::{BoxDetection, ContourStats};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorNoise {
    pub sigma_px: f64,
    /// Per-object, per-frame miss probability.
    pub dropout: f64,
    pub max_range_m: f64,
    /// Relative 1-sigma error of the apparent radius.
    pub radius_noise_frac: f64,
}

impl Default for SensorNoise {
    fn default() -> Self {
        Self { sigma_px: 2.0, dropout: 0.02, max_range_m: 40.0, radius_noise_frac: 0.03 }
    }
}

impl SensorNoise {
    pub fn noiseless() -> Self {
        Self { sigma_px: 0.0, dropout: 0.0, radius_noise_frac: 0.0, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BallSighting {
    pub obs: PixelObservation,
    pub blob: ContourStats,
}

/// What one camera reports for one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Detections {
    pub target_box: Option<BoxDetection>,
    pub ball: Option<BallSighting>,
    /// Balloon sightings with the id of the balloon that produced them. The id
    /// is ground truth and only used for scoring.
    pub balloons: Vec<(usize, PixelObservation)>,
}

pub(crate) struct Sensor<'a, R: Rng> {
    pub pose: &'a CameraPose,
    pub cam: &'a CameraIntrinsics,
    pub noise: &'a SensorNoise,
    pub rng: &'a mut R,
    pub t: f64,
}

impl<R: Rng> Sensor<'_, R> {
    fn gauss(&mut self, sigma: f64) -> f64 {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).map(|n| n.sample(self.rng)).unwrap_or(0.0)
        } else {
            0.0
        }
    }

    fn dropped(&mut self) -> bool {
        self.noise.dropout > 0.0 && self.rng.random::<f64>() < self.noise.dropout
    }

    /// Noisy view of a sphere, `None` when out of frustum, range or dropped.
    pub fn sphere(&mut self, center: &Vec3, radius: f64) -> Option<PixelObservation> {
        let pc = self.pose.world_to_camera_point(center);
        if pc.norm() > self.noise.max_range_m {
            return None;
        }
        let obs = project(&pc, radius, self.cam, self.t).ok()?.in_view()?;
        if self.dropped() {
            return None;
        }
        let sx = self.gauss(self.noise.sigma_px);
        let sy = self.gauss(self.noise.sigma_px);
        let sr = self.gauss(self.noise.radius_noise_frac);
        Some(PixelObservation {
            t_x: obs.t_x + sx,
            t_y: obs.t_y + sy,
            apparent_radius: (obs.apparent_radius * (1.0 + sr)).max(0.5),
            t: obs.t,
        })
    }

    /// Box around an airframe of the given extent.
    pub fn airframe(&mut self, center: &Vec3, span: f64, height: f64) -> Option<BoxDetection> {
        let pc = self.pose.world_to_camera_point(center);
        if pc.norm() > self.noise.max_range_m {
            return None;
        }
        let obs = project(&pc, span / 2.0, self.cam, self.t).ok()?.in_view()?;
        if self.dropped() {
            return None;
        }
        let f = self.cam.focal_px;
        let sx = self.gauss(self.noise.sigma_px);
        let sy = self.gauss(self.noise.sigma_px);
        Some(BoxDetection::new(obs.t_x + sx, obs.t_y + sy, f * span / pc.z, f * height / pc.z))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RotationMatrix, VehicleState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pose() -> CameraPose {
        CameraPose::mounted(&VehicleState::default(), &Vec3::zeros(), RotationMatrix::forward_camera())
    }

    #[test]
    fn on_axis_ball_lands_at_image_centre() {
        let (p, cam) = (pose(), CameraIntrinsics::default());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let noise = SensorNoise::noiseless();
        let mut s = Sensor { pose: &p, cam: &cam, noise: &noise, rng: &mut rng, t: 0.0 };
        let o = s.sphere(&Vec3::new(1.0, 0.0, 0.0), 0.05).unwrap();
        assert_eq!((o.t_x, o.t_y), (640.0, 360.0));
        assert!(s.sphere(&Vec3::new(-1.0, 0.0, 0.0), 0.05).is_none());
        assert!(s.sphere(&Vec3::new(41.0, 0.0, 0.0), 0.05).is_none());
    }

    #[test]
    fn pixel_noise_has_the_configured_spread() {
        let (p, cam) = (pose(), CameraIntrinsics::default());
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let noise = SensorNoise { dropout: 0.0, ..SensorNoise::default() };
        let mut s = Sensor { pose: &p, cam: &cam, noise: &noise, rng: &mut rng, t: 0.0 };
        let xs: Vec<f64> = (0..1000).map(|_| s.sphere(&Vec3::new(5.0, 0.0, 0.0), 0.05).unwrap().t_x).collect();
        let m = xs.iter().sum::<f64>() / 1000.0;
        let sd = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 999.0).sqrt();
        assert!((1.8..=2.2).contains(&sd), "sd {sd}");
    }

    #[test]
    fn dropout_rate() {
        let (p, cam) = (pose(), CameraIntrinsics::default());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = SensorNoise { dropout: 0.1, ..SensorNoise::default() };
        let mut s = Sensor { pose: &p, cam: &cam, noise: &noise, rng: &mut rng, t: 0.0 };
        let seen = (0..5000).filter(|_| s.sphere(&Vec3::new(5.0, 0.0, 0.0), 0.05).is_some()).count();
        assert!((4400..=4600).contains(&seen), "{seen}");
    }
}
