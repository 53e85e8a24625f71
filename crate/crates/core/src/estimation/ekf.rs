use nalgebra::{Matrix2, Vector2};
use serde::Serialize;

use super::EstimationError;

/// Planar target filter. The motion model drives the target radially toward
/// the curvature centre at speed `v_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EkfState {
    pub t_hat: Vector2<f64>,
    pub p: Matrix2<f64>,
    pub center: Vector2<f64>,
    pub v_t: f64,
    pub q: Matrix2<f64>,
    pub r_meas: Matrix2<f64>,
}

impl EkfState {
    pub fn new(t0: Vector2<f64>, center: Vector2<f64>, v_t: f64) -> Self {
        Self {
            t_hat: t0,
            p: Matrix2::identity(),
            center,
            v_t,
            q: Matrix2::from_diagonal_element(0.05),
            r_meas: Matrix2::from_diagonal_element(0.04),
        }
    }

    pub fn with_noise(mut self, q: f64, r: f64) -> Self {
        self.q = Matrix2::from_diagonal_element(q);
        self.r_meas = Matrix2::from_diagonal_element(r);
        self
    }

    /// Initial state from the first measurements: position from the last,
    /// curvature centre from their centroid.
    pub fn from_window(first: &[Vector2<f64>], v_t: f64) -> Result<Self, EstimationError> {
        let Some(last) = first.last() else {
            return Err(EstimationError::NotReady { have: 0, need: 1 });
        };
        let c = first.iter().sum::<Vector2<f64>>() / first.len() as f64;
        Ok(Self::new(*last, c, v_t))
    }

    pub fn trace(&self) -> f64 {
        self.p.trace()
    }
}

/// Forward-Euler prediction of the radial model.
pub fn ekf_predict(s: &EkfState, dt: f64) -> Result<EkfState, EstimationError> {
    let mut out = *s;
    if s.v_t == 0.0 {
        out.p = s.p + s.q;
        return Ok(out);
    }
    let d = s.t_hat - s.center;
    let rho = d.norm();
    if rho < 1e-6 {
        return Err(EstimationError::SingularDynamics(rho));
    }
    let u = d / rho;
    out.t_hat = s.t_hat - u * (s.v_t * dt);
    let f = Matrix2::identity() - (Matrix2::identity() - u * u.transpose()) * (dt * s.v_t / rho);
    let p = f * s.p * f.transpose() + s.q;
    out.p = (p + p.transpose()) * 0.5;
    Ok(out)
}

/// Measurement update with a direct position measurement.
pub fn ekf_update(s: &EkfState, z: &Vector2<f64>) -> EkfState {
    let mut out = *s;
    let sm = s.p + s.r_meas;
    let Some(s_inv) = sm.try_inverse() else {
        return out;
    };
    let k = s.p * s_inv;
    out.t_hat = s.t_hat + k * (z - s.t_hat);
    let ikh = Matrix2::identity() - k;
    let p = ikh * s.p * ikh.transpose() + k * s.r_meas * k.transpose();
    out.p = (p + p.transpose()) * 0.5;
    out
}

/// Predict plus update on a world-frame position.
pub fn ekf_step_position(s: &EkfState, z: &Vector2<f64>, dt: f64) -> Result<EkfState, EstimationError> {
    if !(dt > 0.0) {
        return Err(EstimationError::Invalid(format!("dt = {dt}")));
    }
    Ok(ekf_update(&ekf_predict(s, dt)?, z))
}

/// Predict plus update with a camera measurement `(p_x, p_y, Z)`; the measured
/// position is `(p_x Z / f, p_y Z / f)`.
pub fn ekf_step(s: &EkfState, meas: (f64, f64, f64), focal_px: f64, dt: f64) -> Result<EkfState, EstimationError> {
    let (p_x, p_y, z) = meas;
    if ![p_x, p_y, z].iter().all(|v| v.is_finite()) {
        return Err(EstimationError::Invalid("non-finite measurement".into()));
    }
    let zm = Vector2::new(p_x * z / focal_px, p_y * z / focal_px);
    ekf_step_position(s, &zm, dt)
}

/// First-order measurement covariance of `(p_x Z/f, p_y Z/f)` from pixel noise
/// and depth noise.
pub fn measurement_covariance(p_x: f64, p_y: f64, z: f64, focal_px: f64, sigma_px: f64, sigma_z: f64) -> Matrix2<f64> {
    let j = |p: f64| ((z / focal_px) * sigma_px).powi(2) + ((p / focal_px) * sigma_z).powi(2);
    let cross = (p_x / focal_px) * (p_y / focal_px) * sigma_z * sigma_z;
    Matrix2::new(j(p_x), cross, cross, j(p_y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn circle(k: usize, dt: f64, speed: f64, r: f64) -> Vector2<f64> {
        let w = speed / r;
        let a = w * k as f64 * dt;
        Vector2::new(r * a.cos(), r * a.sin())
    }

    #[test]
    fn zero_speed_prediction_keeps_the_mean() {
        let s = EkfState::new(Vector2::new(3.0, 4.0), Vector2::zeros(), 0.0);
        let p = ekf_predict(&s, 0.1).unwrap();
        assert_eq!(p.t_hat, s.t_hat);
    }

    #[test]
    fn singular_at_centre() {
        let s = EkfState::new(Vector2::new(1.0, 1.0), Vector2::new(1.0, 1.0), 2.0);
        assert!(matches!(ekf_predict(&s, 0.1), Err(EstimationError::SingularDynamics(_))));
    }

    #[test]
    fn camera_measurement_scaling() {
        let s = EkfState::new(Vector2::zeros(), Vector2::new(-5.0, 0.0), 0.0).with_noise(0.0, 0.0);
        let s = ekf_step(&s, (100.0, -50.0, 9.0), 900.0, 0.05).unwrap();
        assert_relative_eq!(s.t_hat, Vector2::new(1.0, -0.5), epsilon = 1e-12);
    }

    #[test]
    fn noiseless_circle_converges() {
        let (dt, v, r) = (0.05, 2.0, 10.0);
        let first: Vec<_> = (0..20).map(|k| circle(k, dt, v, r)).collect();
        let mut s = EkfState::from_window(&first, v).unwrap().with_noise(0.05, 0.0);
        s.t_hat += Vector2::new(1.0, -1.0);
        let mut err = f64::INFINITY;
        for k in 20..400 {
            s = ekf_step_position(&s, &circle(k, dt, v, r), dt).unwrap();
            err = (s.t_hat - circle(k, dt, v, r)).norm();
        }
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn update_never_grows_the_trace() {
        let s = EkfState::new(Vector2::new(4.0, 1.0), Vector2::zeros(), 2.0);
        let mut s = s;
        for k in 0..50 {
            let pred = ekf_predict(&s, 0.05).unwrap();
            let upd = ekf_update(&pred, &Vector2::new(4.0 + 0.01 * k as f64, 1.0));
            assert!(upd.trace() <= pred.trace() + 1e-12);
            let e = upd.p.symmetric_eigenvalues();
            assert!(e.iter().all(|x| *x >= 0.0));
            s = upd;
        }
    }

    #[test]
    fn noisy_circle_beats_raw_measurements() {
        let (dt, v, r, sigma) = (0.05, 2.0, 10.0, 0.2);
        let noise = Normal::new(0.0, sigma).unwrap();
        let (mut se_f, mut se_m, mut n) = (0.0, 0.0, 0.0);
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let meas: Vec<Vector2<f64>> = (0..220)
                .map(|k| circle(k, dt, v, r) + Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng)))
                .collect();
            let mut s = EkfState::from_window(&meas[..20], v).unwrap().with_noise(0.05, sigma * sigma);
            for k in 20..220 {
                s = ekf_step_position(&s, &meas[k], dt).unwrap();
                se_f += (s.t_hat - circle(k, dt, v, r)).norm_squared();
                se_m += (meas[k] - circle(k, dt, v, r)).norm_squared();
                n += 1.0;
            }
        }
        assert!((se_f / n).sqrt() < (se_m / n).sqrt());
    }

    #[test]
    fn pixel_noise_propagation_on_axis() {
        let r = measurement_covariance(0.0, 0.0, 9.0, 900.0, 2.0, 0.3);
        assert_relative_eq!(r[(0, 0)], (0.01f64 * 2.0).powi(2), epsilon = 1e-15);
        assert_eq!(r[(0, 1)], 0.0);
    }
}
