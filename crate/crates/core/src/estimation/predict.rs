use serde::Serialize;

use super::EstimationError;
use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub horizon: usize,
    pub window: usize,
    /// Predicted `(x, y)` with the window's mean altitude.
    pub point: Vec3,
    pub delta: (f64, f64),
}

/// Extrapolates `m` steps ahead from the mean per-step displacement over the
/// last `n` estimates.
pub fn predict_ahead(history: &[Vec3], n: usize, m: usize) -> Result<Prediction, EstimationError> {
    if n < 2 || m < 1 {
        return Err(EstimationError::Invalid(format!("n = {n}, m = {m}")));
    }
    if history.len() < n {
        return Err(EstimationError::NotReady { have: history.len(), need: n });
    }
    let w = &history[history.len() - n..];
    let last = w[n - 1];
    let step = (last - w[0]) / (n - 1) as f64;
    let dx = step.x * m as f64;
    let dy = step.y * m as f64;
    let z = w.iter().map(|p| p.z).sum::<f64>() / n as f64;
    Ok(Prediction { horizon: m, window: n, point: Vec3::new(last.x + dx, last.y + dy, z), delta: (dx, dy) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn linear_and_stationary() {
        let h: Vec<Vec3> = (0..20).map(|k| Vec3::new(k as f64, 2.0, 7.0)).collect();
        let p = predict_ahead(&h, 20, 5).unwrap();
        assert_relative_eq!(p.delta.0, 5.0, epsilon = 1e-12);
        assert_relative_eq!(p.delta.1, 0.0);
        assert_relative_eq!(p.point, Vec3::new(24.0, 2.0, 7.0), epsilon = 1e-12);
        let s = vec![Vec3::new(1.0, 1.0, 1.0); 5];
        assert_eq!(predict_ahead(&s, 5, 3).unwrap().delta, (0.0, 0.0));
        assert!(matches!(predict_ahead(&s, 6, 3), Err(EstimationError::NotReady { .. })));
    }

    #[test]
    fn circular_error_is_bounded_by_the_sagitta() {
        // radius 10 m, 2 m/s, dt 0.05 -> step angle 0.01 rad
        let (r, w) = (10.0, 0.01);
        let at = |k: f64| Vec3::new(r * (w * k).cos(), r * (w * k).sin(), 0.0);
        let n = 20;
        let h: Vec<Vec3> = (0..n).map(|k| at(k as f64)).collect();
        for m in 1..=10 {
            let p = predict_ahead(&h, n, m).unwrap();
            let truth = at((n - 1 + m) as f64);
            // chord-direction extrapolation error: the window spans angle (n-1)w,
            // the horizon m*w; bound by arc deviation over the full span
            let span = ((n - 1 + m) as f64) * w;
            let bound = 2.0 * r * (1.0 - (span / 2.0).cos()) + r * span * span;
            assert!((p.point - truth).norm() <= bound, "m={m}");
        }
    }

    proptest! {
        #[test]
        fn exact_for_constant_velocity(
            x0 in -50.0f64..50.0, vx in -3.0f64..3.0, vy in -3.0f64..3.0, n in 2usize..30, m in 1usize..40
        ) {
            let h: Vec<Vec3> = (0..n + 5).map(|k| Vec3::new(x0 + vx * k as f64, vy * k as f64, 3.0)).collect();
            let p = predict_ahead(&h, n, m).unwrap();
            let k = (n + 4 + m) as f64;
            prop_assert!((p.point - Vec3::new(x0 + vx * k, vy * k, 3.0)).norm() < 1e-9);
        }
    }
}
