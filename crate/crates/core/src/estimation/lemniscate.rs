//! Gerono figure-of-eight `x = A sin t, y = B sin t cos t`, rotated and
//! translated, fitted by damped Gauss-Newton; plus the standoff point.

use nalgebra::{Matrix2, SMatrix, SVector, Vector2};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

use super::EstimationError;
use crate::geometry::Vec3;
use crate::safety::FenceHull;

type V5 = SVector<f64, 5>;
type M5 = SMatrix<f64, 5, 5>;

const MAX_ITER: usize = 100;
const STEP_TOL: f64 = 1e-8;
const MAX_POINTS: usize = 300;
/// Relative residual above which the model is considered not to fit.
const MISMATCH_RATIO: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    /// Horizontal centre with the mean altitude as `z`.
    pub center: Vec3,
    /// Heading of the `A` axis in (-pi/2, pi/2].
    pub orientation: f64,
    pub a: f64,
    pub b: f64,
    pub altitude: f64,
    pub residual_rms: f64,
    /// +1 when the input points advance in increasing `t`, -1 otherwise.
    pub direction: f64,
    pub iterations: usize,
}

impl CurveFit {
    fn rot(&self) -> Matrix2<f64> {
        rot(self.orientation)
    }

    /// Point on the fitted curve at parameter `t`, at the fitted altitude.
    pub fn point(&self, t: f64) -> Vec3 {
        let (s, c) = t.sin_cos();
        let p = self.rot() * Vector2::new(self.a * s, self.b * s * c);
        Vec3::new(self.center.x + p.x, self.center.y + p.y, self.altitude)
    }

    /// Derivative with respect to `t` (horizontal).
    pub fn tangent(&self, t: f64) -> Vec3 {
        let d = self.rot() * Vector2::new(self.a * t.cos(), self.b * (2.0 * t).cos());
        Vec3::new(d.x, d.y, 0.0)
    }

    pub fn curvature(&self, t: f64) -> f64 {
        let (a, b) = (self.a, self.b);
        let (dx, dy) = (a * t.cos(), b * (2.0 * t).cos());
        let (ddx, ddy) = (-a * t.sin(), -2.0 * b * (2.0 * t).sin());
        (dx * ddy - dy * ddx).abs() / (dx * dx + dy * dy).powf(1.5)
    }

    /// Total arc length by Simpson's rule.
    pub fn arc_length(&self) -> f64 {
        arc_between(self, 0.0, TAU)
    }

    /// Parameter of the curve point nearest to `p` (horizontal distance).
    pub fn project(&self, p: &Vec3) -> f64 {
        let q = Vector2::new(p.x - self.center.x, p.y - self.center.y);
        let local = self.rot().transpose() * q;
        nearest_phase(self.a, self.b, &local)
    }

    pub fn translated(&self, d: &Vec3) -> Self {
        let mut f = *self;
        f.center += Vec3::new(d.x, d.y, 0.0);
        f
    }
}

fn rot(th: f64) -> Matrix2<f64> {
    let (s, c) = th.sin_cos();
    Matrix2::new(c, -s, s, c)
}

fn drot(th: f64) -> Matrix2<f64> {
    let (s, c) = th.sin_cos();
    Matrix2::new(-s, -c, c, -s)
}

/// Arc length between two parameters (t1 > t0) by composite Simpson.
pub fn arc_between(fit: &CurveFit, t0: f64, t1: f64) -> f64 {
    let n = 2000;
    let h = (t1 - t0) / n as f64;
    let g = |t: f64| fit.tangent(t).norm();
    let mut s = g(t0) + g(t1);
    for i in 1..n {
        s += g(t0 + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * h / 3.0
}

fn local_point(a: f64, b: f64, t: f64) -> Vector2<f64> {
    let (s, c) = t.sin_cos();
    Vector2::new(a * s, b * s * c)
}

/// Nearest-phase search on the canonical curve: Newton from every local
/// minimum of a coarse grid, best result wins.
fn nearest_phase(a: f64, b: f64, q: &Vector2<f64>) -> f64 {
    const GRID: usize = 144;
    let d: Vec<f64> = (0..GRID).map(|i| (local_point(a, b, TAU * i as f64 / GRID as f64) - q).norm_squared()).collect();
    let mut best = (f64::INFINITY, 0.0);
    for i in 0..GRID {
        let (prev, next) = (d[(i + GRID - 1) % GRID], d[(i + 1) % GRID]);
        if d[i] > prev || d[i] > next {
            continue;
        }
        let t = refine_phase(a, b, q, TAU * i as f64 / GRID as f64);
        let e = (local_point(a, b, t) - q).norm_squared();
        if e < best.0 {
            best = (e, t);
        }
    }
    best.1
}

fn refine_phase(a: f64, b: f64, q: &Vector2<f64>, mut t: f64) -> f64 {
    for _ in 0..30 {
        let (s, c) = t.sin_cos();
        let r = local_point(a, b, t) - q;
        let d1 = Vector2::new(a * c, b * (2.0 * t).cos());
        let d2 = Vector2::new(-a * s, -2.0 * b * (2.0 * t).sin());
        let g = r.dot(&d1);
        let h = d1.dot(&d1) + r.dot(&d2);
        if h <= 0.0 {
            break;
        }
        let step = (g / h).clamp(-0.05, 0.05);
        t -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    t.rem_euclid(TAU)
}

struct Problem<'a> {
    pts: &'a [Vector2<f64>],
}

impl Problem<'_> {
    fn cost(&self, g: &V5, t: &[f64]) -> f64 {
        let r = rot(g[2]);
        self.pts
            .iter()
            .zip(t)
            .map(|(q, &ti)| (Vector2::new(g[0], g[1]) + r * local_point(g[3], g[4], ti) - q).norm_squared())
            .sum()
    }
}

/// Fits the figure-of-eight to horizontal positions; altitude is the mean `z`.
pub fn fit_curve(points: &[Vec3]) -> Result<CurveFit, EstimationError> {
    if points.len() < 20 {
        return Err(EstimationError::NotReady { have: points.len(), need: 20 });
    }
    let stride = points.len().div_ceil(MAX_POINTS);
    let sample: Vec<Vec3> = points.iter().step_by(stride).copied().collect();
    let pts: Vec<Vector2<f64>> = sample.iter().map(|p| Vector2::new(p.x, p.y)).collect();
    let altitude = points.iter().map(|p| p.z).sum::<f64>() / points.len() as f64;
    let n = pts.len() as f64;

    // principal axes
    let mean = pts.iter().sum::<Vector2<f64>>() / n;
    let cov = pts.iter().map(|p| (p - mean) * (p - mean).transpose()).sum::<Matrix2<f64>>() / n;
    let eig = cov.symmetric_eigen();
    let (i1, i2) = if eig.eigenvalues[0] >= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let axis = eig.eigenvectors.column(i1);
    let s1 = eig.eigenvalues[i1].max(0.0).sqrt();
    let s2 = eig.eigenvalues[i2].max(0.0).sqrt();
    if s1 < 1e-9 {
        return Err(EstimationError::FitFailed {
            residual_rms: f64::NAN,
            iterations: 0,
            reason: "points do not span an area".into(),
        });
    }
    let mut g = V5::new(mean.x, mean.y, axis[1].atan2(axis[0]), 2.0 * s1, 2.0 * s2.max(1e-3 * s1));
    let init_phases = |g: &V5| -> Vec<f64> {
        let rt = rot(g[2]).transpose();
        pts.iter().map(|q| nearest_phase(g[3], g[4], &(rt * (q - Vector2::new(g[0], g[1]))))).collect()
    };
    let mut t = init_phases(&g);
    let prob = Problem { pts: &pts };
    let mut cost = prob.cost(&g, &t);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    for it in 0..MAX_ITER {
        iterations = it + 1;
        let r = rot(g[2]);
        let dr = drot(g[2]);
        let mut hgg = M5::zeros();
        let mut bg = V5::zeros();
        let mut hgt = Vec::with_capacity(pts.len());
        let mut htt = Vec::with_capacity(pts.len());
        let mut bt = Vec::with_capacity(pts.len());
        for (q, &ti) in pts.iter().zip(&t) {
            let (s, c) = ti.sin_cos();
            let loc = local_point(g[3], g[4], ti);
            let res = Vector2::new(g[0], g[1]) + r * loc - q;
            let mut jg = SMatrix::<f64, 2, 5>::zeros();
            jg[(0, 0)] = 1.0;
            jg[(1, 1)] = 1.0;
            jg.set_column(2, &(dr * loc));
            jg.set_column(3, &(r * Vector2::new(s, 0.0)));
            jg.set_column(4, &(r * Vector2::new(0.0, s * c)));
            let jt = r * Vector2::new(g[3] * c, g[4] * (2.0 * ti).cos());
            hgg += jg.transpose() * jg;
            bg -= jg.transpose() * res;
            hgt.push(jg.transpose() * jt);
            htt.push(jt.dot(&jt));
            bt.push(-jt.dot(&res));
        }

        let mut accepted = false;
        for _ in 0..30 {
            let mut s = hgg;
            for k in 0..5 {
                s[(k, k)] += lambda * (hgg[(k, k)] + 1e-12);
            }
            let mut rhs = bg;
            let dtt: Vec<f64> = htt.iter().map(|h| h * (1.0 + lambda) + 1e-12).collect();
            for i in 0..pts.len() {
                s -= hgt[i] * hgt[i].transpose() / dtt[i];
                rhs -= hgt[i] * (bt[i] / dtt[i]);
            }
            let Some(dg) = s.lu().solve(&rhs) else {
                lambda *= 10.0;
                continue;
            };
            let dt: Vec<f64> = (0..pts.len()).map(|i| (bt[i] - hgt[i].dot(&dg)) / dtt[i]).collect();
            let g_new = g + dg;
            let t_new: Vec<f64> = t.iter().zip(&dt).map(|(a, b)| a + b).collect();
            let c_new = prob.cost(&g_new, &t_new);
            let step = (dg.norm_squared() + dt.iter().map(|x| x * x).sum::<f64>()).sqrt();
            if c_new <= cost {
                let rel_drop = (cost - c_new) / cost.max(1e-300);
                g = g_new;
                t = t_new;
                // let points hop to a better branch when the local phase is stuck
                let rt = rot(g[2]).transpose();
                let r = rot(g[2]);
                let c0 = Vector2::new(g[0], g[1]);
                for (q, ti) in pts.iter().zip(t.iter_mut()) {
                    let cand = nearest_phase(g[3], g[4], &(rt * (q - c0)));
                    let e_old = (c0 + r * local_point(g[3], g[4], *ti) - q).norm_squared();
                    let e_new = (c0 + r * local_point(g[3], g[4], cand) - q).norm_squared();
                    if e_new < e_old {
                        *ti = cand;
                    }
                }
                cost = prob.cost(&g, &t);
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if step < STEP_TOL || rel_drop < 1e-15 || cost < 1e-28 {
                    converged = true;
                }
                break;
            }
            if step < STEP_TOL {
                converged = true;
                break;
            }
            lambda *= 4.0;
        }
        if converged || !accepted {
            converged = converged || !accepted;
            break;
        }
    }

    let residual_rms = (cost / n).sqrt();
    // the point set is unchanged by a -> |a|, b -> |b| and th -> th + pi
    let (a, b) = (g[3].abs(), g[4].abs());
    let mut th = g[2].rem_euclid(PI);
    if th > PI / 2.0 {
        th -= PI;
    }
    let mut fit = CurveFit {
        center: Vec3::new(g[0], g[1], altitude),
        orientation: th,
        a,
        b,
        altitude,
        residual_rms,
        direction: 1.0,
        iterations,
    };
    let scale = a.max(b);
    if !converged || !residual_rms.is_finite() || residual_rms > MISMATCH_RATIO * scale || b < 1e-6 * scale {
        return Err(EstimationError::FitFailed {
            residual_rms,
            iterations,
            reason: if converged { "model mismatch".into() } else { "no convergence".into() },
        });
    }
    // traversal direction from the phase trend of the input order
    let phases: Vec<f64> = sample.iter().map(|p| fit.project(p)).collect();
    let trend: f64 = phases
        .windows(2)
        .map(|w| (w[1] - w[0] + PI).rem_euclid(TAU) - PI)
        // branch hops at the crossing carry no direction information
        .filter(|d| d.abs() < PI / 2.0)
        .sum();
    fit.direction = if trend >= 0.0 { 1.0 } else { -1.0 };
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StandoffParams {
    /// Distance ahead of the crossing along the target's heading, as a
    /// fraction of the total arc length.
    pub ahead_fraction: f64,
    /// Sideways offset from the path, m.
    pub lateral_m: f64,
    /// Required clearance from the fence, m.
    pub fence_margin_m: f64,
}

impl Default for StandoffParams {
    fn default() -> Self {
        Self { ahead_fraction: 0.05, lateral_m: 1.0, fence_margin_m: 1.5 }
    }
}

/// Waiting point beside the straight sweep through the crossing, ahead of the
/// target so it comes straight at the interceptor. Returns the point and the
/// heading the interceptor should face.
pub fn standoff_point(fit: &CurveFit, hull: &FenceHull, p: &StandoffParams) -> Result<(Vec3, f64), EstimationError> {
    let ahead = p.ahead_fraction * fit.arc_length();
    // both sweeps through the crossing have zero curvature
    for t0 in [0.0, PI] {
        let dir = fit.tangent(t0).normalize() * fit.direction;
        let side = Vec3::new(-dir.y, dir.x, 0.0);
        for lat in [p.lateral_m, -p.lateral_m, 0.0] {
            let q = fit.point(t0) + dir * ahead + side * lat;
            if hull.signed_distance(&q) <= -p.fence_margin_m {
                let face = (-dir.y).atan2(-dir.x);
                return Ok((q, face));
            }
        }
    }
    Err(EstimationError::InfeasibleStandoff)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn truth(cx: f64, cy: f64, th: f64, a: f64, b: f64, z: f64) -> CurveFit {
        CurveFit {
            center: Vec3::new(cx, cy, z),
            orientation: th,
            a,
            b,
            altitude: z,
            residual_rms: 0.0,
            direction: 1.0,
            iterations: 0,
        }
    }

    fn sample(c: &CurveFit, n: usize, t0: f64, span: f64) -> Vec<Vec3> {
        (0..n).map(|i| c.point(t0 + span * i as f64 / n as f64)).collect()
    }

    fn ang_diff_mod_pi(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(PI);
        d.min(PI - d)
    }

    #[test]
    fn noiseless_round_trip() {
        let c = truth(3.0, -2.0, 18f64.to_radians(), 10.0, 5.0, 8.0);
        let f = fit_curve(&sample(&c, 200, 0.3, TAU)).unwrap();
        assert!((f.a - 10.0).abs() < 0.1);
        assert!((f.b - 5.0).abs() < 0.05);
        assert!(ang_diff_mod_pi(f.orientation, c.orientation) < 0.01 * c.orientation);
        assert!((f.center - c.center).norm() < 1e-6, "{f:?}");
        assert!(f.residual_rms < 1e-6);
        assert_eq!(f.direction, 1.0);
    }

    #[test]
    fn reversed_input_flips_direction() {
        let c = truth(0.0, 0.0, 0.4, 12.0, 6.0, 5.0);
        let mut pts = sample(&c, 150, 0.0, TAU);
        pts.reverse();
        assert_eq!(fit_curve(&pts).unwrap().direction, -1.0);
    }

    #[test]
    fn circle_is_rejected() {
        let pts: Vec<Vec3> = (0..100)
            .map(|i| {
                let a = TAU * i as f64 / 100.0;
                Vec3::new(10.0 * a.cos(), 10.0 * a.sin(), 5.0)
            })
            .collect();
        assert!(matches!(fit_curve(&pts), Err(EstimationError::FitFailed { .. })));
    }

    #[test]
    fn altitude_is_the_mean() {
        let c = truth(0.0, 0.0, 0.0, 10.0, 5.0, 0.0);
        let mut pts = sample(&c, 100, 0.0, TAU);
        for (i, p) in pts.iter_mut().enumerate() {
            p.z = 5.0 + 10.0 * (i as f64 / 99.0);
        }
        let f = fit_curve(&pts).unwrap();
        assert!((5.0..=15.0).contains(&f.altitude));
        assert_relative_eq!(f.altitude, 10.0, epsilon = 1e-9);
    }

    #[test]
    fn standoff_sits_near_the_crossing() {
        let c = truth(0.0, 0.0, 0.0, 10.0, 5.0, 8.0);
        let hull = FenceHull::cuboid(Vec3::new(-30.0, -30.0, 0.0), Vec3::new(30.0, 30.0, 20.0)).unwrap();
        let (q, _) = standoff_point(&c, &hull, &StandoffParams::default()).unwrap();
        // oracle: minimum-curvature samples and arc-length distance along a dense polyline
        let n = 4000;
        let ts: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
        let pts: Vec<Vec3> = ts.iter().map(|&t| c.point(t)).collect();
        let mut s = vec![0.0; n];
        for i in 1..n {
            s[i] = s[i - 1] + (pts[i] - pts[i - 1]).norm();
        }
        let total = s[n - 1] + (pts[0] - pts[n - 1]).norm();
        let kmin = ts.iter().map(|&t| c.curvature(t)).fold(f64::INFINITY, f64::min);
        let flat: Vec<usize> = (0..n).filter(|&i| c.curvature(ts[i]) <= kmin + 1e-9).collect();
        let near = (0..n).min_by(|&i, &j| (pts[i] - q).norm().total_cmp(&(pts[j] - q).norm())).unwrap();
        let arc_gap = flat
            .iter()
            .map(|&i| {
                let d = (s[near] - s[i]).abs();
                d.min(total - d)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(arc_gap <= 0.1 * total, "gap {arc_gap} of {total}");
        assert!(hull.contains(&q));
        assert_relative_eq!(q.z, 8.0);

        let shifted = c.translated(&Vec3::new(10.0, 0.0, 0.0));
        let (q2, _) = standoff_point(&shifted, &hull, &StandoffParams::default()).unwrap();
        assert_relative_eq!(q2 - q, Vec3::new(10.0, 0.0, 0.0), epsilon = 1e-9);
    }

    #[test]
    fn standoff_outside_tiny_fence_is_infeasible() {
        let c = truth(0.0, 0.0, 0.0, 10.0, 5.0, 8.0);
        let hull = FenceHull::cuboid(Vec3::new(50.0, 50.0, 0.0), Vec3::new(60.0, 60.0, 20.0)).unwrap();
        assert!(matches!(
            standoff_point(&c, &hull, &StandoffParams::default()),
            Err(EstimationError::InfeasibleStandoff)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn fit_is_equivariant(phi in -3.0f64..3.0, dx in -20.0f64..20.0, dy in -20.0f64..20.0) {
            let c = truth(1.0, 2.0, 0.3, 10.0, 5.0, 6.0);
            let pts = sample(&c, 120, 0.0, TAU);
            let f0 = fit_curve(&pts).unwrap();
            let (s, co) = phi.sin_cos();
            let moved: Vec<Vec3> = pts
                .iter()
                .map(|p| Vec3::new(co * p.x - s * p.y + dx, s * p.x + co * p.y + dy, p.z))
                .collect();
            let f1 = fit_curve(&moved).unwrap();
            let c0 = f0.center;
            let expect = Vec3::new(co * c0.x - s * c0.y + dx, s * c0.x + co * c0.y + dy, c0.z);
            prop_assert!((f1.center - expect).norm() < 1e-6);
            prop_assert!(ang_diff_mod_pi(f1.orientation, f0.orientation + phi) < 1e-6);
            prop_assert!((f1.a - f0.a).abs() < 1e-6 && (f1.b - f0.b).abs() < 1e-6);
        }
    }
}
