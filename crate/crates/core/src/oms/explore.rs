use serde::{Deserialize, Serialize};

use super::OmsError;
use crate::geometry::Vec3;
use crate::safety::FenceHull;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExploreKind {
    Ball,
    Balloon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExploreParams {
    pub altitude_m: f64,
    /// Row spacing of the lawn-mower grid.
    pub spacing_m: f64,
    /// Minimum clearance from every fence face.
    pub margin_m: f64,
    /// Sweep line for the ball search (world y).
    pub lane_y_m: f64,
}

impl Default for ExploreParams {
    fn default() -> Self {
        Self { altitude_m: 2.5, spacing_m: 10.0, margin_m: 1.5, lane_y_m: 5.0 }
    }
}

/// Waypoints flown in a loop. `headings[i]` is held while flying to
/// `waypoints[i]`; `None` means face the waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorePlan {
    pub waypoints: Vec<Vec3>,
    pub headings: Vec<Option<f64>>,
}

/// Portion of the line `y = y0, z = z0` that keeps `margin` inside the hull.
fn row_interval(hull: &FenceHull, y: f64, z: f64, margin: f64) -> Option<(f64, f64)> {
    let inside = |x: f64| hull.signed_distance(&Vec3::new(x, y, z)) <= -margin;
    let (lo, hi) = hull.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v.x), b.max(v.x)));
    let n = (((hi - lo) / 0.25).ceil() as usize).max(1);
    let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let first = xs.iter().position(|x| inside(*x))?;
    let last = xs.iter().rposition(|x| inside(*x))?;
    let refine = |mut a: f64, mut b: f64| {
        // a outside, b inside
        for _ in 0..50 {
            let m = 0.5 * (a + b);
            if inside(m) {
                b = m;
            } else {
                a = m;
            }
        }
        b
    };
    let x0 = if first > 0 { refine(xs[first - 1], xs[first]) } else { xs[first] };
    let x1 = if last < n { refine(xs[last + 1], xs[last]) } else { xs[last] };
    Some((x0, x1))
}

pub fn exploration_waypoints(kind: ExploreKind, hull: &FenceHull, p: &ExploreParams) -> Result<ExplorePlan, OmsError> {
    let z = p.altitude_m;
    match kind {
        ExploreKind::Balloon => {
            let (ylo, yhi) =
                hull.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v.y), b.max(v.y)));
            let (ylo, yhi) = (ylo + p.margin_m, yhi - p.margin_m);
            if !(yhi >= ylo) || !(p.spacing_m > 0.0) {
                return Err(OmsError::NoCoverage);
            }
            let rows = ((yhi - ylo) / p.spacing_m).floor() as usize + 1;
            let y0 = ylo + ((yhi - ylo) - (rows - 1) as f64 * p.spacing_m) / 2.0;
            let mut wps = Vec::new();
            for r in 0..rows {
                let y = y0 + r as f64 * p.spacing_m;
                let Some((x0, x1)) = row_interval(hull, y, z, p.margin_m) else {
                    continue;
                };
                if r % 2 == 0 {
                    wps.extend([Vec3::new(x0, y, z), Vec3::new(x1, y, z)]);
                } else {
                    wps.extend([Vec3::new(x1, y, z), Vec3::new(x0, y, z)]);
                }
            }
            if wps.is_empty() {
                return Err(OmsError::NoCoverage);
            }
            let headings = vec![None; wps.len()];
            Ok(ExplorePlan { waypoints: wps, headings })
        }
        ExploreKind::Ball => {
            let (x0, x1) = row_interval(hull, p.lane_y_m, z, p.margin_m).ok_or(OmsError::NoCoverage)?;
            let mid = Vec3::new(0.5 * (x0 + x1), p.lane_y_m, z);
            let c = hull.centroid();
            // face the side of the lane the arena lies on
            let heading = if c.y >= mid.y { std::f64::consts::FRAC_PI_2 } else { -std::f64::consts::FRAC_PI_2 };
            Ok(ExplorePlan {
                waypoints: vec![Vec3::new(x0, p.lane_y_m, z), Vec3::new(x1, p.lane_y_m, z)],
                headings: vec![Some(heading); 2],
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::wrap_angle;

    fn arena() -> FenceHull {
        FenceHull::cuboid(Vec3::zeros(), Vec3::new(100.0, 40.0, 20.0)).unwrap()
    }

    #[test]
    fn serpentine_rows() {
        let plan = exploration_waypoints(ExploreKind::Balloon, &arena(), &ExploreParams::default()).unwrap();
        let w = &plan.waypoints;
        assert_eq!(w.len(), 8);
        let ys: Vec<f64> = w.chunks(2).map(|r| r[0].y).collect();
        assert_eq!(ys, vec![5.0, 15.0, 25.0, 35.0]);
        for (i, r) in w.chunks(2).enumerate() {
            let dir = (r[1].x - r[0].x).signum();
            assert_eq!(dir, if i % 2 == 0 { 1.0 } else { -1.0 });
            assert_eq!(r[0].y, r[1].y);
        }
    }

    #[test]
    fn ball_sweep_faces_inward() {
        let h = arena();
        for (lane, want) in [(6.0, 90.0f64), (34.0, -90.0)] {
            let p = ExploreParams { lane_y_m: lane, altitude_m: 8.5, ..ExploreParams::default() };
            let plan = exploration_waypoints(ExploreKind::Ball, &h, &p).unwrap();
            let path_dir = (plan.waypoints[1] - plan.waypoints[0]).normalize();
            let path_heading = path_dir.y.atan2(path_dir.x);
            for hd in plan.headings.iter().flatten() {
                assert!((wrap_angle(hd - path_heading).abs() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
                assert!((hd.to_degrees() - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn waypoints_keep_the_margin() {
        let h = quickhull_arena();
        for kind in [ExploreKind::Ball, ExploreKind::Balloon] {
            let p = ExploreParams { lane_y_m: 4.0, altitude_m: 3.0, ..ExploreParams::default() };
            let plan = exploration_waypoints(kind, &h, &p).unwrap();
            for w in &plan.waypoints {
                assert!(h.signed_distance(w) <= -p.margin_m + 1e-9, "{w:?}");
            }
        }
    }

    fn quickhull_arena() -> FenceHull {
        // skewed pentagonal prism
        let base = [(0.0, 0.0), (60.0, -5.0), (80.0, 20.0), (50.0, 42.0), (5.0, 35.0)];
        let pts: Vec<Vec3> = base.iter().flat_map(|(x, y)| [Vec3::new(*x, *y, 0.0), Vec3::new(*x, *y, 15.0)]).collect();
        crate::safety::quickhull3(&pts).unwrap()
    }
}
