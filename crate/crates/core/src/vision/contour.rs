use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::VisionError;

/// Shape statistics of one segmented blob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContourStats {
    /// px^2
    pub area: f64,
    /// px
    pub perimeter: f64,
    /// Raw image coordinates of the blob centre.
    pub center: (f64, f64),
    /// Radius of the smallest circle enclosing the contour, px.
    pub enclosing_radius: f64,
    /// Image distance from the bottom of the carrying UAV's box to the blob centre, px.
    pub distance_below_uav: f64,
}

impl ContourStats {
    /// Ideal disc of the given apparent radius.
    pub fn disc(center: (f64, f64), radius: f64, distance_below_uav: f64) -> Self {
        Self {
            area: PI * radius * radius,
            perimeter: 2.0 * PI * radius,
            center,
            enclosing_radius: radius,
            distance_below_uav,
        }
    }

    /// Statistics of a simple closed polygon (vertices in order, not repeated).
    pub fn from_polygon(vertices: &[(f64, f64)], distance_below_uav: f64) -> Self {
        let n = vertices.len();
        let mut area2 = 0.0;
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut perimeter = 0.0;
        for i in 0..n {
            let (x0, y0) = vertices[i];
            let (x1, y1) = vertices[(i + 1) % n];
            let cross = x0 * y1 - x1 * y0;
            area2 += cross;
            cx += (x0 + x1) * cross;
            cy += (y0 + y1) * cross;
            perimeter += (x1 - x0).hypot(y1 - y0);
        }
        let area = area2.abs() / 2.0;
        let center = if area2.abs() > 0.0 {
            (cx / (3.0 * area2), cy / (3.0 * area2))
        } else {
            vertices.first().copied().unwrap_or((0.0, 0.0))
        };
        let (_, enclosing_radius) = min_enclosing_circle(vertices);
        Self { area, perimeter, center, enclosing_radius, distance_below_uav }
    }
}

/// Ball search parameters used by the score gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BallSearchConfig {
    /// Ball radius, m.
    pub ball_radius_m: f64,
    /// Suspension rod length, m.
    pub rod_length_m: f64,
    /// Tolerance on the rod-length mismatch, px.
    pub tolerance_px: f64,
}

impl Default for BallSearchConfig {
    fn default() -> Self {
        Self { ball_radius_m: 0.05, rod_length_m: 1.45, tolerance_px: 12.0 }
    }
}

/// `4*pi*Area / Perimeter^2`. Can exceed 1 for pixelated contours.
pub fn circularity(c: &ContourStats) -> Result<f64, VisionError> {
    if !(c.perimeter > 0.0) {
        return Err(VisionError::DegenerateContour(c.perimeter));
    }
    Ok(4.0 * PI * c.area / (c.perimeter * c.perimeter))
}

/// Circularity when the observed rod length matches the length implied by the
/// blob size, -1 otherwise.
pub fn score(c: &ContourStats, cfg: &BallSearchConfig) -> f64 {
    if !(c.enclosing_radius > 0.0) {
        return -1.0;
    }
    let expected_rod_px = cfg.rod_length_m * c.enclosing_radius / cfg.ball_radius_m;
    if (c.distance_below_uav - expected_rod_px).abs() <= cfg.tolerance_px {
        circularity(c).unwrap_or(-1.0)
    } else {
        -1.0
    }
}

/// Smallest enclosing circle (incremental Welzl, no shuffling).
pub fn min_enclosing_circle(points: &[(f64, f64)]) -> ((f64, f64), f64) {
    fn inside(c: (f64, f64), r: f64, p: (f64, f64)) -> bool {
        (p.0 - c.0).hypot(p.1 - c.1) <= r * (1.0 + 1e-12) + 1e-12
    }
    fn two(a: (f64, f64), b: (f64, f64)) -> ((f64, f64), f64) {
        let c = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
        (c, (a.0 - c.0).hypot(a.1 - c.1))
    }
    fn three(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> ((f64, f64), f64) {
        let (bx, by) = (b.0 - a.0, b.1 - a.1);
        let (cx, cy) = (c.0 - a.0, c.1 - a.1);
        let d = 2.0 * (bx * cy - by * cx);
        if d.abs() < 1e-18 {
            // collinear: widest pair
            let cands = [two(a, b), two(a, c), two(b, c)];
            return cands.into_iter().max_by(|x, y| x.1.total_cmp(&y.1)).unwrap();
        }
        let b2 = bx * bx + by * by;
        let c2 = cx * cx + cy * cy;
        let ux = (cy * b2 - by * c2) / d;
        let uy = (bx * c2 - cx * b2) / d;
        ((a.0 + ux, a.1 + uy), ux.hypot(uy))
    }

    match points.len() {
        0 => return ((0.0, 0.0), 0.0),
        1 => return (points[0], 0.0),
        _ => {}
    }
    let mut c = points[0];
    let mut r = 0.0;
    for i in 1..points.len() {
        if inside(c, r, points[i]) {
            continue;
        }
        (c, r) = (points[i], 0.0);
        for j in 0..i {
            if inside(c, r, points[j]) {
                continue;
            }
            (c, r) = two(points[i], points[j]);
            for k in 0..j {
                if !inside(c, r, points[k]) {
                    (c, r) = three(points[i], points[j], points[k]);
                }
            }
        }
    }
    (c, r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn stats(area: f64, perimeter: f64) -> ContourStats {
        ContourStats { area, perimeter, center: (0.0, 0.0), enclosing_radius: 1.0, distance_below_uav: 0.0 }
    }

    #[test]
    fn circularity_examples() {
        let r = 7.5;
        assert_relative_eq!(circularity(&stats(PI * r * r, 2.0 * PI * r)).unwrap(), 1.0, epsilon = 1e-15);
        let s = 3.0;
        assert_relative_eq!(circularity(&stats(s * s, 4.0 * s)).unwrap(), PI / 4.0, epsilon = 1e-15);
        assert_relative_eq!(circularity(&stats(100.0, 40.0)).unwrap(), 4.0 * PI * 100.0 / 1600.0, epsilon = 1e-15);
        assert!(matches!(circularity(&stats(1.0, 0.0)), Err(VisionError::DegenerateContour(_))));
    }

    #[test]
    fn score_examples() {
        let cfg = BallSearchConfig { ball_radius_m: 0.05, rod_length_m: 1.45, tolerance_px: 5.0 };
        // rod 1.45 m, ball 0.05 m, r_b 10 px -> expected rod image length 290 px
        let mut c = ContourStats {
            area: 0.9 * 40.0 * 40.0 / (4.0 * PI),
            perimeter: 40.0,
            center: (0.0, 0.0),
            enclosing_radius: 10.0,
            distance_below_uav: 290.0,
        };
        assert_relative_eq!(score(&c, &cfg), 0.9, epsilon = 1e-12);
        c.distance_below_uav = 289.0;
        assert_relative_eq!(score(&c, &cfg), 0.9, epsilon = 1e-12);
        c.distance_below_uav = 296.0;
        assert_eq!(score(&c, &cfg), -1.0);
    }

    #[test]
    fn polygon_stats_of_square() {
        let sq = [(0.0, 0.0), (2.0, 0.0), (2.0, 2.0), (0.0, 2.0)];
        let s = ContourStats::from_polygon(&sq, 0.0);
        assert_relative_eq!(s.area, 4.0);
        assert_relative_eq!(s.perimeter, 8.0);
        assert_relative_eq!(s.center.0, 1.0);
        assert_relative_eq!(s.center.1, 1.0);
        assert_relative_eq!(s.enclosing_radius, 2f64.sqrt(), epsilon = 1e-12);
    }

    fn star_polygon(radii: &[f64]) -> Vec<(f64, f64)> {
        let n = radii.len();
        radii
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let a = 2.0 * PI * i as f64 / n as f64;
                (r * a.cos(), r * a.sin())
            })
            .collect()
    }

    proptest! {
        #[test]
        fn polygons_never_beat_the_circle(radii in prop::collection::vec(0.5f64..5.0, 3..40)) {
            let s = ContourStats::from_polygon(&star_polygon(&radii), 0.0);
            prop_assert!(circularity(&s).unwrap() <= 1.0 + 1e-12);
        }

        #[test]
        fn score_is_minus_one_or_nonnegative(
            area in 0.1f64..1e4, perimeter in 0.1f64..1e3, rb in 0.1f64..50.0, lr in 0.0f64..2000.0
        ) {
            let c = ContourStats { area, perimeter, center: (0.0, 0.0), enclosing_radius: rb, distance_below_uav: lr };
            let s = score(&c, &BallSearchConfig::default());
            prop_assert!(s == -1.0 || s >= 0.0);
        }

        #[test]
        fn enclosing_circle_contains_points(pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..30)) {
            let (c, r) = min_enclosing_circle(&pts);
            for p in &pts {
                prop_assert!((p.0 - c.0).hypot(p.1 - c.1) <= r + 1e-9);
            }
        }
    }
}
