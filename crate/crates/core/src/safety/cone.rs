use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::SafetyError;
use crate::geometry::{Vec3, VehicleState};

/// Relative motion of `b` seen from `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeKinematics {
    /// Separation, m.
    pub r0: f64,
    /// Range rate, negative when closing.
    pub v_r0: f64,
    pub v_theta0: f64,
    pub v_phi0: f64,
    /// Unit line of sight from `a` to `b`.
    pub los: Vec3,
}

impl RelativeKinematics {
    pub fn transverse_speed(&self) -> f64 {
        self.v_theta0.hypot(self.v_phi0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AvoidanceParams {
    pub k_avoid: f64,
    /// Activation distance, m.
    pub d_act: f64,
    /// Safe-sphere radius, m.
    pub r_safe: f64,
}

impl Default for AvoidanceParams {
    fn default() -> Self {
        Self { k_avoid: 2.0, d_act: 10.0, r_safe: 3.0 }
    }
}

pub fn relative_kinematics(a: &VehicleState, b: &VehicleState) -> Result<RelativeKinematics, SafetyError> {
    relative_kinematics_raw(&a.position, &a.velocity, &b.position, &b.velocity)
}

pub fn relative_kinematics_raw(pa: &Vec3, va: &Vec3, pb: &Vec3, vb: &Vec3) -> Result<RelativeKinematics, SafetyError> {
    let d = pb - pa;
    let r0 = d.norm();
    if !(r0 > 1e-12) {
        return Err(SafetyError::Coincident);
    }
    let los = d / r0;
    let v = vb - va;
    let v_r0 = v.dot(&los);
    // transverse basis: horizontal unit normal to the LOS, then the third axis
    let mut e_theta = los.cross(&Vec3::z());
    if e_theta.norm() < 1e-9 {
        e_theta = los.cross(&Vec3::x());
    }
    let e_theta = e_theta.normalize();
    let e_phi = los.cross(&e_theta);
    Ok(RelativeKinematics { r0, v_r0, v_theta0: v.dot(&e_theta), v_phi0: v.dot(&e_phi), los })
}

/// Closing, and the straight-line miss distance is within `r_safe`.
pub fn in_collision_cone(k: &RelativeKinematics, r_safe: f64) -> bool {
    let vt2 = k.v_theta0 * k.v_theta0 + k.v_phi0 * k.v_phi0;
    k.r0 * k.r0 * vt2 <= r_safe * r_safe * (vt2 + k.v_r0 * k.v_r0) && k.v_r0 < 0.0
}

/// Push away from the other vehicle along the line of sight. `priority` is
/// this vehicle's priority compared with the other's; the higher one holds
/// its course.
pub fn avoidance_accel(k: &RelativeKinematics, priority: Ordering, p: &AvoidanceParams) -> Vec3 {
    if priority == Ordering::Greater || !in_collision_cone(k, p.r_safe) || k.r0 >= p.d_act {
        return Vec3::zeros();
    }
    let a = p.k_avoid * k.v_r0.abs() * (p.d_act - k.r0) / p.d_act;
    -k.los * a
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn st(p: [f64; 3], v: [f64; 3]) -> VehicleState {
        VehicleState { position: Vec3::from(p), velocity: Vec3::from(v), ..Default::default() }
    }

    #[test]
    fn kinematics_examples() {
        let k = relative_kinematics(&st([0.0; 3], [1.0, 2.0, 0.0]), &st([5.0, 0.0, 0.0], [1.0, 2.0, 0.0])).unwrap();
        assert_eq!(k.v_r0, 0.0);
        assert_eq!(k.transverse_speed(), 0.0);
        let k = relative_kinematics(&st([0.0; 3], [2.5, 0.0, 0.0]), &st([5.0, 0.0, 0.0], [-2.5, 0.0, 0.0])).unwrap();
        assert_relative_eq!(k.v_r0, -5.0);
        assert_relative_eq!(k.transverse_speed(), 0.0);
        assert!(relative_kinematics(&st([1.0; 3], [0.0; 3]), &st([1.0; 3], [1.0; 3])).is_err());
    }

    #[test]
    fn components_are_pythagorean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let mut r = || {
                Vec3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0))
            };
            let (pa, va, pb, vb) = (r(), r(), r(), r());
            let k = relative_kinematics_raw(&pa, &va, &pb, &vb).unwrap();
            let v = vb - va;
            assert_relative_eq!(
                k.v_r0.powi(2) + k.v_theta0.powi(2) + k.v_phi0.powi(2),
                v.norm_squared(),
                epsilon = 1e-9
            );
            assert_relative_eq!(k.transverse_speed(), (v - k.los * k.v_r0).norm(), epsilon = 1e-9);
        }
    }

    #[test]
    fn cone_examples() {
        let k = |r0, vr, vt, vp| RelativeKinematics { r0, v_r0: vr, v_theta0: vt, v_phi0: vp, los: Vec3::x() };
        assert!(in_collision_cone(&k(10.0, -1.0, 0.0, 0.0), 2.0));
        assert!(!in_collision_cone(&k(10.0, 0.0, 0.0, 0.0), 2.0));
        assert!(!in_collision_cone(&k(10.0, 1.0, 0.0, 0.0), 2.0));
        let kk = k(10.0, -5.0, 1.0, 0.0);
        assert!(in_collision_cone(&kk, 2.0));
        assert_relative_eq!(10.0 / 26f64.sqrt(), 1.961, epsilon = 1e-3);
    }

    #[test]
    fn priority_and_symmetry() {
        let p = AvoidanceParams::default();
        let a = st([0.0; 3], [2.0, 0.0, 0.0]);
        let b = st([6.0, 0.5, 0.0], [-2.0, 0.0, 0.0]);
        let kab = relative_kinematics(&a, &b).unwrap();
        let kba = relative_kinematics(&b, &a).unwrap();
        assert_eq!(avoidance_accel(&kab, Ordering::Greater, &p), Vec3::zeros());
        let aa = avoidance_accel(&kab, Ordering::Equal, &p);
        let ab = avoidance_accel(&kba, Ordering::Equal, &p);
        assert!(aa.norm() > 0.0);
        assert_relative_eq!(aa, -ab, epsilon = 1e-12);
        // pointing away from b
        assert!(aa.dot(&(b.position - a.position)) < 0.0);
    }
}
