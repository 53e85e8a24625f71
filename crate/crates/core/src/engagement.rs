//! Gripper sizing from the virtual intercept sphere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Design values used on the built vehicles, m.
pub const DESIGN_GRABBER_RADIUS: f64 = 0.200;
pub const DESIGN_POPPER_RADIUS: f64 = 0.100;
/// Tail-chase equivalent radius quoted for the grabber, m. Reported, not derived.
pub const REPORTED_TAIL_CHASE_REQ: f64 = 0.085;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngagementError {
    #[error("zero relative speed: engagement undefined")]
    ZeroRelativeSpeed,
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizingMode {
    Grab,
    Pop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizingScenario {
    pub r0: f64,
    pub v_r0: f64,
    pub v_theta0: f64,
    pub v_phi0: f64,
    pub object_radius: f64,
    pub mode: SizingMode,
}

/// Smallest intercept-sphere radius that turns the given relative motion into
/// a hit: `r0 * sqrt(Vt^2 / (Vt^2 + Vr^2))`.
pub fn min_equivalent_radius(s: &SizingScenario) -> Result<f64, EngagementError> {
    if !(s.r0 > 0.0) {
        return Err(EngagementError::Invalid(format!("r0 = {}", s.r0)));
    }
    let vt2 = s.v_theta0 * s.v_theta0 + s.v_phi0 * s.v_phi0;
    let v2 = vt2 + s.v_r0 * s.v_r0;
    if v2 == 0.0 {
        return Err(EngagementError::ZeroRelativeSpeed);
    }
    Ok(s.r0 * (vt2 / v2).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GripperSize {
    pub radius: f64,
    /// Set when the pop sphere is already covered by the balloon itself.
    pub nominal_contact: bool,
}

/// Gripper radius from the equivalent radius: `R_eq + R_ball` for grabbing,
/// `R_eq - R_balloon` (floored at zero) for popping.
pub fn gripper_radius(r_eq: f64, object_radius: f64, mode: SizingMode) -> Result<GripperSize, EngagementError> {
    if !(r_eq >= 0.0) || !(object_radius > 0.0) {
        return Err(EngagementError::Invalid(format!("R_eq = {r_eq}, R_object = {object_radius}")));
    }
    Ok(match mode {
        SizingMode::Grab => GripperSize { radius: r_eq + object_radius, nominal_contact: false },
        SizingMode::Pop if r_eq <= object_radius => GripperSize { radius: 0.0, nominal_contact: true },
        SizingMode::Pop => GripperSize { radius: r_eq - object_radius, nominal_contact: false },
    })
}

/// Equivalent sphere radius seen by the contact check: `R_gripper - R_ball`
/// when grabbing, `R_gripper + R_balloon` when popping.
pub fn equivalent_radius(gripper: f64, object_radius: f64, mode: SizingMode) -> f64 {
    match mode {
        SizingMode::Grab => gripper - object_radius,
        SizingMode::Pop => gripper + object_radius,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SizingRow {
    pub case: String,
    pub r_eq_mm: f64,
    pub gripper_mm: Option<f64>,
    pub design_mm: Option<f64>,
    pub note: String,
}

/// Popper approaching a stationary balloon at `speed` with `angle` off the
/// line of sight.
pub fn balloon_approach(r0: f64, speed: f64, angle: f64, balloon_radius: f64) -> SizingScenario {
    SizingScenario {
        r0,
        v_r0: speed * angle.cos(),
        v_theta0: speed * angle.sin(),
        v_phi0: 0.0,
        object_radius: balloon_radius,
        mode: SizingMode::Pop,
    }
}

/// The standard table: head-on grab, tail-chase grab, balloon pop.
pub fn sizing_table(
    head_on: &SizingScenario,
    tail_chase_req: f64,
    ball_radius: f64,
    balloon: &SizingScenario,
) -> Result<Vec<SizingRow>, EngagementError> {
    let mm = |m: f64| m * 1000.0;
    let r_head = min_equivalent_radius(head_on)?;
    let g_head = gripper_radius(r_head, ball_radius, SizingMode::Grab)?;
    let g_tail = gripper_radius(tail_chase_req, ball_radius, SizingMode::Grab)?;
    let r_pop = min_equivalent_radius(balloon)?;
    let g_pop = gripper_radius(r_pop, balloon.object_radius, SizingMode::Pop)?;
    Ok(vec![
        SizingRow {
            case: "grab head-on".into(),
            r_eq_mm: mm(r_head),
            gripper_mm: Some(mm(g_head.radius)),
            design_mm: Some(mm(DESIGN_GRABBER_RADIUS)),
            note: "computed".into(),
        },
        SizingRow {
            case: "grab tail-chase".into(),
            r_eq_mm: mm(tail_chase_req),
            gripper_mm: Some(mm(g_tail.radius)),
            design_mm: Some(mm(DESIGN_GRABBER_RADIUS)),
            note: "R_eq as reported".into(),
        },
        SizingRow {
            case: "balloon pop".into(),
            r_eq_mm: mm(r_pop),
            gripper_mm: Some(mm(g_pop.radius)),
            design_mm: Some(mm(DESIGN_POPPER_RADIUS)),
            note: if g_pop.nominal_contact { "nominal contact".into() } else { "computed".into() },
        },
    ])
}
