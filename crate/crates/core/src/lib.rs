//! Multi-UAV ball-grabbing and balloon-popping simulator with the guidance,
//! estimation, control and coordination logic that drives it.

pub mod control;
pub mod engagement;
pub mod estimation;
pub mod geometry;
pub mod guidance;
pub mod mission;
pub mod oms;
pub mod safety;
pub mod sim;
pub mod vision;
