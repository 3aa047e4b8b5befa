//! Skill-based robot motion control with a PLC as skill trigger.

pub mod bench;
pub mod geometry;
pub mod motion;
pub mod wire;
pub mod trajectory;
pub mod planner;
pub mod plc;
pub mod robot;
pub mod sim;
