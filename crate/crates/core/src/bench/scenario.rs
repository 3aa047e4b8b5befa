//! The pick & place benchmark scenario.
//!
//! A part is picked from a load carrier, carried to an assembly point and
//! inserted; the robot then returns to its start over an obstacle.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::geometry::Pose;
use crate::motion::{ActionTag, Dynamics};
use crate::planner::{PlanningConfig, Process, ProcessStep};
use crate::sim::SimConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioGeometry {
    /// Gripping position at the bottom of the load carrier, mm.
    pub pick: [f64; 3],
    pub carrier_depth: f64,
    /// Assembly point relative to the pick point, mm.
    pub assembly_offset: [f64; 3],
    pub insertion_depth: f64,
    /// Height of the start pose above the pick point, mm.
    pub start_height: f64,
    /// Whether an obstacle lies between the assembly point and the start.
    pub obstacle: bool,
    /// Absolute height the return to start has to clear when there is an obstacle.
    pub clearance_height: f64,
}

impl Default for ScenarioGeometry {
    fn default() -> Self {
        Self {
            pick: [400.0, -150.0, 100.0],
            carrier_depth: 30.0,
            assembly_offset: [0.0, 300.0, 0.0],
            insertion_depth: 30.0,
            start_height: 80.0,
            obstacle: true,
            clearance_height: 250.0,
        }
    }
}

impl ScenarioGeometry {
    fn validate(&self) -> Result<(), BenchError> {
        let finite = self.pick.iter().chain(&self.assembly_offset).all(|v| v.is_finite());
        let positive = [self.carrier_depth, self.insertion_depth, self.start_height].iter().all(|v| v.is_finite() && *v > 0.0);
        if !finite || !positive {
            return Err(BenchError::InvalidScenario("geometry values must be finite and depths positive".into()));
        }
        if !self.clearance_height.is_finite() {
            return Err(BenchError::InvalidScenario("clearance height must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub geometry: ScenarioGeometry,
    pub planning: PlanningConfig,
    pub sim: SimConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        setup_a()
    }
}

fn with_dynamics(name: &str, lin: Dynamics, joint: Dynamics) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        geometry: ScenarioGeometry::default(),
        planning: PlanningConfig { lin, ptp: lin, joint, ..PlanningConfig::default() },
        sim: SimConfig::default(),
    }
}

fn setup_a() -> ScenarioConfig {
    with_dynamics("a", Dynamics { velocity: 250.0, acceleration: 2000.0 }, Dynamics { velocity: 180.0, acceleration: 720.0 })
}

fn setup_b() -> ScenarioConfig {
    with_dynamics("b", Dynamics { velocity: 200.0, acceleration: 1200.0 }, Dynamics { velocity: 150.0, acceleration: 500.0 })
}

/// Built-in setups. They share the geometry and differ only in dynamics.
pub fn setup(name: &str) -> Result<ScenarioConfig, BenchError> {
    match name {
        "a" => Ok(setup_a()),
        "b" => Ok(setup_b()),
        other => Err(BenchError::UnknownSetup(other.to_string())),
    }
}

/// Parse a TOML scenario. Omitted fields take the values of setup `a`.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, BenchError> {
    let cfg: ScenarioConfig = toml::from_str(text).map_err(|e| BenchError::InvalidScenario(e.to_string()))?;
    cfg.geometry.validate()?;
    cfg.planning.validate().map_err(|e| BenchError::InvalidScenario(e.to_string()))?;
    cfg.sim.validate().map_err(|e| BenchError::InvalidScenario(e.to_string()))?;
    Ok(cfg)
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::InvalidScenario(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}

/// A built-in setup name or the path of a scenario file.
pub fn resolve_setup(name_or_path: &str) -> Result<ScenarioConfig, BenchError> {
    match setup(name_or_path) {
        Err(BenchError::UnknownSetup(_)) if Path::new(name_or_path).is_file() => load_scenario(Path::new(name_or_path)),
        other => other,
    }
}

pub fn render_scenario(cfg: &ScenarioConfig) -> String {
    toml::to_string(cfg).expect("scenario config serializes")
}

fn pose(v: Vector3<f64>) -> Result<Pose, BenchError> {
    Pose::at(v.x, v.y, v.z).map_err(|e| BenchError::InvalidScenario(e.to_string()))
}

/// Process steps of the pick & place task, with the start pose.
pub fn build_process(cfg: &ScenarioConfig) -> Result<Process, BenchError> {
    let g = &cfg.geometry;
    g.validate()?;
    let up = Vector3::z();
    let pick = Vector3::from(g.pick);
    let place = pick + Vector3::from(g.assembly_offset);
    let start = pose(pick + up * g.start_height)?;
    let grip = ActionTag::new("gripper_close").expect("valid tag");
    let release = ActionTag::new("gripper_open").expect("valid tag");
    let above_pick = pose(pick + up * g.carrier_depth)?;
    let above_place = pose(place + up * g.insertion_depth)?;
    let (pick, place) = (pose(pick)?, pose(place)?);

    let mut steps = Vec::new();
    let approach_from = above_pick.position() + up * cfg.planning.pre_move_length;
    if (approach_from - start.position()).norm() > crate::planner::POSITION_EPS {
        steps.push(ProcessStep::transit(None, None));
    }
    steps.extend([
        // A: descend into the carrier
        ProcessStep::primary(above_pick, pick),
        ProcessStep::standstill(grip, pick),
        // B: retract with the part
        ProcessStep::primary(pick, above_pick),
        ProcessStep::transit(None, None),
        // C: insert
        ProcessStep::primary(above_place, place),
        ProcessStep::standstill(release, place),
        // D: retract from the assembly
        ProcessStep::primary(place, above_place),
        ProcessStep::transit(Some(start), g.obstacle.then_some(g.clearance_height)),
    ]);
    Ok(Process { start, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setups_share_geometry() {
        let (a, b) = (setup("a").unwrap(), setup("b").unwrap());
        assert_eq!(a.geometry, b.geometry);
        assert_ne!(a.planning.lin, b.planning.lin);
        assert!(matches!(setup("c"), Err(BenchError::UnknownSetup(_))));
    }

    #[test]
    fn scenario_file_round_trip_and_defaults() {
        let a = setup("a").unwrap();
        assert_eq!(parse_scenario(&render_scenario(&a)).unwrap(), a);
        let partial = parse_scenario("name = \"custom\"\n[geometry]\ncarrier_depth = 40.0\n").unwrap();
        assert_eq!(partial.geometry.carrier_depth, 40.0);
        assert_eq!(partial.planning, a.planning);
        assert!(matches!(parse_scenario("[geometry]\ncarrier_depth = -1.0\n"), Err(BenchError::InvalidScenario(_))));
        assert!(matches!(parse_scenario("bogus = 1\n"), Err(BenchError::InvalidScenario(_))));
        assert!(matches!(parse_scenario("[sim]\nbus_cycle_us = 0\n"), Err(BenchError::InvalidScenario(_))));
    }

    #[test]
    fn start_above_the_approach_adds_a_transit() {
        let mut cfg = setup("a").unwrap();
        assert_eq!(build_process(&cfg).unwrap().steps.len(), 8);
        cfg.geometry.start_height = 200.0;
        assert_eq!(build_process(&cfg).unwrap().steps.len(), 9);
    }
}
