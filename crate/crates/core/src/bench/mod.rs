//! Benchmark harness: runs the pick & place scenario in the three execution
//! types and summarizes the PLC-measured sequence times.

pub mod report;
pub mod scenario;

use thiserror::Error;

use crate::motion::{ContinuousSkillPlan, ExecutionType};
use crate::planner::{plan, PlanError, Process};
use crate::plc::{run_single_motion_sequence, PlcError, SkillSequencer};
use crate::robot::{RobotError, RobotExecutor};
use crate::sim::{run, JitterSource, Outcome, SimConfig, SimError, SimTrace};
use crate::trajectory::MotionState;
use crate::wire::record_count;

pub use report::{parse_raw_csv, parse_summary_csv, raw_csv, render_table, summary_csv, RawRow, SummaryRow};
pub use scenario::{build_process, load_scenario, parse_scenario, render_scenario, resolve_setup, setup, ScenarioConfig, ScenarioGeometry};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("unknown setup `{0}` (expected a, b or a scenario file)")]
    UnknownSetup(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("baseline time must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("no values")]
    EmptyInput,
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Plc(#[from] PlcError),
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("run ended without completing the sequence")]
    Incomplete,
}

/// Relative improvement of `cm_aet` over the `sm_aet` baseline.
pub fn compute_improvement(sm_aet: f64, cm_aet: f64) -> Result<f64, BenchError> {
    if sm_aet.is_nan() || sm_aet <= 0.0 {
        return Err(BenchError::NonPositiveBaseline(sm_aet));
    }
    Ok((sm_aet - cm_aet) / sm_aet)
}

pub fn mean(values: &[f64]) -> Result<f64, BenchError> {
    if values.is_empty() {
        return Err(BenchError::EmptyInput);
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

/// Mean absolute deviation about the mean.
pub fn mad(values: &[f64]) -> Result<f64, BenchError> {
    let m = mean(values)?;
    Ok(values.iter().map(|v| (v - m).abs()).sum::<f64>() / values.len() as f64)
}

/// A planned scenario, ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub process: Process,
    pub groups: Vec<ContinuousSkillPlan>,
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self, BenchError> {
        let process = build_process(&config)?;
        let groups = plan(&process, &config.planning)?;
        Ok(Self { config, process, groups })
    }

    pub fn start_state(&self) -> MotionState {
        MotionState::at(self.process.start)
    }

    /// Wire records of all groups together.
    pub fn record_count(&self) -> usize {
        self.groups.iter().flat_map(|g| g.commands()).map(record_count).sum()
    }
}

/// One simulated execution with the given phase offsets.
pub fn run_once(scenario: &Scenario, etype: ExecutionType, sim: &SimConfig) -> Result<SimTrace, BenchError> {
    let start = scenario.start_state();
    let (mut plc, mut robot) = match etype {
        ExecutionType::Rc => {
            let total = u32::try_from(scenario.record_count()).map_err(|_| RobotError::ProgramTooLarge)?;
            (SkillSequencer::native(total), RobotExecutor::native(&scenario.groups, start, sim.robot_config())?)
        }
        ExecutionType::Sm => (run_single_motion_sequence(&scenario.groups)?, RobotExecutor::streaming(start, sim.robot_config())),
        ExecutionType::Cm => (SkillSequencer::continuous(&scenario.groups)?, RobotExecutor::streaming(start, sim.robot_config())),
    };
    let trace = run(sim, &mut plc, &mut robot)?;
    match trace.outcome {
        Some(Outcome::Done) => Ok(trace),
        _ => Err(BenchError::Incomplete),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementReport {
    pub setup: String,
    pub etype: ExecutionType,
    /// Per-repetition elapsed time, in repetition order.
    pub elapsed_ms: Vec<f64>,
    pub aet_ms: f64,
    pub mad_ms: f64,
    /// Improvement over the SM run of the same setup, for CM reports.
    pub aet_i: Option<f64>,
    pub handshakes: usize,
    pub starvation_stops: usize,
}

/// Run `reps` repetitions; every execution type with the same seed sees the
/// same sequence of phase offsets. `on_trace` receives each repetition's trace.
pub fn run_benchmark_traced(
    scenario: &Scenario,
    etype: ExecutionType,
    reps: usize,
    seed: u64,
    mut on_trace: impl FnMut(usize, &SimTrace),
) -> Result<MeasurementReport, BenchError> {
    if reps == 0 {
        return Err(BenchError::EmptyInput);
    }
    let base = scenario.config.sim;
    let mut jitter = JitterSource::new(seed);
    let mut elapsed_ms = Vec::with_capacity(reps);
    let (mut handshakes, mut starvation_stops) = (0, 0);
    for rep in 0..reps {
        let cfg = base.with_phases(jitter.next_phases(&base));
        let trace = run_once(scenario, etype, &cfg)?;
        elapsed_ms.push(trace.elapsed_ms().ok_or(BenchError::Incomplete)?);
        handshakes = trace.handshakes;
        starvation_stops += trace.starvation_stops;
        on_trace(rep, &trace);
    }
    Ok(MeasurementReport {
        setup: scenario.config.name.clone(),
        etype,
        aet_ms: mean(&elapsed_ms)?,
        mad_ms: mad(&elapsed_ms)?,
        elapsed_ms,
        aet_i: None,
        handshakes,
        starvation_stops,
    })
}

pub fn run_benchmark(scenario: &Scenario, etype: ExecutionType, reps: usize, seed: u64) -> Result<MeasurementReport, BenchError> {
    run_benchmark_traced(scenario, etype, reps, seed, |_, _| {})
}

/// Fill in `aet_i` of every CM report that has an SM report of the same setup.
pub fn attach_improvements(reports: &mut [MeasurementReport]) -> Result<(), BenchError> {
    let baselines: Vec<(String, f64)> = reports
        .iter()
        .filter(|r| r.etype == ExecutionType::Sm)
        .map(|r| (r.setup.clone(), r.aet_ms))
        .collect();
    for r in reports.iter_mut().filter(|r| r.etype == ExecutionType::Cm) {
        if let Some((_, sm)) = baselines.iter().find(|(s, _)| *s == r.setup) {
            r.aet_i = Some(compute_improvement(*sm, r.aet_ms)?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::PathLabel;
    use crate::planner::POSITION_EPS;
    use proptest::prelude::*;

    #[test]
    fn improvement_examples() {
        assert!((compute_improvement(6477.0, 3729.0).unwrap() - 0.4243).abs() < 5e-4);
        assert!((compute_improvement(8971.0, 7617.0).unwrap() - 0.1509).abs() < 5e-4);
        assert_eq!(compute_improvement(5.0, 5.0).unwrap(), 0.0);
        assert!(matches!(compute_improvement(0.0, 1.0), Err(BenchError::NonPositiveBaseline(_))));
        assert!(matches!(compute_improvement(f64::NAN, 1.0), Err(BenchError::NonPositiveBaseline(_))));
    }

    #[test]
    fn mad_examples() {
        assert!((mad(&[1.0, 2.0, 3.0]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(mad(&[4.0; 7]).unwrap(), 0.0);
        assert!(matches!(mad(&[]), Err(BenchError::EmptyInput)));
    }

    proptest! {
        #[test]
        fn mad_is_bounded_by_range(values in prop::collection::vec(-1e4f64..1e4, 1..50)) {
            let m = mad(&values).unwrap();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(m >= 0.0 && m <= hi - lo + 1e-9);
            prop_assert!(mean(&values).unwrap() >= lo - 1e-9);
        }
    }

    #[test]
    fn scenario_plans_into_three_groups() {
        let s = Scenario::build(setup("a").unwrap()).unwrap();
        assert_eq!(s.groups.len(), 3);
        assert_eq!(s.groups.iter().map(|g| g.len()).collect::<Vec<_>>(), [2, 5, 4]);
        assert_eq!(s.record_count(), 11);
        assert_eq!(s.groups[0].terminal_actions()[0].as_str(), "gripper_close");
        assert_eq!(s.groups[1].terminal_actions()[0].as_str(), "gripper_open");
        assert!(s.groups[2].terminal_actions().is_empty());
        for g in &s.groups {
            assert_eq!(g.motions().last().unwrap().label, PathLabel::AccurateStop);
        }
        let b = Scenario::build(setup("b").unwrap()).unwrap();
        let shape = |s: &Scenario| s.groups.iter().map(|g| g.commands().map(|c| c.motion_type()).collect::<Vec<_>>()).collect::<Vec<_>>();
        assert_eq!(shape(&s), shape(&b));
    }

    #[test]
    fn no_obstacle_collapses_the_return_transit() {
        let mut cfg = setup("a").unwrap();
        cfg.geometry.obstacle = false;
        let s = Scenario::build(cfg).unwrap();
        assert_eq!(s.record_count(), 10);
        let last = s.groups[2].commands().last().unwrap().cartesian_target().unwrap().position();
        assert!((last - s.process.start.position()).norm() < POSITION_EPS);
    }

    #[test]
    fn cm_beats_sm_on_a_single_repetition() {
        let s = Scenario::build(setup("a").unwrap()).unwrap();
        let sim = s.config.sim;
        let sm = run_once(&s, ExecutionType::Sm, &sim).unwrap();
        let cm = run_once(&s, ExecutionType::Cm, &sim).unwrap();
        let rc = run_once(&s, ExecutionType::Rc, &sim).unwrap();
        assert_eq!(sm.handshakes, 11);
        assert_eq!(cm.handshakes, 3);
        assert_eq!(rc.handshakes, 1);
        assert!(sm.elapsed_us() > cm.elapsed_us());
        assert!(cm.elapsed_us() >= rc.elapsed_us());
        assert_eq!(cm.starvation_stops, 0);
    }

    #[test]
    fn attach_improvements_pairs_by_setup() {
        let report = |setup: &str, etype, aet| MeasurementReport {
            setup: setup.into(),
            etype,
            elapsed_ms: vec![aet],
            aet_ms: aet,
            mad_ms: 0.0,
            aet_i: None,
            handshakes: 1,
            starvation_stops: 0,
        };
        let mut reports = vec![
            report("a", ExecutionType::Sm, 100.0),
            report("a", ExecutionType::Cm, 60.0),
            report("b", ExecutionType::Cm, 50.0),
        ];
        attach_improvements(&mut reports).unwrap();
        assert_eq!(reports[1].aet_i, Some(0.4));
        assert_eq!(reports[2].aet_i, None);
    }
}
