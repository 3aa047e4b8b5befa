//! Deterministic co-simulation of PLC, fieldbus and robot controller.
//!
//! Three cyclic tasks fire at fixed periods from per-run phase offsets. The
//! bus task copies whole 256-byte images in both directions; PLC and robot
//! only ever see the last copy. Tasks due at the same instant run in the
//! order PLC, bus, robot.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::hash::Hasher;
use std::io::{self, Write};

use fnv::FnvHasher;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::plc::{SequencerStatus, SkillSequencer, SkillState};
use crate::robot::{RobotConfig, RobotExecutor};
use crate::wire::{decode_feedback_frame, encode_command_frame, encode_feedback_frame, FeedbackFrame, FrameImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub plc_cycle_us: u64,
    pub bus_cycle_us: u64,
    pub robot_cycle_us: u64,
    /// Start offset of the PLC, bus and robot task, each below its cycle.
    #[serde(skip)]
    pub phase_offsets_us: [u64; 3],
    /// Simulated time after which a run is abandoned.
    pub timeout_us: u64,
    pub starvation_timeout_cycles: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            plc_cycle_us: 1000,
            bus_cycle_us: 1000,
            robot_cycle_us: 4000,
            phase_offsets_us: [0; 3],
            timeout_us: 120_000_000,
            starvation_timeout_cycles: 250,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let cycles = [self.plc_cycle_us, self.bus_cycle_us, self.robot_cycle_us];
        if cycles.contains(&0) {
            return Err(SimError::InvalidConfig("cycle times must be positive"));
        }
        if self.phase_offsets_us.iter().zip(cycles).any(|(p, c)| *p >= c) {
            return Err(SimError::InvalidConfig("phase offsets must be below their cycle time"));
        }
        if self.starvation_timeout_cycles == 0 {
            return Err(SimError::InvalidConfig("starvation timeout must be positive"));
        }
        Ok(())
    }

    pub fn robot_config(&self) -> RobotConfig {
        RobotConfig { cycle_us: self.robot_cycle_us, starvation_timeout_cycles: self.starvation_timeout_cycles }
    }

    pub fn with_phases(self, phase_offsets_us: [u64; 3]) -> Self {
        Self { phase_offsets_us, ..self }
    }
}

/// Seeded stream of per-run phase offsets.
#[derive(Debug, Clone)]
pub struct JitterSource(ChaCha8Rng);

impl JitterSource {
    pub fn new(seed: u64) -> Self {
        Self(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Uniform offsets in `[0, cycle)` for PLC, bus and robot.
    pub fn next_phases(&mut self, cfg: &SimConfig) -> [u64; 3] {
        [cfg.plc_cycle_us, cfg.bus_cycle_us, cfg.robot_cycle_us].map(|c| self.0.gen_range(0..c))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Task {
    Plc,
    Bus,
    Robot,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Plc => "plc",
            Task::Bus => "bus",
            Task::Robot => "robot",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub t_us: u64,
    pub task: Task,
    pub event: &'static str,
    pub detail: String,
    /// FNV-1a 64 of the payload: the frame image for frame events, the detail text otherwise.
    pub hash: u64,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}\t{}\t{}\t{}\t{:016x}", self.t_us, self.task.name(), self.event, self.detail, self.hash)
    }
}

fn encode(frame: &crate::wire::CommandFrame) -> Result<FrameImage, String> {
    encode_command_frame(frame).map_err(|e| e.to_string())
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTrace {
    pub events: Vec<TraceEvent>,
    /// PLC cycle that emitted the first START.
    pub start_us: Option<u64>,
    /// PLC cycle that read the final DONE (or the abort acknowledgement).
    pub end_us: Option<u64>,
    pub outcome: Option<Outcome>,
    pub handshakes: usize,
    pub starvation_stops: usize,
    pub window_violations: usize,
    /// Robot observations of an image the PLC never produced.
    pub torn_frames: usize,
}

impl SimTrace {
    fn new() -> Self {
        Self {
            events: Vec::new(),
            start_us: None,
            end_us: None,
            outcome: None,
            handshakes: 0,
            starvation_stops: 0,
            window_violations: 0,
            torn_frames: 0,
        }
    }

    pub fn elapsed_us(&self) -> Option<u64> {
        Some(self.end_us? - self.start_us?)
    }

    pub fn elapsed_ms(&self) -> Option<f64> {
        self.elapsed_us().map(|us| us as f64 / 1000.0)
    }

    /// Events of one kind, e.g. `"starvation_stop"`.
    pub fn count(&self, event: &str) -> usize {
        self.events.iter().filter(|e| e.event == event).count()
    }

    pub fn write_to(&self, mut w: impl Write) -> io::Result<()> {
        for e in &self.events {
            writeln!(w, "{e}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        String::from_utf8(out).expect("trace is UTF-8")
    }

    fn push(&mut self, t_us: u64, task: Task, event: &'static str, detail: String, hash: u64) {
        self.events.push(TraceEvent { t_us, task, event, detail, hash });
    }

    fn note(&mut self, t_us: u64, task: Task, event: &'static str, detail: String) {
        let hash = fnv1a(detail.as_bytes());
        self.push(t_us, task, event, detail, hash);
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(&'static str),
    #[error("robot cycle of the executor ({executor} us) differs from the simulation ({sim} us)")]
    CycleMismatch { executor: u64, sim: u64 },
    #[error("simulation timed out at {t_us} us")]
    Timeout { t_us: u64, trace: Box<SimTrace> },
    #[error("{task:?} failed at {t_us} us: {message}")]
    Failed { t_us: u64, task: Task, message: String, trace: Box<SimTrace> },
}

impl SimError {
    /// The partial trace of a failed run, if any.
    pub fn trace(&self) -> Option<&SimTrace> {
        match self {
            SimError::Timeout { trace, .. } | SimError::Failed { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

/// Run until the PLC has seen the last skill complete.
pub fn run(cfg: &SimConfig, plc: &mut SkillSequencer, robot: &mut RobotExecutor) -> Result<SimTrace, SimError> {
    run_with_abort(cfg, plc, robot, None)
}

/// Like [`run`], but the PLC aborts in its first cycle at or after `abort_at_us`
/// and the run ends once the abort is acknowledged.
pub fn run_with_abort(
    cfg: &SimConfig,
    plc: &mut SkillSequencer,
    robot: &mut RobotExecutor,
    abort_at_us: Option<u64>,
) -> Result<SimTrace, SimError> {
    cfg.validate()?;
    if robot.config().cycle_us != cfg.robot_cycle_us {
        return Err(SimError::CycleMismatch { executor: robot.config().cycle_us, sim: cfg.robot_cycle_us });
    }
    let periods = [cfg.plc_cycle_us, cfg.bus_cycle_us, cfg.robot_cycle_us];
    let mut queue: BinaryHeap<Reverse<(u64, Task)>> = [Task::Plc, Task::Bus, Task::Robot]
        .into_iter()
        .zip(cfg.phase_offsets_us)
        .map(|(task, phase)| Reverse((phase, task)))
        .collect();

    let fail = |trace: &mut SimTrace, t_us: u64, task: Task, message: String| {
        trace.note(t_us, task, "error", message.clone());
        SimError::Failed { t_us, task, message, trace: Box::new(std::mem::replace(trace, SimTrace::new())) }
    };

    let mut trace = SimTrace::new();
    let mut plc_out: FrameImage = match encode(plc.frame()) {
        Ok(image) => image,
        Err(m) => return Err(fail(&mut trace, 0, Task::Plc, m)),
    };
    let mut produced: HashSet<u64> = HashSet::from([fnv1a(&plc_out)]);
    let idle_feedback = encode_feedback_frame(&FeedbackFrame::default()).expect("default feedback encodes");
    let mut robot_in = plc_out;
    let mut robot_out = idle_feedback;
    let mut plc_in = idle_feedback;
    let mut aborted = false;

    while let Some(Reverse((t, task))) = queue.pop() {
        if t > cfg.timeout_us {
            trace.note(t, task, "timeout", String::new());
            return Err(SimError::Timeout { t_us: t, trace: Box::new(trace) });
        }
        match task {
            Task::Plc => {
                let fb = match decode_feedback_frame(&plc_in) {
                    Ok(fb) => fb,
                    Err(e) => return Err(fail(&mut trace, t, task, format!("feedback image: {e}"))),
                };
                let abortable = matches!(plc.function().state(), SkillState::Loading | SkillState::Running);
                if !aborted && abortable && abort_at_us.is_some_and(|at| t >= at) {
                    if let Err(e) = plc.abort() {
                        return Err(fail(&mut trace, t, task, e.to_string()));
                    }
                    aborted = true;
                    trace.note(t, task, "abort", String::new());
                }
                let status = match plc.cycle(&fb) {
                    Ok(s) => s,
                    Err(e) => return Err(fail(&mut trace, t, task, e.to_string())),
                };
                let image = match encode(plc.frame()) {
                    Ok(image) => image,
                    Err(m) => return Err(fail(&mut trace, t, task, m)),
                };
                if image != plc_out {
                    plc_out = image;
                    let hash = fnv1a(&plc_out);
                    produced.insert(hash);
                    let f = plc.frame();
                    let detail = format!(
                        "cmd={:?} seq={} total={} loaded={} count={}",
                        f.command, f.frame_seq, f.total_no, f.loaded_through, f.record_count
                    );
                    trace.push(t, task, "frame", detail, hash);
                }
                match status {
                    SequencerStatus::Started => {
                        trace.start_us = Some(t);
                        trace.note(t, task, "start", format!("jobs={}", plc.job_count()));
                    }
                    SequencerStatus::Finished => {
                        trace.end_us = Some(t);
                        trace.outcome = Some(Outcome::Done);
                    }
                    SequencerStatus::Aborted if plc.abort_complete() => {
                        trace.end_us = Some(t);
                        trace.outcome = Some(Outcome::Aborted);
                    }
                    _ => {}
                }
                if let Some(outcome) = trace.outcome {
                    trace.handshakes = plc.handshakes();
                    trace.starvation_stops = robot.starvation_stops();
                    trace.window_violations = robot.window_violations();
                    let detail = format!("outcome={outcome:?} elapsed_us={}", trace.elapsed_us().unwrap_or(0));
                    trace.note(t, task, "done", detail);
                    return Ok(trace);
                }
            }
            Task::Bus => {
                robot_in = plc_out;
                plc_in = robot_out;
            }
            Task::Robot => {
                if !produced.contains(&fnv1a(&robot_in)) {
                    trace.torn_frames += 1;
                }
                let fb = robot.cycle_image(&robot_in, t);
                for ev in robot.drain_events() {
                    let (name, detail) = (ev.kind.name(), ev.kind.to_string());
                    trace.note(ev.t_us, task, name, detail);
                }
                let image = match encode_feedback_frame(&fb) {
                    Ok(image) => image,
                    Err(e) => return Err(fail(&mut trace, t, task, e.to_string())),
                };
                if image != robot_out {
                    let changed_status = decode_feedback_frame(&robot_out)
                        .map(|old| (old.state, old.cur_exec, old.acked_seq) != (fb.state, fb.cur_exec, fb.acked_seq))
                        .unwrap_or(true);
                    robot_out = image;
                    if changed_status {
                        let detail = format!("state={:?} cur={} ack={} err={}", fb.state, fb.cur_exec, fb.acked_seq, fb.error_code);
                        trace.push(t, task, "feedback", detail, fnv1a(&robot_out));
                    }
                }
            }
        }
        let period = periods[task as usize];
        queue.push(Reverse((t + period, task)));
    }
    unreachable!("the task queue never runs empty")
}
