//! Robot-controller side: decodes command frames into a record cache, runs
//! the execute loop with an advance-pointer lookahead over the records it can
//! see, and reports progress in feedback frames.
//!
//! Time advances in whole controller cycles. A motion that starts in a cycle
//! begins at that cycle's timestamp; every later cycle adds one cycle time to
//! its elapsed time and the record completes on the first cycle at which the
//! elapsed time reaches its planned duration. Time left over in that cycle is
//! carried into the next motion.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::geometry::Pose;
use crate::motion::{ContinuousSkillPlan, MotionType};
use crate::trajectory::{
    plan_group_profile, plan_lookahead, resolve_motion, ChainEntry, Corner, CornerKind, MotionState, ResolvedMotion, TrajectoryError,
};
use crate::wire::{
    decode_record, explode_all, reassemble, record_count, CommandFrame, CommandWord, ExecState, FeedbackFrame,
    MotionRecord, RecordImage, WireError,
};

pub const ERR_DECODE: u8 = 1;
pub const ERR_STARVATION: u8 = 2;
pub const ERR_TRAJECTORY: u8 = 3;

/// Slack when comparing elapsed and planned time, in seconds.
const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RobotConfig {
    pub cycle_us: u64,
    /// Consecutive cycles without an executable record before giving up.
    pub starvation_timeout_cycles: u32,
}

impl Default for RobotConfig {
    fn default() -> Self {
        Self { cycle_us: 4000, starvation_timeout_cycles: 250 }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RobotError {
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("program has more records than a u32 index can address")]
    ProgramTooLarge,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RobotEventKind {
    SkillStarted { total_no: u32 },
    RecordStarted { index: u32, record_seq: u16, motion_type: MotionType, force_setpoint: u16 },
    RecordCompleted { index: u32 },
    /// How the motion ending at record `index` hands over to its successor.
    Corner { index: u32, kind: CornerKind, speed: f64 },
    /// The successor of record `index` was not visible; exact stop instead.
    StarvationStop { index: u32 },
    WindowViolation { index: u32 },
    StateChanged { from: ExecState, to: ExecState },
    Fault { code: u8, message: String },
}

impl RobotEventKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::SkillStarted { .. } => "skill_start",
            Self::RecordStarted { .. } => "record_start",
            Self::RecordCompleted { .. } => "record_end",
            Self::Corner { .. } => "corner",
            Self::StarvationStop { .. } => "starvation_stop",
            Self::WindowViolation { .. } => "window_violation",
            Self::StateChanged { .. } => "state",
            Self::Fault { .. } => "fault",
        }
    }
}

impl fmt::Display for RobotEventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::SkillStarted { total_no } => write!(f, "total_no={total_no}"),
            Self::RecordStarted { index, record_seq, motion_type, force_setpoint } => {
                write!(f, "index={index} seq={record_seq} type={motion_type}")?;
                if *force_setpoint != 0 {
                    write!(f, " force={force_setpoint}")?;
                }
                Ok(())
            }
            Self::RecordCompleted { index } => write!(f, "index={index}"),
            Self::Corner { index, kind, speed } => write!(f, "index={index} kind={kind:?} speed={speed:.6}"),
            Self::StarvationStop { index } | Self::WindowViolation { index } => write!(f, "index={index}"),
            Self::StateChanged { from, to } => write!(f, "{from:?}->{to:?}"),
            Self::Fault { code, message } => write!(f, "code={code} {message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotEvent {
    pub t_us: u64,
    pub kind: RobotEventKind,
}

/// A physical motion with its timing committed.
#[derive(Debug, Clone, PartialEq)]
struct Step {
    first: u32,
    last: u32,
    duration: f64,
    corner: Corner,
    starved: bool,
    resolved: ResolvedMotion,
    records: Vec<MotionRecord>,
    end_state: MotionState,
    exit: ChainEntry,
}

#[derive(Debug, Clone, PartialEq)]
struct Active {
    step: Step,
    elapsed: f64,
}

#[derive(Debug, Clone)]
enum Mode {
    Streaming,
    /// Resident program, precomputed per group.
    Native { program: Vec<Step>, total_no: u32 },
}

#[derive(Debug, Clone)]
pub struct RobotExecutor {
    cfg: RobotConfig,
    mode: Mode,
    state: ExecState,
    error_code: u8,
    total_no: u32,
    cur_exec: u32,
    last_seq: Option<u16>,
    cache: BTreeMap<u32, (RecordImage, MotionRecord)>,
    native_queue: VecDeque<Step>,
    active: Option<Active>,
    entry: ChainEntry,
    motion_state: MotionState,
    starved_cycles: u32,
    events: Vec<RobotEvent>,
    consumed: Vec<RecordImage>,
    window_violations: usize,
    starvation_stops: usize,
}

impl RobotExecutor {
    /// Executor that receives its records through the command-frame slots.
    pub fn streaming(start: MotionState, cfg: RobotConfig) -> Self {
        Self::with_mode(start, cfg, Mode::Streaming)
    }

    /// Executor holding a resident program; START runs all groups back to
    /// back with group boundaries as exact stops.
    pub fn native(program: &[ContinuousSkillPlan], start: MotionState, cfg: RobotConfig) -> Result<Self, RobotError> {
        let mut steps = Vec::new();
        let mut state = start;
        let mut index = 0u32;
        for group in program {
            let profile = plan_group_profile(group, &state, true)?;
            let images = explode_all(group.commands())?;
            let records = images.iter().map(|i| decode_record(i)).collect::<Result<Vec<_>, _>>()?;
            let mut offset = 0;
            for (i, cmd) in group.commands().enumerate() {
                let (resolved, next) = resolve_motion(cmd, &state);
                let n = record_count(cmd);
                let corner = profile.corners.get(i).copied().unwrap_or(Corner::STOP);
                let exit = profile.exits.get(i).copied().unwrap_or_default();
                let first = index + 1;
                index = index.checked_add(n as u32).ok_or(RobotError::ProgramTooLarge)?;
                steps.push(Step {
                    first,
                    last: index,
                    duration: profile.motion_durations[i],
                    corner,
                    starved: false,
                    resolved,
                    records: records[offset..offset + n].to_vec(),
                    end_state: next,
                    exit,
                });
                offset += n;
                state = next;
            }
        }
        Ok(Self::with_mode(start, cfg, Mode::Native { program: steps, total_no: index }))
    }

    fn with_mode(start: MotionState, cfg: RobotConfig, mode: Mode) -> Self {
        Self {
            cfg,
            mode,
            state: ExecState::Idle,
            error_code: 0,
            total_no: 0,
            cur_exec: 0,
            last_seq: None,
            cache: BTreeMap::new(),
            native_queue: VecDeque::new(),
            active: None,
            entry: ChainEntry::default(),
            motion_state: start,
            starved_cycles: 0,
            events: Vec::new(),
            consumed: Vec::new(),
            window_violations: 0,
            starvation_stops: 0,
        }
    }

    pub fn state(&self) -> ExecState {
        self.state
    }

    pub fn cur_exec(&self) -> u32 {
        self.cur_exec
    }

    pub fn motion_state(&self) -> &MotionState {
        &self.motion_state
    }

    /// Record images in the order they were executed, over all skills.
    pub fn consumed(&self) -> &[RecordImage] {
        &self.consumed
    }

    pub fn window_violations(&self) -> usize {
        self.window_violations
    }

    pub fn starvation_stops(&self) -> usize {
        self.starvation_stops
    }

    pub fn events(&self) -> &[RobotEvent] {
        &self.events
    }

    pub fn drain_events(&mut self) -> Vec<RobotEvent> {
        std::mem::take(&mut self.events)
    }

    fn emit(&mut self, t_us: u64, kind: RobotEventKind) {
        self.events.push(RobotEvent { t_us, kind });
    }

    fn set_state(&mut self, t_us: u64, to: ExecState) {
        if self.state != to {
            let from = self.state;
            self.state = to;
            self.emit(t_us, RobotEventKind::StateChanged { from, to });
        }
    }

    fn fault(&mut self, t_us: u64, code: u8, message: String) {
        self.error_code = code;
        self.active = None;
        self.emit(t_us, RobotEventKind::Fault { code, message });
        self.set_state(t_us, ExecState::Error);
    }

    /// Current TCP pose, interpolated along the active motion.
    pub fn tcp(&self) -> Pose {
        let Some(active) = &self.active else {
            return self.motion_state.tcp;
        };
        let target = active.step.end_state.tcp;
        let r = &active.step.resolved;
        let fraction = if active.step.duration > 0.0 { (active.elapsed / active.step.duration).min(1.0) } else { 1.0 };
        match r.point_at(r.length() * fraction) {
            Some(p) => target.with_position(p).unwrap_or(target),
            None => self.motion_state.tcp,
        }
    }

    fn feedback(&self) -> FeedbackFrame {
        let tcp = self.tcp().to_array().map(|v| v as f32);
        FeedbackFrame {
            state: self.state,
            error_code: self.error_code,
            cur_exec: self.cur_exec,
            acked_seq: self.last_seq.unwrap_or(0),
            tcp,
        }
    }

    pub fn config(&self) -> &RobotConfig {
        &self.cfg
    }

    /// One controller cycle on a raw command image. An undecodable image is a
    /// decode fault.
    pub fn cycle_image(&mut self, image: &[u8], now_us: u64) -> FeedbackFrame {
        match CommandFrame::decode(image) {
            Ok(frame) => self.cycle(&frame, now_us),
            Err(e) => {
                if self.state != ExecState::Error {
                    self.fault(now_us, ERR_DECODE, format!("command frame: {e}"));
                }
                self.feedback()
            }
        }
    }

    /// One controller cycle at simulated time `now_us`.
    pub fn cycle(&mut self, frame: &CommandFrame, now_us: u64) -> FeedbackFrame {
        let budget = if self.state == ExecState::Running && self.active.is_some() {
            self.cfg.cycle_us as f64 * 1e-6
        } else {
            0.0
        };
        if self.state == ExecState::Aborting {
            self.set_state(now_us, ExecState::Idle);
        }
        if self.last_seq != Some(frame.frame_seq) {
            self.last_seq = Some(frame.frame_seq);
            self.on_frame(frame, now_us);
        }
        if matches!(self.state, ExecState::Loading | ExecState::Running) {
            self.run(budget, now_us);
        }
        self.feedback()
    }

    fn on_frame(&mut self, frame: &CommandFrame, now_us: u64) {
        match (frame.command, self.state) {
            (CommandWord::Abort, ExecState::Idle) => {}
            (CommandWord::Abort, _) => {
                let here = self.tcp();
                self.motion_state.tcp = here;
                self.active = None;
                self.cache.clear();
                self.native_queue.clear();
                self.entry = ChainEntry::default();
                self.set_state(now_us, ExecState::Aborting);
            }
            (CommandWord::Idle, ExecState::Done | ExecState::Error) => {
                self.error_code = 0;
                self.set_state(now_us, ExecState::Idle);
            }
            (CommandWord::Start, ExecState::Idle | ExecState::Done) => self.begin(frame, now_us),
            (CommandWord::Start, ExecState::Loading | ExecState::Running) => {
                if matches!(self.mode, Mode::Streaming) {
                    self.ingest(frame, now_us);
                }
            }
            _ => {}
        }
    }

    fn begin(&mut self, frame: &CommandFrame, now_us: u64) {
        self.total_no = frame.total_no;
        self.cur_exec = 0;
        self.error_code = 0;
        self.cache.clear();
        self.active = None;
        self.entry = ChainEntry::default();
        self.starved_cycles = 0;
        self.emit(now_us, RobotEventKind::SkillStarted { total_no: frame.total_no });
        self.set_state(now_us, ExecState::Loading);
        match &self.mode {
            Mode::Streaming => self.ingest(frame, now_us),
            Mode::Native { program, total_no } => {
                if *total_no != frame.total_no {
                    let msg = format!("resident program has {total_no} records, START asks for {}", frame.total_no);
                    self.fault(now_us, ERR_DECODE, msg);
                    return;
                }
                self.native_queue = program.iter().cloned().collect();
            }
        }
    }

    /// Decode newly loaded slots and check that unfinished records were left alone.
    fn ingest(&mut self, frame: &CommandFrame, now_us: u64) {
        let violated: Vec<u32> = self
            .cache
            .iter()
            .filter(|(m, (image, _))| frame.loaded_through >= *m + 5 || frame.slot_for(**m) != image)
            .map(|(m, _)| *m)
            .collect();
        for index in violated {
            self.window_violations += 1;
            self.emit(now_us, RobotEventKind::WindowViolation { index });
        }
        let from = self.cache.keys().next_back().copied().unwrap_or(self.cur_exec).max(self.cur_exec) + 1;
        for m in from..=frame.loaded_through.min(self.total_no) {
            let image = *frame.slot_for(m);
            let expected = ((m - 1) % 65536) as u16;
            match decode_record(&image) {
                Ok(rec) if rec.record_seq == expected => {
                    self.cache.insert(m, (image, rec));
                }
                Ok(rec) => {
                    let e = WireError::SequenceMismatch { expected, found: rec.record_seq };
                    self.fault(now_us, ERR_DECODE, format!("record {m}: {e}"));
                    return;
                }
                Err(e) => {
                    self.fault(now_us, ERR_DECODE, format!("record {m}: {e}"));
                    return;
                }
            }
        }
    }

    /// Plan the next physical motion from the records visible now.
    fn lookahead_plan(&self) -> Result<Option<Step>, RobotError> {
        let next = self.cur_exec + 1;
        let visible: Vec<(u32, MotionRecord)> = self
            .cache
            .range(next..)
            .scan(next, |want, (m, (_, rec))| {
                (*m == *want).then(|| {
                    *want += 1;
                    (*m, *rec)
                })
            })
            .collect();
        let mut usable = visible.len();
        if visible.last().is_some_and(|(_, r)| r.continuation) {
            usable -= 1;
        }
        if usable == 0 {
            return Ok(None);
        }
        let records: Vec<MotionRecord> = visible[..usable].iter().map(|(_, r)| *r).collect();
        let commands = reassemble(&records)?;
        let last_visible = visible[usable - 1].0;

        let mut state = self.motion_state;
        let mut resolved = Vec::with_capacity(commands.len());
        let mut first_end = state;
        for (i, cmd) in commands.iter().enumerate() {
            let (r, s) = resolve_motion(cmd, &state);
            resolved.push(r);
            if i == 0 {
                first_end = s;
            }
            state = s;
        }
        let open_end = last_visible < self.total_no && resolved.len() > 1;
        let profile = plan_lookahead(&resolved, self.entry, open_end)?;

        let n = record_count(&commands[0]) as u32;
        let last = next + n - 1;
        let starved = resolved.len() == 1 && last < self.total_no;
        let corner = profile.corners.first().copied().unwrap_or(Corner::STOP);
        let exit = if starved { ChainEntry::default() } else { profile.exits.first().copied().unwrap_or_default() };
        Ok(Some(Step {
            first: next,
            last,
            duration: profile.motion_durations[0],
            corner: if starved { Corner { kind: CornerKind::Starved, cap: 0.0, geometry: None } } else { corner },
            starved,
            resolved: resolved[0],
            records: records[..n as usize].to_vec(),
            end_state: first_end,
            exit,
        }))
    }

    fn next_step(&mut self, now_us: u64) -> Option<Step> {
        match self.mode {
            Mode::Native { .. } => self.native_queue.pop_front(),
            Mode::Streaming => match self.lookahead_plan() {
                Ok(step) => step,
                Err(e) => {
                    let code = if matches!(e, RobotError::Trajectory(_)) { ERR_TRAJECTORY } else { ERR_DECODE };
                    self.fault(now_us, code, e.to_string());
                    None
                }
            },
        }
    }

    fn start_step(&mut self, step: Step, now_us: u64) {
        for (k, rec) in step.records.iter().enumerate() {
            let index = step.first + k as u32;
            let image = match &self.mode {
                Mode::Streaming => self.cache.get(&index).map(|(i, _)| *i),
                Mode::Native { .. } => rec.encode().ok(),
            };
            if let Some(image) = image {
                self.consumed.push(image);
            }
            self.emit(
                now_us,
                RobotEventKind::RecordStarted {
                    index,
                    record_seq: rec.record_seq,
                    motion_type: rec.motion_type,
                    force_setpoint: rec.force_setpoint,
                },
            );
        }
        if step.starved {
            self.starvation_stops += 1;
            self.emit(now_us, RobotEventKind::StarvationStop { index: step.last });
        } else if step.last < self.total_no {
            let (kind, speed) = (step.corner.kind, step.exit.speed);
            self.emit(now_us, RobotEventKind::Corner { index: step.last, kind, speed });
        }
        self.starved_cycles = 0;
        self.active = Some(Active { step, elapsed: 0.0 });
    }

    fn run(&mut self, mut budget: f64, now_us: u64) {
        loop {
            if self.active.is_none() {
                if self.cur_exec >= self.total_no {
                    self.set_state(now_us, ExecState::Done);
                    return;
                }
                match self.next_step(now_us) {
                    Some(step) => {
                        self.set_state(now_us, ExecState::Running);
                        self.start_step(step, now_us);
                    }
                    None => {
                        if self.state == ExecState::Error {
                            return;
                        }
                        self.starved_cycles += 1;
                        if self.starved_cycles >= self.cfg.starvation_timeout_cycles {
                            let msg = format!("record {} not loaded for {} cycles", self.cur_exec + 1, self.starved_cycles);
                            self.fault(now_us, ERR_STARVATION, msg);
                        }
                        return;
                    }
                }
            }
            let active = self.active.as_mut().expect("active motion");
            let remaining = active.step.duration - active.elapsed;
            if budget + TIME_EPS < remaining {
                active.elapsed += budget;
                return;
            }
            budget = (budget - remaining).max(0.0);
            let step = self.active.take().expect("active motion").step;
            for index in step.first..=step.last {
                self.cur_exec = index;
                self.cache.remove(&index);
                self.emit(now_us, RobotEventKind::RecordCompleted { index });
            }
            self.motion_state = step.end_state;
            self.entry = step.exit;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::{Dynamics, MotionCommand};
    use crate::plc::{SkillFunction, SkillState};
    use crate::trajectory::{segment_time, SegmentSpec};
    use nalgebra::Vector3;

    const D: Dynamics = Dynamics { velocity: 250.0, acceleration: 1000.0 };

    fn p(x: f64, y: f64, z: f64) -> Pose {
        Pose::at(x, y, z).unwrap()
    }

    fn origin() -> MotionState {
        MotionState::at(p(0.0, 0.0, 0.0))
    }

    /// Direct PLC/robot coupling with a zero-latency bus, one PLC cycle per robot cycle.
    fn run_direct(sf: &mut SkillFunction, robot: &mut RobotExecutor, max_cycles: usize) -> usize {
        let mut fb = FeedbackFrame::default();
        for c in 0..max_cycles {
            let frame = sf.frame().clone();
            fb = robot.cycle(&frame, c as u64 * 4000);
            let _ = sf.cycle(&fb);
            if matches!(sf.state(), SkillState::Done | SkillState::Error | SkillState::Idle) && c > 0 {
                return c;
            }
        }
        panic!("no completion, last feedback {fb:?}");
    }

    #[test]
    fn single_lin_completes_after_its_segment_time() {
        let plan = ContinuousSkillPlan::from_commands(vec![MotionCommand::lin(p(300.0, 0.0, 0.0), D).unwrap()], vec![]).unwrap();
        let mut sf = SkillFunction::new();
        sf.start(&plan).unwrap();
        let mut robot = RobotExecutor::streaming(origin(), RobotConfig::default());
        run_direct(&mut sf, &mut robot, 10_000);
        let t = segment_time(&SegmentSpec { length: 300.0, v_max: 250.0, accel: 1000.0, v_in: 0.0, v_out: 0.0 }).unwrap();
        let start = robot.events().iter().find(|e| matches!(e.kind, RobotEventKind::RecordStarted { .. })).unwrap().t_us;
        let end = robot.events().iter().find(|e| matches!(e.kind, RobotEventKind::RecordCompleted { .. })).unwrap().t_us;
        assert_eq!(end - start, (t / 0.004).ceil() as u64 * 4000);
        assert_eq!(robot.state(), ExecState::Done);
        assert_eq!(robot.motion_state().tcp, p(300.0, 0.0, 0.0));
    }

    #[test]
    fn streamed_records_run_in_order() {
        let cmds: Vec<_> = (1..=12)
            .map(|i| MotionCommand::lin(p(10.0 * i as f64, (i % 2) as f64 * 10.0, 0.0), D).unwrap().with_approx(2.0).unwrap())
            .collect();
        let mut cmds = cmds;
        let last = cmds.len() - 1;
        cmds[last] = cmds[last].with_approx(0.0).unwrap();
        let plan = ContinuousSkillPlan::from_commands(cmds, vec![]).unwrap();
        let mut sf = SkillFunction::new();
        sf.start(&plan).unwrap();
        let mut robot = RobotExecutor::streaming(origin(), RobotConfig::default());
        run_direct(&mut sf, &mut robot, 10_000);
        assert_eq!(sf.state(), SkillState::Done);
        assert_eq!(robot.consumed(), explode_all(plan.commands()).unwrap().as_slice());
        assert_eq!(robot.window_violations(), 0);
        let order: Vec<u32> = robot
            .events()
            .iter()
            .filter_map(|e| match e.kind {
                RobotEventKind::RecordCompleted { index } => Some(index),
                _ => None,
            })
            .collect();
        assert_eq!(order, (1..=12).collect::<Vec<_>>());
    }

    #[test]
    fn circular_pair_completes_both_records_at_once() {
        let circ = MotionCommand::circular(Vector3::new(50.0, 50.0, 0.0), p(100.0, 0.0, 0.0), D).unwrap();
        let plan = ContinuousSkillPlan::from_commands(vec![circ], vec![]).unwrap();
        let mut sf = SkillFunction::new();
        sf.start(&plan).unwrap();
        let mut robot = RobotExecutor::streaming(origin(), RobotConfig::default());
        run_direct(&mut sf, &mut robot, 10_000);
        let ends: Vec<_> = robot
            .events()
            .iter()
            .filter(|e| matches!(e.kind, RobotEventKind::RecordCompleted { .. }))
            .map(|e| e.t_us)
            .collect();
        assert_eq!(ends.len(), 2);
        assert_eq!(ends[0], ends[1]);
        assert_eq!(robot.cur_exec(), 2);
    }

    #[test]
    fn abort_reaches_idle_on_next_cycle() {
        let plan = ContinuousSkillPlan::from_commands(vec![MotionCommand::lin(p(300.0, 0.0, 0.0), D).unwrap()], vec![]).unwrap();
        let mut sf = SkillFunction::new();
        let start = sf.start(&plan).unwrap().clone();
        let mut robot = RobotExecutor::streaming(origin(), RobotConfig::default());
        robot.cycle(&start, 0);
        robot.cycle(&start, 4000);
        let abort = CommandFrame { command: CommandWord::Abort, frame_seq: start.frame_seq + 1, ..CommandFrame::default() };
        assert_eq!(robot.cycle(&abort, 8000).state, ExecState::Aborting);
        let fb = robot.cycle(&abort, 12000);
        assert_eq!(fb.state, ExecState::Idle);
        assert_eq!(fb.cur_exec, 0);
        assert!(robot.motion_state().tcp.x() > 0.0 && robot.motion_state().tcp.x() < 300.0);
    }

    #[test]
    fn corrupt_slot_and_wrong_sequence_raise_decode_error() {
        let plan = ContinuousSkillPlan::from_commands(vec![MotionCommand::lin(p(1.0, 0.0, 0.0), D).unwrap()], vec![]).unwrap();
        let mut sf = SkillFunction::new();
        let mut frame = sf.start(&plan).unwrap().clone();
        frame.slots[0][0] = 99;
        let mut robot = RobotExecutor::streaming(origin(), RobotConfig::default());
        let fb = robot.cycle(&frame, 0);
        assert_eq!((fb.state, fb.error_code), (ExecState::Error, ERR_DECODE));

        let mut frame = sf.frame().clone();
        frame.slots[0][2] = 7;
        let mut robot = RobotExecutor::streaming(origin(), RobotConfig::default());
        assert_eq!(robot.cycle(&frame, 0).error_code, ERR_DECODE);
    }

    #[test]
    fn starvation_times_out() {
        let frame = CommandFrame { command: CommandWord::Start, total_no: 3, loaded_through: 0, frame_seq: 1, ..CommandFrame::default() };
        let cfg = RobotConfig { starvation_timeout_cycles: 5, ..RobotConfig::default() };
        let mut robot = RobotExecutor::streaming(origin(), cfg);
        let mut fb = FeedbackFrame::default();
        for c in 0..5 {
            fb = robot.cycle(&frame, c * 4000);
        }
        assert_eq!((fb.state, fb.error_code), (ExecState::Error, ERR_STARVATION));
    }

    #[test]
    fn lookahead_blends_only_visible_successors() {
        let a = MotionCommand::lin(p(100.0, 0.0, 0.0), D).unwrap().with_approx(10.0).unwrap();
        let b = MotionCommand::lin(p(100.0, 100.0, 0.0), D).unwrap();
        let plan = ContinuousSkillPlan::from_commands(vec![a, b], vec![]).unwrap();
        let images = explode_all(plan.commands()).unwrap();

        let mut partial = CommandFrame { command: CommandWord::Start, total_no: 2, loaded_through: 1, frame_seq: 1, ..CommandFrame::default() };
        partial.slots[0] = images[0];
        let mut robot = RobotExecutor::streaming(origin(), RobotConfig::default());
        robot.cycle(&partial, 0);
        assert_eq!(robot.starvation_stops(), 1);

        let mut full = partial.clone();
        full.loaded_through = 2;
        full.slots[1] = images[1];
        let mut robot = RobotExecutor::streaming(origin(), RobotConfig::default());
        robot.cycle(&full, 0);
        assert_eq!(robot.starvation_stops(), 0);
        let corner = robot.events().iter().find_map(|e| match e.kind {
            RobotEventKind::Corner { kind, speed, .. } => Some((kind, speed)),
            _ => None,
        });
        let (kind, speed) = corner.unwrap();
        assert_eq!(kind, CornerKind::Blend);
        assert!((speed - (1000.0f64 * 10.0).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn native_program_matches_group_profiles() {
        let a = MotionCommand::lin(p(100.0, 0.0, 0.0), D).unwrap().with_approx(10.0).unwrap();
        let b = MotionCommand::lin(p(100.0, 100.0, 0.0), D).unwrap();
        let g1 = ContinuousSkillPlan::from_commands(vec![a, b], vec![]).unwrap();
        let g2 = ContinuousSkillPlan::from_commands(vec![MotionCommand::lin(p(0.0, 0.0, 0.0), D).unwrap()], vec![]).unwrap();
        let mut robot = RobotExecutor::native(&[g1.clone(), g2.clone()], origin(), RobotConfig::default()).unwrap();
        let mut sf = SkillFunction::new();
        sf.start_program(3).unwrap();
        let cycles = run_direct(&mut sf, &mut robot, 10_000);
        assert_eq!(robot.cur_exec(), 3);
        let t1 = plan_group_profile(&g1, &origin(), true).unwrap().total_time;
        let t2 = plan_group_profile(&g2, &MotionState::at(p(100.0, 100.0, 0.0)), true).unwrap().total_time;
        let expected = ((t1 + t2) / 0.004).ceil() as usize;
        assert!(cycles.abs_diff(expected) <= 3, "{cycles} vs {expected}");
    }

    #[test]
    fn native_program_with_no_groups_is_done_immediately() {
        let mut robot = RobotExecutor::native(&[], origin(), RobotConfig::default()).unwrap();
        let frame = CommandFrame { command: CommandWord::Start, frame_seq: 1, ..CommandFrame::default() };
        assert_eq!(robot.cycle(&frame, 0).state, ExecState::Done);
    }
}
