//! PLC side of the skill interface: a cyclic skill function block with its
//! state machine and the FIFO update logic that streams records through the
//! five command-frame slots.

use thiserror::Error;

use crate::motion::{ContinuousSkillPlan, MotionError};
use crate::wire::{explode_all, CommandFrame, CommandWord, ExecState, FeedbackFrame, RecordImage, WireError, SLOT_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SkillState {
    Idle,
    Loading,
    Running,
    Done,
    Error,
    Aborting,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlcError {
    #[error("skill function is busy ({0:?})")]
    BusySkill(SkillState),
    #[error("plan has {0} records, more than a u32 index can address")]
    PlanTooLarge(usize),
    #[error("feedback curExec went back from {from} to {to}")]
    FeedbackRegression { from: u32, to: u32 },
    #[error("robot reports {cur_exec} records executed but only {loaded_through} were loaded")]
    ExecBeyondLoaded { cur_exec: u32, loaded_through: u32 },
    #[error("robot reported error code {0}")]
    RobotError(u8),
    #[error("robot reported unexpected state {0:?}")]
    UnexpectedRobotState(ExecState),
    #[error("no skill is running")]
    NotRunning,
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Motion(#[from] MotionError),
}

/// One skill function block instance. Owns the command frame it publishes.
#[derive(Debug, Clone)]
pub struct SkillFunction {
    state: SkillState,
    records: Vec<RecordImage>,
    total_no: u32,
    cur_exec: u32,
    frame: CommandFrame,
    /// Next frame_seq; shared by every skill this block runs.
    next_seq: u16,
    start_seq: u16,
    abort_seq: u16,
}

impl Default for SkillFunction {
    fn default() -> Self {
        Self::new()
    }
}

impl SkillFunction {
    pub fn new() -> Self {
        Self {
            state: SkillState::Idle,
            records: Vec::new(),
            total_no: 0,
            cur_exec: 0,
            frame: CommandFrame::default(),
            next_seq: 1,
            start_seq: 0,
            abort_seq: 0,
        }
    }

    pub fn state(&self) -> SkillState {
        self.state
    }

    pub fn frame(&self) -> &CommandFrame {
        &self.frame
    }

    pub fn total_no(&self) -> u32 {
        self.total_no
    }

    pub fn cur_exec(&self) -> u32 {
        self.cur_exec
    }

    pub fn loaded_through(&self) -> u32 {
        self.frame.loaded_through
    }

    fn publish(&mut self, frame: CommandFrame) -> u16 {
        let seq = self.next_seq;
        self.next_seq = self.next_seq.wrapping_add(1);
        self.frame = CommandFrame { frame_seq: seq, ..frame };
        seq
    }

    fn require_idle(&self) -> Result<(), PlcError> {
        match self.state {
            SkillState::Idle => Ok(()),
            s => Err(PlcError::BusySkill(s)),
        }
    }

    /// Start streaming a continuous skill.
    pub fn start(&mut self, plan: &ContinuousSkillPlan) -> Result<&CommandFrame, PlcError> {
        self.require_idle()?;
        let records = explode_all(plan.commands())?;
        self.start_records(records)
    }

    /// Start streaming pre-exploded records.
    pub fn start_records(&mut self, records: Vec<RecordImage>) -> Result<&CommandFrame, PlcError> {
        self.require_idle()?;
        let total_no = u32::try_from(records.len()).map_err(|_| PlcError::PlanTooLarge(records.len()))?;
        let loaded = records.len().min(SLOT_COUNT);
        let mut slots = [[0u8; crate::wire::RECORD_LEN]; SLOT_COUNT];
        slots[..loaded].copy_from_slice(&records[..loaded]);
        self.records = records;
        self.total_no = total_no;
        self.cur_exec = 0;
        self.start_seq = self.publish(CommandFrame {
            command: CommandWord::Start,
            record_count: loaded as u8,
            total_no,
            loaded_through: loaded as u32,
            frame_seq: 0,
            slots,
        });
        self.state = SkillState::Loading;
        Ok(&self.frame)
    }

    /// Start a program that is already resident on the robot controller.
    pub fn start_program(&mut self, total_no: u32) -> Result<&CommandFrame, PlcError> {
        self.require_idle()?;
        self.records.clear();
        self.total_no = total_no;
        self.cur_exec = 0;
        self.start_seq = self.publish(CommandFrame {
            command: CommandWord::Start,
            record_count: 0,
            total_no,
            loaded_through: total_no,
            ..CommandFrame::default()
        });
        self.state = SkillState::Loading;
        Ok(&self.frame)
    }

    /// One PLC cycle: consume the latest feedback image, update the command frame.
    pub fn cycle(&mut self, fb: &FeedbackFrame) -> Result<&CommandFrame, PlcError> {
        match self.state {
            SkillState::Idle | SkillState::Done | SkillState::Error => {}
            SkillState::Aborting => {
                if fb.state == ExecState::Idle && fb.acked_seq == self.abort_seq {
                    self.state = SkillState::Idle;
                    self.publish(CommandFrame::default());
                }
            }
            SkillState::Loading | SkillState::Running => {
                if self.state == SkillState::Loading {
                    if fb.acked_seq != self.start_seq {
                        return Ok(&self.frame);
                    }
                    self.state = SkillState::Running;
                }
                if let Err(e) = self.follow(fb) {
                    self.state = SkillState::Error;
                    return Err(e);
                }
            }
        }
        Ok(&self.frame)
    }

    fn follow(&mut self, fb: &FeedbackFrame) -> Result<(), PlcError> {
        match fb.state {
            ExecState::Error => return Err(PlcError::RobotError(fb.error_code)),
            ExecState::Idle | ExecState::Aborting => return Err(PlcError::UnexpectedRobotState(fb.state)),
            ExecState::Loading | ExecState::Running | ExecState::Done => {}
        }
        if fb.cur_exec < self.cur_exec {
            return Err(PlcError::FeedbackRegression { from: self.cur_exec, to: fb.cur_exec });
        }
        if fb.cur_exec > self.frame.loaded_through {
            return Err(PlcError::ExecBeyondLoaded { cur_exec: fb.cur_exec, loaded_through: self.frame.loaded_through });
        }
        if fb.cur_exec > self.cur_exec && !self.records.is_empty() {
            let mut next = self.frame.clone();
            for k in self.cur_exec + 1..=fb.cur_exec {
                let incoming = k + SLOT_COUNT as u32;
                if incoming <= self.total_no {
                    // record k is complete, so its slot is free for record k + 5
                    next.slots[crate::wire::slot_index(k)] = self.records[incoming as usize - 1];
                    next.loaded_through = incoming;
                }
            }
            next.record_count = next.loaded_through.min(SLOT_COUNT as u32) as u8;
            if next != self.frame {
                self.publish(next);
            }
        }
        self.cur_exec = fb.cur_exec;
        if fb.state == ExecState::Done && fb.cur_exec == self.total_no {
            self.state = SkillState::Done;
        }
        Ok(())
    }

    pub fn abort(&mut self) -> Result<&CommandFrame, PlcError> {
        match self.state {
            SkillState::Loading | SkillState::Running => {
                self.abort_seq = self.publish(CommandFrame { command: CommandWord::Abort, ..CommandFrame::default() });
                self.state = SkillState::Aborting;
                Ok(&self.frame)
            }
            _ => Err(PlcError::NotRunning),
        }
    }

    /// Acknowledge DONE or ERROR and return to IDLE.
    pub fn reset(&mut self) {
        if matches!(self.state, SkillState::Done | SkillState::Error) {
            self.state = SkillState::Idle;
            self.publish(CommandFrame::default());
        }
    }
}

/// What the PLC runs for one execution.
#[derive(Debug, Clone, PartialEq)]
pub enum SkillJob {
    Stream(Vec<RecordImage>),
    Native { total_no: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequencerStatus {
    /// This cycle emitted the first START.
    Started,
    Busy,
    /// This cycle observed the final DONE.
    Finished,
    Aborted,
}

/// Runs skill jobs back to back, starting each one as soon as the previous
/// one reports DONE.
#[derive(Debug, Clone)]
pub struct SkillSequencer {
    function: SkillFunction,
    jobs: Vec<SkillJob>,
    next_job: usize,
    handshakes: usize,
    finished: bool,
    aborted: bool,
}

impl SkillSequencer {
    pub fn new(jobs: Vec<SkillJob>) -> Self {
        Self { function: SkillFunction::new(), jobs, next_job: 0, handshakes: 0, finished: false, aborted: false }
    }

    /// CM: one streamed skill per continuous group.
    pub fn continuous(groups: &[ContinuousSkillPlan]) -> Result<Self, PlcError> {
        let jobs = groups
            .iter()
            .map(|g| Ok(SkillJob::Stream(explode_all(g.commands())?)))
            .collect::<Result<_, PlcError>>()?;
        Ok(Self::new(jobs))
    }

    /// RC: a single START of the program resident on the robot.
    pub fn native(total_no: u32) -> Self {
        Self::new(vec![SkillJob::Native { total_no }])
    }

    pub fn function(&self) -> &SkillFunction {
        &self.function
    }

    pub fn frame(&self) -> &CommandFrame {
        self.function.frame()
    }

    /// Number of START handshakes issued so far.
    pub fn handshakes(&self) -> usize {
        self.handshakes
    }

    /// Index of the job currently running (or last run).
    pub fn current_job(&self) -> usize {
        self.next_job.saturating_sub(1)
    }

    pub fn job_count(&self) -> usize {
        self.jobs.len()
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn start_next(&mut self) -> Result<(), PlcError> {
        self.function.reset();
        match &self.jobs[self.next_job] {
            SkillJob::Stream(records) => self.function.start_records(records.clone())?,
            SkillJob::Native { total_no } => self.function.start_program(*total_no)?,
        };
        self.next_job += 1;
        self.handshakes += 1;
        Ok(())
    }

    pub fn cycle(&mut self, fb: &FeedbackFrame) -> Result<SequencerStatus, PlcError> {
        if self.aborted {
            self.function.cycle(fb)?;
            return Ok(SequencerStatus::Aborted);
        }
        if self.finished {
            return Ok(SequencerStatus::Finished);
        }
        if self.next_job == 0 {
            if self.jobs.is_empty() {
                self.finished = true;
                return Ok(SequencerStatus::Finished);
            }
            self.start_next()?;
            return Ok(SequencerStatus::Started);
        }
        self.function.cycle(fb)?;
        if self.function.state() == SkillState::Done {
            if self.next_job < self.jobs.len() {
                self.start_next()?;
            } else {
                self.finished = true;
                return Ok(SequencerStatus::Finished);
            }
        }
        Ok(SequencerStatus::Busy)
    }

    /// Abort the running job; later jobs are never started.
    pub fn abort(&mut self) -> Result<(), PlcError> {
        self.function.abort()?;
        self.aborted = true;
        Ok(())
    }

    /// True once an abort has been acknowledged by the robot.
    pub fn abort_complete(&self) -> bool {
        self.aborted && self.function.state() == SkillState::Idle
    }
}

/// SM: every motion becomes its own skill that ends in an exact stop.
pub fn single_motion_skills(groups: &[ContinuousSkillPlan]) -> Result<Vec<ContinuousSkillPlan>, PlcError> {
    groups
        .iter()
        .flat_map(|g| g.commands())
        .map(|cmd| Ok(ContinuousSkillPlan::from_commands(vec![cmd.with_approx(0.0)?], vec![])?))
        .collect()
}

/// Sequencer for the SM execution type.
pub fn run_single_motion_sequence(groups: &[ContinuousSkillPlan]) -> Result<SkillSequencer, PlcError> {
    SkillSequencer::continuous(&single_motion_skills(groups)?)
}
