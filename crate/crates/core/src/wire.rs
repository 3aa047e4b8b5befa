//! Bit-exact process images exchanged between PLC and robot controller.
//!
//! Everything is little-endian; scalars are IEEE-754 single precision.
//!
//! Motion record (44 bytes):
//!
//! | offset | size | field                                            |
//! |-------:|-----:|--------------------------------------------------|
//! | 0      | 1    | motion type code (1..=6)                         |
//! | 1      | 1    | flags: bit0 joint target, bit1 continuation      |
//! | 2      | 2    | record_seq (u16)                                 |
//! | 4      | 24   | six target components (f32)                      |
//! | 28     | 4    | velocity (f32)                                   |
//! | 32     | 4    | acceleration (f32)                               |
//! | 36     | 4    | approximation distance (f32)                     |
//! | 40     | 1    | tool frame                                       |
//! | 41     | 1    | base frame                                       |
//! | 42     | 2    | force setpoint, deci-newtons (u16)               |
//!
//! Command frame (256 bytes): 12-byte header (command word, record count,
//! `totalNo` u32, `loadedThrough` u32, frame_seq u16), five record slots at
//! bytes 12..232, zero padding to 256.
//!
//! Feedback frame (256 bytes): state, error code, `curExec` u32, acked
//! frame_seq u16, TCP pose as six f32, four reserved bytes, zero padding.

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{JointTarget, Pose};
use crate::motion::{Dynamics, MotionCommand, MotionError, MotionParts, MotionType, Target};

pub const RECORD_LEN: usize = 44;
pub const FRAME_LEN: usize = 256;
pub const SLOT_COUNT: usize = 5;
pub const HEADER_LEN: usize = 12;
const SLOTS_END: usize = HEADER_LEN + SLOT_COUNT * RECORD_LEN;
const FEEDBACK_USED: usize = 36;
const _: () = assert!(SLOTS_END <= FRAME_LEN);

pub const FLAG_JOINT: u8 = 0b01;
pub const FLAG_CONTINUATION: u8 = 0b10;

pub type RecordImage = [u8; RECORD_LEN];
pub type FrameImage = [u8; FRAME_LEN];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WireError {
    #[error("record image must be {RECORD_LEN} bytes, got {0}")]
    RecordLength(usize),
    #[error("unknown motion type code {0}")]
    UnknownMotionType(u8),
    #[error("non-finite scalar at byte offset {0}")]
    NonFiniteScalar(usize),
    #[error("malformed continuation record")]
    MalformedContinuation,
    #[error("flags {0:#04x} are inconsistent with the motion type")]
    InconsistentFlags(u8),
    #[error("value of `{0}` cannot be encoded")]
    UnencodableValue(&'static str),
    #[error("circular motions span two records; use explode_motion")]
    CircularNeedsExplode,
    #[error("frame too short: {0} bytes")]
    FrameTooShort(usize),
    #[error("frame too long: {0} bytes")]
    FrameTooLong(usize),
    #[error("bad command word {0}")]
    BadCommandWord(u8),
    #[error("record count {0} exceeds the {SLOT_COUNT} slots")]
    RecordCountOutOfRange(u8),
    #[error("loadedThrough {loaded_through} exceeds totalNo {total_no}")]
    InconsistentHeader { total_no: u32, loaded_through: u32 },
    #[error("non-zero padding byte at offset {0}")]
    NonZeroPadding(usize),
    #[error("bad executor state code {0}")]
    BadStateCode(u8),
    #[error("continuation record {0} is not followed by its circular target")]
    OrphanContinuation(usize),
    #[error("circular target record {0} has no continuation record before it")]
    MissingContinuation(usize),
    #[error("record_seq {found} where {expected} was expected")]
    SequenceMismatch { expected: u16, found: u16 },
    #[error(transparent)]
    InvalidMotion(#[from] MotionError),
}

/// Logical content of one 44-byte motion queue entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionRecord {
    pub motion_type: MotionType,
    pub joint_target: bool,
    pub continuation: bool,
    pub record_seq: u16,
    pub target: [f32; 6],
    pub velocity: f32,
    pub acceleration: f32,
    pub approx_distance: f32,
    pub tool_frame: u8,
    pub base_frame: u8,
    pub force_setpoint: u16,
}

fn put_f32(buf: &mut [u8], at: usize, v: f32, name: &'static str) -> Result<(), WireError> {
    if !v.is_finite() {
        return Err(WireError::UnencodableValue(name));
    }
    buf[at..at + 4].copy_from_slice(&v.to_le_bytes());
    Ok(())
}

fn get_f32(buf: &[u8], at: usize) -> Result<f32, WireError> {
    let v = f32::from_le_bytes(buf[at..at + 4].try_into().expect("4-byte slice"));
    if v.is_finite() {
        Ok(v)
    } else {
        Err(WireError::NonFiniteScalar(at))
    }
}

fn get_u16(buf: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([buf[at], buf[at + 1]])
}

fn get_u32(buf: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(buf[at..at + 4].try_into().expect("4-byte slice"))
}

fn narrow(v: f64, name: &'static str) -> Result<f32, WireError> {
    let n = v as f32;
    if n.is_finite() {
        Ok(n)
    } else {
        Err(WireError::UnencodableValue(name))
    }
}

impl MotionRecord {
    fn flags(&self) -> u8 {
        (if self.joint_target { FLAG_JOINT } else { 0 }) | (if self.continuation { FLAG_CONTINUATION } else { 0 })
    }

    pub fn encode(&self) -> Result<RecordImage, WireError> {
        let mut out = [0u8; RECORD_LEN];
        out[0] = self.motion_type.code();
        out[1] = self.flags();
        out[2..4].copy_from_slice(&self.record_seq.to_le_bytes());
        for (i, v) in self.target.iter().enumerate() {
            put_f32(&mut out, 4 + 4 * i, *v, "target")?;
        }
        put_f32(&mut out, 28, self.velocity, "velocity")?;
        put_f32(&mut out, 32, self.acceleration, "acceleration")?;
        put_f32(&mut out, 36, self.approx_distance, "approx_distance")?;
        out[40] = self.tool_frame;
        out[41] = self.base_frame;
        out[42..44].copy_from_slice(&self.force_setpoint.to_le_bytes());
        Ok(out)
    }

    pub fn decode(image: &[u8]) -> Result<Self, WireError> {
        if image.len() != RECORD_LEN {
            return Err(WireError::RecordLength(image.len()));
        }
        let motion_type = MotionType::from_code(image[0]).ok_or(WireError::UnknownMotionType(image[0]))?;
        let flags = image[1];
        if flags & !(FLAG_JOINT | FLAG_CONTINUATION) != 0
            || (flags & FLAG_JOINT != 0) != (motion_type == MotionType::PtpJoint)
        {
            return Err(WireError::InconsistentFlags(flags));
        }
        let continuation = flags & FLAG_CONTINUATION != 0;
        let mut target = [0f32; 6];
        for (i, slot) in target.iter_mut().enumerate() {
            *slot = get_f32(image, 4 + 4 * i)?;
        }
        if continuation && (motion_type != MotionType::Circular || target[3..].iter().any(|v| *v != 0.0)) {
            return Err(WireError::MalformedContinuation);
        }
        Ok(Self {
            motion_type,
            joint_target: flags & FLAG_JOINT != 0,
            continuation,
            record_seq: get_u16(image, 2),
            target,
            velocity: get_f32(image, 28)?,
            acceleration: get_f32(image, 32)?,
            approx_distance: get_f32(image, 36)?,
            tool_frame: image[40],
            base_frame: image[41],
            force_setpoint: get_u16(image, 42),
        })
    }

    fn from_command(cmd: &MotionCommand, record_seq: u16) -> Result<Self, WireError> {
        let parts = cmd.parts();
        let (joint_target, raw) = match parts.target {
            Target::Cartesian(p) => (false, p.to_array()),
            Target::Joint(j) => (true, j.joints()),
        };
        let mut target = [0f32; 6];
        for (slot, v) in target.iter_mut().zip(raw) {
            *slot = narrow(v, "target")?;
        }
        let force_setpoint =
            u16::try_from(parts.force_setpoint).map_err(|_| WireError::UnencodableValue("force_setpoint"))?;
        Ok(Self {
            motion_type: parts.motion_type,
            joint_target,
            continuation: false,
            record_seq,
            target,
            velocity: narrow(parts.dynamics.velocity, "velocity")?,
            acceleration: narrow(parts.dynamics.acceleration, "acceleration")?,
            approx_distance: narrow(parts.approx_distance, "approx_distance")?,
            tool_frame: parts.tool_frame,
            base_frame: parts.base_frame,
            force_setpoint,
        })
    }

    /// Rebuild the command of a single-record motion. Continuation records
    /// need their successor; see [`reassemble`].
    pub fn to_command(&self) -> Result<MotionCommand, WireError> {
        if self.continuation || self.motion_type == MotionType::Circular {
            return Err(WireError::MissingContinuation(0));
        }
        self.command_with_aux(None)
    }

    fn command_with_aux(&self, aux_point: Option<Vector3<f64>>) -> Result<MotionCommand, WireError> {
        let t = self.target.map(f64::from);
        let target = if self.joint_target {
            Target::Joint(JointTarget::new(t).map_err(MotionError::from)?)
        } else {
            Target::Cartesian(Pose::try_from(t).map_err(MotionError::from)?)
        };
        Ok(MotionCommand::from_parts(MotionParts {
            motion_type: self.motion_type,
            target,
            aux_point,
            dynamics: Dynamics { velocity: self.velocity.into(), acceleration: self.acceleration.into() },
            approx_distance: self.approx_distance.into(),
            tool_frame: self.tool_frame,
            base_frame: self.base_frame,
            force_setpoint: self.force_setpoint.into(),
        })?)
    }

    pub fn aux_position(&self) -> Vector3<f64> {
        Vector3::new(self.target[0].into(), self.target[1].into(), self.target[2].into())
    }
}

/// Encode a single-record motion. Circular motions go through [`explode_motion`].
pub fn encode_record(cmd: &MotionCommand, record_seq: u16) -> Result<RecordImage, WireError> {
    if cmd.motion_type() == MotionType::Circular {
        return Err(WireError::CircularNeedsExplode);
    }
    let image = MotionRecord::from_command(cmd, record_seq)?.encode()?;
    debug_assert_eq!(image.len(), RECORD_LEN);
    Ok(image)
}

pub fn decode_record(image: &[u8]) -> Result<MotionRecord, WireError> {
    MotionRecord::decode(image)
}

/// Number of queue records a command occupies.
pub fn record_count(cmd: &MotionCommand) -> usize {
    if cmd.motion_type() == MotionType::Circular {
        2
    } else {
        1
    }
}

/// Split a command into its queue records. Circular motions become a
/// continuation record carrying the auxiliary position, followed by the
/// target record.
pub fn explode_motion(cmd: &MotionCommand, next_record_seq: u16) -> Result<Vec<RecordImage>, WireError> {
    let mut rec = MotionRecord::from_command(cmd, next_record_seq)?;
    match cmd.aux_point() {
        None => Ok(vec![rec.encode()?]),
        Some(aux) => {
            let continuation = MotionRecord {
                continuation: true,
                target: [narrow(aux.x, "aux")?, narrow(aux.y, "aux")?, narrow(aux.z, "aux")?, 0.0, 0.0, 0.0],
                approx_distance: 0.0,
                ..rec
            };
            rec.record_seq = next_record_seq.wrapping_add(1);
            Ok(vec![continuation.encode()?, rec.encode()?])
        }
    }
}

/// Explode a whole motion sequence with consecutive record_seq values starting at 0.
pub fn explode_all<'a>(cmds: impl IntoIterator<Item = &'a MotionCommand>) -> Result<Vec<RecordImage>, WireError> {
    let mut out = Vec::new();
    for cmd in cmds {
        let seq = (out.len() % 65536) as u16;
        out.extend(explode_motion(cmd, seq)?);
    }
    Ok(out)
}

/// Inverse of [`explode_all`] over decoded records.
pub fn reassemble(records: &[MotionRecord]) -> Result<Vec<MotionCommand>, WireError> {
    let mut out = Vec::with_capacity(records.len());
    let mut i = 0;
    while i < records.len() {
        let rec = &records[i];
        if rec.continuation {
            let Some(next) = records.get(i + 1).filter(|n| n.motion_type == MotionType::Circular && !n.continuation)
            else {
                return Err(WireError::OrphanContinuation(i));
            };
            out.push(next.command_with_aux(Some(rec.aux_position()))?);
            i += 2;
        } else if rec.motion_type == MotionType::Circular {
            return Err(WireError::MissingContinuation(i));
        } else {
            out.push(rec.command_with_aux(None)?);
            i += 1;
        }
    }
    Ok(out)
}

/// Slot holding 1-based record `m`.
pub fn slot_index(m: u32) -> usize {
    debug_assert!(m >= 1);
    ((m - 1) % SLOT_COUNT as u32) as usize
}

fn check_frame_len(image: &[u8]) -> Result<(), WireError> {
    match image.len() {
        n if n < FRAME_LEN => Err(WireError::FrameTooShort(n)),
        n if n > FRAME_LEN => Err(WireError::FrameTooLong(n)),
        _ => Ok(()),
    }
}

fn check_zero(image: &[u8], from: usize) -> Result<(), WireError> {
    match image[from..].iter().position(|b| *b != 0) {
        Some(i) => Err(WireError::NonZeroPadding(from + i)),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum CommandWord {
    Idle = 0,
    Start = 1,
    Abort = 2,
}

impl CommandWord {
    fn from_code(code: u8) -> Result<Self, WireError> {
        match code {
            0 => Ok(Self::Idle),
            1 => Ok(Self::Start),
            2 => Ok(Self::Abort),
            c => Err(WireError::BadCommandWord(c)),
        }
    }
}

/// PLC → robot process image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CommandFrame {
    pub command: CommandWord,
    pub record_count: u8,
    pub total_no: u32,
    pub loaded_through: u32,
    pub frame_seq: u16,
    pub slots: [RecordImage; SLOT_COUNT],
}

impl Default for CommandFrame {
    fn default() -> Self {
        Self {
            command: CommandWord::Idle,
            record_count: 0,
            total_no: 0,
            loaded_through: 0,
            frame_seq: 0,
            slots: [[0; RECORD_LEN]; SLOT_COUNT],
        }
    }
}

impl CommandFrame {
    fn validate(&self) -> Result<(), WireError> {
        if usize::from(self.record_count) > SLOT_COUNT {
            return Err(WireError::RecordCountOutOfRange(self.record_count));
        }
        if self.loaded_through > self.total_no {
            return Err(WireError::InconsistentHeader {
                total_no: self.total_no,
                loaded_through: self.loaded_through,
            });
        }
        Ok(())
    }

    pub fn encode(&self) -> Result<FrameImage, WireError> {
        self.validate()?;
        let mut out = [0u8; FRAME_LEN];
        out[0] = self.command as u8;
        out[1] = self.record_count;
        out[2..6].copy_from_slice(&self.total_no.to_le_bytes());
        out[6..10].copy_from_slice(&self.loaded_through.to_le_bytes());
        out[10..12].copy_from_slice(&self.frame_seq.to_le_bytes());
        for (i, slot) in self.slots.iter().enumerate() {
            let at = HEADER_LEN + i * RECORD_LEN;
            out[at..at + RECORD_LEN].copy_from_slice(slot);
        }
        Ok(out)
    }

    pub fn decode(image: &[u8]) -> Result<Self, WireError> {
        check_frame_len(image)?;
        let frame = Self {
            command: CommandWord::from_code(image[0])?,
            record_count: image[1],
            total_no: get_u32(image, 2),
            loaded_through: get_u32(image, 6),
            frame_seq: get_u16(image, 10),
            slots: std::array::from_fn(|i| {
                let at = HEADER_LEN + i * RECORD_LEN;
                image[at..at + RECORD_LEN].try_into().expect("slot slice")
            }),
        };
        frame.validate()?;
        check_zero(image, SLOTS_END)?;
        Ok(frame)
    }

    /// Slot image for 1-based record `m`.
    pub fn slot_for(&self, m: u32) -> &RecordImage {
        &self.slots[slot_index(m)]
    }
}

pub fn encode_command_frame(frame: &CommandFrame) -> Result<FrameImage, WireError> {
    frame.encode()
}

pub fn decode_command_frame(image: &[u8]) -> Result<CommandFrame, WireError> {
    CommandFrame::decode(image)
}

/// Robot executor state as reported on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum ExecState {
    Idle = 0,
    Loading = 1,
    Running = 2,
    Done = 3,
    Error = 4,
    Aborting = 5,
}

impl ExecState {
    pub fn from_code(code: u8) -> Result<Self, WireError> {
        Ok(match code {
            0 => Self::Idle,
            1 => Self::Loading,
            2 => Self::Running,
            3 => Self::Done,
            4 => Self::Error,
            5 => Self::Aborting,
            c => return Err(WireError::BadStateCode(c)),
        })
    }
}

/// Robot → PLC process image.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackFrame {
    pub state: ExecState,
    pub error_code: u8,
    pub cur_exec: u32,
    pub acked_seq: u16,
    pub tcp: [f32; 6],
}

impl Default for FeedbackFrame {
    fn default() -> Self {
        Self { state: ExecState::Idle, error_code: 0, cur_exec: 0, acked_seq: 0, tcp: [0.0; 6] }
    }
}

impl FeedbackFrame {
    pub fn encode(&self) -> Result<FrameImage, WireError> {
        let mut out = [0u8; FRAME_LEN];
        out[0] = self.state as u8;
        out[1] = self.error_code;
        out[2..6].copy_from_slice(&self.cur_exec.to_le_bytes());
        out[6..8].copy_from_slice(&self.acked_seq.to_le_bytes());
        for (i, v) in self.tcp.iter().enumerate() {
            put_f32(&mut out, 8 + 4 * i, *v, "tcp")?;
        }
        Ok(out)
    }

    pub fn decode(image: &[u8]) -> Result<Self, WireError> {
        check_frame_len(image)?;
        let state = ExecState::from_code(image[0])?;
        let mut tcp = [0f32; 6];
        for (i, v) in tcp.iter_mut().enumerate() {
            *v = get_f32(image, 8 + 4 * i)?;
        }
        check_zero(image, FEEDBACK_USED - 4)?;
        Ok(Self { state, error_code: image[1], cur_exec: get_u32(image, 2), acked_seq: get_u16(image, 6), tcp })
    }
}

pub fn encode_feedback_frame(frame: &FeedbackFrame) -> Result<FrameImage, WireError> {
    frame.encode()
}

pub fn decode_feedback_frame(image: &[u8]) -> Result<FeedbackFrame, WireError> {
    FeedbackFrame::decode(image)
}
