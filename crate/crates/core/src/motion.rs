//! Motion primitives and the skill-level containers built from them.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{GeometryError, JointTarget, Pose};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MotionError {
    #[error("velocity must be positive and finite, got {0}")]
    Velocity(f64),
    #[error("acceleration must be positive and finite, got {0}")]
    Acceleration(f64),
    #[error("approximation distance must be non-negative and finite, got {0}")]
    ApproxDistance(f64),
    #[error("{0:?} requires a {1} target")]
    TargetKind(MotionType, &'static str),
    #[error("auxiliary point is required for CIRCULAR and forbidden otherwise")]
    AuxPoint,
    #[error("force setpoint is only meaningful for LIN_FORCE")]
    ForceSetpoint,
    #[error("a skill plan needs at least one motion")]
    EmptyPlan,
    #[error("the last motion of a skill plan must end in an exact stop")]
    OpenEnd,
    #[error("interior motion {0} is labeled as an accurate stop")]
    InteriorStop(usize),
    #[error("invalid action tag `{0}`")]
    ActionTag(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Motion primitive. The discriminant is the wire code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u8)]
pub enum MotionType {
    LinCartesian = 1,
    PtpCartesian = 2,
    PtpJoint = 3,
    Circular = 4,
    Spline = 5,
    LinForce = 6,
}

impl MotionType {
    pub const ALL: [MotionType; 6] = [
        MotionType::LinCartesian,
        MotionType::PtpCartesian,
        MotionType::PtpJoint,
        MotionType::Circular,
        MotionType::Spline,
        MotionType::LinForce,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(usize::from(code).wrapping_sub(1)).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            MotionType::LinCartesian => "LIN",
            MotionType::PtpCartesian => "PTP",
            MotionType::PtpJoint => "PTP_JOINT",
            MotionType::Circular => "CIRC",
            MotionType::Spline => "SPLINE",
            MotionType::LinForce => "LIN_FORCE",
        }
    }

    /// Motions whose path is a straight line between Cartesian waypoints in the timing model.
    pub fn is_cartesian(self) -> bool {
        !matches!(self, MotionType::PtpJoint)
    }
}

impl fmt::Display for MotionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MotionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown motion type `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathLabel {
    Blending,
    AccuratePath,
    AccurateStop,
}

impl PathLabel {
    pub fn name(self) -> &'static str {
        match self {
            PathLabel::Blending => "BLENDING",
            PathLabel::AccuratePath => "ACCURATE_PATH",
            PathLabel::AccurateStop => "ACCURATE_STOP",
        }
    }
}

impl fmt::Display for PathLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PathLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [PathLabel::Blending, PathLabel::AccuratePath, PathLabel::AccurateStop]
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| format!("unknown path label `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Cartesian(Pose),
    Joint(JointTarget),
}

/// Velocity and acceleration limits of one motion (mm or degrees based).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dynamics {
    pub velocity: f64,
    pub acceleration: f64,
}

impl Dynamics {
    pub fn new(velocity: f64, acceleration: f64) -> Result<Self, MotionError> {
        let d = Self { velocity, acceleration };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), MotionError> {
        if !(self.velocity.is_finite() && self.velocity > 0.0) {
            return Err(MotionError::Velocity(self.velocity));
        }
        if !(self.acceleration.is_finite() && self.acceleration > 0.0) {
            return Err(MotionError::Acceleration(self.acceleration));
        }
        Ok(())
    }
}

/// Unchecked field set of a [`MotionCommand`]; validated by [`MotionCommand::from_parts`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionParts {
    pub motion_type: MotionType,
    pub target: Target,
    pub aux_point: Option<Vector3<f64>>,
    pub dynamics: Dynamics,
    pub approx_distance: f64,
    pub tool_frame: u8,
    pub base_frame: u8,
    /// Deci-newtons.
    pub force_setpoint: u32,
}

/// One validated motion primitive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionCommand(MotionParts);

impl MotionCommand {
    pub fn from_parts(parts: MotionParts) -> Result<Self, MotionError> {
        parts.dynamics.validate()?;
        if !(parts.approx_distance.is_finite() && parts.approx_distance >= 0.0) {
            return Err(MotionError::ApproxDistance(parts.approx_distance));
        }
        match (parts.motion_type, parts.target) {
            (MotionType::PtpJoint, Target::Cartesian(_)) => {
                return Err(MotionError::TargetKind(parts.motion_type, "joint"))
            }
            (t, Target::Joint(_)) if t != MotionType::PtpJoint => {
                return Err(MotionError::TargetKind(t, "Cartesian"))
            }
            _ => {}
        }
        if parts.aux_point.is_some() != (parts.motion_type == MotionType::Circular) {
            return Err(MotionError::AuxPoint);
        }
        if let Some(aux) = parts.aux_point {
            if !aux.iter().all(|v| v.is_finite()) {
                return Err(GeometryError::NonFinite("aux").into());
            }
        }
        if parts.force_setpoint != 0 && parts.motion_type != MotionType::LinForce {
            return Err(MotionError::ForceSetpoint);
        }
        Ok(Self(parts))
    }

    fn simple(motion_type: MotionType, target: Target, dynamics: Dynamics) -> Result<Self, MotionError> {
        Self::from_parts(MotionParts {
            motion_type,
            target,
            aux_point: None,
            dynamics,
            approx_distance: 0.0,
            tool_frame: 0,
            base_frame: 0,
            force_setpoint: 0,
        })
    }

    pub fn lin(target: Pose, dynamics: Dynamics) -> Result<Self, MotionError> {
        Self::simple(MotionType::LinCartesian, Target::Cartesian(target), dynamics)
    }

    pub fn ptp(target: Pose, dynamics: Dynamics) -> Result<Self, MotionError> {
        Self::simple(MotionType::PtpCartesian, Target::Cartesian(target), dynamics)
    }

    pub fn ptp_joint(target: JointTarget, dynamics: Dynamics) -> Result<Self, MotionError> {
        Self::simple(MotionType::PtpJoint, Target::Joint(target), dynamics)
    }

    pub fn spline(target: Pose, dynamics: Dynamics) -> Result<Self, MotionError> {
        Self::simple(MotionType::Spline, Target::Cartesian(target), dynamics)
    }

    pub fn circular(aux: Vector3<f64>, target: Pose, dynamics: Dynamics) -> Result<Self, MotionError> {
        Self::from_parts(MotionParts {
            motion_type: MotionType::Circular,
            target: Target::Cartesian(target),
            aux_point: Some(aux),
            dynamics,
            approx_distance: 0.0,
            tool_frame: 0,
            base_frame: 0,
            force_setpoint: 0,
        })
    }

    pub fn lin_force(target: Pose, force_dn: u32, dynamics: Dynamics) -> Result<Self, MotionError> {
        Self::from_parts(MotionParts {
            force_setpoint: force_dn,
            ..Self::simple(MotionType::LinForce, Target::Cartesian(target), dynamics)?.0
        })
    }

    pub fn with_approx(self, approx_distance: f64) -> Result<Self, MotionError> {
        Self::from_parts(MotionParts { approx_distance, ..self.0 })
    }

    pub fn with_frames(self, tool_frame: u8, base_frame: u8) -> Self {
        Self(MotionParts { tool_frame, base_frame, ..self.0 })
    }

    pub fn parts(&self) -> &MotionParts {
        &self.0
    }
    pub fn motion_type(&self) -> MotionType {
        self.0.motion_type
    }
    pub fn target(&self) -> &Target {
        &self.0.target
    }
    pub fn cartesian_target(&self) -> Option<&Pose> {
        match &self.0.target {
            Target::Cartesian(p) => Some(p),
            Target::Joint(_) => None,
        }
    }
    pub fn aux_point(&self) -> Option<Vector3<f64>> {
        self.0.aux_point
    }
    pub fn dynamics(&self) -> Dynamics {
        self.0.dynamics
    }
    pub fn approx_distance(&self) -> f64 {
        self.0.approx_distance
    }
    pub fn tool_frame(&self) -> u8 {
        self.0.tool_frame
    }
    pub fn base_frame(&self) -> u8 {
        self.0.base_frame
    }
    pub fn force_setpoint(&self) -> u32 {
        self.0.force_setpoint
    }
}

/// Tag of the standstill action that closes a skill group, e.g. `gripper_close`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ActionTag(String);

impl ActionTag {
    pub fn new(tag: impl Into<String>) -> Result<Self, MotionError> {
        let tag = tag.into();
        let ok = !tag.is_empty()
            && tag.len() <= 64
            && tag.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-');
        if ok {
            Ok(Self(tag))
        } else {
            Err(MotionError::ActionTag(tag))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ActionTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledMotion {
    pub command: MotionCommand,
    /// Label of the motion's end point.
    pub label: PathLabel,
}

/// Ordered motions executed as one continuous skill, ending in an exact stop.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSkillPlan {
    motions: Vec<LabeledMotion>,
    terminal_actions: Vec<ActionTag>,
}

impl ContinuousSkillPlan {
    pub fn new(motions: Vec<LabeledMotion>, terminal_actions: Vec<ActionTag>) -> Result<Self, MotionError> {
        let Some(last) = motions.last() else {
            return Err(MotionError::EmptyPlan);
        };
        if last.command.approx_distance() != 0.0 {
            return Err(MotionError::OpenEnd);
        }
        if let Some(i) = motions[..motions.len() - 1]
            .iter()
            .position(|m| m.label == PathLabel::AccurateStop)
        {
            return Err(MotionError::InteriorStop(i));
        }
        Ok(Self { motions, terminal_actions })
    }

    /// Labels inferred from the approximation distances; the last motion becomes an accurate stop.
    pub fn from_commands(commands: Vec<MotionCommand>, terminal_actions: Vec<ActionTag>) -> Result<Self, MotionError> {
        let n = commands.len();
        let motions = commands
            .into_iter()
            .enumerate()
            .map(|(i, command)| {
                let label = if i + 1 == n {
                    PathLabel::AccurateStop
                } else if command.approx_distance() > 0.0 {
                    PathLabel::Blending
                } else {
                    PathLabel::AccuratePath
                };
                LabeledMotion { command, label }
            })
            .collect();
        Self::new(motions, terminal_actions)
    }

    pub fn motions(&self) -> &[LabeledMotion] {
        &self.motions
    }

    pub fn commands(&self) -> impl Iterator<Item = &MotionCommand> + '_ {
        self.motions.iter().map(|m| &m.command)
    }

    /// Standstill actions performed after the final exact stop, in order.
    pub fn terminal_actions(&self) -> &[ActionTag] {
        &self.terminal_actions
    }

    pub(crate) fn push_terminal_action(&mut self, action: ActionTag) {
        self.terminal_actions.push(action);
    }

    pub fn len(&self) -> usize {
        self.motions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.motions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ExecutionType {
    /// Program resident in the robot controller.
    Rc,
    /// One PLC skill per motion.
    Sm,
    /// Continuous-motion skills streamed from the PLC.
    Cm,
}

impl ExecutionType {
    pub const ALL: [ExecutionType; 3] = [ExecutionType::Rc, ExecutionType::Sm, ExecutionType::Cm];

    pub fn name(self) -> &'static str {
        match self {
            ExecutionType::Rc => "RC",
            ExecutionType::Sm => "SM",
            ExecutionType::Cm => "CM",
        }
    }
}

impl fmt::Display for ExecutionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExecutionType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rc" => Ok(ExecutionType::Rc),
            "sm" => Ok(ExecutionType::Sm),
            "cm" => Ok(ExecutionType::Cm),
            _ => Err(format!("unknown execution type `{s}`")),
        }
    }
}
