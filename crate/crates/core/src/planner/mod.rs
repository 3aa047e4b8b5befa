//! Motion skill planning.
//!
//! Process steps are labeled, then turned into motions in four stages:
//!
//! 1. every primary path becomes one exact LIN motion;
//! 2. primaries entering a standstill get a collinear linear pre-movement,
//!    primaries leaving one get a collinear post-movement;
//! 3. transits become PTP motions, raised over obstacles when a clearance
//!    height is given;
//! 4. the motion sequence is split at standstill actions into continuous
//!    skill groups.

pub mod text;

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{GeometryError, JointTarget, Pose};
use crate::motion::{
    ActionTag, ContinuousSkillPlan, Dynamics, LabeledMotion, MotionCommand, MotionError, PathLabel,
};

/// Positions closer than this are considered identical.
pub const POSITION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("planning config field `{0}` must be finite and non-negative")]
    InvalidConfig(&'static str),
    #[error("process has no steps")]
    EmptyProcess,
    #[error("step {step}: label {label} is not allowed here")]
    InconsistentLabel { step: usize, label: PathLabel },
    #[error("step {0}: pose is not resolved")]
    UnresolvedPose(usize),
    #[error("step {0}: primary path has zero length")]
    DegeneratePrimary(usize),
    #[error("clearance {clearance} mm is below both transit endpoints")]
    UnreachableClearance { clearance: f64 },
    #[error("motion {0} does not start where the previous one ended")]
    Discontinuity(usize),
    #[error("standstill action `{0}` precedes every motion")]
    StandstillBeforeMotion(ActionTag),
    #[error("transit placeholder survived secondary planning")]
    UnplannedTransit,
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub enum StepKind {
    /// Path that must be followed exactly, from `entry` to `exit`.
    PrimaryPath { entry: Option<Pose>, exit: Option<Pose> },
    /// Action with the robot at rest, e.g. closing the gripper.
    StandstillAction { action: ActionTag, at: Pose },
    /// Free-shape move. `to = None` means "to wherever the next motion starts".
    Transit { to: Option<Pose>, joints: Option<JointTarget>, clearance: Option<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessStep {
    pub kind: StepKind,
    pub label: Option<PathLabel>,
}

impl ProcessStep {
    pub fn primary(entry: Pose, exit: Pose) -> Self {
        Self { kind: StepKind::PrimaryPath { entry: Some(entry), exit: Some(exit) }, label: None }
    }

    pub fn standstill(action: ActionTag, at: Pose) -> Self {
        Self { kind: StepKind::StandstillAction { action, at }, label: None }
    }

    pub fn transit(to: Option<Pose>, clearance: Option<f64>) -> Self {
        Self { kind: StepKind::Transit { to, joints: None, clearance }, label: None }
    }

    pub fn with_label(self, label: PathLabel) -> Self {
        Self { label: Some(label), ..self }
    }
}

/// A process: where the robot starts and what it has to do.
#[derive(Debug, Clone, PartialEq)]
pub struct Process {
    pub start: Pose,
    pub steps: Vec<ProcessStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanningConfig {
    pub pre_move_length: f64,
    pub post_move_length: f64,
    /// Approximation distance given to blended waypoints.
    pub default_approx: f64,
    pub lin: Dynamics,
    pub ptp: Dynamics,
    /// Degrees per second and per second squared.
    pub joint: Dynamics,
    pub tool_frame: u8,
    pub base_frame: u8,
}

impl Default for PlanningConfig {
    fn default() -> Self {
        Self {
            pre_move_length: 50.0,
            post_move_length: 50.0,
            default_approx: 10.0,
            lin: Dynamics { velocity: 250.0, acceleration: 2000.0 },
            ptp: Dynamics { velocity: 250.0, acceleration: 2000.0 },
            joint: Dynamics { velocity: 180.0, acceleration: 720.0 },
            tool_frame: 1,
            base_frame: 0,
        }
    }
}

impl PlanningConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        for (v, name) in [
            (self.pre_move_length, "pre_move_length"),
            (self.post_move_length, "post_move_length"),
            (self.default_approx, "default_approx"),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PlanError::InvalidConfig(name));
            }
        }
        self.lin.validate()?;
        self.ptp.validate()?;
        self.joint.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledStep {
    pub kind: StepKind,
    pub label: PathLabel,
}

/// Where a planned motion came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MotionRole {
    Primary,
    PreMove,
    PostMove,
    Secondary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedMotion {
    pub command: MotionCommand,
    pub label: PathLabel,
    pub role: MotionRole,
    pub start: Pose,
}

impl PlannedMotion {
    pub fn end(&self) -> Pose {
        *self.command.cartesian_target().unwrap_or(&self.start)
    }
}

/// Intermediate planning sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum PlanItem {
    Motion(PlannedMotion),
    Standstill { action: ActionTag, at: Pose },
    Transit { to: Option<Pose>, joints: Option<JointTarget>, clearance: Option<f64>, label: PathLabel },
}

/// The motions of a planning sequence, in order.
pub fn motions_of(items: &[PlanItem]) -> Vec<&PlannedMotion> {
    items
        .iter()
        .filter_map(|i| match i {
            PlanItem::Motion(m) => Some(m),
            _ => None,
        })
        .collect()
}

pub fn label_process(steps: &[ProcessStep]) -> Result<Vec<LabeledStep>, PlanError> {
    if steps.is_empty() {
        return Err(PlanError::EmptyProcess);
    }
    steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            let label = match (&step.kind, step.label) {
                (StepKind::StandstillAction { .. }, None | Some(PathLabel::AccurateStop)) => PathLabel::AccurateStop,
                (StepKind::PrimaryPath { .. }, None) => PathLabel::AccuratePath,
                (StepKind::Transit { .. }, None) => PathLabel::Blending,
                (StepKind::PrimaryPath { .. } | StepKind::Transit { .. }, Some(l)) if l != PathLabel::AccurateStop => l,
                (_, Some(label)) => return Err(PlanError::InconsistentLabel { step: i, label }),
            };
            Ok(LabeledStep { kind: step.kind.clone(), label })
        })
        .collect()
}

/// Step I: each primary path becomes one exact LIN motion.
pub fn plan_primary_motions(steps: &[LabeledStep], cfg: &PlanningConfig) -> Result<Vec<PlanItem>, PlanError> {
    steps
        .iter()
        .enumerate()
        .map(|(i, step)| {
            Ok(match &step.kind {
                StepKind::PrimaryPath { entry, exit } => {
                    let (Some(entry), Some(exit)) = (entry, exit) else {
                        return Err(PlanError::UnresolvedPose(i));
                    };
                    if (exit.position() - entry.position()).norm() <= POSITION_EPS {
                        return Err(PlanError::DegeneratePrimary(i));
                    }
                    PlanItem::Motion(PlannedMotion {
                        command: MotionCommand::lin(*exit, cfg.lin)?.with_frames(cfg.tool_frame, cfg.base_frame),
                        label: step.label,
                        role: MotionRole::Primary,
                        start: *entry,
                    })
                }
                StepKind::StandstillAction { action, at } => PlanItem::Standstill { action: action.clone(), at: *at },
                StepKind::Transit { to, joints, clearance } => {
                    PlanItem::Transit { to: *to, joints: *joints, clearance: *clearance, label: step.label }
                }
            })
        })
        .collect()
}

fn lin_between(from: Pose, to: Pose, approx: f64, label: PathLabel, role: MotionRole, cfg: &PlanningConfig) -> Result<PlannedMotion, PlanError> {
    Ok(PlannedMotion {
        command: MotionCommand::lin(to, cfg.lin)?.with_approx(approx)?.with_frames(cfg.tool_frame, cfg.base_frame),
        label,
        role,
        start: from,
    })
}

/// Step II: collinear pre-movements before primaries that enter a standstill
/// and post-movements after primaries that leave one.
pub fn add_pre_post_movements(items: Vec<PlanItem>, cfg: &PlanningConfig) -> Result<Vec<PlanItem>, PlanError> {
    let is_standstill = |i: Option<&PlanItem>| matches!(i, Some(PlanItem::Standstill { .. }));
    let mut out = Vec::with_capacity(items.len() * 2);
    for (i, item) in items.iter().enumerate() {
        let PlanItem::Motion(m) = item else {
            out.push(item.clone());
            continue;
        };
        if m.role != MotionRole::Primary {
            out.push(item.clone());
            continue;
        }
        let needs_pre = cfg.pre_move_length > 0.0 && is_standstill(items.get(i + 1));
        let needs_post = cfg.post_move_length > 0.0 && i > 0 && is_standstill(items.get(i - 1));
        let dir: Vector3<f64> = (m.end().position() - m.start.position()).normalize();
        let mut primary = m.clone();
        if needs_pre {
            let from = m.start.translated(-dir * cfg.pre_move_length)?;
            out.push(PlanItem::Motion(lin_between(from, m.start, 0.0, PathLabel::AccuratePath, MotionRole::PreMove, cfg)?));
        }
        if needs_post {
            // the junction with the post-movement is an exact, collinear waypoint
            primary.label = PathLabel::AccuratePath;
            primary.command = primary.command.with_approx(0.0)?;
            let exit = m.end();
            let to = exit.translated(dir * cfg.post_move_length)?;
            out.push(PlanItem::Motion(primary));
            out.push(PlanItem::Motion(lin_between(exit, to, cfg.default_approx, PathLabel::Blending, MotionRole::PostMove, cfg)?));
        } else {
            out.push(PlanItem::Motion(primary));
        }
    }
    Ok(out)
}

fn next_motion_start(items: &[PlanItem]) -> Option<Pose> {
    items.iter().find_map(|i| match i {
        PlanItem::Motion(m) => Some(m.start),
        PlanItem::Standstill { at, .. } => Some(*at),
        PlanItem::Transit { to, .. } => *to,
    })
}

/// Step III: transits become PTP motions, with a raised intermediate
/// waypoint when the clearance height lies above both endpoints.
pub fn plan_secondary_motions(items: Vec<PlanItem>, start: &Pose, cfg: &PlanningConfig) -> Result<Vec<PlanItem>, PlanError> {
    let mut out: Vec<PlanItem> = Vec::with_capacity(items.len() + 4);
    let mut here = *start;
    for (i, item) in items.iter().enumerate() {
        match item {
            PlanItem::Transit { to, joints, clearance, label } => {
                let to = to.or_else(|| next_motion_start(&items[i + 1..])).ok_or(PlanError::UnresolvedPose(i))?;
                let approx = if *label == PathLabel::Blending { cfg.default_approx } else { 0.0 };
                let mut waypoints = Vec::with_capacity(2);
                if let Some(h) = *clearance {
                    let (lo, hi) = (here.z().min(to.z()), here.z().max(to.z()));
                    if !h.is_finite() || h < lo {
                        return Err(PlanError::UnreachableClearance { clearance: h });
                    }
                    if h > hi {
                        let mid = (here.position() + to.position()) / 2.0;
                        waypoints.push(to.with_position(Vector3::new(mid.x, mid.y, h))?);
                    }
                }
                waypoints.push(to);
                let last = waypoints.len() - 1;
                for (k, wp) in waypoints.into_iter().enumerate() {
                    let command = match joints {
                        Some(j) if k == last => MotionCommand::ptp_joint(*j, cfg.joint)?,
                        _ => MotionCommand::ptp(wp, cfg.ptp)?,
                    };
                    out.push(PlanItem::Motion(PlannedMotion {
                        command: command.with_approx(approx)?.with_frames(cfg.tool_frame, cfg.base_frame),
                        label: *label,
                        role: MotionRole::Secondary,
                        start: here,
                    }));
                    here = wp;
                }
            }
            PlanItem::Motion(m) => {
                if (m.start.position() - here.position()).norm() > POSITION_EPS {
                    return Err(PlanError::Discontinuity(motions_of(&out).len()));
                }
                here = m.end();
                out.push(item.clone());
            }
            PlanItem::Standstill { at, .. } => {
                if (at.position() - here.position()).norm() > POSITION_EPS {
                    return Err(PlanError::Discontinuity(motions_of(&out).len()));
                }
                out.push(item.clone());
            }
        }
    }
    Ok(out)
}

/// Step IV: split the motion sequence into continuous skills at standstill actions.
pub fn coalesce_continuous(items: Vec<PlanItem>) -> Result<Vec<ContinuousSkillPlan>, PlanError> {
    let mut groups: Vec<ContinuousSkillPlan> = Vec::new();
    let mut current: Vec<LabeledMotion> = Vec::new();

    fn close(current: &mut Vec<LabeledMotion>, actions: Vec<ActionTag>) -> Result<ContinuousSkillPlan, PlanError> {
        let mut motions = std::mem::take(current);
        let last = motions.last_mut().expect("non-empty group");
        last.command = last.command.with_approx(0.0)?;
        last.label = PathLabel::AccurateStop;
        Ok(ContinuousSkillPlan::new(motions, actions)?)
    }

    for item in items {
        match item {
            PlanItem::Motion(m) => current.push(LabeledMotion { command: m.command, label: m.label }),
            PlanItem::Standstill { action, .. } => {
                if current.is_empty() {
                    match groups.last_mut() {
                        Some(g) => g.push_terminal_action(action),
                        None => return Err(PlanError::StandstillBeforeMotion(action)),
                    }
                } else {
                    groups.push(close(&mut current, vec![action])?);
                }
            }
            PlanItem::Transit { .. } => return Err(PlanError::UnplannedTransit),
        }
    }
    if !current.is_empty() {
        groups.push(close(&mut current, vec![])?);
    }
    Ok(groups)
}

/// Full pipeline: label, then steps I to IV.
pub fn plan(process: &Process, cfg: &PlanningConfig) -> Result<Vec<ContinuousSkillPlan>, PlanError> {
    cfg.validate()?;
    let labeled = label_process(&process.steps)?;
    let primary = plan_primary_motions(&labeled, cfg)?;
    let extended = add_pre_post_movements(primary, cfg)?;
    let full = plan_secondary_motions(extended, &process.start, cfg)?;
    coalesce_continuous(full)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64, z: f64) -> Pose {
        Pose::at(x, y, z).unwrap()
    }

    fn tag(s: &str) -> ActionTag {
        ActionTag::new(s).unwrap()
    }

    fn collinear(a: &Pose, b: &Pose, c: &Pose) -> bool {
        let u = b.position() - a.position();
        let v = c.position() - b.position();
        u.cross(&v).norm() <= 1e-9 * u.norm() * v.norm() && u.dot(&v) > 0.0
    }

    #[test]
    fn labeling_defaults_and_conflicts() {
        let steps = vec![
            ProcessStep::primary(p(0.0, 0.0, 30.0), p(0.0, 0.0, 0.0)),
            ProcessStep::standstill(tag("gripper_close"), p(0.0, 0.0, 0.0)),
            ProcessStep::transit(None, None),
        ];
        let labels: Vec<_> = label_process(&steps).unwrap().into_iter().map(|s| s.label).collect();
        assert_eq!(labels, [PathLabel::AccuratePath, PathLabel::AccurateStop, PathLabel::Blending]);
        assert_eq!(label_process(&[]), Err(PlanError::EmptyProcess));
        let bad = vec![ProcessStep::standstill(tag("x"), p(0.0, 0.0, 0.0)).with_label(PathLabel::Blending)];
        assert!(matches!(label_process(&bad), Err(PlanError::InconsistentLabel { step: 0, .. })));
        let bad = vec![ProcessStep::primary(p(0.0, 0.0, 1.0), p(0.0, 0.0, 0.0)).with_label(PathLabel::AccurateStop)];
        assert!(label_process(&bad).is_err());
    }

    #[test]
    fn primary_becomes_exact_lin() {
        let cfg = PlanningConfig::default();
        let steps = label_process(&[ProcessStep::primary(p(0.0, 0.0, 30.0), p(0.0, 0.0, 0.0))]).unwrap();
        let items = plan_primary_motions(&steps, &cfg).unwrap();
        let m = motions_of(&items);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].command.approx_distance(), 0.0);
        assert_eq!(crate::geometry::pose_distance(&m[0].start, &m[0].end()), 30.0);

        let none = label_process(&[ProcessStep::transit(Some(p(1.0, 0.0, 0.0)), None)]).unwrap();
        assert!(motions_of(&plan_primary_motions(&none, &cfg).unwrap()).is_empty());

        let unresolved = label_process(&[ProcessStep {
            kind: StepKind::PrimaryPath { entry: None, exit: Some(p(0.0, 0.0, 0.0)) },
            label: None,
        }])
        .unwrap();
        assert_eq!(plan_primary_motions(&unresolved, &cfg), Err(PlanError::UnresolvedPose(0)));
    }

    #[test]
    fn pre_movement_is_collinear() {
        let cfg = PlanningConfig::default();
        let steps = label_process(&[
            ProcessStep::primary(p(0.0, 0.0, 30.0), p(0.0, 0.0, 0.0)),
            ProcessStep::standstill(tag("gripper_close"), p(0.0, 0.0, 0.0)),
        ])
        .unwrap();
        let items = add_pre_post_movements(plan_primary_motions(&steps, &cfg).unwrap(), &cfg).unwrap();
        let m = motions_of(&items);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].role, MotionRole::PreMove);
        assert_eq!(crate::geometry::pose_distance(&m[0].start, &m[0].end()), 50.0);
        assert!(collinear(&m[0].start, &m[1].start, &m[1].end()));

        let zero = PlanningConfig { pre_move_length: 0.0, post_move_length: 0.0, ..cfg };
        let plain = plan_primary_motions(&steps, &zero).unwrap();
        assert_eq!(add_pre_post_movements(plain.clone(), &zero).unwrap(), plain);
    }

    #[test]
    fn clearance_inserts_raised_waypoint() {
        let cfg = PlanningConfig::default();
        let start = p(0.0, 0.0, 100.0);
        let items = vec![PlanItem::Transit { to: Some(p(300.0, 0.0, 100.0)), joints: None, clearance: Some(250.0), label: PathLabel::Blending }];
        let out = plan_secondary_motions(items.clone(), &start, &cfg).unwrap();
        let m = motions_of(&out);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0].end().position(), Vector3::new(150.0, 0.0, 250.0));
        assert!(m.iter().all(|x| x.command.motion_type() == crate::motion::MotionType::PtpCartesian));
        assert!(m.iter().all(|x| x.command.approx_distance() == cfg.default_approx));

        let direct = vec![PlanItem::Transit { to: Some(p(300.0, 0.0, 100.0)), joints: None, clearance: None, label: PathLabel::Blending }];
        assert_eq!(motions_of(&plan_secondary_motions(direct, &start, &cfg).unwrap()).len(), 1);

        let low = vec![PlanItem::Transit { to: Some(p(300.0, 0.0, 100.0)), joints: None, clearance: Some(50.0), label: PathLabel::Blending }];
        assert!(matches!(plan_secondary_motions(low, &start, &cfg), Err(PlanError::UnreachableClearance { .. })));
    }

    #[test]
    fn joint_transit_uses_ptp_joint() {
        let cfg = PlanningConfig::default();
        let j = JointTarget::new([10.0, 20.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let items = vec![PlanItem::Transit { to: Some(p(300.0, 0.0, 100.0)), joints: Some(j), clearance: None, label: PathLabel::Blending }];
        let out = plan_secondary_motions(items, &p(0.0, 0.0, 100.0), &cfg).unwrap();
        assert_eq!(motions_of(&out)[0].command.motion_type(), crate::motion::MotionType::PtpJoint);
    }

    #[test]
    fn discontinuity_is_reported() {
        let cfg = PlanningConfig::default();
        let steps = label_process(&[ProcessStep::primary(p(0.0, 0.0, 30.0), p(0.0, 0.0, 0.0))]).unwrap();
        let items = plan_primary_motions(&steps, &cfg).unwrap();
        assert_eq!(plan_secondary_motions(items, &p(5.0, 0.0, 0.0), &cfg), Err(PlanError::Discontinuity(0)));
    }

    fn lin_item(x: f64, approx: f64) -> PlanItem {
        PlanItem::Motion(PlannedMotion {
            command: MotionCommand::lin(p(x, 0.0, 0.0), PlanningConfig::default().lin).unwrap().with_approx(approx).unwrap(),
            label: PathLabel::Blending,
            role: MotionRole::Secondary,
            start: p(x - 1.0, 0.0, 0.0),
        })
    }

    #[test]
    fn coalesce_splits_at_standstills() {
        let standstill = |s: &str| PlanItem::Standstill { action: tag(s), at: p(0.0, 0.0, 0.0) };
        let groups = coalesce_continuous(vec![lin_item(1.0, 5.0), lin_item(2.0, 5.0)]).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].motions()[0].command.approx_distance(), 5.0);
        assert_eq!(groups[0].motions()[1].command.approx_distance(), 0.0);
        assert_eq!(groups[0].motions()[1].label, PathLabel::AccurateStop);

        let items = vec![lin_item(1.0, 5.0), standstill("a"), lin_item(2.0, 5.0), standstill("b"), lin_item(3.0, 5.0), standstill("c")];
        let groups = coalesce_continuous(items).unwrap();
        assert_eq!(groups.len(), 3);
        assert!(groups.iter().all(|g| g.len() == 1 && g.terminal_actions().len() == 1));

        let doubled = vec![lin_item(1.0, 5.0), standstill("a"), standstill("b")];
        let groups = coalesce_continuous(doubled).unwrap();
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].terminal_actions(), &[tag("a"), tag("b")]);

        assert!(matches!(coalesce_continuous(vec![standstill("a")]), Err(PlanError::StandstillBeforeMotion(_))));
    }
}
