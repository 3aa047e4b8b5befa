//! Line-oriented text format for processes and plans.
//!
//! Every document starts with a header line naming its kind and version.
//! Each following line is one record: a keyword followed by `key=value`
//! fields separated by whitespace. Blank lines and lines starting with `#`
//! are ignored. Poses are six comma-separated numbers `x,y,z,a,b,c`.
//!
//! ```text
//! skillbench-process 1
//! start pose=400,-150,180,0,0,0
//! transit clearance=250
//! primary entry=400,-150,130,0,0,0 exit=400,-150,100,0,0,0
//! standstill action=grip at=400,-150,100,0,0,0
//! ```
//!
//! ```text
//! skillbench-plan 1
//! group actions=grip
//! motion type=LIN label=ACCURATE_PATH target=400,-150,130,0,0,0 v=250 a=2000 approx=0 tool=1 base=0
//! ```
//!
//! Numbers are written in the shortest form that parses back to the same
//! `f64`, so serializing a parsed document reproduces it byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Vector3;
use thiserror::Error;

use super::{Process, ProcessStep, StepKind};
use crate::geometry::{JointTarget, Pose};
use crate::motion::{
    ActionTag, ContinuousSkillPlan, Dynamics, LabeledMotion, MotionCommand, MotionParts, MotionType, PathLabel, Target,
};

pub const PROCESS_HEADER: &str = "skillbench-process 1";
pub const PLAN_HEADER: &str = "skillbench-plan 1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TextError {
    #[error("missing or unknown header, expected `{expected}`")]
    Header { expected: &'static str },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
}

fn syntax(line: usize, message: impl Into<String>) -> TextError {
    TextError::Syntax { line, message: message.into() }
}

struct Record<'a> {
    line: usize,
    keyword: &'a str,
    fields: BTreeMap<&'a str, &'a str>,
}

impl<'a> Record<'a> {
    fn take(&mut self, key: &str) -> Option<&'a str> {
        self.fields.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<&'a str, TextError> {
        self.take(key).ok_or_else(|| syntax(self.line, format!("missing field `{key}`")))
    }

    fn finish(self) -> Result<(), TextError> {
        match self.fields.keys().next() {
            Some(k) => Err(syntax(self.line, format!("unexpected field `{k}`"))),
            None => Ok(()),
        }
    }

    fn num(&self, v: &str) -> Result<f64, TextError> {
        let x: f64 = v.parse().map_err(|_| syntax(self.line, format!("bad number `{v}`")))?;
        if x.is_finite() {
            Ok(x)
        } else {
            Err(syntax(self.line, format!("non-finite number `{v}`")))
        }
    }

    fn int<T: std::str::FromStr>(&self, v: &str) -> Result<T, TextError> {
        v.parse().map_err(|_| syntax(self.line, format!("bad integer `{v}`")))
    }

    fn numbers<const N: usize>(&self, v: &str) -> Result<[f64; N], TextError> {
        let parts: Vec<&str> = v.split(',').collect();
        if parts.len() != N {
            return Err(syntax(self.line, format!("expected {N} comma-separated numbers, got `{v}`")));
        }
        let mut out = [0.0; N];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = self.num(p)?;
        }
        Ok(out)
    }

    fn pose(&self, v: &str) -> Result<Pose, TextError> {
        Pose::try_from(self.numbers::<6>(v)?).map_err(|e| syntax(self.line, e.to_string()))
    }

    fn label(&self, v: &str) -> Result<PathLabel, TextError> {
        v.parse().map_err(|_| syntax(self.line, format!("unknown label `{v}`")))
    }
}

fn records<'a>(input: &'a str, header: &'static str) -> Result<Vec<Record<'a>>, TextError> {
    let mut lines = input
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    match lines.next() {
        Some((_, h)) if h == header => {}
        _ => return Err(TextError::Header { expected: header }),
    }
    lines
        .map(|(line, text)| {
            let mut tokens = text.split_whitespace();
            let keyword = tokens.next().expect("non-empty line");
            let mut fields = BTreeMap::new();
            for tok in tokens {
                let (k, v) = tok.split_once('=').ok_or_else(|| syntax(line, format!("expected key=value, got `{tok}`")))?;
                if fields.insert(k, v).is_some() {
                    return Err(syntax(line, format!("duplicate field `{k}`")));
                }
            }
            Ok(Record { line, keyword, fields })
        })
        .collect()
}

fn fmt_numbers(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

fn fmt_pose(p: &Pose) -> String {
    fmt_numbers(&p.to_array())
}

pub fn parse_process(input: &str) -> Result<Process, TextError> {
    let mut start = None;
    let mut steps = Vec::new();
    for mut rec in records(input, PROCESS_HEADER)? {
        let line = rec.line;
        let label = rec.take("label").map(|l| rec.label(l)).transpose()?;
        let kind = match rec.keyword {
            "start" => {
                if start.is_some() {
                    return Err(syntax(line, "duplicate start record"));
                }
                let pose = rec.require("pose")?;
                start = Some(rec.pose(pose)?);
                if label.is_some() {
                    return Err(syntax(line, "start takes no label"));
                }
                rec.finish()?;
                continue;
            }
            "primary" => {
                let entry = rec.take("entry").map(|v| rec.pose(v)).transpose()?;
                let exit = rec.take("exit").map(|v| rec.pose(v)).transpose()?;
                StepKind::PrimaryPath { entry, exit }
            }
            "standstill" => {
                let action = rec.require("action")?;
                let action = ActionTag::new(action).map_err(|e| syntax(line, e.to_string()))?;
                let at = rec.require("at")?;
                StepKind::StandstillAction { action, at: rec.pose(at)? }
            }
            "transit" => {
                let to = rec.take("to").map(|v| rec.pose(v)).transpose()?;
                let joints = rec
                    .take("joints")
                    .map(|v| JointTarget::new(rec.numbers::<6>(v)?).map_err(|e| syntax(line, e.to_string())))
                    .transpose()?;
                let clearance = rec.take("clearance").map(|v| rec.num(v)).transpose()?;
                StepKind::Transit { to, joints, clearance }
            }
            other => return Err(syntax(line, format!("unknown record `{other}`"))),
        };
        rec.finish()?;
        steps.push(ProcessStep { kind, label });
    }
    let start = start.ok_or_else(|| syntax(0, "missing start record"))?;
    Ok(Process { start, steps })
}

pub fn write_process(process: &Process) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{PROCESS_HEADER}");
    let _ = writeln!(out, "start pose={}", fmt_pose(&process.start));
    for step in &process.steps {
        let mut line = match &step.kind {
            StepKind::PrimaryPath { entry, exit } => {
                let mut l = String::from("primary");
                if let Some(p) = entry {
                    let _ = write!(l, " entry={}", fmt_pose(p));
                }
                if let Some(p) = exit {
                    let _ = write!(l, " exit={}", fmt_pose(p));
                }
                l
            }
            StepKind::StandstillAction { action, at } => format!("standstill action={action} at={}", fmt_pose(at)),
            StepKind::Transit { to, joints, clearance } => {
                let mut l = String::from("transit");
                if let Some(p) = to {
                    let _ = write!(l, " to={}", fmt_pose(p));
                }
                if let Some(j) = joints {
                    let _ = write!(l, " joints={}", fmt_numbers(&j.joints()));
                }
                if let Some(c) = clearance {
                    let _ = write!(l, " clearance={c}");
                }
                l
            }
        };
        if let Some(label) = step.label {
            let _ = write!(line, " label={label}");
        }
        let _ = writeln!(out, "{line}");
    }
    out
}

pub fn parse_plan(input: &str) -> Result<Vec<ContinuousSkillPlan>, TextError> {
    let mut groups: Vec<(usize, Vec<ActionTag>, Vec<LabeledMotion>)> = Vec::new();
    for mut rec in records(input, PLAN_HEADER)? {
        let line = rec.line;
        match rec.keyword {
            "group" => {
                let actions = match rec.take("actions") {
                    None => vec![],
                    Some(list) => list
                        .split(',')
                        .map(|a| ActionTag::new(a).map_err(|e| syntax(line, e.to_string())))
                        .collect::<Result<_, _>>()?,
                };
                rec.finish()?;
                groups.push((line, actions, vec![]));
            }
            "motion" => {
                let motion = parse_motion(&mut rec)?;
                rec.finish()?;
                let (_, _, motions) = groups.last_mut().ok_or_else(|| syntax(line, "motion before first group"))?;
                motions.push(motion);
            }
            other => return Err(syntax(line, format!("unknown record `{other}`"))),
        }
    }
    groups
        .into_iter()
        .map(|(line, actions, motions)| ContinuousSkillPlan::new(motions, actions).map_err(|e| syntax(line, e.to_string())))
        .collect()
}

fn parse_motion(rec: &mut Record<'_>) -> Result<LabeledMotion, TextError> {
    let line = rec.line;
    let ty = rec.require("type")?;
    let motion_type: MotionType = ty.parse().map_err(|_| syntax(line, format!("unknown motion type `{ty}`")))?;
    let label = rec.require("label")?;
    let label = rec.label(label)?;
    let target = match (rec.take("target"), rec.take("joints")) {
        (Some(t), None) => Target::Cartesian(rec.pose(t)?),
        (None, Some(j)) => Target::Joint(JointTarget::new(rec.numbers::<6>(j)?).map_err(|e| syntax(line, e.to_string()))?),
        _ => return Err(syntax(line, "exactly one of `target` and `joints` is required")),
    };
    let aux_point = rec
        .take("aux")
        .map(|v| rec.numbers::<3>(v).map(|a| Vector3::new(a[0], a[1], a[2])))
        .transpose()?;
    let (v, a) = (rec.require("v")?, rec.require("a")?);
    let dynamics = Dynamics { velocity: rec.num(v)?, acceleration: rec.num(a)? };
    let approx = rec.require("approx")?;
    let approx_distance = rec.num(approx)?;
    let tool_frame = rec.take("tool").map(|v| rec.int(v)).transpose()?.unwrap_or(0);
    let base_frame = rec.take("base").map(|v| rec.int(v)).transpose()?.unwrap_or(0);
    let force_setpoint = rec.take("force").map(|v| rec.int(v)).transpose()?.unwrap_or(0);
    let command = MotionCommand::from_parts(MotionParts {
        motion_type,
        target,
        aux_point,
        dynamics,
        approx_distance,
        tool_frame,
        base_frame,
        force_setpoint,
    })
    .map_err(|e| syntax(line, e.to_string()))?;
    Ok(LabeledMotion { command, label })
}

pub fn write_plan(groups: &[ContinuousSkillPlan]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{PLAN_HEADER}");
    for group in groups {
        let mut line = String::from("group");
        if !group.terminal_actions().is_empty() {
            let actions: Vec<&str> = group.terminal_actions().iter().map(ActionTag::as_str).collect();
            let _ = write!(line, " actions={}", actions.join(","));
        }
        let _ = writeln!(out, "{line}");
        for m in group.motions() {
            let p = m.command.parts();
            let _ = write!(out, "motion type={} label={}", p.motion_type, m.label);
            match &p.target {
                Target::Cartesian(pose) => {
                    let _ = write!(out, " target={}", fmt_pose(pose));
                }
                Target::Joint(j) => {
                    let _ = write!(out, " joints={}", fmt_numbers(&j.joints()));
                }
            }
            if let Some(aux) = p.aux_point {
                let _ = write!(out, " aux={}", fmt_numbers(aux.as_slice()));
            }
            let _ = write!(
                out,
                " v={} a={} approx={} tool={} base={}",
                p.dynamics.velocity, p.dynamics.acceleration, p.approx_distance, p.tool_frame, p.base_frame
            );
            if p.force_setpoint != 0 {
                let _ = write!(out, " force={}", p.force_setpoint);
            }
            let _ = writeln!(out);
        }
    }
    out
}
