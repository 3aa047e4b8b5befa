//! Execution-time model: trapezoidal velocity profiles per segment and
//! circular-arc blends at corners that carry an approximation distance.
//!
//! A motion chain is planned in three steps. Every interior corner is
//! classified (exact stop, collinear pass-through, or blend), which yields a
//! speed cap per node. A forward pass then limits node speeds by what can be
//! reached with the acceleration limit, and a backward pass by what can still
//! be braked. Each blend arc is split into two halves limited to the blend
//! speed, and every piece is timed with the closed-form profile.

use std::f64::consts::PI;

use nalgebra::Vector3;
use thiserror::Error;

use crate::geometry::{direction_angle, JointTarget, Pose};
use crate::motion::{ContinuousSkillPlan, Dynamics, MotionCommand, MotionType, Target};

/// Angles below this are treated as a straight continuation.
pub const COLLINEAR_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrajectoryError {
    #[error("invalid segment: {0}")]
    InvalidSegment(&'static str),
    #[error("boundary speeds {v_in} -> {v_out} are not reachable within {length} mm")]
    InfeasibleBoundary { length: f64, v_in: f64, v_out: f64 },
    #[error("cannot blend a reversal (angle {0} rad)")]
    ReversalAngle(f64),
    #[error("invalid blend input: {0}")]
    InvalidBlend(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentSpec {
    pub length: f64,
    pub v_max: f64,
    pub accel: f64,
    pub v_in: f64,
    pub v_out: f64,
}

/// Duration of the time-optimal accelerate/cruise/decelerate profile.
pub fn segment_time(s: &SegmentSpec) -> Result<f64, TrajectoryError> {
    let SegmentSpec { length, v_max, accel, v_in, v_out } = *s;
    if !(length.is_finite() && length >= 0.0) {
        return Err(TrajectoryError::InvalidSegment("length"));
    }
    if !(v_max.is_finite() && v_max > 0.0) {
        return Err(TrajectoryError::InvalidSegment("v_max"));
    }
    if !(accel.is_finite() && accel > 0.0) {
        return Err(TrajectoryError::InvalidSegment("accel"));
    }
    let slack = 1e-9 * v_max.max(1.0);
    if !(v_in >= 0.0 && v_in <= v_max + slack && v_out >= 0.0 && v_out <= v_max + slack) {
        return Err(TrajectoryError::InvalidSegment("boundary speed"));
    }
    let (v_in, v_out) = (v_in.min(v_max), v_out.min(v_max));
    let reach = 2.0 * accel * length;
    if (v_out * v_out - v_in * v_in).abs() > reach + 1e-9 * v_max * v_max.max(1.0) {
        return Err(TrajectoryError::InfeasibleBoundary { length, v_in, v_out });
    }
    let peak = (accel * length + 0.5 * (v_in * v_in + v_out * v_out)).sqrt().max(v_in.max(v_out));
    if peak <= v_max {
        return Ok((2.0 * peak - v_in - v_out) / accel);
    }
    let d_acc = (v_max * v_max - v_in * v_in) / (2.0 * accel);
    let d_dec = (v_max * v_max - v_out * v_out) / (2.0 * accel);
    Ok((v_max - v_in) / accel + (v_max - v_out) / accel + (length - d_acc - d_dec) / v_max)
}

/// Point-to-point joint move timed by its dominant axis.
pub fn ptp_time(joint_deltas: &[f64], v_j: f64, a_j: f64, v_in: f64, v_out: f64) -> Result<f64, TrajectoryError> {
    let dominant = joint_deltas.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    segment_time(&SegmentSpec { length: dominant, v_max: v_j, accel: a_j, v_in, v_out })
}

/// Circular arc tangent to both segments at `truncation` from the corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlendGeometry {
    pub angle: f64,
    pub radius: f64,
    pub arc_length: f64,
    pub v_blend: f64,
    pub truncation: f64,
}

impl BlendGeometry {
    /// Largest distance between the arc and the corner point.
    pub fn max_deviation(&self) -> f64 {
        if self.truncation == 0.0 || self.angle == 0.0 {
            0.0
        } else {
            self.radius * (1.0 / (self.angle / 2.0).cos() - 1.0)
        }
    }
}

pub fn blend_geometry(
    angle: f64,
    approx_distance: f64,
    v1: f64,
    v2: f64,
    accel: f64,
) -> Result<BlendGeometry, TrajectoryError> {
    if !(angle.is_finite() && angle >= 0.0) {
        return Err(TrajectoryError::InvalidBlend("angle"));
    }
    if angle >= PI {
        return Err(TrajectoryError::ReversalAngle(angle));
    }
    if !(approx_distance.is_finite() && approx_distance >= 0.0) {
        return Err(TrajectoryError::InvalidBlend("approx_distance"));
    }
    if !(v1 >= 0.0 && v2 >= 0.0 && accel > 0.0) {
        return Err(TrajectoryError::InvalidBlend("dynamics"));
    }
    if approx_distance == 0.0 {
        return Ok(BlendGeometry { angle, radius: 0.0, arc_length: 0.0, v_blend: 0.0, truncation: 0.0 });
    }
    if angle == 0.0 {
        return Ok(BlendGeometry {
            angle,
            radius: f64::INFINITY,
            arc_length: 2.0 * approx_distance,
            v_blend: v1.min(v2),
            truncation: approx_distance,
        });
    }
    let radius = approx_distance / (angle / 2.0).tan();
    Ok(BlendGeometry {
        angle,
        radius,
        arc_length: radius * angle,
        v_blend: v1.min(v2).min((accel * radius).sqrt()),
        truncation: approx_distance,
    })
}

/// Cartesian TCP pose and joint configuration of the simulated robot.
///
/// There is no kinematic model: Cartesian motions update only the pose and
/// joint motions only the joints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionState {
    pub tcp: Pose,
    pub joints: JointTarget,
}

impl MotionState {
    pub fn at(tcp: Pose) -> Self {
        Self { tcp, joints: JointTarget::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PathShape {
    Line { from: Vector3<f64>, to: Vector3<f64> },
    Arc { center: Vector3<f64>, normal: Vector3<f64>, start: Vector3<f64>, radius: f64, sweep: f64 },
    Joint { deltas: [f64; 6] },
}

/// A motion with its start point resolved.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolvedMotion {
    pub motion_type: MotionType,
    pub shape: PathShape,
    pub dynamics: Dynamics,
    pub approx_distance: f64,
}

impl ResolvedMotion {
    /// Path length in mm, or dominant joint travel in degrees.
    pub fn length(&self) -> f64 {
        match self.shape {
            PathShape::Line { from, to } => (to - from).norm(),
            PathShape::Arc { radius, sweep, .. } => radius * sweep,
            PathShape::Joint { deltas } => deltas.iter().fold(0.0f64, |m, d| m.max(d.abs())),
        }
    }

    fn arc_tangent(center: &Vector3<f64>, normal: &Vector3<f64>, p: &Vector3<f64>) -> Vector3<f64> {
        normal.cross(&(p - center)).normalize()
    }

    pub fn start_direction(&self) -> Option<Vector3<f64>> {
        match self.shape {
            PathShape::Line { from, to } => (to - from).try_normalize(0.0),
            PathShape::Arc { center, normal, start, .. } => Some(Self::arc_tangent(&center, &normal, &start)),
            PathShape::Joint { .. } => None,
        }
    }

    pub fn end_direction(&self) -> Option<Vector3<f64>> {
        match self.shape {
            PathShape::Line { .. } => self.start_direction(),
            PathShape::Arc { center, normal, .. } => {
                let end = self.point_at(self.length())?;
                Some(Self::arc_tangent(&center, &normal, &end))
            }
            PathShape::Joint { .. } => None,
        }
    }

    /// TCP position after travelling `s` along the path.
    pub fn point_at(&self, s: f64) -> Option<Vector3<f64>> {
        match self.shape {
            PathShape::Line { from, to } => {
                let len = (to - from).norm();
                if len == 0.0 {
                    Some(to)
                } else {
                    Some(from + (to - from) * (s / len).clamp(0.0, 1.0))
                }
            }
            PathShape::Arc { center, normal, start, radius, sweep } => {
                let phi = (s / radius).clamp(0.0, sweep);
                let r0 = start - center;
                Some(center + r0 * phi.cos() + normal.cross(&r0) * phi.sin())
            }
            PathShape::Joint { .. } => None,
        }
    }
}

fn circle_through(p0: Vector3<f64>, p1: Vector3<f64>, p2: Vector3<f64>) -> Option<PathShape> {
    let u = p1 - p0;
    let v = p2 - p0;
    let w = u.cross(&v);
    let w2 = w.norm_squared();
    if w2 <= 1e-12 * u.norm_squared().max(1.0) * v.norm_squared().max(1.0) {
        return None;
    }
    let center = p0 + (v * u.norm_squared() - u * v.norm_squared()).cross(&w) / (2.0 * w2);
    let normal = w / w2.sqrt();
    let r0 = p0 - center;
    let r2 = p2 - center;
    let mut sweep = r0.cross(&r2).dot(&normal).atan2(r0.dot(&r2));
    if sweep <= 0.0 {
        sweep += 2.0 * PI;
    }
    Some(PathShape::Arc { center, normal, start: p0, radius: r0.norm(), sweep })
}

/// Resolve one command against the state it starts from.
pub fn resolve_motion(cmd: &MotionCommand, from: &MotionState) -> (ResolvedMotion, MotionState) {
    let (shape, next) = match cmd.target() {
        Target::Joint(j) => (PathShape::Joint { deltas: from.joints.deltas_to(j) }, MotionState { joints: *j, ..*from }),
        Target::Cartesian(p) => {
            let a = from.tcp.position();
            let b = p.position();
            let shape = cmd
                .aux_point()
                .and_then(|aux| circle_through(a, aux, b))
                .unwrap_or(PathShape::Line { from: a, to: b });
            (shape, MotionState { tcp: *p, ..*from })
        }
    };
    let resolved = ResolvedMotion {
        motion_type: cmd.motion_type(),
        shape,
        dynamics: cmd.dynamics(),
        approx_distance: cmd.approx_distance(),
    };
    (resolved, next)
}

pub fn resolve_motions<'a>(
    cmds: impl IntoIterator<Item = &'a MotionCommand>,
    start: &MotionState,
) -> (Vec<ResolvedMotion>, MotionState) {
    let mut state = *start;
    let motions = cmds
        .into_iter()
        .map(|c| {
            let (m, next) = resolve_motion(c, &state);
            state = next;
            m
        })
        .collect();
    (motions, state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CornerKind {
    /// Exact stop at the waypoint.
    Stop,
    /// Straight continuation without a stop.
    PassThrough,
    /// Circular blend.
    Blend,
    /// A blend was requested but an adjacent segment is too short, or the
    /// arc would take longer than stopping; stops instead.
    Degraded,
    /// The successor was not known when the corner was planned; stops instead.
    Starved,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corner {
    pub kind: CornerKind,
    /// Speed limit at the node before the forward/backward passes.
    pub cap: f64,
    pub geometry: Option<BlendGeometry>,
}

impl Corner {
    pub const STOP: Corner = Corner { kind: CornerKind::Stop, cap: 0.0, geometry: None };

    pub fn truncation(&self) -> f64 {
        match (self.kind, self.geometry) {
            (CornerKind::Blend, Some(g)) => g.truncation,
            _ => 0.0,
        }
    }

    pub fn arc_length(&self) -> f64 {
        match (self.kind, self.geometry) {
            (CornerKind::Blend, Some(g)) => g.arc_length,
            _ => 0.0,
        }
    }

    pub fn is_stop(&self) -> bool {
        matches!(self.kind, CornerKind::Stop | CornerKind::Degraded | CornerKind::Starved)
    }
}

/// Whether the arc beats an exact stop when both neighbours are long.
///
/// Approaching at speed `u`, a blend saves `d/u + v/a * (1 - v/(2u))` against
/// stopping at the corner, where `v` is the arc speed. The saving is linear in
/// `1/u`, so checking `u` at `v` and at the speed limit covers every approach.
fn blend_pays_off(g: &BlendGeometry, prev: &Dynamics, next: &Dynamics) -> bool {
    let v = g.v_blend;
    let saving = |a: f64, u: f64| g.truncation / u + v / a * (1.0 - v / (2.0 * u));
    let arc_time = g.arc_length / v;
    [v, prev.velocity.max(v)].iter().all(|&u1| {
        [v, next.velocity.max(v)].iter().all(|&u2| saving(prev.acceleration, u1) + saving(next.acceleration, u2) >= arc_time)
    })
}

/// Classify the corner between two consecutive motions.
pub fn plan_corner(prev: &ResolvedMotion, next: &ResolvedMotion, blending: bool) -> Corner {
    if !blending {
        return Corner::STOP;
    }
    let (Some(out_dir), Some(in_dir)) = (prev.end_direction(), next.start_direction()) else {
        return Corner::STOP;
    };
    let Ok(angle) = direction_angle(&out_dir, &in_dir) else {
        return Corner::STOP;
    };
    let v_limit = prev.dynamics.velocity.min(next.dynamics.velocity);
    if angle <= COLLINEAR_EPS {
        return Corner { kind: CornerKind::PassThrough, cap: v_limit, geometry: None };
    }
    let d = prev.approx_distance;
    if d == 0.0 || angle >= PI - COLLINEAR_EPS {
        return Corner::STOP;
    }
    if prev.length() < 2.0 * d || next.length() < 2.0 * d {
        return Corner { kind: CornerKind::Degraded, cap: 0.0, geometry: None };
    }
    let accel = prev.dynamics.acceleration.min(next.dynamics.acceleration);
    match blend_geometry(angle, d, prev.dynamics.velocity, next.dynamics.velocity, accel) {
        Ok(g) if g.v_blend > 0.0 && blend_pays_off(&g, &prev.dynamics, &next.dynamics) => {
            Corner { kind: CornerKind::Blend, cap: g.v_blend, geometry: Some(g) }
        }
        _ => Corner { kind: CornerKind::Degraded, cap: 0.0, geometry: None },
    }
}

/// Second half of a blend arc, still to be travelled after a committed corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HalfArc {
    pub length: f64,
    pub v_max: f64,
    pub accel: f64,
}

/// State carried into a chain from an already committed corner.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChainEntry {
    /// Speed at the corner (the middle of a blend arc).
    pub speed: f64,
    /// Length cut from the start of the first motion by the entry blend.
    pub truncation: f64,
    pub half_arc: Option<HalfArc>,
}

/// Timing of a motion group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupProfile {
    /// Corner after motion `i`, for every interior waypoint.
    pub corners: Vec<Corner>,
    /// Speed at the start, at every corner (blend arc middle), and at the end (always 0).
    pub node_speeds: Vec<f64>,
    /// Straight (or arc) pieces between truncation points.
    pub segment_durations: Vec<f64>,
    /// Blend arcs, one per interior corner (0 for non-blends).
    pub blend_durations: Vec<f64>,
    /// Time from the middle of the entry blend to the middle of the exit blend.
    pub motion_durations: Vec<f64>,
    /// State handed to a chain that continues after corner `i`.
    pub exits: Vec<ChainEntry>,
    pub total_time: f64,
    pub max_path_deviation: f64,
}

impl GroupProfile {
    pub fn degraded_corners(&self) -> usize {
        self.corners.iter().filter(|c| c.kind == CornerKind::Degraded).count()
    }
}

/// Piece of the path with one speed limit and acceleration.
#[derive(Debug, Clone, Copy)]
struct Sub {
    length: f64,
    v_max: f64,
    accel: f64,
}

fn plan_with_corners(
    motions: &[ResolvedMotion],
    corners: Vec<Corner>,
    entry: ChainEntry,
    tail_reserve: f64,
) -> Result<GroupProfile, TrajectoryError> {
    let n = motions.len();
    debug_assert_eq!(corners.len(), n.saturating_sub(1));
    if n == 0 {
        return Ok(GroupProfile {
            corners,
            node_speeds: vec![0.0],
            segment_durations: vec![],
            blend_durations: vec![],
            motion_durations: vec![],
            exits: vec![],
            total_time: 0.0,
            max_path_deviation: 0.0,
        });
    }

    let half_arcs: Vec<Option<HalfArc>> = corners
        .iter()
        .enumerate()
        .map(|(i, c)| match (c.kind, c.geometry) {
            (CornerKind::Blend, Some(g)) => Some(HalfArc {
                length: g.arc_length / 2.0,
                v_max: g.v_blend,
                accel: motions[i].dynamics.acceleration.min(motions[i + 1].dynamics.acceleration),
            }),
            _ => None,
        })
        .collect();

    // Path as a list of sub-pieces: [entry half arc] piece0 [arc0 | arc0] piece1 ...
    // `caps[j]` limits the speed at the start of `subs[j]`.
    let mut subs: Vec<Sub> = Vec::with_capacity(3 * n);
    let mut caps: Vec<f64> = Vec::with_capacity(3 * n + 1);
    let mut piece_at = Vec::with_capacity(n);
    let mut corner_node = Vec::with_capacity(n.saturating_sub(1));
    let as_sub = |h: &HalfArc| Sub { length: h.length, v_max: h.v_max, accel: h.accel };
    caps.push(entry.speed);
    if let Some(h) = &entry.half_arc {
        subs.push(as_sub(h));
        caps.push(f64::INFINITY);
    }
    for i in 0..n {
        let head = if i == 0 { entry.truncation } else { corners[i - 1].truncation() };
        let tail = if i + 1 < n { corners[i].truncation() } else { tail_reserve };
        piece_at.push(subs.len());
        subs.push(Sub {
            length: (motions[i].length() - head - tail).max(0.0),
            v_max: motions[i].dynamics.velocity,
            accel: motions[i].dynamics.acceleration,
        });
        if i + 1 < n {
            match &half_arcs[i] {
                Some(h) => {
                    caps.push(f64::INFINITY);
                    subs.push(as_sub(h));
                    corner_node.push(caps.len());
                    caps.push(f64::INFINITY);
                    subs.push(as_sub(h));
                }
                None => {
                    corner_node.push(caps.len());
                }
            }
            caps.push(if half_arcs[i].is_some() { f64::INFINITY } else { corners[i].cap });
        }
    }
    caps.push(0.0);
    debug_assert_eq!(caps.len(), subs.len() + 1);

    let m = subs.len();
    let mut v = caps;
    for j in 1..m {
        v[j] = v[j].min(subs[j - 1].v_max).min(subs[j].v_max);
    }
    for j in 0..m {
        let reach = (v[j] * v[j] + 2.0 * subs[j].accel * subs[j].length).sqrt();
        v[j + 1] = v[j + 1].min(reach);
    }
    for j in (1..m).rev() {
        let reach = (v[j + 1] * v[j + 1] + 2.0 * subs[j].accel * subs[j].length).sqrt();
        v[j] = v[j].min(reach);
    }

    let durations = subs
        .iter()
        .enumerate()
        .map(|(j, s)| {
            if s.length == 0.0 {
                return Ok(0.0);
            }
            segment_time(&SegmentSpec { length: s.length, v_max: s.v_max, accel: s.accel, v_in: v[j], v_out: v[j + 1] })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let segment_durations: Vec<f64> = piece_at.iter().map(|&j| durations[j]).collect();
    let blend_durations: Vec<f64> = (0..n.saturating_sub(1))
        .map(|i| if half_arcs[i].is_some() { durations[piece_at[i] + 1] + durations[piece_at[i] + 2] } else { 0.0 })
        .collect();
    let motion_durations: Vec<f64> = (0..n)
        .map(|i| {
            let start = if i == 0 { 0 } else { corner_node[i - 1] };
            let end = if i + 1 < n { corner_node[i] } else { m };
            durations[start..end].iter().sum()
        })
        .collect();

    let mut node_speeds = Vec::with_capacity(n + 1);
    node_speeds.push(v[0]);
    node_speeds.extend(corner_node.iter().map(|&j| v[j]));
    node_speeds.push(0.0);

    let exits = (0..n.saturating_sub(1))
        .map(|i| match corners[i].kind {
            CornerKind::Blend => ChainEntry { speed: node_speeds[i + 1], truncation: corners[i].truncation(), half_arc: half_arcs[i] },
            CornerKind::PassThrough => ChainEntry { speed: node_speeds[i + 1], ..ChainEntry::default() },
            _ => ChainEntry::default(),
        })
        .collect();

    let max_path_deviation = corners
        .iter()
        .filter(|c| c.kind == CornerKind::Blend)
        .map(|c| c.geometry.map_or(0.0, |g| g.max_deviation()))
        .fold(0.0, f64::max);

    Ok(GroupProfile {
        total_time: durations.iter().sum(),
        corners,
        node_speeds,
        segment_durations,
        blend_durations,
        motion_durations,
        exits,
        max_path_deviation,
    })
}

/// Plan a chain that starts in `entry` and ends in an exact stop after the last motion.
pub fn plan_chain(motions: &[ResolvedMotion], entry: ChainEntry, blending: bool) -> Result<GroupProfile, TrajectoryError> {
    let corners = motions.windows(2).map(|w| plan_corner(&w[0], &w[1], blending)).collect();
    plan_with_corners(motions, corners, entry, 0.0)
}

/// Plan a lookahead window. With `open_end` the motions after the window are
/// unknown: the last motion still ends in a stop, but the length a future
/// blend could cut from its end is held back. Any later, longer window then
/// allows node speeds at least as high as this one, so speeds committed from
/// this plan stay feasible.
pub fn plan_lookahead(motions: &[ResolvedMotion], entry: ChainEntry, open_end: bool) -> Result<GroupProfile, TrajectoryError> {
    let corners = motions.windows(2).map(|w| plan_corner(&w[0], &w[1], true)).collect();
    let reserve = match motions.last() {
        Some(last) if open_end && last.length() >= 2.0 * last.approx_distance => last.approx_distance,
        _ => 0.0,
    };
    plan_with_corners(motions, corners, entry, reserve)
}

/// Timing of one continuous skill group starting at rest in `start`.
pub fn plan_group_profile(
    group: &ContinuousSkillPlan,
    start: &MotionState,
    blending_enabled: bool,
) -> Result<GroupProfile, TrajectoryError> {
    let (motions, _) = resolve_motions(group.commands(), start);
    plan_chain(&motions, ChainEntry::default(), blending_enabled)
}
