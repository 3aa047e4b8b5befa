#![allow(dead_code)]

use nalgebra::Vector3;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use skillbench_core::geometry::{JointTarget, Pose};
use skillbench_core::motion::{ContinuousSkillPlan, Dynamics, MotionCommand, MotionType};
use skillbench_core::plc::{SkillJob, SkillSequencer};
use skillbench_core::robot::RobotExecutor;
use skillbench_core::sim::{run, SimConfig, SimTrace};
use skillbench_core::trajectory::MotionState;
use skillbench_core::wire::{explode_all, record_count, RecordImage};

pub fn start_state() -> MotionState {
    MotionState::at(Pose::at(0.0, 0.0, 500.0).unwrap())
}

fn offset(rng: &mut ChaCha8Rng, span: f64) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-span..span), rng.gen_range(-span..span), rng.gen_range(-span..span));
        if v.norm() > 1.0 {
            return v;
        }
    }
}

/// Random mixed-type motion group occupying exactly `records` wire records,
/// starting from [`start_state`]. Segments are short so streaming runs stay quick.
pub fn random_group(rng: &mut ChaCha8Rng, records: usize, span: f64) -> ContinuousSkillPlan {
    assert!(records >= 1);
    let state = start_state();
    let mut pos = state.tcp.position();
    let mut joints = state.joints.joints();
    let mut cmds = Vec::new();
    let mut used = 0;
    while used < records {
        let dynamics = Dynamics::new(rng.gen_range(200.0..1000.0), rng.gen_range(2000.0..10000.0)).unwrap();
        let mut kind = MotionType::ALL[rng.gen_range(0..MotionType::ALL.len())];
        if kind == MotionType::Circular && records - used < 2 {
            kind = MotionType::LinCartesian;
        }
        let cmd = match kind {
            MotionType::PtpJoint => {
                for j in joints.iter_mut() {
                    *j += rng.gen_range(-20.0..20.0);
                }
                MotionCommand::ptp_joint(JointTarget::new(joints).unwrap(), dynamics).unwrap()
            }
            MotionType::Circular => {
                let (aux, end) = loop {
                    let a = offset(rng, span);
                    let b = offset(rng, span);
                    if a.cross(&b).norm() > 0.2 * a.norm() * b.norm() && (a - b).norm() > 1.0 {
                        break (pos + a, pos + b);
                    }
                };
                pos = end;
                MotionCommand::circular(aux, Pose::at(end.x, end.y, end.z).unwrap(), dynamics).unwrap()
            }
            other => {
                pos += offset(rng, span);
                let target = Pose::at(pos.x, pos.y, pos.z).unwrap();
                match other {
                    MotionType::LinCartesian => MotionCommand::lin(target, dynamics),
                    MotionType::PtpCartesian => MotionCommand::ptp(target, dynamics),
                    MotionType::Spline => MotionCommand::spline(target, dynamics),
                    _ => MotionCommand::lin_force(target, rng.gen_range(0..2000), dynamics),
                }
                .unwrap()
            }
        };
        used += record_count(&cmd);
        let approx = if rng.gen_bool(0.3) { 0.0 } else { rng.gen_range(0.2..3.0) };
        cmds.push(cmd.with_approx(approx).unwrap().with_frames(rng.gen_range(0..4), rng.gen_range(0..4)));
    }
    let last = cmds.pop().unwrap();
    cmds.push(last.with_approx(0.0).unwrap());
    ContinuousSkillPlan::from_commands(cmds, vec![]).unwrap()
}

/// Run `records` through one streamed skill over the simulated fieldbus.
pub fn stream_through_bus(records: Vec<RecordImage>, start: MotionState, cfg: &SimConfig) -> (SimTrace, RobotExecutor) {
    let mut plc = SkillSequencer::new(vec![SkillJob::Stream(records)]);
    let mut robot = RobotExecutor::streaming(start, cfg.robot_config());
    let trace = run(cfg, &mut plc, &mut robot).expect("streamed skill completes");
    (trace, robot)
}

/// The in-memory handoff: every record, in order, exactly once.
pub fn direct_handoff(groups: &[ContinuousSkillPlan]) -> Vec<RecordImage> {
    groups.iter().flat_map(|g| explode_all(g.commands()).unwrap()).collect()
}

/// Composite Simpson rule on [0, 1].
fn simpson(f: impl Fn(f64) -> f64, n: usize) -> f64 {
    let h = 1.0 / n as f64;
    let mut sum = f(0.0) + f(1.0);
    for i in 1..n {
        sum += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// Travel time of the fastest accelerate/cruise/decelerate profile, found by
/// bisection on the peak speed and quadrature of ds / v(s).
pub fn oracle_segment_time(length: f64, v_max: f64, accel: f64, v_in: f64, v_out: f64) -> f64 {
    let ramp = |v: f64| (2.0 * v * v - v_in * v_in - v_out * v_out) / (2.0 * accel);
    let (mut lo, mut hi) = (v_in.max(v_out), v_max);
    let peak = if ramp(hi) <= length {
        v_max
    } else {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ramp(mid) > length {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let s_acc = ((peak * peak - v_in * v_in) / (2.0 * accel)).max(0.0);
    let s_dec = ((peak * peak - v_out * v_out) / (2.0 * accel)).max(0.0);
    let cruise = (length - s_acc - s_dec).max(0.0);
    // s = s_ramp * x^2 removes the 1/sqrt singularity of a ramp from rest.
    let ramp_time = |v0: f64, s_ramp: f64| {
        if s_ramp <= 0.0 {
            return 0.0;
        }
        simpson(|x| {
            let v = (v0 * v0 + 2.0 * accel * s_ramp * x * x).sqrt();
            if v == 0.0 { (2.0 * s_ramp / accel).sqrt() } else { 2.0 * s_ramp * x / v }
        }, 2000)
    };
    ramp_time(v_in, s_acc) + cruise / peak + ramp_time(v_out, s_dec)
}
