//! The fuzz target properties, applied to the checked-in corpus seeds and to
//! random mutations of them. Runs on stable without libFuzzer.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillbench_core::bench::{parse_raw_csv, parse_scenario, parse_summary_csv, render_scenario};
use skillbench_core::planner::text::{parse_plan, parse_process, write_plan, write_process};
use skillbench_core::wire::{decode_command_frame, decode_feedback_frame, decode_record};

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<Vec<u8>> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| std::fs::read(entry.unwrap().path()).unwrap())
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn mutate(rng: &mut ChaCha8Rng, seed: &[u8]) -> Vec<u8> {
    let mut data = seed.to_vec();
    for _ in 0..rng.gen_range(1..4) {
        match rng.gen_range(0..4) {
            0 if !data.is_empty() => {
                let i = rng.gen_range(0..data.len());
                data[i] ^= 1 << rng.gen_range(0..8);
            }
            1 if !data.is_empty() => {
                let i = rng.gen_range(0..data.len());
                data[i] = rng.gen();
            }
            2 if !data.is_empty() => {
                let i = rng.gen_range(0..data.len());
                data.remove(i);
            }
            _ => {
                let i = rng.gen_range(0..=data.len());
                data.insert(i, rng.gen());
            }
        }
    }
    data
}

/// Every seed plus `rounds` mutations of each.
fn exercise(target: &str, rounds: usize, check: impl Fn(&[u8])) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for seed in seeds(target) {
        check(&seed);
        for _ in 0..rounds {
            check(&mutate(&mut rng, &seed));
        }
    }
}

fn text(data: &[u8]) -> Option<&str> {
    std::str::from_utf8(data).ok()
}

#[test]
fn record_seeds() {
    for seed in seeds("decode_record") {
        decode_record(&seed).expect("seed decodes");
    }
    exercise("decode_record", 5000, |data| {
        if let Ok(r) = decode_record(data) {
            assert_eq!(&r.encode().unwrap()[..], data);
        }
    });
}

#[test]
fn command_frame_seeds() {
    exercise("decode_command_frame", 5000, |data| {
        if let Ok(f) = decode_command_frame(data) {
            assert_eq!(&f.encode().unwrap()[..], data);
        }
    });
}

#[test]
fn feedback_frame_seeds() {
    exercise("decode_feedback_frame", 5000, |data| {
        if let Ok(f) = decode_feedback_frame(data) {
            assert_eq!(&f.encode().unwrap()[..], data);
        }
    });
}

#[test]
fn process_seeds() {
    for seed in seeds("parse_process") {
        parse_process(text(&seed).unwrap()).expect("seed parses");
    }
    exercise("parse_process", 2000, |data| {
        if let Some(Ok(p)) = text(data).map(parse_process) {
            assert_eq!(parse_process(&write_process(&p)).unwrap(), p);
        }
    });
}

#[test]
fn plan_seeds() {
    for seed in seeds("parse_plan") {
        parse_plan(text(&seed).unwrap()).expect("seed parses");
    }
    exercise("parse_plan", 2000, |data| {
        if let Some(Ok(plan)) = text(data).map(parse_plan) {
            let written = write_plan(&plan);
            assert_eq!(write_plan(&parse_plan(&written).unwrap()), written);
        }
    });
}

#[test]
fn scenario_seeds() {
    for seed in seeds("parse_scenario") {
        parse_scenario(text(&seed).unwrap()).expect("seed parses");
    }
    exercise("parse_scenario", 2000, |data| {
        if let Some(Ok(cfg)) = text(data).map(parse_scenario) {
            assert_eq!(parse_scenario(&render_scenario(&cfg)).unwrap(), cfg);
        }
    });
}

#[test]
fn csv_seeds() {
    exercise("parse_csv", 2000, |data| {
        if let Some(s) = text(data) {
            let _ = parse_summary_csv(s);
            let _ = parse_raw_csv(s);
        }
    });
}
