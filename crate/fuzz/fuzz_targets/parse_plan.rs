#![no_main]
use libfuzzer_sys::fuzz_target;
use skillbench_core::planner::text::{parse_plan, write_plan};

fuzz_target!(|text: &str| {
    if let Ok(plan) = parse_plan(text) {
        let written = write_plan(&plan);
        let again = parse_plan(&written).expect("written plan parses");
        assert_eq!(write_plan(&again), written);
    }
});
