#![no_main]
use libfuzzer_sys::fuzz_target;
use skillbench_core::planner::text::{parse_process, write_process};

fuzz_target!(|text: &str| {
    if let Ok(process) = parse_process(text) {
        let again = parse_process(&write_process(&process)).expect("written process parses");
        assert_eq!(again, process);
    }
});
