#![no_main]
use libfuzzer_sys::fuzz_target;
use skillbench_core::wire::{decode_command_frame, decode_record};

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_command_frame(data) {
        assert_eq!(&frame.encode().unwrap()[..], data);
        for slot in &frame.slots {
            let _ = decode_record(slot);
        }
    }
});
