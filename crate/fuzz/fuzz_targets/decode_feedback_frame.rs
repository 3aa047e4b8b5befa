#![no_main]
use libfuzzer_sys::fuzz_target;
use skillbench_core::wire::decode_feedback_frame;

fuzz_target!(|data: &[u8]| {
    if let Ok(frame) = decode_feedback_frame(data) {
        assert_eq!(&frame.encode().unwrap()[..], data);
    }
});
