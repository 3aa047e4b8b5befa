#![no_main]
use libfuzzer_sys::fuzz_target;
use skillbench_core::wire::decode_record;

fuzz_target!(|data: &[u8]| {
    if let Ok(record) = decode_record(data) {
        // Accepted images carry no slack, so re-encoding is bit-exact.
        assert_eq!(&record.encode().unwrap()[..], data);
    }
});
