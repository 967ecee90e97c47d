#![no_main]

use libfuzzer_sys::fuzz_target;
use permsbl::harness::SweepSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = SweepSpec::from_json(text) {
        spec.validate().expect("from_json only returns valid specs");
    }
});
