#![no_main]

use libfuzzer_sys::fuzz_target;
use permsbl::io::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = parse_config(text) {
        config.validate().expect("parse_config only returns valid configs");
    }
});
