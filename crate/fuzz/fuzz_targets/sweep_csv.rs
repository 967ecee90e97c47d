#![no_main]

use libfuzzer_sys::fuzz_target;
use permsbl::harness::{parse_csv, to_csv_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_csv(text) {
        let again = to_csv_string(&rows).expect("parsed rows serialize");
        let back = parse_csv(&again).expect("serialized table parses");
        assert_eq!(to_csv_string(&back).expect("serializes"), again);
    }
});
