#![no_main]

use libfuzzer_sys::fuzz_target;
use permsbl::ProblemInstance;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = ProblemInstance::from_json(text) {
        let again = inst.to_json().expect("accepted instance serializes");
        let back = ProblemInstance::from_json(&again).expect("serialized instance parses");
        assert_eq!(back.to_json().expect("serializes"), again);
    }
});
