#![no_main]

use libfuzzer_sys::fuzz_target;
use mms_lab::io::{parse_space, space_to_json};

fuzz_target!(|data: &[u8]| {
    // all-pairs shortest paths is cubic; keep inputs small
    if data.len() > 4096 {
        return;
    }
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(space) = parse_space(s) {
            let back = parse_space(&space_to_json(&space)).expect("serialized space parses");
            assert_eq!(back, space);
            let _ = space.validate();
        }
    }
});
