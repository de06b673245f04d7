#![no_main]

use libfuzzer_sys::fuzz_target;
use mms_lab::io::parse_generator_params;

const KINDS: [&str; 6] = ["segment", "circle", "earring", "necklace", "ball", "torus"];

fuzz_target!(|data: &[u8]| {
    let Some((&k, rest)) = data.split_first() else {
        return;
    };
    if let Ok(s) = std::str::from_utf8(rest) {
        // parsing only; building may allocate as much as the params ask for
        let _ = parse_generator_params(KINDS[k as usize % KINDS.len()], s);
    }
});
