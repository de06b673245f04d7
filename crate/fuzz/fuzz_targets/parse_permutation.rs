#![no_main]

use libfuzzer_sys::fuzz_target;
use mms_lab::io::{check_permutation, parse_permutation};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(p) = parse_permutation(s) {
            check_permutation(&p).expect("parsed permutation is a bijection");
        }
    }
});
