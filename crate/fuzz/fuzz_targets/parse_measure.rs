#![no_main]

use libfuzzer_sys::fuzz_target;
use mms_lab::io::parse_measure;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(m) = parse_measure(s) {
            assert!(m.atoms().iter().all(|a| a.mass > 0.0 && a.mass.is_finite()));
            assert!(m.atoms().windows(2).all(|w| w[0].point < w[1].point));
        }
    }
});
