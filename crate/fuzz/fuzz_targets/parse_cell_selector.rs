#![no_main]

use libfuzzer_sys::fuzz_target;
use mms_lab::generators::segment_space;
use mms_lab::io::CellSelector;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(sel) = CellSelector::parse(s) {
            let space = segment_space(0.1).unwrap();
            if let Ok(ids) = sel.resolve(&space) {
                assert!(ids.windows(2).all(|w| w[0] < w[1]));
                assert!(ids.iter().all(|&i| i < space.len()));
            }
        }
    }
});
