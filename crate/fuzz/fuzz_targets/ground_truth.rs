#![no_main]

use libfuzzer_sys::fuzz_target;
use pftrack::sequence::{parse_ground_truth, write_ground_truth};

fuzz_target!(|text: &str| {
    if let Ok(rects) = parse_ground_truth(text) {
        let mut out = Vec::new();
        write_ground_truth(&mut out, &rects).unwrap();
        let back = parse_ground_truth(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(back, rects);
    }
});
