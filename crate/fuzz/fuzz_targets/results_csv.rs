#![no_main]

use libfuzzer_sys::fuzz_target;
use pftrack::sequence::read_results_csv;

fuzz_target!(|data: &[u8]| {
    let _ = read_results_csv(data);
});
