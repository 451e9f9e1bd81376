#![no_main]

use libfuzzer_sys::fuzz_target;
use pftrack::image::{decode_image, decode_ppm, encode_ppm};

fuzz_target!(|data: &[u8]| {
    if let Ok(img) = decode_image(data) {
        let again = decode_ppm(&encode_ppm(&img)).expect("re-encoded frame must decode");
        assert_eq!(again, img);
    }
});
