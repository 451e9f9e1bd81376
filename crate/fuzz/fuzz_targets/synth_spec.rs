#![no_main]

use libfuzzer_sys::fuzz_target;
use pftrack::sequence::{render_synthetic, SynthSpec};

fuzz_target!(|text: &str| {
    let Ok(spec) = serde_json::from_str::<SynthSpec>(text) else {
        return;
    };
    let volume = spec
        .width
        .checked_mul(spec.height)
        .and_then(|p| p.checked_mul(spec.frame_count));
    if spec.validate().is_err() || volume.is_none_or(|v| v > 64 * 64 * 4) {
        return;
    }
    let (frames, truth) = render_synthetic(&spec).unwrap();
    assert_eq!(frames.len(), spec.frame_count);
    assert_eq!(truth.len(), spec.frame_count);
});
