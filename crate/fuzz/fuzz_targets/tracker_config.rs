#![no_main]

use libfuzzer_sys::fuzz_target;
use pftrack::tracker::TrackerConfig;

fuzz_target!(|text: &str| {
    if let Ok(cfg) = TrackerConfig::from_json(text) {
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(TrackerConfig::from_json(&json).unwrap(), cfg);
    }
});
