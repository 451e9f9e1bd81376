//! Replays the checked-in fuzz seeds through the same roundtrip checks the
//! fuzz targets make. Every seed is a valid input.

use std::fs;
use std::path::{Path, PathBuf};

use pftrack::image::{decode_image, decode_ppm, encode_ppm};
use pftrack::sequence::{parse_ground_truth, read_results_csv, render_synthetic, write_ground_truth, SynthSpec};
use pftrack::tracker::TrackerConfig;

fn seeds(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            let bytes = fs::read(&path).unwrap();
            (path, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

fn text(path: &Path, bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap_or_else(|_| panic!("{} is not UTF-8", path.display()))
}

#[test]
fn decode_image_seeds() {
    for (path, bytes) in seeds("decode_image") {
        let img = decode_image(&bytes).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(decode_ppm(&encode_ppm(&img)).unwrap(), img, "{}", path.display());
    }
}

#[test]
fn ground_truth_seeds() {
    for (path, bytes) in seeds("ground_truth") {
        let rects = parse_ground_truth(&text(&path, &bytes)).unwrap();
        let mut out = Vec::new();
        write_ground_truth(&mut out, &rects).unwrap();
        assert_eq!(parse_ground_truth(std::str::from_utf8(&out).unwrap()).unwrap(), rects);
    }
}

#[test]
fn tracker_config_seeds() {
    for (path, bytes) in seeds("tracker_config") {
        let cfg = TrackerConfig::from_json(&text(&path, &bytes)).unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        assert_eq!(TrackerConfig::from_json(&json).unwrap(), cfg);
    }
}

#[test]
fn results_csv_seeds() {
    for (path, bytes) in seeds("results_csv") {
        let rows = read_results_csv(bytes.as_slice()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(!rows.is_empty());
    }
}

#[test]
fn synth_spec_seeds() {
    for (path, bytes) in seeds("synth_spec") {
        let spec: SynthSpec = serde_json::from_str(&text(&path, &bytes)).unwrap();
        spec.validate().unwrap();
        let (frames, truth) = render_synthetic(&spec).unwrap();
        assert_eq!(frames.len(), spec.frame_count);
        assert_eq!(truth.len(), spec.frame_count);
    }
}
