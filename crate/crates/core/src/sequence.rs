//! Frame sequences on disk, synthetic sequences with exact ground truth,
//! evaluation, CSV reports and the histogram timing benchmark.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{quantize_color, rgb_to_hsv, BinMap, FeatureMode, QuantizerSpec};
use crate::histogram::IntegralHistogram;
use crate::image::{load_image, save_ppm, ImageBuffer, ImageError, RegionRect};
use crate::tracker::{FrameResult, Tracker, TrackerConfig, TrackerError};

/// Frames counted as tracked when the centre error is below this many pixels.
pub const SUCCESS_THRESHOLD_PX: f64 = 20.0;

#[derive(Debug, Error)]
pub enum SequenceError {
    #[error("no PPM or PNG frames found in {0}")]
    MissingFrames(PathBuf),
    #[error("ground truth line {line}: {reason}")]
    MalformedGroundTruth { line: usize, reason: String },
    #[error("{frames} frames but {rects} ground-truth rectangles")]
    GroundTruthLength { frames: usize, rects: usize },
    #[error("sequence has no ground truth")]
    NoGroundTruth,
    #[error("no initial rectangle given and no ground truth to take it from")]
    MissingInit,
    #[error("{results} results for {truths} ground-truth frames")]
    LengthMismatch { results: usize, truths: usize },
    #[error("invalid synthetic sequence: {0}")]
    InvalidSynth(&'static str),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Tracker(#[from] TrackerError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SequenceError + '_ {
    move |source| SequenceError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Numbered frames in `img/` plus optional `groundtruth_rect.txt`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSequence {
    pub name: String,
    pub frames: Vec<PathBuf>,
    pub ground_truth: Option<Vec<RegionRect>>,
}

impl TrackSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

fn frame_number(path: &Path) -> Option<u64> {
    let stem = path.file_stem()?.to_str()?;
    let digits: String = stem
        .chars()
        .rev()
        .take_while(|c| c.is_ascii_digit())
        .collect::<Vec<_>>()
        .into_iter()
        .rev()
        .collect();
    digits.parse().ok()
}

fn is_frame_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "ppm" | "png"))
}

pub fn load_sequence(dir: &Path) -> Result<TrackSequence, SequenceError> {
    let img_dir = dir.join("img");
    let entries = fs::read_dir(&img_dir).map_err(io_err(&img_dir))?;
    let mut frames = Vec::new();
    for entry in entries {
        let path = entry.map_err(io_err(&img_dir))?.path();
        if is_frame_file(&path) {
            if let Some(n) = frame_number(&path) {
                frames.push((n, path));
            }
        }
    }
    if frames.is_empty() {
        return Err(SequenceError::MissingFrames(img_dir));
    }
    frames.sort();
    let frames: Vec<PathBuf> = frames.into_iter().map(|(_, p)| p).collect();

    let gt_path = dir.join("groundtruth_rect.txt");
    let ground_truth = if gt_path.is_file() {
        let text = fs::read_to_string(&gt_path).map_err(io_err(&gt_path))?;
        let rects = parse_ground_truth(&text)?;
        if rects.len() != frames.len() {
            return Err(SequenceError::GroundTruthLength {
                frames: frames.len(),
                rects: rects.len(),
            });
        }
        Some(rects)
    } else {
        None
    };
    let name = dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(TrackSequence {
        name,
        frames,
        ground_truth,
    })
}

/// Parses one `x,y,w,h` rectangle per line. Commas, tabs and spaces all
/// separate fields; fractional values are rounded. Blank lines are skipped.
pub fn parse_ground_truth(text: &str) -> Result<Vec<RegionRect>, SequenceError> {
    let mut rects = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.is_empty() {
            continue;
        }
        let malformed = |reason: String| SequenceError::MalformedGroundTruth { line: line_no, reason };
        if fields.len() != 4 {
            return Err(malformed(format!("expected 4 fields, found {}", fields.len())));
        }
        let mut v = [0i64; 4];
        for (slot, field) in v.iter_mut().zip(&fields) {
            let x: f64 = field
                .parse()
                .map_err(|_| malformed(format!("not a number: {field:?}")))?;
            if !x.is_finite() || x.abs() > 1e9 {
                return Err(malformed(format!("out of range: {field:?}")));
            }
            *slot = x.round() as i64;
        }
        if v[2] < 0 || v[3] < 0 {
            return Err(malformed("negative width or height".into()));
        }
        rects.push(RegionRect::new(v[0], v[1], v[2], v[3]));
    }
    Ok(rects)
}

pub fn write_ground_truth<W: Write>(mut out: W, rects: &[RegionRect]) -> std::io::Result<()> {
    for r in rects {
        writeln!(out, "{},{},{},{}", r.x, r.y, r.w, r.h)?;
    }
    Ok(())
}

/// Tracks every frame of `seq`. The initial window is `init` or, failing
/// that, the first ground-truth rectangle.
pub fn track_sequence(
    seq: &TrackSequence,
    cfg: &TrackerConfig,
    init: Option<RegionRect>,
    mut on_frame: impl FnMut(&ImageBuffer, &FrameResult) -> Result<(), SequenceError>,
) -> Result<Vec<FrameResult>, SequenceError> {
    let init = init
        .or_else(|| seq.ground_truth.as_ref().and_then(|g| g.first().copied()))
        .ok_or(SequenceError::MissingInit)?;
    let Some(first_path) = seq.frames.first() else {
        return Ok(Vec::new());
    };
    let first = load_image(first_path)?;
    let mut tracker = Tracker::new(cfg.clone(), &first, init)?;
    let record = tracker.initial_result();
    on_frame(&first, &record)?;
    let mut results = vec![record];
    for path in &seq.frames[1..] {
        let frame = load_image(path)?;
        let record = tracker.track_frame(&frame)?;
        on_frame(&frame, &record)?;
        results.push(record);
    }
    Ok(results)
}

/// Copy of `frame` with the estimated window drawn in.
pub fn overlay(frame: &ImageBuffer, result: &FrameResult) -> ImageBuffer {
    let mut out = frame.clone();
    let rect = result.rect();
    out.draw_rect_outline(&rect, [255, 255, 0]);
    out.draw_rect_outline(&RegionRect::new(rect.x - 1, rect.y - 1, rect.w + 2, rect.h + 2), [0, 0, 0]);
    out
}

/// Euclidean distance between rectangle centres.
pub fn center_location_error(estimate: &RegionRect, truth: &RegionRect) -> f64 {
    let (a, b) = (estimate.center(), truth.center());
    (a.0 - b.0).hypot(a.1 - b.1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub cle: Vec<f64>,
    pub rmse: f64,
    pub mean_cle: f64,
    pub success: Vec<bool>,
    pub success_rate: f64,
    pub runtime_seconds: Option<f64>,
}

/// Per-frame centre errors of `centers` against `truth`.
pub fn evaluate(centers: &[(f64, f64)], truth: &[RegionRect]) -> Result<EvalReport, SequenceError> {
    if centers.len() != truth.len() {
        return Err(SequenceError::LengthMismatch {
            results: centers.len(),
            truths: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(SequenceError::NoGroundTruth);
    }
    let cle: Vec<f64> = centers
        .iter()
        .zip(truth)
        .map(|(&(x, y), t)| {
            let (tx, ty) = t.center();
            (x - tx).hypot(y - ty)
        })
        .collect();
    let n = cle.len() as f64;
    let success: Vec<bool> = cle.iter().map(|&e| e < SUCCESS_THRESHOLD_PX).collect();
    Ok(EvalReport {
        rmse: (cle.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
        mean_cle: cle.iter().sum::<f64>() / n,
        success_rate: success.iter().filter(|&&s| s).count() as f64 / n,
        cle,
        success,
        runtime_seconds: None,
    })
}

pub fn evaluate_sequence(results: &[FrameResult], seq: &TrackSequence) -> Result<EvalReport, SequenceError> {
    let truth = seq.ground_truth.as_ref().ok_or(SequenceError::NoGroundTruth)?;
    let centers: Vec<(f64, f64)> = results.iter().map(|r| (r.state.cx, r.state.cy)).collect();
    evaluate(&centers, truth)
}

pub fn write_eval_csv<W: Write>(out: W, report: &EvalReport) -> Result<(), SequenceError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame", "cle"])?;
    for (i, e) in report.cle.iter().enumerate() {
        w.serialize((i, e))?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub frame: usize,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub ess: f64,
    pub theta_color: f64,
    pub d_color: f64,
    pub rho_edge: f64,
    pub resampled: bool,
}

impl From<&FrameResult> for ResultRow {
    fn from(r: &FrameResult) -> Self {
        Self {
            frame: r.frame,
            cx: r.state.cx,
            cy: r.state.cy,
            w: r.width,
            h: r.height,
            ess: r.ess,
            theta_color: r.theta_color,
            d_color: r.d_color,
            rho_edge: r.rho_edge,
            resampled: r.resampled,
        }
    }
}

pub fn write_results_csv<W: Write>(out: W, results: &[FrameResult]) -> Result<(), SequenceError> {
    let mut w = csv::Writer::from_writer(out);
    for r in results {
        w.serialize(ResultRow::from(r))?;
    }
    if results.is_empty() {
        w.write_record(["frame", "cx", "cy", "w", "h", "ess", "theta_color", "d_color", "rho_edge", "resampled"])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_results_csv<R: Read>(input: R) -> Result<Vec<ResultRow>, SequenceError> {
    csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(SequenceError::from)
}

/// Path of the synthetic target centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MotionPath {
    Static,
    Linear { vx: f64, vy: f64 },
    /// Constant horizontal drift with a vertical sinusoid.
    Sinusoidal { vx: f64, amplitude: f64, period: f64 },
}

impl MotionPath {
    pub fn center(&self, start: (f64, f64), t: usize) -> (f64, f64) {
        let t = t as f64;
        match *self {
            MotionPath::Static => start,
            MotionPath::Linear { vx, vy } => (start.0 + vx * t, start.1 + vy * t),
            MotionPath::Sinusoidal { vx, amplitude, period } => (
                start.0 + vx * t,
                start.1 + amplitude * (2.0 * std::f64::consts::PI * t / period).sin(),
            ),
        }
    }
}

/// Occluder laid over the target during `[start, end)`. It covers the left
/// `coverage` fraction of the target's width over its full height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Occlusion {
    pub start: usize,
    pub end: usize,
    pub coverage: f64,
    pub color: [u8; 3],
}

/// Global gain on all pixel values during `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Illumination {
    pub start: usize,
    pub end: usize,
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub frame_count: usize,
    pub width: usize,
    pub height: usize,
    pub target_color: [u8; 3],
    pub target_size: (usize, usize),
    pub start: (f64, f64),
    pub motion: MotionPath,
    pub occlusion: Option<Occlusion>,
    pub illumination: Option<Illumination>,
    /// Flat rectangle in the target color and size, centred here.
    pub distractor: Option<(f64, f64)>,
    /// Amplitude of uniform per-pixel noise.
    pub noise: u8,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            frame_count: 100,
            width: 320,
            height: 240,
            target_color: [214, 160, 120],
            target_size: (40, 48),
            start: (60.0, 120.0),
            motion: MotionPath::Linear { vx: 2.0, vy: 0.0 },
            occlusion: None,
            illumination: None,
            distractor: None,
            noise: 3,
            seed: 0,
        }
    }
}

impl SynthSpec {
    /// Target crossing the frame while a flat occluder hides most of it.
    pub fn occlusion(seed: u64) -> Self {
        Self {
            occlusion: Some(Occlusion {
                start: 35,
                end: 65,
                coverage: 0.6,
                color: [70, 70, 150],
            }),
            distractor: Some((160.0, 72.0)),
            seed,
            ..Self::default()
        }
    }

    /// Target crossing the frame through a lighting change.
    pub fn illumination(seed: u64) -> Self {
        Self {
            motion: MotionPath::Sinusoidal {
                vx: 2.0,
                amplitude: 20.0,
                period: 50.0,
            },
            illumination: Some(Illumination {
                start: 30,
                end: 70,
                gain: 0.55,
            }),
            distractor: Some((160.0, 50.0)),
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SequenceError> {
        let bad = |m| Err(SequenceError::InvalidSynth(m));
        if self.frame_count == 0 {
            return bad("frame_count must be >= 1");
        }
        if self.width < 3 || self.height < 3 || self.width.saturating_mul(self.height) > crate::image::MAX_PIXELS {
            return bad("image size out of range");
        }
        if self.target_size.0 < 4 || self.target_size.1 < 4 {
            return bad("target must be at least 4x4");
        }
        if let Some(o) = &self.occlusion {
            if o.start >= o.end || o.end > self.frame_count {
                return bad("occlusion interval must lie within [0, frame_count)");
            }
            if !(0.5..=0.8).contains(&o.coverage) {
                return bad("occlusion coverage must be in [0.5, 0.8]");
            }
        }
        if let Some(i) = &self.illumination {
            if i.start >= i.end || i.end > self.frame_count {
                return bad("illumination interval must lie within [0, frame_count)");
            }
            if !(i.gain >= 0.0) || !i.gain.is_finite() {
                return bad("illumination gain must be finite and >= 0");
            }
        }
        Ok(())
    }

    pub fn ground_truth(&self) -> Vec<RegionRect> {
        let (w, h) = (self.target_size.0 as f64, self.target_size.1 as f64);
        (0..self.frame_count)
            .map(|t| {
                let (cx, cy) = self.motion.center(self.start, t);
                RegionRect::centered(cx, cy, w, h)
            })
            .collect()
    }
}

const BACKGROUND_PALETTE: [[u8; 3]; 6] = [
    [46, 92, 60],
    [70, 110, 80],
    [60, 75, 110],
    [95, 100, 105],
    [40, 60, 50],
    [120, 125, 95],
];
const BLOCK: usize = 16;

/// Renders the frames of `spec` in memory, with their ground truth.
pub fn render_synthetic(spec: &SynthSpec) -> Result<(Vec<ImageBuffer>, Vec<RegionRect>), SequenceError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (bw, bh) = (spec.width.div_ceil(BLOCK), spec.height.div_ceil(BLOCK));
    let blocks: Vec<[u8; 3]> = (0..bw * bh)
        .map(|_| BACKGROUND_PALETTE[rng.random_range(0..BACKGROUND_PALETTE.len())])
        .collect();
    let mut background = ImageBuffer::filled(spec.width, spec.height, [0, 0, 0])?;
    for y in 0..spec.height {
        for x in 0..spec.width {
            background.set_pixel(x, y, blocks[(y / BLOCK) * bw + x / BLOCK]);
        }
    }

    let truth = spec.ground_truth();
    let mut frames = Vec::with_capacity(spec.frame_count);
    for (t, rect) in truth.iter().enumerate() {
        let mut img = background.clone();
        if let Some((dx, dy)) = spec.distractor {
            let d = RegionRect::centered(dx, dy, rect.w as f64, rect.h as f64);
            img.fill_rect(&d, spec.target_color);
        }
        draw_face(&mut img, rect, spec.target_color);
        if let Some(o) = spec.occlusion.filter(|o| (o.start..o.end).contains(&t)) {
            let covered = (o.coverage * rect.w as f64).ceil() as i64;
            img.fill_rect(&RegionRect::new(rect.x - 6, rect.y - 6, covered + 6, rect.h + 12), o.color);
        }
        let gain = spec
            .illumination
            .filter(|i| (i.start..i.end).contains(&t))
            .map_or(1.0, |i| i.gain);
        frames.push(finish_frame(&img, gain, spec.noise, &mut rng)?);
    }
    Ok((frames, truth))
}

fn finish_frame(img: &ImageBuffer, gain: f64, noise: u8, rng: &mut ChaCha8Rng) -> Result<ImageBuffer, ImageError> {
    let amp = noise as i32;
    let data = img
        .as_bytes()
        .iter()
        .map(|&v| {
            let jitter = if amp > 0 { rng.random_range(-amp..=amp) } else { 0 };
            (v as f64 * gain + jitter as f64).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    ImageBuffer::new(img.width(), img.height(), data)
}

fn shade(rgb: [u8; 3], f: f64) -> [u8; 3] {
    rgb.map(|c| (c as f64 * f).round().clamp(0.0, 255.0) as u8)
}

fn fill_ellipse(img: &mut ImageBuffer, rect: &RegionRect, rgb: [u8; 3]) {
    let Some(c) = rect.clamp_to(img.width(), img.height()) else {
        return;
    };
    let (cx, cy) = rect.center();
    let (rx, ry) = (rect.w as f64 / 2.0, rect.h as f64 / 2.0);
    for y in c.y0..c.y1 {
        for x in c.x0..c.x1 {
            let dx = (x as f64 + 0.5 - cx) / rx;
            let dy = (y as f64 + 0.5 - cy) / ry;
            if dx * dx + dy * dy <= 1.0 {
                img.set_pixel(x, y, rgb);
            }
        }
    }
}

/// Skin-colored oval with hair, eyes and mouth inside `rect`.
fn draw_face(img: &mut ImageBuffer, rect: &RegionRect, skin: [u8; 3]) {
    let (x, y, w, h) = (rect.x, rect.y, rect.w, rect.h);
    let part = |fx: f64, fy: f64, fw: f64, fh: f64| {
        RegionRect::new(
            x + (fx * w as f64).round() as i64,
            y + (fy * h as f64).round() as i64,
            ((fw * w as f64).round() as i64).max(1),
            ((fh * h as f64).round() as i64).max(1),
        )
    };
    fill_ellipse(img, rect, skin);
    fill_ellipse(img, &part(0.1, -0.05, 0.8, 0.3), [60, 40, 25]);
    let dark = shade(skin, 0.25);
    fill_ellipse(img, &part(0.22, 0.38, 0.18, 0.1), dark);
    fill_ellipse(img, &part(0.60, 0.38, 0.18, 0.1), dark);
    img.fill_rect(&part(0.45, 0.5, 0.1, 0.15), shade(skin, 0.7));
    img.fill_rect(&part(0.32, 0.74, 0.36, 0.06), [120, 40, 40]);
}

/// Writes `img/NNNN.ppm` and `groundtruth_rect.txt` under `dir`.
pub fn generate_synthetic(spec: &SynthSpec, dir: &Path) -> Result<TrackSequence, SequenceError> {
    let (frames, truth) = render_synthetic(spec)?;
    let img_dir = dir.join("img");
    fs::create_dir_all(&img_dir).map_err(io_err(&img_dir))?;
    let mut paths = Vec::with_capacity(frames.len());
    for (i, frame) in frames.iter().enumerate() {
        let path = img_dir.join(format!("{:04}.ppm", i + 1));
        save_ppm(frame, &path)?;
        paths.push(path);
    }
    let gt_path = dir.join("groundtruth_rect.txt");
    let file = fs::File::create(&gt_path).map_err(io_err(&gt_path))?;
    write_ground_truth(std::io::BufWriter::new(file), &truth).map_err(io_err(&gt_path))?;
    Ok(TrackSequence {
        name: dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
        frames: paths,
        ground_truth: Some(truth),
    })
}

/// Runs a tracker over in-memory frames and reports the centres.
pub fn track_in_memory(
    frames: &[ImageBuffer],
    cfg: &TrackerConfig,
    init: RegionRect,
) -> Result<Vec<FrameResult>, SequenceError> {
    Ok(crate::tracker::track_frames(cfg, frames.iter(), init)?)
}

/// Timings for one particle count, in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenchRow {
    pub particles: usize,
    pub naive_s: f64,
    pub integral_build_s: f64,
    pub integral_query_s: f64,
    pub integral_total_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub width: usize,
    pub height: usize,
    pub particle_counts: Vec<usize>,
    pub region: (usize, usize),
    pub repetitions: usize,
    pub seed: u64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self {
            width: 480,
            height: 360,
            particle_counts: vec![20, 50, 100, 200, 500],
            region: (64, 80),
            repetitions: 5,
            seed: 0,
        }
    }
}

/// Color histogram of `region` straight from the pixels, converting each
/// pixel to HSV.
pub fn naive_color_counts(img: &ImageBuffer, region: &RegionRect, spec: &QuantizerSpec) -> Vec<u32> {
    let mut counts = vec![0u32; spec.color_bins()];
    if let Some(c) = region.clamp_to(img.width(), img.height()) {
        for y in c.y0..c.y1 {
            for x in c.x0..c.x1 {
                let [r, g, b] = img.pixel(x, y);
                counts[quantize_color(rgb_to_hsv(r, g, b), spec)] += 1;
            }
        }
    }
    counts
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Times `P` region histograms by direct counting against one integral
/// histogram build plus `P` queries. Reports medians over the repetitions.
/// The integral table is rebuilt in place, as a tracker does once per frame.
pub fn bench_histograms(spec: &BenchSpec) -> Result<Vec<BenchRow>, SequenceError> {
    if spec.repetitions == 0 || spec.region.0 == 0 || spec.region.1 == 0 {
        return Err(SequenceError::InvalidSynth("benchmark needs repetitions and a nonempty region"));
    }
    let synth = SynthSpec {
        frame_count: 1,
        width: spec.width,
        height: spec.height,
        start: (spec.width as f64 / 2.0, spec.height as f64 / 2.0),
        motion: MotionPath::Static,
        seed: spec.seed,
        ..SynthSpec::default()
    };
    let (frames, _) = render_synthetic(&synth)?;
    let img = &frames[0];
    let q = QuantizerSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (rw, rh) = (spec.region.0 as i64, spec.region.1 as i64);
    let mut ih = IntegralHistogram::build(&BinMap::color(img, &q), q, FeatureMode::Color);
    let mut rows = Vec::new();
    for &p in &spec.particle_counts {
        let regions: Vec<RegionRect> = (0..p)
            .map(|_| {
                RegionRect::new(
                    rng.random_range(0..=(spec.width as i64 - rw).max(0)),
                    rng.random_range(0..=(spec.height as i64 - rh).max(0)),
                    rw,
                    rh,
                )
            })
            .collect();
        let (mut naive, mut build, mut query) = (Vec::new(), Vec::new(), Vec::new());
        let mut sink = 0u64;
        for _ in 0..spec.repetitions {
            let t = Instant::now();
            for r in &regions {
                sink += naive_color_counts(img, r, &q)[0] as u64;
            }
            naive.push(t.elapsed().as_secs_f64());

            let t = Instant::now();
            let map = BinMap::color(img, &q);
            ih.rebuild(&map, q, FeatureMode::Color);
            build.push(t.elapsed().as_secs_f64());
            let t = Instant::now();
            for r in &regions {
                sink += ih.query_counts(r).map_or(0, |c| c[0] as u64);
            }
            query.push(t.elapsed().as_secs_f64());
        }
        std::hint::black_box(sink);
        let (b, qy) = (median(build), median(query));
        rows.push(BenchRow {
            particles: p,
            naive_s: median(naive),
            integral_build_s: b,
            integral_query_s: qy,
            integral_total_s: b + qy,
        });
    }
    Ok(rows)
}

pub fn write_bench_csv<W: Write>(out: W, rows: &[BenchRow]) -> Result<(), SequenceError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_truth_parsing() {
        assert_eq!(parse_ground_truth("57,21,68,71\n").unwrap(), vec![RegionRect::new(57, 21, 68, 71)]);
        let mixed = parse_ground_truth("1\t2\t3\t4\n\n5 6 7 8\n9, 10, 11.4, 12.6\n").unwrap();
        assert_eq!(mixed[1], RegionRect::new(5, 6, 7, 8));
        assert_eq!(mixed[2], RegionRect::new(9, 10, 11, 13));
        match parse_ground_truth("1,2,3,4\n1,2,x,4\n") {
            Err(SequenceError::MalformedGroundTruth { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_ground_truth("1,2,3\n").is_err());
        assert!(parse_ground_truth("1,2,-3,4\n").is_err());
        assert!(parse_ground_truth("1,2,inf,4\n").is_err());
    }

    #[test]
    fn center_location_error_examples() {
        let a = RegionRect::new(-5, -5, 10, 10);
        let b = RegionRect::new(-2, -1, 10, 10);
        assert_eq!(center_location_error(&a, &a), 0.0);
        assert!((center_location_error(&a, &b) - 5.0).abs() < 1e-12);
        assert_eq!(center_location_error(&a, &b), center_location_error(&b, &a));
    }

    #[test]
    fn evaluate_examples() {
        let truth = vec![RegionRect::new(0, 0, 10, 10); 4];
        let perfect = vec![(5.0, 5.0); 4];
        let r = evaluate(&perfect, &truth).unwrap();
        assert!(r.cle.iter().all(|&e| e == 0.0) && r.rmse == 0.0 && r.success_rate == 1.0);
        let offset = vec![(6.0, 5.0); 4];
        let r = evaluate(&offset, &truth).unwrap();
        assert_eq!((r.mean_cle, r.rmse, r.cle.len()), (1.0, 1.0, 4));
        assert!(matches!(evaluate(&perfect[..3], &truth), Err(SequenceError::LengthMismatch { .. })));
        assert!(matches!(evaluate(&[], &[]), Err(SequenceError::NoGroundTruth)));
        let mut buf = Vec::new();
        write_eval_csv(&mut buf, &r).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "frame,cle\n0,1.0\n1,1.0\n2,1.0\n3,1.0\n");
    }

    #[test]
    fn synthetic_motion_and_determinism() {
        let still = SynthSpec {
            frame_count: 5,
            motion: MotionPath::Static,
            ..SynthSpec::default()
        };
        let truth = still.ground_truth();
        assert!(truth.iter().all(|r| *r == truth[0]));

        let moving = SynthSpec {
            frame_count: 101,
            ..SynthSpec::default()
        };
        let truth = moving.ground_truth();
        assert!((truth[100].center().0 - truth[0].center().0 - 200.0).abs() < 1e-9);

        let spec = SynthSpec {
            frame_count: 3,
            ..SynthSpec::occlusion(4)
        };
        let spec = SynthSpec {
            occlusion: Some(Occlusion { start: 1, end: 2, ..spec.occlusion.unwrap() }),
            ..spec
        };
        assert_eq!(render_synthetic(&spec).unwrap(), render_synthetic(&spec).unwrap());
    }

    #[test]
    fn synth_validation() {
        let bad = SynthSpec {
            occlusion: Some(Occlusion {
                start: 10,
                end: 200,
                coverage: 0.6,
                color: [0, 0, 0],
            }),
            ..SynthSpec::default()
        };
        assert!(bad.validate().is_err());
        let thin = SynthSpec {
            occlusion: Some(Occlusion {
                start: 1,
                end: 2,
                coverage: 0.3,
                color: [0, 0, 0],
            }),
            ..SynthSpec::default()
        };
        assert!(thin.validate().is_err());
        assert!(SynthSpec::occlusion(0).validate().is_ok());
        assert!(SynthSpec::illumination(0).validate().is_ok());
    }

    #[test]
    fn occluder_covers_most_of_the_target() {
        let spec = SynthSpec {
            frame_count: 2,
            noise: 0,
            distractor: None,
            occlusion: Some(Occlusion {
                start: 1,
                end: 2,
                coverage: 0.5,
                color: [1, 2, 3],
            }),
            ..SynthSpec::default()
        };
        let (frames, truth) = render_synthetic(&spec).unwrap();
        let r = truth[1];
        let c = r.clamp_to(spec.width, spec.height).unwrap();
        let hidden = (c.y0..c.y1)
            .flat_map(|y| (c.x0..c.x1).map(move |x| (x, y)))
            .filter(|&(x, y)| frames[1].pixel(x, y) == [1, 2, 3])
            .count();
        assert!(hidden * 2 >= c.area());
        assert!((0..spec.height).all(|y| (0..spec.width).all(|x| frames[0].pixel(x, y) != [1, 2, 3])));
    }

    #[test]
    fn disk_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec {
            frame_count: 12,
            ..SynthSpec::default()
        };
        let written = generate_synthetic(&spec, dir.path()).unwrap();
        let loaded = load_sequence(dir.path()).unwrap();
        assert_eq!(loaded.frames, written.frames);
        assert_eq!(loaded.ground_truth, written.ground_truth);
        let (frames, _) = render_synthetic(&spec).unwrap();
        assert_eq!(load_image(&loaded.frames[11]).unwrap(), frames[11]);

        fs::remove_file(dir.path().join("groundtruth_rect.txt")).unwrap();
        assert_eq!(load_sequence(dir.path()).unwrap().ground_truth, None);
    }

    #[test]
    fn frames_sort_numerically() {
        let dir = tempfile::tempdir().unwrap();
        let img_dir = dir.path().join("img");
        fs::create_dir_all(&img_dir).unwrap();
        let img = ImageBuffer::filled(4, 4, [0, 0, 0]).unwrap();
        for n in [10, 2, 33, 1] {
            save_ppm(&img, &img_dir.join(format!("{n}.ppm"))).unwrap();
        }
        fs::write(img_dir.join("notes.txt"), "x").unwrap();
        let seq = load_sequence(dir.path()).unwrap();
        let names: Vec<_> = seq.frames.iter().map(|p| p.file_name().unwrap().to_str().unwrap().to_string()).collect();
        assert_eq!(names, ["1.ppm", "2.ppm", "10.ppm", "33.ppm"]);

        fs::write(dir.path().join("groundtruth_rect.txt"), "1,1,2,2\n").unwrap();
        assert!(matches!(load_sequence(dir.path()), Err(SequenceError::GroundTruthLength { .. })));
        let empty = tempfile::tempdir().unwrap();
        fs::create_dir_all(empty.path().join("img")).unwrap();
        assert!(matches!(load_sequence(empty.path()), Err(SequenceError::MissingFrames(_))));
    }

    #[test]
    fn results_csv_round_trip() {
        let frames: Vec<ImageBuffer> = render_synthetic(&SynthSpec {
            frame_count: 4,
            ..SynthSpec::default()
        })
        .unwrap()
        .0;
        let results = track_in_memory(&frames, &TrackerConfig::default(), RegionRect::new(40, 96, 40, 48)).unwrap();
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &results).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("frame,cx,cy,w,h,ess,theta_color,d_color,rho_edge,resampled\n"));
        let rows = read_results_csv(&buf[..]).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[2], ResultRow::from(&results[2]));
    }

    #[test]
    fn bench_reports_every_count() {
        let spec = BenchSpec {
            width: 64,
            height: 48,
            particle_counts: vec![1, 3],
            region: (10, 10),
            repetitions: 1,
            seed: 0,
        };
        let rows = bench_histograms(&spec).unwrap();
        assert_eq!(rows.iter().map(|r| r.particles).collect::<Vec<_>>(), [1, 3]);
        assert!(rows.iter().all(|r| r.integral_total_s >= r.integral_build_s));
    }
}
