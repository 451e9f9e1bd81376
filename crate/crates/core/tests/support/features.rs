//! Brute-force reference implementations of the feature channels.

use pftrack::features::{FeatureMode, QuantizerSpec};
use pftrack::image::{ImageBuffer, RegionRect};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Color bin from integer arithmetic only: hue sector position as an exact
/// rational `num / (6 * delta)` of the full circle.
pub fn oracle_color_bin(rgb: [u8; 3], spec: &QuantizerSpec) -> usize {
    let [r, g, b] = rgb.map(i64::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let (hb, hs, hv) = (spec.hue_bins as i64, spec.sat_bins as i64, spec.val_bins as i64);
    let hue = if delta == 0 {
        0
    } else {
        let num = if max == r {
            if g >= b {
                g - b
            } else {
                6 * delta - (b - g)
            }
        } else if max == g {
            b - r + 2 * delta
        } else {
            r - g + 4 * delta
        };
        let bin = (hb * num).div_euclid(6 * delta);
        if bin >= hb {
            0
        } else {
            bin
        }
    };
    let sat = if max == 0 { 0 } else { ((hs * delta) / max).min(hs - 1) };
    let val = ((hv * max) / 255).min(hv - 1);
    (hue * hs * hv + sat * hv + val) as usize
}

/// Sobel over the luma plane with clamped borders; orientation folded from
/// `atan2` into `(-π/2, π/2]`.
pub fn oracle_edge_bins(img: &ImageBuffer, spec: &QuantizerSpec) -> Vec<Option<usize>> {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let luma = |x: i64, y: i64| {
        let [r, g, b] = img.pixel(x.clamp(0, w - 1) as usize, y.clamp(0, h - 1) as usize);
        0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64
    };
    const KX: [[f64; 3]; 3] = [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]];
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..3 {
                for i in 0..3 {
                    let v = luma(x + i as i64 - 1, y + j as i64 - 1);
                    gx += KX[j][i] * v;
                    gy += KX[i][j] * v;
                }
            }
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 || mag < spec.magnitude_threshold {
                out.push(None);
                continue;
            }
            let mut theta = gy.atan2(gx);
            if theta > std::f64::consts::FRAC_PI_2 {
                theta -= std::f64::consts::PI;
            } else if theta <= -std::f64::consts::FRAC_PI_2 {
                theta += std::f64::consts::PI;
            }
            let m = spec.orientation_bins;
            let t = (theta + std::f64::consts::FRAC_PI_2) / std::f64::consts::PI;
            out.push(Some(((t * m as f64).floor() as usize).min(m - 1)));
        }
    }
    out
}

pub fn oracle_bins(img: &ImageBuffer, spec: &QuantizerSpec, mode: FeatureMode) -> Vec<Option<usize>> {
    match mode {
        FeatureMode::Color => img.pixels().map(|p| Some(oracle_color_bin(p, spec))).collect(),
        FeatureMode::Edge => oracle_edge_bins(img, spec),
    }
}

pub fn oracle_counts(bins: &[Option<usize>], width: usize, height: usize, m: usize, r: &RegionRect) -> Vec<u32> {
    let mut counts = vec![0u32; m];
    for y in 0..height {
        for x in 0..width {
            let (xi, yi) = (x as i64, y as i64);
            if xi >= r.x && xi < r.x + r.w && yi >= r.y && yi < r.y + r.h {
                if let Some(b) = bins[y * width + x] {
                    counts[b] += 1;
                }
            }
        }
    }
    counts
}

/// Piecewise-constant blocks plus noise, so both channels have structure.
pub fn random_image(rng: &mut ChaCha8Rng, width: usize, height: usize) -> ImageBuffer {
    let block = rng.random_range(3..12);
    let cols = width.div_ceil(block);
    let palette: Vec<[u8; 3]> = (0..cols * height.div_ceil(block)).map(|_| rng.random()).collect();
    let mut img = ImageBuffer::filled(width, height, [0, 0, 0]).unwrap();
    for y in 0..height {
        for x in 0..width {
            let base = palette[(y / block) * cols + x / block];
            let px = base.map(|c| (c as i16 + rng.random_range(-6..=6)).clamp(0, 255) as u8);
            img.set_pixel(x, y, px);
        }
    }
    img
}

pub fn random_region(rng: &mut ChaCha8Rng, width: usize, height: usize) -> RegionRect {
    let (w, h) = (width as i64, height as i64);
    let rw = rng.random_range(1..=w + 4);
    let rh = rng.random_range(1..=h + 4);
    let x = rng.random_range(-rw + 1..w);
    let y = rng.random_range(-rh + 1..h);
    RegionRect::new(x, y, rw, rh)
}
