//! Pixel features: HSV color bins, Sobel edge-orientation bins, and
//! Epanechnikov-weighted region histograms.
//!
//! A [`BinMap`] stores the feature bin of every pixel of one frame (or
//! [`NO_BIN`] for pixels that do not vote). All histogram paths, weighted,
//! naive, and integral, read from a bin map so they see identical bins.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::histogram::Histogram;
use crate::image::{ImageBuffer, RegionRect};

/// Marker for pixels that do not vote, e.g. weak edges.
pub const NO_BIN: u16 = u16::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FeatureError {
    #[error("image must be at least 3x3 for Sobel gradients, got {width}x{height}")]
    ImageTooSmall { width: usize, height: usize },
    #[error("region is empty after clamping to the image")]
    EmptyRegion,
    #[error("no pixel in the region is above the edge threshold")]
    AllPixelsBelowEdgeThreshold,
    #[error("invalid quantizer: {0}")]
    InvalidQuantizer(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    Color,
    Edge,
}

/// Bin layout for both feature channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerSpec {
    pub hue_bins: usize,
    pub sat_bins: usize,
    pub val_bins: usize,
    pub orientation_bins: usize,
    /// Minimum Sobel magnitude for a pixel to count as an edge point.
    pub magnitude_threshold: f64,
}

impl Default for QuantizerSpec {
    fn default() -> Self {
        Self {
            hue_bins: 8,
            sat_bins: 8,
            val_bins: 4,
            orientation_bins: 16,
            magnitude_threshold: 25.0,
        }
    }
}

impl QuantizerSpec {
    pub fn color_bins(&self) -> usize {
        self.hue_bins * self.sat_bins * self.val_bins
    }

    pub fn bin_count(&self, mode: FeatureMode) -> usize {
        match mode {
            FeatureMode::Color => self.color_bins(),
            FeatureMode::Edge => self.orientation_bins,
        }
    }

    pub fn validate(&self) -> Result<(), FeatureError> {
        if self.hue_bins == 0 || self.sat_bins == 0 || self.val_bins == 0 {
            return Err(FeatureError::InvalidQuantizer("color bin counts must be positive"));
        }
        if self.color_bins() >= NO_BIN as usize {
            return Err(FeatureError::InvalidQuantizer("too many color bins"));
        }
        if self.orientation_bins == 0 || self.orientation_bins >= NO_BIN as usize {
            return Err(FeatureError::InvalidQuantizer("orientation_bins out of range"));
        }
        if !(self.magnitude_threshold >= 0.0) {
            return Err(FeatureError::InvalidQuantizer("magnitude_threshold must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    /// Degrees in `[0, 360)`.
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Hexcone RGB to HSV. Achromatic pixels get hue 0.
///
/// Channel differences are taken in integers so that colors sitting exactly
/// on a bin edge (`s = 7/8`, `h = 45°`, ...) quantize exactly.
pub fn rgb_to_hsv(r: u8, g: u8, b: u8) -> Hsv {
    let (r, g, b) = (r as i32, g as i32, b as i32);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = (max - min) as f64;
    let sector = |num: i32, offset: f64| 60.0 * (num as f64 / delta + offset);
    let h = if max == min {
        0.0
    } else if max == r {
        if g >= b {
            sector(g - b, 0.0)
        } else {
            sector(g - b, 6.0)
        }
    } else if max == g {
        sector(b - r, 2.0)
    } else {
        sector(r - g, 4.0)
    };
    let s = if max == 0 { 0.0 } else { delta / max as f64 };
    Hsv {
        h: if h >= 360.0 { 0.0 } else { h },
        s,
        v: max as f64 / 255.0,
    }
}

#[inline]
fn uniform_bin(t: f64, bins: usize) -> usize {
    ((t * bins as f64).floor().max(0.0) as usize).min(bins - 1)
}

/// `hbin * (S*V) + sbin * V + vbin`, uniform bins, top bin closed.
pub fn quantize_color(hsv: Hsv, spec: &QuantizerSpec) -> usize {
    let hb = uniform_bin(hsv.h / 360.0, spec.hue_bins);
    let sb = uniform_bin(hsv.s, spec.sat_bins);
    let vb = uniform_bin(hsv.v, spec.val_bins);
    hb * spec.sat_bins * spec.val_bins + sb * spec.val_bins + vb
}

/// Uniform bins over `(-π/2, π/2]`; `None` below the magnitude threshold.
pub fn quantize_orientation(theta: f64, magnitude: f64, spec: &QuantizerSpec) -> Option<usize> {
    if !(magnitude >= spec.magnitude_threshold) || magnitude == 0.0 {
        return None;
    }
    Some(uniform_bin((theta + FRAC_PI_2) / PI, spec.orientation_bins))
}

/// Per-pixel Sobel gradient of the luma plane.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField {
    pub width: usize,
    pub height: usize,
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
    pub magnitude: Vec<f64>,
    /// `atan(gy/gx)` in `(-π/2, π/2]`.
    pub orientation: Vec<f64>,
}

/// 3x3 Sobel with replicated borders.
pub fn sobel_gradients(img: &ImageBuffer) -> Result<GradientField, FeatureError> {
    let (w, h) = (img.width(), img.height());
    if w < 3 || h < 3 {
        return Err(FeatureError::ImageTooSmall { width: w, height: h });
    }
    let gray = img.grayscale();
    let at = |x: isize, y: isize| -> f64 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        gray[yc * w + xc]
    };
    let n = w * h;
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; n];
    let mut magnitude = vec![0.0; n];
    let mut orientation = vec![0.0; n];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (tl, tc, tr) = (at(x - 1, y - 1), at(x, y - 1), at(x + 1, y - 1));
            let (ml, mr) = (at(x - 1, y), at(x + 1, y));
            let (bl, bc, br) = (at(x - 1, y + 1), at(x, y + 1), at(x + 1, y + 1));
            let dx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
            let dy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
            let i = y as usize * w + x as usize;
            gx[i] = dx;
            gy[i] = dy;
            magnitude[i] = dx.hypot(dy);
            orientation[i] = edge_orientation(dx, dy);
        }
    }
    Ok(GradientField {
        width: w,
        height: h,
        gx,
        gy,
        magnitude,
        orientation,
    })
}

/// `atan(gy/gx)`, with `π/2` for vertical gradients and 0 for no gradient.
pub fn edge_orientation(gx: f64, gy: f64) -> f64 {
    if gx == 0.0 {
        if gy == 0.0 {
            0.0
        } else {
            FRAC_PI_2
        }
    } else {
        let t = (gy / gx).atan();
        // atan of a huge negative ratio can round to -π/2, outside the range
        if t <= -FRAC_PI_2 {
            FRAC_PI_2
        } else {
            t
        }
    }
}

/// Epanechnikov profile with `C = 1`.
pub fn epanechnikov(x_norm: f64) -> f64 {
    if x_norm < 1.0 {
        1.0 - x_norm * x_norm
    } else {
        0.0
    }
}

/// Per-pixel feature bins of one frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinMap {
    width: usize,
    height: usize,
    bin_count: usize,
    bins: Vec<u16>,
}

impl BinMap {
    pub fn color(img: &ImageBuffer, spec: &QuantizerSpec) -> Self {
        let bins = img
            .pixels()
            .map(|[r, g, b]| quantize_color(rgb_to_hsv(r, g, b), spec) as u16)
            .collect();
        Self {
            width: img.width(),
            height: img.height(),
            bin_count: spec.color_bins(),
            bins,
        }
    }

    pub fn edge(grad: &GradientField, spec: &QuantizerSpec) -> Self {
        let bins = grad
            .orientation
            .iter()
            .zip(&grad.magnitude)
            .map(|(&t, &m)| quantize_orientation(t, m, spec).map_or(NO_BIN, |b| b as u16))
            .collect();
        Self {
            width: grad.width,
            height: grad.height,
            bin_count: spec.orientation_bins,
            bins,
        }
    }

    pub fn build(img: &ImageBuffer, spec: &QuantizerSpec, mode: FeatureMode) -> Result<Self, FeatureError> {
        Ok(match mode {
            FeatureMode::Color => Self::color(img, spec),
            FeatureMode::Edge => Self::edge(&sobel_gradients(img)?, spec),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bin_count(&self) -> usize {
        self.bin_count
    }

    #[inline]
    pub fn bin(&self, x: usize, y: usize) -> Option<usize> {
        match self.bins[y * self.width + x] {
            NO_BIN => None,
            b => Some(b as usize),
        }
    }

    pub fn raw(&self) -> &[u16] {
        &self.bins
    }

    /// Unweighted bin counts over `region`, by direct pixel scan.
    pub fn count_region(&self, region: &RegionRect) -> Result<Vec<u32>, FeatureError> {
        let c = region
            .clamp_to(self.width, self.height)
            .ok_or(FeatureError::EmptyRegion)?;
        let mut counts = vec![0u32; self.bin_count];
        for y in c.y0..c.y1 {
            for &b in &self.bins[y * self.width + c.x0..y * self.width + c.x1] {
                if b != NO_BIN {
                    counts[b as usize] += 1;
                }
            }
        }
        Ok(counts)
    }

    /// Kernel-weighted histogram of `region`.
    ///
    /// Each pixel votes `K_E(|p - c| / a)` where `c` is the region centre and
    /// `a` its half-diagonal, so the kernel support just covers the rectangle.
    /// Pixels outside the image are skipped; the centre and radius come from
    /// the unclamped rectangle.
    pub fn weighted_histogram(&self, region: &RegionRect) -> Result<Histogram, FeatureError> {
        let c = region
            .clamp_to(self.width, self.height)
            .ok_or(FeatureError::EmptyRegion)?;
        let (cx, cy) = region.center();
        let radius = (region.w as f64).hypot(region.h as f64) / 2.0;
        let inv_r2 = 1.0 / (radius * radius);
        let mut mass = vec![0.0; self.bin_count];
        for y in c.y0..c.y1 {
            let dy = y as f64 + 0.5 - cy;
            for x in c.x0..c.x1 {
                if let Some(b) = self.bin(x, y) {
                    let dx = x as f64 + 0.5 - cx;
                    mass[b] += epanechnikov(((dx * dx + dy * dy) * inv_r2).sqrt());
                }
            }
        }
        Histogram::from_mass(mass).ok_or(FeatureError::AllPixelsBelowEdgeThreshold)
    }
}

/// Kernel-weighted histogram of `region` in `img`, computing the frame
/// features on the fly. Trackers that query many regions should build a
/// [`BinMap`] once instead.
pub fn weighted_region_histogram(
    img: &ImageBuffer,
    region: &RegionRect,
    spec: &QuantizerSpec,
    mode: FeatureMode,
) -> Result<Histogram, FeatureError> {
    region
        .clamp_to(img.width(), img.height())
        .ok_or(FeatureError::EmptyRegion)?;
    BinMap::build(img, spec, mode)?.weighted_histogram(region)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn hsv_reference_colors() {
        let red = rgb_to_hsv(255, 0, 0);
        assert_eq!((red.h, red.s, red.v), (0.0, 1.0, 1.0));
        let gray = rgb_to_hsv(128, 128, 128);
        assert_eq!((gray.h, gray.s), (0.0, 0.0));
        assert!(close(gray.v, 128.0 / 255.0, 1e-15));
        let green = rgb_to_hsv(0, 255, 0);
        assert_eq!((green.h, green.s, green.v), (120.0, 1.0, 1.0));
        let blue = rgb_to_hsv(0, 0, 255);
        assert_eq!(blue.h, 240.0);
        let magenta_ish = rgb_to_hsv(255, 0, 1);
        assert!(magenta_ish.h > 359.0 && magenta_ish.h < 360.0);
    }

    #[test]
    fn color_quantization() {
        let spec = QuantizerSpec::default();
        assert_eq!(quantize_color(Hsv { h: 0.0, s: 0.0, v: 0.0 }, &spec), 0);
        assert_eq!(quantize_color(Hsv { h: 359.9, s: 1.0, v: 1.0 }, &spec), 255);
        // hbin 4, sbin 4, vbin 2
        assert_eq!(quantize_color(Hsv { h: 180.0, s: 0.5, v: 0.5 }, &spec), 146);
    }

    #[test]
    fn orientation_quantization() {
        let spec = QuantizerSpec::default();
        assert_eq!(quantize_orientation(0.3, 0.0, &spec), None);
        assert_eq!(quantize_orientation(0.3, 24.9, &spec), None);
        assert_eq!(quantize_orientation(0.0, 100.0, &spec), Some(8));
        assert_eq!(quantize_orientation(-FRAC_PI_2 + 1e-9, 100.0, &spec), Some(0));
        assert_eq!(quantize_orientation(FRAC_PI_2, 100.0, &spec), Some(15));
    }

    #[test]
    fn kernel_profile() {
        assert_eq!(epanechnikov(0.0), 1.0);
        assert_eq!(epanechnikov(1.0), 0.0);
        assert_eq!(epanechnikov(0.5), 0.75);
        assert_eq!(epanechnikov(3.0), 0.0);
    }

    #[test]
    fn sobel_constant_image_is_flat() {
        let img = ImageBuffer::filled(5, 4, [90, 30, 200]).unwrap();
        let g = sobel_gradients(&img).unwrap();
        assert!(g.magnitude.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn sobel_horizontal_step() {
        let mut img = ImageBuffer::filled(3, 3, [0, 0, 0]).unwrap();
        for x in 0..3 {
            img.set_pixel(x, 2, [255, 255, 255]);
        }
        let g = sobel_gradients(&img).unwrap();
        let c = 4;
        assert!(close(g.gy[c], 1020.0, 1e-9));
        assert_eq!(g.gx[c], 0.0);
        assert_eq!(g.orientation[c], FRAC_PI_2);
    }

    #[test]
    fn sobel_vertical_step() {
        let mut img = ImageBuffer::filled(6, 5, [10, 10, 10]).unwrap();
        for y in 0..5 {
            for x in 3..6 {
                img.set_pixel(x, y, [200, 200, 200]);
            }
        }
        let g = sobel_gradients(&img).unwrap();
        for y in 1..4 {
            let i = y * 6 + 3;
            assert_eq!(g.gy[i], 0.0);
            assert!(g.gx[i] > 0.0);
            assert_eq!(g.orientation[i], 0.0);
        }
    }

    #[test]
    fn sobel_too_small() {
        let img = ImageBuffer::filled(2, 5, [0, 0, 0]).unwrap();
        assert_eq!(
            sobel_gradients(&img),
            Err(FeatureError::ImageTooSmall { width: 2, height: 5 })
        );
    }

    #[test]
    fn single_color_region_is_a_delta() {
        let img = ImageBuffer::filled(10, 10, [200, 40, 40]).unwrap();
        let spec = QuantizerSpec::default();
        let h = weighted_region_histogram(&img, &RegionRect::new(2, 2, 5, 4), &spec, FeatureMode::Color).unwrap();
        let bin = quantize_color(rgb_to_hsv(200, 40, 40), &spec);
        assert!(close(h.bins()[bin], 1.0, 1e-12));
        assert!(close(h.bins().iter().sum::<f64>(), 1.0, 1e-12));
    }

    #[test]
    fn weighted_histogram_errors() {
        let img = ImageBuffer::filled(10, 10, [1, 2, 3]).unwrap();
        let spec = QuantizerSpec::default();
        assert_eq!(
            weighted_region_histogram(&img, &RegionRect::new(20, 20, 3, 3), &spec, FeatureMode::Color),
            Err(FeatureError::EmptyRegion)
        );
        assert_eq!(
            weighted_region_histogram(&img, &RegionRect::new(1, 1, 5, 5), &spec, FeatureMode::Edge),
            Err(FeatureError::AllPixelsBelowEdgeThreshold)
        );
    }

    fn random_image(w: usize, h: usize, bytes: &[u8]) -> ImageBuffer {
        let data = bytes.iter().copied().cycle().take(w * h * 3).collect();
        ImageBuffer::new(w, h, data).unwrap()
    }

    proptest! {
        #[test]
        fn quantize_color_is_total(h in 0.0f64..360.0, s in 0.0f64..=1.0, v in 0.0f64..=1.0) {
            let spec = QuantizerSpec::default();
            let bin = quantize_color(Hsv { h, s, v }, &spec);
            prop_assert!(bin < spec.color_bins());
        }

        #[test]
        fn kernel_is_monotone(a in 0.0f64..2.0, b in 0.0f64..2.0) {
            let (near, far) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(epanechnikov(near) >= epanechnikov(far));
        }

        #[test]
        fn sobel_mirror_symmetry(w in 3usize..12, h in 3usize..12, bytes in prop::collection::vec(any::<u8>(), 16..64)) {
            let img = random_image(w, h, &bytes);
            let g = sobel_gradients(&img).unwrap();
            let m = sobel_gradients(&img.mirrored()).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let j = y * w + (w - 1 - x);
                    prop_assert!((g.magnitude[i] - m.magnitude[j]).abs() < 1e-9);
                    prop_assert!((g.gx[i] + m.gx[j]).abs() < 1e-9);
                    prop_assert!((g.gy[i] - m.gy[j]).abs() < 1e-9);
                    if g.gx[i].abs() > 1e-6 {
                        prop_assert!((g.orientation[i] + m.orientation[j]).abs() < 1e-9);
                    }
                }
            }
        }

        #[test]
        fn weighted_histograms_are_distributions(
            bytes in prop::collection::vec(any::<u8>(), 32..200),
            x in -4i64..14, y in -4i64..14, w in 1i64..12, h in 1i64..12,
        ) {
            let img = random_image(16, 16, &bytes);
            let spec = QuantizerSpec { magnitude_threshold: 1.0, ..QuantizerSpec::default() };
            let region = RegionRect::new(x, y, w, h);
            for mode in [FeatureMode::Color, FeatureMode::Edge] {
                match weighted_region_histogram(&img, &region, &spec, mode) {
                    Ok(hist) => {
                        prop_assert!(hist.bins().iter().all(|&b| b >= 0.0));
                        prop_assert!((hist.bins().iter().sum::<f64>() - 1.0).abs() < 1e-9);
                    }
                    Err(FeatureError::EmptyRegion) => prop_assert!(region.clamp_to(16, 16).is_none()),
                    Err(FeatureError::AllPixelsBelowEdgeThreshold) => prop_assert_eq!(mode, FeatureMode::Edge),
                    Err(e) => prop_assert!(false, "unexpected {e}"),
                }
            }
        }
    }
}
