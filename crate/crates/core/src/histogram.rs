//! Histograms, integral histograms, Bhattacharyya similarity and the
//! color/edge observation likelihoods.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{BinMap, FeatureMode, QuantizerSpec};
use crate::image::RegionRect;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HistogramError {
    #[error("histograms have {0} and {1} bins")]
    DimensionMismatch(usize, usize),
    #[error("region is empty after clamping to the image")]
    EmptyRegion,
    #[error("region contains no counted pixels")]
    ZeroCount,
}

/// Normalized `M`-bin distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    bins: Vec<f64>,
}

impl Histogram {
    /// Normalizes nonnegative mass. `None` if the total is zero or not finite.
    pub fn from_mass(mass: Vec<f64>) -> Option<Self> {
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) || !total.is_finite() || mass.iter().any(|&m| m < 0.0) {
            return None;
        }
        Some(Self {
            bins: mass.into_iter().map(|m| m / total).collect(),
        })
    }

    pub fn from_counts(counts: &[u32]) -> Option<Self> {
        Self::from_mass(counts.iter().map(|&c| c as f64).collect())
    }

    pub fn uniform(m: usize) -> Self {
        Self {
            bins: vec![1.0 / m as f64; m],
        }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    fn check_dims(&self, other: &Self) -> Result<(), HistogramError> {
        if self.len() != other.len() {
            return Err(HistogramError::DimensionMismatch(self.len(), other.len()));
        }
        Ok(())
    }

    /// `ρ = Σ √(p q)`, clamped to `[0, 1]` against rounding.
    pub fn bhattacharyya_coefficient(&self, other: &Self) -> Result<f64, HistogramError> {
        self.check_dims(other)?;
        let rho: f64 = self
            .bins
            .iter()
            .zip(&other.bins)
            .map(|(p, q)| (p * q).sqrt())
            .sum();
        Ok(rho.clamp(0.0, 1.0))
    }

    /// `d = √(1 - ρ)`.
    pub fn bhattacharyya_distance(&self, other: &Self) -> Result<f64, HistogramError> {
        Ok((1.0 - self.bhattacharyya_coefficient(other)?).sqrt())
    }

    /// `tau_inv * anchor + (1 - tau_inv) * current`, renormalized.
    pub fn blend(anchor: &Self, current: &Self, tau_inv: f64) -> Result<Self, HistogramError> {
        anchor.check_dims(current)?;
        let mass = anchor
            .bins
            .iter()
            .zip(&current.bins)
            .map(|(a, c)| tau_inv * a + (1.0 - tau_inv) * c)
            .collect();
        Ok(Self::from_mass(mass).unwrap_or_else(|| anchor.clone()))
    }

    /// Debug dump as `bin,value` CSV.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "bin,value")?;
        for (i, v) in self.bins.iter().enumerate() {
            writeln!(out, "{i},{v}")?;
        }
        Ok(())
    }
}

pub fn bhattacharyya_coefficient(p: &Histogram, q: &Histogram) -> Result<f64, HistogramError> {
    p.bhattacharyya_coefficient(q)
}

pub fn bhattacharyya_distance(p: &Histogram, q: &Histogram) -> Result<f64, HistogramError> {
    p.bhattacharyya_distance(q)
}

/// Per-bin cumulative counts.
///
/// Entry `(x, y, n)` holds the number of pixels with bin `n` in
/// `[0, x) x [0, y)`. The table is pixel-major: the `M` counters of one
/// corner are contiguous, so a query touches four contiguous runs. Building
/// costs one increment per pixel plus `(W+1)(H+1)M` additions; memory is
/// `4 (W+1)(H+1)M` bytes.
#[derive(Debug, Clone)]
pub struct IntegralHistogram {
    width: usize,
    height: usize,
    bin_count: usize,
    mode: FeatureMode,
    quantizer: QuantizerSpec,
    table: Vec<u32>,
}

impl IntegralHistogram {
    pub fn build(map: &BinMap, quantizer: QuantizerSpec, mode: FeatureMode) -> Self {
        let mut ih = Self {
            width: 0,
            height: 0,
            bin_count: 0,
            mode,
            quantizer,
            table: Vec::new(),
        };
        ih.rebuild(map, quantizer, mode);
        ih
    }

    /// Rebuilds the table for a new map, reusing the allocation. Faulting in
    /// fresh pages costs more than filling them, so per-frame callers should
    /// keep one table alive.
    pub fn rebuild(&mut self, map: &BinMap, quantizer: QuantizerSpec, mode: FeatureMode) {
        let (w, h, m) = (map.width(), map.height(), map.bin_count());
        let stride = (w + 1) * m;
        self.table.resize((h + 1) * stride, 0);
        self.table[..stride].fill(0);
        let mut row = vec![0u32; m];
        let raw = map.raw();
        for y in 0..h {
            row.fill(0);
            let (above, below) = self.table.split_at_mut((y + 1) * stride);
            let above = &above[y * stride..];
            let current = &mut below[..stride];
            current[..m].fill(0);
            for x in 0..w {
                let b = raw[y * w + x];
                if (b as usize) < m {
                    row[b as usize] += 1;
                }
                let off = (x + 1) * m;
                for ((dst, up), r) in current[off..off + m].iter_mut().zip(&above[off..off + m]).zip(&row) {
                    *dst = up + r;
                }
            }
        }
        self.width = w;
        self.height = h;
        self.bin_count = m;
        self.mode = mode;
        self.quantizer = quantizer;
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

    pub fn mode(&self) -> FeatureMode {
        self.mode
    }

    pub fn quantizer(&self) -> &QuantizerSpec {
        &self.quantizer
    }

    /// Cumulative counts at corner `(x, y)`, `0 <= x <= W`, `0 <= y <= H`.
    pub fn entry(&self, x: usize, y: usize) -> &[u32] {
        let off = (y * (self.width + 1) + x) * self.bin_count;
        &self.table[off..off + self.bin_count]
    }

    /// Exact counts in `region` by four-corner inclusion-exclusion.
    pub fn query_counts(&self, region: &RegionRect) -> Result<Vec<u32>, HistogramError> {
        let c = region
            .clamp_to(self.width, self.height)
            .ok_or(HistogramError::EmptyRegion)?;
        let (a, b) = (self.entry(c.x1, c.y1), self.entry(c.x0, c.y1));
        let (d, e) = (self.entry(c.x1, c.y0), self.entry(c.x0, c.y0));
        Ok((0..self.bin_count)
            .map(|n| (a[n] - b[n]) - (d[n] - e[n]))
            .collect())
    }

    /// Normalized unweighted histogram of `region`.
    pub fn query(&self, region: &RegionRect) -> Result<Histogram, HistogramError> {
        Histogram::from_counts(&self.query_counts(region)?).ok_or(HistogramError::ZeroCount)
    }
}

pub fn build_integral_histogram(map: &BinMap, quantizer: QuantizerSpec, mode: FeatureMode) -> IntegralHistogram {
    IntegralHistogram::build(map, quantizer, mode)
}

pub fn region_histogram_query(ih: &IntegralHistogram, region: &RegionRect) -> Result<Histogram, HistogramError> {
    ih.query(region)
}

/// Gaussian widths of the two observation likelihoods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LikelihoodParams {
    pub sigma_color: f64,
    pub sigma_edge: f64,
}

impl Default for LikelihoodParams {
    fn default() -> Self {
        Self {
            sigma_color: 0.2,
            sigma_edge: 0.3,
        }
    }
}

impl LikelihoodParams {
    pub fn color_peak(&self) -> f64 {
        1.0 / ((2.0 * PI).sqrt() * self.sigma_color)
    }

    pub fn edge_peak(&self) -> f64 {
        1.0 / ((2.0 * PI).sqrt() * self.sigma_edge)
    }
}

/// `exp(-d² / 2σ²) / (√(2π) σ)` on the color Bhattacharyya distance.
pub fn color_likelihood(d: f64, params: &LikelihoodParams) -> f64 {
    let s = params.sigma_color;
    params.color_peak() * (-(d * d) / (2.0 * s * s)).exp()
}

/// `exp(-(1 - ρ) / 2σ²) / (√(2π) σ)` on the edge Bhattacharyya coefficient.
/// The exponent is linear in `1 - ρ`.
pub fn edge_likelihood(rho: f64, params: &LikelihoodParams) -> f64 {
    let s = params.sigma_edge;
    params.edge_peak() * (-(1.0 - rho) / (2.0 * s * s)).exp()
}
