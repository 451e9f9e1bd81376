//! Fused color/edge particle tracker.
//!
//! Each particle carries the window centre and scale at the current and the
//! previous frame, `[cx, cy, s, cx', cy', s']`, so the second-order motion
//! model has the two-frame history it needs.
//!
//! Random number consumption is fixed: one `ChaCha8Rng` seeded from
//! [`TrackerConfig::seed`]; three normal draws per particle (cx, cy, scale) for
//! the initial cloud; then per frame three normal draws per particle for
//! propagation followed by one `u64` resampling seed.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{BinMap, FeatureError, FeatureMode, QuantizerSpec};
use crate::filter::{self, FilterError, Particle, ParticleSet, ResampleConfig, ResampleStrategy};
use crate::histogram::{
    color_likelihood, edge_likelihood, Histogram, HistogramError, IntegralHistogram, LikelihoodParams,
};
use crate::image::{ImageBuffer, RegionRect};

/// Allowed range of the window scale.
pub const SCALE_RANGE: (f64, f64) = (0.2, 5.0);

/// Dimension of the particle state.
pub const STATE_DIM: usize = 6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrackerError {
    #[error("invalid tracker configuration: {0}")]
    InvalidConfig(String),
    #[error("initial region {0:?} does not overlap the first frame")]
    EmptyInitialRegion(RegionRect),
    #[error("frame {index} is {width}x{height}, expected {expected_width}x{expected_height}")]
    FrameSize {
        index: usize,
        width: usize,
        height: usize,
        expected_width: usize,
        expected_height: usize,
    },
    #[error("target lost at frame {0}")]
    TargetLost(usize),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Histogram(#[from] HistogramError),
}

/// Window centre in pixels and scale relative to the initial window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetState {
    pub cx: f64,
    pub cy: f64,
    pub scale: f64,
}

impl TargetState {
    pub fn new(cx: f64, cy: f64, scale: f64) -> Self {
        Self {
            cx,
            cy,
            scale: clamp_scale(scale),
        }
    }

    /// Window of size `scale * window0` centred on the state.
    pub fn region(&self, window0: (f64, f64)) -> RegionRect {
        RegionRect::centered(self.cx, self.cy, window0.0 * self.scale, window0.1 * self.scale)
    }
}

fn clamp_scale(s: f64) -> f64 {
    if s.is_nan() {
        1.0
    } else {
        s.clamp(SCALE_RANGE.0, SCALE_RANGE.1)
    }
}

/// Packs current and previous states into a particle state vector.
pub fn pack_state(current: &TargetState, previous: &TargetState) -> Vec<f64> {
    vec![
        current.cx,
        current.cy,
        current.scale,
        previous.cx,
        previous.cy,
        previous.scale,
    ]
}

/// Inverse of [`pack_state`]: `(current, previous)`.
pub fn unpack_state(state: &[f64]) -> (TargetState, TargetState) {
    (
        TargetState {
            cx: state[0],
            cy: state[1],
            scale: state[2],
        },
        TargetState {
            cx: state[3],
            cy: state[4],
            scale: state[5],
        },
    )
}

/// Second-order autoregressive motion `c_t = φ1 c_{t-1} + φ2 c_{t-2} + ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotionModel {
    pub phi1: f64,
    pub phi2: f64,
    pub noise_std_pos: f64,
    pub noise_std_scale: f64,
}

impl Default for MotionModel {
    fn default() -> Self {
        Self {
            phi1: 2.0,
            phi2: -1.0,
            noise_std_pos: 8.0,
            noise_std_scale: 0.02,
        }
    }
}

impl MotionModel {
    /// Whether the coefficients lie inside the AR(2) stationarity triangle.
    /// The constant-velocity default `(2, -1)` sits on its boundary.
    pub fn is_stationary(&self) -> bool {
        self.phi1 + self.phi2 < 1.0 && self.phi2 - self.phi1 < 1.0 && self.phi2.abs() < 1.0
    }

    /// One step from `(previous, before_previous)` with noise `[ε_x, ε_y, ε_s]`.
    pub fn propagate(&self, previous: &TargetState, before: &TargetState, noise: [f64; 3]) -> TargetState {
        let step = |a: f64, b: f64, e: f64| self.phi1 * a + self.phi2 * b + e;
        TargetState::new(
            step(previous.cx, before.cx, noise[0]),
            step(previous.cy, before.cy, noise[1]),
            step(previous.scale, before.scale, noise[2]),
        )
    }

    fn distributions(&self, pos_factor: f64) -> (Normal<f64>, Normal<f64>) {
        (
            Normal::new(0.0, self.noise_std_pos * pos_factor).expect("validated std"),
            Normal::new(0.0, self.noise_std_scale).expect("validated std"),
        )
    }

    fn validate(&self) -> Result<(), TrackerError> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !self.phi1.is_finite() || !self.phi2.is_finite() {
            return Err(TrackerError::InvalidConfig("motion coefficients must be finite".into()));
        }
        if !ok(self.noise_std_pos) || !ok(self.noise_std_scale) {
            return Err(TrackerError::InvalidConfig("motion noise must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Reference histograms and fusion state of the tracked target.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTemplate {
    pub color_initial: Histogram,
    pub color_current: Histogram,
    pub edge_initial: Histogram,
    pub edge_current: Histogram,
    pub theta_color: f64,
    pub theta_edge: f64,
    pub tau_inv: f64,
    /// Weighted particle spread measured on the first frame.
    pub spread_baseline: f64,
    pub window0: (f64, f64),
}

impl TargetTemplate {
    pub fn new(color: Histogram, edge: Histogram, theta_color: f64, tau_inv: f64, window0: (f64, f64)) -> Self {
        Self {
            color_initial: color.clone(),
            color_current: color,
            edge_initial: edge.clone(),
            edge_current: edge,
            theta_color,
            theta_edge: 1.0 - theta_color,
            tau_inv,
            spread_baseline: 0.0,
            window0,
        }
    }

    /// Moves the fusion weights toward `ρ_l / (ρ_l + ρ_m)` by exponential
    /// smoothing with factor `alpha`. No change when both similarities are 0.
    pub fn adapt_fusion(&mut self, rho_color: f64, rho_edge: f64, alpha: f64) {
        let total = rho_color + rho_edge;
        if !(total > 0.0) {
            return;
        }
        let raw = rho_color / total;
        let theta_color = alpha * self.theta_color + (1.0 - alpha) * raw;
        let theta_edge = alpha * self.theta_edge + (1.0 - alpha) * (1.0 - raw);
        let sum = theta_color + theta_edge;
        self.theta_color = theta_color / sum;
        self.theta_edge = 1.0 - self.theta_color;
    }

    /// Blends the current template toward the observed histograms, anchored to
    /// the first-frame template: `H = τ⁻¹ H_initial + (1 - τ⁻¹) H_observed`.
    pub fn update(&mut self, color: &Histogram, edge: Option<&Histogram>) -> Result<(), HistogramError> {
        self.color_current = Histogram::blend(&self.color_initial, color, self.tau_inv)?;
        if let Some(edge) = edge {
            self.edge_current = Histogram::blend(&self.edge_initial, edge, self.tau_inv)?;
        }
        Ok(())
    }
}

/// Similarities of one candidate window against the template.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureScores {
    pub d_color: f64,
    pub rho_color: f64,
    /// 0 when the candidate has no edge pixels.
    pub rho_edge: f64,
}

/// `θ_l p_color(d_l) + θ_m p_edge(ρ_m)`.
///
/// `edge` is `None` when the candidate window has no edge pixels; the edge term
/// then takes its `ρ_m = 0` value. The edge term is skipped entirely when
/// `θ_m = 0`. With `normalize_peaks` each likelihood is divided by its maximum
/// before fusion.
pub fn fused_likelihood(
    color: &Histogram,
    edge: Option<&Histogram>,
    template: &TargetTemplate,
    params: &LikelihoodParams,
    normalize_peaks: bool,
) -> Result<f64, HistogramError> {
    let d = color.bhattacharyya_distance(&template.color_current)?;
    let mut p_color = color_likelihood(d, params);
    if normalize_peaks {
        p_color /= params.color_peak();
    }
    let mut fused = template.theta_color * p_color;
    if template.theta_edge != 0.0 {
        let rho = match edge {
            Some(e) => e.bhattacharyya_coefficient(&template.edge_current)?,
            None => {
                debug!("candidate window has no edge pixels");
                0.0
            }
        };
        let mut p_edge = edge_likelihood(rho, params);
        if normalize_peaks {
            p_edge /= params.edge_peak();
        }
        fused += template.theta_edge * p_edge;
    }
    Ok(fused)
}

/// SIS update of the particle weights with fused likelihoods.
pub fn update_particle_weights(set: &ParticleSet, fused: &[f64]) -> Result<ParticleSet, FilterError> {
    set.weight_update(fused)
}

/// Weighted mean distance of the particle centres from `estimate`.
pub fn particle_spread(set: &ParticleSet, estimate: &TargetState) -> f64 {
    set.particles()
        .iter()
        .map(|p| p.weight * (p.state[0] - estimate.cx).hypot(p.state[1] - estimate.cy))
        .sum()
}

/// Rescales `estimate` by the spread ratio `D_t / D_0`, clamped to `clamp`.
pub fn adapt_window(set: &ParticleSet, estimate: &TargetState, spread_baseline: f64, clamp: [f64; 2]) -> TargetState {
    let spread = particle_spread(set, estimate);
    let ratio = if spread_baseline > 0.0 && spread.is_finite() {
        spread / spread_baseline
    } else {
        1.0
    };
    TargetState::new(estimate.cx, estimate.cy, estimate.scale * ratio.clamp(clamp[0], clamp[1]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub particle_count: usize,
    pub strategy: ResampleStrategy,
    pub resample: ResampleConfig,
    pub likelihood: LikelihoodParams,
    pub quantizer: QuantizerSpec,
    pub motion: MotionModel,
    pub tau_inv: f64,
    pub fusion_smoothing: f64,
    pub scale_clamp: [f64; 2],
    /// Integral-histogram queries instead of kernel-weighted histograms.
    pub fast_histogram: bool,
    pub seed: u64,
    pub initial_theta_color: f64,
    pub adapt_fusion: bool,
    pub adapt_window: bool,
    pub update_template: bool,
    pub normalize_likelihood_peaks: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            particle_count: 100,
            strategy: ResampleStrategy::Improved,
            resample: ResampleConfig::default(),
            likelihood: LikelihoodParams::default(),
            quantizer: QuantizerSpec::default(),
            motion: MotionModel::default(),
            tau_inv: 0.1,
            fusion_smoothing: 0.7,
            scale_clamp: [0.95, 1.05],
            fast_histogram: true,
            seed: 0,
            initial_theta_color: 0.5,
            adapt_fusion: true,
            adapt_window: true,
            update_template: true,
            normalize_likelihood_peaks: false,
        }
    }
}

impl TrackerConfig {
    pub fn from_json(text: &str) -> Result<Self, TrackerError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| TrackerError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Color-only variant: edge weight fixed at zero.
    pub fn color_only(mut self) -> Self {
        self.initial_theta_color = 1.0;
        self.adapt_fusion = false;
        self
    }

    pub fn validate(&self) -> Result<(), TrackerError> {
        let invalid = |msg: &str| Err(TrackerError::InvalidConfig(msg.into()));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.particle_count == 0 {
            return invalid("particle_count must be >= 1");
        }
        if !unit(self.tau_inv) {
            return invalid("tau_inv must be in [0, 1]");
        }
        if !unit(self.fusion_smoothing) {
            return invalid("fusion_smoothing must be in [0, 1]");
        }
        if !unit(self.initial_theta_color) {
            return invalid("initial_theta_color must be in [0, 1]");
        }
        let [lo, hi] = self.scale_clamp;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0 && hi.is_finite()) {
            return invalid("scale_clamp must satisfy 0 < lo <= 1 <= hi");
        }
        let [sc, se] = [self.likelihood.sigma_color, self.likelihood.sigma_edge];
        if !(sc > 0.0 && se > 0.0 && sc.is_finite() && se.is_finite()) {
            return invalid("likelihood sigmas must be > 0");
        }
        self.motion.validate()?;
        self.quantizer.validate()?;
        self.resample.validate()?;
        Ok(())
    }
}

/// Per-frame feature maps, with integral tables on the fast path.
pub struct FrameFeatures {
    color_map: BinMap,
    edge_map: BinMap,
    integral: Option<(IntegralHistogram, IntegralHistogram)>,
}

impl FrameFeatures {
    pub fn new(frame: &ImageBuffer, quantizer: &QuantizerSpec, fast: bool) -> Result<Self, FeatureError> {
        Self::reuse(None, frame, quantizer, fast)
    }

    /// Like [`FrameFeatures::new`], rebuilding the integral tables of `spare`
    /// in place when it has them.
    pub fn reuse(spare: Option<Self>, frame: &ImageBuffer, quantizer: &QuantizerSpec, fast: bool) -> Result<Self, FeatureError> {
        let color_map = BinMap::build(frame, quantizer, FeatureMode::Color)?;
        let edge_map = BinMap::build(frame, quantizer, FeatureMode::Edge)?;
        let integral = fast.then(|| match spare.and_then(|s| s.integral) {
            Some((mut color, mut edge)) => {
                color.rebuild(&color_map, *quantizer, FeatureMode::Color);
                edge.rebuild(&edge_map, *quantizer, FeatureMode::Edge);
                (color, edge)
            }
            None => (
                IntegralHistogram::build(&color_map, *quantizer, FeatureMode::Color),
                IntegralHistogram::build(&edge_map, *quantizer, FeatureMode::Edge),
            ),
        });
        Ok(Self {
            color_map,
            edge_map,
            integral,
        })
    }

    /// `None` when the window misses the image.
    pub fn color_histogram(&self, region: &RegionRect) -> Option<Histogram> {
        match &self.integral {
            Some((color, _)) => color.query(region).ok(),
            None => self.color_map.weighted_histogram(region).ok(),
        }
    }

    /// `None` when the window misses the image or has no edge pixels.
    pub fn edge_histogram(&self, region: &RegionRect) -> Option<Histogram> {
        match &self.integral {
            Some((_, edge)) => edge.query(region).ok(),
            None => self.edge_map.weighted_histogram(region).ok(),
        }
    }

    pub fn scores(&self, region: &RegionRect, template: &TargetTemplate) -> Option<(FeatureScores, Histogram, Option<Histogram>)> {
        let color = self.color_histogram(region)?;
        let edge = self.edge_histogram(region);
        let rho_color = color.bhattacharyya_coefficient(&template.color_current).ok()?;
        let rho_edge = match &edge {
            Some(e) => e.bhattacharyya_coefficient(&template.edge_current).ok()?,
            None => 0.0,
        };
        let scores = FeatureScores {
            d_color: (1.0 - rho_color).max(0.0).sqrt(),
            rho_color,
            rho_edge,
        };
        Some((scores, color, edge))
    }
}

/// Tracker output for one frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame: usize,
    pub state: TargetState,
    /// Reported window size in pixels.
    pub width: f64,
    pub height: f64,
    pub ess: f64,
    pub theta_color: f64,
    pub d_color: f64,
    pub rho_edge: f64,
    pub resampled: bool,
    pub lost: bool,
}

impl FrameResult {
    pub fn rect(&self) -> RegionRect {
        RegionRect::centered(self.state.cx, self.state.cy, self.width, self.height)
    }
}

pub struct Tracker {
    cfg: TrackerConfig,
    template: TargetTemplate,
    set: ParticleSet,
    posterior_weights: Vec<f64>,
    rng: ChaCha8Rng,
    frame_size: (usize, usize),
    last_estimate: TargetState,
    lost_streak: u32,
    frame_index: usize,
    spare: Option<FrameFeatures>,
}

impl Tracker {
    /// Builds the template from `init` on `frame0` and scatters the initial
    /// particle cloud around its centre.
    pub fn new(cfg: TrackerConfig, frame0: &ImageBuffer, init: RegionRect) -> Result<Self, TrackerError> {
        cfg.validate()?;
        if !cfg.motion.is_stationary() {
            warn!(
                "motion coefficients ({}, {}) are outside the AR(2) stationary region",
                cfg.motion.phi1, cfg.motion.phi2
            );
        }
        if init.clamp_to(frame0.width(), frame0.height()).is_none() {
            return Err(TrackerError::EmptyInitialRegion(init));
        }
        let features = FrameFeatures::new(frame0, &cfg.quantizer, cfg.fast_histogram)?;
        let color = features
            .color_map
            .weighted_histogram(&init)
            .map_err(|_| TrackerError::EmptyInitialRegion(init))?;
        let edge = features
            .edge_map
            .weighted_histogram(&init)
            .unwrap_or_else(|_| Histogram::uniform(cfg.quantizer.orientation_bins));
        let window0 = (init.w as f64, init.h as f64);
        let mut template = TargetTemplate::new(color, edge, cfg.initial_theta_color, cfg.tau_inv, window0);

        let (cx, cy) = init.center();
        let start = TargetState::new(cx, cy, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (pos, scale) = cfg.motion.distributions(1.0);
        let states: Vec<Vec<f64>> = (0..cfg.particle_count)
            .map(|_| {
                let s = TargetState::new(
                    cx + pos.sample(&mut rng),
                    cy + pos.sample(&mut rng),
                    1.0 + scale.sample(&mut rng),
                );
                pack_state(&s, &s)
            })
            .collect();
        let set = ParticleSet::uniform(states)?;

        let likelihoods = evaluate_particles(&set, &features, &template, &cfg);
        let weighted = set.weight_update(&likelihoods).unwrap_or_else(|_| set.clone());
        template.spread_baseline = particle_spread(&weighted, &start);
        debug!("initial spread baseline {:.3}", template.spread_baseline);

        Ok(Self {
            posterior_weights: set.weights(),
            cfg,
            template,
            set,
            rng,
            frame_size: (frame0.width(), frame0.height()),
            last_estimate: start,
            lost_streak: 0,
            frame_index: 0,
            spare: Some(features),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.cfg
    }

    pub fn template(&self) -> &TargetTemplate {
        &self.template
    }

    /// Particle set at the end of the last frame (after any resampling).
    pub fn particles(&self) -> &ParticleSet {
        &self.set
    }

    /// Normalized weights right after the last likelihood update.
    pub fn posterior_weights(&self) -> &[f64] {
        &self.posterior_weights
    }

    /// Result record for the first frame.
    pub fn initial_result(&self) -> FrameResult {
        FrameResult {
            frame: 0,
            state: self.last_estimate,
            width: self.template.window0.0,
            height: self.template.window0.1,
            ess: self.set.len() as f64,
            theta_color: self.template.theta_color,
            d_color: 0.0,
            rho_edge: 1.0,
            resampled: false,
            lost: false,
        }
    }

    pub fn track_frame(&mut self, frame: &ImageBuffer) -> Result<FrameResult, TrackerError> {
        self.frame_index += 1;
        let index = self.frame_index;
        if (frame.width(), frame.height()) != self.frame_size {
            return Err(TrackerError::FrameSize {
                index,
                width: frame.width(),
                height: frame.height(),
                expected_width: self.frame_size.0,
                expected_height: self.frame_size.1,
            });
        }
        let cfg = self.cfg.clone();
        let features = FrameFeatures::reuse(self.spare.take(), frame, &cfg.quantizer, cfg.fast_histogram)?;

        let prior = self.propagate();
        let likelihoods = evaluate_particles(&prior, &features, &self.template, &cfg);
        let posterior = match update_particle_weights(&prior, &likelihoods) {
            Ok(p) => p,
            Err(FilterError::AllZeroWeights) => {
                let _ = self.rng.random::<u64>();
                return self.recover(index);
            }
            Err(e) => return Err(e.into()),
        };
        self.lost_streak = 0;
        self.posterior_weights = posterior.weights();

        let mean = posterior.estimate()?;
        let estimate = TargetState::new(mean[0], mean[1], mean[2]);
        let ess = posterior.effective_sample_size()?;
        let resample_seed = self.rng.random::<u64>();
        let resampled = cfg.resample.should_resample(&posterior)?;
        self.set = if resampled {
            let template = &self.template;
            let weight_fn = |s: &[f64]| state_likelihood(s, &features, template, &cfg);
            filter::resample(&posterior, cfg.strategy, &cfg.resample, weight_fn, resample_seed)?
        } else {
            posterior.clone()
        };

        let observed = features.scores(&estimate.region(self.template.window0), &self.template);
        if cfg.adapt_fusion {
            if let Some((scores, _, _)) = &observed {
                self.template
                    .adapt_fusion(scores.rho_color, scores.rho_edge, cfg.fusion_smoothing);
            }
        }
        let reported = if cfg.adapt_window {
            adapt_window(&posterior, &estimate, self.template.spread_baseline, cfg.scale_clamp)
        } else {
            estimate
        };
        if cfg.update_template && ess > posterior.len() as f64 / 2.0 {
            if let Some((_, color, edge)) = &observed {
                self.template.update(color, edge.as_ref())?;
            }
        }
        self.last_estimate = estimate;
        self.spare = Some(features);

        let (d_color, rho_edge) = observed.map_or((1.0, 0.0), |(s, _, _)| (s.d_color, s.rho_edge));
        Ok(FrameResult {
            frame: index,
            state: estimate,
            width: self.template.window0.0 * reported.scale,
            height: self.template.window0.1 * reported.scale,
            ess,
            theta_color: self.template.theta_color,
            d_color,
            rho_edge,
            resampled,
            lost: false,
        })
    }

    fn propagate(&mut self) -> ParticleSet {
        let (pos, scale) = self.cfg.motion.distributions(1.0);
        let motion = self.cfg.motion;
        let rng = &mut self.rng;
        let particles = self
            .set
            .particles()
            .iter()
            .map(|p| {
                let (current, previous) = unpack_state(&p.state);
                let noise = [pos.sample(rng), pos.sample(rng), scale.sample(rng)];
                let next = motion.propagate(&current, &previous, noise);
                Particle::new(pack_state(&next, &current), p.weight)
            })
            .collect();
        ParticleSet::new(particles).expect("propagation keeps weights valid")
    }

    /// Every particle scored zero: re-scatter around the last estimate, or
    /// give up if the previous frame was also lost.
    fn recover(&mut self, index: usize) -> Result<FrameResult, TrackerError> {
        self.lost_streak += 1;
        if self.lost_streak >= 2 {
            return Err(TrackerError::TargetLost(index));
        }
        warn!("all particle likelihoods vanished at frame {index}; re-diffusing");
        let (pos, scale) = self.cfg.motion.distributions(2.0);
        let last = self.last_estimate;
        let states: Vec<Vec<f64>> = (0..self.cfg.particle_count)
            .map(|_| {
                let s = TargetState::new(
                    last.cx + pos.sample(&mut self.rng),
                    last.cy + pos.sample(&mut self.rng),
                    last.scale + scale.sample(&mut self.rng),
                );
                pack_state(&s, &s)
            })
            .collect();
        self.set = ParticleSet::uniform(states)?;
        self.posterior_weights = self.set.weights();
        Ok(FrameResult {
            frame: index,
            state: last,
            width: self.template.window0.0 * last.scale,
            height: self.template.window0.1 * last.scale,
            ess: self.set.len() as f64,
            theta_color: self.template.theta_color,
            d_color: 1.0,
            rho_edge: 0.0,
            resampled: false,
            lost: true,
        })
    }
}

fn state_likelihood(state: &[f64], features: &FrameFeatures, template: &TargetTemplate, cfg: &TrackerConfig) -> f64 {
    let (current, _) = unpack_state(state);
    let region = current.region(template.window0);
    let Some(color) = features.color_histogram(&region) else {
        return 0.0;
    };
    let edge = if template.theta_edge != 0.0 {
        features.edge_histogram(&region)
    } else {
        None
    };
    fused_likelihood(&color, edge.as_ref(), template, &cfg.likelihood, cfg.normalize_likelihood_peaks)
        .unwrap_or(0.0)
}

fn evaluate_particles(set: &ParticleSet, features: &FrameFeatures, template: &TargetTemplate, cfg: &TrackerConfig) -> Vec<f64> {
    set.particles()
        .par_iter()
        .map(|p| state_likelihood(&p.state, features, template, cfg))
        .collect()
}

/// Runs a tracker over `frames`, the first of which holds the target in `init`.
pub fn track_frames<'a, I>(cfg: &TrackerConfig, mut frames: I, init: RegionRect) -> Result<Vec<FrameResult>, TrackerError>
where
    I: Iterator<Item = &'a ImageBuffer>,
{
    let Some(first) = frames.next() else {
        return Ok(Vec::new());
    };
    let mut tracker = Tracker::new(cfg.clone(), first, init)?;
    let mut results = vec![tracker.initial_result()];
    for frame in frames {
        results.push(tracker.track_frame(frame)?);
    }
    Ok(results)
}
