//! Sequential importance sampling particle filter.
//!
//! A [`ParticleSet`] is a weighted cloud of equal-dimension state vectors.
//! Operations take a set by reference and return a new one, so a set can be
//! shared freely between threads. Every stochastic operation takes an explicit
//! `u64` seed.
//!
//! Two resampling strategies are provided:
//!
//! * [`resample_traditional`]: multinomial draws, output weights `1/N`.
//! * [`resample_improved`]: classified resampling. Particles are split into
//!   class A (heavy `w >= c_h/N` and light `w <= c_l/N`) and class B (the
//!   medium band). Class B and the heavy particles are kept. Every light
//!   particle is pulled toward a randomly chosen heavy particle,
//!   `x_new = x_light + K * L * (x_heavy - x_light)` with
//!   `L = (1 / |A|)^(1/m)`, halving `L` while the move lowers the
//!   observation weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `Σw = 1` for a set flagged as normalized.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("particle set must contain at least one particle")]
    Empty,
    #[error("particle {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("particle {index} has invalid weight {weight}")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("all particle weights are zero")]
    AllZeroWeights,
    #[error("operation requires a normalized particle set")]
    NotNormalized,
    #[error("expected {expected} likelihoods, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("likelihood {index} is not a finite nonnegative number ({value})")]
    InvalidLikelihood { index: usize, value: f64 },
    #[error("class A holds light particles but no heavy attractor")]
    NoHeavyParticles,
    #[error("invalid resample configuration: {0}")]
    InvalidConfig(&'static str),
}

pub type Result<T> = std::result::Result<T, FilterError>;

/// A weighted state hypothesis.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub state: Vec<f64>,
    pub weight: f64,
}

impl Particle {
    pub fn new(state: Vec<f64>, weight: f64) -> Self {
        Self { state, weight }
    }
}

/// Weighted sample cloud over a fixed-dimension real state space.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    particles: Vec<Particle>,
    normalized: bool,
}

impl ParticleSet {
    /// Builds a set from raw particles. The set is flagged normalized only if
    /// the weights already sum to one.
    pub fn new(particles: Vec<Particle>) -> Result<Self> {
        let first = particles.first().ok_or(FilterError::Empty)?;
        let dim = first.state.len();
        for (index, p) in particles.iter().enumerate() {
            if p.state.len() != dim {
                return Err(FilterError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: p.state.len(),
                });
            }
            if !p.weight.is_finite() || p.weight < 0.0 {
                return Err(FilterError::InvalidWeight {
                    index,
                    weight: p.weight,
                });
            }
        }
        let total: f64 = particles.iter().map(|p| p.weight).sum();
        Ok(Self {
            particles,
            normalized: (total - 1.0).abs() <= NORMALIZATION_TOLERANCE,
        })
    }

    /// Equal-weight set over the given states.
    pub fn uniform(states: Vec<Vec<f64>>) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(FilterError::Empty);
        }
        let w = 1.0 / n as f64;
        let set = Self::new(states.into_iter().map(|s| Particle::new(s, w)).collect())?;
        Ok(Self {
            normalized: true,
            ..set
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// State dimension `m`.
    pub fn dim(&self) -> usize {
        self.particles[0].state.len()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.weight).collect()
    }

    pub fn into_particles(self) -> Vec<Particle> {
        self.particles
    }

    fn require_normalized(&self) -> Result<()> {
        if self.normalized {
            Ok(())
        } else {
            Err(FilterError::NotNormalized)
        }
    }

    /// Rescales weights to sum to one.
    pub fn normalize(&self) -> Result<Self> {
        let total: f64 = self.particles.iter().map(|p| p.weight).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(FilterError::AllZeroWeights);
        }
        let particles = self
            .particles
            .iter()
            .map(|p| Particle::new(p.state.clone(), p.weight / total))
            .collect();
        Ok(Self {
            particles,
            normalized: true,
        })
    }

    /// Effective sample size `1 / Σ w_i²` of the normalized weights, in `[1, N]`.
    ///
    /// This is the usual degeneracy measure; it equals `N` for uniform weights
    /// and `1` when a single particle carries all the mass.
    pub fn effective_sample_size(&self) -> Result<f64> {
        self.require_normalized()?;
        let sum_sq: f64 = self.particles.iter().map(|p| p.weight * p.weight).sum();
        let n = self.len() as f64;
        Ok((1.0 / sum_sq).clamp(1.0, n))
    }

    /// Sequential importance sampling step: `w_i <- w_i * L_i`, then normalize.
    pub fn weight_update(&self, likelihoods: &[f64]) -> Result<Self> {
        if likelihoods.len() != self.len() {
            return Err(FilterError::LengthMismatch {
                expected: self.len(),
                found: likelihoods.len(),
            });
        }
        if let Some((index, &value)) = likelihoods
            .iter()
            .enumerate()
            .find(|(_, l)| !l.is_finite() || **l < 0.0)
        {
            return Err(FilterError::InvalidLikelihood { index, value });
        }
        let particles = self
            .particles
            .iter()
            .zip(likelihoods)
            .map(|(p, l)| Particle::new(p.state.clone(), p.weight * l))
            .collect();
        Self {
            particles,
            normalized: false,
        }
        .normalize()
    }

    /// Weighted-mean point estimate `Σ w_i x_i`.
    ///
    /// Accumulated as offsets from the first particle, so a cloud of identical
    /// states returns that state exactly.
    pub fn estimate(&self) -> Result<Vec<f64>> {
        self.require_normalized()?;
        let origin = &self.particles[0].state;
        let mut offset = vec![0.0; self.dim()];
        for p in &self.particles {
            for ((acc, x), o) in offset.iter_mut().zip(&p.state).zip(origin) {
                *acc += p.weight * (x - o);
            }
        }
        Ok(origin.iter().zip(offset).map(|(o, d)| o + d).collect())
    }

    /// Weights sorted ascending, ties broken by original index.
    fn sorted_ascending(&self) -> Self {
        let mut particles = self.particles.clone();
        particles.sort_by(|a, b| a.weight.total_cmp(&b.weight));
        Self {
            particles,
            normalized: self.normalized,
        }
    }
}

/// Parameters of the classified resampling scheme and the resampling trigger.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ResampleConfig {
    /// Resample when `ESS < threshold_fraction * N`.
    pub threshold_fraction: f64,
    /// Step coefficient `K`.
    pub step_coefficient: f64,
    /// Light threshold as a multiple of the mean weight.
    pub low_factor: f64,
    /// Heavy threshold as a multiple of the mean weight.
    pub high_factor: f64,
    pub max_halvings: u32,
}

impl Default for ResampleConfig {
    fn default() -> Self {
        Self {
            threshold_fraction: 2.0 / 3.0,
            step_coefficient: 0.4,
            low_factor: 0.5,
            high_factor: 2.0,
            max_halvings: 3,
        }
    }
}

impl ResampleConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction <= 1.0) {
            return Err(FilterError::InvalidConfig("threshold_fraction must be in (0, 1]"));
        }
        if !(self.step_coefficient > 0.0) || !self.step_coefficient.is_finite() {
            return Err(FilterError::InvalidConfig("step_coefficient must be > 0"));
        }
        if !(self.low_factor > 0.0 && self.low_factor < 1.0) {
            return Err(FilterError::InvalidConfig("low_factor must be in (0, 1)"));
        }
        if !(self.high_factor > 1.0) || !self.high_factor.is_finite() {
            return Err(FilterError::InvalidConfig("high_factor must be > 1"));
        }
        Ok(())
    }

    /// `N_th` for a set of `n` particles.
    pub fn threshold(&self, n: usize) -> f64 {
        self.threshold_fraction * n as f64
    }

    pub fn should_resample(&self, set: &ParticleSet) -> Result<bool> {
        Ok(set.effective_sample_size()? < self.threshold(set.len()))
    }
}

/// Partition of particle indices produced by [`classify_particles`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classification {
    /// Indices with `w <= c_l/N`.
    pub light: Vec<usize>,
    /// Indices with `w >= c_h/N`.
    pub heavy: Vec<usize>,
    /// Indices strictly inside the medium band.
    pub class_b: Vec<usize>,
}

impl Classification {
    /// Class A, heavy and light together, in ascending index order.
    pub fn class_a(&self) -> Vec<usize> {
        let mut a: Vec<usize> = self.light.iter().chain(&self.heavy).copied().collect();
        a.sort_unstable();
        a
    }
}

pub fn classify_particles(set: &ParticleSet, cfg: &ResampleConfig) -> Result<Classification> {
    set.require_normalized()?;
    let mean = 1.0 / set.len() as f64;
    let (w_low, w_high) = (cfg.low_factor * mean, cfg.high_factor * mean);
    let mut out = Classification::default();
    for (i, p) in set.particles.iter().enumerate() {
        if p.weight <= w_low {
            out.light.push(i);
        } else if p.weight >= w_high {
            out.heavy.push(i);
        } else {
            out.class_b.push(i);
        }
    }
    Ok(out)
}

/// Multinomial resampling. Output weights are all `1/N`.
pub fn resample_traditional(set: &ParticleSet, seed: u64) -> Result<ParticleSet> {
    set.require_normalized()?;
    let n = set.len();
    let mut cdf = Vec::with_capacity(n);
    let mut acc = 0.0;
    for p in &set.particles {
        acc += p.weight;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = 1.0 / n as f64;
    let particles = (0..n)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * acc;
            let idx = cdf.partition_point(|&c| c <= u).min(n - 1);
            Particle::new(set.particles[idx].state.clone(), w)
        })
        .collect();
    Ok(ParticleSet {
        particles,
        normalized: true,
    })
}

/// Classified resampling.
///
/// `weight_fn` evaluates the current observation likelihood of any state. A
/// moved light particle is accepted when its likelihood is at least the
/// likelihood of the particle it replaces; otherwise the step length is
/// halved, up to `max_halvings` times, after which the particle becomes a copy
/// of its attractor. Heavy and class-B particles keep their states.
///
/// The output keeps the ascending-weight order of the input. Every particle is
/// then reweighted by `weight_fn` and the set renormalized, so the returned
/// weights reflect the current observation only.
pub fn resample_improved<F>(
    set: &ParticleSet,
    cfg: &ResampleConfig,
    weight_fn: F,
    seed: u64,
) -> Result<ParticleSet>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    set.require_normalized()?;
    let sorted = set.sorted_ascending();
    let classes = classify_particles(&sorted, cfg)?;
    if classes.light.is_empty() {
        return Ok(sorted);
    }
    if classes.heavy.is_empty() {
        return Err(FilterError::NoHeavyParticles);
    }

    let class_a_size = classes.light.len() + classes.heavy.len();
    let shrink = (1.0 / class_a_size as f64).powf(1.0 / sorted.dim() as f64);
    let step = cfg.step_coefficient * shrink;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let attractors: Vec<usize> = classes
        .light
        .iter()
        .map(|_| classes.heavy[rng.random_range(0..classes.heavy.len())])
        .collect();

    let moved: Vec<Vec<f64>> = classes
        .light
        .par_iter()
        .zip(attractors.par_iter())
        .map(|(&s, &a)| {
            let light = &sorted.particles[s].state;
            let attractor = &sorted.particles[a].state;
            move_toward(light, attractor, step, cfg.max_halvings, &weight_fn)
                .unwrap_or_else(|| attractor.clone())
        })
        .collect();

    let mut states: Vec<Vec<f64>> = sorted.particles.into_iter().map(|p| p.state).collect();
    for (&s, state) in classes.light.iter().zip(moved) {
        states[s] = state;
    }
    let particles = states
        .into_par_iter()
        .map(|state| {
            let w = weight_fn(&state);
            Particle::new(state, if w.is_finite() && w > 0.0 { w } else { 0.0 })
        })
        .collect();
    ParticleSet {
        particles,
        normalized: false,
    }
    .normalize()
}

/// Pulls `light` toward `attractor`, halving the step while the move lowers
/// `weight_fn`. `None` once `max_halvings` halvings have all failed.
fn move_toward<F>(light: &[f64], attractor: &[f64], step: f64, max_halvings: u32, weight_fn: &F) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> f64,
{
    let original = weight_fn(light);
    let mut step = step;
    for _ in 0..=max_halvings {
        let candidate: Vec<f64> = light
            .iter()
            .zip(attractor)
            .map(|(s, a)| s + step * (a - s))
            .collect();
        if weight_fn(&candidate) >= original {
            return Some(candidate);
        }
        step *= 0.5;
    }
    None
}

/// Resampling strategy used by a running filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResampleStrategy {
    Traditional,
    Improved,
}

/// Applies `strategy`. The improved scheme falls back to multinomial
/// resampling when class A has no heavy particle.
pub fn resample<F>(
    set: &ParticleSet,
    strategy: ResampleStrategy,
    cfg: &ResampleConfig,
    weight_fn: F,
    seed: u64,
) -> Result<ParticleSet>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    match strategy {
        ResampleStrategy::Traditional => resample_traditional(set, seed),
        ResampleStrategy::Improved => match resample_improved(set, cfg, weight_fn, seed) {
            Err(FilterError::NoHeavyParticles) => resample_traditional(set, seed),
            other => other,
        },
    }
}
