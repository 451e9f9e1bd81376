//! Univariate nonstationary growth model benchmark.
//!
//! ```text
//! x_n = 0.5 x_{n-1} + 25 x_{n-1} / (1 + x_{n-1}^2) + 8 cos(1.2 (n - 1)) + u_n
//! y_n = x_n^2 / 20 + v_n
//! ```
//!
//! [`run_comparison`] runs a multinomial-resampling filter (TRPF) and a
//! classified-resampling filter (IRPF) on the same simulated trajectories,
//! from the same initial cloud, and records the RMSE of each.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::filter::{self, FilterError, ParticleSet, ResampleConfig, ResampleStrategy};

#[derive(Debug, Error)]
pub enum UngmError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sequences are empty")]
    EmptySequence,
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UngmParams {
    pub particle_count: usize,
    pub steps: usize,
    pub process_noise_std: f64,
    pub measurement_noise_var: f64,
    pub step_coefficient: f64,
    pub runs: usize,
    pub seed: u64,
}

impl Default for UngmParams {
    fn default() -> Self {
        Self {
            particle_count: 100,
            steps: 50,
            process_noise_std: 10f64.sqrt(),
            measurement_noise_var: 1.0,
            step_coefficient: 0.4,
            runs: 50,
            seed: 0,
        }
    }
}

impl UngmParams {
    fn validate(&self) -> Result<(), UngmError> {
        if self.particle_count == 0 {
            return Err(UngmError::InvalidParams("particle_count must be >= 1"));
        }
        if self.steps == 0 {
            return Err(UngmError::InvalidParams("steps must be >= 1"));
        }
        if !(self.measurement_noise_var > 0.0) {
            return Err(UngmError::InvalidParams("measurement_noise_var must be > 0"));
        }
        if !(self.process_noise_std >= 0.0) {
            return Err(UngmError::InvalidParams("process_noise_std must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub true_states: Vec<f64>,
    pub estimates_trpf: Vec<f64>,
    pub estimates_irpf: Vec<f64>,
    pub rmse_trpf: f64,
    pub rmse_irpf: f64,
}

/// State transition for step `n >= 1`.
pub fn transition(x_prev: f64, n: usize, noise: f64) -> f64 {
    0.5 * x_prev
        + 25.0 * x_prev / (1.0 + x_prev * x_prev)
        + 8.0 * (1.2 * (n as f64 - 1.0)).cos()
        + noise
}

pub fn observe(x: f64, noise: f64) -> f64 {
    x * x / 20.0 + noise
}

/// Gaussian density of the innovation `y - x^2/20` with variance `var`.
pub fn likelihood(y_observed: f64, x_particle: f64, var: f64) -> f64 {
    let innovation = y_observed - observe(x_particle, 0.0);
    (-innovation * innovation / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
}

pub fn rmse(truth: &[f64], estimate: &[f64]) -> Result<f64, UngmError> {
    if truth.len() != estimate.len() {
        return Err(UngmError::LengthMismatch(truth.len(), estimate.len()));
    }
    if truth.is_empty() {
        return Err(UngmError::EmptySequence);
    }
    let sum_sq: f64 = truth
        .iter()
        .zip(estimate)
        .map(|(x, e)| (x - e) * (x - e))
        .sum();
    Ok((sum_sq / truth.len() as f64).sqrt())
}

/// Runs `params.runs` paired TRPF/IRPF experiments.
pub fn run_comparison(params: &UngmParams) -> Result<Vec<RunResult>, UngmError> {
    run_comparison_with(params, ResampleStrategy::Traditional, ResampleStrategy::Improved)
}

/// Paired comparison with explicit strategies for the two filters. The first
/// strategy fills the `trpf` fields, the second the `irpf` fields.
pub fn run_comparison_with(
    params: &UngmParams,
    first: ResampleStrategy,
    second: ResampleStrategy,
) -> Result<Vec<RunResult>, UngmError> {
    params.validate()?;
    (0..params.runs)
        .map(|run| run_single(params, run as u64, first, second))
        .collect()
}

fn run_single(params: &UngmParams, run: u64, first: ResampleStrategy, second: ResampleStrategy) -> Result<RunResult, UngmError> {
    let mut sim_rng = ChaCha8Rng::seed_from_u64(params.seed);
    sim_rng.set_stream(2 * run);
    let process = Normal::new(0.0, params.process_noise_std).expect("validated std");
    let measurement = Normal::new(0.0, params.measurement_noise_var.sqrt()).expect("validated var");

    let mut truth = Vec::with_capacity(params.steps);
    let mut observations = Vec::with_capacity(params.steps);
    let mut x = 0.0;
    for n in 1..=params.steps {
        x = transition(x, n, process.sample(&mut sim_rng));
        truth.push(x);
        observations.push(observe(x, measurement.sample(&mut sim_rng)));
    }

    let init_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let initial: Vec<Vec<f64>> = (0..params.particle_count)
        .map(|_| vec![init_normal.sample(&mut sim_rng)])
        .collect();

    let filter_seed = sim_rng.random::<u64>();
    let estimates_trpf = run_filter(params, &observations, initial.clone(), first, filter_seed)?;
    let estimates_irpf = run_filter(params, &observations, initial, second, filter_seed)?;
    Ok(RunResult {
        rmse_trpf: rmse(&truth, &estimates_trpf)?,
        rmse_irpf: rmse(&truth, &estimates_irpf)?,
        true_states: truth,
        estimates_trpf,
        estimates_irpf,
    })
}

fn run_filter(
    params: &UngmParams,
    observations: &[f64],
    initial: Vec<Vec<f64>>,
    strategy: ResampleStrategy,
    seed: u64,
) -> Result<Vec<f64>, UngmError> {
    let cfg = ResampleConfig {
        step_coefficient: params.step_coefficient,
        ..ResampleConfig::default()
    };
    let process = Normal::new(0.0, params.process_noise_std).expect("validated std");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let var = params.measurement_noise_var;
    let mut set = ParticleSet::uniform(initial)?;
    let mut estimates = Vec::with_capacity(observations.len());

    for (i, &y) in observations.iter().enumerate() {
        let n = i + 1;
        let propagated: Vec<filter::Particle> = set
            .particles()
            .iter()
            .map(|p| filter::Particle::new(vec![transition(p.state[0], n, process.sample(&mut rng))], p.weight))
            .collect();
        let prior = ParticleSet::new(propagated)?;
        let likelihoods: Vec<f64> = prior
            .particles()
            .iter()
            .map(|p| likelihood(y, p.state[0], var))
            .collect();
        set = match prior.weight_update(&likelihoods) {
            Ok(updated) => updated,
            // Observation incompatible with the whole cloud: keep the prior.
            Err(FilterError::AllZeroWeights) => prior.normalize()?,
            Err(e) => return Err(e.into()),
        };
        estimates.push(set.estimate()?[0]);

        let resample_seed = rng.random::<u64>();
        if cfg.should_resample(&set)? {
            set = filter::resample(&set, strategy, &cfg, |s| likelihood(y, s[0], var), resample_seed)?;
        }
    }
    Ok(estimates)
}

pub fn write_runs_csv<W: Write>(mut out: W, results: &[RunResult]) -> std::io::Result<()> {
    writeln!(out, "run,rmse_trpf,rmse_irpf")?;
    for (i, r) in results.iter().enumerate() {
        writeln!(out, "{},{},{}", i, r.rmse_trpf, r.rmse_irpf)?;
    }
    Ok(())
}

pub fn write_trace_csv<W: Write>(mut out: W, result: &RunResult) -> std::io::Result<()> {
    writeln!(out, "step,truth,est_trpf,est_irpf")?;
    for (i, ((t, a), b)) in result
        .true_states
        .iter()
        .zip(&result.estimates_trpf)
        .zip(&result.estimates_irpf)
        .enumerate()
    {
        writeln!(out, "{},{},{},{}", i + 1, t, a, b)?;
    }
    Ok(())
}
