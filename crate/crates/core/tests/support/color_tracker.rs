//! Color-only particle tracker written from scratch, used as the reference
//! for the zero-edge-weight reduction.

use pftrack::features::{BinMap, FeatureMode, QuantizerSpec};
use pftrack::filter::{self, Particle, ParticleSet, ResampleConfig, ResampleStrategy};
use pftrack::image::{ImageBuffer, RegionRect};
use pftrack::tracker::{Tracker, TrackerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const N: usize = 60;
const POS_STD: f64 = 8.0;
const SCALE_STD: f64 = 0.02;
const SIGMA: f64 = 0.2;

/// Color-only tracker written from scratch: state `[cx, cy, s, cx', cy', s']`,
/// constant-velocity motion, kernel-weighted template, unweighted candidate
/// histograms from direct counts.
pub struct ColorTracker {
    spec: QuantizerSpec,
    template: Vec<f64>,
    window0: (f64, f64),
    rng: ChaCha8Rng,
    pub set: ParticleSet,
    pub weights: Vec<f64>,
}

fn clamp_scale(s: f64) -> f64 {
    s.clamp(0.2, 5.0)
}

fn histogram(map: &BinMap, region: &RegionRect) -> Option<Vec<f64>> {
    let counts = map.count_region(region).ok()?;
    let total: u32 = counts.iter().sum();
    (total > 0).then(|| counts.iter().map(|&c| c as f64 / total as f64).collect())
}

/// Epanechnikov-weighted histogram with the kernel radius at the half-diagonal.
fn kernel_histogram(map: &BinMap, r: &RegionRect) -> Vec<f64> {
    let (cx, cy) = (r.x as f64 + r.w as f64 / 2.0, r.y as f64 + r.h as f64 / 2.0);
    let a2 = (r.w * r.w + r.h * r.h) as f64 / 4.0;
    let mut mass = vec![0.0; map.bin_count()];
    for y in r.y.max(0)..(r.y + r.h).min(map.height() as i64) {
        for x in r.x.max(0)..(r.x + r.w).min(map.width() as i64) {
            if let Some(b) = map.bin(x as usize, y as usize) {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                mass[b] += (1.0 - (dx * dx + dy * dy) / a2).max(0.0);
            }
        }
    }
    let total: f64 = mass.iter().sum();
    mass.iter().map(|m| m / total).collect()
}

impl ColorTracker {
    pub fn new(frame: &ImageBuffer, init: RegionRect, seed: u64) -> Self {
        let spec = QuantizerSpec::default();
        let map = BinMap::build(frame, &spec, FeatureMode::Color).unwrap();
        let template = kernel_histogram(&map, &init);
        let (cx, cy) = init.center();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pos = Normal::new(0.0, POS_STD).unwrap();
        let scale = Normal::new(0.0, SCALE_STD).unwrap();
        let states = (0..N)
            .map(|_| {
                let x = cx + pos.sample(&mut rng);
                let y = cy + pos.sample(&mut rng);
                let s = clamp_scale(1.0 + scale.sample(&mut rng));
                vec![x, y, s, x, y, s]
            })
            .collect();
        let set = ParticleSet::uniform(states).unwrap();
        Self {
            spec,
            template,
            window0: (init.w as f64, init.h as f64),
            rng,
            weights: set.weights(),
            set,
        }
    }

    fn likelihood(&self, map: &BinMap, state: &[f64]) -> f64 {
        let region = RegionRect::centered(state[0], state[1], self.window0.0 * state[2], self.window0.1 * state[2]);
        let Some(hist) = histogram(map, &region) else {
            return 0.0;
        };
        let rho: f64 = hist.iter().zip(&self.template).map(|(p, q)| (p * q).sqrt()).sum();
        let d2 = 1.0 - rho.clamp(0.0, 1.0);
        (-d2 / (2.0 * SIGMA * SIGMA)).exp() / ((2.0 * std::f64::consts::PI).sqrt() * SIGMA)
    }

    pub fn step(&mut self, frame: &ImageBuffer) {
        let map = BinMap::build(frame, &self.spec, FeatureMode::Color).unwrap();
        let pos = Normal::new(0.0, POS_STD).unwrap();
        let scale = Normal::new(0.0, SCALE_STD).unwrap();
        let moved: Vec<Particle> = self
            .set
            .particles()
            .iter()
            .map(|p| {
                let s = &p.state;
                let x = 2.0 * s[0] - s[3] + pos.sample(&mut self.rng);
                let y = 2.0 * s[1] - s[4] + pos.sample(&mut self.rng);
                let sc = clamp_scale(2.0 * s[2] - s[5] + scale.sample(&mut self.rng));
                Particle::new(vec![x, y, sc, s[0], s[1], s[2]], p.weight)
            })
            .collect();
        let raw: Vec<f64> = moved.iter().map(|p| p.weight * self.likelihood(&map, &p.state)).collect();
        let total: f64 = raw.iter().sum();
        let posterior: Vec<Particle> = moved
            .into_iter()
            .zip(&raw)
            .map(|(p, w)| Particle::new(p.state, w / total))
            .collect();
        let posterior = ParticleSet::new(posterior).unwrap();
        self.weights = posterior.weights();

        let resample_seed = self.rng.random::<u64>();
        let ess = 1.0 / self.weights.iter().map(|w| w * w).sum::<f64>();
        self.set = if ess < 2.0 * N as f64 / 3.0 {
            let cfg = ResampleConfig::default();
            filter::resample(
                &posterior,
                ResampleStrategy::Improved,
                &cfg,
                |s| self.likelihood(&map, s),
                resample_seed,
            )
            .unwrap()
        } else {
            posterior
        };
    }
}

/// Runs the fused tracker with zero edge weight and no adaptation next to
/// [`ColorTracker`] for `steps` frames. Returns the largest absolute
/// difference in posterior weights, resampled states and resampled weights,
/// and the number of frames on which the fused tracker resampled.
pub fn reduction_gap(frames: &[ImageBuffer], init: RegionRect, seed: u64, steps: usize) -> (f64, usize) {
    let cfg = TrackerConfig {
        particle_count: N,
        seed,
        initial_theta_color: 1.0,
        adapt_fusion: false,
        update_template: false,
        ..TrackerConfig::default()
    };
    let mut fused = Tracker::new(cfg, &frames[0], init).unwrap();
    assert_eq!(fused.template().theta_edge, 0.0);
    let mut oracle = ColorTracker::new(&frames[0], init, seed);
    let (mut gap, mut resampled) = (0.0f64, 0);
    for frame in frames.iter().skip(1).take(steps) {
        resampled += fused.track_frame(frame).unwrap().resampled as usize;
        oracle.step(frame);
        for (a, b) in fused.posterior_weights().iter().zip(&oracle.weights) {
            gap = gap.max((a - b).abs());
        }
        for (p, q) in fused.particles().particles().iter().zip(oracle.set.particles()) {
            gap = gap.max((p.weight - q.weight).abs());
            for (a, b) in p.state.iter().zip(&q.state) {
                gap = gap.max((a - b).abs());
            }
        }
    }
    (gap, resampled)
}
