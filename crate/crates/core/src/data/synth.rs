//! Synthetic stand-in for short-term conflict alert data.
//!
//! Each aircraft pair flies at constant velocity; the pair's relative track
//! passes its closest point of approach somewhere in the middle of the
//! observation window. Radar cycles are sampled every 6 seconds and each
//! cycle yields one row:
//!
//! | column | content |
//! |--------|---------|
//! | X1..X3 | separation on x, y, z, from noisy track positions |
//! | X4     | 3-D distance computed from the noisy X1..X3 |
//! | X5..X7 | velocity of aircraft 1 |
//! | X8..X10| velocity of aircraft 2 |
//! | X11, X12 | time since the last correlated plot of each aircraft |
//!
//! The label is 1 when the true (noise-free) separation is below the alert
//! distance, then flipped with probability `label_flip_rate`.
//!
//! Each aircraft's track error is Gaussian. Its horizontal std grows with
//! ground speed (`noise_std` at 200 m/s, halved on the x axis) and its
//! altitude error grows with climb rate, so the velocities tell a classifier
//! how far the observed distance can be trusted. Plot ages are drawn
//! uniformly and independently of everything else and carry no label signal.

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{BdtError, Result};
use crate::sampler::ChainRng;

pub const STCA_FEATURES: [&str; 12] = ["X1", "X2", "X3", "X4", "X5", "X6", "X7", "X8", "X9", "X10", "X11", "X12"];
pub const STCA_LABEL: &str = "alert";

/// Seconds between radar cycles.
const CYCLE_SECONDS: f64 = 6.0;
/// Horizontal velocity components of the lead aircraft, m/s.
const LEAD_SPEED: f64 = 250.0;
/// Vertical velocity components of the lead aircraft, m/s.
const LEAD_CLIMB: f64 = 15.0;
/// Horizontal closing speed range of a pair, m/s.
const CLOSING_SPEED: (f64, f64) = (5.0, 20.0);
/// Vertical closing speed bound, m/s.
const CLOSING_CLIMB: f64 = 3.0;
/// Miss distance at closest approach, as a multiple of the alert distance.
const MISS_FACTOR: f64 = 2.0;
/// Ground speed at which the separation noise has std `noise_std`, m/s.
const REFERENCE_SPEED: f64 = 200.0;
/// Relative track error on the x and y axes.
const HORIZONTAL_NOISE: [f64; 2] = [0.5, 1.0];
/// Altitude error of a level aircraft relative to `noise_std`.
const VERTICAL_NOISE: f64 = 0.05;
/// Climb rate at which the altitude error doubles, m/s.
const REFERENCE_CLIMB: f64 = 5.0;
/// Std of the per-cycle velocity jitter, m/s.
const VELOCITY_JITTER: f64 = 0.5;
/// Upper bound of the time since the last correlated plot, seconds.
const MAX_PLOT_AGE: f64 = 12.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub pair_count: usize,
    pub cycles_per_pair: usize,
    /// Separation (m) below which a cycle is an alert.
    pub alert_distance: f64,
    /// Track error std (m) on the y axis of an aircraft at 200 m/s.
    pub noise_std: f64,
    pub label_flip_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            pair_count: 60,
            cycles_per_pair: 40,
            alert_distance: 1500.0,
            noise_std: 750.0,
            label_flip_rate: 0.05,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pair_count * self.cycles_per_pair < 100 {
            return Err(BdtError::Config("need at least 100 generated rows".into()));
        }
        if !(0.0..0.5).contains(&self.label_flip_rate) {
            return Err(BdtError::Config("label flip rate must lie in [0, 0.5)".into()));
        }
        if !(self.alert_distance > 0.0 && self.alert_distance.is_finite()) {
            return Err(BdtError::Config("alert distance must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(BdtError::Config("noise std must be non-negative".into()));
        }
        Ok(())
    }
}

type Vec3 = [f64; 3];

fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Random unit vector orthogonal to `v`.
fn orthogonal_unit<R: Rng>(v: Vec3, rng: &mut R) -> Vec3 {
    let vn = norm(v);
    loop {
        let u: Vec3 = std::array::from_fn(|_| StandardNormal.sample(rng));
        let along = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]) / (vn * vn);
        let w = [u[0] - along * v[0], u[1] - along * v[1], u[2] - along * v[2]];
        let wn = norm(w);
        if wn > 1e-9 {
            return [w[0] / wn, w[1] / wn, w[2] / wn];
        }
    }
}

/// Generates `pair_count * cycles_per_pair` rows. Kinematics and noise come
/// from one seeded stream and label flips from a second, so changing the
/// flip rate leaves the features untouched.
pub fn generate_synthetic_stca(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChainRng::seed_from_u64(cfg.seed);
    let mut flip_rng = ChainRng::seed_from_u64(cfg.seed ^ 0x5851_f42d_4c95_7f2d);
    let jitter = Normal::new(0.0, VELOCITY_JITTER).unwrap();
    let n = cfg.pair_count * cfg.cycles_per_pair;
    let mut features = Vec::with_capacity(n * 12);
    let mut labels = Vec::with_capacity(n);

    for _ in 0..cfg.pair_count {
        let lead: Vec3 = [
            rng.random_range(-LEAD_SPEED..LEAD_SPEED),
            rng.random_range(-LEAD_SPEED..LEAD_SPEED),
            rng.random_range(-LEAD_CLIMB..LEAD_CLIMB),
        ];
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let speed = rng.random_range(CLOSING_SPEED.0..CLOSING_SPEED.1);
        let closing: Vec3 =
            [speed * heading.cos(), speed * heading.sin(), rng.random_range(-CLOSING_CLIMB..CLOSING_CLIMB)];
        let other: Vec3 = std::array::from_fn(|i| lead[i] - closing[i]);
        let miss_dir = orthogonal_unit(closing, &mut rng);
        let miss = rng.random_range(0.0..MISS_FACTOR) * cfg.alert_distance;
        let cpa_cycle = rng.random_range(0.25..0.75) * cfg.cycles_per_pair as f64;
        let track_sigma = |v: &Vec3| -> Vec3 {
            let h = cfg.noise_std * v[0].hypot(v[1]) / REFERENCE_SPEED;
            let z = cfg.noise_std * VERTICAL_NOISE * (1.0 + v[2].abs() / REFERENCE_CLIMB);
            [h * HORIZONTAL_NOISE[0], h * HORIZONTAL_NOISE[1], z]
        };
        let (sigma_lead, sigma_other) = (track_sigma(&lead), track_sigma(&other));

        for cycle in 0..cfg.cycles_per_pair {
            let t = (cycle as f64 - cpa_cycle) * CYCLE_SECONDS;
            let truth: Vec3 = std::array::from_fn(|i| miss * miss_dir[i] + closing[i] * t);
            let observed: Vec3 = std::array::from_fn(|i| {
                let e1: f64 = StandardNormal.sample(&mut rng);
                let e2: f64 = StandardNormal.sample(&mut rng);
                truth[i] + sigma_lead[i] * e1 - sigma_other[i] * e2
            });
            let distance = (observed[0] * observed[0] + observed[1] * observed[1] + observed[2] * observed[2]).sqrt();
            features.extend_from_slice(&observed);
            features.push(distance);
            for v in lead.iter().chain(&other) {
                features.push(v + jitter.sample(&mut rng));
            }
            for _ in 0..2 {
                features.push(rng.random_range(0.0..MAX_PLOT_AGE));
            }
            let mut label = (norm(truth) < cfg.alert_distance) as usize;
            if flip_rng.random::<f64>() < cfg.label_flip_rate {
                label = 1 - label;
            }
            labels.push(label);
        }
    }
    Dataset::from_flat(
        features,
        labels,
        STCA_FEATURES.iter().map(|s| s.to_string()).collect(),
        STCA_LABEL.to_string(),
        vec!["0".into(), "1".into()],
    )
}
