//! Rotation-invariant synthetic trajectory data.

pub mod oracle;

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, Trajectory, TrajectorySample};
use crate::group::{ActionConvention, GroupElement};
use crate::seeding::rng_for;

/// How the joint law of a sample is made rotation invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Invariance {
    /// Each full sample is rotated by an independent uniform angle.
    RandomRotation,
    /// Each seed sample is replicated across all elements of `C_n`.
    OrbitAugment(u32),
}

impl fmt::Display for Invariance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Invariance::RandomRotation => write!(f, "random-rotation"),
            Invariance::OrbitAugment(n) => write!(f, "orbit-augment:n={n}"),
        }
    }
}

impl FromStr for Invariance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s == "random-rotation" {
            return Ok(Invariance::RandomRotation);
        }
        if let Some(rest) = s.strip_prefix("orbit-augment:") {
            let n = rest.strip_prefix("n=").unwrap_or(rest);
            let n: u32 = n
                .parse()
                .map_err(|_| Error::invalid(format!("bad orbit size in {s:?}")))?;
            if n == 0 {
                return Err(Error::invalid("orbit size must be positive"));
            }
            return Ok(Invariance::OrbitAugment(n));
        }
        Err(Error::invalid(format!(
            "unknown invariance {s:?}, expected random-rotation or orbit-augment:n=N"
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Number of generated samples; with `OrbitAugment(n)` this counts seed
    /// samples and the output has `n_samples * n` entries.
    pub n_samples: usize,
    pub t_obs: usize,
    pub t_pred: usize,
    /// Speed interval in meters per step.
    pub speed_range: (f64, f64),
    /// Standard deviation of isotropic Gaussian noise on every point.
    pub noise_sigma: f64,
    pub invariance: Invariance,
    /// Pivot the rotations act about.
    pub convention: ActionConvention,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            n_samples: 1000,
            t_obs: 8,
            t_pred: 12,
            speed_range: (0.3, 0.7),
            noise_sigma: 0.05,
            invariance: Invariance::RandomRotation,
            convention: ActionConvention::LastObserved,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.speed_range;
        if self.n_samples == 0 || self.t_obs == 0 || self.t_pred == 0 {
            return Err(Error::invalid("n_samples, t_obs and t_pred must be positive"));
        }
        if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo <= hi) {
            return Err(Error::invalid(format!("bad speed range [{lo}, {hi}]")));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::invalid("noise_sigma must be finite and nonnegative"));
        }
        if self.invariance == Invariance::OrbitAugment(0) {
            return Err(Error::invalid("orbit size must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub samples: Vec<TrajectorySample>,
    /// Sample indices of each orbit; empty for `RandomRotation`.
    pub orbits: Vec<Vec<usize>>,
}

fn base_sample(cfg: &SyntheticConfig, index: usize) -> TrajectorySample {
    let mut rng = rng_for(cfg.seed, index as u64);
    let heading = rng.random_range(0.0..TAU);
    let (lo, hi) = cfg.speed_range;
    let speed = if hi > lo { rng.random_range(lo..hi) } else { lo };
    let v = Point::new(speed * heading.cos(), speed * heading.sin());
    let anchor = Point::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("validated sigma");
    let mut jitter = |p: Point| {
        if cfg.noise_sigma > 0.0 {
            p + Point::new(noise.sample(&mut rng), noise.sample(&mut rng))
        } else {
            p
        }
    };
    let last = (cfg.t_obs - 1) as f64;
    let past: Trajectory = (0..cfg.t_obs)
        .map(|t| jitter(anchor + v * (t as f64 - last)))
        .collect();
    let future: Trajectory = (1..=cfg.t_pred).map(|t| jitter(anchor + v * t as f64)).collect();
    TrajectorySample {
        past,
        future,
        agent_id: index as i64,
        origin_frame: 0,
    }
}

fn rotate_sample(s: &TrajectorySample, g: GroupElement, conv: ActionConvention) -> Result<TrajectorySample> {
    let pivot = conv.pivot_for(&s.past)?;
    Ok(TrajectorySample {
        past: s.past.map(|p| g.rotate_about(p, pivot)),
        future: s.future.map(|p| g.rotate_about(p, pivot)),
        ..s.clone()
    })
}

/// Generates noisy constant-velocity samples. Past and future are rotated
/// jointly so the joint law is invariant, not only the marginals.
pub fn generate(cfg: &SyntheticConfig) -> Result<SyntheticDataset> {
    cfg.validate()?;
    match cfg.invariance {
        Invariance::RandomRotation => {
            let samples = (0..cfg.n_samples)
                .map(|i| {
                    let s = base_sample(cfg, i);
                    let mut rng = rng_for(cfg.seed ^ 0x5EED_0F_A11, i as u64);
                    rotate_sample(&s, GroupElement::new(rng.random_range(0.0..TAU)), cfg.convention)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(SyntheticDataset {
                samples,
                orbits: Vec::new(),
            })
        }
        Invariance::OrbitAugment(n) => {
            let n = n as usize;
            let mut samples = Vec::with_capacity(cfg.n_samples * n);
            let mut orbits = Vec::with_capacity(cfg.n_samples);
            for i in 0..cfg.n_samples {
                let s = base_sample(cfg, i);
                let mut orbit = Vec::with_capacity(n);
                for j in 0..n {
                    let g = GroupElement::new(TAU * j as f64 / n as f64);
                    let mut r = rotate_sample(&s, g, cfg.convention)?;
                    r.agent_id = (i * n + j) as i64;
                    orbit.push(samples.len());
                    samples.push(r);
                }
                orbits.push(orbit);
            }
            Ok(SyntheticDataset { samples, orbits })
        }
    }
}

/// Direction of the observed displacement, in `(-π, π]`.
pub fn heading(sample: &TrajectorySample) -> Option<f64> {
    let d = sample.past.last()? - sample.past.first()?;
    (d.norm() > 0.0).then(|| d.y.atan2(d.x))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub n: usize,
    /// Length of the mean unit heading vector.
    pub mean_resultant: f64,
    pub kuiper_v: f64,
    pub p_value: f64,
    /// `p_value >= significance`; a smoke signal only.
    pub passes: bool,
}

fn kuiper_tail(lambda: f64) -> f64 {
    if lambda < 0.4 {
        return 1.0;
    }
    let mut q = 0.0;
    for j in 1..=100 {
        let j2l2 = (j * j) as f64 * lambda * lambda;
        let term = 2.0 * (4.0 * j2l2 - 1.0) * (-2.0 * j2l2).exp();
        q += term;
        if term.abs() < 1e-14 {
            break;
        }
    }
    q.clamp(0.0, 1.0)
}

/// Kuiper test of circular uniformity for headings.
pub fn heading_uniformity(angles: &[f64], significance: f64) -> Result<UniformityReport> {
    if angles.is_empty() {
        return Err(Error::invalid("no headings to test"));
    }
    let n = angles.len();
    let (sx, sy) = angles
        .iter()
        .fold((0.0, 0.0), |(x, y), a| (x + a.cos(), y + a.sin()));
    let mean_resultant = (sx * sx + sy * sy).sqrt() / n as f64;
    let mut u: Vec<f64> = angles
        .iter()
        .map(|a| (a + PI).rem_euclid(TAU) / TAU)
        .collect();
    u.sort_by(f64::total_cmp);
    let nf = n as f64;
    let (mut d_plus, mut d_minus) = (0.0f64, 0.0f64);
    for (i, &x) in u.iter().enumerate() {
        d_plus = d_plus.max((i + 1) as f64 / nf - x);
        d_minus = d_minus.max(x - i as f64 / nf);
    }
    let kuiper_v = d_plus + d_minus;
    let sq = nf.sqrt();
    let p_value = kuiper_tail((sq + 0.155 + 0.24 / sq) * kuiper_v);
    Ok(UniformityReport {
        n,
        mean_resultant,
        kuiper_v,
        p_value,
        passes: p_value >= significance,
    })
}
