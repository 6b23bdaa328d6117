use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::tail::quantile;
use super::EmpiricalDistribution;
use crate::error::{Error, Result};
use crate::score::ScoreFn;

/// Volume of the unit Euclidean ball in `d` dimensions.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_d = V_{d-2} · 2π / d with V_0 = 1, V_1 = 2
    let mut v = if d % 2 == 0 { 1.0 } else { 2.0 };
    let mut k = if d % 2 == 0 { 2 } else { 3 };
    while k <= d {
        v *= 2.0 * PI / k as f64;
        k += 2;
    }
    v
}

/// Dimension and unit-ball constant of a conformal set's norm ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeSpec {
    pub dim: usize,
    pub kappa: f64,
}

impl VolumeSpec {
    pub fn new(dim: usize, kappa: f64) -> Result<Self> {
        if dim == 0 || !(kappa > 0.0 && kappa.is_finite()) {
            return Err(Error::invalid("volume spec needs dim >= 1 and a positive kappa"));
        }
        Ok(Self { dim, kappa })
    }

    /// Ball of the given score over a horizon of `horizon` planar points.
    /// The max-of-steps score gives a product of discs, `κ = π^T`.
    pub fn for_score(kind: ScoreFn, horizon: usize) -> Result<Self> {
        let dim = 2 * horizon;
        match kind {
            ScoreFn::EuclideanFull => Self::new(dim, unit_ball_volume(dim)),
            ScoreFn::EuclideanMax => Self::new(dim, PI.powi(horizon as i32)),
        }
    }
}

pub fn set_volume(vol: &VolumeSpec, radius: f64) -> f64 {
    vol.kappa * radius.powi(vol.dim as i32)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeGap {
    /// Mean over `p ∈ (1-α, 1)` of `κ (q_f(p)^d - q_fG(p)^d)`.
    pub dvol_mean: f64,
    /// `(d κ / (1-α)) q₁^{d-1} (mean(S_f) - mean(S_fG))`, `q₁` the largest
    /// observed score of either set.
    pub bound: f64,
    /// Natural logs of the two quantities above (`-∞` when not positive).
    pub log_dvol_mean: f64,
    pub log_bound: f64,
    /// `d · ln(q_f(1-α) / q_fG(1-α))`, the log volume ratio of the two sets.
    pub log_radius_ratio: f64,
    /// `κ q₁^d`, the unit in which `tol` is applied.
    pub scale: f64,
    pub ok: bool,
}

fn safe_ln(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Expected upper-tail volume gap and its mean-contraction bound. All powers
/// are taken relative to `q₁^d` so that large `d` cannot overflow; `tol`
/// applies in those relative units.
pub fn volume_gap(
    plain: &EmpiricalDistribution,
    equivariant: &EmpiricalDistribution,
    alpha: f64,
    vol: &VolumeSpec,
    grid_points: usize,
    tol: f64,
) -> Result<VolumeGap> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    if plain.n() != equivariant.n() {
        return Err(Error::invalid("volume gap needs paired score sets of equal size"));
    }
    let grid_points = grid_points.max(1);
    let d = vol.dim as i32;
    let q1 = plain.max().max(equivariant.max());
    if q1 <= 0.0 {
        return Ok(VolumeGap {
            dvol_mean: 0.0,
            bound: 0.0,
            log_dvol_mean: f64::NEG_INFINITY,
            log_bound: f64::NEG_INFINITY,
            log_radius_ratio: 0.0,
            scale: 0.0,
            ok: true,
        });
    }
    let scaled_dvol = (0..grid_points)
        .map(|j| {
            let p = 1.0 - alpha + alpha * (j as f64 + 0.5) / grid_points as f64;
            (quantile(plain, p) / q1).powi(d) - (quantile(equivariant, p) / q1).powi(d)
        })
        .sum::<f64>()
        / grid_points as f64;
    let scaled_bound = vol.dim as f64 / (1.0 - alpha) * (plain.mean() - equivariant.mean()) / q1;
    let log_scale = vol.kappa.ln() + vol.dim as f64 * q1.ln();
    let qf = quantile(plain, 1.0 - alpha);
    let qg = quantile(equivariant, 1.0 - alpha);
    Ok(VolumeGap {
        dvol_mean: scaled_dvol * log_scale.exp(),
        bound: scaled_bound * log_scale.exp(),
        log_dvol_mean: log_scale + safe_ln(scaled_dvol),
        log_bound: log_scale + safe_ln(scaled_bound),
        log_radius_ratio: vol.dim as f64 * (safe_ln(qf) - safe_ln(qg)),
        scale: log_scale.exp(),
        ok: scaled_dvol >= -tol && scaled_dvol <= scaled_bound + tol,
    })
}
