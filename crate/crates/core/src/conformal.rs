//! Split conformal calibration, prediction sets and empirical coverage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FutureTrajectory, PastTrajectory, TrajectorySample};
use crate::predictor::{EquivariantizedPredictor, Predictor};
use crate::group::{apply_input_action, apply_output_action, GroupElement};
use crate::score::{score, score_split, Provenance, ScoreFn, ScoreMode, ScoreSet};

/// Outcome of calibrating on a score set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub alpha: f64,
    /// Calibration size.
    pub m: usize,
    /// Order-statistic index `⌈(m+1)(1-α)⌉`, 1-based.
    pub k: usize,
    /// The `k`-th smallest score, or `+∞` when `k > m`.
    pub q: f64,
    /// Set when `k > m` and the prediction set is the whole label space.
    pub infinite: bool,
    pub provenance: Provenance,
}

/// `⌈(m+1)(1-α)⌉`, at least 1. The product is nudged down by 1e-9 so that
/// values like `20 * 0.95` that land a rounding error above an integer are
/// not bumped to the next order statistic.
pub fn order_statistic_index(m: usize, alpha: f64) -> usize {
    let x = (m as f64 + 1.0) * (1.0 - alpha);
    ((x - 1e-9).ceil() as usize).max(1)
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Non-randomized split conformal quantile.
pub fn calibrate(scores: &ScoreSet, alpha: f64) -> Result<CalibrationResult> {
    check_alpha(alpha)?;
    calibrate_values(scores.values(), alpha, scores.provenance())
}

/// [`calibrate`] on raw scores.
pub fn calibrate_values(values: &[f64], alpha: f64, provenance: Provenance) -> Result<CalibrationResult> {
    check_alpha(alpha)?;
    if values.is_empty() {
        return Err(Error::invalid("cannot calibrate on an empty score set"));
    }
    let m = values.len();
    let k = order_statistic_index(m, alpha);
    let (q, infinite) = if k > m {
        (f64::INFINITY, true)
    } else {
        let mut sorted = values.to_vec();
        let (_, kth, _) = sorted.select_nth_unstable_by(k - 1, f64::total_cmp);
        (*kth, false)
    };
    Ok(CalibrationResult {
        alpha,
        m,
        k,
        q,
        infinite,
        provenance,
    })
}

/// A closed ball `{y : s(center, y) <= radius}` in label space.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalSet {
    pub center: FutureTrajectory,
    pub radius: f64,
    pub norm: ScoreFn,
    /// Flattened label dimension, `2 * horizon`.
    pub dim: usize,
}

impl ConformalSet {
    pub fn contains(&self, y: &FutureTrajectory) -> Result<bool> {
        if self.radius.is_infinite() {
            return Ok(true);
        }
        Ok(score(self.norm, &self.center, y)? <= self.radius)
    }
}

pub fn prediction_set(
    predictor: &dyn Predictor,
    x: &PastTrajectory,
    calib: &CalibrationResult,
    norm: ScoreFn,
) -> Result<ConformalSet> {
    let center = predictor.predict(x)?;
    let dim = 2 * center.len();
    Ok(ConformalSet {
        center,
        radius: calib.q,
        norm,
        dim,
    })
}

/// Fraction of scores at or below `q`.
pub fn coverage_from_scores(scores: &[f64], q: f64) -> f64 {
    if scores.is_empty() {
        return f64::NAN;
    }
    scores.iter().filter(|&&s| s <= q).count() as f64 / scores.len() as f64
}

/// Fraction of test samples whose label falls in its prediction set. The
/// scoring mode must produce the same provenance the calibration used.
pub fn empirical_coverage(
    predictor: &dyn Predictor,
    test: &[TrajectorySample],
    calib: &CalibrationResult,
    norm: ScoreFn,
    mode: ScoreMode<'_>,
) -> Result<f64> {
    let provenance = mode.provenance_for(predictor);
    if provenance != calib.provenance {
        return Err(Error::invalid(format!(
            "calibrated on {} scores but asked to test with {} scores",
            calib.provenance, provenance
        )));
    }
    if test.is_empty() {
        return Err(Error::invalid("cannot evaluate coverage on an empty test split"));
    }
    let scores = score_split(norm, predictor, test, mode)?;
    Ok(coverage_from_scores(scores.values(), calib.q))
}

/// Checks `C(φ_g x) = ψ_g C(x)` for an equivariantized predictor over a
/// finite group: equal radii and rotated centers agreeing to 1e-9.
pub fn equivariance_of_sets(
    predictor: &EquivariantizedPredictor,
    x: &PastTrajectory,
    g: GroupElement,
    calib: &CalibrationResult,
    norm: ScoreFn,
) -> Result<bool> {
    if !predictor.group().spec().is_finite_group() {
        return Err(Error::invalid("set equivariance is only exact for cyclic groups"));
    }
    let conv = predictor.convention();
    let at_x = prediction_set(predictor, x, calib, norm)?;
    let moved = apply_input_action(g, x, conv)?;
    let at_gx = prediction_set(predictor, &moved, calib, norm)?;
    let anchor = conv.pivot_for(x)?;
    let image_center = apply_output_action(g, &at_x.center, conv, Some(anchor))?;
    let same_center = image_center
        .points()
        .iter()
        .zip(at_gx.center.points())
        .all(|(a, b)| (*a - *b).norm() <= 1e-9);
    let same_radius = at_x.radius == at_gx.radius || (at_x.radius - at_gx.radius).abs() <= 1e-12;
    Ok(same_center && same_radius && at_x.norm == at_gx.norm && at_x.dim == at_gx.dim)
}
