use serde::{Deserialize, Serialize};

use super::EmpiricalDistribution;
use crate::error::{Error, Result};

/// `E[(X - t)_+]` under the empirical law.
pub fn stop_loss(dist: &EmpiricalDistribution, t: f64) -> f64 {
    dist.sorted_values().iter().map(|v| (v - t).max(0.0)).sum::<f64>() / dist.n() as f64
}

/// `E[X^p]` under the empirical law.
pub fn moment(dist: &EmpiricalDistribution, p: i32) -> f64 {
    dist.sorted_values().iter().map(|v| v.powi(p)).sum::<f64>() / dist.n() as f64
}

/// `points` evenly spaced thresholds spanning the pooled support of `a` and `b`.
pub fn threshold_grid(a: &EmpiricalDistribution, b: &EmpiricalDistribution, points: usize) -> Vec<f64> {
    let lo = a.min().min(b.min());
    let hi = a.max().max(b.max());
    if points < 2 || hi <= lo {
        return vec![lo, hi];
    }
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcxReport {
    pub dominates: bool,
    /// `max_t SL_A(t) - SL_B(t)`; positive values are violations.
    pub max_violation: f64,
    /// Threshold attaining `max_violation`.
    pub worst_t: f64,
}

/// Stop-loss test of `A ⪯_icx B` on a threshold grid.
pub fn icx_dominates(
    a: &EmpiricalDistribution,
    b: &EmpiricalDistribution,
    grid: &[f64],
    tol: f64,
) -> Result<IcxReport> {
    if grid.is_empty() {
        return Err(Error::invalid("icx check needs a nonempty threshold grid"));
    }
    let (max_violation, worst_t) = grid
        .iter()
        .map(|&t| (stop_loss(a, t) - stop_loss(b, t), t))
        .fold((f64::NEG_INFINITY, grid[0]), |acc, cur| if cur.0 > acc.0 { cur } else { acc });
    Ok(IcxReport {
        dominates: max_violation <= tol,
        max_violation,
        worst_t,
    })
}

/// `∫_p^1 F⁻¹(u) du` for the right-continuous empirical quantile
/// `F⁻¹(u) = x_(⌈un⌉)`, integrated exactly over its steps.
pub fn upper_tail_integral(dist: &EmpiricalDistribution, p: f64) -> f64 {
    let n = dist.n() as f64;
    let p = p.clamp(0.0, 1.0);
    dist.sorted_values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let lo = (i as f64 / n).max(p);
            let hi = (i + 1) as f64 / n;
            if hi > lo {
                v * (hi - lo)
            } else {
                0.0
            }
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::from_slice(v).unwrap()
    }

    #[test]
    fn stop_loss_examples() {
        let d = dist(&[0.0, 2.0]);
        assert_eq!(stop_loss(&d, 1.0), 0.5);
        assert_eq!(stop_loss(&d, 2.0), 0.0);
        assert_eq!(stop_loss(&d, 5.0), 0.0);
        assert_eq!(stop_loss(&d, 0.0), d.mean());
    }

    #[test]
    fn mean_preserving_spread_dominates() {
        // Hand oracle: SL_{1,1}(t) = (1-t)_+, SL_{0,2}(t) = ((0-t)_+ + (2-t)_+)/2.
        let a = dist(&[1.0, 1.0]);
        let b = dist(&[0.0, 2.0]);
        let grid = [0.0, 0.5, 1.0, 1.5, 2.0];
        let expected_a = [1.0, 0.5, 0.0, 0.0, 0.0];
        let expected_b = [1.0, 0.75, 0.5, 0.25, 0.0];
        for ((t, ea), eb) in grid.iter().zip(expected_a).zip(expected_b) {
            assert_eq!(stop_loss(&a, *t), ea);
            assert_eq!(stop_loss(&b, *t), eb);
        }
        let r = icx_dominates(&a, &b, &grid, 0.0).unwrap();
        assert!(r.dominates);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn reflexive_with_zero_violation() {
        let a = dist(&[0.3, 1.2, 5.0]);
        let r = icx_dominates(&a, &a, &threshold_grid(&a, &a, 64), 0.0).unwrap();
        assert!(r.dominates);
        assert_eq!(r.max_violation, 0.0);
    }

    #[test]
    fn detects_non_dominance() {
        let a = dist(&[0.0, 3.0]);
        let b = dist(&[1.0, 1.0]);
        assert_eq!(stop_loss(&a, 2.0), 0.5);
        assert_eq!(stop_loss(&b, 2.0), 0.0);
        let r = icx_dominates(&a, &b, &[0.0, 1.0, 2.0, 3.0], 1e-12).unwrap();
        assert!(!r.dominates);
        assert!(r.max_violation >= 0.5);
    }

    #[test]
    fn empty_grid_is_rejected() {
        let a = dist(&[1.0]);
        assert!(icx_dominates(&a, &a, &[], 0.0).is_err());
    }

    #[test]
    fn upper_tail_integral_matches_step_sum() {
        let d = dist(&(1..=100).map(f64::from).collect::<Vec<_>>());
        assert!((upper_tail_integral(&d, 0.95) - 4.9).abs() < 1e-12);
        assert!((upper_tail_integral(&d, 0.0) - d.mean()).abs() < 1e-12);
        assert_eq!(upper_tail_integral(&d, 1.0), 0.0);
        // partial step: top value 100 over (0.995, 1]
        assert!((upper_tail_integral(&d, 0.995) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn moments() {
        let d = dist(&[1.0, 2.0, 3.0]);
        assert_eq!(moment(&d, 1), 2.0);
        assert!((moment(&d, 2) - 14.0 / 3.0).abs() < 1e-15);
        assert_eq!(moment(&d, 3), 12.0);
    }
}
