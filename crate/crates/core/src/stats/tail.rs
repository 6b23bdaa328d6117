use serde::{Deserialize, Serialize};

use super::ordering::upper_tail_integral;
use super::EmpiricalDistribution;
use crate::error::{Error, Result};

/// Right-continuous empirical quantile `x_(⌈pn⌉)`, the same order-statistic
/// convention as the conformal rule.
pub fn quantile(dist: &EmpiricalDistribution, p: f64) -> f64 {
    let n = dist.n();
    let rank = ((p * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    dist.sorted_values()[rank - 1]
}

fn check_level(alpha: f64) -> Result<()> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::invalid(format!("CVaR level must lie in [0, 1), got {alpha}")));
    }
    Ok(())
}

/// Upper-tail average `(1/(1-α)) ∫_α^1 F⁻¹(u) du`.
///
/// The Rockafellar–Uryasev minimum is computed alongside and must agree.
pub fn cvar(dist: &EmpiricalDistribution, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    let tail = upper_tail_integral(dist, alpha) / (1.0 - alpha);
    let ru = cvar_rockafellar_uryasev(dist, alpha)?;
    let scale = 1.0 + dist.max().abs().max(dist.min().abs());
    if (tail - ru).abs() > 1e-9 * scale / (1.0 - alpha) {
        return Err(Error::invalid(format!(
            "CVaR representations disagree: tail average {tail} vs minimization {ru}"
        )));
    }
    Ok(tail)
}

/// `min_t { t + E[(X - t)_+] / (1-α) }` with `t` ranging over the sample
/// values, where the piecewise-linear objective has its kinks.
pub fn cvar_rockafellar_uryasev(dist: &EmpiricalDistribution, alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    let v = dist.sorted_values();
    let n = v.len();
    let mut suffix = vec![0.0; n + 1];
    for i in (0..n).rev() {
        suffix[i] = suffix[i + 1] + v[i];
    }
    let best = (0..n)
        .map(|j| {
            // values strictly after position j in sorted order are >= v[j]
            let excess = suffix[j + 1] - v[j] * (n - j - 1) as f64;
            v[j] + excess / (n as f64 * (1.0 - alpha))
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvarGap {
    /// `CVaR_α(S_f) - CVaR_α(S_fG)`.
    pub gap: f64,
    /// `(mean(S_f) - mean(S_fG)) / (1 - α)`.
    pub upper_bound: f64,
    pub ok: bool,
}

/// Checks `0 <= Δ <= E[S_f - S_fG] / (1-α)` on paired samples.
pub fn cvar_gap_check(
    plain: &EmpiricalDistribution,
    equivariant: &EmpiricalDistribution,
    alpha: f64,
    tol: f64,
) -> Result<CvarGap> {
    if plain.n() != equivariant.n() {
        return Err(Error::invalid(format!(
            "paired score sets differ in size: {} vs {}",
            plain.n(),
            equivariant.n()
        )));
    }
    let gap = cvar(plain, alpha)? - cvar(equivariant, alpha)?;
    let upper_bound = (plain.mean() - equivariant.mean()) / (1.0 - alpha);
    Ok(CvarGap {
        gap,
        upper_bound,
        ok: gap >= -tol && gap <= upper_bound + tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::from_slice(v).unwrap()
    }

    #[test]
    fn cvar_examples() {
        let d = dist(&(1..=100).map(f64::from).collect::<Vec<_>>());
        // direct tail average of the top five values
        let top5 = (96..=100).map(f64::from).sum::<f64>() / 5.0;
        assert!((cvar(&d, 0.95).unwrap() - top5).abs() < 1e-9);
        assert!((top5 - 98.0).abs() < 1e-12);
        assert!((cvar(&d, 0.0).unwrap() - d.mean()).abs() < 1e-12);
        let c = dist(&[2.5; 7]);
        for a in [0.0, 0.3, 0.9, 0.99] {
            assert!((cvar(&c, a).unwrap() - 2.5).abs() < 1e-12);
        }
        assert!(cvar(&d, 1.0).is_err());
    }

    #[test]
    fn quantile_convention() {
        let d = dist(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(quantile(&d, 0.0), 1.0);
        assert_eq!(quantile(&d, 0.25), 1.0);
        assert_eq!(quantile(&d, 0.26), 2.0);
        assert_eq!(quantile(&d, 1.0), 4.0);
    }

    #[test]
    fn gap_examples() {
        let a = dist(&[0.5, 1.5, 4.0]);
        let same = cvar_gap_check(&a, &a, 0.5, 1e-12).unwrap();
        assert_eq!(same.gap, 0.0);
        assert!(same.ok);

        // Negative control: {0,2} vs {1,1} are not icx-ordered the right way
        // round for a mean-contraction bound.
        let r = cvar_gap_check(&dist(&[0.0, 2.0]), &dist(&[1.0, 1.0]), 0.5, 1e-12).unwrap();
        assert!((r.gap - 1.0).abs() < 1e-12);
        assert_eq!(r.upper_bound, 0.0);
        assert!(!r.ok);

        assert!(cvar_gap_check(&dist(&[1.0]), &dist(&[1.0, 2.0]), 0.5, 0.0).is_err());
    }
}
