use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Trajectory, TrajectorySample};
use crate::group::{apply_input_action, apply_output_action, ActionConvention, Group};
use crate::predictor::{evaluate_orbit_terms, Predictor};
use crate::score::{orbit_score_terms, score, ScoreFn};

pub fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

fn check_orbits(orbits: &[Vec<f64>]) -> Result<usize> {
    let size = orbits
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("no orbit groups given"))?;
    if size == 0 {
        return Err(Error::invalid("orbit groups must be nonempty"));
    }
    if orbits.iter().any(|o| o.len() != size) {
        return Err(Error::invalid("orbit groups have differing sizes"));
    }
    Ok(size)
}

/// Law of total variance over equally sized orbit groups, all with divisor `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDecomposition {
    pub total: f64,
    /// Variance of the orbit means.
    pub between: f64,
    /// Mean of the within-orbit variances.
    pub within: f64,
}

pub fn variance_decomposition(orbits: &[Vec<f64>]) -> Result<VarianceDecomposition> {
    check_orbits(orbits)?;
    let pooled: Vec<f64> = orbits.iter().flatten().copied().collect();
    let means: Vec<f64> = orbits
        .iter()
        .map(|o| o.iter().sum::<f64>() / o.len() as f64)
        .collect();
    Ok(VarianceDecomposition {
        total: population_variance(&pooled),
        between: population_variance(&means),
        within: orbits.iter().map(|o| population_variance(o)).sum::<f64>() / orbits.len() as f64,
    })
}

/// `(1 / (2|G|²))` times the orbit-averaged double sum `Σ_{g,h} (Z_g - Z_h)²`,
/// evaluated by brute force.
pub fn orbit_pair_identity(orbits: &[Vec<f64>]) -> Result<f64> {
    let size = check_orbits(orbits)? as f64;
    let total: f64 = orbits
        .iter()
        .map(|o| {
            let mut s = 0.0;
            for a in o {
                for b in o {
                    s += (a - b).powi(2);
                }
            }
            s / (2.0 * size * size)
        })
        .sum();
    Ok(total / orbits.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzGap {
    /// `Var(s(f(X),Y)) - Var(Π_G[s;f](X,Y))`.
    pub gap: f64,
    /// `(L²/2) · mean_{i,g} ‖f(x_i) - U_g(x_i)‖²`, from cached orbit terms.
    pub bound: f64,
    /// Same bound recomputed with an explicit per-element loop.
    pub bound_alt: f64,
    pub ok: bool,
}

/// Compares the variance reduction of symmetrized scores with the
/// Lipschitz-constant bound on the orbit spread of predictions.
pub fn lipschitz_gap_bound(
    kind: ScoreFn,
    base: &dyn Predictor,
    group: &Group,
    conv: ActionConvention,
    samples: &[TrajectorySample],
    lipschitz: f64,
    tol: f64,
) -> Result<LipschitzGap> {
    if samples.is_empty() {
        return Err(Error::invalid("Lipschitz bound needs samples"));
    }
    let mut plain = Vec::with_capacity(samples.len());
    let mut sym = Vec::with_capacity(samples.len());
    let mut spread = 0.0;
    let mut spread_alt = 0.0;
    for s in samples {
        let fx = base.predict(&s.past)?;
        plain.push(score(kind, &fx, &s.future)?);
        let terms = orbit_score_terms(kind, base, group, conv, &s.past, &s.future)?;
        sym.push(terms.iter().sum::<f64>() / terms.len() as f64);

        for u in evaluate_orbit_terms(base, group, &s.past, conv)? {
            spread += fx.flat_distance_sq(&u)?;
        }
        let anchor = conv.pivot_for(&s.past)?;
        for &g in group.elements() {
            let moved = apply_input_action(g.inverse(), &s.past, conv)?;
            let back = apply_output_action(g, &base.predict(&moved)?, conv, Some(anchor))?;
            spread_alt += fx
                .points()
                .iter()
                .zip(back.points())
                .map(|(a, b)| (a.x - b.x).powi(2) + (a.y - b.y).powi(2))
                .sum::<f64>();
        }
    }
    let count = (samples.len() * group.len()) as f64;
    let factor = lipschitz * lipschitz / 2.0;
    let gap = population_variance(&plain) - population_variance(&sym);
    let bound = factor * spread / count;
    Ok(LipschitzGap {
        gap,
        bound,
        bound_alt: factor * spread_alt / count,
        ok: gap <= bound + tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongConvexityCheck {
    /// Mean symmetrized squared score.
    pub lhs: f64,
    /// Mean of `‖f^G(x) - y‖² + (m/2) · orbit spread`.
    pub rhs: f64,
    /// Smallest per-sample `lhs_i - rhs_i`.
    pub min_margin: f64,
    pub ok: bool,
}

/// Per-sample Jensen lower bound for the squared flattened Euclidean score,
/// which is 2-strongly convex; `strong_convexity` must not exceed 2.
pub fn strong_convexity_lower_bound(
    base: &dyn Predictor,
    group: &Group,
    conv: ActionConvention,
    samples: &[TrajectorySample],
    strong_convexity: f64,
    tol: f64,
) -> Result<StrongConvexityCheck> {
    if !(strong_convexity > 0.0 && strong_convexity <= 2.0) {
        return Err(Error::invalid(format!(
            "squared Euclidean score is 2-strongly convex; modulus {strong_convexity} is not admissible"
        )));
    }
    if samples.is_empty() {
        return Err(Error::invalid("strong convexity check needs samples"));
    }
    let mut lhs_sum = 0.0;
    let mut rhs_sum = 0.0;
    let mut min_margin = f64::INFINITY;
    for s in samples {
        let z = orbit_score_terms(ScoreFn::EuclideanFull, base, group, conv, &s.past, &s.future)?;
        let lhs = z.iter().map(|v| v * v).sum::<f64>() / z.len() as f64;
        let terms = evaluate_orbit_terms(base, group, &s.past, conv)?;
        let center = Trajectory::mean_of(&terms)?;
        let spread = terms
            .iter()
            .map(|u| u.flat_distance_sq(&center))
            .sum::<Result<f64>>()?
            / terms.len() as f64;
        let rhs = center.flat_distance_sq(&s.future)? + strong_convexity / 2.0 * spread;
        lhs_sum += lhs;
        rhs_sum += rhs;
        min_margin = min_margin.min(lhs - rhs);
    }
    let n = samples.len() as f64;
    Ok(StrongConvexityCheck {
        lhs: lhs_sum / n,
        rhs: rhs_sum / n,
        min_margin,
        ok: min_margin >= -tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use crate::predictor::{ConstantVelocity, FnPredictor, PoseBiasedVelocity};

    #[test]
    fn decomposition_examples() {
        let d = variance_decomposition(&[vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
        assert!((d.total - 0.5).abs() < 1e-15);
        assert_eq!(d.between, 0.0);
        assert!((d.within - 0.5).abs() < 1e-15);

        let c = variance_decomposition(&[vec![3.0, 3.0, 3.0], vec![1.0, 1.0, 1.0]]).unwrap();
        assert_eq!(c.within, 0.0);
        assert_eq!(c.total, c.between);
        assert!(variance_decomposition(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(variance_decomposition(&[]).is_err());
    }

    #[test]
    fn double_sum_matches_within_variance() {
        let orbits = vec![vec![0.1, 0.7, 2.0, 0.4], vec![1.0, 1.5, 0.2, 0.9], vec![3.0, 3.0, 3.0, 3.0]];
        let d = variance_decomposition(&orbits).unwrap();
        assert!((orbit_pair_identity(&orbits).unwrap() - d.within).abs() < 1e-12);
        assert!((d.total - d.between - d.within).abs() < 1e-12);
    }

    fn samples() -> Vec<TrajectorySample> {
        (0..30)
            .map(|i| {
                let a = 0.41 * i as f64;
                let v = Point::new(a.cos(), a.sin()) * 0.6;
                let past: Trajectory = (0..8).map(|t| Point::new(1.0, -2.0) + v * t as f64).collect();
                let wiggle = Point::new((i as f64).sin() * 0.2, (i as f64 * 1.7).cos() * 0.2);
                let future: Trajectory = (8..20).map(|t| Point::new(1.0, -2.0) + v * t as f64 + wiggle).collect();
                TrajectorySample::new(past, future)
            })
            .collect()
    }

    #[test]
    fn equivariant_base_has_no_gap_or_bound() {
        let g = Group::cyclic(4).unwrap();
        let r = lipschitz_gap_bound(ScoreFn::EuclideanFull, &ConstantVelocity { horizon: 12 }, &g, ActionConvention::LastObserved, &samples(), 1.0, 1e-9).unwrap();
        assert!(r.gap.abs() < 1e-9 && r.bound.abs() < 1e-9 && r.ok);
    }

    #[test]
    fn bound_paths_agree() {
        let g = Group::cyclic(4).unwrap();
        let base = PoseBiasedVelocity { horizon: 12, bias: Point::new(0.5, 0.0) };
        let r = lipschitz_gap_bound(ScoreFn::EuclideanFull, &base, &g, ActionConvention::LastObserved, &samples(), 1.0, 1e-9).unwrap();
        assert!((r.bound - r.bound_alt).abs() <= 1e-12);
        // ‖b - R_g b‖² over C4 averages to 2‖b‖², over 12 steps, times 1/2.
        assert!((r.bound - 0.5 * 12.0 * 2.0 * 0.25).abs() < 1e-9);
    }

    #[test]
    fn strong_convexity_examples() {
        let g = Group::cyclic(4).unwrap();
        let eq = strong_convexity_lower_bound(&ConstantVelocity { horizon: 12 }, &g, ActionConvention::LastObserved, &samples(), 2.0, 1e-9).unwrap();
        assert!(eq.ok && (eq.lhs - eq.rhs).abs() < 1e-9);

        // Constant offset c about the origin: orbit spread is exactly ‖c‖².
        let c = Point::new(0.6, -0.8);
        let base = FnPredictor::new("const", 1, move |_: &Trajectory| Trajectory::new(vec![c]));
        let s = vec![TrajectorySample::new(Trajectory::from_xy(&[(2.0, 1.0)]), Trajectory::from_xy(&[(0.3, 0.4)]))];
        let r = strong_convexity_lower_bound(&base, &g, ActionConvention::Origin, &s, 2.0, 1e-12).unwrap();
        let spread = 1.0; // ‖c‖²
        let center_term = 0.3f64.powi(2) + 0.4f64.powi(2);
        assert!((r.rhs - (center_term + spread)).abs() < 1e-12);
        assert!((r.lhs - r.rhs).abs() < 1e-12);
        assert!(strong_convexity_lower_bound(&base, &g, ActionConvention::Origin, &s, 3.0, 0.0).is_err());
    }
}
