//! Brute-force reference computations used to cross-check the library.
//!
//! Nothing here calls into `group` or `score`; rotations and norms are
//! spelled out on raw coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FutureTrajectory, PastTrajectory, Point, Trajectory};
use crate::group::ActionConvention;
use crate::predictor::Predictor;
use crate::score::ScoreFn;

fn rotate_raw(pts: &[Point], angle: f64, cx: f64, cy: f64) -> Vec<Point> {
    let (s, c) = angle.sin_cos();
    pts.iter()
        .map(|p| {
            let (dx, dy) = (p.x - cx, p.y - cy);
            Point::new(cx + c * dx - s * dy, cy + s * dx + c * dy)
        })
        .collect()
}

fn raw_score(kind: ScoreFn, pred: &[Point], label: &[Point]) -> f64 {
    let mut acc = 0.0f64;
    for i in 0..pred.len() {
        let dx = pred[i].x - label[i].x;
        let dy = pred[i].y - label[i].y;
        match kind {
            ScoreFn::EuclideanFull => acc += dx * dx + dy * dy,
            ScoreFn::EuclideanMax => acc = acc.max((dx * dx + dy * dy).sqrt()),
        }
    }
    match kind {
        ScoreFn::EuclideanFull => acc.sqrt(),
        ScoreFn::EuclideanMax => acc,
    }
}

/// Average of `s(f(R_{-θ_k} x), R_{-θ_k} y)` over `θ_k = 2πk/n`, by explicit loop.
pub fn oracle_symmetrized_score(
    kind: ScoreFn,
    base: &dyn Predictor,
    n: u32,
    conv: ActionConvention,
    x: &PastTrajectory,
    y: &FutureTrajectory,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("cyclic order must be positive"));
    }
    let last = *x
        .points()
        .last()
        .ok_or_else(|| Error::invalid("empty input trajectory"))?;
    let (cx, cy) = match conv {
        ActionConvention::Origin => (0.0, 0.0),
        ActionConvention::LastObserved => (last.x, last.y),
    };
    let mut total = 0.0;
    for k in 0..n {
        let angle = -(k as f64) * std::f64::consts::TAU / n as f64;
        let rx = Trajectory::new(rotate_raw(x.points(), angle, cx, cy));
        let ry = rotate_raw(y.points(), angle, cx, cy);
        let pred = base.predict(&rx)?;
        if pred.len() != ry.len() {
            return Err(Error::invalid("prediction and label lengths differ"));
        }
        total += raw_score(kind, pred.points(), &ry);
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitStat {
    pub mean: f64,
    /// Population variance within the orbit.
    pub variance: f64,
}

/// Per-orbit mean and variance of plain scores.
pub fn oracle_orbit_stats(plain_scores_by_orbit: &[Vec<f64>]) -> Result<Vec<OrbitStat>> {
    let size = match plain_scores_by_orbit.first() {
        Some(o) if !o.is_empty() => o.len(),
        _ => return Err(Error::invalid("no orbits or an empty orbit")),
    };
    if plain_scores_by_orbit.iter().any(|o| o.len() != size) {
        return Err(Error::invalid("orbits have different sizes"));
    }
    Ok(plain_scores_by_orbit
        .iter()
        .map(|o| {
            let mut mean = 0.0;
            for v in o {
                mean += v;
            }
            mean /= size as f64;
            let mut var = 0.0;
            for v in o {
                var += (v - mean) * (v - mean);
            }
            OrbitStat {
                mean,
                variance: var / size as f64,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::group::Group;
    use crate::predictor::{equivariantize, ConstantVelocity, PoseBiasedVelocity, PredictorHandle};
    use crate::score::{score, symmetrized_score};
    use crate::synthetic::{generate, Invariance, SyntheticConfig};

    fn biased() -> PoseBiasedVelocity {
        PoseBiasedVelocity {
            horizon: 12,
            bias: Point::new(0.5, 0.0),
        }
    }

    #[test]
    fn matches_library_on_random_cases() {
        let data = generate(&SyntheticConfig {
            n_samples: 100,
            seed: 3,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let g = Group::cyclic(4).unwrap();
        let conv = ActionConvention::LastObserved;
        for s in &data.samples {
            let lib = symmetrized_score(ScoreFn::EuclideanFull, &biased(), &g, conv, &s.past, &s.future).unwrap();
            let ora = oracle_symmetrized_score(ScoreFn::EuclideanFull, &biased(), 4, conv, &s.past, &s.future).unwrap();
            assert!((lib - ora).abs() <= 1e-12, "{lib} vs {ora}");
        }
    }

    #[test]
    fn equivariant_base_and_trivial_group_reduce_to_plain() {
        let data = generate(&SyntheticConfig {
            n_samples: 20,
            seed: 4,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let cv = ConstantVelocity { horizon: 12 };
        for s in &data.samples {
            let plain = score(ScoreFn::EuclideanFull, &cv.predict(&s.past).unwrap(), &s.future).unwrap();
            let sym = oracle_symmetrized_score(ScoreFn::EuclideanFull, &cv, 6, ActionConvention::LastObserved, &s.past, &s.future).unwrap();
            assert!((plain - sym).abs() < 1e-12);
            let b = biased();
            let plain_b = score(ScoreFn::EuclideanMax, &b.predict(&s.past).unwrap(), &s.future).unwrap();
            let c1 = oracle_symmetrized_score(ScoreFn::EuclideanMax, &b, 1, ActionConvention::Origin, &s.past, &s.future).unwrap();
            assert!((plain_b - c1).abs() < 1e-12);
        }
    }

    #[test]
    fn hand_built_orbits() {
        let st = oracle_orbit_stats(&[vec![1.0, 3.0], vec![2.0, 2.0]]).unwrap();
        assert_eq!(st[0].mean, 2.0);
        assert_eq!(st[0].variance, 1.0);
        assert_eq!(st[1].variance, 0.0);
        assert!(oracle_orbit_stats(&[vec![1.0], vec![1.0, 2.0]]).is_err());
        assert!(oracle_orbit_stats(&[]).is_err());
    }

    #[test]
    fn orbit_means_match_symmetrized_representative() {
        let n = 8;
        let data = generate(&SyntheticConfig {
            n_samples: 50,
            invariance: Invariance::OrbitAugment(n),
            seed: 5,
            ..SyntheticConfig::default()
        })
        .unwrap();
        let b = biased();
        let by_orbit: Vec<Vec<f64>> = data
            .orbits
            .iter()
            .map(|o| {
                o.iter()
                    .map(|&i| {
                        let s = &data.samples[i];
                        score(ScoreFn::EuclideanFull, &b.predict(&s.past).unwrap(), &s.future).unwrap()
                    })
                    .collect()
            })
            .collect();
        let stats = oracle_orbit_stats(&by_orbit).unwrap();
        let g = Group::cyclic(n).unwrap();
        let mut worst = 0.0f64;
        for (o, st) in data.orbits.iter().zip(&stats) {
            let rep = &data.samples[o[3]];
            let sym = symmetrized_score(ScoreFn::EuclideanFull, &b, &g, ActionConvention::LastObserved, &rep.past, &rep.future).unwrap();
            worst = worst.max((st.mean - sym).abs());
        }
        assert!(worst < 1e-9, "{worst}");

        // equivariantized scores are constant on each orbit
        let eq = equivariantize(Arc::new(b) as PredictorHandle, Arc::new(g), ActionConvention::LastObserved);
        for o in &data.orbits {
            let vals: Vec<f64> = o
                .iter()
                .map(|&i| {
                    let s = &data.samples[i];
                    score(ScoreFn::EuclideanFull, &eq.predict(&s.past).unwrap(), &s.future).unwrap()
                })
                .collect();
            let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread < 1e-9);
        }
    }
}
