//! Nonconformity scores and the orbit-averaged (symmetrized) score.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FutureTrajectory, PastTrajectory, TrajectorySample};
use crate::group::{apply_input_action, apply_output_action, ActionConvention, Group};
use crate::predictor::Predictor;

/// Rotation-invariant displacement scores between a prediction and a label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreFn {
    /// L2 norm of the flattened coordinate difference over the horizon.
    #[default]
    EuclideanFull,
    /// Largest per-step L2 displacement.
    EuclideanMax,
}

impl FromStr for ScoreFn {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "euclidean-full" | "euclidean" => Ok(ScoreFn::EuclideanFull),
            "euclidean-max" => Ok(ScoreFn::EuclideanMax),
            other => Err(Error::invalid(format!("unknown score `{other}`"))),
        }
    }
}

impl fmt::Display for ScoreFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreFn::EuclideanFull => "euclidean-full",
            ScoreFn::EuclideanMax => "euclidean-max",
        })
    }
}

pub fn score(kind: ScoreFn, prediction: &FutureTrajectory, label: &FutureTrajectory) -> Result<f64> {
    if prediction.len() != label.len() {
        return Err(Error::invalid(format!(
            "prediction has {} steps but label has {}",
            prediction.len(),
            label.len()
        )));
    }
    let steps = prediction.points().iter().zip(label.points());
    Ok(match kind {
        ScoreFn::EuclideanFull => steps.map(|(p, y)| (*p - *y).norm_sq()).sum::<f64>().sqrt(),
        ScoreFn::EuclideanMax => steps.map(|(p, y)| p.distance(*y)).fold(0.0, f64::max),
    })
}

/// Per-element orbit scores `Z_g = s(f(φ_{g⁻¹}x), ψ_{g⁻¹}y)`.
pub fn orbit_score_terms(
    kind: ScoreFn,
    base: &dyn Predictor,
    group: &Group,
    conv: ActionConvention,
    x: &PastTrajectory,
    y: &FutureTrajectory,
) -> Result<Vec<f64>> {
    let anchor = conv.pivot_for(x)?;
    group
        .elements()
        .iter()
        .map(|&g| {
            let inv = g.inverse();
            let pred = base.predict(&apply_input_action(inv, x, conv)?)?;
            let label = apply_output_action(inv, y, conv, Some(anchor))?;
            score(kind, &pred, &label)
        })
        .collect()
}

/// The symmetrization operator: the Haar average of [`orbit_score_terms`].
pub fn symmetrized_score(
    kind: ScoreFn,
    base: &dyn Predictor,
    group: &Group,
    conv: ActionConvention,
    x: &PastTrajectory,
    y: &FutureTrajectory,
) -> Result<f64> {
    let terms = orbit_score_terms(kind, base, group, conv, x, y)?;
    Ok(terms.iter().sum::<f64>() / terms.len() as f64)
}

/// Where a set of scores came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// `s(f(x), y)` for the base predictor.
    Plain,
    /// Orbit-averaged score of the base predictor.
    Symmetrized,
    /// `s(f^G(x), y)` for the orbit-averaged predictor.
    Equivariantized,
}

impl Provenance {
    pub const ALL: [Provenance; 3] = [
        Provenance::Plain,
        Provenance::Equivariantized,
        Provenance::Symmetrized,
    ];
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Plain => "plain",
            Provenance::Symmetrized => "symmetrized",
            Provenance::Equivariantized => "equivariantized",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreMeta {
    pub predictor: String,
    pub group: Option<String>,
    pub split: Option<usize>,
}

/// A finite multiset of nonnegative scores with provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSet {
    values: Vec<f64>,
    provenance: Provenance,
    pub meta: ScoreMeta,
}

impl ScoreSet {
    pub fn new(values: Vec<f64>, provenance: Provenance, meta: ScoreMeta) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::invalid(format!("score {i} is {v}; scores must be finite and >= 0")));
        }
        Ok(Self {
            values,
            provenance,
            meta,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Scores at the given indices, keeping provenance.
    pub fn select(&self, indices: &[usize]) -> ScoreSet {
        ScoreSet {
            values: indices.iter().map(|&i| self.values[i]).collect(),
            provenance: self.provenance,
            meta: self.meta.clone(),
        }
    }

    /// Writes `index,score,provenance` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let ser = |e: csv::Error| Error::Serialization(e.to_string());
        w.write_record(["index", "score", "provenance"]).map_err(ser)?;
        let prov = self.provenance.to_string();
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([i.to_string(), v.to_string(), prov.clone()]).map_err(ser)?;
        }
        w.flush().map_err(|e| Error::Serialization(e.to_string()))
    }
}

/// How test or calibration samples are scored.
#[derive(Debug, Clone, Copy)]
pub enum ScoreMode<'a> {
    /// `s(predictor(x), y)`.
    Plain,
    /// Orbit-averaged score of the given (base) predictor.
    Symmetrized {
        group: &'a Group,
        conv: ActionConvention,
    },
}

impl ScoreMode<'_> {
    /// Provenance of scores produced by this mode with `predictor`.
    pub fn provenance_for(&self, predictor: &dyn Predictor) -> Provenance {
        match self {
            ScoreMode::Plain if predictor.is_equivariantized() => Provenance::Equivariantized,
            ScoreMode::Plain => Provenance::Plain,
            ScoreMode::Symmetrized { .. } => Provenance::Symmetrized,
        }
    }
}

/// One score per sample, in sample order.
pub fn score_split(
    kind: ScoreFn,
    predictor: &dyn Predictor,
    split: &[TrajectorySample],
    mode: ScoreMode<'_>,
) -> Result<ScoreSet> {
    if split.is_empty() {
        return Err(Error::invalid("cannot score an empty split"));
    }
    let values = split
        .par_iter()
        .map(|sample| match mode {
            ScoreMode::Plain => score(kind, &predictor.predict(&sample.past)?, &sample.future),
            ScoreMode::Symmetrized { group, conv } => {
                symmetrized_score(kind, predictor, group, conv, &sample.past, &sample.future)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let group = match mode {
        ScoreMode::Symmetrized { group, .. } => Some(group.spec().to_string()),
        ScoreMode::Plain => None,
    };
    ScoreSet::new(
        values,
        mode.provenance_for(predictor),
        ScoreMeta {
            predictor: predictor.tag(),
            group,
            split: None,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Trajectory};
    use crate::group::GroupSpec;
    use crate::predictor::{equivariantize, ConstantVelocity, FnPredictor, PoseBiasedVelocity, PredictorHandle};
    use std::sync::Arc;

    #[test]
    fn exact_prediction_scores_zero() {
        let y = Trajectory::from_xy(&[(1.0, 2.0), (3.0, 4.0)]);
        assert_eq!(score(ScoreFn::EuclideanFull, &y, &y).unwrap(), 0.0);
        assert_eq!(score(ScoreFn::EuclideanMax, &y, &y).unwrap(), 0.0);
    }

    #[test]
    fn three_four_five() {
        let pred = Trajectory::zeros(2);
        let label = Trajectory::from_xy(&[(3.0, 0.0), (0.0, 4.0)]);
        assert_eq!(score(ScoreFn::EuclideanFull, &pred, &label).unwrap(), 5.0);
        assert_eq!(score(ScoreFn::EuclideanMax, &pred, &label).unwrap(), 4.0);
    }

    #[test]
    fn mismatched_horizons_are_rejected() {
        let err = score(ScoreFn::EuclideanFull, &Trajectory::zeros(2), &Trajectory::zeros(3));
        assert!(matches!(err, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn symmetrized_score_of_equivariant_base_is_plain() {
        let base = ConstantVelocity { horizon: 3 };
        let x = Trajectory::from_xy(&[(0.0, 0.0), (1.0, 0.5)]);
        let y = Trajectory::from_xy(&[(2.1, 0.9), (3.0, 1.6), (4.2, 2.0)]);
        let g = Group::cyclic(8).unwrap();
        let plain = score(ScoreFn::EuclideanFull, &base.predict(&x).unwrap(), &y).unwrap();
        let sym = symmetrized_score(ScoreFn::EuclideanFull, &base, &g, ActionConvention::LastObserved, &x, &y).unwrap();
        assert!((plain - sym).abs() < 1e-12);
    }

    #[test]
    fn zero_predictor_symmetrizes_to_label_norm() {
        let zero = FnPredictor::new("zero", 2, |_: &Trajectory| Trajectory::zeros(2));
        let x = Trajectory::from_xy(&[(1.0, 1.0)]);
        let y = Trajectory::from_xy(&[(3.0, 0.0), (0.0, 4.0)]);
        let g = Group::cyclic(4).unwrap();
        let sym = symmetrized_score(ScoreFn::EuclideanFull, &zero, &g, ActionConvention::Origin, &x, &y).unwrap();
        assert!((sym - 5.0).abs() < 1e-12);
    }

    #[test]
    fn pose_biased_symmetrized_matches_enumeration() {
        let base = PoseBiasedVelocity { horizon: 2, bias: Point::new(0.5, 0.0) };
        let x = Trajectory::from_xy(&[(0.0, 0.0), (1.0, 0.0)]);
        let y = Trajectory::from_xy(&[(2.0, 0.1), (3.0, -0.1)]);
        // Hand enumeration about the last observed point (1, 0): rotating the
        // input by -θ, predicting, then rotating the label by -θ as well.
        let mut acc = 0.0;
        for j in 0..4 {
            let theta = -(j as f64) * std::f64::consts::FRAC_PI_2;
            let (c, s) = (theta.cos(), theta.sin());
            let rot = |p: Point| Point::new(1.0 + c * (p.x - 1.0) - s * p.y, s * (p.x - 1.0) + c * p.y);
            let v = rot(Point::new(1.0, 0.0)) - rot(Point::new(0.0, 0.0));
            let pred = [Point::new(1.0, 0.0) + v + base.bias, Point::new(1.0, 0.0) + v * 2.0 + base.bias];
            let lab = [rot(y[0]), rot(y[1])];
            acc += ((pred[0] - lab[0]).norm_sq() + (pred[1] - lab[1]).norm_sq()).sqrt();
        }
        let g = Group::cyclic(4).unwrap();
        let sym = symmetrized_score(ScoreFn::EuclideanFull, &base, &g, ActionConvention::LastObserved, &x, &y).unwrap();
        assert!((sym - acc / 4.0).abs() < 1e-12);
    }

    #[test]
    fn score_is_rotation_invariant() {
        let a = Trajectory::from_xy(&[(0.3, 1.0), (2.0, -1.0), (0.5, 0.5)]);
        let b = Trajectory::from_xy(&[(1.3, 0.2), (-2.0, 1.5), (0.0, 0.9)]);
        let pivot = Some(Point::new(0.7, -0.4));
        for g in Group::cyclic(8).unwrap().elements() {
            for kind in [ScoreFn::EuclideanFull, ScoreFn::EuclideanMax] {
                let ra = apply_output_action(*g, &a, ActionConvention::LastObserved, pivot).unwrap();
                let rb = apply_output_action(*g, &b, ActionConvention::LastObserved, pivot).unwrap();
                let d = score(kind, &ra, &rb).unwrap() - score(kind, &a, &b).unwrap();
                assert!(d.abs() <= 1e-9);
            }
        }
    }

    fn toy_split() -> Vec<TrajectorySample> {
        (0..20)
            .map(|i| {
                let a = 0.7 * i as f64;
                let v = Point::new(a.cos(), a.sin()) * 0.5;
                let past: Trajectory = (0..8).map(|t| v * t as f64).collect();
                let future: Trajectory = (8..20).map(|t| v * t as f64 + Point::new(0.05 * (i % 3) as f64, 0.0)).collect();
                TrajectorySample::new(past, future)
            })
            .collect()
    }

    #[test]
    fn score_split_modes_and_provenance() {
        let split = toy_split();
        let base: PredictorHandle = Arc::new(PoseBiasedVelocity { horizon: 12, bias: Point::new(0.5, 0.0) });
        let group = Arc::new(Group::cyclic(4).unwrap());
        let plain = score_split(ScoreFn::EuclideanFull, base.as_ref(), &split, ScoreMode::Plain).unwrap();
        assert_eq!(plain.provenance(), Provenance::Plain);
        for (v, s) in plain.values().iter().zip(&split) {
            assert_eq!(*v, score(ScoreFn::EuclideanFull, &base.predict(&s.past).unwrap(), &s.future).unwrap());
        }
        let mode = ScoreMode::Symmetrized { group: &group, conv: ActionConvention::LastObserved };
        let sym = score_split(ScoreFn::EuclideanFull, base.as_ref(), &split, mode).unwrap();
        assert_eq!(sym.provenance(), Provenance::Symmetrized);
        let eq = equivariantize(base, group, ActionConvention::LastObserved);
        let eqs = score_split(ScoreFn::EuclideanFull, &eq, &split, ScoreMode::Plain).unwrap();
        assert_eq!(eqs.provenance(), Provenance::Equivariantized);
        for (e, s) in eqs.values().iter().zip(sym.values()) {
            assert!(*e <= *s + 1e-9);
        }
    }

    #[test]
    fn single_exact_sample_scores_zero_and_empty_split_fails() {
        let cv = ConstantVelocity { horizon: 12 };
        let split = vec![toy_split()[0].clone()];
        let split = vec![TrajectorySample::new(split[0].past.clone(), cv.predict(&split[0].past).unwrap())];
        let set = score_split(ScoreFn::EuclideanFull, &cv, &split, ScoreMode::Plain).unwrap();
        assert_eq!(set.values(), &[0.0]);
        assert!(score_split(ScoreFn::EuclideanFull, &cv, &[], ScoreMode::Plain).is_err());
    }

    #[test]
    fn score_set_rejects_negative_values_and_writes_csv() {
        assert!(ScoreSet::new(vec![1.0, -0.5], Provenance::Plain, ScoreMeta::default()).is_err());
        assert!(ScoreSet::new(vec![f64::NAN], Provenance::Plain, ScoreMeta::default()).is_err());
        let set = ScoreSet::new(vec![0.5, 2.0], Provenance::Symmetrized, ScoreMeta::default()).unwrap();
        let mut buf = Vec::new();
        set.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,score,provenance\n0,0.5,symmetrized\n1,2,symmetrized\n");
    }

    #[test]
    fn symmetrized_score_is_constant_along_orbits() {
        let base = PoseBiasedVelocity { horizon: 12, bias: Point::new(0.3, -0.6) };
        let g = Group::new(GroupSpec::Cyclic(8)).unwrap();
        for s in toy_split().iter().take(5) {
            for conv in [ActionConvention::Origin, ActionConvention::LastObserved] {
                let reference = symmetrized_score(ScoreFn::EuclideanFull, &base, &g, conv, &s.past, &s.future).unwrap();
                let anchor = conv.pivot_for(&s.past).unwrap();
                for &h in g.elements() {
                    let hx = apply_input_action(h, &s.past, conv).unwrap();
                    let hy = apply_output_action(h, &s.future, conv, Some(anchor)).unwrap();
                    let v = symmetrized_score(ScoreFn::EuclideanFull, &base, &g, conv, &hx, &hy).unwrap();
                    assert!((v - reference).abs() <= 1e-9);
                }
            }
        }
    }
}
