//! Deterministic trajectory predictors and their Reynolds-averaged
//! (equivariantized) form.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::{FutureTrajectory, PastTrajectory, Point, Trajectory, TrajectorySample};
use crate::group::{apply_input_action, apply_output_action, ActionConvention, Group};

/// A deterministic map from an observed trajectory to a future trajectory of
/// fixed horizon.
pub trait Predictor: Send + Sync + fmt::Debug {
    fn tag(&self) -> String;

    /// Number of predicted future points.
    fn horizon(&self) -> usize;

    fn predict(&self, past: &PastTrajectory) -> Result<FutureTrajectory>;

    /// True for predictors produced by [`equivariantize`].
    fn is_equivariantized(&self) -> bool {
        false
    }
}

pub type PredictorHandle = Arc<dyn Predictor>;

/// Mean per-step displacement over the observed window.
fn mean_velocity(past: &PastTrajectory) -> Result<Point> {
    let (first, last) = match (past.first(), past.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(Error::invalid("empty input trajectory")),
    };
    if past.len() < 2 {
        return Ok(Point::ORIGIN);
    }
    Ok((last - first) / (past.len() - 1) as f64)
}

/// Extrapolates the mean observed velocity. Rotation-equivariant about any
/// pivot, which makes it the control case for every contraction check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantVelocity {
    pub horizon: usize,
}

impl Predictor for ConstantVelocity {
    fn tag(&self) -> String {
        "const-vel".into()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn predict(&self, past: &PastTrajectory) -> Result<FutureTrajectory> {
        let v = mean_velocity(past)?;
        let last = past.last().expect("checked nonempty");
        Ok((1..=self.horizon).map(|t| last + v * t as f64).collect())
    }
}

/// Constant velocity plus a bias vector fixed in the world frame.
///
/// The bias does not rotate with the input, so this predictor is not
/// equivariant for any nontrivial rotation group; its equivariantization over
/// C_n (n ≥ 2) cancels the bias exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseBiasedVelocity {
    pub horizon: usize,
    pub bias: Point,
}

impl Predictor for PoseBiasedVelocity {
    fn tag(&self) -> String {
        format!("pose-biased:bx={}:by={}", self.bias.x, self.bias.y)
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn predict(&self, past: &PastTrajectory) -> Result<FutureTrajectory> {
        let v = mean_velocity(past)?;
        let last = past.last().expect("checked nonempty");
        Ok((1..=self.horizon)
            .map(|t| last + v * t as f64 + self.bias)
            .collect())
    }
}

/// Least-squares regressor from polynomial features of the world-frame mean
/// velocity to future displacements relative to the last observed point.
#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialRegressor {
    degree: u32,
    horizon: usize,
    /// Rows: features; columns: flattened `(x, y)` displacement per step.
    weights: DMatrix<f64>,
}

impl PolynomialRegressor {
    const RIDGE: f64 = 1e-8;

    pub fn fit(train: &[TrajectorySample], degree: u32) -> Result<Self> {
        if degree == 0 {
            return Err(Error::invalid("polynomial degree must be at least 1"));
        }
        let first = train
            .first()
            .ok_or_else(|| Error::invalid("polynomial fit needs a nonempty training split"))?;
        let horizon = first.future.len();
        let n_features = Self::features(Point::ORIGIN, degree).len();
        let mut design = DMatrix::zeros(train.len(), n_features);
        let mut targets = DMatrix::zeros(train.len(), 2 * horizon);
        for (row, sample) in train.iter().enumerate() {
            if sample.future.len() != horizon {
                return Err(Error::invalid("training samples have differing horizons"));
            }
            let v = mean_velocity(&sample.past)?;
            let last = sample.past.last().expect("checked nonempty");
            for (col, f) in Self::features(v, degree).into_iter().enumerate() {
                design[(row, col)] = f;
            }
            for (t, p) in sample.future.points().iter().enumerate() {
                let d = *p - last;
                targets[(row, 2 * t)] = d.x;
                targets[(row, 2 * t + 1)] = d.y;
            }
        }
        let gram = design.transpose() * &design;
        let scale = (gram.trace() / n_features as f64).max(1.0);
        let regularized = gram + DMatrix::identity(n_features, n_features) * (Self::RIDGE * scale);
        let rhs = design.transpose() * targets;
        let chol = regularized
            .cholesky()
            .ok_or_else(|| Error::invalid("polynomial design matrix is singular"))?;
        Ok(Self {
            degree,
            horizon,
            weights: chol.solve(&rhs),
        })
    }

    /// Monomials `vx^i vy^j` with `i + j <= degree`, constant first.
    fn features(v: Point, degree: u32) -> Vec<f64> {
        let mut out = Vec::new();
        for total in 0..=degree {
            for i in (0..=total).rev() {
                let j = total - i;
                out.push(v.x.powi(i as i32) * v.y.powi(j as i32));
            }
        }
        out
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }
}

impl Predictor for PolynomialRegressor {
    fn tag(&self) -> String {
        format!("polyfit:degree={}", self.degree)
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn predict(&self, past: &PastTrajectory) -> Result<FutureTrajectory> {
        let v = mean_velocity(past)?;
        let last = past.last().expect("checked nonempty");
        let phi = DVector::from_vec(Self::features(v, self.degree));
        let out = self.weights.transpose() * phi;
        Ok((0..self.horizon)
            .map(|t| last + Point::new(out[2 * t], out[2 * t + 1]))
            .collect())
    }
}

/// Wraps a closure as a predictor. Mostly useful for controls in tests.
pub struct FnPredictor<F> {
    tag: String,
    horizon: usize,
    f: F,
}

impl<F> FnPredictor<F>
where
    F: Fn(&PastTrajectory) -> FutureTrajectory + Send + Sync,
{
    pub fn new(tag: impl Into<String>, horizon: usize, f: F) -> Self {
        Self {
            tag: tag.into(),
            horizon,
            f,
        }
    }
}

impl<F> fmt::Debug for FnPredictor<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnPredictor")
            .field("tag", &self.tag)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl<F> Predictor for FnPredictor<F>
where
    F: Fn(&PastTrajectory) -> FutureTrajectory + Send + Sync,
{
    fn tag(&self) -> String {
        self.tag.clone()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn predict(&self, past: &PastTrajectory) -> Result<FutureTrajectory> {
        if past.is_empty() {
            return Err(Error::invalid("empty input trajectory"));
        }
        Ok((self.f)(past))
    }
}

/// Precomputed predictions keyed by sample index.
///
/// Inputs are matched to indices by the exact bit pattern of their
/// coordinates after [`LookupPredictor::bind`]. Any other input, including a
/// rotated copy of a known one, is an [`Error::UnknownInput`].
#[derive(Debug, Clone)]
pub struct LookupPredictor {
    tag: String,
    horizon: usize,
    predictions: Vec<FutureTrajectory>,
    keys: HashMap<Vec<u64>, usize>,
}

fn bit_key(t: &Trajectory) -> Vec<u64> {
    t.points()
        .iter()
        .flat_map(|p| [p.x.to_bits(), p.y.to_bits()])
        .collect()
}

impl LookupPredictor {
    pub fn new(tag: impl Into<String>, predictions: Vec<FutureTrajectory>) -> Result<Self> {
        let horizon = predictions.first().map_or(0, Trajectory::len);
        if predictions.iter().any(|p| p.len() != horizon) {
            return Err(Error::invalid("lookup predictions have differing horizons"));
        }
        Ok(Self {
            tag: tag.into(),
            horizon,
            predictions,
            keys: HashMap::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn by_index(&self, index: usize) -> Result<&FutureTrajectory> {
        self.predictions.get(index).ok_or_else(|| Error::UnknownInput {
            tag: self.tag.clone(),
        })
    }

    /// Associates sample `i` of `samples` with prediction `i`.
    pub fn bind(mut self, samples: &[TrajectorySample]) -> Result<Self> {
        if samples.len() > self.predictions.len() {
            return Err(Error::IncompletePredictions(format!(
                "{} samples but only {} predicted trajectories",
                samples.len(),
                self.predictions.len()
            )));
        }
        self.keys = samples
            .iter()
            .enumerate()
            .map(|(i, s)| (bit_key(&s.past), i))
            .collect();
        Ok(self)
    }
}

impl Predictor for LookupPredictor {
    fn tag(&self) -> String {
        self.tag.clone()
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn predict(&self, past: &PastTrajectory) -> Result<FutureTrajectory> {
        let index = self
            .keys
            .get(&bit_key(past))
            .copied()
            .ok_or_else(|| Error::UnknownInput {
                tag: self.tag.clone(),
            })?;
        self.by_index(index).cloned()
    }
}

/// The orbit average `x ↦ mean_g ψ_g(f(φ_{g⁻¹}(x)))` of a base predictor.
///
/// The group elements are fixed at construction, so every evaluation (and
/// every symmetrized score built from the same [`Group`]) uses the same
/// sample of SO(2).
#[derive(Debug, Clone)]
pub struct EquivariantizedPredictor {
    base: PredictorHandle,
    group: Arc<Group>,
    conv: ActionConvention,
}

impl EquivariantizedPredictor {
    pub fn base(&self) -> &PredictorHandle {
        &self.base
    }

    pub fn group(&self) -> &Group {
        &self.group
    }

    pub fn convention(&self) -> ActionConvention {
        self.conv
    }

    pub fn orbit_terms(&self, x: &PastTrajectory) -> Result<Vec<FutureTrajectory>> {
        evaluate_orbit_terms(self.base.as_ref(), &self.group, x, self.conv)
    }
}

impl Predictor for EquivariantizedPredictor {
    fn tag(&self) -> String {
        format!("eq[{}]({})", self.group.spec(), self.base.tag())
    }

    fn horizon(&self) -> usize {
        self.base.horizon()
    }

    fn predict(&self, past: &PastTrajectory) -> Result<FutureTrajectory> {
        Trajectory::mean_of(&self.orbit_terms(past)?)
    }

    fn is_equivariantized(&self) -> bool {
        true
    }
}

pub fn equivariantize(
    base: PredictorHandle,
    group: Arc<Group>,
    conv: ActionConvention,
) -> EquivariantizedPredictor {
    EquivariantizedPredictor { base, group, conv }
}

/// Aligned orbit predictions `U_g(x) = ψ_g(f(φ_{g⁻¹}(x)))`, one per element.
pub fn evaluate_orbit_terms(
    base: &dyn Predictor,
    group: &Group,
    x: &PastTrajectory,
    conv: ActionConvention,
) -> Result<Vec<FutureTrajectory>> {
    let anchor = conv.pivot_for(x)?;
    group
        .elements()
        .iter()
        .map(|&g| {
            let moved = apply_input_action(g.inverse(), x, conv)?;
            let pred = base.predict(&moved)?;
            if pred.len() != base.horizon() {
                return Err(Error::invalid(format!(
                    "predictor {} returned {} points, expected {}",
                    base.tag(),
                    pred.len(),
                    base.horizon()
                )));
            }
            apply_output_action(g, &pred, conv, Some(anchor))
        })
        .collect()
}

/// Bias used by `pose-biased` when no components are given, in meters.
pub const DEFAULT_POSE_BIAS: f64 = 0.5;

/// Predictor selection as written in run configs.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictorSpec {
    ConstantVelocity,
    PoseBiased { bias: Point },
    PolyFit { degree: u32 },
    /// Precomputed predictions read from a CSV file.
    External { path: String },
}

impl PredictorSpec {
    pub fn needs_training(&self) -> bool {
        matches!(self, PredictorSpec::PolyFit { .. })
    }
}

impl fmt::Display for PredictorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PredictorSpec::ConstantVelocity => f.write_str("const-vel"),
            PredictorSpec::PoseBiased { bias } => write!(f, "pose-biased:bx={}:by={}", bias.x, bias.y),
            PredictorSpec::PolyFit { degree } => write!(f, "polyfit:degree={degree}"),
            PredictorSpec::External { path } => write!(f, "external:{path}"),
        }
    }
}

impl FromStr for PredictorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::invalid(format!("malformed predictor spec `{s}`"));
        if s == "const-vel" {
            return Ok(PredictorSpec::ConstantVelocity);
        }
        if let Some(path) = s.strip_prefix("external:") {
            if path.is_empty() {
                return Err(bad());
            }
            return Ok(PredictorSpec::External { path: path.to_string() });
        }
        let (head, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = HashMap::new();
        for part in rest.split(':').filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            params.insert(k.trim(), v.trim());
        }
        match head {
            "pose-biased" if params.is_empty() => Ok(PredictorSpec::PoseBiased {
                bias: Point::new(DEFAULT_POSE_BIAS, 0.0),
            }),
            "pose-biased" => {
                let get = |k: &str| -> Result<f64> {
                    params.get(k).map_or(Ok(0.0), |v| v.parse().map_err(|_| bad()))
                };
                Ok(PredictorSpec::PoseBiased {
                    bias: Point::new(get("bx")?, get("by")?),
                })
            }
            "polyfit" => {
                let degree = params.get("degree").ok_or_else(bad)?.parse().map_err(|_| bad())?;
                Ok(PredictorSpec::PolyFit { degree })
            }
            _ => Err(bad()),
        }
    }
}
