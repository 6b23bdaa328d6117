//! Empirical checks of the orderings and bounds that orbit averaging implies
//! for paired score distributions.
//!
//! Every routine here is a pure function of immutable score samples. Grids
//! (thresholds, λ values, quantile levels) are explicit arguments so that each
//! dominance claim is reported relative to the grid it was checked on.

mod concentration;
mod deviation;
mod ordering;
mod resample;
mod tail;
mod variance;
mod volume;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use concentration::{concentration_bounds, ConcentrationBounds};
pub use deviation::{chernoff_bound, empirical_cgf, lambda_grid, rate_function};
pub use ordering::{icx_dominates, moment, stop_loss, threshold_grid, upper_tail_integral, IcxReport};
pub use resample::{bootstrap_se, mean_and_se, paired_mean_se, sample_std};
pub use tail::{cvar, cvar_gap_check, cvar_rockafellar_uryasev, quantile, CvarGap};
pub use variance::{
    lipschitz_gap_bound, orbit_pair_identity, population_variance, strong_convexity_lower_bound, variance_decomposition,
    LipschitzGap, StrongConvexityCheck, VarianceDecomposition,
};
pub use volume::{set_volume, unit_ball_volume, volume_gap, VolumeGap, VolumeSpec};

/// Sorted sample of a real random variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDistribution {
    sorted_values: Vec<f64>,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("empirical distribution needs at least one value"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("empirical distribution values must be finite"));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { sorted_values: values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn sorted_values(&self) -> &[f64] {
        &self.sorted_values
    }

    pub fn n(&self) -> usize {
        self.sorted_values.len()
    }

    pub fn min(&self) -> f64 {
        self.sorted_values[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted_values[self.n() - 1]
    }

    pub fn mean(&self) -> f64 {
        self.sorted_values.iter().sum::<f64>() / self.n() as f64
    }

    /// Population variance (divisor `n`).
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.sorted_values.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / self.n() as f64
    }

    pub fn std(&self) -> f64 {
        self.variance().sqrt()
    }
}

/// A named bound value together with the parameters it was evaluated at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub name: String,
    pub params: BTreeMap<String, f64>,
    pub value: f64,
}

impl BoundReport {
    pub fn new(name: &str, params: &[(&str, f64)], value: f64) -> Self {
        Self {
            name: name.to_string(),
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            value,
        }
    }
}
