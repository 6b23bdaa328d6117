//! TOML run configuration.
//!
//! ```toml
//! seed = 7
//! predictor = "pose-biased:bx=0.5:by=0"
//! group = "c8"
//! groups = ["c4", "c8", "so2:K=64:seed=7"]
//! score = "euclidean-full"
//! pivot = "last-observed"
//! alphas = [0.05]
//! splits = 15
//! calibration_fraction = 0.5
//! out = "runs/pose-biased"
//!
//! [dataset]
//! kind = "synthetic"
//! n_samples = 2000
//! noise_sigma = 0.05
//! invariance = "random-rotation"
//! ```
//!
//! File datasets use `kind = "ethucy"` with `path`, `t_obs`, `t_pred`,
//! `stride` and `allow_overlap`. Relative paths resolve against the config
//! file's directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::experiment::{CalibrationSize, CheckSettings, DatasetSource, RunConfig};
use crate::synthetic::SyntheticConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    seed: Option<u64>,
    predictor: Option<String>,
    group: Option<String>,
    groups: Option<Vec<String>>,
    score: Option<String>,
    pivot: Option<String>,
    alphas: Option<Vec<f64>>,
    splits: Option<usize>,
    calibration_fraction: Option<f64>,
    calibration_size: Option<usize>,
    train_fraction: Option<f64>,
    out: Option<String>,
    negative_control: Option<bool>,
    dataset: Option<RawDataset>,
    checks: Option<RawChecks>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDataset {
    kind: Option<String>,
    // synthetic
    n_samples: Option<usize>,
    speed_min: Option<f64>,
    speed_max: Option<f64>,
    noise_sigma: Option<f64>,
    invariance: Option<String>,
    seed: Option<u64>,
    // file
    path: Option<String>,
    stride: Option<usize>,
    allow_overlap: Option<bool>,
    // both
    t_obs: Option<usize>,
    t_pred: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChecks {
    grid_points: Option<usize>,
    lambda_points: Option<usize>,
    cvar_alphas: Option<Vec<f64>>,
    eps_fractions: Option<Vec<f64>>,
    volume_alpha: Option<f64>,
    se_multiplier: Option<f64>,
    bootstrap_replicates: Option<usize>,
    exact_tol: Option<f64>,
}

fn parsed<T: std::str::FromStr<Err = Error>>(v: Option<String>, default: T) -> Result<T> {
    v.map_or(Ok(default), |s| s.parse())
}

/// Parses a config; `base_dir` anchors relative paths.
pub fn parse_config(text: &str, base_dir: Option<&Path>) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| Error::invalid(format!("config: {e}")))?;
    let d = RunConfig::default();
    let resolve = |p: &str| -> PathBuf {
        let p = PathBuf::from(p);
        match base_dir {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        }
    };
    let seed = raw.seed.unwrap_or(d.seed);
    let ds = raw.dataset.unwrap_or_default();
    let sd = SyntheticConfig::default();
    let t_obs = ds.t_obs.unwrap_or(sd.t_obs);
    let t_pred = ds.t_pred.unwrap_or(sd.t_pred);
    let dataset = match ds.kind.as_deref().unwrap_or("synthetic") {
        "synthetic" => {
            if ds.path.is_some() || ds.stride.is_some() || ds.allow_overlap.is_some() {
                return Err(Error::invalid("path/stride/allow_overlap only apply to ethucy datasets"));
            }
            DatasetSource::Synthetic(SyntheticConfig {
                n_samples: ds.n_samples.unwrap_or(sd.n_samples),
                t_obs,
                t_pred,
                speed_range: (ds.speed_min.unwrap_or(sd.speed_range.0), ds.speed_max.unwrap_or(sd.speed_range.1)),
                noise_sigma: ds.noise_sigma.unwrap_or(sd.noise_sigma),
                invariance: parsed(ds.invariance, sd.invariance)?,
                convention: parsed(raw.pivot.clone(), d.convention)?,
                seed: ds.seed.unwrap_or(seed),
            })
        }
        "ethucy" => {
            let path = ds.path.ok_or_else(|| Error::invalid("ethucy dataset needs a path"))?;
            let stride = ds.stride.unwrap_or(t_pred);
            if stride == 0 {
                return Err(Error::invalid("stride must be positive"));
            }
            if stride < t_pred && !ds.allow_overlap.unwrap_or(false) {
                return Err(Error::invalid(format!(
                    "stride {stride} < t_pred {t_pred} makes test windows overlap; set allow_overlap = true to accept \
                     the weaker exchangeability"
                )));
            }
            DatasetSource::EthUcy {
                path: resolve(&path),
                t_obs,
                t_pred,
                stride,
            }
        }
        other => return Err(Error::invalid(format!("unknown dataset kind {other:?}"))),
    };
    let calibration = match (raw.calibration_fraction, raw.calibration_size) {
        (Some(_), Some(_)) => {
            return Err(Error::invalid("set calibration_fraction or calibration_size, not both"))
        }
        (Some(f), None) => CalibrationSize::Fraction(f),
        (None, Some(m)) => CalibrationSize::Count(m),
        (None, None) => d.calibration,
    };
    let groups = match raw.groups {
        Some(gs) => gs.iter().map(|g| g.parse()).collect::<Result<Vec<_>>>()?,
        None => d.groups,
    };
    let mut predictor = parsed(raw.predictor, d.predictor)?;
    if let crate::predictor::PredictorSpec::External { path } = &mut predictor {
        *path = resolve(path).to_string_lossy().into_owned();
    }
    let rc = raw.checks.unwrap_or_default();
    let dc = CheckSettings::default();
    let cfg = RunConfig {
        dataset,
        predictor,
        group: parsed(raw.group, d.group)?,
        groups,
        score: parsed(raw.score, d.score)?,
        convention: parsed(raw.pivot, d.convention)?,
        alphas: raw.alphas.unwrap_or(d.alphas),
        splits: raw.splits.unwrap_or(d.splits),
        calibration,
        train_fraction: raw.train_fraction.unwrap_or(d.train_fraction),
        seed,
        out: raw.out.map_or(d.out, |o| resolve(&o)),
        negative_control: raw.negative_control.unwrap_or(false),
        checks: CheckSettings {
            grid_points: rc.grid_points.unwrap_or(dc.grid_points),
            lambda_points: rc.lambda_points.unwrap_or(dc.lambda_points),
            cvar_alphas: rc.cvar_alphas.unwrap_or(dc.cvar_alphas),
            eps_fractions: rc.eps_fractions.unwrap_or(dc.eps_fractions),
            volume_alpha: rc.volume_alpha.unwrap_or(dc.volume_alpha),
            se_multiplier: rc.se_multiplier.unwrap_or(dc.se_multiplier),
            bootstrap_replicates: rc.bootstrap_replicates.unwrap_or(dc.bootstrap_replicates),
            exact_tol: rc.exact_tol.unwrap_or(dc.exact_tol),
        },
    };
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path.parent())
}
