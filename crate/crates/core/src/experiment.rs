//! Run orchestration shared by the command-line tool and the test suites:
//! dataset preparation, paired scoring, calibration tables, theorem checks
//! and group sweeps.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conformal::{calibrate_values, coverage_from_scores};
use crate::error::{Error, Result};
use crate::geometry::TrajectorySample;
use crate::group::{ActionConvention, Group, GroupSpec};
use crate::io::load_ethucy;
use crate::predictor::{
    equivariantize, ConstantVelocity, PolynomialRegressor, PoseBiasedVelocity, Predictor, PredictorHandle,
    PredictorSpec,
};
use crate::score::{orbit_score_terms, score, ScoreFn, Provenance};
use crate::seeding::{calibration_split, derive_seed, rng_for};
use crate::stats::{
    bootstrap_se, chernoff_bound, concentration_bounds, cvar, cvar_gap_check, empirical_cgf, icx_dominates,
    lambda_grid, lipschitz_gap_bound, orbit_pair_identity, paired_mean_se, rate_function, sample_std, stop_loss,
    strong_convexity_lower_bound, threshold_grid, variance_decomposition, volume_gap, EmpiricalDistribution,
    VolumeSpec,
};
use crate::synthetic::oracle::oracle_orbit_stats;
use crate::synthetic::{generate, Invariance, SyntheticConfig};

const TRAIN_STREAM: u64 = 0x7121;
const SPLIT_STREAM: u64 = 0x5B11;
const BOOT_STREAM: u64 = 0xB0B0;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Synthetic(SyntheticConfig),
    EthUcy {
        path: PathBuf,
        t_obs: usize,
        t_pred: usize,
        stride: usize,
    },
}

/// Calibration block size per split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CalibrationSize {
    Fraction(f64),
    Count(usize),
}

/// Tolerances and grids used by [`verify_checks`].
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSettings {
    pub grid_points: usize,
    pub lambda_points: usize,
    pub cvar_alphas: Vec<f64>,
    /// Deviations for the concentration bounds, as fractions of the plain range.
    pub eps_fractions: Vec<f64>,
    pub volume_alpha: f64,
    /// Multiplier on standard errors for checks that hold in expectation.
    pub se_multiplier: f64,
    pub bootstrap_replicates: usize,
    /// Tolerance for checks that hold exactly on the sample.
    pub exact_tol: f64,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            grid_points: 64,
            lambda_points: 64,
            cvar_alphas: vec![0.5, 0.9, 0.95, 0.99],
            eps_fractions: vec![0.05, 0.1, 0.2],
            volume_alpha: 0.05,
            se_multiplier: 3.0,
            bootstrap_replicates: 200,
            exact_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetSource,
    pub predictor: PredictorSpec,
    pub group: GroupSpec,
    /// Groups compared by [`sweep`].
    pub groups: Vec<GroupSpec>,
    pub score: ScoreFn,
    pub convention: ActionConvention,
    pub alphas: Vec<f64>,
    pub splits: usize,
    pub calibration: CalibrationSize,
    /// Share of file-based data used to fit trainable predictors.
    pub train_fraction: f64,
    pub seed: u64,
    pub out: PathBuf,
    /// Adds a deliberately non-dominated pair to the verify report.
    pub negative_control: bool,
    pub checks: CheckSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synthetic(SyntheticConfig::default()),
            predictor: PredictorSpec::PoseBiased {
                bias: crate::geometry::Point::new(crate::predictor::DEFAULT_POSE_BIAS, 0.0),
            },
            group: GroupSpec::Cyclic(8),
            groups: vec![GroupSpec::Cyclic(4), GroupSpec::Cyclic(8)],
            score: ScoreFn::EuclideanFull,
            convention: ActionConvention::LastObserved,
            alphas: vec![0.05],
            splits: 15,
            calibration: CalibrationSize::Fraction(0.5),
            train_fraction: 0.3,
            seed: 0,
            out: PathBuf::from("runs/default"),
            negative_control: false,
            checks: CheckSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(Error::invalid("at least one alpha is required"));
        }
        for &a in &self.alphas {
            if !(a > 0.0 && a < 1.0) {
                return Err(Error::invalid(format!("alpha {a} is not strictly inside (0, 1)")));
            }
        }
        if self.splits == 0 {
            return Err(Error::invalid("splits must be at least 1"));
        }
        match self.calibration {
            CalibrationSize::Fraction(f) if !(f > 0.0 && f < 1.0) => {
                return Err(Error::invalid(format!("calibration fraction {f} is not inside (0, 1)")))
            }
            CalibrationSize::Count(0) => return Err(Error::invalid("calibration size must be positive")),
            _ => {}
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train_fraction must lie in (0, 1)"));
        }
        if let DatasetSource::Synthetic(s) = &self.dataset {
            s.validate()?;
        }
        Ok(())
    }

    /// Stable text form used for the manifest hash.
    pub fn canonical(&self) -> String {
        format!("{self:?}")
    }
}

/// Evaluation pool plus the base predictor fitted for it.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub dataset_id: String,
    pub samples: Vec<TrajectorySample>,
    /// Orbit membership when the data were orbit-augmented.
    pub orbits: Vec<Vec<usize>>,
    /// Orbit size of `orbits`, if any.
    pub orbit_order: Option<u32>,
    pub base: PredictorHandle,
}

impl Workspace {
    /// Whether the base predictor can be evaluated on rotated inputs.
    pub fn supports_group(&self) -> bool {
        !self.base.tag().starts_with("external:")
    }
}

fn build_predictor(spec: &PredictorSpec, horizon: usize, train: &[TrajectorySample]) -> Result<PredictorHandle> {
    Ok(match spec {
        PredictorSpec::ConstantVelocity => Arc::new(ConstantVelocity { horizon }),
        PredictorSpec::PoseBiased { bias } => Arc::new(PoseBiasedVelocity { horizon, bias: *bias }),
        PredictorSpec::PolyFit { degree } => Arc::new(PolynomialRegressor::fit(train, *degree)?),
        PredictorSpec::External { .. } => unreachable!("handled by prepare"),
    })
}

/// Loads or generates the data and builds the base predictor. Trainable
/// predictors are fitted on data disjoint from the returned pool.
pub fn prepare(cfg: &RunConfig) -> Result<Workspace> {
    cfg.validate()?;
    let (dataset_id, mut samples, orbits, orbit_order, t_pred) = match &cfg.dataset {
        DatasetSource::Synthetic(s) => {
            let data = generate(s)?;
            let order = match s.invariance {
                Invariance::OrbitAugment(n) => Some(n),
                Invariance::RandomRotation => None,
            };
            let id = format!("synthetic:{}:n={}:sigma={}:seed={}", s.invariance, s.n_samples, s.noise_sigma, s.seed);
            (id, data.samples, data.orbits, order, s.t_pred)
        }
        DatasetSource::EthUcy {
            path,
            t_obs,
            t_pred,
            stride,
        } => {
            let data = load_ethucy(path, *t_obs, *t_pred, *stride)?;
            (format!("ethucy:{}", path.display()), data.samples, Vec::new(), None, *t_pred)
        }
    };

    let base: PredictorHandle = match &cfg.predictor {
        PredictorSpec::External { path } => {
            let lp = crate::io::load_predictions(std::path::Path::new(path))?.bind(&samples)?;
            if lp.horizon() != t_pred {
                return Err(Error::invalid(format!(
                    "external predictions have horizon {}, data has {t_pred}",
                    lp.horizon()
                )));
            }
            Arc::new(lp)
        }
        spec if spec.needs_training() => {
            let train = match &cfg.dataset {
                DatasetSource::Synthetic(s) => {
                    let n_train = ((s.n_samples as f64 * cfg.train_fraction).round() as usize).max(1);
                    let train_cfg = SyntheticConfig {
                        n_samples: n_train,
                        invariance: Invariance::RandomRotation,
                        seed: derive_seed(s.seed, TRAIN_STREAM),
                        ..s.clone()
                    };
                    generate(&train_cfg)?.samples
                }
                DatasetSource::EthUcy { .. } => {
                    let mut idx: Vec<usize> = (0..samples.len()).collect();
                    idx.shuffle(&mut rng_for(cfg.seed, TRAIN_STREAM));
                    let n_train = (samples.len() as f64 * cfg.train_fraction).round() as usize;
                    if n_train == 0 || n_train >= samples.len() {
                        return Err(Error::invalid("too few samples to hold out a training set"));
                    }
                    let mut train_idx = idx[..n_train].to_vec();
                    let mut pool_idx = idx[n_train..].to_vec();
                    train_idx.sort_unstable();
                    pool_idx.sort_unstable();
                    let train = train_idx.iter().map(|&i| samples[i].clone()).collect();
                    samples = pool_idx.iter().map(|&i| samples[i].clone()).collect();
                    train
                }
            };
            build_predictor(spec, t_pred, &train)?
        }
        spec => build_predictor(spec, t_pred, &[])?,
    };
    Ok(Workspace {
        dataset_id,
        samples,
        orbits,
        orbit_order,
        base,
    })
}

/// Scores of one pool under the three provenances, aligned by sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedScores {
    pub group: Option<GroupSpec>,
    pub plain: Vec<f64>,
    pub equivariantized: Vec<f64>,
    pub symmetrized: Vec<f64>,
    /// Per-sample orbit terms `Z_g`; `symmetrized[i]` is their mean.
    pub orbit_terms: Vec<Vec<f64>>,
}

impl PairedScores {
    pub fn get(&self, p: Provenance) -> &[f64] {
        match p {
            Provenance::Plain => &self.plain,
            Provenance::Equivariantized => &self.equivariantized,
            Provenance::Symmetrized => &self.symmetrized,
        }
    }

    /// Provenances with scores available.
    pub fn provenances(&self) -> Vec<Provenance> {
        if self.group.is_some() {
            Provenance::ALL.to_vec()
        } else {
            vec![Provenance::Plain]
        }
    }

    /// All orbit terms flattened; under an invariant law each has the law
    /// of a plain score.
    pub fn orbit_expanded(&self) -> Vec<f64> {
        self.orbit_terms.iter().flatten().copied().collect()
    }
}

/// Scores every sample with the base predictor and, when a group is given,
/// with its equivariantization and the symmetrized score. All three share
/// the same group elements.
pub fn score_pool(
    kind: ScoreFn,
    base: &PredictorHandle,
    group: Option<&Arc<Group>>,
    conv: ActionConvention,
    samples: &[TrajectorySample],
) -> Result<PairedScores> {
    if samples.is_empty() {
        return Err(Error::invalid("cannot score an empty pool"));
    }
    let plain = samples
        .par_iter()
        .map(|s| score(kind, &base.predict(&s.past)?, &s.future))
        .collect::<Result<Vec<f64>>>()?;
    let Some(group) = group else {
        return Ok(PairedScores {
            group: None,
            plain,
            equivariantized: Vec::new(),
            symmetrized: Vec::new(),
            orbit_terms: Vec::new(),
        });
    };
    let eq = equivariantize(base.clone(), group.clone(), conv);
    let per_sample = samples
        .par_iter()
        .map(|s| {
            let terms = orbit_score_terms(kind, base.as_ref(), group, conv, &s.past, &s.future)?;
            let e = score(kind, &eq.predict(&s.past)?, &s.future)?;
            Ok((terms, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut orbit_terms = Vec::with_capacity(samples.len());
    let mut equivariantized = Vec::with_capacity(samples.len());
    for (t, e) in per_sample {
        orbit_terms.push(t);
        equivariantized.push(e);
    }
    let symmetrized = orbit_terms
        .iter()
        .map(|t| t.iter().sum::<f64>() / t.len() as f64)
        .collect();
    Ok(PairedScores {
        group: Some(group.spec()),
        plain,
        equivariantized,
        symmetrized,
        orbit_terms,
    })
}

/// One calibration split for one provenance and alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub dataset: String,
    pub predictor: String,
    pub group: String,
    pub score: String,
    pub alpha: f64,
    pub split: usize,
    pub provenance: Provenance,
    pub m: usize,
    pub k: usize,
    pub q: f64,
    pub infinite: bool,
    pub coverage: f64,
    pub n_test: usize,
}

pub const CALIBRATION_COLUMNS: [&str; 13] = [
    "dataset", "predictor", "group", "score", "alpha", "split", "provenance", "m", "k", "q", "infinite", "coverage",
    "n_test",
];

/// Mean ± sample standard deviation over splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub predictor: String,
    pub group: String,
    pub alpha: f64,
    pub provenance: Provenance,
    pub splits: usize,
    pub m: usize,
    pub q_mean: f64,
    pub q_sd: f64,
    pub coverage_mean: f64,
    pub coverage_sd: f64,
}

pub const SUMMARY_COLUMNS: [&str; 11] = [
    "dataset", "predictor", "group", "alpha", "provenance", "splits", "m", "q_mean", "q_sd", "coverage_mean",
    "coverage_sd",
];

pub fn calibration_size(cal: CalibrationSize, n: usize) -> Result<usize> {
    let m = match cal {
        CalibrationSize::Fraction(f) => (f * n as f64).round() as usize,
        CalibrationSize::Count(m) => m,
    };
    if m == 0 || m >= n {
        return Err(Error::invalid(format!(
            "calibration size {m} leaves no calibration or test data in a pool of {n}"
        )));
    }
    Ok(m)
}

/// Seed of split `j` of a run.
pub fn split_seed(seed: u64, j: usize) -> u64 {
    derive_seed(seed, SPLIT_STREAM.wrapping_add(j as u64))
}

/// Calibrates every provenance on the same random splits. Rows are ordered
/// by split, then alpha, then provenance.
pub fn calibration_table(cfg: &RunConfig, ws: &Workspace, scores: &PairedScores) -> Result<Vec<CalibrationRow>> {
    let n = scores.plain.len();
    let m = calibration_size(cfg.calibration, n)?;
    let group = scores.group.map_or_else(|| "none".to_string(), |g| g.to_string());
    let predictor = ws.base.tag();
    let provenances = scores.provenances();
    let per_split = (0..cfg.splits)
        .into_par_iter()
        .map(|j| {
            let (cal, test) = calibration_split(n, m, split_seed(cfg.seed, j));
            let mut rows = Vec::new();
            for &alpha in &cfg.alphas {
                for &p in &provenances {
                    let values = scores.get(p);
                    let cal_v: Vec<f64> = cal.iter().map(|&i| values[i]).collect();
                    let test_v: Vec<f64> = test.iter().map(|&i| values[i]).collect();
                    let c = calibrate_values(&cal_v, alpha, p)?;
                    rows.push(CalibrationRow {
                        dataset: ws.dataset_id.clone(),
                        predictor: predictor.clone(),
                        group: group.clone(),
                        score: cfg.score.to_string(),
                        alpha,
                        split: j,
                        provenance: p,
                        m,
                        k: c.k,
                        q: c.q,
                        infinite: c.infinite,
                        coverage: coverage_from_scores(&test_v, c.q),
                        n_test: test_v.len(),
                    });
                }
            }
            Ok(rows)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_split.into_iter().flatten().collect())
}

pub fn summarize(rows: &[CalibrationRow]) -> Vec<SummaryRow> {
    let mut cells: BTreeMap<(String, String, String, u64, Provenance), Vec<&CalibrationRow>> = BTreeMap::new();
    let mut order = Vec::new();
    for r in rows {
        let key = (r.dataset.clone(), r.predictor.clone(), r.group.clone(), r.alpha.to_bits(), r.provenance);
        let e = cells.entry(key.clone()).or_default();
        if e.is_empty() {
            order.push(key);
        }
        e.push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rs = &cells[&key];
            let qs: Vec<f64> = rs.iter().map(|r| r.q).collect();
            let cov: Vec<f64> = rs.iter().map(|r| r.coverage).collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            SummaryRow {
                dataset: key.0.clone(),
                predictor: key.1.clone(),
                group: key.2.clone(),
                alpha: rs[0].alpha,
                provenance: key.4,
                splits: rs.len(),
                m: rs[0].m,
                q_mean: mean(&qs),
                q_sd: sample_std(&qs),
                coverage_mean: mean(&cov),
                coverage_sd: sample_std(&cov),
            }
        })
        .collect()
}

/// One named check; it passes when `lhs <= rhs + tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub params: String,
    pub lhs: f64,
    pub rhs: f64,
    pub tolerance: f64,
    pub ok: bool,
    /// Whether theory guarantees the inequality under the run's assumptions.
    /// Only these affect the exit status.
    pub guaranteed: bool,
}

pub const CHECK_COLUMNS: [&str; 7] = ["check", "params", "lhs", "rhs", "tolerance", "ok", "guaranteed"];

impl CheckRecord {
    pub fn new(check: &str, params: impl Into<String>, lhs: f64, rhs: f64, tolerance: f64, guaranteed: bool) -> Self {
        Self {
            check: check.into(),
            params: params.into(),
            lhs,
            rhs,
            tolerance,
            ok: lhs <= rhs + tolerance,
            guaranteed,
        }
    }
}

/// True when every guaranteed check passed.
pub fn all_guaranteed_ok(records: &[CheckRecord]) -> bool {
    records.iter().filter(|r| r.guaranteed).all(|r| r.ok)
}

fn scale_of(values: &[f64]) -> f64 {
    values.iter().fold(1.0f64, |a, v| a.max(v.abs()))
}

fn stop_loss_check(
    name: &str,
    lower: &[f64],
    upper: &[f64],
    grid: &[f64],
    se_mult: f64,
    guaranteed: bool,
) -> CheckRecord {
    // paired per-threshold slack
    let mut worst = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut violations = 0;
    for &t in grid {
        let d: Vec<f64> = lower
            .iter()
            .zip(upper)
            .map(|(a, b)| (a - t).max(0.0) - (b - t).max(0.0))
            .collect();
        let (mean, se) = crate::stats::mean_and_se(&d);
        let slack = se_mult * se;
        if mean > slack {
            violations += 1;
        }
        if mean - slack > worst.0 - worst.2 {
            worst = (mean, t, slack);
        }
    }
    let mut r = CheckRecord::new(
        name,
        format!("grid={} worst_t={:.6} violations={violations}", grid.len(), worst.1),
        worst.0,
        0.0,
        worst.2,
        guaranteed,
    );
    r.ok = violations == 0;
    r
}

/// Every paired-distribution check on a scored pool.
pub fn verify_checks(cfg: &RunConfig, ws: &Workspace, scores: &PairedScores) -> Result<Vec<CheckRecord>> {
    let Some(group_spec) = scores.group else {
        return Err(Error::invalid(
            "verification needs a predictor that can be evaluated on rotated inputs",
        ));
    };
    let st = &cfg.checks;
    let tol = st.exact_tol;
    let k = st.se_multiplier;
    let boot_seed = derive_seed(cfg.seed, BOOT_STREAM);
    let plain = &scores.plain;
    let eq = &scores.equivariantized;
    let sym = &scores.symmetrized;
    let expanded = scores.orbit_expanded();
    let n = plain.len();
    let d_plain = EmpiricalDistribution::from_slice(plain)?;
    let d_eq = EmpiricalDistribution::from_slice(eq)?;
    let d_sym = EmpiricalDistribution::from_slice(sym)?;
    let d_exp = EmpiricalDistribution::new(expanded.clone())?;
    let scale = scale_of(plain).max(scale_of(&expanded));
    let g = group_spec.to_string();
    let mut out = Vec::new();

    // pointwise and mean Jensen
    let jensen = eq.iter().zip(sym).map(|(e, s)| e - s).fold(f64::NEG_INFINITY, f64::max);
    out.push(CheckRecord::new("jensen_pointwise", format!("group={g} n={n}"), jensen, 0.0, tol * scale, true));
    out.push(CheckRecord::new("mean_jensen", format!("group={g}"), d_eq.mean(), d_sym.mean(), tol * scale, true));
    let (_, se) = paired_mean_se(plain, eq);
    out.push(CheckRecord::new(
        "mean_contraction",
        format!("group={g} se={se:.3e}"),
        d_eq.mean(),
        d_plain.mean(),
        k * se,
        true,
    ));

    // increasing convex order
    let grid = threshold_grid(&d_plain, &d_eq, st.grid_points);
    out.push(stop_loss_check("icx_stop_loss", eq, plain, &grid, k, true));
    let grid_exp = threshold_grid(&d_exp, &d_eq, st.grid_points);
    let icx_exact = icx_dominates(&d_eq, &d_exp, &grid_exp, tol * scale)?;
    out.push(CheckRecord::new(
        "icx_stop_loss_orbit_expanded",
        format!("grid={} worst_t={:.6}", grid_exp.len(), icx_exact.worst_t),
        icx_exact.max_violation,
        0.0,
        tol * scale,
        true,
    ));

    // CVaR
    for &a in &st.cvar_alphas {
        let se_gap = bootstrap_se(plain, eq, st.bootstrap_replicates, boot_seed, |p, e| {
            let (dp, de) = (EmpiricalDistribution::from_slice(p), EmpiricalDistribution::from_slice(e));
            match (dp, de) {
                (Ok(dp), Ok(de)) => cvar(&dp, a).unwrap_or(f64::NAN) - cvar(&de, a).unwrap_or(f64::NAN),
                _ => f64::NAN,
            }
        });
        let se_excess = bootstrap_se(plain, eq, st.bootstrap_replicates, boot_seed, |p, e| {
            match (EmpiricalDistribution::from_slice(p), EmpiricalDistribution::from_slice(e)) {
                (Ok(dp), Ok(de)) => cvar_gap_check(&dp, &de, a, 0.0).map_or(f64::NAN, |c| c.gap - c.upper_bound),
                _ => f64::NAN,
            }
        });
        let c = cvar_gap_check(&d_plain, &d_eq, a, 0.0)?;
        out.push(CheckRecord::new(
            "cvar_gap_nonnegative",
            format!("alpha={a}"),
            0.0,
            c.gap,
            k * se_gap,
            true,
        ));
        out.push(CheckRecord::new(
            "cvar_gap_bound",
            format!("alpha={a}"),
            c.gap,
            c.upper_bound,
            k * se_excess,
            true,
        ));
    }

    // variance structure
    let lip = lipschitz_gap_bound(cfg.score, ws.base.as_ref(), &Group::new(group_spec)?, cfg.convention, &ws.samples, 1.0, 0.0)?;
    let se_var = bootstrap_se(plain, sym, st.bootstrap_replicates, boot_seed, |p, s| {
        crate::stats::population_variance(p) - crate::stats::population_variance(s)
    });
    out.push(CheckRecord::new(
        "lipschitz_variance_gap",
        "lipschitz=1",
        lip.gap,
        lip.bound,
        k * se_var,
        true,
    ));
    out.push(CheckRecord::new(
        "lipschitz_bound_consistency",
        "",
        (lip.bound - lip.bound_alt).abs(),
        0.0,
        tol * lip.bound.abs().max(1.0),
        true,
    ));
    if cfg.score == ScoreFn::EuclideanFull {
        let sc = strong_convexity_lower_bound(ws.base.as_ref(), &Group::new(group_spec)?, cfg.convention, &ws.samples, 2.0, 0.0)?;
        out.push(CheckRecord::new(
            "strong_convexity_lower_bound",
            format!("modulus=2 mean_lhs={:.6} mean_rhs={:.6}", sc.lhs, sc.rhs),
            -sc.min_margin,
            0.0,
            tol * scale * scale,
            true,
        ));
    }
    if let Some(order) = ws.orbit_order {
        out.extend(orbit_checks(ws, scores, order, group_spec, tol)?);
    }

    // cumulant generating function chain against the orbit-expanded plain set
    let lambdas = lambda_grid(d_exp.std(), st.lambda_points);
    let cgf_gap = lambdas
        .iter()
        .map(|&l| {
            let (a, b) = (empirical_cgf(&d_eq, l), empirical_cgf(&d_exp, l));
            (a - b) / b.abs().max(1.0)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(CheckRecord::new("cgf_dominance", format!("lambdas={}", lambdas.len()), cgf_gap, 0.0, tol, true));
    let ts = threshold_grid(&d_exp, &d_eq, st.grid_points);
    let chernoff_gap = ts
        .iter()
        .map(|&t| chernoff_bound(&d_eq, t, &lambdas) - chernoff_bound(&d_exp, t, &lambdas))
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(CheckRecord::new("chernoff_dominance", format!("grid={}", ts.len()), chernoff_gap, 0.0, tol, true));
    let rate_gap = ts
        .iter()
        .map(|&t| {
            let (a, b) = (rate_function(&d_exp, t, &lambdas), rate_function(&d_eq, t, &lambdas));
            (a - b) / b.abs().max(1.0)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(CheckRecord::new("rate_function_dominance", format!("grid={}", ts.len()), rate_gap, 0.0, tol, true));
    let cgf_plain = lambdas
        .iter()
        .map(|&l| empirical_cgf(&d_eq, l) - empirical_cgf(&d_plain, l))
        .fold(f64::NEG_INFINITY, f64::max);
    out.push(CheckRecord::new("cgf_dominance_vs_plain", "informational", cgf_plain, 0.0, tol, false));

    // concentration bounds
    let (b, b_g) = (d_plain.max(), d_eq.max());
    let (v, v_g) = (d_plain.variance(), d_eq.variance());
    let range_rec = CheckRecord::new("range_contraction", "", b_g, b, tol * scale, false);
    let var_rec = CheckRecord::new("variance_contraction", "", v_g, v, tol * scale * scale, false);
    let preconditions = range_rec.ok && var_rec.ok;
    out.push(range_rec);
    out.push(var_rec);
    if b > 0.0 {
        for &f in &st.eps_fractions {
            let eps = f * b;
            let p = concentration_bounds(n, eps, b, v)?;
            let e = concentration_bounds(n, eps, b_g.max(f64::MIN_POSITIVE), v_g)?;
            for (name, lhs, rhs) in [
                ("hoeffding_tightening", e.hoeffding.value, p.hoeffding.value),
                ("bernstein_tightening", e.bernstein.value, p.bernstein.value),
                ("cantelli_tightening", e.cantelli.value, p.cantelli.value),
            ] {
                out.push(CheckRecord::new(name, format!("eps={eps:.6} ({f}b)"), lhs, rhs, 1e-12, preconditions));
            }
        }
    }

    // volume of the upper-tail sets
    let horizon = ws.base.horizon();
    let vol = VolumeSpec::for_score(cfg.score, horizon)?;
    let vg = volume_gap(&d_plain, &d_eq, st.volume_alpha, &vol, 256, tol)?;
    let params = format!(
        "alpha={} d={} log_dvol={:.4} log_bound={:.4} log_radius_ratio={:.4}",
        st.volume_alpha, vol.dim, vg.log_dvol_mean, vg.log_bound, vg.log_radius_ratio
    );
    let vtol = tol * vg.scale;
    out.push(CheckRecord::new("volume_gap_nonnegative", params.clone(), 0.0, vg.dvol_mean, vtol, true));
    out.push(CheckRecord::new("volume_gap_bound", params, vg.dvol_mean, vg.bound, vtol, true));

    if cfg.negative_control {
        let inflated: Vec<f64> = plain.iter().map(|v| 1.1 * v + 0.1).collect();
        let d_inf = EmpiricalDistribution::new(inflated)?;
        let rep = icx_dominates(&d_inf, &d_plain, &grid, tol * scale)?;
        out.push(CheckRecord::new(
            "negative_control_icx",
            "1.1*plain+0.1 claimed below plain",
            rep.max_violation,
            0.0,
            tol * scale,
            false,
        ));
    }
    Ok(out)
}

fn orbit_checks(
    ws: &Workspace,
    scores: &PairedScores,
    order: u32,
    group: GroupSpec,
    tol: f64,
) -> Result<Vec<CheckRecord>> {
    let by_orbit = |v: &[f64]| -> Vec<Vec<f64>> { ws.orbits.iter().map(|o| o.iter().map(|&i| v[i]).collect()).collect() };
    let plain = by_orbit(&scores.plain);
    let eq = by_orbit(&scores.equivariantized);
    let dec = variance_decomposition(&plain)?;
    let pair = orbit_pair_identity(&plain)?;
    let scale = dec.total.abs().max(1.0);
    // equivariance under the data's orbit group holds when C_order ⊆ group
    let nested = matches!(group, GroupSpec::Cyclic(k) if k % order == 0);
    let eq_within = variance_decomposition(&eq)?.within;
    let mut out = vec![
        CheckRecord::new(
            "variance_decomposition",
            format!("total={:.6} between={:.6} within={:.6}", dec.total, dec.between, dec.within),
            (dec.total - dec.between - dec.within).abs(),
            0.0,
            tol * scale,
            true,
        ),
        CheckRecord::new(
            "orbit_pair_identity",
            "",
            (dec.within - pair).abs(),
            0.0,
            tol * scale,
            true,
        ),
        CheckRecord::new(
            "within_orbit_variance_equivariantized",
            format!("orbit=c{order} group={group}"),
            eq_within,
            0.0,
            tol * scale,
            nested,
        ),
    ];
    if group == GroupSpec::Cyclic(order) {
        let stats = oracle_orbit_stats(&plain)?;
        let worst = ws
            .orbits
            .iter()
            .zip(&stats)
            .map(|(o, s)| (s.mean - scores.symmetrized[o[0]]).abs())
            .fold(0.0, f64::max);
        out.push(CheckRecord::new("orbit_mean_matches_symmetrized", "", worst, 0.0, tol * scale, true));
    }
    Ok(out)
}

/// Per-group summary of a sweep with a note on how the quantile moves with
/// group richness.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SummaryRow>,
    pub notes: Vec<String>,
}

pub fn sweep(cfg: &RunConfig, ws: &Workspace) -> Result<SweepResult> {
    if cfg.groups.is_empty() {
        return Err(Error::invalid("sweep needs at least one group"));
    }
    if !ws.supports_group() {
        return Err(Error::invalid("sweep needs a predictor that can be evaluated on rotated inputs"));
    }
    let per_group = cfg
        .groups
        .par_iter()
        .map(|&spec| {
            let group = Arc::new(Group::new(spec)?);
            let scores = score_pool(cfg.score, &ws.base, Some(&group), cfg.convention, &ws.samples)?;
            Ok(summarize(&calibration_table(cfg, ws, &scores)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (i, summary) in per_group.into_iter().enumerate() {
        for mut r in summary {
            if r.provenance == Provenance::Plain {
                if i > 0 {
                    continue;
                }
                r.group = "none".into();
            }
            rows.push(r);
        }
    }
    let mut notes = Vec::new();
    if cfg.groups.len() < 2 {
        notes.push("single group: no richness trend to report".to_string());
    }
    for &alpha in &cfg.alphas {
        for p in [Provenance::Equivariantized, Provenance::Symmetrized] {
            let qs: Vec<(String, f64)> = rows
                .iter()
                .filter(|r| r.alpha == alpha && r.provenance == p)
                .map(|r| (r.group.clone(), r.q_mean))
                .collect();
            if qs.len() < 2 {
                continue;
            }
            let monotone = qs.windows(2).all(|w| w[1].1 <= w[0].1);
            let chain: Vec<String> = qs.iter().map(|(g, q)| format!("{g}={q:.4}")).collect();
            notes.push(format!(
                "alpha={alpha} {p}: {} ({})",
                if monotone {
                    "quantile non-increasing in the listed group order (observed)"
                } else {
                    "quantile not monotone in the listed group order (observed)"
                },
                chain.join(", ")
            ));
        }
    }
    Ok(SweepResult { rows, notes })
}

/// Scores the pool once with the configured group (or none for predictors
/// that cannot see rotated inputs).
pub fn score_workspace(cfg: &RunConfig, ws: &Workspace) -> Result<PairedScores> {
    if ws.supports_group() {
        let group = Arc::new(Group::new(cfg.group)?);
        score_pool(cfg.score, &ws.base, Some(&group), cfg.convention, &ws.samples)
    } else {
        score_pool(cfg.score, &ws.base, None, cfg.convention, &ws.samples)
    }
}

/// Mean stop-loss transform over a grid, exposed for reporting.
pub fn stop_loss_curve(values: &[f64], grid: &[f64]) -> Result<Vec<f64>> {
    let d = EmpiricalDistribution::from_slice(values)?;
    Ok(grid.iter().map(|&t| stop_loss(&d, t)).collect())
}
