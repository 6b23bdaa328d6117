use rand::Rng;

use crate::seeding::rng_for;

/// Sample standard deviation (divisor `n - 1`); zero for fewer than two values.
pub fn sample_std(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    (mean, sample_std(values) / n.sqrt())
}

/// Mean and standard error of `a_i - b_i`.
pub fn paired_mean_se(a: &[f64], b: &[f64]) -> (f64, f64) {
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_and_se(&diffs)
}

/// Bootstrap standard error of a statistic of paired samples, resampling
/// indices with replacement.
pub fn bootstrap_se<F>(a: &[f64], b: &[f64], replicates: usize, seed: u64, stat: F) -> f64
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    let n = a.len().min(b.len());
    if n == 0 || replicates < 2 {
        return 0.0;
    }
    let mut rng = rng_for(seed, 0xB007);
    let mut ra = vec![0.0; n];
    let mut rb = vec![0.0; n];
    let stats: Vec<f64> = (0..replicates)
        .map(|_| {
            for i in 0..n {
                let j = rng.random_range(0..n);
                ra[i] = a[j];
                rb[i] = b[j];
            }
            stat(&ra, &rb)
        })
        .collect();
    sample_std(&stats)
}
