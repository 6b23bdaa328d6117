use super::EmpiricalDistribution;

/// `log mean exp(λ v)`, shifted by the largest exponent so it cannot overflow.
pub fn empirical_cgf(dist: &EmpiricalDistribution, lambda: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let shift = (lambda * dist.min()).max(lambda * dist.max());
    let sum: f64 = dist
        .sorted_values()
        .iter()
        .map(|v| (lambda * v - shift).exp())
        .sum();
    shift + (sum / dist.n() as f64).ln()
}

/// `{0}` followed by `points` log-spaced values in `[Λ/1000, Λ]`, with
/// `Λ = 10 / std` (`Λ = 10` for a degenerate spread).
pub fn lambda_grid(std: f64, points: usize) -> Vec<f64> {
    let upper = if std > 0.0 && std.is_finite() { 10.0 / std } else { 10.0 };
    let lower = upper / 1000.0;
    let mut grid = vec![0.0];
    if points == 1 {
        grid.push(upper);
    } else if points > 1 {
        let step = (upper / lower).ln() / (points - 1) as f64;
        grid.extend((0..points).map(|i| lower * (step * i as f64).exp()));
    }
    grid
}

/// `min_λ exp(-λ t + ψ(λ))` over the grid together with `λ = 0`, so the
/// result never exceeds 1.
pub fn chernoff_bound(dist: &EmpiricalDistribution, t: f64, lambdas: &[f64]) -> f64 {
    lambdas
        .iter()
        .map(|&l| (-l * t + empirical_cgf(dist, l)).exp())
        .fold(1.0, f64::min)
}

/// `max_λ { λ t - ψ(λ) }` over the grid together with `λ = 0`, so the result
/// is never negative.
pub fn rate_function(dist: &EmpiricalDistribution, t: f64, lambdas: &[f64]) -> f64 {
    lambdas
        .iter()
        .map(|&l| l * t - empirical_cgf(dist, l))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(v: &[f64]) -> EmpiricalDistribution {
        EmpiricalDistribution::from_slice(v).unwrap()
    }

    #[test]
    fn cgf_examples() {
        let c = dist(&[1.7; 4]);
        assert!((empirical_cgf(&c, 2.0) - 3.4).abs() < 1e-12);
        assert_eq!(empirical_cgf(&dist(&[1.0, 5.0]), 0.0), 0.0);
        let ln2 = std::f64::consts::LN_2;
        assert!((empirical_cgf(&dist(&[0.0, 1.0]), ln2) - 1.5f64.ln()).abs() < 1e-12);
        // large exponents stay finite
        assert!(empirical_cgf(&dist(&[1000.0, 1001.0]), 5.0).is_finite());
    }

    #[test]
    fn chernoff_examples() {
        let d = dist(&[0.2, 0.9, 1.6]);
        let grid = lambda_grid(d.std(), 64);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid.len(), 65);
        assert_eq!(chernoff_bound(&d, d.mean(), &grid), 1.0);
        assert_eq!(chernoff_bound(&d, 0.1, &grid), 1.0);
        let zeros = dist(&[0.0, 0.0]);
        let big = [0.0, 0.5, 3.0];
        assert!((chernoff_bound(&zeros, 1.0, &big) - (-3.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rate_function_examples() {
        let d = dist(&[0.2, 0.9, 1.6, 4.0]);
        let grid = lambda_grid(d.std(), 64);
        assert!(rate_function(&d, d.mean(), &grid) <= 1e-12);
        let c = dist(&[2.0; 3]);
        assert!(rate_function(&c, 2.0, &grid).abs() <= 1e-12);
        assert!(rate_function(&d, 3.5, &grid) > 0.0);
    }
}
