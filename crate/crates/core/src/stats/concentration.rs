use serde::{Deserialize, Serialize};

use super::BoundReport;
use crate::error::{Error, Result};

/// Hoeffding, Bernstein and Chebyshev–Cantelli tail bounds for a mean of `n`
/// scores in `[0, b]` with variance `var`, at deviation `eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationBounds {
    /// `2 exp(-2 n ε² / b²)`.
    pub hoeffding: BoundReport,
    /// `exp(-n ε² / (2 Var + (2/3) b ε))`.
    pub bernstein: BoundReport,
    /// `Var / (Var + ε²)`.
    pub cantelli: BoundReport,
}

pub fn concentration_bounds(n: usize, eps: f64, b: f64, var: f64) -> Result<ConcentrationBounds> {
    if n == 0 || !(eps > 0.0) || !(b > 0.0) || !(var >= 0.0) {
        return Err(Error::invalid(format!(
            "concentration bounds need n >= 1, eps > 0, b > 0, var >= 0 (got n={n}, eps={eps}, b={b}, var={var})"
        )));
    }
    let nf = n as f64;
    let params = [("n", nf), ("eps", eps), ("b", b), ("var", var)];
    let cantelli = if var == 0.0 { 0.0 } else { var / (var + eps * eps) };
    Ok(ConcentrationBounds {
        hoeffding: BoundReport::new("hoeffding", &params, 2.0 * (-2.0 * nf * eps * eps / (b * b)).exp()),
        bernstein: BoundReport::new(
            "bernstein",
            &params,
            (-nf * eps * eps / (2.0 * var + 2.0 / 3.0 * b * eps)).exp(),
        ),
        cantelli: BoundReport::new("chebyshev-cantelli", &params, cantelli),
    })
}
