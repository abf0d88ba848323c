use serde::{Deserialize, Serialize};

use super::{loo, Exposure, WeightVector};
use crate::covariance::CovarianceEstimate;
use crate::error::{IcdError, Result};

/// Largest peak-to-trough fall of `prod(1 + r_t)`, starting from a value of
/// one, as a positive fraction.
pub fn max_drawdown(returns: &[f64]) -> Result<f64> {
    if returns.is_empty() {
        return Err(IcdError::data("max drawdown of an empty series"));
    }
    let mut value = 1.0;
    let mut peak = 1.0f64;
    let mut worst = 0.0f64;
    for r in returns {
        value *= 1.0 + r;
        peak = peak.max(value);
        worst = worst.max(1.0 - value / peak);
    }
    Ok(worst)
}

/// Shows how far the sum of iVols is from portfolio volatility, together
/// with the two statistics whose vanishing would make them equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IvolGap {
    pub assets: Vec<String>,
    pub ivols: Vec<f64>,
    pub sum_ivol: f64,
    pub sigma_p: f64,
    /// `sum_ivol - sigma_p`
    pub gap: f64,
    /// Sum of the strict upper triangle of the covariance matrix.
    pub cond1_stat: f64,
    /// Per asset, `(n-1)[(n-1)(1-w_a)^2 - 1]`.
    pub cond2_stat: Vec<f64>,
}

/// No inequality between `sum_ivol` and `sigma_p` is assumed; both are
/// reported.
pub fn ivol_additivity_gap(w: &WeightVector, cov: &CovarianceEstimate) -> Result<IvolGap> {
    let x = Exposure::new(w, cov)?;
    x.require_risk()?;
    if let Some(a) = w.weights.iter().position(|&wa| loo::is_unit(wa)) {
        return Err(IcdError::Degenerate(format!(
            "`{}` has weight 1; iVol gap needs every weight different from 1",
            w.assets[a]
        )));
    }
    let ivols = w
        .assets
        .iter()
        .enumerate()
        .map(|(a, name)| loo::stats(&x, a, name).map(|s| s.ivol))
        .collect::<Result<Vec<_>>>()?;
    let sum_ivol: f64 = ivols.iter().sum();

    let n = w.len();
    let mut cond1_stat = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            cond1_stat += cov.matrix[(i, j)];
        }
    }
    let m = n as f64 - 1.0;
    let cond2_stat = w
        .weights
        .iter()
        .map(|wa| m * (m * (1.0 - wa).powi(2) - 1.0))
        .collect();

    Ok(IvolGap {
        assets: w.assets.clone(),
        ivols,
        sum_ivol,
        sigma_p: x.sigma_p,
        gap: sum_ivol - x.sigma_p,
        cond1_stat,
        cond2_stat,
    })
}
