//! Leave-one-out quantities: the volatility of the portfolio with one asset
//! removed (remaining weights rescaled by `1/(1 - w_a)`), the asset's
//! correlation with that residual portfolio, and incremental volatility.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{Exposure, WeightVector};
use crate::covariance::CovarianceEstimate;
use crate::error::{IcdError, Result};

const UNIT_WEIGHT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaveOneOutStats {
    pub asset: String,
    /// Volatility of the rescaled residual portfolio.
    pub sigma_loo: f64,
    /// Correlation of the asset with the residual portfolio (0 when either
    /// side has zero volatility).
    pub rho_loo: f64,
    /// Incremental volatility, `sigma_p - sigma_loo`.
    pub ivol: f64,
}

pub(crate) fn is_unit(w: f64) -> bool {
    (1.0 - w).abs() < UNIT_WEIGHT_TOL
}

fn residual_is_empty(x: &Exposure<'_>, a: usize) -> bool {
    x.w.iter().enumerate().all(|(i, &w)| i == a || w == 0.0)
}

/// Closed-form leave-one-out stats from `sigma_p`, `sigma_a` and
/// `cov(r_a, r_p)`; no residual portfolio is materialized.
pub(crate) fn stats(x: &Exposure<'_>, a: usize, asset: &str) -> Result<LeaveOneOutStats> {
    x.require_risk()?;
    let wa = x.w[a];
    let var_a = x.cov[(a, a)];
    let cov_ap = x.cov_with_portfolio[a];

    if is_unit(wa) {
        if residual_is_empty(x, a) {
            return Ok(LeaveOneOutStats {
                asset: asset.to_owned(),
                sigma_loo: 0.0,
                rho_loo: 0.0,
                ivol: x.sigma_p,
            });
        }
        return Err(IcdError::Degenerate(format!(
            "`{asset}` has weight 1; the rescaled residual portfolio is undefined"
        )));
    }

    let scale = 1.0 - wa;
    // variance of r_p - w_a r_a, before rescaling
    let residual_var = (x.sigma_p * x.sigma_p + wa * wa * var_a - 2.0 * wa * cov_ap).max(0.0);
    let sigma_loo = residual_var.sqrt() / scale.abs();
    let cov_loo = (cov_ap - wa * var_a) / scale;
    let sigma_a = x.vol(a);
    let rho_loo = if sigma_a > 0.0 && sigma_loo > 0.0 {
        cov_loo / (sigma_a * sigma_loo)
    } else {
        0.0
    };
    Ok(LeaveOneOutStats {
        asset: asset.to_owned(),
        sigma_loo,
        rho_loo,
        ivol: x.sigma_p - sigma_loo,
    })
}

fn asset_index(w: &WeightVector, asset: &str) -> Result<usize> {
    w.assets
        .iter()
        .position(|a| a == asset)
        .ok_or_else(|| IcdError::config(format!("asset `{asset}` not in portfolio")))
}

pub fn loo_stats(
    w: &WeightVector,
    cov: &CovarianceEstimate,
    asset: &str,
) -> Result<LeaveOneOutStats> {
    let x = Exposure::new(w, cov)?;
    stats(&x, asset_index(w, asset)?, asset)
}

/// iVol from the closed form in `sigma_p`, `w_a`, `sigma_a` and
/// `cov(r_a, r_p)`.
pub fn ivol_closed_form(w: &WeightVector, cov: &CovarianceEstimate, asset: &str) -> Result<f64> {
    Ok(loo_stats(w, cov, asset)?.ivol)
}

/// iVol by definition: build the rescaled residual weight vector and take
/// its volatility directly from the covariance matrix.
pub fn ivol_definitional(w: &WeightVector, cov: &CovarianceEstimate, asset: &str) -> Result<f64> {
    let x = Exposure::new(w, cov)?;
    x.require_risk()?;
    let a = asset_index(w, asset)?;
    let wa = w.weights[a];
    if is_unit(wa) {
        if residual_is_empty(&x, a) {
            return Ok(x.sigma_p);
        }
        return Err(IcdError::Degenerate(format!("`{asset}` has weight 1")));
    }
    let residual = DVector::from_fn(w.len(), |i, _| {
        if i == a {
            0.0
        } else {
            w.weights[i] / (1.0 - wa)
        }
    });
    let var = residual.dot(&(x.cov * &residual)).max(0.0);
    Ok(x.sigma_p - var.sqrt())
}

/// Large-portfolio approximation of the correlation component, taking
/// `sigma_loo ~ sigma_p`: `w_a (1 - w_a) sigma_a rho_loo`.
pub fn corr_limit(w: &WeightVector, cov: &CovarianceEstimate, asset: &str) -> Result<f64> {
    let x = Exposure::new(w, cov)?;
    let a = asset_index(w, asset)?;
    let s = stats(&x, a, asset)?;
    let wa = w.weights[a];
    Ok(wa * (1.0 - wa) * x.vol(a) * s.rho_loo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::equicorrelated;
    use nalgebra::DMatrix;

    fn equal(n: usize) -> WeightVector {
        WeightVector::anonymous(vec![1.0 / n as f64; n]).unwrap()
    }

    #[test]
    fn two_asset_ivol() {
        let c = CovarianceEstimate::anonymous(DMatrix::identity(2, 2)).unwrap();
        let s = loo_stats(&equal(2), &c, "A0").unwrap();
        assert!((s.sigma_loo - 1.0).abs() < 1e-15);
        assert!((s.ivol - (0.5f64.sqrt() - 1.0)).abs() < 1e-15);
        assert!((s.ivol + 0.292893).abs() < 1e-6);
        assert_eq!(s.rho_loo, 0.0);
    }

    #[test]
    fn five_asset_uncorrelated_ivol() {
        let c = CovarianceEstimate::anonymous(DMatrix::identity(5, 5)).unwrap();
        let w = equal(5);
        let s = loo_stats(&w, &c, "A2").unwrap();
        assert!((s.sigma_loo - 0.5).abs() < 1e-15);
        assert!((s.ivol + 0.052786).abs() < 1e-6);
        let direct = ivol_definitional(&w, &c, "A2").unwrap();
        assert!((direct - s.ivol).abs() < 1e-15);
    }

    #[test]
    fn vanishing_uncorrelated_position() {
        let mut m = equicorrelated(4, 1.0, 0.4);
        for i in 1..4 {
            m[(0, i)] = 0.0;
            m[(i, 0)] = 0.0;
        }
        let c = CovarianceEstimate::anonymous(m).unwrap();
        let mut last = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6] {
            let w = WeightVector::anonymous(vec![eps, 0.3, 0.3, 0.3]).unwrap();
            let iv = ivol_closed_form(&w, &c, "A0").unwrap().abs();
            assert!(iv < last);
            last = iv;
        }
        assert!(last < 1e-6);
    }

    #[test]
    fn unit_weight_cases() {
        let c = CovarianceEstimate::anonymous(equicorrelated(2, 1.0, 0.3)).unwrap();
        let alone = WeightVector::anonymous(vec![1.0, 0.0]).unwrap();
        let s = loo_stats(&alone, &c, "A0").unwrap();
        assert_eq!(s.ivol, 1.0);
        assert_eq!(ivol_definitional(&alone, &c, "A0").unwrap(), 1.0);

        let mixed = WeightVector::anonymous(vec![1.0, 0.5]).unwrap();
        assert!(matches!(
            loo_stats(&mixed, &c, "A0"),
            Err(IcdError::Degenerate(_))
        ));
    }

    #[test]
    fn leverage_above_one_keeps_volatility_positive() {
        let c = CovarianceEstimate::anonymous(equicorrelated(5, 1.0, 0.5)).unwrap();
        let w = WeightVector::anonymous(vec![2.0; 5]).unwrap();
        for a in &w.assets {
            let s = loo_stats(&w, &c, a).unwrap();
            assert!(s.sigma_loo >= 0.0);
            let direct = ivol_definitional(&w, &c, a).unwrap();
            assert!((direct - s.ivol).abs() < 1e-12);
        }
    }

    #[test]
    fn limit_matches_exact_when_vols_coincide() {
        // rho = 1 throughout: removing one asset leaves sigma unchanged
        let c = CovarianceEstimate::anonymous(equicorrelated(3, 1.0, 1.0)).unwrap();
        let w = equal(3);
        let report = super::super::icd(&w, &c).unwrap();
        let s = loo_stats(&w, &c, "A0").unwrap();
        assert!((s.sigma_loo - report.portfolio_vol).abs() < 1e-12);
        let approx = corr_limit(&w, &c, "A0").unwrap();
        assert!((approx - report.rows[0].rc_corr).abs() < 1e-12);
    }

    #[test]
    fn two_asset_limit_gap() {
        let c = CovarianceEstimate::anonymous(equicorrelated(2, 1.0, 0.5)).unwrap();
        let w = equal(2);
        let report = super::super::icd(&w, &c).unwrap();
        let exact = report.rows[0].rc_corr;
        let approx = corr_limit(&w, &c, "A0").unwrap();
        // approx/exact = sigma_p / sigma_loo = sqrt(0.75) / 1
        assert!((approx / exact - 0.75f64.sqrt()).abs() < 1e-12);
        assert!((approx - exact).abs() > 0.01);
    }
}
