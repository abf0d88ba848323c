//! Risk contribution and its inherent/correlation decomposition.
//!
//! For weights `w` and covariance `S`, with `sigma_p = sqrt(w' S w)`:
//!
//! ```text
//! RC(a)      = w_a (S w)_a / sigma_p                 sums to sigma_p
//! RC_inh(a)  = w_a^2 S_aa / sigma_p                  never negative
//! RC_corr(a) = RC(a) - RC_inh(a)
//!            = w_a (1 - w_a) sigma_a sigma_loo rho_loo / sigma_p
//! ```
//!
//! where `sigma_loo` and `rho_loo` describe the portfolio with asset `a`
//! removed and the remaining weights rescaled by `1/(1 - w_a)`.
//!
//! Weights are signed fractions of NAV and are never renormalized, so
//! leverage passes straight through. Everything here is per-period.

mod diagnostics;
mod loo;

pub use diagnostics::{ivol_additivity_gap, max_drawdown, IvolGap};
pub use loo::{corr_limit, ivol_closed_form, ivol_definitional, loo_stats, LeaveOneOutStats};

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::covariance::{CovarianceEstimate, EstimatorSpec};
use crate::error::{IcdError, Result};
use crate::exec::{map_ordered, Execution};
use crate::market_data::ReturnPanel;

/// Tolerance below which a negative `w' S w` is treated as rounding.
pub const VARIANCE_FLOOR: f64 = -1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub assets: Vec<String>,
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(assets: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if assets.len() != weights.len() {
            return Err(IcdError::Shape(format!(
                "{} weights for {} assets",
                weights.len(),
                assets.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(IcdError::config(format!(
                "weight for `{}` is not finite",
                assets[i]
            )));
        }
        if weights.iter().all(|&w| w == 0.0) {
            return Err(IcdError::config("at least one weight must be nonzero"));
        }
        Ok(Self { assets, weights })
    }

    /// Weights for assets `A0, A1, ...`, matching [`CovarianceEstimate::anonymous`].
    pub fn anonymous(weights: Vec<f64>) -> Result<Self> {
        let assets = (0..weights.len()).map(|i| format!("A{i}")).collect();
        Self::new(assets, weights)
    }

    /// Gross exposure, sum of |w|.
    pub fn leverage(&self) -> f64 {
        self.weights.iter().map(|w| w.abs()).sum()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, asset: &str) -> Option<f64> {
        self.assets
            .iter()
            .position(|a| a == asset)
            .map(|i| self.weights[i])
    }

    /// Reorder to `order`; assets not held get weight zero.
    pub fn aligned_to(&self, order: &[String]) -> Result<Self> {
        if let Some(extra) = self.assets.iter().find(|a| !order.contains(a)) {
            return Err(IcdError::config(format!(
                "weighted asset `{extra}` not in universe"
            )));
        }
        let weights = order.iter().map(|a| self.get(a).unwrap_or(0.0)).collect();
        Self::new(order.to_vec(), weights)
    }

    pub fn scaled(&self, k: f64) -> Result<Self> {
        Self::new(
            self.assets.clone(),
            self.weights.iter().map(|w| w * k).collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionRow {
    pub asset: String,
    pub weight: f64,
    pub rc: f64,
    pub rc_inh: f64,
    pub rc_corr: f64,
    /// `None` when the leave-one-out portfolio is undefined (weight exactly 1
    /// with other holdings present).
    pub loo: Option<LeaveOneOutStats>,
    pub is_hedge: bool,
    /// Max drawdown of the asset's own compounded returns, when a return
    /// history was attached.
    pub mdd: Option<f64>,
}

impl AttributionRow {
    /// Row from the two components; `rc` is stored as their sum so that the
    /// sign of `rc` and the test `-rc_corr > rc_inh` agree exactly.
    pub fn from_components(asset: String, weight: f64, rc_inh: f64, rc_corr: f64) -> Self {
        let rc = rc_inh + rc_corr;
        Self {
            asset,
            weight,
            rc,
            rc_inh,
            rc_corr,
            loo: None,
            is_hedge: rc < 0.0,
            mdd: None,
        }
    }

    pub fn ivol(&self) -> Option<f64> {
        self.loo.as_ref().map(|l| l.ivol)
    }

    fn scaled(&self, k: f64) -> Self {
        let mut row = Self::from_components(
            self.asset.clone(),
            self.weight,
            self.rc_inh * k,
            self.rc_corr * k,
        );
        row.loo = self.loo.as_ref().map(|l| LeaveOneOutStats {
            asset: l.asset.clone(),
            sigma_loo: l.sigma_loo * k,
            rho_loo: l.rho_loo,
            ivol: l.ivol * k,
        });
        row.mdd = self.mdd;
        row
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionReport {
    pub rows: Vec<AttributionRow>,
    pub portfolio_vol: f64,
    pub as_of: Option<NaiveDate>,
    pub estimator: Option<EstimatorSpec>,
}

impl AttributionReport {
    pub fn total_rc(&self) -> f64 {
        self.rows.iter().map(|r| r.rc).sum()
    }

    pub fn row(&self, asset: &str) -> Option<&AttributionRow> {
        self.rows.iter().find(|r| r.asset == asset)
    }

    /// Multiply every volatility-unit quantity by `k` (display scaling).
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            rows: self.rows.iter().map(|r| r.scaled(k)).collect(),
            portfolio_vol: self.portfolio_vol * k,
            as_of: self.as_of,
            estimator: self.estimator,
        }
    }

    /// Attach per-asset max drawdown computed over `history`.
    pub fn with_drawdowns(mut self, history: &ReturnPanel) -> Result<Self> {
        for row in &mut self.rows {
            let j = history
                .asset_index(&row.asset)
                .ok_or_else(|| IcdError::data(format!("no return history for `{}`", row.asset)))?;
            row.mdd = Some(max_drawdown(history.column(j))?);
        }
        Ok(self)
    }
}

/// Weights and covariance resolved to plain slices plus the shared
/// products every form needs.
pub(crate) struct Exposure<'a> {
    pub w: &'a [f64],
    pub cov: &'a DMatrix<f64>,
    /// (S w)_a = cov(r_a, r_p)
    pub cov_with_portfolio: DVector<f64>,
    pub sigma_p: f64,
}

impl<'a> Exposure<'a> {
    pub fn new(w: &'a WeightVector, cov: &'a CovarianceEstimate) -> Result<Self> {
        if w.len() != cov.n_assets() {
            return Err(IcdError::Shape(format!(
                "{} weights against a {}-asset covariance",
                w.len(),
                cov.n_assets()
            )));
        }
        if w.assets != cov.assets {
            return Err(IcdError::Shape(
                "weight and covariance asset orders differ".into(),
            ));
        }
        let wv = DVector::from_column_slice(&w.weights);
        let cov_with_portfolio = &cov.matrix * &wv;
        let var = wv.dot(&cov_with_portfolio);
        if var < VARIANCE_FLOOR || !var.is_finite() {
            return Err(IcdError::Numerical(format!(
                "portfolio variance {var} is negative; covariance is not PSD"
            )));
        }
        Ok(Self {
            w: &w.weights,
            cov: &cov.matrix,
            cov_with_portfolio,
            sigma_p: var.max(0.0).sqrt(),
        })
    }

    pub fn require_risk(&self) -> Result<()> {
        if self.sigma_p > 0.0 {
            Ok(())
        } else {
            Err(IcdError::Degenerate("portfolio volatility is zero".into()))
        }
    }

    pub fn vol(&self, a: usize) -> f64 {
        self.cov[(a, a)].max(0.0).sqrt()
    }

    pub fn rc(&self, a: usize) -> f64 {
        self.w[a] * self.cov_with_portfolio[a] / self.sigma_p
    }

    pub fn rc_inh(&self, a: usize) -> f64 {
        self.w[a] * self.w[a] * self.cov[(a, a)] / self.sigma_p
    }
}

/// Portfolio volatility `sqrt(w' S w)`.
pub fn portfolio_vol(w: &WeightVector, cov: &CovarianceEstimate) -> Result<f64> {
    Ok(Exposure::new(w, cov)?.sigma_p)
}

/// RC via the covariance-with-portfolio form, `w_a cov(r_a, r_p) / sigma_p`.
pub fn rc(w: &WeightVector, cov: &CovarianceEstimate) -> Result<Vec<f64>> {
    let x = Exposure::new(w, cov)?;
    x.require_risk()?;
    Ok((0..w.len()).map(|a| x.rc(a)).collect())
}

/// RC as the explicit double sum `sum_i w_a w_i cov(a, i) / sigma_p`.
pub fn rc_definitional(w: &WeightVector, cov: &CovarianceEstimate) -> Result<Vec<f64>> {
    let sigma_p = portfolio_vol(w, cov)?;
    if sigma_p == 0.0 {
        return Err(IcdError::Degenerate("portfolio volatility is zero".into()));
    }
    let n = w.len();
    Ok((0..n)
        .map(|a| {
            let mut acc = 0.0;
            for i in 0..n {
                acc += w.weights[a] * w.weights[i] * cov.matrix[(a, i)];
            }
            acc / sigma_p
        })
        .collect())
}

/// RC in weight x volatility x correlation form, `w_a sigma_a rho(r_a, r_p)`.
pub fn rc_xsr(w: &WeightVector, cov: &CovarianceEstimate) -> Result<Vec<f64>> {
    let x = Exposure::new(w, cov)?;
    x.require_risk()?;
    Ok((0..w.len())
        .map(|a| {
            let sigma_a = x.vol(a);
            if sigma_a == 0.0 {
                return 0.0;
            }
            let rho = x.cov_with_portfolio[a] / (sigma_a * x.sigma_p);
            x.w[a] * sigma_a * rho
        })
        .collect())
}

/// RC in leave-one-out form,
/// `(w_a^2 sigma_a^2 + w_a (1 - w_a) cov(r_a, r_loo)) / sigma_p`,
/// with `cov(r_a, r_loo)` summed directly over the rescaled residual weights.
pub fn rc_leave_one_out(w: &WeightVector, cov: &CovarianceEstimate) -> Result<Vec<f64>> {
    let x = Exposure::new(w, cov)?;
    x.require_risk()?;
    let n = w.len();
    Ok((0..n)
        .map(|a| {
            let wa = x.w[a];
            let residual: f64 = (0..n)
                .filter(|&i| i != a)
                .map(|i| x.cov[(a, i)] * x.w[i])
                .sum();
            // at w_a = 1 the rescaling is undefined but the product is not
            let cross = if loo::is_unit(wa) {
                wa * residual
            } else {
                let cov_loo = residual / (1.0 - wa);
                wa * (1.0 - wa) * cov_loo
            };
            (wa * wa * x.cov[(a, a)] + cross) / x.sigma_p
        })
        .collect())
}

/// Inherent/correlation decomposition for every asset.
pub fn icd(w: &WeightVector, cov: &CovarianceEstimate) -> Result<AttributionReport> {
    let x = Exposure::new(w, cov)?;
    x.require_risk()?;
    let rows = (0..w.len())
        .map(|a| {
            let rc_inh = x.rc_inh(a);
            let rc_corr = x.rc(a) - rc_inh;
            let mut row =
                AttributionRow::from_components(w.assets[a].clone(), x.w[a], rc_inh, rc_corr);
            row.loo = loo::stats(&x, a, &w.assets[a]).ok();
            row
        })
        .collect();
    Ok(AttributionReport {
        rows,
        portfolio_vol: x.sigma_p,
        as_of: cov.window.map(|win| win.end),
        estimator: cov.window.map(|_| cov.spec),
    })
}

/// [`icd`] over a batch of independent portfolios.
pub fn icd_batch(
    exec: Execution,
    items: &[(WeightVector, CovarianceEstimate)],
) -> Vec<Result<AttributionReport>> {
    map_ordered(exec, items, |(w, c)| icd(w, c))
}

/// True when the position reduces portfolio risk: its negative correlation
/// component outweighs its inherent component.
pub fn hedge_check(row: &AttributionRow) -> bool {
    let offsets = -row.rc_corr > row.rc_inh;
    debug_assert_eq!(
        offsets,
        row.rc < 0.0,
        "row {} is internally inconsistent",
        row.asset
    );
    offsets
}
