//! Covariance estimators.
//!
//! All estimators return symmetric matrices over the panel's assets, in
//! per-period return units squared. Sample and EWMA estimates are PSD up to
//! rounding. Rank-based and lag-adjusted estimates need not be, so they are
//! passed through [`psd_repair`] by default.

mod rank;
mod repair;

pub use rank::{kendall_tau_b, rank_correlation, rank_cov, spearman_rho};
pub use repair::{is_symmetric, psd_repair};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{IcdError, Result};
use crate::market_data::{DateWindow, ReturnPanel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankKind {
    Spearman,
    Kendall,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorKind {
    Sample,
    /// Exponentially weighted; `decay` is the per-period factor applied to
    /// older observations (1.0 = equal weights).
    Ewma {
        decay: f64,
    },
    /// Blend of the sample matrix and a constant-correlation target.
    Shrinkage {
        intensity: f64,
    },
    Rank {
        method: RankKind,
    },
}

/// Full estimator configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    #[serde(flatten)]
    pub kind: EstimatorKind,
    /// Add the one-period lagged cross-covariance.
    pub lag_adjust: bool,
    /// With `lag_adjust`, also add the leading term.
    pub async_full: bool,
    pub psd_repair: bool,
}

impl EstimatorSpec {
    /// Spec for `kind` with no lag adjustment and the default repair policy.
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            lag_adjust: false,
            async_full: false,
            psd_repair: Self::default_repair(&kind, false),
        }
    }

    pub fn sample() -> Self {
        Self::new(EstimatorKind::Sample)
    }

    pub fn ewma(decay: f64) -> Self {
        Self::new(EstimatorKind::Ewma { decay })
    }

    pub fn shrinkage(intensity: f64) -> Self {
        Self::new(EstimatorKind::Shrinkage { intensity })
    }

    pub fn rank(method: RankKind) -> Self {
        Self::new(EstimatorKind::Rank { method })
    }

    /// Enable the lagged term (and the repair that goes with it by default).
    pub fn with_lag(mut self, async_full: bool) -> Self {
        self.lag_adjust = true;
        self.async_full = async_full;
        self.psd_repair = Self::default_repair(&self.kind, true);
        self
    }

    pub fn with_repair(mut self, repair: bool) -> Self {
        self.psd_repair = repair;
        self
    }

    /// Repair is on by default only where the estimate can leave the PSD cone.
    pub fn default_repair(kind: &EstimatorKind, lag_adjust: bool) -> bool {
        lag_adjust || matches!(kind, EstimatorKind::Rank { .. })
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            EstimatorKind::Ewma { decay } => check_decay(decay),
            EstimatorKind::Shrinkage { intensity } => check_intensity(intensity),
            EstimatorKind::Sample | EstimatorKind::Rank { .. } => Ok(()),
        }?;
        if self.async_full && !self.lag_adjust {
            return Err(IcdError::config("async_full requires lag_adjust"));
        }
        Ok(())
    }

    /// Fewest return rows this estimator accepts.
    pub fn min_rows(&self) -> usize {
        if self.lag_adjust || matches!(self.kind, EstimatorKind::Rank { .. }) {
            3
        } else {
            2
        }
    }
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self::sample()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub assets: Vec<String>,
    pub matrix: DMatrix<f64>,
    pub spec: EstimatorSpec,
    /// Absent for matrices supplied directly rather than estimated.
    pub window: Option<DateWindow>,
    pub repaired: bool,
}

impl CovarianceEstimate {
    /// Wrap a caller-supplied covariance matrix.
    pub fn from_matrix(assets: Vec<String>, matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() != assets.len() {
            return Err(IcdError::Shape(format!(
                "{}x{} matrix for {} assets",
                matrix.nrows(),
                matrix.ncols(),
                assets.len()
            )));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(IcdError::data("covariance matrix has non-finite entries"));
        }
        if !is_symmetric(&matrix) {
            return Err(IcdError::data("covariance matrix is not symmetric"));
        }
        Ok(Self {
            assets,
            matrix,
            spec: EstimatorSpec::sample(),
            window: None,
            repaired: false,
        })
    }

    /// Convenience for tests and synthetic work: assets named `A0`, `A1`, ...
    pub fn anonymous(matrix: DMatrix<f64>) -> Result<Self> {
        let assets = (0..matrix.nrows()).map(|i| format!("A{i}")).collect();
        Self::from_matrix(assets, matrix)
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn variance(&self, i: usize) -> f64 {
        self.matrix[(i, i)]
    }

    fn estimated(panel: &ReturnPanel, matrix: DMatrix<f64>, spec: EstimatorSpec) -> Self {
        Self {
            assets: panel.assets().to_vec(),
            matrix,
            spec,
            window: Some(DateWindow::covering(panel)),
            repaired: false,
        }
    }
}

/// Estimate under a full spec: base estimator, optional lag term, optional
/// PSD repair.
pub fn estimate(panel: &ReturnPanel, spec: &EstimatorSpec) -> Result<CovarianceEstimate> {
    spec.validate()?;
    let mut est = if spec.lag_adjust {
        lag_adjusted_cov(panel, spec)?
    } else {
        let matrix = base_matrix(panel, &spec.kind)?;
        CovarianceEstimate::estimated(panel, matrix, *spec)
    };
    if spec.psd_repair && !est.repaired {
        est.matrix = psd_repair(&est.matrix)?;
        est.repaired = true;
    }
    Ok(est)
}

fn base_matrix(panel: &ReturnPanel, kind: &EstimatorKind) -> Result<DMatrix<f64>> {
    match *kind {
        EstimatorKind::Sample => sample_matrix(panel),
        EstimatorKind::Ewma { decay } => ewma_matrix(panel, decay),
        EstimatorKind::Shrinkage { intensity } => shrinkage_matrix(panel, intensity),
        EstimatorKind::Rank { method } => rank::rank_matrix(panel, method),
    }
}

/// Unbiased sample covariance (denominator n-1).
pub fn sample_cov(panel: &ReturnPanel) -> Result<CovarianceEstimate> {
    let matrix = sample_matrix(panel)?;
    Ok(CovarianceEstimate::estimated(
        panel,
        matrix,
        EstimatorSpec::sample(),
    ))
}

/// Normalized weights proportional to `decay^(T-t)` for `t = 1..=T`.
pub fn ewma_weights(count: usize, decay: f64) -> Result<Vec<f64>> {
    check_decay(decay)?;
    if count == 0 {
        return Err(IcdError::data("EWMA weights need at least one observation"));
    }
    let mut raw = vec![0.0; count];
    let mut w = 1.0;
    for slot in raw.iter_mut().rev() {
        *slot = w;
        w *= decay;
    }
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|x| x / total).collect())
}

/// Exponentially weighted covariance with weighted means.
pub fn ewma_cov(panel: &ReturnPanel, decay: f64) -> Result<CovarianceEstimate> {
    let matrix = ewma_matrix(panel, decay)?;
    Ok(CovarianceEstimate::estimated(
        panel,
        matrix,
        EstimatorSpec::ewma(decay),
    ))
}

/// Constant-correlation shrinkage: `(1-intensity) S + intensity F`.
pub fn shrinkage_cov(panel: &ReturnPanel, intensity: f64) -> Result<CovarianceEstimate> {
    let matrix = shrinkage_matrix(panel, intensity)?;
    Ok(CovarianceEstimate::estimated(
        panel,
        matrix,
        EstimatorSpec::shrinkage(intensity),
    ))
}

/// One-period lagged cross-covariance `L[a][b] = cov(r_a(t), r_b(t-1))`,
/// over the `n-1` overlapping rows. EWMA bases weight the overlap with the
/// same decay; every other base uses the unbiased equal-weight form.
pub fn lagged_cross_cov(panel: &ReturnPanel, base: &EstimatorKind) -> Result<DMatrix<f64>> {
    let n = panel.n_obs();
    if n < 3 {
        return Err(IcdError::data(format!(
            "lag adjustment needs at least 3 rows, got {n}"
        )));
    }
    let k = panel.n_assets();
    let current: Vec<&[f64]> = (0..k).map(|j| &panel.column(j)[1..]).collect();
    let lagged: Vec<&[f64]> = (0..k).map(|j| &panel.column(j)[..n - 1]).collect();
    let weighting = match *base {
        EstimatorKind::Ewma { decay } => Weighting::Weighted(ewma_weights(n - 1, decay)?),
        _ => Weighting::Unbiased,
    };
    Ok(cross_cov_matrix(&current, &lagged, &weighting))
}

/// Contemporaneous estimate under `base.kind` plus the symmetrized lagged
/// term.
///
/// With `async_full` off the result is `S0 + (L + L^T)/2`, whose quadratic
/// form equals that of `S0 + L`: the lagged-only adjustment. With
/// `async_full` on it is `S0 + L + L^T`, which adds the leading term as well.
pub fn lag_adjusted_cov(panel: &ReturnPanel, base: &EstimatorSpec) -> Result<CovarianceEstimate> {
    let n = panel.n_obs();
    if n < 3 {
        return Err(IcdError::data(format!(
            "lag adjustment needs at least 3 rows, got {n}"
        )));
    }
    let contemporaneous = base_matrix(panel, &base.kind)?;
    let lag = lagged_cross_cov(panel, &base.kind)?;
    let scale = if base.async_full { 1.0 } else { 0.5 };
    let k = panel.n_assets();
    let matrix = DMatrix::from_fn(k, k, |a, b| {
        contemporaneous[(a, b)] + scale * (lag[(a, b)] + lag[(b, a)])
    });

    let mut spec = *base;
    spec.lag_adjust = true;
    let mut est = CovarianceEstimate::estimated(panel, matrix, spec);
    if spec.psd_repair {
        est.matrix = psd_repair(&est.matrix)?;
        est.repaired = true;
    }
    Ok(est)
}

pub(crate) fn sample_matrix(panel: &ReturnPanel) -> Result<DMatrix<f64>> {
    require_rows(panel, 2)?;
    Ok(cov_matrix(&columns(panel), &Weighting::Unbiased))
}

fn ewma_matrix(panel: &ReturnPanel, decay: f64) -> Result<DMatrix<f64>> {
    require_rows(panel, 2)?;
    let weights = ewma_weights(panel.n_obs(), decay)?;
    Ok(cov_matrix(&columns(panel), &Weighting::Weighted(weights)))
}

fn shrinkage_matrix(panel: &ReturnPanel, intensity: f64) -> Result<DMatrix<f64>> {
    check_intensity(intensity)?;
    let s = sample_matrix(panel)?;
    let target = constant_correlation_target(&s);
    let k = s.nrows();
    Ok(DMatrix::from_fn(k, k, |a, b| {
        (1.0 - intensity) * s[(a, b)] + intensity * target[(a, b)]
    }))
}

/// Target with the sample variances on the diagonal and the mean
/// off-diagonal sample correlation everywhere else.
pub fn constant_correlation_target(s: &DMatrix<f64>) -> DMatrix<f64> {
    let k = s.nrows();
    let vol: Vec<f64> = (0..k).map(|i| s[(i, i)].max(0.0).sqrt()).collect();
    let mut total = 0.0;
    let mut pairs = 0usize;
    for a in 0..k {
        for b in a + 1..k {
            let denom = vol[a] * vol[b];
            if denom > 0.0 {
                total += s[(a, b)] / denom;
            }
            pairs += 1;
        }
    }
    let mean_corr = if pairs == 0 {
        0.0
    } else {
        total / pairs as f64
    };
    DMatrix::from_fn(k, k, |a, b| {
        if a == b {
            s[(a, a)]
        } else {
            mean_corr * vol[a] * vol[b]
        }
    })
}

fn columns(panel: &ReturnPanel) -> Vec<&[f64]> {
    (0..panel.n_assets()).map(|j| panel.column(j)).collect()
}

fn require_rows(panel: &ReturnPanel, min: usize) -> Result<()> {
    if panel.n_obs() < min {
        return Err(IcdError::data(format!(
            "need at least {min} return rows, got {}",
            panel.n_obs()
        )));
    }
    Ok(())
}

fn check_decay(decay: f64) -> Result<()> {
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(IcdError::config(format!(
            "decay must lie in (0, 1], got {decay}"
        )));
    }
    Ok(())
}

fn check_intensity(intensity: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&intensity) {
        return Err(IcdError::config(format!(
            "shrinkage intensity must lie in [0, 1], got {intensity}"
        )));
    }
    Ok(())
}

enum Weighting {
    /// Equal weights, denominator m-1.
    Unbiased,
    /// Per-observation weights summing to one, weighted means.
    Weighted(Vec<f64>),
}

impl Weighting {
    fn mean(&self, x: &[f64]) -> f64 {
        match self {
            Weighting::Unbiased => x.iter().sum::<f64>() / x.len() as f64,
            Weighting::Weighted(w) => x.iter().zip(w).map(|(x, w)| w * x).sum(),
        }
    }

    fn comoment(&self, x: &[f64], mx: f64, y: &[f64], my: f64) -> f64 {
        match self {
            Weighting::Unbiased => {
                let s: f64 = x.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)).sum();
                s / (x.len() - 1) as f64
            }
            Weighting::Weighted(w) => x
                .iter()
                .zip(y)
                .zip(w)
                .map(|((x, y), w)| w * (x - mx) * (y - my))
                .sum(),
        }
    }
}

/// Symmetric by construction: only the upper triangle is computed.
fn cov_matrix(cols: &[&[f64]], weighting: &Weighting) -> DMatrix<f64> {
    let k = cols.len();
    let means: Vec<f64> = cols.iter().map(|c| weighting.mean(c)).collect();
    let mut out = DMatrix::zeros(k, k);
    for a in 0..k {
        for b in a..k {
            let v = weighting.comoment(cols[a], means[a], cols[b], means[b]);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    out
}

fn cross_cov_matrix(xs: &[&[f64]], ys: &[&[f64]], weighting: &Weighting) -> DMatrix<f64> {
    let mx: Vec<f64> = xs.iter().map(|c| weighting.mean(c)).collect();
    let my: Vec<f64> = ys.iter().map(|c| weighting.mean(c)).collect();
    DMatrix::from_fn(xs.len(), ys.len(), |a, b| {
        weighting.comoment(xs[a], mx[a], ys[b], my[b])
    })
}
