//! Time-varying attribution.
//!
//! Two rolling views are supported. With *fixed positions* today's weights
//! are re-evaluated under the covariance of every trailing window, which
//! answers "how risky would the current book have been then". With
//! *contemporaneous* positions each date uses the weights actually held on
//! that date. Windows are counted in rows and dates without a full window
//! are omitted.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::attribution::{icd, AttributionReport, WeightVector};
use crate::covariance::{estimate, sample_cov, CovarianceEstimate, EstimatorSpec};
use crate::error::{IcdError, Result};
use crate::exec::{try_map_ordered, Execution};
use crate::market_data::ReturnPanel;
use crate::portfolio::{equal_weights, inverse_vol_weights, rollup, GroupReport, HierarchyTree};
use crate::synthetic::{equicorrelated, mvn_panel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Positions fixed at the final date.
    FixedPositions,
    /// Positions as held on each date.
    Contemporaneous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesReport {
    pub method: Method,
    pub window: usize,
    pub dates: Vec<NaiveDate>,
    pub reports: Vec<AttributionReport>,
}

impl TimeSeriesReport {
    pub fn rollup(&self, tree: &HierarchyTree) -> Result<Vec<GroupReport>> {
        self.reports.iter().map(|r| rollup(r, tree)).collect()
    }

    /// Per-date values of one asset's attribution row.
    pub fn asset_series(&self, asset: &str) -> Option<Vec<(f64, f64, f64)>> {
        self.reports
            .iter()
            .map(|r| r.row(asset).map(|row| (row.rc, row.rc_inh, row.rc_corr)))
            .collect()
    }
}

/// Weights by date for contemporaneous attribution.
pub type WeightSchedule = BTreeMap<NaiveDate, WeightVector>;

fn window_ends(
    panel: &ReturnPanel,
    window: usize,
    estimator: &EstimatorSpec,
) -> Result<Vec<usize>> {
    estimator.validate()?;
    if window < estimator.min_rows() {
        return Err(IcdError::config(format!(
            "window of {window} rows is below the estimator minimum of {}",
            estimator.min_rows()
        )));
    }
    if panel.n_obs() < window {
        return Err(IcdError::Range(format!(
            "{} rows of history cannot fill a {window}-row window",
            panel.n_obs()
        )));
    }
    Ok((window - 1..panel.n_obs()).collect())
}

fn window_estimate(
    panel: &ReturnPanel,
    end: usize,
    window: usize,
    estimator: &EstimatorSpec,
) -> Result<CovarianceEstimate> {
    let slice = panel.rows(end + 1 - window, end + 1)?;
    estimate(&slice, estimator)
}

fn assemble(
    method: Method,
    window: usize,
    panel: &ReturnPanel,
    ends: &[usize],
    reports: Vec<AttributionReport>,
) -> TimeSeriesReport {
    TimeSeriesReport {
        method,
        window,
        dates: ends.iter().map(|&e| panel.dates()[e]).collect(),
        reports,
    }
}

/// Fixed-position attribution: `weights` evaluated at every trailing window
/// of `panel`. The panel's last row is the position date.
pub fn method1(
    panel: &ReturnPanel,
    weights: &WeightVector,
    window: usize,
    estimator: &EstimatorSpec,
    exec: Execution,
) -> Result<TimeSeriesReport> {
    let ends = window_ends(panel, window, estimator)?;
    let weights = weights.aligned_to(panel.assets())?;
    let reports = try_map_ordered(exec, &ends, |&end| {
        let cov = window_estimate(panel, end, window, estimator)?;
        icd(&weights, &cov)
    })?;
    Ok(assemble(
        Method::FixedPositions,
        window,
        panel,
        &ends,
        reports,
    ))
}

/// Contemporaneous attribution: each date uses `schedule[date]` and the
/// trailing window ending on that date.
pub fn method2(
    panel: &ReturnPanel,
    schedule: &WeightSchedule,
    window: usize,
    estimator: &EstimatorSpec,
    exec: Execution,
) -> Result<TimeSeriesReport> {
    let ends = window_ends(panel, window, estimator)?;
    let weights: Vec<(usize, WeightVector)> = ends
        .iter()
        .map(|&end| {
            let date = panel.dates()[end];
            let w = schedule.get(&date).ok_or_else(|| {
                IcdError::config(format!("weight schedule has no entry for {date}"))
            })?;
            Ok((end, w.aligned_to(panel.assets())?))
        })
        .collect::<Result<_>>()?;
    let reports = try_map_ordered(exec, &weights, |(end, w)| {
        let cov = window_estimate(panel, *end, window, estimator)?;
        icd(w, &cov)
    })?;
    Ok(assemble(
        Method::Contemporaneous,
        window,
        panel,
        &ends,
        reports,
    ))
}

/// Same weights on every date of `dates`.
pub fn constant_schedule(weights: &WeightVector, dates: &[NaiveDate]) -> WeightSchedule {
    dates.iter().map(|d| (*d, weights.clone())).collect()
}

/// Inverse-volatility weights recomputed on each date from the trailing
/// `vol_window` rows. Dates without a full window are left out.
pub fn risk_parity_schedule(
    panel: &ReturnPanel,
    vol_window: usize,
    leverage: f64,
    exec: Execution,
) -> Result<WeightSchedule> {
    if vol_window < 2 {
        return Err(IcdError::config(
            "volatility window must be at least 2 rows",
        ));
    }
    if panel.n_obs() < vol_window {
        return Err(IcdError::Range(format!(
            "{} rows cannot fill a {vol_window}-row volatility window",
            panel.n_obs()
        )));
    }
    let ends: Vec<usize> = (vol_window - 1..panel.n_obs()).collect();
    let weights = try_map_ordered(exec, &ends, |&end| {
        let slice = panel.rows(end + 1 - vol_window, end + 1)?;
        inverse_vol_weights(&slice, leverage)
    })?;
    Ok(ends
        .iter()
        .map(|&e| panel.dates()[e])
        .zip(weights)
        .collect())
}

/// Share of `history` at or below `current`, in percent.
pub fn percentile_of_current(history: &[f64], current: f64) -> Result<f64> {
    if history.is_empty() {
        return Err(IcdError::data("percentile of an empty history"));
    }
    let at_or_below = history.iter().filter(|&&h| h <= current).count();
    Ok(100.0 * at_or_below as f64 / history.len() as f64)
}

/// Expanding-window simulation of equal-weight attribution on
/// equicorrelated normal returns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_assets: usize,
    pub variance: f64,
    pub covariance: f64,
    /// Total simulated rows.
    pub horizon: usize,
    /// First expanding-window length.
    pub start: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_assets: 5,
            variance: 1.0,
            covariance: 0.5,
            horizon: 500,
            start: 5,
            seed: 20250801,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_assets == 0 {
            return Err(IcdError::config("simulation needs at least one asset"));
        }
        if self.start < 5 {
            return Err(IcdError::config(format!(
                "simulation start must be at least 5 rows, got {}",
                self.start
            )));
        }
        if self.horizon < self.start {
            return Err(IcdError::config(
                "simulation horizon is shorter than its start",
            ));
        }
        if !(self.variance.is_finite() && self.covariance.is_finite() && self.variance > 0.0) {
            return Err(IcdError::config("simulation variance must be positive"));
        }
        Ok(())
    }

    pub fn population(&self) -> nalgebra::DMatrix<f64> {
        equicorrelated(self.n_assets, self.variance, self.covariance)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub rc: f64,
    pub rc_inh: f64,
    pub rc_corr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub window_length: usize,
    pub per_asset: Vec<Components>,
    /// Cross-asset mean.
    pub average: Components,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub assets: Vec<String>,
    /// Population values per asset (identical across assets for this
    /// generator).
    pub targets: Vec<Components>,
    pub points: Vec<ConvergencePoint>,
    /// The simulated panel, kept so results can be re-derived.
    #[serde(skip)]
    pub panel: Option<ReturnPanel>,
}

fn components(report: &AttributionReport) -> Vec<Components> {
    report
        .rows
        .iter()
        .map(|r| Components {
            rc: r.rc,
            rc_inh: r.rc_inh,
            rc_corr: r.rc_corr,
        })
        .collect()
}

fn mean(parts: &[Components]) -> Components {
    let n = parts.len() as f64;
    Components {
        rc: parts.iter().map(|c| c.rc).sum::<f64>() / n,
        rc_inh: parts.iter().map(|c| c.rc_inh).sum::<f64>() / n,
        rc_corr: parts.iter().map(|c| c.rc_corr).sum::<f64>() / n,
    }
}

/// Simulate, then attribute an equal-weight portfolio on every expanding
/// window `[0, t)` for `t = start..=horizon` with the sample covariance.
pub fn convergence_sim(cfg: &SimConfig, exec: Execution) -> Result<ConvergenceRun> {
    cfg.validate()?;
    let population = cfg.population();
    let panel = mvn_panel(&population, cfg.horizon, cfg.seed)?;
    let weights = equal_weights(panel.assets(), 1.0)?;

    let population_cov = CovarianceEstimate::from_matrix(panel.assets().to_vec(), population)?;
    let targets = components(&icd(&weights, &population_cov)?);

    let lengths: Vec<usize> = (cfg.start..=cfg.horizon).collect();
    let points = try_map_ordered(exec, &lengths, |&t| {
        let cov = sample_cov(&panel.rows(0, t)?)?;
        let per_asset = components(&icd(&weights, &cov)?);
        Ok::<_, IcdError>(ConvergencePoint {
            window_length: t,
            average: mean(&per_asset),
            per_asset,
        })
    })?;
    Ok(ConvergenceRun {
        assets: panel.assets().to_vec(),
        targets,
        points,
        panel: Some(panel),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn periodic_panel(period: usize, repeats: usize) -> ReturnPanel {
        let base = synthetic::iid_normal_panel(3, period, 4);
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|j| {
                base.column(j)
                    .iter()
                    .copied()
                    .cycle()
                    .take(period * repeats)
                    .collect()
            })
            .collect();
        let dates = synthetic::business_days(
            NaiveDate::from_ymd_opt(2010, 1, 4).unwrap(),
            period * repeats,
        );
        ReturnPanel::from_columns(dates, base.assets().to_vec(), &cols).unwrap()
    }

    #[test]
    fn percentile_examples() {
        assert_eq!(percentile_of_current(&[1.0, 2.0, 3.0], 3.0).unwrap(), 100.0);
        assert_eq!(percentile_of_current(&[1.0, 2.0, 3.0], 0.5).unwrap(), 0.0);
        assert_eq!(
            percentile_of_current(&[1.0, 2.0, 3.0, 4.0], 2.5).unwrap(),
            50.0
        );
        assert!(matches!(
            percentile_of_current(&[], 1.0),
            Err(IcdError::Data(_))
        ));
    }

    #[test]
    fn stationary_periodic_data_gives_flat_history() {
        // every window of a multiple of the period holds the same rows
        let p = periodic_panel(10, 6);
        let w = WeightVector::anonymous(vec![0.5, 0.3, 0.2]).unwrap();
        let mut seen = Vec::new();
        for start in (0..=p.n_obs() - 20).step_by(10) {
            let cov = sample_cov(&p.rows(start, start + 20).unwrap()).unwrap();
            seen.push(icd(&w, &cov).unwrap());
        }
        let ts = method1(&p, &w, 20, &EstimatorSpec::sample(), Execution::Parallel).unwrap();
        for r in ts.reports.iter().step_by(10) {
            assert!((r.portfolio_vol - seen[0].portfolio_vol).abs() < 1e-12);
            for (a, b) in r.rows.iter().zip(&seen[0].rows) {
                assert!((a.rc - b.rc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_returns_are_degenerate() {
        let dates = synthetic::business_days(NaiveDate::from_ymd_opt(2010, 1, 4).unwrap(), 10);
        let p = ReturnPanel::from_columns(dates, vec!["A0".into()], &[vec![0.01; 10]]).unwrap();
        let w = WeightVector::anonymous(vec![1.0]).unwrap();
        assert!(matches!(
            method1(&p, &w, 5, &EstimatorSpec::sample(), Execution::Sequential),
            Err(IcdError::Degenerate(_))
        ));
    }

    #[test]
    fn full_window_is_single_icd() {
        let p = synthetic::iid_normal_panel(4, 40, 12);
        let w = WeightVector::anonymous(vec![0.4, -0.2, 0.5, 0.3]).unwrap();
        let ts = method1(
            &p,
            &w,
            40,
            &EstimatorSpec::ewma(0.97),
            Execution::Sequential,
        )
        .unwrap();
        assert_eq!(ts.dates, vec![p.last_date()]);
        let direct = icd(&w, &estimate(&p, &EstimatorSpec::ewma(0.97)).unwrap()).unwrap();
        assert_eq!(ts.reports[0], direct);
    }

    #[test]
    fn window_longer_than_history() {
        let p = synthetic::iid_normal_panel(2, 10, 1);
        let w = WeightVector::anonymous(vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            method1(&p, &w, 11, &EstimatorSpec::sample(), Execution::Sequential),
            Err(IcdError::Range(_))
        ));
    }

    #[test]
    fn constant_schedule_equals_method1() {
        let p = synthetic::iid_normal_panel(3, 60, 5);
        let w = WeightVector::anonymous(vec![1.5, -0.5, 2.0]).unwrap();
        let spec = EstimatorSpec::ewma(0.99);
        let m1 = method1(&p, &w, 20, &spec, Execution::Parallel).unwrap();
        let m2 = method2(
            &p,
            &constant_schedule(&w, p.dates()),
            20,
            &spec,
            Execution::Parallel,
        )
        .unwrap();
        assert_eq!(m1.dates, m2.dates);
        assert_eq!(m1.reports, m2.reports);
    }

    #[test]
    fn missing_schedule_entry() {
        let p = synthetic::iid_normal_panel(2, 30, 5);
        let w = WeightVector::anonymous(vec![0.5, 0.5]).unwrap();
        let schedule = constant_schedule(&w, &p.dates()[15..]);
        assert!(matches!(
            method2(
                &p,
                &schedule,
                10,
                &EstimatorSpec::sample(),
                Execution::Sequential
            ),
            Err(IcdError::Config(_))
        ));
    }

    #[test]
    fn switching_weights_moves_risk() {
        let p = synthetic::iid_normal_panel(2, 50, 6);
        let switch = p.dates()[30];
        let before = WeightVector::anonymous(vec![1.0, 0.0]).unwrap();
        let after = WeightVector::anonymous(vec![0.0, 1.0]).unwrap();
        let schedule: WeightSchedule = p
            .dates()
            .iter()
            .map(|d| {
                (
                    *d,
                    if *d < switch {
                        before.clone()
                    } else {
                        after.clone()
                    },
                )
            })
            .collect();
        let ts = method2(
            &p,
            &schedule,
            10,
            &EstimatorSpec::sample(),
            Execution::Sequential,
        )
        .unwrap();
        for (d, r) in ts.dates.iter().zip(&ts.reports) {
            let (hot, cold) = if *d < switch { (0, 1) } else { (1, 0) };
            assert_eq!(r.rows[cold].rc, 0.0);
            assert!((r.rows[hot].rc - r.portfolio_vol).abs() < 1e-15);
        }
    }

    #[test]
    fn modes_agree() {
        let p = synthetic::iid_normal_panel(4, 80, 9);
        let w = WeightVector::anonymous(vec![0.25; 4]).unwrap();
        let spec = EstimatorSpec::shrinkage(0.3);
        let seq = method1(&p, &w, 30, &spec, Execution::Sequential).unwrap();
        let par = method1(&p, &w, 30, &spec, Execution::Parallel).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn simulation_targets() {
        let run = convergence_sim(
            &SimConfig {
                horizon: 20,
                ..Default::default()
            },
            Execution::Sequential,
        )
        .unwrap();
        for t in &run.targets {
            assert!((t.rc - 0.154919).abs() < 1e-6);
            assert!((t.rc_inh - 0.051640).abs() < 1e-6);
            assert!((t.rc_corr - 0.103280).abs() < 1e-6);
        }
        assert_eq!(run.points.first().unwrap().window_length, 5);
        assert_eq!(run.points.len(), 16);

        let uncorrelated = SimConfig {
            covariance: 0.0,
            horizon: 10,
            ..Default::default()
        };
        let run = convergence_sim(&uncorrelated, Execution::Sequential).unwrap();
        assert!(run.targets.iter().all(|t| t.rc_corr == 0.0));
    }

    #[test]
    fn simulation_is_deterministic() {
        let cfg = SimConfig {
            horizon: 60,
            ..Default::default()
        };
        let a = convergence_sim(&cfg, Execution::Parallel).unwrap();
        let b = convergence_sim(&cfg, Execution::Sequential).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn simulation_config_checks() {
        assert!(convergence_sim(
            &SimConfig {
                start: 4,
                ..Default::default()
            },
            Execution::Sequential
        )
        .is_err());
        let bad = SimConfig {
            covariance: -0.9,
            n_assets: 3,
            ..Default::default()
        };
        assert!(matches!(
            convergence_sim(&bad, Execution::Sequential),
            Err(IcdError::Config(_))
        ));
    }
}
