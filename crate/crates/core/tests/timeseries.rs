use icd_core::attribution::icd;
use icd_core::covariance::{sample_cov, EstimatorSpec};
use icd_core::portfolio::equal_weights;
use icd_core::synthetic::{equicorrelated, mvn_panel};
use icd_core::timeseries::{convergence_sim, method1, method2, risk_parity_schedule, SimConfig};
use icd_core::Execution;

// equal weight 0.2 on the exchangeable (1, 0.5) population
const POP_RC: f64 = 0.154_919_333_848_296_67;

fn sqrt06_over_5() -> f64 {
    0.6f64.sqrt() / 5.0
}

#[test]
fn population_target_oracle() {
    assert!((POP_RC - sqrt06_over_5()).abs() < 1e-15);
}

#[test]
fn final_expanding_point_is_plain_icd() {
    let cfg = SimConfig::default();
    let run = convergence_sim(&cfg, Execution::Sequential).unwrap();
    let panel = run.panel.as_ref().unwrap();
    let direct = icd(
        &equal_weights(panel.assets(), 1.0).unwrap(),
        &sample_cov(panel).unwrap(),
    )
    .unwrap();
    let last = run.points.last().unwrap();
    assert_eq!(last.window_length, cfg.horizon);
    for (p, r) in last.per_asset.iter().zip(&direct.rows) {
        assert_eq!(p.rc, r.rc);
        assert_eq!(p.rc_inh, r.rc_inh);
        assert_eq!(p.rc_corr, r.rc_corr);
    }
}

#[test]
fn rolling_rc_fluctuates_around_population() {
    let pop = equicorrelated(5, 1.0, 0.5);
    let panel = mvn_panel(&pop, 3000, 11).unwrap();
    let w = equal_weights(panel.assets(), 1.0).unwrap();
    let ts = method1(
        &panel,
        &w,
        250,
        &EstimatorSpec::sample(),
        Execution::Parallel,
    )
    .unwrap();
    let mut total = 0.0;
    let mut count = 0.0;
    for (report, _) in ts.reports.iter().zip(&ts.dates) {
        let sigma = report.portfolio_vol;
        assert!((report.total_rc() - sigma).abs() <= 1e-10 * sigma);
        for row in &report.rows {
            total += row.rc;
            count += 1.0;
        }
    }
    let mean = total / count;
    assert!((mean - POP_RC).abs() < 0.01, "mean rc {mean}");
}

#[test]
fn risk_parity_on_exchangeable_data_spreads_risk() {
    let pop = equicorrelated(5, 1.0, 0.5);
    let panel = mvn_panel(&pop, 800, 5).unwrap();
    let schedule = risk_parity_schedule(&panel, 126, 1.0, Execution::Parallel).unwrap();
    let ts = method2(
        &panel,
        &schedule,
        126,
        &EstimatorSpec::sample(),
        Execution::Parallel,
    )
    .unwrap();
    assert!(!ts.reports.is_empty());
    for report in &ts.reports {
        let fair = report.portfolio_vol / 5.0;
        for row in &report.rows {
            assert!((row.rc - fair).abs() < 0.25 * fair, "{} vs {fair}", row.rc);
        }
    }
}

#[test]
fn uncorrelated_population_has_no_correlation_target() {
    let cfg = SimConfig {
        covariance: 0.0,
        ..SimConfig::default()
    };
    let run = convergence_sim(&cfg, Execution::Parallel).unwrap();
    assert!(run.targets.iter().all(|t| t.rc_corr == 0.0));
}
