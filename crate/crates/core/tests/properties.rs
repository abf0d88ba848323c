use chrono::NaiveDate;
use icd_core::attribution::{
    hedge_check, icd, ivol_definitional, loo_stats, portfolio_vol, rc, rc_definitional,
    rc_leave_one_out, rc_xsr, WeightVector,
};
use icd_core::covariance::{
    ewma_cov, lag_adjusted_cov, lagged_cross_cov, psd_repair, sample_cov, shrinkage_cov,
    CovarianceEstimate, EstimatorKind, EstimatorSpec,
};
use icd_core::market_data::{compute_returns, slice_window, DateWindow, PricePanel, ReturnPanel};
use icd_core::portfolio::{risk_parity_weights, rollup, HierarchyTree};
use icd_core::synthetic::{
    business_days, iid_normal_panel, random_covariance, random_weights, seeded_rng,
};
use icd_core::timeseries::percentile_of_current;
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn random_case(seed: u64, n: usize) -> (WeightVector, CovarianceEstimate) {
    let mut rng = seeded_rng(seed);
    let cov = CovarianceEstimate::anonymous(random_covariance(&mut rng, n, (0.05, 1.0))).unwrap();
    let w = WeightVector::anonymous(random_weights(&mut rng, n, -2.0, 2.0)).unwrap();
    (w, cov)
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}

fn start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2015, 6, 1).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn rc_sums_to_portfolio_vol(seed in any::<u64>(), n in 2usize..=50) {
        let (w, c) = random_case(seed, n);
        let report = icd(&w, &c).unwrap();
        let sigma = report.portfolio_vol;
        prop_assert!((report.total_rc() - sigma).abs() <= 1e-10 * sigma);
    }

    #[test]
    fn rc_forms_agree(seed in any::<u64>(), n in 2usize..=50) {
        let (w, c) = random_case(seed, n);
        let sigma = portfolio_vol(&w, &c).unwrap();
        let base = rc(&w, &c).unwrap();
        for other in [rc_definitional(&w, &c).unwrap(), rc_xsr(&w, &c).unwrap(), rc_leave_one_out(&w, &c).unwrap()] {
            for (a, b) in base.iter().zip(&other) {
                prop_assert!((a - b).abs() <= 1e-10 * sigma);
            }
        }
    }

    #[test]
    fn icd_identity_and_sign_rules(seed in any::<u64>(), n in 2usize..=50) {
        let (w, c) = random_case(seed, n);
        let report = icd(&w, &c).unwrap();
        let sigma = report.portfolio_vol;
        for (a, row) in report.rows.iter().enumerate() {
            prop_assert!((row.rc_inh + row.rc_corr - row.rc).abs() <= 1e-12);
            prop_assert!(row.rc_inh >= 0.0);
            prop_assert_eq!(row.is_hedge, row.rc < 0.0);
            prop_assert_eq!(hedge_check(row), row.is_hedge);

            let loo = row.loo.as_ref().unwrap();
            prop_assert!(loo.sigma_loo >= 0.0);
            prop_assert!(loo.rho_loo.abs() <= 1.0 + 1e-12);
            let wa = row.weight;
            let sigma_a = c.variance(a).sqrt();
            let product = wa * (1.0 - wa) * sigma_a * loo.sigma_loo * loo.rho_loo / sigma;
            prop_assert!((product - row.rc_corr).abs() <= 1e-10 * sigma);

            // sign of the correlation part follows w(1-w) * rho
            let driver = wa * (1.0 - wa) * loo.rho_loo;
            if row.rc_corr.abs() > 1e-9 * sigma {
                prop_assert_eq!(row.rc_corr < 0.0, driver < 0.0);
            }
        }
    }

    #[test]
    fn ivol_routes_agree(seed in any::<u64>(), n in 2usize..=50) {
        let (w, c) = random_case(seed, n);
        for asset in &w.assets {
            let stats = loo_stats(&w, &c, asset).unwrap();
            let direct = ivol_definitional(&w, &c, asset).unwrap();
            // weights near 1 inflate the residual scale; compare in its units
            let scale = stats.sigma_loo.max(1.0);
            prop_assert!((stats.ivol - direct).abs() <= 1e-12 * scale, "{} vs {direct}", stats.ivol);
        }
    }

    #[test]
    fn positive_scaling_is_equivariant(seed in any::<u64>(), n in 2usize..=20, k in 0.1f64..10.0) {
        let (w, c) = random_case(seed, n);
        let base = icd(&w, &c).unwrap();
        let scaled = icd(&w.scaled(k).unwrap(), &c).unwrap();
        let tol = 1e-12 * k * base.portfolio_vol;
        prop_assert!((scaled.portfolio_vol - k * base.portfolio_vol).abs() <= tol);
        for (s, b) in scaled.rows.iter().zip(&base.rows) {
            prop_assert!((s.rc - k * b.rc).abs() <= tol);
            prop_assert!((s.rc_inh - k * b.rc_inh).abs() <= tol);
            prop_assert!((s.rc_corr - k * b.rc_corr).abs() <= tol);
        }
    }

    #[test]
    fn subportfolio_rollup_is_additive(seed in any::<u64>(), n in 2usize..=30, groups in 1usize..=5) {
        let (w, c) = random_case(seed, n);
        let report = icd(&w, &c).unwrap();
        let paths: Vec<(String, Vec<String>)> = w.assets.iter().enumerate()
            .map(|(i, a)| (a.clone(), vec![format!("G{}", (i * 7 + seed as usize) % groups)]))
            .collect();
        let tree = HierarchyTree::from_paths(vec!["group".into()], &paths).unwrap();
        let g = rollup(&report, &tree).unwrap();
        for child in &g.children {
            let direct: f64 = report.rows.iter()
                .filter(|r| tree.path_of(&r.asset).unwrap()[0] == child.label)
                .map(|r| r.rc)
                .sum();
            prop_assert_eq!(direct, child.rc);
        }
        let sigma = report.portfolio_vol;
        prop_assert!((g.rc - sigma).abs() <= 1e-10 * sigma);

        // any other partition gives the same root
        let flat = rollup(&report, &HierarchyTree::flat(&w.assets)).unwrap();
        prop_assert!((flat.rc - g.rc).abs() <= 1e-12 * sigma);
        prop_assert!((flat.rc_inh - g.rc_inh).abs() <= 1e-12 * sigma);
    }

    #[test]
    fn estimators_symmetric_and_psd(seed in any::<u64>(), k in 2usize..8, n in 10usize..80) {
        let p = iid_normal_panel(k, n, seed);
        for m in [sample_cov(&p).unwrap().matrix, ewma_cov(&p, 0.94).unwrap().matrix] {
            prop_assert!((&m - m.transpose()).abs().max() <= 1e-12);
            prop_assert!(min_eigenvalue(&m) >= -1e-10);
        }
        let lagged = lag_adjusted_cov(&p, &EstimatorSpec::sample().with_lag(false)).unwrap().matrix;
        prop_assert!((&lagged - lagged.transpose()).abs().max() <= 1e-12);
        prop_assert!(min_eigenvalue(&lagged) >= -1e-10);
    }

    #[test]
    fn shrinkage_is_affine(seed in any::<u64>(), d in 0.0f64..=1.0) {
        let p = iid_normal_panel(4, 30, seed);
        let lo = shrinkage_cov(&p, 0.0).unwrap().matrix;
        let hi = shrinkage_cov(&p, 1.0).unwrap().matrix;
        let mid = shrinkage_cov(&p, d).unwrap().matrix;
        let expect = &lo * (1.0 - d) + &hi * d;
        prop_assert!((&mid - &expect).abs().max() <= 1e-12);
    }

    #[test]
    fn lag_pairwise_reproduction(seed in any::<u64>(), k in 2usize..7) {
        let p = iid_normal_panel(k, 60, seed);
        let mut rng = seeded_rng(seed ^ 0xabc);
        let w = random_weights(&mut rng, k, -1.0, 1.0);
        let s0 = sample_cov(&p).unwrap().matrix;
        let lag = lagged_cross_cov(&p, &EstimatorKind::Sample).unwrap();
        let n = p.n_obs();
        for a in 0..k {
            let ra = p.column(a);
            let rest: Vec<f64> = (0..n)
                .map(|t| (0..k).filter(|&i| i != a).map(|i| w[i] * p.column(i)[t]).sum())
                .collect();
            let direct = unbiased_cov(ra, &rest) + unbiased_cov(&ra[1..], &rest[..n - 1]);
            let via_matrix: f64 = (0..k)
                .filter(|&i| i != a)
                .map(|i| (s0[(a, i)] + lag[(a, i)]) * w[i])
                .sum();
            prop_assert!((direct - via_matrix).abs() <= 1e-10 * direct.abs().max(1.0));
        }
        // the symmetrized matrix keeps the lagged-only quadratic form
        let sym = lag_adjusted_cov(&p, &EstimatorSpec::sample().with_lag(false).with_repair(false)).unwrap().matrix;
        let wv = nalgebra::DVector::from_vec(w.clone());
        let lhs = wv.dot(&(&sym * &wv));
        let rhs = wv.dot(&((&s0 + &lag) * &wv));
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
    }

    #[test]
    fn psd_repair_idempotent(seed in any::<u64>(), n in 2usize..8) {
        let mut rng = seeded_rng(seed);
        let base = random_covariance(&mut rng, n, (0.5, 1.5));
        // push an off-diagonal pair out of range to break PSD
        let mut m = base.clone();
        let bump = 2.0 * (m[(0, 0)] * m[(1, 1)]).sqrt();
        m[(0, 1)] += bump;
        m[(1, 0)] += bump;
        let once = psd_repair(&m).unwrap();
        prop_assert!(min_eigenvalue(&once) >= -1e-10);
        for i in 0..n {
            prop_assert!((once[(i, i)] - m[(i, i)]).abs() <= 1e-10 * m[(i, i)]);
        }
        let twice = psd_repair(&once).unwrap();
        prop_assert!((&once - &twice).abs().max() <= 1e-12);
    }

    #[test]
    fn returns_round_trip(seed in any::<u64>(), n in 3usize..60) {
        let truth = iid_normal_panel(3, n, seed);
        // scale to plausible daily returns so prices stay positive
        let rets: Vec<Vec<f64>> = (0..3).map(|j| truth.column(j).iter().map(|r| 0.01 * r).collect()).collect();
        let mut prices = DMatrix::from_element(n + 1, 3, 100.0);
        for (j, col) in rets.iter().enumerate() {
            for (t, r) in col.iter().enumerate() {
                prices[(t + 1, j)] = prices[(t, j)] * (1.0 + r);
            }
        }
        let panel = PricePanel::new(business_days(start(), n + 1), vec!["X".into(), "Y".into(), "Z".into()], prices).unwrap();
        let back = compute_returns(&panel).unwrap();
        for (j, col) in rets.iter().enumerate() {
            for (got, want) in back.column(j).iter().zip(col) {
                prop_assert!((got - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn window_rows_are_copies(seed in any::<u64>(), len in 2usize..40) {
        let p = iid_normal_panel(3, 40, seed);
        let end = p.dates()[39];
        let s = slice_window(&p, &DateWindow::new(end, len).unwrap()).unwrap();
        for j in 0..3 {
            let src = &p.column(j)[40 - len..];
            prop_assert!(s.column(j).iter().zip(src).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }

    #[test]
    fn risk_parity_ignores_return_scale(seed in any::<u64>(), k in 0.01f64..100.0) {
        let p = iid_normal_panel(4, 50, seed);
        let cols: Vec<Vec<f64>> = (0..4).map(|j| p.column(j).iter().map(|r| r * k).collect()).collect();
        let scaled = ReturnPanel::from_columns(p.dates().to_vec(), p.assets().to_vec(), &cols).unwrap();
        let win = DateWindow::covering(&p);
        let a = risk_parity_weights(&p, &win, 10.0).unwrap();
        let b = risk_parity_weights(&scaled, &win, 10.0).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        prop_assert!((a.weights.iter().sum::<f64>() - 10.0).abs() <= 1e-12);
    }

    #[test]
    fn percentile_monotone_invariant(history in prop::collection::vec(-5.0f64..5.0, 1..50), current in -5.0f64..5.0) {
        let base = percentile_of_current(&history, current).unwrap();
        let mapped: Vec<f64> = history.iter().map(|h| h.exp()).collect();
        prop_assert_eq!(base, percentile_of_current(&mapped, current.exp()).unwrap());
        prop_assert!((0.0..=100.0).contains(&base));
    }
}

fn unbiased_cov(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - mx) * (b - my))
        .sum::<f64>()
        / (n - 1.0)
}

#[test]
fn sample_cov_recovers_population() {
    let pop = icd_core::synthetic::equicorrelated(5, 1.0, 0.5);
    let p = icd_core::synthetic::mvn_panel(&pop, 100_000, 2024).unwrap();
    let s = sample_cov(&p).unwrap().matrix;
    assert!((&s - &pop).abs().max() <= 0.02, "{s}");
}

#[test]
fn lag_term_vanishes_on_iid_draws() {
    let p = iid_normal_panel(4, 100_000, 77);
    let lag = lagged_cross_cov(&p, &EstimatorKind::Sample).unwrap();
    assert!(lag.abs().max() <= 0.02);
    let adjusted = lag_adjusted_cov(&p, &EstimatorSpec::sample().with_lag(false))
        .unwrap()
        .matrix;
    let plain = sample_cov(&p).unwrap().matrix;
    assert!((&adjusted - &plain).abs().max() <= 0.02);
}

#[test]
fn loading_is_deterministic() {
    let csv = "date,A,B\n2024-01-02,100,50\n2024-01-03,101,49\n2024-01-04,99.5,51\n2024-01-05,100.2,50.5\n";
    let a = icd_core::market_data::load_prices(csv.as_bytes()).unwrap();
    let b = icd_core::market_data::load_prices(csv.as_bytes()).unwrap();
    assert_eq!(a, b);
}
