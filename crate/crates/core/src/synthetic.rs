//! Seeded synthetic data: multivariate normal return panels and random
//! covariance matrices.
//!
//! All generators use ChaCha8 seeded from a `u64` so output is reproducible
//! across platforms and runs.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{IcdError, Result};
use crate::market_data::ReturnPanel;

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Matrix with `variance` on the diagonal and `covariance` elsewhere.
pub fn equicorrelated(n: usize, variance: f64, covariance: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { variance } else { covariance })
}

/// Symmetric square root via eigendecomposition. Fails on matrices with a
/// materially negative eigenvalue.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let radius = eig.eigenvalues.abs().max();
    if eig.eigenvalues.min() < -1e-12 * radius.max(1.0) {
        return Err(IcdError::config(format!(
            "population covariance is not PSD (smallest eigenvalue {})",
            eig.eigenvalues.min()
        )));
    }
    let root = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    let s = v * DMatrix::from_diagonal(&root) * v.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// `rows` draws from N(0, cov), one row per observation.
pub fn mvn_draws(cov: &DMatrix<f64>, rows: usize, seed: u64) -> Result<DMatrix<f64>> {
    let root = symmetric_sqrt(cov)?;
    let k = cov.nrows();
    let mut rng = seeded_rng(seed);
    let mut z = DMatrix::<f64>::zeros(rows, k);
    for t in 0..rows {
        for j in 0..k {
            z[(t, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(z * root)
}

/// Weekday dates starting at `start` (advanced to a weekday if needed).
pub fn business_days(start: NaiveDate, count: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(count);
    let mut d = start;
    while out.len() < count {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

fn default_start() -> NaiveDate {
    NaiveDate::from_ymd_opt(2000, 1, 3).expect("valid date")
}

/// Return panel of N(0, cov) draws with assets named `A0..`.
pub fn mvn_panel(cov: &DMatrix<f64>, rows: usize, seed: u64) -> Result<ReturnPanel> {
    let draws = mvn_draws(cov, rows, seed)?;
    let assets = (0..cov.nrows()).map(|i| format!("A{i}")).collect();
    ReturnPanel::new(business_days(default_start(), rows), assets, draws)
}

/// Independent standard normal columns.
pub fn iid_normal_panel(assets: usize, rows: usize, seed: u64) -> ReturnPanel {
    mvn_panel(&DMatrix::identity(assets, assets), rows, seed).expect("identity is PSD")
}

/// Random covariance matrix: a random correlation structure (common factor
/// plus idiosyncratic loadings) scaled by volatilities drawn uniformly from
/// `vol_range`.
pub fn random_covariance<R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    vol_range: (f64, f64),
) -> DMatrix<f64> {
    let factors = n + 2;
    let market: f64 = rng.random_range(-1.0..1.0);
    let loadings = DMatrix::from_fn(n, factors, |_, f| {
        let z: f64 = rng.sample(StandardNormal);
        if f == 0 {
            market * 2.0 + 0.5 * z
        } else {
            z
        }
    });
    let c = &loadings * loadings.transpose();
    let d: Vec<f64> = (0..n).map(|i| c[(i, i)].sqrt()).collect();
    let vols: Vec<f64> = (0..n)
        .map(|_| rng.random_range(vol_range.0..vol_range.1))
        .collect();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let corr = if i == j {
                1.0
            } else {
                c[(i, j)] / (d[i] * d[j])
            };
            let v = corr * vols[i] * vols[j];
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Weights drawn uniformly from `[lo, hi)`.
pub fn random_weights<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}
