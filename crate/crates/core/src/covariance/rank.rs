//! Spearman and Kendall (tau-b) correlation, rescaled to covariance with the
//! sample standard deviations.

use nalgebra::DMatrix;

use super::{sample_matrix, CovarianceEstimate, EstimatorSpec, RankKind};
use crate::error::{IcdError, Result};
use crate::market_data::ReturnPanel;

/// Average (fractional) ranks, 1-based.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        // positions i..=j share the mean of ranks i+1..=j+1
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = r;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Pearson correlation of average ranks. Zero when either series is constant.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> f64 {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Tie-corrected Kendall tau by full pair enumeration. Zero when either
/// series is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut tied_x, mut tied_y) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                tied_x += 1;
                tied_y += 1;
            } else if dx == 0.0 {
                tied_x += 1;
            } else if dy == 0.0 {
                tied_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let pairs = (n * (n.saturating_sub(1)) / 2) as i64;
    let denom = ((pairs - tied_x) as f64) * ((pairs - tied_y) as f64);
    if denom <= 0.0 {
        return 0.0;
    }
    ((concordant - discordant) as f64 / denom.sqrt()).clamp(-1.0, 1.0)
}

pub fn rank_correlation(x: &[f64], y: &[f64], kind: RankKind) -> f64 {
    match kind {
        RankKind::Spearman => spearman_rho(x, y),
        RankKind::Kendall => kendall_tau_b(x, y),
    }
}

pub(super) fn rank_matrix(panel: &ReturnPanel, kind: RankKind) -> Result<DMatrix<f64>> {
    if panel.n_obs() < 3 {
        return Err(IcdError::data(format!(
            "rank correlation needs at least 3 rows, got {}",
            panel.n_obs()
        )));
    }
    let s = sample_matrix(panel)?;
    let k = panel.n_assets();
    let sd: Vec<f64> = (0..k).map(|i| s[(i, i)].sqrt()).collect();

    // Spearman ranks are shared across pairs
    let ranked: Option<Vec<Vec<f64>>> = match kind {
        RankKind::Spearman => Some((0..k).map(|j| average_ranks(panel.column(j))).collect()),
        RankKind::Kendall => None,
    };
    let mut out = DMatrix::zeros(k, k);
    for a in 0..k {
        out[(a, a)] = s[(a, a)];
        for b in a + 1..k {
            let corr = match &ranked {
                Some(r) => pearson(&r[a], &r[b]),
                None => kendall_tau_b(panel.column(a), panel.column(b)),
            };
            let v = corr * sd[a] * sd[b];
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// Rank-based covariance, unrepaired. Use [`super::estimate`] with a rank spec
/// to get the repaired form.
pub fn rank_cov(panel: &ReturnPanel, kind: RankKind) -> Result<CovarianceEstimate> {
    let matrix = rank_matrix(panel, kind)?;
    Ok(CovarianceEstimate::estimated(
        panel,
        matrix,
        EstimatorSpec::rank(kind).with_repair(false),
    ))
}
