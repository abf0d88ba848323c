//! Price panels, arithmetic returns and lookback windows.
//!
//! Prices arrive as a date-indexed CSV (`date,TICKER1,TICKER2,...`). Rows with
//! any empty cell are dropped so that every estimator downstream sees a
//! complete rectangular panel.

use std::collections::HashSet;
use std::io::Read;

use chrono::NaiveDate;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{IcdError, Result};

/// Rows per "six month" lookback on daily data.
pub const SIX_MONTHS: usize = 126;

const MIN_PRICE_ROWS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct PricePanel {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    /// rows = dates, columns = assets
    prices: DMatrix<f64>,
}

impl PricePanel {
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, prices: DMatrix<f64>) -> Result<Self> {
        check_axes(&dates, &assets, prices.nrows(), prices.ncols())?;
        for (j, asset) in assets.iter().enumerate() {
            for (t, &p) in prices.column(j).iter().enumerate() {
                if !(p.is_finite() && p > 0.0) {
                    return Err(IcdError::DataAt {
                        row: t + 1,
                        column: asset.clone(),
                        message: format!("price must be strictly positive, got {p}"),
                    });
                }
            }
        }
        Ok(Self {
            dates,
            assets,
            prices,
        })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn prices(&self) -> &DMatrix<f64> {
        &self.prices
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    dates: Vec<NaiveDate>,
    assets: Vec<String>,
    /// rows = dates, columns = assets; column-major so each asset is contiguous
    returns: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn new(dates: Vec<NaiveDate>, assets: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        check_axes(&dates, &assets, returns.nrows(), returns.ncols())?;
        if let Some(pos) = returns.iter().position(|r| !r.is_finite()) {
            let (t, j) = (pos % returns.nrows(), pos / returns.nrows());
            return Err(IcdError::DataAt {
                row: t + 1,
                column: assets[j].clone(),
                message: "return is not finite".into(),
            });
        }
        Ok(Self {
            dates,
            assets,
            returns,
        })
    }

    /// Build a panel from per-asset return columns.
    pub fn from_columns(
        dates: Vec<NaiveDate>,
        assets: Vec<String>,
        columns: &[Vec<f64>],
    ) -> Result<Self> {
        if columns.len() != assets.len() {
            return Err(IcdError::Shape(format!(
                "{} columns for {} assets",
                columns.len(),
                assets.len()
            )));
        }
        let n = dates.len();
        if let Some(bad) = columns.iter().position(|c| c.len() != n) {
            return Err(IcdError::Shape(format!(
                "column {} has {} rows, expected {n}",
                assets[bad],
                columns[bad].len()
            )));
        }
        let flat: Vec<f64> = columns.iter().flatten().copied().collect();
        Self::new(dates, assets, DMatrix::from_vec(n, columns.len(), flat))
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn assets(&self) -> &[String] {
        &self.assets
    }

    pub fn returns(&self) -> &DMatrix<f64> {
        &self.returns
    }

    pub fn n_obs(&self) -> usize {
        self.dates.len()
    }

    pub fn n_assets(&self) -> usize {
        self.assets.len()
    }

    pub fn last_date(&self) -> NaiveDate {
        *self.dates.last().expect("panel is never empty")
    }

    /// Contiguous return series for asset column `j`.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.n_obs();
        &self.returns.as_slice()[j * n..(j + 1) * n]
    }

    pub fn asset_index(&self, asset: &str) -> Option<usize> {
        self.assets.iter().position(|a| a == asset)
    }

    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Consecutive rows `start..end` (exclusive end).
    pub fn rows(&self, start: usize, end: usize) -> Result<ReturnPanel> {
        if start >= end || end > self.n_obs() {
            return Err(IcdError::Range(format!(
                "rows {start}..{end} outside panel of {} rows",
                self.n_obs()
            )));
        }
        Ok(ReturnPanel {
            dates: self.dates[start..end].to_vec(),
            assets: self.assets.clone(),
            returns: self.returns.rows(start, end - start).into_owned(),
        })
    }

    /// Panel restricted to rows dated on or before `date`.
    pub fn up_to(&self, date: NaiveDate) -> Result<ReturnPanel> {
        let end = self.dates.partition_point(|d| *d <= date);
        if end == 0 {
            return Err(IcdError::Range(format!("no returns on or before {date}")));
        }
        self.rows(0, end)
    }

    /// Panel restricted to the named assets, in the order given.
    pub fn select_assets(&self, names: &[String]) -> Result<ReturnPanel> {
        let idx = names
            .iter()
            .map(|n| {
                self.asset_index(n)
                    .ok_or_else(|| IcdError::config(format!("asset `{n}` not present in data")))
            })
            .collect::<Result<Vec<_>>>()?;
        let cols: Vec<Vec<f64>> = idx.iter().map(|&j| self.column(j).to_vec()).collect();
        ReturnPanel::from_columns(self.dates.clone(), names.to_vec(), &cols)
    }
}

/// Lookback window: `length` return rows ending at (and including) `end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateWindow {
    pub end: NaiveDate,
    pub length: usize,
}

impl DateWindow {
    pub fn new(end: NaiveDate, length: usize) -> Result<Self> {
        if length < 2 {
            return Err(IcdError::config(format!(
                "window length must be at least 2, got {length}"
            )));
        }
        Ok(Self { end, length })
    }

    /// Window covering all of `panel`.
    pub fn covering(panel: &ReturnPanel) -> Self {
        Self {
            end: panel.last_date(),
            length: panel.n_obs(),
        }
    }
}

fn check_axes(dates: &[NaiveDate], assets: &[String], nrows: usize, ncols: usize) -> Result<()> {
    if dates.is_empty() || assets.is_empty() {
        return Err(IcdError::data(
            "panel must have at least one date and one asset",
        ));
    }
    if dates.len() != nrows || assets.len() != ncols {
        return Err(IcdError::Shape(format!(
            "matrix is {nrows}x{ncols} but axes are {}x{}",
            dates.len(),
            assets.len()
        )));
    }
    if let Some(w) = dates.windows(2).find(|w| w[0] >= w[1]) {
        return Err(IcdError::data(format!(
            "dates must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = assets.iter().find(|a| !seen.insert(a.as_str())) {
        return Err(IcdError::data(format!(
            "duplicate asset identifier `{dup}`"
        )));
    }
    Ok(())
}

/// Parse a price CSV.
///
/// Rows may appear in any date order. A row with any empty cell is dropped;
/// zero, negative or non-finite prices are rejected with the offending CSV
/// line and column.
pub fn load_prices<R: Read>(source: R) -> Result<PricePanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let header = reader
        .headers()
        .map_err(|e| IcdError::Parse(format!("cannot read header: {e}")))?
        .clone();
    if header.len() < 2 || &header[0] != "date" {
        return Err(IcdError::Parse(
            "header must start with `date` followed by at least one asset".into(),
        ));
    }
    let assets: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if let Some(blank) = assets.iter().position(|a| a.is_empty()) {
        return Err(IcdError::Parse(format!(
            "empty asset name in header column {}",
            blank + 2
        )));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = assets.iter().find(|a| !seen.insert(a.as_str())) {
        return Err(IcdError::Parse(format!(
            "duplicate asset `{dup}` in header"
        )));
    }

    let mut rows: Vec<(NaiveDate, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| IcdError::Parse(e.to_string()))?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != header.len() {
            return Err(IcdError::Parse(format!(
                "line {line}: expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
            .map_err(|e| IcdError::Parse(format!("line {line}: bad date `{}`: {e}", &record[0])))?;

        let mut values = Vec::with_capacity(assets.len());
        let mut complete = true;
        for (j, cell) in record.iter().skip(1).enumerate() {
            if cell.is_empty() {
                complete = false;
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| {
                IcdError::Parse(format!(
                    "line {line}, column {}: `{cell}` is not a number",
                    assets[j]
                ))
            })?;
            if !(v.is_finite() && v > 0.0) {
                return Err(IcdError::DataAt {
                    row: line,
                    column: assets[j].clone(),
                    message: format!("price must be strictly positive, got {cell}"),
                });
            }
            values.push(v);
        }
        if complete {
            rows.push((date, values));
        }
    }

    rows.sort_by_key(|(d, _)| *d);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(IcdError::data(format!("duplicate date {}", w[0].0)));
    }
    if rows.len() < MIN_PRICE_ROWS {
        return Err(IcdError::data(format!(
            "insufficient history: {} complete rows, need at least {MIN_PRICE_ROWS}",
            rows.len()
        )));
    }

    let n = rows.len();
    let prices = DMatrix::from_fn(n, assets.len(), |t, j| rows[t].1[j]);
    let dates = rows.into_iter().map(|(d, _)| d).collect();
    PricePanel::new(dates, assets, prices)
}

/// Arithmetic returns `p[t+1]/p[t] - 1`, dated at the later price.
pub fn compute_returns(panel: &PricePanel) -> Result<ReturnPanel> {
    let n = panel.n_dates();
    if n < 2 {
        return Err(IcdError::data(
            "need at least two price rows to form a return",
        ));
    }
    let p = panel.prices();
    let returns = DMatrix::from_fn(n - 1, p.ncols(), |t, j| p[(t + 1, j)] / p[(t, j)] - 1.0);
    ReturnPanel::new(
        panel.dates()[1..].to_vec(),
        panel.assets().to_vec(),
        returns,
    )
}

/// Exactly `window.length` consecutive rows ending at `window.end`.
pub fn slice_window(panel: &ReturnPanel, window: &DateWindow) -> Result<ReturnPanel> {
    let end = panel
        .date_index(window.end)
        .ok_or_else(|| IcdError::Range(format!("window end {} is not a panel date", window.end)))?;
    if window.length > end + 1 {
        return Err(IcdError::Range(format!(
            "window of {} rows ending {} exceeds the {} rows available",
            window.length,
            window.end,
            end + 1
        )));
    }
    panel.rows(end + 1 - window.length, end + 1)
}
