//! Run configuration: one JSON document, with command-line overrides.
//!
//! Paths inside the file are resolved against the file's directory; paths
//! given as flags are used as typed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, ValueEnum};
use icd_core::covariance::{EstimatorKind, EstimatorSpec, RankKind};
use icd_core::market_data::SIX_MONTHS;
use icd_core::timeseries::SimConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum PortfolioKind {
    LongShort,
    #[default]
    Equal,
    RiskParity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorName {
    Sample,
    #[default]
    Ewma,
    Shrinkage,
    Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum RankName {
    Spearman,
    Kendall,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PortfolioConfig {
    #[serde(default)]
    pub kind: PortfolioKind,
    /// Ticker to weight; required for `long_short`.
    pub weights: Option<BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HierarchyConfig {
    /// Level names from the top down, e.g. `["asset_class"]`.
    pub levels: Vec<String>,
    /// Ticker to group labels, one per level.
    pub assets: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default)]
    pub kind: EstimatorName,
    pub decay: Option<f64>,
    pub shrink_intensity: Option<f64>,
    pub rank_kind: Option<RankName>,
    #[serde(default)]
    pub lag_adjust: bool,
    #[serde(default)]
    pub async_full: bool,
    /// Defaults to on for rank and lag-adjusted estimates.
    pub psd_repair: Option<bool>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            kind: EstimatorName::Ewma,
            decay: None,
            shrink_intensity: None,
            rank_kind: None,
            lag_adjust: false,
            async_full: false,
            psd_repair: None,
        }
    }
}

pub const DEFAULT_DECAY: f64 = 0.99;

impl EstimatorConfig {
    pub fn spec(&self) -> Result<EstimatorSpec> {
        let kind = match self.kind {
            EstimatorName::Sample => EstimatorKind::Sample,
            EstimatorName::Ewma => EstimatorKind::Ewma {
                decay: self.decay.unwrap_or(DEFAULT_DECAY),
            },
            EstimatorName::Shrinkage => EstimatorKind::Shrinkage {
                intensity: self.shrink_intensity.ok_or_else(|| {
                    CliError::config(
                        "estimator.shrink_intensity",
                        "required for the shrinkage estimator",
                    )
                })?,
            },
            EstimatorName::Rank => EstimatorKind::Rank {
                method: match self.rank_kind.unwrap_or(RankName::Spearman) {
                    RankName::Spearman => RankKind::Spearman,
                    RankName::Kendall => RankKind::Kendall,
                },
            },
        };
        let mut spec = EstimatorSpec::new(kind);
        if self.lag_adjust {
            spec = spec.with_lag(self.async_full);
        } else {
            spec.async_full = self.async_full;
        }
        if let Some(repair) = self.psd_repair {
            spec = spec.with_repair(repair);
        }
        spec.validate().at("estimator")?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n_assets: usize,
    pub variance: f64,
    pub covariance: f64,
    pub horizon: usize,
    pub start: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            n_assets: d.n_assets,
            variance: d.variance,
            covariance: d.covariance,
            horizon: d.horizon,
            start: d.start,
            seed: d.seed,
        }
    }
}

impl SimulationConfig {
    pub fn to_core(&self) -> SimConfig {
        SimConfig {
            n_assets: self.n_assets,
            variance: self.variance,
            covariance: self.covariance,
            horizon: self.horizon,
            start: self.start,
            seed: self.seed,
        }
    }
}

fn default_window() -> usize {
    SIX_MONTHS
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("icd-out")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Price CSV: a `date` column followed by one column per ticker.
    pub data: Option<PathBuf>,
    #[serde(default)]
    pub portfolio: PortfolioConfig,
    /// Target sum of weights for generated portfolios.
    pub leverage: Option<f64>,
    pub hierarchy: Option<HierarchyConfig>,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    /// Estimation window in return rows.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Volatility window for risk parity; defaults to `window`.
    pub vol_window: Option<usize>,
    /// Defaults to the last date in the data.
    pub as_of: Option<NaiveDate>,
    /// Display volatilities scaled by sqrt(k).
    pub annualization_factor: Option<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub simulation: SimulationConfig,
}

/// Flags that override config keys.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Portfolio kind.
    #[arg(long, value_enum)]
    pub portfolio: Option<PortfolioKind>,
    #[arg(long)]
    pub leverage: Option<f64>,
    /// Estimator kind.
    #[arg(long, value_enum)]
    pub estimator: Option<EstimatorName>,
    #[arg(long)]
    pub decay: Option<f64>,
    #[arg(long, alias = "shrink_intensity")]
    pub shrink_intensity: Option<f64>,
    #[arg(long, alias = "rank_kind", value_enum)]
    pub rank_kind: Option<RankName>,
    #[arg(long, alias = "lag_adjust")]
    pub lag_adjust: bool,
    #[arg(long, alias = "async_full")]
    pub async_full: bool,
    #[arg(long, alias = "psd_repair")]
    pub psd_repair: Option<bool>,
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, alias = "vol_window")]
    pub vol_window: Option<usize>,
    #[arg(long, alias = "as_of")]
    pub as_of: Option<NaiveDate>,
    #[arg(long, alias = "annualization_factor")]
    pub annualization_factor: Option<f64>,
    #[arg(long, alias = "output_dir")]
    pub output_dir: Option<PathBuf>,
    /// Simulation seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(&json_key(&e), format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.data = cfg.data.map(|d| base.join(d));
        cfg.output_dir = base.join(&cfg.output_dir);
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.data {
            self.data = Some(v.clone());
        }
        if let Some(v) = o.portfolio {
            self.portfolio.kind = v;
        }
        if let Some(v) = o.leverage {
            self.leverage = Some(v);
        }
        if let Some(v) = o.estimator {
            self.estimator.kind = v;
        }
        if let Some(v) = o.decay {
            self.estimator.decay = Some(v);
        }
        if let Some(v) = o.shrink_intensity {
            self.estimator.shrink_intensity = Some(v);
        }
        if let Some(v) = o.rank_kind {
            self.estimator.rank_kind = Some(v);
        }
        self.estimator.lag_adjust |= o.lag_adjust;
        self.estimator.async_full |= o.async_full;
        if let Some(v) = o.psd_repair {
            self.estimator.psd_repair = Some(v);
        }
        if let Some(v) = o.window {
            self.window = v;
        }
        if let Some(v) = o.vol_window {
            self.vol_window = Some(v);
        }
        if let Some(v) = o.as_of {
            self.as_of = Some(v);
        }
        if let Some(v) = o.annualization_factor {
            self.annualization_factor = Some(v);
        }
        if let Some(v) = &o.output_dir {
            self.output_dir = v.clone();
        }
        if let Some(v) = o.seed {
            self.simulation.seed = v;
        }
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data
            .as_deref()
            .ok_or_else(|| CliError::config("data", "no price file given"))
    }

    pub fn vol_window(&self) -> usize {
        self.vol_window.unwrap_or(self.window)
    }

    /// Multiplier applied to displayed volatilities.
    pub fn display_scale(&self) -> Result<f64> {
        match self.annualization_factor {
            None => Ok(1.0),
            Some(k) if k.is_finite() && k > 0.0 => Ok(k.sqrt()),
            Some(k) => Err(CliError::config(
                "annualization_factor",
                format!("must be positive, got {k}"),
            )),
        }
    }

    pub fn leverage(&self) -> Result<f64> {
        match (self.portfolio.kind, self.leverage) {
            (PortfolioKind::LongShort, Some(_)) => Err(CliError::config(
                "leverage",
                "long_short portfolios take their weights as given",
            )),
            (_, Some(l)) if !(l.is_finite() && l > 0.0) => Err(CliError::config(
                "leverage",
                format!("must be positive, got {l}"),
            )),
            (_, l) => Ok(l.unwrap_or(1.0)),
        }
    }

    /// Checks that do not need the data.
    pub fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(CliError::config("window", "must be at least 2 rows"));
        }
        if self.vol_window() < 2 {
            return Err(CliError::config("vol_window", "must be at least 2 rows"));
        }
        self.display_scale()?;
        self.leverage()?;
        self.estimator.spec()?;
        match (self.portfolio.kind, &self.portfolio.weights) {
            (PortfolioKind::LongShort, None) => Err(CliError::config(
                "portfolio.weights",
                "required for a long_short portfolio",
            )),
            (PortfolioKind::LongShort, Some(w)) if w.is_empty() => {
                Err(CliError::config("portfolio.weights", "no weights given"))
            }
            _ => Ok(()),
        }?;
        if let Some(h) = &self.hierarchy {
            for (asset, labels) in &h.assets {
                if labels.len() != h.levels.len() {
                    return Err(CliError::config(
                        &format!("hierarchy.assets.{asset}"),
                        format!("{} labels for {} levels", labels.len(), h.levels.len()),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Best-effort key for a JSON decoding error (the field named in the
/// message, if any).
fn json_key(e: &serde_json::Error) -> String {
    let msg = e.to_string();
    msg.split('`')
        .nth(1)
        .filter(|_| msg.contains("field"))
        .unwrap_or("config")
        .to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| CliError::config(&json_key(&e), e.to_string()))
    }

    #[test]
    fn defaults() {
        let cfg = parse(r#"{"data": "p.csv"}"#).unwrap();
        assert_eq!(cfg.window, 126);
        assert_eq!(cfg.portfolio.kind, PortfolioKind::Equal);
        assert_eq!(cfg.estimator.spec().unwrap(), EstimatorSpec::ewma(0.99));
        assert_eq!(cfg.simulation.to_core(), SimConfig::default());
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse(r#"{"data": "p.csv", "windw": 3}"#).unwrap_err();
        assert!(
            matches!(err, CliError::Config { ref key, .. } if key == "windw"),
            "{err}"
        );
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn long_short_needs_weights() {
        let cfg = parse(r#"{"portfolio": {"kind": "long_short"}}"#).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, CliError::Config { ref key, .. } if key == "portfolio.weights"));
    }

    #[test]
    fn shrinkage_needs_intensity() {
        let cfg = parse(r#"{"estimator": {"kind": "shrinkage"}}"#).unwrap();
        assert!(cfg.validate().is_err());
        let cfg =
            parse(r#"{"estimator": {"kind": "shrinkage", "shrink_intensity": 0.3}}"#).unwrap();
        assert_eq!(cfg.estimator.spec().unwrap(), EstimatorSpec::shrinkage(0.3));
    }

    #[test]
    fn bad_decay_is_config_error() {
        let cfg = parse(r#"{"estimator": {"kind": "ewma", "decay": 1.5}}"#).unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn lag_flag_turns_repair_on() {
        let mut cfg = parse(r#"{"estimator": {"kind": "sample"}}"#).unwrap();
        cfg.apply(&Overrides {
            lag_adjust: true,
            ..Overrides::default()
        });
        let spec = cfg.estimator.spec().unwrap();
        assert!(spec.lag_adjust && spec.psd_repair);
    }

    #[test]
    fn overrides_win() {
        let mut cfg = parse(r#"{"window": 60, "simulation": {"seed": 1}}"#).unwrap();
        cfg.apply(&Overrides {
            window: Some(20),
            seed: Some(9),
            ..Overrides::default()
        });
        assert_eq!(cfg.window, 20);
        assert_eq!(cfg.simulation.seed, 9);
    }

    #[test]
    fn hierarchy_label_count_checked() {
        let cfg = parse(
            r#"{"hierarchy": {"levels": ["class", "region"], "assets": {"ES1": ["Equity"]}}}"#,
        )
        .unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, CliError::Config { ref key, .. } if key == "hierarchy.assets.ES1"));
    }

    #[test]
    fn leverage_rules() {
        let cfg = parse(r#"{"leverage": 2.0}"#).unwrap();
        assert_eq!(cfg.leverage().unwrap(), 2.0);
        let cfg = parse(r#"{"leverage": -1.0}"#).unwrap();
        assert!(cfg.leverage().is_err());
        let cfg =
            parse(r#"{"portfolio": {"kind": "long_short", "weights": {"A": 1}}, "leverage": 2.0}"#)
                .unwrap();
        assert!(cfg.leverage().is_err());
    }
}
