use std::collections::BTreeMap;
use std::fs::File;

use chrono::NaiveDate;
use icd_core::attribution::{icd, ivol_additivity_gap, AttributionReport, IvolGap, WeightVector};
use icd_core::covariance::{estimate, CovarianceEstimate, EstimatorSpec};
use icd_core::market_data::{compute_returns, load_prices, slice_window, DateWindow, ReturnPanel};
use icd_core::portfolio::{
    equal_weights, risk_parity_weights, rollup, GroupReport, HierarchyTree, ROOT_LABEL,
};
use icd_core::timeseries::{
    constant_schedule, convergence_sim, method1, method2, percentile_of_current,
    risk_parity_schedule, Components, ConvergenceRun, TimeSeriesReport, WeightSchedule,
};
use icd_core::Execution;
use serde::Serialize;

use crate::config::{PortfolioKind, RunConfig};
use crate::error::{CliError, Context, Result};
use crate::output::{Cell, OutputDir, Table};

/// Everything a data-driven command needs, resolved from the config.
struct Inputs {
    /// Returns for the portfolio's assets up to the as-of date.
    panel: ReturnPanel,
    tree: HierarchyTree,
    spec: EstimatorSpec,
    weights: WeightVector,
    as_of: NaiveDate,
    leverage: f64,
}

impl Inputs {
    fn load(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let path = cfg.data_path()?;
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let prices = load_prices(file).at("data")?;
        let all = compute_returns(&prices).at("data")?;

        let universe = universe(cfg, all.assets())?;
        let tree = hierarchy(cfg, &universe)?;
        let mut panel = all.select_assets(&universe).at("data")?;
        let as_of = cfg.as_of.unwrap_or(panel.last_date());
        if panel.date_index(as_of).is_none() {
            return Err(CliError::config(
                "as_of",
                format!("{as_of} is not a return date in the data"),
            ));
        }
        panel = panel.up_to(as_of).at("as_of")?;

        let leverage = cfg.leverage()?;
        let weights = match cfg.portfolio.kind {
            PortfolioKind::LongShort => {
                let table = cfg.portfolio.weights.as_ref().expect("validated");
                let w = universe.iter().map(|a| table[a]).collect();
                WeightVector::new(universe.clone(), w).at("portfolio.weights")?
            }
            PortfolioKind::Equal => equal_weights(&universe, leverage).at("portfolio")?,
            PortfolioKind::RiskParity => {
                let window = DateWindow::new(as_of, cfg.vol_window()).at("vol_window")?;
                risk_parity_weights(&panel, &window, leverage).at("vol_window")?
            }
        };
        Ok(Self {
            panel,
            tree,
            spec: cfg.estimator.spec()?,
            weights,
            as_of,
            leverage,
        })
    }

    fn covariance(&self, window: usize) -> Result<CovarianceEstimate> {
        let window = DateWindow::new(self.as_of, window).at("window")?;
        let slice = slice_window(&self.panel, &window).at("window")?;
        estimate(&slice, &self.spec).at("estimator")
    }

    fn level_name(&self, depth: usize) -> String {
        match depth {
            0 => ROOT_LABEL.to_string(),
            d => self
                .tree
                .levels
                .get(d - 1)
                .cloned()
                .unwrap_or_else(|| format!("level{d}")),
        }
    }

    fn top_group(&self, asset: &str) -> String {
        self.tree
            .path_of(asset)
            .and_then(|p| p.into_iter().next())
            .unwrap_or_default()
    }
}

/// Portfolio assets in data-column order.
fn universe(cfg: &RunConfig, columns: &[String]) -> Result<Vec<String>> {
    let check = |key: &str, names: &mut dyn Iterator<Item = &String>| {
        for name in names {
            if !columns.contains(name) {
                return Err(CliError::config(
                    &format!("{key}.{name}"),
                    "ticker not found in the data",
                ));
            }
        }
        Ok(())
    };
    if let Some(h) = &cfg.hierarchy {
        check("hierarchy.assets", &mut h.assets.keys())?;
    }
    let chosen: Vec<String> = match (&cfg.portfolio.weights, &cfg.hierarchy) {
        (Some(w), _) if cfg.portfolio.kind == PortfolioKind::LongShort => {
            check("portfolio.weights", &mut w.keys())?;
            columns
                .iter()
                .filter(|c| w.contains_key(*c))
                .cloned()
                .collect()
        }
        (_, Some(h)) => columns
            .iter()
            .filter(|c| h.assets.contains_key(*c))
            .cloned()
            .collect(),
        _ => columns.to_vec(),
    };
    Ok(chosen)
}

fn hierarchy(cfg: &RunConfig, universe: &[String]) -> Result<HierarchyTree> {
    let Some(h) = &cfg.hierarchy else {
        return Ok(HierarchyTree::flat(universe));
    };
    let mut paths = Vec::with_capacity(universe.len());
    for asset in universe {
        let labels = h.assets.get(asset).ok_or_else(|| {
            CliError::config(
                &format!("hierarchy.assets.{asset}"),
                "portfolio asset has no hierarchy entry",
            )
        })?;
        paths.push((asset.clone(), labels.clone()));
    }
    HierarchyTree::from_paths(h.levels.clone(), &paths).at("hierarchy")
}

#[derive(Serialize)]
struct Metadata<'a> {
    command: &'a str,
    as_of: NaiveDate,
    window: usize,
    portfolio: PortfolioKind,
    leverage: Option<f64>,
    estimator: EstimatorSpec,
    annualization_factor: Option<f64>,
    display_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<u8>,
}

fn metadata<'a>(
    cfg: &RunConfig,
    inputs: &Inputs,
    command: &'a str,
    method: Option<u8>,
) -> Metadata<'a> {
    Metadata {
        command,
        as_of: inputs.as_of,
        window: cfg.window,
        portfolio: cfg.portfolio.kind,
        leverage: (cfg.portfolio.kind != PortfolioKind::LongShort).then_some(inputs.leverage),
        estimator: inputs.spec,
        annualization_factor: cfg.annualization_factor,
        display_scale: cfg.display_scale().unwrap_or(1.0),
        method,
    }
}

fn components(g: &GroupReport) -> [Cell<'_>; 3] {
    [Cell::Num(g.rc), Cell::Num(g.rc_inh), Cell::Num(g.rc_corr)]
}

#[derive(Serialize)]
struct ReportJson<'a> {
    metadata: Metadata<'a>,
    portfolio_vol: f64,
    attribution: &'a AttributionReport,
    groups: &'a GroupReport,
}

pub fn report(cfg: &RunConfig) -> Result<OutputDir> {
    let inputs = Inputs::load(cfg)?;
    let cov = inputs.covariance(cfg.window)?;
    let mut attribution = icd(&inputs.weights, &cov)
        .at("portfolio")?
        .with_drawdowns(&inputs.panel)
        .at("data")?;
    attribution.as_of = Some(inputs.as_of);
    let attribution = attribution.scaled(cfg.display_scale()?);
    let groups = rollup(&attribution, &inputs.tree).at("hierarchy")?;

    let mut out = OutputDir::create(&cfg.output_dir)?;

    let mut by_asset = Table::new(&[
        "asset_class",
        "ticker",
        "weight",
        "rc",
        "rc_inh",
        "rc_corr",
        "ivol",
        "mdd",
        "is_hedge",
    ]);
    for row in &attribution.rows {
        let class = inputs.top_group(&row.asset);
        by_asset.row(&[
            Cell::Text(&class),
            Cell::Text(&row.asset),
            Cell::Num(row.weight),
            Cell::Num(row.rc),
            Cell::Num(row.rc_inh),
            Cell::Num(row.rc_corr),
            Cell::Opt(row.ivol()),
            Cell::Opt(row.mdd),
            Cell::Bool(row.is_hedge),
        ]);
    }
    out.write_csv("rc_by_asset.csv", by_asset)?;

    let mut by_group = Table::new(&["level", "group", "rc", "rc_inh", "rc_corr"]);
    for (depth, g) in groups.groups_by_depth() {
        let level = inputs.level_name(depth);
        let [a, b, c] = components(g);
        by_group.row(&[Cell::Text(&level), Cell::Text(&g.label), a, b, c]);
    }
    out.write_csv("rc_by_group.csv", by_group)?;

    let mut sorted: Vec<_> = attribution.rows.iter().collect();
    sorted.sort_by(|a, b| b.rc.total_cmp(&a.rc));
    let mut tornado = Table::new(&["ticker", "rc_inh", "rc_corr"]);
    for row in sorted {
        tornado.row(&[
            Cell::Text(&row.asset),
            Cell::Num(row.rc_inh),
            Cell::Num(row.rc_corr),
        ]);
    }
    out.write_csv("tornado.csv", tornado)?;

    out.write_json(
        "report.json",
        &ReportJson {
            metadata: metadata(cfg, &inputs, "report", None),
            portfolio_vol: attribution.portfolio_vol,
            attribution: &attribution,
            groups: &groups,
        },
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct Series {
    level: String,
    label: String,
    rc: Vec<f64>,
    rc_inh: Vec<f64>,
    rc_corr: Vec<f64>,
}

impl Series {
    fn new(level: String, label: String) -> Self {
        Self {
            level,
            label,
            rc: Vec::new(),
            rc_inh: Vec::new(),
            rc_corr: Vec::new(),
        }
    }

    fn push(&mut self, rc: f64, rc_inh: f64, rc_corr: f64) {
        self.rc.push(rc);
        self.rc_inh.push(rc_inh);
        self.rc_corr.push(rc_corr);
    }
}

#[derive(Serialize)]
struct HistoryJson<'a> {
    metadata: Metadata<'a>,
    dates: &'a [NaiveDate],
    portfolio_vol: Vec<f64>,
    assets: Vec<Series>,
    groups: Vec<Series>,
}

fn history_run(
    cfg: &RunConfig,
    inputs: &Inputs,
    method: u8,
    exec: Execution,
) -> Result<TimeSeriesReport> {
    let panel = &inputs.panel;
    match method {
        1 => method1(panel, &inputs.weights, cfg.window, &inputs.spec, exec).at("window"),
        2 => {
            let (panel, schedule): (ReturnPanel, WeightSchedule) = match cfg.portfolio.kind {
                PortfolioKind::RiskParity => {
                    let vol_window = cfg.vol_window();
                    let schedule = risk_parity_schedule(panel, vol_window, inputs.leverage, exec)
                        .at("vol_window")?;
                    // start where both windows are full
                    let skip = vol_window.saturating_sub(cfg.window);
                    let trimmed = panel
                        .rows(skip.min(panel.n_obs()), panel.n_obs())
                        .at("window")?;
                    (trimmed, schedule)
                }
                _ => (
                    panel.clone(),
                    constant_schedule(&inputs.weights, panel.dates()),
                ),
            };
            method2(&panel, &schedule, cfg.window, &inputs.spec, exec).at("window")
        }
        m => Err(CliError::config(
            "method",
            format!("expected 1 or 2, got {m}"),
        )),
    }
}

pub fn history(cfg: &RunConfig, method: u8, exec: Execution) -> Result<OutputDir> {
    let inputs = Inputs::load(cfg)?;
    let scale = cfg.display_scale()?;
    let ts = history_run(cfg, &inputs, method, exec)?;
    let reports: Vec<AttributionReport> = ts.reports.iter().map(|r| r.scaled(scale)).collect();
    let groups: Vec<GroupReport> = reports
        .iter()
        .map(|r| rollup(r, &inputs.tree))
        .collect::<icd_core::Result<_>>()
        .at("hierarchy")?;

    let mut asset_series: Vec<Series> = inputs
        .panel
        .assets()
        .iter()
        .map(|a| Series::new("asset".into(), a.clone()))
        .collect();
    let mut group_series: Vec<Series> = Vec::new();
    let mut by_asset = Table::new(&["date", "label", "rc", "rc_inh", "rc_corr"]);
    let mut by_group = Table::new(&["date", "level", "label", "rc", "rc_inh", "rc_corr"]);

    for ((date, report), tree) in ts.dates.iter().zip(&reports).zip(&groups) {
        let date = date.format("%Y-%m-%d").to_string();
        for (row, series) in report.rows.iter().zip(asset_series.iter_mut()) {
            by_asset.row(&[
                Cell::Text(&date),
                Cell::Text(&row.asset),
                Cell::Num(row.rc),
                Cell::Num(row.rc_inh),
                Cell::Num(row.rc_corr),
            ]);
            series.push(row.rc, row.rc_inh, row.rc_corr);
        }
        let nodes = tree.groups_by_depth();
        if group_series.is_empty() {
            group_series = nodes
                .iter()
                .map(|(d, g)| Series::new(inputs.level_name(*d), g.label.clone()))
                .collect();
        }
        for ((depth, g), series) in nodes.iter().zip(group_series.iter_mut()) {
            let level = inputs.level_name(*depth);
            let [a, b, c] = components(g);
            by_group.row(&[
                Cell::Text(&date),
                Cell::Text(&level),
                Cell::Text(&g.label),
                a,
                b,
                c,
            ]);
            series.push(g.rc, g.rc_inh, g.rc_corr);
        }
    }

    let mut percentiles = Table::new(&["level", "label", "current", "percentile"]);
    for series in group_series.iter().chain(&asset_series) {
        let Some(&current) = series.rc.last() else {
            continue;
        };
        let p = percentile_of_current(&series.rc, current).at("window")?;
        percentiles.row(&[
            Cell::Text(&series.level),
            Cell::Text(&series.label),
            Cell::Num(current),
            Cell::Num(p),
        ]);
    }

    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_csv("history_by_asset.csv", by_asset)?;
    out.write_csv("history_by_group.csv", by_group)?;
    out.write_csv("percentiles.csv", percentiles)?;
    out.write_json(
        "history.json",
        &HistoryJson {
            metadata: metadata(cfg, &inputs, "history", Some(method)),
            dates: &ts.dates,
            portfolio_vol: reports.iter().map(|r| r.portfolio_vol).collect(),
            assets: asset_series,
            groups: group_series,
        },
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct ConvergenceJson<'a> {
    config: &'a crate::config::SimulationConfig,
    #[serde(flatten)]
    run: &'a ConvergenceRun,
}

pub fn simulate(cfg: &RunConfig, exec: Execution) -> Result<OutputDir> {
    let run = convergence_sim(&cfg.simulation.to_core(), exec).at("simulation")?;
    let n = run.targets.len() as f64;
    let mean_target = Components {
        rc: run.targets.iter().map(|t| t.rc).sum::<f64>() / n,
        rc_inh: run.targets.iter().map(|t| t.rc_inh).sum::<f64>() / n,
        rc_corr: run.targets.iter().map(|t| t.rc_corr).sum::<f64>() / n,
    };

    let mut table = Table::new(&[
        "window_length",
        "asset",
        "rc",
        "rc_inh",
        "rc_corr",
        "rc_target",
        "inh_target",
        "corr_target",
    ]);
    for point in &run.points {
        let labelled = run
            .assets
            .iter()
            .map(String::as_str)
            .zip(point.per_asset.iter().zip(&run.targets))
            .chain(std::iter::once(("average", (&point.average, &mean_target))));
        for (asset, (est, target)) in labelled {
            table.row(&[
                Cell::Int(point.window_length),
                Cell::Text(asset),
                Cell::Num(est.rc),
                Cell::Num(est.rc_inh),
                Cell::Num(est.rc_corr),
                Cell::Num(target.rc),
                Cell::Num(target.rc_inh),
                Cell::Num(target.rc_corr),
            ]);
        }
    }
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_csv("convergence.csv", table)?;
    out.write_json(
        "convergence.json",
        &ConvergenceJson {
            config: &cfg.simulation,
            run: &run,
        },
    )?;
    Ok(out)
}

#[derive(Serialize)]
struct GapJson<'a> {
    metadata: Metadata<'a>,
    weights: BTreeMap<&'a str, f64>,
    #[serde(flatten)]
    gap: &'a IvolGap,
}

pub fn gap(cfg: &RunConfig) -> Result<OutputDir> {
    let inputs = Inputs::load(cfg)?;
    let cov = inputs.covariance(cfg.window)?;
    let mut gap = ivol_additivity_gap(&inputs.weights, &cov).at("portfolio")?;
    let k = cfg.display_scale()?;
    if k != 1.0 {
        gap.ivols.iter_mut().for_each(|v| *v *= k);
        gap.sum_ivol *= k;
        gap.sigma_p *= k;
        gap.gap *= k;
    }

    let mut table = Table::new(&[
        "asset",
        "weight",
        "ivol",
        "cond2_stat",
        "sum_ivol",
        "sigma_p",
        "gap",
        "cond1_stat",
    ]);
    for (i, asset) in gap.assets.iter().enumerate() {
        table.row(&[
            Cell::Text(asset),
            Cell::Num(inputs.weights.weights[i]),
            Cell::Num(gap.ivols[i]),
            Cell::Num(gap.cond2_stat[i]),
            Cell::Num(gap.sum_ivol),
            Cell::Num(gap.sigma_p),
            Cell::Num(gap.gap),
            Cell::Num(gap.cond1_stat),
        ]);
    }
    let mut out = OutputDir::create(&cfg.output_dir)?;
    out.write_csv("ivol_gap.csv", table)?;
    out.write_json(
        "ivol_gap.json",
        &GapJson {
            metadata: metadata(cfg, &inputs, "gap", None),
            weights: inputs
                .weights
                .assets
                .iter()
                .map(String::as_str)
                .zip(inputs.weights.weights.iter().copied())
                .collect(),
            gap: &gap,
        },
    )?;
    Ok(out)
}
