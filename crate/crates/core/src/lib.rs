//! Portfolio risk attribution built on the leave-one-out form of risk
//! contribution (RC).
//!
//! Each asset's RC splits additively into an *inherent* part, which depends
//! only on the position's own variance, and a *correlation* part, which
//! depends on how the position co-moves with the rest of the portfolio.
//! Both parts sum exactly to RC, and RC sums exactly to portfolio
//! volatility, so every level of a hierarchy can be reported consistently.
//!
//! Module map:
//!
//! - [`market_data`]: price CSV loading, arithmetic returns, window slicing
//! - [`covariance`]: sample, EWMA, shrinkage, rank and lag-adjusted
//!   estimators plus PSD repair
//! - [`attribution`]: portfolio volatility, RC forms, leave-one-out stats,
//!   the inherent/correlation split and related diagnostics
//! - [`portfolio`]: weight construction and hierarchical roll-ups
//! - [`timeseries`]: rolling attribution, percentiles and the convergence
//!   simulation
//!
//! Batch work (rolling windows, simulations, portfolio batches) runs on
//! rayon when the `parallel` feature is enabled; see [`Execution`].

pub mod attribution;
pub mod covariance;
pub mod error;
pub mod exec;
pub mod market_data;
pub mod portfolio;
pub mod synthetic;
pub mod timeseries;

pub use error::{IcdError, Result};
pub use exec::Execution;
