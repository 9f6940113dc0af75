//! Proxy-reliance-controlled conformal recalibration of one-sided Value-at-Risk.
//!
//! The library recalibrates a baseline lower-tail quantile forecast with a
//! conformal shift that scales with a volatility proxy raised to a reliance
//! exponent `rho` in `[0, 1]`: `rho = 0` is a constant shift, `rho = 1` fully
//! inherits the proxy scale, and intermediate values interpolate. The exponent
//! is the central design object: higher reliance is more state-responsive but
//! more fragile when the proxy underreacts exactly in stressed markets.
//!
//! Main pieces:
//! - [`market_data`]: OHLCV + VIX ingestion, feature construction, and a
//!   seeded regime-switching synthetic panel generator.
//! - [`state_model`]: composite volatility proxy, regime labels, stress flags,
//!   and the stress-only underreaction distortion.
//! - [`baselines`]: seven tail forecasters (HS, FHS, QR, GPQ, GARCH-t,
//!   GJR-GARCH-t, AS-CAViaR).
//! - [`recalibration`]: signed residuals, the lower empirical quantile, and
//!   the reliance-scaled adjustment algebra.
//! - [`selection`]: per-origin reliance-rule selectors (capital-greedy,
//!   stress-aware, and regime-tuple variants).
//! - [`engine`]: the strictly chronological walk-forward backtest.
//! - [`evaluation`]: exceedance/capital/tick-loss metrics, Kupiec /
//!   Christoffersen / dynamic-quantile backtests, distortion curves, and an
//!   executable verification suite for the structural properties of the
//!   reliance-scaled adjustment.
//! - [`cli`]: config files, run directories, manifests, and report emission
//!   backing the `varcal` binary.
//!
//! See the crate `examples/` directory for one runnable example per
//! capability; `cargo run --example walk_forward` is a good starting point.

pub mod baselines;
pub mod cli;
pub mod engine;
pub mod evaluation;
pub mod garch;
pub mod market_data;
pub mod recalibration;
pub mod selection;
pub mod state_model;
pub mod stats;

pub use engine::{ForecastRecord, MethodKind, RunSpec, Scenario, WindowLayout};
pub use market_data::{AssetSeries, Bar, FeaturePanel, FeatureRow, SynthConfig};
pub use recalibration::{CalibratedRule, RecalRule};
pub use selection::SelectorConfig;
pub use state_model::Regime;
