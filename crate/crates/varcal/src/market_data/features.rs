//! Predictor construction on a merged OHLCV+VIX series.
//!
//! One row per usable bar: five return lags, rolling and EWMA volatility,
//! Parkinson and Garman-Klass range estimators, the VIX daily-vol transform
//! and its percentage change, a 60-day drawdown, log volume with a 20-day
//! z-score, a GARCH-style conditional volatility slot, and the one-step-ahead
//! target. A row is kept only when every input is available, which means bars
//! from index 59 (drawdown lookback) through the second-to-last (target).

use chrono::NaiveDate;

use super::{AssetSeries, IngestError};
use crate::state_model;
use crate::stats::{mean, sample_sd};

/// EWMA decay for span 20: `1 - 2/(span+1)`.
pub const EWMA_LAMBDA: f64 = 1.0 - 2.0 / 21.0;
/// Shortest merged series that yields at least one row.
pub const MIN_BARS: usize = 70;
/// Bar index of the first feature row (60-day drawdown lookback).
pub const FIRST_ROW_BAR: usize = 59;

/// Names of the predictor vector entries, in the order produced by
/// [`FeatureRow::predictors`].
pub const FEATURE_NAMES: [&str; 15] = [
    "ret_0",
    "ret_1",
    "ret_2",
    "ret_3",
    "ret_5",
    "roll_vol_20",
    "ewma_vol_20",
    "parkinson",
    "garman_klass",
    "vix_daily",
    "vix_pct_change",
    "drawdown_60",
    "log_volume",
    "volume_z_20",
    "garch_vol_proxy",
];

/// One asset-date of predictors and the next-period target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub date: NaiveDate,
    /// next-period log return
    pub target: f64,
    pub ret_0: f64,
    pub ret_1: f64,
    pub ret_2: f64,
    pub ret_3: f64,
    pub ret_5: f64,
    pub roll_vol_20: f64,
    pub ewma_vol_20: f64,
    pub parkinson: f64,
    pub garman_klass: f64,
    pub vix_daily: f64,
    pub vix_pct_change: f64,
    pub drawdown_60: f64,
    pub log_volume: f64,
    pub volume_z_20: f64,
    /// expanding-window conditional vol; equals `ewma_vol_20` until
    /// [`attach_garch_proxy`] has filled it
    pub garch_vol_proxy: f64,
}

impl FeatureRow {
    /// The predictor vector in [`FEATURE_NAMES`] order.
    pub fn predictors(&self) -> [f64; 15] {
        [
            self.ret_0,
            self.ret_1,
            self.ret_2,
            self.ret_3,
            self.ret_5,
            self.roll_vol_20,
            self.ewma_vol_20,
            self.parkinson,
            self.garman_klass,
            self.vix_daily,
            self.vix_pct_change,
            self.drawdown_60,
            self.log_volume,
            self.volume_z_20,
            self.garch_vol_proxy,
        ]
    }
}

/// The per-asset modeling panel.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePanel {
    pub asset_id: String,
    pub rows: Vec<FeatureRow>,
    /// bar index of `rows[0]` in the source series
    pub row_offset: usize,
}

impl FeaturePanel {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.target).collect()
    }
}

/// Builds the panel from a merged series. `garch_vol_proxy` starts at the
/// EWMA fallback; call [`attach_garch_proxy`] to replace it with fitted
/// values.
pub fn build_features(series: &AssetSeries) -> Result<FeaturePanel, IngestError> {
    assert!(series.is_merged(), "build_features needs a VIX-merged series");
    let n = series.bars.len();
    if n < MIN_BARS {
        return Err(IngestError::TooShort {
            need: MIN_BARS,
            got: n,
        });
    }
    let returns = bar_returns(series); // returns[i] is the return at bar i, i >= 1
    let ewma = ewma_vol(&returns);

    let mut rows = Vec::with_capacity(n - FIRST_ROW_BAR - 1);
    for i in FIRST_ROW_BAR..n - 1 {
        let b = series.bars[i];
        // returns window for rolling vol: bars i-19..=i
        let window = &returns[i - 19..=i];
        let roll_vol_20 = sample_sd(window);
        let lhl = (b.high / b.low).ln();
        let parkinson = (lhl * lhl / (4.0 * 2f64.ln())).sqrt();
        let lco = (b.close / b.open).ln();
        let gk = (0.5 * lhl * lhl - (2.0 * 2f64.ln() - 1.0) * lco * lco).max(0.0).sqrt();
        let peak = series.bars[i - 59..=i]
            .iter()
            .map(|x| x.close)
            .fold(f64::MIN, f64::max);
        let drawdown_60 = b.close / peak - 1.0;
        let vix_daily = series.vix[i] / (100.0 * 252f64.sqrt());
        let vix_pct_change = series.vix[i] / series.vix[i - 1] - 1.0;

        // volume block: drop the row if any window volume is non-positive
        let vols = &series.bars[i - 19..=i];
        if vols.iter().any(|x| x.volume <= 0.0) {
            continue;
        }
        let logs: Vec<f64> = vols.iter().map(|x| x.volume.ln()).collect();
        let log_volume = *logs.last().unwrap();
        let sd = sample_sd(&logs);
        let volume_z_20 = if sd > 0.0 {
            (log_volume - mean(&logs)) / sd
        } else {
            0.0
        };

        rows.push(FeatureRow {
            date: b.date,
            target: returns[i + 1],
            ret_0: returns[i],
            ret_1: returns[i - 1],
            ret_2: returns[i - 2],
            ret_3: returns[i - 3],
            ret_5: returns[i - 5],
            roll_vol_20,
            ewma_vol_20: ewma[i],
            parkinson,
            garman_klass: gk,
            vix_daily,
            vix_pct_change,
            drawdown_60,
            log_volume,
            volume_z_20,
            garch_vol_proxy: ewma[i],
        });
    }
    Ok(FeaturePanel {
        asset_id: series.asset_id.clone(),
        rows,
        row_offset: FIRST_ROW_BAR,
    })
}

/// Replaces the `garch_vol_proxy` fallback with expanding-window GARCH(1,1)
/// one-step-ahead volatilities (lookback-limited). Returns the number of
/// panel rows still on the EWMA fallback.
pub fn attach_garch_proxy(
    panel: &mut FeaturePanel,
    series: &AssetSeries,
    lookback: usize,
    seed: u64,
) -> usize {
    let returns = bar_returns(series);
    let ewma = ewma_vol(&returns);
    let (proxy, _) = state_model::garch_proxy_series(&returns, &ewma, lookback, seed);
    let n = series.bars.len();
    let mut row = 0usize;
    let mut fallbacks = 0usize;
    for i in FIRST_ROW_BAR..n - 1 {
        if row >= panel.rows.len() || panel.rows[row].date != series.bars[i].date {
            continue; // row was dropped during the build
        }
        panel.rows[row].garch_vol_proxy = proxy[i];
        if i + 1 < lookback || proxy[i] == ewma[i] {
            fallbacks += 1;
        }
        row += 1;
    }
    fallbacks
}

/// Full pipeline: features plus the GARCH proxy fill.
pub fn prepare_panel(
    series: &AssetSeries,
    lookback: usize,
    seed: u64,
) -> Result<(FeaturePanel, usize), IngestError> {
    let mut panel = build_features(series)?;
    let fallbacks = attach_garch_proxy(&mut panel, series, lookback, seed);
    Ok((panel, fallbacks))
}

/// Per-bar log returns, `returns[i] = ln(close_i / close_{i-1})` with
/// `returns[0] = 0` as an unused placeholder.
fn bar_returns(series: &AssetSeries) -> Vec<f64> {
    let mut out = vec![0.0; series.bars.len()];
    for i in 1..series.bars.len() {
        out[i] = (series.bars[i].close / series.bars[i - 1].close).ln();
    }
    out
}

/// EWMA volatility over the bar-aligned return series: squared deviations
/// from the expanding mean, smoothed with decay [`EWMA_LAMBDA`], initialized
/// at the first squared deviation.
fn ewma_vol(returns: &[f64]) -> Vec<f64> {
    let n = returns.len();
    let mut out = vec![0.0; n];
    if n < 2 {
        return out;
    }
    let mut run_sum = 0.0;
    let mut var = 0.0;
    for i in 1..n {
        run_sum += returns[i];
        let m = run_sum / i as f64;
        let dev = returns[i] - m;
        if i == 1 {
            var = dev * dev;
        } else {
            var = EWMA_LAMBDA * var + (1.0 - EWMA_LAMBDA) * dev * dev;
        }
        out[i] = var.sqrt();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::Bar;

    fn flat_series(n: usize) -> AssetSeries {
        let bars: Vec<Bar> = (0..n)
            .map(|i| Bar {
                date: NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Days::new(i as u64),
                open: 50.0,
                high: 50.0,
                low: 50.0,
                close: 50.0,
                volume: 1000.0,
            })
            .collect();
        AssetSeries {
            asset_id: "FLAT".into(),
            vix: vec![16.0; n],
            bars,
        }
    }

    fn wobbly_series(n: usize) -> AssetSeries {
        let mut close = 100.0f64;
        let bars: Vec<Bar> = (0..n)
            .map(|i| {
                let r = 0.01 * ((i as f64 * 0.7).sin() + 0.3 * ((i * 13 % 7) as f64 - 3.0));
                let prev = close;
                close *= r.exp();
                let high = prev.max(close) * (1.0 + 0.004 * (1.0 + (i % 5) as f64));
                let low = prev.min(close) * (1.0 - 0.003 * (1.0 + (i % 3) as f64));
                Bar {
                    date: NaiveDate::from_ymd_opt(2018, 3, 1).unwrap()
                        + chrono::Days::new(i as u64),
                    open: prev,
                    high,
                    low,
                    close,
                    volume: 900.0 + ((i * 37) % 400) as f64,
                }
            })
            .collect();
        let vix: Vec<f64> = (0..n).map(|i| 14.0 + ((i * 11) % 17) as f64 * 0.6).collect();
        AssetSeries {
            asset_id: "WOB".into(),
            bars,
            vix,
        }
    }

    #[test]
    fn flat_path_degenerate_features() {
        let s = flat_series(70);
        let p = build_features(&s).unwrap();
        assert_eq!(p.len(), 10); // bars 59..=68
        for r in &p.rows {
            assert_eq!(r.roll_vol_20, 0.0);
            assert_eq!(r.drawdown_60, 0.0);
            assert_eq!(r.parkinson, 0.0);
            assert_eq!(r.garman_klass, 0.0);
            assert_eq!(r.volume_z_20, 0.0); // zero-dispersion convention
            assert_eq!(r.target, 0.0);
        }
    }

    #[test]
    fn too_short_is_rejected() {
        let s = flat_series(69);
        assert!(matches!(
            build_features(&s),
            Err(IngestError::TooShort { .. })
        ));
    }

    #[test]
    fn drawdown_half_of_peak() {
        let mut s = flat_series(100);
        // price halves at bar 80 and stays there
        for i in 80..100 {
            let b = &mut s.bars[i];
            b.open = 25.0;
            b.high = 25.0;
            b.low = 25.0;
            b.close = 25.0;
        }
        let p = build_features(&s).unwrap();
        let row = p.rows.iter().find(|r| r.date == s.bars[85].date).unwrap();
        assert!((row.drawdown_60 + 0.5).abs() < 1e-15);
    }

    #[test]
    fn range_estimators_at_unit_log_range() {
        // H/L = e with C = O: parkinson = 1/(2 sqrt(ln 2)), gk = sqrt(0.5)
        let mut s = wobbly_series(80);
        let i = 70;
        let c = s.bars[i].close;
        s.bars[i].open = c;
        s.bars[i].high = c * (0.5f64).exp();
        s.bars[i].low = c * (-0.5f64).exp();
        let p = build_features(&s).unwrap();
        let row = p.rows.iter().find(|r| r.date == s.bars[i].date).unwrap();
        assert!((row.parkinson - 0.600561204393224897428901643048).abs() < 1e-14);
        assert!((row.garman_klass - 0.707106781186547524400844362105).abs() < 1e-14);
    }

    #[test]
    fn brute_force_field_oracle() {
        // re-derive every field with explicit loops over raw bars
        let s = wobbly_series(140);
        let p = build_features(&s).unwrap();
        let bars = &s.bars;
        let n = bars.len();
        let r = |i: usize| (bars[i].close / bars[i - 1].close).ln();
        for row in &p.rows {
            let i = (FIRST_ROW_BAR..n - 1)
                .find(|&i| bars[i].date == row.date)
                .unwrap();
            assert!((row.target - r(i + 1)).abs() < 1e-15);
            assert!((row.ret_0 - r(i)).abs() < 1e-15);
            assert!((row.ret_1 - r(i - 1)).abs() < 1e-15);
            assert!((row.ret_2 - r(i - 2)).abs() < 1e-15);
            assert!((row.ret_3 - r(i - 3)).abs() < 1e-15);
            assert!((row.ret_5 - r(i - 5)).abs() < 1e-15);

            // rolling vol: explicit two-pass sample sd over the last 20 returns
            let win: Vec<f64> = (i - 19..=i).map(r).collect();
            let m = win.iter().sum::<f64>() / 20.0;
            let ss: f64 = win.iter().map(|x| (x - m) * (x - m)).sum();
            assert!((row.roll_vol_20 - (ss / 19.0).sqrt()).abs() < 1e-12);

            // ewma: explicit weighted sum, expanding-mean deviations
            let lam = EWMA_LAMBDA;
            let mut devs = Vec::new();
            for t in 1..=i {
                let m: f64 = (1..=t).map(r).sum::<f64>() / t as f64;
                devs.push(r(t) - m);
            }
            let mut var = devs[0] * devs[0] * lam.powi(i as i32 - 1);
            for (k, d) in devs.iter().enumerate().skip(1) {
                var += (1.0 - lam) * lam.powi((i - 1 - k) as i32) * d * d;
            }
            assert!(
                (row.ewma_vol_20 - var.sqrt()).abs() < 1e-12,
                "ewma mismatch at bar {i}"
            );

            // drawdown vs explicit max
            let mut peak = f64::MIN;
            for j in i - 59..=i {
                peak = peak.max(bars[j].close);
            }
            assert!((row.drawdown_60 - (bars[i].close / peak - 1.0)).abs() < 1e-15);

            // vix transforms
            assert!((row.vix_daily - s.vix[i] / (100.0 * 252f64.sqrt())).abs() < 1e-15);
            assert!((row.vix_pct_change - (s.vix[i] / s.vix[i - 1] - 1.0)).abs() < 1e-15);

            // volume z-score
            let logs: Vec<f64> = (i - 19..=i).map(|j| bars[j].volume.ln()).collect();
            let lm = logs.iter().sum::<f64>() / 20.0;
            let lsd = (logs.iter().map(|x| (x - lm) * (x - lm)).sum::<f64>() / 19.0).sqrt();
            assert!((row.log_volume - bars[i].volume.ln()).abs() < 1e-15);
            assert!((row.volume_z_20 - (bars[i].volume.ln() - lm) / lsd).abs() < 1e-12);
        }
    }

    #[test]
    fn no_lookahead_in_features() {
        // dropping the last bar changes nothing on earlier dates
        let s = wobbly_series(120);
        let full = build_features(&s).unwrap();
        let mut shorter = s.clone();
        shorter.bars.pop();
        shorter.vix.pop();
        let cut = build_features(&shorter).unwrap();
        assert_eq!(cut.len(), full.len() - 1);
        for (a, b) in cut.rows.iter().zip(full.rows.iter()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rolling_volume_zscore_restandardizes_to_unit_moments() {
        let s = wobbly_series(110);
        let bars = &s.bars;
        for i in FIRST_ROW_BAR..bars.len() - 1 {
            let logs: Vec<f64> = (i - 19..=i).map(|j| bars[j].volume.ln()).collect();
            let m = mean(&logs);
            let sd = sample_sd(&logs);
            if sd > 0.0 {
                let z: Vec<f64> = logs.iter().map(|x| (x - m) / sd).collect();
                assert!(mean(&z).abs() < 1e-12);
                assert!((sample_sd(&z) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn garch_proxy_fill_keeps_fallback_when_history_short() {
        let s = wobbly_series(120);
        let (panel, fallbacks) = prepare_panel(&s, 252, 11).unwrap();
        // 120 bars < 252 lookback: everything stays on the EWMA fallback
        assert_eq!(fallbacks, panel.len());
        for r in &panel.rows {
            assert_eq!(r.garch_vol_proxy, r.ewma_vol_20);
        }
    }
}
