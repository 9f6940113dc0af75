//! Reported metrics and statistical backtests.

pub mod backtests;
pub mod distortion;
pub mod theory;

use serde::Serialize;
use thiserror::Error;

use crate::engine::ForecastRecord;
use crate::stats::pinball;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("series too short: need more than {need}, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("unsupported conditional law")]
    BadDistribution,
}

/// Exceedance frequency: the mean of the hit indicators.
pub fn exceedance(hits: &[bool]) -> f64 {
    if hits.is_empty() {
        return 0.0;
    }
    hits.iter().filter(|&&h| h).count() as f64 / hits.len() as f64
}

/// Exceedance restricted to flagged dates. Returns `None` (with the paper's
/// explicit empty-subset marker semantics) when nothing is flagged.
pub fn stress_exceedance(hits: &[bool], flags: &[bool]) -> Option<f64> {
    debug_assert_eq!(hits.len(), flags.len());
    let n = flags.iter().filter(|&&f| f).count();
    if n == 0 {
        return None;
    }
    let x = hits
        .iter()
        .zip(flags.iter())
        .filter(|&(_, &f)| f)
        .filter(|&(&h, _)| h)
        .count();
    Some(x as f64 / n as f64)
}

/// Mean capital proxy `max(-q, 0)`.
pub fn avg_capital(forecasts: &[f64]) -> f64 {
    if forecasts.is_empty() {
        return 0.0;
    }
    forecasts.iter().map(|&q| (-q).max(0.0)).sum::<f64>() / forecasts.len() as f64
}

/// Mean quantile tick (pinball) loss.
pub fn tick_loss(targets: &[f64], forecasts: &[f64], alpha: f64) -> Result<f64, EvalError> {
    if targets.len() != forecasts.len() {
        return Err(EvalError::LengthMismatch(targets.len(), forecasts.len()));
    }
    if targets.is_empty() {
        return Ok(0.0);
    }
    Ok(targets
        .iter()
        .zip(forecasts.iter())
        .map(|(&y, &q)| pinball(y, q, alpha))
        .sum::<f64>()
        / targets.len() as f64)
}

/// Outcome of one coverage test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TestVerdict {
    pub statistic: f64,
    pub p_value: f64,
    /// true when the test is NOT rejected at the 5% level
    pub pass: bool,
    /// degenerate-input marker (rank-deficient DQ design, too-short series)
    pub degenerate: bool,
}

/// Pooled or per-cell summary of a record stream.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsSummary {
    pub n: usize,
    pub exceedance: f64,
    pub stress_n: usize,
    pub stress_exceedance: Option<f64>,
    /// `stress_exceedance - alpha`
    pub stress_gap: Option<f64>,
    pub avg_capital: f64,
    pub stressed_avg_capital: Option<f64>,
    pub tick_loss: f64,
    pub uc: TestVerdict,
    pub cc: TestVerdict,
    pub dq: TestVerdict,
}

/// Computes every reported metric from an ordered record stream.
pub fn summarize(records: &[ForecastRecord], alpha: f64) -> MetricsSummary {
    let hits: Vec<bool> = records.iter().map(|r| r.hit).collect();
    let flags: Vec<bool> = records.iter().map(|r| r.strict_stress).collect();
    let targets: Vec<f64> = records.iter().map(|r| r.y).collect();
    let forecasts: Vec<f64> = records.iter().map(|r| r.adjusted_q).collect();

    let n = records.len();
    let x = hits.iter().filter(|&&h| h).count();
    let (uc_stat, uc_p) = backtests::kupiec_uc(n.max(1), x, alpha);
    let uc = TestVerdict {
        statistic: uc_stat,
        p_value: uc_p,
        pass: uc_p > 0.05,
        degenerate: n == 0,
    };
    let cc = backtests::christoffersen_cc(&hits, alpha);
    let dq = match backtests::dq_test(&hits, &forecasts, alpha, 4) {
        Ok(d) => TestVerdict {
            statistic: d.statistic,
            p_value: d.p_value,
            pass: d.p_value > 0.05,
            degenerate: d.rank_deficient,
        },
        Err(_) => TestVerdict {
            statistic: f64::NAN,
            p_value: f64::NAN,
            pass: false,
            degenerate: true,
        },
    };

    let stress_n = flags.iter().filter(|&&f| f).count();
    let stress_exceed = stress_exceedance(&hits, &flags);
    let stressed_caps: Vec<f64> = records
        .iter()
        .filter(|r| r.strict_stress)
        .map(|r| r.adjusted_q)
        .collect();

    MetricsSummary {
        n,
        exceedance: exceedance(&hits),
        stress_n,
        stress_exceedance: stress_exceed,
        stress_gap: stress_exceed.map(|p| p - alpha),
        avg_capital: avg_capital(&forecasts),
        stressed_avg_capital: if stressed_caps.is_empty() {
            None
        } else {
            Some(avg_capital(&stressed_caps))
        },
        tick_loss: tick_loss(&targets, &forecasts, alpha).unwrap_or(f64::NAN),
        uc,
        cc,
        dq,
    }
}
