//! Market-state construction: the composite volatility proxy, regime labels,
//! stress flags, and the underreacting-proxy distortion.
//!
//! Every threshold (component medians, regime cutoffs, stress percentiles) is
//! computed on a training index set only and then applied to evaluation
//! dates, so nothing here looks ahead of the forecast origin.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::garch::{self, Innovations};
use crate::recalibration::PROXY_FLOOR;
use crate::stats::{mix_seed, percentile};

#[derive(Debug, Error, PartialEq)]
pub enum StateError {
    #[error("input must be positive, got {0}")]
    NonpositiveInput(f64),
    #[error("empty training window")]
    EmptyTrainWindow,
    #[error("kappa must lie in the open interval (0, 1), got {0}")]
    BadKappa(f64),
}

/// Three-bin VIX regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    Low,
    Mid,
    High,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Low => "low",
            Regime::Mid => "mid",
            Regime::High => "high",
        }
    }
}

/// Composite volatility proxy on an evaluation span, together with the
/// training-window medians that anchored it.
#[derive(Debug, Clone, PartialEq)]
pub struct VolProxySeries {
    pub values: Vec<f64>,
    pub medians: [f64; 3],
}

/// Relaxation audit of the selection-stress thresholding.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SelectionStressAudit {
    /// percentile actually used after relaxation, in [50, 70]
    pub percentile: f64,
    pub flagged: usize,
    /// true when the walk-down reached the 50th percentile without hitting
    /// the minimum count
    pub exhausted: bool,
}

/// Converts a VIX index level to a daily implied-volatility scale,
/// `vix / (100 * sqrt(252))`.
pub fn vix_to_daily(vix_level: f64) -> Result<f64, StateError> {
    if vix_level <= 0.0 {
        return Err(StateError::NonpositiveInput(vix_level));
    }
    Ok(vix_level / (100.0 * 252f64.sqrt()))
}

/// Per-date one-step-ahead conditional volatility from Gaussian GARCH(1,1)
/// fits on a trailing window of `lookback` returns. Dates with fewer than
/// `lookback` returns of history, and dates where the fit fails, fall back to
/// the supplied EWMA volatility. Returns the series (aligned with `returns`)
/// and the number of fallback dates.
pub fn garch_proxy_series(
    returns: &[f64],
    ewma_fallback: &[f64],
    lookback: usize,
    seed: u64,
) -> (Vec<f64>, usize) {
    use rayon::prelude::*;
    assert_eq!(returns.len(), ewma_fallback.len());
    let n = returns.len();
    let out: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|t| {
            if t + 1 < lookback {
                return f64::NAN; // marks fallback
            }
            let window = &returns[t + 1 - lookback..=t];
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 0x6a5c, t as u64]));
            match garch::fit(window, false, Innovations::Gaussian, &mut rng) {
                Some(fit) => {
                    let v = fit.variance_path(1)[0];
                    if v.is_finite() && v > 0.0 {
                        v.sqrt()
                    } else {
                        f64::NAN
                    }
                }
                None => f64::NAN,
            }
        })
        .collect();
    let mut fallbacks = 0;
    let filled: Vec<f64> = out
        .iter()
        .zip(ewma_fallback.iter())
        .map(|(&v, &e)| {
            if v.is_nan() {
                fallbacks += 1;
                e
            } else {
                v
            }
        })
        .collect();
    (filled, fallbacks)
}

/// Median-anchored composite proxy. Component medians are taken over
/// `train_idx`, each component is normalized by its median, and the average
/// is re-anchored to the first component's median:
///
/// ```text
/// m_j = max(median_train(c_j), 1e-8)
/// v_t = ((c1/m1 + c2/m2 + c3/m3) / 3) * m1,   floored at 1e-8
/// ```
pub fn composite_proxy(
    c1: &[f64],
    c2: &[f64],
    c3: &[f64],
    train_idx: &[usize],
    eval_idx: &[usize],
) -> Result<VolProxySeries, StateError> {
    if train_idx.is_empty() {
        return Err(StateError::EmptyTrainWindow);
    }
    let med = |c: &[f64]| -> f64 {
        let vals: Vec<f64> = train_idx.iter().map(|&i| c[i]).collect();
        percentile(&vals, 0.5).max(PROXY_FLOOR)
    };
    let m = [med(c1), med(c2), med(c3)];
    let values = eval_idx
        .iter()
        .map(|&t| {
            let v = (c1[t] / m[0] + c2[t] / m[1] + c3[t] / m[2]) / 3.0 * m[0];
            v.max(PROXY_FLOOR)
        })
        .collect();
    Ok(VolProxySeries { values, medians: m })
}

/// Regime thresholds from the training window: (median, 80th percentile) of
/// the VIX daily volatility.
pub fn regime_thresholds(vix_daily: &[f64], train_idx: &[usize]) -> Result<(f64, f64), StateError> {
    if train_idx.is_empty() {
        return Err(StateError::EmptyTrainWindow);
    }
    let vals: Vec<f64> = train_idx.iter().map(|&i| vix_daily[i]).collect();
    Ok((percentile(&vals, 0.5), percentile(&vals, 0.8)))
}

/// Labels evaluation dates against training-window thresholds. Values below
/// the median are low, values above the 80th percentile are high, and both
/// boundaries belong to mid.
pub fn regime_labels(
    vix_daily: &[f64],
    train_idx: &[usize],
    eval_idx: &[usize],
) -> Result<Vec<Regime>, StateError> {
    let (median, p80) = regime_thresholds(vix_daily, train_idx)?;
    Ok(eval_idx
        .iter()
        .map(|&t| {
            let v = vix_daily[t];
            if v < median {
                Regime::Low
            } else if v > p80 {
                Regime::High
            } else {
                Regime::Mid
            }
        })
        .collect())
}

/// Strict stress flag: VIX daily vol at or above the training 90th percentile
/// AND drawdown at or below the training 30th percentile (both weak
/// inequalities).
pub fn strict_stress_flags(
    vix_daily: &[f64],
    drawdown: &[f64],
    train_idx: &[usize],
    eval_idx: &[usize],
) -> Result<Vec<bool>, StateError> {
    if train_idx.is_empty() {
        return Err(StateError::EmptyTrainWindow);
    }
    let vix_train: Vec<f64> = train_idx.iter().map(|&i| vix_daily[i]).collect();
    let dd_train: Vec<f64> = train_idx.iter().map(|&i| drawdown[i]).collect();
    let q90 = percentile(&vix_train, 0.9);
    let q30 = percentile(&dd_train, 0.3);
    Ok(eval_idx
        .iter()
        .map(|&t| vix_daily[t] >= q90 && drawdown[t] <= q30)
        .collect())
}

/// Selection-stage stress flags with threshold relaxation: start at the
/// training 70th percentile of VIX daily vol and walk down in 5-point steps
/// (floor: 50th percentile) until at least `min_count` evaluation dates are
/// flagged or the floor is reached.
pub fn selection_stress_flags(
    vix_daily: &[f64],
    train_idx: &[usize],
    eval_idx: &[usize],
    min_count: usize,
) -> Result<(Vec<bool>, SelectionStressAudit), StateError> {
    if train_idx.is_empty() {
        return Err(StateError::EmptyTrainWindow);
    }
    assert!(min_count >= 1, "min_count must be at least 1");
    let vix_train: Vec<f64> = train_idx.iter().map(|&i| vix_daily[i]).collect();
    let mut pct = 70.0;
    loop {
        let thr = percentile(&vix_train, pct / 100.0);
        let flags: Vec<bool> = eval_idx.iter().map(|&t| vix_daily[t] >= thr).collect();
        let count = flags.iter().filter(|&&f| f).count();
        if count >= min_count || pct <= 50.0 {
            return Ok((
                flags,
                SelectionStressAudit {
                    percentile: pct,
                    flagged: count,
                    exhausted: count < min_count,
                },
            ));
        }
        pct -= 5.0;
    }
}

/// Stress-only multiplicative underreaction: `v <- kappa * v` on flagged
/// dates, floor re-applied. `kappa` must lie strictly inside (0, 1).
pub fn apply_underreaction(
    proxy: &VolProxySeries,
    strict_stress: &[bool],
    kappa: f64,
) -> Result<VolProxySeries, StateError> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(StateError::BadKappa(kappa));
    }
    assert_eq!(proxy.values.len(), strict_stress.len());
    let values = proxy
        .values
        .iter()
        .zip(strict_stress.iter())
        .map(|(&v, &s)| if s { (kappa * v).max(PROXY_FLOOR) } else { v })
        .collect();
    Ok(VolProxySeries {
        values,
        medians: proxy.medians,
    })
}
