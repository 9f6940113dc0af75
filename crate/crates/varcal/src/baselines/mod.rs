//! Baseline lower-tail quantile forecasters.
//!
//! Seven families, each fitted on the training block only and asked for a
//! forecast path over the evaluation span:
//!
//! - HS: empirical alpha-quantile of training returns (constant path)
//! - FHS: standardized-by-EWMA empirical quantile, rescaled by current EWMA
//! - QR: L1-penalized linear quantile regression on the full predictor set
//! - GPQ: like FHS but standardized by the GARCH-style volatility proxy
//! - GARCH-t / GJR-GARCH-t: parametric variance recursion with unit-variance
//!   Student-t innovations
//! - AS-CAViaR: asymmetric-slope quantile recursion, multi-start pinball fit
//!
//! Parametric fits that fail fall back to HS with a diagnostic flag; no
//! baseline ever returns a non-finite forecast.

mod caviar;
mod garch_var;
mod qr;

pub use caviar::{as_caviar_forecast, CaviarFit};
pub use garch_var::{garch_quantile_path, garch_t_fit, gjr_garch_t_fit};
pub use qr::{qr_forecast, QrFit};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market_data::FeatureRow;
use crate::recalibration::{lower_quantile, PROXY_FLOOR};
use crate::stats::{mean, mix_seed, seed_of_str};

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("empty training block")]
    EmptyTrain,
    #[error("degenerate design: {0}")]
    DegenerateDesign(String),
    #[error("solver failure: {0}")]
    SolverFailure(String),
    #[error("training block too short: need {need}, got {got}")]
    TooShort { need: usize, got: usize },
}

/// The seven baseline families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Hs,
    Fhs,
    Qr,
    Gpq,
    GarchT,
    GjrGarchT,
    AsCaviar,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 7] = [
        BaselineKind::Hs,
        BaselineKind::Fhs,
        BaselineKind::Qr,
        BaselineKind::Gpq,
        BaselineKind::GarchT,
        BaselineKind::GjrGarchT,
        BaselineKind::AsCaviar,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BaselineKind::Hs => "hs",
            BaselineKind::Fhs => "fhs",
            BaselineKind::Qr => "qr",
            BaselineKind::Gpq => "gpq",
            BaselineKind::GarchT => "garch_t",
            BaselineKind::GjrGarchT => "gjr_garch_t",
            BaselineKind::AsCaviar => "as_caviar",
        }
    }

    pub fn parse(s: &str) -> Option<BaselineKind> {
        Self::ALL.iter().copied().find(|k| k.as_str() == s)
    }
}

/// A fitted forecast path with diagnostics.
#[derive(Debug, Clone)]
pub struct BaselineForecast {
    pub kind: BaselineKind,
    /// one forecast per evaluation row
    pub values: Vec<f64>,
    pub converged: bool,
    /// true when the HS fallback replaced a failed parametric fit
    pub fallback: bool,
    pub log_likelihood: Option<f64>,
    /// predictor columns dropped as degenerate (QR only)
    pub dropped_columns: usize,
}

/// Minimum training length for the recursive fits (GARCH family, CAViaR).
pub const MIN_PARAMETRIC_TRAIN: usize = 250;

/// HS: the lower empirical alpha-quantile of training returns.
pub fn hs_forecast(train_returns: &[f64], alpha: f64) -> Result<f64, BaselineError> {
    lower_quantile(train_returns, alpha).map_err(|_| BaselineError::EmptyTrain)
}

/// Volatility-scaled empirical quantile shared by FHS and GPQ:
/// `z* = Q_alpha((r_s - rbar) / vol_s)` on the training block and
/// `q_t = rbar + z* * vol_t` on the evaluation path. Volatilities are floored
/// at 1e-8.
pub fn scaled_quantile_forecast(
    train_returns: &[f64],
    train_vol: &[f64],
    eval_vol: &[f64],
    alpha: f64,
) -> Result<Vec<f64>, BaselineError> {
    if train_returns.is_empty() {
        return Err(BaselineError::EmptyTrain);
    }
    debug_assert_eq!(train_returns.len(), train_vol.len());
    let m = mean(train_returns);
    let z: Vec<f64> = train_returns
        .iter()
        .zip(train_vol.iter())
        .map(|(&r, &v)| (r - m) / v.max(PROXY_FLOOR))
        .collect();
    let zstar = lower_quantile(&z, alpha).map_err(|_| BaselineError::EmptyTrain)?;
    Ok(eval_vol
        .iter()
        .map(|&v| m + zstar * v.max(PROXY_FLOOR))
        .collect())
}

/// Everything a baseline fit may need for one forecast origin. Evaluation
/// targets are consumed only through lags (the CAViaR recursion), never at
/// the current date.
pub struct BaselineInputs<'a> {
    pub train: &'a [FeatureRow],
    pub eval: &'a [FeatureRow],
    pub alpha: f64,
    pub seed: u64,
}

/// Fits `kind` on the training rows and forecasts every evaluation row.
/// Parametric failures produce the HS fallback with `fallback = true`.
pub fn forecast(kind: BaselineKind, inp: &BaselineInputs) -> Result<BaselineForecast, BaselineError> {
    let train_y: Vec<f64> = inp.train.iter().map(|r| r.target).collect();
    if train_y.is_empty() {
        return Err(BaselineError::EmptyTrain);
    }
    let hs_value = hs_forecast(&train_y, inp.alpha)?;
    let hs_path = || vec![hs_value; inp.eval.len()];
    let fallback = |ll: Option<f64>| BaselineForecast {
        kind,
        values: hs_path(),
        converged: false,
        fallback: true,
        log_likelihood: ll,
        dropped_columns: 0,
    };
    let mut rng = rng_for(kind, inp.seed);

    let ok = |values: Vec<f64>, ll: Option<f64>, dropped: usize| BaselineForecast {
        kind,
        values,
        converged: true,
        fallback: false,
        log_likelihood: ll,
        dropped_columns: dropped,
    };

    let need_len = |need: usize| -> Option<BaselineForecast> {
        if inp.train.len() < need {
            Some(fallback(None))
        } else {
            None
        }
    };

    let f = match kind {
        BaselineKind::Hs => ok(hs_path(), None, 0),
        BaselineKind::Fhs => {
            let tv: Vec<f64> = inp.train.iter().map(|r| r.ewma_vol_20).collect();
            let ev: Vec<f64> = inp.eval.iter().map(|r| r.ewma_vol_20).collect();
            ok(scaled_quantile_forecast(&train_y, &tv, &ev, inp.alpha)?, None, 0)
        }
        BaselineKind::Gpq => {
            let tv: Vec<f64> = inp.train.iter().map(|r| r.garch_vol_proxy).collect();
            let ev: Vec<f64> = inp.eval.iter().map(|r| r.garch_vol_proxy).collect();
            ok(scaled_quantile_forecast(&train_y, &tv, &ev, inp.alpha)?, None, 0)
        }
        BaselineKind::Qr => {
            let tx: Vec<[f64; 15]> = inp.train.iter().map(|r| r.predictors()).collect();
            let ex: Vec<[f64; 15]> = inp.eval.iter().map(|r| r.predictors()).collect();
            match qr_forecast(&tx, &train_y, &ex, inp.alpha) {
                Ok(fit) => ok(fit.values, None, fit.dropped_columns),
                Err(BaselineError::SolverFailure(_)) => fallback(None),
                Err(e) => return Err(e),
            }
        }
        BaselineKind::GarchT => match need_len(MIN_PARAMETRIC_TRAIN) {
            Some(f) => f,
            None => match garch_t_fit(&train_y, &mut rng) {
                Some(fit) => {
                    let path = garch_quantile_path(&fit, inp.eval.len(), inp.alpha);
                    ok(path, Some(fit.log_likelihood), 0)
                }
                None => fallback(None),
            },
        },
        BaselineKind::GjrGarchT => match need_len(MIN_PARAMETRIC_TRAIN) {
            Some(f) => f,
            None => match gjr_garch_t_fit(&train_y, &mut rng) {
                Some(fit) => {
                    let path = garch_quantile_path(&fit, inp.eval.len(), inp.alpha);
                    ok(path, Some(fit.log_likelihood), 0)
                }
                None => fallback(None),
            },
        },
        BaselineKind::AsCaviar => match need_len(MIN_PARAMETRIC_TRAIN) {
            Some(f) => f,
            None => {
                let eval_y: Vec<f64> = inp.eval.iter().map(|r| r.target).collect();
                let fit = as_caviar_forecast(&train_y, &eval_y, inp.alpha, 20, &mut rng);
                BaselineForecast {
                    kind,
                    values: fit.values,
                    converged: fit.converged,
                    fallback: false,
                    log_likelihood: Some(-fit.loss),
                    dropped_columns: 0,
                }
            }
        },
    };
    debug_assert!(f.values.iter().all(|v| v.is_finite()));
    Ok(f)
}

fn rng_for(kind: BaselineKind, seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(mix_seed(&[seed, seed_of_str(kind.as_str())]))
}
