//! Parametric GARCH-t and GJR-GARCH-t quantile paths.
//!
//! The variance model is fitted on the training block; the forecast over the
//! evaluation span is the multi-step variance recursion (squared-innovation
//! expectations) mapped through the fitted unit-variance Student-t quantile:
//!
//! ```text
//! q_{t+h} = mu + sqrt(h_{t+h}) * t_inv_nu(alpha) * sqrt((nu-2)/nu)
//! ```

use rand_chacha::ChaCha8Rng;

use crate::garch::{self, GarchFit, Innovations};
use crate::stats::special::student_t_ppf;

/// Constant-mean GARCH(1,1) with unit-variance Student-t innovations.
pub fn garch_t_fit(train_returns: &[f64], rng: &mut ChaCha8Rng) -> Option<GarchFit> {
    garch::fit(train_returns, false, Innovations::StudentT, rng)
}

/// Constant-mean GJR-GARCH(1,1) with unit-variance Student-t innovations.
pub fn gjr_garch_t_fit(train_returns: &[f64], rng: &mut ChaCha8Rng) -> Option<GarchFit> {
    garch::fit(train_returns, true, Innovations::StudentT, rng)
}

/// Lower-tail quantile path over `horizon` steps from a fitted model. For
/// Gaussian fits the standard normal quantile is used instead of the
/// rescaled Student-t one.
pub fn garch_quantile_path(fit: &GarchFit, horizon: usize, alpha: f64) -> Vec<f64> {
    let z = match fit.nu {
        Some(nu) => student_t_ppf(alpha, nu) * ((nu - 2.0) / nu).sqrt(),
        None => crate::stats::special::norm_ppf(alpha),
    };
    fit.variance_path(horizon)
        .into_iter()
        .map(|h| fit.mean + h.sqrt() * z)
        .collect()
}
