//! Conformal recalibration with controlled proxy reliance.
//!
//! A baseline lower-tail quantile forecast `q` is corrected by a shift
//! `c * v^rho`, where `v > 0` is a volatility proxy and `rho` in `[0, 1]`
//! controls how strongly the correction inherits the proxy scale:
//!
//! ```text
//! residual   u_s = (Y_s - q_s) / v_s^rho          (calibration dates s)
//! constant   c   = lower empirical alpha-quantile of {u_s}
//! forecast   q_t + c * v_t^rho
//! ```
//!
//! `rho = 0` is an (approximately) constant shift and is exactly invariant to
//! any proxy distortion; `rho = 1` fully rescales with the proxy. A rule may
//! also be a monotone per-regime tuple `(rho_low >= rho_mid >= rho_high)`,
//! expressing weaker proxy trust in more stressed states.
//!
//! The lower empirical quantile here is the order statistic
//! `k = max(1, floor(alpha * (n + 1)))`, which is positively homogeneous —
//! the property the uniform-rescaling invariance of the final forecast rests
//! on.

use thiserror::Error;

use crate::state_model::Regime;

/// Proxies are floored at this value everywhere before exponentiation.
pub const PROXY_FLOOR: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum RecalError {
    #[error("empty sample")]
    EmptySample,
    #[error("regime label required for a per-regime rule")]
    MissingRegime,
    #[error("proxy must be positive, got {0}")]
    NonpositiveProxy(f64),
    #[error("proxy ordering violated: expected v_high > v_low > 0")]
    BadOrdering,
    #[error("reliance exponent {0} outside [0, 1]")]
    BadReliance(f64),
}

/// A recalibration rule: scalar reliance or a monotone per-regime tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RecalRule {
    Scalar(f64),
    RegimeTuple { low: f64, mid: f64, high: f64 },
}

impl RecalRule {
    /// Validates the `[0, 1]` range and, for tuples, the monotonicity
    /// `low >= mid >= high`.
    pub fn validate(&self) -> Result<(), RecalError> {
        match *self {
            RecalRule::Scalar(r) => {
                if !(0.0..=1.0).contains(&r) {
                    return Err(RecalError::BadReliance(r));
                }
            }
            RecalRule::RegimeTuple { low, mid, high } => {
                for r in [low, mid, high] {
                    if !(0.0..=1.0).contains(&r) {
                        return Err(RecalError::BadReliance(r));
                    }
                }
                if !(low >= mid && mid >= high) {
                    return Err(RecalError::BadOrdering);
                }
            }
        }
        Ok(())
    }

    /// The reliance exponent effective on a date with regime `g`.
    pub fn effective(&self, g: Option<Regime>) -> Result<f64, RecalError> {
        match *self {
            RecalRule::Scalar(r) => Ok(r),
            RecalRule::RegimeTuple { low, mid, high } => match g {
                Some(Regime::Low) => Ok(low),
                Some(Regime::Mid) => Ok(mid),
                Some(Regime::High) => Ok(high),
                None => Err(RecalError::MissingRegime),
            },
        }
    }

    /// Exponents as a `(low, mid, high)` triple; a scalar repeats its value.
    pub fn as_tuple(&self) -> (f64, f64, f64) {
        match *self {
            RecalRule::Scalar(r) => (r, r, r),
            RecalRule::RegimeTuple { low, mid, high } => (low, mid, high),
        }
    }
}

/// A rule with its fitted recalibration constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibratedRule {
    pub rule: RecalRule,
    /// lower empirical alpha-quantile of the calibration residuals
    pub c: f64,
    pub calib_size: usize,
}

/// `v^rho` with the floor applied first; `rho == 0` short-circuits to exactly
/// 1 so that zero-reliance paths are bit-identical under any proxy
/// distortion.
pub fn proxy_power(v: f64, rho: f64) -> f64 {
    if rho == 0.0 {
        return 1.0;
    }
    let v = v.max(PROXY_FLOOR);
    if rho == 1.0 {
        return v;
    }
    (rho * v.ln()).exp()
}

/// Lower empirical alpha-quantile: the k-th smallest element with
/// `k = max(1, floor(alpha * (n + 1)))`. Positively homogeneous and monotone.
pub fn lower_quantile(sample: &[f64], alpha: f64) -> Result<f64, RecalError> {
    if sample.is_empty() {
        return Err(RecalError::EmptySample);
    }
    debug_assert!(alpha > 0.0 && alpha < 0.5, "alpha outside (0, 0.5)");
    let n = sample.len();
    let k = ((alpha * (n as f64 + 1.0)).floor() as usize).max(1).min(n);
    let mut v = sample.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(k - 1, |a, b| {
        a.partial_cmp(b).expect("non-finite residual")
    });
    Ok(*kth)
}

/// Signed lower-tail residuals `(Y_s - q_s) / v_s^rho_eff(s)`.
///
/// For per-regime rules a regime label is required on every date.
pub fn signed_residuals(
    targets: &[f64],
    baselines: &[f64],
    proxies: &[f64],
    rule: &RecalRule,
    regimes: Option<&[Regime]>,
) -> Result<Vec<f64>, RecalError> {
    let n = targets.len();
    debug_assert!(baselines.len() == n && proxies.len() == n);
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        let g = regimes.map(|r| r[s]);
        let rho = rule.effective(g)?;
        out.push((targets[s] - baselines[s]) / proxy_power(proxies[s], rho));
    }
    Ok(out)
}

/// Fits the recalibration constant of `rule` on a calibration block.
pub fn calibrate(
    rule: &RecalRule,
    targets: &[f64],
    baselines: &[f64],
    proxies: &[f64],
    regimes: Option<&[Regime]>,
    alpha: f64,
) -> Result<CalibratedRule, RecalError> {
    let u = signed_residuals(targets, baselines, proxies, rule, regimes)?;
    let c = lower_quantile(&u, alpha)?;
    Ok(CalibratedRule {
        rule: *rule,
        c,
        calib_size: u.len(),
    })
}

/// One-step recalibrated forecast `q_t + c * v_t^rho_eff(t)`.
pub fn apply(
    cal: &CalibratedRule,
    baseline_q: f64,
    proxy: f64,
    regime: Option<Regime>,
) -> Result<f64, RecalError> {
    let rho = cal.rule.effective(regime)?;
    Ok(baseline_q + cal.c * proxy_power(proxy, rho))
}

/// The signed adjustment `c * v^rho` in isolation.
pub fn adjustment(v: f64, c: f64, rho: f64) -> Result<f64, RecalError> {
    if v <= 0.0 {
        return Err(RecalError::NonpositiveProxy(v));
    }
    Ok(c * proxy_power(v, rho))
}

/// Cross-state contrast `(v_high / v_low)^rho`; equals 1 at `rho = 0` and
/// `v_high / v_low` at `rho = 1`.
pub fn contrast_ratio(v_high: f64, v_low: f64, rho: f64) -> Result<f64, RecalError> {
    if !(v_high > v_low && v_low > 0.0) {
        return Err(RecalError::BadOrdering);
    }
    if rho == 0.0 {
        return Ok(1.0);
    }
    if rho == 1.0 {
        return Ok(v_high / v_low);
    }
    Ok((rho * (v_high / v_low).ln()).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lower_quantile_order_statistics() {
        // n = 19, alpha = 0.05: floor(0.05 * 20) = 1 -> minimum
        let v: Vec<f64> = (1..=19).map(|i| i as f64).collect();
        assert_eq!(lower_quantile(&v, 0.05).unwrap(), 1.0);
        // n = 126: floor(0.05 * 127) = 6 -> 6th smallest
        let v: Vec<f64> = (1..=126).rev().map(|i| i as f64).collect();
        assert_eq!(lower_quantile(&v, 0.05).unwrap(), 6.0);
        // singleton
        assert_eq!(lower_quantile(&[-1.0], 0.05).unwrap(), -1.0);
        assert_eq!(lower_quantile(&[-1.0], 0.4).unwrap(), -1.0);
        assert_eq!(lower_quantile(&[], 0.05), Err(RecalError::EmptySample));
    }

    #[test]
    fn residual_arithmetic() {
        // (Y - q) / v^rho = (-0.03 + 0.02) / 0.25^0.5 = -0.01 / 0.5 = -0.02
        let u = signed_residuals(&[-0.03], &[-0.02], &[0.25], &RecalRule::Scalar(0.5), None)
            .unwrap();
        assert!((u[0] + 0.02).abs() < 1e-15);
        // rho = 0 ignores the proxy entirely
        let u = signed_residuals(&[-0.03], &[-0.02], &[7.5], &RecalRule::Scalar(0.0), None)
            .unwrap();
        assert!((u[0] + 0.01).abs() < 1e-17);
        // per-regime exponent selection: high regime picks rho_high = 0
        let rule = RecalRule::RegimeTuple {
            low: 1.0,
            mid: 0.5,
            high: 0.0,
        };
        let u = signed_residuals(
            &[-0.03],
            &[-0.02],
            &[0.25],
            &rule,
            Some(&[Regime::High]),
        )
        .unwrap();
        assert!((u[0] + 0.01).abs() < 1e-17);
        // tuple without regimes is an error
        assert_eq!(
            signed_residuals(&[0.0], &[0.0], &[1.0], &rule, None),
            Err(RecalError::MissingRegime)
        );
    }

    #[test]
    fn calibrate_perfect_baseline_gives_zero() {
        let y = vec![0.01, -0.02, 0.005];
        let cal = calibrate(&RecalRule::Scalar(0.5), &y, &y, &[1.0, 2.0, 3.0], None, 0.05)
            .unwrap();
        assert_eq!(cal.c, 0.0);
        assert_eq!(cal.calib_size, 3);
    }

    #[test]
    fn calibrate_picks_sixth_smallest_at_n126() {
        let q = vec![0.0; 126];
        let v = vec![1.0; 126];
        let y: Vec<f64> = (1..=126).map(|i| -(i as f64)).collect();
        let cal = calibrate(&RecalRule::Scalar(1.0), &y, &q, &v, None, 0.05).unwrap();
        // residuals are -1..-126; 6th smallest is -121
        assert_eq!(cal.c, -121.0);
    }

    #[test]
    fn apply_cases() {
        let cal = CalibratedRule {
            rule: RecalRule::Scalar(0.0),
            c: -0.005,
            calib_size: 1,
        };
        assert!((apply(&cal, -0.02, 123.0, None).unwrap() + 0.025).abs() < 1e-15);
        let cal = CalibratedRule {
            rule: RecalRule::Scalar(1.0),
            c: -0.02,
            calib_size: 1,
        };
        assert!((apply(&cal, -0.01, 0.5, None).unwrap() + 0.02).abs() < 1e-15);
        let cal = CalibratedRule {
            rule: RecalRule::Scalar(0.7),
            c: 0.0,
            calib_size: 1,
        };
        assert_eq!(apply(&cal, -0.033, 0.4, None).unwrap(), -0.033);
    }

    #[test]
    fn adjustment_and_contrast() {
        // homogeneity at rho = 1: A(3v) = 3 A(v)
        let a1 = adjustment(2.0, -0.5, 1.0).unwrap();
        let a3 = adjustment(6.0, -0.5, 1.0).unwrap();
        assert!((a3 - 3.0 * a1).abs() < 1e-12);
        // rho = 0 is constant
        assert_eq!(adjustment(0.123, -0.5, 0.0).unwrap(), -0.5);
        assert_eq!(adjustment(9.0, -0.5, 0.0).unwrap(), -0.5);
        // v=4, c=-1, rho=0.5 -> -2
        assert!((adjustment(4.0, -1.0, 0.5).unwrap() + 2.0).abs() < 1e-12);
        assert_eq!(
            adjustment(0.0, -1.0, 0.5),
            Err(RecalError::NonpositiveProxy(0.0))
        );

        assert_eq!(contrast_ratio(2.0, 1.0, 0.0).unwrap(), 1.0);
        assert_eq!(contrast_ratio(3.0, 2.0, 1.0).unwrap(), 1.5);
        assert!((contrast_ratio(2.0, 1.0, 0.5).unwrap() - 1.4142135623730951).abs() < 1e-12);
        assert_eq!(contrast_ratio(1.0, 2.0, 0.5), Err(RecalError::BadOrdering));
    }

    #[test]
    fn rule_validation() {
        assert!(RecalRule::Scalar(0.5).validate().is_ok());
        assert!(RecalRule::Scalar(1.2).validate().is_err());
        assert!(RecalRule::RegimeTuple {
            low: 1.0,
            mid: 0.5,
            high: 0.0
        }
        .validate()
        .is_ok());
        assert!(RecalRule::RegimeTuple {
            low: 0.0,
            mid: 0.5,
            high: 0.0
        }
        .validate()
        .is_err());
    }

    #[test]
    fn scaling_proxies_scales_constant_by_eta_to_minus_rho() {
        let y: Vec<f64> = (0..60).map(|i| -0.01 - 0.001 * (i % 7) as f64).collect();
        let q = vec![-0.005; 60];
        let v: Vec<f64> = (0..60).map(|i| 0.01 + 0.0001 * i as f64).collect();
        let rho = 0.6;
        let eta = 3.7;
        let c0 = calibrate(&RecalRule::Scalar(rho), &y, &q, &v, None, 0.05)
            .unwrap()
            .c;
        let v_scaled: Vec<f64> = v.iter().map(|x| x * eta).collect();
        let c1 = calibrate(&RecalRule::Scalar(rho), &y, &q, &v_scaled, None, 0.05)
            .unwrap()
            .c;
        assert!((c1 - eta.powf(-rho) * c0).abs() < 1e-12 * c0.abs());
    }

    proptest! {
        // Positive homogeneity of the lower quantile.
        #[test]
        fn prop_lower_quantile_homogeneous(
            sample in proptest::collection::vec(-1.0f64..1.0, 1..200),
            lambda in 0.01f64..100.0,
            alpha in 0.01f64..0.49,
        ) {
            let q = lower_quantile(&sample, alpha).unwrap();
            let scaled: Vec<f64> = sample.iter().map(|x| x * lambda).collect();
            let qs = lower_quantile(&scaled, alpha).unwrap();
            prop_assert!((qs - lambda * q).abs() <= 1e-12 * (1.0 + q.abs() * lambda));
        }

        // Monotonicity: raising every element cannot lower the quantile.
        #[test]
        fn prop_lower_quantile_monotone(
            sample in proptest::collection::vec(-1.0f64..1.0, 1..100),
            bump in 0.0f64..0.5,
            alpha in 0.01f64..0.49,
        ) {
            let q = lower_quantile(&sample, alpha).unwrap();
            let bumped: Vec<f64> = sample.iter().map(|x| x + bump).collect();
            let qb = lower_quantile(&bumped, alpha).unwrap();
            prop_assert!(qb >= q - 1e-12);
        }

        // Uniform proxy rescaling leaves the applied forecast unchanged.
        #[test]
        fn prop_uniform_rescaling_invariance(
            seed_vals in proptest::collection::vec((-0.05f64..0.05, 0.001f64..0.2), 10..150),
            eta in 0.1f64..10.0,
            rho_idx in 0usize..11,
        ) {
            let rho = rho_idx as f64 / 10.0;
            let y: Vec<f64> = seed_vals.iter().map(|p| p.0 - 0.01).collect();
            let q: Vec<f64> = seed_vals.iter().map(|p| p.0 * 0.5 - 0.005).collect();
            let v: Vec<f64> = seed_vals.iter().map(|p| p.1).collect();
            let v_test = 0.05;
            let rule = RecalRule::Scalar(rho);
            let cal = calibrate(&rule, &y, &q, &v, None, 0.05).unwrap();
            let f0 = apply(&cal, -0.01, v_test, None).unwrap();
            let vs: Vec<f64> = v.iter().map(|x| x * eta).collect();
            let cal_s = calibrate(&rule, &y, &q, &vs, None, 0.05).unwrap();
            let f1 = apply(&cal_s, -0.01, v_test * eta, None).unwrap();
            prop_assert!((f0 - f1).abs() <= 1e-10);
        }
    }
}
