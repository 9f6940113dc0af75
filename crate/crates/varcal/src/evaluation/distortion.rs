//! Conditional exceedance distortion under stress-specific proxy
//! underreaction, for known conditional laws.
//!
//! With the clean forecast conditionally exact at the alpha-quantile `q*` and
//! the adjustment magnitude matched at `a` across reliance levels, shrinking
//! the proxy by `kappa` moves the forecast to `q* + a (1 - kappa^rho)` and
//! the exceedance probability to
//!
//! ```text
//! delta(rho) = F(q* + a (1 - kappa^rho)) - alpha
//! ```
//!
//! which is zero at `rho = 0` and nondecreasing in `rho`, sandwiched by the
//! density extrema on the bracketing interval.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::stats::special::{norm_cdf, norm_pdf, norm_ppf, student_t_cdf, student_t_pdf, student_t_ppf};

/// Supported conditional laws (analytic CDF required).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailLaw {
    Gaussian,
    StudentT { nu: f64 },
}

impl TailLaw {
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            TailLaw::Gaussian => norm_cdf(x),
            TailLaw::StudentT { nu } => student_t_cdf(x, nu),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        match *self {
            TailLaw::Gaussian => norm_pdf(x),
            TailLaw::StudentT { nu } => student_t_pdf(x, nu),
        }
    }

    pub fn ppf(&self, p: f64) -> f64 {
        match *self {
            TailLaw::Gaussian => norm_ppf(p),
            TailLaw::StudentT { nu } => student_t_ppf(p, nu),
        }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        match *self {
            TailLaw::Gaussian => z,
            TailLaw::StudentT { nu } => {
                let w: f64 = Gamma::new(nu / 2.0, 2.0).unwrap().sample(rng);
                z * (nu / w).sqrt()
            }
        }
    }

    /// Density extrema over `[lo, hi]`: both laws are unimodal at zero, so
    /// the extrema sit at the endpoints or at the mode when it is interior.
    pub fn density_extrema(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (a, b) = (self.pdf(lo), self.pdf(hi));
        let fmin = a.min(b);
        let fmax = if lo <= 0.0 && 0.0 <= hi {
            self.pdf(0.0)
        } else {
            a.max(b)
        };
        (fmin, fmax)
    }
}

/// The analytic distortion curve, optionally verified by Monte Carlo.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistortionCurve {
    pub law: TailLaw,
    pub alpha: f64,
    pub a_t: f64,
    pub kappa: f64,
    pub rho_grid: Vec<f64>,
    /// analytic `delta(rho)`
    pub delta: Vec<f64>,
    /// binomial standard errors at the analytic exceedance level; exactly 0
    /// at `rho = 0` where no distortion exists
    pub se: Vec<f64>,
    /// Monte Carlo estimates when draws were requested
    pub mc_delta: Option<Vec<f64>>,
    pub draws: usize,
}

/// Evaluates the curve on `rho_grid`. When `draws > 0` a Monte Carlo
/// verification pass is included.
pub fn distortion_curve(
    law: TailLaw,
    alpha: f64,
    a_t: f64,
    kappa: f64,
    rho_grid: &[f64],
    draws: usize,
    seed: u64,
) -> Result<DistortionCurve, EvalError> {
    if let TailLaw::StudentT { nu } = law {
        if !(nu > 0.0) {
            return Err(EvalError::BadDistribution);
        }
    }
    assert!(a_t > 0.0, "adjustment magnitude must be positive");
    assert!(kappa > 0.0 && kappa < 1.0, "kappa must lie in (0,1)");
    let q_star = law.ppf(alpha);
    let delta: Vec<f64> = rho_grid
        .iter()
        .map(|&rho| {
            if rho == 0.0 {
                0.0
            } else {
                law.cdf(q_star + a_t * (1.0 - kappa.powf(rho))) - alpha
            }
        })
        .collect();
    let se: Vec<f64> = rho_grid
        .iter()
        .zip(delta.iter())
        .map(|(&rho, &d)| {
            if rho == 0.0 {
                0.0
            } else {
                let p = alpha + d;
                (p * (1.0 - p) / draws.max(1) as f64).sqrt()
            }
        })
        .collect();
    let mc_delta = if draws > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..draws).map(|_| law.sample(&mut rng)).collect();
        Some(
            rho_grid
                .iter()
                .map(|&rho| {
                    let q = q_star + a_t * (1.0 - kappa.powf(rho));
                    let hits = samples.iter().filter(|&&y| y <= q).count();
                    hits as f64 / draws as f64 - alpha
                })
                .collect(),
        )
    } else {
        None
    };
    Ok(DistortionCurve {
        law,
        alpha,
        a_t,
        kappa,
        rho_grid: rho_grid.to_vec(),
        delta,
        se,
        mc_delta,
        draws,
    })
}

impl DistortionCurve {
    /// Checks the density-extrema sandwich at every grid point.
    pub fn bounds_hold(&self) -> bool {
        let q_star = self.law.ppf(self.alpha);
        self.rho_grid.iter().zip(self.delta.iter()).all(|(&rho, &d)| {
            let shift = self.a_t * (1.0 - self.kappa.powf(rho));
            if rho == 0.0 {
                return d == 0.0;
            }
            let (fmin, fmax) = self.law.density_extrema(q_star, q_star + shift);
            fmin * shift <= d + 1e-12 && d <= fmax * shift + 1e-12
        })
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.delta.windows(2).all(|w| w[1] >= w[0] - 1e-15)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Vec<f64> {
        (0..=10).map(|i| i as f64 / 10.0).collect()
    }

    #[test]
    fn gaussian_anchor_value() {
        // frozen oracle: Phi(Phi^-1(0.05) + 0.3) - 0.05
        let c = distortion_curve(TailLaw::Gaussian, 0.05, 0.5, 0.4, &grid(), 0, 0).unwrap();
        assert_eq!(c.delta[0], 0.0);
        let want = 0.0393362541096509350740797811588;
        assert!((c.delta[10] - want).abs() < 1e-9, "delta(1) = {}", c.delta[10]);
        // intermediate anchor at rho = 0.5
        let want_half = 0.0219965529621566005619362452784;
        assert!((c.delta[5] - want_half).abs() < 1e-9);
    }

    #[test]
    fn student_t_anchor_value() {
        let c = distortion_curve(TailLaw::StudentT { nu: 5.0 }, 0.05, 0.5, 0.4, &grid(), 0, 0)
            .unwrap();
        let want = 0.0234986617464006527668955466919;
        assert!((c.delta[10] - want).abs() < 1e-9, "delta(1) = {}", c.delta[10]);
    }

    #[test]
    fn curve_is_zero_at_rho_zero_and_monotone() {
        for law in [TailLaw::Gaussian, TailLaw::StudentT { nu: 5.0 }] {
            for a in [0.25, 0.5, 1.0] {
                for kappa in [0.2, 0.4, 0.8] {
                    let c = distortion_curve(law, 0.05, a, kappa, &grid(), 0, 0).unwrap();
                    assert_eq!(c.delta[0], 0.0);
                    assert!(c.is_nondecreasing(), "{law:?} a={a} kappa={kappa}");
                    assert!(c.bounds_hold(), "{law:?} a={a} kappa={kappa}");
                    // strictly increasing off zero (positive density)
                    for w in c.delta.windows(2) {
                        assert!(w[1] > w[0]);
                    }
                }
            }
        }
    }

    #[test]
    fn kappa_near_one_kills_the_distortion() {
        let c = distortion_curve(TailLaw::Gaussian, 0.05, 0.5, 0.999_999, &grid(), 0, 0).unwrap();
        for d in &c.delta {
            assert!(d.abs() < 1e-4);
        }
    }

    #[test]
    fn monte_carlo_agrees_within_three_ses() {
        let c = distortion_curve(TailLaw::Gaussian, 0.05, 0.5, 0.4, &grid(), 200_000, 9).unwrap();
        let mc = c.mc_delta.as_ref().unwrap();
        for i in 0..c.rho_grid.len() {
            if c.rho_grid[i] == 0.0 {
                // no distortion at rho = 0: only binomial noise around alpha
                let se0 = (0.05 * 0.95 / 200_000.0f64).sqrt();
                assert!(mc[i].abs() <= 4.0 * se0, "mc at rho 0: {}", mc[i]);
                continue;
            }
            assert!(c.se[i] > 0.0);
            let dev = (mc[i] - c.delta[i]).abs();
            assert!(
                dev <= 3.0 * c.se[i] + 1e-12,
                "rho {}: |{} - {}| > 3 * {}",
                c.rho_grid[i],
                mc[i],
                c.delta[i],
                c.se[i]
            );
        }
    }

    #[test]
    fn density_extrema_handle_mode_crossing() {
        let law = TailLaw::Gaussian;
        // interval strictly in the left tail: increasing density
        let (fmin, fmax) = law.density_extrema(-2.0, -1.0);
        assert_eq!(fmin, law.pdf(-2.0));
        assert_eq!(fmax, law.pdf(-1.0));
        // interval across the mode: max at zero
        let (fmin, fmax) = law.density_extrema(-1.0, 2.0);
        assert_eq!(fmax, law.pdf(0.0));
        assert_eq!(fmin, law.pdf(2.0));
    }

    #[test]
    fn bad_distribution_is_rejected() {
        assert!(matches!(
            distortion_curve(TailLaw::StudentT { nu: -1.0 }, 0.05, 0.5, 0.4, &grid(), 0, 0),
            Err(EvalError::BadDistribution)
        ));
    }
}
