//! Executable verification of the structural properties of reliance-scaled
//! recalibration: scale invariance and elasticity, cross-state contrast,
//! stress distortion ordering and bounds, heterogeneous-distortion direction,
//! and the screened-selector monotonicity. Each battery is deterministic
//! given a seed and usable on its own; [`run_theory_suite`] bundles them into
//! one pass/fail report.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::distortion::{distortion_curve, TailLaw};
use crate::recalibration::{
    adjustment, apply, calibrate, contrast_ratio, lower_quantile, proxy_power, RecalRule,
};
use crate::selection::idealized_screened_select;
use crate::stats::mix_seed;

/// One verified property.
#[derive(Debug, Clone, Serialize)]
pub struct TheoryCheck {
    pub name: String,
    pub passed: bool,
    pub details: String,
}

/// The full report.
#[derive(Debug, Clone, Serialize)]
pub struct TheoryReport {
    pub seed: u64,
    pub checks: Vec<TheoryCheck>,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Plain-text table, one line per check.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.checks {
            out.push_str(&format!(
                "[{}] {:<28} {}\n",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.details
            ));
        }
        out.push_str(&format!(
            "{}: {} of {} checks passed\n",
            if self.passed() { "OK" } else { "FAILED" },
            self.checks.iter().filter(|c| c.passed).count(),
            self.checks.len()
        ));
        out
    }
}

const RHO_GRID: [f64; 11] = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// A random calibration instance with a test point.
struct Instance {
    y: Vec<f64>,
    q: Vec<f64>,
    v: Vec<f64>,
    q_test: f64,
    v_test: f64,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(20..200);
    let scale = 10f64.powf(rng.gen_range(-2.0..0.5));
    let y: Vec<f64> = (0..n)
        .map(|_| scale * (rng.gen::<f64>() * 2.0 - 1.2) * 0.05)
        .collect();
    let q: Vec<f64> = (0..n)
        .map(|_| scale * (-0.02 - 0.03 * rng.gen::<f64>()))
        .collect();
    let v: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.gen_range(-3.0..0.7))).collect();
    Instance {
        y,
        q,
        v,
        q_test: scale * -0.025,
        v_test: 10f64.powf(rng.gen_range(-3.0..0.7)),
    }
}

/// Uniform proxy rescaling leaves the one-step recalibrated forecast
/// unchanged (within `tol`), for every reliance level and every rescaling
/// factor. The quantile routine is injectable so a mutation test can verify
/// the battery actually bites on non-homogeneous quantiles.
pub fn prop1_invariance_battery(
    seed: u64,
    instances: usize,
    etas: &[f64],
    tol: f64,
    quantile: &dyn Fn(&[f64], f64) -> f64,
) -> (f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 1]));
    let alpha = 0.05;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let inst = random_instance(&mut rng);
        for &rho in &RHO_GRID {
            // baseline forecast under the clean proxies
            let u: Vec<f64> = inst
                .y
                .iter()
                .zip(inst.q.iter())
                .zip(inst.v.iter())
                .map(|((&y, &q), &v)| (y - q) / proxy_power(v, rho))
                .collect();
            let c = quantile(&u, alpha);
            let f0 = inst.q_test + c * proxy_power(inst.v_test, rho);
            for &eta in etas {
                let us: Vec<f64> = inst
                    .y
                    .iter()
                    .zip(inst.q.iter())
                    .zip(inst.v.iter())
                    .map(|((&y, &q), &v)| (y - q) / proxy_power(eta * v, rho))
                    .collect();
                let cs = quantile(&us, alpha);
                let f1 = inst.q_test + cs * proxy_power(eta * inst.v_test, rho);
                worst = worst.max((f1 - f0).abs());
            }
        }
    }
    (worst, worst <= tol)
}

/// Log-scale elasticity of the adjustment magnitude equals the reliance
/// exponent exactly: `log|A(eta v)| - log|A(v)| = rho log eta`.
pub fn prop1_elasticity_battery(seed: u64, instances: usize, tol: f64) -> (f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 2]));
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let v = 10f64.powf(rng.gen_range(-3.0..1.0));
        let c = -(10f64.powf(rng.gen_range(-3.0..0.0)));
        let eta = 10f64.powf(rng.gen_range(-1.0..1.0));
        for &rho in &RHO_GRID[1..] {
            let a0 = adjustment(v, c, rho).unwrap().abs().ln();
            let a1 = adjustment(eta * v, c, rho).unwrap().abs().ln();
            worst = worst.max((a1 - a0 - rho * eta.ln()).abs());
        }
    }
    (worst, worst <= tol)
}

/// Contrast ratio endpoints and strict monotonicity across the grid.
pub fn prop2_contrast_battery(seed: u64, pairs: usize) -> (usize, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 3]));
    let mut failures = 0usize;
    for _ in 0..pairs {
        let v_low = 10f64.powf(rng.gen_range(-3.0..0.0));
        let v_high = v_low * (1.0 + rng.gen::<f64>() * 20.0 + 1e-6);
        let at0 = contrast_ratio(v_high, v_low, 0.0).unwrap();
        let at1 = contrast_ratio(v_high, v_low, 1.0).unwrap();
        if at0 != 1.0 || (at1 - v_high / v_low).abs() > 1e-15 {
            failures += 1;
            continue;
        }
        let mut prev = at0;
        for &rho in &RHO_GRID[1..] {
            let r = contrast_ratio(v_high, v_low, rho).unwrap();
            if !(r > prev) {
                failures += 1;
                break;
            }
            prev = r;
        }
    }
    (failures, failures == 0)
}

/// Forecast-level distortion sign: with `c < 0`, shrinking the test proxy by
/// `kappa` strictly raises the forecast for `rho > 0` and leaves it
/// bit-identical at `rho = 0`.
pub fn prop3_sign_battery(seed: u64, instances: usize) -> (usize, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 4]));
    let mut failures = 0usize;
    for _ in 0..instances {
        let q = -0.01 - 0.05 * rng.gen::<f64>();
        let c = -1e-3 - rng.gen::<f64>() * 0.1;
        let v = 10f64.powf(rng.gen_range(-2.0..0.7));
        let kappa = 0.05 + 0.9 * rng.gen::<f64>();
        for &rho in &RHO_GRID {
            let clean = q + c * proxy_power(v, rho);
            let mis = q + c * proxy_power(kappa * v, rho);
            if rho == 0.0 {
                if mis.to_bits() != clean.to_bits() {
                    failures += 1;
                }
            } else if !(mis > clean) {
                failures += 1;
            }
        }
    }
    (failures, failures == 0)
}

/// Analytic distortion curves: zero at the origin, nondecreasing, and inside
/// the density-extrema sandwich, for both laws and a grid of adjustment
/// magnitudes and shrink factors. Also pins the Gaussian anchor value.
pub fn corollary1_battery() -> (String, bool) {
    let grid: Vec<f64> = RHO_GRID.to_vec();
    let mut ok = true;
    let mut notes = Vec::new();
    for law in [TailLaw::Gaussian, TailLaw::StudentT { nu: 5.0 }] {
        for a in [0.25, 0.5, 1.0] {
            for kappa in [0.2, 0.4, 0.8] {
                let c = distortion_curve(law, 0.05, a, kappa, &grid, 0, 0).unwrap();
                if c.delta[0] != 0.0 {
                    ok = false;
                    notes.push(format!("{law:?} a={a} k={kappa}: delta(0) != 0"));
                }
                if !c.is_nondecreasing() {
                    ok = false;
                    notes.push(format!("{law:?} a={a} k={kappa}: not monotone"));
                }
                if !c.bounds_hold() {
                    ok = false;
                    notes.push(format!("{law:?} a={a} k={kappa}: bounds fail"));
                }
            }
        }
    }
    // Gaussian anchor fixed by the normal-CDF oracle
    let anchor = distortion_curve(TailLaw::Gaussian, 0.05, 0.5, 0.4, &grid, 0, 0).unwrap();
    let dev = (anchor.delta[10] - 0.0393362541096509350740797811588).abs();
    if dev > 1e-6 {
        ok = false;
        notes.push(format!("anchor off by {dev:.2e}"));
    }
    let details = if notes.is_empty() {
        format!("18 curves monotone within bounds; anchor dev {dev:.1e}")
    } else {
        notes.join("; ")
    };
    (details, ok)
}

/// Heterogeneous proxy distortion: per-point multipliers `d_s` on the
/// calibration proxies and `d_t` on the test proxy; with `c < 0`,
/// `d_t <= min_s d_s` pushes the adjusted forecast weakly up, and
/// `d_t >= max_s d_s` weakly down. Exact float inequalities.
pub fn prop_a1_battery(seed: u64, instances: usize) -> (usize, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 5]));
    let alpha = 0.05;
    let mut failures = 0usize;
    let mut done = 0usize;
    while done < instances {
        let inst = random_instance(&mut rng);
        let rho = 0.05 + 0.95 * rng.gen::<f64>();
        let rule = RecalRule::Scalar(rho);
        let clean_cal = calibrate(&rule, &inst.y, &inst.q, &inst.v, None, alpha).unwrap();
        if clean_cal.c >= -1e-4 {
            continue; // the proposition assumes a negative constant
        }
        done += 1;
        let clean = apply(&clean_cal, inst.q_test, inst.v_test, None).unwrap();

        let d: Vec<f64> = (0..inst.v.len()).map(|_| 0.5 + rng.gen::<f64>()).collect();
        let dmin = d.iter().cloned().fold(f64::INFINITY, f64::min);
        let dmax = d.iter().cloned().fold(0.0f64, f64::max);
        let distorted_v: Vec<f64> = inst.v.iter().zip(d.iter()).map(|(&v, &d)| v * d).collect();

        // forecast-point underreaction at least as severe as calibration
        let d_t = dmin * (0.5 + 0.499 * rng.gen::<f64>());
        let cal = calibrate(&rule, &inst.y, &inst.q, &distorted_v, None, alpha).unwrap();
        let distorted = apply(&cal, inst.q_test, d_t * inst.v_test, None).unwrap();
        if !(distorted >= clean) {
            failures += 1;
        }

        // reversed ordering
        let d_t = dmax * (1.001 + rng.gen::<f64>());
        let distorted = apply(&cal, inst.q_test, d_t * inst.v_test, None).unwrap();
        if !(distorted <= clean) {
            failures += 1;
        }
    }
    (failures, failures == 0)
}

/// Screened-selector monotonicity on synthetic monotone curve pairs: the
/// feasible set is a grid prefix and the selected reliance is nondecreasing
/// in the tolerance.
pub fn prop_a2_battery(seed: u64, curve_pairs: usize, tau_points: usize) -> (usize, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, 6]));
    let g = RHO_GRID.len();
    let mut failures = 0usize;
    for _ in 0..curve_pairs {
        // nondecreasing distortion, sometimes strictly positive at rho = 0 so
        // empty feasible sets occur
        let base = if rng.gen::<f64>() < 0.5 { 0.0 } else { rng.gen::<f64>() * 0.01 };
        let mut delta = Vec::with_capacity(g);
        let mut acc = base;
        for _ in 0..g {
            delta.push(acc);
            acc += rng.gen::<f64>() * 0.02;
        }
        // nonincreasing capital
        let mut capital = Vec::with_capacity(g);
        let mut cap = 0.05 + rng.gen::<f64>() * 0.05;
        for _ in 0..g {
            capital.push(cap);
            cap -= rng.gen::<f64>() * 0.005;
        }
        let tau_max = delta[g - 1] * 1.1 + 1e-4;
        let taus: Vec<f64> = (0..tau_points)
            .map(|i| -0.002 + (tau_max + 0.002) * i as f64 / (tau_points - 1) as f64)
            .collect();

        let mut prev: Option<usize> = None;
        for &tau in &taus {
            // feasible set must be a prefix of the grid
            let feas: Vec<bool> = delta.iter().map(|&d| d <= tau).collect();
            let first_infeasible = feas.iter().position(|&f| !f).unwrap_or(g);
            if feas[first_infeasible..].iter().any(|&f| f) {
                failures += 1;
                continue;
            }
            let pick = idealized_screened_select(&delta, &capital, tau);
            match (prev, pick) {
                (Some(p), Some(q)) if q < p => failures += 1,
                (Some(_), None) => failures += 1, // feasible sets only grow with tau
                _ => {}
            }
            if pick.is_some() {
                prev = pick;
            }
        }
    }
    (failures, failures == 0)
}

/// Monte Carlo agreement of the distortion curve with its analytic values,
/// within three standard errors at every grid point.
pub fn mc_distortion_battery(seed: u64, draws: usize) -> (f64, bool) {
    let grid: Vec<f64> = RHO_GRID.to_vec();
    let c = distortion_curve(TailLaw::Gaussian, 0.05, 0.5, 0.4, &grid, draws, mix_seed(&[seed, 7]))
        .unwrap();
    let mc = c.mc_delta.as_ref().unwrap();
    let mut worst = 0.0f64;
    let mut ok = true;
    for i in 0..grid.len() {
        let dev = (mc[i] - c.delta[i]).abs();
        let se = if c.se[i] > 0.0 {
            c.se[i]
        } else {
            (0.05 * 0.95 / draws as f64).sqrt()
        };
        worst = worst.max(dev / se);
        if dev > 3.0 * se {
            ok = false;
        }
    }
    (worst, ok)
}

/// Runs every battery at its reported scale.
pub fn run_theory_suite(seed: u64) -> TheoryReport {
    let mut checks = Vec::new();

    let (dev, ok) = prop1_invariance_battery(seed, 100, &[0.1, 1.0, 10.0], 1e-10, &|s, a| {
        lower_quantile(s, a).unwrap()
    });
    checks.push(TheoryCheck {
        name: "uniform_rescaling_invariance".into(),
        passed: ok,
        details: format!("max forecast deviation {dev:.2e} (tol 1e-10)"),
    });

    let (dev, ok) = prop1_elasticity_battery(seed, 200, 1e-12);
    checks.push(TheoryCheck {
        name: "adjustment_elasticity".into(),
        passed: ok,
        details: format!("max elasticity deviation {dev:.2e} (tol 1e-12)"),
    });

    let (fails, ok) = prop2_contrast_battery(seed, 100);
    checks.push(TheoryCheck {
        name: "cross_state_contrast".into(),
        passed: ok,
        details: format!("{fails} failures over 100 pairs"),
    });

    let (fails, ok) = prop3_sign_battery(seed, 500);
    checks.push(TheoryCheck {
        name: "underreaction_sign".into(),
        passed: ok,
        details: format!("{fails} ordering violations over 500 instances"),
    });

    let (details, ok) = corollary1_battery();
    checks.push(TheoryCheck {
        name: "matched_distortion_curves".into(),
        passed: ok,
        details,
    });

    let (fails, ok) = prop_a1_battery(seed, 1000);
    checks.push(TheoryCheck {
        name: "heterogeneous_distortion".into(),
        passed: ok,
        details: format!("{fails} directional violations over 1000 instances"),
    });

    let (fails, ok) = prop_a2_battery(seed, 500, 10);
    checks.push(TheoryCheck {
        name: "screened_selector_monotone".into(),
        passed: ok,
        details: format!("{fails} violations over 500 curve pairs x 10 tolerances"),
    });

    let (worst, ok) = mc_distortion_battery(seed, 200_000);
    checks.push(TheoryCheck {
        name: "mc_distortion_agreement".into(),
        passed: ok,
        details: format!("worst |mc - analytic| = {worst:.2} standard errors"),
    });

    TheoryReport {
        seed,
        checks,
    }
}
