//! GARCH(1,1) and GJR-GARCH(1,1) estimation by maximum likelihood.
//!
//! The mean is the sample mean of the fitting window (constant-mean
//! specification); the variance parameters are estimated by Nelder-Mead on
//! unconstrained transforms that enforce
//!
//! ```text
//! omega > 0,   alpha >= 0,   beta >= 0,   persistence < 0.999
//! ```
//!
//! where persistence is `alpha + beta` (GARCH) or `alpha + gamma/2 + beta`
//! (GJR with symmetric innovations). Student-t innovations are standardized
//! to unit variance, so fitted conditional variances are return variances and
//! quantiles carry the `sqrt((nu-2)/nu)` factor. A fit fails when no restart
//! reaches a finite converged optimum; callers fall back per their own rules.

use rand_chacha::ChaCha8Rng;

use crate::stats::neldermead::{minimize, Options};

const MAX_PERSISTENCE: f64 = 0.999;
const MIN_NU: f64 = 2.1;

/// Innovation family for the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Innovations {
    Gaussian,
    StudentT,
}

/// Fitted GARCH(1,1) parameters. `gamma` is zero for the symmetric model.
#[derive(Debug, Clone, Copy)]
pub struct GarchFit {
    pub mean: f64,
    pub omega: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub beta: f64,
    /// degrees of freedom; `None` for Gaussian innovations
    pub nu: Option<f64>,
    pub log_likelihood: f64,
    pub converged: bool,
    /// last in-sample conditional variance, for forecast recursion
    pub last_var: f64,
    /// last demeaned return, for forecast recursion
    pub last_resid: f64,
}

impl GarchFit {
    /// Persistence of the variance recursion under symmetric innovations.
    pub fn persistence(&self) -> f64 {
        self.alpha + 0.5 * self.gamma + self.beta
    }

    /// Multi-step conditional variance path `h_{T+1..T+steps}` by the
    /// recursion with squared-innovation expectations (`E 1{eps<0} = 1/2`).
    pub fn variance_path(&self, steps: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(steps);
        let ind = if self.last_resid < 0.0 { 1.0 } else { 0.0 };
        let mut h = self.omega
            + (self.alpha + self.gamma * ind) * self.last_resid * self.last_resid
            + self.beta * self.last_var;
        for _ in 0..steps {
            out.push(h);
            h = self.omega + self.persistence() * h;
        }
        out
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// In-sample variance recursion; returns (variances, negative log-likelihood).
fn nll(
    resid: &[f64],
    omega: f64,
    alpha: f64,
    gamma: f64,
    beta: f64,
    nu: Option<f64>,
) -> (f64, f64, f64) {
    let n = resid.len() as f64;
    let var0 = resid.iter().map(|e| e * e).sum::<f64>() / n;
    let var0 = var0.max(1e-18);
    let mut h = var0;
    let mut ll = 0.0;
    // constant terms of the density
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let tconst = nu.map(|nu| {
        crate::stats::special::ln_gamma((nu + 1.0) / 2.0)
            - crate::stats::special::ln_gamma(nu / 2.0)
            - 0.5 * ((nu - 2.0) * std::f64::consts::PI).ln()
    });
    let mut prev_e = resid[0];
    for (t, &e) in resid.iter().enumerate() {
        if t > 0 {
            let ind = if prev_e < 0.0 { 1.0 } else { 0.0 };
            h = omega + (alpha + gamma * ind) * prev_e * prev_e + beta * h;
        }
        if !(h > 0.0) || !h.is_finite() {
            return (f64::INFINITY, h, prev_e);
        }
        match (nu, tconst) {
            (Some(nu), Some(c)) => {
                let z2 = e * e / (h * (nu - 2.0));
                ll += c - 0.5 * h.ln() - (nu + 1.0) / 2.0 * (1.0 + z2).ln();
            }
            _ => {
                ll += -0.5 * (ln2pi + h.ln() + e * e / h);
            }
        }
        prev_e = e;
    }
    (-ll, h, prev_e)
}

struct Transform {
    asymmetric: bool,
    student_t: bool,
    var0: f64,
}

impl Transform {
    fn unpack(&self, x: &[f64]) -> (f64, f64, f64, f64, Option<f64>) {
        let omega = x[0].exp() * self.var0; // scale-free omega parameter
        let persistence = MAX_PERSISTENCE * sigmoid(x[1]);
        let arch_share = sigmoid(x[2]);
        let (alpha, gamma, beta);
        if self.asymmetric {
            let arch_total = persistence * arch_share; // alpha + gamma/2
            let sym_share = sigmoid(x[3]);
            alpha = arch_total * sym_share;
            gamma = 2.0 * arch_total * (1.0 - sym_share);
            beta = persistence - arch_total;
        } else {
            alpha = persistence * arch_share;
            gamma = 0.0;
            beta = persistence - alpha;
        }
        let nu = if self.student_t {
            let idx = if self.asymmetric { 4 } else { 3 };
            Some(MIN_NU + x[idx].exp())
        } else {
            None
        };
        (omega, alpha, gamma, beta, nu)
    }

    fn initial(&self) -> Vec<f64> {
        // persistence ~ 0.95, arch share ~ 0.08, omega ~ 0.05 * var0
        let mut x = vec![(0.05f64).ln(), logit(0.95 / MAX_PERSISTENCE), logit(0.08)];
        if self.asymmetric {
            x.push(logit(0.5));
        }
        if self.student_t {
            x.push((8.0f64 - MIN_NU).ln());
        }
        x
    }
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Fits a constant-mean (G)GARCH(1,1) by MLE. `rng` seeds the optimizer
/// restarts; pass a deterministically derived stream for reproducibility.
pub fn fit(
    returns: &[f64],
    asymmetric: bool,
    innovations: Innovations,
    rng: &mut ChaCha8Rng,
) -> Option<GarchFit> {
    if returns.len() < 30 {
        return None;
    }
    let mean = returns.iter().sum::<f64>() / returns.len() as f64;
    let resid: Vec<f64> = returns.iter().map(|r| r - mean).collect();
    let var0 = resid.iter().map(|e| e * e).sum::<f64>() / resid.len() as f64;
    if !(var0 > 1e-16) {
        return None; // degenerate window: nothing to model
    }
    let tr = Transform {
        asymmetric,
        student_t: innovations == Innovations::StudentT,
        var0,
    };
    let x0 = tr.initial();
    let res = minimize(
        |x| {
            let (omega, alpha, gamma, beta, nu) = tr.unpack(x);
            nll(&resid, omega, alpha, gamma, beta, nu).0
        },
        &x0,
        &Options::default(),
        rng,
    );
    if !res.converged || !res.fx.is_finite() {
        return None;
    }
    let (omega, alpha, gamma, beta, nu) = tr.unpack(&res.x);
    let (neg_ll, last_var, last_resid) = nll(&resid, omega, alpha, gamma, beta, nu);
    if !neg_ll.is_finite() {
        return None;
    }
    Some(GarchFit {
        mean,
        omega,
        alpha,
        gamma,
        beta,
        nu,
        log_likelihood: -neg_ll,
        converged: true,
        last_var,
        last_resid,
    })
}

/// Simulates a (G)GARCH(1,1) path with standardized innovations; used by
/// recovery tests and the examples.
pub fn simulate(
    n: usize,
    mean: f64,
    omega: f64,
    alpha: f64,
    gamma: f64,
    beta: f64,
    nu: Option<f64>,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    use rand_distr::{Distribution, Gamma, StandardNormal};
    let mut h = omega / (1.0 - alpha - 0.5 * gamma - beta).max(1e-6);
    let mut out = Vec::with_capacity(n);
    let mut prev_e = 0.0f64;
    let chi = nu.map(|nu| Gamma::new(nu / 2.0, 2.0).unwrap());
    for t in 0..n {
        if t > 0 {
            let ind = if prev_e < 0.0 { 1.0 } else { 0.0 };
            h = omega + (alpha + gamma * ind) * prev_e * prev_e + beta * h;
        }
        let z: f64 = StandardNormal.sample(rng);
        let z = match (nu, &chi) {
            (Some(nu), Some(chi)) => {
                // unit-variance Student-t draw
                let w: f64 = chi.sample(rng);
                z * (nu / w).sqrt() * ((nu - 2.0) / nu).sqrt()
            }
            _ => z,
        };
        let e = z * h.sqrt();
        out.push(mean + e);
        prev_e = e;
    }
    out
}

/// Convenience: deterministic substream for a fit at a structural position.
pub fn fit_rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Draw a standard normal via the rng (used by the synthetic generator too).
pub fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    StandardNormal.sample(rng)
}
