//! Derivative-free Nelder-Mead simplex minimizer with seeded restarts.
//!
//! Used for every maximum-likelihood and pinball-loss fit in the crate.
//! Parameters are expected to already live in an unconstrained space (the
//! callers apply log/logit transforms), so no bound handling is done here.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Outcome of a single minimization.
#[derive(Debug, Clone)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub fx: f64,
    /// true when the simplex collapsed below tolerance before the iteration cap
    pub converged: bool,
    pub iterations: usize,
}

/// Options for [`minimize`].
#[derive(Debug, Clone)]
pub struct Options {
    pub max_iter: usize,
    pub tol: f64,
    pub restarts: usize,
    /// initial simplex edge length per coordinate
    pub step: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            max_iter: 2000,
            tol: 1e-10,
            restarts: 3,
            step: 0.5,
        }
    }
}

/// Minimize `f` from `x0` with `opts.restarts` jittered restarts. Each
/// restart re-seeds the simplex around the best point found so far; the best
/// result over restarts is returned. A restart counts as converged only when
/// the simplex function spread falls below `tol` before `max_iter`
/// iterations, and the overall fit is flagged converged when at least one
/// restart converged to a finite value.
pub fn minimize<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    x0: &[f64],
    opts: &Options,
    rng: &mut ChaCha8Rng,
) -> MinimizeResult {
    let mut best = MinimizeResult {
        x: x0.to_vec(),
        fx: f64::INFINITY,
        converged: false,
        iterations: 0,
    };
    let mut start = x0.to_vec();
    for r in 0..opts.restarts.max(1) {
        let scale = opts.step * 0.5f64.powi(r as i32);
        let res = nelder_mead(&mut f, &start, scale, opts.max_iter, opts.tol, rng, r > 0);
        if res.fx.is_finite() && res.fx < best.fx {
            best.fx = res.fx;
            best.x = res.x.clone();
            best.converged = res.converged;
        } else if res.fx.is_finite() && res.converged && (res.fx - best.fx).abs() <= opts.tol {
            best.converged = true;
        }
        start = best.x.clone();
        if best.converged && r > 0 {
            break;
        }
    }
    best
}

fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    x0: &[f64],
    step: f64,
    max_iter: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
    jitter: bool,
) -> MinimizeResult {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut base = x0.to_vec();
    if jitter {
        for b in base.iter_mut() {
            *b += step * 0.25 * (rng.gen::<f64>() * 2.0 - 1.0);
        }
    }
    pts.push(base.clone());
    for i in 0..n {
        let mut p = base.clone();
        p[i] += step * (1.0 + 0.05 * (rng.gen::<f64>() - 0.5));
        pts.push(p);
    }
    let safe = |v: f64| if v.is_finite() { v } else { f64::INFINITY };
    let mut fv: Vec<f64> = pts.iter().map(|p| safe(f(p))).collect();

    let mut iters = 0;
    let mut converged = false;
    while iters < max_iter {
        iters += 1;
        // order
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fv[a].partial_cmp(&fv[b]).unwrap_or(std::cmp::Ordering::Equal));
        let pts2: Vec<Vec<f64>> = idx.iter().map(|&i| pts[i].clone()).collect();
        let fv2: Vec<f64> = idx.iter().map(|&i| fv[i]).collect();
        pts = pts2;
        fv = fv2;

        if (fv[n] - fv[0]).abs() <= tol * (1.0 + fv[0].abs()) {
            converged = true;
            break;
        }

        // centroid of all but worst
        let mut cen = vec![0.0; n];
        for p in pts.iter().take(n) {
            for (c, &v) in cen.iter_mut().zip(p.iter()) {
                *c += v;
            }
        }
        for c in cen.iter_mut() {
            *c /= n as f64;
        }

        let lerp = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
            a.iter().zip(b.iter()).map(|(&x, &y)| x + t * (y - x)).collect()
        };

        // reflection
        let xr = lerp(&cen, &pts[n], -1.0);
        let fr = safe(f(&xr));
        if fr < fv[0] {
            // expansion
            let xe = lerp(&cen, &pts[n], -2.0);
            let fe = safe(f(&xe));
            if fe < fr {
                pts[n] = xe;
                fv[n] = fe;
            } else {
                pts[n] = xr;
                fv[n] = fr;
            }
        } else if fr < fv[n - 1] {
            pts[n] = xr;
            fv[n] = fr;
        } else {
            // contraction
            let (xc, fc) = if fr < fv[n] {
                let x = lerp(&cen, &pts[n], -0.5);
                let v = safe(f(&x));
                (x, v)
            } else {
                let x = lerp(&cen, &pts[n], 0.5);
                let v = safe(f(&x));
                (x, v)
            };
            if fc < fv[n].min(fr) {
                pts[n] = xc;
                fv[n] = fc;
            } else {
                // shrink toward best
                for i in 1..=n {
                    pts[i] = lerp(&pts[0], &pts[i], 0.5);
                    fv[i] = safe(f(&pts[i]));
                }
            }
        }
    }

    let mut bi = 0;
    for i in 1..=n {
        if fv[i] < fv[bi] {
            bi = i;
        }
    }
    MinimizeResult {
        x: pts[bi].clone(),
        fx: fv[bi],
        converged: converged && fv[bi].is_finite(),
        iterations: iters,
    }
}
