//! Coverage backtests: Kupiec unconditional coverage, Christoffersen
//! conditional coverage, and the dynamic quantile regression test.
//!
//! Degenerate inputs follow the standard limit conventions: `0 * ln(0/.)` is
//! zero, empty Markov transition cells contribute nothing to the
//! independence likelihood ratio, and a rank-deficient dynamic-quantile
//! design is handled by a pseudo-inverse with the rank recorded.

use crate::stats::special::chi2_sf;

/// `x ln(a/b)` with the `x = 0` limit convention.
fn xlog(x: f64, num: f64, den: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (num / den).ln()
    }
}

/// Kupiec proportion-of-failures likelihood ratio and its chi-square(1)
/// p-value. `n` observations, `x` breaches.
pub fn kupiec_uc(n: usize, x: usize, alpha: f64) -> (f64, f64) {
    debug_assert!(x <= n && n > 0);
    let nf = n as f64;
    let xf = x as f64;
    let p_hat = xf / nf;
    let lr = -2.0 * (xlog(xf, alpha, p_hat) + xlog(nf - xf, 1.0 - alpha, 1.0 - p_hat));
    let lr = lr.max(0.0); // guard the x = n*alpha rounding case
    (lr, chi2_sf(lr, 1))
}

/// Conditional-coverage decomposition `LR_cc = LR_uc + LR_ind`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcParts {
    pub lr_uc: f64,
    pub lr_ind: f64,
    pub lr_cc: f64,
    pub p_value: f64,
}

/// Christoffersen conditional coverage against chi-square(2). Returns the
/// combined verdict; the parts are available through [`christoffersen_parts`].
pub fn christoffersen_cc(hits: &[bool], alpha: f64) -> crate::evaluation::TestVerdict {
    if hits.len() < 2 {
        return crate::evaluation::TestVerdict {
            statistic: f64::NAN,
            p_value: f64::NAN,
            pass: false,
            degenerate: true,
        };
    }
    let parts = christoffersen_parts(hits, alpha);
    crate::evaluation::TestVerdict {
        statistic: parts.lr_cc,
        p_value: parts.p_value,
        pass: parts.p_value > 0.05,
        degenerate: false,
    }
}

/// The UC and first-order-Markov independence components.
pub fn christoffersen_parts(hits: &[bool], alpha: f64) -> CcParts {
    let n = hits.len();
    let x = hits.iter().filter(|&&h| h).count();
    let (lr_uc, _) = kupiec_uc(n, x, alpha);

    // transition counts over consecutive pairs
    let (mut n00, mut n01, mut n10, mut n11) = (0f64, 0f64, 0f64, 0f64);
    for w in hits.windows(2) {
        match (w[0], w[1]) {
            (false, false) => n00 += 1.0,
            (false, true) => n01 += 1.0,
            (true, false) => n10 += 1.0,
            (true, true) => n11 += 1.0,
        }
    }
    let lr_ind = if x == 0 || x == n {
        // all-quiet / all-hit series: independence is vacuous by convention
        0.0
    } else {
        let pi = (n01 + n11) / (n00 + n01 + n10 + n11);
        let pi0 = if n00 + n01 > 0.0 { n01 / (n00 + n01) } else { 0.0 };
        let pi1 = if n10 + n11 > 0.0 { n11 / (n10 + n11) } else { 0.0 };
        // empty cells contribute zero through the xlog convention
        let l1 = xlog(n00, 1.0 - pi0, 1.0 - pi) + xlog(n01, pi0, pi)
            + xlog(n10, 1.0 - pi1, 1.0 - pi)
            + xlog(n11, pi1, pi);
        (2.0 * l1).max(0.0)
    };
    let lr_cc = lr_uc + lr_ind;
    CcParts {
        lr_uc,
        lr_ind,
        lr_cc,
        p_value: chi2_sf(lr_cc, 2),
    }
}

/// Dynamic quantile test result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DqResult {
    pub statistic: f64,
    pub p_value: f64,
    pub rank: usize,
    pub rank_deficient: bool,
}

/// Dynamic quantile test: regresses the centered hit sequence on an
/// intercept, `lags` hit lags and the current forecast, and refers
/// `b'(X'X)b / (alpha (1-alpha))` to chi-square with `lags + 2` degrees of
/// freedom. A rank-deficient design is resolved by the eigenvalue
/// pseudo-inverse and flagged.
pub fn dq_test(
    hits: &[bool],
    forecasts: &[f64],
    alpha: f64,
    lags: usize,
) -> Result<DqResult, crate::evaluation::EvalError> {
    let n = hits.len();
    if n != forecasts.len() {
        return Err(crate::evaluation::EvalError::LengthMismatch(
            n,
            forecasts.len(),
        ));
    }
    if n <= lags + 10 {
        return Err(crate::evaluation::EvalError::TooShort {
            need: lags + 10,
            got: n,
        });
    }
    let k = lags + 2;
    let rows = n - lags;
    // X'X and X'e accumulated on the fly
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xte = vec![0.0; k];
    let mut row = vec![0.0; k];
    for t in lags..n {
        row[0] = 1.0;
        for l in 1..=lags {
            row[l] = if hits[t - l] { 1.0 } else { 0.0 };
        }
        row[k - 1] = forecasts[t];
        let e = (if hits[t] { 1.0 } else { 0.0 }) - alpha;
        for a in 0..k {
            for b in a..k {
                xtx[a][b] += row[a] * row[b];
            }
            xte[a] += row[a] * e;
        }
    }
    for a in 0..k {
        for b in 0..a {
            xtx[a][b] = xtx[b][a];
        }
    }

    // eigen pseudo-inverse of the symmetric k x k matrix
    let (vals, vecs) = jacobi_eigen(&xtx);
    let vmax = vals.iter().cloned().fold(0.0f64, f64::max);
    let tol = vmax * 1e-12 * rows as f64;
    let mut rank = 0usize;
    // statistic = (X'e)' pinv(X'X) (X'e) / (alpha (1 - alpha))
    let mut quad = 0.0;
    for (j, &val) in vals.iter().enumerate() {
        if val > tol {
            rank += 1;
            let proj: f64 = (0..k).map(|i| vecs[i][j] * xte[i]).sum();
            quad += proj * proj / val;
        }
    }
    let statistic = quad / (alpha * (1.0 - alpha));
    let df = lags + 2;
    Ok(DqResult {
        statistic,
        p_value: chi2_sf(statistic, df),
        rank,
        rank_deficient: rank < k,
    })
}

/// Cyclic Jacobi eigendecomposition of a small symmetric matrix. Returns
/// (eigenvalues, column eigenvectors).
fn jacobi_eigen(m: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut v = vec![vec![0.0; k]; k];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..k {
            for q in p + 1..k {
                off += a[p][q] * a[p][q];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..k {
                    let aip = a[i][p];
                    let aiq = a[i][q];
                    a[i][p] = c * aip - s * aiq;
                    a[i][q] = s * aip + c * aiq;
                }
                for j in 0..k {
                    let apj = a[p][j];
                    let aqj = a[q][j];
                    a[p][j] = c * apj - s * aqj;
                    a[q][j] = s * apj + c * aqj;
                }
                for i in 0..k {
                    let vip = v[i][p];
                    let viq = v[i][q];
                    v[i][p] = c * vip - s * viq;
                    v[i][q] = s * vip + c * viq;
                }
            }
        }
    }
    let vals: Vec<f64> = (0..k).map(|i| a[i][i]).collect();
    (vals, v)
}
