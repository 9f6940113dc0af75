//! L1-penalized linear quantile regression, solved exactly as a linear
//! program through its dual.
//!
//! Primal (sum form, intercept unpenalized, lambda = 1e-4 on standardized
//! coefficients):
//!
//! ```text
//! min  sum_i pinball_alpha(y_i - x_i'beta - b) + lambda * ||beta||_1
//! ```
//!
//! Dual:
//!
//! ```text
//! max  y'd   s.t.  |X_j'd| <= lambda,  1'd = 0,  d_i in [alpha-1, alpha]
//! ```
//!
//! which is a bounded-variable LP with only p+1 rows; the simplex basis stays
//! tiny no matter how long the training block is. The primal coefficients are
//! recovered from the optimal basis (basic d_i are interpolated observations,
//! bound-tight feature rows carry nonzero beta) and certified by a duality
//! gap below 1e-8.

use super::BaselineError;
use crate::stats::lp::{BoundedLp, LpStatus, VarState};
use crate::stats::pinball;

/// L1 penalty on standardized coefficients (sum-form objective).
pub const QR_PENALTY: f64 = 1e-4;
/// Certified relative duality gap.
pub const QR_GAP_TOL: f64 = 1e-8;

/// A fitted quantile regression.
#[derive(Debug, Clone)]
pub struct QrFit {
    /// forecasts for the evaluation rows
    pub values: Vec<f64>,
    /// coefficients on the standardized predictors (dropped columns hold 0)
    pub beta: Vec<f64>,
    pub intercept: f64,
    pub dropped_columns: usize,
    pub duality_gap: f64,
}

/// Fits on the training block and predicts every evaluation row. Evaluation
/// predictors are standardized with training statistics. Constant training
/// columns are dropped and counted.
pub fn qr_forecast(
    train_x: &[[f64; 15]],
    train_y: &[f64],
    eval_x: &[[f64; 15]],
    alpha: f64,
) -> Result<QrFit, BaselineError> {
    let n = train_x.len();
    let p_all = 15usize;
    if n == 0 {
        return Err(BaselineError::EmptyTrain);
    }
    if n < 2 * p_all {
        return Err(BaselineError::TooShort {
            need: 2 * p_all,
            got: n,
        });
    }

    // training-block standardization; constant columns are dropped
    let mut mu = vec![0.0; p_all];
    let mut sd = vec![0.0; p_all];
    for j in 0..p_all {
        let col: Vec<f64> = train_x.iter().map(|r| r[j]).collect();
        mu[j] = crate::stats::mean(&col);
        sd[j] = crate::stats::sample_sd(&col);
    }
    let kept: Vec<usize> = (0..p_all).filter(|&j| sd[j] > 1e-12).collect();
    let dropped_columns = p_all - kept.len();
    let p = kept.len();
    if p == 0 {
        return Err(BaselineError::DegenerateDesign(
            "all predictor columns constant".into(),
        ));
    }
    let std_row = |r: &[f64; 15]| -> Vec<f64> {
        kept.iter().map(|&j| (r[j] - mu[j]) / sd[j]).collect()
    };
    let xs: Vec<Vec<f64>> = train_x.iter().map(std_row).collect();

    // dual LP: variables d_1..d_n then s_1..s_p; rows X_j'd + s_j = 0 and 1'd = 0
    let m = p + 1;
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(n + p);
    for xi in &xs {
        let mut col = Vec::with_capacity(m);
        col.extend_from_slice(xi);
        col.push(1.0);
        cols.push(col);
    }
    for j in 0..p {
        let mut col = vec![0.0; m];
        col[j] = 1.0;
        cols.push(col);
    }
    let mut cost = Vec::with_capacity(n + p);
    cost.extend(train_y.iter().map(|&y| -y));
    cost.extend(std::iter::repeat(0.0).take(p));
    let mut lower = vec![alpha - 1.0; n];
    lower.extend(std::iter::repeat(-QR_PENALTY).take(p));
    let mut upper = vec![alpha; n];
    upper.extend(std::iter::repeat(QR_PENALTY).take(p));

    let lp = BoundedLp {
        nrows: m,
        cost,
        cols,
        lower,
        upper,
        rhs: vec![0.0; m],
    };
    let sol = lp.solve(20_000 + 40 * n);
    if sol.status != LpStatus::Optimal {
        return Err(BaselineError::SolverFailure(format!(
            "dual simplex status {:?} after {} iterations",
            sol.status, sol.iterations
        )));
    }
    let dual_objective = -sol.objective; // we minimized -y'd

    // primal recovery: basic d_i index interpolated observations; s_j away
    // from basic carries a (sign-constrained) nonzero beta_j
    let interp: Vec<usize> = (0..n)
        .filter(|&i| sol.state[i] == VarState::Basic)
        .collect();
    let active: Vec<usize> = (0..p)
        .filter(|&j| sol.state[n + j] != VarState::Basic)
        .collect();

    let solve_for = |interp: &[usize], active: &[usize]| -> Option<(Vec<f64>, f64)> {
        // unknowns: intercept + beta_active; equations: y_i = b + x_i'beta
        let k = active.len() + 1;
        let rows = interp.len();
        if rows == 0 {
            return None;
        }
        // normal-equation solve handles both the square and the (rare)
        // non-square degenerate case
        let mut ata = vec![vec![0.0; k]; k];
        let mut atb = vec![0.0; k];
        for &i in interp {
            let mut row = Vec::with_capacity(k);
            row.push(1.0);
            for &j in active {
                row.push(xs[i][j]);
            }
            for a in 0..k {
                for b in 0..k {
                    ata[a][b] += row[a] * row[b];
                }
                atb[a] += row[a] * train_y[i];
            }
        }
        // tiny ridge for duplicated interpolation rows
        for a in 0..k {
            ata[a][a] += 1e-12;
        }
        gauss_solve(&mut ata, &mut atb).map(|sol| {
            let b = sol[0];
            (sol[1..].to_vec(), b)
        })
    };

    let (beta_active, intercept) = solve_for(&interp, &active)
        .ok_or_else(|| BaselineError::SolverFailure("singular recovery system".into()))?;

    let mut beta = vec![0.0; p];
    for (k, &j) in active.iter().enumerate() {
        beta[j] = beta_active[k];
    }

    // certify with the duality gap on the primal objective
    let mut primal = 0.0;
    for (xi, &y) in xs.iter().zip(train_y.iter()) {
        let fit: f64 = intercept + dotv(xi, &beta);
        primal += pinball(y, fit, alpha);
    }
    primal += QR_PENALTY * beta.iter().map(|b| b.abs()).sum::<f64>();
    let gap = primal - dual_objective;
    let scale = primal.abs().max(1.0);
    if !(gap.abs() <= QR_GAP_TOL * scale) {
        return Err(BaselineError::SolverFailure(format!(
            "duality gap {gap:.3e} above tolerance"
        )));
    }

    let values = eval_x
        .iter()
        .map(|r| intercept + dotv(&std_row(r), &beta))
        .collect();

    // expand beta back to the 15-slot layout for reporting
    let mut beta_full = vec![0.0; p_all];
    for (k, &j) in kept.iter().enumerate() {
        beta_full[j] = beta[k];
    }

    Ok(QrFit {
        values,
        beta: beta_full,
        intercept,
        dropped_columns,
        duality_gap: gap,
    })
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// In-place Gaussian elimination with partial pivoting.
fn gauss_solve(a: &mut [Vec<f64>], b: &mut [f64]) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let mut piv = c;
        for r in c + 1..n {
            if a[r][c].abs() > a[piv][c].abs() {
                piv = r;
            }
        }
        if a[piv][c].abs() < 1e-14 {
            return None;
        }
        a.swap(c, piv);
        b.swap(c, piv);
        for r in c + 1..n {
            let f = a[r][c] / a[c][c];
            if f != 0.0 {
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for k in r + 1..n {
            s -= a[r][k] * x[k];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recalibration::lower_quantile;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise_features(rng: &mut ChaCha8Rng) -> [f64; 15] {
        let mut x = [0.0; 15];
        for v in x.iter_mut() {
            *v = rng.gen::<f64>() * 2.0 - 1.0;
        }
        x
    }

    #[test]
    fn constant_target_gives_constant_forecast() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let c = -0.0123;
        let train_x: Vec<[f64; 15]> = (0..80).map(|_| noise_features(&mut rng)).collect();
        let train_y = vec![c; 80];
        let eval_x: Vec<[f64; 15]> = (0..5).map(|_| noise_features(&mut rng)).collect();
        let fit = qr_forecast(&train_x, &train_y, &eval_x, 0.05).unwrap();
        for q in &fit.values {
            assert!((q - c).abs() < 1e-9, "q = {q}, want {c}");
        }
        assert!((fit.intercept - c).abs() < 1e-9);
    }

    #[test]
    fn exact_linear_relation_is_recovered() {
        // y = 2 * x_0 exactly; penalty is negligible against 500 rows
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        for _ in 0..500 {
            let x = noise_features(&mut rng);
            train_x.push(x);
            train_y.push(2.0 * x[0]);
        }
        let eval_x: Vec<[f64; 15]> = (0..10).map(|_| noise_features(&mut rng)).collect();
        let fit = qr_forecast(&train_x, &train_y, &eval_x, 0.05).unwrap();
        for (q, x) in fit.values.iter().zip(eval_x.iter()) {
            assert!((q - 2.0 * x[0]).abs() <= 1e-4, "q = {q} vs {}", 2.0 * x[0]);
        }
    }

    #[test]
    fn uninformative_features_recover_the_empirical_quantile() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let train_x: Vec<[f64; 15]> = (0..1000).map(|_| noise_features(&mut rng)).collect();
        let train_y: Vec<f64> = (0..1000)
            .map(|_| {
                let u: f64 = rng.gen();
                let v: f64 = rng.gen();
                // Box-Muller standard normal
                (-2.0 * u.max(1e-12).ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
            })
            .collect();
        // in-sample predictions: evaluate on the training rows themselves
        let fit = qr_forecast(&train_x, &train_y, &train_x, 0.05).unwrap();
        let oracle = lower_quantile(&train_y, 0.05).unwrap();
        assert!(
            (fit.intercept - oracle).abs() < 0.08,
            "intercept {} vs empirical quantile {}",
            fit.intercept,
            oracle
        );
        // LP optimality: the fitted primal objective (pinball + penalty)
        // cannot exceed the constant-quantile solution, which is feasible
        let obj_fit: f64 = fit
            .values
            .iter()
            .zip(train_y.iter())
            .map(|(&q, &y)| crate::stats::pinball(y, q, 0.05))
            .sum::<f64>()
            + QR_PENALTY * fit.beta.iter().map(|b| b.abs()).sum::<f64>();
        let obj_const: f64 = train_y
            .iter()
            .map(|&y| crate::stats::pinball(y, oracle, 0.05))
            .sum();
        assert!(
            obj_fit <= obj_const + 1e-9,
            "fit objective {obj_fit} exceeds constant objective {obj_const}"
        );
    }

    #[test]
    fn constant_column_is_dropped_and_recorded() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut train_x: Vec<[f64; 15]> = (0..100).map(|_| noise_features(&mut rng)).collect();
        for r in train_x.iter_mut() {
            r[7] = 0.5; // constant column
        }
        let train_y: Vec<f64> = (0..100).map(|i| -0.01 + 0.0001 * (i % 11) as f64).collect();
        let fit = qr_forecast(&train_x, &train_y, &train_x[..2], 0.05).unwrap();
        assert_eq!(fit.dropped_columns, 1);
        assert_eq!(fit.beta[7], 0.0);
    }

    #[test]
    fn short_design_is_rejected() {
        let train_x = vec![[0.0; 15]; 20];
        let train_y = vec![0.0; 20];
        assert!(matches!(
            qr_forecast(&train_x, &train_y, &train_x[..1], 0.05),
            Err(BaselineError::TooShort { .. })
        ));
    }

    #[test]
    fn duality_gap_is_tiny_on_realistic_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        for _ in 0..504 {
            let x = noise_features(&mut rng);
            let noise: f64 = rng.gen::<f64>() - 0.5;
            train_x.push(x);
            train_y.push(-0.005 + 0.01 * x[0] - 0.004 * x[3] + 0.02 * noise);
        }
        let fit = qr_forecast(&train_x, &train_y, &train_x[..3], 0.05).unwrap();
        assert!(fit.duality_gap.abs() <= 1e-8, "gap {}", fit.duality_gap);
    }
}
