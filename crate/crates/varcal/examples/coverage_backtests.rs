//! The three coverage backtests on hand-made hit sequences: a well-behaved
//! forecaster, an undercovering one, and a clustered one.
//!
//! ```bash
//! cargo run --example coverage_backtests
//! ```

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use varcal::evaluation::backtests::{christoffersen_parts, dq_test, kupiec_uc};

fn describe(name: &str, hits: &[bool], forecasts: &[f64], alpha: f64) {
    let n = hits.len();
    let x = hits.iter().filter(|&&h| h).count();
    let (uc, uc_p) = kupiec_uc(n, x, alpha);
    let cc = christoffersen_parts(hits, alpha);
    let dq = dq_test(hits, forecasts, alpha, 4).unwrap();
    println!(
        "{name}: {x}/{n} breaches ({:.3})\n  UC  LR = {uc:8.3}  p = {uc_p:.4}\n  CC  LR = {:8.3}  p = {:.4} (independence part {:.3})\n  DQ  stat = {:6.3}  p = {:.4}{}",
        x as f64 / n as f64,
        cc.lr_cc,
        cc.p_value,
        cc.lr_ind,
        dq.statistic,
        dq.p_value,
        if dq.rank_deficient { "  [rank-deficient design]" } else { "" }
    );
}

fn main() {
    let alpha = 0.05;
    let n = 2000;
    let mut rng = ChaCha8Rng::seed_from_u64(5);

    // calibrated and independent: everything should pass
    let hits: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < alpha).collect();
    let forecasts: Vec<f64> = (0..n).map(|_| -0.02 + 0.004 * rng.gen::<f64>()).collect();
    describe("well calibrated", &hits, &forecasts, alpha);

    // systematic undercoverage at 9%
    let hits: Vec<bool> = (0..n).map(|_| rng.gen::<f64>() < 0.09).collect();
    describe("\nundercovering", &hits, &forecasts, alpha);

    // right frequency but strongly clustered violations
    let mut hits = vec![false; n];
    for t in 1..n {
        let p = if hits[t - 1] { 0.5 } else { 0.026 };
        hits[t] = rng.gen::<f64>() < p;
    }
    describe("\nclustered", &hits, &forecasts, alpha);
}
