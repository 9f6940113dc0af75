//! Per-origin selection of the recalibration rule.
//!
//! Every candidate rule is fitted on the rho-fit block and scored on the
//! rho-evaluation block. Four selectors consume the scores:
//!
//! - global average: smallest average capital over scalar candidates
//! - global stress-aware: feasibility screen on stress and overall
//!   exceedance, then a pinball/capital trade-off (penalized when nothing is
//!   feasible)
//! - regime average: capital plus a quadratic smoothness penalty over
//!   monotone tuples
//! - regime stress: the stress-aware logic with the high-regime subset as
//!   the stress set
//!
//! Ties always break toward lower reliance (lexicographically smaller
//! exponents), so selection is a deterministic, order-independent function
//! of the candidate metrics.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::recalibration::{apply, calibrate, RecalError, RecalRule};
use crate::state_model::Regime;
use crate::stats::pinball;

#[derive(Debug, Error, PartialEq)]
pub enum SelectError {
    #[error("no candidates supplied")]
    EmptyCandidates,
    #[error("empty candidate grid")]
    EmptyGrid,
    #[error(transparent)]
    Recal(#[from] RecalError),
}

/// Tolerances, weights and grids of the selectors. Defaults follow the
/// reported implementation; everything is configurable.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectorConfig {
    pub rho_grid: Vec<f64>,
    pub tuple_grid: Vec<f64>,
    /// stress exceedance may exceed alpha by at most this much
    pub tau_stress: f64,
    /// overall exceedance may deviate from alpha by at most this much
    pub tau_overall: f64,
    pub w_pinball: f64,
    pub w_capital: f64,
    /// penalty weight per unit of tolerance violation when nothing is feasible
    pub penalty: f64,
    /// quadratic smoothness weight of the regime-average selector
    pub lambda_smooth: f64,
    /// minimum stressed count targeted by the selection-stress relaxation
    pub min_stress_count: usize,
}

impl Default for SelectorConfig {
    fn default() -> Self {
        Self {
            rho_grid: (0..=10).map(|i| i as f64 / 10.0).collect(),
            tuple_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            tau_stress: 0.03,
            tau_overall: 0.02,
            w_pinball: 1.0,
            w_capital: 0.5,
            penalty: 100.0,
            lambda_smooth: 0.1,
            min_stress_count: 10,
        }
    }
}

/// One block of aligned per-date inputs.
#[derive(Debug, Clone, Copy)]
pub struct Block<'a> {
    pub targets: &'a [f64],
    pub baselines: &'a [f64],
    pub proxies: &'a [f64],
    pub regimes: &'a [Regime],
}

impl<'a> Block<'a> {
    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Scores of one candidate rule on the evaluation block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateEvaluation {
    pub rule: RecalRule,
    pub avg_capital: f64,
    pub overall_exceed: f64,
    /// `None` when the stress subset is empty even after relaxation
    pub stress_exceed: Option<f64>,
    pub stress_pinball: Option<f64>,
    pub feasible: bool,
    /// stress-aware base objective `w_pin * pinball + w_cap * capital`
    pub objective: f64,
}

/// Fits `rule` on the fit block and scores it on the evaluation block.
/// `stress_flags` mark the stress subset of the evaluation block.
pub fn evaluate_candidate(
    rule: &RecalRule,
    fit: &Block,
    eval: &Block,
    stress_flags: &[bool],
    alpha: f64,
    cfg: &SelectorConfig,
) -> Result<CandidateEvaluation, SelectError> {
    debug_assert_eq!(eval.len(), stress_flags.len());
    let cal = calibrate(
        rule,
        fit.targets,
        fit.baselines,
        fit.proxies,
        Some(fit.regimes),
        alpha,
    )?;
    let mut capital = 0.0;
    let mut exceed = 0usize;
    let mut stress_n = 0usize;
    let mut stress_hits = 0usize;
    let mut stress_pin = 0.0;
    for t in 0..eval.len() {
        let q = apply(&cal, eval.baselines[t], eval.proxies[t], Some(eval.regimes[t]))?;
        capital += (-q).max(0.0);
        let hit = eval.targets[t] <= q;
        if hit {
            exceed += 1;
        }
        if stress_flags[t] {
            stress_n += 1;
            if hit {
                stress_hits += 1;
            }
            stress_pin += pinball(eval.targets[t], q, alpha);
        }
    }
    let n = eval.len() as f64;
    let avg_capital = capital / n;
    let overall_exceed = exceed as f64 / n;
    let (stress_exceed, stress_pinball) = if stress_n > 0 {
        (
            Some(stress_hits as f64 / stress_n as f64),
            Some(stress_pin / stress_n as f64),
        )
    } else {
        (None, None)
    };
    let feasible = match stress_exceed {
        Some(se) => se <= alpha + cfg.tau_stress && (overall_exceed - alpha).abs() <= cfg.tau_overall,
        None => false,
    };
    let objective = cfg.w_pinball * stress_pinball.unwrap_or(0.0) + cfg.w_capital * avg_capital;
    Ok(CandidateEvaluation {
        rule: *rule,
        avg_capital,
        overall_exceed,
        stress_exceed,
        stress_pinball,
        feasible,
        objective,
    })
}

fn rho_key(rule: &RecalRule) -> (f64, f64, f64) {
    rule.as_tuple()
}

fn better(key_a: (f64, (f64, f64, f64)), key_b: (f64, (f64, f64, f64))) -> bool {
    // strictly smaller objective, or equal objective and lexicographically
    // smaller exponents
    key_a.0 < key_b.0 || (key_a.0 == key_b.0 && key_a.1 < key_b.1)
}

/// Capital-greedy scalar selector: argmin of average capital, ties toward
/// smaller reliance. Order-independent in the candidate list.
pub fn select_global_avg(candidates: &[CandidateEvaluation]) -> Result<RecalRule, SelectError> {
    if candidates.is_empty() {
        return Err(SelectError::EmptyCandidates);
    }
    let mut best = &candidates[0];
    for c in &candidates[1..] {
        if better(
            (c.avg_capital, rho_key(&c.rule)),
            (best.avg_capital, rho_key(&best.rule)),
        ) {
            best = c;
        }
    }
    Ok(best.rule)
}

fn violation(c: &CandidateEvaluation, alpha: f64, cfg: &SelectorConfig) -> f64 {
    let stress_v = match c.stress_exceed {
        Some(se) => (se - alpha - cfg.tau_stress).max(0.0),
        None => 0.0,
    };
    let overall_v = ((c.overall_exceed - alpha).abs() - cfg.tau_overall).max(0.0);
    stress_v + overall_v
}

/// Stress-aware selector: among feasible candidates the pinball/capital
/// trade-off decides; with an empty feasible set the tolerance violations are
/// penalized into the objective instead.
pub fn select_global_stress(
    candidates: &[CandidateEvaluation],
    alpha: f64,
    cfg: &SelectorConfig,
) -> Result<RecalRule, SelectError> {
    if candidates.is_empty() {
        return Err(SelectError::EmptyCandidates);
    }
    let any_feasible = candidates.iter().any(|c| c.feasible);
    let score = |c: &CandidateEvaluation| -> f64 {
        if any_feasible {
            if c.feasible {
                c.objective
            } else {
                f64::INFINITY
            }
        } else {
            c.objective + cfg.penalty * violation(c, alpha, cfg)
        }
    };
    let mut best = &candidates[0];
    for c in &candidates[1..] {
        if better((score(c), rho_key(&c.rule)), (score(best), rho_key(&best.rule))) {
            best = c;
        }
    }
    Ok(best.rule)
}

/// All monotone tuples `(l, m, h)` with `l >= m >= h` drawn from an ascending
/// grid, in ascending lexicographic order. The count is the multiset
/// coefficient C(g + 2, 3).
pub fn enumerate_monotone_tuples(grid: &[f64]) -> Result<Vec<RecalRule>, SelectError> {
    if grid.is_empty() {
        return Err(SelectError::EmptyGrid);
    }
    debug_assert!(grid.windows(2).all(|w| w[0] < w[1]), "grid must ascend");
    let mut out = Vec::new();
    for (i, &l) in grid.iter().enumerate() {
        for (j, &m) in grid[..=i].iter().enumerate() {
            for &h in &grid[..=j] {
                out.push(RecalRule::RegimeTuple { low: l, mid: m, high: h });
            }
        }
    }
    Ok(out)
}

/// Selector mode for the regime-tuple rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeMode {
    Average,
    Stress,
}

/// Regime-tuple selector. `Average` trades capital against tuple smoothness;
/// `Stress` applies the stress-aware feasibility-and-penalty logic (the
/// caller supplies stress metrics computed on the high-regime subset, falling
/// back to the selection-stress subset when that is empty).
pub fn select_regime(
    candidates: &[CandidateEvaluation],
    mode: RegimeMode,
    alpha: f64,
    cfg: &SelectorConfig,
) -> Result<RecalRule, SelectError> {
    if candidates.is_empty() {
        return Err(SelectError::EmptyCandidates);
    }
    match mode {
        RegimeMode::Average => {
            let score = |c: &CandidateEvaluation| -> f64 {
                let (l, m, h) = c.rule.as_tuple();
                c.avg_capital + cfg.lambda_smooth * ((l - m).powi(2) + (m - h).powi(2))
            };
            let mut best = &candidates[0];
            for c in &candidates[1..] {
                if better((score(c), rho_key(&c.rule)), (score(best), rho_key(&best.rule))) {
                    best = c;
                }
            }
            Ok(best.rule)
        }
        RegimeMode::Stress => select_global_stress(candidates, alpha, cfg),
    }
}

/// Picks the stress subset for the regime-stress selector: the high-regime
/// dates when any exist, otherwise the selection-stress flags.
pub fn resolve_regime_stress_flags(regimes: &[Regime], fallback: &[bool]) -> Vec<bool> {
    let high: Vec<bool> = regimes.iter().map(|&g| g == Regime::High).collect();
    if high.iter().any(|&f| f) {
        high
    } else {
        fallback.to_vec()
    }
}

/// The idealized screened selector analyzed in the theory: minimize capital
/// subject to a distortion tolerance, taking the LARGEST feasible candidate
/// among capital minimizers. Kept separate from the production selectors so
/// their low-reliance tie-break cannot contaminate the theory checks.
/// Returns the selected grid index, or `None` when nothing is feasible.
pub fn idealized_screened_select(delta: &[f64], capital: &[f64], tau: f64) -> Option<usize> {
    debug_assert_eq!(delta.len(), capital.len());
    let mut best: Option<usize> = None;
    for i in 0..delta.len() {
        if delta[i] <= tau {
            best = match best {
                None => Some(i),
                // <= keeps the largest index among equal-capital minimizers
                Some(b) if capital[i] <= capital[b] => Some(i),
                Some(b) => Some(b),
            };
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_cand(rho: f64, capital: f64) -> CandidateEvaluation {
        CandidateEvaluation {
            rule: RecalRule::Scalar(rho),
            avg_capital: capital,
            overall_exceed: 0.05,
            stress_exceed: Some(0.05),
            stress_pinball: Some(0.001),
            feasible: true,
            objective: 0.001 + 0.5 * capital,
        }
    }

    #[test]
    fn global_avg_argmin_and_tiebreak() {
        let c = vec![
            scalar_cand(0.0, 0.03),
            scalar_cand(0.5, 0.02),
            scalar_cand(1.0, 0.025),
        ];
        assert_eq!(select_global_avg(&c).unwrap(), RecalRule::Scalar(0.5));
        // all equal -> smallest rho
        let c = vec![scalar_cand(1.0, 0.02), scalar_cand(0.0, 0.02), scalar_cand(0.5, 0.02)];
        assert_eq!(select_global_avg(&c).unwrap(), RecalRule::Scalar(0.0));
        // singleton
        let c = vec![scalar_cand(0.7, 0.1)];
        assert_eq!(select_global_avg(&c).unwrap(), RecalRule::Scalar(0.7));
        assert_eq!(select_global_avg(&[]), Err(SelectError::EmptyCandidates));
    }

    #[test]
    fn global_avg_is_permutation_invariant() {
        let mut c = vec![
            scalar_cand(0.0, 0.030),
            scalar_cand(0.1, 0.029),
            scalar_cand(0.2, 0.031),
            scalar_cand(0.3, 0.029),
        ];
        let a = select_global_avg(&c).unwrap();
        c.reverse();
        let b = select_global_avg(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, RecalRule::Scalar(0.1)); // tie at 0.029 -> smaller rho
    }

    #[test]
    fn global_stress_feasibility_dominates() {
        let cfg = SelectorConfig::default();
        let mut a = scalar_cand(0.2, 0.02);
        a.feasible = true;
        a.objective = 10.0; // terrible objective but feasible
        let mut b = scalar_cand(0.8, 0.001);
        b.feasible = false;
        b.objective = 0.0001;
        let got = select_global_stress(&[b, a], 0.05, &cfg).unwrap();
        assert_eq!(got, RecalRule::Scalar(0.2));
    }

    #[test]
    fn global_stress_penalized_branch() {
        let cfg = SelectorConfig::default();
        // nobody feasible; candidate with the far smaller violation wins for
        // large penalty weight
        let mut a = scalar_cand(0.0, 0.02);
        a.feasible = false;
        a.stress_exceed = Some(0.30); // violation 0.30 - 0.05 - 0.03 = 0.22
        a.objective = 0.0;
        let mut b = scalar_cand(1.0, 0.02);
        b.feasible = false;
        b.stress_exceed = Some(0.09); // violation 0.01
        b.objective = 0.005;
        // hand evaluation: a -> 0 + 100 * 0.22 = 22; b -> 0.005 + 100*0.01 = 1.005
        let got = select_global_stress(&[a, b], 0.05, &cfg).unwrap();
        assert_eq!(got, RecalRule::Scalar(1.0));
        // identical candidates -> smallest rho
        let c = vec![scalar_cand(0.9, 0.02), scalar_cand(0.3, 0.02)];
        assert_eq!(
            select_global_stress(&c, 0.05, &cfg).unwrap(),
            RecalRule::Scalar(0.3)
        );
    }

    #[test]
    fn tuple_enumeration_counts() {
        let t = enumerate_monotone_tuples(&[0.0, 1.0]).unwrap();
        assert_eq!(t.len(), 4);
        assert!(t.contains(&RecalRule::RegimeTuple { low: 0.0, mid: 0.0, high: 0.0 }));
        assert!(t.contains(&RecalRule::RegimeTuple { low: 1.0, mid: 0.0, high: 0.0 }));
        assert!(t.contains(&RecalRule::RegimeTuple { low: 1.0, mid: 1.0, high: 0.0 }));
        assert!(t.contains(&RecalRule::RegimeTuple { low: 1.0, mid: 1.0, high: 1.0 }));
        let t = enumerate_monotone_tuples(&[0.0, 0.25, 0.5, 0.75, 1.0]).unwrap();
        assert_eq!(t.len(), 35); // C(7,3)
        assert!(t.iter().all(|r| r.validate().is_ok()));
        let t = enumerate_monotone_tuples(&[0.5]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(enumerate_monotone_tuples(&[]), Err(SelectError::EmptyGrid));
    }

    fn tuple_cand(l: f64, m: f64, h: f64, capital: f64) -> CandidateEvaluation {
        CandidateEvaluation {
            rule: RecalRule::RegimeTuple { low: l, mid: m, high: h },
            avg_capital: capital,
            overall_exceed: 0.05,
            stress_exceed: Some(0.05),
            stress_pinball: Some(0.001),
            feasible: true,
            objective: 0.001 + 0.5 * capital,
        }
    }

    #[test]
    fn regime_average_smoothness_and_ties() {
        let cfg = SelectorConfig::default();
        // equal capital everywhere: every equal-component tuple has zero
        // penalty, and (0,0,0) wins the lexicographic tie-break
        let grid = [0.0, 0.5, 1.0];
        let cands: Vec<CandidateEvaluation> = enumerate_monotone_tuples(&grid)
            .unwrap()
            .into_iter()
            .map(|r| {
                let (l, m, h) = r.as_tuple();
                tuple_cand(l, m, h, 0.02)
            })
            .collect();
        let got = select_regime(&cands, RegimeMode::Average, 0.05, &cfg).unwrap();
        assert_eq!(got, RecalRule::RegimeTuple { low: 0.0, mid: 0.0, high: 0.0 });

        // capital strongly favors (1,1,1); equal components carry no penalty
        let cands: Vec<CandidateEvaluation> = enumerate_monotone_tuples(&grid)
            .unwrap()
            .into_iter()
            .map(|r| {
                let (l, m, h) = r.as_tuple();
                let cap = if (l, m, h) == (1.0, 1.0, 1.0) { 0.005 } else { 0.02 };
                tuple_cand(l, m, h, cap)
            })
            .collect();
        let got = select_regime(&cands, RegimeMode::Average, 0.05, &cfg).unwrap();
        assert_eq!(got, RecalRule::RegimeTuple { low: 1.0, mid: 1.0, high: 1.0 });
    }

    #[test]
    fn regime_stress_flag_resolution() {
        use crate::state_model::Regime::*;
        // high-regime dates exist: they are the stress subset
        let flags = resolve_regime_stress_flags(&[Low, High, Mid, High], &[true, true, true, true]);
        assert_eq!(flags, vec![false, true, false, true]);
        // no high dates: fall back to the selection-stress flags
        let flags = resolve_regime_stress_flags(&[Low, Mid, Mid, Low], &[true, false, false, true]);
        assert_eq!(flags, vec![true, false, false, true]);
    }

    #[test]
    fn evaluate_candidate_metrics() {
        use crate::state_model::Regime;
        let cfg = SelectorConfig::default();
        // eval block where every target sits above every forecast: no
        // breaches, stress pinball is alpha * mean(y - q)
        let fit_y = vec![-0.01, -0.02, 0.005, 0.0, -0.005, 0.01];
        let fit_q = vec![-0.015; 6];
        let fit_v = vec![0.01; 6];
        let fit_g = vec![Regime::Mid; 6];
        let fit = Block {
            targets: &fit_y,
            baselines: &fit_q,
            proxies: &fit_v,
            regimes: &fit_g,
        };
        let eval_y = vec![0.02, 0.03];
        let eval_q = vec![-0.01, -0.01];
        let eval_v = vec![0.01; 2];
        let eval_g = vec![Regime::Mid; 2];
        let eval = Block {
            targets: &eval_y,
            baselines: &eval_q,
            proxies: &eval_v,
            regimes: &eval_g,
        };
        let rule = RecalRule::Scalar(0.0);
        let got = evaluate_candidate(&rule, &fit, &eval, &[true, true], 0.05, &cfg).unwrap();
        assert_eq!(got.overall_exceed, 0.0);
        assert_eq!(got.stress_exceed, Some(0.0));
        // c = min residual = -0.02 - (-0.015) = -0.005 (n=6, k=1)
        // forecasts: -0.01 - 0.005 = -0.015; pinball = 0.05 * (y + 0.015)
        let want_pin = 0.05 * ((0.02 + 0.015) + (0.03 + 0.015)) / 2.0;
        assert!((got.stress_pinball.unwrap() - want_pin).abs() < 1e-15);
        assert!((got.avg_capital - 0.015).abs() < 1e-15);

        // identical rules give identical evaluations
        let again = evaluate_candidate(&rule, &fit, &eval, &[true, true], 0.05, &cfg).unwrap();
        assert_eq!(got, again);

        // empty stress subset -> metrics are None and infeasible
        let got = evaluate_candidate(&rule, &fit, &eval, &[false, false], 0.05, &cfg).unwrap();
        assert_eq!(got.stress_exceed, None);
        assert!(!got.feasible);
    }

    #[test]
    fn perfectly_calibrated_baseline_recovers_nominal_coverage() {
        use crate::state_model::Regime;
        use rand::{Rng, SeedableRng};
        // iid gaussian targets with the true 5% quantile as baseline: the
        // fitted constant is near zero and evaluation exceedance sits at
        // alpha within binomial error
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let normal = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
            let u: f64 = rng.gen::<f64>().max(1e-12);
            let v: f64 = rng.gen();
            (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos()
        };
        let sigma = 0.01;
        let true_q = -1.6448536269514727 * sigma;
        let n_fit = 500;
        let n_eval = 5000;
        let gen_block = |rng: &mut rand_chacha::ChaCha8Rng, n: usize| {
            let y: Vec<f64> = (0..n).map(|_| sigma * normal(rng)).collect();
            (y, vec![true_q; n], vec![0.01; n], vec![Regime::Mid; n])
        };
        let (fy, fq, fv, fg) = gen_block(&mut rng, n_fit);
        let (ey, eq, ev, eg) = gen_block(&mut rng, n_eval);
        let fit = Block {
            targets: &fy,
            baselines: &fq,
            proxies: &fv,
            regimes: &fg,
        };
        let eval = Block {
            targets: &ey,
            baselines: &eq,
            proxies: &ev,
            regimes: &eg,
        };
        let cfg = SelectorConfig::default();
        let stress = vec![false; n_eval];
        let got = evaluate_candidate(&RecalRule::Scalar(0.5), &fit, &eval, &stress, 0.05, &cfg)
            .unwrap();
        let se = (0.05f64 * 0.95 / n_eval as f64).sqrt();
        assert!(
            (got.overall_exceed - 0.05).abs() <= 3.0 * se,
            "exceedance {} too far from alpha",
            got.overall_exceed
        );
    }

    #[test]
    fn idealized_selector_takes_largest_feasible() {
        // nonincreasing capital: any feasible minimizer is the largest index
        let delta = [0.0, 0.01, 0.02, 0.05, 0.09];
        let capital = [0.05, 0.04, 0.03, 0.02, 0.01];
        assert_eq!(idealized_screened_select(&delta, &capital, 0.02), Some(2));
        assert_eq!(idealized_screened_select(&delta, &capital, 0.10), Some(4));
        assert_eq!(idealized_screened_select(&delta, &capital, -0.1), None);
        // flat capital: still the largest feasible
        let flat = [0.02; 5];
        assert_eq!(idealized_screened_select(&delta, &flat, 0.05), Some(3));
    }
}
