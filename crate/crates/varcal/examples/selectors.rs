//! Inside rule selection at one forecast origin: the candidate table the
//! selectors see and what each of them picks.
//!
//! ```bash
//! cargo run --example selectors
//! ```

use varcal::baselines::{forecast, BaselineInputs, BaselineKind};
use varcal::engine::WindowLayout;
use varcal::market_data::{prepare_panel, synth_generate, SynthConfig};
use varcal::selection::{
    enumerate_monotone_tuples, evaluate_candidate, select_global_avg, select_global_stress,
    select_regime, Block, RegimeMode, SelectorConfig,
};
use varcal::recalibration::RecalRule;
use varcal::state_model::{regime_labels, selection_stress_flags};

fn main() {
    let cfg = SynthConfig {
        n_assets: 1,
        length: 1000,
        vols: vec![0.009, 0.02, 0.05],
        transition: vec![
            vec![0.99, 0.009, 0.001],
            vec![0.03, 0.95, 0.02],
            vec![0.02, 0.10, 0.88],
        ],
        ..SynthConfig::default()
    };
    let (assets, _) = synth_generate(&cfg, 23).unwrap();
    let (panel, _) = prepare_panel(&assets[0], 252, 5).unwrap();

    let lay = WindowLayout::default();
    let t = lay.history_len(); // the first forecast origin
    let train: Vec<usize> = (t - lay.history_len()..t - lay.history_len() + lay.train_len).collect();
    let span: Vec<usize> = (train[train.len() - 1] + 1..=t).collect();

    let vix: Vec<f64> = panel.rows.iter().map(|r| r.vix_daily).collect();
    let roll: Vec<f64> = panel.rows.iter().map(|r| r.roll_vol_20).collect();
    let garch: Vec<f64> = panel.rows.iter().map(|r| r.garch_vol_proxy).collect();
    let proxy =
        varcal::state_model::composite_proxy(&roll, &garch, &vix, &train, &span).unwrap();
    let regimes = regime_labels(&vix, &train, &span).unwrap();

    let fit_r = 0..lay.fit_len;
    let eval_r = lay.fit_len..lay.select_len();
    let eval_idx: Vec<usize> = span[eval_r.clone()].to_vec();
    let (stress_flags, audit) = selection_stress_flags(&vix, &train, &eval_idx, 10).unwrap();
    println!(
        "selection stress subset: {} of {} eval days flagged at the {}th percentile{}",
        audit.flagged,
        eval_idx.len(),
        audit.percentile,
        if audit.exhausted { " (exhausted)" } else { "" }
    );

    let bl = forecast(
        BaselineKind::Hs,
        &BaselineInputs {
            train: &panel.rows[train[0]..=train[train.len() - 1]],
            eval: &panel.rows[span[0]..=t],
            alpha: 0.05,
            seed: 1,
        },
    )
    .unwrap();
    let targets: Vec<f64> = span.iter().map(|&i| panel.rows[i].target).collect();

    let scfg = SelectorConfig::default();
    let block = |r: std::ops::Range<usize>| Block {
        targets: &targets[r.clone()],
        baselines: &bl.values[r.clone()],
        proxies: &proxy.values[r.clone()],
        regimes: &regimes[r],
    };

    println!("\nrho    avg cap.   overall ex.  stress ex.  feasible");
    let mut cands = Vec::new();
    for i in 0..=10 {
        let rho = i as f64 / 10.0;
        let c = evaluate_candidate(
            &RecalRule::Scalar(rho),
            &block(fit_r.clone()),
            &block(eval_r.clone()),
            &stress_flags,
            0.05,
            &scfg,
        )
        .unwrap();
        println!(
            "{rho:.1}  {:.6}  {:.4}       {:<10} {}",
            c.avg_capital,
            c.overall_exceed,
            c.stress_exceed
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "n/a".into()),
            c.feasible
        );
        cands.push(c);
    }
    println!(
        "\nglobal_avg    -> {:?}",
        select_global_avg(&cands).unwrap()
    );
    println!(
        "global_stress -> {:?}",
        select_global_stress(&cands, 0.05, &scfg).unwrap()
    );

    let tuples = enumerate_monotone_tuples(&scfg.tuple_grid).unwrap();
    let tuple_cands: Vec<_> = tuples
        .iter()
        .map(|r| {
            evaluate_candidate(
                r,
                &block(fit_r.clone()),
                &block(eval_r.clone()),
                &stress_flags,
                0.05,
                &scfg,
            )
            .unwrap()
        })
        .collect();
    println!(
        "regime_avg    -> {:?} (over {} monotone tuples)",
        select_regime(&tuple_cands, RegimeMode::Average, 0.05, &scfg).unwrap(),
        tuples.len()
    );
    println!(
        "regime_stress -> {:?}",
        select_regime(&tuple_cands, RegimeMode::Stress, 0.05, &scfg).unwrap()
    );
}
