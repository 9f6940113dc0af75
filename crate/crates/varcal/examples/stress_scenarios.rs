//! Clean vs underreacting-proxy comparison: the stressed-state fragility of
//! high proxy reliance, on a multi-asset regime-switching panel.
//!
//! ```bash
//! cargo run --example stress_scenarios
//! ```

use varcal::baselines::BaselineKind;
use varcal::engine::{pool_records, run_backtest, CellRecords, MethodKind, RunSpec, Scenario};
use varcal::market_data::{prepare_panel, synth_generate, SynthConfig};

fn main() {
    let cfg = SynthConfig {
        n_assets: 6,
        length: 2642,
        vols: vec![0.007, 0.015, 0.05],
        transition: vec![
            vec![0.990, 0.009, 0.001],
            vec![0.030, 0.950, 0.020],
            vec![0.020, 0.100, 0.880],
        ],
        t_dof: None,
        vix_noise_sd: 0.3,
        ..SynthConfig::default()
    };
    let (assets, _) = synth_generate(&cfg, 31).unwrap();
    let spec = RunSpec {
        baselines: vec![BaselineKind::Hs],
        methods: vec![
            MethodKind::Base,
            MethodKind::Rho0,
            MethodKind::Rho1,
            MethodKind::GlobalStress,
        ],
        scenarios: vec![Scenario::Clean, Scenario::Underreact],
        seed: 7,
        ..RunSpec::default()
    };
    let cells: Vec<CellRecords> = assets
        .iter()
        .flat_map(|a| {
            let (panel, _) = prepare_panel(a, 252, 77).unwrap();
            run_backtest(&panel, &spec)
        })
        .collect();

    let stress_exceed = |mk: MethodKind, sc: Scenario| -> (f64, f64) {
        let members: Vec<&CellRecords> = cells
            .iter()
            .filter(|c| c.method == mk && c.scenario == sc)
            .collect();
        let pooled = pool_records(members.into_iter());
        let stress: Vec<_> = pooled.iter().filter(|(_, r)| r.strict_stress).collect();
        let hits = stress.iter().filter(|(_, r)| r.hit).count();
        let cap: f64 = stress.iter().map(|(_, r)| (-r.adjusted_q).max(0.0)).sum();
        (
            hits as f64 / stress.len().max(1) as f64,
            cap / stress.len().max(1) as f64,
        )
    };

    println!(
        "pooled strict-stress exceedance (kappa = {}), HS baseline\n",
        spec.kappa
    );
    println!("method         clean     underreact  delta     stressed cap (c/u)");
    for mk in &spec.methods {
        let (ce, cc) = stress_exceed(*mk, Scenario::Clean);
        let (ue, uc) = stress_exceed(*mk, Scenario::Underreact);
        println!(
            "{:<13} {ce:.4}    {ue:.4}      {:+.4}   {cc:.4} / {uc:.4}",
            mk.as_str(),
            ue - ce,
        );
    }
    println!(
        "\nthe zero-reliance rule is exactly immune to the distortion, while\n\
         full reliance pays for its state responsiveness precisely where the\n\
         proxy underreacts. (on dates where the calibration constant comes\n\
         out positive the shrink works the other way, so small panels can\n\
         show the reverse sign.)"
    );
}
