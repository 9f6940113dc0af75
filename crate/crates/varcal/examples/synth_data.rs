//! Generate a regime-switching synthetic panel and summarize it.
//!
//! ```bash
//! cargo run --example synth_data
//! ```

use varcal::market_data::{build_features, synth_generate, SynthConfig};
use varcal::stats::sample_sd;

fn main() {
    let cfg = SynthConfig {
        n_assets: 3,
        length: 1500,
        vols: vec![0.008, 0.018, 0.045],
        transition: vec![
            vec![0.990, 0.009, 0.001],
            vec![0.030, 0.950, 0.020],
            vec![0.020, 0.100, 0.880],
        ],
        t_dof: Some(6.0),
        ..SynthConfig::default()
    };
    let (assets, vix) = synth_generate(&cfg, 42).expect("valid config");

    println!("generated {} assets x {} bars (shared VIX path)", assets.len(), cfg.length);
    println!(
        "VIX range: {:.1} .. {:.1} points\n",
        vix.iter().cloned().fold(f64::INFINITY, f64::min),
        vix.iter().cloned().fold(0.0, f64::max)
    );

    for series in &assets {
        let returns: Vec<f64> = series
            .bars
            .windows(2)
            .map(|w| (w[1].close / w[0].close).ln())
            .collect();
        let panel = build_features(series).expect("long enough");
        let worst_dd = panel
            .rows
            .iter()
            .map(|r| r.drawdown_60)
            .fold(0.0f64, f64::min);
        println!(
            "{}: {} bars, realized daily sd {:.4}, {} feature rows, worst 60d drawdown {:.1}%",
            series.asset_id,
            series.len(),
            sample_sd(&returns),
            panel.len(),
            100.0 * worst_dd
        );
    }

    let first = &assets[0];
    println!("\nfirst rows of {}:", first.asset_id);
    println!("date        open     high     low      close    volume");
    for b in first.bars.iter().take(5) {
        println!(
            "{}  {:8.3} {:8.3} {:8.3} {:8.3} {:9.0}",
            b.date, b.open, b.high, b.low, b.close, b.volume
        );
    }
}
