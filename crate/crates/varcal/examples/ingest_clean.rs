//! Ingest a messy OHLCV CSV (duplicates, unsorted rows), merge it with VIX,
//! and show what the cleaning pipeline does.
//!
//! ```bash
//! cargo run --example ingest_clean
//! ```

use varcal::market_data::{ingest_str, log_returns, merge_vix_str};

fn main() {
    // out-of-order rows plus a duplicated date; the higher-volume record wins
    let raw = "\
date,open,high,low,close,volume
2024-01-04,101.2,102.0,100.8,101.7,90000
2024-01-02,100.0,101.0,99.5,100.6,120000
2024-01-03,100.6,101.5,100.1,101.2,80000
2024-01-03,100.6,101.9,100.0,101.4,150000
2024-01-05,101.7,102.4,101.0,102.1,95000
";
    let series = ingest_str(raw, "DEMO", "inline").expect("clean ingest");
    println!("cleaned series ({} rows, duplicates collapsed):", series.len());
    for b in &series.bars {
        println!("  {}  close {:7.2}  volume {:7.0}", b.date, b.close, b.volume);
    }

    // inner join with VIX: the missing 2024-01-05 level drops that bar
    let vix = "\
date,vix
2024-01-02,13.2
2024-01-03,13.8
2024-01-04,15.1
";
    let merged = merge_vix_str(&series, vix, "inline").expect("overlap exists");
    println!("\nafter VIX merge: {} rows retained", merged.len());
    for (b, v) in merged.bars.iter().zip(merged.vix.iter()) {
        println!("  {}  close {:7.2}  vix {:4.1}", b.date, b.close, v);
    }

    let r = log_returns(&merged).expect("two or more bars");
    println!("\nlog returns: {r:.7?}");
}
