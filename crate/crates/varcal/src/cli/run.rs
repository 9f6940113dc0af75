//! The `ingest` and `backtest` commands: data loading, panel preparation,
//! the cell matrix, record CSVs, and the summary JSON.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{Manifest, RunWriter};
use super::{CellFilter, CliError, RunConfig};
use crate::baselines::BaselineKind;
use crate::engine::{
    pool_records, run_backtest_with_diagnostics, CellAudit, CellRecords, ForecastRecord,
    MethodKind, Scenario,
};
use crate::evaluation::summarize;
use crate::market_data::{
    self, fetch::RemoteSource, merge_vix, merge_vix_str, prepare_panel, synth_generate,
    AssetSeries, FeaturePanel,
};
use crate::state_model::Regime;
use crate::stats::{mix_seed, seed_of_str};

/// Fixed record CSV header.
pub const RECORD_HEADER: &str = "asset,date,y,baseline_q,adjusted_q,shift,hit,method,baseline,scenario,rho_low,rho_mid,rho_high,rho_eff,c,v,regime,strict_stress";

/// Loads the configured data source and returns merged per-asset series.
pub fn load_series(cfg: &RunConfig, seed: u64) -> Result<Vec<AssetSeries>, CliError> {
    match cfg.data.kind.as_str() {
        "synth" => {
            let (assets, _) = synth_generate(&cfg.data.synth, seed)?;
            Ok(assets)
        }
        "csv" => {
            let dir = PathBuf::from(cfg.data.dir.as_ref().expect("validated"));
            let vix = PathBuf::from(cfg.data.vix.as_ref().expect("validated"));
            cfg.data
                .assets
                .iter()
                .map(|asset| {
                    let series = market_data::ingest_csv(&dir.join(format!("{asset}.csv")), asset)?;
                    Ok(merge_vix(&series, &vix)?)
                })
                .collect()
        }
        "remote" => {
            let cache = cfg
                .data
                .cache_dir
                .clone()
                .unwrap_or_else(|| ".varcal-cache".into());
            let src = RemoteSource::new(
                cfg.data.url_template.clone().expect("validated"),
                &cache,
            );
            let vix_spec = cfg.data.vix.as_ref().expect("validated");
            let vix_text = if vix_spec.starts_with("http://") || vix_spec.starts_with("https://") {
                market_data::fetch::fetch_url(vix_spec)?
            } else {
                std::fs::read_to_string(vix_spec).map_err(super::io_err(Path::new(vix_spec)))?
            };
            cfg.data
                .assets
                .iter()
                .map(|asset| {
                    let series = src.fetch(asset)?;
                    Ok(merge_vix_str(&series, &vix_text, vix_spec)?)
                })
                .collect()
        }
        _ => unreachable!("validated"),
    }
}

/// Builds the fully prepared feature panels (GARCH proxy attached). Returns
/// panels and per-asset proxy fallback counts.
pub fn prepare_panels(
    cfg: &RunConfig,
    seed: u64,
) -> Result<Vec<(FeaturePanel, usize)>, CliError> {
    let series = load_series(cfg, seed)?;
    let panels: Vec<Result<(FeaturePanel, usize), CliError>> = series
        .par_iter()
        .map(|s| {
            let proxy_seed = mix_seed(&[seed, seed_of_str(&s.asset_id), 0x9a2c]);
            Ok(prepare_panel(s, cfg.garch_lookback, proxy_seed)?)
        })
        .collect();
    panels.into_iter().collect()
}

/// `ingest`: clean + merge the configured data and cache canonical panel
/// CSVs under `out/panels/`. Re-running on unchanged inputs rewrites nothing
/// (checksums match).
pub fn cmd_ingest(config_path: &Path, out: &Path) -> Result<(), CliError> {
    let (cfg, echo) = RunConfig::from_path(config_path)?;
    let series = load_series(&cfg, cfg.seed)?;
    let mut writer = RunWriter::new(out, "ingest", cfg.seed, &echo)?;
    let mut changed = 0usize;
    for s in &series {
        let mut body = String::from("date,open,high,low,close,volume,vix\n");
        for (i, b) in s.bars.iter().enumerate() {
            body.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                b.date, b.open, b.high, b.low, b.close, b.volume, s.vix[i]
            ));
        }
        if writer.write(&format!("panels/{}.csv", s.asset_id), body.as_bytes())? {
            changed += 1;
        }
    }
    writer.finalize()?;
    println!(
        "ingested {} assets into {} ({} file(s) updated)",
        series.len(),
        out.display(),
        changed
    );
    Ok(())
}

/// One cell of the summary JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CellSummary {
    pub asset: String,
    pub baseline: String,
    pub method: String,
    pub scenario: String,
    pub metrics: serde_json::Value,
    pub audit: serde_json::Value,
}

/// Pooled (cross-asset) summary entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PooledSummary {
    pub baseline: String,
    pub method: String,
    pub scenario: String,
    pub n_assets: usize,
    pub metrics: serde_json::Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelAudit {
    pub asset: String,
    pub rows: usize,
    pub origins: usize,
    pub garch_proxy_fallback_rows: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub schema_version: u32,
    pub alpha: f64,
    pub kappa: f64,
    pub seed: u64,
    pub panels: Vec<PanelAudit>,
    pub cells: Vec<CellSummary>,
    pub pooled: Vec<PooledSummary>,
}

/// `backtest`: run the configured cell matrix and write records, summary and
/// manifest under `out`.
pub fn cmd_backtest(
    config_path: &Path,
    out: &Path,
    seed_override: Option<u64>,
    workers: Option<usize>,
    filter: &CellFilter,
) -> Result<(), CliError> {
    let (cfg, echo) = RunConfig::from_path(config_path)?;
    let spec = cfg.to_run_spec(seed_override)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;

    let (panels, cells, diagnostics) = pool.install(|| -> Result<_, CliError> {
        let panels = prepare_panels(&cfg, spec.seed)?;
        let mut cells = Vec::new();
        let mut diagnostics = Vec::new();
        for (panel, _) in &panels {
            let (c, d) = run_backtest_with_diagnostics(panel, &spec);
            cells.extend(c.into_iter().filter(|c| filter.matches(&c.cell_id())));
            diagnostics.extend(d);
        }
        Ok((panels, cells, diagnostics))
    })?;

    let mut writer = RunWriter::new(out, "backtest", spec.seed, &echo)?;
    write_backtest_outputs(&mut writer, &cfg, &spec.seed, &panels, &cells)?;
    for d in &diagnostics {
        // keep fit diagnostics only for baselines that survived the filter
        if !cells
            .iter()
            .any(|c| c.asset == d.asset && c.baseline == d.baseline)
        {
            continue;
        }
        let mut body = String::from("date,converged,fallback,log_likelihood\n");
        for o in &d.origins {
            body.push_str(&format!(
                "{},{},{},{}\n",
                o.date,
                u8::from(o.converged),
                u8::from(o.fallback),
                o.log_likelihood.map(|l| l.to_string()).unwrap_or_default()
            ));
        }
        writer.write(
            &format!("diagnostics/{}__{}.csv", d.asset, d.baseline.as_str()),
            body.as_bytes(),
        )?;
    }
    writer.finalize()?;
    println!(
        "wrote {} cells over {} assets to {}",
        cells.len(),
        panels.len(),
        out.display()
    );
    Ok(())
}

pub(crate) fn write_backtest_outputs(
    writer: &mut RunWriter,
    cfg: &RunConfig,
    seed: &u64,
    panels: &[(FeaturePanel, usize)],
    cells: &[CellRecords],
) -> Result<(), CliError> {
    // per-cell record CSVs
    for cell in cells {
        let mut body = String::with_capacity(cell.records.len() * 160 + 64);
        body.push_str(RECORD_HEADER);
        body.push('\n');
        for r in &cell.records {
            body.push_str(&record_csv_row(&cell.asset, cell.baseline, cell.method, cell.scenario, r));
            body.push('\n');
        }
        let name = format!(
            "records/{}__{}__{}__{}.csv",
            cell.asset,
            cell.baseline.as_str(),
            cell.method.as_str(),
            cell.scenario.as_str()
        );
        writer.write(&name, body.as_bytes())?;
    }

    // summary JSON: per-cell metrics + pooled metrics per (baseline, method,
    // scenario) over the assets present
    let cell_summaries: Vec<CellSummary> = cells
        .iter()
        .map(|c| {
            let m = summarize(&c.records, cfg.alpha);
            CellSummary {
                asset: c.asset.clone(),
                baseline: c.baseline.as_str().into(),
                method: c.method.as_str().into(),
                scenario: c.scenario.as_str().into(),
                metrics: serde_json::to_value(&m).expect("metrics serialize"),
                audit: serde_json::to_value(&c.audit).expect("audit serialize"),
            }
        })
        .collect();

    let mut pooled = Vec::new();
    let mut groups: Vec<(BaselineKind, MethodKind, Scenario)> = cells
        .iter()
        .map(|c| (c.baseline, c.method, c.scenario))
        .collect();
    groups.sort_by_key(|g| (g.0.as_str(), g.1.as_str(), g.2.as_str()));
    groups.dedup();
    for (bk, mk, sc) in groups {
        let members: Vec<&CellRecords> = cells
            .iter()
            .filter(|c| c.baseline == bk && c.method == mk && c.scenario == sc)
            .collect();
        let pooled_records: Vec<ForecastRecord> = pool_records(members.iter().copied())
            .into_iter()
            .map(|(_, r)| r)
            .collect();
        pooled.push(PooledSummary {
            baseline: bk.as_str().into(),
            method: mk.as_str().into(),
            scenario: sc.as_str().into(),
            n_assets: members.len(),
            metrics: serde_json::to_value(&summarize(&pooled_records, cfg.alpha))
                .expect("metrics serialize"),
        });
    }

    let summary = RunSummary {
        schema_version: 1,
        alpha: cfg.alpha,
        kappa: cfg.kappa,
        seed: *seed,
        panels: panels
            .iter()
            .map(|(p, fallbacks)| PanelAudit {
                asset: p.asset_id.clone(),
                rows: p.len(),
                origins: crate::engine::plan_origins(p.len(), &cfg.layout).len(),
                garch_proxy_fallback_rows: *fallbacks,
            })
            .collect(),
        cells: cell_summaries,
        pooled,
    };
    let text = serde_json::to_string_pretty(&summary).expect("summary serialize");
    writer.write("summary.json", text.as_bytes())?;
    Ok(())
}

pub(crate) fn record_csv_row(
    asset: &str,
    baseline: BaselineKind,
    method: MethodKind,
    scenario: Scenario,
    r: &ForecastRecord,
) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        asset,
        r.date,
        r.y,
        r.baseline_q,
        r.adjusted_q,
        r.shift,
        u8::from(r.hit),
        method.as_str(),
        baseline.as_str(),
        scenario.as_str(),
        r.rho_low,
        r.rho_mid,
        r.rho_high,
        r.rho_eff,
        r.c,
        r.v,
        r.regime.as_str(),
        u8::from(r.strict_stress),
    )
}

/// Reads a record CSV back (used by reports and tests).
pub fn read_records_csv(path: &Path) -> Result<Vec<(String, ForecastRecord)>, CliError> {
    let text = std::fs::read_to_string(path).map_err(super::io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != RECORD_HEADER {
                return Err(CliError::MissingRun(format!(
                    "unexpected record header in {}",
                    path.display()
                )));
            }
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 18 {
            return Err(CliError::MissingRun(format!(
                "bad record row {} in {}",
                i,
                path.display()
            )));
        }
        let parse = |s: &str| -> f64 { s.parse().unwrap_or(f64::NAN) };
        out.push((
            f[0].to_string(),
            ForecastRecord {
                date: NaiveDate::parse_from_str(f[1], "%Y-%m-%d")
                    .map_err(|e| CliError::MissingRun(format!("bad date: {e}")))?,
                y: parse(f[2]),
                baseline_q: parse(f[3]),
                adjusted_q: parse(f[4]),
                shift: parse(f[5]),
                hit: f[6] == "1",
                rho_low: parse(f[10]),
                rho_mid: parse(f[11]),
                rho_high: parse(f[12]),
                rho_eff: parse(f[13]),
                c: parse(f[14]),
                v: parse(f[15]),
                regime: match f[16] {
                    "low" => Regime::Low,
                    "high" => Regime::High,
                    _ => Regime::Mid,
                },
                strict_stress: f[17] == "1",
            },
        ));
    }
    Ok(out)
}

/// Parsed summary loader for reports.
pub fn load_summary(root: &Path, manifest: &Manifest) -> Result<RunSummary, CliError> {
    if !manifest.files.iter().any(|f| f.path == "summary.json") {
        return Err(CliError::MissingRun("summary.json not in manifest".into()));
    }
    let text = std::fs::read_to_string(root.join("summary.json"))
        .map_err(|_| CliError::MissingRun("summary.json unreadable".into()))?;
    serde_json::from_str(&text).map_err(|e| CliError::MissingRun(format!("summary.json: {e}")))
}

/// Audit container re-export for summaries.
pub type EngineCellAudit = CellAudit;
