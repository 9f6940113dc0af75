//! OHLCV + VIX ingestion and cleaning, log returns, and the predictor panel.
//!
//! Input CSVs use the header `date,open,high,low,close,volume` with ISO-8601
//! dates; the VIX file uses `date,vix`. Cleaning sorts by (date, volume),
//! keeps the last record per date, and enforces the bar invariants
//! (`high >= max(open, close)`, `low <= min(open, close)`, `low > 0`,
//! `volume >= 0`). The VIX merge is an inner join on trading date.

mod features;
pub mod fetch;
mod synth;

pub use features::{
    attach_garch_proxy, build_features, prepare_panel, FeaturePanel, FeatureRow, FEATURE_NAMES,
};
pub use synth::{synth_generate, SynthConfig};

use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed row {row} in {path}: {detail}")]
    MalformedRow {
        path: String,
        row: usize,
        detail: String,
    },
    #[error("no valid rows in {0}")]
    EmptySeries(String),
    #[error("bar invariant violated on {date}: {detail}")]
    OhlcViolation { date: NaiveDate, detail: String },
    #[error("no overlapping dates between series and VIX file")]
    NoOverlap,
    #[error("series too short: need at least {need}, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("remote fetch failed for {url}: {detail}")]
    Fetch { url: String, detail: String },
    #[error("bad synthetic config: {0}")]
    BadConfig(String),
}

/// One daily bar.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
}

impl Bar {
    /// Checks the OHLC invariants; returns a description of the violation.
    pub fn check(&self) -> Result<(), String> {
        if !(self.low > 0.0) {
            return Err(format!("low = {} must be positive", self.low));
        }
        if self.high < self.low {
            return Err(format!("high {} < low {}", self.high, self.low));
        }
        if self.high < self.open.max(self.close) {
            return Err(format!(
                "high {} below max(open, close) = {}",
                self.high,
                self.open.max(self.close)
            ));
        }
        if self.low > self.open.min(self.close) {
            return Err(format!(
                "low {} above min(open, close) = {}",
                self.low,
                self.open.min(self.close)
            ));
        }
        if self.volume < 0.0 {
            return Err(format!("volume {} negative", self.volume));
        }
        Ok(())
    }
}

/// A cleaned, date-sorted daily series, optionally merged with VIX levels.
#[derive(Debug, Clone, PartialEq)]
pub struct AssetSeries {
    pub asset_id: String,
    pub bars: Vec<Bar>,
    /// per-bar VIX level; empty until [`merge_vix`] has been applied
    pub vix: Vec<f64>,
}

impl AssetSeries {
    pub fn is_merged(&self) -> bool {
        !self.bars.is_empty() && self.vix.len() == self.bars.len()
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }
}

/// Parses and cleans a per-asset OHLCV CSV: sort by (date, volume), keep the
/// last record per date, enforce bar invariants.
pub fn ingest_csv(path: &Path, asset_id: &str) -> Result<AssetSeries, IngestError> {
    let mut file = std::fs::File::open(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut text = String::new();
    file.read_to_string(&mut text).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    ingest_str(&text, asset_id, &path.display().to_string())
}

/// CSV cleaning on an in-memory string; `origin` names the source in errors.
pub fn ingest_str(text: &str, asset_id: &str, origin: &str) -> Result<AssetSeries, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::MalformedRow {
            path: origin.to_string(),
            row: 0,
            detail: e.to_string(),
        })?
        .clone();
    let want = ["date", "open", "high", "low", "close", "volume"];
    let mut col = [0usize; 6];
    for (k, name) in want.iter().enumerate() {
        col[k] = headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::MalformedRow {
                path: origin.to_string(),
                row: 0,
                detail: format!("missing column `{name}`"),
            })?;
    }

    let mut bars: Vec<Bar> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IngestError::MalformedRow {
            path: origin.to_string(),
            row,
            detail: e.to_string(),
        })?;
        let field = |k: usize| -> Result<&str, IngestError> {
            rec.get(col[k]).ok_or_else(|| IngestError::MalformedRow {
                path: origin.to_string(),
                row,
                detail: "short record".into(),
            })
        };
        let date = NaiveDate::parse_from_str(field(0)?.trim(), "%Y-%m-%d").map_err(|e| {
            IngestError::MalformedRow {
                path: origin.to_string(),
                row,
                detail: format!("bad date: {e}"),
            }
        })?;
        let mut nums = [0f64; 5];
        for k in 1..6 {
            nums[k - 1] = field(k)?.trim().parse::<f64>().map_err(|e| {
                IngestError::MalformedRow {
                    path: origin.to_string(),
                    row,
                    detail: format!("bad number in `{}`: {e}", want[k]),
                }
            })?;
        }
        bars.push(Bar {
            date,
            open: nums[0],
            high: nums[1],
            low: nums[2],
            close: nums[3],
            volume: nums[4],
        });
    }
    if bars.is_empty() {
        return Err(IngestError::EmptySeries(origin.to_string()));
    }

    // sort by (date, volume) ascending; the last record per date wins
    bars.sort_by(|a, b| {
        a.date
            .cmp(&b.date)
            .then(a.volume.partial_cmp(&b.volume).unwrap_or(std::cmp::Ordering::Equal))
    });
    let mut dedup: Vec<Bar> = Vec::with_capacity(bars.len());
    for b in bars {
        match dedup.last() {
            Some(last) if last.date == b.date => {
                *dedup.last_mut().unwrap() = b;
            }
            _ => dedup.push(b),
        }
    }

    for b in &dedup {
        b.check().map_err(|detail| IngestError::OhlcViolation {
            date: b.date,
            detail,
        })?;
    }

    Ok(AssetSeries {
        asset_id: asset_id.to_string(),
        bars: dedup,
        vix: Vec::new(),
    })
}

/// Writes a series back out in the canonical input schema (plus a `vix`
/// column when merged). Ingesting the written file reproduces the series.
pub fn write_series_csv(series: &AssetSeries, path: &Path) -> Result<(), IngestError> {
    let mut out = String::new();
    if series.is_merged() {
        out.push_str("date,open,high,low,close,volume,vix\n");
    } else {
        out.push_str("date,open,high,low,close,volume\n");
    }
    for (i, b) in series.bars.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            b.date, b.open, b.high, b.low, b.close, b.volume
        ));
        if series.is_merged() {
            out.push_str(&format!(",{}", series.vix[i]));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

/// Reads a canonical merged-panel CSV produced by [`write_series_csv`].
pub fn read_panel_csv(path: &Path, asset_id: &str) -> Result<AssetSeries, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut series = ingest_str(&text, asset_id, &path.display().to_string())?;
    // optional vix column
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    if let Some(vix_col) = headers.iter().position(|h| h.trim() == "vix") {
        let mut vix = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| IngestError::MalformedRow {
                path: path.display().to_string(),
                row: 0,
                detail: e.to_string(),
            })?;
            let v: f64 = rec
                .get(vix_col)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| IngestError::MalformedRow {
                    path: path.display().to_string(),
                    row: 0,
                    detail: format!("bad vix: {e}"),
                })?;
            vix.push(v);
        }
        if vix.len() == series.bars.len() {
            series.vix = vix;
        }
    }
    Ok(series)
}

/// Inner-joins the series with a `date,vix` CSV on trading date; bars without
/// a VIX match are dropped.
pub fn merge_vix(series: &AssetSeries, vix_csv: &Path) -> Result<AssetSeries, IngestError> {
    let text = std::fs::read_to_string(vix_csv).map_err(|e| IngestError::Io {
        path: vix_csv.display().to_string(),
        source: e,
    })?;
    merge_vix_str(series, &text, &vix_csv.display().to_string())
}

/// [`merge_vix`] on an in-memory VIX CSV.
pub fn merge_vix_str(
    series: &AssetSeries,
    vix_text: &str,
    origin: &str,
) -> Result<AssetSeries, IngestError> {
    let mut rdr = csv::Reader::from_reader(vix_text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::MalformedRow {
            path: origin.to_string(),
            row: 0,
            detail: e.to_string(),
        })?
        .clone();
    let dcol = headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case("date"))
        .ok_or_else(|| IngestError::MalformedRow {
            path: origin.to_string(),
            row: 0,
            detail: "missing column `date`".into(),
        })?;
    let vcol = headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case("vix"))
        .ok_or_else(|| IngestError::MalformedRow {
            path: origin.to_string(),
            row: 0,
            detail: "missing column `vix`".into(),
        })?;
    let mut map = std::collections::BTreeMap::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| IngestError::MalformedRow {
            path: origin.to_string(),
            row,
            detail: e.to_string(),
        })?;
        let date = NaiveDate::parse_from_str(rec.get(dcol).unwrap_or("").trim(), "%Y-%m-%d")
            .map_err(|e| IngestError::MalformedRow {
                path: origin.to_string(),
                row,
                detail: format!("bad date: {e}"),
            })?;
        let level: f64 = rec.get(vcol).unwrap_or("").trim().parse().map_err(|e| {
            IngestError::MalformedRow {
                path: origin.to_string(),
                row,
                detail: format!("bad vix level: {e}"),
            }
        })?;
        if !(level > 0.0) {
            return Err(IngestError::MalformedRow {
                path: origin.to_string(),
                row,
                detail: format!("vix level {level} not positive"),
            });
        }
        map.insert(date, level);
    }

    let mut bars = Vec::new();
    let mut vix = Vec::new();
    for b in &series.bars {
        if let Some(&v) = map.get(&b.date) {
            bars.push(*b);
            vix.push(v);
        }
    }
    if bars.is_empty() {
        return Err(IngestError::NoOverlap);
    }
    Ok(AssetSeries {
        asset_id: series.asset_id.clone(),
        bars,
        vix,
    })
}

/// Close-to-close log returns; `out[i]` is the return from bar `i` to bar
/// `i+1`... more precisely `out[k] = ln(close[k+1] / close[k])`, so the
/// sequence is one shorter than the bars.
pub fn log_returns(series: &AssetSeries) -> Result<Vec<f64>, IngestError> {
    if series.bars.len() < 2 {
        return Err(IngestError::TooShort {
            need: 2,
            got: series.bars.len(),
        });
    }
    Ok(series
        .bars
        .windows(2)
        .map(|w| (w[1].close / w[0].close).ln())
        .collect())
}
