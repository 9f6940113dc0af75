//! Configuration, run directories, and the command surface behind the
//! `varcal` binary.
//!
//! A run is described by a single TOML config file with a fail-closed schema
//! (unknown keys are errors). Every output file is written atomically and
//! listed with its SHA-256 in `manifest.json`; reports consume only
//! manifest-listed files. Outputs contain no timestamps, so identical
//! config + seed reproduce byte-identical run directories.

pub mod manifest;
pub mod report;
pub mod run;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::BaselineKind;
use crate::engine::{MethodKind, RunSpec, Scenario, WindowLayout};
use crate::market_data::{IngestError, SynthConfig};
use crate::selection::SelectorConfig;

/// Process exit codes of the binary.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAIL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(#[from] IngestError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("verification failed: {0}")]
    VerifyFailed(String),
    #[error("missing run artifact: {0}")]
    MissingRun(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_USAGE,
            CliError::Data(_) | CliError::Io { .. } | CliError::MissingRun(_) => EXIT_DATA,
            CliError::VerifyFailed(_) => EXIT_VERIFY_FAIL,
        }
    }
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Data source of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// `synth`, `csv`, or `remote`
    pub kind: String,
    /// asset symbols for `csv` / `remote`; ignored by `synth`
    pub assets: Vec<String>,
    /// directory holding `{asset}.csv` files (`csv` kind)
    pub dir: Option<String>,
    /// VIX file path (`csv` kind) or URL (`remote` kind)
    pub vix: Option<String>,
    /// URL template with `{symbol}` (`remote` kind)
    pub url_template: Option<String>,
    /// cache directory for remote downloads
    pub cache_dir: Option<String>,
    pub synth: SynthConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            kind: "synth".into(),
            assets: Vec::new(),
            dir: None,
            vix: None,
            url_template: None,
            cache_dir: None,
            synth: SynthConfig::default(),
        }
    }
}

/// The full run configuration. Defaults follow the reported implementation;
/// the parsed file is echoed verbatim into the run manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub alpha: f64,
    pub kappa: f64,
    /// trailing-window length of the GARCH-style proxy fits
    pub garch_lookback: usize,
    pub baselines: Vec<String>,
    pub methods: Vec<String>,
    pub scenarios: Vec<String>,
    pub layout: WindowLayout,
    pub selector: SelectorConfig,
    pub data: DataConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            alpha: 0.05,
            kappa: 0.4,
            garch_lookback: 252,
            baselines: vec!["hs".into(), "fhs".into(), "qr".into(), "gpq".into()],
            methods: MethodKind::ALL.iter().map(|m| m.as_str().to_string()).collect(),
            scenarios: vec!["clean".into(), "underreact".into()],
            layout: WindowLayout::default(),
            selector: SelectorConfig::default(),
            data: DataConfig::default(),
        }
    }
}

impl RunConfig {
    /// Parses a TOML config file; unknown keys fail closed.
    pub fn from_path(path: &Path) -> Result<(RunConfig, String), CliError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok((cfg, text))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(CliError::Config(format!(
                "alpha {} outside (0, 0.5)",
                self.alpha
            )));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(CliError::Config(format!(
                "kappa {} outside (0, 1)",
                self.kappa
            )));
        }
        self.layout
            .validate()
            .map_err(CliError::Config)?;
        self.parse_baselines()?;
        self.parse_methods()?;
        self.parse_scenarios()?;
        match self.data.kind.as_str() {
            "synth" => {}
            "csv" => {
                if self.data.dir.is_none() || self.data.vix.is_none() || self.data.assets.is_empty()
                {
                    return Err(CliError::Config(
                        "csv data needs `dir`, `vix` and a nonempty `assets` list".into(),
                    ));
                }
            }
            "remote" => {
                if self.data.url_template.is_none()
                    || self.data.vix.is_none()
                    || self.data.assets.is_empty()
                {
                    return Err(CliError::Config(
                        "remote data needs `url_template`, `vix` and `assets`".into(),
                    ));
                }
            }
            other => {
                return Err(CliError::Config(format!(
                    "unknown data kind `{other}` (expected synth, csv or remote)"
                )))
            }
        }
        Ok(())
    }

    pub fn parse_baselines(&self) -> Result<Vec<BaselineKind>, CliError> {
        self.baselines
            .iter()
            .map(|s| {
                BaselineKind::parse(s)
                    .ok_or_else(|| CliError::Config(format!("unknown baseline `{s}`")))
            })
            .collect()
    }

    pub fn parse_methods(&self) -> Result<Vec<MethodKind>, CliError> {
        self.methods
            .iter()
            .map(|s| {
                MethodKind::parse(s).ok_or_else(|| CliError::Config(format!("unknown method `{s}`")))
            })
            .collect()
    }

    pub fn parse_scenarios(&self) -> Result<Vec<Scenario>, CliError> {
        self.scenarios
            .iter()
            .map(|s| {
                Scenario::parse(s).ok_or_else(|| CliError::Config(format!("unknown scenario `{s}`")))
            })
            .collect()
    }

    /// The engine spec implied by this config (seed may be overridden by the
    /// command line).
    pub fn to_run_spec(&self, seed_override: Option<u64>) -> Result<RunSpec, CliError> {
        Ok(RunSpec {
            baselines: self.parse_baselines()?,
            methods: self.parse_methods()?,
            scenarios: self.parse_scenarios()?,
            alpha: self.alpha,
            kappa: self.kappa,
            layout: self.layout,
            selector: self.selector.clone(),
            seed: seed_override.unwrap_or(self.seed),
        })
    }
}

/// Glob-style cell filter over `asset/baseline/method/scenario`. Missing
/// trailing segments match everything; `*` matches within a segment.
#[derive(Debug, Clone)]
pub struct CellFilter {
    segments: Vec<String>,
}

impl CellFilter {
    pub fn parse(pattern: &str) -> Result<CellFilter, CliError> {
        let segments: Vec<String> = pattern.split('/').map(|s| s.to_string()).collect();
        if segments.len() > 4 {
            return Err(CliError::Config(format!(
                "cell filter `{pattern}` has more than 4 segments"
            )));
        }
        Ok(CellFilter { segments })
    }

    pub fn all() -> CellFilter {
        CellFilter {
            segments: Vec::new(),
        }
    }

    pub fn matches(&self, cell_id: &str) -> bool {
        let parts: Vec<&str> = cell_id.split('/').collect();
        for (pat, part) in self.segments.iter().zip(parts.iter()) {
            if !wildcard_match(pat, part) {
                return false;
            }
        }
        true
    }
}

fn wildcard_match(pattern: &str, text: &str) -> bool {
    let p: Vec<char> = pattern.chars().collect();
    let t: Vec<char> = text.chars().collect();
    fn rec(p: &[char], t: &[char]) -> bool {
        match p.first() {
            None => t.is_empty(),
            Some('*') => (0..=t.len()).any(|k| rec(&p[1..], &t[k..])),
            Some(&c) => !t.is_empty() && t[0] == c && rec(&p[1..], &t[1..]),
        }
    }
    rec(&p, &t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let spec = cfg.to_run_spec(None).unwrap();
        assert_eq!(spec.alpha, 0.05);
        assert_eq!(spec.methods.len(), 7);
    }

    #[test]
    fn unknown_keys_fail_closed() {
        let toml = "seed = 1\nnot_a_key = true\n";
        let err = toml::from_str::<RunConfig>(toml).unwrap_err();
        assert!(err.to_string().contains("not_a_key"));
    }

    #[test]
    fn unknown_names_are_config_errors() {
        let mut cfg = RunConfig::default();
        cfg.baselines = vec!["hs".into(), "garch".into()];
        assert!(matches!(cfg.validate(), Err(CliError::Config(_))));
        let mut cfg = RunConfig::default();
        cfg.methods = vec!["rho2".into()];
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig::default();
        cfg.data.kind = "database".into();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn csv_kind_requires_fields() {
        let mut cfg = RunConfig::default();
        cfg.data.kind = "csv".into();
        assert!(cfg.validate().is_err());
        cfg.data.dir = Some("d".into());
        cfg.data.vix = Some("v.csv".into());
        cfg.data.assets = vec!["SPY".into()];
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn cell_filter_globbing() {
        let f = CellFilter::parse("SYN0/hs/*/clean").unwrap();
        assert!(f.matches("SYN0/hs/rho0/clean"));
        assert!(f.matches("SYN0/hs/global_stress/clean"));
        assert!(!f.matches("SYN0/hs/rho0/underreact"));
        assert!(!f.matches("SYN1/hs/rho0/clean"));
        let f = CellFilter::parse("*/qr").unwrap();
        assert!(f.matches("SYN3/qr/base/clean"));
        assert!(!f.matches("SYN3/hs/base/clean"));
        let f = CellFilter::parse("SYN*").unwrap();
        assert!(f.matches("SYN11/gpq/rho1/clean"));
        assert!(CellFilter::all().matches("a/b/c/d"));
        assert!(CellFilter::parse("a/b/c/d/e").is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), EXIT_USAGE);
        assert_eq!(
            CliError::Data(IngestError::NoOverlap).exit_code(),
            EXIT_DATA
        );
        assert_eq!(CliError::VerifyFailed("x".into()).exit_code(), EXIT_VERIFY_FAIL);
    }
}
