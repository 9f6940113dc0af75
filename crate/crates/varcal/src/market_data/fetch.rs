//! Remote CSV fetch adapter with a disk cache.
//!
//! A configured URL template with a `{symbol}` placeholder is fetched over
//! HTTP GET; the body must parse as the standard OHLCV CSV before it is
//! cached (atomically, write-then-rename). Any network or HTTP failure
//! surfaces as an error; there is no silent fallback.

use std::path::{Path, PathBuf};
use std::time::Duration;

use super::{ingest_str, AssetSeries, IngestError};

#[derive(Debug, Clone)]
pub struct RemoteSource {
    pub url_template: String,
    pub cache_dir: PathBuf,
}

impl RemoteSource {
    pub fn new(url_template: impl Into<String>, cache_dir: impl Into<PathBuf>) -> Self {
        Self {
            url_template: url_template.into(),
            cache_dir: cache_dir.into(),
        }
    }

    fn cache_path(&self, symbol: &str) -> PathBuf {
        self.cache_dir.join(format!("{symbol}.csv"))
    }

    /// Fetches (or loads from cache) and cleans the series for `symbol`.
    pub fn fetch(&self, symbol: &str) -> Result<AssetSeries, IngestError> {
        let path = self.cache_path(symbol);
        if path.exists() {
            return super::ingest_csv(&path, symbol);
        }
        let url = self.url_template.replace("{symbol}", symbol);
        let body = http_get(&url)?;
        // validate before caching so a failed download never leaves a
        // partial cache entry behind
        let series = ingest_str(&body, symbol, &url)?;
        std::fs::create_dir_all(&self.cache_dir).map_err(|e| IngestError::Io {
            path: self.cache_dir.display().to_string(),
            source: e,
        })?;
        atomic_write(&path, body.as_bytes()).map_err(|e| IngestError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Ok(series)
    }
}

/// Plain HTTP GET returning the body; non-2xx statuses are errors.
pub fn fetch_url(url: &str) -> Result<String, IngestError> {
    http_get(url)
}

fn http_get(url: &str) -> Result<String, IngestError> {
    let client = reqwest::blocking::Client::builder()
        .timeout(Duration::from_secs(30))
        .build()
        .map_err(|e| IngestError::Fetch {
            url: url.to_string(),
            detail: e.to_string(),
        })?;
    let resp = client.get(url).send().map_err(|e| IngestError::Fetch {
        url: url.to_string(),
        detail: e.to_string(),
    })?;
    if !resp.status().is_success() {
        return Err(IngestError::Fetch {
            url: url.to_string(),
            detail: format!("HTTP status {}", resp.status()),
        });
    }
    resp.text().map_err(|e| IngestError::Fetch {
        url: url.to_string(),
        detail: e.to_string(),
    })
}

/// Write-then-rename so readers never observe a partial file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let tmp = dir.join(format!(
        ".{}.tmp",
        path.file_name().map(|s| s.to_string_lossy()).unwrap_or_default()
    ));
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{Read, Write};
    use std::net::TcpListener;

    /// One-shot HTTP server returning a fixed response.
    fn serve_once(status: &'static str, body: &'static str) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        std::thread::spawn(move || {
            if let Ok((mut stream, _)) = listener.accept() {
                let mut buf = [0u8; 4096];
                let _ = stream.read(&mut buf);
                let resp = format!(
                    "HTTP/1.1 {status}\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{body}",
                    body.len()
                );
                let _ = stream.write_all(resp.as_bytes());
            }
        });
        format!("http://{addr}/data?symbol={{symbol}}")
    }

    const GOOD_CSV: &str = "date,open,high,low,close,volume\n2020-01-02,10,11,9,10.5,100\n2020-01-03,10.5,11,10,10.9,50\n";

    #[test]
    fn fetch_caches_validated_body() {
        let url = serve_once("200 OK", GOOD_CSV);
        let dir = tempfile::tempdir().unwrap();
        let src = RemoteSource::new(url, dir.path());
        let s = src.fetch("ABC").unwrap();
        assert_eq!(s.bars.len(), 2);
        let cached = dir.path().join("ABC.csv");
        assert!(cached.exists());
        // second fetch is served from cache (the one-shot server is gone)
        let s2 = src.fetch("ABC").unwrap();
        assert_eq!(s, s2);
    }

    #[test]
    fn http_error_leaves_no_cache() {
        let url = serve_once("500 Internal Server Error", "boom");
        let dir = tempfile::tempdir().unwrap();
        let src = RemoteSource::new(url, dir.path());
        match src.fetch("XYZ") {
            Err(IngestError::Fetch { detail, .. }) => assert!(detail.contains("500")),
            other => panic!("expected fetch error, got {other:?}"),
        }
        assert!(!dir.path().join("XYZ.csv").exists());
    }

    #[test]
    fn malformed_body_is_rejected_without_caching() {
        let url = serve_once("200 OK", "this,is,not\nthe,right,schema\n");
        let dir = tempfile::tempdir().unwrap();
        let src = RemoteSource::new(url, dir.path());
        assert!(matches!(
            src.fetch("BAD"),
            Err(IngestError::MalformedRow { .. })
        ));
        assert!(!dir.path().join("BAD.csv").exists());
    }
}
