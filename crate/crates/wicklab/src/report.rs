//! Run reports: verdict records, JSON manifest, CSV emission.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::{Result, WicklabError};

/// One pass/fail record: `pass == (measured <= threshold)` at creation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verdict {
    pub check: String,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn new(check: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Verdict {
            check: check.into(),
            measured,
            threshold,
            pass: measured.is_finite() && measured <= threshold,
        }
    }

    /// For checks of the form `measured >= floor` (growth exponents, margins).
    pub fn at_least(check: impl Into<String>, measured: f64, floor: f64) -> Self {
        Verdict {
            check: check.into(),
            measured,
            threshold: floor,
            pass: measured.is_finite() && measured >= floor,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub verdicts: Vec<Verdict>,
    pub runtime_ms: u128,
    pub artifacts: Vec<String>,
}

impl SuiteReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub timestamp: String,
    pub version: String,
    pub config: RunConfig,
    /// machine-parsable failure class; absent on success
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_code: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub manifest: Manifest,
    pub suites: Vec<SuiteReport>,
}

impl RunReport {
    pub fn new(config: &RunConfig) -> Self {
        RunReport {
            manifest: Manifest {
                timestamp: iso8601_now(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                config: config.clone(),
                error_code: None,
            },
            suites: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.manifest.error_code.is_none() && self.suites.iter().all(|s| s.all_pass())
    }

    pub fn write_json(&self, out_dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(out_dir)?;
        let path = out_dir.join("report.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| WicklabError::Internal(format!("report serialization: {e}")))?;
        fs::write(&path, text)?;
        Ok(path)
    }
}

/// Deterministic decimal rendering for CSV cells.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.17e}")
}

/// UTF-8 CSV with a header row, comma separator, '.' decimal point.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut f = fs::File::create(path)?;
    writeln!(f, "{}", header.join(","))?;
    for row in rows {
        debug_assert_eq!(row.len(), header.len());
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Current UTC time in ISO-8601 (`YYYY-MM-DDThh:mm:ssZ`), from the epoch
/// clock via the civil-from-days algorithm.
pub fn iso8601_now() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs() as i64)
        .unwrap_or(0);
    iso8601_from_epoch(secs)
}

fn iso8601_from_epoch(secs: i64) -> String {
    let days = secs.div_euclid(86_400);
    let rem = secs.rem_euclid(86_400);
    let (h, m, s) = (rem / 3600, (rem % 3600) / 60, rem % 60);
    // Gregorian civil date from day count (era decomposition)
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let mo = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = if mo <= 2 { y + 1 } else { y };
    format!("{y:04}-{mo:02}-{d:02}T{h:02}:{m:02}:{s:02}Z")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_pass_rule() {
        assert!(Verdict::new("x", 1e-12, 1e-10).pass);
        assert!(!Verdict::new("x", 1e-9, 1e-10).pass);
        assert!(!Verdict::new("x", f64::NAN, 1e-10).pass);
    }

    #[test]
    fn epoch_dates_render_correctly() {
        assert_eq!(iso8601_from_epoch(0), "1970-01-01T00:00:00Z");
        // leap-year boundary
        assert_eq!(iso8601_from_epoch(951_782_400), "2000-02-29T00:00:00Z");
        assert_eq!(iso8601_from_epoch(1_700_000_000), "2023-11-14T22:13:20Z");
    }

    #[test]
    fn csv_rows_are_deterministic() {
        let dir = std::env::temp_dir().join("wicklab-report-test");
        let path = dir.join("t.csv");
        let rows = vec![vec![fmt_num(1.0 / 3.0), fmt_num(-2.5e-11)]];
        write_csv(&path, &["a", "b"], &rows).unwrap();
        let first = std::fs::read(&path).unwrap();
        write_csv(&path, &["a", "b"], &rows).unwrap();
        assert_eq!(first, std::fs::read(&path).unwrap());
        assert!(String::from_utf8(first).unwrap().starts_with("a,b\n"));
    }
}
