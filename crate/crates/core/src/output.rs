//! CSV and JSON emission of experiment results and tables.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::asymptotics::GammaRow;
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, ExperimentResult, OutputFormat};

pub const RESULT_HEADER: &str = "n,paths,mean_raw,std_raw,mean_corrected,std_corrected,stderr_corrected,skew_corrected,mean_gamma_n,mean_corrector,seed";

pub fn results_csv(result: &ExperimentResult) -> String {
    let mut out = String::new();
    out.push_str(RESULT_HEADER);
    out.push('\n');
    for r in &result.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.n,
            r.paths,
            r.mean_raw,
            r.std_raw,
            r.mean_corrected,
            r.std_corrected,
            r.stderr_corrected,
            r.skew_corrected,
            r.mean_gamma_n,
            r.mean_corrector,
            r.seed
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub config: ExperimentConfig,
    pub git_describe: String,
    /// Seconds since the Unix epoch when the file was written.
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultDocument {
    pub meta: Meta,
    #[serde(flatten)]
    pub result: ExperimentResult,
}

/// `git describe --always --dirty` of the working directory, or `unknown`.
pub fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "unknown".into())
}

pub fn results_json(result: &ExperimentResult, config: &ExperimentConfig) -> Result<String> {
    let timestamp = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let doc = ResultDocument {
        meta: Meta {
            config: config.clone(),
            git_describe: git_describe(),
            timestamp,
        },
        result: result.clone(),
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `result` as `<dir>/<stem>.csv` or `<dir>/<stem>.json`.
pub fn emit_results(
    result: &ExperimentResult,
    config: &ExperimentConfig,
    dir: &Path,
    stem: &str,
    format: OutputFormat,
) -> Result<PathBuf> {
    let (path, text) = match format {
        OutputFormat::Csv => (dir.join(format!("{stem}.csv")), results_csv(result)),
        OutputFormat::Json => (dir.join(format!("{stem}.json")), results_json(result, config)?),
    };
    write_file(&path, &text)?;
    Ok(path)
}

pub fn gamma_table_csv(rows: &[GammaRow]) -> String {
    let mut out = String::from("x,gamma_limit,corrector\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{}", r.x, r.gamma_limit, r.corrector);
    }
    out
}

/// Simple CSV from a header and rows of already formatted cells.
pub fn table_csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
