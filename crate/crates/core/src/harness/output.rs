use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{AgentSpec, ExperimentConfig, PriorSpec};
use super::records::{write_series_csv, write_summary_csv};
use super::ExperimentResult;
use crate::error::Result;

/// A file and its git-style content hash: SHA-256 over `"blob <len>\0"`
/// followed by the bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

impl OutputFile {
    pub fn of(name: impl Into<String>, content: &[u8]) -> Self {
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", content.len()).as_bytes());
        h.update(content);
        Self {
            name: name.into(),
            bytes: content.len() as u64,
            sha256: hex::encode(h.finalize()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// Prior files the config points at.
    pub inputs: Vec<OutputFile>,
    pub outputs: Vec<OutputFile>,
    pub version: String,
}

pub const SERIES_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const REPORT_FILE: &str = "report.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

fn input_files(config: &ExperimentConfig) -> Result<Vec<OutputFile>> {
    let mut out = Vec::new();
    for a in &config.agents {
        if let AgentSpec::Spice {
            prior: PriorSpec::Tabular { path } | PriorSpec::Ensemble { path },
            ..
        } = a
        {
            out.push(OutputFile::of(path.display().to_string(), &fs::read(path)?));
        }
    }
    Ok(out)
}

/// Write CSVs, analysis, report and manifest into `dir`. Every byte is a pure
/// function of the config; where it was written and on how many threads are
/// left out of the manifest.
pub fn write_outputs(result: &ExperimentResult, config: &ExperimentConfig, dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut series = Vec::new();
    write_series_csv(&result.series, &mut series)?;
    let mut summary = Vec::new();
    write_summary_csv(&result.summaries, &mut summary)?;
    let analysis = serde_json::to_vec_pretty(&result.analysis)?;
    let files: [(&str, &[u8]); 4] = [
        (SERIES_FILE, &series),
        (SUMMARY_FILE, &summary),
        (ANALYSIS_FILE, &analysis),
        (REPORT_FILE, result.report.as_bytes()),
    ];
    let mut outputs = Vec::new();
    for (name, bytes) in files {
        fs::write(dir.join(name), bytes)?;
        outputs.push(OutputFile::of(name, bytes));
    }
    let mut recorded = config.clone();
    recorded.output_dir = None;
    recorded.workers = None;
    let manifest = Manifest {
        experiment: result.kind.name().to_string(),
        config_hash: config.hash()?,
        config: recorded,
        inputs: input_files(config)?,
        outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    Ok(serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?)
}
