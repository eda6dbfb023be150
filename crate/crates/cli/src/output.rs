//! Draws CSV, diagnostics JSON and run manifests.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use stiefel_givens::{ChartConfig, Fit, HmcConfig};

use crate::args::Command;
use crate::error::{CliError, CliResult};

/// The three files every sampling command writes.
pub struct RunFiles {
    pub draws: PathBuf,
    pub diag: PathBuf,
    pub manifest: PathBuf,
}

pub fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

impl RunFiles {
    pub fn new(prefix: &Path) -> Self {
        Self {
            draws: with_suffix(prefix, "-draws.csv"),
            diag: with_suffix(prefix, "-diag.json"),
            manifest: with_suffix(prefix, "-manifest.json"),
        }
    }

    /// Fail early, before any sampling, if the outputs cannot be created.
    pub fn probe(&self) -> CliResult<()> {
        for p in [&self.draws, &self.diag, &self.manifest] {
            create(p)?;
        }
        Ok(())
    }
}

pub fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

/// Header `chain,iter,<columns>`; one row per post-warmup draw, chains in
/// order. Values use the shortest representation that parses back exactly.
pub fn write_draws(path: &Path, fit: &Fit) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let err = |e: csv::Error| CliError::io(path, std::io::Error::other(e.to_string()));
    let mut header = vec!["chain".to_string(), "iter".to_string()];
    header.extend(fit.columns.iter().cloned());
    w.write_record(&header).map_err(err)?;
    let mut record = Vec::with_capacity(header.len());
    for (c, ch) in fit.chains.iter().enumerate() {
        for r in 0..ch.draws.nrows() {
            record.clear();
            record.push(c.to_string());
            record.push(r.to_string());
            record.extend(ch.draws.row(r).iter().map(f64::to_string));
            w.write_record(&record).map_err(err)?;
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ColumnDiag {
    pub name: String,
    pub rhat: f64,
    pub ess: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ChainDiag {
    pub accept_rate: f64,
    pub divergences: usize,
    pub warmup_divergences: usize,
    pub step_size: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub mean_rhat: f64,
    pub max_rhat: f64,
    pub mean_ess: f64,
    pub min_ess: f64,
    pub divergences: usize,
}

impl Summary {
    pub fn of(fit: &Fit) -> Self {
        let d = &fit.diagnostics;
        let k = d.rhat.len().max(1) as f64;
        Self {
            mean_rhat: d.rhat.iter().sum::<f64>() / k,
            max_rhat: d.rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean_ess: d.ess.iter().sum::<f64>() / k,
            min_ess: d.ess.iter().copied().fold(f64::INFINITY, f64::min),
            divergences: fit.total_divergences(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiagReport {
    pub columns: Vec<ColumnDiag>,
    pub summary: Summary,
    pub chains: Vec<ChainDiag>,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout: Option<HoldoutReport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HoldoutReport {
    pub fraction: f64,
    pub held_out_dyads: usize,
    pub log_predictive: f64,
    pub intercept_only: f64,
}

impl DiagReport {
    pub fn new(fit: &Fit, wall_time_s: f64, holdout: Option<HoldoutReport>) -> Self {
        let columns = fit
            .columns
            .iter()
            .zip(fit.diagnostics.rhat.iter().zip(&fit.diagnostics.ess))
            .map(|(name, (&rhat, &ess))| ColumnDiag {
                name: name.clone(),
                rhat,
                ess,
            })
            .collect();
        let chains = fit
            .chains
            .iter()
            .map(|c| ChainDiag {
                accept_rate: c.accept_rate,
                divergences: c.divergences,
                warmup_divergences: c.warmup_divergences,
                step_size: c.step_size,
            })
            .collect();
        Self {
            columns,
            summary: Summary::of(fit),
            chains,
            wall_time_s,
            holdout,
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// The parsed invocation; `replay` re-runs exactly this.
    pub invocation: Command,
    pub hmc: HmcConfig,
    pub chart: ChartConfig,
    pub seed: u64,
    pub version: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub diagnostics: Summary,
    pub outputs: Vec<PathBuf>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::io(path, e.into()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| CliError::io(path, e))
}

pub fn read_manifest(path: &Path) -> CliResult<RunManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: not a run manifest: {e}", path.display())))
}
