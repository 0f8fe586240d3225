//! On-disk run outputs: manifest, traces, analysis tables, checkpoints.
//!
//! Every file of one invocation carries the same short hash of the run
//! manifest, so outputs of different configurations never collide and
//! identical invocations overwrite identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::experiment::{AnalysisRow, RunOutput};
use super::TaskSpec;
use crate::adapters::save_checkpoint;
use crate::analysis::{ConvergenceReport, WeylCheck};
use crate::error::Result;
use crate::linalg::format_value;
use crate::optimizer::{StepRecord, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub methods: Vec<String>,
    pub task: TaskSpec,
    pub config: TrainConfig,
    pub code_version: String,
}

impl RunManifest {
    pub fn new(command: &str, methods: Vec<String>, task: &TaskSpec, config: &TrainConfig) -> Self {
        Self {
            command: command.to_string(),
            methods,
            task: task.clone(),
            config: config.clone(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    /// First 12 hex digits of the SHA-256 of the manifest JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("manifest serializes");
        Sha256::digest(&json)[..6].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(format!("manifest-{}.json", self.hash()));
        fs::write(&path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(path)
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

pub fn write_trace(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["step", "train_loss", "reg_loss", "grad_norm", "eta_t"])?;
    for r in records {
        w.write_record([
            r.step.to_string(),
            format_value(r.train_loss),
            format_value(r.reg_loss),
            format_value(r.grad_norm),
            format_value(r.eta_t),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_analysis(path: &Path, rows: &[AnalysisRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "step",
        "delta_sigma",
        "delta_d",
        "kappa",
        "eps_grad",
        "weyl_bound",
        "weyl_gap",
        "flags",
    ])?;
    for r in rows {
        w.write_record([
            r.step.to_string(),
            format_value(r.delta_sigma),
            format_value(r.delta_d),
            opt(r.kappa),
            opt(r.eps_grad),
            opt(r.weyl_bound),
            opt(r.weyl_gap),
            r.flags(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_weyl(path: &Path, checks: &[WeylCheck]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "step",
        "branch_from",
        "eps_grad",
        "bound",
        "max_sigma_gap",
        "frobenius_gap",
        "satisfied",
    ])?;
    for c in checks {
        w.write_record([
            c.step.to_string(),
            c.branch_from.as_str().to_string(),
            format_value(c.eps_grad),
            format_value(c.bound),
            format_value(c.max_sigma_gap),
            format_value(c.frobenius_gap),
            c.satisfied.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_convergence(path: &Path, report: &ConvergenceReport) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}

/// Writes trace, analysis, and init/final checkpoints of one run.
pub fn write_run(dir: &Path, hash: &str, run: &RunOutput) -> Result<Vec<PathBuf>> {
    let label = &run.spec.label;
    let trace = dir.join(format!("trace-{label}-{hash}.csv"));
    let analysis = dir.join(format!("analysis-{label}-{hash}.csv"));
    let init = dir.join(format!("checkpoint-{label}-init-{hash}.ckpt"));
    let fin = dir.join(format!("checkpoint-{label}-final-{hash}.ckpt"));
    write_trace(&trace, &run.trace.records)?;
    write_analysis(&analysis, &run.analysis)?;
    save_checkpoint(&run.initial, run.config.seed, &init)?;
    save_checkpoint(&run.adapter, run.config.seed, &fin)?;
    Ok(vec![trace, analysis, init, fin])
}
