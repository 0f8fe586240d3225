//! Training runs with per-snapshot analysis, and multi-method comparisons.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::Task;
use crate::adapters::{Adapter, Method};
use crate::analysis::{self, RunLabel, TwinRun};
use crate::error::{Error, Result};
use crate::linalg;
use crate::optimizer::{self, MetricsTrace, Snapshot, TrainConfig};

/// Peak rate used by the desk-scale experiment preset.
pub const DESK_ETA_MAX: f64 = 3e-2;

/// Reference hyperparameters with the peak learning rate raised to
/// [`DESK_ETA_MAX`], which is what plain gradient descent needs to make
/// visible progress on the default 16×12 tasks within 500 steps.
pub fn desk_config(seed: u64) -> TrainConfig {
    TrainConfig {
        eta_max: DESK_ETA_MAX,
        seed,
        ..TrainConfig::default()
    }
}

/// A method plus an optional regularizer override, e.g. `sorsa-noreg`.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub label: String,
    pub method: Method,
    pub gamma: Option<f64>,
}

impl MethodSpec {
    pub fn new(method: Method) -> Self {
        Self {
            label: method.as_str().to_string(),
            method,
            gamma: None,
        }
    }

    /// The configuration this method actually trains with.
    pub fn config(&self, base: &TrainConfig) -> TrainConfig {
        TrainConfig {
            gamma: self.gamma.unwrap_or(base.gamma),
            ..base.clone()
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label)
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("sorsa-noreg") {
            return Ok(Self {
                label: "sorsa-noreg".into(),
                method: Method::Sorsa,
                gamma: Some(0.0),
            });
        }
        Ok(Self::new(s.parse()?))
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<MethodSpec>> {
    let methods: Vec<MethodSpec> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::Parse("empty method list".into()));
    }
    let mut labels: Vec<&str> = methods.iter().map(|m| m.label.as_str()).collect();
    labels.sort_unstable();
    if labels.windows(2).any(|p| p[0] == p[1]) {
        return Err(Error::Parse(format!("duplicate method in {list:?}")));
    }
    Ok(methods)
}

/// One row of the per-run analysis output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisRow {
    pub step: usize,
    pub delta_sigma: f64,
    pub delta_d: f64,
    pub kappa: Option<f64>,
    pub eps_grad: Option<f64>,
    pub weyl_bound: Option<f64>,
    pub weyl_gap: Option<f64>,
    pub degenerate: bool,
    pub weyl_violation: bool,
}

impl AnalysisRow {
    pub fn flags(&self) -> String {
        let mut flags = Vec::new();
        if self.degenerate {
            flags.push("degenerate_spectrum");
        }
        if self.weyl_violation {
            flags.push("weyl_violation");
        }
        flags.join("|")
    }
}

/// κ of the adapter's trainable product, when it is defined.
fn trainable_condition(adapter: &Adapter) -> Option<f64> {
    let (product, rank) = adapter.trainable_product();
    linalg::condition_number(&product, rank).ok()
}

/// Analysis of one snapshot: drift from the pretrained weight, κ of the
/// trainable product, and (for SORSA, before the last step) a one-step
/// Weyl probe from the snapshot state.
pub fn analyze_snapshot(task: &Task, cfg: &TrainConfig, snapshot: &Snapshot) -> Result<AnalysisRow> {
    let weight = snapshot.adapter.effective_weight();
    let drift = analysis::drift(task.w0(), &weight, snapshot.step)?;
    let mut row = AnalysisRow {
        step: snapshot.step,
        delta_sigma: drift.delta_sigma,
        delta_d: drift.delta_d,
        kappa: trainable_condition(&snapshot.adapter),
        eps_grad: None,
        weyl_bound: None,
        weyl_gap: None,
        degenerate: drift.degenerate_spectrum_flag,
        weyl_violation: false,
    };
    if let Adapter::Sorsa(state) = &snapshot.adapter {
        if snapshot.step < cfg.total_steps {
            let g_w = task.gradient(&weight)?;
            let (check, _, _) = analysis::weyl_probe(state, &g_w, cfg, snapshot.step, RunLabel::Regularized)?;
            row.eps_grad = Some(check.eps_grad);
            row.weyl_bound = Some(check.bound);
            row.weyl_gap = Some(check.max_sigma_gap);
            row.weyl_violation = !check.satisfied;
        }
    }
    Ok(row)
}

/// A finished training run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub spec: MethodSpec,
    pub config: TrainConfig,
    pub initial: Adapter,
    pub adapter: Adapter,
    pub trace: MetricsTrace,
    pub analysis: Vec<AnalysisRow>,
}

impl RunOutput {
    pub fn final_train_loss(&self, task: &Task) -> Result<f64> {
        task.loss(&self.adapter.effective_weight())
    }
}

/// Trains one method from the task's pretrained weight. Without a snapshot
/// stride, snapshots are taken at the first and last step only.
pub fn run_method(task: &Task, base: &TrainConfig, spec: &MethodSpec) -> Result<RunOutput> {
    let mut cfg = spec.config(base);
    if cfg.snapshot_stride == 0 {
        cfg.snapshot_stride = cfg.total_steps.max(1);
    }
    let initial = Adapter::init(spec.method, task.w0(), cfg.rank, cfg.seed)?;
    let mut adapter = initial.clone();
    let mut trace = optimizer::train(&mut adapter, task, &cfg)?;
    if trace.snapshots.is_empty() {
        trace.snapshots.push(Snapshot {
            step: 0,
            adapter: adapter.clone(),
        });
    }
    let analysis = trace
        .snapshots
        .iter()
        .map(|s| analyze_snapshot(task, &cfg, s))
        .collect::<Result<_>>()?;
    Ok(RunOutput {
        spec: spec.clone(),
        config: cfg,
        initial,
        adapter,
        trace,
        analysis,
    })
}

/// Summary of one method in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub label: String,
    pub method: Method,
    pub config: TrainConfig,
    pub final_train_loss: f64,
    pub final_kappa: Option<f64>,
    pub final_delta_sigma: f64,
    pub final_delta_d: f64,
    /// Output file names, relative to the run directory.
    pub files: Vec<String>,
}

impl ExperimentResult {
    pub fn from_run(task: &Task, run: &RunOutput) -> Result<Self> {
        let last = run.analysis.last().expect("at least one snapshot");
        Ok(Self {
            label: run.spec.label.clone(),
            method: run.spec.method,
            config: run.config.clone(),
            final_train_loss: run.final_train_loss(task)?,
            final_kappa: last.kappa,
            final_delta_sigma: last.delta_sigma,
            final_delta_d: last.delta_d,
            files: Vec::new(),
        })
    }
}

/// Trains every method on the same task with the same schedule and seed.
pub fn compare_runs(task: &Task, base: &TrainConfig, methods: &[MethodSpec]) -> Result<Vec<RunOutput>> {
    methods.iter().map(|m| run_method(task, base, m)).collect()
}

pub fn compare_methods(task: &Task, base: &TrainConfig, methods: &[MethodSpec]) -> Result<Vec<ExperimentResult>> {
    compare_runs(task, base, methods)?
        .iter()
        .map(|run| ExperimentResult::from_run(task, run))
        .collect()
}

/// Per-step analysis rows for both runs of a twin experiment.
pub fn twin_analysis(task: &Task, twin: &TwinRun) -> Result<(Vec<AnalysisRow>, Vec<AnalysisRow>)> {
    let rows = |label: RunLabel, weights: &[linalg::Matrix], kappas: &[(usize, f64)]| -> Result<Vec<AnalysisRow>> {
        let drifts = analysis::drift_series(task.w0(), weights.iter().enumerate())?;
        Ok(drifts
            .into_iter()
            .zip(kappas)
            .map(|(d, &(step, kappa))| {
                let probe = twin.weyl.iter().find(|w| w.step == step && w.branch_from == label);
                AnalysisRow {
                    step,
                    delta_sigma: d.delta_sigma,
                    delta_d: d.delta_d,
                    kappa: Some(kappa),
                    eps_grad: probe.map(|p| p.eps_grad),
                    weyl_bound: probe.map(|p| p.bound),
                    weyl_gap: probe.map(|p| p.max_sigma_gap),
                    degenerate: d.degenerate_spectrum_flag,
                    weyl_violation: probe.is_some_and(|p| !p.satisfied),
                }
            })
            .collect())
    };
    Ok((
        rows(RunLabel::Regularized, &twin.reg_weights, &twin.reg.points)?,
        rows(RunLabel::Unregularized, &twin.unreg_weights, &twin.unreg.points)?,
    ))
}
