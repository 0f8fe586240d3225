//! Gradient-descent training with a warmup + cosine schedule.
//!
//! One scheduler drives both loss terms: the regularizer gradient is scaled
//! by `gamma / eta_max` before the schedule's `eta_t` multiplies the combined
//! direction, so the regularizer's effective rate is `eta_t · gamma / eta_max`.

use serde::{Deserialize, Serialize};

use crate::adapters::{Adapter, ParamGrads, SorsaAdapter, SorsaGrads};
use crate::error::{Error, Result};
use crate::harness::Task;
use crate::linalg::Matrix;
use crate::regularizer;

/// Training loss may not grow past this multiple of its initial value.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Peak learning rate of the schedule.
    pub eta_max: f64,
    /// Regularizer rate.
    pub gamma: f64,
    pub warmup_ratio: f64,
    pub total_steps: usize,
    pub grad_clip: Option<f64>,
    pub seed: u64,
    pub rank: usize,
    /// Keep an adapter snapshot every this many steps (0 disables).
    #[serde(default)]
    pub snapshot_stride: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta_max: 3e-5,
            gamma: 4e-4,
            warmup_ratio: 0.03,
            total_steps: 500,
            grad_clip: Some(1.0),
            seed: 0,
            rank: 4,
            snapshot_stride: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_max.is_finite() && self.eta_max > 0.0) {
            return Err(Error::Config(format!("eta_max {} must be positive", self.eta_max)));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::Config(format!("gamma {} must be non-negative", self.gamma)));
        }
        if !(0.0..1.0).contains(&self.warmup_ratio) {
            return Err(Error::Config(format!(
                "warmup_ratio {} must lie in [0, 1)",
                self.warmup_ratio
            )));
        }
        if let Some(c) = self.grad_clip {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Config(format!("grad_clip {c} must be positive")));
            }
        }
        if self.rank == 0 {
            return Err(Error::Config("rank must be positive".into()));
        }
        Ok(())
    }

    pub fn warmup_steps(&self) -> usize {
        ((self.warmup_ratio * self.total_steps as f64).ceil() as usize).min(self.total_steps)
    }

    /// Ratio applied to the regularizer gradient inside the combined direction.
    pub fn reg_ratio(&self) -> f64 {
        self.gamma / self.eta_max
    }
}

/// Learning rate at step `t`.
///
/// With `W = ⌈warmup_ratio · total_steps⌉`: linear warmup
/// `eta_max · (t + 1) / (W + 1)` for `t < W`, then cosine decay
/// `eta_max · ½(1 + cos(π (t − W) / (total_steps − W)))`. The peak is hit
/// at `t = W` and the rate stays strictly positive for `t < total_steps`.
pub fn schedule(cfg: &TrainConfig, t: usize) -> Result<f64> {
    let total = cfg.total_steps;
    if t >= total {
        return Err(Error::StepOutOfRange { step: t, total });
    }
    let warmup = cfg.warmup_steps();
    if t < warmup {
        return Ok(cfg.eta_max * (t + 1) as f64 / (warmup + 1) as f64);
    }
    let progress = (t - warmup) as f64 / (total - warmup) as f64;
    Ok(cfg.eta_max * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub train_loss: f64,
    pub reg_loss: f64,
    /// Norm of the combined trainable-parameter gradient before clipping.
    pub grad_norm: f64,
    pub eta_t: f64,
}

/// What a single update did, apart from the training loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub reg_loss: f64,
    pub grad_norm: f64,
    pub eta_t: f64,
    pub clipped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// Number of updates applied before the snapshot was taken.
    pub step: usize,
    pub adapter: Adapter,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTrace {
    pub records: Vec<StepRecord>,
    pub snapshots: Vec<Snapshot>,
}

fn check_finite(grads: &ParamGrads, step: usize) -> Result<()> {
    if grads.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient {
            step,
            detail: "trainable-parameter gradient has NaN or infinite entries".into(),
        })
    }
}

/// Clips `grads` in place to the configured global norm; returns the
/// pre-clip norm and whether clipping kicked in.
fn clip(grads: &mut ParamGrads, cfg: &TrainConfig) -> (f64, bool) {
    let norm = grads.norm();
    match cfg.grad_clip {
        Some(limit) if norm > limit => {
            grads.scale(limit / norm);
            (norm, true)
        }
        _ => (norm, false),
    }
}

/// SORSA descent direction: factor gradients of the training loss, plus
/// `gamma / eta_max` times the regularizer gradient on `u_p` and `v_p`.
pub fn sorsa_direction(adapter: &SorsaAdapter, g_train_w: &Matrix, cfg: &TrainConfig) -> Result<(SorsaGrads, f64)> {
    let mut grads = adapter.factor_gradients(g_train_w)?;
    let reg = regularizer::evaluate(adapter.u_p(), adapter.v_p());
    if cfg.gamma > 0.0 {
        let ratio = cfg.reg_ratio();
        grads.u.axpy(ratio, &reg.g_u);
        grads.v.axpy(ratio, &reg.g_v);
    }
    Ok((grads, reg.loss))
}

/// One SORSA update at step `t`: build the combined direction, clip it,
/// and move `u_p`, `s_p`, `v_p` by `eta_t`. `w_r` is never touched.
pub fn sorsa_step(adapter: &mut SorsaAdapter, g_train_w: &Matrix, cfg: &TrainConfig, t: usize) -> Result<StepStats> {
    let eta_t = schedule(cfg, t)?;
    let (grads, reg_loss) = sorsa_direction(adapter, g_train_w, cfg)?;
    let mut grads = ParamGrads::Sorsa(grads);
    check_finite(&grads, t)?;
    let (grad_norm, clipped) = clip(&mut grads, cfg);
    if let ParamGrads::Sorsa(g) = &grads {
        adapter.apply(g, eta_t);
    }
    Ok(StepStats {
        reg_loss,
        grad_norm,
        eta_t,
        clipped,
    })
}

/// Two-rate form of the SORSA update without clipping:
/// `θ ← θ − eta_t·∇L_train − gamma_t·∇L_reg`.
pub fn decoupled_sorsa_step(adapter: &mut SorsaAdapter, g_train_w: &Matrix, eta_t: f64, gamma_t: f64) -> Result<()> {
    let train = adapter.factor_gradients(g_train_w)?;
    let (reg_u, reg_v) = regularizer::reg_grad(adapter.u_p(), adapter.v_p());
    adapter.apply(&train, eta_t);
    let reg = SorsaGrads {
        u: reg_u,
        s: vec![0.0; adapter.rank()],
        v: reg_v,
    };
    adapter.apply(&reg, gamma_t);
    Ok(())
}

/// One update of any adapter; SORSA goes through [`sorsa_step`].
pub fn step(adapter: &mut Adapter, g_train_w: &Matrix, cfg: &TrainConfig, t: usize) -> Result<StepStats> {
    if let Adapter::Sorsa(a) = adapter {
        return sorsa_step(a, g_train_w, cfg, t);
    }
    let eta_t = schedule(cfg, t)?;
    let mut grads = adapter.param_gradients(g_train_w)?;
    check_finite(&grads, t)?;
    let (grad_norm, clipped) = clip(&mut grads, cfg);
    adapter.apply(&grads, eta_t);
    Ok(StepStats {
        reg_loss: 0.0,
        grad_norm,
        eta_t,
        clipped,
    })
}

/// Step-at-a-time driver with the divergence guard.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    adapter: Adapter,
    task: &'a Task,
    cfg: TrainConfig,
    t: usize,
    initial_loss: Option<f64>,
}

impl<'a> Trainer<'a> {
    pub fn new(adapter: Adapter, task: &'a Task, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if adapter.shape() != task.shape() {
            return Err(Error::DimensionMismatch {
                op: "train",
                lhs: adapter.shape(),
                rhs: task.shape(),
            });
        }
        Ok(Self {
            adapter,
            task,
            cfg: cfg.clone(),
            t: 0,
            initial_loss: None,
        })
    }

    pub fn adapter(&self) -> &Adapter {
        &self.adapter
    }

    pub fn into_adapter(self) -> Adapter {
        self.adapter
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Updates applied so far.
    pub fn steps_done(&self) -> usize {
        self.t
    }

    pub fn finished(&self) -> bool {
        self.t >= self.cfg.total_steps
    }

    /// Loss and weight gradient at the current parameters.
    pub fn current_gradient(&self) -> Result<(f64, Matrix)> {
        self.task.loss_and_gradient(&self.adapter.effective_weight())
    }

    /// Applies the next update and returns its record.
    pub fn step(&mut self) -> Result<StepRecord> {
        let t = self.t;
        let (loss, g_w) = self.current_gradient()?;
        let initial = *self.initial_loss.get_or_insert(loss);
        let limit = DIVERGENCE_FACTOR * initial;
        if !loss.is_finite() || (initial > 0.0 && loss > limit) {
            return Err(Error::Diverged { step: t, loss, limit });
        }
        let stats = step(&mut self.adapter, &g_w, &self.cfg, t)?;
        self.t += 1;
        Ok(StepRecord {
            step: t,
            train_loss: loss,
            reg_loss: stats.reg_loss,
            grad_norm: stats.grad_norm,
            eta_t: stats.eta_t,
        })
    }
}

/// Runs `cfg.total_steps` updates on `adapter`, recording one
/// [`StepRecord`] per step and, when `cfg.snapshot_stride > 0`, snapshots at
/// every multiple of the stride plus one after the final step.
pub fn train(adapter: &mut Adapter, task: &Task, cfg: &TrainConfig) -> Result<MetricsTrace> {
    let mut trainer = Trainer::new(adapter.clone(), task, cfg)?;
    let mut trace = MetricsTrace::default();
    let stride = cfg.snapshot_stride;
    while !trainer.finished() {
        let t = trainer.steps_done();
        if stride > 0 && t % stride == 0 {
            trace.snapshots.push(Snapshot {
                step: t,
                adapter: trainer.adapter().clone(),
            });
        }
        trace.records.push(trainer.step()?);
    }
    let total = trainer.steps_done();
    if stride > 0 && total > 0 {
        trace.snapshots.push(Snapshot {
            step: total,
            adapter: trainer.adapter().clone(),
        });
    }
    *adapter = trainer.into_adapter();
    Ok(trace)
}
