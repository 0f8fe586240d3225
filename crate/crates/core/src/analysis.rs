//! Measurements on trained weights: spectral drift from the pretrained
//! weight, condition-number trajectories of regularized and unregularized
//! twin runs, one-step Weyl perturbation probes, and empirical estimates of
//! the regularizer's curvature constants.

use serde::{Deserialize, Serialize};

use crate::adapters::{Adapter, SorsaAdapter};
use crate::error::{Error, Result};
use crate::harness::{Task, TaskKind};
use crate::linalg::{self, Matrix, SvdResult};
use crate::optimizer::{self, StepRecord, TrainConfig, Trainer};
use crate::regularizer;
use crate::rng::{stream, SeededRng};

/// Adjacent singular values closer than this fraction of `σ_max` make the
/// pairing of their singular vectors ambiguous.
pub const DEGENERACY_TOLERANCE: f64 = 1e-8;

/// Slack allowed on every Weyl bound check.
pub const WEYL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    pub step: usize,
    pub delta_sigma: f64,
    pub delta_d: f64,
    /// `|⟨u_t^j, u_0^j⟩|` for every index `j < k`.
    pub per_index_du: Vec<f64>,
    /// `|⟨v_t^j, v_0^j⟩|` for every index `j < k`.
    pub per_index_dv: Vec<f64>,
    /// Set when some indices were excluded from `delta_d` because their
    /// singular values are (nearly) tied.
    pub degenerate_spectrum_flag: bool,
}

fn check_same_shape(w0: &Matrix, wt: &Matrix) -> Result<()> {
    if w0.shape() != wt.shape() {
        return Err(Error::DimensionMismatch {
            op: "drift",
            lhs: w0.shape(),
            rhs: wt.shape(),
        });
    }
    Ok(())
}

/// Mean absolute difference of the sorted singular values.
pub fn delta_sigma(w0: &Matrix, wt: &Matrix) -> Result<f64> {
    check_same_shape(w0, wt)?;
    Ok(sigma_gap(&linalg::svd(w0)?.s, &linalg::svd(wt)?.s))
}

fn sigma_gap(s0: &[f64], st: &[f64]) -> f64 {
    s0.iter().zip(st).map(|(a, b)| (a - b).abs()).sum::<f64>() / s0.len() as f64
}

/// One minus the mean absolute alignment of index-paired singular vectors.
pub fn delta_d(w0: &Matrix, wt: &Matrix) -> Result<f64> {
    Ok(drift(w0, wt, 0)?.delta_d)
}

/// Indices whose singular value sits within [`DEGENERACY_TOLERANCE`]·σ_max
/// of a neighbour.
fn ambiguous_indices(s: &[f64]) -> Vec<bool> {
    let tol = DEGENERACY_TOLERANCE * s.first().copied().unwrap_or(0.0);
    let mut flags = vec![false; s.len()];
    for i in 1..s.len() {
        if s[i - 1] - s[i] < tol || (s[i - 1] == 0.0 && s[i] == 0.0) {
            flags[i - 1] = true;
            flags[i] = true;
        }
    }
    flags
}

fn drift_from_svds(step: usize, svd0: &SvdResult, svdt: &SvdResult) -> DriftReport {
    let k = svd0.rank();
    let column_alignment = |a: &Matrix, b: &Matrix| -> Vec<f64> {
        (0..k)
            .map(|j| (0..a.rows()).map(|i| a.get(i, j) * b.get(i, j)).sum::<f64>().abs())
            .collect()
    };
    let du = column_alignment(&svdt.u, &svd0.u);
    let dv = column_alignment(&svdt.v, &svd0.v);
    let amb0 = ambiguous_indices(&svd0.s);
    let ambt = ambiguous_indices(&svdt.s);
    let kept: Vec<usize> = (0..k).filter(|&j| !amb0[j] && !ambt[j]).collect();
    let delta_d = if kept.is_empty() {
        0.0
    } else {
        let total: f64 = kept.iter().map(|&j| du[j] + dv[j]).sum();
        (1.0 - total / (2.0 * kept.len() as f64)).max(0.0)
    };
    DriftReport {
        step,
        delta_sigma: sigma_gap(&svd0.s, &svdt.s),
        delta_d,
        per_index_du: du,
        per_index_dv: dv,
        degenerate_spectrum_flag: kept.len() < k,
    }
}

/// Full drift report of `wt` against `w0`.
pub fn drift(w0: &Matrix, wt: &Matrix, step: usize) -> Result<DriftReport> {
    check_same_shape(w0, wt)?;
    Ok(drift_from_svds(step, &linalg::svd(w0)?, &linalg::svd(wt)?))
}

/// Drift of several weights against one reference, reusing its SVD.
pub fn drift_series<'a>(
    w0: &Matrix,
    weights: impl IntoIterator<Item = (usize, &'a Matrix)>,
) -> Result<Vec<DriftReport>> {
    let svd0 = linalg::svd(w0)?;
    weights
        .into_iter()
        .map(|(step, wt)| {
            check_same_shape(w0, wt)?;
            Ok(drift_from_svds(step, &svd0, &linalg::svd(wt)?))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunLabel {
    Regularized,
    Unregularized,
}

impl RunLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            RunLabel::Regularized => "reg",
            RunLabel::Unregularized => "unreg",
        }
    }
}

/// `κ(W_p)` per step of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionTrace {
    pub run_label: RunLabel,
    pub points: Vec<(usize, f64)>,
}

impl ConditionTrace {
    pub fn last(&self) -> Option<f64> {
        self.points.last().map(|&(_, k)| k)
    }
}

/// Outcome of branching one regularized and one unregularized update from
/// the same state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeylCheck {
    pub step: usize,
    /// Run whose state the two branches start from.
    pub branch_from: RunLabel,
    /// `‖∇_{W_p} L_reg‖_F`, the regularizer gradient pushed into weight space.
    pub eps_grad: f64,
    /// `max_i |σ_i^reg − σ_i^unreg|` over the two branch outputs.
    pub max_sigma_gap: f64,
    /// `‖W_p^reg − W_p^unreg‖_F` over the two branch outputs.
    pub frobenius_gap: f64,
    /// `γ · eps_grad`.
    pub bound: f64,
    /// `max_sigma_gap <= bound + slack`.
    pub satisfied: bool,
    /// `max_sigma_gap <= frobenius_gap + slack` (unconditional Weyl).
    pub weyl_satisfied: bool,
}

/// `‖J(θ)·(g_u^reg, 0, g_v^reg)‖_F`: the regularizer's factor gradient mapped
/// to weight space by the same chain rule that turns factor steps into
/// `W_p` steps.
pub fn reg_gradient_in_weight_space(adapter: &SorsaAdapter) -> f64 {
    let (gu, gv) = regularizer::reg_grad(adapter.u_p(), adapter.v_p());
    adapter
        .tangent_to_weight(&gu, &vec![0.0; adapter.rank()], &gv)
        .frobenius_norm()
}

/// Branches one step with and without the regularizer from `state`.
pub fn weyl_probe(
    state: &SorsaAdapter,
    g_train_w: &Matrix,
    cfg: &TrainConfig,
    t: usize,
    branch_from: RunLabel,
) -> Result<(WeylCheck, SorsaAdapter, SorsaAdapter)> {
    let unreg_cfg = TrainConfig {
        gamma: 0.0,
        ..cfg.clone()
    };
    let mut reg = state.clone();
    let mut unreg = state.clone();
    optimizer::sorsa_step(&mut reg, g_train_w, cfg, t)?;
    optimizer::sorsa_step(&mut unreg, g_train_w, &unreg_cfg, t)?;
    let wp_reg = reg.principal_weight();
    let wp_unreg = unreg.principal_weight();
    let r = state.rank();
    let s_reg = linalg::svd(&wp_reg)?.s;
    let s_unreg = linalg::svd(&wp_unreg)?.s;
    let max_sigma_gap = s_reg[..r]
        .iter()
        .zip(&s_unreg[..r])
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
    let frobenius_gap = wp_reg.sub(&wp_unreg).frobenius_norm();
    let eps_grad = reg_gradient_in_weight_space(state);
    let bound = cfg.gamma * eps_grad;
    let check = WeylCheck {
        step: t,
        branch_from,
        eps_grad,
        max_sigma_gap,
        frobenius_gap,
        bound,
        satisfied: max_sigma_gap <= bound + WEYL_SLACK,
        weyl_satisfied: max_sigma_gap <= frobenius_gap + WEYL_SLACK,
    };
    Ok((check, reg, unreg))
}

fn sorsa_of(adapter: &Adapter) -> &SorsaAdapter {
    match adapter {
        Adapter::Sorsa(a) => a,
        _ => unreachable!("twin runs only train SORSA adapters"),
    }
}

fn principal_condition(a: &SorsaAdapter) -> Result<f64> {
    linalg::condition_number(&a.principal_weight(), Some(a.rank()))
}

/// Both runs of a twin experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct TwinRun {
    pub reg: ConditionTrace,
    pub unreg: ConditionTrace,
    /// Probes from both runs' states at every step, ordered by step with
    /// the regularized run first.
    pub weyl: Vec<WeylCheck>,
    pub reg_records: Vec<StepRecord>,
    pub unreg_records: Vec<StepRecord>,
    /// Final adapters of the two runs.
    pub reg_final: SorsaAdapter,
    pub unreg_final: SorsaAdapter,
    /// Effective weights at every step `0..=total_steps`.
    pub reg_weights: Vec<Matrix>,
    pub unreg_weights: Vec<Matrix>,
}

/// Trains SORSA on `task` twice from the same initialization: once with
/// `cfg.gamma` and once with `gamma = 0`. At every step each run's state is
/// also probed with a one-step regularized/unregularized branch.
///
/// Condition traces hold `κ(W_p)` with the adapter rank as hint, for the
/// state before every update plus the final state.
pub fn twin_run(task: &Task, cfg: &TrainConfig) -> Result<TwinRun> {
    let init = Adapter::init(crate::adapters::Method::Sorsa, task.w0(), cfg.rank, cfg.seed)?;
    let unreg_cfg = TrainConfig {
        gamma: 0.0,
        ..cfg.clone()
    };
    let mut runs = [
        (RunLabel::Regularized, Trainer::new(init.clone(), task, cfg)?),
        (RunLabel::Unregularized, Trainer::new(init, task, &unreg_cfg)?),
    ];
    let mut kappas = [Vec::new(), Vec::new()];
    let mut records = [Vec::new(), Vec::new()];
    let mut weights = [Vec::new(), Vec::new()];
    let mut weyl = Vec::new();

    for t in 0..cfg.total_steps {
        for (i, (label, trainer)) in runs.iter_mut().enumerate() {
            let state = sorsa_of(trainer.adapter());
            kappas[i].push((t, principal_condition(state)?));
            weights[i].push(state.effective_weight());
            let (_, g_w) = trainer.current_gradient()?;
            let (check, _, _) = weyl_probe(state, &g_w, cfg, t, *label)?;
            weyl.push(check);
            records[i].push(trainer.step()?);
        }
    }
    let total = cfg.total_steps;
    for (i, (_, trainer)) in runs.iter().enumerate() {
        let state = sorsa_of(trainer.adapter());
        kappas[i].push((total, principal_condition(state)?));
        weights[i].push(state.effective_weight());
    }
    let [(_, reg_trainer), (_, unreg_trainer)] = runs;
    let [reg_k, unreg_k] = kappas;
    let [reg_records, unreg_records] = records;
    let [reg_weights, unreg_weights] = weights;
    Ok(TwinRun {
        reg: ConditionTrace {
            run_label: RunLabel::Regularized,
            points: reg_k,
        },
        unreg: ConditionTrace {
            run_label: RunLabel::Unregularized,
            points: unreg_k,
        },
        weyl,
        reg_records,
        unreg_records,
        reg_final: sorsa_of(&reg_trainer.into_adapter()).clone(),
        unreg_final: sorsa_of(&unreg_trainer.into_adapter()).clone(),
        reg_weights,
        unreg_weights,
    })
}

/// Result of the linear-rate experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub mu_train: f64,
    pub l_train: f64,
    /// `max(0, −λ_min)` of the regularizer Hessian along sampled directions.
    pub c_reg_hat: f64,
    /// `λ_max` of the regularizer Hessian along sampled directions.
    pub l_reg_hat: f64,
    pub fitted_rate: f64,
    /// `1 − η(μ − γ·c_reg_hat)`.
    pub predicted_rate: f64,
    pub eta: f64,
    pub gamma: f64,
    pub steps: usize,
    /// Objective value at the limit point the run converges to.
    pub f_star: f64,
}

/// Number of random directions used for the curvature estimates.
pub const HESSIAN_DIRECTIONS: usize = 200;
const HESSIAN_STEP: f64 = 1e-5;
const POLISH_STEPS: usize = 200_000;

/// Factor-space objective `F(U, V) = ½‖U − U*‖² + ½‖V − V*‖² + γ·L_reg(U, V)`.
///
/// The data term is a quadratic with identity Hessian in the factor
/// variables, so `μ = L = 1` hold exactly.
#[derive(Debug, Clone)]
struct FactorQuadratic {
    u_star: Matrix,
    v_star: Matrix,
    gamma: f64,
}

impl FactorQuadratic {
    fn value(&self, u: &Matrix, v: &Matrix) -> f64 {
        0.5 * u.sub(&self.u_star).frobenius_norm_sq()
            + 0.5 * v.sub(&self.v_star).frobenius_norm_sq()
            + self.gamma * regularizer::reg_loss(u, v)
    }

    fn gradient(&self, u: &Matrix, v: &Matrix) -> (Matrix, Matrix) {
        let mut gu = u.sub(&self.u_star);
        let mut gv = v.sub(&self.v_star);
        if self.gamma > 0.0 {
            let (ru, rv) = regularizer::reg_grad(u, v);
            gu.axpy(self.gamma, &ru);
            gv.axpy(self.gamma, &rv);
        }
        (gu, gv)
    }
}

/// Least-squares slope of `ln(gap_t)` against `t`, exponentiated.
fn fit_rate(gaps: &[f64]) -> Option<f64> {
    let first = *gaps.first()?;
    let floor = (1e-10 * first).max(1e-280);
    let pts: Vec<(f64, f64)> = gaps
        .iter()
        .enumerate()
        .take_while(|(_, &g)| g > floor)
        .map(|(t, &g)| (t as f64, g.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Some((sxy / sxx).exp())
}

/// Rayleigh quotients `dᵀ·∇²L_reg·d` along random unit directions, with the
/// Hessian-vector product taken as a central difference of `reg_grad`.
pub fn sample_reg_curvature(points: &[(Matrix, Matrix)], directions: usize, seed: u64) -> Vec<f64> {
    let mut rng = SeededRng::for_stream(seed, stream::PROBE);
    (0..directions)
        .map(|i| {
            let (u, v) = &points[i * points.len() / directions.max(1)];
            let d = rng.unit_direction(u.rows() + v.rows(), u.cols());
            let du = Matrix::from_vec_unchecked(u.rows(), u.cols(), d.as_slice()[..u.rows() * u.cols()].to_vec());
            let dv = Matrix::from_vec_unchecked(v.rows(), v.cols(), d.as_slice()[u.rows() * u.cols()..].to_vec());
            let h = HESSIAN_STEP;
            let (pu, pv) = regularizer::reg_grad(&u.add(&du.scale(h)), &v.add(&dv.scale(h)));
            let (mu, mv) = regularizer::reg_grad(&u.sub(&du.scale(h)), &v.sub(&dv.scale(h)));
            let hu = pu.sub(&mu).scale(0.5 / h);
            let hv = pv.sub(&mv).scale(0.5 / h);
            crate::linalg::dot(du.as_slice(), hu.as_slice()) + crate::linalg::dot(dv.as_slice(), hv.as_slice())
        })
        .collect()
}

/// Linear-rate experiment on a quadratic task.
///
/// Gradient descent with constant step `cfg.eta_max` runs for
/// `cfg.total_steps` steps on the factor-space objective whose data term
/// pulls `(U, V)` towards the rank-`cfg.rank` singular factors of the task's
/// teacher, starting from those of the pretrained weight. The limit `F*` is
/// found by continuing the same iteration until the gradient vanishes.
pub fn estimate_constants(task: &Task, cfg: &TrainConfig) -> Result<ConvergenceReport> {
    if task.kind() != TaskKind::Quadratic {
        return Err(Error::UnsupportedTask(format!(
            "curvature constants need a quadratic task, got {:?}",
            task.kind()
        )));
    }
    cfg.validate()?;
    let start = SorsaAdapter::init(task.w0(), cfg.rank)?;
    let target = SorsaAdapter::init(task.w_star(), cfg.rank)?;
    let problem = FactorQuadratic {
        u_star: target.u_p().clone(),
        v_star: target.v_p().clone(),
        gamma: cfg.gamma,
    };
    let eta = cfg.eta_max;
    let (mut u, mut v) = (start.u_p().clone(), start.v_p().clone());
    let mut values = Vec::with_capacity(cfg.total_steps + 1);
    let mut visited = Vec::with_capacity(cfg.total_steps + 1);
    for _ in 0..cfg.total_steps {
        values.push(problem.value(&u, &v));
        visited.push((u.clone(), v.clone()));
        let (gu, gv) = problem.gradient(&u, &v);
        u.axpy(-eta, &gu);
        v.axpy(-eta, &gv);
        if !(u.is_finite() && v.is_finite()) {
            return Err(Error::Diverged {
                step: values.len(),
                loss: f64::INFINITY,
                limit: f64::MAX,
            });
        }
    }
    values.push(problem.value(&u, &v));
    visited.push((u.clone(), v.clone()));

    // polish to the limit point
    for _ in 0..POLISH_STEPS {
        let (gu, gv) = problem.gradient(&u, &v);
        if (gu.frobenius_norm_sq() + gv.frobenius_norm_sq()).sqrt() < 1e-13 {
            break;
        }
        u.axpy(-eta, &gu);
        v.axpy(-eta, &gv);
    }
    let f_star = problem
        .value(&u, &v)
        .min(values.iter().copied().fold(f64::INFINITY, f64::min));
    let gaps: Vec<f64> = values.iter().map(|f| f - f_star).collect();
    let fitted_rate = fit_rate(&gaps).unwrap_or(0.0);

    let quotients = sample_reg_curvature(&visited, HESSIAN_DIRECTIONS, cfg.seed);
    let lambda_min = quotients.iter().copied().fold(f64::INFINITY, f64::min);
    let lambda_max = quotients.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c_reg_hat = (-lambda_min).max(0.0);
    let mu_train = 1.0;
    Ok(ConvergenceReport {
        mu_train,
        l_train: 1.0,
        c_reg_hat,
        l_reg_hat: lambda_max.max(0.0),
        fitted_rate,
        predicted_rate: 1.0 - eta * (mu_train - cfg.gamma * c_reg_hat),
        eta,
        gamma: cfg.gamma,
        steps: cfg.total_steps,
        f_star,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{make_task, TaskSpec};

    #[test]
    fn drift_of_identical_weights_is_zero() {
        let w = SeededRng::new(1).gaussian_matrix(8, 5, 1.0);
        assert_eq!(delta_sigma(&w, &w).unwrap(), 0.0);
        assert!(delta_d(&w, &w).unwrap() <= 1e-10);
        // positive scaling rotates nothing
        assert!(delta_d(&w, &w.scale(2.5)).unwrap() <= 1e-10);
    }

    #[test]
    fn delta_sigma_diagonal_and_scaling() {
        let d = delta_sigma(&Matrix::from_diag(&[3.0, 2.0]), &Matrix::from_diag(&[4.0, 1.0])).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let w = SeededRng::new(2).gaussian_matrix(6, 4, 1.0);
        let s = linalg::svd(&w).unwrap().s;
        let mean = s.iter().sum::<f64>() / s.len() as f64;
        assert!((delta_sigma(&w, &w.scale(2.0)).unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn delta_d_rotated_diagonal() {
        // R·diag(3,2) with R a quarter turn: left vectors swap roles
        // (alignment 0, 0), right vectors stay put (alignment 1, 1).
        let w0 = Matrix::from_diag(&[3.0, 2.0]);
        let rot = Matrix::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap();
        let report = drift(&w0, &rot.matmul(&w0), 0).unwrap();
        assert_eq!(report.per_index_du, vec![0.0, 0.0]);
        assert_eq!(report.per_index_dv, vec![1.0, 1.0]);
        assert!((report.delta_d - 0.5).abs() < 1e-15);
        assert!(!report.degenerate_spectrum_flag);
    }

    #[test]
    fn delta_d_ignores_singular_vector_signs() {
        let mut rng = SeededRng::new(3);
        let w0 = rng.gaussian_matrix(7, 4, 1.0);
        let wt = w0.add(&rng.gaussian_matrix(7, 4, 0.1));
        let svd_t = linalg::svd(&wt).unwrap();
        let mut flipped = svd_t.clone();
        for j in [0, 2] {
            for i in 0..7 {
                flipped.u.set(i, j, -flipped.u.get(i, j));
            }
            for i in 0..4 {
                flipped.v.set(i, j, -flipped.v.get(i, j));
            }
        }
        let svd0 = linalg::svd(&w0).unwrap();
        let a = drift_from_svds(0, &svd0, &svd_t);
        let b = drift_from_svds(0, &svd0, &flipped);
        assert_eq!(a.delta_d, b.delta_d);
        assert!(a
            .per_index_du
            .iter()
            .chain(&a.per_index_dv)
            .all(|&x| (0.0..=1.0 + 1e-10).contains(&x)));
    }

    #[test]
    fn degenerate_spectrum_is_flagged_and_excluded() {
        let w0 = Matrix::from_diag(&[3.0, 1.0, 1.0]);
        let wt = Matrix::from_diag(&[3.0, 1.0, 1.0]);
        let report = drift(&w0, &wt, 0).unwrap();
        assert!(report.degenerate_spectrum_flag);
        assert_eq!(report.delta_d, 0.0);
        let i3 = Matrix::identity(3);
        assert_eq!(drift(&i3, &i3, 0).unwrap().delta_d, 0.0);
    }

    #[test]
    fn shape_mismatch() {
        assert!(delta_sigma(&Matrix::identity(2), &Matrix::identity(3)).is_err());
        assert!(delta_d(&Matrix::identity(2), &Matrix::identity(3)).is_err());
    }

    #[test]
    fn fit_rate_recovers_geometric_decay() {
        let gaps: Vec<f64> = (0..30).map(|t| 3.0 * 0.25f64.powi(t)).collect();
        assert!((fit_rate(&gaps).unwrap() - 0.25).abs() < 1e-12);
        assert!(fit_rate(&[1.0]).is_none());
    }

    #[test]
    fn unregularized_rate_matches_gradient_descent_contraction() {
        let task = make_task(&TaskSpec::default_quadratic(0)).unwrap();
        let cfg = TrainConfig {
            eta_max: 0.5,
            gamma: 0.0,
            total_steps: 60,
            ..TrainConfig::default()
        };
        let report = estimate_constants(&task, &cfg).unwrap();
        assert_eq!(report.predicted_rate, 0.5);
        assert!(report.fitted_rate <= 0.55, "{report:?}");
        // function gaps of an identity-Hessian quadratic shrink by (1 − η)²
        assert!((report.fitted_rate - 0.25).abs() < 1e-6, "{report:?}");
    }

    #[test]
    fn regularizer_is_locally_convex_at_orthonormal_factors() {
        let mut rng = SeededRng::new(4);
        let points: Vec<(Matrix, Matrix)> = (0..5)
            .map(|_| (rng.orthonormal_columns(8, 3), rng.orthonormal_columns(6, 3)))
            .collect();
        let q = sample_reg_curvature(&points, 200, 1);
        assert!(
            q.iter().all(|&x| x >= -1e-6),
            "{:?}",
            q.iter().copied().fold(f64::INFINITY, f64::min)
        );
    }

    #[test]
    fn non_quadratic_task_is_refused() {
        let task = make_task(&TaskSpec::default_teacher_student(0)).unwrap();
        assert!(matches!(
            estimate_constants(&task, &TrainConfig::default()),
            Err(Error::UnsupportedTask(_))
        ));
    }

    #[test]
    fn twin_with_zero_gamma_is_symmetric() {
        let task = make_task(&TaskSpec::default_teacher_student(1)).unwrap();
        let cfg = TrainConfig {
            eta_max: 0.05,
            gamma: 0.0,
            total_steps: 20,
            ..TrainConfig::default()
        };
        let twin = twin_run(&task, &cfg).unwrap();
        assert_eq!(twin.reg.points, twin.unreg.points);
        assert_eq!(twin.reg_records, twin.unreg_records);
        assert!(twin.weyl.iter().all(|w| w.max_sigma_gap == 0.0 && w.satisfied));
        assert_eq!(twin.reg.points.len(), 21);
    }
}
