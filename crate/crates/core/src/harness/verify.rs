//! Self-verification suites: numeric checks of the library's guarantees,
//! each returning a pass/fail report with the worst observed value.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use super::experiment::{desk_config, run_method, MethodSpec};
use super::{make_task, TaskSpec};
use crate::adapters::{Adapter, LoraAdapter, Method, PissaAdapter, SorsaAdapter};
use crate::analysis::{self, TwinRun};
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::optimizer::TrainConfig;
use crate::regularizer;
use crate::rng::SeededRng;

/// Seeds of the default twin-run suite.
pub const TWIN_SEEDS: std::ops::Range<u64> = 0..10;
/// Seeds that must favour the regularized run, out of [`TWIN_SEEDS`].
pub const REQUIRED_WINS: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Svd,
    Grad,
    Weyl,
    Rate,
    Drift,
}

impl Suite {
    pub const ALL: [Suite; 5] = [Suite::Svd, Suite::Grad, Suite::Weyl, Suite::Rate, Suite::Drift];

    pub fn criteria(self) -> &'static [u8] {
        match self {
            Suite::Svd => &[1],
            Suite::Grad => &[2, 3, 9],
            Suite::Weyl => &[4, 5, 7],
            Suite::Rate => &[6],
            Suite::Drift => &[8],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "svd" => Ok(Suite::Svd),
            "grad" => Ok(Suite::Grad),
            "weyl" => Ok(Suite::Weyl),
            "rate" => Ok(Suite::Rate),
            "drift" => Ok(Suite::Drift),
            other => Err(Error::Parse(format!("unknown suite {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionReport {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "criterion {:>2} {:<28} {}  {} ({:.2}s)",
            self.id,
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

fn timed(
    id: u8,
    name: &'static str,
    limit: Option<Duration>,
    check: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionReport {
    let start = Instant::now();
    let outcome = check();
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    if let Some(limit) = limit {
        if elapsed > limit {
            passed = false;
            detail.push_str(&format!("; exceeded {}s limit", limit.as_secs()));
        }
    }
    CriterionReport {
        id,
        name,
        passed,
        detail,
        elapsed,
    }
}

fn orthonormality_defect(q: &Matrix) -> f64 {
    q.t_matmul(q).sub(&Matrix::identity(q.cols())).max_abs()
}

/// Singular values from the symmetric eigenproblem of the smaller Gram
/// matrix, sorted descending.
pub fn eigen_oracle_singular_values(w: &Matrix) -> Vec<f64> {
    let gram = if w.rows() >= w.cols() {
        w.t_matmul(w)
    } else {
        w.matmul_t(w)
    };
    let g = DMatrix::from_row_slice(gram.rows(), gram.cols(), gram.as_slice());
    let mut s: Vec<f64> = g
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// SVD reconstruction, orthonormality, and agreement with the eigen oracle
/// on 1000 Gaussian matrices of every shape up to 16×16.
pub fn svd_correctness() -> CriterionReport {
    timed(1, "svd correctness", Some(Duration::from_secs(10)), || {
        let mut rng = SeededRng::new(0x5d0);
        let (mut recon, mut orth, mut rel) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..1000 {
            let (m, n) = (rng.int_inclusive(1, 16), rng.int_inclusive(1, 16));
            let w = rng.gaussian_matrix(m, n, 1.0);
            let f = linalg::svd(&w)?;
            let scale = w.frobenius_norm().max(1.0);
            recon = recon.max(f.reconstruct().sub(&w).frobenius_norm() / scale);
            orth = orth.max(orthonormality_defect(&f.u)).max(orthonormality_defect(&f.v));
            for (a, b) in f.s.iter().zip(eigen_oracle_singular_values(&w)) {
                rel = rel.max((a - b).abs() / a.max(f64::MIN_POSITIVE));
            }
        }
        Ok((
            recon <= 1e-10 && orth <= 1e-10 && rel <= 1e-8,
            format!("max reconstruction {recon:.2e}, orthonormality {orth:.2e}, eigen-oracle relative {rel:.2e}"),
        ))
    })
}

fn random_weight(rng: &mut SeededRng) -> (Matrix, usize) {
    let m = rng.int_inclusive(2, 16);
    let n = rng.int_inclusive(2, 16);
    let r = rng.int_inclusive(1, m.min(n) - 1);
    (rng.gaussian_matrix(m, n, 1.0), r)
}

/// Every adapter starts exactly at the pretrained weight.
pub fn initialization_identities() -> CriterionReport {
    timed(2, "initialization identities", None, || {
        let mut rng = SeededRng::new(2);
        let mut worst = 0.0f64;
        let mut counts_ok = true;
        for i in 0..100 {
            let (w0, r) = random_weight(&mut rng);
            let (m, n) = w0.shape();
            let norm = w0.frobenius_norm();
            let sorsa = SorsaAdapter::init(&w0, r)?;
            let lora = LoraAdapter::init(&w0, r, i)?;
            let pissa = PissaAdapter::init(&w0, r)?;
            for w in [
                sorsa.effective_weight(),
                lora.effective_weight(),
                pissa.effective_weight(),
            ] {
                worst = worst.max(w.sub(&w0).frobenius_norm() / norm);
            }
            counts_ok &= Adapter::Sorsa(sorsa).trainable_parameters() == r * (m + n + 1);
        }
        Ok((
            worst <= 1e-8 && counts_ok,
            format!("max relative init error {worst:.2e}, SORSA parameter count exact: {counts_ok}"),
        ))
    })
}

const FD_STEP: f64 = 1e-6;

fn central_difference(x: &mut [f64], i: usize, f: &mut impl FnMut(&[f64]) -> f64) -> f64 {
    let orig = x[i];
    x[i] = orig + FD_STEP;
    let plus = f(x);
    x[i] = orig - FD_STEP;
    let minus = f(x);
    x[i] = orig;
    (plus - minus) / (2.0 * FD_STEP)
}

fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale: f64 = numeric.iter().map(|b| b * b).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

fn split_factors(x: &[f64], m: usize, n: usize, r: usize) -> (Matrix, Vec<f64>, Matrix) {
    let u = Matrix::from_vec_unchecked(m, r, x[..m * r].to_vec());
    let s = x[m * r..m * r + r].to_vec();
    let v = Matrix::from_vec_unchecked(n, r, x[m * r + r..].to_vec());
    (u, s, v)
}

/// Factor and regularizer gradients against central differences.
pub fn gradient_correctness() -> CriterionReport {
    timed(3, "gradient correctness", Some(Duration::from_secs(30)), || {
        let mut rng = SeededRng::new(3);
        let (mut worst_factor, mut worst_reg) = (0.0f64, 0.0f64);
        for seed in 0..100 {
            let m = rng.int_inclusive(3, 10);
            let n = rng.int_inclusive(3, 10);
            let spec = TaskSpec {
                m,
                n,
                batch: 32,
                noise_std: 0.1,
                ..TaskSpec::default_teacher_student(seed)
            };
            let task = make_task(&spec)?;
            let r = rng.int_inclusive(1, m.min(n) - 1);
            let base = SorsaAdapter::init(task.w0(), r)?;
            // move off the initial orthonormal point
            let u = base.u_p().add(&rng.gaussian_matrix(m, r, 0.1));
            let v = base.v_p().add(&rng.gaussian_matrix(n, r, 0.1));
            let s: Vec<f64> = base.s_p().iter().map(|x| x * rng.uniform(0.5, 1.5)).collect();
            let w_r = base.w_r().clone();
            let state = SorsaAdapter::from_parts(u.clone(), s.clone(), v.clone(), w_r.clone())?;

            let g = state.factor_gradients(&task.gradient(&state.effective_weight())?)?;
            let analytic: Vec<f64> = [g.u.as_slice(), &g.s, g.v.as_slice()].concat();
            let mut x: Vec<f64> = [u.as_slice(), &s, v.as_slice()].concat();
            let mut loss = |x: &[f64]| {
                let (u, s, v) = split_factors(x, m, n, r);
                let w = SorsaAdapter::from_parts(u, s, v, w_r.clone())
                    .expect("finite parts")
                    .effective_weight();
                task.loss(&w).expect("finite loss")
            };
            let numeric: Vec<f64> = (0..x.len()).map(|i| central_difference(&mut x, i, &mut loss)).collect();
            worst_factor = worst_factor.max(relative_error(&analytic, &numeric));

            let (gu, gv) = regularizer::reg_grad(&u, &v);
            let analytic: Vec<f64> = [gu.as_slice(), gv.as_slice()].concat();
            let mut y: Vec<f64> = [u.as_slice(), v.as_slice()].concat();
            let mut reg = |y: &[f64]| {
                let u = Matrix::from_vec_unchecked(m, r, y[..m * r].to_vec());
                let v = Matrix::from_vec_unchecked(n, r, y[m * r..].to_vec());
                regularizer::reg_loss(&u, &v)
            };
            let numeric: Vec<f64> = (0..y.len()).map(|i| central_difference(&mut y, i, &mut reg)).collect();
            worst_reg = worst_reg.max(relative_error(&analytic, &numeric));
        }
        Ok((
            worst_factor <= 1e-5 && worst_reg <= 1e-5,
            format!("max relative error: factor {worst_factor:.2e}, regularizer {worst_reg:.2e}"),
        ))
    })
}

fn random_factor_with_norm(rng: &mut SeededRng, rows: usize, cols: usize, norm: f64) -> Matrix {
    let g = rng.gaussian_matrix(rows, cols, 1.0);
    g.scale(norm / g.frobenius_norm())
}

/// The regularizer's Lipschitz certificate bounds loss differences between
/// factor pairs inside the norm ball.
pub fn regularizer_certificate() -> CriterionReport {
    timed(4, "regularizer certificate", None, || {
        let mut rng = SeededRng::new(4);
        let mut worst_ratio = 0.0f64;
        let mut violations = 0;
        for _ in 0..1000 {
            let rows_u = rng.int_inclusive(2, 16);
            let rows_v = rng.int_inclusive(2, 16);
            let r = rng.int_inclusive(1, rows_u.min(rows_v));
            let mut draw = |rows| {
                let norm = rng.uniform(0.0, 3.0);
                random_factor_with_norm(&mut rng, rows, r, norm)
            };
            let (u1, u2, v1, v2) = (draw(rows_u), draw(rows_u), draw(rows_v), draw(rows_v));
            let m_u = u1.frobenius_norm().max(u2.frobenius_norm());
            let m_v = v1.frobenius_norm().max(v2.frobenius_norm());
            let diff = (regularizer::reg_loss(&u1, &v1) - regularizer::reg_loss(&u2, &v2)).abs();
            let bound = regularizer::lipschitz_certificate(m_u, m_v)
                * (u1.sub(&u2).frobenius_norm() + v1.sub(&v2).frobenius_norm());
            if diff > bound {
                violations += 1;
            }
            if bound > 0.0 {
                worst_ratio = worst_ratio.max(diff / bound);
            }
        }
        Ok((
            violations == 0,
            format!("{violations} violations in 1000 pairs, max |ΔL|/bound {worst_ratio:.3}"),
        ))
    })
}

/// Twin runs of the default teacher-student task on [`TWIN_SEEDS`] with the
/// desk-scale configuration.
pub fn default_twin_runs() -> Result<Vec<(crate::harness::Task, TwinRun)>> {
    TWIN_SEEDS
        .map(|seed| {
            let task = make_task(&TaskSpec::default_teacher_student(seed))?;
            let twin = analysis::twin_run(&task, &desk_config(seed))?;
            Ok((task, twin))
        })
        .collect()
}

/// Every paired one-step branch of every twin run respects `γ·ε_∇`.
pub fn weyl_check(twins: &[(crate::harness::Task, TwinRun)]) -> CriterionReport {
    timed(5, "weyl one-step bound", None, || {
        let checks = twins.iter().flat_map(|(_, t)| &t.weyl);
        let (mut total, mut violations, mut weyl_violations) = (0usize, 0usize, 0usize);
        let mut worst = 0.0f64;
        for c in checks {
            total += 1;
            violations += usize::from(!c.satisfied);
            weyl_violations += usize::from(!c.weyl_satisfied);
            worst = worst.max(c.max_sigma_gap - c.bound);
        }
        Ok((
            total > 0 && violations == 0 && weyl_violations == 0,
            format!(
                "{violations} violations of γ·ε_∇ and {weyl_violations} of ‖ΔW‖_F in {total} branches, max gap − bound {worst:.2e}"
            ),
        ))
    })
}

/// Final κ of the regularized run is below the unregularized one.
pub fn condition_dominance(twins: &[(crate::harness::Task, TwinRun)]) -> CriterionReport {
    timed(7, "condition-number dominance", None, || {
        let wins = twins
            .iter()
            .filter(|(_, t)| t.reg.last().unwrap_or(f64::NAN) < t.unreg.last().unwrap_or(f64::NAN))
            .count();
        Ok((
            wins >= REQUIRED_WINS,
            format!("κ_reg < κ_unreg on {wins}/{} seeds", twins.len()),
        ))
    })
}

/// Quadratic-task rate fits against the predicted contraction.
pub fn linear_rate() -> CriterionReport {
    timed(6, "linear rate", Some(Duration::from_secs(20)), || {
        let task = make_task(&TaskSpec::default_quadratic(0))?;
        let base = TrainConfig {
            eta_max: 0.5,
            gamma: 0.0,
            total_steps: 60,
            seed: 0,
            ..TrainConfig::default()
        };
        let plain = analysis::estimate_constants(&task, &base)?;
        let gamma = 1e-3;
        let first = analysis::estimate_constants(&task, &TrainConfig { gamma, ..base.clone() })?;
        let eta = 1.0 / (1.0 + gamma * first.l_reg_hat);
        let reg = analysis::estimate_constants(
            &task,
            &TrainConfig {
                gamma,
                eta_max: eta,
                ..base
            },
        )?;
        let limit = 1.0 - eta * (1.0 - gamma * reg.c_reg_hat) + 0.05;
        Ok((
            plain.fitted_rate <= 0.55 && reg.fitted_rate <= limit,
            format!(
                "γ=0: fitted {:.4} (≤ 0.55); γ=1e-3, η={eta:.4}: fitted {:.3e} (≤ {limit:.4}, ĉ={:.3e}, l̂={:.3})",
                plain.fitted_rate, reg.fitted_rate, reg.c_reg_hat, first.l_reg_hat
            ),
        ))
    })
}

/// ΔD of each run at the first step whose loss reaches `threshold`.
pub fn drift_at_loss(task: &crate::harness::Task, twin: &TwinRun) -> Result<(f64, f64)> {
    let final_loss = |w: &[Matrix]| task.loss(w.last().expect("final weight"));
    let threshold = final_loss(&twin.reg_weights)?.max(final_loss(&twin.unreg_weights)?);
    let at = |weights: &[Matrix]| -> Result<f64> {
        for w in weights {
            if task.loss(w)? <= threshold {
                return analysis::delta_d(task.w0(), w);
            }
        }
        unreachable!("the final weight reaches the threshold")
    };
    Ok((at(&twin.reg_weights)?, at(&twin.unreg_weights)?))
}

/// Zero drift at initialization for every method, and smaller ΔD for the
/// regularized run at a matched loss level.
pub fn drift_metrics(twins: &[(crate::harness::Task, TwinRun)]) -> CriterionReport {
    timed(8, "drift metrics", None, || {
        let task = &twins.first().ok_or_else(|| Error::Config("no twin runs".into()))?.0;
        let mut initial = 0.0f64;
        for method in [Method::Sorsa, Method::Lora, Method::Pissa, Method::Full] {
            let adapter = Adapter::init(method, task.w0(), 4, 0)?;
            let d = analysis::drift(task.w0(), &adapter.effective_weight(), 0)?;
            initial = initial.max(d.delta_sigma).max(d.delta_d);
        }
        let mut wins = 0;
        for (task, twin) in twins {
            let (reg, unreg) = drift_at_loss(task, twin)?;
            wins += usize::from(reg < unreg);
        }
        Ok((
            initial <= 1e-10 && wins >= REQUIRED_WINS,
            format!(
                "max initial ΔΣ/ΔD {initial:.2e}; ΔD_reg < ΔD_unreg at matched loss on {wins}/{} seeds",
                twins.len()
            ),
        ))
    })
}

/// The factored forward pass agrees with the merged weight along training.
pub fn merge_equivalence() -> CriterionReport {
    timed(9, "merge equivalence", None, || {
        let task = make_task(&TaskSpec::default_teacher_student(9))?;
        let cfg = TrainConfig {
            snapshot_stride: 50,
            ..desk_config(9)
        };
        let mut rng = SeededRng::new(9);
        let mut worst = 0.0f64;
        let mut checked = 0;
        for method in [Method::Sorsa, Method::Lora, Method::Pissa, Method::Full] {
            let run = run_method(&task, &cfg, &MethodSpec::new(method))?;
            for snap in run.trace.snapshots.iter().take(10) {
                let x = rng.gaussian_matrix(8, task.shape().0, 1.0);
                let merged = x.matmul(&snap.adapter.effective_weight());
                worst = worst.max(snap.adapter.forward(&x)?.sub(&merged).max_abs());
                checked += 1;
            }
        }
        Ok((
            worst <= 1e-6 && checked == 40,
            format!("{checked} checkpoints, max |forward − x·W| {worst:.2e}"),
        ))
    })
}

/// Runs one suite; twin runs are shared between the criteria that need them.
pub fn run_suite(suite: Suite) -> Result<Vec<CriterionReport>> {
    Ok(match suite {
        Suite::Svd => vec![svd_correctness()],
        Suite::Grad => vec![initialization_identities(), gradient_correctness(), merge_equivalence()],
        Suite::Weyl => {
            let twins = default_twin_runs()?;
            vec![
                regularizer_certificate(),
                weyl_check(&twins),
                condition_dominance(&twins),
            ]
        }
        Suite::Rate => vec![linear_rate()],
        Suite::Drift => vec![drift_metrics(&default_twin_runs()?)],
    })
}
