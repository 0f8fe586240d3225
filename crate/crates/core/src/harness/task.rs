//! Synthetic fine-tuning tasks.
//!
//! Each task owns a pretrained weight `w0` (the starting point for every
//! method) and a teacher weight `w_star` that training moves towards.
//! `w0` has a log-uniform spectrum from 1 down to `1 / condition`; the
//! teacher adds a shift of Frobenius norm `shift · ‖w0‖_F`, dense or of rank
//! `target_rank`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{stream, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    /// `½‖W − W*‖_F²`.
    Quadratic,
    /// `(1/batch)·½‖XW − Y‖_F²` with `Y = X·W* + noise`.
    TeacherStudent,
    /// `(1/batch)·½‖tanh(XW) − Y‖_F²` with `Y = tanh(X·W*) + noise`.
    TwoLayer,
}

fn default_batch() -> usize {
    64
}

fn default_condition() -> f64 {
    10.0
}

fn default_shift() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub m: usize,
    pub n: usize,
    #[serde(default = "default_batch")]
    pub batch: usize,
    #[serde(default)]
    pub noise_std: f64,
    pub seed: u64,
    /// Rank of the teacher shift; dense when absent.
    #[serde(default)]
    pub target_rank: Option<usize>,
    /// Condition number of the pretrained weight's spectrum.
    #[serde(default = "default_condition")]
    pub condition: f64,
    /// Teacher shift norm relative to `‖w0‖_F`.
    #[serde(default = "default_shift")]
    pub shift: f64,
}

impl TaskSpec {
    /// 16×12 teacher-student regression with 64 samples.
    pub fn default_teacher_student(seed: u64) -> Self {
        Self {
            kind: TaskKind::TeacherStudent,
            m: 16,
            n: 12,
            batch: 64,
            noise_std: 0.0,
            seed,
            target_rank: None,
            condition: default_condition(),
            shift: default_shift(),
        }
    }

    pub fn default_quadratic(seed: u64) -> Self {
        Self {
            kind: TaskKind::Quadratic,
            ..Self::default_teacher_student(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::Config(format!(
                "task dimensions {}x{} must be positive",
                self.m, self.n
            )));
        }
        if self.kind != TaskKind::Quadratic && self.batch == 0 {
            return Err(Error::Config("batch must be positive".into()));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(Error::Config(format!(
                "noise_std {} must be finite and >= 0",
                self.noise_std
            )));
        }
        if !(self.condition.is_finite() && self.condition >= 1.0) {
            return Err(Error::Config(format!("condition {} must be >= 1", self.condition)));
        }
        if !(self.shift.is_finite() && self.shift >= 0.0) {
            return Err(Error::Config(format!("shift {} must be finite and >= 0", self.shift)));
        }
        if let Some(r) = self.target_rank {
            let k = self.m.min(self.n);
            if r == 0 || r > k {
                return Err(Error::Config(format!("target_rank {r} must lie in 1..={k}")));
            }
        }
        Ok(())
    }
}

/// A materialized task: data, pretrained weight, and loss evaluators.
#[derive(Debug, Clone)]
pub struct Task {
    spec: TaskSpec,
    w0: Matrix,
    w_star: Matrix,
    data: Option<(Matrix, Matrix)>,
}

/// Random matrix with singular values log-uniform on `[1/condition, 1]`.
fn log_uniform_spectrum(rng: &mut SeededRng, m: usize, n: usize, condition: f64) -> Matrix {
    let k = m.min(n);
    let u = rng.orthonormal_columns(m, k);
    let v = rng.orthonormal_columns(n, k);
    let s: Vec<f64> = (0..k)
        .map(|i| {
            let frac = if k == 1 { 0.0 } else { i as f64 / (k - 1) as f64 };
            (-frac * condition.ln()).exp()
        })
        .collect();
    u.scale_columns(&s).matmul_t(&v)
}

pub fn make_task(spec: &TaskSpec) -> Result<Task> {
    spec.validate()?;
    let (m, n) = (spec.m, spec.n);
    let w0 = log_uniform_spectrum(
        &mut SeededRng::for_stream(spec.seed, stream::PRETRAINED),
        m,
        n,
        spec.condition,
    );

    let mut teacher_rng = SeededRng::for_stream(spec.seed, stream::TEACHER);
    let raw_shift = match spec.target_rank {
        Some(r) => teacher_rng
            .gaussian_matrix(m, r, 1.0)
            .matmul(&teacher_rng.gaussian_matrix(r, n, 1.0)),
        None => teacher_rng.gaussian_matrix(m, n, 1.0),
    };
    let norm = raw_shift.frobenius_norm();
    let shift = if norm > 0.0 {
        raw_shift.scale(spec.shift * w0.frobenius_norm() / norm)
    } else {
        raw_shift
    };
    let w_star = w0.add(&shift);

    let data = match spec.kind {
        TaskKind::Quadratic => None,
        TaskKind::TeacherStudent | TaskKind::TwoLayer => {
            let x = SeededRng::for_stream(spec.seed, stream::INPUTS).gaussian_matrix(spec.batch, m, 1.0);
            let clean = x.matmul(&w_star);
            let clean = if spec.kind == TaskKind::TwoLayer {
                clean.map(f64::tanh)
            } else {
                clean
            };
            let noise = SeededRng::for_stream(spec.seed, stream::NOISE).gaussian_matrix(spec.batch, n, spec.noise_std);
            Some((x, clean.add(&noise)))
        }
    };
    Ok(Task {
        spec: spec.clone(),
        w0,
        w_star,
        data,
    })
}

impl Task {
    pub fn spec(&self) -> &TaskSpec {
        &self.spec
    }

    pub fn kind(&self) -> TaskKind {
        self.spec.kind
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.spec.m, self.spec.n)
    }

    /// Pretrained weight every method starts from.
    pub fn w0(&self) -> &Matrix {
        &self.w0
    }

    pub fn w_star(&self) -> &Matrix {
        &self.w_star
    }

    /// Inputs and targets for data-driven tasks.
    pub fn data(&self) -> Option<(&Matrix, &Matrix)> {
        self.data.as_ref().map(|(x, y)| (x, y))
    }

    fn check(&self, w: &Matrix) -> Result<()> {
        if w.shape() != self.shape() {
            return Err(Error::DimensionMismatch {
                op: "task loss",
                lhs: w.shape(),
                rhs: self.shape(),
            });
        }
        Ok(())
    }

    /// Training loss and its gradient with respect to the layer weight.
    pub fn loss_and_gradient(&self, w: &Matrix) -> Result<(f64, Matrix)> {
        self.check(w)?;
        Ok(match (self.spec.kind, &self.data) {
            (TaskKind::Quadratic, _) => {
                let diff = w.sub(&self.w_star);
                (0.5 * diff.frobenius_norm_sq(), diff)
            }
            (TaskKind::TeacherStudent, Some((x, y))) => {
                let inv = 1.0 / x.rows() as f64;
                let resid = x.matmul(w).sub(y);
                (0.5 * inv * resid.frobenius_norm_sq(), x.t_matmul(&resid).scale(inv))
            }
            (TaskKind::TwoLayer, Some((x, y))) => {
                let inv = 1.0 / x.rows() as f64;
                let act = x.matmul(w).map(f64::tanh);
                let resid = act.sub(y);
                let mut local = resid.clone();
                for (l, a) in local.as_mut_slice().iter_mut().zip(act.as_slice()) {
                    *l *= 1.0 - a * a;
                }
                (0.5 * inv * resid.frobenius_norm_sq(), x.t_matmul(&local).scale(inv))
            }
            (kind, None) => unreachable!("{kind:?} task built without data"),
        })
    }

    pub fn loss(&self, w: &Matrix) -> Result<f64> {
        Ok(self.loss_and_gradient(w)?.0)
    }

    pub fn gradient(&self, w: &Matrix) -> Result<Matrix> {
        Ok(self.loss_and_gradient(w)?.1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd;

    #[test]
    fn quadratic_minimum_at_teacher() {
        let task = make_task(&TaskSpec::default_quadratic(1)).unwrap();
        let (loss, grad) = task.loss_and_gradient(task.w_star()).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grad.max_abs(), 0.0);
    }

    #[test]
    fn teacher_student_noiseless_minimum() {
        let task = make_task(&TaskSpec::default_teacher_student(2)).unwrap();
        let loss = task.loss(task.w_star()).unwrap();
        assert!(loss < 1e-28, "{loss}");
        assert!(task.loss(task.w0()).unwrap() > 0.0);
    }

    fn check_fd(spec: &TaskSpec) {
        let task = make_task(spec).unwrap();
        let mut rng = SeededRng::new(99);
        let w = task.w0().add(&rng.gaussian_matrix(spec.m, spec.n, 0.1));
        let g = task.gradient(&w).unwrap();
        let h = 1e-6;
        for idx in 0..w.as_slice().len() {
            let mut p = w.clone();
            let mut q = w.clone();
            p.as_mut_slice()[idx] += h;
            q.as_mut_slice()[idx] -= h;
            let fd = (task.loss(&p).unwrap() - task.loss(&q).unwrap()) / (2.0 * h);
            let an = g.as_slice()[idx];
            assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "{idx}: {fd} vs {an}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut spec = TaskSpec::default_teacher_student(3);
        spec.m = 6;
        spec.n = 4;
        spec.noise_std = 0.1;
        check_fd(&spec);
        spec.kind = TaskKind::TwoLayer;
        check_fd(&spec);
        spec.kind = TaskKind::Quadratic;
        check_fd(&spec);
    }

    #[test]
    fn pretrained_spectrum_is_log_uniform() {
        let mut spec = TaskSpec::default_quadratic(4);
        spec.condition = 100.0;
        let task = make_task(&spec).unwrap();
        let s = svd(task.w0()).unwrap().s;
        assert!((s[0] - 1.0).abs() < 1e-12);
        assert!((s[s.len() - 1] - 0.01).abs() < 1e-12);
        let ratios: Vec<f64> = s.windows(2).map(|p| p[0] / p[1]).collect();
        assert!(ratios.iter().all(|r| (r - ratios[0]).abs() < 1e-9));
    }

    #[test]
    fn low_rank_shift() {
        let mut spec = TaskSpec::default_quadratic(5);
        spec.target_rank = Some(2);
        let task = make_task(&spec).unwrap();
        let s = svd(&task.w_star().sub(task.w0())).unwrap().s;
        assert!(s[2] < 1e-12 * s[0]);
        let rel = task.w_star().sub(task.w0()).frobenius_norm() / task.w0().frobenius_norm();
        assert!((rel - spec.shift).abs() < 1e-12);
    }

    #[test]
    fn deterministic_from_seed() {
        let spec = TaskSpec::default_teacher_student(6);
        let a = make_task(&spec).unwrap();
        let b = make_task(&spec).unwrap();
        assert_eq!(a.w0(), b.w0());
        assert_eq!(a.w_star(), b.w_star());
        assert_eq!(a.data().unwrap().0, b.data().unwrap().0);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = TaskSpec::default_teacher_student(0);
        spec.target_rank = Some(13);
        assert!(make_task(&spec).is_err());
        spec.target_rank = None;
        spec.m = 0;
        assert!(make_task(&spec).is_err());
        let json = r#"{"kind":"quadratic","m":4,"n":3,"seed":1,"bogus":2}"#;
        assert!(serde_json::from_str::<TaskSpec>(json).is_err());
        let task = make_task(&TaskSpec::default_quadratic(0)).unwrap();
        assert!(task.loss(&Matrix::zeros(3, 3)).is_err());
    }
}
