//! Parameterizations of a single linear layer `y = x · W` with `W ∈ ℝ^{m×n}`.
//!
//! | method | trainable                         | frozen  | effective weight       |
//! |--------|-----------------------------------|---------|------------------------|
//! | SORSA  | `u_p` (m×r), `s_p` (r), `v_p` (n×r) | `w_r`   | `w_r + u_p·diag(s_p)·v_pᵀ` |
//! | LoRA   | `b` (m×r), `a` (r×n)              | `w_0`   | `w_0 + b·a`            |
//! | PiSSA  | `a` (m×r), `b` (r×n)              | `w_res` | `w_res + a·b`          |
//! | full   | `w`                               | –       | `w`                    |

mod checkpoint;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointHeader};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::rng::{stream, SeededRng};

/// Which parameterization an adapter uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sorsa,
    Lora,
    Pissa,
    Full,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sorsa => "sorsa",
            Method::Lora => "lora",
            Method::Pissa => "pissa",
            Method::Full => "full",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sorsa" => Ok(Method::Sorsa),
            "lora" => Ok(Method::Lora),
            "pissa" => Ok(Method::Pissa),
            "full" => Ok(Method::Full),
            other => Err(Error::Parse(format!("unknown method {other:?}"))),
        }
    }
}

fn check_split_rank(w0: &Matrix, r: usize) -> Result<()> {
    let k = w0.rows().min(w0.cols());
    if r < 1 || r >= k {
        return Err(Error::RankOutOfRange { rank: r, limit: k });
    }
    if w0.frobenius_norm() == 0.0 {
        return Err(Error::Degenerate("pretrained weight is zero".into()));
    }
    Ok(())
}

fn check_input(x: &Matrix, m: usize, n: usize) -> Result<()> {
    if x.cols() != m {
        return Err(Error::DimensionMismatch {
            op: "forward",
            lhs: x.shape(),
            rhs: (m, n),
        });
    }
    Ok(())
}

fn check_weight_grad(g_w: &Matrix, shape: (usize, usize)) -> Result<()> {
    if g_w.shape() != shape {
        return Err(Error::DimensionMismatch {
            op: "weight gradient",
            lhs: g_w.shape(),
            rhs: shape,
        });
    }
    Ok(())
}

/// SORSA: trainable singular-vector factors and singular values on top of a
/// frozen residual.
#[derive(Debug, Clone, PartialEq)]
pub struct SorsaAdapter {
    u_p: Matrix,
    s_p: Vec<f64>,
    v_p: Matrix,
    w_r: Matrix,
}

/// Gradients of a loss with respect to the SORSA factors.
#[derive(Debug, Clone, PartialEq)]
pub struct SorsaGrads {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl SorsaAdapter {
    /// Splits `w0` into its top-`r` singular triplets (trainable) and the
    /// remainder (frozen, stored densely).
    pub fn init(w0: &Matrix, r: usize) -> Result<Self> {
        check_split_rank(w0, r)?;
        let full = linalg::svd(w0)?;
        let (principal, _) = linalg::truncate(&full, r)?;
        let w_p = principal.reconstruct();
        Ok(Self {
            w_r: w0.sub(&w_p),
            u_p: principal.u,
            s_p: principal.s,
            v_p: principal.v,
        })
    }

    /// Assembles an adapter from explicit parts.
    pub fn from_parts(u_p: Matrix, s_p: Vec<f64>, v_p: Matrix, w_r: Matrix) -> Result<Self> {
        let r = s_p.len();
        if u_p.cols() != r || v_p.cols() != r || w_r.shape() != (u_p.rows(), v_p.rows()) || r == 0 {
            return Err(Error::Shape(format!(
                "inconsistent SORSA parts: u {:?}, s {}, v {:?}, w_r {:?}",
                u_p.shape(),
                r,
                v_p.shape(),
                w_r.shape()
            )));
        }
        if s_p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Shape("non-finite singular value".into()));
        }
        Ok(Self { u_p, s_p, v_p, w_r })
    }

    pub fn u_p(&self) -> &Matrix {
        &self.u_p
    }

    pub fn s_p(&self) -> &[f64] {
        &self.s_p
    }

    pub fn v_p(&self) -> &Matrix {
        &self.v_p
    }

    pub fn w_r(&self) -> &Matrix {
        &self.w_r
    }

    pub fn rank(&self) -> usize {
        self.s_p.len()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.w_r.shape()
    }

    /// `u_p · diag(s_p) · v_pᵀ`.
    pub fn principal_weight(&self) -> Matrix {
        self.u_p.scale_columns(&self.s_p).matmul_t(&self.v_p)
    }

    pub fn effective_weight(&self) -> Matrix {
        self.w_r.add(&self.principal_weight())
    }

    /// `x·w_r + ((x·u_p)·diag(s_p))·v_pᵀ`; the principal weight is never formed.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let (m, n) = self.shape();
        check_input(x, m, n)?;
        let low = x.matmul(&self.u_p).scale_columns(&self.s_p).matmul_t(&self.v_p);
        Ok(x.matmul(&self.w_r).add(&low))
    }

    /// Chain rule from `∂L/∂W` onto the factors:
    /// `g_u = G·v_p·diag(s_p)`, `g_s = diag(u_pᵀ·G·v_p)`, `g_v = Gᵀ·u_p·diag(s_p)`.
    pub fn factor_gradients(&self, g_w: &Matrix) -> Result<SorsaGrads> {
        check_weight_grad(g_w, self.shape())?;
        let gv = g_w.matmul(&self.v_p);
        let s = (0..self.rank())
            .map(|j| (0..gv.rows()).map(|i| self.u_p.get(i, j) * gv.get(i, j)).sum())
            .collect();
        Ok(SorsaGrads {
            u: gv.scale_columns(&self.s_p),
            s,
            v: g_w.t_matmul(&self.u_p).scale_columns(&self.s_p),
        })
    }

    /// `θ ← θ − eta · g` on every trainable factor; `w_r` is untouched.
    pub fn apply(&mut self, grads: &SorsaGrads, eta: f64) {
        self.u_p.axpy(-eta, &grads.u);
        self.v_p.axpy(-eta, &grads.v);
        for (s, g) in self.s_p.iter_mut().zip(&grads.s) {
            *s -= eta * g;
        }
    }

    /// Pushes a factor-space direction `(δU, δs, δV)` through the first-order
    /// map `δU·S·Vᵀ + U·diag(δs)·Vᵀ + U·S·δVᵀ` into weight space.
    pub fn tangent_to_weight(&self, du: &Matrix, ds: &[f64], dv: &Matrix) -> Matrix {
        let left = du.scale_columns(&self.s_p).matmul_t(&self.v_p);
        let mid = self.u_p.scale_columns(ds).matmul_t(&self.v_p);
        let right = self.u_p.scale_columns(&self.s_p).matmul_t(dv);
        left.add(&mid).add(&right)
    }
}

/// LoRA: `W = w_0 + b·a`, with `b` zero at initialization.
#[derive(Debug, Clone, PartialEq)]
pub struct LoraAdapter {
    w_0: Matrix,
    a: Matrix,
    b: Matrix,
}

impl LoraAdapter {
    /// `a` gets i.i.d. N(0, 1/r) entries from `seed`; `b` starts at zero.
    pub fn init(w0: &Matrix, r: usize, seed: u64) -> Result<Self> {
        let (m, n) = w0.shape();
        let k = m.min(n);
        if r < 1 || r > k {
            return Err(Error::RankOutOfRange { rank: r, limit: k + 1 });
        }
        let mut rng = SeededRng::for_stream(seed, stream::LORA_INIT);
        Ok(Self {
            w_0: w0.clone(),
            a: rng.gaussian_matrix(r, n, 1.0 / (r as f64).sqrt()),
            b: Matrix::zeros(m, r),
        })
    }

    pub fn from_parts(w_0: Matrix, a: Matrix, b: Matrix) -> Result<Self> {
        if b.cols() != a.rows() || b.rows() != w_0.rows() || a.cols() != w_0.cols() {
            return Err(Error::Shape("inconsistent LoRA parts".into()));
        }
        Ok(Self { w_0, a, b })
    }

    pub fn w_0(&self) -> &Matrix {
        &self.w_0
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn rank(&self) -> usize {
        self.a.rows()
    }

    pub fn delta(&self) -> Matrix {
        self.b.matmul(&self.a)
    }

    pub fn effective_weight(&self) -> Matrix {
        self.w_0.add(&self.delta())
    }
}

/// PiSSA: `W = w_res + a·b` with `a = U_p·S_p^{1/2}`, `b = S_p^{1/2}·V_pᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PissaAdapter {
    a: Matrix,
    b: Matrix,
    w_res: Matrix,
}

impl PissaAdapter {
    pub fn init(w0: &Matrix, r: usize) -> Result<Self> {
        check_split_rank(w0, r)?;
        let full = linalg::svd(w0)?;
        let (principal, _) = linalg::truncate(&full, r)?;
        let root: Vec<f64> = principal.s.iter().map(|s| s.sqrt()).collect();
        let a = principal.u.scale_columns(&root);
        let b = principal.v.scale_columns(&root).transpose();
        Ok(Self {
            w_res: w0.sub(&a.matmul(&b)),
            a,
            b,
        })
    }

    pub fn from_parts(a: Matrix, b: Matrix, w_res: Matrix) -> Result<Self> {
        if a.cols() != b.rows() || a.rows() != w_res.rows() || b.cols() != w_res.cols() {
            return Err(Error::Shape("inconsistent PiSSA parts".into()));
        }
        Ok(Self { a, b, w_res })
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn w_res(&self) -> &Matrix {
        &self.w_res
    }

    pub fn rank(&self) -> usize {
        self.a.cols()
    }

    pub fn principal_weight(&self) -> Matrix {
        self.a.matmul(&self.b)
    }

    pub fn effective_weight(&self) -> Matrix {
        self.w_res.add(&self.principal_weight())
    }
}

/// Every weight entry trainable.
#[derive(Debug, Clone, PartialEq)]
pub struct FullAdapter {
    pub w: Matrix,
}

/// Any of the four parameterizations.
#[derive(Debug, Clone, PartialEq)]
pub enum Adapter {
    Sorsa(SorsaAdapter),
    Lora(LoraAdapter),
    Pissa(PissaAdapter),
    Full(FullAdapter),
}

/// Gradient with respect to the trainable parameters of an [`Adapter`].
#[derive(Debug, Clone, PartialEq)]
pub enum ParamGrads {
    Sorsa(SorsaGrads),
    /// `(g_a, g_b)` with the shapes of the adapter's `a` and `b`.
    LowRank(Matrix, Matrix),
    Full(Matrix),
}

impl ParamGrads {
    /// Squared Frobenius norm of all blocks concatenated.
    pub fn norm_sq(&self) -> f64 {
        match self {
            ParamGrads::Sorsa(g) => {
                g.u.frobenius_norm_sq() + g.v.frobenius_norm_sq() + g.s.iter().map(|x| x * x).sum::<f64>()
            }
            ParamGrads::LowRank(a, b) => a.frobenius_norm_sq() + b.frobenius_norm_sq(),
            ParamGrads::Full(w) => w.frobenius_norm_sq(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        match self {
            ParamGrads::Sorsa(g) => g.u.is_finite() && g.v.is_finite() && g.s.iter().all(|x| x.is_finite()),
            ParamGrads::LowRank(a, b) => a.is_finite() && b.is_finite(),
            ParamGrads::Full(w) => w.is_finite(),
        }
    }

    pub fn scale(&mut self, c: f64) {
        let scale = |m: &mut Matrix| m.as_mut_slice().iter_mut().for_each(|x| *x *= c);
        match self {
            ParamGrads::Sorsa(g) => {
                scale(&mut g.u);
                scale(&mut g.v);
                g.s.iter_mut().for_each(|x| *x *= c);
            }
            ParamGrads::LowRank(a, b) => {
                scale(a);
                scale(b);
            }
            ParamGrads::Full(w) => scale(w),
        }
    }
}

impl Adapter {
    /// Initializes `method` from the pretrained weight `w0`. `seed` only
    /// matters for LoRA; `rank` is ignored by full updates.
    pub fn init(method: Method, w0: &Matrix, rank: usize, seed: u64) -> Result<Self> {
        Ok(match method {
            Method::Sorsa => Adapter::Sorsa(SorsaAdapter::init(w0, rank)?),
            Method::Lora => Adapter::Lora(LoraAdapter::init(w0, rank, seed)?),
            Method::Pissa => Adapter::Pissa(PissaAdapter::init(w0, rank)?),
            Method::Full => Adapter::Full(FullAdapter { w: w0.clone() }),
        })
    }

    pub fn method(&self) -> Method {
        match self {
            Adapter::Sorsa(_) => Method::Sorsa,
            Adapter::Lora(_) => Method::Lora,
            Adapter::Pissa(_) => Method::Pissa,
            Adapter::Full(_) => Method::Full,
        }
    }

    /// `(m, n)` of the layer weight.
    pub fn shape(&self) -> (usize, usize) {
        match self {
            Adapter::Sorsa(a) => a.shape(),
            Adapter::Lora(a) => a.w_0.shape(),
            Adapter::Pissa(a) => a.w_res.shape(),
            Adapter::Full(a) => a.w.shape(),
        }
    }

    /// Adapter rank; `None` for full updates.
    pub fn rank(&self) -> Option<usize> {
        match self {
            Adapter::Sorsa(a) => Some(a.rank()),
            Adapter::Lora(a) => Some(a.rank()),
            Adapter::Pissa(a) => Some(a.rank()),
            Adapter::Full(_) => None,
        }
    }

    pub fn trainable_parameters(&self) -> usize {
        let (m, n) = self.shape();
        match self.rank() {
            Some(r) if self.method() == Method::Sorsa => r * (m + n + 1),
            Some(r) => r * (m + n),
            None => m * n,
        }
    }

    /// The weight the layer computes with, i.e. the merged adapter.
    pub fn effective_weight(&self) -> Matrix {
        match self {
            Adapter::Sorsa(a) => a.effective_weight(),
            Adapter::Lora(a) => a.effective_weight(),
            Adapter::Pissa(a) => a.effective_weight(),
            Adapter::Full(a) => a.w.clone(),
        }
    }

    /// The frozen part, if any.
    pub fn frozen_weight(&self) -> Option<&Matrix> {
        match self {
            Adapter::Sorsa(a) => Some(&a.w_r),
            Adapter::Lora(a) => Some(&a.w_0),
            Adapter::Pissa(a) => Some(&a.w_res),
            Adapter::Full(_) => None,
        }
    }

    /// The trainable low-rank product and its nominal rank: `W_p` for
    /// SORSA/PiSSA, `b·a` for LoRA, the whole weight for full updates.
    pub fn trainable_product(&self) -> (Matrix, Option<usize>) {
        match self {
            Adapter::Sorsa(a) => (a.principal_weight(), Some(a.rank())),
            Adapter::Lora(a) => (a.delta(), Some(a.rank())),
            Adapter::Pissa(a) => (a.principal_weight(), Some(a.rank())),
            Adapter::Full(a) => (a.w.clone(), None),
        }
    }

    /// Applies the layer to a batch `x` (batch×m) without merging weights.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let (m, n) = self.shape();
        check_input(x, m, n)?;
        Ok(match self {
            Adapter::Sorsa(a) => a.forward(x)?,
            Adapter::Lora(a) => x.matmul(&a.w_0).add(&x.matmul(&a.b).matmul(&a.a)),
            Adapter::Pissa(a) => x.matmul(&a.w_res).add(&x.matmul(&a.a).matmul(&a.b)),
            Adapter::Full(a) => x.matmul(&a.w),
        })
    }

    /// Maps `∂L/∂W` onto the trainable parameters.
    pub fn param_gradients(&self, g_w: &Matrix) -> Result<ParamGrads> {
        check_weight_grad(g_w, self.shape())?;
        Ok(match self {
            Adapter::Sorsa(a) => ParamGrads::Sorsa(a.factor_gradients(g_w)?),
            // W = w_0 + b·a
            Adapter::Lora(a) => ParamGrads::LowRank(a.b.t_matmul(g_w), g_w.matmul_t(&a.a)),
            // W = w_res + a·b
            Adapter::Pissa(a) => ParamGrads::LowRank(g_w.matmul_t(&a.b), a.a.t_matmul(g_w)),
            Adapter::Full(_) => ParamGrads::Full(g_w.clone()),
        })
    }

    /// `θ ← θ − eta · g`.
    ///
    /// Panics if `grads` belongs to a different parameterization.
    pub fn apply(&mut self, grads: &ParamGrads, eta: f64) {
        match (self, grads) {
            (Adapter::Sorsa(a), ParamGrads::Sorsa(g)) => a.apply(g, eta),
            (Adapter::Lora(a), ParamGrads::LowRank(ga, gb)) => {
                a.a.axpy(-eta, ga);
                a.b.axpy(-eta, gb);
            }
            (Adapter::Pissa(a), ParamGrads::LowRank(ga, gb)) => {
                a.a.axpy(-eta, ga);
                a.b.axpy(-eta, gb);
            }
            (Adapter::Full(a), ParamGrads::Full(g)) => a.w.axpy(-eta, g),
            (adapter, _) => panic!("gradient kind does not match {} adapter", adapter.method()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::svd;

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        a.sub(b).frobenius_norm() / b.frobenius_norm().max(1.0)
    }

    #[test]
    fn sorsa_diagonal_split() {
        let w0 = Matrix::from_diag(&[3.0, 2.0, 1.0]);
        let a = SorsaAdapter::init(&w0, 1).unwrap();
        assert_eq!(a.s_p(), &[3.0]);
        let res = svd(a.w_r()).unwrap();
        assert!((res.s[0] - 2.0).abs() < 1e-15 && (res.s[1] - 1.0).abs() < 1e-15);
        assert!(res.s[2].abs() < 1e-15);
        assert_eq!(a.effective_weight(), w0);
    }

    #[test]
    fn sorsa_factors_are_orthonormal() {
        let w0 = SeededRng::new(7).gaussian_matrix(8, 6, 1.0);
        let a = SorsaAdapter::init(&w0, 2).unwrap();
        let err = a.u_p().t_matmul(a.u_p()).sub(&Matrix::identity(2)).frobenius_norm();
        assert!(err <= 1e-10);
        let err = a.v_p().t_matmul(a.v_p()).sub(&Matrix::identity(2)).frobenius_norm();
        assert!(err <= 1e-10);
        assert!(rel_err(&a.effective_weight(), &w0) <= 1e-8);
        let top = svd(&w0).unwrap().s;
        assert_eq!(a.s_p(), &top[..2]);
    }

    #[test]
    fn init_rejects_bad_rank_and_zero_weight() {
        let w0 = Matrix::identity(3);
        assert!(matches!(SorsaAdapter::init(&w0, 0), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(SorsaAdapter::init(&w0, 3), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(PissaAdapter::init(&w0, 3), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(
            LoraAdapter::init(&w0, 4, 0),
            Err(Error::RankOutOfRange { .. })
        ));
        assert!(matches!(
            SorsaAdapter::init(&Matrix::zeros(4, 3), 1),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn lora_starts_at_pretrained_weight() {
        let w0 = SeededRng::new(1).gaussian_matrix(5, 4, 1.0);
        let a = LoraAdapter::init(&w0, 2, 99).unwrap();
        assert_eq!(a.effective_weight(), w0);
        assert_eq!(a.a().shape(), (2, 4));
        assert_eq!(a.b().shape(), (5, 2));
        assert_eq!(a, LoraAdapter::init(&w0, 2, 99).unwrap());
        assert_ne!(a.a(), LoraAdapter::init(&w0, 2, 100).unwrap().a());
    }

    #[test]
    fn pissa_diagonal_and_reconstruction() {
        let a = PissaAdapter::init(&Matrix::from_diag(&[3.0, 2.0, 1.0]), 1).unwrap();
        assert!(a.principal_weight().sub(&Matrix::from_diag(&[3.0, 0.0, 0.0])).max_abs() < 1e-15);
        let w0 = SeededRng::new(2).gaussian_matrix(7, 5, 1.0);
        let a = PissaAdapter::init(&w0, 3).unwrap();
        assert!(rel_err(&a.effective_weight(), &w0) <= 1e-8);
        let s = SorsaAdapter::init(&w0, 3).unwrap();
        assert!(a.principal_weight().sub(&s.principal_weight()).frobenius_norm() <= 1e-10);
    }

    #[test]
    fn trainable_parameter_counts() {
        let w0 = SeededRng::new(3).gaussian_matrix(16, 12, 1.0);
        let count = |m| Adapter::init(m, &w0, 4, 0).unwrap().trainable_parameters();
        assert_eq!(count(Method::Sorsa), 4 * (16 + 12 + 1));
        assert_eq!(count(Method::Lora), 4 * (16 + 12));
        assert_eq!(count(Method::Pissa), 4 * (16 + 12));
        assert_eq!(count(Method::Full), 16 * 12);
    }

    #[test]
    fn forward_probes() {
        let w0 = SeededRng::new(4).gaussian_matrix(5, 3, 1.0);
        let a = Adapter::init(Method::Sorsa, &w0, 1, 0).unwrap();
        let y = a.forward(&Matrix::identity(5)).unwrap();
        assert!(y.sub(&a.effective_weight()).max_abs() < 1e-14);
        assert_eq!(a.forward(&Matrix::zeros(2, 5)).unwrap(), Matrix::zeros(2, 3));
        assert!(matches!(
            a.forward(&Matrix::zeros(2, 4)),
            Err(Error::DimensionMismatch { op: "forward", .. })
        ));
    }

    #[test]
    fn sorsa_forward_matches_dense_product() {
        let mut rng = SeededRng::new(5);
        let w0 = rng.gaussian_matrix(6, 4, 1.0);
        let a = SorsaAdapter::init(&w0, 2).unwrap();
        let x = rng.gaussian_matrix(3, 6, 1.0);
        let dense = x.matmul(&a.effective_weight());
        assert!(a.forward(&x).unwrap().sub(&dense).max_abs() <= 1e-10);
    }

    #[test]
    fn factor_gradients_identity_case() {
        let g = SeededRng::new(6).gaussian_matrix(3, 3, 1.0);
        let a = SorsaAdapter::from_parts(
            Matrix::identity(3),
            vec![1.0; 3],
            Matrix::identity(3),
            Matrix::zeros(3, 3),
        )
        .unwrap();
        let grads = a.factor_gradients(&g).unwrap();
        assert_eq!(grads.u, g);
        assert_eq!(grads.s, g.diagonal());
        assert_eq!(grads.v, g.transpose());
        let zero = a.factor_gradients(&Matrix::zeros(3, 3)).unwrap();
        assert_eq!(zero.u, Matrix::zeros(3, 3));
        assert!(zero.s.iter().all(|&x| x == 0.0));
        assert!(a.factor_gradients(&Matrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn gradient_kind_mismatch_panics() {
        let w0 = Matrix::identity(3);
        let mut a = Adapter::init(Method::Full, &w0, 1, 0).unwrap();
        let g = ParamGrads::LowRank(Matrix::zeros(1, 1), Matrix::zeros(1, 1));
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| a.apply(&g, 0.1)));
        assert!(result.is_err());
    }

    #[test]
    fn method_names_round_trip() {
        for m in [Method::Sorsa, Method::Lora, Method::Pissa, Method::Full] {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("dora".parse::<Method>().is_err());
    }
}
