//! Dense row-major matrices in 64-bit floating point, plus the decompositions
//! and norms built on them.

mod io;
mod svd;

pub use io::{format_value, read_csv, read_matrix_csv, write_csv, write_matrix_csv};
pub use svd::{svd, truncate, SvdResult, JACOBI_TOLERANCE};

use crate::error::{Error, Result};

/// Singular values at or below this fraction of the largest one count as zero.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// A dense real matrix with finite entries, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting empty shapes,
    /// length mismatches, and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("{rows}x{cols} has an empty dimension")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(idx) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / cols,
                col: idx % cols,
                value: data[idx],
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub(crate) fn from_vec_unchecked(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::Shape("ragged rows".into()));
        }
        Self::new(n_rows, n_cols, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec_unchecked(rows, cols, vec![0.0; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![1.0; n])
    }

    /// Square diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Self {
        Self::diag_rect(diag.len(), diag.len(), diag)
    }

    /// `rows x cols` matrix with `diag` on the main diagonal.
    pub fn diag_rect(rows: usize, cols: usize, diag: &[f64]) -> Self {
        let mut m = Self::zeros(rows, cols);
        for (i, &d) in diag.iter().enumerate().take(rows.min(cols)) {
            m.set(i, i, d);
        }
        m
    }

    pub fn from_columns(rows: usize, columns: &[Vec<f64>]) -> Self {
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, col) in columns.iter().enumerate() {
            m.set_column(j, col);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows, "column length");
        for (i, &v) in values.iter().enumerate() {
            self.set(i, j, v);
        }
    }

    /// Copies the columns in `range` into a new matrix.
    pub fn columns(&self, range: std::ops::Range<usize>) -> Self {
        assert!(range.end <= self.cols && range.start < range.end, "column range");
        let width = range.end - range.start;
        let mut data = Vec::with_capacity(self.rows * width);
        for i in 0..self.rows {
            data.extend_from_slice(&self.row(i)[range.clone()]);
        }
        Self::from_vec_unchecked(self.rows, width, data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    /// Matrix product; returns an error on inner-dimension mismatch.
    pub fn try_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Matrix product.
    ///
    /// Panics on inner-dimension mismatch; use [`Matrix::try_matmul`] for
    /// shapes that come from user input.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        self.try_matmul(rhs).expect("matmul shape")
    }

    /// `selfᵀ · rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.rows, rhs.rows, "t_matmul shape");
        let mut out = Self::zeros(self.cols, rhs.cols);
        for k in 0..self.rows {
            let rhs_row = rhs.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self · rhsᵀ` without materializing the transpose.
    pub fn matmul_t(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.cols, "matmul_t shape");
        let mut out = Self::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..rhs.rows {
                out.data[i * rhs.rows + j] = dot(a, rhs.row(j));
            }
        }
        out
    }

    fn zip_with(&self, rhs: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return Err(Error::DimensionMismatch {
                op,
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let data = self.data.iter().zip(&rhs.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self::from_vec_unchecked(self.rows, self.cols, data))
    }

    pub fn try_add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn try_sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    /// Elementwise sum; panics on shape mismatch.
    pub fn add(&self, rhs: &Matrix) -> Matrix {
        self.try_add(rhs).expect("add shape")
    }

    /// Elementwise difference; panics on shape mismatch.
    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        self.try_sub(rhs).expect("sub shape")
    }

    /// `self += alpha * rhs`.
    pub fn axpy(&mut self, alpha: f64, rhs: &Matrix) {
        assert_eq!(self.shape(), rhs.shape(), "axpy shape");
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&self, alpha: f64) -> Matrix {
        self.map(|v| alpha * v)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Self::from_vec_unchecked(self.rows, self.cols, self.data.iter().map(|&v| f(v)).collect())
    }

    /// `self · diag(weights)`: scales column `j` by `weights[j]`.
    pub fn scale_columns(&self, weights: &[f64]) -> Matrix {
        assert_eq!(weights.len(), self.cols, "scale_columns length");
        let mut out = self.clone();
        for row in out.data.chunks_mut(self.cols) {
            for (v, &w) in row.iter_mut().zip(weights) {
                *v *= w;
            }
        }
        out
    }

    /// `diag(weights) · self`: scales row `i` by `weights[i]`.
    pub fn scale_rows(&self, weights: &[f64]) -> Matrix {
        assert_eq!(weights.len(), self.rows, "scale_rows length");
        let mut out = self.clone();
        for (row, &w) in out.data.chunks_mut(self.cols).zip(weights) {
            for v in row {
                *v *= w;
            }
        }
        out
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sq().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    /// Modified Gram-Schmidt (two passes) on the columns. Columns that
    /// collapse numerically are replaced by the standard basis vector with
    /// the largest remaining component.
    pub fn orthonormalize_columns(&self) -> Matrix {
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(self.cols);
        for j in 0..self.cols {
            let candidate = self.column(j);
            let start_norm = norm(&candidate);
            let mut v = candidate;
            project_out(&mut v, &basis);
            let n = norm(&v);
            if n > 1e-10 * start_norm.max(f64::MIN_POSITIVE) && n > 0.0 {
                v.iter_mut().for_each(|x| *x /= n);
                basis.push(v);
            } else {
                basis.push(complete_basis_vector(self.rows, &basis));
            }
        }
        Self::from_columns(self.rows, &basis)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project_out(v: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(v, b);
            v.iter_mut().zip(b).for_each(|(x, &y)| *x -= c * y);
        }
    }
}

/// Unit vector orthogonal to every vector in `basis`, built from the
/// standard basis vector with the largest residual after projection.
pub(crate) fn complete_basis_vector(dim: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        project_out(&mut e, basis);
        let n = norm(&e);
        if best.as_ref().is_none_or(|(bn, _)| n > *bn) {
            best = Some((n, e));
        }
    }
    let (n, mut e) = best.expect("dimension >= 1");
    e.iter_mut().for_each(|x| *x /= n);
    e
}

/// Frobenius norm.
pub fn frobenius_norm(w: &Matrix) -> f64 {
    w.frobenius_norm()
}

/// Largest singular value.
pub fn spectral_norm(w: &Matrix) -> Result<f64> {
    Ok(svd(w)?.s[0])
}

/// Ratio of the largest to the smallest nonzero singular value.
///
/// With `rank_hint = Some(r)` the ratio is `s[0] / s[r - 1]`, the natural
/// choice for a matrix known to have rank `r`. Values at or below
/// [`RANK_TOLERANCE`] times the largest singular value count as zero.
pub fn condition_number(w: &Matrix, rank_hint: Option<usize>) -> Result<f64> {
    condition_number_from_values(&svd(w)?.s, rank_hint)
}

/// [`condition_number`] over a descending list of singular values.
pub fn condition_number_from_values(s: &[f64], rank_hint: Option<usize>) -> Result<f64> {
    let s_max = s.first().copied().unwrap_or(0.0);
    if s_max <= 0.0 {
        return Err(Error::UndefinedCondition("matrix is zero".into()));
    }
    let cutoff = RANK_TOLERANCE * s_max;
    let s_min = match rank_hint {
        Some(r) => {
            if r == 0 || r > s.len() {
                return Err(Error::RankOutOfRange {
                    rank: r,
                    limit: s.len() + 1,
                });
            }
            let v = s[r - 1];
            if v <= cutoff {
                return Err(Error::UndefinedCondition(format!(
                    "singular value {r} is numerically zero ({v:e})"
                )));
            }
            v
        }
        None => s.iter().copied().rfind(|&v| v > cutoff).unwrap_or(s_max),
    };
    Ok(s_max / s_min)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(Matrix::new(2, 2, vec![1.0; 3]), Err(Error::Shape(_))));
        assert!(matches!(Matrix::new(0, 2, vec![]), Err(Error::Shape(_))));
        assert!(matches!(
            Matrix::new(1, 2, vec![1.0, f64::NAN]),
            Err(Error::NonFinite { row: 0, col: 1, .. })
        ));
        assert!(Matrix::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn products_agree() {
        let a = m(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]);
        let b = m(&[&[1.0, 0.0], &[0.0, 1.0], &[1.0, 1.0]]);
        let ab = a.matmul(&b);
        assert_eq!(ab, m(&[&[4.0, 5.0], &[10.0, 11.0]]));
        assert_eq!(a.transpose().t_matmul(&b), ab);
        assert_eq!(a.matmul_t(&b.transpose()), ab);
        assert!(matches!(a.try_matmul(&a), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn norms() {
        assert!((frobenius_norm(&Matrix::identity(3)) - 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(frobenius_norm(&m(&[&[1.0, 2.0], &[2.0, 4.0]])), 5.0);
        let s = spectral_norm(&Matrix::from_diag(&[3.0, 2.0])).unwrap();
        assert!((s - 3.0).abs() < 1e-15);
    }

    #[test]
    fn condition_numbers() {
        assert!((condition_number(&Matrix::identity(4), None).unwrap() - 1.0).abs() < 1e-14);
        let k = condition_number(&Matrix::from_diag(&[3.0, 2.0]), None).unwrap();
        assert!((k - 1.5).abs() < 1e-14);
        assert!(matches!(
            condition_number(&Matrix::zeros(3, 3), None),
            Err(Error::UndefinedCondition(_))
        ));
        // nonzero-only: the zero singular value is ignored
        let k = condition_number(&Matrix::from_diag(&[4.0, 0.0, 2.0]), None).unwrap();
        assert!((k - 2.0).abs() < 1e-14);
        assert!(condition_number(&Matrix::from_diag(&[4.0, 0.0]), Some(2)).is_err());
        assert!(condition_number(&Matrix::from_diag(&[4.0, 1.0]), Some(3)).is_err());
    }

    #[test]
    fn rank_two_condition_number_from_known_factors() {
        let mut rng = crate::rng::SeededRng::new(11);
        let u = rng.orthonormal_columns(8, 2);
        let v = rng.orthonormal_columns(8, 2);
        let w = u.scale_columns(&[5.0, 0.5]).matmul_t(&v);
        let k = condition_number(&w, Some(2)).unwrap();
        assert!((k - 10.0).abs() < 1e-10, "{k}");
        // without the hint the numerically-zero tail is dropped as well
        let k = condition_number(&w, None).unwrap();
        assert!((k - 10.0).abs() < 1e-10, "{k}");
    }

    #[test]
    fn orthonormalize_handles_dependent_columns() {
        let a = m(&[&[1.0, 2.0], &[1.0, 2.0], &[0.0, 0.0]]);
        let q = a.orthonormalize_columns();
        let gram = q.t_matmul(&q);
        assert!(gram.sub(&Matrix::identity(2)).frobenius_norm() < 1e-14);
    }
}
