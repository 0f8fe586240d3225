//! One-sided Jacobi SVD.
//!
//! Column pairs are orthogonalized in a fixed cyclic order `(0,1), (0,2), ...,
//! (n-2,n-1)` until no pair has a relative inner product above
//! [`JACOBI_TOLERANCE`]. The output is canonicalized so that identical inputs
//! always produce identical factors:
//!
//! - singular values are stable-sorted in descending order;
//! - in each left singular vector the entry of largest magnitude (lowest row
//!   index on ties) is non-negative, and the matching right vector follows.

use super::{complete_basis_vector, dot, norm, Matrix};
use crate::error::{Error, Result};

/// A pair is considered orthogonal once `|a_p·a_q| <= tol * ‖a_p‖‖a_q‖`.
pub const JACOBI_TOLERANCE: f64 = 1e-14;

const MAX_SWEEPS: usize = 80;

/// Columns whose norm falls at or below this fraction of the largest one are
/// treated as null directions; their left vectors are rebuilt by completion.
const NULL_COLUMN_RATIO: f64 = 1e-15;

/// Compact SVD `w = u · diag(s) · vᵀ`, with `u` (m×k), `v` (n×k).
///
/// `k = min(m, n)` for a full decomposition; truncated pieces produced by
/// [`truncate`] carry fewer columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub v: Matrix,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// `u · diag(s) · vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        self.u.scale_columns(&self.s).matmul_t(&self.v)
    }
}

/// Computes the compact SVD of `w`.
pub fn svd(w: &Matrix) -> Result<SvdResult> {
    if let Some(idx) = w.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: idx / w.cols(),
            col: idx % w.cols(),
            value: w.as_slice()[idx],
        });
    }
    let (mut u, s, mut v) = if w.rows() >= w.cols() {
        jacobi_tall(w)
    } else {
        let (u_t, s, v_t) = jacobi_tall(&w.transpose());
        (v_t, s, u_t)
    };
    canonicalize_signs(&mut u, &mut v);
    Ok(SvdResult { u, s, v })
}

/// One-sided Jacobi on a matrix with `rows >= cols`.
fn jacobi_tall(w: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let (m, n) = w.shape();
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| w.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let alpha = dot(&a[p], &a[p]);
                let beta = dot(&a[q], &a[q]);
                let gamma = dot(&a[p], &a[q]);
                if alpha == 0.0 || beta == 0.0 || gamma.abs() <= JACOBI_TOLERANCE * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + 1f64.hypot(zeta))
                };
                let c = 1.0 / 1f64.hypot(t);
                let s = c * t;
                rotate(&mut a, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let norms: Vec<f64> = a.iter().map(|c| norm(c)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    // stable: equal values keep sweep order
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let s_max = s[0];
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut pending = Vec::new();
    for (pos, &j) in order.iter().enumerate() {
        let sj = norms[j];
        if sj > 0.0 && sj > NULL_COLUMN_RATIO * s_max {
            u_cols.push(a[j].iter().map(|x| x / sj).collect());
        } else {
            u_cols.push(Vec::new());
            pending.push(pos);
        }
    }
    for pos in pending {
        let filled: Vec<Vec<f64>> = u_cols.iter().filter(|c| !c.is_empty()).cloned().collect();
        u_cols[pos] = complete_basis_vector(m, &filled);
    }
    let v_cols: Vec<Vec<f64>> = order.iter().map(|&j| v[j].clone()).collect();
    (Matrix::from_columns(m, &u_cols), s, Matrix::from_columns(n, &v_cols))
}

fn rotate(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (lo, hi) = cols.split_at_mut(q);
    for (x, y) in lo[p].iter_mut().zip(hi[0].iter_mut()) {
        let (xp, xq) = (*x, *y);
        *x = c * xp - s * xq;
        *y = s * xp + c * xq;
    }
}

fn canonicalize_signs(u: &mut Matrix, v: &mut Matrix) {
    for j in 0..u.cols() {
        let mut pivot = 0;
        let mut best = -1.0;
        for i in 0..u.rows() {
            let mag = u.get(i, j).abs();
            if mag > best {
                best = mag;
                pivot = i;
            }
        }
        if u.get(pivot, j) < 0.0 {
            for i in 0..u.rows() {
                u.set(i, j, -u.get(i, j));
            }
            for i in 0..v.rows() {
                v.set(i, j, -v.get(i, j));
            }
        }
    }
}

/// Splits an SVD into its leading `r` triplets and the remaining ones.
pub fn truncate(svd: &SvdResult, r: usize) -> Result<(SvdResult, SvdResult)> {
    let k = svd.rank();
    if r < 1 || r >= k {
        return Err(Error::RankOutOfRange { rank: r, limit: k });
    }
    let principal = SvdResult {
        u: svd.u.columns(0..r),
        s: svd.s[..r].to_vec(),
        v: svd.v.columns(0..r),
    };
    let residual = SvdResult {
        u: svd.u.columns(r..k),
        s: svd.s[r..].to_vec(),
        v: svd.v.columns(r..k),
    };
    Ok((principal, residual))
}
