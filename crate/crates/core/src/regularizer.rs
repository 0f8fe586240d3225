//! Orthonormal regularizer on the singular-vector factors:
//! `‖UᵀU − I‖_F² + ‖VᵀV − I‖_F²`, with `I` the `r×r` identity.

use crate::linalg::Matrix;

/// Loss, gradients, and Lipschitz certificate evaluated at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct RegEval {
    pub loss: f64,
    pub g_u: Matrix,
    pub g_v: Matrix,
    /// `‖U‖_F`, used as the bound `M_U`.
    pub m_u: f64,
    /// `‖V‖_F`, used as the bound `M_V`.
    pub m_v: f64,
    pub lipschitz_bound: f64,
}

fn gram_defect(q: &Matrix) -> Matrix {
    let mut g = q.t_matmul(q);
    for i in 0..g.rows() {
        g.set(i, i, g.get(i, i) - 1.0);
    }
    g
}

pub fn reg_loss(u_p: &Matrix, v_p: &Matrix) -> f64 {
    gram_defect(u_p).frobenius_norm_sq() + gram_defect(v_p).frobenius_norm_sq()
}

/// `(4·U(UᵀU − I), 4·V(VᵀV − I))`.
pub fn reg_grad(u_p: &Matrix, v_p: &Matrix) -> (Matrix, Matrix) {
    (factor_grad(u_p), factor_grad(v_p))
}

fn factor_grad(q: &Matrix) -> Matrix {
    q.matmul(&gram_defect(q)).scale(4.0)
}

/// `4·M_U·(M_U² + 1) + 4·M_V·(M_V² + 1)`.
pub fn lipschitz_certificate(m_u: f64, m_v: f64) -> f64 {
    4.0 * m_u * (m_u * m_u + 1.0) + 4.0 * m_v * (m_v * m_v + 1.0)
}

pub fn evaluate(u_p: &Matrix, v_p: &Matrix) -> RegEval {
    let du = gram_defect(u_p);
    let dv = gram_defect(v_p);
    let m_u = u_p.frobenius_norm();
    let m_v = v_p.frobenius_norm();
    RegEval {
        loss: du.frobenius_norm_sq() + dv.frobenius_norm_sq(),
        g_u: u_p.matmul(&du).scale(4.0),
        g_v: v_p.matmul(&dv).scale(4.0),
        m_u,
        m_v,
        lipschitz_bound: lipschitz_certificate(m_u, m_v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeededRng;

    /// Entry-by-entry evaluation of the two Gram defects.
    fn loss_oracle(u: &Matrix, v: &Matrix) -> f64 {
        let term = |q: &Matrix| {
            let mut acc = 0.0;
            for a in 0..q.cols() {
                for b in 0..q.cols() {
                    let mut g = 0.0;
                    for i in 0..q.rows() {
                        g += q.get(i, a) * q.get(i, b);
                    }
                    let d = g - if a == b { 1.0 } else { 0.0 };
                    acc += d * d;
                }
            }
            acc
        };
        term(u) + term(v)
    }

    #[test]
    fn zero_at_orthonormal_factors() {
        let mut rng = SeededRng::new(1);
        let u = rng.orthonormal_columns(6, 3);
        let v = rng.orthonormal_columns(5, 3);
        assert!(reg_loss(&u, &v) < 1e-28);
        let (gu, gv) = reg_grad(&u, &v);
        assert!(gu.max_abs() < 1e-14 && gv.max_abs() < 1e-14);
    }

    #[test]
    fn scaled_identity() {
        let u = Matrix::identity(2).scale(2.0);
        let v = Matrix::identity(2);
        assert_eq!(reg_loss(&u, &v), 18.0);
        let c: f64 = 1.7;
        let (gu, _) = reg_grad(&Matrix::identity(3).scale(c), &Matrix::identity(3));
        let expected = Matrix::identity(3).scale(4.0 * c * (c * c - 1.0));
        assert!(gu.sub(&expected).max_abs() < 1e-14);
    }

    #[test]
    fn matches_elementwise_oracle() {
        let mut rng = SeededRng::new(2);
        let u = rng.gaussian_matrix(6, 3, 1.0);
        let v = rng.gaussian_matrix(6, 3, 1.0);
        let exact = loss_oracle(&u, &v);
        assert!((reg_loss(&u, &v) - exact).abs() <= 1e-12 * exact.max(1.0));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = SeededRng::new(3);
        let u = rng.gaussian_matrix(5, 2, 0.8);
        let v = rng.gaussian_matrix(4, 2, 0.8);
        let (gu, gv) = reg_grad(&u, &v);
        let h = 1e-6;
        for (which, grad) in [(0, &gu), (1, &gv)] {
            let base = if which == 0 { &u } else { &v };
            for idx in 0..base.as_slice().len() {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus.as_mut_slice()[idx] += h;
                minus.as_mut_slice()[idx] -= h;
                let (lp, lm) = if which == 0 {
                    (loss_oracle(&plus, &v), loss_oracle(&minus, &v))
                } else {
                    (loss_oracle(&u, &plus), loss_oracle(&u, &minus))
                };
                let fd = (lp - lm) / (2.0 * h);
                let an = grad.as_slice()[idx];
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn certificate_values() {
        assert_eq!(lipschitz_certificate(0.0, 0.0), 0.0);
        assert_eq!(lipschitz_certificate(1.0, 1.0), 16.0);
        let e = evaluate(&Matrix::identity(2), &Matrix::identity(2));
        let m = 2f64.sqrt();
        assert!((e.lipschitz_bound - 8.0 * m * 3.0).abs() < 1e-12);
        assert_eq!(e.loss, 0.0);
    }

    #[test]
    fn invariant_under_shared_rotation() {
        let mut rng = SeededRng::new(4);
        for _ in 0..20 {
            let u = rng.gaussian_matrix(7, 3, 1.0);
            let v = rng.gaussian_matrix(5, 3, 1.0);
            let q = rng.orthonormal_columns(3, 3);
            let a = reg_loss(&u, &v);
            let b = reg_loss(&u.matmul(&q), &v.matmul(&q));
            assert!((a - b).abs() <= 1e-10 * a.max(1.0));
        }
    }

    #[test]
    fn gradient_flow_decreases_to_zero() {
        let mut rng = SeededRng::new(5);
        let mut u = rng.orthonormal_columns(6, 2).add(&rng.gaussian_matrix(6, 2, 0.1));
        let mut v = rng.orthonormal_columns(4, 2).add(&rng.gaussian_matrix(4, 2, 0.1));
        let mut prev = reg_loss(&u, &v);
        let mut steps = 0;
        while prev > 1e-10 {
            let (gu, gv) = reg_grad(&u, &v);
            u.axpy(-1e-2, &gu);
            v.axpy(-1e-2, &gv);
            let next = reg_loss(&u, &v);
            assert!(next < prev, "loss rose at step {steps}: {prev} -> {next}");
            prev = next;
            steps += 1;
            assert!(steps < 100_000);
        }
    }
}
