//! Strictly convex QPs with linear inequalities, Goldfarb–Idnani dual active set.
//!
//! Problems here have at most a few dozen variables, so the reduced inverse Hessian and the
//! pseudo-inverse of the active normals are rebuilt densely from the active set on every
//! step instead of being updated with Givens rotations.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QpError {
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("constraints are infeasible")]
    Infeasible,
    #[error("iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Indices of the constraints active at the solution.
    pub active: Vec<usize>,
    /// Lagrange multipliers of the active constraints (same order).
    pub multipliers: Vec<f64>,
    pub iterations: usize,
}

/// Minimize `½ xᵀ G x + cᵀ x` subject to `A x ≤ b`.
pub fn solve_qp(g: &DMatrix<f64>, c: &DVector<f64>, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<QpSolution, QpError> {
    let n = g.nrows();
    let m = a.nrows();
    let chol = g.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let g_inv = chol.inverse();
    // normalized rows keep the violation tolerance scale-free
    let norms: Vec<f64> = (0..m).map(|i| a.row(i).norm()).collect();
    let normals: Vec<DVector<f64>> = (0..m)
        .map(|i| {
            if norms[i] > 0.0 {
                -a.row(i).transpose() / norms[i]
            } else {
                DVector::zeros(n)
            }
        })
        .collect();
    let rhs: Vec<f64> = (0..m).map(|i| if norms[i] > 0.0 { b[i] / norms[i] } else { b[i] }).collect();
    let slack = |x: &DVector<f64>, i: usize| normals[i].dot(x) + rhs[i];
    let feas_tol = 1e-10 * (1.0 + rhs.iter().fold(0.0f64, |acc, v| acc.max(v.abs())));

    let mut x = -(&g_inv * c);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let max_iter = 10 * (m + n) + 50;
    let mut iterations = 0;

    loop {
        let mut p = None;
        let mut worst = -feas_tol;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            if norms[i] == 0.0 {
                if rhs[i] < -feas_tol {
                    return Err(QpError::Infeasible);
                }
                continue;
            }
            let s = slack(&x, i);
            if s < worst {
                worst = s;
                p = Some(i);
            }
        }
        let Some(p) = p else {
            return Ok(QpSolution {
                x,
                active,
                multipliers: u,
                iterations,
            });
        };
        let np = &normals[p];
        let mut u_plus = 0.0;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit);
            }
            let q = active.len();
            let (z, r) = if q == 0 {
                (&g_inv * np, DVector::zeros(0))
            } else {
                let nmat = DMatrix::from_fn(n, q, |row, col| normals[active[col]][row]);
                let ginv_n = &g_inv * &nmat;
                let mmat = nmat.transpose() * &ginv_n;
                let Some(m_inv) = mmat.try_inverse() else {
                    return Err(QpError::Infeasible);
                };
                let nstar = &m_inv * ginv_n.transpose();
                let r = &nstar * np;
                let z = &g_inv * np - &ginv_n * &r;
                (z, r)
            };
            // partial step: largest step keeping the dual feasible
            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (k, rk) in r.iter().enumerate() {
                if *rk > 1e-12 {
                    let ratio = u[k] / rk;
                    if ratio < t1 {
                        t1 = ratio;
                        drop = Some(k);
                    }
                }
            }
            let zn = z.dot(np);
            let t2 = if zn > 1e-14 { -slack(&x, p) / zn } else { f64::INFINITY };
            if t1.is_infinite() && t2.is_infinite() {
                return Err(QpError::Infeasible);
            }
            if t2.is_infinite() {
                for (k, rk) in r.iter().enumerate() {
                    u[k] -= t1 * rk;
                }
                u_plus += t1;
                let k = drop.unwrap();
                active.remove(k);
                u.remove(k);
                continue;
            }
            let t = t1.min(t2);
            x += &z * t;
            for (k, rk) in r.iter().enumerate() {
                u[k] -= t * rk;
            }
            u_plus += t;
            if t2 <= t1 {
                active.push(p);
                u.push(u_plus);
                break;
            }
            let k = drop.unwrap();
            active.remove(k);
            u.remove(k);
        }
    }
}
