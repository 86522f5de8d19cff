//! Dense tableau simplex for small linear programs whose origin is feasible.

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Unbounded,
    IterationLimit,
}

const PIVOT_EPS: f64 = 1e-12;

/// Maximize `cᵀx` subject to `A x ≤ b`, `x ≥ 0`, with `b ≥ 0` so that `x = 0` is a
/// basic feasible start. `a` is row-major `m × n`. Bland's rule guards against cycling
/// on the degenerate vertices these problems start from.
pub fn maximize(c: &[f64], a: &[f64], b: &[f64]) -> LpOutcome {
    let n = c.len();
    let m = b.len();
    debug_assert_eq!(a.len(), m * n);
    debug_assert!(b.iter().all(|v| *v >= 0.0));
    let width = n + m + 1;
    let mut tab = vec![0.0; (m + 1) * width];
    for i in 0..m {
        let row = &mut tab[i * width..(i + 1) * width];
        row[..n].copy_from_slice(&a[i * n..(i + 1) * n]);
        row[n + i] = 1.0;
        row[width - 1] = b[i];
    }
    // objective row holds -c so that a negative entry marks an improving column
    for j in 0..n {
        tab[m * width + j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();
    let max_iter = 50 * (n + m) + 100;
    for _ in 0..max_iter {
        let obj = &tab[m * width..(m + 1) * width];
        let Some(enter) = (0..n + m).find(|&j| obj[j] < -1e-11) else {
            let mut x = vec![0.0; n];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < n {
                    x[bv] = tab[i * width + width - 1];
                }
            }
            let objective = tab[m * width + width - 1];
            return LpOutcome::Optimal { x, objective };
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = tab[i * width + enter];
            if aij > PIVOT_EPS {
                let ratio = tab[i * width + width - 1] / aij;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - 1e-14 || (ratio <= lr + 1e-14 && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((r, _)) = leave else {
            return LpOutcome::Unbounded;
        };
        let piv = tab[r * width + enter];
        for k in 0..width {
            tab[r * width + k] /= piv;
        }
        for i in 0..=m {
            if i == r {
                continue;
            }
            let f = tab[i * width + enter];
            if f != 0.0 {
                for k in 0..width {
                    tab[i * width + k] -= f * tab[r * width + k];
                }
            }
        }
        basis[r] = enter;
    }
    LpOutcome::IterationLimit
}
