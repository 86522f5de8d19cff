//! Clamped uniform B-splines.
//!
//! A spline of degree `p` with `n + 1` control points has `m + 1 = n + p + 2` knots: the
//! first and last `p + 1` knots coincide with the domain ends and the interior knots are
//! uniformly spaced. Interval `j` spans `[t_{p+j}, t_{p+j+1}]` and is shaped by control
//! points `j ..= j + p`.

mod minvo;
mod operators;

pub use minvo::{
    bernstein_matrix, minvo_matrix, power_to_basis, segment_conversion_matrix, segment_to_basis,
    segment_to_minvo, BasisKind, SegmentControlPoints,
};
pub use operators::SplineOperators;

use nalgebra::{DMatrix, SVector, Vector1, Vector3};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplineError {
    #[error("degree {degree} needs at least {needed} control points, got {got}")]
    TooFewControlPoints {
        degree: usize,
        needed: usize,
        got: usize,
    },
    #[error("spline duration must be positive (t_in = {t_in}, t_f = {t_f})")]
    NonpositiveDuration { t_in: f64, t_f: f64 },
    #[error("t = {t} outside the spline domain [{t_in}, {t_f}]")]
    OutOfDomain { t: f64, t_in: f64, t_f: f64 },
    #[error("derivative order {order} exceeds degree {degree}")]
    DerivativeOrder { order: usize, degree: usize },
    #[error("unsupported degree {0} (MINVO conversion is available for degrees 2 and 3)")]
    UnsupportedDegree(usize),
    #[error("interval {interval} out of range (spline has {count} intervals)")]
    IntervalOutOfRange { interval: usize, count: usize },
}

/// Knot vector of a clamped uniform spline.
pub fn clamped_uniform_knots(degree: usize, num_control_points: usize, t_in: f64, t_f: f64) -> Vec<f64> {
    let intervals = num_control_points - degree;
    let dt = (t_f - t_in) / intervals as f64;
    let mut knots = vec![t_in; degree + 1];
    knots.extend((1..intervals).map(|k| t_in + dt * k as f64));
    knots.extend(std::iter::repeat(t_f).take(degree + 1));
    knots
}

/// Values of the `p + 1` basis functions that are non-zero on knot span `span`
/// (`knots[span] <= t <= knots[span + 1]`), Cox-de Boor recursion.
pub(crate) fn basis_functions(knots: &[f64], degree: usize, span: usize, t: f64) -> Vec<f64> {
    let mut n = vec![0.0; degree + 1];
    let mut left = vec![0.0; degree + 1];
    let mut right = vec![0.0; degree + 1];
    n[0] = 1.0;
    for j in 1..=degree {
        left[j] = t - knots[span + 1 - j];
        right[j] = knots[span + j] - t;
        let mut saved = 0.0;
        for r in 0..j {
            let temp = n[r] / (right[r + 1] + left[j - r]);
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Clamped uniform spline with `D`-dimensional control points.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySpline<const D: usize> {
    degree: usize,
    control_points: Vec<SVector<f64, D>>,
    knots: Vec<f64>,
}

/// Position spline (`p(t)`, degree 3 in the planner).
pub type PositionSpline = TrajectorySpline<3>;
/// Spline of the rotation angle about the thrust axis (`ψ(t)`, degree 2 in the planner).
pub type AngleSpline = TrajectorySpline<1>;

impl<const D: usize> TrajectorySpline<D> {
    /// Build a clamped uniform spline over `[t_in, t_f]`.
    pub fn new(
        degree: usize,
        control_points: Vec<SVector<f64, D>>,
        t_in: f64,
        t_f: f64,
    ) -> Result<Self, SplineError> {
        if control_points.len() < degree + 1 {
            return Err(SplineError::TooFewControlPoints {
                degree,
                needed: degree + 1,
                got: control_points.len(),
            });
        }
        if !(t_f > t_in) {
            return Err(SplineError::NonpositiveDuration { t_in, t_f });
        }
        let knots = clamped_uniform_knots(degree, control_points.len(), t_in, t_f);
        Ok(Self {
            degree,
            control_points,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn control_points(&self) -> &[SVector<f64, D>] {
        &self.control_points
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn t_in(&self) -> f64 {
        self.knots[0]
    }

    pub fn t_f(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Number of knot intervals `|J|`.
    pub fn num_intervals(&self) -> usize {
        self.control_points.len() - self.degree
    }

    /// `(t_start, t_end)` of interval `j`.
    pub fn interval_bounds(&self, j: usize) -> (f64, f64) {
        (self.knots[self.degree + j], self.knots[self.degree + j + 1])
    }

    /// Interval containing `t` (the last interval owns `t_f`).
    pub fn interval_of(&self, t: f64) -> usize {
        let count = self.num_intervals();
        let dt = (self.t_f() - self.t_in()) / count as f64;
        let j = ((t - self.t_in()) / dt).floor();
        let mut j = if j < 0.0 { 0 } else { j as usize };
        j = j.min(count - 1);
        // guard against rounding in the floor above
        while j > 0 && t < self.interval_bounds(j).0 {
            j -= 1;
        }
        while j + 1 < count && t >= self.interval_bounds(j + 1).0 {
            j += 1;
        }
        j
    }

    /// Non-zero basis function values on interval `j` at time `t` (functions `j ..= j + p`).
    pub fn basis_values(&self, j: usize, t: f64) -> Vec<f64> {
        basis_functions(&self.knots, self.degree, self.degree + j, t)
    }

    fn check_domain(&self, t: f64) -> Result<(), SplineError> {
        let (t_in, t_f) = (self.t_in(), self.t_f());
        let tol = 1e-12 * (t_f - t_in).max(1.0);
        if t < t_in - tol || t > t_f + tol {
            return Err(SplineError::OutOfDomain { t, t_in, t_f });
        }
        Ok(())
    }

    /// Evaluate on a given interval (one-sided at interior knots).
    pub fn evaluate_on_interval(&self, j: usize, t: f64) -> SVector<f64, D> {
        self.basis_values(j, t)
            .iter()
            .zip(&self.control_points[j..=j + self.degree])
            .fold(SVector::zeros(), |acc, (b, q)| acc + q * *b)
    }

    /// Value of the `k`-th derivative at `t`.
    pub fn evaluate(&self, t: f64, k: usize) -> Result<SVector<f64, D>, SplineError> {
        self.check_domain(t)?;
        if k > self.degree {
            return Ok(SVector::zeros());
        }
        let t = t.clamp(self.t_in(), self.t_f());
        let mut s = std::borrow::Cow::Borrowed(self);
        for _ in 0..k {
            s = std::borrow::Cow::Owned(s.derivative().expect("degree checked above"));
        }
        // clamped ends interpolate exactly; the recursion can be an ulp off there
        if t == s.t_in() {
            return Ok(s.control_points[0]);
        }
        if t == s.t_f() {
            return Ok(*s.control_points.last().unwrap());
        }
        Ok(s.evaluate_on_interval(s.interval_of(t), t))
    }

    /// Control points of the derivative spline: `p (Q_{i+1} - Q_i) / (t_{i+p+1} - t_{i+1})`.
    pub fn derivative_points(&self) -> Vec<SVector<f64, D>> {
        let p = self.degree as f64;
        (0..self.control_points.len() - 1)
            .map(|i| {
                let dt = self.knots[i + self.degree + 1] - self.knots[i + 1];
                (self.control_points[i + 1] - self.control_points[i]) * (p / dt)
            })
            .collect()
    }

    /// The derivative as a spline of degree `p - 1` (`None` for constant splines).
    pub fn derivative(&self) -> Option<Self> {
        if self.degree == 0 {
            return None;
        }
        Some(Self {
            degree: self.degree - 1,
            control_points: self.derivative_points(),
            knots: self.knots[1..self.knots.len() - 1].to_vec(),
        })
    }

    /// Matrix mapping control points to derivative control points (rows: derivative points).
    pub fn derivative_matrix(&self) -> DMatrix<f64> {
        let n = self.control_points.len();
        let p = self.degree as f64;
        let mut m = DMatrix::zeros(n - 1, n);
        for i in 0..n - 1 {
            let c = p / (self.knots[i + self.degree + 1] - self.knots[i + 1]);
            m[(i, i)] = -c;
            m[(i, i + 1)] = c;
        }
        m
    }

    /// Coefficients `c_l` such that the `k`-th derivative on interval `j` at `t` equals
    /// `Σ c_l q_l` (indices into this spline's control points).
    pub fn basis_row(&self, j: usize, t: f64, k: usize) -> Vec<(usize, f64)> {
        if k > self.degree {
            return Vec::new();
        }
        let mut chain = DMatrix::<f64>::identity(self.control_points.len(), self.control_points.len());
        let mut s = self.clone();
        for _ in 0..k {
            chain = s.derivative_matrix() * chain;
            s = s.derivative().unwrap();
        }
        let vals = s.basis_values(j, t);
        let mut row = vec![0.0; self.control_points.len()];
        for (r, b) in vals.iter().enumerate() {
            for (l, coef) in row.iter_mut().enumerate() {
                *coef += b * chain[(j + r, l)];
            }
        }
        row.into_iter()
            .enumerate()
            .filter(|(_, c)| *c != 0.0)
            .collect()
    }

    /// Power-basis matrix of interval `j`: row `r` holds the coefficients of basis
    /// function `N_{j+r}` in `[u^p, …, u, 1]`, with `u ∈ [0, 1]` the normalized time.
    pub fn segment_power_matrix(&self, j: usize) -> DMatrix<f64> {
        let p = self.degree;
        let (ta, tb) = self.interval_bounds(j);
        let us: Vec<f64> = (0..=p)
            .map(|s| if p == 0 { 0.5 } else { s as f64 / p as f64 })
            .collect();
        let mut vals = DMatrix::zeros(p + 1, p + 1);
        let mut vander = DMatrix::zeros(p + 1, p + 1);
        for (s, u) in us.iter().enumerate() {
            let b = self.basis_values(j, ta + u * (tb - ta));
            for r in 0..=p {
                vals[(r, s)] = b[r];
            }
            for c in 0..=p {
                vander[(s, c)] = u.powi((p - c) as i32);
            }
        }
        let vt_inv = vander
            .transpose()
            .try_inverse()
            .expect("Vandermonde matrix on distinct nodes is invertible");
        vals * vt_inv
    }

    pub fn with_control_points(&self, control_points: Vec<SVector<f64, D>>) -> Result<Self, SplineError> {
        Self::new(self.degree, control_points, self.t_in(), self.t_f())
    }
}

/// Alias matching the construction operation of the planner.
pub fn make_clamped_spline<const D: usize>(
    degree: usize,
    control_points: Vec<SVector<f64, D>>,
    t_in: f64,
    t_f: f64,
) -> Result<TrajectorySpline<D>, SplineError> {
    TrajectorySpline::new(degree, control_points, t_in, t_f)
}

/// Velocity, acceleration and jerk control points of a cubic position spline.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedControlPoints {
    pub velocity: Vec<Vector3<f64>>,
    pub acceleration: Vec<Vector3<f64>>,
    pub jerk: Vec<Vector3<f64>>,
}

pub fn derivative_control_points(spline: &PositionSpline) -> DerivedControlPoints {
    let mut levels = Vec::new();
    let mut s = spline.clone();
    for _ in 0..3 {
        match s.derivative() {
            Some(d) => {
                levels.push(d.control_points().to_vec());
                s = d;
            }
            None => levels.push(Vec::new()),
        }
    }
    let jerk = levels.pop().unwrap();
    let acceleration = levels.pop().unwrap();
    let velocity = levels.pop().unwrap();
    DerivedControlPoints {
        velocity,
        acceleration,
        jerk,
    }
}

/// `Ψ_l`, control points of `ψ̇`.
pub fn angle_rate_control_points(spline: &AngleSpline) -> Vec<f64> {
    spline.derivative_points().iter().map(|v| v[0]).collect()
}

/// Convenience: wrap scalars as 1-D control points.
pub fn scalar_points(values: &[f64]) -> Vec<Vector1<f64>> {
    values.iter().map(|v| Vector1::new(*v)).collect()
}
