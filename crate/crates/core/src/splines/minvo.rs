//! Polynomial bases whose control points enclose a curve segment.
//!
//! Every basis here is stored as a matrix `A` over `u ∈ [0, 1]`: row `i` holds the
//! coefficients of basis polynomial `λ_i(u)` in `[u^p, …, u, 1]`, so `λ(u) = A·ū`. A curve
//! with power-basis coefficients `C` (rows `[u^p, …, 1]`) has control points `A⁻ᵀ C` in
//! that basis.
//!
//! The MINVO matrices are the minimum-volume enclosing simplices of the moment curve for
//! degrees 2 and 3. Degree 2 has a closed form with `√3`; the degree 3 entries are the
//! numerical optimum polished to double precision.

use nalgebra::{DMatrix, SVector};

use super::{SplineError, TrajectorySpline};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    BSpline,
    Minvo,
    Bezier,
}

/// The local control points of one interval in a given basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentControlPoints<const D: usize> {
    pub interval: usize,
    pub basis: BasisKind,
    pub points: Vec<SVector<f64, D>>,
}

const SQRT3: f64 = 1.732_050_807_568_877_2;

pub const MINVO_DEGREE_2: [[f64; 3]; 3] = [
    [1.5, -(3.0 + SQRT3) / 2.0, (2.0 + SQRT3) / 4.0],
    [-3.0, 3.0, 0.0],
    [1.5, -(3.0 - SQRT3) / 2.0, (2.0 - SQRT3) / 4.0],
];

pub const MINVO_DEGREE_3: [[f64; 4]; 4] = [
    [
        -3.441_630_955_018_368,
        6.989_548_232_531_354,
        -4.462_288_775_546_537,
        0.914_371_498_033_551_7,
    ],
    [
        6.679_258_766_163_305,
        -11.845_989_949_248_76,
        5.252_359_685_051_902,
        0.0,
    ],
    [
        -6.679_258_766_163_305,
        8.191_786_349_241_157,
        -1.598_156_085_044_299_8,
        0.085_628_501_966_448_31,
    ],
    [
        3.441_630_955_018_368,
        -3.335_344_632_523_751,
        0.808_085_175_538_934_5,
        0.0,
    ],
];

fn from_rows<const N: usize>(rows: &[[f64; N]; N]) -> DMatrix<f64> {
    DMatrix::from_fn(N, N, |r, c| rows[r][c])
}

/// MINVO basis matrix for degree 2 or 3.
pub fn minvo_matrix(degree: usize) -> Result<DMatrix<f64>, SplineError> {
    match degree {
        2 => Ok(from_rows(&MINVO_DEGREE_2)),
        3 => Ok(from_rows(&MINVO_DEGREE_3)),
        p => Err(SplineError::UnsupportedDegree(p)),
    }
}

/// Bernstein basis matrix of any degree, same layout as [`minvo_matrix`].
pub fn bernstein_matrix(degree: usize) -> DMatrix<f64> {
    let p = degree;
    let binom = |n: usize, k: usize| -> f64 {
        (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
    };
    // B_i(u) = C(p,i) u^i (1-u)^(p-i) = C(p,i) Σ_k C(p-i,k) (-1)^k u^(i+k)
    let mut m = DMatrix::zeros(p + 1, p + 1);
    for i in 0..=p {
        for k in 0..=p - i {
            let power = i + k;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            m[(i, p - power)] += binom(p, i) * binom(p - i, k) * sign;
        }
    }
    m
}

fn basis_matrix(degree: usize, kind: BasisKind) -> Result<Option<DMatrix<f64>>, SplineError> {
    match kind {
        BasisKind::BSpline => Ok(None),
        BasisKind::Minvo => minvo_matrix(degree).map(Some),
        BasisKind::Bezier => Ok(Some(bernstein_matrix(degree))),
    }
}

/// Matrix `C_j` with `V = C_j Q_j`, mapping the `p + 1` B-spline control points of interval
/// `j` to control points in the requested basis.
pub fn segment_conversion_matrix<const D: usize>(
    spline: &TrajectorySpline<D>,
    j: usize,
    kind: BasisKind,
) -> Result<DMatrix<f64>, SplineError> {
    let count = spline.num_intervals();
    if j >= count {
        return Err(SplineError::IntervalOutOfRange { interval: j, count });
    }
    let p = spline.degree();
    match basis_matrix(p, kind)? {
        None => Ok(DMatrix::identity(p + 1, p + 1)),
        Some(a) => {
            let a_inv = a.try_inverse().expect("basis matrices are invertible");
            Ok((spline.segment_power_matrix(j) * a_inv).transpose())
        }
    }
}

/// Control points of interval `j` in the requested basis.
pub fn segment_to_basis<const D: usize>(
    spline: &TrajectorySpline<D>,
    j: usize,
    kind: BasisKind,
) -> Result<SegmentControlPoints<D>, SplineError> {
    let c = segment_conversion_matrix(spline, j, kind)?;
    let local = &spline.control_points()[j..=j + spline.degree()];
    let points = (0..c.nrows())
        .map(|r| {
            local
                .iter()
                .enumerate()
                .fold(SVector::zeros(), |acc, (k, q)| acc + q * c[(r, k)])
        })
        .collect();
    Ok(SegmentControlPoints {
        interval: j,
        basis: kind,
        points,
    })
}

pub fn segment_to_minvo<const D: usize>(
    spline: &TrajectorySpline<D>,
    j: usize,
) -> Result<SegmentControlPoints<D>, SplineError> {
    segment_to_basis(spline, j, BasisKind::Minvo)
}

/// Control points of the polynomial `Σ_k coeffs[k] u^(p-k)` on `u ∈ [0, 1]`.
pub fn power_to_basis<const D: usize>(
    coeffs: &[SVector<f64, D>],
    kind: BasisKind,
) -> Result<Vec<SVector<f64, D>>, SplineError> {
    let p = coeffs.len() - 1;
    let Some(a) = basis_matrix(p, kind)? else {
        return Err(SplineError::UnsupportedDegree(p));
    };
    let a_inv_t = a
        .try_inverse()
        .expect("basis matrices are invertible")
        .transpose();
    Ok((0..=p)
        .map(|r| {
            coeffs
                .iter()
                .enumerate()
                .fold(SVector::zeros(), |acc, (k, c)| acc + c * a_inv_t[(r, k)])
        })
        .collect())
}
