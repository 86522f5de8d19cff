//! Polynomial trajectory prediction with Gaussian prediction intervals.

use std::fmt::Debug;

use nalgebra::{DMatrix, DVector, Vector3};
use statrs::function::erf::erfc_inv;

use super::{Track, TrackingError};

/// Condition number of `XᵀX` above which a fit is rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Inverse of the standard normal CDF.
pub fn norminv(delta: f64) -> Result<f64, TrackingError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(TrackingError::OutOfRange(delta));
    }
    // Φ⁻¹(p) = −√2 erfc⁻¹(2p); evaluate in the tail that keeps erfc⁻¹'s argument small
    if delta <= 0.5 {
        Ok(-std::f64::consts::SQRT_2 * erfc_inv(2.0 * delta))
    } else {
        Ok(std::f64::consts::SQRT_2 * erfc_inv(2.0 * (1.0 - delta)))
    }
}

/// Mean and per-axis spread of an obstacle's future position.
pub trait ObstaclePrediction: Debug + Send + Sync {
    fn id(&self) -> usize;
    fn mean(&self, t: f64) -> Vector3<f64>;
    fn velocity(&self, t: f64) -> Vector3<f64>;
    /// Per-axis standard deviation.
    fn sigma(&self, t: f64) -> Vector3<f64>;
    /// Half-sides of the obstacle's axis-aligned bounding box.
    fn half_sides(&self) -> Vector3<f64>;
    /// Last time the prediction may be queried.
    fn valid_until(&self) -> f64;

    /// Half-width of the two-sided interval holding the position with probability `delta`
    /// on each axis.
    fn interval_half_width(&self, t: f64, delta: f64) -> Vector3<f64> {
        let z = norminv(0.5 * (1.0 + delta)).expect("delta validated by the config");
        self.sigma(t) * z
    }
}

/// Least-squares polynomial fit of a track's window, one polynomial per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictedTrajectory {
    pub id: usize,
    /// Time is mapped to `τ = (t − t_ref) / t_scale` before taking powers.
    t_ref: f64,
    t_scale: f64,
    /// Ascending powers of `τ`, per axis.
    coeffs: [Vec<f64>; 3],
    xtx_inv: DMatrix<f64>,
    sigma_hat: Vector3<f64>,
    half_sides: Vector3<f64>,
    window_end: f64,
    valid_until: f64,
}

impl PredictedTrajectory {
    pub fn degree(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    pub fn residual_std(&self) -> Vector3<f64> {
        self.sigma_hat
    }

    pub fn window_end(&self) -> f64 {
        self.window_end
    }

    fn tau(&self, t: f64) -> f64 {
        (t - self.t_ref) / self.t_scale
    }

    fn features(&self, t: f64) -> DVector<f64> {
        let tau = self.tau(t);
        DVector::from_iterator(self.coeffs[0].len(), (0..self.coeffs[0].len()).map(|k| tau.powi(k as i32)))
    }

    fn leverage(&self, t: f64) -> f64 {
        let x = self.features(t);
        (x.transpose() * &self.xtx_inv * &x)[0].max(0.0)
    }
}

impl ObstaclePrediction for PredictedTrajectory {
    fn id(&self) -> usize {
        self.id
    }

    fn mean(&self, t: f64) -> Vector3<f64> {
        let tau = self.tau(t);
        Vector3::from_fn(|a, _| self.coeffs[a].iter().rev().fold(0.0, |acc, c| acc * tau + c))
    }

    fn velocity(&self, t: f64) -> Vector3<f64> {
        let tau = self.tau(t);
        Vector3::from_fn(|a, _| {
            let c = &self.coeffs[a];
            (1..c.len())
                .rev()
                .fold(0.0, |acc, k| acc * tau + k as f64 * c[k])
                / self.t_scale
        })
    }

    fn sigma(&self, t: f64) -> Vector3<f64> {
        self.sigma_hat * (1.0 + self.leverage(t)).sqrt()
    }

    fn half_sides(&self) -> Vector3<f64> {
        self.half_sides
    }

    fn valid_until(&self) -> f64 {
        self.valid_until
    }
}

/// Fit a per-axis polynomial of `degree` to the track's window and extend the prediction
/// `horizon` seconds past the last observation.
pub fn fit_and_predict(track: &Track, degree: usize, horizon: f64) -> Result<PredictedTrajectory, TrackingError> {
    let window = track.window();
    let n = window.len();
    if n < degree + 2 {
        return Err(TrackingError::InsufficientHistory {
            needed: degree + 2,
            got: n,
        });
    }
    let (t_first, t_last) = (window.front().unwrap().0, window.back().unwrap().0);
    let t_ref = 0.5 * (t_first + t_last);
    let t_scale = (0.5 * (t_last - t_first)).max(1e-6);
    let cols = degree + 1;
    let x = DMatrix::from_fn(n, cols, |r, c| ((window[r].0 - t_ref) / t_scale).powi(c as i32));
    let svd = x.clone().svd(false, false);
    let (smax, smin) = (svd.singular_values.max(), svd.singular_values.min());
    let cond = if smin > 0.0 { (smax / smin).powi(2) } else { f64::INFINITY };
    if !(cond <= MAX_CONDITION) {
        return Err(TrackingError::IllConditioned(cond));
    }
    let xtx = x.transpose() * &x;
    let xtx_inv = xtx
        .clone()
        .try_inverse()
        .ok_or(TrackingError::IllConditioned(f64::INFINITY))?;
    let dof = (n - cols) as f64;
    let mut coeffs: [Vec<f64>; 3] = Default::default();
    let mut sigma_hat = Vector3::zeros();
    for axis in 0..3 {
        let y = DVector::from_iterator(n, window.iter().map(|(_, p)| p[axis]));
        let beta = &xtx_inv * (x.transpose() * &y);
        let resid = &y - &x * &beta;
        sigma_hat[axis] = (resid.norm_squared() / dof).sqrt();
        coeffs[axis] = beta.iter().copied().collect();
    }
    Ok(PredictedTrajectory {
        id: track.id(),
        t_ref,
        t_scale,
        coeffs,
        xtx_inv,
        sigma_hat,
        half_sides: track.half_sides(),
        window_end: t_last,
        valid_until: t_last + horizon,
    })
}

/// Prediction that always holds its last observed position, used for tracks too young to fit.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticPrediction {
    pub id: usize,
    pub position: Vector3<f64>,
    pub sigma: Vector3<f64>,
    pub half_sides: Vector3<f64>,
    pub valid_until: f64,
}

impl ObstaclePrediction for StaticPrediction {
    fn id(&self) -> usize {
        self.id
    }
    fn mean(&self, _t: f64) -> Vector3<f64> {
        self.position
    }
    fn velocity(&self, _t: f64) -> Vector3<f64> {
        Vector3::zeros()
    }
    fn sigma(&self, _t: f64) -> Vector3<f64> {
        self.sigma
    }
    fn half_sides(&self) -> Vector3<f64> {
        self.half_sides
    }
    fn valid_until(&self) -> f64 {
        self.valid_until
    }
}
