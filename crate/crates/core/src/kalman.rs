//! Constant-velocity Kalman filter over `(cx, cy, a, h)` with
//! confidence-scaled measurement noise.
//!
//! The state is the box center, aspect ratio `w/h`, height and their
//! per-frame velocities. Process and measurement noise scale with the box
//! height so the filter behaves the same for near and far objects.

use log::warn;
use nalgebra::{SMatrix, SVector};

use crate::types::{BBox, MIN_SIDE};

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
pub type Measurement = SVector<f64, 4>;
pub type MeasurementCovariance = SMatrix<f64, 4, 4>;
pub type Emission = SMatrix<f64, 4, 8>;

/// Regularization added to a singular innovation covariance.
pub const INNOVATION_JITTER: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl KalmanState {
    pub fn bbox(&self) -> BBox {
        BBox::from_xyah(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }

    pub fn projected_mean(&self, emission: &Emission) -> Measurement {
        emission * self.mean
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanParams {
    pub transition: StateCovariance,
    pub emission: Emission,
    pub std_weight_position: f64,
    pub std_weight_velocity: f64,
}

impl KalmanParams {
    /// Unit time step, identity emission on the first four state entries.
    pub fn new(std_weight_position: f64, std_weight_velocity: f64) -> Self {
        let mut transition = StateCovariance::identity();
        for i in 0..4 {
            transition[(i, i + 4)] = 1.0;
        }
        let mut emission = Emission::zeros();
        for i in 0..4 {
            emission[(i, i)] = 1.0;
        }
        Self {
            transition,
            emission,
            std_weight_position,
            std_weight_velocity,
        }
    }

    pub fn process_noise(&self, mean: &StateVector) -> StateCovariance {
        let h = mean[3];
        let (wp, wv) = (self.std_weight_position, self.std_weight_velocity);
        let std = [wp * h, wp * h, 1e-2, wp * h, wv * h, wv * h, 1e-5, wv * h];
        if wp == 0.0 && wv == 0.0 {
            return StateCovariance::zeros();
        }
        StateCovariance::from_diagonal(&StateVector::from_iterator(std.iter().map(|s| s * s)))
    }

    pub fn measurement_noise(&self, mean: &StateVector) -> MeasurementCovariance {
        let h = mean[3];
        let wp = self.std_weight_position;
        let std = [wp * h, wp * h, 1e-1, wp * h];
        MeasurementCovariance::from_diagonal(&Measurement::from_iterator(std.iter().map(|s| s * s)))
    }

    /// Fresh track state: zero velocity, covariance scaled by box height.
    pub fn initiate(&self, z: &Measurement) -> KalmanState {
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(z);
        let h = z[3];
        let (wp, wv) = (self.std_weight_position, self.std_weight_velocity);
        let std = [
            2.0 * wp * h,
            2.0 * wp * h,
            1e-2,
            2.0 * wp * h,
            10.0 * wv * h,
            10.0 * wv * h,
            1e-5,
            10.0 * wv * h,
        ];
        let covariance =
            StateCovariance::from_diagonal(&StateVector::from_iterator(std.iter().map(|s| s * s)));
        KalmanState { mean, covariance }
    }
}

pub fn measurement_from_bbox(b: &BBox) -> Measurement {
    Measurement::from(b.to_xyah())
}

/// Time update: `mean' = G mean`, `P' = G P Gᵀ + Q`.
pub fn predict(state: &KalmanState, params: &KalmanParams) -> KalmanState {
    let g = &params.transition;
    let q = params.process_noise(&state.mean);
    KalmanState {
        mean: g * state.mean,
        covariance: g * state.covariance * g.transpose() + q,
    }
}

/// Confidence-scaled measurement noise: `(1 - conf) R`. Out-of-range
/// confidences are clamped to `[0, 1]`.
pub fn nsa_noise(r: &MeasurementCovariance, conf: f64) -> MeasurementCovariance {
    let c = if (0.0..=1.0).contains(&conf) {
        conf
    } else {
        warn!("detection confidence {conf} outside [0, 1]; clamping");
        if conf.is_nan() {
            0.0
        } else {
            conf.clamp(0.0, 1.0)
        }
    };
    r * (1.0 - c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanUpdate {
    pub state: KalmanState,
    /// The innovation covariance had to be regularized before inversion.
    pub regularized: bool,
}

/// Measurement update with noise `nsa_noise(R, conf)`.
pub fn update(
    state: &KalmanState,
    z: &Measurement,
    conf: f64,
    params: &KalmanParams,
) -> KalmanUpdate {
    let h = &params.emission;
    let r_hat = nsa_noise(&params.measurement_noise(&state.mean), conf);
    let ph_t = state.covariance * h.transpose();
    let mut innovation_cov = h * ph_t + r_hat;
    innovation_cov = (innovation_cov + innovation_cov.transpose()) * 0.5;

    let mut regularized = false;
    let mut jitter = INNOVATION_JITTER;
    let chol = loop {
        if let Some(c) = innovation_cov.cholesky() {
            break Some(c);
        }
        regularized = true;
        innovation_cov += MeasurementCovariance::identity() * jitter;
        jitter *= 10.0;
        if jitter > 1.0 {
            break None;
        }
    };
    if regularized {
        warn!("innovation covariance numerically singular; regularized");
    }
    let Some(chol) = chol else {
        return KalmanUpdate {
            state: state.clone(),
            regularized,
        };
    };

    // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ since S and P are symmetric.
    let gain = chol.solve(&ph_t.transpose()).transpose();
    let innovation = z - h * state.mean;
    let mut mean = state.mean + gain * innovation;
    let mut covariance = (StateCovariance::identity() - gain * h) * state.covariance;
    covariance = (covariance + covariance.transpose()) * 0.5;

    mean[2] = mean[2].max(MIN_SIDE);
    mean[3] = mean[3].max(MIN_SIDE);
    KalmanUpdate {
        state: KalmanState { mean, covariance },
        regularized,
    }
}

/// Center-to-center Euclidean distance between the predicted box and the
/// measurement, divided by the frame diagonal.
pub fn gating_distance(state: &KalmanState, z: &Measurement, frame_diagonal: f64) -> f64 {
    let dx = state.mean[0] - z[0];
    let dy = state.mean[1] - z[1];
    dx.hypot(dy) / frame_diagonal
}
