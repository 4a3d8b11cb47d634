//! Constant-velocity Kalman filter over the 16-dimensional box state
//! `[x, y, z, l, w, h, sin, cos]` followed by the rates of those eight.
//!
//! The transition is `[[I, dt I], [0, I]]` and the observation picks the
//! first eight components. Heading is carried as `(sin, cos)` and
//! renormalized after every update so the filter never wraps an angle.

use nalgebra::{SMatrix, SVector};
#[allow(unused_imports)] // inherent float methods exist once std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::geometry::Box3D;

pub const STATE_DIM: usize = 16;
pub const MEAS_DIM: usize = 8;

pub type StateVector = SVector<f64, STATE_DIM>;
pub type StateCovariance = SMatrix<f64, STATE_DIM, STATE_DIM>;
pub type Measurement = SVector<f64, MEAS_DIM>;
pub type MeasurementCovariance = SMatrix<f64, MEAS_DIM, MEAS_DIM>;

/// Smallest box extent kept by the filter.
pub const MIN_EXTENT: f64 = 1e-3;

/// Diagonal noise variances, one per block.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseConfig {
    pub q_position: f64,
    pub q_size: f64,
    pub q_heading: f64,
    pub q_velocity: f64,
    pub q_size_rate: f64,
    pub q_heading_rate: f64,
    pub r_position: f64,
    pub r_size: f64,
    pub r_heading: f64,
    /// Initial variance of the rate components of a new track.
    pub p0_velocity: f64,
    pub p0_size_rate: f64,
    pub p0_heading_rate: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            q_position: 0.01,
            q_size: 1e-4,
            q_heading: 1e-3,
            q_velocity: 0.1,
            q_size_rate: 1e-4,
            q_heading_rate: 1e-2,
            r_position: 0.01,
            r_size: 0.01,
            r_heading: 0.01,
            p0_velocity: 100.0,
            p0_size_rate: 0.01,
            p0_heading_rate: 1.0,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.q_position,
            self.q_size,
            self.q_heading,
            self.q_velocity,
            self.q_size_rate,
            self.q_heading_rate,
            self.r_position,
            self.r_size,
            self.r_heading,
            self.p0_velocity,
            self.p0_size_rate,
            self.p0_heading_rate,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidConfig("noise variances must be positive".into()));
        }
        Ok(())
    }

    pub fn process(&self) -> StateCovariance {
        let d = [
            self.q_position,
            self.q_position,
            self.q_position,
            self.q_size,
            self.q_size,
            self.q_size,
            self.q_heading,
            self.q_heading,
            self.q_velocity,
            self.q_velocity,
            self.q_velocity,
            self.q_size_rate,
            self.q_size_rate,
            self.q_size_rate,
            self.q_heading_rate,
            self.q_heading_rate,
        ];
        StateCovariance::from_diagonal(&StateVector::from_column_slice(&d))
    }

    pub fn measurement(&self) -> MeasurementCovariance {
        let d = [
            self.r_position,
            self.r_position,
            self.r_position,
            self.r_size,
            self.r_size,
            self.r_size,
            self.r_heading,
            self.r_heading,
        ];
        MeasurementCovariance::from_diagonal(&Measurement::from_column_slice(&d))
    }

    fn initial(&self) -> StateCovariance {
        let mut p = StateCovariance::zeros();
        let r = self.measurement();
        for i in 0..MEAS_DIM {
            p[(i, i)] = r[(i, i)];
        }
        for i in 8..11 {
            p[(i, i)] = self.p0_velocity;
        }
        for i in 11..14 {
            p[(i, i)] = self.p0_size_rate;
        }
        for i in 14..16 {
            p[(i, i)] = self.p0_heading_rate;
        }
        p
    }
}

/// `[cx, cy, cz, l, w, h, sin yaw, cos yaw]`.
pub fn measurement_from_box(b: &Box3D) -> Measurement {
    let (s, c) = b.yaw.sin_cos();
    Measurement::from_column_slice(&[b.cx, b.cy, b.cz, b.l, b.w, b.h, s, c])
}

/// Inverse of [`measurement_from_box`] on the first eight state entries.
pub fn box_from_state(x: &StateVector) -> Box3D {
    Box3D {
        cx: x[0],
        cy: x[1],
        cz: x[2],
        l: x[3].max(MIN_EXTENT),
        w: x[4].max(MIN_EXTENT),
        h: x[5].max(MIN_EXTENT),
        yaw: x[6].atan2(x[7]),
    }
}

pub fn transition(dt: f64) -> StateCovariance {
    let mut f = StateCovariance::identity();
    for i in 0..MEAS_DIM {
        f[(i, i + MEAS_DIM)] = dt;
    }
    f
}

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl KalmanState {
    /// Starts at the measured box with zero rates.
    pub fn from_measurement(z: &Measurement, noise: &NoiseConfig) -> Self {
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<MEAS_DIM>(0).copy_from(z);
        let mut s = KalmanState {
            mean,
            covariance: noise.initial(),
        };
        s.normalize();
        s
    }

    pub fn predict(&mut self, dt: f64, q: &StateCovariance) {
        // F x touches only the first half: x_i += dt * v_i.
        for i in 0..MEAS_DIM {
            self.mean[i] += dt * self.mean[i + MEAS_DIM];
        }
        let f = transition(dt);
        self.covariance = f * self.covariance * f.transpose() + q;
        symmetrize(&mut self.covariance);
    }

    /// Joseph-form update with `H = [I | 0]`.
    pub fn update(&mut self, z: &Measurement, r: &MeasurementCovariance) -> Result<()> {
        let p = &self.covariance;
        let s: MeasurementCovariance = p.fixed_view::<MEAS_DIM, MEAS_DIM>(0, 0) + r;
        let chol = s.cholesky().ok_or(Error::NumericalFailure)?;
        // K = P H^T S^-1, computed as (S^-1 H P)^T since S and P are symmetric.
        let ph: SMatrix<f64, STATE_DIM, MEAS_DIM> = p.fixed_view::<STATE_DIM, MEAS_DIM>(0, 0).into_owned();
        let gain: SMatrix<f64, STATE_DIM, MEAS_DIM> = chol.solve(&ph.transpose()).transpose();
        let innovation = z - self.mean.fixed_rows::<MEAS_DIM>(0);
        self.mean += gain * innovation;

        let mut ikh = StateCovariance::identity();
        {
            let mut block = ikh.fixed_view_mut::<STATE_DIM, MEAS_DIM>(0, 0);
            block -= &gain;
        }
        self.covariance = ikh * self.covariance * ikh.transpose() + gain * r * gain.transpose();
        symmetrize(&mut self.covariance);
        if self.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure);
        }
        self.normalize();
        Ok(())
    }

    /// Clamps extents and puts `(sin, cos)` back on the unit circle.
    fn normalize(&mut self) {
        for i in 3..6 {
            self.mean[i] = self.mean[i].max(MIN_EXTENT);
        }
        let (s, c) = (self.mean[6], self.mean[7]);
        let norm = (s * s + c * c).sqrt();
        if norm > 1e-12 {
            self.mean[6] = s / norm;
            self.mean[7] = c / norm;
        } else {
            self.mean[6] = 0.0;
            self.mean[7] = 1.0;
        }
    }

    pub fn to_box(&self) -> Box3D {
        box_from_state(&self.mean)
    }

    /// The eight predicted observations.
    pub fn observation(&self) -> Measurement {
        self.mean.fixed_rows::<MEAS_DIM>(0).into_owned()
    }
}

fn symmetrize(p: &mut StateCovariance) {
    for i in 0..STATE_DIM {
        for j in (i + 1)..STATE_DIM {
            let v = 0.5 * (p[(i, j)] + p[(j, i)]);
            p[(i, j)] = v;
            p[(j, i)] = v;
        }
    }
}
