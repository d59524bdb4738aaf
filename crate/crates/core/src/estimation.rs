//! Linear Kalman filter over `[x, ẋ, z, ż, θ, θ̇]` with a constant-velocity
//! model per axis.
//!
//! Naming follows the robot's original write-up rather than the textbook:
//! `R` is the process-noise covariance and `Q` the measurement covariance.
//! The observation model is the identity.

use std::io::{self, Write};

use nalgebra::{DMatrix, Matrix2, Matrix6, Vector2, Vector6};
use serde::{Deserialize, Serialize};

use crate::geometry::wrap_angle;

/// State index of the heading, whose innovation is wrapped.
pub const THETA: usize = 4;

/// Yaw-channel measurement covariance `(θ, θ̇)` measured on the prototype.
pub const YAW_MEASUREMENT_COVARIANCE: [[f64; 2]; 2] = [[1023.684, 0.221], [0.221, 25.228]];

/// Variance used for measurement channels that are absent on a tick.
pub const MISSING_CHANNEL_VARIANCE: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimationError {
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("need at least 2 samples, got {0}")]
    InsufficientData(usize),
    #[error("sample {index} has {got} channels, expected {expected}")]
    DimensionMismatch { index: usize, expected: usize, got: usize },
    #[error("invalid noise configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterState {
    pub mean: Vector6<f64>,
    pub covariance: Matrix6<f64>,
}

impl FilterState {
    pub fn new(mean: Vector6<f64>, covariance: Matrix6<f64>) -> Self {
        FilterState { mean, covariance }
    }

    pub fn x(&self) -> f64 {
        self.mean[0]
    }

    pub fn z(&self) -> f64 {
        self.mean[2]
    }

    pub fn theta(&self) -> f64 {
        self.mean[THETA]
    }

    pub fn asymmetry(&self) -> f64 {
        (self.covariance - self.covariance.transpose()).amax()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let sym = 0.5 * (self.covariance + self.covariance.transpose());
        sym.symmetric_eigenvalues().min()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    /// Acceleration std-devs for x, z (m/s²) and θ (rad/s²).
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    /// Sample interval, the camera period.
    pub dt: f64,
    /// Measurement covariance, row-major.
    pub q: [[f64; 6]; 6],
}

impl Default for NoiseConfig {
    /// Yaw noise from the prototype (`θ̈ ~ N(0, 0.1²)` with the measured yaw
    /// covariance); the translational channels are unit placeholders.
    fn default() -> Self {
        let mut q = [[0.0; 6]; 6];
        q[0][0] = 1.0;
        q[1][1] = 1.0;
        q[2][2] = 1.0;
        q[3][3] = 1.0;
        for i in 0..2 {
            for j in 0..2 {
                q[THETA + i][THETA + j] = YAW_MEASUREMENT_COVARIANCE[i][j];
            }
        }
        NoiseConfig {
            k1: 0.1,
            k2: 0.1,
            k3: 0.1,
            dt: 1.0 / 60.0,
            q,
        }
    }
}

impl NoiseConfig {
    /// Diagonal measurement covariance from per-channel std-devs.
    pub fn with_measurement_sigmas(mut self, sigmas: [f64; 6]) -> Self {
        self.q = [[0.0; 6]; 6];
        for (i, s) in sigmas.iter().enumerate() {
            self.q[i][i] = s * s;
        }
        self
    }

    pub fn measurement_covariance(&self) -> Matrix6<f64> {
        Matrix6::from_fn(|i, j| self.q[i][j])
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        if !(self.k1 > 0.0 && self.k2 > 0.0 && self.k3 > 0.0) {
            return Err(EstimationError::InvalidConfig("k1, k2, k3 must be positive"));
        }
        if !(self.dt > 0.0) {
            return Err(EstimationError::InvalidConfig("dt must be positive"));
        }
        let q = self.measurement_covariance();
        if (q - q.transpose()).amax() > 1e-9 {
            return Err(EstimationError::InvalidConfig("Q must be symmetric"));
        }
        if q.symmetric_eigenvalues().min() < -1e-9 {
            return Err(EstimationError::InvalidConfig("Q must be positive semi-definite"));
        }
        Ok(())
    }
}

/// Block-diagonal `(1 T; 0 1)` for each axis.
pub fn transition_matrix(dt: f64) -> Matrix6<f64> {
    let mut a = Matrix6::identity();
    for axis in 0..3 {
        a[(2 * axis, 2 * axis + 1)] = dt;
    }
    a
}

/// Block-diagonal `k²·C·Cᵀ` with `C = (½T², T)`, one block per axis.
pub fn process_noise(dt: f64, k1: f64, k2: f64, k3: f64) -> Matrix6<f64> {
    let c = Vector2::new(0.5 * dt * dt, dt);
    let mut r = Matrix6::zeros();
    for (axis, k) in [k1, k2, k3].into_iter().enumerate() {
        let d: Matrix2<f64> = (k * k) * c * c.transpose();
        r.fixed_view_mut::<2, 2>(2 * axis, 2 * axis).copy_from(&d);
    }
    r
}

pub fn kf_predict(s: &FilterState, a: &Matrix6<f64>, r: &Matrix6<f64>) -> FilterState {
    FilterState {
        mean: a * s.mean,
        covariance: a * s.covariance * a.transpose() + r,
    }
}

/// Measurement update with identity observation. The heading innovation is
/// wrapped and the posterior covariance symmetrized.
pub fn kf_update(s: &FilterState, z: &Vector6<f64>, q: &Matrix6<f64>) -> Result<FilterState, EstimationError> {
    let sigma = s.covariance;
    let innovation_cov = sigma + q;
    let inv = innovation_cov
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(EstimationError::SingularInnovation)?;
    let k = sigma * inv;
    let mut innovation = z - s.mean;
    innovation[THETA] = wrap_angle(innovation[THETA]);
    let mut mean = s.mean + k * innovation;
    mean[THETA] = wrap_angle(mean[THETA]);
    let cov = (Matrix6::identity() - k) * sigma;
    Ok(FilterState {
        mean,
        covariance: 0.5 * (cov + cov.transpose()),
    })
}

/// Unbiased sample covariance of equally sized samples.
pub fn estimate_measurement_covariance<S: AsRef<[f64]>>(samples: &[S]) -> Result<DMatrix<f64>, EstimationError> {
    let n = samples.len();
    if n < 2 {
        return Err(EstimationError::InsufficientData(n));
    }
    let dim = samples[0].as_ref().len();
    let mut data = DMatrix::zeros(n, dim);
    for (i, s) in samples.iter().enumerate() {
        let s = s.as_ref();
        if s.len() != dim {
            return Err(EstimationError::DimensionMismatch {
                index: i,
                expected: dim,
                got: s.len(),
            });
        }
        data.row_mut(i).copy_from_slice(s);
    }
    let mean = data.row_mean();
    for mut row in data.row_iter_mut() {
        row -= &mean;
    }
    let cov = data.transpose() * &data / (n - 1) as f64;
    Ok(0.5 * (&cov + cov.transpose()))
}

/// One tick of measurements; channels with `None` are soft-masked.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Measurement {
    pub channels: [Option<f64>; 6],
}

impl Measurement {
    pub fn full(z: Vector6<f64>) -> Self {
        Measurement {
            channels: std::array::from_fn(|i| Some(z[i])),
        }
    }

    /// Pose `(x, z, θ)` from localization and velocities `(ẋ, ż, θ̇)` from
    /// the wheels; either may be missing.
    pub fn from_parts(pose: Option<[f64; 3]>, velocity: Option<[f64; 3]>) -> Self {
        let mut channels = [None; 6];
        if let Some(p) = pose {
            channels[0] = Some(p[0]);
            channels[2] = Some(p[1]);
            channels[4] = Some(p[2]);
        }
        if let Some(v) = velocity {
            channels[1] = Some(v[0]);
            channels[3] = Some(v[1]);
            channels[5] = Some(v[2]);
        }
        Measurement { channels }
    }

    /// Measurement vector (predicted mean on missing channels) and the
    /// matching covariance with missing channels decoupled and inflated.
    pub fn resolve(&self, predicted: &Vector6<f64>, q: &Matrix6<f64>) -> (Vector6<f64>, Matrix6<f64>) {
        let mut z = *predicted;
        let mut q = *q;
        for (i, c) in self.channels.iter().enumerate() {
            match c {
                Some(v) => z[i] = *v,
                None => {
                    q.row_mut(i).fill(0.0);
                    q.column_mut(i).fill(0.0);
                    q[(i, i)] = MISSING_CHANNEL_VARIANCE;
                }
            }
        }
        (z, q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub mean: Vector6<f64>,
    pub variances: Vector6<f64>,
    pub z: Vector6<f64>,
}

/// Sequential filter with fixed `A`, `R` and `Q`.
#[derive(Debug, Clone)]
pub struct KalmanFilter {
    state: FilterState,
    a: Matrix6<f64>,
    r: Matrix6<f64>,
    q: Matrix6<f64>,
    t: f64,
    dt: f64,
    trace: Option<Vec<TraceRow>>,
}

impl KalmanFilter {
    pub fn new(initial: FilterState, cfg: &NoiseConfig) -> Result<Self, EstimationError> {
        cfg.validate()?;
        Ok(KalmanFilter {
            state: initial,
            a: transition_matrix(cfg.dt),
            r: process_noise(cfg.dt, cfg.k1, cfg.k2, cfg.k3),
            q: cfg.measurement_covariance(),
            t: 0.0,
            dt: cfg.dt,
            trace: None,
        })
    }

    /// Starts recording one [`TraceRow`] per [`KalmanFilter::step`].
    pub fn with_trace(mut self) -> Self {
        self.trace = Some(Vec::new());
        self
    }

    pub fn state(&self) -> &FilterState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn trace(&self) -> &[TraceRow] {
        self.trace.as_deref().unwrap_or(&[])
    }

    pub fn predict(&mut self) {
        self.state = kf_predict(&self.state, &self.a, &self.r);
        self.t += self.dt;
    }

    pub fn update(&mut self, m: &Measurement) -> Result<&FilterState, EstimationError> {
        let (z, q) = m.resolve(&self.state.mean, &self.q);
        self.state = kf_update(&self.state, &z, &q)?;
        if let Some(trace) = &mut self.trace {
            trace.push(TraceRow {
                t: self.t,
                mean: self.state.mean,
                variances: self.state.covariance.diagonal(),
                z,
            });
        }
        Ok(&self.state)
    }

    /// Predict then update.
    pub fn step(&mut self, m: &Measurement) -> Result<&FilterState, EstimationError> {
        self.predict();
        self.update(m)
    }
}

pub fn write_trace_csv(rows: &[TraceRow], mut w: impl Write) -> io::Result<()> {
    let names = |p: &str| (0..6).map(|i| format!("{p}{i}")).collect::<Vec<_>>().join(",");
    writeln!(w, "t,{},{},{}", names("mu"), names("sigma"), names("z"))?;
    for r in rows {
        let join = |v: &Vector6<f64>| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        writeln!(w, "{},{},{},{}", r.t, join(&r.mean), join(&r.variances), join(&r.z))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn state(mean: Vector6<f64>, cov: Matrix6<f64>) -> FilterState {
        FilterState::new(mean, cov)
    }

    #[test]
    fn transition_blocks() {
        let a = transition_matrix(1.0);
        for axis in 0..3 {
            let b = a.fixed_view::<2, 2>(2 * axis, 2 * axis);
            assert_eq!(b, Matrix2::new(1.0, 1.0, 0.0, 1.0));
        }
        let x = Vector6::new(3.0, 0.0, -2.0, 0.0, 1.0, 0.0);
        assert_eq!(a * x, x);
        let a = transition_matrix(1.0 / 60.0);
        let v = Vector6::new(0.0, 6.0, 0.0, -3.0, 0.0, 1.2);
        let next = a * v;
        assert!((next[0] - 0.1).abs() < 1e-15);
        assert!((next[2] + 0.05).abs() < 1e-15);
        assert!((next[4] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn process_noise_examples() {
        let r = process_noise(1.0, 1.0, 1.0, 1.0);
        assert_eq!(r.fixed_view::<2, 2>(0, 0), Matrix2::new(0.25, 0.5, 0.5, 1.0));
        assert_eq!(r[(0, 2)], 0.0);
        let r2 = process_noise(0.3, 2.0, 1.0, 1.0);
        let r1 = process_noise(0.3, 1.0, 1.0, 1.0);
        for i in 0..2 {
            for j in 0..2 {
                assert!((r2[(i, j)] - 4.0 * r1[(i, j)]).abs() < 1e-15);
            }
        }
        // Rank one per block.
        let d = r1.fixed_view::<2, 2>(2, 2);
        assert!(d.determinant().abs() < 1e-18);
    }

    #[test]
    fn predict_trivia() {
        let a = transition_matrix(0.1);
        let s = state(Vector6::new(1.0, 0.0, 2.0, 0.0, 0.5, 0.0), Matrix6::identity());
        assert_eq!(kf_predict(&s, &a, &Matrix6::zeros()).mean, s.mean);
        let r = process_noise(0.1, 1.0, 2.0, 3.0);
        let zero = state(Vector6::zeros(), Matrix6::zeros());
        assert_eq!(kf_predict(&zero, &a, &r).covariance, r);
    }

    #[test]
    fn scalar_kalman_arithmetic() {
        let s = state(Vector6::zeros(), Matrix6::identity());
        let z = Vector6::repeat(2.0);
        let out = kf_update(&s, &z, &Matrix6::identity()).unwrap();
        for i in 0..6 {
            assert!((out.mean[i] - 1.0).abs() < 1e-15);
            assert!((out.covariance[(i, i)] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_q_ignores_measurement_and_zero_q_trusts_it() {
        let s = state(Vector6::new(0.1, 0.2, 0.3, 0.4, 0.5, 0.6), Matrix6::identity() * 0.3);
        let z = Vector6::new(1.0, 1.0, 1.0, 1.0, 1.0, 1.0);
        let ignore = kf_update(&s, &z, &(Matrix6::identity() * 1e12)).unwrap();
        assert!((ignore.mean - s.mean).amax() < 1e-9);
        let trust = kf_update(&s, &z, &Matrix6::zeros()).unwrap();
        assert!((trust.mean - z).amax() < 1e-12);
    }

    #[test]
    fn heading_innovation_wraps() {
        let mut mean = Vector6::zeros();
        mean[THETA] = 3.1;
        let s = state(mean, Matrix6::identity());
        let mut z = Vector6::zeros();
        z[THETA] = -3.1;
        let out = kf_update(&s, &z, &Matrix6::identity()).unwrap();
        // Halfway the short way round is ±π, not 0.
        assert!((out.mean[THETA].abs() - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn singular_innovation_is_an_error() {
        let s = state(Vector6::zeros(), Matrix6::zeros());
        assert_eq!(
            kf_update(&s, &Vector6::zeros(), &Matrix6::zeros()),
            Err(EstimationError::SingularInnovation)
        );
    }

    #[test]
    fn covariance_examples() {
        let c = estimate_measurement_covariance(&[[0.0, 0.0], [2.0, 2.0]]).unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
        let c = estimate_measurement_covariance(&[[1.5, -2.0, 3.0]; 5]).unwrap();
        assert_eq!(c, DMatrix::zeros(3, 3));
        assert_eq!(
            estimate_measurement_covariance(&[[1.0, 2.0]]),
            Err(EstimationError::InsufficientData(1))
        );
        let ragged: Vec<Vec<f64>> = vec![vec![1.0, 2.0], vec![1.0]];
        assert!(matches!(
            estimate_measurement_covariance(&ragged),
            Err(EstimationError::DimensionMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn default_config_carries_yaw_block() {
        let q = NoiseConfig::default().measurement_covariance();
        assert_eq!(q[(4, 4)], 1023.684);
        assert_eq!(q[(4, 5)], 0.221);
        assert_eq!(q[(5, 4)], 0.221);
        assert_eq!(q[(5, 5)], 25.228);
        NoiseConfig::default().validate().unwrap();
    }

    #[test]
    fn missing_channels_are_decoupled() {
        let q = NoiseConfig::default().measurement_covariance();
        let m = Measurement::from_parts(Some([1.0, 2.0, 0.3]), None);
        let predicted = Vector6::new(0.0, 7.0, 0.0, 8.0, 0.0, 9.0);
        let (z, qm) = m.resolve(&predicted, &q);
        assert_eq!(z, Vector6::new(1.0, 7.0, 2.0, 8.0, 0.3, 9.0));
        assert_eq!(qm[(5, 5)], MISSING_CHANNEL_VARIANCE);
        assert_eq!(qm[(4, 5)], 0.0);
        assert_eq!(qm[(4, 4)], 1023.684);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let mut f = KalmanFilter::new(
            state(Vector6::zeros(), Matrix6::identity()),
            &NoiseConfig::default(),
        )
        .unwrap()
        .with_trace();
        for _ in 0..3 {
            f.step(&Measurement::full(Vector6::zeros())).unwrap();
        }
        let mut buf = Vec::new();
        write_trace_csv(f.trace(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("t,mu0,"));
        assert_eq!(header.split(',').count(), 19);
        assert_eq!(lines.count(), 3);
    }

    fn spd(seed: [f64; 36], scale: f64) -> Matrix6<f64> {
        let m = Matrix6::from_row_slice(&seed);
        m * m.transpose() * scale + Matrix6::identity() * 0.1
    }

    proptest! {
        #[test]
        fn update_never_increases_covariance(
            a in prop::array::uniform32(-1.0..1.0f64),
            b in prop::array::uniform32(-1.0..1.0f64),
            z in prop::array::uniform6(-2.0..2.0f64),
        ) {
            let mut sa = [0.0; 36];
            let mut sb = [0.0; 36];
            for i in 0..32 { sa[i] = a[i]; sb[i] = b[i]; }
            let s = state(Vector6::zeros(), spd(sa, 1.0));
            let q = spd(sb, 0.5);
            let out = kf_update(&s, &Vector6::from_row_slice(&z), &q).unwrap();
            prop_assert!(out.asymmetry() == 0.0);
            let diff = s.covariance - out.covariance;
            prop_assert!(diff.symmetric_eigenvalues().min() > -1e-9);
            prop_assert!(out.min_eigenvalue() > -1e-9);
        }
    }
}
