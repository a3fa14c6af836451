//! Generic outputs (landmarks/vectors, inertial positions, inertial and body
//! velocities) and IMU corruption with band-limited white noise.
//!
//! Noise is specified as a one-sided power spectral density ("noise power").
//! A sensor sampled at `rate` Hz then carries per-axis Gaussian noise with
//! standard deviation `√(power · rate)`.

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::truth::{ImuSample, TruthState};

pub type SensorRng = ChaCha8Rng;

/// One independent, portable random stream per `stream` id.
pub fn stream_rng(master_seed: u64, stream: u64) -> SensorRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseSpec {
    /// One-sided PSD, unit²·s.
    pub power: f64,
    /// Sample rate, Hz.
    pub rate: f64,
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { power: 0.0, rate: 1.0 };

    pub fn std_dev(&self) -> f64 {
        (self.power * self.rate).sqrt()
    }

    pub fn sample_period(&self) -> f64 {
        1.0 / self.rate
    }

    /// Zero-mean Gaussian draw, one per axis. Always consumes three normals so
    /// a stream stays aligned whatever the power.
    pub fn draw(&self, rng: &mut SensorRng) -> Vector3<f64> {
        let sigma = self.std_dev();
        Vector3::from_fn(|_, _| {
            let n: f64 = StandardNormal.sample(rng);
            sigma * n
        })
    }

    pub fn problems(&self, what: &str) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.power >= 0.0 && self.power.is_finite()) {
            out.push(format!("{what}: noise_power must be finite and >= 0"));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            out.push(format!("{what}: rate must be finite and > 0"));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ChannelKind {
    /// `Rᵀ(ξ − γp)`; `landmark` selects γ = 1 (landmark) over γ = 0 (direction).
    BodyLandmarkOrVector { xi: Vector3<f64>, landmark: bool },
    /// `p + R·b` with lever arm `b`.
    InertialPosition { lever_arm: Vector3<f64> },
    /// `v`.
    InertialVelocity,
    /// `Rᵀv`.
    BodyVelocity,
}

impl ChannelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ChannelKind::BodyLandmarkOrVector { landmark: true, .. } => "landmark",
            ChannelKind::BodyLandmarkOrVector { landmark: false, .. } => "vector",
            ChannelKind::InertialPosition { .. } => "inertial_position",
            ChannelKind::InertialVelocity => "inertial_velocity",
            ChannelKind::BodyVelocity => "body_velocity",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelSpec {
    pub kind: ChannelKind,
    pub noise: NoiseSpec,
}

impl ChannelSpec {
    pub fn noiseless(kind: ChannelKind) -> Self {
        ChannelSpec { kind, noise: NoiseSpec::NONE }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementSample {
    pub t: f64,
    pub channel: usize,
    pub y: Vector3<f64>,
}

/// Noiseless output of a channel.
pub fn ideal_output(kind: &ChannelKind, truth: &TruthState) -> Vector3<f64> {
    let r = truth.rotation.matrix();
    match *kind {
        ChannelKind::BodyLandmarkOrVector { xi, landmark } => {
            let gamma = if landmark { 1.0 } else { 0.0 };
            r.transpose() * (xi - gamma * truth.p)
        }
        ChannelKind::InertialPosition { lever_arm } => truth.p + r * lever_arm,
        ChannelKind::InertialVelocity => truth.v,
        ChannelKind::BodyVelocity => r.transpose() * truth.v,
    }
}

pub fn measure(
    channel: &ChannelSpec,
    index: usize,
    truth: &TruthState,
    rng: &mut SensorRng,
) -> MeasurementSample {
    MeasurementSample {
        t: truth.t,
        channel: index,
        y: ideal_output(&channel.kind, truth) + channel.noise.draw(rng),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuNoise {
    pub gyro: NoiseSpec,
    pub accel: NoiseSpec,
}

impl ImuNoise {
    pub const NONE: ImuNoise = ImuNoise { gyro: NoiseSpec::NONE, accel: NoiseSpec::NONE };
}

pub fn corrupt_imu(imu: &ImuSample, noise: &ImuNoise, rng: &mut SensorRng) -> ImuSample {
    let gyro = noise.gyro.draw(rng);
    let accel = noise.accel.draw(rng);
    ImuSample { omega: imu.omega + gyro, accel: imu.accel + accel }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::{so3_exp, Rotation};
    use crate::truth::{TrajectorySpec, TruthSim};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn truth_with(rotation: Rotation, p: Vector3<f64>, v: Vector3<f64>) -> TruthState {
        TruthState {
            t: 0.0,
            p,
            v,
            vdot: Vector3::zeros(),
            rotation,
            omega: Vector3::zeros(),
            accel: Vector3::zeros(),
        }
    }

    #[test]
    fn landmark_identity_attitude() {
        let truth = truth_with(Rotation::identity(), Vector3::new(1.0, 0.0, 0.0), Vector3::zeros());
        let ch = ChannelSpec::noiseless(ChannelKind::BodyLandmarkOrVector {
            xi: Vector3::new(2.0, 0.0, 0.0),
            landmark: true,
        });
        let s = measure(&ch, 0, &truth, &mut stream_rng(0, 0));
        assert_eq!(s.y, Vector3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn zero_lever_arm_gives_position() {
        let p = Vector3::new(3.0, -1.0, 2.0);
        let truth = truth_with(so3_exp(&Vector3::new(0.2, 0.5, -0.1)), p, Vector3::zeros());
        let ch = ChannelSpec::noiseless(ChannelKind::InertialPosition { lever_arm: Vector3::zeros() });
        assert_eq!(ideal_output(&ch.kind, &truth), p);
    }

    #[test]
    fn direction_rotated_into_body() {
        let r = so3_exp(&Vector3::new(0.0, FRAC_PI_2, 0.0));
        let truth = truth_with(r, Vector3::new(5.0, 5.0, 5.0), Vector3::zeros());
        let xi = Vector3::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2);
        let y = ideal_output(&ChannelKind::BodyLandmarkOrVector { xi, landmark: false }, &truth);
        assert_abs_diff_eq!(y, r.matrix().transpose() * xi, epsilon = 1e-15);
        assert_abs_diff_eq!(y, Vector3::new(-FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2), epsilon = 1e-15);
    }

    #[test]
    fn noiseless_outputs_satisfy_definitions_along_a_run() {
        let mut sim = TruthSim::new(TrajectorySpec::reference_eight(), 1e-3);
        let b = Vector3::new(0.3, -0.2, 0.1);
        let xi = Vector3::new(2.0, 0.0, 0.0);
        for _ in 0..300 {
            let s = sim.current();
            let r = s.rotation.matrix();
            let lm = ideal_output(&ChannelKind::BodyLandmarkOrVector { xi, landmark: true }, &s);
            assert!((r * lm + s.p - xi).norm() < 1e-12);
            let gps = ideal_output(&ChannelKind::InertialPosition { lever_arm: b }, &s);
            assert!((gps - s.p - r * b).norm() < 1e-12);
            assert_eq!(ideal_output(&ChannelKind::InertialVelocity, &s), s.v);
            let vb = ideal_output(&ChannelKind::BodyVelocity, &s);
            assert!((r * vb - s.v).norm() < 1e-12);
            sim.advance();
        }
    }

    #[test]
    fn zero_power_leaves_imu_untouched() {
        let imu = ImuSample { omega: Vector3::new(0.1, 0.2, 0.3), accel: Vector3::new(1.0, 2.0, 3.0) };
        let noise = ImuNoise { gyro: NoiseSpec { power: 0.0, rate: 1000.0 }, accel: NoiseSpec { power: 0.0, rate: 50.0 } };
        assert_eq!(corrupt_imu(&imu, &noise, &mut stream_rng(9, 0)), imu);
    }

    #[test]
    fn seeded_streams_are_reproducible_and_independent() {
        let noise = ImuNoise { gyro: NoiseSpec { power: 0.1, rate: 1000.0 }, accel: NoiseSpec { power: 0.1, rate: 1000.0 } };
        let imu = ImuSample { omega: Vector3::zeros(), accel: Vector3::zeros() };
        let run = |seed, stream| {
            let mut rng = stream_rng(seed, stream);
            (0..100).map(|_| corrupt_imu(&imu, &noise, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(42, 0), run(42, 0));
        assert_ne!(run(42, 0), run(42, 1));
        assert_ne!(run(42, 0), run(43, 0));
    }

    #[test]
    fn empirical_std_matches_psd_times_rate() {
        // power 0.1, 1 kHz → σ = 10
        let spec = NoiseSpec { power: 1e-1, rate: 1000.0 };
        let mut rng = stream_rng(7, 3);
        let n = 1_000_000 / 3 + 1;
        let (mut sum, mut sum_sq, mut count) = (0.0, 0.0, 0usize);
        for _ in 0..n {
            for x in spec.draw(&mut rng).iter() {
                sum += x;
                sum_sq += x * x;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let var = sum_sq / count as f64 - mean * mean;
        let std = var.sqrt();
        assert!((std - 10.0).abs() / 10.0 < 0.02, "std {std}");
        // variance estimator σ_var ≈ σ²·√(2/N); 3σ band
        let band = 3.0 * 100.0 * (2.0 / count as f64).sqrt();
        assert!((var - 100.0).abs() < band, "var {var} outside ±{band}");
    }
}
