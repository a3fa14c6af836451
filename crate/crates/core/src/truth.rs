//! Ground-truth rigid-body kinematics and ideal IMU synthesis.
//!
//! Position and velocity come from closed-form trajectories. Attitude is
//! integrated with a piecewise exponential: on step `k` the body rate is held
//! at its midpoint value `ω(t_k + dt/2)`, which makes the truth attitude exact
//! for the rate the IMU reports and keeps it on SO(3) to machine precision.

use std::f64::consts::PI;

use nalgebra::{Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::lie::{so3_exp, Rotation, SE5};

/// Default gravity, NED convention (down is +z).
pub const GRAVITY_NED: [f64; 3] = [0.0, 0.0, 9.81];

/// `a·sin(f·t + φ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SineTerm {
    pub amplitude: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl SineTerm {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t + self.phase).sin()
    }
}

/// Body angular velocity, one sinusoid per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OmegaProfile {
    pub axes: [SineTerm; 3],
}

impl OmegaProfile {
    pub fn zero() -> Self {
        let z = SineTerm { amplitude: 0.0, frequency: 0.0, phase: 0.0 };
        OmegaProfile { axes: [z; 3] }
    }

    /// `ω = [sin(0.3t), 0.7 sin(0.2t + π), 0.5 sin(0.1t + π/3)]`.
    pub fn reference() -> Self {
        OmegaProfile {
            axes: [
                SineTerm { amplitude: 1.0, frequency: 0.3, phase: 0.0 },
                SineTerm { amplitude: 0.7, frequency: 0.2, phase: PI },
                SineTerm { amplitude: 0.5, frequency: 0.1, phase: PI / 3.0 },
            ],
        }
    }

    /// Constant rate (zero frequency, phase π/2).
    pub fn constant(omega: Vector3<f64>) -> Self {
        let term = |a: f64| SineTerm { amplitude: a, frequency: 0.0, phase: PI / 2.0 };
        OmegaProfile { axes: [term(omega.x), term(omega.y), term(omega.z)] }
    }

    pub fn eval(&self, t: f64) -> Vector3<f64> {
        Vector3::new(self.axes[0].eval(t), self.axes[1].eval(t), self.axes[2].eval(t))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrajectoryKind {
    /// `p = [a₁cos(ft), a₂sin(2ft), a₃sin(2ft)]`.
    Eight { amplitude: Vector3<f64>, frequency: f64 },
    ConstantVelocity { p0: Vector3<f64>, v0: Vector3<f64> },
    Hover { p0: Vector3<f64> },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrajectorySpec {
    pub kind: TrajectoryKind,
    pub omega: OmegaProfile,
    pub r0: Rotation,
    pub gravity: Vector3<f64>,
}

impl TrajectorySpec {
    /// Eight-shaped reference trajectory `p = [cos 5t, sin(10t)/4, −√3 sin(10t)/4]`,
    /// the reference body-rate profile and `R(0) = exp([π/2·e₂]×)`.
    pub fn reference_eight() -> Self {
        TrajectorySpec {
            kind: TrajectoryKind::Eight {
                amplitude: Vector3::new(1.0, 0.25, -(3.0_f64.sqrt()) / 4.0),
                frequency: 5.0,
            },
            omega: OmegaProfile::reference(),
            r0: so3_exp(&Vector3::new(0.0, PI / 2.0, 0.0)),
            gravity: Vector3::from(GRAVITY_NED),
        }
    }

    pub fn hover(p0: Vector3<f64>) -> Self {
        TrajectorySpec {
            kind: TrajectoryKind::Hover { p0 },
            omega: OmegaProfile::zero(),
            r0: Rotation::identity(),
            gravity: Vector3::from(GRAVITY_NED),
        }
    }

    /// Frequencies must be non-negative and everything finite.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (i, term) in self.omega.axes.iter().enumerate() {
            if !(term.frequency >= 0.0) {
                out.push(format!("omega axis {i}: frequency must be >= 0"));
            }
            if !(term.amplitude.is_finite() && term.phase.is_finite()) {
                out.push(format!("omega axis {i}: non-finite parameter"));
            }
        }
        match self.kind {
            TrajectoryKind::Eight { amplitude, frequency } => {
                if !(frequency >= 0.0) {
                    out.push("trajectory frequency must be >= 0".into());
                }
                if !amplitude.iter().all(|a| a.is_finite()) {
                    out.push("trajectory amplitude must be finite".into());
                }
            }
            TrajectoryKind::ConstantVelocity { p0, v0 } => {
                if !p0.iter().chain(v0.iter()).all(|a| a.is_finite()) {
                    out.push("trajectory p0/v0 must be finite".into());
                }
            }
            TrajectoryKind::Hover { p0 } => {
                if !p0.iter().all(|a| a.is_finite()) {
                    out.push("trajectory p0 must be finite".into());
                }
            }
        }
        if !self.gravity.iter().all(|g| g.is_finite()) {
            out.push("gravity must be finite".into());
        }
        out
    }
}

/// Position, velocity and acceleration in the inertial frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Kinematics {
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub vdot: Vector3<f64>,
}

/// Closed-form `p(t)` with its exact first and second derivatives.
pub fn eval_trajectory(spec: &TrajectorySpec, t: f64) -> Kinematics {
    match spec.kind {
        TrajectoryKind::Eight { amplitude: a, frequency: f } => {
            let (s1, c1) = (f * t).sin_cos();
            let (s2, c2) = (2.0 * f * t).sin_cos();
            Kinematics {
                p: Vector3::new(a.x * c1, a.y * s2, a.z * s2),
                v: Vector3::new(-a.x * f * s1, 2.0 * f * a.y * c2, 2.0 * f * a.z * c2),
                vdot: Vector3::new(
                    -a.x * f * f * c1,
                    -4.0 * f * f * a.y * s2,
                    -4.0 * f * f * a.z * s2,
                ),
            }
        }
        TrajectoryKind::ConstantVelocity { p0, v0 } => {
            Kinematics { p: p0 + v0 * t, v: v0, vdot: Vector3::zeros() }
        }
        TrajectoryKind::Hover { p0 } => {
            Kinematics { p: p0, v: Vector3::zeros(), vdot: Vector3::zeros() }
        }
    }
}

/// Ideal gyro and accelerometer readings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub omega: Vector3<f64>,
    /// Apparent (specific) acceleration in the body frame.
    pub accel: Vector3<f64>,
}

/// `aᴮ = Rᵀ(v̇ − g)`, so that `g + R·aᴮ` reproduces `v̇`.
pub fn synthesize_imu(
    rotation: &Rotation,
    vdot: &Vector3<f64>,
    omega: &Vector3<f64>,
    gravity: &Vector3<f64>,
) -> ImuSample {
    ImuSample { omega: *omega, accel: rotation.matrix().transpose() * (vdot - gravity) }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruthState {
    pub t: f64,
    pub p: Vector3<f64>,
    pub v: Vector3<f64>,
    pub vdot: Vector3<f64>,
    pub rotation: Rotation,
    pub omega: Vector3<f64>,
    pub accel: Vector3<f64>,
}

impl TruthState {
    pub fn imu(&self) -> ImuSample {
        ImuSample { omega: self.omega, accel: self.accel }
    }

    /// `X = T₅(R, [p v e₁ e₂ e₃])`.
    pub fn to_se5(&self) -> SE5 {
        let mut z = SMatrix::<f64, 3, 5>::zeros();
        z.column_mut(0).copy_from(&self.p);
        z.column_mut(1).copy_from(&self.v);
        z.fixed_view_mut::<3, 3>(0, 2).copy_from(&Matrix3::identity());
        SE5::new(self.rotation, z)
    }
}

/// Rate held over `[t0, t0 + h]`.
fn held_rate(profile: &OmegaProfile, t0: f64, h: f64) -> Vector3<f64> {
    profile.eval(t0 + 0.5 * h)
}

/// Integrates `Ṙ = R[ω]×` from `t0` to `t1` with fixed steps of `dt`
/// (the last step is shortened to land on `t1`).
pub fn propagate_attitude(
    r0: &Rotation,
    omega: &OmegaProfile,
    t0: f64,
    t1: f64,
    dt: f64,
) -> Rotation {
    assert!(dt > 0.0, "dt must be positive");
    let steps = ((t1 - t0) / dt - 1e-9).ceil().max(0.0) as usize;
    let mut r = *r0;
    for k in 0..steps {
        let ta = t0 + k as f64 * dt;
        let h = dt.min(t1 - ta);
        r = r * so3_exp(&(held_rate(omega, ta, h) * h));
    }
    r.renormalized()
}

/// Step-wise truth generator.
///
/// Step `k` covers `[k·dt, (k+1)·dt]`; [`TruthSim::state_in_step`] evaluates
/// the truth anywhere inside the current step.
#[derive(Clone, Debug)]
pub struct TruthSim {
    spec: TrajectorySpec,
    dt: f64,
    step: usize,
    rotation: Rotation,
}

impl TruthSim {
    pub fn new(spec: TrajectorySpec, dt: f64) -> Self {
        assert!(dt > 0.0, "dt must be positive");
        TruthSim { spec, dt, step: 0, rotation: spec.r0 }
    }

    pub fn spec(&self) -> &TrajectorySpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.dt
    }

    /// Body rate held during the current step.
    pub fn step_omega(&self) -> Vector3<f64> {
        held_rate(&self.spec.omega, self.time(), self.dt)
    }

    /// Truth at `t_k + tau`, `tau ∈ [0, dt]`.
    pub fn state_in_step(&self, tau: f64) -> TruthState {
        let t = self.time() + tau;
        let omega = self.step_omega();
        let rotation = if tau == 0.0 { self.rotation } else { self.rotation * so3_exp(&(omega * tau)) };
        let kin = eval_trajectory(&self.spec, t);
        let imu = synthesize_imu(&rotation, &kin.vdot, &omega, &self.spec.gravity);
        TruthState {
            t,
            p: kin.p,
            v: kin.v,
            vdot: kin.vdot,
            rotation,
            omega,
            accel: imu.accel,
        }
    }

    pub fn current(&self) -> TruthState {
        self.state_in_step(0.0)
    }

    pub fn advance(&mut self) {
        self.rotation = (self.rotation * so3_exp(&(self.step_omega() * self.dt))).renormalized();
        self.step += 1;
    }
}
