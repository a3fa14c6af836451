//! Scenario configuration files (TOML).
//!
//! ```toml
//! [trajectory]
//! kind = "eight"                 # eight | constant_velocity | hover
//! amplitude = [1.0, 0.25, -0.4330127018922193]
//! frequency = 5.0
//! omega = "reference"            # reference | zero | [wx, wy, wz]
//! r0 = [0.0, 1.5707963267948966, 0.0]   # rotation vector, rad
//!
//! [imu]
//! gyro_noise_power = 0.1
//! accel_noise_power = 0.1
//! rate = 1000.0
//!
//! [channel.1]
//! kind = "landmark"              # landmark | vector | inertial_position
//! xi = [2.0, 0.0, 0.0]           #   | inertial_velocity | body_velocity
//! noise_power = 0.05
//! rate = 1000.0
//!
//! [observer]
//! rho1 = 10.0
//! rho2 = 6.0
//! rho3 = 4.0
//! q_scale = 100.0
//! v_scale = 10.0
//! p0_scale = 1.0
//! dt = 0.001
//! duration = 30.0
//! seed = 1
//! p_hat = [1.0, 1.0, 1.0]
//! v_hat = [1.0, 1.0, 1.0]
//! r_hat = [0.0, 0.0, 0.0]
//! ```
//!
//! Unknown keys are rejected; every problem found is reported at once.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lie::{so3_exp, Rotation};
use crate::ltv::Matrix15;
use crate::observer::{ObserverConfig, ObserverState, OutputWeight};
use crate::sensors::{ChannelKind, ChannelSpec, ImuNoise, NoiseSpec};
use crate::truth::{eval_trajectory, OmegaProfile, TrajectoryKind, TrajectorySpec, GRAVITY_NED};

/// How sensor inputs are presented to the RK4 stages of one step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// Signals evaluated at each stage time; noise held per sample period.
    Stage,
    /// Latest sample held over the whole step.
    Zoh,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum RawOmega {
    Named(String),
    Constant([f64; 3]),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTrajectory {
    kind: String,
    amplitude: Option<[f64; 3]>,
    frequency: Option<f64>,
    p0: Option<[f64; 3]>,
    v0: Option<[f64; 3]>,
    omega: Option<RawOmega>,
    r0: Option<[f64; 3]>,
    gravity: Option<[f64; 3]>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawImu {
    gyro_noise_power: Option<f64>,
    accel_noise_power: Option<f64>,
    rate: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    kind: String,
    xi: Option<[f64; 3]>,
    gamma: Option<f64>,
    b: Option<[f64; 3]>,
    noise_power: Option<f64>,
    rate: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObserver {
    rho1: f64,
    rho2: f64,
    rho3: f64,
    q_scale: f64,
    v_scale: f64,
    p0_scale: f64,
    dt: f64,
    duration: f64,
    seed: Option<u64>,
    p_hat: Option<[f64; 3]>,
    v_hat: Option<[f64; 3]>,
    r_hat: Option<[f64; 3]>,
    sampling: Option<Sampling>,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    trace_every: Option<usize>,
    settle_window: Option<f64>,
    attitude_threshold: Option<f64>,
    position_threshold: Option<f64>,
    velocity_threshold: Option<f64>,
    divergence_bound: Option<f64>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: Option<String>,
    trajectory: RawTrajectory,
    #[serde(default)]
    imu: RawImu,
    #[serde(default)]
    channel: BTreeMap<String, RawChannel>,
    observer: RawObserver,
    #[serde(default)]
    output: RawOutput,
}

/// Reporting parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputConfig {
    /// Write one trace row every this many steps.
    pub trace_every: usize,
    /// Length of the trailing window for RMS errors, s.
    pub settle_window: f64,
    pub attitude_threshold: f64,
    pub position_threshold: f64,
    pub velocity_threshold: f64,
    /// Any error norm above this aborts the run as diverged.
    pub divergence_bound: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            trace_every: 10,
            settle_window: 20.0,
            attitude_threshold: 1e-2,
            position_threshold: 1e-2,
            velocity_threshold: 1e-2,
            divergence_bound: 1e6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub trajectory: TrajectorySpec,
    pub imu: ImuNoise,
    pub channels: Vec<ChannelSpec>,
    pub observer: ObserverConfig,
    pub p0: Matrix15,
    pub initial_rotation: Rotation,
    pub initial_position: Vector3<f64>,
    pub initial_velocity: Vector3<f64>,
    pub duration: f64,
    pub seed: u64,
    pub sampling: Sampling,
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(vec![e.message().to_string()]))?;
        from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("cannot read {}: {e}", path.display())]))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if cfg.name.is_empty() {
            cfg.name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        }
        Ok(cfg)
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.observer.dt).round() as usize
    }

    pub fn initial_state(&self) -> ObserverState {
        ObserverState::new(self.initial_rotation, self.initial_position, self.initial_velocity, self.p0)
    }

    /// Same scenario with every noise power set to zero.
    pub fn noiseless(&self) -> Self {
        let mut out = self.clone();
        out.imu.gyro.power = 0.0;
        out.imu.accel.power = 0.0;
        for ch in &mut out.channels {
            ch.noise.power = 0.0;
        }
        out
    }

    /// Same scenario started on the truth.
    pub fn perfect_init(&self) -> Self {
        let mut out = self.clone();
        let k = eval_trajectory(&self.trajectory, 0.0);
        out.initial_rotation = self.trajectory.r0;
        out.initial_position = k.p;
        out.initial_velocity = k.v;
        out
    }

    pub fn is_noiseless(&self) -> bool {
        self.imu.gyro.power == 0.0 && self.imu.accel.power == 0.0 && self.channels.iter().all(|c| c.noise.power == 0.0)
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = self.trajectory.problems();
        out.extend(self.imu.gyro.problems("imu gyro"));
        out.extend(self.imu.accel.problems("imu accel"));
        for (i, ch) in self.channels.iter().enumerate() {
            out.extend(ch.noise.problems(&format!("channel {}", i + 1)));
        }
        out.extend(self.observer.problems());
        if !crate::observer::is_positive_definite(&self.p0) {
            out.push("p0_scale must be > 0".into());
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            out.push("duration must be finite and > 0".into());
        }
        if self.output.trace_every == 0 {
            out.push("trace_every must be >= 1".into());
        }
        if !(self.output.settle_window >= 0.0) {
            out.push("settle_window must be >= 0".into());
        }
        out
    }
}

fn vec3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

fn parse_channel(key: &str, raw: &RawChannel, problems: &mut Vec<String>) -> Option<ChannelSpec> {
    let here = format!("channel.{key}");
    let need_xi = |problems: &mut Vec<String>| match raw.xi {
        Some(xi) => Some(vec3(xi)),
        None => {
            problems.push(format!("{here}: missing xi"));
            None
        }
    };
    let forbid = |problems: &mut Vec<String>, name: &str, present: bool| {
        if present {
            problems.push(format!("{here}: key {name} does not apply to kind {}", raw.kind));
        }
    };
    let kind = match raw.kind.as_str() {
        "landmark" | "vector" | "body" => {
            forbid(problems, "b", raw.b.is_some());
            let default_gamma = match raw.kind.as_str() {
                "landmark" => Some(1.0),
                "vector" => Some(0.0),
                _ => None,
            };
            let gamma = match (raw.gamma, default_gamma) {
                (Some(g), Some(d)) if g != d => {
                    problems.push(format!("{here}: gamma = {g} contradicts kind {}", raw.kind));
                    None
                }
                (Some(g), _) | (None, Some(g)) => Some(g),
                (None, None) => {
                    problems.push(format!("{here}: kind body needs gamma"));
                    None
                }
            };
            if let Some(g) = gamma {
                if g != 0.0 && g != 1.0 {
                    problems.push(format!("{here}: gamma must be 0 or 1"));
                }
            }
            let xi = need_xi(problems);
            match (xi, gamma) {
                (Some(xi), Some(g)) => ChannelKind::BodyLandmarkOrVector { xi, landmark: g == 1.0 },
                _ => return None,
            }
        }
        "inertial_position" => {
            forbid(problems, "xi", raw.xi.is_some());
            forbid(problems, "gamma", raw.gamma.is_some());
            ChannelKind::InertialPosition { lever_arm: raw.b.map(vec3).unwrap_or_else(Vector3::zeros) }
        }
        "inertial_velocity" | "body_velocity" => {
            forbid(problems, "xi", raw.xi.is_some());
            forbid(problems, "gamma", raw.gamma.is_some());
            forbid(problems, "b", raw.b.is_some());
            if raw.kind == "inertial_velocity" {
                ChannelKind::InertialVelocity
            } else {
                ChannelKind::BodyVelocity
            }
        }
        other => {
            problems.push(format!("{here}: unknown kind {other:?}"));
            return None;
        }
    };
    if let ChannelKind::BodyLandmarkOrVector { xi, landmark: false } = kind {
        if xi.norm() == 0.0 {
            problems.push(format!("{here}: direction xi must be nonzero"));
        }
    }
    Some(ChannelSpec {
        kind,
        noise: NoiseSpec { power: raw.noise_power.unwrap_or(0.0), rate: raw.rate.unwrap_or(1000.0) },
    })
}

fn parse_trajectory(raw: &RawTrajectory, problems: &mut Vec<String>) -> TrajectorySpec {
    let reference = TrajectorySpec::reference_eight();
    let kind = match raw.kind.as_str() {
        "eight" => match reference.kind {
            TrajectoryKind::Eight { amplitude, frequency } => TrajectoryKind::Eight {
                amplitude: raw.amplitude.map(vec3).unwrap_or(amplitude),
                frequency: raw.frequency.unwrap_or(frequency),
            },
            _ => unreachable!(),
        },
        "constant_velocity" => TrajectoryKind::ConstantVelocity {
            p0: raw.p0.map(vec3).unwrap_or_else(Vector3::zeros),
            v0: raw.v0.map(vec3).unwrap_or_else(Vector3::zeros),
        },
        "hover" => TrajectoryKind::Hover { p0: raw.p0.map(vec3).unwrap_or_else(Vector3::zeros) },
        other => {
            problems.push(format!("trajectory: unknown kind {other:?}"));
            reference.kind
        }
    };
    let omega = match &raw.omega {
        None => OmegaProfile::reference(),
        Some(RawOmega::Named(n)) if n == "reference" => OmegaProfile::reference(),
        Some(RawOmega::Named(n)) if n == "zero" => OmegaProfile::zero(),
        Some(RawOmega::Named(n)) => {
            problems.push(format!("trajectory: unknown omega profile {n:?}"));
            OmegaProfile::zero()
        }
        Some(RawOmega::Constant(w)) => OmegaProfile::constant(vec3(*w)),
    };
    TrajectorySpec {
        kind,
        omega,
        r0: raw.r0.map(|r| so3_exp(&vec3(r))).unwrap_or(reference.r0),
        gravity: vec3(raw.gravity.unwrap_or(GRAVITY_NED)),
    }
}

fn from_raw(raw: RawConfig) -> Result<ScenarioConfig> {
    let mut problems = Vec::new();
    let trajectory = parse_trajectory(&raw.trajectory, &mut problems);
    let imu_rate = raw.imu.rate.unwrap_or(1000.0);
    let imu = ImuNoise {
        gyro: NoiseSpec { power: raw.imu.gyro_noise_power.unwrap_or(0.0), rate: imu_rate },
        accel: NoiseSpec { power: raw.imu.accel_noise_power.unwrap_or(0.0), rate: imu_rate },
    };

    let mut keyed: Vec<(u64, &String, &RawChannel)> = Vec::new();
    for (key, ch) in &raw.channel {
        match key.parse::<u64>() {
            Ok(n) => keyed.push((n, key, ch)),
            Err(_) => problems.push(format!("channel.{key}: section name must be an integer")),
        }
    }
    keyed.sort_by_key(|(n, _, _)| *n);
    let channels: Vec<ChannelSpec> =
        keyed.iter().filter_map(|(_, key, ch)| parse_channel(key, ch, &mut problems)).collect();

    let o = &raw.observer;
    let observer = ObserverConfig {
        rho: [o.rho1, o.rho2, o.rho3],
        q: OutputWeight::Scalar(o.q_scale),
        v: Matrix15::identity() * o.v_scale,
        dt: o.dt,
        gravity: trajectory.gravity,
    };
    let out = OutputConfig::default();
    let output = OutputConfig {
        trace_every: raw.output.trace_every.unwrap_or(out.trace_every),
        settle_window: raw.output.settle_window.unwrap_or(out.settle_window),
        attitude_threshold: raw.output.attitude_threshold.unwrap_or(out.attitude_threshold),
        position_threshold: raw.output.position_threshold.unwrap_or(out.position_threshold),
        velocity_threshold: raw.output.velocity_threshold.unwrap_or(out.velocity_threshold),
        divergence_bound: raw.output.divergence_bound.unwrap_or(out.divergence_bound),
    };
    let cfg = ScenarioConfig {
        name: raw.name.unwrap_or_default(),
        trajectory,
        imu,
        channels,
        observer,
        p0: Matrix15::identity() * o.p0_scale,
        initial_rotation: so3_exp(&vec3(o.r_hat.unwrap_or([0.0; 3]))),
        initial_position: vec3(o.p_hat.unwrap_or([1.0; 3])),
        initial_velocity: vec3(o.v_hat.unwrap_or([1.0; 3])),
        duration: o.duration,
        seed: o.seed.unwrap_or(0),
        sampling: o.sampling.unwrap_or(Sampling::Stage),
        output,
    };
    problems.extend(cfg.problems());
    if problems.is_empty() {
        Ok(cfg)
    } else {
        Err(Error::Config(problems))
    }
}
