//! Scenario orchestration: truth → sensors → unified outputs → observer,
//! with summaries, Monte-Carlo sweeps over initial conditions and
//! observability reports.

use std::path::Path;
use std::time::Instant;

use nalgebra::Vector3;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Sampling, ScenarioConfig};
use crate::error::{Error, Result};
use crate::frontend::unify;
use crate::lie::{so3_exp, Rotation};
use crate::ltv::TruthLtv;
use crate::observability::{gps_pe_condition, gramian, steps_for, GramianReport, PeReport};
use crate::observer::{error_report, min_eigenvalue, observer_step, ErrorReport, ObserverState, Stage, StepInputs};
use crate::sensors::{ideal_output, stream_rng, ChannelKind, NoiseSpec, SensorRng};
use crate::trace::TraceWriter;
use crate::truth::{eval_trajectory, ImuSample, TruthSim, TruthState};

/// Gaussian noise held constant over each sample period `1/rate`.
struct HeldNoise {
    rng: SensorRng,
    specs: Vec<NoiseSpec>,
    index: Option<u64>,
    values: Vec<Vector3<f64>>,
}

impl HeldNoise {
    fn new(rng: SensorRng, specs: Vec<NoiseSpec>) -> Self {
        let n = specs.len();
        HeldNoise { rng, specs, index: None, values: vec![Vector3::zeros(); n] }
    }

    fn silent(&self) -> bool {
        self.specs.iter().all(|s| s.power == 0.0)
    }

    fn sample_index(&self, t: f64) -> u64 {
        (t * self.specs[0].rate + 1e-9).floor().max(0.0) as u64
    }

    fn at(&mut self, t: f64) -> &[Vector3<f64>] {
        if !self.silent() {
            let k = self.sample_index(t);
            while self.index.is_none_or(|i| i < k) {
                for (v, s) in self.values.iter_mut().zip(&self.specs) {
                    *v = s.draw(&mut self.rng);
                }
                self.index = Some(self.index.map_or(0, |i| i + 1));
            }
        }
        &self.values
    }
}

/// Inputs of one instant plus the raw channel samples behind them.
#[derive(Clone)]
struct Sampled {
    t: f64,
    stage: Stage,
    raw: Vec<Vector3<f64>>,
}

/// Step-by-step simulation of one scenario.
pub struct Runner {
    cfg: ScenarioConfig,
    sim: TruthSim,
    state: ObserverState,
    imu_noise: HeldNoise,
    channel_noise: Vec<HeldNoise>,
    held_index: Vec<Option<u64>>,
    held: Option<Sampled>,
    last_inputs: Option<Sampled>,
}

impl Runner {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        Self::with_initial(cfg, cfg.initial_state())
    }

    pub fn with_initial(cfg: &ScenarioConfig, state: ObserverState) -> Result<Self> {
        let problems = cfg.problems();
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let imu_noise = HeldNoise::new(stream_rng(cfg.seed, 0), vec![cfg.imu.gyro, cfg.imu.accel]);
        let channel_noise = cfg
            .channels
            .iter()
            .enumerate()
            .map(|(i, ch)| HeldNoise::new(stream_rng(cfg.seed, i as u64 + 1), vec![ch.noise]))
            .collect();
        Ok(Runner {
            sim: TruthSim::new(cfg.trajectory, cfg.observer.dt),
            state,
            imu_noise,
            channel_noise,
            held_index: vec![None; cfg.channels.len() + 1],
            held: None,
            last_inputs: None,
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ObserverState {
        &self.state
    }

    pub fn truth(&self) -> TruthState {
        self.sim.current()
    }

    pub fn step_index(&self) -> usize {
        self.sim.step_index()
    }

    pub fn errors(&self) -> ErrorReport {
        error_report(&self.state, &self.sim.current())
    }

    fn sample_all(&mut self, truth: &TruthState) -> Sampled {
        let n = self.imu_noise.at(truth.t);
        let imu = ImuSample { omega: truth.omega + n[0], accel: truth.accel + n[1] };
        let mut outputs = Vec::with_capacity(self.cfg.channels.len());
        let mut raw = Vec::with_capacity(self.cfg.channels.len());
        for (ch, noise) in self.cfg.channels.iter().zip(&mut self.channel_noise) {
            let y = ideal_output(&ch.kind, truth) + noise.at(truth.t)[0];
            outputs.push(unify(&ch.kind, &y));
            raw.push(y);
        }
        Sampled { t: truth.t, stage: Stage { imu, outputs }, raw }
    }

    /// Zero-order hold: each source is re-sampled when its sample index
    /// changes, otherwise the previous value is kept.
    fn sample_held(&mut self, truth: &TruthState) -> Sampled {
        let fresh = self.sample_all(truth);
        let mut held = self.held.take().unwrap_or_else(|| fresh.clone());
        let imu_idx = Some((truth.t * self.cfg.imu.gyro.rate + 1e-9).floor() as u64);
        if self.held_index[0] != imu_idx {
            held.stage.imu = fresh.stage.imu;
            self.held_index[0] = imu_idx;
        }
        for (i, ch) in self.cfg.channels.iter().enumerate() {
            let idx = Some((truth.t * ch.noise.rate + 1e-9).floor() as u64);
            if self.held_index[i + 1] != idx {
                held.stage.outputs[i] = fresh.stage.outputs[i];
                held.raw[i] = fresh.raw[i];
                self.held_index[i + 1] = idx;
            }
        }
        self.held = Some(held.clone());
        held
    }

    /// Advances truth and estimate by one step.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.cfg.observer.dt;
        match self.cfg.sampling {
            Sampling::Stage => {
                // the held body rate changes at the step boundary, so the
                // start stage is sampled afresh rather than reusing the
                // previous end stage
                let s0 = self.sample_all(&self.sim.state_in_step(0.0));
                let s1 = self.sample_all(&self.sim.state_in_step(dt / 2.0));
                let s2 = self.sample_all(&self.sim.state_in_step(dt));
                self.state = observer_step(
                    &self.state,
                    StepInputs { start: &s0.stage, mid: &s1.stage, end: &s2.stage },
                    &self.cfg.observer,
                )?;
                self.last_inputs = Some(s0);
            }
            Sampling::Zoh => {
                let s = self.sample_held(&self.sim.current());
                self.state = observer_step(&self.state, StepInputs::held(&s.stage), &self.cfg.observer)?;
                self.last_inputs = Some(s);
            }
        }
        self.sim.advance();
        Ok(())
    }

    fn record_measurements(&self, w: &mut TraceWriter) -> Result<()> {
        if let Some(s) = &self.last_inputs {
            let t = s.t;
            w.record_measurement(t, 0, "gyro", &s.stage.imu.omega)?;
            w.record_measurement(t, 0, "accel", &s.stage.imu.accel)?;
            for (i, (ch, y)) in self.cfg.channels.iter().zip(&s.raw).enumerate() {
                w.record_measurement(t, i + 1, ch.kind.name(), y)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub seed: u64,
    pub steps: usize,
    pub dt: f64,
    pub duration: f64,
    /// RMS over the trailing settle window.
    pub rmse_position: f64,
    pub rmse_velocity: f64,
    pub rmse_attitude: f64,
    pub settle_window: f64,
    /// Time after which each error stays below its threshold; `None` if it
    /// ends above.
    pub settle_time_attitude: Option<f64>,
    pub settle_time_position: Option<f64>,
    pub settle_time_velocity: Option<f64>,
    pub final_attitude_error: f64,
    pub final_position_error: f64,
    pub final_velocity_error: f64,
    pub final_min_eig_p: f64,
    /// Smallest eigenvalue of `P` over all steps.
    pub min_eig_p: f64,
    pub max_orthonormality_error: f64,
    /// Largest `|P − Pᵀ|` entry over all steps.
    pub max_p_asymmetry: f64,
    pub max_error: f64,
    pub converged: bool,
    pub wall_clock_s: f64,
}

struct Metrics {
    settle_from: f64,
    sq: [f64; 3],
    count: usize,
    thresholds: [f64; 3],
    last_above: [Option<f64>; 3],
    max_ortho: f64,
    max_asymmetry: f64,
    max_error: f64,
    min_eig: f64,
}

impl Metrics {
    fn new(cfg: &ScenarioConfig) -> Self {
        let o = &cfg.output;
        Metrics {
            settle_from: cfg.duration - o.settle_window,
            sq: [0.0; 3],
            count: 0,
            thresholds: [o.attitude_threshold, o.position_threshold, o.velocity_threshold],
            last_above: [None; 3],
            max_ortho: 0.0,
            max_asymmetry: 0.0,
            max_error: 0.0,
            min_eig: f64::INFINITY,
        }
    }

    fn push(&mut self, t: f64, e: &ErrorReport, state: &ObserverState) {
        let values = [e.attitude_angle, e.position_error, e.velocity_error];
        for i in 0..3 {
            if values[i] >= self.thresholds[i] {
                self.last_above[i] = Some(t);
            }
        }
        if t >= self.settle_from - 1e-9 {
            for i in 0..3 {
                self.sq[i] += values[i] * values[i];
            }
            self.count += 1;
        }
        self.max_ortho = self.max_ortho.max(state.xhat.rotation().orthonormality_error());
        self.max_asymmetry = self.max_asymmetry.max((state.p - state.p.transpose()).amax());
        self.min_eig = self.min_eig.min(min_eigenvalue(&state.p));
        self.max_error = self.max_error.max(e.position_error).max(e.velocity_error);
    }
}

fn settle_time(last_above: Option<f64>, final_value: f64, threshold: f64, dt: f64) -> Option<f64> {
    if final_value >= threshold {
        None
    } else {
        Some(last_above.map_or(0.0, |t| t + dt))
    }
}

fn dump_last_good(dir: &Path, state: &ObserverState, reason: &str) -> Result<()> {
    #[derive(Serialize)]
    struct Dump<'a> {
        t: f64,
        reason: &'a str,
        rotation_rows: [[f64; 3]; 3],
        translation_columns: [[f64; 3]; 5],
        p_rows: Vec<Vec<f64>>,
    }
    let r = state.xhat.rotation().matrix();
    let z = state.xhat.translation();
    let dump = Dump {
        t: state.t,
        reason,
        rotation_rows: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
        translation_columns: [0, 1, 2, 3, 4].map(|j| [z[(0, j)], z[(1, j)], z[(2, j)]]),
        p_rows: (0..15).map(|i| state.p.row(i).iter().copied().collect()).collect(),
    };
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("last_good_state.json"), serde_json::to_string_pretty(&dump).expect("serializable"))?;
    Ok(())
}

/// Runs the scenario from `initial`, writing traces and summaries into
/// `out_dir` when given.
pub fn run_from(cfg: &ScenarioConfig, initial: ObserverState, out_dir: Option<&Path>) -> Result<RunSummary> {
    let started = Instant::now();
    let mut runner = Runner::with_initial(cfg, initial)?;
    if cfg.channels.is_empty() {
        log::warn!("{}: no output channels, observer runs open loop", cfg.name);
    }
    let mut writer = out_dir.map(TraceWriter::create).transpose()?;
    let mut metrics = Metrics::new(cfg);
    let steps = cfg.steps();
    let dt = cfg.observer.dt;
    let every = cfg.output.trace_every;

    let record = |runner: &Runner, writer: &mut Option<TraceWriter>, e: &ErrorReport| -> Result<()> {
        let truth = runner.truth();
        if let Some(w) = writer.as_mut() {
            w.record(&truth, runner.state(), e)?;
            runner.record_measurements(w)?;
        }
        Ok(())
    };

    let e0 = runner.errors();
    metrics.push(0.0, &e0, runner.state());
    record(&runner, &mut writer, &e0)?;
    let mut last_good = runner.state().clone();
    for k in 1..=steps {
        let outcome = runner.step().and_then(|_| {
            let e = runner.errors();
            let worst = e.position_error.max(e.velocity_error);
            if !worst.is_finite() || worst > cfg.output.divergence_bound {
                Err(Error::Divergence { t: runner.state.t, reason: format!("error norm {worst} exceeds bound") })
            } else {
                Ok(e)
            }
        });
        let e = match outcome {
            Ok(e) => e,
            Err(err) => {
                if let Some(w) = writer.as_mut() {
                    w.flush()?;
                }
                if let Some(dir) = out_dir {
                    dump_last_good(dir, &last_good, &err.to_string())?;
                }
                return Err(match err {
                    Error::Divergence { .. } => err,
                    other => Error::Divergence { t: last_good.t + dt, reason: other.to_string() },
                });
            }
        };
        let t = k as f64 * dt;
        metrics.push(t, &e, runner.state());
        if k % every == 0 || k == steps {
            record(&runner, &mut writer, &e)?;
        }
        last_good = runner.state().clone();
    }
    if let Some(w) = writer.as_mut() {
        w.flush()?;
    }

    let fin = runner.errors();
    let rms = |i: usize| if metrics.count == 0 { 0.0 } else { (metrics.sq[i] / metrics.count as f64).sqrt() };
    let o = &cfg.output;
    let settle_attitude = settle_time(metrics.last_above[0], fin.attitude_angle, o.attitude_threshold, dt);
    let settle_position = settle_time(metrics.last_above[1], fin.position_error, o.position_threshold, dt);
    let summary = RunSummary {
        name: cfg.name.clone(),
        seed: cfg.seed,
        steps,
        dt,
        duration: cfg.duration,
        rmse_position: rms(1),
        rmse_velocity: rms(2),
        rmse_attitude: rms(0),
        settle_window: o.settle_window,
        settle_time_attitude: settle_attitude,
        settle_time_position: settle_position,
        settle_time_velocity: settle_time(metrics.last_above[2], fin.velocity_error, o.velocity_threshold, dt),
        final_attitude_error: fin.attitude_angle,
        final_position_error: fin.position_error,
        final_velocity_error: fin.velocity_error,
        final_min_eig_p: min_eigenvalue(&runner.state.p),
        min_eig_p: metrics.min_eig,
        max_orthonormality_error: metrics.max_ortho,
        max_p_asymmetry: metrics.max_asymmetry,
        max_error: metrics.max_error,
        converged: settle_attitude.is_some() && settle_position.is_some(),
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out_dir {
        write_summary(dir, &summary)?;
    }
    Ok(summary)
}

pub fn run_scenario(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<RunSummary> {
    run_from(cfg, cfg.initial_state(), out_dir)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "not reached".to_string(), |t| format!("{t:.3} s"))
}

fn write_summary(dir: &Path, s: &RunSummary) -> Result<()> {
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(s).expect("serializable"))?;
    let text = format!(
        "scenario {}\nseed {}\nsteps {} (dt {} s, {} s)\n\
         settled RMS over last {} s: attitude {:.6e} rad, position {:.6e} m, velocity {:.6e} m/s\n\
         settle time: attitude {}, position {}, velocity {}\n\
         final errors: attitude {:.6e} rad, position {:.6e} m, velocity {:.6e} m/s\n\
         min eig P: final {:.6e}, minimum over run {:.6e}\n\
         max rotation orthonormality error {:.3e}, max P asymmetry {:.3e}\nconverged {}\nwall clock {:.2} s\n",
        s.name,
        s.seed,
        s.steps,
        s.dt,
        s.duration,
        s.settle_window,
        s.rmse_attitude,
        s.rmse_position,
        s.rmse_velocity,
        opt(s.settle_time_attitude),
        opt(s.settle_time_position),
        opt(s.settle_time_velocity),
        s.final_attitude_error,
        s.final_position_error,
        s.final_velocity_error,
        s.final_min_eig_p,
        s.min_eig_p,
        s.max_orthonormality_error,
        s.max_p_asymmetry,
        s.converged,
        s.wall_clock_s,
    );
    std::fs::write(dir.join("summary.txt"), text)?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepParams {
    pub runs: usize,
    pub seed: u64,
    /// Largest initial attitude error, rad; angles are uniform in `(0, max]`.
    pub max_angle: f64,
    /// Radius of the ball of initial position offsets, m.
    pub position_radius: f64,
    /// Radius of the ball of initial velocity offsets, m/s.
    pub velocity_radius: f64,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams {
            runs: 100,
            seed: 0,
            max_angle: 170f64.to_radians(),
            position_radius: 10.0,
            velocity_radius: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRecord {
    pub index: usize,
    pub angle: f64,
    pub axis: [f64; 3],
    pub position_offset: [f64; 3],
    pub velocity_offset: [f64; 3],
    pub converged: bool,
    /// Later of the attitude and position settle times.
    pub settle_time: Option<f64>,
    pub final_attitude_error: f64,
    pub final_position_error: f64,
    pub max_orthonormality_error: f64,
    pub max_p_asymmetry: f64,
    pub min_eig_p: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub records: Vec<SweepRecord>,
    pub converged_fraction: f64,
    pub worst_settle_time: Option<f64>,
    /// Start at angle π about e₃, on the unstable set; reported, never counted.
    pub boundary: SweepRecord,
}

fn unit_vector(rng: &mut impl Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::from_fn(|_, _| StandardNormal.sample(&mut *rng));
        let n: f64 = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

fn ball(rng: &mut impl Rng, radius: f64) -> Vector3<f64> {
    unit_vector(rng) * radius * rng.gen::<f64>().cbrt()
}

/// Estimate whose attitude error `R R̂ᵀ` is a rotation by `angle` about `axis`.
pub fn perturbed_initial(
    cfg: &ScenarioConfig,
    angle: f64,
    axis: &Vector3<f64>,
    dp: &Vector3<f64>,
    dv: &Vector3<f64>,
) -> ObserverState {
    let k = eval_trajectory(&cfg.trajectory, 0.0);
    let r_tilde = so3_exp(&(axis * angle));
    let rhat = Rotation::project(&(r_tilde.matrix().transpose() * cfg.trajectory.r0.matrix()));
    ObserverState::new(rhat, k.p + dp, k.v + dv, cfg.p0)
}

fn sweep_member(cfg: &ScenarioConfig, index: usize, angle: f64, axis: Vector3<f64>, dp: Vector3<f64>, dv: Vector3<f64>) -> SweepRecord {
    let init = perturbed_initial(cfg, angle, &axis, &dp, &dv);
    let base = SweepRecord {
        index,
        angle,
        axis: axis.into(),
        position_offset: dp.into(),
        velocity_offset: dv.into(),
        converged: false,
        settle_time: None,
        final_attitude_error: f64::NAN,
        final_position_error: f64::NAN,
        max_orthonormality_error: f64::NAN,
        max_p_asymmetry: f64::NAN,
        min_eig_p: f64::NAN,
        failure: None,
    };
    match run_from(cfg, init, None) {
        Ok(s) => SweepRecord {
            converged: s.converged,
            settle_time: match (s.settle_time_attitude, s.settle_time_position) {
                (Some(a), Some(p)) => Some(a.max(p)),
                _ => None,
            },
            final_attitude_error: s.final_attitude_error,
            final_position_error: s.final_position_error,
            max_orthonormality_error: s.max_orthonormality_error,
            max_p_asymmetry: s.max_p_asymmetry,
            min_eig_p: s.min_eig_p,
            ..base
        },
        Err(e) => SweepRecord { failure: Some(e.to_string()), ..base },
    }
}

/// Noiseless Monte-Carlo runs from random initial errors.
pub fn sweep_agas(cfg: &ScenarioConfig, params: &SweepParams) -> SweepReport {
    let cfg = cfg.noiseless();
    let mut rng = stream_rng(params.seed, u64::MAX);
    let draws: Vec<_> = (0..params.runs)
        .map(|i| {
            let axis = unit_vector(&mut rng);
            // uniform in (0, max]
            let angle = params.max_angle * (1.0 - rng.gen::<f64>());
            (i, angle, axis, ball(&mut rng, params.position_radius), ball(&mut rng, params.velocity_radius))
        })
        .collect();
    let records: Vec<SweepRecord> =
        draws.into_par_iter().map(|(i, angle, axis, dp, dv)| sweep_member(&cfg, i, angle, axis, dp, dv)).collect();
    let boundary = sweep_member(&cfg, params.runs, std::f64::consts::PI, Vector3::z(), Vector3::zeros(), Vector3::zeros());
    let converged = records.iter().filter(|r| r.converged).count();
    let worst_settle_time = if converged == records.len() {
        records.iter().filter_map(|r| r.settle_time).reduce(f64::max)
    } else {
        None
    };
    SweepReport {
        converged_fraction: if records.is_empty() { 1.0 } else { converged as f64 / records.len() as f64 },
        worst_settle_time,
        records,
        boundary,
    }
}

pub fn write_sweep(dir: &Path, report: &SweepReport) -> Result<()> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("sweep.csv"))?);
    writeln!(w, "# se5nav sweep schema v{}", crate::trace::SCHEMA_VERSION)?;
    writeln!(w, "index,angle_rad,axis_x,axis_y,axis_z,dpx,dpy,dpz,dvx,dvy,dvz,converged,settle_time,final_attitude_rad,final_position_m,failure")?;
    for r in report.records.iter().chain(std::iter::once(&report.boundary)) {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.index,
            r.angle,
            r.axis[0],
            r.axis[1],
            r.axis[2],
            r.position_offset[0],
            r.position_offset[1],
            r.position_offset[2],
            r.velocity_offset[0],
            r.velocity_offset[1],
            r.velocity_offset[2],
            r.converged,
            r.settle_time.map_or(String::new(), |t| t.to_string()),
            r.final_attitude_error,
            r.final_position_error,
            r.failure.as_deref().unwrap_or("").replace(',', ";"),
        )?;
    }
    w.flush()?;
    std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(report).expect("serializable"))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObservabilityReport {
    pub gramians: Vec<GramianReport>,
    /// Excitation check per grid point, present when an inertial position
    /// channel is configured.
    pub pe: Vec<PeReport>,
    pub pass: bool,
}

/// `(αᵐ, αᵛ, ξ)` for the excitation check, if an inertial position channel exists.
pub fn pe_flags(kinds: &[ChannelKind]) -> Option<(f64, f64, Vector3<f64>)> {
    if !kinds.iter().any(|k| matches!(k, ChannelKind::InertialPosition { .. })) {
        return None;
    }
    let xi = kinds.iter().find_map(|k| match k {
        ChannelKind::BodyLandmarkOrVector { xi, landmark: false } => Some(*xi),
        _ => None,
    });
    let alpha_v = if kinds.iter().any(|k| matches!(k, ChannelKind::InertialVelocity)) { 1.0 } else { 0.0 };
    Some((if xi.is_some() { 1.0 } else { 0.0 }, alpha_v, xi.unwrap_or_else(Vector3::zeros)))
}

pub fn check_observability(cfg: &ScenarioConfig, delta: f64, grid: &[f64], mu: f64) -> ObservabilityReport {
    let kinds: Vec<ChannelKind> = cfg.channels.iter().map(|c| c.kind).collect();
    let model = TruthLtv::new(cfg.trajectory, kinds.clone(), cfg.observer.dt);
    let gramians: Vec<GramianReport> = grid.par_iter().map(|&t| gramian(&mut model.clone(), t, delta, mu)).collect();
    let pe = match pe_flags(&kinds) {
        Some((am, av, xi)) => grid
            .iter()
            .map(|&t| gps_pe_condition(&cfg.trajectory, &xi, am, av, t, delta, steps_for(delta, cfg.observer.dt), mu))
            .collect(),
        None => Vec::new(),
    };
    let pass = gramians.iter().all(|g| g.pass);
    ObservabilityReport { gramians, pe, pass }
}

pub fn write_observability(dir: &Path, report: &ObservabilityReport) -> Result<()> {
    use std::io::Write;
    std::fs::create_dir_all(dir)?;
    let mut w = std::io::BufWriter::new(std::fs::File::create(dir.join("observability.csv"))?);
    writeln!(w, "# se5nav observability schema v{}", crate::trace::SCHEMA_VERSION)?;
    writeln!(w, "t,delta,mu,pass,pe_min_eig,pe_pass")?;
    for (i, g) in report.gramians.iter().enumerate() {
        let (pe_eig, pe_pass) = report.pe.get(i).map_or((String::new(), String::new()), |p| (p.min_eig.to_string(), p.pass.to_string()));
        writeln!(w, "{},{},{},{},{},{}", g.t, g.delta, g.mu, g.pass, pe_eig, pe_pass)?;
    }
    w.flush()?;
    Ok(())
}

