//! Nonlinear observer on SE₅(3).
//!
//! The estimate `X̂ = T₅(R̂, [p̂ v̂ ê₁ ê₂ ê₃])` follows
//!
//! ```text
//! dX̂/dt = X̂U + [X̂, D] + ΔX̂
//! ```
//!
//! where `Δ` carries `[Δ_R]×` in its rotation block and
//! `vec⁻¹(Kᴵ Δ_z, 3, 5)` in its translation block. The gain comes from a
//! Riccati equation on the body-frame translational error
//! `x̃ᴮ = vec(Rᵀ(z − R̃ẑ))`, whose closed loop is the LTV system
//! `dx̃ᴮ/dt = (A(t) − Kᴮ(t)C(t)) x̃ᴮ` with `Kᴮ = P Cᵀ Q`.
//!
//! Observer and Riccati state are advanced together by one RK4 step per `dt`.
//! The rotation block is polar-projected back onto SO(3) after every step.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SymmetricEigen, Vector3};

use crate::error::{Error, Result};
use crate::frontend::{OutputMatrix, UnifiedOutput};
use crate::lie::{hat_matrix, kron, psi, Rotation, SE5};
use crate::ltv::{abar, system_a, LtvModel, Matrix15, Matrix5, Vector15};
use crate::truth::{ImuSample, TruthState};

pub type Matrix3x5 = SMatrix<f64, 3, 5>;
pub type Matrix3x15 = SMatrix<f64, 3, 15>;
pub type Matrix8 = SMatrix<f64, 8, 8>;

/// Output weight `Q`, either `q·I₃ₘ` or an explicit `3m×3m` matrix.
#[derive(Clone, Debug, PartialEq)]
pub enum OutputWeight {
    Scalar(f64),
    Full(DMatrix<f64>),
}

impl OutputWeight {
    pub fn matrix(&self, m: usize) -> DMatrix<f64> {
        match self {
            OutputWeight::Scalar(q) => DMatrix::identity(3 * m, 3 * m) * *q,
            OutputWeight::Full(q) => q.clone(),
        }
    }

    fn check(&self, m: usize) -> Result<()> {
        match self {
            OutputWeight::Full(q) if q.shape() != (3 * m, 3 * m) => Err(Error::Shape(format!(
                "Q is {}x{} but {m} channels need {}x{}",
                q.nrows(),
                q.ncols(),
                3 * m,
                3 * m
            ))),
            _ => Ok(()),
        }
    }

    /// `CᵀQC`.
    pub fn information(&self, outputs: &[UnifiedOutput]) -> Result<Matrix15> {
        self.check(outputs.len())?;
        Ok(match self {
            OutputWeight::Scalar(q) => {
                let mut s = Matrix5::zeros();
                for u in outputs {
                    s += u.r * u.r.transpose();
                }
                let mut m = Matrix15::zeros();
                for j in 0..5 {
                    for k in 0..5 {
                        let val = q * s[(j, k)];
                        for d in 0..3 {
                            m[(3 * j + d, 3 * k + d)] = val;
                        }
                    }
                }
                m
            }
            OutputWeight::Full(q) => {
                let c = OutputMatrix::from_outputs(outputs).c;
                let ctqc = c.transpose() * q * &c;
                Matrix15::from_column_slice(ctqc.as_slice())
            }
        })
    }

    /// `CᵀQw` for a stacked `3m` vector `w` given block-wise.
    fn project_back(&self, outputs: &[UnifiedOutput], w: &[Vector3<f64>]) -> Vector15 {
        match self {
            OutputWeight::Scalar(q) => {
                let mut out = Vector15::zeros();
                for (u, wi) in outputs.iter().zip(w) {
                    for j in 0..5 {
                        let rj = u.r[j];
                        if rj != 0.0 {
                            let mut blk = out.fixed_rows_mut::<3>(3 * j);
                            blk += wi * (q * rj);
                        }
                    }
                }
                out
            }
            OutputWeight::Full(q) => {
                let c = OutputMatrix::from_outputs(outputs).c;
                let mut stacked = DVector::zeros(3 * w.len());
                for (i, wi) in w.iter().enumerate() {
                    stacked.fixed_rows_mut::<3>(3 * i).copy_from(wi);
                }
                let v = c.transpose() * (q * stacked);
                Vector15::from_column_slice(v.as_slice())
            }
        }
    }

    fn problems(&self) -> Vec<String> {
        match self {
            OutputWeight::Scalar(q) if !(*q > 0.0 && q.is_finite()) => {
                vec!["Q scale must be finite and > 0".into()]
            }
            OutputWeight::Full(q) if !is_positive_definite_dyn(q) => {
                vec!["Q must be symmetric positive definite".into()]
            }
            _ => Vec::new(),
        }
    }
}

fn is_positive_definite_dyn(m: &DMatrix<f64>) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= 1e-9 && m.clone().cholesky().is_some()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObserverConfig {
    /// Attitude innovation gains; positive and pairwise distinct.
    pub rho: [f64; 3],
    pub q: OutputWeight,
    pub v: Matrix15,
    pub dt: f64,
    pub gravity: Vector3<f64>,
}

impl ObserverConfig {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let [a, b, c] = self.rho;
        if !self.rho.iter().all(|r| *r > 0.0 && r.is_finite()) {
            out.push("rho1..rho3 must be finite and > 0".into());
        }
        if a == b || b == c || a == c {
            out.push("rho1..rho3 must be pairwise distinct".into());
        }
        out.extend(self.q.problems());
        if !is_positive_definite(&self.v) {
            out.push("V must be symmetric positive definite".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push("dt must be finite and > 0".into());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

pub fn is_positive_definite(m: &Matrix15) -> bool {
    (m - m.transpose()).amax() <= 1e-9 && m.cholesky().is_some()
}

pub fn min_eigenvalue(m: &Matrix15) -> f64 {
    SymmetricEigen::new(0.5 * (m + m.transpose())).eigenvalues.min()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ObserverState {
    pub xhat: SE5,
    pub p: Matrix15,
    pub t: f64,
}

impl ObserverState {
    /// Estimate with auxiliary columns set to the canonical basis.
    pub fn new(rotation: Rotation, position: Vector3<f64>, velocity: Vector3<f64>, p: Matrix15) -> Self {
        let mut z = Matrix3x5::zeros();
        z.column_mut(0).copy_from(&position);
        z.column_mut(1).copy_from(&velocity);
        z.fixed_view_mut::<3, 3>(0, 2).copy_from(&Matrix3::identity());
        ObserverState { xhat: SE5::new(rotation, z), p, t: 0.0 }
    }

    pub fn position(&self) -> Vector3<f64> {
        self.xhat.translation().column(0).into_owned()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.xhat.translation().column(1).into_owned()
    }

    pub fn aux(&self, i: usize) -> Vector3<f64> {
        self.xhat.translation().column(2 + i).into_owned()
    }
}

/// `D = diag(0₃, Āᵀ)`.
pub fn d_matrix(gravity: &Vector3<f64>) -> Matrix8 {
    let mut d = Matrix8::zeros();
    d.fixed_view_mut::<5, 5>(3, 3).copy_from(&abar(gravity).transpose());
    d
}

/// `U = [[ω]×, [0 aᴮ 0₃ₓ₃]; 0, 0]`.
pub fn u_matrix(imu: &ImuSample) -> Matrix8 {
    let mut u = Matrix8::zeros();
    u.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat_matrix(&imu.omega));
    u.fixed_view_mut::<3, 1>(0, 4).copy_from(&imu.accel);
    u
}

/// The matrices entering the observer and Riccati equations at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemMatrices {
    pub abar: Matrix5,
    pub a: Matrix15,
    pub d: Matrix8,
    pub u: Matrix8,
}

impl SystemMatrices {
    pub fn new(imu: &ImuSample, gravity: &Vector3<f64>) -> Self {
        SystemMatrices {
            abar: abar(gravity),
            a: system_a(&imu.omega, gravity),
            d: d_matrix(gravity),
            u: u_matrix(imu),
        }
    }
}

/// `Δ_R = ½ Σ ρᵢ (êᵢ × eᵢ)`.
pub fn delta_r(xhat: &SE5, rho: &[f64; 3]) -> Vector3<f64> {
    delta_r_raw(xhat.translation(), rho)
}

fn delta_r_raw(z: &Matrix3x5, rho: &[f64; 3]) -> Vector3<f64> {
    // ê × e₁ = (0, ê_z, −ê_y), ê × e₂ = (−ê_z, 0, ê_x), ê × e₃ = (ê_y, −ê_x, 0)
    let (e1, e2, e3) = (z.column(2), z.column(3), z.column(4));
    0.5 * (rho[0] * Vector3::new(0.0, e1.z, -e1.y)
        + rho[1] * Vector3::new(-e2.z, 0.0, e2.x)
        + rho[2] * Vector3::new(e3.y, -e3.x, 0.0))
}

/// `Γ(R̂) = ½[0₃ₓ₆, ρ₁[e₁]×R̂, ρ₂[e₂]×R̂, ρ₃[e₃]×R̂]`, so that
/// `Δ_R = ψ(M R̃) + Γ(R̂) x̃ᴮ` with `M = diag(ρ)`.
pub fn gamma_matrix(rhat: &Rotation, rho: &[f64; 3]) -> Matrix3x15 {
    let mut g = Matrix3x15::zeros();
    for i in 0..3 {
        let block = 0.5 * rho[i] * hat_matrix(&Vector3::ith(i, 1.0)) * rhat.matrix();
        g.fixed_view_mut::<3, 3>(0, 6 + 3 * i).copy_from(&block);
    }
    g
}

/// `(ψ(M R̃), Γ(R̂) x̃ᴮ)` for a truth/estimate pair.
pub fn delta_r_decomposition(truth: &SE5, xhat: &SE5, rho: &[f64; 3]) -> (Vector3<f64>, Vector3<f64>) {
    let report = error_report_se5(truth, xhat);
    let m = Matrix3::from_diagonal(&Vector3::from(*rho));
    (psi(&(m * report.r_tilde.matrix())), gamma_matrix(xhat.rotation(), rho) * report.x_body)
}

/// `Ṗ = AP + PAᵀ − P(CᵀQC)P + V`.
#[inline]
pub fn riccati_rhs(p: &Matrix15, a: &Matrix15, info: &Matrix15, v: &Matrix15) -> Matrix15 {
    let ap = a * p;
    let pm = p * info;
    ap + ap.transpose() - pm * p + v
}

fn check_covariance(p: &Matrix15, t: f64) -> Result<()> {
    if !p.iter().all(|x| x.is_finite()) {
        return Err(Error::NonFinite { t });
    }
    if p.cholesky().is_none() {
        return Err(Error::RiccatiNotPositiveDefinite { t });
    }
    Ok(())
}

/// One RK4 step of the Riccati equation with `A` and `C` held over the step,
/// followed by symmetrization and a positive-definiteness check.
pub fn riccati_step(
    p: &Matrix15,
    a: &Matrix15,
    c: &DMatrix<f64>,
    q: &DMatrix<f64>,
    v: &Matrix15,
    dt: f64,
) -> Result<Matrix15> {
    if c.ncols() != 15 || q.shape() != (c.nrows(), c.nrows()) {
        return Err(Error::Shape(format!(
            "C is {}x{}, Q is {}x{}",
            c.nrows(),
            c.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    let info = Matrix15::from_column_slice((c.transpose() * q * c).as_slice());
    let k1 = riccati_rhs(p, a, &info, v);
    let k2 = riccati_rhs(&(p + k1 * (dt / 2.0)), a, &info, v);
    let k3 = riccati_rhs(&(p + k2 * (dt / 2.0)), a, &info, v);
    let k4 = riccati_rhs(&(p + k3 * dt), a, &info, v);
    let next = p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let next = 0.5 * (next + next.transpose());
    check_covariance(&next, f64::NAN)?;
    Ok(next)
}

/// `Kᴮ = P Cᵀ Q` and `Kᴵ = (I₅⊗R̂) Kᴮ (I_m⊗R̂ᵀ)`.
pub fn gain(p: &Matrix15, c: &DMatrix<f64>, q: &DMatrix<f64>, rhat: &Rotation) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = c.nrows() / 3;
    let p_dyn = DMatrix::from_column_slice(15, 15, p.as_slice());
    let kb = p_dyn * c.transpose() * q;
    let r = DMatrix::from_column_slice(3, 3, rhat.matrix().as_slice());
    let ki = kron(&DMatrix::identity(5, 5), &r) * &kb * kron(&DMatrix::identity(m, m), &r.transpose());
    (kb, ki)
}

/// Inputs valid at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct Stage {
    pub imu: ImuSample,
    pub outputs: Vec<UnifiedOutput>,
}

/// Inputs at the start, middle and end of a step. With zero-order hold all
/// three are the same sample.
#[derive(Clone, Copy, Debug)]
pub struct StepInputs<'a> {
    pub start: &'a Stage,
    pub mid: &'a Stage,
    pub end: &'a Stage,
}

impl<'a> StepInputs<'a> {
    pub fn held(stage: &'a Stage) -> Self {
        StepInputs { start: stage, mid: stage, end: stage }
    }
}

#[derive(Clone, Copy)]
struct Flow {
    r: Matrix3<f64>,
    z: Matrix3x5,
    p: Matrix15,
}

impl Flow {
    fn axpy(&self, h: f64, d: &Flow) -> Flow {
        Flow { r: self.r + d.r * h, z: self.z + d.z * h, p: self.p + d.p * h }
    }
}

/// Translation block of `Δ`: `vec⁻¹(Kᴵ Δ_z, 3, 5)` evaluated without forming
/// the gain, `Kᴵ Δ_z = (I₅⊗R̂) P Cᵀ Q (I_m⊗R̂ᵀ) Δ_z`.
fn correction(r: &Matrix3<f64>, z: &Matrix3x5, p: &Matrix15, outputs: &[UnifiedOutput], q: &OutputWeight) -> Matrix3x5 {
    if outputs.is_empty() {
        return Matrix3x5::zeros();
    }
    let rt = r.transpose();
    let w: Vec<Vector3<f64>> = outputs.iter().map(|u| rt * (-(r * u.y + z * u.r))).collect();
    let s = p * q.project_back(outputs, &w);
    let mut out = Matrix3x5::zeros();
    for j in 0..5 {
        out.column_mut(j).copy_from(&(r * s.fixed_rows::<3>(3 * j)));
    }
    out
}

fn flow(x: &Flow, stage: &Stage, cfg: &ObserverConfig, abar_t: &Matrix5) -> Result<Flow> {
    let info = if stage.outputs.is_empty() { Matrix15::zeros() } else { cfg.q.information(&stage.outputs)? };
    let dr = hat_matrix(&delta_r_raw(&x.z, &cfg.rho));
    let w = hat_matrix(&stage.imu.omega);
    let mut zdot = x.z * abar_t + dr * x.z + correction(&x.r, &x.z, &x.p, &stage.outputs, &cfg.q);
    let mut vel = zdot.column_mut(1);
    vel += x.r * stage.imu.accel;
    let a = system_a(&stage.imu.omega, &cfg.gravity);
    Ok(Flow { r: x.r * w + dr * x.r, z: zdot, p: riccati_rhs(&x.p, &a, &info, &cfg.v) })
}

/// Time derivative of `(X̂, P)` under the given inputs.
pub fn observer_derivative(state: &ObserverState, stage: &Stage, cfg: &ObserverConfig) -> Result<(Matrix8, Matrix15)> {
    let x = Flow { r: *state.xhat.rotation().matrix(), z: *state.xhat.translation(), p: state.p };
    let d = flow(&x, stage, cfg, &abar(&cfg.gravity).transpose())?;
    let mut xdot = Matrix8::zeros();
    xdot.fixed_view_mut::<3, 3>(0, 0).copy_from(&d.r);
    xdot.fixed_view_mut::<3, 5>(0, 3).copy_from(&d.z);
    Ok((xdot, d.p))
}

/// The 8×8 innovation `Δ`.
pub fn innovation_matrix(state: &ObserverState, outputs: &[UnifiedOutput], cfg: &ObserverConfig) -> Matrix8 {
    let r = *state.xhat.rotation().matrix();
    let z = *state.xhat.translation();
    let mut delta = Matrix8::zeros();
    delta.fixed_view_mut::<3, 3>(0, 0).copy_from(&hat_matrix(&delta_r_raw(&z, &cfg.rho)));
    delta.fixed_view_mut::<3, 5>(0, 3).copy_from(&correction(&r, &z, &state.p, outputs, &cfg.q));
    delta
}

/// Advances `(X̂, P)` by one step of `cfg.dt`.
pub fn observer_step(state: &ObserverState, inputs: StepInputs<'_>, cfg: &ObserverConfig) -> Result<ObserverState> {
    let h = cfg.dt;
    let abar_t = abar(&cfg.gravity).transpose();
    let x0 = Flow { r: *state.xhat.rotation().matrix(), z: *state.xhat.translation(), p: state.p };
    let k1 = flow(&x0, inputs.start, cfg, &abar_t)?;
    let k2 = flow(&x0.axpy(h / 2.0, &k1), inputs.mid, cfg, &abar_t)?;
    let k3 = flow(&x0.axpy(h / 2.0, &k2), inputs.mid, cfg, &abar_t)?;
    let k4 = flow(&x0.axpy(h, &k3), inputs.end, cfg, &abar_t)?;
    let sixth = h / 6.0;
    let r = x0.r + (k1.r + k2.r * 2.0 + k3.r * 2.0 + k4.r) * sixth;
    let z = x0.z + (k1.z + k2.z * 2.0 + k3.z * 2.0 + k4.z) * sixth;
    let p = x0.p + (k1.p + k2.p * 2.0 + k3.p * 2.0 + k4.p) * sixth;
    let t = state.t + h;
    if !(r.iter().all(|x| x.is_finite()) && z.iter().all(|x| x.is_finite())) {
        return Err(Error::NonFinite { t });
    }
    let p = 0.5 * (p + p.transpose());
    check_covariance(&p, t)?;
    Ok(ObserverState { xhat: SE5::new(Rotation::project(&r), z), p, t })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    /// `R̃ = R R̂ᵀ`.
    pub r_tilde: Rotation,
    pub attitude_angle: f64,
    /// `z̃ = z − R̃ẑ`.
    pub z_tilde: Matrix3x5,
    /// `x̃ᴮ = vec(Rᵀz̃)`.
    pub x_body: Vector15,
    /// Norms of the columns of `z̃` (p̃, ṽ, ẽ₁, ẽ₂, ẽ₃).
    pub column_norms: [f64; 5],
    /// `‖p − p̂‖`.
    pub position_error: f64,
    /// `‖v − v̂‖`.
    pub velocity_error: f64,
}

pub fn error_report(state: &ObserverState, truth: &TruthState) -> ErrorReport {
    error_report_se5(&truth.to_se5(), &state.xhat)
}

pub fn error_report_se5(truth: &SE5, xhat: &SE5) -> ErrorReport {
    let r = truth.rotation().matrix();
    let r_tilde = Rotation::from_matrix_unchecked(r * xhat.rotation().matrix().transpose());
    let z_tilde = truth.translation() - r_tilde.matrix() * xhat.translation();
    let x_body = Vector15::from_column_slice((r.transpose() * z_tilde).as_slice());
    let mut column_norms = [0.0; 5];
    for (j, n) in column_norms.iter_mut().enumerate() {
        *n = z_tilde.column(j).norm();
    }
    ErrorReport {
        r_tilde,
        attitude_angle: r_tilde.angle(),
        z_tilde,
        x_body,
        column_norms,
        position_error: (truth.translation().column(0) - xhat.translation().column(0)).norm(),
        velocity_error: (truth.translation().column(1) - xhat.translation().column(1)).norm(),
    }
}

/// Estimate whose attitude is `rhat` and whose body-frame translational
/// error against `truth` is `x_body`: `ẑ = R̃ᵀ(z − R·vec⁻¹(x̃ᴮ))`.
pub fn estimate_with_errors(truth: &SE5, rhat: Rotation, x_body: &Vector15) -> SE5 {
    let r = truth.rotation().matrix();
    let r_tilde = r * rhat.matrix().transpose();
    let zb = Matrix3x5::from_column_slice(x_body.as_slice());
    SE5::new(rhat, r_tilde.transpose() * (truth.translation() - r * zb))
}

/// Sample of the reference LTV closed loop.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceSample {
    pub t: f64,
    pub x: Vector15,
    pub p: Matrix15,
}

/// Integrates `ẋ = (A − PCᵀQC)x` together with the Riccati equation, using
/// the same RK4 grid as [`observer_step`]. Records every `record_every` steps
/// (and the initial sample).
pub fn kalman_reference_run<M: LtvModel>(
    model: &mut M,
    q: &OutputWeight,
    v: &Matrix15,
    p0: &Matrix15,
    x0: &Vector15,
    steps: usize,
    record_every: usize,
) -> Result<Vec<ReferenceSample>> {
    let h = model.dt();
    let record_every = record_every.max(1);
    let mut rhs = |step: usize, tau: f64, x: &Vector15, p: &Matrix15| -> Result<(Vector15, Matrix15)> {
        let (a, c) = model.sample(step, tau);
        let qm = q.matrix(c.nrows() / 3);
        let info = Matrix15::from_column_slice((c.transpose() * qm * &c).as_slice());
        Ok(((a - p * info) * x, riccati_rhs(p, &a, &info, v)))
    };
    let mut x = *x0;
    let mut p = *p0;
    let mut out = vec![ReferenceSample { t: 0.0, x, p }];
    for k in 0..steps {
        let (dx1, dp1) = rhs(k, 0.0, &x, &p)?;
        let (dx2, dp2) = rhs(k, h / 2.0, &(x + dx1 * (h / 2.0)), &(p + dp1 * (h / 2.0)))?;
        let (dx3, dp3) = rhs(k, h / 2.0, &(x + dx2 * (h / 2.0)), &(p + dp2 * (h / 2.0)))?;
        let (dx4, dp4) = rhs(k, h, &(x + dx3 * h), &(p + dp3 * h))?;
        x += (dx1 + dx2 * 2.0 + dx3 * 2.0 + dx4) * (h / 6.0);
        p += (dp1 + dp2 * 2.0 + dp3 * 2.0 + dp4) * (h / 6.0);
        p = 0.5 * (p + p.transpose());
        let t = (k + 1) as f64 * h;
        check_covariance(&p, t)?;
        if (k + 1) % record_every == 0 {
            out.push(ReferenceSample { t, x, p });
        }
    }
    Ok(out)
}
