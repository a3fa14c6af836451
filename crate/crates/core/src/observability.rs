//! Transition matrices, the windowed observability Gramian
//! `W(t, t+δ) = (1/δ)∫ φ(τ,t)ᵀ C(τ)ᵀ C(τ) φ(τ,t) dτ`, and the
//! persistent-excitation check for GPS-aided navigation.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};

use crate::ltv::{LtvModel, Matrix15};
use crate::truth::{eval_trajectory, TrajectorySpec};

pub const DEFAULT_MU_THRESHOLD: f64 = 1e-6;

/// Number of whole steps of size `dt` in `t`, tolerant to rounding.
pub fn steps_for(t: f64, dt: f64) -> usize {
    (t / dt).round().max(0.0) as usize
}

fn rk4_transition_step<M: LtvModel>(model: &mut M, k: usize, phi: &Matrix15) -> Matrix15 {
    let h = model.dt();
    let (a0, _) = model.sample(k, 0.0);
    let (am, _) = model.sample(k, h / 2.0);
    let (a1, _) = model.sample(k, h);
    let k1 = a0 * phi;
    let k2 = am * (phi + k1 * (h / 2.0));
    let k3 = am * (phi + k2 * (h / 2.0));
    let k4 = a1 * (phi + k3 * h);
    phi + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// `φ(k1·dt, k0·dt)` by RK4 from `φ = I`.
pub fn transition_matrix<M: LtvModel>(model: &mut M, k0: usize, k1: usize) -> Matrix15 {
    assert!(k1 >= k0, "transition_matrix needs k1 >= k0");
    let mut phi = Matrix15::identity();
    for k in k0..k1 {
        phi = rk4_transition_step(model, k, &phi);
    }
    phi
}

#[derive(Clone, Debug, PartialEq)]
pub struct GramianReport {
    pub t: f64,
    pub delta: f64,
    pub w: Matrix15,
    pub mu: f64,
    pub pass: bool,
}

fn weighted(phi: &Matrix15, c: &nalgebra::DMatrix<f64>) -> Matrix15 {
    if c.nrows() == 0 {
        return Matrix15::zeros();
    }
    let cphi = c * nalgebra::DMatrix::from_column_slice(15, 15, phi.as_slice());
    Matrix15::from_column_slice((cphi.transpose() * cphi).as_slice())
}

/// Composite-trapezoid Gramian on the model's step grid starting at `t`.
pub fn gramian<M: LtvModel>(model: &mut M, t: f64, delta: f64, mu_threshold: f64) -> GramianReport {
    let dt = model.dt();
    let k0 = steps_for(t, dt);
    let n = steps_for(delta, dt).max(1);
    let mut phi = Matrix15::identity();
    let (_, c0) = model.sample(k0, 0.0);
    let mut w = weighted(&phi, &c0) * 0.5;
    for j in 0..n {
        phi = rk4_transition_step(model, k0 + j, &phi);
        let (_, c) = model.sample(k0 + j + 1, 0.0);
        let f = weighted(&phi, &c);
        w += if j + 1 == n { f * 0.5 } else { f };
    }
    w *= dt / (n as f64 * dt);
    let w = 0.5 * (w + w.transpose());
    let mu = SymmetricEigen::new(w).eigenvalues.min();
    GramianReport { t: k0 as f64 * dt, delta: n as f64 * dt, w, mu, pass: mu > mu_threshold }
}

/// Gramians at each grid start time, in order.
pub fn gramian_grid<M: LtvModel>(model: &mut M, grid: &[f64], delta: f64, mu_threshold: f64) -> Vec<GramianReport> {
    grid.iter().map(|&t| gramian(model, t, delta, mu_threshold)).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeReport {
    pub matrix: Matrix3<f64>,
    pub min_eig: f64,
    pub pass: bool,
}

/// `(1/δ)∫(v̇−g)(v̇−g)ᵀ + αᵐ ξξᵀ + (αᵛ/δ)∫vvᵀ` over `[t, t+δ]`, trapezoid
/// with `n` panels; passes iff the smallest eigenvalue is at least `mu`.
#[allow(clippy::too_many_arguments)]
pub fn gps_pe_condition(
    spec: &TrajectorySpec,
    xi: &Vector3<f64>,
    alpha_m: f64,
    alpha_v: f64,
    t: f64,
    delta: f64,
    panels: usize,
    mu: f64,
) -> PeReport {
    let n = panels.max(1);
    let h = delta / n as f64;
    let mut acc = Matrix3::zeros();
    let mut vel = Matrix3::zeros();
    for j in 0..=n {
        let k = eval_trajectory(spec, t + j as f64 * h);
        let weight = if j == 0 || j == n { 0.5 } else { 1.0 };
        let f = k.vdot - spec.gravity;
        acc += weight * f * f.transpose();
        vel += weight * k.v * k.v.transpose();
    }
    let matrix = (acc + alpha_v * vel) * (h / delta) + alpha_m * xi * xi.transpose();
    let min_eig = SymmetricEigen::new(matrix).eigenvalues.min();
    PeReport { matrix, min_eig, pass: min_eig >= mu }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltv::FnLtv;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Scaling and squaring with a Taylor series: `exp(A) = exp(A/2ˢ)^(2ˢ)`.
    fn expm(a: &Matrix15) -> Matrix15 {
        let norm = a.norm();
        let s = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
        let b = a / 2f64.powi(s);
        let mut term = Matrix15::identity();
        let mut sum = Matrix15::identity();
        for k in 1..30 {
            term = term * b / k as f64;
            sum += term;
        }
        for _ in 0..s {
            sum = sum * sum;
        }
        sum
    }

    #[test]
    fn zero_dynamics_give_identity() {
        let mut m = FnLtv { dt: 1e-2, a: |_| Matrix15::zeros(), c: |_| DMatrix::zeros(0, 15) };
        assert_eq!(transition_matrix(&mut m, 0, 50), Matrix15::identity());
    }

    #[test]
    fn constant_dynamics_match_matrix_exponential() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let a = Matrix15::from_fn(|_, _| rng.gen_range(-0.5..0.5));
        let mut m = FnLtv { dt: 1e-3, a: |_| a, c: |_| DMatrix::zeros(0, 15) };
        let phi = transition_matrix(&mut m, 100, 1100);
        assert!((phi - expm(&a)).amax() < 1e-8);
    }

    #[test]
    fn semigroup_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let a0 = Matrix15::from_fn(|_, _| rng.gen_range(-0.5..0.5));
        let a1 = Matrix15::from_fn(|_, _| rng.gen_range(-0.5..0.5));
        let a = move |t: f64| a0 + a1 * (3.0 * t).sin();
        let mut m = FnLtv { dt: 1e-3, a, c: |_| DMatrix::zeros(0, 15) };
        let split = rng.gen_range(1..999);
        let whole = transition_matrix(&mut m, 0, 1000);
        let first = transition_matrix(&mut m, 0, split);
        let second = transition_matrix(&mut m, split, 1000);
        assert!((whole - second * first).amax() < 1e-8);
    }

    #[test]
    fn zero_output_gives_zero_gramian() {
        let mut m = FnLtv { dt: 1e-2, a: |_| Matrix15::identity(), c: |_| DMatrix::zeros(3, 15) };
        let rep = gramian(&mut m, 0.0, 1.0, DEFAULT_MU_THRESHOLD);
        assert_eq!(rep.w, Matrix15::zeros());
        assert_eq!(rep.mu, 0.0);
        assert!(!rep.pass);
    }

    #[test]
    fn full_output_static_gramian_is_identity() {
        let mut m = FnLtv { dt: 1e-2, a: |_| Matrix15::zeros(), c: |_| DMatrix::identity(15, 15) };
        let rep = gramian(&mut m, 2.0, 1.0, DEFAULT_MU_THRESHOLD);
        assert!((rep.w - Matrix15::identity()).amax() < 1e-12);
        assert!(rep.pass);
        assert!((rep.t - 2.0).abs() < 1e-12 && (rep.delta - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hover_pe_is_rank_deficient() {
        let spec = TrajectorySpec::hover(Vector3::zeros());
        let rep = gps_pe_condition(&spec, &Vector3::x(), 0.0, 0.0, 0.0, 1.0, 100, DEFAULT_MU_THRESHOLD);
        let g = spec.gravity;
        assert!((rep.matrix - g * g.transpose()).amax() < 1e-12);
        assert!(!rep.pass);
    }

    #[test]
    fn pe_passes_with_magnetometer_and_off_plane_velocity() {
        let mut spec = TrajectorySpec::hover(Vector3::zeros());
        spec.kind = crate::truth::TrajectoryKind::ConstantVelocity { p0: Vector3::zeros(), v0: Vector3::y() };
        let xi = Vector3::new(std::f64::consts::FRAC_1_SQRT_2, 0.0, std::f64::consts::FRAC_1_SQRT_2);
        let rep = gps_pe_condition(&spec, &xi, 1.0, 1.0, 0.0, 1.0, 100, DEFAULT_MU_THRESHOLD);
        let g = spec.gravity;
        let oracle = g * g.transpose() + xi * xi.transpose() + Vector3::y() * Vector3::y().transpose();
        assert!((rep.matrix - oracle).amax() < 1e-12);
        assert!(rep.pass);
    }
}
