//! Linear time-varying models `(A(t), C(t))` of the 15-dimensional body-frame
//! translational error, sampled on a fixed step grid.

use nalgebra::{DMatrix, SMatrix, SVector, Vector3};

use crate::frontend::{unify, OutputMatrix};
use crate::lie::hat_matrix;
use crate::sensors::{ideal_output, ChannelKind};
use crate::truth::{TrajectorySpec, TruthSim};

pub type Matrix5 = SMatrix<f64, 5, 5>;
pub type Matrix15 = SMatrix<f64, 15, 15>;
pub type Vector15 = SVector<f64, 15>;

/// A model sampled at `t = step·dt + tau`, `tau ∈ [0, dt]`.
///
/// Callers walk forward in time; implementations may assume `step` never
/// decreases between consecutive calls unless they handle rewinds themselves.
pub trait LtvModel {
    fn dt(&self) -> f64;
    fn sample(&mut self, step: usize, tau: f64) -> (Matrix15, DMatrix<f64>);
}

/// `Ā` with rows `[0 1 0 0 0]`, `[0 0 gᵀ]` and three zero rows.
pub fn abar(gravity: &Vector3<f64>) -> Matrix5 {
    let mut a = Matrix5::zeros();
    a[(0, 1)] = 1.0;
    a[(1, 2)] = gravity.x;
    a[(1, 3)] = gravity.y;
    a[(1, 4)] = gravity.z;
    a
}

/// `A = Ā ⊗ I₃ − I₅ ⊗ [ω]×`.
pub fn system_a(omega: &Vector3<f64>, gravity: &Vector3<f64>) -> Matrix15 {
    let ab = abar(gravity);
    let w = hat_matrix(omega);
    let mut a = Matrix15::zeros();
    for i in 0..5 {
        for j in 0..5 {
            if ab[(i, j)] != 0.0 {
                for d in 0..3 {
                    a[(3 * i + d, 3 * j + d)] = ab[(i, j)];
                }
            }
        }
        let mut blk = a.fixed_view_mut::<3, 3>(3 * i, 3 * i);
        blk -= w;
    }
    a
}

/// Continuous-time model given by closures of `t`.
pub struct FnLtv<FA, FC> {
    pub dt: f64,
    pub a: FA,
    pub c: FC,
}

impl<FA, FC> LtvModel for FnLtv<FA, FC>
where
    FA: FnMut(f64) -> Matrix15,
    FC: FnMut(f64) -> DMatrix<f64>,
{
    fn dt(&self) -> f64 {
        self.dt
    }

    fn sample(&mut self, step: usize, tau: f64) -> (Matrix15, DMatrix<f64>) {
        let t = step as f64 * self.dt + tau;
        ((self.a)(t), (self.c)(t))
    }
}

/// `(A, C)` seen by the observer along a noiseless truth run: `A` uses the
/// body rate held on each step, `C` stacks the reference vectors of the
/// channels evaluated on the truth.
#[derive(Clone)]
pub struct TruthLtv {
    spec: TrajectorySpec,
    kinds: Vec<ChannelKind>,
    sim: TruthSim,
}

impl TruthLtv {
    pub fn new(spec: TrajectorySpec, kinds: Vec<ChannelKind>, dt: f64) -> Self {
        TruthLtv { spec, kinds, sim: TruthSim::new(spec, dt) }
    }

    pub fn kinds(&self) -> &[ChannelKind] {
        &self.kinds
    }
}

impl LtvModel for TruthLtv {
    fn dt(&self) -> f64 {
        self.sim.dt()
    }

    fn sample(&mut self, step: usize, tau: f64) -> (Matrix15, DMatrix<f64>) {
        if step < self.sim.step_index() {
            self.sim = TruthSim::new(self.spec, self.sim.dt());
        }
        while self.sim.step_index() < step {
            self.sim.advance();
        }
        let truth = self.sim.state_in_step(tau);
        let a = system_a(&truth.omega, &self.spec.gravity);
        let refs: Vec<_> = self.kinds.iter().map(|k| unify(k, &ideal_output(k, &truth)).r).collect();
        (a, OutputMatrix::from_refs(refs.iter()).c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lie::kron;

    #[test]
    fn system_a_matches_kron_form() {
        let w = Vector3::new(0.3, -1.1, 0.7);
        let g = Vector3::new(0.0, 0.0, 9.81);
        let ab = abar(&g);
        let dense = kron(&DMatrix::from_column_slice(5, 5, ab.as_slice()), &DMatrix::identity(3, 3))
            - kron(&DMatrix::identity(5, 5), &DMatrix::from_column_slice(3, 3, hat_matrix(&w).as_slice()));
        let a = system_a(&w, &g);
        assert_eq!(DMatrix::from_column_slice(15, 15, a.as_slice()), dense);
        assert_eq!(ab.row(1).columns(2, 3).transpose(), g);
    }
}
