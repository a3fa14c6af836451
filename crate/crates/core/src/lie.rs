//! Matrix Lie-group substrate: SO(3), the extended groups SEₙ(3), the
//! hat/vex/ψ maps and Kronecker/vectorization helpers.
//!
//! An element of SEₙ(3) is kept as a `(Rotation, 3×n)` pair. The dense
//! `(3+n)×(3+n)` realization
//!
//! ```text
//! T_n(R, x) = [ R  x  ]
//!             [ 0  Iₙ ]
//! ```
//!
//! is only materialized on request ([`SEn::to_matrix`]), mostly for test oracles.

use std::ops::Mul;

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, SVector, Vector3};

use crate::error::{Error, Result};

/// Tolerance on `‖RᵀR − I‖_F` and `|det R − 1|` for a valid rotation.
pub const ROTATION_TOL: f64 = 1e-9;
/// Tolerance on `max |Ω + Ωᵀ|` accepted by [`vex`].
pub const SKEW_TOL: f64 = 1e-9;
/// Below this angle `so3_exp` switches to its second-order series.
pub const SMALL_ANGLE: f64 = 1e-8;

pub type Vector5 = SVector<f64, 5>;
pub type Vector8 = SVector<f64, 8>;

/// A 3×3 orthonormal matrix with unit determinant.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation(Matrix3<f64>);

impl Rotation {
    pub fn identity() -> Self {
        Rotation(Matrix3::identity())
    }

    /// Accepts `m` only if it satisfies the rotation invariants to [`ROTATION_TOL`].
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::NotRotation("non-finite entries".into()));
        }
        let ortho = orthonormality_error(&m);
        if ortho > ROTATION_TOL {
            return Err(Error::NotRotation(format!("‖RᵀR − I‖_F = {ortho:e}")));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::NotRotation(format!("det = {det}")));
        }
        Ok(Rotation(m))
    }

    /// Closest rotation to `m` in the Frobenius norm (polar factor via SVD).
    pub fn project(m: &Matrix3<f64>) -> Self {
        let svd = m.svd(true, true);
        let mut u = svd.u.expect("3x3 SVD always yields U");
        let v_t = svd.v_t.expect("3x3 SVD always yields Vᵀ");
        if (u * v_t).determinant() < 0.0 {
            // singular values come out sorted, flip the weakest direction
            u.column_mut(2).neg_mut();
        }
        Rotation(u * v_t)
    }

    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        Rotation(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        Rotation(self.0.transpose())
    }

    pub fn inverse(&self) -> Self {
        self.transpose()
    }

    /// `‖RᵀR − I‖_F`.
    pub fn orthonormality_error(&self) -> f64 {
        orthonormality_error(&self.0)
    }

    /// Re-projects onto SO(3) once drift exceeds [`ROTATION_TOL`].
    pub fn renormalized(&self) -> Self {
        if self.orthonormality_error() > ROTATION_TOL {
            Rotation::project(&self.0)
        } else {
            *self
        }
    }

    /// Rotation angle in `[0, π]`, from `atan2(sin θ, cos θ)` so small
    /// angles keep full precision.
    pub fn angle(&self) -> f64 {
        let m = &self.0;
        let s = Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]).norm() / 2.0;
        s.atan2((m.trace() - 1.0) / 2.0)
    }
}

impl Mul for Rotation {
    type Output = Rotation;
    fn mul(self, rhs: Rotation) -> Rotation {
        Rotation(self.0 * rhs.0)
    }
}

impl Mul<Vector3<f64>> for Rotation {
    type Output = Vector3<f64>;
    fn mul(self, rhs: Vector3<f64>) -> Vector3<f64> {
        self.0 * rhs
    }
}

fn orthonormality_error(m: &Matrix3<f64>) -> f64 {
    (m.transpose() * m - Matrix3::identity()).norm()
}

/// An element of so(3); antisymmetric by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkewSym3(Matrix3<f64>);

impl SkewSym3 {
    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn vex(&self) -> Vector3<f64> {
        Vector3::new(self.0[(2, 1)], self.0[(0, 2)], self.0[(1, 0)])
    }
}

/// Cross-product matrix: `hat(v)·w = v × w`.
pub fn hat(v: &Vector3<f64>) -> SkewSym3 {
    SkewSym3(hat_matrix(v))
}

#[inline]
pub fn hat_matrix(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`hat`]. Rejects inputs whose asymmetry exceeds [`SKEW_TOL`].
pub fn vex(m: &Matrix3<f64>) -> Result<Vector3<f64>> {
    let asym = (m + m.transpose()).amax();
    if !(asym <= SKEW_TOL) {
        return Err(Error::NotSkewSymmetric(asym));
    }
    Ok(Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)]))
}

/// `ψ(A) = vex((A − Aᵀ)/2)`.
pub fn psi(a: &Matrix3<f64>) -> Vector3<f64> {
    0.5 * Vector3::new(
        a[(2, 1)] - a[(1, 2)],
        a[(0, 2)] - a[(2, 0)],
        a[(1, 0)] - a[(0, 1)],
    )
}

/// Rodrigues' formula; second-order series below [`SMALL_ANGLE`].
pub fn so3_exp(v: &Vector3<f64>) -> Rotation {
    let theta = v.norm();
    let k = hat_matrix(v);
    let k2 = k * k;
    let m = if theta < SMALL_ANGLE {
        Matrix3::identity() + k + 0.5 * k2
    } else {
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / (theta * theta);
        Matrix3::identity() + a * k + b * k2
    };
    Rotation(m)
}

/// Element `T_n(R, x)` of the extended special Euclidean group SEₙ(3).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SEn<const N: usize> {
    rotation: Rotation,
    translation: SMatrix<f64, 3, N>,
}

pub type SE2 = SEn<2>;
pub type SE5 = SEn<5>;

impl<const N: usize> SEn<N> {
    pub fn new(rotation: Rotation, translation: SMatrix<f64, 3, N>) -> Self {
        SEn { rotation, translation }
    }

    pub fn identity() -> Self {
        SEn { rotation: Rotation::identity(), translation: SMatrix::zeros() }
    }

    pub fn rotation(&self) -> &Rotation {
        &self.rotation
    }

    pub fn translation(&self) -> &SMatrix<f64, 3, N> {
        &self.translation
    }

    pub fn compose(&self, other: &Self) -> Self {
        SEn {
            rotation: self.rotation * other.rotation,
            translation: self.rotation.matrix() * other.translation + self.translation,
        }
    }

    /// `T_n(Rᵀ, −Rᵀx)`.
    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        SEn { rotation: rt, translation: -(rt.matrix() * self.translation) }
    }

    /// Dense `(3+n)×(3+n)` realization.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::identity(3 + N, 3 + N);
        m.view_mut((0, 0), (3, 3)).copy_from(self.rotation.matrix());
        m.view_mut((0, 3), (3, N)).copy_from(&self.translation);
        m
    }

    /// Inverse of [`SEn::to_matrix`]; validates shape, the constant bottom
    /// block rows and the rotation block.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        if m.shape() != (3 + N, 3 + N) {
            return Err(Error::Shape(format!(
                "expected {0}x{0} matrix for SE_{N}(3), got {1}x{2}",
                3 + N,
                m.nrows(),
                m.ncols()
            )));
        }
        let bottom = m.view((3, 0), (N, 3 + N));
        let mut expected = DMatrix::zeros(N, 3 + N);
        expected.view_mut((0, 3), (N, N)).fill_with_identity();
        if (bottom - expected).amax() > ROTATION_TOL {
            return Err(Error::Shape("bottom block rows are not [0 I]".into()));
        }
        let rotation = Rotation::from_matrix(m.fixed_view::<3, 3>(0, 0).into_owned())?;
        let translation = m.fixed_view::<3, N>(0, 3).into_owned();
        Ok(SEn { rotation, translation })
    }
}

impl<const N: usize> Mul for SEn<N> {
    type Output = SEn<N>;
    fn mul(self, rhs: SEn<N>) -> SEn<N> {
        self.compose(&rhs)
    }
}

impl SE5 {
    /// Left action on an 8-vector `[a; b]`: `[R a + x b; b]`.
    pub fn act(&self, v: &Vector8) -> Vector8 {
        let top: Vector3<f64> = v.fixed_rows::<3>(0).into_owned();
        let bottom: Vector5 = v.fixed_rows::<5>(3).into_owned();
        let head = self.rotation.matrix() * top + self.translation * bottom;
        let mut out = Vector8::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&head);
        out.fixed_rows_mut::<5>(3).copy_from(&bottom);
        out
    }
}

/// Kronecker product `A ⊗ B`.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vec(a: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(a.as_slice())
}

/// Reshapes a length-`m·n` vector back into an `m×n` matrix, column-major.
pub fn vec_inv(v: &DVector<f64>, m: usize, n: usize) -> Result<DMatrix<f64>> {
    if v.len() != m * n {
        return Err(Error::Shape(format!("cannot reshape length {} into {m}x{n}", v.len())));
    }
    Ok(DMatrix::from_column_slice(m, n, v.as_slice()))
}
