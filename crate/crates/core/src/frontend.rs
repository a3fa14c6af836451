//! Rewrites raw outputs into the right-invariant form `𝐲ᵢ = X⁻¹𝐫ᵢ` with
//! `𝐲ᵢ = [yᵢ; rᵢ]` and `𝐫ᵢ = [0₃; rᵢ]`, and builds the stacked output matrix
//! `C(t)` whose `i`-th block row is `rᵢᵀ ⊗ I₃`.
//!
//! | kind                 | unified `y`  | `r`                 |
//! |----------------------|--------------|---------------------|
//! | `Rᵀ(ξ − γp)`         | sample       | `[γ, 0, −ξᵀ]`       |
//! | `p + Rb`             | `b`          | `[1, 0, −sampleᵀ]`  |
//! | `v`                  | `0₃`         | `[0, 1, −sampleᵀ]`  |
//! | `Rᵀv`                | sample       | `[0, −1, 0, 0, 0]`  |
//!
//! Reference vectors of the position and velocity kinds are built from the
//! samples as measured, so `C(t)` changes with every epoch.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};
use crate::lie::{Vector5, Vector8, SE5};
use crate::sensors::{ChannelKind, ChannelSpec, MeasurementSample};

pub type RefVector5 = Vector5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnifiedOutput {
    pub y: Vector3<f64>,
    pub r: RefVector5,
}

impl UnifiedOutput {
    /// `[y; r]`.
    pub fn y_bold(&self) -> Vector8 {
        let mut out = Vector8::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&self.y);
        out.fixed_rows_mut::<5>(3).copy_from(&self.r);
        out
    }

    /// `[0₃; r]`.
    pub fn r_bold(&self) -> Vector8 {
        let mut out = Vector8::zeros();
        out.fixed_rows_mut::<5>(3).copy_from(&self.r);
        out
    }
}

/// Unified output of one raw sample of `kind`.
pub fn unify(kind: &ChannelKind, sample: &Vector3<f64>) -> UnifiedOutput {
    let r = |a: f64, b: f64, tail: Vector3<f64>| Vector5::new(a, b, tail.x, tail.y, tail.z);
    match *kind {
        ChannelKind::BodyLandmarkOrVector { xi, landmark } => {
            UnifiedOutput { y: *sample, r: r(if landmark { 1.0 } else { 0.0 }, 0.0, -xi) }
        }
        ChannelKind::InertialPosition { lever_arm } => {
            UnifiedOutput { y: lever_arm, r: r(1.0, 0.0, -sample) }
        }
        ChannelKind::InertialVelocity => UnifiedOutput { y: Vector3::zeros(), r: r(0.0, 1.0, -sample) },
        ChannelKind::BodyVelocity => UnifiedOutput { y: *sample, r: r(0.0, -1.0, Vector3::zeros()) },
    }
}

pub fn reference_vector(channel: &ChannelSpec, sample: &MeasurementSample) -> RefVector5 {
    unify(&channel.kind, &sample.y).r
}

/// `C = [r₁ᵀ⊗I₃; …; r_mᵀ⊗I₃]`, size `3m × 15`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputMatrix {
    pub c: DMatrix<f64>,
    pub m: usize,
}

impl OutputMatrix {
    pub fn from_refs<'a>(refs: impl IntoIterator<Item = &'a RefVector5>) -> Self {
        let refs: Vec<&RefVector5> = refs.into_iter().collect();
        let m = refs.len();
        let mut c = DMatrix::zeros(3 * m, 15);
        for (i, r) in refs.iter().enumerate() {
            for j in 0..5 {
                for a in 0..3 {
                    c[(3 * i + a, 3 * j + a)] = r[j];
                }
            }
        }
        OutputMatrix { c, m }
    }

    pub fn from_outputs(outputs: &[UnifiedOutput]) -> Self {
        OutputMatrix::from_refs(outputs.iter().map(|u| &u.r))
    }
}

/// Unifies one synchronized sample per channel (in channel order).
pub fn build_unified(
    channels: &[ChannelSpec],
    samples: &[MeasurementSample],
) -> Result<(Vec<UnifiedOutput>, OutputMatrix)> {
    if channels.is_empty() {
        return Err(Error::NoChannels);
    }
    if channels.len() != samples.len() {
        return Err(Error::Shape(format!(
            "{} channels but {} samples",
            channels.len(),
            samples.len()
        )));
    }
    let outputs: Vec<UnifiedOutput> =
        channels.iter().zip(samples).map(|(ch, s)| unify(&ch.kind, &s.y)).collect();
    let c = OutputMatrix::from_outputs(&outputs);
    Ok((outputs, c))
}

/// `G·Δ𝐲ᵢ = G(𝐫ᵢ − X̂𝐲ᵢ) = −(R̂yᵢ + ẑrᵢ)`.
#[inline]
pub fn innovation_block(output: &UnifiedOutput, xhat: &SE5) -> Vector3<f64> {
    -(xhat.rotation().matrix() * output.y + xhat.translation() * output.r)
}

/// Per-channel innovations `Δ𝐲ᵢ = 𝐫ᵢ − X̂𝐲ᵢ` and the stacked `Δ_z`.
pub fn innovation_inputs(outputs: &[UnifiedOutput], xhat: &SE5) -> (Vec<Vector8>, DVector<f64>) {
    let delta_y: Vec<Vector8> = outputs.iter().map(|u| u.r_bold() - xhat.act(&u.y_bold())).collect();
    let mut dz = DVector::zeros(3 * outputs.len());
    for (i, d) in delta_y.iter().enumerate() {
        dz.fixed_rows_mut::<3>(3 * i).copy_from(&d.fixed_rows::<3>(0));
    }
    (delta_y, dz)
}
