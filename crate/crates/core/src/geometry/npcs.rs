//! Normalized part coordinate spaces.
//!
//! A part's normalized space puts its canonically oriented bounding box in
//! the unit cube: the longest side spans `[0, 1]` and the box is centered at
//! `(0.5, 0.5, 0.5)`. [`PartFrame`] maps normalized coordinates back out.

use nalgebra::Rotation3;

use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

use super::mesh::TriMesh;

/// A similarity transform (optionally with per-axis stretch) from an inner
/// coordinate space to an outer one: `x = R (s (a ⊙ p)) + t`.
///
/// With `stretch = (1, 1, 1)` this is a rigid motion plus uniform scale,
/// which is how object poses and normalized part spaces are both expressed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartFrame {
    pub rotation: Rotation3<f64>,
    pub translation: Vec3,
    pub scale: f64,
    pub stretch: Vec3,
}

impl Default for PartFrame {
    fn default() -> Self {
        PartFrame::identity()
    }
}

impl PartFrame {
    pub fn identity() -> Self {
        PartFrame {
            rotation: Rotation3::identity(),
            translation: Vec3::zeros(),
            scale: 1.0,
            stretch: Vec3::repeat(1.0),
        }
    }

    pub fn rigid(rotation: Rotation3<f64>, translation: Vec3) -> Self {
        PartFrame { rotation, translation, ..PartFrame::identity() }
    }

    pub fn to_outer(&self, p: &Vec3) -> Vec3 {
        self.rotation * (self.stretch.component_mul(p) * self.scale) + self.translation
    }

    pub fn to_inner(&self, x: &Vec3) -> Vec3 {
        (self.rotation.inverse() * (x - self.translation)).component_div(&self.stretch) / self.scale
    }

    /// Maps a surface normal outward; normals transform with the inverse stretch.
    pub fn normal_to_outer(&self, n: &Vec3) -> Vec3 {
        (self.rotation * n.component_div(&self.stretch)).normalize()
    }

    pub fn normal_to_inner(&self, n: &Vec3) -> Vec3 {
        (self.rotation.inverse() * n).component_mul(&self.stretch).normalize()
    }

    pub fn vector_to_outer(&self, v: &Vec3) -> Vec3 {
        self.rotation * (self.stretch.component_mul(v) * self.scale)
    }

    /// `self ∘ inner`: first apply `inner`, then `self`. Only defined when
    /// `self` has no stretch, which holds for every rigid pose.
    pub fn compose(&self, inner: &PartFrame) -> PartFrame {
        debug_assert!((self.stretch - Vec3::repeat(1.0)).norm() < 1e-12);
        PartFrame {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * (inner.translation * self.scale) + self.translation,
            scale: self.scale * inner.scale,
            stretch: inner.stretch,
        }
    }

    pub fn inverse_rigid(&self) -> PartFrame {
        let r = self.rotation.inverse();
        PartFrame::rigid(r, -(r * self.translation))
    }
}

/// How normalized coordinates are scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NpcsScaling {
    /// One factor, the longest bounding-box side. Preserves angles.
    #[default]
    Uniform,
    /// Each axis stretched to span `[0, 1]` independently.
    PerAxis,
}

/// Checks `m` is a rotation matrix (orthonormal, determinant +1).
pub fn rotation_from_matrix(m: &Mat3) -> Result<Rotation3<f64>> {
    let err = (m.transpose() * m - Mat3::identity()).abs().max();
    if err > 1e-9 || (m.determinant() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid("canonical orientation is not a proper rotation"));
    }
    Ok(Rotation3::from_matrix_unchecked(*m))
}

/// Normalizes `mesh` given its canonical orientation `c` (the rotation that
/// takes part-local axes to canonical axes).
///
/// Returns the normalized mesh and the frame that maps normalized
/// coordinates back to part-local ones.
pub fn npcs_normalize(mesh: &TriMesh, canonical: &Mat3) -> Result<(TriMesh, PartFrame)> {
    npcs_normalize_with(mesh, canonical, NpcsScaling::Uniform)
}

pub fn npcs_normalize_with(
    mesh: &TriMesh,
    canonical: &Mat3,
    scaling: NpcsScaling,
) -> Result<(TriMesh, PartFrame)> {
    let frame = npcs_frame(mesh, canonical, scaling)?;
    let normalized = mesh.map_vertices(|v| frame.to_inner(v))?;
    Ok((normalized, frame))
}

/// The normalized-to-local frame of `mesh` without building the normalized mesh.
pub fn npcs_frame(mesh: &TriMesh, canonical: &Mat3, scaling: NpcsScaling) -> Result<PartFrame> {
    let c = rotation_from_matrix(canonical)?;
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for v in mesh.vertices() {
        let w = c * v;
        lo = lo.inf(&w);
        hi = hi.sup(&w);
    }
    let extent = hi - lo;
    let scale = extent.max();
    if scale <= 0.0 || !scale.is_finite() {
        return Err(Error::Degenerate("part has zero extent".into()));
    }
    let stretch = match scaling {
        NpcsScaling::Uniform => Vec3::repeat(1.0),
        NpcsScaling::PerAxis => extent.map(|e| if e > 0.0 { e / scale } else { 1.0 }),
    };
    let rotation = c.inverse();
    let center = (lo + hi) * 0.5;
    let translation = rotation * (center - stretch * (0.5 * scale));
    Ok(PartFrame { rotation, translation, scale, stretch })
}

/// Maps normalized points back into part-local coordinates.
pub fn npcs_denormalize_point(p: &Vec3, frame: &PartFrame) -> Vec3 {
    frame.to_outer(p)
}
