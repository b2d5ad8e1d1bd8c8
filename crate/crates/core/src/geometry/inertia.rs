//! Mass properties of closed triangle meshes with uniform density.

use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

use super::mesh::TriMesh;

/// Mass properties in part-local coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inertia {
    pub mass: f64,
    pub com: Vec3,
    /// Inertia tensor about the center of mass.
    pub i0: Mat3,
    pub volume: f64,
}

impl Inertia {
    /// Moment about an axis through `origin` along unit `direction`.
    pub fn about_axis(&self, origin: &Vec3, direction: &Vec3) -> f64 {
        let d = direction.normalize();
        let r = self.com - origin;
        let perp = r - d * r.dot(&d);
        d.dot(&(self.i0 * d)) + self.mass * perp.norm_squared()
    }
}

fn subexpressions(w0: f64, w1: f64, w2: f64) -> (f64, f64, f64, f64, f64, f64) {
    let temp0 = w0 + w1;
    let f1 = temp0 + w2;
    let temp1 = w0 * w0;
    let temp2 = temp1 + w1 * temp0;
    let f2 = temp2 + w2 * f1;
    let f3 = w0 * temp1 + w1 * temp2 + w2 * f2;
    let g0 = f2 + w0 * (f1 + w0);
    let g1 = f2 + w1 * (f1 + w1);
    let g2 = f2 + w2 * (f1 + w2);
    (f1, f2, f3, g0, g1, g2)
}

/// Mass properties of a watertight, outward-oriented mesh, with density
/// chosen so the total mass is `mass`.
///
/// Volume integrals are reduced to surface sums with the divergence theorem.
pub fn mass_properties(mesh: &TriMesh, mass: f64) -> Result<Inertia> {
    mesh.check_watertight()?;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::invalid("mass must be positive"));
    }
    // shift to a nearby origin to keep the polynomial terms well conditioned
    let (lo, hi) = mesh.aabb();
    let shift = (lo + hi) * 0.5;
    let mut acc = [0.0f64; 10];
    for t in 0..mesh.triangles().len() {
        let [p0, p1, p2] = mesh.triangle(t).map(|p| p - shift);
        let d = (p1 - p0).cross(&(p2 - p0));
        let (f1x, f2x, f3x, g0x, g1x, g2x) = subexpressions(p0.x, p1.x, p2.x);
        let (_, f2y, f3y, g0y, g1y, g2y) = subexpressions(p0.y, p1.y, p2.y);
        let (_, f2z, f3z, g0z, g1z, g2z) = subexpressions(p0.z, p1.z, p2.z);
        acc[0] += d.x * f1x;
        acc[1] += d.x * f2x;
        acc[2] += d.y * f2y;
        acc[3] += d.z * f2z;
        acc[4] += d.x * f3x;
        acc[5] += d.y * f3y;
        acc[6] += d.z * f3z;
        acc[7] += d.x * (p0.y * g0x + p1.y * g1x + p2.y * g2x);
        acc[8] += d.y * (p0.z * g0y + p1.z * g1y + p2.z * g2y);
        acc[9] += d.z * (p0.x * g0z + p1.x * g1z + p2.x * g2z);
    }
    let mult = [
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 24.0,
        1.0 / 24.0,
        1.0 / 60.0,
        1.0 / 60.0,
        1.0 / 60.0,
        1.0 / 120.0,
        1.0 / 120.0,
        1.0 / 120.0,
    ];
    for (a, m) in acc.iter_mut().zip(mult) {
        *a *= m;
    }
    let volume = acc[0];
    if !(volume > 0.0) {
        return Err(Error::Degenerate(format!(
            "enclosed volume {volume} is not positive; mesh may be inward-oriented"
        )));
    }
    let c = Vec3::new(acc[1], acc[2], acc[3]) / volume;
    // unit-density tensor about the center of mass
    let xx = acc[5] + acc[6] - volume * (c.y * c.y + c.z * c.z);
    let yy = acc[4] + acc[6] - volume * (c.z * c.z + c.x * c.x);
    let zz = acc[4] + acc[5] - volume * (c.x * c.x + c.y * c.y);
    let xy = -(acc[7] - volume * c.x * c.y);
    let yz = -(acc[8] - volume * c.y * c.z);
    let xz = -(acc[9] - volume * c.z * c.x);
    let density = mass / volume;
    let tensor = Mat3::new(xx, xy, xz, xy, yy, yz, xz, yz, zz) * density;
    Ok(Inertia { mass, com: c + shift, i0: tensor, volume })
}
