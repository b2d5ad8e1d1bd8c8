//! Triangle meshes and the point queries the rest of the crate is built on.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::Vec3;

use super::bvh::Bvh;

/// An indexed triangle mesh with derived per-vertex and per-face normals.
///
/// Construction validates indices and derives area-weighted vertex normals,
/// so every mesh that exists is non-empty and has unit normals.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    vertex_normals: Vec<Vec3>,
    face_normals: Vec<Vec3>,
    bvh: Bvh,
}

/// Result of a closest-point query against a surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub point: Vec3,
    /// Outward unit normal of the triangle that owns `point`.
    pub normal: Vec3,
    /// Negative when the query lies inside the closed surface.
    pub signed_distance: f64,
    pub triangle_id: usize,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if vertices.is_empty() || triangles.is_empty() {
            return Err(Error::invalid("mesh has no vertices or no triangles"));
        }
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::invalid(format!(
                    "triangle {t} references a vertex index >= {n}"
                )));
            }
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("mesh has non-finite vertex coordinates"));
        }

        let mut face_normals = Vec::with_capacity(triangles.len());
        let mut accum = vec![Vec3::zeros(); n];
        for tri in &triangles {
            let [a, b, c] = tri.map(|i| vertices[i]);
            // cross product magnitude is twice the area: area weighting for free
            let cross = (b - a).cross(&(c - a));
            let len = cross.norm();
            face_normals.push(if len > 0.0 { cross / len } else { Vec3::zeros() });
            for &i in tri {
                accum[i] += cross;
            }
        }
        let mut vertex_normals = Vec::with_capacity(n);
        for (i, a) in accum.into_iter().enumerate() {
            let len = a.norm();
            if len <= f64::EPSILON {
                return Err(Error::Degenerate(format!(
                    "vertex {i} has no incident triangle area"
                )));
            }
            vertex_normals.push(a / len);
        }

        let bvh = Bvh::build(&vertices, &triangles);
        Ok(TriMesh { vertices, triangles, vertex_normals, face_normals, bvh })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn vertex_normals(&self) -> &[Vec3] {
        &self.vertex_normals
    }

    pub fn face_normal(&self, triangle: usize) -> Vec3 {
        self.face_normals[triangle]
    }

    pub fn triangle(&self, triangle: usize) -> [Vec3; 3] {
        self.triangles[triangle].map(|i| self.vertices[i])
    }

    /// Axis-aligned bounding box as `(min, max)`.
    pub fn aabb(&self) -> (Vec3, Vec3) {
        self.bvh.root_bounds()
    }

    /// Applies `f` to every vertex and rebuilds derived data.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<TriMesh> {
        TriMesh::new(self.vertices.iter().map(f).collect(), self.triangles.clone())
    }

    /// Same geometry with reversed triangle winding.
    pub fn flipped(&self) -> Result<TriMesh> {
        TriMesh::new(
            self.vertices.clone(),
            self.triangles.iter().map(|&[a, b, c]| [a, c, b]).collect(),
        )
    }

    /// Checks that the mesh bounds a volume: every directed edge has exactly
    /// one opposite partner and the Euler characteristic is even.
    pub fn check_watertight(&self) -> Result<()> {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let key = (tri[e], tri[(e + 1) % 3]);
                if key.0 == key.1 {
                    return Err(Error::NotWatertight("triangle with repeated vertex".into()));
                }
                *directed.entry(key).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &directed {
            if count != 1 {
                return Err(Error::NotWatertight(format!(
                    "edge ({a}, {b}) is used {count} times in the same direction"
                )));
            }
            if directed.get(&(b, a)) != Some(&1) {
                return Err(Error::NotWatertight(format!("edge ({a}, {b}) is a boundary edge")));
            }
        }
        let edges = directed.len() / 2;
        let chi = self.vertices.len() as i64 - edges as i64 + self.triangles.len() as i64;
        if chi % 2 != 0 {
            return Err(Error::NotWatertight(format!("odd Euler characteristic {chi}")));
        }
        Ok(())
    }

    pub fn is_watertight(&self) -> bool {
        self.check_watertight().is_ok()
    }

    /// Generalized winding number of `q`: 1 inside a closed outward-oriented
    /// surface, 0 outside, fractional near open boundaries.
    pub fn winding_number(&self, q: &Vec3) -> f64 {
        let (lo, hi) = self.aabb();
        if (0..3).any(|i| q[i] < lo[i] || q[i] > hi[i]) {
            return 0.0;
        }
        let mut total = 0.0;
        for tri in &self.triangles {
            let a = self.vertices[tri[0]] - q;
            let b = self.vertices[tri[1]] - q;
            let c = self.vertices[tri[2]] - q;
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let det = a.dot(&b.cross(&c));
            let denom = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * det.atan2(denom);
        }
        total / (4.0 * PI)
    }

    pub fn contains(&self, q: &Vec3) -> bool {
        self.winding_number(q) > 0.5
    }

    /// Closest point on the surface, without the inside/outside sign.
    pub fn closest_point(&self, q: &Vec3) -> (Vec3, usize, f64) {
        self.bvh.nearest(q, &self.vertices, &self.triangles)
    }

    /// Closest surface point with a winding-number sign.
    pub fn nearest_surface_point(&self, q: &Vec3) -> SurfaceHit {
        let (point, triangle_id, dist_sq) = self.closest_point(q);
        let dist = dist_sq.sqrt();
        let signed_distance = if dist > 0.0 && self.contains(q) { -dist } else { dist };
        SurfaceHit { point, normal: self.face_normals[triangle_id], signed_distance, triangle_id }
    }

    /// Closest point restricted to a subset of triangles. Returns `None` for
    /// an empty subset. The sign comes from the owning face normal, which is
    /// what a local patch (an open surface) supports.
    pub fn nearest_in_subset(&self, q: &Vec3, subset: &[usize]) -> Option<SurfaceHit> {
        let mut best: Option<(f64, usize, Vec3)> = None;
        for &t in subset {
            let [a, b, c] = self.triangle(t);
            let p = closest_point_on_triangle(q, &a, &b, &c);
            let d2 = (q - p).norm_squared();
            if best.is_none_or(|(bd, _, _)| d2 < bd) {
                best = Some((d2, t, p));
            }
        }
        best.map(|(d2, t, p)| {
            let n = self.face_normals[t];
            let d = d2.sqrt();
            let signed = if (q - p).dot(&n) < 0.0 { -d } else { d };
            SurfaceHit { point: p, normal: n, signed_distance: signed, triangle_id: t }
        })
    }

    /// Vertices within `radius` of `center` whose normal lies within
    /// `angle_deg` of `normal`, plus the triangles spanned entirely by them.
    pub fn local_surface_section(
        &self,
        center: &Vec3,
        normal: &Vec3,
        angle_deg: f64,
        radius: f64,
    ) -> SurfaceSection {
        let cos_limit = angle_deg.to_radians().cos() - 1e-12;
        let r2 = radius * radius;
        let mut selected = vec![false; self.vertices.len()];
        let mut vertices = Vec::new();
        for (i, (v, n)) in self.vertices.iter().zip(&self.vertex_normals).enumerate() {
            if (v - center).norm_squared() <= r2 && n.dot(normal) >= cos_limit {
                selected[i] = true;
                vertices.push(i);
            }
        }
        let triangles = self
            .triangles
            .iter()
            .enumerate()
            .filter(|(_, tri)| tri.iter().all(|&i| selected[i]))
            .map(|(t, _)| t)
            .collect();
        SurfaceSection { vertices, triangles }
    }
}

/// A patch of a mesh selected by position and normal direction.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SurfaceSection {
    pub vertices: Vec<usize>,
    pub triangles: Vec<usize>,
}

impl SurfaceSection {
    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Closest point to `p` on triangle `abc` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
