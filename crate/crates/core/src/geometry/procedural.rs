//! Procedurally generated meshes and fixture scenes.

use std::collections::{HashMap, HashSet};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{Part, Scene};
use crate::{Mat3, Vec3};

use super::mesh::TriMesh;
use super::trajectory::{GoalKeyframe, PartKeyframe, RevoluteAxis};

/// Surface of a union of grid cells. Cell `[i, j, k]` spans
/// `origin + [i, j, k] ⊙ cell_size` to one cell further on each axis.
pub fn voxel_mesh(cells: &[[i64; 3]], cell_size: Vec3, origin: Vec3) -> Result<TriMesh> {
    if cell_size.iter().any(|&c| !(c > 0.0)) {
        return Err(Error::invalid("cell size must be positive"));
    }
    let mut sorted: Vec<[i64; 3]> = cells.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let filled: HashSet<[i64; 3]> = sorted.iter().copied().collect();

    let mut index: HashMap<[i64; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut vertex = |p: [i64; 3], vertices: &mut Vec<Vec3>| {
        *index.entry(p).or_insert_with(|| {
            vertices.push(origin + Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64).component_mul(&cell_size));
            vertices.len() - 1
        })
    };
    for c in &sorted {
        for axis in 0..3 {
            for sign in [1i64, -1] {
                let mut nb = *c;
                nb[axis] += sign;
                if filled.contains(&nb) {
                    continue;
                }
                let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                let mut base = *c;
                if sign > 0 {
                    base[axis] += 1;
                }
                // (u, v) walk is counter-clockwise seen from +axis
                let corners = [(0, 0), (1, 0), (1, 1), (0, 1)].map(|(du, dv)| {
                    let mut p = base;
                    p[u] += du;
                    p[v] += dv;
                    vertex(p, &mut vertices)
                });
                let [a, b, cc, d] = corners;
                if sign > 0 {
                    triangles.push([a, b, cc]);
                    triangles.push([a, cc, d]);
                } else {
                    triangles.push([a, cc, b]);
                    triangles.push([a, d, cc]);
                }
            }
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Axis-aligned box subdivided so no cell side exceeds `max_cell`.
pub fn box_mesh(min: Vec3, max: Vec3, max_cell: f64) -> Result<TriMesh> {
    let extent = max - min;
    if extent.iter().any(|&e| !(e > 0.0)) || !(max_cell > 0.0) {
        return Err(Error::invalid("box needs positive extents and cell size"));
    }
    let counts = extent.map(|e| ((e / max_cell) - 1e-9).ceil().max(1.0));
    let n = counts.map(|c| c as i64);
    let mut cells = Vec::new();
    for i in 0..n.x {
        for j in 0..n.y {
            for k in 0..n.z {
                cells.push([i, j, k]);
            }
        }
    }
    voxel_mesh(&cells, extent.component_div(&counts), min)
}

/// Subdivided icosahedron projected onto a sphere centered at the origin.
pub fn icosphere(radius: f64, subdivisions: usize) -> Result<TriMesh> {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut tris: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(tris.len() * 4);
        for [a, b, c] in tris {
            let mut m = |x: usize, y: usize| {
                *mid.entry((x.min(y), x.max(y))).or_insert_with(|| {
                    verts.push(((verts[x] + verts[y]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            let (ab, bc, ca) = (m(a, b), m(b, c), m(c, a));
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        tris = next;
    }
    for tri in tris.iter_mut() {
        let [a, b, c] = tri.map(|i| verts[i]);
        if (b - a).cross(&(c - a)).dot(&(a + b + c)) < 0.0 {
            tri.swap(1, 2);
        }
    }
    TriMesh::new(verts.into_iter().map(|v| v * radius).collect(), tris)
}

/// Built-in fixture objects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    /// Base slab plus a lid hinged along its back edge.
    HingedLaptop,
    /// Two mirrored handles sharing a pivot; the whole object floats.
    Pliers,
    /// A single box resting on the ground.
    BoxOnGround,
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hinged_laptop" => Ok(SceneKind::HingedLaptop),
            "pliers" => Ok(SceneKind::Pliers),
            "box_on_ground" => Ok(SceneKind::BoxOnGround),
            _ => Err(Error::invalid(format!(
                "unknown scene kind '{s}' (expected hinged_laptop, pliers or box_on_ground)"
            ))),
        }
    }
}

/// Fixture parameters.
///
/// `scale` multiplies every length (cell size included, so the mesh topology
/// does not change) and must lie in `[0.1, 10]`. `open_angle` is the final
/// hinge angle in radians, `|open_angle| < π`; `None` picks the kind's default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneParams {
    pub scale: f64,
    pub open_angle: Option<f64>,
    /// Largest mesh cell side before scaling, in meters.
    pub cell_size: f64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams { scale: 1.0, open_angle: None, cell_size: 0.01 }
    }
}

fn part_key(angle: f64, translation: Vec3) -> PartKeyframe {
    PartKeyframe { translation, rotation: Vec3::zeros(), angle }
}

/// Builds a fixture scene with its default goal keyframes.
pub fn make_scene(kind: SceneKind, params: &SceneParams) -> Result<Scene> {
    let s = params.scale;
    if !(0.1..=10.0).contains(&s) {
        return Err(Error::invalid("scene scale must lie in [0.1, 10]"));
    }
    if !(params.cell_size > 0.0 && params.cell_size <= 0.1) {
        return Err(Error::invalid("cell size must lie in (0, 0.1]"));
    }
    if let Some(a) = params.open_angle {
        if !(a.abs() < std::f64::consts::PI) {
            return Err(Error::invalid("open angle must satisfy |angle| < pi"));
        }
    }
    let cell = params.cell_size * s;
    let gravity = Vec3::new(0.0, 0.0, -9.81);
    let id = Mat3::identity();
    match kind {
        SceneKind::HingedLaptop => {
            let (w, d, hb, hl) = (0.30 * s, 0.20 * s, 0.015 * s, 0.010 * s);
            let base = box_mesh(Vec3::new(-w / 2.0, -d / 2.0, 0.0), Vec3::new(w / 2.0, d / 2.0, hb), cell)?;
            let lid =
                box_mesh(Vec3::new(-w / 2.0, -d / 2.0, hb), Vec3::new(w / 2.0, d / 2.0, hb + hl), cell)?;
            let hinge = RevoluteAxis::new(Vec3::new(0.0, d / 2.0, hb), Vec3::new(-1.0, 0.0, 0.0))?;
            let open = params.open_angle.unwrap_or(1.4);
            let goals = [0.0, 0.0, open]
                .iter()
                .map(|&a| GoalKeyframe {
                    parts: vec![part_key(0.0, Vec3::zeros()), part_key(a, Vec3::zeros())],
                })
                .collect();
            Scene::new(
                vec![Part::new("base", base, id, None)?, Part::new("lid", lid, id, Some(hinge))?],
                gravity,
                0.0,
                goals,
            )
        }
        SceneKind::Pliers => {
            let (x0, x1, y0, y1, h) = (-0.06 * s, 0.12 * s, 0.002 * s, 0.014 * s, 0.005 * s);
            let upper = box_mesh(Vec3::new(x0, y0, -h), Vec3::new(x1, y1, h), cell)?;
            let lower = upper.map_vertices(|v| Vec3::new(v.x, -v.y, v.z))?.flipped()?;
            let pivot = RevoluteAxis::new(Vec3::zeros(), Vec3::z())?;
            let open = params.open_angle.unwrap_or(0.3);
            let lift = Vec3::new(0.0, 0.0, 0.2 * s);
            let goals = [0.0, 0.0, open]
                .iter()
                .map(|&a| GoalKeyframe { parts: vec![part_key(a, lift), part_key(-a, lift)] })
                .collect();
            Scene::new(
                vec![
                    Part::new("upper_handle", upper, id, Some(pivot))?,
                    Part::new("lower_handle", lower, id, Some(pivot))?,
                ],
                gravity,
                0.0,
                goals,
            )
        }
        SceneKind::BoxOnGround => {
            let e = 0.1 * s;
            let mesh = box_mesh(Vec3::new(-e / 2.0, -e / 2.0, 0.0), Vec3::new(e / 2.0, e / 2.0, e), cell)?;
            let lift = 0.1 * s;
            let goals = [0.0, 0.0, lift]
                .iter()
                .map(|&z| GoalKeyframe { parts: vec![part_key(0.0, Vec3::new(0.0, 0.0, z))] })
                .collect();
            Scene::new(vec![Part::new("box", mesh, id, None)?], gravity, 0.0, goals)
        }
    }
}
