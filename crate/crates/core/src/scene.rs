//! Articulated objects: parts, hinges, goals, and their JSON form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    bezier_object_trajectory, mass_properties, npcs_frame, GoalKeyframe, Inertia, NpcsScaling,
    PartFrame, PartKeyframe, RevoluteAxis, TriMesh,
};
use crate::{Mat3, Vec3};

/// One rigid part of an object.
#[derive(Debug, Clone)]
pub struct Part {
    pub name: String,
    /// Mesh in part-local rest coordinates.
    pub mesh: TriMesh,
    /// Rotation taking local axes to the part category's canonical axes.
    pub canonical_orientation: Mat3,
    pub revolute_axis: Option<RevoluteAxis>,
    npcs: PartFrame,
    inertia: Inertia,
    center: Vec3,
}

impl Part {
    pub fn new(
        name: impl Into<String>,
        mesh: TriMesh,
        canonical_orientation: Mat3,
        revolute_axis: Option<RevoluteAxis>,
    ) -> Result<Self> {
        Part::with_scaling(name, mesh, canonical_orientation, revolute_axis, NpcsScaling::Uniform)
    }

    pub fn with_scaling(
        name: impl Into<String>,
        mesh: TriMesh,
        canonical_orientation: Mat3,
        revolute_axis: Option<RevoluteAxis>,
        scaling: NpcsScaling,
    ) -> Result<Self> {
        let name = name.into();
        let npcs = npcs_frame(&mesh, &canonical_orientation, scaling)?;
        let inertia = mass_properties(&mesh, 1.0)
            .map_err(|e| Error::invalid(format!("part '{name}': {e}")))?;
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in mesh.vertices() {
            let n = npcs.to_inner(v);
            lo = lo.inf(&n);
            hi = hi.sup(&n);
        }
        let center = npcs.to_outer(&((lo + hi) * 0.5));
        Ok(Part { name, mesh, canonical_orientation, revolute_axis, npcs, inertia, center })
    }

    /// Maps normalized coordinates to part-local coordinates.
    pub fn npcs_frame(&self) -> &PartFrame {
        &self.npcs
    }

    /// Unit-mass properties in local coordinates.
    pub fn inertia(&self) -> &Inertia {
        &self.inertia
    }

    /// Center of the canonical bounding box in local coordinates.
    pub fn center(&self) -> Vec3 {
        self.center
    }
}

/// An articulated object with its environment and goal keyframes.
#[derive(Debug, Clone)]
pub struct Scene {
    pub parts: Vec<Part>,
    pub gravity: Vec3,
    pub ground_z: f64,
    pub goals: Vec<GoalKeyframe>,
}

impl Scene {
    pub fn new(parts: Vec<Part>, gravity: Vec3, ground_z: f64, goals: Vec<GoalKeyframe>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("scene has no parts"));
        }
        for (j, g) in goals.iter().enumerate() {
            if g.parts.len() != parts.len() {
                return Err(Error::ShapeMismatch(format!(
                    "goal keyframe {j} lists {} parts, scene has {}",
                    g.parts.len(),
                    parts.len()
                )));
            }
        }
        Ok(Scene { parts, gravity, ground_z, goals })
    }

    pub fn axes(&self) -> Vec<Option<RevoluteAxis>> {
        self.parts.iter().map(|p| p.revolute_axis).collect()
    }

    /// The first declared revolute axis, if any part has one.
    pub fn articulation_axis(&self) -> Option<(usize, RevoluteAxis)> {
        self.parts.iter().enumerate().find_map(|(k, p)| p.revolute_axis.map(|a| (k, a)))
    }

    /// Object poses for `goals`, `frames_per_stage` frames per stage.
    pub fn object_trajectory(
        &self,
        goals: &[GoalKeyframe],
        frames_per_stage: usize,
    ) -> Result<Vec<Vec<PartFrame>>> {
        bezier_object_trajectory(&self.axes(), goals, frames_per_stage)
    }

    /// Same scene with every part's normalized space rebuilt under `scaling`.
    pub fn with_npcs_scaling(&self, scaling: NpcsScaling) -> Result<Scene> {
        let parts = self
            .parts
            .iter()
            .map(|p| {
                Part::with_scaling(
                    p.name.clone(),
                    p.mesh.clone(),
                    p.canonical_orientation,
                    p.revolute_axis,
                    scaling,
                )
            })
            .collect::<Result<_>>()?;
        Scene::new(parts, self.gravity, self.ground_z, self.goals.clone())
    }

    pub fn from_json_str(s: &str) -> Result<Scene> {
        let file: SceneFile = serde_json::from_str(s)?;
        file.into_scene()
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(SceneFile::from_scene(self, None)).expect("scene serializes")
    }

    pub fn load(path: &Path) -> Result<Scene> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
        Scene::from_json_str(&text)
    }
}

pub(crate) fn mat_to_rows(m: &Mat3) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|r| [m[(r, 0)], m[(r, 1)], m[(r, 2)]])
}

pub(crate) fn rows_to_mat(rows: &[[f64; 3]; 3]) -> Mat3 {
    Mat3::from_fn(|r, c| rows[r][c])
}

fn v3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

fn a3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisFile {
    origin: [f64; 3],
    direction: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartFile {
    name: String,
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[usize; 3]>,
    /// Row-major rotation matrix.
    canonical_rotation: [[f64; 3]; 3],
    #[serde(default)]
    revolute_axis: Option<AxisFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct PartKeyframeFile {
    pub translation: [f64; 3],
    pub rotation: [f64; 3],
    #[serde(default)]
    pub angle: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct GoalFile {
    pub parts: Vec<PartKeyframeFile>,
}

impl GoalFile {
    pub(crate) fn from_goal(g: &GoalKeyframe) -> Self {
        GoalFile {
            parts: g
                .parts
                .iter()
                .map(|p| PartKeyframeFile {
                    translation: a3(&p.translation),
                    rotation: a3(&p.rotation),
                    angle: p.angle,
                })
                .collect(),
        }
    }

    pub(crate) fn to_goal(&self) -> GoalKeyframe {
        GoalKeyframe {
            parts: self
                .parts
                .iter()
                .map(|p| PartKeyframe {
                    translation: v3(p.translation),
                    rotation: v3(p.rotation),
                    angle: p.angle,
                })
                .collect(),
        }
    }
}

/// Serialized scene. `header` is informational and ignored on load.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    header: Option<serde_json::Value>,
    parts: Vec<PartFile>,
    gravity: [f64; 3],
    #[serde(default)]
    ground_z: f64,
    #[serde(default)]
    goal_keyframes: Vec<GoalFile>,
}

impl SceneFile {
    fn from_scene(scene: &Scene, header: Option<serde_json::Value>) -> Self {
        SceneFile {
            header,
            parts: scene
                .parts
                .iter()
                .map(|p| PartFile {
                    name: p.name.clone(),
                    vertices: p.mesh.vertices().iter().map(a3).collect(),
                    triangles: p.mesh.triangles().to_vec(),
                    canonical_rotation: mat_to_rows(&p.canonical_orientation),
                    revolute_axis: p
                        .revolute_axis
                        .map(|a| AxisFile { origin: a3(&a.origin), direction: a3(&a.direction) }),
                })
                .collect(),
            gravity: a3(&scene.gravity),
            ground_z: scene.ground_z,
            goal_keyframes: scene.goals.iter().map(GoalFile::from_goal).collect(),
        }
    }

    fn into_scene(self) -> Result<Scene> {
        let parts = self
            .parts
            .into_iter()
            .map(|p| {
                let mesh = TriMesh::new(p.vertices.into_iter().map(v3).collect(), p.triangles)
                    .map_err(|e| Error::invalid(format!("part '{}': {e}", p.name)))?;
                let axis = p
                    .revolute_axis
                    .map(|a| RevoluteAxis::new(v3(a.origin), v3(a.direction)))
                    .transpose()?;
                Part::new(p.name, mesh, rows_to_mat(&p.canonical_rotation), axis)
            })
            .collect::<Result<Vec<_>>>()?;
        Scene::new(
            parts,
            v3(self.gravity),
            self.ground_z,
            self.goal_keyframes.iter().map(GoalFile::to_goal).collect(),
        )
    }
}

/// Serializes a scene with an informational header object.
pub fn scene_to_json(scene: &Scene, header: Option<serde_json::Value>) -> serde_json::Value {
    serde_json::to_value(SceneFile::from_scene(scene, header)).expect("scene serializes")
}

/// Parses goal keyframes from a JSON array of `{ "parts": [...] }` objects.
pub fn goals_from_json(value: &serde_json::Value) -> Result<Vec<GoalKeyframe>> {
    let files: Vec<GoalFile> = serde_json::from_value(value.clone())?;
    Ok(files.iter().map(GoalFile::to_goal).collect())
}

pub fn goals_to_json(goals: &[GoalKeyframe]) -> serde_json::Value {
    serde_json::to_value(goals.iter().map(GoalFile::from_goal).collect::<Vec<_>>())
        .expect("goals serialize")
}
