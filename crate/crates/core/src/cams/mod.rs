//! The contact representation: per-finger contact targets in normalized
//! part space, contact reference frames built from them, and finger
//! embeddings expressed in those frames.

mod extract;
mod file;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PartFrame;
use crate::hand::{HandJoints, HandPose, NUM_FINGERS};
use crate::scene::Part;
use crate::{Mat3, Vec3};

pub use extract::{extract_cams, CONTACT_DISTANCE, NEAR_DISTANCE, SAMPLES_PER_STAGE};
pub use file::CAMS_FORMAT_VERSION;

/// Normals within this angle of the target normal take part in matching.
pub const MATCH_CONE_DEG: f64 = 45.0;

/// Sinusoidal features of normalized stage time: `(sin 2^k π t, cos 2^k π t)`
/// for `k = 0..6`.
pub fn temporal_encoding(t_norm: f64) -> Result<[f64; 12]> {
    if !(0.0..=1.0).contains(&t_norm) {
        return Err(Error::invalid(format!("normalized time {t_norm} is outside [0, 1]")));
    }
    let mut out = [0.0; 12];
    for k in 0..6 {
        // reduce the phase to [0, 2) before scaling by π so integer phases are exact
        let phase = (t_norm * f64::from(1u32 << k)) % 2.0;
        let (s, c) = exact_sin_cos_pi(phase);
        out[2 * k] = s;
        out[2 * k + 1] = c;
    }
    Ok(out)
}

/// `sin(πx), cos(πx)` for `x ∈ [0, 2)`, exact at multiples of 1/2.
fn exact_sin_cos_pi(x: f64) -> (f64, f64) {
    if x * 2.0 == (x * 2.0).round() {
        return match (x * 2.0) as u32 {
            0 => (0.0, 1.0),
            1 => (1.0, 0.0),
            2 => (0.0, -1.0),
            _ => (-1.0, 0.0),
        };
    }
    let a = std::f64::consts::PI * x;
    (a.sin(), a.cos())
}

/// How finger joints are encoded relative to the reference frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingMode {
    /// Unit directions from the tip to the other joints.
    #[default]
    Directional,
    /// Frame-local positions of the other joints.
    Absolute,
}

/// Which canonicalizations are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Representation {
    /// Contact targets live in normalized part space; otherwise in part-local space.
    pub npcs: bool,
    /// Embeddings use frames at matched contact points; otherwise at the part origin.
    pub contact_frames: bool,
    pub embedding: EmbeddingMode,
}

impl Default for Representation {
    fn default() -> Self {
        Representation { npcs: true, contact_frames: true, embedding: EmbeddingMode::Directional }
    }
}

impl Representation {
    /// Labels naming every disabled canonicalization.
    pub fn ablation_labels(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.npcs {
            out.push("no-npcs");
        }
        if !self.contact_frames {
            out.push("no-contact-frames");
        }
        if self.embedding == EmbeddingMode::Absolute {
            out.push("absolute-embedding");
        }
        out
    }

    /// Map from target space (normalized or local) to part-local coordinates.
    pub fn target_frame(&self, part: &Part) -> PartFrame {
        if self.npcs {
            *part.npcs_frame()
        } else {
            PartFrame::identity()
        }
    }
}

/// Contact state of one finger against one part at one stage transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactTarget {
    pub finger: usize,
    pub transition: usize,
    pub part: usize,
    pub c: bool,
    /// Contact position in target space; zero when `c` is false.
    pub v: Vec3,
    /// Unit surface normal in target space; zero when `c` is false.
    pub n: Vec3,
}

impl ContactTarget {
    pub fn inactive(finger: usize, transition: usize, part: usize) -> Self {
        ContactTarget { finger, transition, part, c: false, v: Vec3::zeros(), n: Vec3::zeros() }
    }
}

/// A world frame at a contact point, rotated with its part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactRefFrame {
    pub origin: Vec3,
    pub rotation: Mat3,
}

impl ContactRefFrame {
    pub fn to_local(&self, p: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p - self.origin)
    }

    pub fn to_world(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.origin
    }
}

/// One finger in a reference frame: tip position plus four joints
/// (dip, pip, mcp, wrist root) as unit directions from the tip or, in
/// absolute mode, as positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerEmbedding {
    pub tip: Vec3,
    pub joints: [Vec3; 4],
}

impl FingerEmbedding {
    pub fn to_array(&self) -> [f64; 15] {
        let mut out = [0.0; 15];
        out[..3].copy_from_slice(self.tip.as_slice());
        for (q, j) in self.joints.iter().enumerate() {
            out[3 + 3 * q..6 + 3 * q].copy_from_slice(j.as_slice());
        }
        out
    }

    pub fn from_array(a: &[f64; 15]) -> Self {
        let v = |i: usize| Vec3::new(a[i], a[i + 1], a[i + 2]);
        FingerEmbedding { tip: v(0), joints: [v(3), v(6), v(9), v(12)] }
    }
}

/// Embeds finger `finger` of `joints` in `frame`.
pub fn compute_finger_embedding(
    joints: &HandJoints,
    finger: usize,
    frame: &ContactRefFrame,
    mode: EmbeddingMode,
) -> Result<FingerEmbedding> {
    if finger >= NUM_FINGERS {
        return Err(Error::invalid(format!("finger index {finger} out of range")));
    }
    let f = joints.fingers[finger];
    let tip = frame.to_local(&f.tip);
    let others = [f.dip, f.pip, f.mcp, joints.root].map(|p| frame.to_local(&p));
    let joints = match mode {
        EmbeddingMode::Absolute => others,
        EmbeddingMode::Directional => {
            let mut out = [Vec3::zeros(); 4];
            for (o, p) in out.iter_mut().zip(&others) {
                let d = p - tip;
                let len = d.norm();
                if !(len > 1e-12) {
                    return Err(Error::Degenerate("finger joint coincides with the tip".into()));
                }
                *o = d / len;
            }
            out
        }
    };
    Ok(FingerEmbedding { tip, joints })
}

/// World-space targets for one finger at one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldTargets {
    pub tip: Vec3,
    /// Unit directions (directional mode) or positions (absolute mode)
    /// for dip, pip, mcp and root.
    pub joints: [Vec3; 4],
}

/// Blends the stage-start and stage-end embeddings into world targets.
pub fn embedding_world_targets(
    f1: &FingerEmbedding,
    f2: &FingerEmbedding,
    t_norm: f64,
    frame_start: &ContactRefFrame,
    frame_end: &ContactRefFrame,
    mode: EmbeddingMode,
) -> Result<WorldTargets> {
    let (wa, wb) = (1.0 - t_norm, t_norm);
    let tip = frame_start.to_world(&f1.tip) * wa + frame_end.to_world(&f2.tip) * wb;
    let mut joints = [Vec3::zeros(); 4];
    for (q, joint) in joints.iter_mut().enumerate() {
        *joint = match mode {
            EmbeddingMode::Absolute => {
                frame_start.to_world(&f1.joints[q]) * wa + frame_end.to_world(&f2.joints[q]) * wb
            }
            EmbeddingMode::Directional => {
                let d = frame_start.rotation * f1.joints[q] * wa + frame_end.rotation * f2.joints[q] * wb;
                let len = d.norm();
                if len < 1e-6 {
                    return Err(Error::Degenerate("blended directions cancel out".into()));
                }
                d / len
            }
        };
    }
    Ok(WorldTargets { tip, joints })
}

/// Finds the contact point on `part` for a target given in target space
/// (`frame` maps target space to part-local coordinates). Returns the
/// point in part-local coordinates.
///
/// Triangles whose normal lies within 45° of the target normal are searched
/// first; if none qualify, the whole surface is.
pub fn match_contact_local(part: &Part, frame: &PartFrame, v: &Vec3, n: &Vec3) -> Result<Vec3> {
    if ((n.norm() - 1.0).abs()) > 1e-6 {
        return Err(Error::invalid("contact normal must have unit length"));
    }
    let target = frame.to_outer(v);
    let normal = frame.normal_to_outer(n);
    let cos_limit = MATCH_CONE_DEG.to_radians().cos() - 1e-12;
    let mesh = &part.mesh;
    let subset: Vec<usize> =
        (0..mesh.triangles().len()).filter(|&t| mesh.face_normal(t).dot(&normal) >= cos_limit).collect();
    Ok(match mesh.nearest_in_subset(&target, &subset) {
        Some(hit) => hit.point,
        None => mesh.closest_point(&target).0,
    })
}

/// Contact reference frame at the matched point, posed with the part.
pub fn match_contact_point(
    part: &Part,
    frame: &PartFrame,
    pose: &PartFrame,
    v: &Vec3,
    n: &Vec3,
) -> Result<ContactRefFrame> {
    let local = match_contact_local(part, frame, v, n)?;
    Ok(ContactRefFrame {
        origin: pose.to_outer(&local),
        rotation: (pose.rotation * frame.rotation).into_inner(),
    })
}

/// Reference frame for a tuple at a posed part. `matched` is the
/// part-local contact point when the target is active.
pub fn reference_frame(
    part: &Part,
    pose: &PartFrame,
    matched: Option<&Vec3>,
    repr: &Representation,
) -> ContactRefFrame {
    let frame = repr.target_frame(part);
    let rotation = (pose.rotation * frame.rotation).into_inner();
    let local = if !repr.contact_frames {
        frame.to_outer(&Vec3::zeros())
    } else {
        match matched {
            Some(p) => *p,
            None => part.center(),
        }
    };
    ContactRefFrame { origin: pose.to_outer(&local), rotation }
}

/// Per-frame state of one (finger, part) tuple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TupleState {
    pub f_c: bool,
    pub f_n: bool,
    /// Embeddings against the stage-start and stage-end targets, present iff `f_n`.
    pub embeddings: Option<(FingerEmbedding, FingerEmbedding)>,
}

/// All tuples at one frame, indexed `finger * parts + part`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCams {
    pub frame: usize,
    pub stage: usize,
    pub t_norm: f64,
    pub tuples: Vec<TupleState>,
}

/// A full representation of one manipulation.
#[derive(Debug, Clone, PartialEq)]
pub struct CamsSequence {
    pub part_names: Vec<String>,
    pub representation: Representation,
    /// `M + 1` frame indices; stage `j` spans `[b_j, b_{j+1}]`.
    pub stage_boundaries: Vec<usize>,
    pub initial_pose: HandPose,
    /// `targets[j][finger * parts + part]` for transitions `j = 0..=M`.
    pub targets: Vec<Vec<ContactTarget>>,
    pub frames: Vec<FrameCams>,
    /// Ten evenly spaced frames per stage.
    pub samples: Vec<Vec<FrameCams>>,
}

impl CamsSequence {
    pub fn stage_count(&self) -> usize {
        self.stage_boundaries.len() - 1
    }

    pub fn part_count(&self) -> usize {
        self.part_names.len()
    }

    pub fn tuple_index(&self, finger: usize, part: usize) -> usize {
        finger * self.part_count() + part
    }

    pub fn target(&self, transition: usize, finger: usize, part: usize) -> &ContactTarget {
        &self.targets[transition][self.tuple_index(finger, part)]
    }

    /// Contact points of all active targets in part-local coordinates,
    /// indexed like `targets`.
    pub fn matched_points(&self, parts: &[Part]) -> Result<Vec<Vec<Option<Vec3>>>> {
        if parts.len() != self.part_count() {
            return Err(Error::ShapeMismatch(format!(
                "representation has {} parts, scene has {}",
                self.part_count(),
                parts.len()
            )));
        }
        self.targets
            .iter()
            .map(|row| {
                row.iter()
                    .map(|t| {
                        if !t.c {
                            return Ok(None);
                        }
                        let part = &parts[t.part];
                        match_contact_local(part, &self.representation.target_frame(part), &t.v, &t.n).map(Some)
                    })
                    .collect()
            })
            .collect()
    }
}

/// Stage index and normalized time of frame `t` given stage boundaries.
pub fn stage_of_frame(boundaries: &[usize], t: usize) -> (usize, f64) {
    let m = boundaries.len() - 1;
    let j = (0..m).rfind(|&j| boundaries[j] <= t).unwrap_or(0);
    let (a, b) = (boundaries[j], boundaries[j + 1]);
    (j, ((t - a) as f64 / (b - a) as f64).min(1.0))
}

/// Checks boundaries are strictly increasing from 0 to `frames - 1`.
pub fn validate_stage_boundaries(boundaries: &[usize], frames: usize) -> Result<()> {
    if boundaries.len() < 2 {
        return Err(Error::invalid("need at least two stage boundaries"));
    }
    if boundaries[0] != 0 || *boundaries.last().unwrap() + 1 != frames {
        return Err(Error::invalid(format!(
            "stage boundaries must start at frame 0 and end at frame {}",
            frames.saturating_sub(1)
        )));
    }
    if boundaries.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("stage boundaries must be strictly increasing"));
    }
    Ok(())
}
