//! A 51-parameter kinematic hand with capsule-sampled surface vertices.
//!
//! # Layout
//!
//! A pose holds wrist translation (indices 0..3), wrist rotation as an
//! axis-angle vector (3..6) and 45 joint angles (6..51). Joint angles are
//! finger-major: finger `f` (thumb, index, middle, ring, little), joint `j`
//! (mcp, pip, dip) and axis `a` (x, y, z) live at `6 + 9f + 3j + a`. Each joint
//! rotates its child by `Rx(q_x) Ry(q_y) Rz(q_z)` in the parent's frame.
//!
//! # Rest pose
//!
//! With every parameter zero the hand is flat: the wrist sits at the origin,
//! the palm faces `-z` and finger `f` points along `(sin φ_f, cos φ_f, 0)`
//! with fan angles φ of 45°, 15°, 0°, -12° and -24°. Flexing a finger is a
//! negative rotation about its local x axis. With the default
//! [`HandConfig`] the index fingertip rests at
//! `(0.047622704, 0.177730352, 0)`:
//!
//! ```
//! use cams_core::hand::{forward_kinematics, HandConfig, HandPose};
//! let joints = forward_kinematics(&HandPose::rest(), &HandConfig::default());
//! let tip = joints.fingers[1].tip;
//! assert!((tip.x - 0.047622704).abs() < 1e-9 && (tip.y - 0.177730352).abs() < 1e-9);
//! ```
//!
//! # Surface
//!
//! Each bone carries `n` rings of `n` points on a capsule of the bone's
//! radius (`n = vertices_per_segment`), and every distal bone adds a cap
//! vertex one radius past the fingertip. Finger `f` owns its mcp→pip,
//! pip→dip and dip→tip bones (`3n² + 1` vertices); the palm group owns the
//! five root→mcp bones (`5n²`).

use nalgebra::{DMatrix, Rotation3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{Mat3, Vec3};

pub const NUM_FINGERS: usize = 5;
pub const POSE_DIM: usize = 51;
pub const NUM_JOINTS: usize = 21;
pub const FINGER_NAMES: [&str; NUM_FINGERS] = ["thumb", "index", "middle", "ring", "little"];

/// Fan angle of each finger in the rest pose, radians.
pub const REST_FAN_ANGLES: [f64; NUM_FINGERS] = [
    45.0 * std::f64::consts::PI / 180.0,
    15.0 * std::f64::consts::PI / 180.0,
    0.0,
    -12.0 * std::f64::consts::PI / 180.0,
    -24.0 * std::f64::consts::PI / 180.0,
];

/// Bone lengths and capsule radii, per finger and segment
/// (root→mcp, mcp→pip, pip→dip, dip→tip), in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HandConfig {
    pub bone_lengths: [[f64; 4]; NUM_FINGERS],
    pub bone_radii: [[f64; 4]; NUM_FINGERS],
    pub vertices_per_segment: usize,
}

impl Default for HandConfig {
    fn default() -> Self {
        HandConfig {
            bone_lengths: [
                [0.040, 0.040, 0.032, 0.028],
                [0.090, 0.045, 0.027, 0.022],
                [0.090, 0.050, 0.031, 0.024],
                [0.085, 0.047, 0.029, 0.023],
                [0.080, 0.037, 0.022, 0.021],
            ],
            bone_radii: [
                [0.012, 0.010, 0.009, 0.008],
                [0.011, 0.009, 0.008, 0.007],
                [0.011, 0.009, 0.008, 0.007],
                [0.011, 0.009, 0.008, 0.007],
                [0.010, 0.008, 0.007, 0.0065],
            ],
            vertices_per_segment: 6,
        }
    }
}

impl HandConfig {
    pub fn validate(&self) -> Result<()> {
        let all = self.bone_lengths.iter().chain(&self.bone_radii).flatten();
        if all.clone().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("hand bone lengths and radii must be positive"));
        }
        if self.vertices_per_segment < 4 {
            return Err(Error::invalid("vertices_per_segment must be at least 4"));
        }
        Ok(())
    }

    /// Every length and radius multiplied by `s`.
    pub fn scaled(&self, s: f64) -> HandConfig {
        let m = |a: [[f64; 4]; NUM_FINGERS]| a.map(|r| r.map(|v| v * s));
        HandConfig {
            bone_lengths: m(self.bone_lengths),
            bone_radii: m(self.bone_radii),
            vertices_per_segment: self.vertices_per_segment,
        }
    }

    /// Vertex count of one finger group.
    pub fn finger_vertex_count(&self) -> usize {
        3 * self.vertices_per_segment * self.vertices_per_segment + 1
    }

    pub fn palm_vertex_count(&self) -> usize {
        NUM_FINGERS * self.vertices_per_segment * self.vertices_per_segment
    }

    pub fn total_vertex_count(&self) -> usize {
        NUM_FINGERS * self.finger_vertex_count() + self.palm_vertex_count()
    }
}

/// Hand pose parameters. Joint angles are clamped to `[-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandPose {
    pub wrist_translation: Vec3,
    pub wrist_rotation: Vec3,
    joint_angles: [f64; 45],
}

impl Default for HandPose {
    fn default() -> Self {
        HandPose::rest()
    }
}

impl HandPose {
    pub fn rest() -> Self {
        HandPose { wrist_translation: Vec3::zeros(), wrist_rotation: Vec3::zeros(), joint_angles: [0.0; 45] }
    }

    pub fn new(wrist_translation: Vec3, wrist_rotation: Vec3, joint_angles: [f64; 45]) -> Self {
        let pi = std::f64::consts::PI;
        HandPose { wrist_translation, wrist_rotation, joint_angles: joint_angles.map(|a| a.clamp(-pi, pi)) }
    }

    /// Parses a flat 51-vector.
    pub fn from_slice(x: &[f64]) -> Result<Self> {
        if x.len() != POSE_DIM {
            return Err(Error::ShapeMismatch(format!("hand pose needs {POSE_DIM} values, got {}", x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("hand pose has non-finite values"));
        }
        let mut angles = [0.0; 45];
        angles.copy_from_slice(&x[6..]);
        Ok(HandPose::new(Vec3::new(x[0], x[1], x[2]), Vec3::new(x[3], x[4], x[5]), angles))
    }

    pub fn to_array(&self) -> [f64; POSE_DIM] {
        let mut out = [0.0; POSE_DIM];
        out[..3].copy_from_slice(self.wrist_translation.as_slice());
        out[3..6].copy_from_slice(self.wrist_rotation.as_slice());
        out[6..].copy_from_slice(&self.joint_angles);
        out
    }

    pub fn joint_angles(&self) -> &[f64; 45] {
        &self.joint_angles
    }

    pub fn joint_angle(&self, finger: usize, joint: usize, axis: usize) -> f64 {
        self.joint_angles[9 * finger + 3 * joint + axis]
    }

    pub fn set_joint_angle(&mut self, finger: usize, joint: usize, axis: usize, value: f64) {
        let pi = std::f64::consts::PI;
        self.joint_angles[9 * finger + 3 * joint + axis] = value.clamp(-pi, pi);
    }
}

/// Index of a pose parameter for finger joint angles.
pub fn joint_param_index(finger: usize, joint: usize, axis: usize) -> usize {
    6 + 9 * finger + 3 * joint + axis
}

/// Joint positions of one finger, world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerJoints {
    pub mcp: Vec3,
    pub pip: Vec3,
    pub dip: Vec3,
    pub tip: Vec3,
}

/// All 21 joint positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HandJoints {
    pub root: Vec3,
    pub fingers: [FingerJoints; NUM_FINGERS],
}

impl HandJoints {
    /// Joints in the flat order root, then mcp, pip, dip, tip per finger.
    pub fn to_vec(&self) -> Vec<Vec3> {
        let mut out = Vec::with_capacity(NUM_JOINTS);
        out.push(self.root);
        for f in &self.fingers {
            out.extend([f.mcp, f.pip, f.dip, f.tip]);
        }
        out
    }
}

/// Surface vertices grouped by owner.
#[derive(Debug, Clone, PartialEq)]
pub struct HandSurface {
    pub fingers: [Vec<Vec3>; NUM_FINGERS],
    pub palm: Vec<Vec3>,
}

impl HandSurface {
    pub fn all(&self) -> impl Iterator<Item = &Vec3> {
        self.fingers.iter().flatten().chain(&self.palm)
    }
}

/// Body-frame sample on one bone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub finger: usize,
    /// 0 is the root→mcp bone, 3 the dip→tip bone.
    pub segment: usize,
    pub local: Vec3,
}

/// Which rigid body a point rides on: `finger` plus the number of finger
/// joints between it and the wrist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PointOwner {
    pub finger: usize,
    pub level: usize,
}

/// Owner of flat joint index `j` (see [`HandJoints::to_vec`]).
pub fn joint_owner(j: usize) -> PointOwner {
    if j == 0 {
        return PointOwner { finger: 0, level: 0 };
    }
    let finger = (j - 1) / 4;
    let m = (j - 1) % 4;
    PointOwner { finger, level: m }
}

/// A hand configuration with its surface sampling precomputed.
#[derive(Debug, Clone)]
pub struct HandModel {
    config: HandConfig,
    samples: Vec<SurfaceSample>,
}

#[derive(Debug, Clone, Copy)]
struct FingerState {
    seg_origin: [Vec3; 4],
    seg_rot: [Mat3; 4],
    joints: [Vec3; 4],
    dof_axes: [[Vec3; 3]; 3],
}

/// Forward-kinematics results for one pose, reused for vertices and gradients.
#[derive(Debug, Clone)]
pub struct HandState {
    wrist_translation: Vec3,
    wrist_axes: [Vec3; 3],
    fingers: [FingerState; NUM_FINGERS],
}

fn rx(a: f64) -> Mat3 {
    *Rotation3::from_axis_angle(&Vec3::x_axis(), a).matrix()
}
fn ry(a: f64) -> Mat3 {
    *Rotation3::from_axis_angle(&Vec3::y_axis(), a).matrix()
}
fn rz(a: f64) -> Mat3 {
    *Rotation3::from_axis_angle(&Vec3::z_axis(), a).matrix()
}

/// Left Jacobian of the rotation exponential: `d exp(v) = [J(v) dv]× exp(v)`.
fn so3_left_jacobian(v: &Vec3) -> Mat3 {
    let theta2 = v.norm_squared();
    let k = v.cross_matrix();
    let (a, b) = if theta2 < 1e-8 {
        (0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0)
    } else {
        let theta = theta2.sqrt();
        ((1.0 - theta.cos()) / theta2, (theta - theta.sin()) / (theta2 * theta))
    };
    Mat3::identity() + k * a + k * k * b
}

impl HandModel {
    pub fn new(config: HandConfig) -> Result<Self> {
        config.validate()?;
        let n = config.vertices_per_segment;
        let mut samples = Vec::with_capacity(config.total_vertex_count());
        let ring = |finger: usize, segment: usize, samples: &mut Vec<SurfaceSample>| {
            let len = config.bone_lengths[finger][segment];
            let rho = config.bone_radii[finger][segment];
            for r in 0..n {
                let y = len * (r as f64 + 0.5) / n as f64;
                for k in 0..n {
                    let psi = std::f64::consts::TAU * k as f64 / n as f64;
                    samples.push(SurfaceSample {
                        finger,
                        segment,
                        local: Vec3::new(rho * psi.cos(), y, rho * psi.sin()),
                    });
                }
            }
        };
        for f in 0..NUM_FINGERS {
            for s in 1..4 {
                ring(f, s, &mut samples);
            }
            let cap = config.bone_lengths[f][3] + config.bone_radii[f][3];
            samples.push(SurfaceSample { finger: f, segment: 3, local: Vec3::new(0.0, cap, 0.0) });
        }
        for f in 0..NUM_FINGERS {
            ring(f, 0, &mut samples);
        }
        Ok(HandModel { config, samples })
    }

    pub fn config(&self) -> &HandConfig {
        &self.config
    }

    /// Body-frame samples in surface order: finger groups, then the palm.
    pub fn samples(&self) -> &[SurfaceSample] {
        &self.samples
    }

    pub fn vertex_count(&self) -> usize {
        self.samples.len()
    }

    /// Range of flat vertex indices owned by finger `f`.
    pub fn finger_range(&self, f: usize) -> std::ops::Range<usize> {
        let n = self.config.finger_vertex_count();
        f * n..(f + 1) * n
    }

    pub fn palm_range(&self) -> std::ops::Range<usize> {
        NUM_FINGERS * self.config.finger_vertex_count()..self.samples.len()
    }

    pub fn vertex_owner(&self, v: usize) -> PointOwner {
        let s = &self.samples[v];
        PointOwner { finger: s.finger, level: s.segment }
    }

    pub fn state(&self, pose: &HandPose) -> HandState {
        let wrist = Rotation3::new(pose.wrist_rotation);
        let rw = *wrist.matrix();
        let jl = so3_left_jacobian(&pose.wrist_rotation);
        let wrist_axes = [jl.column(0).into(), jl.column(1).into(), jl.column(2).into()];
        let root = pose.wrist_translation;
        let fingers = std::array::from_fn(|f| {
            let lengths = self.config.bone_lengths[f];
            let base = rw * rz(-REST_FAN_ANGLES[f]);
            let mut seg_rot = [base; 4];
            let mut seg_origin = [root; 4];
            let mut joints = [Vec3::zeros(); 4];
            let mut dof_axes = [[Vec3::zeros(); 3]; 3];
            joints[0] = root + base * Vec3::new(0.0, lengths[0], 0.0);
            for j in 0..3 {
                let parent = seg_rot[j];
                let (a, b, c) =
                    (pose.joint_angle(f, j, 0), pose.joint_angle(f, j, 1), pose.joint_angle(f, j, 2));
                let pa = parent * rx(a);
                let pab = pa * ry(b);
                dof_axes[j] = [parent.column(0).into(), pa.column(1).into(), pab.column(2).into()];
                seg_rot[j + 1] = pab * rz(c);
                seg_origin[j + 1] = joints[j];
                joints[j + 1] = joints[j] + seg_rot[j + 1] * Vec3::new(0.0, lengths[j + 1], 0.0);
            }
            FingerState { seg_origin, seg_rot, joints, dof_axes }
        });
        HandState { wrist_translation: root, wrist_axes, fingers }
    }

    pub fn joints(&self, state: &HandState) -> HandJoints {
        HandJoints {
            root: state.wrist_translation,
            fingers: std::array::from_fn(|f| {
                let j = state.fingers[f].joints;
                FingerJoints { mcp: j[0], pip: j[1], dip: j[2], tip: j[3] }
            }),
        }
    }

    pub fn vertex(&self, state: &HandState, v: usize) -> Vec3 {
        let s = &self.samples[v];
        let fs = &state.fingers[s.finger];
        fs.seg_origin[s.segment] + fs.seg_rot[s.segment] * s.local
    }

    /// All surface vertices in flat order.
    pub fn vertices(&self, state: &HandState) -> Vec<Vec3> {
        (0..self.samples.len()).map(|v| self.vertex(state, v)).collect()
    }

    pub fn surface(&self, state: &HandState) -> HandSurface {
        let all = self.vertices(state);
        HandSurface {
            fingers: std::array::from_fn(|f| all[self.finger_range(f)].to_vec()),
            palm: all[self.palm_range()].to_vec(),
        }
    }

    /// Derivative of a point riding on `owner` at world position `p`
    /// with respect to every pose parameter, as a 3×51 block.
    fn point_jacobian(&self, state: &HandState, owner: PointOwner, p: &Vec3, out: &mut DMatrix<f64>, row: usize) {
        for i in 0..3 {
            out[(row + i, i)] = 1.0;
        }
        let arm = p - state.wrist_translation;
        for (i, w) in state.wrist_axes.iter().enumerate() {
            let d = w.cross(&arm);
            for r in 0..3 {
                out[(row + r, 3 + i)] = d[r];
            }
        }
        let fs = &state.fingers[owner.finger];
        for j in 0..owner.level.min(3) {
            let o = fs.joints[j];
            for a in 0..3 {
                let d = fs.dof_axes[j][a].cross(&(p - o));
                let col = joint_param_index(owner.finger, j, a);
                for r in 0..3 {
                    out[(row + r, col)] = d[r];
                }
            }
        }
    }

    /// `3·21 × 51` Jacobian of the flat joint list.
    pub fn joint_jacobian(&self, state: &HandState) -> DMatrix<f64> {
        let joints = self.joints(state).to_vec();
        let mut out = DMatrix::zeros(3 * NUM_JOINTS, POSE_DIM);
        for (j, p) in joints.iter().enumerate() {
            self.point_jacobian(state, joint_owner(j), p, &mut out, 3 * j);
        }
        out
    }

    /// `3·V × 51` Jacobian of the flat surface vertex list.
    pub fn surface_jacobian(&self, state: &HandState) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(3 * self.samples.len(), POSE_DIM);
        for v in 0..self.samples.len() {
            let p = self.vertex(state, v);
            self.point_jacobian(state, self.vertex_owner(v), &p, &mut out, 3 * v);
        }
        out
    }
}

/// Accumulates `∂L/∂p` for points on the hand and converts the sum into
/// `∂L/∂pose` without forming a Jacobian.
///
/// Every parameter moves its points either by a translation or by a
/// rotation `ω × (p - o)`, so per rigid body only `Σ g` and `Σ p × g`
/// need to be kept.
#[derive(Debug, Clone, Default)]
pub struct PoseGradient {
    sum_g: [[Vec3; 4]; NUM_FINGERS],
    sum_pg: [[Vec3; 4]; NUM_FINGERS],
}

impl PoseGradient {
    pub fn new() -> Self {
        PoseGradient::default()
    }

    pub fn add(&mut self, owner: PointOwner, p: &Vec3, g: &Vec3) {
        self.sum_g[owner.finger][owner.level] += g;
        self.sum_pg[owner.finger][owner.level] += p.cross(g);
    }

    /// Adds the accumulated gradient into `out[0..51]`.
    pub fn finish(&self, state: &HandState, out: &mut [f64]) {
        let mut s_all = Vec3::zeros();
        let mut m_all = Vec3::zeros();
        for f in 0..NUM_FINGERS {
            for l in 0..4 {
                s_all += self.sum_g[f][l];
                m_all += self.sum_pg[f][l];
            }
        }
        for i in 0..3 {
            out[i] += s_all[i];
        }
        let moment = m_all - state.wrist_translation.cross(&s_all);
        for i in 0..3 {
            out[3 + i] += state.wrist_axes[i].dot(&moment);
        }
        for f in 0..NUM_FINGERS {
            let fs = &state.fingers[f];
            let mut s = Vec3::zeros();
            let mut m = Vec3::zeros();
            for j in (0..3).rev() {
                s += self.sum_g[f][j + 1];
                m += self.sum_pg[f][j + 1];
                let moment = m - fs.joints[j].cross(&s);
                for a in 0..3 {
                    out[joint_param_index(f, j, a)] += fs.dof_axes[j][a].dot(&moment);
                }
            }
        }
    }
}

pub fn forward_kinematics(pose: &HandPose, config: &HandConfig) -> HandJoints {
    let model = HandModel::new(config.clone()).expect("valid hand config");
    model.joints(&model.state(pose))
}

pub fn hand_surface(pose: &HandPose, config: &HandConfig) -> HandSurface {
    let model = HandModel::new(config.clone()).expect("valid hand config");
    model.surface(&model.state(pose))
}

/// Which point set a Jacobian is taken of.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianTarget {
    Joints,
    Surface,
}

pub fn pose_jacobian(pose: &HandPose, config: &HandConfig, target: JacobianTarget) -> DMatrix<f64> {
    let model = HandModel::new(config.clone()).expect("valid hand config");
    let state = model.state(pose);
    match target {
        JacobianTarget::Joints => model.joint_jacobian(&state),
        JacobianTarget::Surface => model.surface_jacobian(&state),
    }
}
