//! Physical plausibility of a hand-object motion: whether contact forces can
//! explain the object's movement, whether contacts can turn a hinge, and how
//! deep the hand sinks into the object.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Inertia, PartFrame, RevoluteAxis, TriMesh};
use crate::hand::{HandModel, HandPose};
use crate::motion::Motion;
use crate::numopt::nnls;
use crate::scene::Scene;
use crate::{Mat3, Vec3};

/// Friction cone approximation: one basis per tangent direction.
pub const FRICTION_BASES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricThresholds {
    /// Hand-to-surface distance below which a contact exists, meters.
    pub contact_distance: f64,
    pub friction: f64,
    /// Wrench residual below which a frame is consistent.
    pub residual: f64,
    /// Inertia-normalized hinge torque a contact must exceed.
    pub articulation: f64,
    /// Height band above the lowest point and the ground, meters.
    pub support_tolerance: f64,
    pub max_support_points: usize,
    /// Penetrations shallower than this are ignored, meters.
    pub penetration_depth: f64,
}

impl Default for MetricThresholds {
    fn default() -> Self {
        MetricThresholds {
            contact_distance: 0.002,
            friction: 0.35,
            residual: 0.01,
            articulation: 0.3,
            support_tolerance: 0.005,
            max_support_points: 8,
            penetration_depth: 0.005,
        }
    }
}

impl MetricThresholds {
    pub fn validate(&self) -> Result<()> {
        let v = [
            self.contact_distance,
            self.friction,
            self.residual,
            self.support_tolerance,
            self.penetration_depth,
        ];
        if v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || !self.articulation.is_finite() {
            return Err(Error::invalid("metric thresholds must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ContactSource {
    Finger(usize),
    Palm,
    Ground,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactPoint {
    /// World position on the part surface.
    pub position: Vec3,
    /// Outward surface normal of the part, world frame. Ground support
    /// points carry `-z` so that the pushing force points up.
    pub normal: Vec3,
    pub part: usize,
    pub source: ContactSource,
    pub distance: f64,
}

/// Hand surface points in world coordinates with their owners.
#[derive(Debug, Clone)]
pub struct HandPoints {
    pub points: Vec<Vec3>,
    pub sources: Vec<ContactSource>,
}

impl HandPoints {
    pub fn new(model: &HandModel, pose: &HandPose) -> Self {
        let points = model.vertices(&model.state(pose));
        let palm = model.palm_range();
        let sources = (0..points.len())
            .map(|v| if palm.contains(&v) { ContactSource::Palm } else { ContactSource::Finger(model.vertex_owner(v).finger) })
            .collect();
        HandPoints { points, sources }
    }
}

fn local_signed_distance(mesh: &TriMesh, bounds: &(Vec3, Vec3), q: &Vec3) -> (Vec3, usize, f64) {
    let (point, tri, d2) = mesh.closest_point(q);
    let d = d2.sqrt();
    let inside_box = (0..3).all(|i| q[i] >= bounds.0[i] && q[i] <= bounds.1[i]);
    let signed = if d > 0.0 && inside_box && mesh.contains(q) { -d } else { d };
    (point, tri, signed)
}

/// Hand points within `threshold` of the surface of `mesh` posed at `pose`,
/// including points inside it. Keeps the closest point per (source, triangle).
pub fn detect_contacts(hand: &HandPoints, mesh: &TriMesh, pose: &PartFrame, part: usize, threshold: f64) -> Vec<ContactPoint> {
    let inv = pose.inverse_rigid();
    let bounds = mesh.aabb();
    let mut best: Vec<((ContactSource, usize), ContactPoint)> = Vec::new();
    for (q, src) in hand.points.iter().zip(&hand.sources) {
        let local = inv.to_outer(q);
        let (point, tri, signed) = local_signed_distance(mesh, &bounds, &local);
        if signed >= threshold {
            continue;
        }
        let c = ContactPoint {
            position: pose.to_outer(&point),
            normal: pose.normal_to_outer(&mesh.face_normal(tri)),
            part,
            source: *src,
            distance: signed,
        };
        match best.iter_mut().find(|(key, _)| *key == (*src, tri)) {
            Some((_, prev)) if signed.abs() < prev.distance.abs() => *prev = c,
            Some(_) => {}
            None => best.push(((*src, tri), c)),
        }
    }
    best.into_iter().map(|(_, c)| c).collect()
}

/// Two unit vectors completing `n` to an orthonormal frame.
fn tangents(n: &Vec3) -> (Vec3, Vec3) {
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let t1 = n.cross(&helper).normalize();
    (t1, n.cross(&t1))
}

/// Unit force directions spanning the friction pyramid at a contact with
/// outward normal `n`, each pushing into the surface.
pub fn friction_pyramid(n: &Vec3, mu: f64) -> [Vec3; FRICTION_BASES] {
    let (t1, t2) = tangents(n);
    [t1, -t1, t2, -t2].map(|t| (-n + t * mu).normalize())
}

/// Ground support points of a posed part: when its lowest vertex lies within
/// `tolerance` of `ground_z`, up to `max_points` extreme vertices among those
/// within `tolerance` of the lowest one, at ground contact with normal `-z`.
pub fn support_points(mesh: &TriMesh, pose: &PartFrame, part: usize, ground_z: f64, tolerance: f64, max_points: usize) -> Vec<ContactPoint> {
    let world: Vec<Vec3> = mesh.vertices().iter().map(|v| pose.to_outer(v)).collect();
    let lowest = world.iter().map(|v| v.z).fold(f64::INFINITY, f64::min);
    if (lowest - ground_z).abs() > tolerance {
        return Vec::new();
    }
    let bottom: Vec<&Vec3> = world.iter().filter(|v| v.z <= lowest + tolerance).collect();
    let mut chosen: Vec<&Vec3> = Vec::new();
    if bottom.len() <= max_points {
        chosen = bottom;
    } else {
        let dirs = [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
        for (dx, dy) in dirs.iter().take(max_points) {
            let pick = bottom
                .iter()
                .copied()
                .fold(None::<&Vec3>, |acc, v| match acc {
                    Some(a) if a.x * dx + a.y * dy >= v.x * dx + v.y * dy => Some(a),
                    _ => Some(v),
                })
                .expect("bottom set is not empty");
            if !chosen.iter().any(|c| std::ptr::eq(*c, pick)) {
                chosen.push(pick);
            }
        }
    }
    chosen
        .into_iter()
        .map(|v| ContactPoint {
            position: *v,
            normal: -Vec3::z(),
            part,
            source: ContactSource::Ground,
            distance: v.z - ground_z,
        })
        .collect()
}

/// Central-difference momentum rates `(Ṗ, L̇)` of a part with unit mass.
///
/// Velocities use central differences inside the track and one-sided ones
/// at the ends; accelerations difference the velocities the same way.
/// Angular velocity is the skew part of `Ṙ Rᵀ`.
pub fn rigid_dynamics(track: &[PartFrame], inertia: &Inertia, dt: f64) -> Result<Vec<(Vec3, Vec3)>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("time step must be positive"));
    }
    let n = track.len();
    if n < 3 {
        return Err(Error::invalid("rigid dynamics needs at least 3 frames"));
    }
    let com: Vec<Vec3> = track.iter().map(|p| p.to_outer(&inertia.com)).collect();
    let rot: Vec<Mat3> = track.iter().map(|p| *p.rotation.matrix()).collect();
    let diff = |t: usize| -> (usize, usize, f64) {
        if t == 0 {
            (1, 0, dt)
        } else if t == n - 1 {
            (n - 1, n - 2, dt)
        } else {
            (t + 1, t - 1, 2.0 * dt)
        }
    };
    let vel: Vec<Vec3> = (0..n).map(|t| {
        let (a, b, h) = diff(t);
        (com[a] - com[b]) / h
    }).collect();
    let omega: Vec<Vec3> = (0..n)
        .map(|t| {
            let (a, b, h) = diff(t);
            let w = (rot[a] - rot[b]) / h * rot[t].transpose();
            let s = (w - w.transpose()) * 0.5;
            Vec3::new(s[(2, 1)], s[(0, 2)], s[(1, 0)])
        })
        .collect();
    Ok((0..n)
        .map(|t| {
            let (a, b, h) = diff(t);
            let acc = (vel[a] - vel[b]) / h;
            let alpha = (omega[a] - omega[b]) / h;
            let i = rot[t] * inertia.i0 * rot[t].transpose();
            let w = omega[t].cross_matrix();
            let i_dot = w * i - i * w;
            (acc * inertia.mass, i_dot * omega[t] + i * alpha)
        })
        .collect())
}

/// What a column of a [`WrenchSystem`] models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Contact { part: usize, contact: usize },
    Support { part: usize },
    /// Equal and opposite force on the articulated part and its partner.
    Hinge { part: usize, partner: usize },
}

/// Linear model `A x + b ≈ c` of all parts of one frame, six rows per part
/// (force, then torque about the part's center of mass).
#[derive(Debug, Clone)]
pub struct WrenchSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub columns: Vec<BasisKind>,
}

/// Per-part state of one frame needed to assemble the wrench system.
#[derive(Debug, Clone)]
pub struct PartWrenchInput {
    pub com: Vec3,
    pub mass: f64,
    /// `(Ṗ, L̇)` of the part.
    pub momentum_rate: (Vec3, Vec3),
    pub contacts: Vec<ContactPoint>,
    pub supports: Vec<ContactPoint>,
}

/// A hinge shared by `part` and `partner`, in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldHinge {
    pub part: usize,
    pub partner: usize,
    pub axis: RevoluteAxis,
}

pub fn build_wrench_system(parts: &[PartWrenchInput], hinges: &[WorldHinge], gravity: &Vec3, mu: f64) -> WrenchSystem {
    let rows = 6 * parts.len();
    let mut cols: Vec<(BasisKind, DVector<f64>)> = Vec::new();
    let column = |entries: &[(usize, Vec3, Vec3)]| {
        let mut c = DVector::zeros(rows);
        for (k, pos, f) in entries {
            let tau = (pos - parts[*k].com).cross(f);
            for i in 0..3 {
                c[6 * k + i] += f[i];
                c[6 * k + 3 + i] += tau[i];
            }
        }
        c
    };
    for (k, p) in parts.iter().enumerate() {
        for (ci, contact) in p.contacts.iter().enumerate() {
            for f in friction_pyramid(&contact.normal, mu) {
                cols.push((BasisKind::Contact { part: k, contact: ci }, column(&[(k, contact.position, f)])));
            }
        }
        for s in &p.supports {
            cols.push((BasisKind::Support { part: k }, column(&[(k, s.position, -s.normal)])));
        }
    }
    for h in hinges {
        let (e1, e2) = tangents(&h.axis.direction);
        for f in [e1, -e1, e2, -e2] {
            let col = column(&[(h.part, h.axis.origin, f), (h.partner, h.axis.origin, -f)]);
            cols.push((BasisKind::Hinge { part: h.part, partner: h.partner }, col));
        }
    }
    let mut a = DMatrix::zeros(rows, cols.len());
    for (j, (_, c)) in cols.iter().enumerate() {
        a.set_column(j, c);
    }
    let mut b = DVector::zeros(rows);
    let mut c = DVector::zeros(rows);
    for (k, p) in parts.iter().enumerate() {
        let g = gravity * p.mass;
        for i in 0..3 {
            b[6 * k + i] = g[i];
            c[6 * k + i] = p.momentum_rate.0[i];
            c[6 * k + 3 + i] = p.momentum_rate.1[i];
        }
    }
    WrenchSystem { a, b, c, columns: cols.into_iter().map(|(k, _)| k).collect() }
}

impl WrenchSystem {
    /// Non-negative least-squares solution and the residual norm of each
    /// part's six rows at that solution.
    pub fn solve(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let sol = nnls(&self.a, &self.b, &self.c)?;
        let x = DVector::from_column_slice(&sol.x);
        let r = &self.a * x + &self.b - &self.c;
        let per_part = (0..r.len() / 6).map(|k| r.rows(6 * k, 6).norm()).collect();
        Ok((sol.x, per_part))
    }
}

/// Hinges of a posed frame: each articulated part paired with the first
/// other part, each unordered pair once.
fn world_hinges(scene: &Scene, poses: &[PartFrame]) -> Vec<WorldHinge> {
    let mut out: Vec<WorldHinge> = Vec::new();
    if scene.parts.len() < 2 {
        return out;
    }
    for (k, part) in scene.parts.iter().enumerate() {
        let Some(axis) = part.revolute_axis else { continue };
        let partner = if k == 0 { 1 } else { 0 };
        if out.iter().any(|h| h.part == partner && h.partner == k) {
            continue;
        }
        let world = RevoluteAxis {
            origin: poses[k].to_outer(&axis.origin),
            direction: poses[k].rotation * axis.direction,
        };
        out.push(WorldHinge { part: k, partner, axis: world });
    }
    out
}

/// Largest inertia-normalized torque about the axis over the candidate
/// contacts, each pushing along its inward normal. `None` without contacts.
pub fn articulation_torque(contacts: &[ContactPoint], axis: &RevoluteAxis, i_axis: f64) -> Option<f64> {
    contacts
        .iter()
        .map(|c| (c.position - axis.origin).cross(&(-c.normal)).dot(&axis.direction) / i_axis)
        .fold(None, |acc: Option<f64>, t| Some(acc.map_or(t, |a| a.max(t))))
}

/// Number of hand points deeper than `depth` inside any posed part.
pub fn penetrating_points(points: &[Vec3], scene: &Scene, poses: &[PartFrame], depth: f64) -> usize {
    let meshes: Vec<(PartFrame, (Vec3, Vec3))> =
        scene.parts.iter().zip(poses).map(|(p, pose)| (pose.inverse_rigid(), p.mesh.aabb())).collect();
    points
        .iter()
        .filter(|q| {
            scene.parts.iter().zip(&meshes).any(|(p, (inv, bounds))| {
                let local = inv.to_outer(q);
                let inside_box = (0..3).all(|i| local[i] >= bounds.0[i] - 1e-12 && local[i] <= bounds.1[i] + 1e-12);
                inside_box && local_signed_distance(&p.mesh, bounds, &local).2 < -depth
            })
        })
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameMetrics {
    pub frame: usize,
    pub contacts: usize,
    /// Wrench residual per part.
    pub residuals: Vec<f64>,
    pub consistent: bool,
    /// Largest normalized hinge torque per part, `None` for a part without
    /// contacts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub articulation_torque: Option<Vec<Option<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub articulated: Option<bool>,
    pub penetrating_points: usize,
    /// Fraction of hand points counted as penetrating.
    pub penetration: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub cm_consistency: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub articulation_consistency: Option<f64>,
    pub penetration_rate: f64,
    pub thresholds: MetricThresholds,
    pub frames: Vec<FrameMetrics>,
}

fn check_motion(motion: &Motion, scene: &Scene) -> Result<()> {
    if motion.part_count() != scene.parts.len() {
        return Err(Error::ShapeMismatch(format!(
            "motion has {} parts, scene has {}",
            motion.part_count(),
            scene.parts.len()
        )));
    }
    Ok(())
}

fn i_axis(inertia: &Inertia, pose: &PartFrame, axis: &RevoluteAxis) -> f64 {
    let inv = pose.inverse_rigid();
    inertia.about_axis(&inv.to_outer(&axis.origin), &(inv.rotation * axis.direction))
}

/// All three metrics, plus per-frame diagnostics. The articulation metric
/// is computed only when `articulation` is set and then requires a hinge.
pub fn evaluate(
    motion: &Motion,
    scene: &Scene,
    model: &HandModel,
    thresholds: &MetricThresholds,
    articulation: bool,
) -> Result<MetricsReport> {
    thresholds.validate()?;
    check_motion(motion, scene)?;
    let axis = if articulation {
        Some(scene.articulation_axis().ok_or_else(|| Error::invalid("scene has no revolute axis"))?)
    } else {
        None
    };
    let dt = 1.0 / motion.fps;
    let dynamics: Vec<Vec<(Vec3, Vec3)>> = scene
        .parts
        .iter()
        .enumerate()
        .map(|(k, p)| rigid_dynamics(&motion.part_track(k), p.inertia(), dt))
        .collect::<Result<_>>()?;
    let mut frames = Vec::with_capacity(motion.frame_count());
    for (t, (hand_pose, poses)) in motion.hand.iter().zip(&motion.objects).enumerate() {
        let hand = HandPoints::new(model, hand_pose);
        let mut inputs = Vec::with_capacity(scene.parts.len());
        for (k, part) in scene.parts.iter().enumerate() {
            let inertia = part.inertia();
            inputs.push(PartWrenchInput {
                com: poses[k].to_outer(&inertia.com),
                mass: inertia.mass,
                momentum_rate: dynamics[k][t],
                contacts: detect_contacts(&hand, &part.mesh, &poses[k], k, thresholds.contact_distance),
                supports: support_points(
                    &part.mesh,
                    &poses[k],
                    k,
                    scene.ground_z,
                    thresholds.support_tolerance,
                    thresholds.max_support_points,
                ),
            });
        }
        let system = build_wrench_system(&inputs, &world_hinges(scene, poses), &scene.gravity, thresholds.friction);
        let (_, residuals) = system.solve()?;
        let consistent = residuals.iter().all(|r| *r < thresholds.residual);
        let torques = axis.map(|(ak, a)| {
            let world = RevoluteAxis { origin: poses[ak].to_outer(&a.origin), direction: poses[ak].rotation * a.direction };
            scene
                .parts
                .iter()
                .enumerate()
                .map(|(k, part)| {
                    let candidates: Vec<ContactPoint> = inputs[k].contacts.iter().chain(&inputs[k].supports).copied().collect();
                    articulation_torque(&candidates, &world, i_axis(part.inertia(), &poses[k], &world))
                })
                .collect::<Vec<_>>()
        });
        let articulated = torques
            .as_ref()
            .map(|ts| ts.iter().all(|e| e.is_some_and(|v| v > thresholds.articulation)));
        frames.push(FrameMetrics {
            frame: t,
            contacts: inputs.iter().map(|p| p.contacts.len()).sum(),
            residuals,
            consistent,
            articulation_torque: torques,
            articulated,
            penetrating_points: penetrating_points(&hand.points, scene, poses, thresholds.penetration_depth),
            penetration: 0.0,
        });
        let last = frames.last_mut().expect("just pushed");
        last.penetration = last.penetrating_points as f64 / hand.points.len() as f64;
    }
    let n = frames.len() as f64;
    let frac = |f: &dyn Fn(&FrameMetrics) -> bool| frames.iter().filter(|m| f(m)).count() as f64 / n;
    Ok(MetricsReport {
        cm_consistency: frac(&|m| m.consistent),
        articulation_consistency: axis.map(|_| frac(&|m| m.articulated == Some(true))),
        penetration_rate: frames.iter().map(|m| m.penetrating_points).sum::<usize>() as f64
            / (n * model.vertex_count() as f64),
        thresholds: *thresholds,
        frames,
    })
}

/// Fraction of frames whose wrench residual is below threshold for every part.
pub fn contact_movement_consistency(motion: &Motion, scene: &Scene, model: &HandModel, thresholds: &MetricThresholds) -> Result<f64> {
    Ok(evaluate(motion, scene, model, thresholds, false)?.cm_consistency)
}

/// Fraction of frames where every part has a contact turning it about the hinge.
pub fn articulation_consistency(motion: &Motion, scene: &Scene, model: &HandModel, thresholds: &MetricThresholds) -> Result<f64> {
    let report = evaluate(motion, scene, model, thresholds, true)?;
    Ok(report.articulation_consistency.expect("requested"))
}

/// Mean over frames of the fraction of hand points deeper than the
/// threshold inside the object.
pub fn penetration_rate(motion: &Motion, scene: &Scene, model: &HandModel, depth: f64) -> Result<f64> {
    check_motion(motion, scene)?;
    let total: usize = motion
        .hand
        .iter()
        .zip(&motion.objects)
        .map(|(h, poses)| penetrating_points(&HandPoints::new(model, h).points, scene, poses, depth))
        .sum();
    Ok(total as f64 / (motion.frame_count() * model.vertex_count()) as f64)
}
