use std::collections::HashMap;

use serde::Serialize;

use crate::cams::CamsSequence;
use crate::error::{Error, Result};
use crate::geometry::{PartFrame, SurfaceSection};
use crate::hand::{joint_owner, HandModel, HandPose, HandState, PoseGradient, NUM_FINGERS, NUM_JOINTS, POSE_DIM};
use crate::numopt::{minimize, Objective, ObjectiveReport, Schedule};
use crate::scene::Scene;
use crate::Vec3;

use super::{check_lengths, flatten, pose_at, unflatten, ContactWeights, FitObjective, FitWeights, SmoothReduction};

/// Radius of the local surface section searched around a contact point, meters.
pub const SECTION_RADIUS: f64 = 0.015;
/// Length unit of distances inside the coefficient exponent, meters.
pub const COEFFICIENT_LENGTH: f64 = 0.01;

/// One hand vertex pulled toward a fixed point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexTarget {
    pub vertex: usize,
    /// Target point in world coordinates.
    pub point: Vec3,
    pub signed_distance: f64,
    pub coefficient: f64,
}

/// Attraction of one finger to a local section of one part at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactCorrespondence {
    pub finger: usize,
    pub frame: usize,
    pub part: usize,
    /// The section was empty or no target was available and the whole part
    /// was used instead.
    pub whole_part: bool,
    pub targets: Vec<VertexTarget>,
}

/// Penetrating vertices of one vertex group (a finger, or the palm when
/// `finger` is `None`) inside one part at one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct PenetrationCorrespondence {
    pub finger: Option<usize>,
    pub frame: usize,
    pub part: usize,
    pub targets: Vec<VertexTarget>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Correspondences {
    pub contacts: Vec<ContactCorrespondence>,
    pub penetrations: Vec<PenetrationCorrespondence>,
}

impl Correspondences {
    pub fn penetrating_vertices(&self) -> usize {
        self.penetrations.iter().map(|p| p.targets.len()).sum()
    }
}

/// `exp(-(d² - min d²))` with distances in [`COEFFICIENT_LENGTH`] units.
fn coefficients(distances: &[f64]) -> Vec<f64> {
    let sq: Vec<f64> = distances.iter().map(|d| (d / COEFFICIENT_LENGTH).powi(2)).collect();
    let min = sq.iter().copied().fold(f64::INFINITY, f64::min);
    sq.iter().map(|s| (-(s - min)).exp()).collect()
}

/// Rebuilds contact and penetration correspondences for the hand sequence
/// `theta`.
///
/// For every frame and (finger, part) flagged in contact, the section of
/// the part around the contact point whose vertex normals lie within
/// `cone_angle_deg` of the contact normal is searched for each finger
/// vertex. The contact point comes from the stage-start target, or the
/// stage-end target when the stage starts without contact. Every hand
/// vertex inside a part gets a penetration target on the whole part.
pub fn build_correspondences(
    theta: &[HandPose],
    cams: &CamsSequence,
    scene: &Scene,
    object_traj: &[Vec<PartFrame>],
    model: &HandModel,
    cone_angle_deg: f64,
) -> Result<Correspondences> {
    check_lengths(cams, scene, object_traj, theta)?;
    let matched = cams.matched_points(&scene.parts)?;
    let repr = &cams.representation;
    let parts = scene.parts.len();
    let mut sections: HashMap<(usize, usize), SurfaceSection> = HashMap::new();
    let mut out = Correspondences::default();
    for (t, pose) in theta.iter().enumerate() {
        let state = model.state(pose);
        let verts = model.vertices(&state);
        let fr = &cams.frames[t];
        for (k, part) in scene.parts.iter().enumerate() {
            let part_pose = &object_traj[t][k];
            let inv = part_pose.inverse_rigid();
            let local: Vec<Vec3> = verts.iter().map(|v| inv.to_outer(v)).collect();
            let hits: Vec<_> = local.iter().map(|q| part.mesh.nearest_surface_point(q)).collect();

            for f in 0..NUM_FINGERS {
                let idx = f * parts + k;
                if !fr.tuples[idx].f_c {
                    continue;
                }
                let j = fr.stage;
                let transition = [j, j + 1].into_iter().find(|&jj| cams.targets[jj][idx].c);
                let section = transition.map(|jj| {
                    sections.entry((jj, idx)).or_insert_with(|| {
                        let target = &cams.targets[jj][idx];
                        let center = matched[jj][idx].expect("active target has a matched point");
                        let normal = repr.target_frame(part).normal_to_outer(&target.n);
                        part.mesh.local_surface_section(&center, &normal, cone_angle_deg, SECTION_RADIUS)
                    })
                });
                let range = model.finger_range(f);
                let section_hits: Option<Vec<_>> = match section {
                    Some(s) if !s.triangles.is_empty() => {
                        range.clone().map(|v| part.mesh.nearest_in_subset(&local[v], &s.triangles)).collect()
                    }
                    _ => None,
                };
                let whole_part = section_hits.is_none();
                if whole_part {
                    log::debug!("frame {t} finger {f} part {k}: empty contact section, using the whole part");
                }
                let pairs: Vec<(Vec3, f64)> = match section_hits {
                    Some(h) => h.iter().map(|h| (h.point, h.signed_distance)).collect(),
                    None => range.clone().map(|v| (hits[v].point, hits[v].signed_distance)).collect(),
                };
                let dist: Vec<f64> = pairs.iter().map(|p| p.1).collect();
                let coeff = coefficients(&dist);
                let targets = range
                    .zip(pairs.iter().zip(&coeff))
                    .map(|(v, ((p, d), c))| VertexTarget {
                        vertex: v,
                        point: part_pose.to_outer(p),
                        signed_distance: *d,
                        coefficient: *c,
                    })
                    .collect();
                out.contacts.push(ContactCorrespondence { finger: f, frame: t, part: k, whole_part, targets });
            }

            let groups = (0..NUM_FINGERS).map(|f| (Some(f), model.finger_range(f))).chain([(None, model.palm_range())]);
            for (finger, range) in groups {
                if !range.clone().any(|v| hits[v].signed_distance < 0.0) {
                    continue;
                }
                let dist: Vec<f64> = range.clone().map(|v| hits[v].signed_distance).collect();
                let coeff = coefficients(&dist);
                let targets = range
                    .zip(coeff)
                    .filter(|(v, _)| hits[*v].signed_distance < 0.0)
                    .map(|(v, c)| VertexTarget {
                        vertex: v,
                        point: part_pose.to_outer(&hits[v].point),
                        signed_distance: hits[v].signed_distance,
                        coefficient: c,
                    })
                    .collect();
                out.penetrations.push(PenetrationCorrespondence { finger, frame: t, part: k, targets });
            }
        }
    }
    Ok(out)
}

/// The contact-refinement objective with frozen correspondences.
pub struct ContactObjective<'a> {
    model: &'a HandModel,
    /// `(vertex, point, coefficient)` per frame for contact and penetration.
    contact: Vec<Vec<(usize, Vec3, f64)>>,
    penetration: Vec<Vec<(usize, Vec3, f64)>>,
    weights: ContactWeights,
    smooth: f64,
    fit: Option<FitObjective<'a>>,
}

impl<'a> ContactObjective<'a> {
    /// `smooth` multiplies the velocity and acceleration terms; `fit`
    /// contributes its fingertip and joint terms when given.
    pub fn new(
        model: &'a HandModel,
        corr: &Correspondences,
        frames: usize,
        weights: &ContactWeights,
        smooth: f64,
        fit: Option<FitObjective<'a>>,
    ) -> Self {
        let mut contact = vec![Vec::new(); frames];
        for c in &corr.contacts {
            contact[c.frame].extend(c.targets.iter().map(|t| (t.vertex, t.point, t.coefficient)));
        }
        let mut penetration = vec![Vec::new(); frames];
        for p in &corr.penetrations {
            penetration[p.frame].extend(p.targets.iter().map(|t| (t.vertex, t.point, t.coefficient)));
        }
        ContactObjective { model, contact, penetration, weights: weights.clone(), smooth, fit }
    }

    /// Weighted `[contact, penetration, trans, velocity, acceleration, fit]`.
    fn parts(&self, x: &[f64], mut grad: Option<&mut [f64]>) -> [f64; 6] {
        let w = &self.weights;
        let frames = self.contact.len();
        let states: Vec<HandState> = (0..frames).map(|t| self.model.state(&pose_at(x, t))).collect();
        let joints: Vec<Vec<Vec3>> = states.iter().map(|s| self.model.joints(s).to_vec()).collect();
        let mut g_joint = vec![vec![Vec3::zeros(); NUM_JOINTS]; frames];
        let count = (frames.saturating_sub(2) * NUM_JOINTS).max(1) as f64;
        let norm = match w.smooth_reduction {
            SmoothReduction::Mean => 1.0 / count,
            SmoothReduction::Sum => 1.0,
        };
        let (wv, wa) = (self.smooth * w.lambda_v * norm, self.smooth * w.lambda_a * norm);
        let (mut lv, mut la) = (0.0, 0.0);
        for t in 1..frames.saturating_sub(1) {
            for q in 0..NUM_JOINTS {
                let v = (joints[t + 1][q] - joints[t - 1][q]) * 0.5;
                let a = joints[t + 1][q] - joints[t][q] * 2.0 + joints[t - 1][q];
                lv += v.norm_squared();
                la += a.norm_squared();
                g_joint[t + 1][q] += v * wv + a * (2.0 * wa);
                g_joint[t - 1][q] += -v * wv + a * (2.0 * wa);
                g_joint[t][q] -= a * (4.0 * wa);
            }
        }
        let (mut lc, mut lp) = (0.0, 0.0);
        for t in 0..frames {
            let mut pg = PoseGradient::new();
            for (list, acc) in [(&self.contact[t], &mut lc), (&self.penetration[t], &mut lp)] {
                for &(v, p, c) in list {
                    let pos = self.model.vertex(&states[t], v);
                    let e = pos - p;
                    *acc += c * e.norm_squared();
                    if grad.is_some() {
                        pg.add(self.model.vertex_owner(v), &pos, &(e * (2.0 * w.lambda_contact * c)));
                    }
                }
            }
            if let Some(g) = grad.as_deref_mut() {
                for q in 0..NUM_JOINTS {
                    pg.add(joint_owner(q), &joints[t][q], &g_joint[t][q]);
                }
                pg.finish(&states[t], &mut g[POSE_DIM * t..POSE_DIM * (t + 1)]);
            }
        }
        let mut lt = 0.0;
        for t in 1..frames {
            for p in 0..3 {
                let d = x[POSE_DIM * t + p] - x[POSE_DIM * (t - 1) + p];
                lt += d * d;
                if let Some(g) = grad.as_deref_mut() {
                    g[POSE_DIM * t + p] += 2.0 * w.lambda_trans * d;
                    g[POSE_DIM * (t - 1) + p] -= 2.0 * w.lambda_trans * d;
                }
            }
        }
        let lf = self.fit.as_ref().map_or(0.0, |f| {
            let (tip, joint) = f.data_terms(x, grad);
            tip + joint
        });
        [w.lambda_contact * lc, w.lambda_contact * lp, w.lambda_trans * lt, wv * lv, wa * la, lf]
    }
}

impl Objective for ContactObjective<'_> {
    fn evaluate(&mut self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.parts(x, Some(grad)).iter().sum()
    }

    fn terms(&mut self, x: &[f64]) -> Vec<(String, f64)> {
        let p = self.parts(x, None);
        ["contact", "penetration", "trans", "velocity", "acceleration", "fit"]
            .iter()
            .zip(p)
            .map(|(n, v)| (n.to_string(), v))
            .collect()
    }
}

/// One outer step of contact refinement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepReport {
    pub smooth: f64,
    pub contact_tuples: usize,
    pub whole_part_fallbacks: usize,
    pub penetrating_vertices: usize,
    pub objective: ObjectiveReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactReport {
    pub steps: Vec<StepReport>,
}

/// Refines `theta` in rounds: each round rebuilds correspondences and then
/// minimizes the frozen objective with that round's smoothness weight.
/// `fit` supplies the fingertip and joint terms kept when
/// `weights.keep_fit_terms` is set.
pub fn optimize_contact(
    theta: &[HandPose],
    cams: &CamsSequence,
    scene: &Scene,
    object_traj: &[Vec<PartFrame>],
    model: &HandModel,
    fit: &FitWeights,
    weights: &ContactWeights,
) -> Result<(Vec<HandPose>, ContactReport)> {
    weights.validate()?;
    fit.validate()?;
    check_lengths(cams, scene, object_traj, theta)?;
    let mut x = flatten(theta);
    let mut steps = Vec::with_capacity(weights.steps());
    for (step, &smooth) in weights.smooth_schedule.iter().enumerate() {
        let current = unflatten(&x);
        let corr = build_correspondences(&current, cams, scene, object_traj, model, weights.cone_angle_deg)?;
        let anchor = if weights.keep_fit_terms {
            Some(FitObjective::new(cams, scene, object_traj, model, fit)?)
        } else {
            None
        };
        let mut objective = ContactObjective::new(model, &corr, theta.len(), weights, smooth, anchor);
        let (next, report) = minimize(&mut objective, &x, &Schedule::new(weights.learning_rate, weights.epochs_per_step))
            .map_err(|e| match e {
                Error::NonFinite { iteration, .. } => {
                    Error::NonFinite { iteration, context: format!("contact refinement step {step}") }
                }
                other => other,
            })?;
        log::info!(
            "contact step {step}: loss {:.6e} -> {:.6e}, {} contact tuples, {} penetrating vertices",
            report.initial_loss(),
            report.final_loss(),
            corr.contacts.len(),
            corr.penetrating_vertices()
        );
        steps.push(StepReport {
            smooth,
            contact_tuples: corr.contacts.len(),
            whole_part_fallbacks: corr.contacts.iter().filter(|c| c.whole_part).count(),
            penetrating_vertices: corr.penetrating_vertices(),
            objective: report,
        });
        x = next;
    }
    Ok((unflatten(&x), ContactReport { steps }))
}
