use crate::error::{Error, Result};
use crate::geometry::PartFrame;
use crate::hand::{HandConfig, HandJoints, HandModel, NUM_FINGERS};
use crate::motion::Motion;
use crate::scene::Scene;
use crate::Vec3;

use super::{
    compute_finger_embedding, match_contact_local, reference_frame, stage_of_frame, validate_stage_boundaries,
    CamsSequence, ContactTarget, FrameCams, Representation, TupleState,
};

/// A finger vertex closer than this to a part is in contact, meters.
pub const CONTACT_DISTANCE: f64 = 0.002;
/// A fingertip closer than this to a part is near it, meters.
pub const NEAR_DISTANCE: f64 = 0.10;
pub const SAMPLES_PER_STAGE: usize = 10;

/// Contact analysis of one (finger, part) pair at one frame.
#[derive(Debug, Clone, Copy)]
struct PairContact {
    min_distance: f64,
    /// Centroid of in-threshold finger vertices, part-local.
    centroid: Option<Vec3>,
    tip_distance: f64,
}

fn analyse_frame(
    scene: &Scene,
    model: &HandModel,
    pose: &crate::hand::HandPose,
    part_poses: &[PartFrame],
) -> (HandJoints, Vec<PairContact>) {
    let state = model.state(pose);
    let joints = model.joints(&state);
    let verts = model.vertices(&state);
    let parts = scene.parts.len();
    let mut out = Vec::with_capacity(NUM_FINGERS * parts);
    for f in 0..NUM_FINGERS {
        for (k, part) in scene.parts.iter().enumerate() {
            let inv = part_poses[k].inverse_rigid();
            let mut min_distance = f64::INFINITY;
            let mut sum = Vec3::zeros();
            let mut count = 0usize;
            for v in &verts[model.finger_range(f)] {
                let local = inv.to_outer(v);
                let d = part.mesh.nearest_surface_point(&local).signed_distance;
                min_distance = min_distance.min(d);
                if d < CONTACT_DISTANCE {
                    sum += local;
                    count += 1;
                }
            }
            let tip_local = inv.to_outer(&joints.fingers[f].tip);
            let tip_distance = part.mesh.nearest_surface_point(&tip_local).signed_distance.max(0.0);
            let centroid = (count > 0).then(|| sum / count as f64);
            out.push(PairContact { min_distance, centroid, tip_distance });
        }
    }
    (joints, out)
}

/// Extracts the representation of `motion` with explicit stage boundaries.
///
/// At every transition a finger touches a part when one of its vertices is
/// within 2 mm; the contact point is the surface point nearest the centroid
/// of those vertices. Per frame, `f_c` uses the same rule and `f_n` holds
/// when the fingertip is within 10 cm of the part.
pub fn extract_cams(
    motion: &Motion,
    scene: &Scene,
    stage_boundaries: &[usize],
    hand: &HandConfig,
    repr: &Representation,
) -> Result<CamsSequence> {
    if motion.part_count() != scene.parts.len() {
        return Err(Error::ShapeMismatch(format!(
            "motion tracks {} parts, scene has {}",
            motion.part_count(),
            scene.parts.len()
        )));
    }
    let frames = motion.frame_count();
    validate_stage_boundaries(stage_boundaries, frames)?;
    let model = HandModel::new(hand.clone())?;
    let parts = scene.parts.len();
    let m = stage_boundaries.len() - 1;

    let analysis: Vec<(HandJoints, Vec<PairContact>)> = (0..frames)
        .map(|t| analyse_frame(scene, &model, &motion.hand[t], &motion.objects[t]))
        .collect();

    let mut targets = Vec::with_capacity(m + 1);
    let mut matched = Vec::with_capacity(m + 1);
    for (j, &b) in stage_boundaries.iter().enumerate() {
        let mut row = Vec::with_capacity(NUM_FINGERS * parts);
        let mut mrow = Vec::with_capacity(NUM_FINGERS * parts);
        for f in 0..NUM_FINGERS {
            for (k, part) in scene.parts.iter().enumerate() {
                let pc = &analysis[b].1[f * parts + k];
                let target = match pc.centroid {
                    Some(centroid) if pc.min_distance < CONTACT_DISTANCE => {
                        let hit = part.mesh.nearest_surface_point(&centroid);
                        let frame = repr.target_frame(part);
                        ContactTarget {
                            finger: f,
                            transition: j,
                            part: k,
                            c: true,
                            v: frame.to_inner(&hit.point),
                            n: frame.normal_to_inner(&hit.normal),
                        }
                    }
                    _ => ContactTarget::inactive(f, j, k),
                };
                mrow.push(if target.c {
                    Some(match_contact_local(part, &repr.target_frame(part), &target.v, &target.n)?)
                } else {
                    None
                });
                row.push(target);
            }
        }
        targets.push(row);
        matched.push(mrow);
    }

    let frame_entry = |t: usize, stage: usize, t_norm: f64| -> Result<FrameCams> {
        let (joints, pairs) = &analysis[t];
        let mut tuples = Vec::with_capacity(NUM_FINGERS * parts);
        for f in 0..NUM_FINGERS {
            for (k, part) in scene.parts.iter().enumerate() {
                let pc = &pairs[f * parts + k];
                let f_c = pc.min_distance < CONTACT_DISTANCE;
                let f_n = f_c || pc.tip_distance < NEAR_DISTANCE;
                let embeddings = if f_n {
                    let pose = &motion.objects[t][k];
                    let idx = f * parts + k;
                    let start = reference_frame(part, pose, matched[stage][idx].as_ref(), repr);
                    let end = reference_frame(part, pose, matched[stage + 1][idx].as_ref(), repr);
                    Some((
                        compute_finger_embedding(joints, f, &start, repr.embedding)?,
                        compute_finger_embedding(joints, f, &end, repr.embedding)?,
                    ))
                } else {
                    None
                };
                tuples.push(TupleState { f_c, f_n, embeddings });
            }
        }
        Ok(FrameCams { frame: t, stage, t_norm, tuples })
    };

    let dense = (0..frames)
        .map(|t| {
            let (j, tn) = stage_of_frame(stage_boundaries, t);
            frame_entry(t, j, tn)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut samples = Vec::with_capacity(m);
    for j in 0..m {
        let (a, b) = (stage_boundaries[j], stage_boundaries[j + 1]);
        let stage_samples = (0..SAMPLES_PER_STAGE)
            .map(|s| {
                let tt = s as f64 / (SAMPLES_PER_STAGE - 1) as f64;
                let t = a + (tt * (b - a) as f64).round() as usize;
                frame_entry(t, j, (t - a) as f64 / (b - a) as f64)
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(stage_samples);
    }

    Ok(CamsSequence {
        part_names: scene.parts.iter().map(|p| p.name.clone()).collect(),
        representation: *repr,
        stage_boundaries: stage_boundaries.to_vec(),
        initial_pose: motion.hand[0],
        targets,
        frames: dense,
        samples,
    })
}
