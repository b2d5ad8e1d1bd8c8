//! Scripted hand motions for the fixture scenes.
//!
//! The laptop script approaches the lid with index and middle fingertips
//! pointing straight down, touches the lid top near its front edge, and then
//! follows the lid rigidly while it opens.

use nalgebra::Rotation3;

use crate::error::{Error, Result};
use crate::geometry::{eased, PartFrame, SceneKind};
use crate::hand::{HandConfig, HandModel, HandPose};
use crate::motion::Motion;
use crate::scene::Scene;
use crate::Vec3;

/// Gap between the touching fingertip caps and the lid, meters.
pub const TOUCH_GAP: f64 = 0.0005;

/// A generated motion with its stage boundaries.
#[derive(Debug, Clone)]
pub struct ScriptedMotion {
    pub motion: Motion,
    pub stage_boundaries: Vec<usize>,
    /// Hand pose at the first frame.
    pub initial_pose: HandPose,
}

fn deg(d: f64) -> f64 {
    d.to_radians()
}

fn cap_vertex(model: &HandModel, pose: &HandPose, finger: usize) -> Vec3 {
    let state = model.state(pose);
    model.vertex(&state, model.finger_range(finger).end - 1)
}

/// Hand pose touching the lid (part 1) of a laptop scene with the index and
/// middle fingertips.
pub fn laptop_contact_pose(scene: &Scene, hand: &HandConfig) -> Result<HandPose> {
    let lid = scene.parts.get(1).ok_or_else(|| Error::invalid("laptop scene needs a lid part"))?;
    let (lo, hi) = lid.mesh.aabb();
    let scale = (hi.x - lo.x) / 0.3;
    let model = HandModel::new(hand.clone())?;

    let mut pose = HandPose::rest();
    for f in [1, 2] {
        pose.set_joint_angle(f, 1, 0, -deg(40.0));
        pose.set_joint_angle(f, 2, 0, -deg(20.0));
    }
    pose.set_joint_angle(1, 0, 0, -deg(30.0));
    let drop = |p: &HandPose, f: usize| -cap_vertex(&model, p, f).z;
    let index_drop = drop(&pose, 1);
    // bisect the middle finger's knuckle angle to bring both caps level
    let (mut a, mut b) = (0.0, deg(60.0));
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        pose.set_joint_angle(2, 0, 0, -mid);
        if drop(&pose, 2) < index_drop {
            a = mid;
        } else {
            b = mid;
        }
    }
    pose.set_joint_angle(2, 0, 0, -0.5 * (a + b));

    let tips = (cap_vertex(&model, &pose, 1) + cap_vertex(&model, &pose, 2)) * 0.5;
    let target = Vec3::new(0.5 * (lo.x + hi.x), lo.y + 0.03 * scale, hi.z + TOUCH_GAP + index_drop);
    pose.wrist_translation = Vec3::new(target.x - tips.x, target.y - tips.y, target.z);
    Ok(pose)
}

/// Generates the scripted motion for a fixture scene. `scene.goals` drives
/// the object; for the laptop the first stage must keep the lid closed.
pub fn scripted_motion(
    kind: SceneKind,
    scene: &Scene,
    hand: &HandConfig,
    frames_per_stage: usize,
    fps: f64,
) -> Result<ScriptedMotion> {
    let objects = scene.object_trajectory(&scene.goals, frames_per_stage)?;
    let stages = scene.goals.len() - 1;
    let boundaries: Vec<usize> = (0..=stages).map(|j| j * frames_per_stage).collect();
    let (lo, hi) = scene.parts[0].mesh.aabb();
    let scale = (hi - lo).max() / 0.3;

    let hand_track: Vec<HandPose> = match kind {
        SceneKind::HingedLaptop => {
            if stages < 2 {
                return Err(Error::invalid("laptop script needs an approach stage and an opening stage"));
            }
            let contact = laptop_contact_pose(scene, hand)?;
            let mut start = contact;
            start.wrist_translation.z += 0.06 * scale;
            let mut angles = *contact.joint_angles();
            angles.iter_mut().for_each(|a| *a *= 0.6);
            start = HandPose::new(start.wrist_translation, start.wrist_rotation, angles);
            let (c, s) = (contact.to_array(), start.to_array());
            let rest_lid = objects[frames_per_stage][1];
            (0..objects.len())
                .map(|t| {
                    if t <= frames_per_stage {
                        let w = eased(0.0, 1.0, t as f64 / frames_per_stage as f64);
                        let x: Vec<f64> = s.iter().zip(&c).map(|(a, b)| a + (b - a) * w).collect();
                        HandPose::from_slice(&x)
                    } else {
                        // hand rides rigidly on the lid
                        let rel = objects[t][1].compose(&rest_lid.inverse_rigid());
                        let r = rel.rotation * Rotation3::new(contact.wrist_rotation);
                        Ok(HandPose::new(
                            rel.to_outer(&contact.wrist_translation),
                            r.scaled_axis(),
                            *contact.joint_angles(),
                        ))
                    }
                })
                .collect::<Result<_>>()?
        }
        _ => {
            let mut idle = HandPose::rest();
            idle.wrist_translation = Vec3::new(0.0, -0.5 * scale, 0.3 * scale);
            vec![idle; objects.len()]
        }
    };
    let initial_pose = hand_track[0];
    Ok(ScriptedMotion { motion: Motion::new(fps, hand_track, objects)?, stage_boundaries: boundaries, initial_pose })
}

/// Applies a rigid transform to a motion: every part pose and the wrist.
pub fn transform_motion(motion: &Motion, g: &PartFrame) -> Motion {
    let hand = motion
        .hand
        .iter()
        .map(|p| {
            let r = g.rotation * Rotation3::new(p.wrist_rotation);
            HandPose::new(g.to_outer(&p.wrist_translation), r.scaled_axis(), *p.joint_angles())
        })
        .collect();
    let objects = motion.objects.iter().map(|f| f.iter().map(|q| g.compose(q)).collect()).collect();
    Motion { fps: motion.fps, hand, objects }
}

/// Scales every length in a motion by `s` (wrist and part translations).
pub fn scale_motion(motion: &Motion, s: f64) -> Motion {
    let hand = motion
        .hand
        .iter()
        .map(|p| HandPose::new(p.wrist_translation * s, p.wrist_rotation, *p.joint_angles()))
        .collect();
    let objects = motion
        .objects
        .iter()
        .map(|f| f.iter().map(|q| PartFrame::rigid(q.rotation, q.translation * s)).collect())
        .collect();
    Motion { fps: motion.fps, hand, objects }
}
