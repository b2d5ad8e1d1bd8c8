//! Object trajectories interpolated between goal keyframes.

use nalgebra::{Rotation3, Unit, UnitQuaternion};

use crate::error::{Error, Result};
use crate::Vec3;

use super::npcs::PartFrame;

/// A hinge in part-local rest coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RevoluteAxis {
    pub origin: Vec3,
    /// Unit direction; positive angles turn counter-clockwise about it.
    pub direction: Vec3,
}

impl RevoluteAxis {
    pub fn new(origin: Vec3, direction: Vec3) -> Result<Self> {
        let n = direction.norm();
        if !(n > 1e-12) || !origin.iter().all(|c| c.is_finite()) {
            return Err(Error::invalid("revolute axis needs a finite non-zero direction"));
        }
        Ok(RevoluteAxis { origin, direction: direction / n })
    }

    /// Rigid transform turning rest coordinates by `angle` about the axis.
    pub fn rotation_about(&self, angle: f64) -> PartFrame {
        let r = Rotation3::from_axis_angle(&Unit::new_unchecked(self.direction), angle);
        PartFrame::rigid(r, self.origin - r * self.origin)
    }
}

/// Target state of one part: a base rigid transform plus a hinge angle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PartKeyframe {
    pub translation: Vec3,
    /// Axis-angle vector of the base rotation.
    pub rotation: Vec3,
    /// Revolute angle in radians; must be 0 for parts without an axis.
    pub angle: f64,
}

/// Target state of every part at one stage boundary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GoalKeyframe {
    pub parts: Vec<PartKeyframe>,
}

/// Pose of a part for a keyframe: base transform applied after the hinge turn.
pub fn keyframe_pose(key: &PartKeyframe, axis: Option<&RevoluteAxis>) -> PartFrame {
    let base = PartFrame::rigid(Rotation3::new(key.rotation), key.translation);
    match axis {
        Some(a) => base.compose(&a.rotation_about(key.angle)),
        None => base,
    }
}

/// Cubic Bezier with control values `a, a, b, b`, evaluated at `tau ∈ [0, 1]`.
///
/// The repeated controls give zero velocity at both ends, so consecutive
/// stages join smoothly.
pub fn eased(a: f64, b: f64, tau: f64) -> f64 {
    let s = tau * tau * (3.0 - 2.0 * tau);
    a + (b - a) * s
}

/// Interpolates every part's pose through the keyframes.
///
/// Returns `stages * frames_per_stage + 1` frames, each holding one pose per
/// part. Keyframe `j` lands exactly on frame `j * frames_per_stage`.
pub fn bezier_object_trajectory(
    axes: &[Option<RevoluteAxis>],
    goals: &[GoalKeyframe],
    frames_per_stage: usize,
) -> Result<Vec<Vec<PartFrame>>> {
    if goals.len() < 2 {
        return Err(Error::invalid("at least two goal keyframes are required"));
    }
    if frames_per_stage == 0 {
        return Err(Error::invalid("frames per stage must be positive"));
    }
    for (j, g) in goals.iter().enumerate() {
        if g.parts.len() != axes.len() {
            return Err(Error::ShapeMismatch(format!(
                "keyframe {j} has {} parts, scene has {}",
                g.parts.len(),
                axes.len()
            )));
        }
        for (k, p) in g.parts.iter().enumerate() {
            if axes[k].is_none() && p.angle != 0.0 {
                return Err(Error::invalid(format!(
                    "keyframe {j} sets an angle on part {k}, which has no revolute axis"
                )));
            }
        }
    }
    let stages = goals.len() - 1;
    let mut frames = Vec::with_capacity(stages * frames_per_stage + 1);
    for j in 0..stages {
        let last = if j + 1 == stages { frames_per_stage } else { frames_per_stage - 1 };
        for f in 0..=last {
            let tau = f as f64 / frames_per_stage as f64;
            let poses = (0..axes.len())
                .map(|k| {
                    let a = &goals[j].parts[k];
                    let b = &goals[j + 1].parts[k];
                    let s = eased(0.0, 1.0, tau);
                    let qa = UnitQuaternion::from_scaled_axis(a.rotation);
                    let qb = UnitQuaternion::from_scaled_axis(b.rotation);
                    let q = qa.try_slerp(&qb, s, 1e-12).unwrap_or(qa);
                    let key = PartKeyframe {
                        translation: a.translation.lerp(&b.translation, s),
                        rotation: q.scaled_axis(),
                        angle: eased(a.angle, b.angle, tau),
                    };
                    keyframe_pose(&key, axes[k].as_ref())
                })
                .collect();
            frames.push(poses);
        }
    }
    Ok(frames)
}
