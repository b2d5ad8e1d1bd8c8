//! Hand and object tracks over time, and their JSON form.

use nalgebra::Rotation3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PartFrame;
use crate::hand::HandPose;
use crate::Vec3;

/// A hand pose per frame aligned with one rigid pose per part per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Motion {
    pub fps: f64,
    pub hand: Vec<HandPose>,
    /// `objects[t][k]` is the world pose of part `k` at frame `t`.
    pub objects: Vec<Vec<PartFrame>>,
}

impl Motion {
    pub fn new(fps: f64, hand: Vec<HandPose>, objects: Vec<Vec<PartFrame>>) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::invalid("fps must be positive"));
        }
        if hand.len() != objects.len() {
            return Err(Error::ShapeMismatch(format!(
                "hand track has {} frames, object track has {}",
                hand.len(),
                objects.len()
            )));
        }
        if hand.is_empty() {
            return Err(Error::invalid("motion has no frames"));
        }
        let parts = objects[0].len();
        if objects.iter().any(|f| f.len() != parts) {
            return Err(Error::ShapeMismatch("part count varies between frames".into()));
        }
        Ok(Motion { fps, hand, objects })
    }

    pub fn frame_count(&self) -> usize {
        self.hand.len()
    }

    pub fn part_count(&self) -> usize {
        self.objects[0].len()
    }

    /// Pose track of one part.
    pub fn part_track(&self, k: usize) -> Vec<PartFrame> {
        self.objects.iter().map(|f| f[k]).collect()
    }

    pub fn to_json(&self, part_names: &[String], header: Option<serde_json::Value>) -> serde_json::Value {
        let file = MotionFile {
            header,
            fps: self.fps,
            hand: self.hand.iter().map(|p| p.to_array().to_vec()).collect(),
            parts: (0..self.part_count())
                .map(|k| PartTrackFile {
                    name: part_names.get(k).cloned().unwrap_or_else(|| format!("part{k}")),
                    poses: self.objects.iter().map(|f| pose_to_array(&f[k])).collect(),
                })
                .collect(),
        };
        serde_json::to_value(file).expect("motion serializes")
    }

    pub fn from_json_str(s: &str) -> Result<Motion> {
        let file: MotionFile = serde_json::from_str(s)?;
        let hand = file.hand.iter().map(|p| HandPose::from_slice(p)).collect::<Result<Vec<_>>>()?;
        if file.parts.is_empty() {
            return Err(Error::invalid("motion lists no parts"));
        }
        for p in &file.parts {
            if p.poses.len() != hand.len() {
                return Err(Error::ShapeMismatch(format!(
                    "part '{}' has {} poses, hand track has {} frames",
                    p.name,
                    p.poses.len(),
                    hand.len()
                )));
            }
        }
        let objects = (0..hand.len())
            .map(|t| file.parts.iter().map(|p| pose_from_array(&p.poses[t])).collect())
            .collect();
        Motion::new(file.fps, hand, objects)
    }
}

/// `[tx, ty, tz, rx, ry, rz]` with the rotation as an axis-angle vector.
pub fn pose_to_array(f: &PartFrame) -> [f64; 6] {
    let r = f.rotation.scaled_axis();
    [f.translation.x, f.translation.y, f.translation.z, r.x, r.y, r.z]
}

pub fn pose_from_array(a: &[f64; 6]) -> PartFrame {
    PartFrame::rigid(Rotation3::new(Vec3::new(a[3], a[4], a[5])), Vec3::new(a[0], a[1], a[2]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartTrackFile {
    name: String,
    poses: Vec<[f64; 6]>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MotionFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    header: Option<serde_json::Value>,
    fps: f64,
    hand: Vec<Vec<f64>>,
    parts: Vec<PartTrackFile>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let pose = PartFrame::rigid(Rotation3::new(Vec3::new(0.1, 0.2, -0.3)), Vec3::new(1.0, 2.0, 3.0));
        let motion = Motion::new(30.0, vec![HandPose::rest(); 2], vec![vec![pose]; 2]).unwrap();
        let text = motion.to_json(&["lid".into()], None).to_string();
        let back = Motion::from_json_str(&text).unwrap();
        assert_eq!(back.frame_count(), 2);
        assert!((back.objects[1][0].translation - pose.translation).norm() < 1e-15);
        assert!((back.objects[1][0].rotation.matrix() - pose.rotation.matrix()).abs().max() < 1e-15);
    }

    #[test]
    fn mismatched_tracks_are_rejected() {
        assert!(Motion::new(30.0, vec![HandPose::rest(); 3], vec![vec![PartFrame::identity()]; 2]).is_err());
        let text = r#"{"fps": 30, "hand": [], "parts": [{"name": "a", "poses": [[0,0,0,0,0,0]]}]}"#;
        assert!(Motion::from_json_str(text).is_err());
    }
}
