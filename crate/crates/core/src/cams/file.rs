use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hand::{HandPose, NUM_FINGERS};
use crate::Vec3;

use super::{
    validate_stage_boundaries, CamsSequence, ContactTarget, FingerEmbedding, FrameCams, Representation,
    TupleState,
};

pub const CAMS_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TargetFile {
    finger: usize,
    part: usize,
    c: u8,
    #[serde(rename = "V")]
    v: [f64; 3],
    #[serde(rename = "N")]
    n: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionFile {
    frame: usize,
    targets: Vec<TargetFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlagFile {
    finger: usize,
    part: usize,
    f_c: u8,
    f_n: u8,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingFile {
    finger: usize,
    part: usize,
    #[serde(rename = "F1")]
    f1: Vec<f64>,
    #[serde(rename = "F2")]
    f2: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameFile {
    frame: usize,
    stage: usize,
    t_norm: f64,
    flags: Vec<FlagFile>,
    embeddings: Vec<EmbeddingFile>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CamsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    header: Option<serde_json::Value>,
    format_version: u32,
    representation: Representation,
    part_names: Vec<String>,
    stages: usize,
    initial_pose: Vec<f64>,
    transitions: Vec<TransitionFile>,
    frames: Vec<FrameFile>,
    samples: Vec<Vec<FrameFile>>,
}

fn a3(v: &Vec3) -> [f64; 3] {
    [v.x, v.y, v.z]
}

fn frame_to_file(f: &FrameCams, parts: usize) -> FrameFile {
    let mut flags = Vec::new();
    let mut embeddings = Vec::new();
    for (idx, s) in f.tuples.iter().enumerate() {
        let (finger, part) = (idx / parts, idx % parts);
        flags.push(FlagFile { finger, part, f_c: s.f_c as u8, f_n: s.f_n as u8 });
        if let Some((e1, e2)) = &s.embeddings {
            embeddings.push(EmbeddingFile { finger, part, f1: e1.to_array().to_vec(), f2: e2.to_array().to_vec() });
        }
    }
    FrameFile { frame: f.frame, stage: f.stage, t_norm: f.t_norm, flags, embeddings }
}

fn embedding_from(v: &[f64]) -> Result<FingerEmbedding> {
    let arr: [f64; 15] = v
        .try_into()
        .map_err(|_| Error::ShapeMismatch(format!("finger embedding needs 15 values, got {}", v.len())))?;
    Ok(FingerEmbedding::from_array(&arr))
}

fn bit(v: u8, name: &str) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(Error::invalid(format!("flag {name} must be 0 or 1"))),
    }
}

fn frame_from_file(f: &FrameFile, parts: usize) -> Result<FrameCams> {
    let n = NUM_FINGERS * parts;
    let mut tuples = vec![TupleState { f_c: false, f_n: false, embeddings: None }; n];
    if f.flags.len() != n {
        return Err(Error::ShapeMismatch(format!("frame {} lists {} flags, expected {n}", f.frame, f.flags.len())));
    }
    for fl in &f.flags {
        if fl.finger >= NUM_FINGERS || fl.part >= parts {
            return Err(Error::invalid("flag index out of range"));
        }
        let t = &mut tuples[fl.finger * parts + fl.part];
        t.f_c = bit(fl.f_c, "f_c")?;
        t.f_n = bit(fl.f_n, "f_n")?;
        if t.f_c && !t.f_n {
            return Err(Error::invalid(format!("frame {}: f_c set without f_n", f.frame)));
        }
    }
    for e in &f.embeddings {
        if e.finger >= NUM_FINGERS || e.part >= parts {
            return Err(Error::invalid("embedding index out of range"));
        }
        tuples[e.finger * parts + e.part].embeddings = Some((embedding_from(&e.f1)?, embedding_from(&e.f2)?));
    }
    if tuples.iter().any(|t| t.f_n != t.embeddings.is_some()) {
        return Err(Error::invalid(format!("frame {}: embeddings must be present exactly when f_n is set", f.frame)));
    }
    Ok(FrameCams { frame: f.frame, stage: f.stage, t_norm: f.t_norm, tuples })
}

impl CamsSequence {
    pub fn to_json(&self, header: Option<serde_json::Value>) -> serde_json::Value {
        let parts = self.part_count();
        let file = CamsFile {
            header,
            format_version: CAMS_FORMAT_VERSION,
            representation: self.representation,
            part_names: self.part_names.clone(),
            stages: self.stage_count(),
            initial_pose: self.initial_pose.to_array().to_vec(),
            transitions: self
                .targets
                .iter()
                .zip(&self.stage_boundaries)
                .map(|(row, &frame)| TransitionFile {
                    frame,
                    targets: row
                        .iter()
                        .map(|t| TargetFile { finger: t.finger, part: t.part, c: t.c as u8, v: a3(&t.v), n: a3(&t.n) })
                        .collect(),
                })
                .collect(),
            frames: self.frames.iter().map(|f| frame_to_file(f, parts)).collect(),
            samples: self.samples.iter().map(|s| s.iter().map(|f| frame_to_file(f, parts)).collect()).collect(),
        };
        serde_json::to_value(file).expect("representation serializes")
    }

    pub fn from_json_str(s: &str) -> Result<CamsSequence> {
        let file: CamsFile = serde_json::from_str(s)?;
        if file.format_version != CAMS_FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported format version {}", file.format_version)));
        }
        let parts = file.part_names.len();
        if parts == 0 {
            return Err(Error::invalid("representation lists no parts"));
        }
        if file.transitions.len() != file.stages + 1 || file.samples.len() != file.stages {
            return Err(Error::ShapeMismatch("stage count disagrees with transitions or samples".into()));
        }
        let boundaries: Vec<usize> = file.transitions.iter().map(|t| t.frame).collect();
        validate_stage_boundaries(&boundaries, file.frames.len())?;
        let mut targets = Vec::with_capacity(file.transitions.len());
        for (j, tr) in file.transitions.iter().enumerate() {
            let mut row = vec![ContactTarget::inactive(0, j, 0); NUM_FINGERS * parts];
            if tr.targets.len() != row.len() {
                return Err(Error::ShapeMismatch(format!("transition {j} lists {} targets", tr.targets.len())));
            }
            for t in &tr.targets {
                if t.finger >= NUM_FINGERS || t.part >= parts {
                    return Err(Error::invalid("target index out of range"));
                }
                let c = bit(t.c, "c")?;
                let n = Vec3::from(t.n);
                if c && (n.norm() - 1.0).abs() > 1e-6 {
                    return Err(Error::invalid(format!("transition {j}: contact normal is not unit length")));
                }
                row[t.finger * parts + t.part] =
                    ContactTarget { finger: t.finger, transition: j, part: t.part, c, v: Vec3::from(t.v), n };
            }
            targets.push(row);
        }
        let frames = file.frames.iter().map(|f| frame_from_file(f, parts)).collect::<Result<Vec<_>>>()?;
        let samples = file
            .samples
            .iter()
            .map(|s| s.iter().map(|f| frame_from_file(f, parts)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(CamsSequence {
            part_names: file.part_names,
            representation: file.representation,
            stage_boundaries: boundaries,
            initial_pose: HandPose::from_slice(&file.initial_pose)?,
            targets,
            frames,
            samples,
        })
    }
}
