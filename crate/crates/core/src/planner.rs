//! Training losses over predicted representations, and a retrieval planner
//! that picks the closest recorded manipulation from a library.

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::cams::{CamsSequence, FingerEmbedding, FrameCams};
use crate::error::{Error, Result};
use crate::geometry::GoalKeyframe;
use crate::hand::HandPose;
use crate::scene::Scene;
use crate::Vec3;

/// Dimension of the latent Gaussian.
pub const LATENT_DIM: usize = 64;
/// Floor applied to the argument of every log in the cross entropy.
pub const BCE_EPS: f64 = 1e-7;
/// Points in the resampled goal-angle profile.
pub const PROFILE_POINTS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    pub flag: f64,
    pub pos: f64,
    pub dir: f64,
    pub tip: f64,
    pub vec: f64,
    pub kld: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights { flag: 0.1, pos: 500.0, dir: 100.0, tip: 100.0, vec: 1.0, kld: 5.0 }
    }
}

/// Posterior parameters of the latent code.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl GaussianParams {
    pub fn new(mu: Vec<f64>, sigma: Vec<f64>) -> Result<Self> {
        if mu.len() != sigma.len() {
            return Err(Error::ShapeMismatch(format!("mu has {} entries, sigma {}", mu.len(), sigma.len())));
        }
        if sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::invalid("sigma must be positive"));
        }
        Ok(GaussianParams { mu, sigma })
    }

    pub fn standard() -> Self {
        GaussianParams { mu: vec![0.0; LATENT_DIM], sigma: vec![1.0; LATENT_DIM] }
    }

    /// Closed-form `KL(N(mu, sigma²) || N(0, I))`.
    pub fn kl_to_standard(&self) -> f64 {
        0.5 * self.mu.iter().zip(&self.sigma).map(|(m, s)| m * m + s * s - 1.0 - (s * s).ln()).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedTarget {
    /// Contact probability.
    pub c: f64,
    pub v: Vec3,
    pub n: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictedTuple {
    pub f_c: f64,
    pub f_n: f64,
    pub f1: FingerEmbedding,
    pub f2: FingerEmbedding,
}

/// Decoder output laid out like a [`CamsSequence`]: targets per transition
/// and tuple, and tuples at the sampled timestamps of every stage.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannerPrediction {
    pub targets: Vec<Vec<PredictedTarget>>,
    /// `samples[stage][sample][tuple]`.
    pub samples: Vec<Vec<Vec<PredictedTuple>>>,
}

fn zero_embedding() -> FingerEmbedding {
    FingerEmbedding { tip: Vec3::zeros(), joints: [Vec3::zeros(); 4] }
}

impl PlannerPrediction {
    /// The prediction that reproduces `cams` exactly.
    pub fn from_cams(cams: &CamsSequence) -> Self {
        let bit = |b: bool| if b { 1.0 } else { 0.0 };
        let targets = cams
            .targets
            .iter()
            .map(|row| row.iter().map(|t| PredictedTarget { c: bit(t.c), v: t.v, n: t.n }).collect())
            .collect();
        let samples = cams
            .samples
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .map(|fr| {
                        fr.tuples
                            .iter()
                            .map(|s| {
                                let (f1, f2) = s.embeddings.unwrap_or((zero_embedding(), zero_embedding()));
                                PredictedTuple { f_c: bit(s.f_c), f_n: bit(s.f_n), f1, f2 }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        PlannerPrediction { targets, samples }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LossBreakdown {
    pub l_flag: f64,
    pub l_pos: f64,
    pub l_dir: f64,
    pub l_tip: f64,
    pub l_vec: f64,
    pub l_kld: f64,
    pub total: f64,
}

/// Binary cross entropy of probability `p` against label `y`. A certain,
/// correct prediction costs exactly zero.
pub fn bce(y: bool, p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    if y {
        -p.max(BCE_EPS).ln()
    } else {
        -(1.0 - p).max(BCE_EPS).ln()
    }
}

fn check_layout(pred: &PlannerPrediction, gt: &CamsSequence) -> Result<()> {
    let n = gt.targets.first().map_or(0, Vec::len);
    let bad = pred.targets.len() != gt.targets.len()
        || pred.targets.iter().any(|r| r.len() != n)
        || pred.samples.len() != gt.samples.len()
        || pred.samples.iter().zip(&gt.samples).any(|(a, b)| {
            a.len() != b.len() || a.iter().zip(b).any(|(x, y)| x.len() != y.tuples.len())
        });
    if bad {
        return Err(Error::ShapeMismatch("prediction layout differs from the ground truth".into()));
    }
    Ok(())
}

/// Sum of the embedding errors `(tip, directions)` between a predicted and
/// a ground-truth embedding.
fn embedding_error(p: &FingerEmbedding, g: &FingerEmbedding) -> (f64, f64) {
    let tip = (p.tip - g.tip).norm_squared();
    let vec = p.joints.iter().zip(&g.joints).map(|(a, b)| (a - b).norm_squared()).sum();
    (tip, vec)
}

/// All six training losses and their weighted total.
///
/// Contact positions and normals count only where the ground truth touches.
/// Embedding errors are summed over the sampled timestamps of each stage;
/// the stage-start embedding is gated by the start transition's contact
/// flag and the stage-end embedding by the end transition's.
pub fn cvae_loss(
    pred: &PlannerPrediction,
    gt: &CamsSequence,
    gauss: &GaussianParams,
    weights: &LossWeights,
) -> Result<LossBreakdown> {
    check_layout(pred, gt)?;
    if gauss.sigma.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::invalid("sigma must be positive"));
    }
    let (mut l_flag, mut l_pos, mut l_dir, mut l_tip, mut l_vec) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (prow, grow) in pred.targets.iter().zip(&gt.targets) {
        for (p, g) in prow.iter().zip(grow) {
            l_flag += bce(g.c, p.c);
            if g.c {
                l_pos += (p.v - g.v).norm_squared();
                l_dir += (p.n - g.n).norm_squared();
            }
        }
    }
    for (j, (pstage, gstage)) in pred.samples.iter().zip(&gt.samples).enumerate() {
        for (psample, gsample) in pstage.iter().zip(gstage) {
            for (idx, (p, g)) in psample.iter().zip(&gsample.tuples).enumerate() {
                l_flag += bce(g.f_n, p.f_n) + bce(g.f_c, p.f_c);
                let Some((g1, g2)) = &g.embeddings else { continue };
                if gt.targets[j][idx].c {
                    let (a, b) = embedding_error(&p.f1, g1);
                    l_tip += a;
                    l_vec += b;
                }
                if gt.targets[j + 1][idx].c {
                    let (a, b) = embedding_error(&p.f2, g2);
                    l_tip += a;
                    l_vec += b;
                }
            }
        }
    }
    let l_kld = gauss.kl_to_standard();
    let total = weights.flag * l_flag
        + weights.pos * l_pos
        + weights.dir * l_dir
        + weights.tip * l_tip
        + weights.vec * l_vec
        + weights.kld * l_kld;
    Ok(LossBreakdown { l_flag, l_pos, l_dir, l_tip, l_vec, l_kld, total })
}

/// Scale-free summary of a manipulation task used for retrieval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionDescriptor {
    /// Canonical bounding-box extents of every part divided by the largest
    /// extent over all parts.
    pub extents: Vec<[f64; 3]>,
    /// Revolute angle of the first articulated part over the goal sequence,
    /// resampled to 16 evenly spaced points.
    pub angle_profile: Vec<f64>,
}

impl ConditionDescriptor {
    pub fn new(scene: &Scene, goals: &[GoalKeyframe]) -> Result<Self> {
        if goals.is_empty() {
            return Err(Error::invalid("goal sequence is empty"));
        }
        let raw: Vec<Vec3> = scene
            .parts
            .iter()
            .map(|p| {
                let mut lo = Vec3::repeat(f64::INFINITY);
                let mut hi = Vec3::repeat(f64::NEG_INFINITY);
                for v in p.mesh.vertices() {
                    let c = p.canonical_orientation * v;
                    lo = lo.inf(&c);
                    hi = hi.sup(&c);
                }
                hi - lo
            })
            .collect();
        let largest = raw.iter().map(|e| e.max()).fold(0.0, f64::max);
        if !(largest > 0.0) {
            return Err(Error::Degenerate("scene has zero extent".into()));
        }
        let extents = raw.iter().map(|e| [e.x / largest, e.y / largest, e.z / largest]).collect();

        let angles: Vec<f64> = match scene.parts.iter().position(|p| p.revolute_axis.is_some()) {
            Some(k) => goals.iter().map(|g| g.parts.get(k).map_or(0.0, |p| p.angle)).collect(),
            None => vec![0.0; goals.len()],
        };
        let angle_profile = (0..PROFILE_POINTS)
            .map(|s| {
                if angles.len() == 1 {
                    return angles[0];
                }
                let x = s as f64 / (PROFILE_POINTS - 1) as f64 * (angles.len() - 1) as f64;
                let i = (x.floor() as usize).min(angles.len() - 2);
                let w = x - i as f64;
                angles[i] * (1.0 - w) + angles[i + 1] * w
            })
            .collect();
        Ok(ConditionDescriptor { extents, angle_profile })
    }

    /// L2 distance of the angle profiles plus L2 distance of the extents
    /// (missing parts count as zero extents).
    pub fn distance(&self, other: &ConditionDescriptor) -> f64 {
        let profile: f64 = self
            .angle_profile
            .iter()
            .zip(&other.angle_profile)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let n = self.extents.len().max(other.extents.len());
        let get = |e: &[[f64; 3]], i: usize| e.get(i).copied().unwrap_or([0.0; 3]);
        let extent: f64 = (0..n)
            .map(|i| {
                let (a, b) = (get(&self.extents, i), get(&other.extents, i));
                (0..3).map(|q| (a[q] - b[q]) * (a[q] - b[q])).sum::<f64>()
            })
            .sum::<f64>()
            .sqrt();
        profile + extent
    }
}

#[derive(Debug, Clone)]
pub struct LibraryEntry {
    pub descriptor: ConditionDescriptor,
    pub cams: CamsSequence,
    /// Where the entry's representation was read from, if anywhere.
    pub source: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LibraryRecord {
    condition_descriptor: ConditionDescriptor,
    cams_file_path: PathBuf,
}

/// Reads a library file: a JSON array of `{condition_descriptor,
/// cams_file_path}` with paths relative to the library file.
pub fn load_library(path: &Path) -> Result<Vec<LibraryEntry>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::invalid(format!("cannot read library {}: {e}", path.display())))?;
    let records: Vec<LibraryRecord> = serde_json::from_str(&text)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    records
        .into_iter()
        .map(|r| {
            let cams_path = dir.join(&r.cams_file_path);
            let text = std::fs::read_to_string(&cams_path)
                .map_err(|e| Error::invalid(format!("cannot read {}: {e}", cams_path.display())))?;
            Ok(LibraryEntry {
                descriptor: r.condition_descriptor,
                cams: CamsSequence::from_json_str(&text)?,
                source: Some(cams_path),
            })
        })
        .collect()
}

/// Serializes library records for entries written next to the library file.
pub fn library_json(entries: &[(ConditionDescriptor, PathBuf)]) -> serde_json::Value {
    let records: Vec<LibraryRecord> = entries
        .iter()
        .map(|(d, p)| LibraryRecord { condition_descriptor: d.clone(), cams_file_path: p.clone() })
        .collect();
    serde_json::to_value(records).expect("library records serialize")
}

/// Index of the library entry closest to `query`; ties go to the earlier entry.
pub fn nearest_entry(query: &ConditionDescriptor, library: &[LibraryEntry]) -> Result<usize> {
    if library.is_empty() {
        return Err(Error::invalid("planner library is empty"));
    }
    let mut best = (0, f64::INFINITY);
    for (i, e) in library.iter().enumerate() {
        let d = query.distance(&e.descriptor);
        if d < best.1 {
            best = (i, d);
        }
    }
    Ok(best.0)
}

fn jitter_frame(fr: &mut FrameCams, rng: &mut ChaCha8Rng, normal: &Normal<f64>) {
    for s in &mut fr.tuples {
        if let Some((e1, e2)) = &mut s.embeddings {
            for e in [e1, e2] {
                e.tip += Vec3::from_fn(|_, _| normal.sample(rng));
            }
        }
    }
}

/// Plans a representation for `scene` and `goals` by retrieving the closest
/// library entry. With `jitter > 0` (meters) Gaussian noise is added to
/// contact positions and embedded fingertip positions, drawn from a
/// generator seeded with `seed`. `initial_pose` replaces the entry's
/// starting pose when given.
pub fn retrieval_plan(
    scene: &Scene,
    goals: &[GoalKeyframe],
    initial_pose: Option<&HandPose>,
    library: &[LibraryEntry],
    jitter: f64,
    seed: u64,
) -> Result<(usize, CamsSequence)> {
    if !(jitter >= 0.0) {
        return Err(Error::invalid("jitter must be non-negative"));
    }
    let query = ConditionDescriptor::new(scene, goals)?;
    let index = nearest_entry(&query, library)?;
    let mut cams = library[index].cams.clone();
    if cams.part_count() != scene.parts.len() {
        return Err(Error::ShapeMismatch(format!(
            "retrieved entry has {} parts, scene has {}",
            cams.part_count(),
            scene.parts.len()
        )));
    }
    if let Some(h) = initial_pose {
        cams.initial_pose = *h;
    }
    if jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let repr = cams.representation;
        for row in &mut cams.targets {
            for t in row.iter_mut().filter(|t| t.c) {
                let scale = repr.target_frame(&scene.parts[t.part]).scale;
                t.v += Vec3::from_fn(|_, _| unit.sample(&mut rng)) * (jitter / scale);
                if repr.npcs {
                    t.v = t.v.map(|x| x.clamp(0.0, 1.0));
                }
            }
        }
        let normal = Normal::new(0.0, jitter).expect("finite jitter");
        for fr in cams.frames.iter_mut().chain(cams.samples.iter_mut().flatten()) {
            jitter_frame(fr, &mut rng, &normal);
        }
    }
    Ok((index, cams))
}
