//! Deterministic synthetic sequences of rigidly moving colored objects.
//!
//! Each object is sampled once in its local frame, then placed at frame
//! `k` with pose `(spin^k · R0, p0 + k · velocity)`. The generator keeps
//! the exact masks and poses so tests can score tracking against them.

use std::fs;
use std::path::Path;

use nalgebra::Unit;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::format::{self, LabelId, LabelMask};
use crate::geometry::{squared_distance, Point, PointCloud, RigidTransform, Rgb, Vec3};
use crate::sequence::{self, synthesized_timestamp_us, FrameSequence, DEFAULT_FPS};

pub const TRUTH_DIR: &str = "truth";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Solid axis-aligned box (in the object frame).
    Box { half_extents: [f64; 3] },
    /// Solid ellipsoid.
    Ellipsoid { radii: [f64; 3] },
    /// Solid cylinder along the local z axis.
    Cylinder { radius: f64, half_length: f64 },
}

impl Shape {
    fn sample(&self, rng: &mut impl Rng) -> Vec3 {
        match *self {
            Shape::Box { half_extents: h } => Vec3::new(
                rng.random_range(-1.0..=1.0) * h[0],
                rng.random_range(-1.0..=1.0) * h[1],
                rng.random_range(-1.0..=1.0) * h[2],
            ),
            Shape::Ellipsoid { radii: r } => loop {
                let u = Vec3::new(
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                );
                if u.norm_squared() <= 1.0 {
                    break Vec3::new(u.x * r[0], u.y * r[1], u.z * r[2]);
                }
            },
            Shape::Cylinder {
                radius,
                half_length,
            } => loop {
                let (x, y) = (rng.random_range(-1.0..=1.0), rng.random_range(-1.0..=1.0));
                if x * x + y * y <= 1.0 {
                    break Vec3::new(x * radius, y * radius, rng.random_range(-1.0..=1.0) * half_length);
                }
            },
        }
    }
}

fn zero3() -> [f64; 3] {
    [0.0; 3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    #[serde(default)]
    pub name: String,
    /// Ground-truth label; defaults to the object's 1-based position.
    #[serde(default)]
    pub label: Option<LabelId>,
    pub shape: Shape,
    pub point_count: usize,
    pub color: [u8; 3],
    pub position: [f64; 3],
    /// Initial orientation as a rotation vector (axis · angle, radians).
    #[serde(default = "zero3")]
    pub orientation: [f64; 3],
    /// Translation per frame.
    #[serde(default = "zero3")]
    pub velocity: [f64; 3],
    /// Rotation per frame about the object's own origin, as a rotation vector.
    #[serde(default = "zero3")]
    pub spin: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BackgroundSpec {
    pub point_count: usize,
    pub min: [f64; 3],
    pub max: [f64; 3],
    /// Fixed color; random per point when absent.
    #[serde(default)]
    pub color: Option<[u8; 3]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaptureVolume {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl CaptureVolume {
    fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(default = "default_fps")]
    pub fps: f64,
    /// Per-coordinate Gaussian noise added independently in every frame.
    #[serde(default)]
    pub noise_sigma: f64,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub background: Option<BackgroundSpec>,
    /// Points outside this box are not captured.
    #[serde(default)]
    pub capture_volume: Option<CaptureVolume>,
}

fn default_fps() -> f64 {
    DEFAULT_FPS
}

fn rotvec(v: [f64; 3]) -> RigidTransform {
    let v = Vec3::from(v);
    match Unit::try_new_and_get(v, 1e-15) {
        Some((axis, angle)) => RigidTransform::from_axis_angle(axis.into_inner(), angle, Vec3::zeros()),
        None => RigidTransform::identity(),
    }
}

impl ObjectSpec {
    /// Local-to-world pose at `frame`.
    pub fn pose(&self, frame: usize) -> RigidTransform {
        let spin = rotvec(self.spin);
        let mut rotation = rotvec(self.orientation);
        for _ in 0..frame {
            rotation = spin.compose(&rotation);
        }
        let translation = Vec3::from(self.position) + Vec3::from(self.velocity) * frame as f64;
        RigidTransform::from_translation(translation).compose(&rotation)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticSequence {
    pub fps: f64,
    pub frames: Vec<PointCloud>,
    pub timestamps_us: Vec<u64>,
    /// Exact per-frame labels: object label on object points, 0 elsewhere.
    pub truth_masks: Vec<LabelMask>,
    /// `poses[frame][object]`, local to world.
    pub poses: Vec<Vec<RigidTransform>>,
    pub labels: Vec<LabelId>,
}

impl SyntheticSequence {
    /// Motion of `object` from frame `from` to frame `to`, in world coordinates.
    pub fn relative_motion(&self, object: usize, from: usize, to: usize) -> RigidTransform {
        self.poses[to][object].compose(&self.poses[from][object].inverse())
    }

    /// Smallest centroid-centered sphere holding every captured point of `object`.
    /// The radius is rounded up so that `d² <= r²` holds for every member.
    pub fn bounding_sphere(&self, frame: usize, object: usize) -> Option<(Vec3, f64)> {
        let indices = self.truth_masks[frame].indices_of(self.labels[object]);
        let cloud = &self.frames[frame];
        let center = crate::geometry::centroid(indices.iter().map(|&i| &cloud.point(i).position)).ok()?;
        let max_sq = indices
            .iter()
            .map(|&i| squared_distance(&cloud.point(i).position, &center))
            .fold(0.0, f64::max);
        let mut radius = max_sq.sqrt();
        while radius * radius < max_sq {
            radius = radius.next_up();
        }
        Some((center, radius))
    }

    /// Writes the frames with a manifest, and the truth masks under `truth/`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<FrameSequence> {
        let dir = dir.as_ref();
        let frames: Vec<(PointCloud, u64)> = self
            .frames
            .iter()
            .cloned()
            .zip(self.timestamps_us.iter().copied())
            .collect();
        let seq = sequence::write_sequence(dir, self.fps, &frames)?;
        let truth = dir.join(TRUTH_DIR);
        fs::create_dir_all(&truth).map_err(|e| Error::io(&truth, e))?;
        for (i, mask) in self.truth_masks.iter().enumerate() {
            let path = truth
                .join(sequence::frame_file_name(i))
                .with_extension(sequence::MASK_EXTENSION);
            fs::write(&path, format::write_mask(mask)).map_err(|e| Error::io(&path, e))?;
        }
        Ok(seq)
    }
}

/// Generates `frame_count` frames of `scene`. Same seed, same output.
///
/// Positions are rounded to 32-bit floats, the precision frames are stored
/// at, so the returned clouds equal what reading the written files yields.
pub fn generate_synthetic_sequence(
    scene: &SceneSpec,
    frame_count: usize,
    seed: u64,
) -> Result<SyntheticSequence> {
    if scene.objects.is_empty() {
        return Err(Error::EmptyScene);
    }
    if frame_count == 0 {
        return Err(Error::EmptySequence);
    }
    if !(scene.fps.is_finite() && scene.fps > 0.0) {
        return Err(Error::InvalidParams(format!("fps {} must be positive", scene.fps)));
    }
    if !(scene.noise_sigma.is_finite() && scene.noise_sigma >= 0.0) {
        return Err(Error::InvalidParams("noise_sigma must be non-negative".into()));
    }
    let labels: Vec<LabelId> = scene
        .objects
        .iter()
        .enumerate()
        .map(|(i, o)| o.label.unwrap_or((i + 1) as LabelId))
        .collect();
    if labels.contains(&format::UNLABELED) {
        return Err(Error::InvalidParams("object label 0 is reserved".into()));
    }

    let mut shape_rng = ChaCha8Rng::seed_from_u64(seed);
    let bodies: Vec<Vec<Vec3>> = scene
        .objects
        .iter()
        .map(|o| (0..o.point_count).map(|_| o.shape.sample(&mut shape_rng)).collect())
        .collect();
    let background: Vec<Point> = match &scene.background {
        Some(bg) => (0..bg.point_count)
            .map(|_| {
                let p = Vec3::from_fn(|i, _| {
                    if bg.max[i] > bg.min[i] {
                        shape_rng.random_range(bg.min[i]..bg.max[i])
                    } else {
                        bg.min[i]
                    }
                });
                let color = bg.color.map(Rgb).unwrap_or_else(|| Rgb(shape_rng.random()));
                Point::new(p, color)
            })
            .collect(),
        None => Vec::new(),
    };

    let mut noise_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let noise = Normal::new(0.0, scene.noise_sigma.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidParams(e.to_string()))?;
    let mut jitter = |p: Vec3| -> Vec3 {
        let p = if scene.noise_sigma > 0.0 {
            p + Vec3::from_fn(|_, _| noise.sample(&mut noise_rng))
        } else {
            p
        };
        p.map(|c| c as f32 as f64)
    };

    let mut out = SyntheticSequence {
        fps: scene.fps,
        frames: Vec::with_capacity(frame_count),
        timestamps_us: Vec::with_capacity(frame_count),
        truth_masks: Vec::with_capacity(frame_count),
        poses: Vec::with_capacity(frame_count),
        labels: labels.clone(),
    };
    for k in 0..frame_count {
        let poses: Vec<RigidTransform> = scene.objects.iter().map(|o| o.pose(k)).collect();
        let mut points = Vec::new();
        let mut mask = Vec::new();
        let captured = |p: &Vec3| scene.capture_volume.as_ref().is_none_or(|v| v.contains(p));
        for ((object, body), (pose, &label)) in scene.objects.iter().zip(&bodies).zip(poses.iter().zip(&labels)) {
            for local in body {
                let p = jitter(pose.apply_point(local));
                if captured(&p) {
                    points.push(Point::new(p, Rgb(object.color)));
                    mask.push(label);
                }
            }
        }
        for bg in &background {
            let p = jitter(bg.position);
            if captured(&p) {
                points.push(Point::new(p, bg.color));
                mask.push(format::UNLABELED);
            }
        }
        out.frames.push(PointCloud::new(points)?);
        out.truth_masks.push(LabelMask::from_vec(mask));
        out.timestamps_us.push(synthesized_timestamp_us(k, scene.fps));
        out.poses.push(poses);
    }
    Ok(out)
}
