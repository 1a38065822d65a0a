//! Point, cloud and rigid-transform value types.
//!
//! Positions are `f64` meters in a right-handed frame. Colors keep the
//! sensor's 8-bit channels and are only turned into reals where a color
//! distance is needed.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Tolerance for the orthonormality and determinant checks on rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

/// 8-bit RGB color.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub [u8; 3]);

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb([r, g, b])
    }

    pub fn r(self) -> u8 {
        self.0[0]
    }

    pub fn g(self) -> u8 {
        self.0[1]
    }

    pub fn b(self) -> u8 {
        self.0[2]
    }

    /// Squared Euclidean distance with channels scaled to [0, 1].
    pub fn distance_sq(self, other: Rgb) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(&a, &b)| {
                let d = (a as f64 - b as f64) / 255.0;
                d * d
            })
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub position: Vec3,
    pub color: Rgb,
}

impl Point {
    pub fn new(position: Vec3, color: Rgb) -> Self {
        Point { position, color }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|c| c.is_finite())
    }
}

/// An index-ordered set of colored points. The order is fixed at
/// construction; label masks address points by index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
}

impl PointCloud {
    /// Builds a cloud, rejecting non-finite coordinates.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(Error::InvalidPoint {
                index,
                reason: "non-finite coordinate",
            });
        }
        Ok(PointCloud { points })
    }

    pub fn empty() -> Self {
        PointCloud::default()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn point(&self, index: usize) -> &Point {
        &self.points[index]
    }

    pub fn positions(&self) -> impl ExactSizeIterator<Item = &Vec3> + '_ {
        self.points.iter().map(|p| &p.position)
    }

    /// Copies the listed points, in the listed order, into a new cloud.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

#[inline]
pub fn squared_distance(a: &Vec3, b: &Vec3) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// Arithmetic mean of a nonempty point set.
pub fn centroid<'a, I>(points: I) -> Result<Vec3>
where
    I: IntoIterator<Item = &'a Vec3>,
{
    let mut sum = Vec3::zeros();
    let mut count = 0usize;
    for p in points {
        sum += p;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptyPointSet);
    }
    Ok(sum / count as f64)
}

/// Proper rigid motion `x -> rotation * x + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    /// Validates that `rotation` is orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let t = RigidTransform {
            rotation,
            translation,
        };
        t.check()?;
        Ok(t)
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    /// Rotation of `angle` radians about `axis`, followed by `translation`.
    /// A zero axis yields a pure translation.
    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let rotation = match Unit::try_new(axis, 1e-12) {
            Some(axis) => *Rotation3::from_axis_angle(&axis, angle).matrix(),
            None => Matrix3::identity(),
        };
        RigidTransform {
            rotation,
            translation,
        }
    }

    /// Builds from a rotation known to be proper, e.g. one produced by
    /// nalgebra's `Rotation3` or by composing valid transforms.
    pub(crate) fn from_parts(rotation: Matrix3<f64>, translation: Vec3) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// `max |RᵀR − I|`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity()).amax()
    }

    pub fn check(&self) -> Result<()> {
        if self.rotation.iter().chain(self.translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        let ortho = self.orthonormality_error();
        if ortho > ROTATION_TOLERANCE {
            return Err(Error::InvalidTransform(format!(
                "rotation not orthonormal (error {ortho:e})"
            )));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOLERANCE {
            return Err(Error::InvalidTransform(format!(
                "rotation determinant {det} is not +1"
            )));
        }
        Ok(())
    }

    pub fn is_valid(&self) -> bool {
        self.check().is_ok()
    }

    #[inline]
    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    /// Returns a moved copy of `cloud`; colors and order are unchanged.
    pub fn apply(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud {
            points: cloud
                .points
                .iter()
                .map(|p| Point::new(self.apply_point(&p.position), p.color))
                .collect(),
        }
    }

    /// `self ∘ other`: applying the result equals applying `other` first,
    /// then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle in radians, in [0, π].
    pub fn rotation_angle(&self) -> f64 {
        let cos = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        cos.acos()
    }

    /// Rotation angle of `self⁻¹ ∘ other` and the translation gap, used to
    /// compare an estimate against a reference.
    pub fn difference(&self, other: &RigidTransform) -> (f64, f64) {
        let angle = RigidTransform::from_parts(self.rotation.transpose() * other.rotation, Vec3::zeros())
            .rotation_angle();
        (angle, (self.translation - other.translation).norm())
    }
}
