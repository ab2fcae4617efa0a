//! Pinhole cameras on the view sphere.
//!
//! World up is `+z`. The polar angle is measured from `+z`, the azimuth from
//! `+x` toward `+y`, and every camera looks at the world origin. Camera frames
//! follow the usual computer-vision convention: `x` right, `y` down, `z`
//! forward along the optical axis.

use nalgebra::{Matrix3, Point2, Point3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Distance of the view sphere from the origin.
pub const DEFAULT_RADIUS: f64 = 3.0;
/// Horizontal and vertical field of view (square pixels, square images).
pub const DEFAULT_FOV_DEG: f64 = 60.0;
/// Target image resolution of the reconstruction loop.
pub const DEFAULT_IMAGE_SIZE: u32 = 384;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("polar angle {0}° outside the open interval (0, 180)")]
    PolarOutOfRange(f64),
    #[error("azimuth {0}° outside the half-open interval (-180, 180]")]
    AzimuthOutOfRange(f64),
    #[error("camera radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("field of view must lie in (0, 180), got {0}°")]
    BadFov(f64),
    #[error("point lies behind the camera (camera-frame z = {0})")]
    BehindCamera(f64),
    #[error("unprojection distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("image dimensions must be nonzero, got {0}x{1}")]
    EmptyImage(u32, u32),
}

fn default_radius() -> f64 {
    DEFAULT_RADIUS
}

fn default_fov() -> f64 {
    DEFAULT_FOV_DEG
}

/// A camera position on the view sphere, looking at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose")]
pub struct CameraPose {
    pub polar_deg: f64,
    pub azimuth_deg: f64,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_fov")]
    pub fov_deg: f64,
}

#[derive(Deserialize)]
struct RawPose {
    polar_deg: f64,
    azimuth_deg: f64,
    #[serde(default = "default_radius")]
    radius: f64,
    #[serde(default = "default_fov")]
    fov_deg: f64,
}

impl TryFrom<RawPose> for CameraPose {
    type Error = GeometryError;

    fn try_from(raw: RawPose) -> Result<Self, Self::Error> {
        CameraPose::with_params(raw.polar_deg, raw.azimuth_deg, raw.radius, raw.fov_deg)
    }
}

impl CameraPose {
    /// Pose on the default sphere (radius 3, FoV 60°).
    pub fn new(polar_deg: f64, azimuth_deg: f64) -> Result<Self, GeometryError> {
        Self::with_params(polar_deg, azimuth_deg, DEFAULT_RADIUS, DEFAULT_FOV_DEG)
    }

    pub fn with_params(
        polar_deg: f64,
        azimuth_deg: f64,
        radius: f64,
        fov_deg: f64,
    ) -> Result<Self, GeometryError> {
        if !(polar_deg > 0.0 && polar_deg < 180.0) {
            return Err(GeometryError::PolarOutOfRange(polar_deg));
        }
        if !(azimuth_deg > -180.0 && azimuth_deg <= 180.0) {
            return Err(GeometryError::AzimuthOutOfRange(azimuth_deg));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(GeometryError::BadRadius(radius));
        }
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(GeometryError::BadFov(fov_deg));
        }
        Ok(Self {
            polar_deg,
            azimuth_deg,
            radius,
            fov_deg,
        })
    }

    /// The first pose of every schedule: on the equator, facing the object front.
    pub fn initial() -> Self {
        Self {
            polar_deg: 90.0,
            azimuth_deg: 0.0,
            radius: DEFAULT_RADIUS,
            fov_deg: DEFAULT_FOV_DEG,
        }
    }

    /// Unit vector from the origin toward the camera center.
    pub fn direction(&self) -> Vec3 {
        let (st, ct) = self.polar_deg.to_radians().sin_cos();
        let (sp, cp) = self.azimuth_deg.to_radians().sin_cos();
        Vec3::new(st * cp, st * sp, ct)
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from(self.direction() * self.radius)
    }

    /// Great-circle angle between the two camera directions, in degrees.
    pub fn angular_distance_deg(&self, other: &CameraPose) -> f64 {
        let c = self.direction().dot(&other.direction()).clamp(-1.0, 1.0);
        c.acos().to_degrees()
    }

    /// Wraps an arbitrary azimuth into (-180, 180].
    pub fn wrap_azimuth(azimuth_deg: f64) -> f64 {
        let mut a = azimuth_deg % 360.0;
        if a <= -180.0 {
            a += 360.0;
        } else if a > 180.0 {
            a -= 360.0;
        }
        a
    }
}

/// Pinhole intrinsics with square pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: u32,
    pub height: u32,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

impl Intrinsics {
    pub fn from_fov(width: u32, height: u32, fov_deg: f64) -> Result<Self, GeometryError> {
        if width == 0 || height == 0 {
            return Err(GeometryError::EmptyImage(width, height));
        }
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(GeometryError::BadFov(fov_deg));
        }
        let f = (width as f64 / 2.0) / (fov_deg.to_radians() / 2.0).tan();
        Ok(Self {
            width,
            height,
            fx: f,
            fy: f,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
        })
    }

    /// Square image of `size` pixels using the pose's field of view.
    pub fn square(size: u32, fov_deg: f64) -> Result<Self, GeometryError> {
        Self::from_fov(size, size, fov_deg)
    }

    /// Intrinsics of the same camera sampling `factor` times denser.
    pub fn scaled(&self, factor: u32) -> Self {
        let s = factor as f64;
        Self {
            width: self.width * factor,
            height: self.height * factor,
            fx: self.fx * s,
            fy: self.fy * s,
            cx: self.cx * s,
            cy: self.cy * s,
        }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    pub fn contains(&self, pixel: &Point2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x < self.width as f64
            && pixel.y < self.height as f64
    }

    /// Integer pixel containing a continuous coordinate, if inside the image.
    pub fn pixel_index(&self, pixel: &Point2<f64>) -> Option<(u32, u32)> {
        if self.contains(pixel) {
            Some((pixel.x.floor() as u32, pixel.y.floor() as u32))
        } else {
            None
        }
    }
}

/// Rigid transform `x' = R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self` applied after `first`.
    pub fn after(&self, first: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * first.rotation,
            translation: self.rotation * first.translation + self.translation,
        }
    }

    /// Rotation angle in degrees.
    pub fn angle_deg(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos().to_degrees()
    }

    /// Unit rotation axis, `None` for (near) identity rotations.
    pub fn axis(&self) -> Option<Vec3> {
        Rotation3::from_matrix_unchecked(self.rotation)
            .axis()
            .map(Unit::into_inner)
    }
}

/// World-to-camera transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Extrinsics {
    pub fn as_transform(&self) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation,
            translation: self.translation,
        }
    }

    pub fn world_to_camera(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn camera_to_world(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (p.coords - self.translation))
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.rotation.row(2).transpose()
    }
}

/// Look-at extrinsics for a pose. When the viewing direction is colinear with
/// `+z` the up hint falls back to `+x`.
pub fn pose_to_extrinsics(pose: &CameraPose) -> Extrinsics {
    let center = pose.center();
    let forward = (-center.coords).normalize();
    let mut right = forward.cross(&Vec3::z());
    if right.norm() < 1e-12 {
        right = forward.cross(&Vec3::x());
    }
    let right = right.normalize();
    let down = forward.cross(&right);
    let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
    let translation = -(rotation * center.coords);
    Extrinsics {
        rotation,
        translation,
    }
}

/// Continuous pixel coordinates and camera-frame depth of a world point.
pub fn project(
    k: &Intrinsics,
    e: &Extrinsics,
    p: &Point3<f64>,
) -> Result<(Point2<f64>, f64), GeometryError> {
    let c = e.world_to_camera(p);
    if c.z <= 0.0 {
        return Err(GeometryError::BehindCamera(c.z));
    }
    let pixel = Point2::new(k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy);
    Ok((pixel, c.z))
}

/// Unit ray direction through a pixel, in camera coordinates.
fn camera_direction(k: &Intrinsics, pixel: &Point2<f64>) -> Vec3 {
    Vec3::new((pixel.x - k.cx) / k.fx, (pixel.y - k.cy) / k.fy, 1.0).normalize()
}

/// World point at Euclidean `distance` from the camera center along the pixel ray.
pub fn unproject(
    k: &Intrinsics,
    e: &Extrinsics,
    pixel: &Point2<f64>,
    distance: f64,
) -> Result<Point3<f64>, GeometryError> {
    if distance.is_nan() || distance <= 0.0 {
        return Err(GeometryError::NonPositiveDistance(distance));
    }
    let ray = pixel_ray(k, e, pixel);
    Ok(ray.at(distance))
}

/// Transform taking `from`-camera coordinates into `to`-camera coordinates.
pub fn relative_transform(from: &Extrinsics, to: &Extrinsics) -> RigidTransform {
    to.as_transform().after(&from.as_transform().inverse())
}

/// Reprojects a source pixel with camera-frame depth into the target camera:
/// `K · T · K⁻¹ · (u z, v z, z)`. Returns the target pixel and camera-frame depth.
pub fn warp_pixel(
    k: &Intrinsics,
    rel: &RigidTransform,
    pixel: &Point2<f64>,
    cam_depth: f64,
) -> Result<(Point2<f64>, f64), GeometryError> {
    let kinv = k
        .matrix()
        .try_inverse()
        .expect("pinhole intrinsics are invertible");
    let src = kinv * Vec3::new(pixel.x * cam_depth, pixel.y * cam_depth, cam_depth);
    let dst = rel.apply(&Point3::from(src));
    if dst.z <= 0.0 {
        return Err(GeometryError::BehindCamera(dst.z));
    }
    let h = k.matrix() * dst.coords;
    Ok((Point2::new(h.x / h.z, h.y / h.z), dst.z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point3<f64>,
    pub direction: Vec3,
}

impl Ray {
    /// Normalizes `direction`.
    pub fn new(origin: Point3<f64>, direction: Vec3) -> Self {
        Self {
            origin,
            direction: direction.normalize(),
        }
    }

    /// Ray from `origin` through `target`.
    pub fn toward(origin: Point3<f64>, target: &Point3<f64>) -> Self {
        Self::new(origin, target - origin)
    }

    pub fn at(&self, t: f64) -> Point3<f64> {
        self.origin + self.direction * t
    }
}

pub fn pixel_ray(k: &Intrinsics, e: &Extrinsics, pixel: &Point2<f64>) -> Ray {
    let dir = e.rotation.transpose() * camera_direction(k, pixel);
    Ray {
        origin: e.center(),
        direction: dir,
    }
}

/// A pose together with its derived intrinsics and extrinsics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub pose: CameraPose,
    pub intrinsics: Intrinsics,
    pub extrinsics: Extrinsics,
}

impl Camera {
    pub fn new(pose: CameraPose, intrinsics: Intrinsics) -> Self {
        Self {
            pose,
            intrinsics,
            extrinsics: pose_to_extrinsics(&pose),
        }
    }

    /// Square camera of `size` pixels with the pose's field of view.
    pub fn square(pose: CameraPose, size: u32) -> Result<Self, GeometryError> {
        Ok(Self::new(pose, Intrinsics::square(size, pose.fov_deg)?))
    }

    pub fn center(&self) -> Point3<f64> {
        self.pose.center()
    }

    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    pub fn project(&self, p: &Point3<f64>) -> Result<(Point2<f64>, f64), GeometryError> {
        project(&self.intrinsics, &self.extrinsics, p)
    }

    /// Integer pixel a world point lands in (nearest-pixel lookup), if visible.
    pub fn pixel_of(&self, p: &Point3<f64>) -> Option<(u32, u32)> {
        let (px, _) = self.project(p).ok()?;
        self.intrinsics.pixel_index(&px)
    }

    pub fn ray(&self, pixel: &Point2<f64>) -> Ray {
        pixel_ray(&self.intrinsics, &self.extrinsics, pixel)
    }

    /// Ray through the center of integer pixel `(x, y)`.
    pub fn pixel_center_ray(&self, x: u32, y: u32) -> Ray {
        self.ray(&Point2::new(x as f64 + 0.5, y as f64 + 0.5))
    }

    pub fn unproject(
        &self,
        pixel: &Point2<f64>,
        distance: f64,
    ) -> Result<Point3<f64>, GeometryError> {
        unproject(&self.intrinsics, &self.extrinsics, pixel, distance)
    }

    /// Same pose sampled `factor` times denser.
    pub fn scaled(&self, factor: u32) -> Self {
        Self::new(self.pose, self.intrinsics.scaled(factor))
    }
}
