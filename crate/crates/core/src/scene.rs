//! Analytic signed-distance scenes and the queryable [`Surface`] abstraction.
//!
//! A scene is a union of spheres and axis-aligned boxes inside the bounding
//! cube `[-1, 1]³`. [`AnalyticSurface`] answers first-hit queries by sphere
//! tracing the exact union SDF; the voxel reconstruction implements the same
//! trait in [`crate::voxel`].

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Camera, Ray, Vec3};
use crate::par;
use crate::raster::{DepthMap, MaskImage, NormalMap, RgbImage};

/// Sphere tracing terminates once the SDF falls to this value.
pub const TRACE_TOLERANCE: f64 = 1e-5;
pub const MAX_TRACE_STEPS: usize = 256;
pub const MIN_TRACE_STEP: f64 = 1e-6;
/// Extra steps spent tightening a hit after it enters the tolerance band.
const POLISH_STEPS: usize = 64;
const POLISH_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("primitive {index} does not lie strictly inside the bounding cube [-1, 1]^3")]
    OutsideBoundingCube { index: usize },
    #[error("primitive {index} has non-positive size")]
    DegeneratePrimitive { index: usize },
    #[error("scene has no primitives")]
    Empty,
    #[error("ray origin lies inside the object (sdf = {0})")]
    RayStartsInside(f64),
    #[error("scene json: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
    },
}

fn default_albedo() -> [u8; 3] {
    [200, 200, 200]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    #[serde(flatten)]
    pub shape: Shape,
    #[serde(default = "default_albedo")]
    pub albedo: [u8; 3],
}

impl Primitive {
    pub fn sphere(center: [f64; 3], radius: f64, albedo: [u8; 3]) -> Self {
        Self {
            shape: Shape::Sphere { center, radius },
            albedo,
        }
    }

    pub fn cuboid(center: [f64; 3], half_extents: [f64; 3], albedo: [u8; 3]) -> Self {
        Self {
            shape: Shape::Box {
                center,
                half_extents,
            },
            albedo,
        }
    }

    pub fn sdf(&self, p: &Point3<f64>) -> f64 {
        match self.shape {
            Shape::Sphere { center, radius } => (p - Point3::from(center)).norm() - radius,
            Shape::Box {
                center,
                half_extents,
            } => {
                let q = (p - Point3::from(center)).abs() - Vec3::from(half_extents);
                let outside = q.map(|v| v.max(0.0)).norm();
                let inside = q.max().min(0.0);
                outside + inside
            }
        }
    }

    /// Analytic gradient of [`Primitive::sdf`].
    pub fn gradient(&self, p: &Point3<f64>) -> Vec3 {
        match self.shape {
            Shape::Sphere { center, .. } => {
                let d = p - Point3::from(center);
                let n = d.norm();
                if n > 0.0 {
                    d / n
                } else {
                    Vec3::z()
                }
            }
            Shape::Box {
                center,
                half_extents,
            } => {
                let d = p - Point3::from(center);
                let q = d.abs() - Vec3::from(half_extents);
                let sign = d.map(|v| if v < 0.0 { -1.0 } else { 1.0 });
                if q.max() > 0.0 {
                    let outside = q.map(|v| v.max(0.0));
                    outside.component_mul(&sign).normalize()
                } else {
                    let axis = q.imax();
                    let mut g = Vec3::zeros();
                    g[axis] = sign[axis];
                    g
                }
            }
        }
    }

    /// Axis-aligned bounds `(min, max)`.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let (c, h) = match self.shape {
            Shape::Sphere { center, radius } => (center, [radius; 3]),
            Shape::Box {
                center,
                half_extents,
            } => (center, half_extents),
        };
        (
            [c[0] - h[0], c[1] - h[1], c[2] - h[2]],
            [c[0] + h[0], c[1] + h[1], c[2] + h[2]],
        )
    }

    fn is_degenerate(&self) -> bool {
        match self.shape {
            Shape::Sphere { radius, .. } => radius.is_nan() || radius <= 0.0,
            Shape::Box { half_extents, .. } => half_extents.iter().any(|h| h.is_nan() || *h <= 0.0),
        }
    }
}

/// Union of primitives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Primitive>", into = "Vec<Primitive>")]
pub struct SdfScene {
    primitives: Vec<Primitive>,
}

impl TryFrom<Vec<Primitive>> for SdfScene {
    type Error = SceneError;

    fn try_from(primitives: Vec<Primitive>) -> Result<Self, Self::Error> {
        SdfScene::new(primitives)
    }
}

impl From<SdfScene> for Vec<Primitive> {
    fn from(scene: SdfScene) -> Self {
        scene.primitives
    }
}

impl SdfScene {
    pub fn new(primitives: Vec<Primitive>) -> Result<Self, SceneError> {
        if primitives.is_empty() {
            return Err(SceneError::Empty);
        }
        for (index, p) in primitives.iter().enumerate() {
            if p.is_degenerate() {
                return Err(SceneError::DegeneratePrimitive { index });
            }
            let (lo, hi) = p.bounds();
            if lo.iter().any(|v| *v <= -1.0) || hi.iter().any(|v| *v >= 1.0) {
                return Err(SceneError::OutsideBoundingCube { index });
            }
        }
        Ok(Self { primitives })
    }

    /// Sphere of radius `r` at the origin with a neutral albedo.
    pub fn sphere(radius: f64) -> Result<Self, SceneError> {
        Self::new(vec![Primitive::sphere([0.0; 3], radius, default_albedo())])
    }

    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        serde_json::from_str(text).map_err(|e| SceneError::Json(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.primitives).expect("primitives serialize")
    }

    pub fn primitives(&self) -> &[Primitive] {
        &self.primitives
    }

    pub fn sdf(&self, p: &Point3<f64>) -> f64 {
        self.primitives
            .iter()
            .map(|prim| prim.sdf(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// Primitive realizing the union minimum at `p`.
    pub fn closest(&self, p: &Point3<f64>) -> &Primitive {
        let mut best = &self.primitives[0];
        let mut best_d = best.sdf(p);
        for prim in &self.primitives[1..] {
            let d = prim.sdf(p);
            if d < best_d {
                best = prim;
                best_d = d;
            }
        }
        best
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        self.sdf(p) < 0.0
    }
}

/// Signed distance of the scene at `p`; negative inside.
pub fn sdf_eval(scene: &SdfScene, p: &Point3<f64>) -> f64 {
    scene.sdf(p)
}

/// Parametric interval `[t_enter, t_exit]` of a ray inside an axis-aligned box.
pub fn ray_box_interval(ray: &Ray, lo: [f64; 3], hi: [f64; 3]) -> Option<(f64, f64)> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        let o = ray.origin[a];
        let d = ray.direction[a];
        if d == 0.0 {
            if o < lo[a] || o > hi[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d;
        let (mut ta, mut tb) = ((lo[a] - o) * inv, (hi[a] - o) * inv);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
    }
    if t0 <= t1 && t1 >= 0.0 {
        Some((t0, t1))
    } else {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceHit {
    pub point: Point3<f64>,
    pub distance: f64,
}

/// Marches the ray by the SDF value until it hits the surface or leaves the
/// bounding cube. The ray origin must lie outside the object.
pub fn sphere_trace(scene: &SdfScene, ray: &Ray) -> Result<Option<TraceHit>, SceneError> {
    let s0 = scene.sdf(&ray.origin);
    if s0 < 0.0 {
        return Err(SceneError::RayStartsInside(s0));
    }
    let eps = 1e-9;
    let Some((enter, exit)) = ray_box_interval(ray, [-1.0 - eps; 3], [1.0 + eps; 3]) else {
        return Ok(None);
    };
    let mut t = enter.max(0.0);
    for _ in 0..MAX_TRACE_STEPS {
        let s = scene.sdf(&ray.at(t));
        if s <= TRACE_TOLERANCE {
            t = polish(scene, ray, t, s);
            return Ok(Some(TraceHit {
                point: ray.at(t),
                distance: t,
            }));
        }
        t += s.max(MIN_TRACE_STEP);
        if t > exit {
            return Ok(None);
        }
    }
    Ok(None)
}

/// Continues stepping by the (exact, hence non-overshooting) distance while it
/// keeps shrinking, so hits sit on the exterior side of the zero level set.
fn polish(scene: &SdfScene, ray: &Ray, mut t: f64, mut s: f64) -> f64 {
    for _ in 0..POLISH_STEPS {
        if s <= POLISH_TOLERANCE {
            break;
        }
        let next = scene.sdf(&ray.at(t + s));
        if next < 0.0 || next >= s {
            break;
        }
        t += s;
        s = next;
    }
    t
}

/// Ray intersection with a queryable surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub point: Point3<f64>,
    /// Euclidean distance from the ray origin.
    pub distance: f64,
    /// Outward unit normal at the hit.
    pub normal: Vec3,
}

/// Something a camera ray can hit: the stand-in for a trained implicit surface.
pub trait Surface: Send + Sync {
    /// First exterior-to-interior crossing along the ray.
    fn first_hit(&self, ray: &Ray) -> Option<SurfaceHit>;
    fn normal_at(&self, p: &Point3<f64>) -> Vec3;
}

/// Exact SDF scene queried by sphere tracing.
#[derive(Debug, Clone)]
pub struct AnalyticSurface {
    scene: SdfScene,
}

impl AnalyticSurface {
    pub fn new(scene: SdfScene) -> Self {
        Self { scene }
    }

    pub fn scene(&self) -> &SdfScene {
        &self.scene
    }
}

impl Surface for AnalyticSurface {
    fn first_hit(&self, ray: &Ray) -> Option<SurfaceHit> {
        let hit = sphere_trace(&self.scene, ray).ok()??;
        Some(SurfaceHit {
            point: hit.point,
            distance: hit.distance,
            normal: self.normal_at(&hit.point),
        })
    }

    fn normal_at(&self, p: &Point3<f64>) -> Vec3 {
        self.scene.closest(p).gradient(p)
    }
}

/// Depth, normals and silhouette of a surface from one camera, sampled at pixel centers.
pub fn render_view(surface: &dyn Surface, camera: &Camera) -> (DepthMap, NormalMap, MaskImage) {
    let (w, h) = (camera.width(), camera.height());
    let hits = par::flat_map_range(h as usize, |y| {
        (0..w)
            .map(|x| surface.first_hit(&camera.pixel_center_ray(x, y as u32)))
            .collect()
    });
    let mut depth = DepthMap::new(w, h);
    let mut normal = NormalMap::new(w, h);
    let mut mask = MaskImage::new(w, h);
    for (i, hit) in hits.into_iter().enumerate() {
        let Some(hit) = hit else { continue };
        let (x, y) = (i as u32 % w, i as u32 / w);
        depth.set(x, y, hit.distance as f32);
        normal.set(
            x,
            y,
            [
                hit.normal.x as f32,
                hit.normal.y as f32,
                hit.normal.z as f32,
            ],
        );
        mask.set(x, y, true);
    }
    (depth, normal, mask)
}

/// Lambert-shaded albedo for a hit seen along `ray`.
pub fn shade(albedo: [u8; 3], normal: &Vec3, ray: &Ray) -> [u8; 3] {
    let lambert = normal.dot(&-ray.direction).max(0.0);
    albedo.map(|c| (c as f64 * lambert).round().clamp(0.0, 255.0) as u8)
}

/// Color render of a scene: shaded albedo over a white background.
pub fn render_color(scene: &SdfScene, camera: &Camera) -> RgbImage {
    let surface = AnalyticSurface::new(scene.clone());
    let (w, h) = (camera.width(), camera.height());
    let colors = par::flat_map_range(h as usize, |y| {
        (0..w)
            .map(|x| {
                let ray = camera.ray(&Point2::new(x as f64 + 0.5, y as f64 + 0.5));
                match surface.first_hit(&ray) {
                    Some(hit) => shade(scene.closest(&hit.point).albedo, &hit.normal, &ray),
                    None => RgbImage::WHITE,
                }
            })
            .collect()
    });
    let mut img = RgbImage::filled(w, h, RgbImage::WHITE);
    for (i, c) in colors.into_iter().enumerate() {
        img.set(i as u32 % w, i as u32 / w, c);
    }
    img
}
