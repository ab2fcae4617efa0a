//! Independent reference implementations used by the integration and
//! acceptance tests. Nothing here calls into the library's projection, tracing
//! or carving code; only plain data types are shared.

#![allow(dead_code)]

use carvepipe::raster::MaskImage;
use carvepipe::scene::{Primitive, SdfScene, Shape};
use carvepipe::CameraPose;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type V3 = [f64; 3];

pub fn add(a: V3, b: V3) -> V3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}
pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
pub fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}
pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
pub fn cross(a: V3, b: V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}
pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}
pub fn unit(a: V3) -> V3 {
    scale(a, 1.0 / norm(a))
}

/// Hand-built pinhole camera: look-at the origin, `+z` up, image x right, y down.
#[derive(Debug, Clone, Copy)]
pub struct RefCamera {
    pub center: V3,
    pub right: V3,
    pub down: V3,
    pub forward: V3,
    pub f: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl RefCamera {
    pub fn new(
        polar_deg: f64,
        azimuth_deg: f64,
        radius: f64,
        fov_deg: f64,
        width: u32,
        height: u32,
    ) -> Self {
        let (th, ph) = (polar_deg.to_radians(), azimuth_deg.to_radians());
        let center = [
            radius * th.sin() * ph.cos(),
            radius * th.sin() * ph.sin(),
            radius * th.cos(),
        ];
        let forward = unit(scale(center, -1.0));
        let mut r = cross(forward, [0.0, 0.0, 1.0]);
        if norm(r) < 1e-12 {
            r = cross(forward, [1.0, 0.0, 0.0]);
        }
        let right = unit(r);
        let down = cross(forward, right);
        Self {
            center,
            right,
            down,
            forward,
            f: (width as f64 / 2.0) / (fov_deg.to_radians() / 2.0).tan(),
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    pub fn from_pose(p: &CameraPose, width: u32, height: u32) -> Self {
        Self::new(
            p.polar_deg,
            p.azimuth_deg,
            p.radius,
            p.fov_deg,
            width,
            height,
        )
    }

    /// Continuous pixel of a world point, if in front of the camera.
    pub fn project(&self, p: V3) -> Option<(f64, f64)> {
        let d = sub(p, self.center);
        let z = dot(d, self.forward);
        if z <= 0.0 {
            return None;
        }
        Some((
            self.f * dot(d, self.right) / z + self.cx,
            self.f * dot(d, self.down) / z + self.cy,
        ))
    }

    pub fn pixel(&self, p: V3) -> Option<(u32, u32)> {
        let (u, v) = self.project(p)?;
        if !(u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64) {
            return None;
        }
        Some((u.floor() as u32, v.floor() as u32))
    }

    /// Unit direction through continuous pixel `(u, v)`.
    pub fn direction(&self, u: f64, v: f64) -> V3 {
        let x = (u - self.cx) / self.f;
        let y = (v - self.cy) / self.f;
        unit(add(
            add(scale(self.right, x), scale(self.down, y)),
            self.forward,
        ))
    }
}

/// Entry distance of a ray into a primitive, by quadratic formula or slabs.
/// The origin is assumed to lie outside the primitive.
pub fn primitive_entry(shape: &Shape, o: V3, d: V3) -> Option<f64> {
    match shape {
        Shape::Sphere { center, radius } => {
            let oc = sub(o, *center);
            let b = dot(oc, d);
            let c = dot(oc, oc) - radius * radius;
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let t = -b - disc.sqrt();
            (t >= 0.0).then_some(t)
        }
        Shape::Box {
            center,
            half_extents,
        } => {
            let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
            for a in 0..3 {
                let lo = center[a] - half_extents[a];
                let hi = center[a] + half_extents[a];
                if d[a] == 0.0 {
                    if o[a] < lo || o[a] > hi {
                        return None;
                    }
                    continue;
                }
                let (ta, tb) = ((lo - o[a]) / d[a], (hi - o[a]) / d[a]);
                t0 = t0.max(ta.min(tb));
                t1 = t1.min(ta.max(tb));
            }
            (t0 <= t1 && t0 >= 0.0).then_some(t0)
        }
    }
}

/// First hit distance against the union: nearest primitive entry.
pub fn first_hit(scene: &SdfScene, o: V3, d: V3) -> Option<f64> {
    scene
        .primitives()
        .iter()
        .filter_map(|p| primitive_entry(&p.shape, o, d))
        .min_by(f64::total_cmp)
}

/// Point-in-object test straight from the primitive definitions.
pub fn inside(scene: &SdfScene, p: V3) -> bool {
    scene.primitives().iter().any(|prim| match &prim.shape {
        Shape::Sphere { center, radius } => norm(sub(p, *center)) < *radius,
        Shape::Box {
            center,
            half_extents,
        } => (0..3).all(|a| (p[a] - center[a]).abs() < half_extents[a]),
    })
}

pub fn voxel_center(r: usize, a: usize, b: usize, c: usize) -> V3 {
    let s = 2.0 / r as f64;
    [
        -1.0 + s * (a as f64 + 0.5),
        -1.0 + s * (b as f64 + 0.5),
        -1.0 + s * (c as f64 + 0.5),
    ]
}

/// Per-voxel vote rule with masks looked up at the projected pixel and `p*`
/// in closed form. Index order is x-fastest.
pub fn brute_force_carve(
    scene: &SdfScene,
    views: &[(&MaskImage, RefCamera)],
    r: usize,
) -> Vec<bool> {
    let mut out = Vec::with_capacity(r * r * r);
    for c in 0..r {
        for b in 0..r {
            for a in 0..r {
                let p = voxel_center(r, a, b, c);
                let keep = views.iter().all(|(mask, cam)| {
                    let Some((x, y)) = cam.pixel(p) else {
                        return false;
                    };
                    if !mask.get(x, y) {
                        return false;
                    }
                    let to = sub(p, cam.center);
                    let dist = norm(to);
                    match first_hit(scene, cam.center, unit(to)) {
                        Some(t) => dist >= t,
                        None => true,
                    }
                });
                out.push(keep);
            }
        }
    }
    out
}

/// Exact visual hull with depth: every view's ray toward the voxel hits the
/// object, no later than the voxel. No rasterization.
pub fn analytic_hull(scene: &SdfScene, cams: &[RefCamera], r: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(r * r * r);
    for c in 0..r {
        for b in 0..r {
            for a in 0..r {
                let p = voxel_center(r, a, b, c);
                out.push(cams.iter().all(|cam| {
                    let to = sub(p, cam.center);
                    matches!(first_hit(scene, cam.center, unit(to)), Some(t) if norm(to) >= t)
                }));
            }
        }
    }
    out
}

pub fn truth_occupancy(scene: &SdfScene, r: usize) -> Vec<bool> {
    let mut out = Vec::with_capacity(r * r * r);
    for c in 0..r {
        for b in 0..r {
            for a in 0..r {
                out.push(inside(scene, voxel_center(r, a, b, c)));
            }
        }
    }
    out
}

pub fn iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Seeded scene of one to three spheres and boxes well inside the cube.
pub fn random_scene(seed: u64) -> SdfScene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(1..=3);
    let mut prims = Vec::new();
    for _ in 0..n {
        let center = [
            rng.random_range(-0.35..0.35),
            rng.random_range(-0.35..0.35),
            rng.random_range(-0.35..0.35),
        ];
        let albedo = [
            rng.random_range(40..=255),
            rng.random_range(40..=255),
            rng.random_range(40..=255),
        ];
        if rng.random_bool(0.5) {
            prims.push(Primitive::sphere(
                center,
                rng.random_range(0.15..0.5),
                albedo,
            ));
        } else {
            let h = [
                rng.random_range(0.1..0.45),
                rng.random_range(0.1..0.45),
                rng.random_range(0.1..0.45),
            ];
            prims.push(Primitive::cuboid(center, h, albedo));
        }
    }
    SdfScene::new(prims).expect("random primitives stay inside the cube")
}

/// Seeded camera poses; the first is the initial pose.
pub fn random_poses(seed: u64, n: usize) -> Vec<CameraPose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut poses = vec![CameraPose::initial()];
    while poses.len() < n {
        let p = CameraPose::new(
            rng.random_range(20.0..160.0),
            rng.random_range(-179.0..180.0),
        )
        .unwrap();
        poses.push(p);
    }
    poses
}

/// Weighted fraction of the sphere cap visible from `src` that also faces
/// `dst`, with each surface element weighted by the pixel density it receives
/// in the source image (so it compares to per-pixel counts). Midpoint
/// quadrature over polar/azimuth.
pub fn culling_fraction(radius: f64, src: &RefCamera, dst_center: V3, steps: usize) -> f64 {
    let (mut kept, mut total) = (0.0, 0.0);
    let dth = std::f64::consts::PI / steps as f64;
    let dph = 2.0 * std::f64::consts::PI / (2 * steps) as f64;
    for i in 0..steps {
        let th = (i as f64 + 0.5) * dth;
        for j in 0..2 * steps {
            let ph = (j as f64 + 0.5) * dph;
            let n = [th.sin() * ph.cos(), th.sin() * ph.sin(), th.cos()];
            let p = scale(n, radius);
            let to_src = sub(src.center, p);
            let dist = norm(to_src);
            let cos_inc = dot(n, to_src) / dist;
            if cos_inc <= 0.0 {
                continue;
            }
            let Some((u, v)) = src.project(p) else {
                continue;
            };
            if !(u >= 0.0 && v >= 0.0 && u < src.width as f64 && v < src.height as f64) {
                continue;
            }
            // area element × solid angle per area × pixels per steradian
            let ray = scale(to_src, -1.0 / dist);
            let cos_axis = dot(ray, src.forward);
            let w = th.sin() * cos_inc / (dist * dist) / cos_axis.powi(3);
            total += w;
            if dot(sub(p, dst_center), n) < 0.0 {
                kept += w;
            }
        }
    }
    kept / total
}
