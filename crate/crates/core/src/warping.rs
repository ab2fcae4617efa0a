//! Foreground masks at a target view by lifting seen pixels onto the surface,
//! discarding back-facing points, and reprojecting the rest.

use nalgebra::{Point2, Point3};

use crate::dataset::ViewRecord;
use crate::geometry::{Camera, CameraPose, Vec3};
use crate::par;
use crate::raster::{MaskImage, RasterError};
use crate::scene::Surface;

/// Supersampling factor applied to source views before lifting.
pub const DEFAULT_UPSCALE: u32 = 8;

/// A source-view pixel lifted onto the surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiftedPixel {
    pub point: Point3<f64>,
    pub normal: Vec3,
    pub source_view: usize,
}

/// Lifts every foreground subpixel of `mask` on an `upscale`× supersampled grid.
/// Subpixels whose rays miss the surface are skipped.
pub fn lift_mask(
    mask: &MaskImage,
    camera: &Camera,
    surface: &dyn Surface,
    upscale: u32,
    source_view: usize,
) -> Vec<LiftedPixel> {
    let up = upscale.max(1);
    let inv = 1.0 / up as f64;
    let (w, h) = mask.dims();
    par::flat_map_range(h as usize, |y| {
        let y = y as u32;
        let mut row = Vec::new();
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            for sy in 0..up {
                for sx in 0..up {
                    let px = Point2::new(
                        x as f64 + (sx as f64 + 0.5) * inv,
                        y as f64 + (sy as f64 + 0.5) * inv,
                    );
                    if let Some(hit) = surface.first_hit(&camera.ray(&px)) {
                        row.push(LiftedPixel {
                            point: hit.point,
                            normal: surface.normal_at(&hit.point),
                            source_view,
                        });
                    }
                }
            }
        }
        row
    })
}

/// Lifts a dataset view's foreground.
pub fn lift_view(view: &ViewRecord, surface: &dyn Surface, upscale: u32) -> Vec<LiftedPixel> {
    lift_mask(
        &view.mask,
        &view.camera(),
        surface,
        upscale,
        view.view_index,
    )
}

/// Whether a lifted point faces the camera at `target_center` (strictly).
pub fn faces(point: &LiftedPixel, target_center: &Point3<f64>) -> bool {
    (point.point - target_center).dot(&point.normal) < 0.0
}

/// Keeps the points whose normals face the target camera.
pub fn cull_backpoints(points: &[LiftedPixel], target_pose: &CameraPose) -> Vec<LiftedPixel> {
    let o = target_pose.center();
    points.iter().filter(|p| faces(p, &o)).copied().collect()
}

/// Splats each point into the pixel its projection falls in.
pub fn warp_to_mask(points: &[LiftedPixel], camera: &Camera) -> MaskImage {
    let mut mask = MaskImage::new(camera.width(), camera.height());
    splat(&mut mask, points, camera);
    mask
}

fn splat(mask: &mut MaskImage, points: &[LiftedPixel], camera: &Camera) {
    for p in points {
        if let Some((x, y)) = camera.pixel_of(&p.point) {
            mask.set(x, y, true);
        }
    }
}

/// Culls and splats into an existing mask (used to accumulate several source views).
pub fn warp_culled_into(mask: &mut MaskImage, points: &[LiftedPixel], camera: &Camera) {
    let o = camera.center();
    for p in points {
        if faces(p, &o) {
            if let Some((x, y)) = camera.pixel_of(&p.point) {
                mask.set(x, y, true);
            }
        }
    }
}

/// Outpainting region: hull silhouette minus the warped foreground.
pub fn outpaint_mask(hull: &MaskImage, foreground: &MaskImage) -> Result<MaskImage, RasterError> {
    hull.minus(foreground)
}
