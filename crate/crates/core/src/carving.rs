//! Vote-based space carving of the bounding cube.
//!
//! A voxel center `p` gets one vote from view `j` when
//!
//! 1. its projection lands on a foreground pixel of the view's mask
//!    (nearest-pixel lookup; off-image and behind-camera count as background), and
//! 2. `‖p − o_j‖ ≥ ‖p* − o_j‖`, where `p*` is the first hit of the ray from the
//!    camera center `o_j` toward `p`. When that ray hits nothing the vote is
//!    granted.
//!
//! A voxel survives when it is voted for by every view.

use thiserror::Error;

use crate::geometry::{Camera, Ray};
use crate::par;
use crate::raster::{DepthMap, MaskImage};
use crate::scene::Surface;
use crate::voxel::{voxel_center, VoxelGrid, VoxelTracer};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CarveError {
    #[error("carving needs at least one view")]
    NoViews,
    #[error("grid resolution must be positive")]
    ZeroResolution,
    #[error("view {view}: mask is {mask_w}x{mask_h} but the camera is {cam_w}x{cam_h}")]
    MaskDimensionMismatch {
        view: usize,
        mask_w: u32,
        mask_h: u32,
        cam_w: u32,
        cam_h: u32,
    },
    #[error("view {view}: no depth map supplied for depth-map carving")]
    MissingDepth { view: usize },
    #[error("view {view}: depth map dimensions differ from the mask")]
    DepthDimensionMismatch { view: usize },
}

/// One silhouette observation.
#[derive(Debug, Clone, Copy)]
pub struct CarveView<'a> {
    pub mask: &'a MaskImage,
    pub camera: Camera,
    pub depth: Option<&'a DepthMap>,
}

impl<'a> CarveView<'a> {
    pub fn new(mask: &'a MaskImage, camera: Camera) -> Self {
        Self {
            mask,
            camera,
            depth: None,
        }
    }

    pub fn with_depth(mask: &'a MaskImage, depth: &'a DepthMap, camera: Camera) -> Self {
        Self {
            mask,
            camera,
            depth: Some(depth),
        }
    }
}

fn validate(views: &[CarveView<'_>], resolution: usize) -> Result<(), CarveError> {
    if views.is_empty() {
        return Err(CarveError::NoViews);
    }
    if resolution == 0 {
        return Err(CarveError::ZeroResolution);
    }
    for (view, v) in views.iter().enumerate() {
        let (mask_w, mask_h) = v.mask.dims();
        let (cam_w, cam_h) = (v.camera.width(), v.camera.height());
        if (mask_w, mask_h) != (cam_w, cam_h) {
            return Err(CarveError::MaskDimensionMismatch {
                view,
                mask_w,
                mask_h,
                cam_w,
                cam_h,
            });
        }
    }
    Ok(())
}

/// Counts votes with `first_hit(view, ray_to_voxel, pixel)` supplying the
/// distance to `p*` (or `None` when the ray does not hit).
fn carve_with<F>(views: &[CarveView<'_>], resolution: usize, first_hit: F) -> VoxelGrid
where
    F: Fn(usize, &Ray, (u32, u32)) -> Option<f64> + Sync + Send,
{
    let r = resolution;
    let votes = par::flat_map_range(r, |c| {
        let mut slice = vec![0u32; r * r];
        for b in 0..r {
            for a in 0..r {
                let p = voxel_center(r, a, b, c);
                let mut count = 0;
                for (j, view) in views.iter().enumerate() {
                    let Some((x, y)) = view.camera.pixel_of(&p) else {
                        continue;
                    };
                    if !view.mask.get(x, y) {
                        continue;
                    }
                    let o = view.camera.center();
                    let dist = (p - o).norm();
                    let ray = Ray::toward(o, &p);
                    let granted = match first_hit(j, &ray, (x, y)) {
                        Some(hit) => dist >= hit,
                        None => true,
                    };
                    if granted {
                        count += 1;
                    }
                }
                slice[a + r * b] = count;
            }
        }
        slice
    });
    VoxelGrid::from_votes(r, votes, views.len() as u32)
}

/// Carves with `p*` taken from the first hit of `surface`.
pub fn carve(
    views: &[CarveView<'_>],
    surface: &dyn Surface,
    resolution: usize,
) -> Result<VoxelGrid, CarveError> {
    validate(views, resolution)?;
    Ok(carve_with(views, resolution, |_, ray, _| {
        surface.first_hit(ray).map(|h| h.distance)
    }))
}

/// Carves with `p*` read from each view's depth map at the voxel's pixel.
pub fn carve_with_depth_maps(
    views: &[CarveView<'_>],
    resolution: usize,
) -> Result<VoxelGrid, CarveError> {
    validate(views, resolution)?;
    let mut depths = Vec::with_capacity(views.len());
    for (view, v) in views.iter().enumerate() {
        let d = v.depth.ok_or(CarveError::MissingDepth { view })?;
        if d.dims() != v.mask.dims() {
            return Err(CarveError::DepthDimensionMismatch { view });
        }
        depths.push(d);
    }
    Ok(carve_with(views, resolution, |j, _, (x, y)| {
        let d = depths[j].get(x, y);
        d.is_finite().then_some(d as f64)
    }))
}

/// Silhouette of the occupied voxels: a pixel is set when its center ray
/// crosses an occupied voxel.
pub fn hull_silhouette(grid: &VoxelGrid, camera: &Camera) -> MaskImage {
    hull_silhouette_traced(&VoxelTracer::new(grid.clone()), camera)
}

pub fn hull_silhouette_traced(tracer: &VoxelTracer, camera: &Camera) -> MaskImage {
    let (w, h) = (camera.width(), camera.height());
    let bits = par::flat_map_range(h as usize, |y| {
        (0..w)
            .map(|x| {
                tracer
                    .first_occupied(&camera.pixel_center_ray(x, y as u32))
                    .is_some() as u8
            })
            .collect()
    });
    MaskImage::from_bits(w, h, bits).expect("bits are binary")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CameraPose;
    use crate::scene::{render_view, AnalyticSurface, SdfScene};

    fn sphere_views(azimuths: &[f64], size: u32) -> (AnalyticSurface, Vec<(MaskImage, Camera)>) {
        let surface = AnalyticSurface::new(SdfScene::sphere(0.5).unwrap());
        let views = azimuths
            .iter()
            .map(|&a| {
                let cam = Camera::square(CameraPose::new(90.0, a).unwrap(), size).unwrap();
                let (_, _, mask) = render_view(&surface, &cam);
                (mask, cam)
            })
            .collect();
        (surface, views)
    }

    #[test]
    fn empty_and_mismatched_inputs() {
        let surface = AnalyticSurface::new(SdfScene::sphere(0.5).unwrap());
        assert_eq!(carve(&[], &surface, 8).unwrap_err(), CarveError::NoViews);
        let mask = MaskImage::new(10, 10);
        let cam = Camera::square(CameraPose::initial(), 12).unwrap();
        let err = carve(&[CarveView::new(&mask, cam)], &surface, 8).unwrap_err();
        assert!(matches!(
            err,
            CarveError::MaskDimensionMismatch { view: 0, .. }
        ));
        let cam = Camera::square(CameraPose::initial(), 10).unwrap();
        let err = carve_with_depth_maps(&[CarveView::new(&mask, cam)], 8).unwrap_err();
        assert_eq!(err, CarveError::MissingDepth { view: 0 });
    }

    #[test]
    fn adding_views_never_adds_voxels() {
        let (surface, views) = sphere_views(&[0.0, 45.0, -45.0, 90.0], 65);
        let mut prev: Option<Vec<bool>> = None;
        for n in 1..=views.len() {
            let cv: Vec<_> = views[..n]
                .iter()
                .map(|(m, c)| CarveView::new(m, *c))
                .collect();
            let occ = carve(&cv, &surface, 24).unwrap().occupancy();
            if let Some(p) = &prev {
                assert!(occ.iter().zip(p).all(|(now, before)| !*now || *before));
            }
            prev = Some(occ);
        }
    }

    #[test]
    fn hull_reprojection_covers_input_mask() {
        let (surface, views) = sphere_views(&[0.0, 90.0], 64);
        let cv: Vec<_> = views.iter().map(|(m, c)| CarveView::new(m, *c)).collect();
        let grid = carve(&cv, &surface, 48).unwrap();
        for (mask, cam) in &views {
            let sil = hull_silhouette(&grid, cam);
            assert!(mask.is_subset_of(&sil).unwrap());
        }
    }

    #[test]
    fn empty_grid_has_empty_silhouette() {
        let cam = Camera::square(CameraPose::initial(), 32).unwrap();
        assert_eq!(hull_silhouette(&VoxelGrid::empty(8), &cam).count(), 0);
    }

    #[test]
    fn depth_map_carving_extrudes_front_surface() {
        let (surface, _) = sphere_views(&[], 0);
        let cam = Camera::square(CameraPose::initial(), 64).unwrap();
        let (depth, _, mask) = render_view(&surface, &cam);
        let grid = carve_with_depth_maps(&[CarveView::with_depth(&mask, &depth, cam)], 32).unwrap();
        // every voxel in front of the sphere (x > 0.5, on the axis) is carved,
        // everything behind it along the axis is kept
        let r = grid.resolution();
        let mid = r / 2;
        for a in 0..r {
            let p = grid.center(a, mid, mid);
            assert_eq!(grid.is_occupied(a, mid, mid), p.x <= 0.5, "x = {}", p.x);
        }
    }
}
