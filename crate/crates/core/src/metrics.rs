//! Image, mask and occupancy comparison metrics.

use crate::raster::{MaskImage, RasterError, RgbImage};
use crate::scene::SdfScene;
use crate::voxel::{GridError, VoxelGrid};

/// Intersection over union; two empty masks score 1.
pub fn mask_iou(a: &MaskImage, b: &MaskImage) -> Result<f64, RasterError> {
    let inter = a.and(b)?.count();
    let union = a.or(b)?.count();
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Peak signal-to-noise ratio in dB over all channels, with a peak of 255.
/// Identical images give `+inf`.
pub fn psnr(a: &RgbImage, b: &RgbImage) -> Result<f64, RasterError> {
    if a.dims() != b.dims() {
        let ((aw, ah), (bw, bh)) = (a.dims(), b.dims());
        return Err(RasterError::DimensionMismatch(aw, ah, bw, bh));
    }
    let sse: u64 = a
        .pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| {
            p.iter()
                .zip(q)
                .map(|(&x, &y)| (x as i64 - y as i64).pow(2) as u64)
        })
        .sum();
    if sse == 0 {
        return Ok(f64::INFINITY);
    }
    let mse = sse as f64 / (a.pixels().len() * 3) as f64;
    Ok(10.0 * (255.0f64 * 255.0 / mse).log10())
}

/// Occupancy IoU of two grids at the same resolution; two empty grids score 1.
pub fn voxel_iou(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64, GridError> {
    if a.resolution() != b.resolution() {
        return Err(GridError::ResolutionMismatch(
            a.resolution(),
            b.resolution(),
        ));
    }
    let (mut inter, mut union) = (0usize, 0usize);
    for i in 0..a.len() {
        let (x, y) = (a.is_occupied_index(i), b.is_occupied_index(i));
        inter += (x && y) as usize;
        union += (x || y) as usize;
    }
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Voxels whose centers lie inside the scene.
pub fn occupancy_of_scene(scene: &SdfScene, resolution: usize) -> VoxelGrid {
    VoxelGrid::from_occupancy(resolution, |a, b, c| {
        scene.contains(&crate::voxel::voxel_center(resolution, a, b, c))
    })
}
