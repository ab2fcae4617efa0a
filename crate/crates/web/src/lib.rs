//! Browser bindings: render a view of a scene, compute the outpainting masks
//! for a schedule pose, and slice the carved hull.
//!
//! Everything returns RGBA bytes ready for `ImageData`.

use carvepipe::carving::hull_silhouette;
use carvepipe::pipeline::{pose_masks, visual_hull};
use carvepipe::raster::{MaskImage, RgbImage};
use carvepipe::scene::{render_color, render_view};
use carvepipe::{
    AnalyticSurface, Camera, CameraPose, CameraSchedule, PseudoDataset, SdfScene, ViewRecord,
    VoxelSurface,
};
use wasm_bindgen::prelude::*;

const HULL: [u8; 3] = [205, 205, 215];
const FOREGROUND: [u8; 3] = [60, 150, 90];
const OUTPAINT: [u8; 3] = [220, 60, 60];

fn rgba(img: &RgbImage) -> Vec<u8> {
    img.pixels()
        .iter()
        .flat_map(|p| [p[0], p[1], p[2], 255])
        .collect()
}

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Pixel counts of the three masks.
#[wasm_bindgen]
#[derive(Debug, Clone, Copy, Default)]
pub struct MaskStats {
    pub hull: u32,
    pub foreground: u32,
    pub outpaint: u32,
}

#[wasm_bindgen]
pub struct Demo {
    scene: SdfScene,
    schedule: CameraSchedule,
    size: u32,
}

#[wasm_bindgen]
impl Demo {
    /// `scene_json` may be empty for the default sphere of radius 0.5.
    #[wasm_bindgen(constructor)]
    pub fn new(scene_json: &str, size: u32) -> Result<Demo, JsError> {
        let scene = if scene_json.trim().is_empty() {
            SdfScene::sphere(0.5).map_err(js)?
        } else {
            SdfScene::from_json(scene_json).map_err(js)?
        };
        if size == 0 || size > 1024 {
            return Err(JsError::new("image size must be between 1 and 1024"));
        }
        Ok(Demo {
            scene,
            schedule: CameraSchedule::default_schedule(),
            size,
        })
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn schedule_len(&self) -> usize {
        self.schedule.len()
    }

    /// `[polar, azimuth]` of schedule entry `index`.
    pub fn schedule_pose(&self, index: usize) -> Vec<f64> {
        self.schedule
            .poses()
            .get(index)
            .map(|p| vec![p.polar_deg, p.azimuth_deg])
            .unwrap_or_default()
    }

    /// Shaded render of the scene.
    pub fn render(&self, polar_deg: f64, azimuth_deg: f64) -> Result<Vec<u8>, JsError> {
        let cam = self.camera(CameraPose::new(polar_deg, azimuth_deg).map_err(js)?)?;
        Ok(rgba(&render_color(&self.scene, &cam)))
    }

    /// Hull (grey), warped foreground (green) and outpainting region (red) for
    /// schedule pose `index`, with every earlier pose counted as seen.
    pub fn masks(
        &self,
        index: usize,
        grid_resolution: usize,
        upscale: u32,
    ) -> Result<MaskView, JsError> {
        let pose = *self
            .schedule
            .poses()
            .get(index)
            .ok_or_else(|| JsError::new("index past the end of the schedule"))?;
        if index == 0 {
            return Err(JsError::new("index 0 is the input view; pick a later pose"));
        }
        let dataset = self.seen(index)?;
        let hull = visual_hull(&dataset, grid_resolution).map_err(js)?;
        let surface = VoxelSurface::new(hull.clone());
        let cam = self.camera(pose)?;
        let m = pose_masks(&hull, &surface, &dataset, &cam, upscale.clamp(1, 8)).map_err(js)?;
        let mut img = RgbImage::filled(self.size, self.size, RgbImage::WHITE);
        paint(&mut img, &m.hull, HULL);
        paint(&mut img, &m.foreground, FOREGROUND);
        paint(&mut img, &m.outpaint, OUTPAINT);
        Ok(MaskView {
            rgba: rgba(&img),
            stats: MaskStats {
                hull: m.hull.count() as u32,
                foreground: m.foreground.count() as u32,
                outpaint: m.outpaint.count() as u32,
            },
        })
    }

    /// Occupancy of the hull carved from the first `views` schedule poses, on
    /// the horizontal slice nearest to height `z` in [-1, 1]. One pixel per
    /// voxel, +x to the right and +y up.
    pub fn hull_slice(
        &self,
        views: usize,
        grid_resolution: usize,
        z: f64,
    ) -> Result<Vec<u8>, JsError> {
        let dataset = self.seen(views.clamp(1, self.schedule.len()))?;
        let grid = visual_hull(&dataset, grid_resolution).map_err(js)?;
        let r = grid.resolution();
        let k = (((z + 1.0) / 2.0 * r as f64).floor() as isize).clamp(0, r as isize - 1) as usize;
        let mut img = RgbImage::filled(r as u32, r as u32, RgbImage::WHITE);
        for b in 0..r {
            for a in 0..r {
                if grid.is_occupied(a, b, k) {
                    img.set(a as u32, (r - 1 - b) as u32, [40, 40, 60]);
                }
            }
        }
        Ok(rgba(&img))
    }

    /// Silhouette of the hull from the first `views` poses, seen from any pose.
    pub fn hull_view(
        &self,
        views: usize,
        grid_resolution: usize,
        polar_deg: f64,
        azimuth_deg: f64,
    ) -> Result<Vec<u8>, JsError> {
        let dataset = self.seen(views.clamp(1, self.schedule.len()))?;
        let grid = visual_hull(&dataset, grid_resolution).map_err(js)?;
        let cam = self.camera(CameraPose::new(polar_deg, azimuth_deg).map_err(js)?)?;
        let mut img = render_color(&self.scene, &cam);
        let sil = hull_silhouette(&grid, &cam);
        for y in 0..img.height() {
            for x in 0..img.width() {
                if sil.get(x, y) {
                    let c = img.get(x, y);
                    img.set(x, y, [c[0] / 2 + 100, c[1] / 2, c[2] / 2]);
                }
            }
        }
        Ok(rgba(&img))
    }
}

impl Demo {
    fn camera(&self, pose: CameraPose) -> Result<Camera, JsError> {
        Camera::square(pose, self.size).map_err(js)
    }

    /// Ground-truth views at the first `n` schedule poses.
    fn seen(&self, n: usize) -> Result<PseudoDataset, JsError> {
        let surface = AnalyticSurface::new(self.scene.clone());
        let mut dataset: Option<PseudoDataset> = None;
        for (i, pose) in self.schedule.poses()[..n].iter().enumerate() {
            let cam = self.camera(*pose)?;
            let (depth, normal, mask) = render_view(&surface, &cam);
            let record = ViewRecord {
                color: render_color(&self.scene, &cam),
                depth,
                normal,
                mask,
                pose: *pose,
                view_index: i,
            };
            match dataset.as_mut() {
                None => dataset = Some(PseudoDataset::init(record, "sks", "object").map_err(js)?),
                Some(d) => d.append(record).map_err(js)?,
            }
        }
        dataset.ok_or_else(|| JsError::new("no views"))
    }
}

fn paint(img: &mut RgbImage, mask: &MaskImage, color: [u8; 3]) {
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                img.set(x, y, color);
            }
        }
    }
}

#[wasm_bindgen]
pub struct MaskView {
    rgba: Vec<u8>,
    stats: MaskStats,
}

#[wasm_bindgen]
impl MaskView {
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    pub fn stats(&self) -> MaskStats {
        self.stats
    }
}
