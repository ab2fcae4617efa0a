//! The progressive loop: carve the views seen so far, find what the next camera
//! has not seen, have it generated, add the result to the dataset, refit.
//!
//! Output directory layout:
//!
//! ```text
//! <out>/dataset/            pseudo-ground-truth views (manifest.json, view_XXX/)
//! <out>/grids/iter_XXX.rle  reconstruction after each iteration
//! <out>/stages/iter_XXX/<kind>/  stage requests, inputs and outputs
//! <out>/grid.rle            final reconstruction
//! <out>/state.json          resume point
//! <out>/report.json         per-iteration areas, voxel counts and timings
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::carving::{carve_with_depth_maps, hull_silhouette, CarveError, CarveView};
use crate::dataset::{DatasetError, PseudoDataset, ViewRecord};
use crate::geometry::{Camera, CameraPose, GeometryError, Intrinsics, DEFAULT_IMAGE_SIZE};
use crate::metrics::{mask_iou, occupancy_of_scene, psnr, voxel_iou};
use crate::raster::{DepthMap, MaskImage, NormalMap, RasterError, RgbImage};
use crate::scene::{render_color, render_view, AnalyticSurface, SdfScene, Surface};
use crate::schedule::{check_intervals, CameraSchedule, IntervalThresholds};
use crate::stages::{
    build_prompt, run_stage, stage_timeout, StageBackends, StageError, StageKind, StageOutput,
    StageRequest, SUPERRES_FACTOR,
};
use crate::voxel::{GridError, VoxelGrid, VoxelSurface, DEFAULT_RESOLUTION};
use crate::warping::{lift_view, outpaint_mask, warp_culled_into, DEFAULT_UPSCALE};

pub const DATASET_DIR: &str = "dataset";
pub const GRIDS_DIR: &str = "grids";
pub const STAGES_DIR: &str = "stages";
pub const STATE_FILE: &str = "state.json";
pub const REPORT_FILE: &str = "report.json";
pub const FINAL_GRID: &str = "grid.rle";

/// Color given to surface points no dataset view has seen.
pub const UNSEEN_COLOR: [u8; 3] = [128, 128, 128];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("iteration {iteration}: {source}")]
    Stage {
        iteration: usize,
        #[source]
        source: StageError,
    },
    #[error("iteration {iteration}: mask invariant violated: {detail}")]
    MaskInvariant { iteration: usize, detail: String },
    #[error("cannot resume: {0}")]
    Resume(String),
    #[error("output directory {0} is not empty and holds no previous run")]
    OutputNotEmpty(PathBuf),
    #[error("io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("carving: {0}")]
    Carve(#[from] CarveError),
    #[error("raster: {0}")]
    Raster(#[from] RasterError),
    #[error("grid: {0}")]
    Grid(#[from] GridError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("stage: {0}")]
    Setup(#[from] StageError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    fs::write(path, bytes).map_err(io_err(path))
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub schedule: CameraSchedule,
    pub grid_resolution: usize,
    pub backends: StageBackends,
    /// Side of the square views rendered for a synthetic source.
    pub image_size: u32,
    pub upscale: u32,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub object_tag: String,
    pub class_word: String,
    pub timeout: Duration,
    /// Continue from `state.json` instead of starting over.
    pub resume: bool,
    /// Stop after this schedule index (for staged or interrupted runs).
    pub stop_after: Option<usize>,
    /// Called after each completed iteration.
    pub on_iteration: Option<fn(&IterationReport)>,
}

impl PipelineConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            schedule: CameraSchedule::default_schedule(),
            grid_resolution: DEFAULT_RESOLUTION,
            backends: StageBackends::default(),
            image_size: DEFAULT_IMAGE_SIZE,
            upscale: DEFAULT_UPSCALE,
            out_dir: out_dir.into(),
            seed: 0,
            object_tag: "sks".to_string(),
            class_word: "object".to_string(),
            timeout: stage_timeout(),
            resume: false,
            stop_after: None,
            on_iteration: None,
        }
    }

    pub fn validate(&self, have_scene: bool) -> Result<(), PipelineError> {
        if self.grid_resolution == 0 {
            return Err(PipelineError::Config(
                "grid resolution must be positive".into(),
            ));
        }
        if self.upscale == 0 {
            return Err(PipelineError::Config(
                "upscale factor must be positive".into(),
            ));
        }
        if self.image_size == 0 {
            return Err(PipelineError::Config("image size must be positive".into()));
        }
        if let Some(s) = self.stop_after {
            if s >= self.schedule.len() {
                return Err(PipelineError::Config(format!(
                    "stop index {s} is past the last schedule index {}",
                    self.schedule.last_index()
                )));
            }
        }
        self.backends.validate(have_scene)?;
        Ok(())
    }
}

/// Where the first view comes from.
#[derive(Debug, Clone)]
pub enum Source {
    /// Render the initial view of a known scene; oracle stages use the scene.
    Synthetic(SdfScene),
    /// A directory holding `color.png` and optionally `mask.png`, `depth.cpd`
    /// and `normal.cpn`; anything missing is produced by the stages.
    Directory(PathBuf),
}

impl Source {
    pub fn scene(&self) -> Option<&SdfScene> {
        match self {
            Source::Synthetic(s) => Some(s),
            Source::Directory(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub view_index: usize,
    pub pose: CameraPose,
    pub hull_area: usize,
    pub foreground_area: usize,
    pub outpaint_area: usize,
    pub hull_voxels: usize,
    pub reconstruction_voxels: usize,
    /// Wall-clock seconds per phase.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalMetrics {
    pub voxel_iou: f64,
    pub mean_mask_iou: f64,
    /// Mean over views that differ from the ground-truth render; `None` when all match.
    pub mean_psnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub iterations: Vec<IterationReport>,
    pub warnings: Vec<String>,
    /// Present for synthetic sources once the schedule is complete.
    pub final_metrics: Option<FinalMetrics>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dataset: PseudoDataset,
    pub grid: VoxelGrid,
    pub report: RunReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct RunState {
    completed: usize,
    schedule: CameraSchedule,
    grid_resolution: usize,
    upscale: u32,
    seed: u64,
    object_tag: String,
    class_word: String,
}

/// Hull, warped foreground and outpainting region for one target camera.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseMasks {
    pub hull: MaskImage,
    pub foreground: MaskImage,
    pub outpaint: MaskImage,
}

/// Visual hull of every dataset view, with `p*` from each view's depth map.
pub fn visual_hull(dataset: &PseudoDataset, resolution: usize) -> Result<VoxelGrid, CarveError> {
    let views: Vec<CarveView<'_>> = dataset
        .records()
        .iter()
        .map(|r| CarveView::with_depth(&r.mask, &r.depth, r.camera()))
        .collect();
    carve_with_depth_maps(&views, resolution)
}

/// Warped foreground of every dataset view at each target camera. Each source
/// view is lifted once and splatted into all targets.
pub fn foreground_masks(
    surface: &dyn Surface,
    dataset: &PseudoDataset,
    targets: &[Camera],
    upscale: u32,
) -> Vec<MaskImage> {
    let mut masks: Vec<MaskImage> = targets
        .iter()
        .map(|c| MaskImage::new(c.width(), c.height()))
        .collect();
    for record in dataset.records() {
        let points = lift_view(record, surface, upscale);
        for (mask, cam) in masks.iter_mut().zip(targets) {
            warp_culled_into(mask, &points, cam);
        }
    }
    masks
}

/// Masks at `camera` given a carved hull and the current surface.
pub fn pose_masks(
    hull: &VoxelGrid,
    surface: &VoxelSurface,
    dataset: &PseudoDataset,
    camera: &Camera,
    upscale: u32,
) -> Result<PoseMasks, RasterError> {
    let hull_mask = hull_silhouette(hull, camera);
    let foreground =
        foreground_masks(surface, dataset, std::slice::from_ref(camera), upscale).remove(0);
    let outpaint = outpaint_mask(&hull_mask, &foreground)?;
    Ok(PoseMasks {
        hull: hull_mask,
        foreground,
        outpaint,
    })
}

/// Outpainting area ratio (of the image) at every pose, from a finished dataset.
pub fn residual_outpaint_ratios(
    dataset: &PseudoDataset,
    grid: &VoxelGrid,
    poses: &[CameraPose],
    upscale: u32,
) -> Result<Vec<f64>, PipelineError> {
    let hull = visual_hull(dataset, grid.resolution())?;
    let surface = VoxelSurface::new(grid.clone());
    let (w, h) = dataset.dims();
    let cams = poses
        .iter()
        .map(|p| camera_for(p, (w, h)))
        .collect::<Result<Vec<_>, _>>()?;
    let fgs = foreground_masks(&surface, dataset, &cams, upscale);
    cams.iter()
        .zip(&fgs)
        .map(|(cam, fg)| Ok(outpaint_mask(&hull_silhouette(&hull, cam), fg)?.area_ratio()))
        .collect()
}

pub fn camera_for(pose: &CameraPose, (w, h): (u32, u32)) -> Result<Camera, GeometryError> {
    Ok(Camera::new(
        *pose,
        Intrinsics::from_fov(w, h, pose.fov_deg)?,
    ))
}

/// Renders the surface at `camera`, coloring each hit from the angularly
/// nearest dataset view that sees it (faces that camera, inside its mask).
pub fn render_from_dataset(
    surface: &dyn Surface,
    dataset: &PseudoDataset,
    camera: &Camera,
) -> RgbImage {
    let mut sources: Vec<(f64, usize, Camera)> = dataset
        .records()
        .iter()
        .map(|r| {
            (
                camera.pose.angular_distance_deg(&r.pose),
                r.view_index,
                r.camera(),
            )
        })
        .collect();
    sources.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let records = dataset.records();
    let (w, h) = (camera.width(), camera.height());
    let colors = crate::par::flat_map_range(h as usize, |y| {
        (0..w)
            .map(|x| {
                let Some(hit) = surface.first_hit(&camera.pixel_center_ray(x, y as u32)) else {
                    return RgbImage::WHITE;
                };
                for (_, index, cam) in &sources {
                    if (hit.point - cam.center()).dot(&hit.normal) >= 0.0 {
                        continue;
                    }
                    if let Some((sx, sy)) = cam.pixel_of(&hit.point) {
                        let r = &records[*index];
                        if r.mask.get(sx, sy) {
                            return r.color.get(sx, sy);
                        }
                    }
                }
                UNSEEN_COLOR
            })
            .collect()
    });
    let mut img = RgbImage::filled(w, h, RgbImage::WHITE);
    for (i, c) in colors.into_iter().enumerate() {
        img.set(i as u32 % w, i as u32 / w, c);
    }
    img
}

/// Background pixels carry no geometry.
fn sanitize(mask: &MaskImage, depth: &mut DepthMap, normal: &mut NormalMap) {
    let (w, h) = mask.dims();
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                depth.set(x, y, DepthMap::NO_HIT);
                normal.set(x, y, NormalMap::NO_HIT);
            }
        }
    }
}

struct Runner<'a> {
    config: &'a PipelineConfig,
    scene: Option<&'a SdfScene>,
}

impl Runner<'_> {
    fn stage_dir(&self, iteration: usize, kind: StageKind) -> PathBuf {
        self.config
            .out_dir
            .join(STAGES_DIR)
            .join(format!("iter_{iteration:03}"))
            .join(kind.name())
    }

    fn request(&self, iteration: usize, kind: StageKind, camera: &Camera) -> StageRequest {
        StageRequest::new(kind, self.stage_dir(iteration, kind), camera)
            .with_param("iteration", iteration.to_string())
            .with_param(
                "seed",
                (self.config.seed.wrapping_add(iteration as u64)).to_string(),
            )
    }

    fn run(
        &self,
        iteration: usize,
        request: &StageRequest,
        inputs: &[(&str, Vec<u8>)],
    ) -> Result<StageOutput, PipelineError> {
        let wrap = |source| PipelineError::Stage { iteration, source };
        request.prepare().map_err(wrap)?;
        for (name, bytes) in inputs {
            request.write_file(name, bytes).map_err(wrap)?;
        }
        run_stage(
            request,
            self.config.backends.get(request.kind),
            self.scene,
            self.config.timeout,
        )
        .map_err(wrap)
    }

    /// Segment, depth and normal stages on one color image.
    fn describe(
        &self,
        iteration: usize,
        camera: &Camera,
        color: RgbImage,
        given: Given,
        timings: &mut BTreeMap<String, f64>,
    ) -> Result<ViewRecord, PipelineError> {
        let color_png = color.to_png()?;
        let mut stage = |kind: StageKind| -> Result<StageOutput, PipelineError> {
            let t = Instant::now();
            let out = self.run(
                iteration,
                &self.request(iteration, kind, camera),
                &[("color.png", color_png.clone())],
            );
            timings.insert(kind.name().to_string(), t.elapsed().as_secs_f64());
            out
        };
        let mask = match given.mask {
            Some(m) => m,
            None => match stage(StageKind::Segment)? {
                StageOutput::Mask(m) => m,
                _ => unreachable!("segment stage yields a mask"),
            },
        };
        let mut depth = match given.depth {
            Some(d) => d,
            None => match stage(StageKind::Depth)? {
                StageOutput::Depth(d) => d,
                _ => unreachable!("depth stage yields a depth map"),
            },
        };
        let mut normal = match given.normal {
            Some(n) => n,
            None => match stage(StageKind::Normal)? {
                StageOutput::Normal(n) => n,
                _ => unreachable!("normal stage yields a normal map"),
            },
        };
        sanitize(&mask, &mut depth, &mut normal);
        Ok(ViewRecord {
            color,
            depth,
            normal,
            mask,
            pose: camera.pose,
            view_index: iteration,
        })
    }

    fn reconstruct(&self, iteration: usize, camera: &Camera) -> Result<VoxelGrid, PipelineError> {
        let dataset_dir = self.config.out_dir.join(DATASET_DIR);
        let dataset_dir = fs::canonicalize(&dataset_dir).map_err(io_err(&dataset_dir))?;
        let request = self
            .request(iteration, StageKind::Reconstruct, camera)
            .with_param("dataset_dir", dataset_dir.to_string_lossy())
            .with_param("grid_resolution", self.config.grid_resolution.to_string());
        match self.run(iteration, &request, &[])? {
            StageOutput::Reconstruction(g) => Ok(g),
            _ => unreachable!("reconstruct stage yields a grid"),
        }
    }
}

#[derive(Default)]
struct Given {
    mask: Option<MaskImage>,
    depth: Option<DepthMap>,
    normal: Option<NormalMap>,
}

fn read_optional(path: &Path) -> Result<Option<Vec<u8>>, PipelineError> {
    match fs::read(path) {
        Ok(b) => Ok(Some(b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(PipelineError::Io {
            path: path.to_path_buf(),
            source: e,
        }),
    }
}

fn prepare_out_dir(out: &Path) -> Result<(), PipelineError> {
    if out.exists() {
        let mut entries = fs::read_dir(out).map_err(io_err(out))?;
        if entries.next().is_some() {
            if !out.join(STATE_FILE).is_file() {
                return Err(PipelineError::OutputNotEmpty(out.to_path_buf()));
            }
            for name in [DATASET_DIR, GRIDS_DIR, STAGES_DIR] {
                let p = out.join(name);
                if p.exists() {
                    fs::remove_dir_all(&p).map_err(io_err(&p))?;
                }
            }
            for name in [STATE_FILE, REPORT_FILE, FINAL_GRID] {
                let p = out.join(name);
                if p.exists() {
                    fs::remove_file(&p).map_err(io_err(&p))?;
                }
            }
        }
    }
    for dir in [out.to_path_buf(), out.join(GRIDS_DIR)] {
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    }
    Ok(())
}

fn grid_path(out: &Path, iteration: usize) -> PathBuf {
    out.join(GRIDS_DIR).join(format!("iter_{iteration:03}.rle"))
}

fn save_progress(
    config: &PipelineConfig,
    state: &RunState,
    report: &RunReport,
    grid: &VoxelGrid,
) -> Result<(), PipelineError> {
    let out = &config.out_dir;
    write(&grid_path(out, state.completed - 1), grid.to_rle())?;
    write(
        &out.join(REPORT_FILE),
        serde_json::to_string_pretty(report).expect("report serializes") + "\n",
    )?;
    write(
        &out.join(STATE_FILE),
        serde_json::to_string_pretty(state).expect("state serializes") + "\n",
    )
}

/// Runs (or resumes) the loop over the schedule.
pub fn run(config: &PipelineConfig, source: &Source) -> Result<RunOutput, PipelineError> {
    config.validate(source.scene().is_some())?;
    let out = &config.out_dir;
    let runner = Runner {
        config,
        scene: source.scene(),
    };
    let mut state = RunState {
        completed: 0,
        schedule: config.schedule.clone(),
        grid_resolution: config.grid_resolution,
        upscale: config.upscale,
        seed: config.seed,
        object_tag: config.object_tag.clone(),
        class_word: config.class_word.clone(),
    };

    let resumed = if config.resume && out.join(STATE_FILE).is_file() {
        let path = out.join(STATE_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        let saved: RunState =
            serde_json::from_str(&text).map_err(|e| PipelineError::Resume(e.to_string()))?;
        let expected = RunState {
            completed: saved.completed,
            ..state.clone()
        };
        if expected != saved {
            return Err(PipelineError::Resume(
                "configuration differs from the interrupted run".into(),
            ));
        }
        let dataset = PseudoDataset::load(&out.join(DATASET_DIR))?;
        if dataset.len() != saved.completed || saved.completed == 0 {
            return Err(PipelineError::Resume(format!(
                "state says {} iterations but the dataset holds {} views",
                saved.completed,
                dataset.len()
            )));
        }
        let path = grid_path(out, saved.completed - 1);
        let grid = VoxelGrid::from_rle(&fs::read_to_string(&path).map_err(io_err(&path))?)?;
        let report = match read_optional(&out.join(REPORT_FILE))? {
            Some(b) => {
                serde_json::from_slice(&b).map_err(|e| PipelineError::Resume(e.to_string()))?
            }
            None => RunReport::default(),
        };
        state.completed = saved.completed;
        Some((dataset, grid, report))
    } else {
        None
    };

    let (mut dataset, mut grid, mut report) = match resumed {
        Some(r) => r,
        None => {
            prepare_out_dir(out)?;
            let report = RunReport {
                warnings: check_intervals(&config.schedule, &IntervalThresholds::default())
                    .iter()
                    .map(|w| w.to_string())
                    .collect(),
                ..RunReport::default()
            };
            let pose0 = config.schedule.poses()[0];
            let (camera, color, given) = match source {
                Source::Synthetic(scene) => {
                    let camera = camera_for(&pose0, (config.image_size, config.image_size))?;
                    (camera, render_color(scene, &camera), Given::default())
                }
                Source::Directory(dir) => {
                    let path = dir.join("color.png");
                    let bytes = fs::read(&path).map_err(io_err(&path))?;
                    let color = RgbImage::from_png(&bytes)?;
                    let camera = camera_for(&pose0, color.dims())?;
                    let given = Given {
                        mask: read_optional(&dir.join("mask.png"))?
                            .map(|b| MaskImage::from_png(&b))
                            .transpose()?,
                        depth: read_optional(&dir.join("depth.cpd"))?
                            .map(|b| DepthMap::from_bytes(&b))
                            .transpose()?,
                        normal: read_optional(&dir.join("normal.cpn"))?
                            .map(|b| NormalMap::from_bytes(&b))
                            .transpose()?,
                    };
                    (camera, color, given)
                }
            };
            let mut timings = BTreeMap::new();
            let record = runner.describe(0, &camera, color, given, &mut timings)?;
            let dataset = PseudoDataset::init(record, &config.object_tag, &config.class_word)?;
            dataset.save(&out.join(DATASET_DIR))?;
            let grid = runner.reconstruct(0, &camera)?;
            state.completed = 1;
            save_progress(config, &state, &report, &grid)?;
            (dataset, grid, report)
        }
    };

    let last = config.stop_after.unwrap_or(config.schedule.last_index());
    let dims = dataset.dims();
    for i in state.completed..=last {
        let pose = config.schedule.poses()[i];
        let camera = camera_for(&pose, dims)?;
        let mut timings = BTreeMap::new();
        let mut clock = Instant::now();
        let mut lap = |name: &str, timings: &mut BTreeMap<String, f64>| {
            timings.insert(name.to_string(), clock.elapsed().as_secs_f64());
            clock = Instant::now();
        };

        let hull = visual_hull(&dataset, config.grid_resolution)?;
        lap("carve", &mut timings);
        let surface = VoxelSurface::new(grid.clone());
        let masks = pose_masks(&hull, &surface, &dataset, &camera, config.upscale)?;
        if masks.outpaint.and(&masks.foreground)?.count() != 0 {
            return Err(PipelineError::MaskInvariant {
                iteration: i,
                detail: "outpainting region overlaps the warped foreground".into(),
            });
        }
        if !masks.outpaint.is_subset_of(&masks.hull)? {
            return Err(PipelineError::MaskInvariant {
                iteration: i,
                detail: "outpainting region leaves the hull silhouette".into(),
            });
        }
        lap("masks", &mut timings);
        let render = render_from_dataset(&surface, &dataset, &camera);
        lap("render", &mut timings);

        let prompt = build_prompt(&config.object_tag, &config.class_word, pose.azimuth_deg);
        let request = runner
            .request(i, StageKind::Outpaint, &camera)
            .with_param("prompt", prompt);
        let outpainted = match runner.run(
            i,
            &request,
            &[
                ("render.png", render.to_png()?),
                ("outmask.png", masks.outpaint.to_png()?),
                ("fgmask.png", masks.foreground.to_png()?),
                ("hullmask.png", masks.hull.to_png()?),
            ],
        )? {
            StageOutput::Outpainted(img) => img,
            _ => unreachable!("outpaint stage yields an image"),
        };
        lap("outpaint", &mut timings);

        let request = runner.request(i, StageKind::Superres, &camera);
        let color = match runner.run(i, &request, &[("color.png", outpainted.to_png()?)])? {
            StageOutput::Upscaled(img) => img.downsample(SUPERRES_FACTOR),
            _ => unreachable!("superres stage yields an image"),
        };
        lap("superres", &mut timings);

        let record = runner.describe(i, &camera, color, Given::default(), &mut timings)?;
        dataset.append(record)?;
        dataset.save(&out.join(DATASET_DIR))?;
        lap("record", &mut timings);
        grid = runner.reconstruct(i, &camera)?;
        lap("reconstruct", &mut timings);

        report.iterations.push(IterationReport {
            view_index: i,
            pose,
            hull_area: masks.hull.count(),
            foreground_area: masks.foreground.count(),
            outpaint_area: masks.outpaint.count(),
            hull_voxels: hull.occupied_count(),
            reconstruction_voxels: grid.occupied_count(),
            timings,
        });
        state.completed = i + 1;
        save_progress(config, &state, &report, &grid)?;
        if let Some(f) = config.on_iteration {
            f(report.iterations.last().expect("just pushed"));
        }
    }

    if state.completed == config.schedule.len() {
        if let Some(scene) = source.scene() {
            report.final_metrics = Some(final_metrics(scene, &dataset, &grid)?);
        }
        write(&out.join(FINAL_GRID), grid.to_rle())?;
        write(
            &out.join(REPORT_FILE),
            serde_json::to_string_pretty(&report).expect("report serializes") + "\n",
        )?;
    }
    Ok(RunOutput {
        dataset,
        grid,
        report,
    })
}

/// Compares a finished run against the ground-truth scene.
pub fn final_metrics(
    scene: &SdfScene,
    dataset: &PseudoDataset,
    grid: &VoxelGrid,
) -> Result<FinalMetrics, PipelineError> {
    let truth = occupancy_of_scene(scene, grid.resolution());
    let surface = AnalyticSurface::new(scene.clone());
    let (mut iou_sum, mut psnr_sum, mut finite) = (0.0, 0.0, 0usize);
    for r in dataset.records() {
        let cam = r.camera();
        let (_, _, mask) = render_view(&surface, &cam);
        iou_sum += mask_iou(&r.mask, &mask)?;
        let p = psnr(&r.color, &render_color(scene, &cam))?;
        if p.is_finite() {
            psnr_sum += p;
            finite += 1;
        }
    }
    let n = dataset.len() as f64;
    Ok(FinalMetrics {
        voxel_iou: voxel_iou(grid, &truth)?,
        mean_mask_iou: iou_sum / n,
        mean_psnr: (finite > 0).then(|| psnr_sum / finite as f64),
    })
}
