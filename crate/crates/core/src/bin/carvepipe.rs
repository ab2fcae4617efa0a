use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use carvepipe::carving::{carve, CarveView};
use carvepipe::dataset::{PseudoDataset, ViewRecord};
use carvepipe::geometry::{CameraPose, DEFAULT_IMAGE_SIZE};
use carvepipe::mesh::extract_mesh;
use carvepipe::pipeline::{
    camera_for, final_metrics, pose_masks, residual_outpaint_ratios, visual_hull, PipelineConfig,
    Source, DATASET_DIR, FINAL_GRID, GRIDS_DIR, REPORT_FILE,
};
use carvepipe::scene::{render_color, render_view, AnalyticSurface, SdfScene};
use carvepipe::schedule::CameraSchedule;
use carvepipe::stages::StageBackends;
use carvepipe::voxel::{VoxelGrid, VoxelSurface, DEFAULT_RESOLUTION};
use carvepipe::warping::DEFAULT_UPSCALE;

type Result<T> = std::result::Result<T, Box<dyn std::error::Error>>;

#[derive(Parser)]
#[command(
    name = "carvepipe",
    version,
    about = "Space-carved progressive outpainting around an object"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scene utilities.
    Scene {
        #[command(subcommand)]
        command: SceneCommand,
    },
    /// Carve a voxel hull from scene renders or a dataset and write it as RLE.
    Carve(CarveArgs),
    /// Write the hull, warped-foreground and outpainting masks for one schedule pose.
    Mask(MaskArgs),
    /// Run the full pipeline.
    Run(RunArgs),
    /// Print IoU/PSNR and residual outpainting coverage of a finished run as JSON.
    Eval(EvalArgs),
    /// Contour an occupancy grid into an OBJ mesh.
    ExportMesh(ExportArgs),
}

#[derive(Subcommand)]
enum SceneCommand {
    /// Render color, depth, normals and mask of a scene from one pose.
    Render(RenderArgs),
}

#[derive(Args)]
struct SceneArg {
    /// Scene JSON file, or `sphere` / `sphere:<radius>`.
    #[arg(long, default_value = "sphere")]
    scene: String,
}

#[derive(Args)]
struct ScheduleArg {
    /// Schedule JSON file (array of poses); defaults to the 8-pose equatorial schedule.
    #[arg(long)]
    schedule: Option<PathBuf>,
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    scene: SceneArg,
    #[arg(long, default_value_t = 90.0)]
    polar: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    azimuth: f64,
    #[arg(long, default_value_t = DEFAULT_IMAGE_SIZE)]
    img_size: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CarveArgs {
    #[command(flatten)]
    scene: SceneArg,
    #[command(flatten)]
    schedule: ScheduleArg,
    /// Carve from a saved dataset (depth maps supply the depth test) instead of scene renders.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Use only the first N poses.
    #[arg(long)]
    views: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    grid_res: usize,
    #[arg(long, default_value_t = DEFAULT_IMAGE_SIZE)]
    img_size: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MaskArgs {
    #[command(flatten)]
    scene: SceneArg,
    #[command(flatten)]
    schedule: ScheduleArg,
    /// Schedule index of the target pose (views before it count as seen).
    #[arg(long)]
    index: usize,
    /// Take the seen views and surface from a run directory instead of the scene.
    #[arg(long)]
    run: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    grid_res: usize,
    #[arg(long, default_value_t = DEFAULT_IMAGE_SIZE)]
    img_size: u32,
    #[arg(long, default_value_t = DEFAULT_UPSCALE)]
    upscale: u32,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scene: SceneArg,
    #[command(flatten)]
    schedule: ScheduleArg,
    /// Start from a real view directory (color.png, optional mask.png/depth.cpd/normal.cpn).
    #[arg(long, conflicts_with = "scene")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    grid_res: usize,
    #[arg(long, default_value_t = DEFAULT_IMAGE_SIZE)]
    img_size: u32,
    #[arg(long, default_value_t = DEFAULT_UPSCALE)]
    upscale: u32,
    /// External stage as `<kind>=<command>` (repeatable).
    #[arg(long = "stage", value_name = "KIND=CMD")]
    stages: Vec<String>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    resume: bool,
    #[arg(long, default_value = "sks")]
    tag: String,
    #[arg(long = "class", default_value = "object")]
    class_word: String,
    /// Stop after this schedule index.
    #[arg(long)]
    stop_after: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth scene for IoU/PSNR against the truth.
    #[arg(long)]
    scene: Option<String>,
    #[command(flatten)]
    schedule: ScheduleArg,
    #[arg(long, default_value_t = DEFAULT_UPSCALE)]
    upscale: u32,
}

#[derive(Args)]
struct ExportArgs {
    /// Grid file (RLE).
    #[arg(long)]
    grid: PathBuf,
    /// Output OBJ path.
    #[arg(long)]
    out: PathBuf,
}

fn load_scene(spec: &str) -> Result<SdfScene> {
    if spec == "sphere" {
        return Ok(SdfScene::sphere(0.5)?);
    }
    if let Some(r) = spec.strip_prefix("sphere:") {
        return Ok(SdfScene::sphere(r.parse()?)?);
    }
    Ok(SdfScene::from_json(&read_text(Path::new(spec))?)?)
}

fn load_schedule(arg: &ScheduleArg) -> Result<CameraSchedule> {
    match &arg.schedule {
        Some(p) => Ok(CameraSchedule::from_json(&read_text(p)?)?),
        None => Ok(CameraSchedule::default_schedule()),
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()).into())
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, bytes).map_err(|e| format!("{}: {e}", path.display()).into())
}

/// Ground-truth record of a scene at a pose.
fn truth_record(
    scene: &SdfScene,
    pose: &CameraPose,
    size: u32,
    index: usize,
) -> Result<ViewRecord> {
    let cam = camera_for(pose, (size, size))?;
    let (depth, normal, mask) = render_view(&AnalyticSurface::new(scene.clone()), &cam);
    Ok(ViewRecord {
        color: render_color(scene, &cam),
        depth,
        normal,
        mask,
        pose: *pose,
        view_index: index,
    })
}

fn truth_dataset(scene: &SdfScene, poses: &[CameraPose], size: u32) -> Result<PseudoDataset> {
    let mut ds = PseudoDataset::init(truth_record(scene, &poses[0], size, 0)?, "sks", "object")?;
    for (i, p) in poses.iter().enumerate().skip(1) {
        ds.append(truth_record(scene, p, size, i)?)?;
    }
    Ok(ds)
}

fn scene_render(a: RenderArgs) -> Result<()> {
    let scene = load_scene(&a.scene.scene)?;
    let pose = CameraPose::new(a.polar, a.azimuth)?;
    let r = truth_record(&scene, &pose, a.img_size, 0)?;
    fs::create_dir_all(&a.out)?;
    write_file(&a.out.join("color.png"), r.color.to_png()?)?;
    write_file(&a.out.join("depth.cpd"), r.depth.to_bytes())?;
    write_file(&a.out.join("normal.cpn"), r.normal.to_bytes())?;
    write_file(&a.out.join("mask.png"), r.mask.to_png()?)?;
    eprintln!(
        "rendered {} foreground pixels to {}",
        r.mask.count(),
        a.out.display()
    );
    Ok(())
}

fn carve_cmd(a: CarveArgs) -> Result<()> {
    let grid = if let Some(dir) = &a.dataset {
        let ds = PseudoDataset::load(dir)?;
        let n = a.views.unwrap_or(ds.len()).clamp(1, ds.len());
        visual_hull(&ds.truncated(n), a.grid_res)?
    } else {
        let scene = load_scene(&a.scene.scene)?;
        let schedule = load_schedule(&a.schedule)?;
        let n = a.views.unwrap_or(schedule.len()).clamp(1, schedule.len());
        let surface = AnalyticSurface::new(scene);
        let mut views = Vec::new();
        for pose in &schedule.poses()[..n] {
            let cam = camera_for(pose, (a.img_size, a.img_size))?;
            let (_, _, mask) = render_view(&surface, &cam);
            views.push((mask, cam));
        }
        let cv: Vec<CarveView<'_>> = views.iter().map(|(m, c)| CarveView::new(m, *c)).collect();
        carve(&cv, &surface, a.grid_res)?
    };
    write_file(&a.out, grid.to_rle())?;
    eprintln!(
        "{} of {} voxels occupied",
        grid.occupied_count(),
        grid.len()
    );
    Ok(())
}

fn mask_cmd(a: MaskArgs) -> Result<()> {
    let (dataset, grid, pose) = if let Some(run) = &a.run {
        let ds = PseudoDataset::load(&run.join(DATASET_DIR))?;
        let schedule = ds.poses();
        if a.index == 0 || a.index > ds.len() {
            return Err(format!("index must be in 1..={} for this run", ds.len()).into());
        }
        let full = load_schedule(&a.schedule)?;
        let pose = if a.index < schedule.len() {
            schedule[a.index]
        } else {
            *full
                .poses()
                .get(a.index)
                .ok_or("index past the end of the schedule")?
        };
        let grid_file = run
            .join(GRIDS_DIR)
            .join(format!("iter_{:03}.rle", a.index - 1));
        let grid = VoxelGrid::from_rle(&read_text(&grid_file)?)?;
        (ds.truncated(a.index), grid, pose)
    } else {
        let scene = load_scene(&a.scene.scene)?;
        let schedule = load_schedule(&a.schedule)?;
        if a.index == 0 || a.index >= schedule.len() {
            return Err(format!("index must be in 1..{}", schedule.len()).into());
        }
        let ds = truth_dataset(&scene, &schedule.poses()[..a.index], a.img_size)?;
        let grid = visual_hull(&ds, a.grid_res)?;
        (ds, grid, schedule.poses()[a.index])
    };
    let hull = visual_hull(&dataset, grid.resolution())?;
    let cam = camera_for(&pose, dataset.dims())?;
    let masks = pose_masks(&hull, &VoxelSurface::new(grid), &dataset, &cam, a.upscale)?;
    fs::create_dir_all(&a.out)?;
    write_file(&a.out.join("hull.png"), masks.hull.to_png()?)?;
    write_file(&a.out.join("foreground.png"), masks.foreground.to_png()?)?;
    write_file(&a.out.join("outpaint.png"), masks.outpaint.to_png()?)?;
    println!(
        "{}",
        json!({
            "pose": pose,
            "hull_area": masks.hull.count(),
            "foreground_area": masks.foreground.count(),
            "outpaint_area": masks.outpaint.count(),
        })
    );
    Ok(())
}

fn run_cmd(a: RunArgs) -> Result<()> {
    let mut config = PipelineConfig::new(&a.out);
    config.schedule = load_schedule(&a.schedule)?;
    config.grid_resolution = a.grid_res;
    config.image_size = a.img_size;
    config.upscale = a.upscale;
    config.seed = a.seed;
    config.resume = a.resume;
    config.object_tag = a.tag;
    config.class_word = a.class_word;
    config.stop_after = a.stop_after;
    config.on_iteration = Some(|it| {
        eprintln!(
            "view {} (polar {}, azimuth {}): outpaint {} px, {} voxels",
            it.view_index,
            it.pose.polar_deg,
            it.pose.azimuth_deg,
            it.outpaint_area,
            it.reconstruction_voxels
        )
    });
    let mut backends = StageBackends::default();
    for spec in &a.stages {
        backends.add_spec(spec)?;
    }
    config.backends = backends;
    let source = match a.input {
        Some(dir) => Source::Directory(dir),
        None => Source::Synthetic(load_scene(&a.scene.scene)?),
    };
    let out = carvepipe::pipeline::run(&config, &source)?;
    for w in &out.report.warnings {
        eprintln!("warning: {w}");
    }
    println!(
        "{}",
        json!({
            "views": out.dataset.len(),
            "voxels": out.grid.occupied_count(),
            "final_metrics": out.report.final_metrics,
        })
    );
    Ok(())
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let dataset = PseudoDataset::load(&a.out.join(DATASET_DIR))?;
    let grid = VoxelGrid::from_rle(&read_text(&a.out.join(FINAL_GRID))?)?;
    let schedule = load_schedule(&a.schedule)?;
    let poses: Vec<CameraPose> = if a.schedule.schedule.is_some() {
        schedule.poses().to_vec()
    } else {
        dataset.poses()
    };
    let residual = residual_outpaint_ratios(&dataset, &grid, &poses, a.upscale)?;
    let metrics = match &a.scene {
        Some(s) => Some(final_metrics(&load_scene(s)?, &dataset, &grid)?),
        None => None,
    };
    let report: Option<serde_json::Value> = fs::read(a.out.join(REPORT_FILE))
        .ok()
        .and_then(|b| serde_json::from_slice(&b).ok());
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "views": dataset.len(),
            "voxels": grid.occupied_count(),
            "metrics": metrics,
            "residual_outpaint_ratio": residual,
            "report": report,
        }))?
    );
    Ok(())
}

fn export_cmd(a: ExportArgs) -> Result<()> {
    let grid = VoxelGrid::from_rle(&read_text(&a.grid)?)?;
    let mesh = extract_mesh(&grid)?;
    write_file(&a.out, mesh.to_obj())?;
    eprintln!(
        "{} vertices, {} triangles, area {:.4}, volume {:.4}",
        mesh.vertices.len(),
        mesh.triangles.len(),
        mesh.surface_area(),
        mesh.volume()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Scene {
            command: SceneCommand::Render(a),
        } => scene_render(a),
        Command::Carve(a) => carve_cmd(a),
        Command::Mask(a) => mask_cmd(a),
        Command::Run(a) => run_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::ExportMesh(a) => export_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = e.source();
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
