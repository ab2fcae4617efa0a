//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Failures only fail the process when `CARVEPIPE_ACCEPTANCE_STRICT` is set.

mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use carvepipe::carving::{carve, CarveView};
use carvepipe::metrics::{mask_iou, occupancy_of_scene, psnr, voxel_iou};
use carvepipe::pipeline::{
    residual_outpaint_ratios, run, PipelineConfig, RunOutput, Source, STAGES_DIR,
};
use carvepipe::raster::{MaskImage, RgbImage};
use carvepipe::scene::{render_view, AnalyticSurface, SdfScene};
use carvepipe::warping::{cull_backpoints, lift_mask, warp_to_mask};
use carvepipe::{Camera, CameraPose, CameraSchedule};
use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const CARVE_SIZE: u32 = 95;

struct CarveCase {
    seed: u64,
    views: usize,
    scene: SdfScene,
    masks: Vec<MaskImage>,
    cams: Vec<Camera>,
    grid: Vec<bool>,
}

fn carve_cases() -> Vec<CarveCase> {
    let mut cases = Vec::new();
    for seed in 0..5u64 {
        let scene = random_scene(seed);
        let surface = AnalyticSurface::new(scene.clone());
        let poses = random_poses(seed, 8);
        for views in [1usize, 2, 4, 8] {
            let cams: Vec<Camera> = poses[..views]
                .iter()
                .map(|p| Camera::square(*p, CARVE_SIZE).unwrap())
                .collect();
            let masks: Vec<MaskImage> = cams.iter().map(|c| render_view(&surface, c).2).collect();
            let cv: Vec<CarveView<'_>> = masks
                .iter()
                .zip(&cams)
                .map(|(m, c)| CarveView::new(m, *c))
                .collect();
            let grid = carve(&cv, &surface, 32).unwrap().occupancy();
            cases.push(CarveCase {
                seed,
                views,
                scene: scene.clone(),
                masks,
                cams,
                grid,
            });
        }
    }
    cases
}

fn carving_oracle_equivalence(cases: &[CarveCase], elapsed: Duration) -> Outcome {
    let start = Instant::now();
    let mut mismatched = Vec::new();
    for case in cases {
        let views: Vec<(&MaskImage, RefCamera)> = case
            .masks
            .iter()
            .zip(&case.cams)
            .map(|(m, c)| (m, RefCamera::from_pose(&c.pose, CARVE_SIZE, CARVE_SIZE)))
            .collect();
        let oracle = brute_force_carve(&case.scene, &views, 32);
        let diff = oracle
            .iter()
            .zip(&case.grid)
            .filter(|(a, b)| a != b)
            .count();
        if diff > 0 {
            mismatched.push(format!(
                "seed {} x {} views: {diff} voxels",
                case.seed, case.views
            ));
        }
    }
    let total = elapsed + start.elapsed();
    if !mismatched.is_empty() {
        return Err(format!(
            "differs from the brute-force oracle: {}",
            mismatched.join(", ")
        ));
    }
    if total > Duration::from_secs(30) {
        return Err(format!(
            "bitwise equal but took {:.1} s (limit 30 s)",
            total.as_secs_f64()
        ));
    }
    Ok(format!(
        "{} configurations bitwise equal at R=32 in {:.1} s",
        cases.len(),
        total.as_secs_f64()
    ))
}

fn hull_conservativeness(cases: &[CarveCase]) -> Outcome {
    let mut missing = Vec::new();
    let mut inside_total = 0;
    let mut lost_dilated = 0;
    for case in cases {
        let truth = truth_occupancy(&case.scene, 32);
        inside_total += truth.iter().filter(|t| **t).count();
        let lost = truth
            .iter()
            .zip(&case.grid)
            .filter(|(t, g)| **t && !**g)
            .count();
        if lost > 0 {
            missing.push(format!("seed {} x {} views: {lost}", case.seed, case.views));
        }
        let surface = AnalyticSurface::new(case.scene.clone());
        let grown: Vec<MaskImage> = case.masks.iter().map(|m| m.dilate(1)).collect();
        let cv: Vec<CarveView<'_>> = grown
            .iter()
            .zip(&case.cams)
            .map(|(m, c)| CarveView::new(m, *c))
            .collect();
        let grid = carve(&cv, &surface, 32).unwrap().occupancy();
        lost_dilated += truth.iter().zip(&grid).filter(|(t, g)| **t && !**g).count();
    }
    if missing.is_empty() {
        Ok(format!(
            "all {inside_total} interior voxel centers kept across {} configurations",
            cases.len()
        ))
    } else {
        Err(format!(
            "pixel-center masks carve interior voxels near silhouette edges ({}); with 1-px dilated masks {lost_dilated} of {inside_total} are lost",
            missing.join(", ")
        ))
    }
}

fn single_view_extrusion() -> Outcome {
    let scenes = [SdfScene::sphere(0.5).unwrap()];
    let size = 127;
    for (i, scene) in scenes.iter().enumerate() {
        let surface = AnalyticSurface::new(scene.clone());
        let cam = Camera::square(CameraPose::initial(), size).unwrap();
        let (_, _, mask) = render_view(&surface, &cam);
        let grid = carve(&[CarveView::new(&mask, cam)], &surface, 64)
            .unwrap()
            .occupancy();
        let oracle = brute_force_carve(
            scene,
            &[(&mask, RefCamera::from_pose(&cam.pose, size, size))],
            64,
        );
        let diff = oracle.iter().zip(&grid).filter(|(a, b)| a != b).count();
        if diff > 0 {
            return Err(format!(
                "scene {i}: {diff} voxels differ from in-silhouette and behind-first-hit"
            ));
        }
    }
    Ok("sphere view bitwise equal to the brute-force extrusion at R=64".into())
}

fn mask_algebra(out_dir: &Path, run: &Result<RunOutput, String>) -> Outcome {
    let run = run
        .as_ref()
        .map_err(|e| format!("pipeline run failed: {e}"))?;
    let load = |iter: usize, name: &str| -> Result<MaskImage, String> {
        let p = out_dir
            .join(STAGES_DIR)
            .join(format!("iter_{iter:03}"))
            .join("outpaint")
            .join(name);
        let bytes = fs::read(&p).map_err(|e| format!("{}: {e}", p.display()))?;
        MaskImage::from_png(&bytes).map_err(|e| e.to_string())
    };
    for it in &run.report.iterations {
        let i = it.view_index;
        let (out, fg, hull) = (
            load(i, "outmask.png")?,
            load(i, "fgmask.png")?,
            load(i, "hullmask.png")?,
        );
        let overlap = out.and(&fg).unwrap().count();
        let escaped = out.minus(&hull).unwrap().count();
        if overlap != 0 || escaped != 0 {
            return Err(format!(
                "iteration {i}: {overlap} pixels in both, {escaped} outside the hull"
            ));
        }
        if out.count() != it.outpaint_area {
            return Err(format!(
                "iteration {i}: persisted mask disagrees with the report"
            ));
        }
    }
    Ok(format!(
        "{} iterations: disjoint from foreground and inside the hull",
        run.report.iterations.len()
    ))
}

fn back_point_culling() -> Outcome {
    let size = 384;
    let surface = AnalyticSurface::new(SdfScene::sphere(0.5).unwrap());
    let cam = Camera::square(CameraPose::initial(), size).unwrap();
    let (_, _, mask) = render_view(&surface, &cam);
    let points = lift_mask(&mask, &cam, &surface, 8, 0);
    let target = CameraPose::new(90.0, 45.0).unwrap();
    let kept = cull_backpoints(&points, &target).len() as f64 / points.len() as f64;
    let src = RefCamera::new(90.0, 0.0, 3.0, 60.0, size, size);
    let dst = RefCamera::new(90.0, 45.0, 3.0, 60.0, size, size);
    let oracle = culling_fraction(0.5, &src, dst.center, 1500);
    let delta = (kept - oracle).abs();
    let msg = format!(
        "retained {:.2}% vs cap-overlap oracle {:.2}%",
        100.0 * kept,
        100.0 * oracle
    );
    if delta <= 0.02 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn identity_warp() -> Outcome {
    let size = 384;
    let surface = AnalyticSurface::new(SdfScene::sphere(0.5).unwrap());
    let cam = Camera::square(CameraPose::initial(), size).unwrap();
    let (_, _, mask) = render_view(&surface, &cam);
    let points = lift_mask(&mask, &cam, &surface, 8, 0);
    let warped = warp_to_mask(&cull_backpoints(&points, &cam.pose), &cam);
    let diff = warped.disagreement(&mask).unwrap();
    let ratio = diff as f64 / (size * size) as f64;
    let msg = format!(
        "{diff} pixels differ: {:.3}% of the image ({:.2}% of the mask)",
        100.0 * ratio,
        100.0 * diff as f64 / mask.count() as f64
    );
    if ratio < 0.005 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn end_to_end(run: &Result<RunOutput, String>, elapsed: Duration) -> Outcome {
    let run = run
        .as_ref()
        .map_err(|e| format!("pipeline run failed: {e}"))?;
    let scene = SdfScene::sphere(0.5).unwrap();
    let r = run.grid.resolution();
    let schedule = CameraSchedule::default_schedule();
    let (w, h) = run.dataset.dims();
    let cams: Vec<RefCamera> = schedule
        .poses()
        .iter()
        .map(|p| RefCamera::from_pose(p, w, h))
        .collect();
    let truth = truth_occupancy(&scene, r);
    let hull_iou = iou(&analytic_hull(&scene, &cams, r), &truth);
    let run_iou = iou(&run.grid.occupancy(), &truth);
    let lib_iou = voxel_iou(&run.grid, &occupancy_of_scene(&scene, r)).unwrap();
    if (run_iou - lib_iou).abs() > 1e-12 {
        return Err(format!(
            "library IoU {lib_iou} disagrees with the test's {run_iou}"
        ));
    }
    let residual = residual_outpaint_ratios(&run.dataset, &run.grid, schedule.poses(), 8)
        .map_err(|e| e.to_string())?;
    let worst = residual.iter().cloned().fold(0.0, f64::max);
    let msg = format!(
        "IoU {run_iou:.4} vs analytic 8-view hull {hull_iou:.4}; worst residual outpaint {:.4}% of image; {:.1} s",
        100.0 * worst,
        elapsed.as_secs_f64()
    );
    if run.dataset.len() == 8
        && (run_iou - hull_iou).abs() <= 0.02
        && worst < 0.01
        && elapsed < Duration::from_secs(600)
    {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn files_under(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for e in fs::read_dir(&dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out.sort();
    out
}

fn determinism(a: &Path, b: &Path, second: &Result<RunOutput, String>) -> Outcome {
    second
        .as_ref()
        .map_err(|e| format!("second run failed: {e}"))?;
    let mut compared = 0;
    for sub in ["dataset", "grids"] {
        let (fa, fb) = (files_under(&a.join(sub)), files_under(&b.join(sub)));
        if fa != fb {
            return Err(format!("{sub}: file lists differ"));
        }
        for f in &fa {
            if fs::read(a.join(sub).join(f)).unwrap() != fs::read(b.join(sub).join(f)).unwrap() {
                return Err(format!("{sub}/{} differs", f.display()));
            }
            compared += 1;
        }
    }
    if fs::read(a.join("grid.rle")).unwrap() != fs::read(b.join("grid.rle")).unwrap() {
        return Err("final grid differs".into());
    }
    Ok(format!(
        "{compared} dataset and grid files byte-identical across two runs"
    ))
}

fn metrics_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut a = RgbImage::filled(64, 48, [0; 3]);
    let mut b = a.clone();
    for y in 0..48 {
        for x in 0..64 {
            let c = [
                rng.random_range(0..=239u8),
                rng.random_range(0..=239u8),
                rng.random_range(0..=239u8),
            ];
            a.set(x, y, c);
            b.set(x, y, c.map(|v| v + 16));
        }
    }
    let p = psnr(&a, &b).unwrap();
    let closed_form = 10.0 * (255.0f64 * 255.0 / 256.0).log10();
    let r1 = MaskImage::from_fn(200, 100, |x, _| x < 100);
    let r2 = MaskImage::from_fn(200, 100, |x, _| (50..150).contains(&x));
    let i = mask_iou(&r1, &r2).unwrap();
    let msg = format!("psnr {p:.4} dB (closed form {closed_form:.4}); shifted-rectangle IoU {i}");
    if (p - 24.05).abs() <= 0.01 && (p - closed_form).abs() < 1e-9 && i == 1.0 / 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, Outcome)> = Vec::new();

    let t = Instant::now();
    let cases = carve_cases();
    let carve_time = t.elapsed();
    results.push((
        "carving oracle equivalence",
        carving_oracle_equivalence(&cases, carve_time),
    ));
    results.push(("hull conservativeness", hull_conservativeness(&cases)));
    results.push(("single-view extrusion", single_view_extrusion()));

    let tmp = tempfile::tempdir().unwrap();
    let (dir_a, dir_b) = (tmp.path().join("a"), tmp.path().join("b"));
    let source = Source::Synthetic(SdfScene::sphere(0.5).unwrap());
    let t = Instant::now();
    let first = run(&PipelineConfig::new(&dir_a), &source).map_err(|e| e.to_string());
    let run_time = t.elapsed();
    results.push(("mask algebra", mask_algebra(&dir_a, &first)));
    results.push(("back-point culling", back_point_culling()));
    results.push(("identity warp", identity_warp()));
    results.push(("end-to-end oracle run", end_to_end(&first, run_time)));
    let second = run(&PipelineConfig::new(&dir_b), &source).map_err(|e| e.to_string());
    results.push(("determinism", determinism(&dir_a, &dir_b, &second)));
    results.push(("metrics sanity", metrics_sanity()));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "{} of {} criteria passed",
        results.len() - failed,
        results.len()
    );
    if failed == 0 || std::env::var_os("CARVEPIPE_ACCEPTANCE_STRICT").is_none() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
