mod common;

use carvepipe::raster::MaskImage;
use carvepipe::scene::{render_view, AnalyticSurface, SdfScene};
use carvepipe::warping::{cull_backpoints, lift_mask, outpaint_mask, warp_to_mask};
use carvepipe::{Camera, CameraPose};
use common::{culling_fraction, RefCamera};

fn sphere_setup(size: u32) -> (AnalyticSurface, Camera, MaskImage) {
    let surface = AnalyticSurface::new(SdfScene::sphere(0.5).unwrap());
    let cam = Camera::square(CameraPose::initial(), size).unwrap();
    let (_, _, mask) = render_view(&surface, &cam);
    (surface, cam, mask)
}

#[test]
fn opposite_view_culls_everything_visible() {
    let (surface, cam, mask) = sphere_setup(128);
    let points = lift_mask(&mask, &cam, &surface, 2, 0);
    let kept = cull_backpoints(&points, &CameraPose::new(90.0, 180.0).unwrap());
    assert!(
        kept.len() as f64 <= 0.001 * points.len() as f64,
        "{} of {}",
        kept.len(),
        points.len()
    );
}

#[test]
fn quarter_turn_culling_matches_cap_overlap() {
    let (surface, cam, mask) = sphere_setup(192);
    let points = lift_mask(&mask, &cam, &surface, 4, 0);
    for az in [45.0, 90.0, -60.0] {
        let kept = cull_backpoints(&points, &CameraPose::new(90.0, az).unwrap()).len() as f64
            / points.len() as f64;
        let src = RefCamera::new(90.0, 0.0, 3.0, 60.0, 192, 192);
        let dst = RefCamera::new(90.0, az, 3.0, 60.0, 192, 192);
        let want = culling_fraction(0.5, &src, dst.center, 600);
        assert!((kept - want).abs() < 0.02, "az {az}: {kept} vs {want}");
    }
}

#[test]
fn identity_warp_reproduces_the_mask() {
    let (surface, cam, mask) = sphere_setup(160);
    let points = lift_mask(&mask, &cam, &surface, 4, 0);
    let warped = warp_to_mask(&cull_backpoints(&points, &cam.pose), &cam);
    assert!(warped.disagreement(&mask).unwrap() as f64 / (160.0 * 160.0) < 0.005);
}

#[test]
fn foreground_stays_inside_the_target_silhouette() {
    let (surface, cam, mask) = sphere_setup(160);
    let points = lift_mask(&mask, &cam, &surface, 4, 0);
    let target = Camera::square(CameraPose::new(90.0, 45.0).unwrap(), 160).unwrap();
    let fg = warp_to_mask(&cull_backpoints(&points, &target.pose), &target);
    let (_, _, truth) = render_view(&surface, &target);
    assert!(fg.is_subset_of(&truth.dilate(1)).unwrap());
    assert!(fg.count() > 0);
    let out = outpaint_mask(&truth, &fg).unwrap();
    assert_eq!(out.and(&fg).unwrap().count(), 0);
    assert!(out.is_subset_of(&truth).unwrap());
}

#[test]
fn supersampling_closes_holes() {
    let (surface, cam, mask) = sphere_setup(160);
    let target = Camera::square(CameraPose::new(60.0, 40.0).unwrap(), 160).unwrap();
    let holes = |up: u32| {
        let pts = lift_mask(&mask, &cam, &surface, up, 0);
        let fg = warp_to_mask(&cull_backpoints(&pts, &target.pose), &target);
        let reach = warp_to_mask(
            &cull_backpoints(&lift_mask(&mask, &cam, &surface, 8, 0), &target.pose),
            &target,
        );
        reach.minus(&fg).unwrap().count()
    };
    assert!(holes(1) > holes(4));
    assert_eq!(holes(8), 0);
}
