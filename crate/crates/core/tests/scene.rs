mod common;

use carvepipe::scene::{render_view, sphere_trace, AnalyticSurface, Primitive, SdfScene, Surface};
use carvepipe::{Camera, CameraPose, Ray};
use common::{first_hit, random_scene};
use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn sphere_trace_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..5 {
        let scene = random_scene(seed);
        for _ in 0..300 {
            let o = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            )
            .normalize()
                * 3.0;
            let target = Vector3::new(
                rng.random_range(-0.6..0.6),
                rng.random_range(-0.6..0.6),
                rng.random_range(-0.6..0.6),
            );
            let ray = Ray::toward(Point3::from(o), &Point3::from(target));
            let d = ray.direction;
            let exact = first_hit(&scene, [o.x, o.y, o.z], [d.x, d.y, d.z]);
            let traced = sphere_trace(&scene, &ray).unwrap().map(|h| h.distance);
            match (exact, traced) {
                (Some(a), Some(b)) => assert!((a - b).abs() < 1e-3, "seed {seed}: {a} vs {b}"),
                (None, None) => {}
                // rays grazing a box face can exhaust the step budget
                (Some(_), None) => {}
                (None, Some(b)) => panic!("seed {seed}: phantom hit at {b}"),
            }
        }
    }
}

#[test]
fn grazing_ray_misses_or_hits_on_the_rim() {
    let scene = SdfScene::sphere(0.5).unwrap();
    let ray = Ray::new(Point3::new(3.0, 0.5 + 1e-4, 0.0), -Vector3::x());
    assert!(sphere_trace(&scene, &ray).unwrap().is_none());
    let ray = Ray::new(Point3::new(3.0, 0.5 - 1e-4, 0.0), -Vector3::x());
    let hit = sphere_trace(&scene, &ray).unwrap().unwrap();
    assert!(scene.sdf(&hit.point).abs() <= 1e-5);
}

#[test]
fn ray_from_inside_is_an_error() {
    let scene = SdfScene::sphere(0.5).unwrap();
    assert!(sphere_trace(&scene, &Ray::new(Point3::origin(), Vector3::x())).is_err());
}

#[test]
fn sphere_silhouette_area() {
    let size = 384u32;
    let surface = AnalyticSurface::new(SdfScene::sphere(0.5).unwrap());
    let cam = Camera::square(CameraPose::initial(), size).unwrap();
    let (_, _, mask) = render_view(&surface, &cam);
    // silhouette cone half-angle asin(r/d) projected through f
    let f = cam.intrinsics.fx;
    let tan = (0.5f64 / 3.0).asin().tan();
    let expected = std::f64::consts::PI * (f * tan).powi(2);
    let rel = (mask.count() as f64 - expected).abs() / expected;
    assert!(rel < 0.02, "area {} vs {expected}", mask.count());
}

#[test]
fn normals_match_central_differences() {
    let scene = SdfScene::new(vec![
        Primitive::sphere([0.2, 0.0, 0.0], 0.4, [200, 0, 0]),
        Primitive::cuboid([-0.3, 0.1, 0.0], [0.2, 0.3, 0.25], [0, 200, 0]),
    ])
    .unwrap();
    let surface = AnalyticSurface::new(scene.clone());
    let cam = Camera::square(CameraPose::new(80.0, 30.0).unwrap(), 63).unwrap();
    let h = 1e-6;
    let (mut agree, mut total) = (0, 0);
    for y in 0..63 {
        for x in 0..63 {
            let Some(hit) = surface.first_hit(&cam.pixel_center_ray(x, y)) else {
                continue;
            };
            let p = hit.point;
            let g = Vector3::new(
                scene.sdf(&(p + Vector3::x() * h)) - scene.sdf(&(p - Vector3::x() * h)),
                scene.sdf(&(p + Vector3::y() * h)) - scene.sdf(&(p - Vector3::y() * h)),
                scene.sdf(&(p + Vector3::z() * h)) - scene.sdf(&(p - Vector3::z() * h)),
            );
            if g.norm() < 1e-12 {
                continue;
            }
            total += 1;
            // near box edges the finite difference straddles two faces
            if (g.normalize() - hit.normal).norm() < 1e-3 {
                agree += 1;
            }
            assert!((hit.normal.norm() - 1.0).abs() < 1e-9);
        }
    }
    assert!(
        total > 200 && agree as f64 >= 0.95 * total as f64,
        "{agree} of {total}"
    );
}

#[test]
fn scene_json_round_trip() {
    let scene = random_scene(9);
    assert_eq!(SdfScene::from_json(&scene.to_json()).unwrap(), scene);
    assert!(SdfScene::sphere(1.5).is_err());
}
