use std::fs;

use carvepipe::dataset::{DatasetError, PseudoDataset, ViewRecord, MANIFEST};
use carvepipe::raster::{DepthMap, MaskImage, NormalMap};
use carvepipe::scene::{render_color, render_view, AnalyticSurface, SdfScene};
use carvepipe::voxel::VoxelGrid;
use carvepipe::{Camera, CameraPose};
use proptest::prelude::*;

fn record(pose: CameraPose, index: usize) -> ViewRecord {
    let scene = SdfScene::sphere(0.5).unwrap();
    let cam = Camera::square(pose, 40).unwrap();
    let (depth, normal, mask) = render_view(&AnalyticSurface::new(scene.clone()), &cam);
    ViewRecord {
        color: render_color(&scene, &cam),
        depth,
        normal,
        mask,
        pose,
        view_index: index,
    }
}

fn three_views() -> PseudoDataset {
    let mut d = PseudoDataset::init(record(CameraPose::initial(), 0), "sks", "doll").unwrap();
    d.append(record(CameraPose::new(90.0, 45.0).unwrap(), 1))
        .unwrap();
    d.append(record(CameraPose::new(60.0, -45.0).unwrap(), 2))
        .unwrap();
    d
}

#[test]
fn save_load_round_trip_is_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let d = three_views();
    d.save(tmp.path()).unwrap();
    let back = PseudoDataset::load(tmp.path()).unwrap();
    assert_eq!(back, d);
    assert_eq!(back.class_word(), "doll");
    let again = tempfile::tempdir().unwrap();
    back.save(again.path()).unwrap();
    for f in ["view_002/depth.cpd", "view_001/mask.png", MANIFEST] {
        assert_eq!(
            fs::read(tmp.path().join(f)).unwrap(),
            fs::read(again.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn tampered_and_missing_files_are_detected() {
    let tmp = tempfile::tempdir().unwrap();
    three_views().save(tmp.path()).unwrap();
    let path = tmp.path().join("view_001/normal.cpn");
    let mut bytes = fs::read(&path).unwrap();
    let n = bytes.len();
    bytes[n - 1] ^= 1;
    fs::write(&path, bytes).unwrap();
    assert!(matches!(
        PseudoDataset::load(tmp.path()).unwrap_err(),
        DatasetError::Checksum { view: 1, .. }
    ));
    fs::remove_file(tmp.path().join("view_002/color.png")).unwrap();
    fs::remove_file(&path).unwrap();
    assert!(matches!(
        PseudoDataset::load(tmp.path()).unwrap_err(),
        DatasetError::MissingFile { view: 1, .. }
    ));
}

#[test]
fn append_enforces_invariants() {
    let mut d = three_views();
    assert!(matches!(
        d.append(record(CameraPose::new(90.0, 45.0).unwrap(), 3))
            .unwrap_err(),
        DatasetError::DuplicatePose { .. }
    ));
    assert!(matches!(
        d.append(record(CameraPose::new(90.0, 100.0).unwrap(), 5))
            .unwrap_err(),
        DatasetError::IndexGap { .. }
    ));
    assert!(matches!(
        PseudoDataset::init(
            record(CameraPose::new(90.0, 10.0).unwrap(), 0),
            "sks",
            "doll"
        )
        .unwrap_err(),
        DatasetError::WrongInitialPose(..)
    ));
    let mut bad = record(CameraPose::new(90.0, 100.0).unwrap(), 3);
    bad.mask = MaskImage::new(40, 40);
    assert!(matches!(
        d.append(bad).unwrap_err(),
        DatasetError::BackgroundDepth { .. }
    ));
    assert_eq!(d.len(), 3);
}

proptest! {
    #[test]
    fn mask_png_round_trip(w in 1u32..40, h in 1u32..40, seed in any::<u64>()) {
        let m = MaskImage::from_fn(w, h, |x, y| (seed >> ((x * 7 + y * 3) % 64)) & 1 == 1);
        prop_assert_eq!(MaskImage::from_png(&m.to_png().unwrap()).unwrap(), m);
    }

    #[test]
    fn depth_and_normal_round_trip(w in 1u32..20, h in 1u32..20, d in 0.1f32..9.0) {
        let mut depth = DepthMap::new(w, h);
        let mut normal = NormalMap::new(w, h);
        depth.set(0, 0, d);
        normal.set(w - 1, h - 1, [0.0, 0.6, 0.8]);
        prop_assert_eq!(DepthMap::from_bytes(&depth.to_bytes()).unwrap(), depth);
        prop_assert_eq!(NormalMap::from_bytes(&normal.to_bytes()).unwrap(), normal);
    }

    #[test]
    fn rle_round_trip(r in 1usize..12, seed in any::<u64>()) {
        let g = VoxelGrid::from_occupancy(r, |a, b, c| (seed.rotate_left((a + 3 * b + 5 * c) as u32) & 3) == 0);
        let back = VoxelGrid::from_rle(&g.to_rle()).unwrap();
        prop_assert_eq!(back.occupancy(), g.occupancy());
        prop_assert_eq!(back.resolution(), r);
    }
}

#[test]
fn malformed_rasters_are_rejected() {
    assert!(DepthMap::from_bytes(b"CPD1\x02\0\0\0").is_err());
    assert!(NormalMap::from_bytes(b"XXXX\0\0\0\0\0\0\0\0").is_err());
    assert!(VoxelGrid::from_rle("{\"resolution\": 2}\n3").is_err());
}
