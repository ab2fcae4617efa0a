//! The growing pseudo-ground-truth dataset.
//!
//! On disk a dataset is a directory holding `manifest.json` and one
//! `view_XXX/` directory per record with `color.png`, `depth.cpd`,
//! `normal.cpn` and `mask.png`. The manifest stores poses, the prompt tokens,
//! relative file names and SHA-256 checksums of every file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::geometry::{Camera, CameraPose, Intrinsics};
use crate::raster::{DepthMap, MaskImage, NormalMap, RasterError, RgbImage};

pub const MANIFEST: &str = "manifest.json";
const FORMAT: &str = "carvepipe-dataset-v1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("view {view}: rasters disagree in size ({detail})")]
    DimensionMismatch { view: usize, detail: String },
    #[error("view {view}: pixel ({x}, {y}) is background but carries depth {depth}")]
    BackgroundDepth {
        view: usize,
        x: u32,
        y: u32,
        depth: f32,
    },
    #[error("the first view must be at polar 90°, azimuth 0°; got ({0}°, {1}°)")]
    WrongInitialPose(f64, f64),
    #[error("expected view index {expected}, got {got}")]
    IndexGap { expected: usize, got: usize },
    #[error("view {view} repeats the pose of view {existing}")]
    DuplicatePose { view: usize, existing: usize },
    #[error("view {view}: missing file {path}")]
    MissingFile { view: usize, path: PathBuf },
    #[error("view {view}: checksum mismatch for {path}")]
    Checksum { view: usize, path: PathBuf },
    #[error("view {view}: cannot decode {path}: {source}")]
    Decode {
        view: usize,
        path: PathBuf,
        #[source]
        source: RasterError,
    },
    #[error("malformed manifest: {0}")]
    Manifest(String),
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("raster encode: {0}")]
    Encode(#[from] RasterError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One pseudo-ground-truth view: color, depth, normals, mask and pose.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewRecord {
    pub color: RgbImage,
    pub depth: DepthMap,
    pub normal: NormalMap,
    pub mask: MaskImage,
    pub pose: CameraPose,
    pub view_index: usize,
}

impl ViewRecord {
    pub fn dims(&self) -> (u32, u32) {
        self.mask.dims()
    }

    /// Camera for this record's pose at the record's raster size.
    pub fn camera(&self) -> Camera {
        let (w, h) = self.dims();
        let k = Intrinsics::from_fov(w, h, self.pose.fov_deg)
            .expect("validated pose and non-empty raster");
        Camera::new(self.pose, k)
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let dims = self.mask.dims();
        let others = [
            ("color", self.color.dims()),
            ("depth", self.depth.dims()),
            ("normal", self.normal.dims()),
        ];
        for (name, d) in others {
            if d != dims {
                return Err(DatasetError::DimensionMismatch {
                    view: self.view_index,
                    detail: format!("{name} is {}x{}, mask is {}x{}", d.0, d.1, dims.0, dims.1),
                });
            }
        }
        for y in 0..dims.1 {
            for x in 0..dims.0 {
                if !self.mask.get(x, y) && self.depth.is_hit(x, y) {
                    return Err(DatasetError::BackgroundDepth {
                        view: self.view_index,
                        x,
                        y,
                        depth: self.depth.get(x, y),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoDataset {
    records: Vec<ViewRecord>,
    object_tag: String,
    class_word: String,
}

/// Starts a dataset from the input view.
pub fn init_dataset(
    record0: ViewRecord,
    tag: &str,
    class_word: &str,
) -> Result<PseudoDataset, DatasetError> {
    PseudoDataset::init(record0, tag, class_word)
}

impl PseudoDataset {
    pub fn init(record0: ViewRecord, tag: &str, class_word: &str) -> Result<Self, DatasetError> {
        let p = record0.pose;
        if p.polar_deg != 90.0 || p.azimuth_deg != 0.0 {
            return Err(DatasetError::WrongInitialPose(p.polar_deg, p.azimuth_deg));
        }
        if record0.view_index != 0 {
            return Err(DatasetError::IndexGap {
                expected: 0,
                got: record0.view_index,
            });
        }
        record0.validate()?;
        Ok(Self {
            records: vec![record0],
            object_tag: tag.to_string(),
            class_word: class_word.to_string(),
        })
    }

    pub fn records(&self) -> &[ViewRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn object_tag(&self) -> &str {
        &self.object_tag
    }

    pub fn class_word(&self) -> &str {
        &self.class_word
    }

    /// Raster size shared by every record.
    pub fn dims(&self) -> (u32, u32) {
        self.records[0].dims()
    }

    pub fn poses(&self) -> Vec<CameraPose> {
        self.records.iter().map(|r| r.pose).collect()
    }

    pub fn append(&mut self, record: ViewRecord) -> Result<(), DatasetError> {
        if record.view_index != self.records.len() {
            return Err(DatasetError::IndexGap {
                expected: self.records.len(),
                got: record.view_index,
            });
        }
        record.validate()?;
        if record.dims() != self.dims() {
            let (w, h) = self.dims();
            return Err(DatasetError::DimensionMismatch {
                view: record.view_index,
                detail: format!(
                    "record is {}x{}, dataset is {w}x{h}",
                    record.dims().0,
                    record.dims().1
                ),
            });
        }
        if let Some(existing) = self.records.iter().position(|r| r.pose == record.pose) {
            return Err(DatasetError::DuplicatePose {
                view: record.view_index,
                existing,
            });
        }
        self.records.push(record);
        Ok(())
    }

    /// Dataset truncated to its first `len` records.
    pub fn truncated(&self, len: usize) -> PseudoDataset {
        PseudoDataset {
            records: self.records[..len.clamp(1, self.records.len())].to_vec(),
            object_tag: self.object_tag.clone(),
            class_word: self.class_word.clone(),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), DatasetError> {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        let mut views = Vec::with_capacity(self.records.len());
        for r in &self.records {
            let rel = format!("view_{:03}", r.view_index);
            let vdir = dir.join(&rel);
            fs::create_dir_all(&vdir).map_err(io_err(&vdir))?;
            let blobs = [
                ("color.png", r.color.to_png()?),
                ("depth.cpd", r.depth.to_bytes()),
                ("normal.cpn", r.normal.to_bytes()),
                ("mask.png", r.mask.to_png()?),
            ];
            let mut files = ViewFiles::default();
            let mut sums = ViewFiles::default();
            for (i, (name, bytes)) in blobs.iter().enumerate() {
                let path = vdir.join(name);
                fs::write(&path, bytes).map_err(io_err(&path))?;
                *files.slot(i) = format!("{rel}/{name}");
                *sums.slot(i) = sha256_hex(bytes);
            }
            views.push(ManifestView {
                index: r.view_index,
                pose: r.pose,
                files,
                sha256: sums,
            });
        }
        let (width, height) = self.dims();
        let manifest = Manifest {
            format: FORMAT.to_string(),
            object_tag: self.object_tag.clone(),
            class_word: self.class_word.clone(),
            width,
            height,
            views,
        };
        let path = dir.join(MANIFEST);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    pub fn load(dir: &Path) -> Result<PseudoDataset, DatasetError> {
        let manifest = read_manifest(dir)?;
        if manifest.views.is_empty() {
            return Err(DatasetError::Manifest("no views".into()));
        }
        let mut dataset: Option<PseudoDataset> = None;
        for (i, v) in manifest.views.iter().enumerate() {
            if v.index != i {
                return Err(DatasetError::Manifest(format!(
                    "view {i} has index {}",
                    v.index
                )));
            }
            let read = |slot: usize| -> Result<(PathBuf, Vec<u8>), DatasetError> {
                let rel = v.files.get(slot);
                let path = dir.join(rel);
                let bytes = fs::read(&path).map_err(|_| DatasetError::MissingFile {
                    view: i,
                    path: path.clone(),
                })?;
                if sha256_hex(&bytes) != v.sha256.get(slot) {
                    return Err(DatasetError::Checksum { view: i, path });
                }
                Ok((path, bytes))
            };
            let decode = |path: PathBuf| {
                move |source| DatasetError::Decode {
                    view: i,
                    path,
                    source,
                }
            };
            let (p, b) = read(0)?;
            let color = RgbImage::from_png(&b).map_err(decode(p))?;
            let (p, b) = read(1)?;
            let depth = DepthMap::from_bytes(&b).map_err(decode(p))?;
            let (p, b) = read(2)?;
            let normal = NormalMap::from_bytes(&b).map_err(decode(p))?;
            let (p, b) = read(3)?;
            let mask = MaskImage::from_png(&b).map_err(decode(p))?;
            let record = ViewRecord {
                color,
                depth,
                normal,
                mask,
                pose: v.pose,
                view_index: i,
            };
            match dataset.as_mut() {
                None => {
                    dataset = Some(PseudoDataset::init(
                        record,
                        &manifest.object_tag,
                        &manifest.class_word,
                    )?)
                }
                Some(d) => d.append(record)?,
            }
        }
        let dataset = dataset.expect("at least one view");
        if dataset.dims() != (manifest.width, manifest.height) {
            return Err(DatasetError::Manifest(format!(
                "manifest says {}x{}, rasters are {}x{}",
                manifest.width,
                manifest.height,
                dataset.dims().0,
                dataset.dims().1
            )));
        }
        Ok(dataset)
    }
}

pub(crate) fn read_manifest(dir: &Path) -> Result<Manifest, DatasetError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| DatasetError::Manifest(e.to_string()))?;
    if manifest.format != FORMAT {
        return Err(DatasetError::Manifest(format!(
            "unknown format {:?}",
            manifest.format
        )));
    }
    Ok(manifest)
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct Manifest {
    pub format: String,
    pub object_tag: String,
    pub class_word: String,
    pub width: u32,
    pub height: u32,
    pub views: Vec<ManifestView>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct ManifestView {
    pub index: usize,
    pub pose: CameraPose,
    pub files: ViewFiles,
    pub sha256: ViewFiles,
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub(crate) struct ViewFiles {
    pub color: String,
    pub depth: String,
    pub normal: String,
    pub mask: String,
}

impl ViewFiles {
    fn slot(&mut self, i: usize) -> &mut String {
        match i {
            0 => &mut self.color,
            1 => &mut self.depth,
            2 => &mut self.normal,
            _ => &mut self.mask,
        }
    }

    fn get(&self, i: usize) -> &str {
        match i {
            0 => &self.color,
            1 => &self.depth,
            2 => &self.normal,
            _ => &self.mask,
        }
    }
}
