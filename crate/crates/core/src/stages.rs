//! Pluggable processing stages and their file protocol.
//!
//! Every stage invocation gets its own directory. The pipeline writes the
//! inputs and a `request.json` describing the call; the stage writes its
//! outputs next to them and exits. External stages are arbitrary programs run
//! as `<command> <input_dir>`; exit status 0 means success. The built-in
//! oracle backend renders the ground-truth scene instead.
//!
//! | kind          | inputs                                                   | output            |
//! |---------------|----------------------------------------------------------|-------------------|
//! | `segment`     | `color.png`                                              | `mask.png`        |
//! | `depth`       | `color.png`                                              | `depth.cpd`       |
//! | `normal`      | `color.png`                                              | `normal.cpn`      |
//! | `outpaint`    | `render.png`, `outmask.png`, `fgmask.png`, `prompt.txt`  | `outpainted.png`  |
//! | `superres`    | `color.png`                                              | `upscaled.png` (2×) |
//! | `reconstruct` | dataset at `params.dataset_dir`                          | `grid.rle`        |

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::carving::{carve_with_depth_maps, CarveError, CarveView};
use crate::dataset::{DatasetError, PseudoDataset};
use crate::geometry::{Camera, CameraPose, GeometryError, Intrinsics};
use crate::raster::{DepthMap, MaskImage, NormalMap, RasterError, RgbImage};
use crate::scene::{render_color, render_view, AnalyticSurface, SdfScene};
use crate::voxel::VoxelGrid;

pub const REQUEST_FILE: &str = "request.json";
pub const PROMPT_FILE: &str = "prompt.txt";
pub const TIMEOUT_ENV: &str = "CARVEPIPE_STAGE_TIMEOUT";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);
pub const SUPERRES_FACTOR: u32 = 2;
pub const DIR_PLACEHOLDER: &str = "{dir}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageKind {
    Segment,
    Depth,
    Normal,
    Outpaint,
    Superres,
    Reconstruct,
}

impl StageKind {
    pub const ALL: [StageKind; 6] = [
        StageKind::Segment,
        StageKind::Depth,
        StageKind::Normal,
        StageKind::Outpaint,
        StageKind::Superres,
        StageKind::Reconstruct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StageKind::Segment => "segment",
            StageKind::Depth => "depth",
            StageKind::Normal => "normal",
            StageKind::Outpaint => "outpaint",
            StageKind::Superres => "superres",
            StageKind::Reconstruct => "reconstruct",
        }
    }

    /// File the stage must produce.
    pub fn output_file(self) -> &'static str {
        match self {
            StageKind::Segment => "mask.png",
            StageKind::Depth => "depth.cpd",
            StageKind::Normal => "normal.cpn",
            StageKind::Outpaint => "outpainted.png",
            StageKind::Superres => "upscaled.png",
            StageKind::Reconstruct => "grid.rle",
        }
    }
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StageKind {
    type Err = StageError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StageKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| StageError::UnknownKind(s.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum StageError {
    #[error("unknown stage kind {0:?}")]
    UnknownKind(String),
    #[error("bad stage spec {0:?}: expected <kind>=<command>")]
    BadSpec(String),
    #[error("{kind} stage: command {program:?} not found")]
    CommandNotFound { kind: StageKind, program: String },
    #[error("{kind} stage: the oracle backend needs a ground-truth scene")]
    OracleNeedsScene { kind: StageKind },
    #[error("{kind} stage: failed to launch {program:?}: {source}")]
    Spawn {
        kind: StageKind,
        program: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{kind} stage exited with status {code:?}")]
    NonZeroExit { kind: StageKind, code: Option<i32> },
    #[error("{kind} stage timed out after {secs} s")]
    Timeout { kind: StageKind, secs: u64 },
    #[error("{kind} stage: missing output {file}")]
    MissingOutput { kind: StageKind, file: PathBuf },
    #[error("{kind} stage: invalid output {file}: {reason}")]
    InvalidOutput {
        kind: StageKind,
        file: PathBuf,
        reason: String,
    },
    #[error("{kind} stage: missing input {file}")]
    MissingInput { kind: StageKind, file: PathBuf },
    #[error("stage io at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("raster: {0}")]
    Raster(#[from] RasterError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("carving: {0}")]
    Carve(#[from] CarveError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StageError + '_ {
    move |source| StageError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Direction keyword for a camera azimuth: front within 45° of the initial
/// view, right on the `+y` side, left on the `-y` side, behind past 135°.
/// Boundaries belong to the class nearer the front.
pub fn direction_keyword(azimuth_deg: f64) -> &'static str {
    let a = azimuth_deg;
    if a.abs() <= 45.0 {
        "front"
    } else if a > 45.0 && a <= 135.0 {
        "right"
    } else if (-135.0..-45.0).contains(&a) {
        "left"
    } else {
        "behind"
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub tag: String,
    pub class_word: String,
    pub direction: String,
}

impl PromptSpec {
    pub fn new(tag: &str, class_word: &str, azimuth_deg: f64) -> Self {
        Self {
            tag: tag.to_string(),
            class_word: class_word.to_string(),
            direction: direction_keyword(azimuth_deg).to_string(),
        }
    }

    pub fn render(&self) -> String {
        format!(
            "A photo of {} {} in a white background, seen from {}",
            self.tag, self.class_word, self.direction
        )
    }
}

pub fn build_prompt(tag: &str, class_word: &str, azimuth_deg: f64) -> String {
    PromptSpec::new(tag, class_word, azimuth_deg).render()
}

/// One stage invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRequest {
    pub kind: StageKind,
    pub input_dir: PathBuf,
    pub pose: CameraPose,
    pub intrinsics: Intrinsics,
    pub params: BTreeMap<String, String>,
}

impl StageRequest {
    pub fn new(kind: StageKind, input_dir: impl Into<PathBuf>, camera: &Camera) -> Self {
        Self {
            kind,
            input_dir: input_dir.into(),
            pose: camera.pose,
            intrinsics: camera.intrinsics,
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: impl Into<String>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn camera(&self) -> Camera {
        Camera::new(self.pose, self.intrinsics)
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.input_dir.join(file)
    }

    /// Creates the directory and writes `request.json` (plus `prompt.txt` when a
    /// prompt parameter is present).
    pub fn prepare(&self) -> Result<(), StageError> {
        fs::create_dir_all(&self.input_dir).map_err(io_err(&self.input_dir))?;
        let path = self.path(REQUEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("request serializes") + "\n";
        fs::write(&path, text).map_err(io_err(&path))?;
        if let Some(prompt) = self.params.get("prompt") {
            let path = self.path(PROMPT_FILE);
            fs::write(&path, format!("{prompt}\n")).map_err(io_err(&path))?;
        }
        Ok(())
    }

    pub fn write_file(&self, name: &str, bytes: &[u8]) -> Result<(), StageError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(io_err(&path))
    }

    fn read_input(&self, name: &str) -> Result<Vec<u8>, StageError> {
        let path = self.path(name);
        fs::read(&path).map_err(|_| StageError::MissingInput {
            kind: self.kind,
            file: path,
        })
    }

    fn read_output(&self) -> Result<(PathBuf, Vec<u8>), StageError> {
        let path = self.path(self.kind.output_file());
        match fs::read(&path) {
            Ok(b) => Ok((path, b)),
            Err(_) => Err(StageError::MissingOutput {
                kind: self.kind,
                file: path,
            }),
        }
    }
}

/// Program plus fixed arguments. The input directory replaces a `{dir}`
/// argument if there is one and is appended otherwise.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalCommand {
    pub program: String,
    pub args: Vec<String>,
}

impl ExternalCommand {
    pub fn parse(command: &str) -> Result<Self, StageError> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts
            .next()
            .ok_or_else(|| StageError::BadSpec(command.to_string()))?;
        Ok(Self {
            program,
            args: parts.collect(),
        })
    }

    /// Whether the program can be found (as a path or on `PATH`).
    pub fn resolvable(&self) -> bool {
        let p = Path::new(&self.program);
        if p.components().count() > 1 {
            return p.is_file();
        }
        std::env::var_os("PATH")
            .map(|paths| std::env::split_paths(&paths).any(|d| d.join(p).is_file()))
            .unwrap_or(false)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum StageBackend {
    /// Renders the ground-truth scene (reconstruct: reference carving).
    #[default]
    Oracle,
    External(ExternalCommand),
}

/// Backend per stage kind; unspecified kinds use the oracle.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StageBackends {
    map: BTreeMap<StageKind, StageBackend>,
}

impl StageBackends {
    pub fn set(&mut self, kind: StageKind, backend: StageBackend) {
        self.map.insert(kind, backend);
    }

    pub fn get(&self, kind: StageKind) -> &StageBackend {
        self.map.get(&kind).unwrap_or(&StageBackend::Oracle)
    }

    /// Parses `<kind>=<command>`.
    pub fn add_spec(&mut self, spec: &str) -> Result<(), StageError> {
        let (kind, cmd) = spec
            .split_once('=')
            .ok_or_else(|| StageError::BadSpec(spec.to_string()))?;
        let kind: StageKind = kind.trim().parse()?;
        self.set(kind, StageBackend::External(ExternalCommand::parse(cmd)?));
        Ok(())
    }

    /// Checks that every external command exists and that oracle stages that
    /// need a scene have one.
    pub fn validate(&self, have_scene: bool) -> Result<(), StageError> {
        for kind in StageKind::ALL {
            match self.get(kind) {
                StageBackend::External(cmd) if !cmd.resolvable() => {
                    return Err(StageError::CommandNotFound {
                        kind,
                        program: cmd.program.clone(),
                    })
                }
                StageBackend::Oracle if kind != StageKind::Reconstruct && !have_scene => {
                    return Err(StageError::OracleNeedsScene { kind })
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Stage timeout: `CARVEPIPE_STAGE_TIMEOUT` seconds if set, else 600 s.
pub fn stage_timeout() -> Duration {
    std::env::var(TIMEOUT_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<f64>().ok())
        .filter(|s| *s > 0.0)
        .map(Duration::from_secs_f64)
        .unwrap_or(DEFAULT_TIMEOUT)
}

/// Validated result of a stage.
#[derive(Debug, Clone, PartialEq)]
pub enum StageOutput {
    Mask(MaskImage),
    Depth(DepthMap),
    Normal(NormalMap),
    Outpainted(RgbImage),
    Upscaled(RgbImage),
    Reconstruction(VoxelGrid),
}

/// Runs a prepared request on a backend and validates what it wrote.
pub fn run_stage(
    request: &StageRequest,
    backend: &StageBackend,
    scene: Option<&SdfScene>,
    timeout: Duration,
) -> Result<StageOutput, StageError> {
    match backend {
        StageBackend::Oracle => run_oracle(request, scene)?,
        StageBackend::External(cmd) => run_external(request, cmd, timeout)?,
    }
    validate_output(request)
}

fn run_external(
    request: &StageRequest,
    cmd: &ExternalCommand,
    timeout: Duration,
) -> Result<(), StageError> {
    let kind = request.kind;
    let log = |name: &str| -> Result<Stdio, StageError> {
        let path = request.path(name);
        Ok(fs::File::create(&path).map_err(io_err(&path))?.into())
    };
    let dir = request.input_dir.to_string_lossy();
    let mut args: Vec<String> = cmd
        .args
        .iter()
        .map(|a| a.replace(DIR_PLACEHOLDER, &dir))
        .collect();
    if !cmd.args.iter().any(|a| a.contains(DIR_PLACEHOLDER)) {
        args.push(dir.into_owned());
    }
    let mut child = Command::new(&cmd.program)
        .args(&args)
        .stdin(Stdio::null())
        .stdout(log("stage.stdout.log")?)
        .stderr(log("stage.stderr.log")?)
        .spawn()
        .map_err(|source| StageError::Spawn {
            kind,
            program: cmd.program.clone(),
            source,
        })?;
    let start = Instant::now();
    loop {
        match child.try_wait().map_err(io_err(&request.input_dir))? {
            Some(status) if status.success() => return Ok(()),
            Some(status) => {
                return Err(StageError::NonZeroExit {
                    kind,
                    code: status.code(),
                })
            }
            None if start.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(StageError::Timeout {
                    kind,
                    secs: timeout.as_secs(),
                });
            }
            None => std::thread::sleep(Duration::from_millis(10)),
        }
    }
}

fn run_oracle(request: &StageRequest, scene: Option<&SdfScene>) -> Result<(), StageError> {
    let kind = request.kind;
    if kind == StageKind::Reconstruct {
        let dir = request
            .params
            .get("dataset_dir")
            .ok_or_else(|| StageError::MissingInput {
                kind,
                file: PathBuf::from("params.dataset_dir"),
            })?;
        let resolution = request
            .params
            .get("grid_resolution")
            .and_then(|r| r.parse().ok())
            .unwrap_or(crate::voxel::DEFAULT_RESOLUTION);
        let dataset = PseudoDataset::load(Path::new(dir))?;
        let grid = oracle_reconstruct(&dataset, resolution)?;
        return request.write_file(kind.output_file(), grid.to_rle().as_bytes());
    }
    let scene = scene.ok_or(StageError::OracleNeedsScene { kind })?;
    let camera = request.camera();
    let bytes = match kind {
        StageKind::Segment | StageKind::Depth | StageKind::Normal => {
            request.read_input("color.png")?;
            let (depth, normal, mask) = render_view(&AnalyticSurface::new(scene.clone()), &camera);
            match kind {
                StageKind::Segment => mask.to_png()?,
                StageKind::Depth => depth.to_bytes(),
                _ => normal.to_bytes(),
            }
        }
        StageKind::Outpaint => {
            let render = RgbImage::from_png(&request.read_input("render.png")?)?;
            let region = MaskImage::from_png(&request.read_input("outmask.png")?)?;
            let truth = render_color(scene, &camera);
            let mut out = render.clone();
            for y in 0..out.height() {
                for x in 0..out.width() {
                    if region.get(x, y) {
                        out.set(x, y, truth.get(x, y));
                    }
                }
            }
            out.to_png()?
        }
        StageKind::Superres => {
            request.read_input("color.png")?;
            render_color(scene, &camera.scaled(SUPERRES_FACTOR)).to_png()?
        }
        StageKind::Reconstruct => unreachable!(),
    };
    request.write_file(kind.output_file(), &bytes)
}

/// Checks the output of a finished stage against the protocol.
pub fn validate_output(request: &StageRequest) -> Result<StageOutput, StageError> {
    let kind = request.kind;
    let (path, bytes) = request.read_output()?;
    let invalid = |reason: String| StageError::InvalidOutput {
        kind,
        file: path.clone(),
        reason,
    };
    let want = (request.intrinsics.width, request.intrinsics.height);
    let check_dims = |got: (u32, u32), want: (u32, u32)| {
        if got == want {
            Ok(())
        } else {
            Err(invalid(format!(
                "size {}x{} but expected {}x{}",
                got.0, got.1, want.0, want.1
            )))
        }
    };
    match kind {
        StageKind::Segment => {
            let m = MaskImage::from_png(&bytes).map_err(|e| invalid(e.to_string()))?;
            check_dims(m.dims(), want)?;
            Ok(StageOutput::Mask(m))
        }
        StageKind::Depth => {
            let d = DepthMap::from_bytes(&bytes).map_err(|e| invalid(e.to_string()))?;
            check_dims(d.dims(), want)?;
            Ok(StageOutput::Depth(d))
        }
        StageKind::Normal => {
            let n = NormalMap::from_bytes(&bytes).map_err(|e| invalid(e.to_string()))?;
            check_dims(n.dims(), want)?;
            for v in n.values() {
                let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
                if len != 0.0 && (len - 1.0).abs() > 1e-3 {
                    return Err(invalid(format!("normal of length {len}")));
                }
            }
            Ok(StageOutput::Normal(n))
        }
        StageKind::Outpaint => {
            let out = RgbImage::from_png(&bytes).map_err(|e| invalid(e.to_string()))?;
            check_dims(out.dims(), want)?;
            let render = RgbImage::from_png(&request.read_input("render.png")?)?;
            let region = MaskImage::from_png(&request.read_input("outmask.png")?)?;
            let seen = MaskImage::from_png(&request.read_input("fgmask.png")?)?;
            check_dims(render.dims(), want)?;
            for y in 0..want.1 {
                for x in 0..want.0 {
                    if !region.get(x, y) && seen.get(x, y) && out.get(x, y) != render.get(x, y) {
                        return Err(invalid(format!(
                            "pixel ({x}, {y}) outside the outpainting mask was modified"
                        )));
                    }
                }
            }
            Ok(StageOutput::Outpainted(out))
        }
        StageKind::Superres => {
            let out = RgbImage::from_png(&bytes).map_err(|e| invalid(e.to_string()))?;
            check_dims(
                out.dims(),
                (want.0 * SUPERRES_FACTOR, want.1 * SUPERRES_FACTOR),
            )?;
            Ok(StageOutput::Upscaled(out))
        }
        StageKind::Reconstruct => {
            let text = String::from_utf8(bytes).map_err(|e| invalid(e.to_string()))?;
            let grid = VoxelGrid::from_rle(&text).map_err(|e| invalid(e.to_string()))?;
            if let Some(r) = request
                .params
                .get("grid_resolution")
                .and_then(|r| r.parse::<usize>().ok())
            {
                if grid.resolution() != r {
                    return Err(invalid(format!(
                        "resolution {} but expected {r}",
                        grid.resolution()
                    )));
                }
            }
            Ok(StageOutput::Reconstruction(grid))
        }
    }
}

/// Reference reconstruction: carve every dataset view, with the depth test
/// reading each view's own depth map.
pub fn oracle_reconstruct(
    dataset: &PseudoDataset,
    resolution: usize,
) -> Result<VoxelGrid, StageError> {
    let views: Vec<CarveView<'_>> = dataset
        .records()
        .iter()
        .map(|r| CarveView::with_depth(&r.mask, &r.depth, r.camera()))
        .collect();
    Ok(carve_with_depth_maps(&views, resolution)?)
}
