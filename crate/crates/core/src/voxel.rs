//! Vote grid over the bounding cube, DDA ray traversal, and the voxel surface.

use std::fmt::Write as _;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Ray, Vec3};
use crate::scene::{ray_box_interval, Surface, SurfaceHit};

pub const DEFAULT_RESOLUTION: usize = 128;
const RLE_FORMAT: &str = "carvepipe-occupancy-rle";

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid resolution must be positive")]
    ZeroResolution,
    #[error("grid resolutions differ: {0} vs {1}")]
    ResolutionMismatch(usize, usize),
    #[error("malformed grid file: {0}")]
    Malformed(String),
    #[error("grid header: {0}")]
    Header(#[from] serde_json::Error),
}

/// Per-voxel vote counts over `[-1, 1]³`, indexed x-fastest.
///
/// A voxel is occupied iff it collected a vote from every view of the carve that
/// produced the grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoxelGrid {
    resolution: usize,
    votes: Vec<u32>,
    views: u32,
}

impl VoxelGrid {
    pub fn from_votes(resolution: usize, votes: Vec<u32>, views: u32) -> Self {
        assert_eq!(votes.len(), resolution.pow(3));
        Self {
            resolution,
            votes,
            views,
        }
    }

    /// Grid whose occupancy is given directly (recorded as a single-view carve).
    pub fn from_occupancy(
        resolution: usize,
        occupied: impl Fn(usize, usize, usize) -> bool,
    ) -> Self {
        let mut votes = vec![0; resolution.pow(3)];
        for c in 0..resolution {
            for b in 0..resolution {
                for a in 0..resolution {
                    if occupied(a, b, c) {
                        votes[a + resolution * (b + resolution * c)] = 1;
                    }
                }
            }
        }
        Self::from_votes(resolution, votes, 1)
    }

    pub fn full(resolution: usize) -> Self {
        Self::from_votes(resolution, vec![1; resolution.pow(3)], 1)
    }

    pub fn empty(resolution: usize) -> Self {
        Self::from_votes(resolution, vec![0; resolution.pow(3)], 1)
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Number of views the votes were counted over.
    pub fn views(&self) -> u32 {
        self.views
    }

    pub fn votes(&self) -> &[u32] {
        &self.votes
    }

    pub fn voxel_size(&self) -> f64 {
        2.0 / self.resolution as f64
    }

    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    pub fn index(&self, a: usize, b: usize, c: usize) -> usize {
        a + self.resolution * (b + self.resolution * c)
    }

    pub fn coords(&self, index: usize) -> (usize, usize, usize) {
        let r = self.resolution;
        (index % r, (index / r) % r, index / (r * r))
    }

    /// World-space center of voxel `(a, b, c)`.
    pub fn center(&self, a: usize, b: usize, c: usize) -> Point3<f64> {
        voxel_center(self.resolution, a, b, c)
    }

    pub fn is_occupied_index(&self, index: usize) -> bool {
        self.views > 0 && self.votes[index] == self.views
    }

    pub fn is_occupied(&self, a: usize, b: usize, c: usize) -> bool {
        self.is_occupied_index(self.index(a, b, c))
    }

    pub fn occupied_count(&self) -> usize {
        (0..self.votes.len())
            .filter(|&i| self.is_occupied_index(i))
            .count()
    }

    pub fn occupancy(&self) -> Vec<bool> {
        (0..self.votes.len())
            .map(|i| self.is_occupied_index(i))
            .collect()
    }

    /// Inclusive index bounds of the occupied voxels.
    pub fn occupied_bounds(&self) -> Option<([usize; 3], [usize; 3])> {
        let mut lo = [usize::MAX; 3];
        let mut hi = [0; 3];
        let mut any = false;
        for i in 0..self.votes.len() {
            if self.is_occupied_index(i) {
                any = true;
                let (a, b, c) = self.coords(i);
                for (k, v) in [a, b, c].into_iter().enumerate() {
                    lo[k] = lo[k].min(v);
                    hi[k] = hi[k].max(v);
                }
            }
        }
        any.then_some((lo, hi))
    }

    /// Run-length encoded occupancy: a JSON header line, then alternating
    /// empty/occupied run lengths (starting with empty) in x-fastest order.
    pub fn to_rle(&self) -> String {
        let header = RleHeader {
            format: RLE_FORMAT.to_string(),
            resolution: self.resolution,
            domain: [-1.0, 1.0],
            views: self.views,
            order: "x-fastest".to_string(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        let mut current = false;
        let mut run = 0usize;
        let mut first = true;
        let mut push = |out: &mut String, run: usize| {
            if !std::mem::take(&mut first) {
                out.push(' ');
            }
            write!(out, "{run}").unwrap();
        };
        for i in 0..self.votes.len() {
            let occ = self.is_occupied_index(i);
            if occ != current {
                push(&mut out, run);
                current = occ;
                run = 0;
            }
            run += 1;
        }
        push(&mut out, run);
        out.push('\n');
        out
    }

    pub fn from_rle(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines();
        let header_line = lines
            .next()
            .ok_or_else(|| GridError::Malformed("missing header".into()))?;
        let header: RleHeader = serde_json::from_str(header_line)?;
        if header.format != RLE_FORMAT {
            return Err(GridError::Malformed(format!(
                "unknown format {:?}",
                header.format
            )));
        }
        if header.resolution == 0 {
            return Err(GridError::ZeroResolution);
        }
        if header.domain != [-1.0, 1.0] {
            return Err(GridError::Malformed(format!(
                "unsupported domain {:?}",
                header.domain
            )));
        }
        let views = header.views.max(1);
        let total = header.resolution.pow(3);
        let mut votes = Vec::with_capacity(total);
        let mut occupied = false;
        for tok in lines.next().unwrap_or("").split_whitespace() {
            let run: usize = tok
                .parse()
                .map_err(|_| GridError::Malformed(format!("bad run length {tok:?}")))?;
            if votes.len() + run > total {
                return Err(GridError::Malformed("runs exceed grid size".into()));
            }
            votes.extend(std::iter::repeat_n(if occupied { views } else { 0 }, run));
            occupied = !occupied;
        }
        if votes.len() != total {
            return Err(GridError::Malformed(format!(
                "runs cover {} of {total} voxels",
                votes.len()
            )));
        }
        Ok(Self::from_votes(header.resolution, votes, views))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RleHeader {
    format: String,
    resolution: usize,
    domain: [f64; 2],
    #[serde(default)]
    views: u32,
    #[serde(default)]
    order: String,
}

pub fn voxel_center(resolution: usize, a: usize, b: usize, c: usize) -> Point3<f64> {
    let s = 2.0 / resolution as f64;
    Point3::new(
        -1.0 + s * (a as f64 + 0.5),
        -1.0 + s * (b as f64 + 0.5),
        -1.0 + s * (c as f64 + 0.5),
    )
}

/// First occupied voxel along a ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelHit {
    pub voxel: [usize; 3],
    /// Ray parameter where the ray enters the voxel.
    pub t_entry: f64,
    /// Axis of the entered face.
    pub axis: usize,
    /// Outward normal of the entered face.
    pub normal: Vec3,
}

/// Amanatides–Woo traversal of the occupied voxels of a grid.
#[derive(Debug, Clone)]
pub struct VoxelTracer {
    grid: VoxelGrid,
    occupancy: Vec<bool>,
    bounds: Option<([usize; 3], [usize; 3])>,
}

impl VoxelTracer {
    pub fn new(grid: VoxelGrid) -> Self {
        let occupancy = grid.occupancy();
        let bounds = grid.occupied_bounds();
        Self {
            grid,
            occupancy,
            bounds,
        }
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    fn occupied(&self, v: [usize; 3]) -> bool {
        self.occupancy[self.grid.index(v[0], v[1], v[2])]
    }

    pub fn first_occupied(&self, ray: &Ray) -> Option<VoxelHit> {
        let (lo_i, hi_i) = self.bounds?;
        let s = self.grid.voxel_size();
        let lo = lo_i.map(|i| -1.0 + s * i as f64);
        let hi = hi_i.map(|i| -1.0 + s * (i + 1) as f64);
        let (t0, t1) = ray_box_interval(ray, lo, hi)?;
        let t_start = t0.max(0.0);

        // Axis whose slab determined the entry.
        let mut entry_axis = 0;
        let mut best = f64::NEG_INFINITY;
        for a in 0..3 {
            let d = ray.direction[a];
            if d == 0.0 {
                continue;
            }
            let ta = if d > 0.0 {
                (lo[a] - ray.origin[a]) / d
            } else {
                (hi[a] - ray.origin[a]) / d
            };
            if ta > best {
                best = ta;
                entry_axis = a;
            }
        }

        let p = ray.at(t_start);
        let mut idx = [0usize; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let f = ((p[a] + 1.0) / s).floor() as i64;
            let i = f.clamp(lo_i[a] as i64, hi_i[a] as i64);
            idx[a] = i as usize;
            let d = ray.direction[a];
            if d > 0.0 {
                step[a] = 1;
                t_max[a] = (-1.0 + s * (i + 1) as f64 - ray.origin[a]) / d;
                t_delta[a] = s / d;
            } else if d < 0.0 {
                step[a] = -1;
                t_max[a] = (-1.0 + s * i as f64 - ray.origin[a]) / d;
                t_delta[a] = -s / d;
            }
        }

        let mut t_entry = t_start;
        let mut axis = entry_axis;
        loop {
            if self.occupied(idx) {
                let mut normal = Vec3::zeros();
                normal[axis] = if ray.direction[axis] > 0.0 { -1.0 } else { 1.0 };
                return Some(VoxelHit {
                    voxel: idx,
                    t_entry,
                    axis,
                    normal,
                });
            }
            let mut a = 0;
            for k in 1..3 {
                if t_max[k] < t_max[a] {
                    a = k;
                }
            }
            if t_max[a] > t1 {
                return None;
            }
            let next = idx[a] as i64 + step[a];
            if next < lo_i[a] as i64 || next > hi_i[a] as i64 {
                return None;
            }
            t_entry = t_max[a];
            axis = a;
            idx[a] = next as usize;
            t_max[a] += t_delta[a];
        }
    }
}

/// Occupied voxels as a solid: hits land on the entered voxel face.
#[derive(Debug, Clone)]
pub struct VoxelSurface {
    tracer: VoxelTracer,
}

impl VoxelSurface {
    pub fn new(grid: VoxelGrid) -> Self {
        Self {
            tracer: VoxelTracer::new(grid),
        }
    }

    pub fn grid(&self) -> &VoxelGrid {
        self.tracer.grid()
    }

    pub fn tracer(&self) -> &VoxelTracer {
        &self.tracer
    }

    fn occupied_at(&self, a: i64, b: i64, c: i64) -> bool {
        let r = self.grid().resolution() as i64;
        if [a, b, c].iter().any(|&v| v < 0 || v >= r) {
            return false;
        }
        self.tracer.occupied([a as usize, b as usize, c as usize])
    }
}

impl Surface for VoxelSurface {
    fn first_hit(&self, ray: &Ray) -> Option<SurfaceHit> {
        let hit = self.tracer.first_occupied(ray)?;
        Some(SurfaceHit {
            point: ray.at(hit.t_entry),
            distance: hit.t_entry,
            normal: hit.normal,
        })
    }

    /// Normal of the voxel face nearest to `p` that separates an occupied
    /// voxel from an empty one.
    fn normal_at(&self, p: &Point3<f64>) -> Vec3 {
        let s = self.grid().voxel_size();
        let g = p.coords.map(|v| (v + 1.0) / s);
        let mut order = [0usize, 1, 2];
        let frac_dist = |a: usize| (g[a] - g[a].round()).abs();
        order.sort_by(|&x, &y| frac_dist(x).total_cmp(&frac_dist(y)));
        for &axis in &order {
            let plane = g[axis].round() as i64;
            let mut below = [g.x.floor() as i64, g.y.floor() as i64, g.z.floor() as i64];
            below[axis] = plane - 1;
            let mut above = below;
            above[axis] = plane;
            let occ_below = self.occupied_at(below[0], below[1], below[2]);
            let occ_above = self.occupied_at(above[0], above[1], above[2]);
            if occ_below != occ_above {
                let mut n = Vec3::zeros();
                n[axis] = if occ_below { 1.0 } else { -1.0 };
                return n;
            }
        }
        // Not on a boundary face; point outward from the cube center.
        let axis = p.coords.abs().imax();
        let mut n = Vec3::zeros();
        n[axis] = p[axis].signum();
        n
    }
}
