//! Triangle mesh extraction from an occupancy grid.
//!
//! The occupancy is sampled at voxel centers, padded with one empty layer, and
//! contoured at 0.5 by marching tetrahedra: each lattice cell is split into six
//! tetrahedra around its main diagonal, so neighbouring cells agree on every
//! shared face and the result is a closed, consistently oriented surface.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Point3;
use thiserror::Error;

use crate::voxel::VoxelGrid;

/// Kuhn split of the unit cube: corner bits are x = 1, y = 2, z = 4.
const TETS: [[usize; 4]; 6] = [
    [0, 1, 3, 7],
    [0, 1, 5, 7],
    [0, 2, 3, 7],
    [0, 2, 6, 7],
    [0, 4, 5, 7],
    [0, 4, 6, 7],
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MeshError {
    #[error("grid has no occupied voxels")]
    EmptyGrid,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Mesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn surface_area(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                0.5 * (b - a).cross(&(c - a)).norm()
            })
            .sum()
    }

    /// Enclosed volume (positive for outward-facing triangles).
    pub fn volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    pub fn edge_count(&self) -> usize {
        let mut edges: Vec<(u32, u32)> = self
            .triangles
            .iter()
            .flat_map(|t| [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])])
            .map(|(a, b)| (a.min(b), a.max(b)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edge_count() as i64 + self.triangles.len() as i64
    }

    /// Every directed edge appears exactly once and its reverse exactly once.
    pub fn is_closed_oriented(&self) -> bool {
        let mut directed: HashMap<(u32, u32), u32> = HashMap::new();
        for t in &self.triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                *directed.entry((a, b)).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn to_obj(&self) -> String {
        let mut out = String::with_capacity(self.vertices.len() * 32 + self.triangles.len() * 24);
        out.push_str("# carvepipe occupancy mesh\n");
        for v in &self.vertices {
            let _ = writeln!(out, "v {:.6} {:.6} {:.6}", v.x, v.y, v.z);
        }
        for t in &self.triangles {
            let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
        }
        out
    }

    pub fn write_obj(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_obj())
    }
}

/// Contours the occupied voxels into a closed mesh in world coordinates.
pub fn extract_mesh(grid: &VoxelGrid) -> Result<Mesh, MeshError> {
    if grid.occupied_count() == 0 {
        return Err(MeshError::EmptyGrid);
    }
    let r = grid.resolution();
    let n = r + 2;
    let s = grid.voxel_size();
    let inside = |i: usize, j: usize, k: usize| {
        (1..=r).contains(&i)
            && (1..=r).contains(&j)
            && (1..=r).contains(&k)
            && grid.is_occupied(i - 1, j - 1, k - 1)
    };
    let lattice_id = |i: usize, j: usize, k: usize| (i + n * (j + n * k)) as u64;
    let position = |id: u64| {
        let id = id as usize;
        let (i, j, k) = (id % n, (id / n) % n, id / (n * n));
        Point3::new(i as f64, j as f64, k as f64).map(|c| -1.0 + s * (c - 0.5))
    };

    let mut mesh = Mesh::default();
    let mut edge_vertex: HashMap<(u64, u64), u32> = HashMap::new();
    let mut vertex = |a: u64, b: u64, mesh: &mut Mesh| -> u32 {
        let key = (a.min(b), a.max(b));
        *edge_vertex.entry(key).or_insert_with(|| {
            mesh.vertices.push(Point3::from(
                (position(a).coords + position(b).coords) * 0.5,
            ));
            (mesh.vertices.len() - 1) as u32
        })
    };

    for k in 0..n - 1 {
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let corner = |c: usize| (i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1));
                let mut ids = [0u64; 8];
                let mut vals = [false; 8];
                for c in 0..8 {
                    let (a, b, d) = corner(c);
                    ids[c] = lattice_id(a, b, d);
                    vals[c] = inside(a, b, d);
                }
                if vals.iter().all(|&v| v) || vals.iter().all(|&v| !v) {
                    continue;
                }
                for tet in TETS {
                    let ins: Vec<u64> = tet.iter().filter(|&&c| vals[c]).map(|&c| ids[c]).collect();
                    let outs: Vec<u64> =
                        tet.iter().filter(|&&c| !vals[c]).map(|&c| ids[c]).collect();
                    let polys: Vec<[(u64, u64); 3]> = match (ins.len(), outs.len()) {
                        (1, 3) => vec![[(ins[0], outs[0]), (ins[0], outs[1]), (ins[0], outs[2])]],
                        (3, 1) => vec![[(outs[0], ins[0]), (outs[0], ins[1]), (outs[0], ins[2])]],
                        (2, 2) => {
                            let (a, b, c, d) = (ins[0], ins[1], outs[0], outs[1]);
                            vec![[(a, c), (a, d), (b, d)], [(a, c), (b, d), (b, c)]]
                        }
                        _ => continue,
                    };
                    let centroid = |pts: &[u64]| {
                        pts.iter()
                            .map(|&p| position(p).coords)
                            .sum::<nalgebra::Vector3<f64>>()
                            / pts.len() as f64
                    };
                    let outward = centroid(&outs) - centroid(&ins);
                    for poly in polys {
                        let mut t = poly.map(|(a, b)| vertex(a, b, &mut mesh));
                        let [p0, p1, p2] = t.map(|v| mesh.vertices[v as usize]);
                        if (p1 - p0).cross(&(p2 - p0)).dot(&outward) < 0.0 {
                            t.swap(1, 2);
                        }
                        mesh.triangles.push(t);
                    }
                }
            }
        }
    }
    Ok(mesh)
}
