use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::{FieldError, GridField, Result};
use crate::math;

/// Triangle mesh with one unit normal and area per triangle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<[f64; 3]>,
    pub triangles: Vec<[u32; 3]>,
    pub normals: Vec<[f64; 3]>,
    pub areas: Vec<f64>,
}

impl SurfaceMesh {
    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Corner positions of triangle `t`.
    pub fn corners(&self, t: usize) -> [[f64; 3]; 3] {
        self.triangles[t].map(|v| self.vertices[v as usize])
    }
}

/// How grid samples map to positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Sample `i` sits at `i * l / K` and the grid wraps, giving `K` cells per
    /// axis. Used for synthesized phase fields.
    Periodic,
    /// Sample `i` sits at `i * l / (K - 1)`, both faces included, giving
    /// `K - 1` cells per axis. Used for fields sampled from closed-form
    /// functions.
    Open,
}

fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Cube corner bit for each axis; corner `c` is offset by `(c >> 2 & 1, c >> 1 & 1, c & 1)`.
const AXIS_BIT: [usize; 3] = [4, 2, 1];

/// Six tetrahedra around the main diagonal, one per axis order. Each is the
/// path `0 -> e_a -> e_a + e_b -> 7`; the same split in every cell keeps
/// shared faces consistent.
const TETS: [([usize; 4], [usize; 3]); 6] = {
    const ORDERS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = [([0usize; 4], [0usize; 3]); 6];
    let mut p = 0;
    while p < 6 {
        let o = ORDERS[p];
        let c1 = AXIS_BIT[o[0]];
        let c2 = c1 | AXIS_BIT[o[1]];
        out[p] = ([0, c1, c2, 7], o);
        p += 1;
    }
    out
};

struct Builder {
    mesh: SurfaceMesh,
    edge_vertex: BTreeMap<(u32, u32), u32>,
}

impl Builder {
    fn vertex(&mut self, a: (u32, [f64; 3], f64), b: (u32, [f64; 3], f64), level: f64) -> u32 {
        let key = if a.0 < b.0 { (a.0, b.0) } else { (b.0, a.0) };
        if let Some(&v) = self.edge_vertex.get(&key) {
            return v;
        }
        // interpolate from the lower id so the point does not depend on which
        // tetrahedron reaches the edge first
        let (p, q) = if a.0 < b.0 { (a, b) } else { (b, a) };
        let t = (level - p.2) / (q.2 - p.2);
        let pos = [p.1[0] + t * (q.1[0] - p.1[0]), p.1[1] + t * (q.1[1] - p.1[1]), p.1[2] + t * (q.1[2] - p.1[2])];
        let id = self.mesh.vertices.len() as u32;
        self.mesh.vertices.push(pos);
        self.edge_vertex.insert(key, id);
        id
    }

    fn triangle(&mut self, mut tri: [u32; 3], grad: [f64; 3]) {
        let p = tri.map(|v| self.mesh.vertices[v as usize]);
        let mut n = cross(sub(p[1], p[0]), sub(p[2], p[0]));
        let len = math::sqrt(dot(n, n));
        if !(len > 0.0) {
            return;
        }
        if dot(n, grad) < 0.0 {
            tri.swap(1, 2);
            n = n.map(|x| -x);
        }
        self.mesh.triangles.push(tri);
        self.mesh.normals.push(n.map(|x| x / len));
        self.mesh.areas.push(0.5 * len);
    }
}

/// Level set of `field` by marching tetrahedra with linear edge
/// interpolation. Normals point along `+grad phi`. Vertices on shared edges
/// are merged, so the mesh is closed except where it meets the domain
/// boundary.
pub fn extract_isosurface(field: &GridField, level: f64, boundary: Boundary) -> SurfaceMesh {
    let k = field.resolution();
    let (cells, h) = match boundary {
        Boundary::Periodic => (k, field.domain_size() / k as f64),
        Boundary::Open if k >= 2 => (k - 1, field.domain_size() / (k - 1) as f64),
        Boundary::Open => return SurfaceMesh::default(),
    };
    let stride = (cells + 1) as u32;
    let mut b = Builder { mesh: SurfaceMesh::default(), edge_vertex: BTreeMap::new() };
    let mut corner = [(0u32, [0.0f64; 3], 0.0f64); 8];
    for i in 0..cells {
        for j in 0..cells {
            for l in 0..cells {
                let mut above = 0;
                for (c, slot) in corner.iter_mut().enumerate() {
                    let (ci, cj, cl) = (i + (c >> 2 & 1), j + (c >> 1 & 1), l + (c & 1));
                    let id = (ci as u32 * stride + cj as u32) * stride + cl as u32;
                    let v = field.get(ci % k, cj % k, cl % k);
                    *slot = (id, [ci as f64 * h, cj as f64 * h, cl as f64 * h], v);
                    above += (v > level) as usize;
                }
                if above == 0 || above == 8 {
                    continue;
                }
                for (tet, order) in &TETS {
                    let t = tet.map(|c| corner[c]);
                    // gradient of the linear interpolant along the tet's path
                    let mut grad = [0.0; 3];
                    for s in 0..3 {
                        grad[order[s]] = (t[s + 1].2 - t[s].2) / h;
                    }
                    march_tet(&mut b, &t, level, grad);
                }
            }
        }
    }
    b.mesh
}

fn march_tet(b: &mut Builder, t: &[(u32, [f64; 3], f64); 4], level: f64, grad: [f64; 3]) {
    let mut pos = [0usize; 4];
    let mut neg = [0usize; 4];
    let (mut np, mut nn) = (0, 0);
    for (s, v) in t.iter().enumerate() {
        if v.2 > level {
            pos[np] = s;
            np += 1;
        } else {
            neg[nn] = s;
            nn += 1;
        }
    }
    match np {
        1 | 3 => {
            let (lone, others) = if np == 1 { (pos[0], &neg[..3]) } else { (neg[0], &pos[..3]) };
            let v = [0, 1, 2].map(|m| b.vertex(t[lone], t[others[m]], level));
            b.triangle(v, grad);
        }
        2 => {
            let (p0, p1, n0, n1) = (t[pos[0]], t[pos[1]], t[neg[0]], t[neg[1]]);
            let a = b.vertex(p0, n0, level);
            let c = b.vertex(p0, n1, level);
            let d = b.vertex(p1, n1, level);
            let e = b.vertex(p1, n0, level);
            b.triangle([a, c, d], grad);
            b.triangle([a, d, e], grad);
        }
        _ => {}
    }
}

/// Area-weighted mean of `1 - (n . e_d)^2`.
pub fn npf_average(mesh: &SurfaceMesh, e_d: [f64; 3]) -> Result<f64> {
    if mesh.is_empty() {
        return Err(FieldError::EmptyMesh);
    }
    if !((dot(e_d, e_d) - 1.0).abs() < 1e-9) {
        return Err(FieldError::Direction);
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (n, &a) in mesh.normals.iter().zip(&mesh.areas) {
        let c = dot(*n, e_d);
        num += a * (1.0 - c * c).clamp(0.0, 1.0);
        den += a;
    }
    Ok(num / den)
}

/// Area-weighted histogram of normal directions over the upper hemisphere.
///
/// Normals are identified with their negatives. Polar bins are uniform in
/// `cos(polar)`, so every bin covers the same solid angle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleFigure {
    pub n_azimuth: usize,
    pub n_polar: usize,
    /// `mass[p * n_azimuth + a]`, summing to 1.
    pub mass: Vec<f64>,
}

impl PoleFigure {
    pub fn bin_solid_angle(&self) -> f64 {
        2.0 * core::f64::consts::PI / (self.n_azimuth * self.n_polar) as f64
    }

    /// Polar range `[lo, hi)` of polar row `p`, in radians.
    pub fn polar_range(&self, p: usize) -> (f64, f64) {
        let c = |q: usize| 1.0 - q as f64 / self.n_polar as f64;
        (math::acos(c(p)), math::acos(c(p + 1)))
    }

    /// Azimuth range of column `a`, in radians from `+e1`.
    pub fn azimuth_range(&self, a: usize) -> (f64, f64) {
        let w = 2.0 * core::f64::consts::PI / self.n_azimuth as f64;
        (a as f64 * w, (a + 1) as f64 * w)
    }
}

pub fn pole_figure(mesh: &SurfaceMesh, n_azimuth: usize, n_polar: usize) -> Result<PoleFigure> {
    if mesh.is_empty() {
        return Err(FieldError::EmptyMesh);
    }
    if n_azimuth == 0 || n_polar == 0 {
        return Err(FieldError::Bins);
    }
    let mut mass = vec![0.0; n_azimuth * n_polar];
    let two_pi = 2.0 * core::f64::consts::PI;
    for (n, &area) in mesh.normals.iter().zip(&mesh.areas) {
        let flip = n[2] < 0.0 || (n[2] == 0.0 && (n[1] < 0.0 || (n[1] == 0.0 && n[0] < 0.0)));
        let n = if flip { n.map(|x| -x) } else { *n };
        let p = (((1.0 - n[2]) * n_polar as f64) as usize).min(n_polar - 1);
        // azimuth is undefined at the pole
        let mut az = if n[0].abs() < 1e-12 && n[1].abs() < 1e-12 { 0.0 } else { math::atan2(n[1], n[0]) };
        if az < 0.0 {
            az += two_pi;
        }
        let a = ((az / two_pi * n_azimuth as f64) as usize).min(n_azimuth - 1);
        mass[p * n_azimuth + a] += area;
    }
    let total: f64 = mass.iter().sum();
    for m in &mut mass {
        *m /= total;
    }
    Ok(PoleFigure { n_azimuth, n_polar, mass })
}

/// Both faces of the band `|phi| <= tau` on a periodic grid, with normals
/// pointing out of the solid.
pub fn shell_surface(phase: &GridField, tau: f64) -> SurfaceMesh {
    let mut mesh = extract_isosurface(phase, tau, Boundary::Periodic);
    let inner = extract_isosurface(phase, -tau, Boundary::Periodic);
    let offset = mesh.vertices.len() as u32;
    mesh.vertices.extend(inner.vertices);
    mesh.triangles.extend(inner.triangles.iter().map(|t| [t[0] + offset, t[2] + offset, t[1] + offset]));
    mesh.normals.extend(inner.normals.iter().map(|n| n.map(|x| -x)));
    mesh.areas.extend(inner.areas);
    mesh
}
