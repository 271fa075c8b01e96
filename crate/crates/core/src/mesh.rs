//! Triangle meshes and per-triangle geometry.
//!
//! A [`TriangleMesh`] is immutable once built. Per-triangle quantities
//! (area, unit normal, barycenter, edge vectors) are computed at
//! construction and cached.

use std::collections::HashMap;

use crate::error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;

/// Relative area threshold below which a triangle is treated as degenerate:
/// `area <= DEGENERACY_RATIO * longest_edge²`.
pub const DEGENERACY_RATIO: f64 = 1e-14;

/// Cached geometry of one triangle `(v1, v2, v3)`.
///
/// Edges follow the opposite-vertex convention: `e1 = v3 - v2`,
/// `e2 = v1 - v3`, `e3 = v2 - v1`, so `e1 + e2 + e3 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleGeometry {
    pub area: f64,
    pub unit_normal: Vec3,
    pub barycenter: Vec3,
    pub edges: [Vec3; 3],
    pub diameter: f64,
}

impl TriangleGeometry {
    fn from_vertices(v: &[Vec3; 3]) -> (Self, bool) {
        let edges = [v[2] - v[1], v[0] - v[2], v[1] - v[0]];
        let cross = (v[1] - v[0]).cross(&(v[2] - v[0]));
        let norm = cross.norm();
        let area = 0.5 * norm;
        let diameter = edges.iter().map(|e| e.norm()).fold(0.0, f64::max);
        let degenerate = !(area > DEGENERACY_RATIO * diameter * diameter);
        let unit_normal = if degenerate { Vec3::zeros() } else { cross / norm };
        let geometry = TriangleGeometry {
            area,
            unit_normal,
            barycenter: (v[0] + v[1] + v[2]) / 3.0,
            edges,
            diameter,
        };
        (geometry, degenerate)
    }

    /// Diameter of the inscribed circle, `4 |T| / perimeter`.
    pub fn inscribed_diameter(&self) -> f64 {
        let perimeter: f64 = self.edges.iter().map(|e| e.norm()).sum();
        4.0 * self.area / perimeter
    }
}

#[derive(Debug, Clone)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<[usize; 2]>,
    geometry: Vec<TriangleGeometry>,
    degenerate: Vec<usize>,
    orientation_consistent: bool,
}

impl TriangleMesh {
    /// Builds a mesh, checking index ranges, repeated indices, edge
    /// manifoldness and unreferenced vertices. Degenerate triangles are
    /// allowed here; operations that need their geometry fail later.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        let mut referenced = vec![false; nv];
        for (k, t) in triangles.iter().enumerate() {
            for &i in t {
                if i >= nv {
                    return Err(Error::IndexOutOfRange {
                        triangle: k,
                        vertex: i,
                        count: nv,
                    });
                }
                referenced[i] = true;
            }
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::RepeatedVertex(k));
            }
        }
        if let Some(i) = referenced.iter().position(|r| !r) {
            return Err(Error::UnreferencedVertex(i));
        }

        // undirected edge -> (count, orientation sum); a consistently oriented
        // interior edge is traversed once in each direction.
        let mut edges: HashMap<(usize, usize), (u32, i32)> = HashMap::new();
        for t in &triangles {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let (key, dir) = if a < b { ((a, b), 1) } else { ((b, a), -1) };
                let entry = edges.entry(key).or_insert((0, 0));
                entry.0 += 1;
                entry.1 += dir;
                if entry.0 > 2 {
                    return Err(Error::NonManifoldEdge(key.0, key.1));
                }
            }
        }
        let mut boundary_edges: Vec<[usize; 2]> = edges
            .iter()
            .filter(|(_, (count, _))| *count == 1)
            .map(|(&(a, b), _)| [a, b])
            .collect();
        boundary_edges.sort_unstable();
        let orientation_consistent = edges
            .values()
            .all(|&(count, dir)| count == 1 || dir == 0);

        let mut geometry = Vec::with_capacity(triangles.len());
        let mut degenerate = Vec::new();
        for (k, t) in triangles.iter().enumerate() {
            let (g, deg) =
                TriangleGeometry::from_vertices(&[vertices[t[0]], vertices[t[1]], vertices[t[2]]]);
            if deg {
                degenerate.push(k);
            }
            geometry.push(g);
        }

        Ok(TriangleMesh {
            vertices,
            triangles,
            boundary_edges,
            geometry,
            degenerate,
            orientation_consistent,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Edges belonging to exactly one triangle, as sorted index pairs.
    pub fn boundary_edges(&self) -> &[[usize; 2]] {
        &self.boundary_edges
    }

    /// Whether every interior edge is traversed in opposite directions by its
    /// two triangles.
    pub fn orientation_consistent(&self) -> bool {
        self.orientation_consistent
    }

    /// Indices of triangles failing the degeneracy test.
    pub fn degenerate_triangles(&self) -> &[usize] {
        &self.degenerate
    }

    pub fn triangle_vertices(&self, k: usize) -> [Vec3; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    pub fn triangle_geometry(&self, k: usize) -> Result<&TriangleGeometry> {
        if self.degenerate.binary_search(&k).is_ok() {
            return Err(Error::DegenerateTriangle(k));
        }
        Ok(&self.geometry[k])
    }

    /// Geometry of all triangles; fails on the first degenerate one.
    pub fn geometry(&self) -> Result<&[TriangleGeometry]> {
        match self.degenerate.first() {
            Some(&k) => Err(Error::DegenerateTriangle(k)),
            None => Ok(&self.geometry),
        }
    }

    /// Triangle areas, including (near-zero) areas of degenerate triangles.
    pub fn areas(&self) -> impl Iterator<Item = f64> + '_ {
        self.geometry.iter().map(|g| g.area)
    }

    pub fn area(&self, k: usize) -> f64 {
        self.geometry[k].area
    }

    /// Midpoints `(v12, v13, v23)` of the edges of triangle `k`.
    pub fn edge_midpoints(&self, k: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangle_vertices(k);
        [(a + b) * 0.5, (a + c) * 0.5, (b + c) * 0.5]
    }

    /// Longest edge over all triangles.
    pub fn diameter(&self) -> Result<f64> {
        if self.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        Ok(self.geometry.iter().map(|g| g.diameter).fold(0.0, f64::max))
    }

    /// `max_k h_T / ρ_T` with `ρ_T` the inscribed-circle diameter.
    pub fn regularity_constant(&self) -> Result<f64> {
        if self.triangles.is_empty() {
            return Err(Error::EmptyMesh);
        }
        let geometry = self.geometry()?;
        Ok(geometry
            .iter()
            .map(|g| g.diameter / g.inscribed_diameter())
            .fold(0.0, f64::max))
    }

    pub fn total_area(&self) -> f64 {
        self.geometry.iter().map(|g| g.area).sum()
    }

    /// Triangles incident to each vertex.
    pub fn vertex_triangles(&self) -> Vec<Vec<usize>> {
        let mut incident = vec![Vec::new(); self.vertices.len()];
        for (k, t) in self.triangles.iter().enumerate() {
            for &i in t {
                incident[i].push(k);
            }
        }
        incident
    }

    /// Interior edges as `(triangle_a, triangle_b, edge_length)`, ordered by
    /// the smaller triangle index.
    pub fn interior_edges(&self) -> Vec<(usize, usize, f64)> {
        let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
        let mut out = Vec::new();
        for (k, t) in self.triangles.iter().enumerate() {
            for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                let key = (a.min(b), a.max(b));
                if let Some(&other) = owner.get(&key) {
                    let len = (self.vertices[a] - self.vertices[b]).norm();
                    out.push((other, k, len));
                } else {
                    owner.insert(key, k);
                }
            }
        }
        out.sort_by_key(|x| (x.0, x.1));
        out
    }

    /// Applies `map` to every vertex, keeping the connectivity.
    pub fn map_vertices(&self, map: impl Fn(&Vec3) -> Vec3) -> Result<Self> {
        TriangleMesh::new(
            self.vertices.iter().map(map).collect(),
            self.triangles.clone(),
        )
    }
}
