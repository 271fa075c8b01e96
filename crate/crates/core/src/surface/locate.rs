//! Uniform-grid spatial index over mesh triangles.

use crate::mesh::{TriangleMesh, Vec3};

/// Bucket grid for closest-point and segment queries against a mesh.
#[derive(Debug, Clone)]
pub struct TriangleLocator {
    corners: Vec<[Vec3; 3]>,
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<u32>>,
}

/// A segment–triangle intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentHit {
    pub triangle: usize,
    pub parameter: f64,
    pub bary: [f64; 3],
    pub point: Vec3,
}

const MAX_CELLS_PER_AXIS: usize = 256;

impl TriangleLocator {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let corners: Vec<[Vec3; 3]> = (0..mesh.num_triangles()).map(|k| mesh.triangle_vertices(k)).collect();
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        let mut edge_sum = 0.0;
        for c in &corners {
            for p in c {
                lo = lo.inf(p);
                hi = hi.sup(p);
            }
            edge_sum += (c[1] - c[0]).norm() + (c[2] - c[1]).norm() + (c[0] - c[2]).norm();
        }
        if corners.is_empty() {
            lo = Vec3::zeros();
            hi = Vec3::zeros();
        }
        let extent = hi - lo;
        let mean_edge = if corners.is_empty() { 1.0 } else { edge_sum / (3.0 * corners.len() as f64) };
        let max_extent = extent.max().max(f64::MIN_POSITIVE);
        let cell = mean_edge.max(max_extent / MAX_CELLS_PER_AXIS as f64).max(1e-12);
        let dims = [0, 1, 2].map(|i| ((extent[i] / cell).floor() as usize + 1).min(MAX_CELLS_PER_AXIS + 1));
        let mut locator = TriangleLocator {
            corners,
            origin: lo,
            cell,
            dims,
            buckets: vec![Vec::new(); dims[0] * dims[1] * dims[2]],
        };
        for k in 0..locator.corners.len() {
            let c = locator.corners[k];
            let a = locator.cell_of(&c[0].inf(&c[1]).inf(&c[2]));
            let b = locator.cell_of(&c[0].sup(&c[1]).sup(&c[2]));
            for i in a[0]..=b[0] {
                for j in a[1]..=b[1] {
                    for l in a[2]..=b[2] {
                        let idx = locator.index([i, j, l]);
                        locator.buckets[idx].push(k as u32);
                    }
                }
            }
        }
        locator
    }

    fn cell_of(&self, p: &Vec3) -> [usize; 3] {
        [0, 1, 2].map(|i| {
            let c = ((p[i] - self.origin[i]) / self.cell).floor();
            (c.max(0.0) as usize).min(self.dims[i] - 1)
        })
    }

    fn index(&self, c: [usize; 3]) -> usize {
        (c[0] * self.dims[1] + c[1]) * self.dims[2] + c[2]
    }

    /// Closest mesh point to `p`: `(distance, triangle, point)`.
    pub fn closest(&self, p: &Vec3) -> Option<(f64, usize, Vec3)> {
        if self.corners.is_empty() {
            return None;
        }
        let raw = [0, 1, 2].map(|i| ((p[i] - self.origin[i]) / self.cell).floor() as i64);
        let center = [0, 1, 2].map(|i| raw[i].clamp(0, self.dims[i] as i64 - 1));
        let max_ring = *self.dims.iter().max().unwrap() as i64;
        let mut best: Option<(f64, usize, Vec3)> = None;
        let mut seen = vec![false; self.corners.len()];
        for ring in 0..=max_ring {
            for i in center[0] - ring..=center[0] + ring {
                for j in center[1] - ring..=center[1] + ring {
                    for l in center[2] - ring..=center[2] + ring {
                        let on_shell = (i - center[0]).abs() == ring
                            || (j - center[1]).abs() == ring
                            || (l - center[2]).abs() == ring;
                        if !on_shell || i < 0 || j < 0 || l < 0 {
                            continue;
                        }
                        let c = [i as usize, j as usize, l as usize];
                        if c[0] >= self.dims[0] || c[1] >= self.dims[1] || c[2] >= self.dims[2] {
                            continue;
                        }
                        for &k in &self.buckets[self.index(c)] {
                            let k = k as usize;
                            if seen[k] {
                                continue;
                            }
                            seen[k] = true;
                            let q = closest_point_on_triangle(p, &self.corners[k]);
                            let d = (p - q).norm();
                            if best.is_none_or(|(bd, bk, _)| d < bd || (d == bd && k < bk)) {
                                best = Some((d, k, q));
                            }
                        }
                    }
                }
            }
            if let Some((d, _, _)) = best {
                // Every unvisited cell is at least `ring * cell` away from p.
                if d <= ring as f64 * self.cell {
                    break;
                }
            }
        }
        best
    }

    /// All intersections of the segment `a → b` with mesh triangles, sorted
    /// by segment parameter.
    pub fn segment_hits(&self, a: &Vec3, b: &Vec3) -> Vec<SegmentHit> {
        let lo = self.cell_of(&a.inf(b));
        let hi = self.cell_of(&a.sup(b));
        let mut candidates = Vec::new();
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                for l in lo[2]..=hi[2] {
                    candidates.extend_from_slice(&self.buckets[self.index([i, j, l])]);
                }
            }
        }
        candidates.sort_unstable();
        candidates.dedup();
        let mut hits: Vec<SegmentHit> = candidates
            .into_iter()
            .filter_map(|k| {
                let k = k as usize;
                segment_triangle(a, b, &self.corners[k]).map(|(s, bary)| SegmentHit {
                    triangle: k,
                    parameter: s,
                    bary,
                    point: a + s * (b - a),
                })
            })
            .collect();
        hits.sort_by(|x, y| x.parameter.total_cmp(&y.parameter).then(x.triangle.cmp(&y.triangle)));
        hits
    }
}

/// Möller–Trumbore test for the segment `a + s (b - a)`, `s ∈ [0, 1]`.
/// Barycentric coordinates are accepted with a small tolerance so rays
/// through shared edges hit both neighbours.
fn segment_triangle(a: &Vec3, b: &Vec3, t: &[Vec3; 3]) -> Option<(f64, [f64; 3])> {
    let dir = b - a;
    let e1 = t[1] - t[0];
    let e2 = t[2] - t[0];
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    let scale = e1.norm() * e2.norm() * dir.norm();
    if det.abs() <= 1e-14 * scale {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = a - t[0];
    let u = tvec.dot(&pvec) * inv;
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    let s = e2.dot(&qvec) * inv;
    let tol = 1e-10;
    if u < -tol || v < -tol || u + v > 1.0 + tol || !(-tol..=1.0 + tol).contains(&s) {
        return None;
    }
    Some((s, [1.0 - u - v, u, v]))
}

/// Closest point of a triangle to `p` (Voronoi-region case analysis).
pub fn closest_point_on_triangle(p: &Vec3, t: &[Vec3; 3]) -> Vec3 {
    let (a, b, c) = (t[0], t[1], t[2]);
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}
