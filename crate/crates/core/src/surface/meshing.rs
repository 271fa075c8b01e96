//! Structured triangulations of the analytic patches.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

use super::{AnalyticSurface, Shape};

/// Meshes of one surface at strictly decreasing steps.
#[derive(Debug, Clone)]
pub struct RefinementFamily {
    pub levels: Vec<(f64, TriangleMesh)>,
}

/// Triangulates the patch with target edge length `h`.
///
/// Interior vertices lie on the surface. The outermost vertex row is pushed
/// outward past the boundary just enough for the normal projection of the
/// boundary chords to cover the patch, so the overhang has area `O(h²)`.
pub fn sample_triangulation(surface: &AnalyticSurface, h: f64) -> Result<TriangleMesh> {
    let reach = surface.reach();
    if !(h > 0.0 && h < 0.5 * reach) {
        return Err(Error::BadStep(h));
    }
    let (vertices, triangles) = match *surface.shape() {
        Shape::SphereCap { radius, max_polar } => sphere_rings(surface, radius, max_polar, h),
        Shape::CylinderPatch { .. } | Shape::MongePatch { .. } => parameter_grid(surface, h),
    };
    let triangles = orient(surface, &vertices, triangles);
    TriangleMesh::new(vertices, triangles)
}

/// `sample_triangulation` at each step, which must be strictly decreasing.
pub fn refinement_family(surface: &AnalyticSurface, steps: &[f64]) -> Result<RefinementFamily> {
    if steps.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::BadParams("refinement steps must be strictly decreasing".into()));
    }
    let levels = steps
        .iter()
        .map(|&h| sample_triangulation(surface, h).map(|m| (h, m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(RefinementFamily { levels })
}

/// Concentric rings around the pole; ring `i` carries `6 i` vertices.
fn sphere_rings(
    surface: &AnalyticSurface,
    radius: f64,
    max_polar: f64,
    h: f64,
) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let n = ((radius * max_polar / h).ceil() as usize).max(1);
    let dtheta = max_polar / n as f64;
    // Chords of the outer ring bow inward by half the azimuthal step; lifting
    // the ring puts their midpoints' projections on the boundary circle.
    let half = PI / (6 * n) as f64;
    let outer = (max_polar.tan() / half.cos()).atan();
    let mut vertices = vec![surface.point([0.0, 0.0])];
    let mut start = vec![0usize];
    for i in 1..=n {
        start.push(vertices.len());
        let theta = if i == n { outer } else { i as f64 * dtheta };
        let count = 6 * i;
        for j in 0..count {
            let phi = -PI + 2.0 * PI * j as f64 / count as f64;
            vertices.push(surface.point([theta, phi]));
        }
    }
    let mut triangles = Vec::with_capacity(6 * n * n);
    for i in 0..n {
        let inner_count = (6 * i).max(1);
        let outer_count = 6 * (i + 1);
        let inner = |k: usize| start[i] + k % inner_count;
        let outer = |k: usize| start[i + 1] + k % outer_count;
        for s in 0..6 {
            for t in 0..=i {
                triangles.push([outer(s * (i + 1) + t), outer(s * (i + 1) + t + 1), inner(s * i + t)]);
            }
            for t in 0..i {
                triangles.push([inner(s * i + t), outer(s * (i + 1) + t + 1), inner(s * i + t + 1)]);
            }
        }
    }
    (vertices, triangles)
}

/// Uniform grid in parameters with a consistent diagonal split.
fn parameter_grid(surface: &AnalyticSurface, h: f64) -> (Vec<Vec3>, Vec<[usize; 3]>) {
    let (du, dv) = surface.domain();
    let (lu, lv) = surface.physical_extents();
    let kappa = surface.max_curvature();
    // Physical offset of the outer row, converted to parameter units.
    let delta = h.min(kappa * h * h);
    let pad_u = delta * (du[1] - du[0]) / lu;
    let pad_v = delta * (dv[1] - dv[0]) / lv;
    let u0 = du[0] - pad_u;
    let u1 = du[1] + pad_u;
    let v0 = dv[0] - pad_v;
    let v1 = dv[1] + pad_v;
    let nu = (((lu + 2.0 * delta) / h).ceil() as usize).max(1);
    let nv = (((lv + 2.0 * delta) / h).ceil() as usize).max(1);
    let mut vertices = Vec::with_capacity((nu + 1) * (nv + 1));
    for i in 0..=nu {
        let u = u0 + (u1 - u0) * i as f64 / nu as f64;
        for j in 0..=nv {
            let v = v0 + (v1 - v0) * j as f64 / nv as f64;
            vertices.push(surface.point([u, v]));
        }
    }
    let id = |i: usize, j: usize| i * (nv + 1) + j;
    let mut triangles = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    (vertices, triangles)
}

/// Orders each triangle so its normal agrees with the surface normal.
fn orient(surface: &AnalyticSurface, vertices: &[Vec3], triangles: Vec<[usize; 3]>) -> Vec<[usize; 3]> {
    triangles
        .into_iter()
        .map(|[a, b, c]| {
            let n = (vertices[b] - vertices[a]).cross(&(vertices[c] - vertices[a]));
            let centre = (vertices[a] + vertices[b] + vertices[c]) / 3.0;
            let flip = surface.project(&centre).map(|p| n.dot(&p.normal) < 0.0).unwrap_or(false);
            if flip {
                [a, c, b]
            } else {
                [a, b, c]
            }
        })
        .collect()
}
