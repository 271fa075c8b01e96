//! Moving signals between a surface and a triangulation of it.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{Element, Signal};
use crate::mesh::{TriangleMesh, Vec3};
use crate::quadrature::{gauss_legendre_on, ordered_sum};

use super::locate::TriangleLocator;
use super::{AnalyticSurface, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureNode {
    pub uv: [f64; 2],
    pub point: Vec3,
    pub normal: Vec3,
    /// Quadrature weight times the area element.
    pub weight: f64,
}

/// Tensor Gauss–Legendre rule over the parameter rectangle.
#[derive(Debug, Clone)]
pub struct SurfaceQuadrature {
    nodes: Vec<QuadratureNode>,
}

impl SurfaceQuadrature {
    /// One Gauss rule of `nu × nv` nodes over the whole domain.
    pub fn tensor(surface: &AnalyticSurface, nu: usize, nv: usize) -> Self {
        let (du, dv) = surface.domain();
        Self::from_cells(surface, &[du], &[dv], nu, nv)
    }

    /// `order × order` Gauss rules on a grid of cells. `cells` is the count
    /// along the physically longer direction; the other is scaled to keep
    /// cells roughly square.
    pub fn composite(surface: &AnalyticSurface, cells: usize, order: usize) -> Self {
        let (du, dv) = surface.domain();
        let (lu, lv) = surface.physical_extents();
        let longest = lu.max(lv);
        let cu = ((cells as f64 * lu / longest).round() as usize).max(1);
        let cv = ((cells as f64 * lv / longest).round() as usize).max(1);
        let split = |r: [f64; 2], n: usize| -> Vec<[f64; 2]> {
            (0..n)
                .map(|i| {
                    let a = r[0] + (r[1] - r[0]) * i as f64 / n as f64;
                    let b = r[0] + (r[1] - r[0]) * (i + 1) as f64 / n as f64;
                    [a, b]
                })
                .collect()
        };
        Self::from_cells(surface, &split(du, cu), &split(dv, cv), order, order)
    }

    fn from_cells(surface: &AnalyticSurface, us: &[[f64; 2]], vs: &[[f64; 2]], nu: usize, nv: usize) -> Self {
        let mut nodes = Vec::with_capacity(us.len() * vs.len() * nu * nv);
        for cu in us {
            let (xu, wu) = gauss_legendre_on(nu, cu[0], cu[1]);
            for cv in vs {
                let (xv, wv) = gauss_legendre_on(nv, cv[0], cv[1]);
                for (u, a) in xu.iter().zip(&wu) {
                    for (v, b) in xv.iter().zip(&wv) {
                        let uv = [*u, *v];
                        nodes.push(QuadratureNode {
                            uv,
                            point: surface.point(uv),
                            normal: surface.normal(uv),
                            weight: a * b * surface.area_element(uv),
                        });
                    }
                }
            }
        }
        SurfaceQuadrature { nodes }
    }

    pub fn nodes(&self) -> &[QuadratureNode] {
        &self.nodes
    }

    pub fn integrate(&self, f: impl Fn(&QuadratureNode) -> f64 + Sync + Send) -> f64 {
        let values: Vec<f64> = self.nodes.par_iter().map(f).collect();
        ordered_sum(values)
    }
}

/// A mesh signal carried onto surface quadrature nodes. Nodes without a
/// mesh point above them are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSignal {
    pub values: Vec<Option<f64>>,
    pub missed: usize,
    pub missed_measure: f64,
}

impl LiftedSignal {
    pub fn require_complete(&self) -> Result<()> {
        if self.missed > 0 {
            return Err(Error::LiftMiss {
                count: self.missed,
                measure: self.missed_measure,
            });
        }
        Ok(())
    }

    /// `∫ |f^ℓ|` over the nodes that were hit.
    pub fn l1_norm(&self, quadrature: &SurfaceQuadrature) -> f64 {
        ordered_sum(
            self.values
                .iter()
                .zip(quadrature.nodes())
                .filter_map(|(v, n)| v.map(|v| n.weight * v.abs())),
        )
    }

    /// `∫ |f^ℓ - g|` against a field, over the nodes that were hit.
    pub fn l1_distance_to(&self, quadrature: &SurfaceQuadrature, g: &dyn ScalarField) -> f64 {
        ordered_sum(
            self.values
                .iter()
                .zip(quadrature.nodes())
                .filter_map(|(v, n)| v.map(|v| n.weight * (v - g.eval(n.uv, &n.point)).abs())),
        )
    }

    /// `∫ |f^ℓ - g^ℓ|` over nodes hit by both lifts.
    pub fn l1_distance(&self, other: &LiftedSignal, quadrature: &SurfaceQuadrature) -> f64 {
        ordered_sum(
            self.values
                .iter()
                .zip(&other.values)
                .zip(quadrature.nodes())
                .filter_map(|((a, b), n)| match (a, b) {
                    (Some(a), Some(b)) => Some(n.weight * (a - b).abs()),
                    _ => None,
                }),
        )
    }
}

/// Evaluates the lift `f^ℓ(π(x)) = f(x)` at every quadrature node by
/// casting the surface normal through the mesh.
pub fn lift_signal(
    signal: &Signal,
    mesh: &TriangleMesh,
    surface: &AnalyticSurface,
    quadrature: &SurfaceQuadrature,
) -> Result<LiftedSignal> {
    signal.check(mesh)?;
    let locator = TriangleLocator::new(mesh);
    let half = (0.99 * surface.reach()).min(2.0 * mesh.diameter()?);
    let values: Vec<Option<f64>> = quadrature
        .nodes()
        .par_iter()
        .map(|node| {
            let a = node.point - half * node.normal;
            let b = node.point + half * node.normal;
            locator
                .segment_hits(&a, &b)
                .into_iter()
                .min_by(|x, y| {
                    (x.parameter - 0.5)
                        .abs()
                        .total_cmp(&(y.parameter - 0.5).abs())
                        .then(x.triangle.cmp(&y.triangle))
                })
                .map(|hit| signal.eval(mesh, hit.triangle, hit.bary))
        })
        .collect();
    let missed = values.iter().filter(|v| v.is_none()).count();
    let missed_measure = ordered_sum(
        values
            .iter()
            .zip(quadrature.nodes())
            .filter(|(v, _)| v.is_none())
            .map(|(_, n)| n.weight),
    );
    Ok(LiftedSignal {
        values,
        missed,
        missed_measure,
    })
}

/// Samples an analytic signal at the projected vertices. Feet outside the
/// parameter domain use the nearest domain point. P0 values are the mean of
/// the three vertex values.
pub fn discretize_signal(
    surface: &AnalyticSurface,
    field: &dyn ScalarField,
    mesh: &TriangleMesh,
    element: Element,
) -> Result<Signal> {
    let vertex_values = mesh
        .vertices()
        .par_iter()
        .map(|x| {
            let p = surface.project(x)?;
            let uv = surface.clamp(p.uv);
            Ok(field.eval(uv, &surface.point(uv)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let values = match element {
        Element::P1 => vertex_values,
        Element::P0 => mesh
            .triangles()
            .iter()
            .map(|t| (vertex_values[t[0]] + vertex_values[t[1]] + vertex_values[t[2]]) / 3.0)
            .collect(),
    };
    Signal::new(element, mesh, values)
}

/// `m²` sub-triangle centroids of every triangle, as `(triangle, bary)`.
pub fn triangle_samples(mesh: &TriangleMesh, m: usize) -> Vec<(usize, [f64; 3])> {
    let m = m.max(1);
    let mf = m as f64;
    let mut local = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..(m - i) {
            let (a, b) = ((i as f64 + 1.0 / 3.0) / mf, (j as f64 + 1.0 / 3.0) / mf);
            local.push([1.0 - a - b, a, b]);
            if i + j + 1 < m {
                let (a, b) = ((i as f64 + 2.0 / 3.0) / mf, (j as f64 + 2.0 / 3.0) / mf);
                local.push([1.0 - a - b, a, b]);
            }
        }
    }
    (0..mesh.num_triangles())
        .flat_map(|k| local.iter().map(move |b| (k, *b)))
        .collect()
}

/// Jacobian of the normal projection restricted to the mesh,
/// `cos α / ((1 + t κ_1)(1 + t κ_2))`, at each sample. `t` is the signed
/// distance along the surface normal.
pub fn jacobian_diagnostic(
    surface: &AnalyticSurface,
    mesh: &TriangleMesh,
    samples: &[(usize, [f64; 3])],
) -> Result<Vec<f64>> {
    samples
        .par_iter()
        .map(|&(k, bary)| {
            let g = mesh.triangle_geometry(k)?;
            let c = mesh.triangle_vertices(k);
            let x = c[0] * bary[0] + c[1] * bary[1] + c[2] * bary[2];
            let p = surface.project(&x)?;
            let (k1, k2) = surface.curvatures(p.uv);
            let cos_alpha = g.unit_normal.dot(&p.normal).abs().min(1.0);
            Ok(cos_alpha / ((1.0 + p.distance * k1) * (1.0 + p.distance * k2)))
        })
        .collect()
}
