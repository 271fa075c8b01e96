//! Sampled admissibility diagnostics of a triangulation against a surface.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::mesh::{TriangleMesh, Vec3};
use crate::quadrature::ordered_sum;

use super::locate::TriangleLocator;
use super::AnalyticSurface;

/// Pass thresholds, all relative to the step `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityThresholds {
    /// Largest allowed `max_dist / h`.
    pub max_dist_ratio: f64,
    /// Largest allowed `out_area / h`.
    pub out_area_ratio: f64,
    /// Largest allowed `diam / h`.
    pub diam_ratio: f64,
    /// Number of stratified samples drawn on the surface.
    pub surface_samples: usize,
}

impl Default for AdmissibilityThresholds {
    fn default() -> Self {
        AdmissibilityThresholds {
            max_dist_ratio: 1.0,
            out_area_ratio: 1.0,
            diam_ratio: 2.0,
            surface_samples: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub h: f64,
    /// Largest sampled distance from the mesh to the patch.
    pub max_dist: f64,
    /// Largest angle between a triangle normal and the surface normal at the
    /// projection of its in-domain samples, in `[0, π/2]`.
    pub alpha_max: f64,
    /// Two-sided sampled Hausdorff distance (an estimate).
    pub hausdorff_estimate: f64,
    /// Area of mesh fragments projecting outside the domain or beyond reach.
    pub out_area: f64,
    pub out_area_ratio: f64,
    pub diam: f64,
    pub regularity: Option<f64>,
    /// No surface sample has two distinct mesh points above it.
    pub injectivity_ok: bool,
    /// Fraction of surface samples with a mesh point above them.
    pub coverage: f64,
    /// Mesh samples whose normal projection failed or exceeded the reach.
    pub outside_reach_samples: usize,
    pub degenerate_triangles: usize,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

#[derive(Default, Clone, Copy)]
struct TriangleStats {
    max_dist: f64,
    alpha: f64,
    out_area: f64,
    outside_reach: usize,
}

/// Barycentric lattice points and sub-triangle centroids for an `m`-fold
/// subdivision. Centroids carry weight `1/m²`, lattice points weight 0.
fn subdivision(m: usize) -> Vec<([f64; 3], f64)> {
    let mf = m as f64;
    let w = 1.0 / (mf * mf);
    let mut out = Vec::with_capacity((m + 1) * (m + 2) / 2 + m * m);
    for i in 0..=m {
        for j in 0..=(m - i) {
            let (a, b) = (i as f64 / mf, j as f64 / mf);
            out.push(([1.0 - a - b, a, b], 0.0));
        }
    }
    for i in 0..m {
        for j in 0..(m - i) {
            let (a, b) = ((i as f64 + 1.0 / 3.0) / mf, (j as f64 + 1.0 / 3.0) / mf);
            out.push(([1.0 - a - b, a, b], w));
            if i + j + 1 < m {
                let (a, b) = ((i as f64 + 2.0 / 3.0) / mf, (j as f64 + 2.0 / 3.0) / mf);
                out.push(([1.0 - a - b, a, b], w));
            }
        }
    }
    out
}

fn triangle_stats(surface: &AnalyticSurface, corners: &[Vec3; 3], h: f64) -> TriangleStats {
    let cross = (corners[1] - corners[0]).cross(&(corners[2] - corners[0]));
    let area = 0.5 * cross.norm();
    let normal = if area > 0.0 { Some(cross / (2.0 * area)) } else { None };
    let diam = [(0, 1), (1, 2), (2, 0)]
        .iter()
        .map(|&(a, b)| (corners[a] - corners[b]).norm())
        .fold(0.0, f64::max);
    let m = ((4.0 * diam / h).ceil() as usize).clamp(1, 64);
    let mut stats = TriangleStats::default();
    for (bary, weight) in subdivision(m) {
        let x = corners[0] * bary[0] + corners[1] * bary[1] + corners[2] * bary[2];
        match surface.project(&x) {
            Ok(p) if p.in_domain => {
                stats.max_dist = stats.max_dist.max(p.distance.abs());
                if let Some(n) = normal {
                    let c = n.dot(&p.normal).abs().min(1.0);
                    stats.alpha = stats.alpha.max(c.acos().min(FRAC_PI_2));
                }
            }
            Ok(p) => {
                let nearest = surface.point(surface.clamp(p.uv));
                stats.max_dist = stats.max_dist.max((x - nearest).norm());
                stats.out_area += weight * area;
            }
            Err(e) => {
                let d = match e {
                    Error::OutsideReach { distance, .. } => distance,
                    _ => f64::INFINITY,
                };
                stats.max_dist = stats.max_dist.max(d);
                stats.out_area += weight * area;
                stats.outside_reach += 1;
            }
        }
    }
    stats
}

struct SurfaceSampleStats {
    distance: f64,
    distinct_hits: usize,
}

fn surface_sample(
    surface: &AnalyticSurface,
    locator: &TriangleLocator,
    uv: [f64; 2],
    half_length: f64,
    merge_tol: f64,
) -> SurfaceSampleStats {
    let q = surface.point(uv);
    let n = surface.normal(uv);
    let distance = locator.closest(&q).map_or(f64::INFINITY, |(d, _, _)| d);
    let hits = locator.segment_hits(&(q - half_length * n), &(q + half_length * n));
    let mut distinct: Vec<Vec3> = Vec::new();
    for hit in hits {
        if !distinct.iter().any(|p| (p - hit.point).norm() <= merge_tol) {
            distinct.push(hit.point);
        }
    }
    SurfaceSampleStats {
        distance,
        distinct_hits: distinct.len(),
    }
}

/// Samples the mesh and the surface to estimate the admissibility
/// quantities at step `h`. Failures are reported, never raised.
pub fn admissibility_report(
    mesh: &TriangleMesh,
    surface: &AnalyticSurface,
    h: f64,
    thresholds: &AdmissibilityThresholds,
) -> AdmissibilityReport {
    let per_triangle: Vec<TriangleStats> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|k| triangle_stats(surface, &mesh.triangle_vertices(k), h))
        .collect();
    let max_dist = per_triangle.iter().map(|s| s.max_dist).fold(0.0, f64::max);
    let alpha_max = per_triangle.iter().map(|s| s.alpha).fold(0.0, f64::max);
    let out_area = ordered_sum(per_triangle.iter().map(|s| s.out_area));
    let outside_reach_samples = per_triangle.iter().map(|s| s.outside_reach).sum();

    let diam = mesh.diameter().unwrap_or(0.0);
    let regularity = mesh.regularity_constant().ok();
    let locator = TriangleLocator::new(mesh);
    let half_length = (0.99 * surface.reach()).min(2.0 * diam.max(max_dist));
    let merge_tol = 1e-8 * diam.max(f64::MIN_POSITIVE);
    let samples = surface.stratified_samples(thresholds.surface_samples);
    let surface_stats: Vec<SurfaceSampleStats> = samples
        .par_iter()
        .map(|&uv| surface_sample(surface, &locator, uv, half_length, merge_tol))
        .collect();
    let surface_to_mesh = surface_stats.iter().map(|s| s.distance).fold(0.0, f64::max);
    let covered = surface_stats.iter().filter(|s| s.distinct_hits > 0).count();
    let coverage = if samples.is_empty() { 1.0 } else { covered as f64 / samples.len() as f64 };
    let injectivity_ok = surface_stats.iter().all(|s| s.distinct_hits <= 1);

    let check = |name, value: f64, threshold: f64| CheckResult {
        name,
        value,
        threshold,
        passed: value <= threshold,
    };
    let checks = vec![
        check("max_dist_over_h", max_dist / h, thresholds.max_dist_ratio),
        check("out_area_over_h", out_area / h, thresholds.out_area_ratio),
        check("diam_over_h", diam / h, thresholds.diam_ratio),
        check("outside_reach_samples", outside_reach_samples as f64, 0.0),
        check("uncovered_fraction", 1.0 - coverage, 0.0),
        check("injectivity_failures", if injectivity_ok { 0.0 } else { 1.0 }, 0.0),
        check("degenerate_triangles", mesh.degenerate_triangles().len() as f64, 0.0),
    ];
    let passed = checks.iter().all(|c| c.passed);
    AdmissibilityReport {
        h,
        max_dist,
        alpha_max,
        hausdorff_estimate: max_dist.max(surface_to_mesh),
        out_area,
        out_area_ratio: out_area / h,
        diam,
        regularity,
        injectivity_ok,
        coverage,
        outside_reach_samples,
        degenerate_triangles: mesh.degenerate_triangles().len(),
        checks,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::super::{builtin_surface, sample_triangulation};
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn subdivision_weights_sum_to_one() {
        for m in 1..6 {
            let w: f64 = subdivision(m).iter().map(|s| s.1).sum();
            assert!((w - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_inscribed_mesh_is_exact() {
        let s = builtin_surface("monge_patch", &BTreeMap::new()).unwrap();
        let mesh = sample_triangulation(&s, 0.25).unwrap();
        let r = admissibility_report(&mesh, &s, 0.25, &AdmissibilityThresholds::default());
        assert_eq!(r.alpha_max, 0.0);
        assert_eq!(r.max_dist, 0.0);
        assert_eq!(r.out_area, 0.0);
        assert!(r.injectivity_ok);
        assert!(r.passed, "{:?}", r.checks);
    }

    #[test]
    fn sphere_cap_mesh_passes() {
        let s = builtin_surface("sphere_cap", &BTreeMap::new()).unwrap();
        let mesh = sample_triangulation(&s, 0.2).unwrap();
        let r = admissibility_report(&mesh, &s, 0.2, &AdmissibilityThresholds::default());
        assert!(r.passed, "{:?}", r.checks);
        assert!(r.alpha_max > 0.0 && r.alpha_max < 0.2);
        assert!(r.out_area_ratio < 0.1);
        assert_eq!(r.coverage, 1.0);
    }

    #[test]
    fn translated_mesh_fails() {
        let s = builtin_surface("sphere_cap", &BTreeMap::new()).unwrap();
        let mesh = sample_triangulation(&s, 0.2).unwrap();
        let far = mesh.map_vertices(|p| p + Vec3::new(10.0, 0.0, 0.0)).unwrap();
        let r = admissibility_report(&far, &s, 0.2, &AdmissibilityThresholds::default());
        assert!(!r.passed);
        assert!(r.outside_reach_samples > 0);
        assert_eq!(r.coverage, 0.0);
    }
}
