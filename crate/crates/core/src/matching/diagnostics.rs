use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem::{self, Signal};
use crate::mesh::TriangleMesh;
use crate::quadrature::ordered_sum;

use super::descent::DescentTrace;
use super::energy::{MatchProblem, Penalty};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundReport {
    pub gamma_f: f64,
    pub gamma_w: f64,
    pub linf: f64,
    pub source_area: f64,
    pub target_area: f64,
    /// `‖f‖_∞ γ_f / (γ_W (|X| + |Y|))`, zero when `γ_W = 0`.
    pub ratio: f64,
}

/// Normalized size of an L² minimizer.
pub fn minimum_bound_check(trace: &DescentTrace, problem: &MatchProblem) -> Result<BoundReport> {
    let Penalty::L2 { gamma_f, gamma_w } = problem.model().penalty else {
        return Err(Error::WrongModel { expected: "l2" });
    };
    let linf = trace.signal.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let source_area = problem.mesh().total_area();
    let target_area = ordered_sum(problem.target().atoms().iter().map(|a| a.weight));
    let ratio = if gamma_w == 0.0 {
        0.0
    } else {
        linf * gamma_f / (gamma_w * (source_area + target_area))
    };
    Ok(BoundReport {
        gamma_f,
        gamma_w,
        linf,
        source_area,
        target_area,
        ratio,
    })
}

/// True when the ratio grows by more than `1 + tolerance` between two runs
/// of a sweep ordered by increasing `γ_f / γ_W`.
pub fn bound_ratio_explodes(reports: &[BoundReport], tolerance: f64) -> bool {
    let mut sorted: Vec<&BoundReport> = reports.iter().collect();
    sorted.sort_by(|a, b| (a.gamma_f / a.gamma_w).total_cmp(&(b.gamma_f / b.gamma_w)));
    sorted.windows(2).any(|w| w[1].ratio > (1.0 + tolerance) * w[0].ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillationReport {
    pub total_variation: f64,
    pub linf: f64,
}

/// Total variation and sup norm of a signal restricted to masked
/// triangles. For P1 the variation is `Σ |T| ‖∇f‖`; for P0 it is the jump
/// variation `Σ |e| |f_k - f_l|` over interior edges with both sides masked.
pub fn oscillation_report(mesh: &TriangleMesh, signal: &Signal, mask: &[bool]) -> Result<OscillationReport> {
    if mask.len() != mesh.num_triangles() {
        return Err(Error::LengthMismatch {
            expected: mesh.num_triangles(),
            found: mask.len(),
        });
    }
    signal.check(mesh)?;
    let (total_variation, linf) = match signal {
        Signal::P1(s) => {
            let grad = fem::gradient(mesh, s)?;
            let tv = ordered_sum(
                mesh.areas()
                    .zip(&grad.vectors)
                    .zip(mask)
                    .filter(|(_, &m)| m)
                    .map(|((a, g), _)| a * g.norm()),
            );
            let linf = (0..mesh.num_triangles())
                .filter(|&k| mask[k])
                .flat_map(|k| s.triangle_values(mesh, k))
                .fold(0.0f64, |m, v| m.max(v.abs()));
            (tv, linf)
        }
        Signal::P0(s) => {
            let v = s.values();
            let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
            for (k, t) in mesh.triangles().iter().enumerate() {
                for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
                    edges.entry((a.min(b), a.max(b))).or_default().push(k);
                }
            }
            let mut jumps: Vec<((usize, usize), f64)> = edges
                .into_iter()
                .filter_map(|(e, tris)| match tris[..] {
                    [k, l] if mask[k] && mask[l] => {
                        let len = (mesh.vertices()[e.0] - mesh.vertices()[e.1]).norm();
                        Some((e, len * (v[k] - v[l]).abs()))
                    }
                    _ => None,
                })
                .collect();
            jumps.sort_by_key(|a| a.0);
            let tv = ordered_sum(jumps.into_iter().map(|(_, j)| j));
            let linf = v
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .fold(0.0f64, |m, (x, _)| m.max(x.abs()));
            (tv, linf)
        }
    };
    Ok(OscillationReport { total_variation, linf })
}
