//! P0 / P1 finite-element signals on a triangle mesh, discrete norms and the
//! per-triangle gradient.
//!
//! P0 signals hold one value per triangle (the value at the barycenter), P1
//! signals one value per vertex with affine interpolation inside triangles.
//! Every integral here is a sum over triangles in index order, so results
//! are reproducible bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Element {
    P0,
    P1,
}

impl Element {
    /// Number of degrees of freedom on `mesh`.
    pub fn dofs(self, mesh: &TriangleMesh) -> usize {
        match self {
            Element::P0 => mesh.num_triangles(),
            Element::P1 => mesh.num_vertices(),
        }
    }
}

fn check_values(values: &[f64], expected: usize) -> Result<()> {
    if values.len() != expected {
        return Err(Error::LengthMismatch {
            expected,
            found: values.len(),
        });
    }
    if let Some(index) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

/// Piecewise-constant signal, one value per triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalP0 {
    values: Vec<f64>,
}

impl SignalP0 {
    pub fn new(mesh: &TriangleMesh, values: Vec<f64>) -> Result<Self> {
        check_values(&values, mesh.num_triangles())?;
        Ok(SignalP0 { values })
    }

    pub fn zeros(mesh: &TriangleMesh) -> Self {
        SignalP0 {
            values: vec![0.0; mesh.num_triangles()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    fn check(&self, mesh: &TriangleMesh) -> Result<()> {
        if self.values.len() != mesh.num_triangles() {
            return Err(Error::MeshMismatch(format!(
                "P0 signal has {} values, mesh has {} triangles",
                self.values.len(),
                mesh.num_triangles()
            )));
        }
        Ok(())
    }
}

/// Continuous piecewise-affine signal, one value per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalP1 {
    values: Vec<f64>,
}

impl SignalP1 {
    pub fn new(mesh: &TriangleMesh, values: Vec<f64>) -> Result<Self> {
        check_values(&values, mesh.num_vertices())?;
        Ok(SignalP1 { values })
    }

    pub fn zeros(mesh: &TriangleMesh) -> Self {
        SignalP1 {
            values: vec![0.0; mesh.num_vertices()],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Vertex values `(f1, f2, f3)` of triangle `k`.
    pub fn triangle_values(&self, mesh: &TriangleMesh, k: usize) -> [f64; 3] {
        let t = mesh.triangles()[k];
        [self.values[t[0]], self.values[t[1]], self.values[t[2]]]
    }

    /// Affine interpolant on triangle `k` at barycentric coordinates `bary`.
    pub fn eval(&self, mesh: &TriangleMesh, k: usize, bary: [f64; 3]) -> f64 {
        let f = self.triangle_values(mesh, k);
        bary[0] * f[0] + bary[1] * f[1] + bary[2] * f[2]
    }

    fn check(&self, mesh: &TriangleMesh) -> Result<()> {
        if self.values.len() != mesh.num_vertices() {
            return Err(Error::MeshMismatch(format!(
                "P1 signal has {} values, mesh has {} vertices",
                self.values.len(),
                mesh.num_vertices()
            )));
        }
        Ok(())
    }
}

/// A signal of either element kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    P0(SignalP0),
    P1(SignalP1),
}

impl Signal {
    pub fn new(element: Element, mesh: &TriangleMesh, values: Vec<f64>) -> Result<Self> {
        Ok(match element {
            Element::P0 => Signal::P0(SignalP0::new(mesh, values)?),
            Element::P1 => Signal::P1(SignalP1::new(mesh, values)?),
        })
    }

    pub fn zeros(element: Element, mesh: &TriangleMesh) -> Self {
        match element {
            Element::P0 => Signal::P0(SignalP0::zeros(mesh)),
            Element::P1 => Signal::P1(SignalP1::zeros(mesh)),
        }
    }

    pub fn element(&self) -> Element {
        match self {
            Signal::P0(_) => Element::P0,
            Signal::P1(_) => Element::P1,
        }
    }

    pub fn values(&self) -> &[f64] {
        match self {
            Signal::P0(s) => s.values(),
            Signal::P1(s) => s.values(),
        }
    }

    pub fn check(&self, mesh: &TriangleMesh) -> Result<()> {
        match self {
            Signal::P0(s) => s.check(mesh),
            Signal::P1(s) => s.check(mesh),
        }
    }

    /// Value on triangle `k` at barycentric coordinates `bary`.
    pub fn eval(&self, mesh: &TriangleMesh, k: usize, bary: [f64; 3]) -> f64 {
        match self {
            Signal::P0(s) => s.values[k],
            Signal::P1(s) => s.eval(mesh, k, bary),
        }
    }

    /// Per-triangle barycenter values.
    pub fn to_p0(&self, mesh: &TriangleMesh) -> Result<SignalP0> {
        match self {
            Signal::P0(s) => {
                s.check(mesh)?;
                Ok(s.clone())
            }
            Signal::P1(s) => p0_project(mesh, s),
        }
    }
}

/// Assembles a P1 signal from per-vertex coefficients of the hat basis.
pub fn p1_assemble(values: Vec<f64>, mesh: &TriangleMesh) -> Result<SignalP1> {
    SignalP1::new(mesh, values)
}

/// Barycenter value `(f1 + f2 + f3) / 3` on every triangle.
pub fn p0_project(mesh: &TriangleMesh, f: &SignalP1) -> Result<SignalP0> {
    f.check(mesh)?;
    let values = (0..mesh.num_triangles())
        .map(|k| {
            let [a, b, c] = f.triangle_values(mesh, k);
            (a + b + c) / 3.0
        })
        .collect();
    Ok(SignalP0 { values })
}

/// `Σ_k |T_k| |f_k|^p`, the p-th power of the L^p norm of a P0 signal.
pub fn lp_norm_p0(mesh: &TriangleMesh, f: &SignalP0, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::BadExponent(p));
    }
    f.check(mesh)?;
    Ok(mesh
        .areas()
        .zip(&f.values)
        .map(|(a, v)| a * v.abs().powf(p))
        .sum())
}

fn midpoint_values(f: [f64; 3]) -> [f64; 3] {
    [0.5 * (f[0] + f[1]), 0.5 * (f[0] + f[2]), 0.5 * (f[1] + f[2])]
}

/// Edge-midpoint Newton–Cotes rule for `∫|f|^p` with `p ∈ {1, 2}`.
///
/// Exact for `p = 2`; exact for `p = 1` when `f` keeps its sign on each
/// triangle.
pub fn newton_cotes_lp(mesh: &TriangleMesh, f: &SignalP1, p: u32) -> Result<f64> {
    if p != 1 && p != 2 {
        return Err(Error::BadExponent(p as f64));
    }
    f.check(mesh)?;
    Ok((0..mesh.num_triangles())
        .map(|k| {
            let m = midpoint_values(f.triangle_values(mesh, k));
            let s: f64 = m.iter().map(|v| v.abs().powi(p as i32)).sum();
            mesh.area(k) * s / 3.0
        })
        .sum())
}

/// Exact `∫_T |f|` of an affine function with vertex values `f` on a
/// triangle of area `area`. Values with `|v| <= tau` count as zero.
pub fn l1_triangle(area: f64, f: [f64; 3], tau: f64) -> f64 {
    let f = f.map(|v| if v.abs() <= tau { 0.0 } else { v });
    let negatives = f.iter().filter(|&&v| v < 0.0).count();
    let positives = f.iter().filter(|&&v| v > 0.0).count();
    if negatives == 0 || positives == 0 {
        return newton_cotes_l1_triangle(area, f);
    }
    // The lone vertex is the one whose sign differs from the other two.
    let lone = if negatives == 1 {
        f.iter().position(|&v| v < 0.0).unwrap()
    } else {
        f.iter().position(|&v| v > 0.0).unwrap()
    };
    let fa = f[lone];
    let fb = f[(lone + 1) % 3];
    let fc = f[(lone + 2) % 3];
    // Zero crossings on edges a-b and a-c, as fractions from a.
    let tb = fa / (fa - fb);
    let tc = fa / (fa - fc);
    // Subtriangles (a, p_ab, p_ac), (b, p_ac, p_ab), (b, c, p_ac) with
    // vertex signals (fa, 0, 0), (fb, 0, 0), (fb, fc, 0).
    let area_a = area * tb * tc;
    let area_b = area * tc * (1.0 - tb);
    let area_bc = area * (1.0 - tc);
    newton_cotes_l1_triangle(area_a, [fa, 0.0, 0.0])
        + newton_cotes_l1_triangle(area_b, [fb, 0.0, 0.0])
        + newton_cotes_l1_triangle(area_bc, [fb, fc, 0.0])
}

fn newton_cotes_l1_triangle(area: f64, f: [f64; 3]) -> f64 {
    let m = midpoint_values(f);
    area * (m[0].abs() + m[1].abs() + m[2].abs()) / 3.0
}

/// Exact L¹ norm of a P1 signal. Triangles where the signal changes sign
/// are split along the zero line and integrated piece by piece.
pub fn l1_exact(mesh: &TriangleMesh, f: &SignalP1) -> Result<f64> {
    f.check(mesh)?;
    let scale = f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tau = 1e-14 * scale;
    Ok((0..mesh.num_triangles())
        .map(|k| l1_triangle(mesh.area(k), f.triangle_values(mesh, k), tau))
        .sum())
}

/// Per-triangle gradient of a P1 signal. Each vector lies in the plane of
/// its triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGradient {
    pub vectors: Vec<Vec3>,
}

/// Vectors `g_i = N ∧ e_i / ‖N‖²` with `N = e2 ∧ e3`, so that the gradient
/// on the triangle is `Σ_i f_i g_i`.
fn gradient_basis(edges: &[Vec3; 3]) -> [Vec3; 3] {
    let n = edges[1].cross(&edges[2]);
    let scaled = n / n.norm_squared();
    [
        scaled.cross(&edges[0]),
        scaled.cross(&edges[1]),
        scaled.cross(&edges[2]),
    ]
}

pub fn gradient(mesh: &TriangleMesh, f: &SignalP1) -> Result<DiscreteGradient> {
    f.check(mesh)?;
    let geometry = mesh.geometry()?;
    let vectors = geometry
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let [f1, f2, f3] = f.triangle_values(mesh, k);
            let n = g.edges[1].cross(&g.edges[2]);
            (n / n.norm_squared()).cross(&(g.edges[0] * f1 + g.edges[1] * f2 + g.edges[2] * f3))
        })
        .collect();
    Ok(DiscreteGradient { vectors })
}

/// `Σ_k |T_k| ‖∇f‖_ε` with `‖x‖_ε = sqrt(‖x‖² + ε²)`; `ε = 0` is the plain
/// discrete total variation.
pub fn total_variation(mesh: &TriangleMesh, f: &SignalP1, epsilon: f64) -> Result<f64> {
    if epsilon < 0.0 {
        return Err(Error::NonpositiveEpsilon(epsilon));
    }
    let grad = gradient(mesh, f)?;
    let e2 = epsilon * epsilon;
    Ok(mesh
        .areas()
        .zip(&grad.vectors)
        .map(|(a, g)| a * (g.norm_squared() + e2).sqrt())
        .sum())
}

/// `Σ_k |T_k| ‖∇f‖²`.
pub fn h1_seminorm(mesh: &TriangleMesh, f: &SignalP1) -> Result<f64> {
    let grad = gradient(mesh, f)?;
    Ok(mesh
        .areas()
        .zip(&grad.vectors)
        .map(|(a, g)| a * g.norm_squared())
        .sum())
}

/// L¹ norm with `|x|` replaced by `sqrt(x² + ε²)`: at the Newton–Cotes
/// edge midpoints for P1 signals, at the barycenter for P0 signals.
pub fn l1_smoothed(mesh: &TriangleMesh, f: &Signal, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::NonpositiveEpsilon(epsilon));
    }
    f.check(mesh)?;
    let e2 = epsilon * epsilon;
    Ok(match f {
        Signal::P0(s) => mesh
            .areas()
            .zip(&s.values)
            .map(|(a, v)| a * (v * v + e2).sqrt())
            .sum(),
        Signal::P1(s) => (0..mesh.num_triangles())
            .map(|k| {
                let m = midpoint_values(s.triangle_values(mesh, k));
                let t: f64 = m.iter().map(|v| (v * v + e2).sqrt()).sum();
                mesh.area(k) * t / 3.0
            })
            .sum(),
    })
}

/// Derivatives of the discrete functionals with respect to the signal
/// coefficients. Each function adds `weight × ∂F/∂f` into `out`.
pub mod derivatives {
    use super::*;

    /// `F = Σ |T_k| f_k²` (P0).
    pub fn lp0_squared(mesh: &TriangleMesh, f: &[f64], weight: f64, out: &mut [f64]) {
        for (k, a) in mesh.areas().enumerate() {
            out[k] += weight * 2.0 * a * f[k];
        }
    }

    /// `F = newton_cotes_lp(f, 2)` (P1).
    pub fn newton_cotes_l2(mesh: &TriangleMesh, f: &[f64], weight: f64, out: &mut [f64]) {
        for (k, t) in mesh.triangles().iter().enumerate() {
            let v = [f[t[0]], f[t[1]], f[t[2]]];
            let [m12, m13, m23] = midpoint_values(v);
            let c = weight * mesh.area(k) / 3.0;
            out[t[0]] += c * (m12 + m13);
            out[t[1]] += c * (m12 + m23);
            out[t[2]] += c * (m13 + m23);
        }
    }

    /// `F = l1_smoothed(f, ε)` for either element.
    pub fn l1_smoothed(
        mesh: &TriangleMesh,
        element: Element,
        f: &[f64],
        epsilon: f64,
        weight: f64,
        out: &mut [f64],
    ) {
        let e2 = epsilon * epsilon;
        match element {
            Element::P0 => {
                for (k, a) in mesh.areas().enumerate() {
                    out[k] += weight * a * f[k] / (f[k] * f[k] + e2).sqrt();
                }
            }
            Element::P1 => {
                for (k, t) in mesh.triangles().iter().enumerate() {
                    let m = midpoint_values([f[t[0]], f[t[1]], f[t[2]]]);
                    let d = m.map(|v| v / (v * v + e2).sqrt());
                    let c = weight * mesh.area(k) / 6.0;
                    out[t[0]] += c * (d[0] + d[1]);
                    out[t[1]] += c * (d[0] + d[2]);
                    out[t[2]] += c * (d[1] + d[2]);
                }
            }
        }
    }

    fn gradient_terms(
        mesh: &TriangleMesh,
        f: &[f64],
        out: &mut [f64],
        mut scale: impl FnMut(f64, f64) -> f64,
    ) -> Result<()> {
        let geometry = mesh.geometry()?;
        for (k, t) in mesh.triangles().iter().enumerate() {
            let basis = gradient_basis(&geometry[k].edges);
            let g = basis[0] * f[t[0]] + basis[1] * f[t[1]] + basis[2] * f[t[2]];
            let c = scale(geometry[k].area, g.norm_squared());
            for i in 0..3 {
                out[t[i]] += c * g.dot(&basis[i]);
            }
        }
        Ok(())
    }

    /// `F = total_variation(f, ε)`; requires `ε > 0` for differentiability.
    pub fn total_variation(
        mesh: &TriangleMesh,
        f: &[f64],
        epsilon: f64,
        weight: f64,
        out: &mut [f64],
    ) -> Result<()> {
        if !(epsilon > 0.0) {
            return Err(Error::NonsmoothEnergy);
        }
        let e2 = epsilon * epsilon;
        gradient_terms(mesh, f, out, |area, g2| weight * area / (g2 + e2).sqrt())
    }

    /// `F = h1_seminorm(f)`.
    pub fn h1_seminorm(mesh: &TriangleMesh, f: &[f64], weight: f64, out: &mut [f64]) -> Result<()> {
        gradient_terms(mesh, f, out, |area, _| 2.0 * weight * area)
    }
}
