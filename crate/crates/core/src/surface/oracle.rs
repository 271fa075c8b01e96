//! Continuous energies of analytic fshapes by tensor Gauss quadrature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{EnergyModel, Penalty};
use crate::quadrature::ordered_sum;
use crate::varifold::{self, DiscreteVarifold, KernelParams, VarifoldAtom};

use super::lift::SurfaceQuadrature;
use super::{AnalyticSurface, ScalarField};

/// Target side of the attachment term.
pub enum OracleTarget<'a> {
    /// Continuous fshape, integrated with the same rule as the source.
    Analytic {
        surface: &'a AnalyticSurface,
        signal: &'a dyn ScalarField,
    },
    Discrete(&'a DiscreteVarifold),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    /// Starting order along the shorter parameter direction, at least 4.
    pub initial_order: usize,
    /// Relative change between consecutive orders that counts as converged.
    pub tolerance: f64,
    pub max_order: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            initial_order: 8,
            tolerance: 1e-6,
            max_order: 160,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValue {
    pub signal_penalty: f64,
    pub gradient_penalty: f64,
    pub attachment: f64,
    pub total: f64,
    /// Order along the first parameter direction at convergence.
    pub order: usize,
    pub relative_change: f64,
}

/// The continuous fvarifold of `(surface, signal)` as quadrature atoms.
pub fn continuous_varifold(surface: &AnalyticSurface, signal: &dyn ScalarField, nu: usize, nv: usize) -> DiscreteVarifold {
    let q = SurfaceQuadrature::tensor(surface, nu, nv);
    let atoms = q
        .nodes()
        .iter()
        .map(|n| VarifoldAtom {
            weight: n.weight,
            point: n.point,
            normal: n.normal,
            signal: signal.eval(n.uv, &n.point),
        })
        .collect();
    DiscreteVarifold::new(atoms).expect("quadrature atoms are valid")
}

fn orders(surface: &AnalyticSurface, n: usize) -> (usize, usize) {
    let (lu, lv) = surface.mean_extents();
    let nv = ((n as f64 * lv / lu).round() as usize).max(4);
    (n, nv)
}

/// Squared norm of the tangential gradient by central differences in the
/// parameters, `[f_u f_v] G⁻¹ [f_u f_v]ᵀ`.
fn gradient_squared(surface: &AnalyticSurface, signal: &dyn ScalarField, uv: [f64; 2]) -> f64 {
    let (du, dv) = surface.domain();
    let hu = 1e-5 * (du[1] - du[0]);
    let hv = 1e-5 * (dv[1] - dv[0]);
    let f = |u: f64, v: f64| {
        let p = [u, v];
        signal.eval(p, &surface.point(p))
    };
    let fu = (f(uv[0] + hu, uv[1]) - f(uv[0] - hu, uv[1])) / (2.0 * hu);
    let fv = (f(uv[0], uv[1] + hv) - f(uv[0], uv[1] - hv)) / (2.0 * hv);
    let g = surface.metric(uv);
    let det = g.m11 * g.m22 - g.m12 * g.m21;
    (g.m22 * fu * fu - 2.0 * g.m12 * fu * fv + g.m11 * fv * fv) / det
}

fn penalties(surface: &AnalyticSurface, signal: &dyn ScalarField, model: &EnergyModel, nu: usize, nv: usize) -> (f64, f64) {
    let q = SurfaceQuadrature::tensor(surface, nu, nv);
    let terms: Vec<(f64, f64)> = q
        .nodes()
        .par_iter()
        .map(|n| {
            let f = signal.eval(n.uv, &n.point);
            let w = n.weight;
            match model.penalty {
                Penalty::L2 { gamma_f, .. } => (w * 0.5 * gamma_f * f * f, 0.0),
                Penalty::H1 { alpha, beta, .. } => {
                    let g2 = if beta == 0.0 { 0.0 } else { gradient_squared(surface, signal, n.uv) };
                    (w * alpha * f * f, w * beta * g2)
                }
                Penalty::Bv {
                    alpha, beta, epsilon, ..
                } => {
                    let e2 = epsilon * epsilon;
                    let g2 = if beta == 0.0 { 0.0 } else { gradient_squared(surface, signal, n.uv) };
                    (w * alpha * (f * f + e2).sqrt(), w * beta * (g2 + e2).sqrt())
                }
            }
        })
        .collect();
    (
        ordered_sum(terms.iter().map(|t| t.0)),
        ordered_sum(terms.iter().map(|t| t.1)),
    )
}

fn evaluate(
    surface: &AnalyticSurface,
    signal: &dyn ScalarField,
    target: &OracleTarget,
    target_self: Option<f64>,
    model: &EnergyModel,
    n: usize,
) -> (f64, f64, f64) {
    let (nu, nv) = orders(surface, n);
    let (p0, p1) = penalties(surface, signal, model, nu, nv);
    let gamma_w = model.gamma_w();
    let attachment = if gamma_w == 0.0 {
        0.0
    } else {
        let mu = continuous_varifold(surface, signal, nu, nv);
        let kp: &KernelParams = &model.kernel;
        let d = match target {
            OracleTarget::Analytic { surface: ts, signal: tf } => {
                let (tu, tv) = orders(ts, n);
                let nu_t = continuous_varifold(ts, *tf, tu, tv);
                varifold::squared_distance(&mu, &nu_t, kp)
            }
            OracleTarget::Discrete(nu_d) => {
                varifold::distance_to_target(&mu, nu_d, target_self.unwrap_or(0.0), kp)
            }
        };
        0.5 * gamma_w * d
    };
    (p0, p1, attachment)
}

/// Continuous energy of the fshape `(surface, signal)` against `target`.
///
/// The quadrature order is raised by half its value until the total changes
/// by at most `options.tolerance` relative to the last value.
pub fn continuous_energy_oracle(
    surface: &AnalyticSurface,
    signal: &dyn ScalarField,
    target: OracleTarget,
    model: &EnergyModel,
    options: &OracleOptions,
) -> Result<OracleValue> {
    model.validate()?;
    if options.initial_order < 4 {
        return Err(Error::BadParams(format!(
            "oracle order must be at least 4, got {}",
            options.initial_order
        )));
    }
    let target_self = match &target {
        OracleTarget::Discrete(nu) if model.gamma_w() != 0.0 => {
            Some(varifold::inner_product(nu, nu, &model.kernel))
        }
        _ => None,
    };
    let mut n = options.initial_order;
    let mut previous = evaluate(surface, signal, &target, target_self, model, n);
    let mut change = f64::INFINITY;
    while n < options.max_order {
        n = (n + n / 2).min(options.max_order);
        let current = evaluate(surface, signal, &target, target_self, model, n);
        let total = current.0 + current.1 + current.2;
        let before = previous.0 + previous.1 + previous.2;
        let diff = (total - before).abs();
        change = if diff == 0.0 { 0.0 } else { diff / total.abs().max(before.abs()) };
        previous = current;
        if change <= options.tolerance {
            return Ok(OracleValue {
                signal_penalty: current.0,
                gradient_penalty: current.1,
                attachment: current.2,
                total,
                order: n,
                relative_change: change,
            });
        }
    }
    Err(Error::NoConvergence { order: n, change })
}

/// `‖μ̂ - μ_(X, f)‖²` between a discrete varifold and a continuous fshape.
pub fn varifold_distance_oracle(
    surface: &AnalyticSurface,
    signal: &dyn ScalarField,
    discrete: &DiscreteVarifold,
    kernel: KernelParams,
    options: &OracleOptions,
) -> Result<OracleValue> {
    let model = EnergyModel::new(
        Penalty::L2 {
            gamma_f: 0.0,
            gamma_w: 2.0,
        },
        kernel,
    )?;
    continuous_energy_oracle(surface, signal, OracleTarget::Discrete(discrete), &model, options)
}

#[cfg(test)]
mod tests {
    use super::super::builtin_surface;
    use super::*;
    use crate::mesh::Vec3;
    use std::collections::BTreeMap;

    fn kernel() -> KernelParams {
        KernelParams::new(0.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn zero_signal_no_attachment() {
        let s = builtin_surface("sphere_cap", &BTreeMap::new()).unwrap();
        let zero = |_: [f64; 2], _: &Vec3| 0.0;
        let model = EnergyModel::new(Penalty::H1 { alpha: 1.0, beta: 1.0, gamma_w: 0.0 }, kernel()).unwrap();
        let v = continuous_energy_oracle(&s, &zero, OracleTarget::Analytic { surface: &s, signal: &zero }, &model, &OracleOptions::default()).unwrap();
        assert_eq!(v.total, 0.0);
    }

    #[test]
    fn flat_square_l2() {
        let s = builtin_surface("monge_patch", &BTreeMap::new()).unwrap();
        let one = |_: [f64; 2], _: &Vec3| 1.0;
        let model = EnergyModel::new(Penalty::L2 { gamma_f: 2.0, gamma_w: 0.0 }, kernel()).unwrap();
        let v = continuous_energy_oracle(&s, &one, OracleTarget::Analytic { surface: &s, signal: &one }, &model, &OracleOptions::default()).unwrap();
        assert!((v.total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gradient_of_linear_signal_on_cylinder() {
        // f = R θ has unit tangential gradient on a cylinder of radius R.
        let params = [("radius".to_string(), 2.0)].into_iter().collect();
        let s = builtin_surface("cylinder_patch", &params).unwrap();
        let f = |uv: [f64; 2], _: &Vec3| 2.0 * uv[0];
        assert!((gradient_squared(&s, &f, [0.4, 0.3]) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn self_distance_vanishes() {
        let s = builtin_surface("sphere_cap", &BTreeMap::new()).unwrap();
        let f = |uv: [f64; 2], _: &Vec3| (3.0 * uv[0]).sin() * (2.0 * uv[1]).cos();
        let model = EnergyModel::new(Penalty::L2 { gamma_f: 0.0, gamma_w: 1.0 }, kernel()).unwrap();
        let v = continuous_energy_oracle(&s, &f, OracleTarget::Analytic { surface: &s, signal: &f }, &model, &OracleOptions::default()).unwrap();
        assert_eq!(v.total, 0.0);
    }
}
