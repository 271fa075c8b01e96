//! Analytic reference surfaces with boundary.
//!
//! Every surface is a parametrized patch `φ: [u0, u1] × [v0, v1] → ℝ³` in a
//! local frame, followed by a rigid placement. The analytic continuation of
//! the patch beyond its parameter rectangle is used for the normal
//! projection, so points above the overhang of a triangulation still get a
//! foot (flagged as outside the domain).
//!
//! Curvature sign: `κ_i` are the eigenvalues of the differential of the unit
//! normal, so a sphere with outward normal has `κ = +1/R`. With this choice a
//! point `x = π(x) + t n(π(x))` lies in the tubular neighbourhood when
//! `1 + t κ_i > 0`.

mod admissibility;
mod locate;
mod lift;
mod meshing;
mod oracle;

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{Matrix2, Rotation3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::Vec3;

pub use admissibility::{admissibility_report, AdmissibilityReport, AdmissibilityThresholds, CheckResult};
pub use lift::{
    discretize_signal, jacobian_diagnostic, lift_signal, triangle_samples, LiftedSignal, QuadratureNode,
    SurfaceQuadrature,
};
pub use locate::TriangleLocator;
pub use meshing::{refinement_family, sample_triangulation, RefinementFamily};
pub use oracle::{
    continuous_energy_oracle, continuous_varifold, varifold_distance_oracle, OracleOptions, OracleTarget,
    OracleValue,
};

/// A scalar signal defined on a surface, evaluated from the parameter pair
/// and the world-space point.
pub trait ScalarField: Sync {
    fn eval(&self, uv: [f64; 2], point: &Vec3) -> f64;
}

impl<F> ScalarField for F
where
    F: Fn([f64; 2], &Vec3) -> f64 + Sync,
{
    fn eval(&self, uv: [f64; 2], point: &Vec3) -> f64 {
        self(uv, point)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// `u` polar angle in `[0, max_polar]`, `v` azimuth in `[-π, π]`.
    SphereCap { radius: f64, max_polar: f64 },
    /// `u` angle, `v` height.
    CylinderPatch {
        radius: f64,
        theta: (f64, f64),
        z: (f64, f64),
    },
    /// Graph of `z = (a x² + 2 b x y + c y²)/2`; `u = x`, `v = y`.
    MongePatch {
        a: f64,
        b: f64,
        c: f64,
        x: (f64, f64),
        y: (f64, f64),
    },
}

/// Result of a normal projection: `point = foot + distance · normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub uv: [f64; 2],
    pub foot: Vec3,
    pub normal: Vec3,
    pub distance: f64,
    pub in_domain: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSurface {
    shape: Shape,
    rotation: Rotation3<f64>,
    translation: Vec3,
}

struct LocalFrame {
    point: Vec3,
    du: Vec3,
    dv: Vec3,
    duu: Vec3,
    duv: Vec3,
    dvv: Vec3,
}

impl AnalyticSurface {
    pub fn new(shape: Shape) -> Result<Self> {
        validate_shape(&shape)?;
        Ok(AnalyticSurface {
            shape,
            rotation: Rotation3::identity(),
            translation: Vec3::zeros(),
        })
    }

    /// Same surface after the rigid motion `x ↦ R x + t`, composed after the
    /// current placement.
    pub fn displaced(&self, rotation: Rotation3<f64>, translation: Vec3) -> Self {
        AnalyticSurface {
            shape: self.shape,
            rotation: rotation * self.rotation,
            translation: rotation * self.translation + translation,
        }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    /// Parameter rectangle `([u0, u1], [v0, v1])`.
    pub fn domain(&self) -> ([f64; 2], [f64; 2]) {
        match self.shape {
            Shape::SphereCap { max_polar, .. } => ([0.0, max_polar], [-PI, PI]),
            Shape::CylinderPatch { theta, z, .. } => ([theta.0, theta.1], [z.0, z.1]),
            Shape::MongePatch { x, y, .. } => ([x.0, x.1], [y.0, y.1]),
        }
    }

    fn periodic_v(&self) -> bool {
        matches!(self.shape, Shape::SphereCap { .. })
    }

    pub fn in_domain(&self, uv: [f64; 2]) -> bool {
        let (du, dv) = self.domain();
        let tol = 1e-12 * (1.0 + du[1].abs().max(dv[1].abs()));
        let u_ok = uv[0] >= du[0] - tol && uv[0] <= du[1] + tol;
        let v_ok = self.periodic_v() || (uv[1] >= dv[0] - tol && uv[1] <= dv[1] + tol);
        u_ok && v_ok
    }

    /// Nearest parameter point of the domain (componentwise clamp; the
    /// sphere azimuth is wrapped instead).
    pub fn clamp(&self, uv: [f64; 2]) -> [f64; 2] {
        let (du, dv) = self.domain();
        let u = uv[0].clamp(du[0], du[1]);
        let v = if self.periodic_v() {
            wrap_angle(uv[1])
        } else {
            uv[1].clamp(dv[0], dv[1])
        };
        [u, v]
    }

    fn local(&self, uv: [f64; 2]) -> LocalFrame {
        let [u, v] = uv;
        match self.shape {
            Shape::SphereCap { radius: r, .. } => {
                let (su, cu) = u.sin_cos();
                let (sv, cv) = v.sin_cos();
                LocalFrame {
                    point: Vec3::new(r * su * cv, r * su * sv, r * cu),
                    du: Vec3::new(r * cu * cv, r * cu * sv, -r * su),
                    dv: Vec3::new(-r * su * sv, r * su * cv, 0.0),
                    duu: Vec3::new(-r * su * cv, -r * su * sv, -r * cu),
                    duv: Vec3::new(-r * cu * sv, r * cu * cv, 0.0),
                    dvv: Vec3::new(-r * su * cv, -r * su * sv, 0.0),
                }
            }
            Shape::CylinderPatch { radius: r, .. } => {
                let (s, c) = u.sin_cos();
                LocalFrame {
                    point: Vec3::new(r * c, r * s, v),
                    du: Vec3::new(-r * s, r * c, 0.0),
                    dv: Vec3::new(0.0, 0.0, 1.0),
                    duu: Vec3::new(-r * c, -r * s, 0.0),
                    duv: Vec3::zeros(),
                    dvv: Vec3::zeros(),
                }
            }
            Shape::MongePatch { a, b, c, .. } => {
                let zx = a * u + b * v;
                let zy = b * u + c * v;
                LocalFrame {
                    point: Vec3::new(u, v, 0.5 * (a * u * u + 2.0 * b * u * v + c * v * v)),
                    du: Vec3::new(1.0, 0.0, zx),
                    dv: Vec3::new(0.0, 1.0, zy),
                    duu: Vec3::new(0.0, 0.0, a),
                    duv: Vec3::new(0.0, 0.0, b),
                    dvv: Vec3::new(0.0, 0.0, c),
                }
            }
        }
    }

    fn local_normal(&self, uv: [f64; 2]) -> Vec3 {
        match self.shape {
            Shape::SphereCap { .. } => {
                let (su, cu) = uv[0].sin_cos();
                let (sv, cv) = uv[1].sin_cos();
                Vec3::new(su * cv, su * sv, cu)
            }
            Shape::CylinderPatch { .. } => {
                let (s, c) = uv[0].sin_cos();
                Vec3::new(c, s, 0.0)
            }
            Shape::MongePatch { a, b, c, .. } => {
                let zx = a * uv[0] + b * uv[1];
                let zy = b * uv[0] + c * uv[1];
                Vec3::new(-zx, -zy, 1.0).normalize()
            }
        }
    }

    fn to_world(&self, p: Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    fn to_local(&self, p: &Vec3) -> Vec3 {
        self.rotation.inverse() * (p - self.translation)
    }

    pub fn point(&self, uv: [f64; 2]) -> Vec3 {
        self.to_world(self.local(uv).point)
    }

    /// Unit normal, oriented along `φ_u × φ_v`.
    pub fn normal(&self, uv: [f64; 2]) -> Vec3 {
        self.rotation * self.local_normal(uv)
    }

    pub fn partials(&self, uv: [f64; 2]) -> (Vec3, Vec3) {
        let f = self.local(uv);
        (self.rotation * f.du, self.rotation * f.dv)
    }

    /// Metric tensor `[[φ_u·φ_u, φ_u·φ_v], [φ_u·φ_v, φ_v·φ_v]]`.
    pub fn metric(&self, uv: [f64; 2]) -> Matrix2<f64> {
        let f = self.local(uv);
        let e = f.du.dot(&f.du);
        let g = f.du.dot(&f.dv);
        let h = f.dv.dot(&f.dv);
        Matrix2::new(e, g, g, h)
    }

    /// `|φ_u × φ_v|`.
    pub fn area_element(&self, uv: [f64; 2]) -> f64 {
        let f = self.local(uv);
        f.du.cross(&f.dv).norm()
    }

    /// Principal curvatures, `κ_1 ≥ κ_2`.
    pub fn curvatures(&self, uv: [f64; 2]) -> (f64, f64) {
        match self.shape {
            Shape::SphereCap { radius, .. } => (1.0 / radius, 1.0 / radius),
            Shape::CylinderPatch { radius, .. } => (1.0 / radius, 0.0),
            Shape::MongePatch { .. } => {
                let f = self.local(uv);
                let n = self.local_normal(uv);
                let first = self.metric(uv);
                let second = Matrix2::new(n.dot(&f.duu), n.dot(&f.duv), n.dot(&f.duv), n.dot(&f.dvv));
                // dn = -I⁻¹ II in the (φ_u, φ_v) basis.
                let w = -first.try_inverse().expect("regular parametrization") * second;
                let tr = w.trace();
                let det = w.determinant();
                let disc = (0.25 * tr * tr - det).max(0.0).sqrt();
                (0.5 * tr + disc, 0.5 * tr - disc)
            }
        }
    }

    /// Radius of the tubular neighbourhood in which the normal projection is
    /// unique. For a flat patch the domain diameter is used.
    pub fn reach(&self) -> f64 {
        match self.shape {
            Shape::SphereCap { radius, .. } | Shape::CylinderPatch { radius, .. } => radius,
            Shape::MongePatch { a, b, c, x, y } => {
                let k = hessian_bound(a, b, c);
                if k > 0.0 {
                    1.0 / k
                } else {
                    ((x.1 - x.0).powi(2) + (y.1 - y.0).powi(2)).sqrt()
                }
            }
        }
    }

    /// Largest absolute principal curvature over the patch.
    pub fn max_curvature(&self) -> f64 {
        match self.shape {
            Shape::SphereCap { radius, .. } | Shape::CylinderPatch { radius, .. } => 1.0 / radius,
            Shape::MongePatch { a, b, c, .. } => hessian_bound(a, b, c),
        }
    }

    /// Surface area of the patch.
    pub fn area(&self) -> f64 {
        match self.shape {
            Shape::SphereCap { radius, max_polar } => 2.0 * PI * radius * radius * (1.0 - max_polar.cos()),
            Shape::CylinderPatch { radius, theta, z } => radius * (theta.1 - theta.0) * (z.1 - z.0),
            Shape::MongePatch { .. } => {
                let q = SurfaceQuadrature::composite(self, 8, 8);
                crate::quadrature::ordered_sum(q.nodes().iter().map(|n| n.weight))
            }
        }
    }

    /// Normal projection onto the analytically continued surface.
    pub fn project(&self, p: &Vec3) -> Result<Projection> {
        let q = self.to_local(p);
        let reach = self.reach();
        let (uv, distance) = match self.shape {
            Shape::SphereCap { radius, .. } => {
                let rho = q.norm();
                if rho == 0.0 {
                    return Err(Error::OutsideReach { distance: radius, reach });
                }
                let u = (q.z / rho).clamp(-1.0, 1.0).acos();
                let v = q.y.atan2(q.x);
                ([u, v], rho - radius)
            }
            Shape::CylinderPatch { radius, theta, .. } => {
                let rho = (q.x * q.x + q.y * q.y).sqrt();
                if rho == 0.0 {
                    return Err(Error::OutsideReach { distance: radius, reach });
                }
                let mid = 0.5 * (theta.0 + theta.1);
                let u = mid + wrap_angle(q.y.atan2(q.x) - mid);
                ([u, q.z], rho - radius)
            }
            Shape::MongePatch { .. } => self.project_monge(&q)?,
        };
        // The reach sphere itself is admitted so that a point at distance
        // exactly `reach` on the convex side still projects.
        if !(distance.abs() <= reach) {
            return Err(Error::OutsideReach {
                distance: distance.abs(),
                reach,
            });
        }
        Ok(Projection {
            uv,
            foot: self.point(uv),
            normal: self.normal(uv),
            distance,
            in_domain: self.in_domain(uv),
        })
    }

    fn project_monge(&self, q: &Vec3) -> Result<([f64; 2], f64)> {
        let (du, dv) = self.domain();
        let reach = self.reach();
        let tol = 1e-12 * reach;
        let z_at = |x: f64, y: f64| self.local([x, y]).point.z;
        let starts = [
            [q.x, q.y],
            [q.x.clamp(du[0], du[1]), q.y.clamp(dv[0], dv[1])],
            [0.5 * (du[0] + du[1]), 0.5 * (dv[0] + dv[1])],
            {
                let f = self.local([q.x, q.y]);
                let dz = q.z - z_at(q.x, q.y);
                [q.x - dz * f.du.z, q.y - dz * f.dv.z]
            },
        ];
        let mut best: Option<([f64; 2], f64)> = None;
        for start in starts {
            if let Some(uv) = self.newton_foot(q, start, tol) {
                let f = self.local(uv);
                let n = self.local_normal(uv);
                let t = (q - f.point).dot(&n);
                if best.is_none_or(|(_, b)| t.abs() < b.abs()) {
                    best = Some((uv, t));
                }
            }
        }
        best.ok_or(Error::OutsideReach {
            distance: (q.z - z_at(q.x, q.y)).abs(),
            reach,
        })
    }

    /// Damped Newton on `½|q - φ(u, v)|²`.
    fn newton_foot(&self, q: &Vec3, start: [f64; 2], tol: f64) -> Option<[f64; 2]> {
        let objective = |uv: [f64; 2]| 0.5 * (q - self.local(uv).point).norm_squared();
        let mut uv = start;
        for _ in 0..100 {
            let f = self.local(uv);
            let r = q - f.point;
            let g = nalgebra::Vector2::new(-r.dot(&f.du), -r.dot(&f.dv));
            let hess = Matrix2::new(
                f.du.dot(&f.du) - r.dot(&f.duu),
                f.du.dot(&f.dv) - r.dot(&f.duv),
                f.du.dot(&f.dv) - r.dot(&f.duv),
                f.dv.dot(&f.dv) - r.dot(&f.dvv),
            );
            let mut lambda = 0.0;
            let step = loop {
                let damped = hess + Matrix2::identity() * lambda;
                if damped.m11 > 0.0 && damped.determinant() > 0.0 {
                    break damped.try_inverse()? * g;
                }
                lambda = if lambda == 0.0 { 1e-6 * (1.0 + hess.norm()) } else { lambda * 10.0 };
                if lambda > 1e12 {
                    return None;
                }
            };
            let current = objective(uv);
            let mut s = 1.0;
            let mut next = [uv[0] - step[0], uv[1] - step[1]];
            while objective(next) > current && s > 1e-8 {
                s *= 0.5;
                next = [uv[0] - s * step[0], uv[1] - s * step[1]];
            }
            let moved = ((next[0] - uv[0]).powi(2) + (next[1] - uv[1]).powi(2)).sqrt();
            uv = next;
            if moved <= tol {
                let f = self.local(uv);
                let r = q - f.point;
                let grad = (r.dot(&f.du).powi(2) + r.dot(&f.dv).powi(2)).sqrt();
                return (grad <= 1e-9 * (1.0 + r.norm())).then_some(uv);
            }
        }
        None
    }

    /// Stratified samples of the parameter domain, `nu × nv` cells with one
    /// jittered point each, drawn from a fixed low-discrepancy offset.
    pub fn stratified_samples(&self, count: usize) -> Vec<[f64; 2]> {
        let (du, dv) = self.domain();
        let (lu, lv) = self.physical_extents();
        let ratio = (lv / lu).max(1e-6);
        let nu = ((count as f64 / ratio).sqrt().ceil() as usize).max(1);
        let nv = ((count as f64 / nu as f64).ceil() as usize).max(1);
        let mut out = Vec::with_capacity(nu * nv);
        for i in 0..nu {
            for j in 0..nv {
                let k = (i * nv + j) as f64;
                // Golden-ratio jitter keeps samples off cell edges without an RNG.
                let ju = (0.5 + k * 0.618_033_988_749_895).fract();
                let jv = (0.5 + k * 0.754_877_666_246_692_7).fract();
                let u = du[0] + (du[1] - du[0]) * (i as f64 + 0.1 + 0.8 * ju) / nu as f64;
                let v = dv[0] + (dv[1] - dv[0]) * (j as f64 + 0.1 + 0.8 * jv) / nv as f64;
                out.push([u, v]);
            }
        }
        out
    }

    /// Approximate physical lengths of the two parameter directions.
    pub fn physical_extents(&self) -> (f64, f64) {
        let (du, dv) = self.domain();
        let samples = 16;
        let mut lu: f64 = 0.0;
        let mut lv: f64 = 0.0;
        for k in 0..=2 {
            let s = k as f64 / 2.0;
            let v = dv[0] + s * (dv[1] - dv[0]);
            let u = du[0] + s * (du[1] - du[0]);
            lu = lu.max(curve_length(|t| self.point([t, v]), du, samples));
            lv = lv.max(curve_length(|t| self.point([u, t]), dv, samples));
        }
        (lu, lv)
    }

    /// Mean lengths of the coordinate curves through five evenly spaced
    /// parameter values, used to balance quadrature orders.
    pub fn mean_extents(&self) -> (f64, f64) {
        let (du, dv) = self.domain();
        let mut lu = 0.0;
        let mut lv = 0.0;
        for k in 0..5 {
            let s = (k as f64 + 0.5) / 5.0;
            let v = dv[0] + s * (dv[1] - dv[0]);
            let u = du[0] + s * (du[1] - du[0]);
            lu += curve_length(|t| self.point([t, v]), du, 16) / 5.0;
            lv += curve_length(|t| self.point([u, t]), dv, 16) / 5.0;
        }
        (lu, lv)
    }
}

fn curve_length(f: impl Fn(f64) -> Vec3, range: [f64; 2], n: usize) -> f64 {
    let mut len = 0.0;
    let mut prev = f(range[0]);
    for i in 1..=n {
        let p = f(range[0] + (range[1] - range[0]) * i as f64 / n as f64);
        len += (p - prev).norm();
        prev = p;
    }
    len
}

fn hessian_bound(a: f64, b: f64, c: f64) -> f64 {
    let tr = a + c;
    let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    (0.5 * tr).abs() + disc
}

pub(crate) fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w < -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

fn validate_shape(shape: &Shape) -> Result<()> {
    let bad = |m: &str| Err(Error::BadParams(m.to_string()));
    let finite_range = |r: (f64, f64)| r.0.is_finite() && r.1.is_finite() && r.1 > r.0;
    match *shape {
        Shape::SphereCap { radius, max_polar } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return bad("sphere_cap radius must be positive");
            }
            if !(max_polar > 0.0 && max_polar < PI / 2.0) {
                return bad("sphere_cap max_polar must lie in (0, pi/2)");
            }
        }
        Shape::CylinderPatch { radius, theta, z } => {
            if !(radius > 0.0 && radius.is_finite()) {
                return bad("cylinder_patch radius must be positive");
            }
            if !finite_range(theta) || theta.1 - theta.0 >= PI {
                return bad("cylinder_patch theta range must be nonempty and shorter than pi");
            }
            if !finite_range(z) {
                return bad("cylinder_patch z range must be nonempty");
            }
        }
        Shape::MongePatch { a, b, c, x, y } => {
            if ![a, b, c].iter().all(|v| v.is_finite()) {
                return bad("monge_patch coefficients must be finite");
            }
            if !finite_range(x) || !finite_range(y) {
                return bad("monge_patch domain must be nonempty");
            }
        }
    }
    Ok(())
}

/// Builds one of the named surfaces. Recognized keys:
///
/// * `sphere_cap`: `radius` (1), `max_polar` (π/3)
/// * `cylinder_patch`: `radius` (1), `theta_min` (0), `theta_max` (π/2),
///   `z_min` (0), `z_max` (1)
/// * `monge_patch`: `a`, `b`, `c` (0), `x_min`, `y_min` (0), `x_max`,
///   `y_max` (1)
///
/// Every surface also accepts a placement: rotation vector `rx, ry, rz`
/// (radians) and translation `tx, ty, tz`.
pub fn builtin_surface(name: &str, params: &BTreeMap<String, f64>) -> Result<AnalyticSurface> {
    let keys: &[&str] = match name {
        "sphere_cap" => &["radius", "max_polar"],
        "cylinder_patch" => &["radius", "theta_min", "theta_max", "z_min", "z_max"],
        "monge_patch" => &["a", "b", "c", "x_min", "x_max", "y_min", "y_max"],
        other => return Err(Error::BadParams(format!("unknown surface '{other}'"))),
    };
    let placement = ["rx", "ry", "rz", "tx", "ty", "tz"];
    for k in params.keys() {
        if !keys.contains(&k.as_str()) && !placement.contains(&k.as_str()) {
            return Err(Error::BadParams(format!("unknown parameter '{k}' for surface '{name}'")));
        }
    }
    let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
    let shape = match name {
        "sphere_cap" => Shape::SphereCap {
            radius: get("radius", 1.0),
            max_polar: get("max_polar", PI / 3.0),
        },
        "cylinder_patch" => Shape::CylinderPatch {
            radius: get("radius", 1.0),
            theta: (get("theta_min", 0.0), get("theta_max", PI / 2.0)),
            z: (get("z_min", 0.0), get("z_max", 1.0)),
        },
        _ => Shape::MongePatch {
            a: get("a", 0.0),
            b: get("b", 0.0),
            c: get("c", 0.0),
            x: (get("x_min", 0.0), get("x_max", 1.0)),
            y: (get("y_min", 0.0), get("y_max", 1.0)),
        },
    };
    let surface = AnalyticSurface::new(shape)?;
    let rot = Vec3::new(get("rx", 0.0), get("ry", 0.0), get("rz", 0.0));
    let tr = Vec3::new(get("tx", 0.0), get("ty", 0.0), get("tz", 0.0));
    if !rot.iter().chain(tr.iter()).all(|v| v.is_finite()) {
        return Err(Error::BadParams("placement must be finite".into()));
    }
    Ok(surface.displaced(Rotation3::new(rot), tr))
}
