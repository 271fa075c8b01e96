//! Discrete functional varifolds and their Gaussian-kernel RKHS metric.
//!
//! A discrete fvarifold is a list of weighted Dirac atoms `(x, V, f)`: a
//! point, a non-oriented plane (stored as a unit normal, sign irrelevant)
//! and a signal value. The dual inner product of two atoms is
//!
//! ```text
//! k_e(x, y) k_t(V, W) k_f(f, g)
//!   = exp(-|x - y|²/σ_e²) · exp(-2(1 - <n_V, n_W>²)/σ_t²) · exp(-|f - g|²/σ_f²)
//! ```
//!
//! Pairwise sums are evaluated exactly. Work is split over blocks of source
//! atoms; each row is accumulated in a fixed order and rows are reduced in
//! index order, so the result does not depend on the number of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{Element, Signal, SignalP0, SignalP1};
use crate::mesh::{TriangleMesh, Vec3};
use crate::quadrature::ordered_sum;

const ROW_BLOCK: usize = 32;
const COL_BLOCK: usize = 512;
const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub sigma_e: f64,
    pub sigma_t: f64,
    pub sigma_f: f64,
}

impl KernelParams {
    pub fn new(sigma_e: f64, sigma_t: f64, sigma_f: f64) -> Result<Self> {
        let kp = KernelParams {
            sigma_e,
            sigma_t,
            sigma_f,
        };
        kp.validate()?;
        Ok(kp)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("sigma_e", self.sigma_e),
            ("sigma_t", self.sigma_t),
            ("sigma_f", self.sigma_f),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::BadParams(format!("kernel.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }

    fn coefficients(&self) -> Coefficients {
        Coefficients {
            inv_e: 1.0 / (self.sigma_e * self.sigma_e),
            inv_t: 2.0 / (self.sigma_t * self.sigma_t),
            inv_f: 1.0 / (self.sigma_f * self.sigma_f),
        }
    }
}

#[derive(Clone, Copy)]
struct Coefficients {
    inv_e: f64,
    inv_t: f64,
    inv_f: f64,
}

impl Coefficients {
    #[inline(always)]
    fn exponent(&self, a: &VarifoldAtom, b: &VarifoldAtom) -> f64 {
        let d2 = (a.point - b.point).norm_squared();
        let c = a.normal.dot(&b.normal);
        let df = a.signal - b.signal;
        d2 * self.inv_e + (1.0 - c * c).max(0.0) * self.inv_t + df * df * self.inv_f
    }
}

/// Weighted Dirac atom at `point` with tangent plane normal to `normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarifoldAtom {
    pub weight: f64,
    pub point: Vec3,
    pub normal: Vec3,
    pub signal: f64,
}

impl VarifoldAtom {
    pub fn new(weight: f64, point: Vec3, normal: Vec3, signal: f64) -> Result<Self> {
        let atom = VarifoldAtom {
            weight,
            point,
            normal,
            signal,
        };
        atom.validate()?;
        Ok(atom)
    }

    fn validate(&self) -> Result<()> {
        let n = self.normal.norm();
        if !((n - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::NonUnitNormal(n));
        }
        if !(self.weight >= 0.0) {
            return Err(Error::BadParams(format!("atom weight {} is negative", self.weight)));
        }
        if !self.signal.is_finite() || !self.point.iter().all(|c| c.is_finite()) {
            return Err(Error::BadParams("atom has non-finite coordinates".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiscreteVarifold {
    atoms: Vec<VarifoldAtom>,
}

impl DiscreteVarifold {
    pub fn new(atoms: Vec<VarifoldAtom>) -> Result<Self> {
        for a in &atoms {
            a.validate()?;
        }
        Ok(DiscreteVarifold { atoms })
    }

    /// One atom per triangle: weight `|T_k|`, barycenter, unit normal and
    /// the P0 value.
    pub fn from_p0(mesh: &TriangleMesh, f: &SignalP0) -> Result<Self> {
        let f = Signal::P0(f.clone());
        f.check(mesh)?;
        let geometry = mesh.geometry()?;
        let atoms = geometry
            .iter()
            .zip(f.values())
            .map(|(g, &s)| VarifoldAtom {
                weight: g.area,
                point: g.barycenter,
                normal: g.unit_normal,
                signal: s,
            })
            .collect();
        Ok(DiscreteVarifold { atoms })
    }

    /// P1 signals go through the barycenter projection first.
    pub fn from_p1(mesh: &TriangleMesh, f: &SignalP1) -> Result<Self> {
        Self::from_p0(mesh, &crate::fem::p0_project(mesh, f)?)
    }

    pub fn from_fshape(mesh: &TriangleMesh, f: &Signal) -> Result<Self> {
        match f {
            Signal::P0(s) => Self::from_p0(mesh, s),
            Signal::P1(s) => Self::from_p1(mesh, s),
        }
    }

    pub fn atoms(&self) -> &[VarifoldAtom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Same geometry and weights with new per-atom signal values.
    pub fn with_signals(&self, signals: &[f64]) -> Result<Self> {
        if signals.len() != self.atoms.len() {
            return Err(Error::LengthMismatch {
                expected: self.atoms.len(),
                found: signals.len(),
            });
        }
        let atoms = self
            .atoms
            .iter()
            .zip(signals)
            .map(|(a, &s)| VarifoldAtom { signal: s, ..*a })
            .collect();
        Ok(DiscreteVarifold { atoms })
    }
}

/// Distance on the non-oriented Grassmannian, `sqrt(2(1 - <n1, n2>²))`.
pub fn grassmann_distance(n1: &Vec3, n2: &Vec3) -> Result<f64> {
    for n in [n1, n2] {
        let norm = n.norm();
        if !((norm - 1.0).abs() <= UNIT_TOLERANCE) {
            return Err(Error::NonUnitNormal(norm));
        }
    }
    let c = n1.dot(n2).clamp(-1.0, 1.0);
    Ok((2.0 * (1.0 - c * c)).max(0.0).sqrt())
}

/// Kernel between two atoms, weights excluded.
pub fn atom_kernel(a: &VarifoldAtom, b: &VarifoldAtom, kp: &KernelParams) -> f64 {
    (-kp.coefficients().exponent(a, b)).exp()
}

/// Per-row sums for one source atom `a` against a set of atoms `b`:
/// `s = Σ_b w_b k(a, b)` and `d = Σ_b w_b (f_a - f_b) k(a, b)`.
#[derive(Debug, Clone, Copy, Default)]
struct RowSums {
    s: f64,
    d: f64,
}

fn row_sums(source: &[VarifoldAtom], other: &[VarifoldAtom], kp: &KernelParams) -> Vec<RowSums> {
    let coef = kp.coefficients();
    let blocks: Vec<Vec<RowSums>> = source
        .par_chunks(ROW_BLOCK)
        .map(|rows| {
            let mut acc = vec![RowSums::default(); rows.len()];
            for cols in other.chunks(COL_BLOCK) {
                for (a, r) in rows.iter().zip(acc.iter_mut()) {
                    let mut s = 0.0;
                    let mut d = 0.0;
                    for b in cols {
                        let wk = b.weight * (-coef.exponent(a, b)).exp();
                        s += wk;
                        d += wk * (a.signal - b.signal);
                    }
                    r.s += s;
                    r.d += d;
                }
            }
            acc
        })
        .collect();
    blocks.into_iter().flatten().collect()
}

fn weighted_total(source: &[VarifoldAtom], rows: &[RowSums]) -> f64 {
    ordered_sum(source.iter().zip(rows).map(|(a, r)| a.weight * r.s))
}

/// `<μ, ν>_{W'} = Σ_a Σ_b w_a w_b k(a, b)`.
pub fn inner_product(mu: &DiscreteVarifold, nu: &DiscreteVarifold, kp: &KernelParams) -> f64 {
    weighted_total(&mu.atoms, &row_sums(&mu.atoms, &nu.atoms, kp))
}

/// `‖μ - ν‖²_{W'}`. Rounding can leave a tiny negative value for nearly
/// equal measures; anything below `1e-10 (‖μ‖² + ‖ν‖²)` in magnitude is
/// clamped to zero.
pub fn squared_distance(mu: &DiscreteVarifold, nu: &DiscreteVarifold, kp: &KernelParams) -> f64 {
    let mm = inner_product(mu, mu, kp);
    let nn = inner_product(nu, nu, kp);
    let mn = inner_product(mu, nu, kp);
    clamp_distance(mm - 2.0 * mn + nn, mm + nn)
}

fn clamp_distance(d: f64, scale: f64) -> f64 {
    if d < 0.0 && -d <= 1e-10 * scale {
        0.0
    } else {
        d
    }
}

/// Squared distance to a fixed target together with its derivative with
/// respect to each source atom's signal value.
#[derive(Debug, Clone)]
pub struct DistanceGradient {
    pub squared_distance: f64,
    pub atom_gradient: Vec<f64>,
}

/// `‖μ - ν‖²` and `∂/∂f_a` for every atom `a` of `μ`. `target_self` is the
/// precomputed `<ν, ν>`.
pub fn distance_with_gradient(
    mu: &DiscreteVarifold,
    nu: &DiscreteVarifold,
    target_self: f64,
    kp: &KernelParams,
) -> DistanceGradient {
    let own = row_sums(&mu.atoms, &mu.atoms, kp);
    let cross = row_sums(&mu.atoms, &nu.atoms, kp);
    let mm = weighted_total(&mu.atoms, &own);
    let mn = weighted_total(&mu.atoms, &cross);
    let factor = -4.0 / (kp.sigma_f * kp.sigma_f);
    let atom_gradient = mu
        .atoms
        .iter()
        .zip(own.iter().zip(&cross))
        .map(|(a, (o, c))| factor * a.weight * (o.d - c.d))
        .collect();
    DistanceGradient {
        squared_distance: clamp_distance(mm - 2.0 * mn + target_self, mm + target_self),
        atom_gradient,
    }
}

/// `‖μ - ν‖²` only; cheaper bookkeeping for line searches.
pub fn distance_to_target(
    mu: &DiscreteVarifold,
    nu: &DiscreteVarifold,
    target_self: f64,
    kp: &KernelParams,
) -> f64 {
    let mm = inner_product(mu, mu, kp);
    let mn = inner_product(mu, nu, kp);
    clamp_distance(mm - 2.0 * mn + target_self, mm + target_self)
}

/// Maps per-triangle (atom) derivatives to the degrees of freedom of the
/// element: identity for P0, one third of each incident triangle for P1.
pub fn atoms_to_dofs(mesh: &TriangleMesh, element: Element, atom_gradient: &[f64]) -> Vec<f64> {
    match element {
        Element::P0 => atom_gradient.to_vec(),
        Element::P1 => {
            let mut out = vec![0.0; mesh.num_vertices()];
            for (t, g) in mesh.triangles().iter().zip(atom_gradient) {
                for &i in t {
                    out[i] += g / 3.0;
                }
            }
            out
        }
    }
}

/// Gradient of `‖μ(mesh, f) - ν‖²` with respect to the signal's degrees of
/// freedom.
pub fn signal_gradient(
    mesh: &TriangleMesh,
    signal: &Signal,
    target: &DiscreteVarifold,
    kp: &KernelParams,
) -> Result<Vec<f64>> {
    signal.check(mesh)?;
    let mu = DiscreteVarifold::from_fshape(mesh, signal)?;
    let nn = inner_product(target, target, kp);
    let dg = distance_with_gradient(&mu, target, nn, kp);
    Ok(atoms_to_dofs(mesh, signal.element(), &dg.atom_gradient))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::p1_assemble;
    use approx::assert_relative_eq;

    fn kp() -> KernelParams {
        KernelParams::new(0.5, 1.0, 0.7).unwrap()
    }

    fn atom(w: f64, p: [f64; 3], n: [f64; 3], f: f64) -> VarifoldAtom {
        VarifoldAtom::new(w, Vec3::from(p), Vec3::from(n).normalize(), f).unwrap()
    }

    #[test]
    fn single_triangle_atom() {
        let mesh = TriangleMesh::new(
            vec![Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let f = SignalP0::new(&mesh, vec![2.0]).unwrap();
        let mu = DiscreteVarifold::from_p0(&mesh, &f).unwrap();
        let a = mu.atoms()[0];
        assert_eq!(a.weight, 0.5);
        assert_relative_eq!(a.point, Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0));
        assert_eq!(a.normal, Vec3::new(0.0, 0.0, 1.0));
        assert_eq!(a.signal, 2.0);

        let g = p1_assemble(vec![1.0, 2.0, 3.0], &mesh).unwrap();
        let from_p1 = DiscreteVarifold::from_p1(&mesh, &g).unwrap();
        let from_p0 =
            DiscreteVarifold::from_p0(&mesh, &crate::fem::p0_project(&mesh, &g).unwrap()).unwrap();
        assert_eq!(from_p1, from_p0);
    }

    #[test]
    fn grassmann_values() {
        let n = Vec3::new(0.0, 0.6, 0.8);
        assert_eq!(grassmann_distance(&n, &n).unwrap(), 0.0);
        assert_eq!(grassmann_distance(&n, &-n).unwrap(), 0.0);
        assert_relative_eq!(grassmann_distance(&Vec3::x(), &Vec3::y()).unwrap(), 2f64.sqrt());
        assert!(matches!(
            grassmann_distance(&Vec3::new(1.0, 1.0, 0.0), &Vec3::x()),
            Err(Error::NonUnitNormal(_))
        ));
    }

    #[test]
    fn kernel_values() {
        let kp = kp();
        let a = atom(1.0, [0.0, 0.0, 0.0], [0.0, 0.0, 1.0], 0.3);
        assert_eq!(atom_kernel(&a, &a, &kp), 1.0);
        let b = atom(1.0, [kp.sigma_e, 0.0, 0.0], [0.0, 0.0, 1.0], 0.3);
        assert_relative_eq!(atom_kernel(&a, &b, &kp), (-1.0f64).exp(), max_relative = 1e-15);
        let flipped = VarifoldAtom { normal: -b.normal, ..b };
        assert_eq!(atom_kernel(&a, &b, &kp), atom_kernel(&a, &flipped, &kp));

        let mu = DiscreteVarifold::new(vec![a]).unwrap();
        let nu = DiscreteVarifold::new(vec![b]).unwrap();
        assert_relative_eq!(inner_product(&mu, &nu, &kp), (-1.0f64).exp(), max_relative = 1e-15);
        let heavy = DiscreteVarifold::new(vec![VarifoldAtom { weight: 3.0, ..a }]).unwrap();
        assert_eq!(inner_product(&heavy, &heavy, &kp), 9.0);
    }

    #[test]
    fn distance_of_signal_shift() {
        let kp = kp();
        let w = 0.8;
        let delta = 0.4;
        let a = atom(w, [0.1, 0.2, 0.3], [1.0, 1.0, 0.0], 0.0);
        let b = VarifoldAtom { signal: delta, ..a };
        let mu = DiscreteVarifold::new(vec![a]).unwrap();
        let nu = DiscreteVarifold::new(vec![b]).unwrap();
        let expected = 2.0 * w * w * (1.0 - (-delta * delta / (kp.sigma_f * kp.sigma_f)).exp());
        assert_relative_eq!(squared_distance(&mu, &nu, &kp), expected, max_relative = 1e-13);
        assert_eq!(squared_distance(&mu, &mu, &kp), 0.0);
    }

    #[test]
    fn invalid_atoms_rejected() {
        assert!(matches!(
            VarifoldAtom::new(1.0, Vec3::zeros(), Vec3::new(0.0, 0.0, 2.0), 0.0),
            Err(Error::NonUnitNormal(_))
        ));
        assert!(VarifoldAtom::new(-1.0, Vec3::zeros(), Vec3::z(), 0.0).is_err());
        assert!(KernelParams::new(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn gradient_vanishes_at_target() {
        let mesh = TriangleMesh::new(
            vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(1.0, 0.0, 0.1),
                Vec3::new(1.0, 1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.2),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let f = Signal::P1(p1_assemble(vec![0.1, -0.4, 0.9, 0.3], &mesh).unwrap());
        let target = DiscreteVarifold::from_fshape(&mesh, &f).unwrap();
        let g = signal_gradient(&mesh, &f, &target, &kp()).unwrap();
        assert!(g.iter().all(|v| v.abs() <= 1e-12));
    }
}
