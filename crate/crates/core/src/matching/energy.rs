use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{self, derivatives, Element, Signal};
use crate::mesh::TriangleMesh;
use crate::varifold::{self, DiscreteVarifold, KernelParams};

/// Signal penalty of the energy. Every variant is completed by
/// `γ_W/2 · ‖μ̂(X, f) - ν̂‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Penalty {
    /// `γ_f/2 Σ|T| f²` on P0 signals.
    L2 { gamma_f: f64, gamma_w: f64 },
    /// `α ∫f² + β Σ|T| ‖∇f‖²` on P1 signals.
    H1 { alpha: f64, beta: f64, gamma_w: f64 },
    /// `α ∫sqrt(f² + ε²) + β Σ|T| sqrt(‖∇f‖² + ε²)` on P1 signals.
    Bv {
        alpha: f64,
        beta: f64,
        gamma_w: f64,
        epsilon: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub penalty: Penalty,
    pub kernel: KernelParams,
}

impl EnergyModel {
    pub fn new(penalty: Penalty, kernel: KernelParams) -> Result<Self> {
        let model = EnergyModel { penalty, kernel };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        let weights: &[(&str, f64)] = match &self.penalty {
            Penalty::L2 { gamma_f, gamma_w } => &[("gamma_f", *gamma_f), ("gamma_w", *gamma_w)],
            Penalty::H1 { alpha, beta, gamma_w } => &[("alpha", *alpha), ("beta", *beta), ("gamma_w", *gamma_w)],
            Penalty::Bv {
                alpha,
                beta,
                gamma_w,
                epsilon,
            } => {
                if *epsilon == 0.0 {
                    return Err(Error::NonsmoothEnergy);
                }
                if !(*epsilon > 0.0 && epsilon.is_finite()) {
                    return Err(Error::BadParams(format!("model.epsilon must be positive, got {epsilon}")));
                }
                &[("alpha", *alpha), ("beta", *beta), ("gamma_w", *gamma_w)]
            }
        };
        for (name, w) in weights {
            if !(*w >= 0.0 && w.is_finite()) {
                return Err(Error::BadParams(format!("model.{name} must be nonnegative, got {w}")));
            }
        }
        Ok(())
    }

    /// P0 for the L² model, P1 otherwise.
    pub fn element(&self) -> Element {
        match self.penalty {
            Penalty::L2 { .. } => Element::P0,
            Penalty::H1 { .. } | Penalty::Bv { .. } => Element::P1,
        }
    }

    pub fn gamma_w(&self) -> f64 {
        match self.penalty {
            Penalty::L2 { gamma_w, .. } | Penalty::H1 { gamma_w, .. } | Penalty::Bv { gamma_w, .. } => gamma_w,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.penalty {
            Penalty::L2 { .. } => "l2",
            Penalty::H1 { .. } => "h1",
            Penalty::Bv { .. } => "bv",
        }
    }
}

/// Terms of the energy. `signal_penalty` is the zeroth-order part, the
/// gradient penalty is zero for the L² model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub signal_penalty: f64,
    pub gradient_penalty: f64,
    pub attachment: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(signal_penalty: f64, gradient_penalty: f64, attachment: f64) -> Self {
        EnergyBreakdown {
            signal_penalty,
            gradient_penalty,
            attachment,
            total: signal_penalty + gradient_penalty + attachment,
        }
    }

    pub fn penalty(&self) -> f64 {
        self.signal_penalty + self.gradient_penalty
    }
}

/// Matching of a signal on a fixed source mesh against a target
/// varifold. Immutable once built.
#[derive(Debug, Clone)]
pub struct MatchProblem {
    mesh: TriangleMesh,
    model: EnergyModel,
    target: DiscreteVarifold,
    target_self: f64,
    initial: Signal,
    geometry: DiscreteVarifold,
}

impl MatchProblem {
    /// The initial signal defaults to zero.
    pub fn new(
        mesh: TriangleMesh,
        target: DiscreteVarifold,
        model: EnergyModel,
        initial: Option<Signal>,
    ) -> Result<Self> {
        model.validate()?;
        let element = model.element();
        let initial = match initial {
            Some(s) if s.element() != element => {
                return Err(Error::MeshMismatch(format!(
                    "{} model needs a {:?} signal, got {:?}",
                    model.name(),
                    element,
                    s.element()
                )))
            }
            Some(s) => {
                s.check(&mesh)?;
                s
            }
            None => Signal::zeros(element, &mesh),
        };
        let geometry = DiscreteVarifold::from_p0(&mesh, &fem::SignalP0::zeros(&mesh))?;
        if let Penalty::H1 { .. } | Penalty::Bv { .. } = model.penalty {
            mesh.geometry()?;
        }
        let target_self = varifold::inner_product(&target, &target, &model.kernel);
        Ok(MatchProblem {
            mesh,
            model,
            target,
            target_self,
            initial,
            geometry,
        })
    }

    /// Target varifold built from a target fshape.
    pub fn from_fshapes(
        mesh: TriangleMesh,
        target_mesh: &TriangleMesh,
        target_signal: &Signal,
        model: EnergyModel,
        initial: Option<Signal>,
    ) -> Result<Self> {
        let target = DiscreteVarifold::from_fshape(target_mesh, target_signal)?;
        Self::new(mesh, target, model, initial)
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn model(&self) -> &EnergyModel {
        &self.model
    }

    pub fn target(&self) -> &DiscreteVarifold {
        &self.target
    }

    pub fn target_self(&self) -> f64 {
        self.target_self
    }

    pub fn initial(&self) -> &Signal {
        &self.initial
    }

    pub fn element(&self) -> Element {
        self.model.element()
    }

    pub fn signal(&self, values: Vec<f64>) -> Result<Signal> {
        Signal::new(self.element(), &self.mesh, values)
    }

    fn check(&self, f: &Signal) -> Result<()> {
        if f.element() != self.element() {
            return Err(Error::MeshMismatch(format!(
                "{} model needs a {:?} signal",
                self.model.name(),
                self.element()
            )));
        }
        f.check(&self.mesh)
    }

    fn source_varifold(&self, f: &Signal) -> Result<DiscreteVarifold> {
        let atoms = f.to_p0(&self.mesh)?;
        self.geometry.with_signals(atoms.values())
    }

    fn penalties(&self, f: &Signal) -> Result<(f64, f64)> {
        let mesh = &self.mesh;
        Ok(match (self.model.penalty, f) {
            (Penalty::L2 { gamma_f, .. }, Signal::P0(s)) => (0.5 * gamma_f * fem::lp_norm_p0(mesh, s, 2.0)?, 0.0),
            (Penalty::H1 { alpha, beta, .. }, Signal::P1(s)) => (
                alpha * fem::newton_cotes_lp(mesh, s, 2)?,
                beta * fem::h1_seminorm(mesh, s)?,
            ),
            (
                Penalty::Bv {
                    alpha, beta, epsilon, ..
                },
                Signal::P1(s),
            ) => (
                alpha * fem::l1_smoothed(mesh, f, epsilon)?,
                beta * fem::total_variation(mesh, s, epsilon)?,
            ),
            _ => unreachable!("element checked by caller"),
        })
    }

    pub fn energy(&self, f: &Signal) -> Result<EnergyBreakdown> {
        self.check(f)?;
        let (p0, p1) = self.penalties(f)?;
        let gamma_w = self.model.gamma_w();
        let attachment = if gamma_w == 0.0 {
            0.0
        } else {
            let mu = self.source_varifold(f)?;
            0.5 * gamma_w * varifold::distance_to_target(&mu, &self.target, self.target_self, &self.model.kernel)
        };
        Ok(EnergyBreakdown::new(p0, p1, attachment))
    }

    pub fn energy_gradient(&self, f: &Signal) -> Result<Vec<f64>> {
        self.energy_and_gradient(f).map(|(_, g)| g)
    }

    pub fn energy_and_gradient(&self, f: &Signal) -> Result<(EnergyBreakdown, Vec<f64>)> {
        self.check(f)?;
        let mesh = &self.mesh;
        let values = f.values();
        let mut grad = vec![0.0; values.len()];
        match self.model.penalty {
            Penalty::L2 { gamma_f, .. } => derivatives::lp0_squared(mesh, values, 0.5 * gamma_f, &mut grad),
            Penalty::H1 { alpha, beta, .. } => {
                derivatives::newton_cotes_l2(mesh, values, alpha, &mut grad);
                derivatives::h1_seminorm(mesh, values, beta, &mut grad)?;
            }
            Penalty::Bv {
                alpha, beta, epsilon, ..
            } => {
                derivatives::l1_smoothed(mesh, Element::P1, values, epsilon, alpha, &mut grad);
                derivatives::total_variation(mesh, values, epsilon, beta, &mut grad)?;
            }
        }
        let (p0, p1) = self.penalties(f)?;
        let gamma_w = self.model.gamma_w();
        let attachment = if gamma_w == 0.0 {
            0.0
        } else {
            let mu = self.source_varifold(f)?;
            let dg = varifold::distance_with_gradient(&mu, &self.target, self.target_self, &self.model.kernel);
            let dofs = varifold::atoms_to_dofs(mesh, self.element(), &dg.atom_gradient);
            for (g, d) in grad.iter_mut().zip(dofs) {
                *g += 0.5 * gamma_w * d;
            }
            0.5 * gamma_w * dg.squared_distance
        };
        Ok((EnergyBreakdown::new(p0, p1, attachment), grad))
    }
}
