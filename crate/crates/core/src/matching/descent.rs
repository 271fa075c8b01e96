use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::Signal;

use super::energy::{EnergyBreakdown, MatchProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DescentConfig {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub initial_step: f64,
    pub shrink: f64,
    pub grow: f64,
    pub armijo: f64,
    /// Stop once the step falls below this value.
    pub min_step: f64,
}

impl Default for DescentConfig {
    fn default() -> Self {
        DescentConfig {
            max_iters: 500,
            grad_tol: 1e-8,
            initial_step: 1.0,
            shrink: 0.5,
            grow: 1.3,
            armijo: 1e-4,
            min_step: 1e-20,
        }
    }
}

impl DescentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::BadParams(m));
        if !(self.grad_tol >= 0.0) {
            return bad(format!("descent.grad_tol must be nonnegative, got {}", self.grad_tol));
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad(format!("descent.initial_step must be positive, got {}", self.initial_step));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return bad(format!("descent.shrink must lie in (0, 1), got {}", self.shrink));
        }
        if !(self.grow >= 1.0 && self.grow.is_finite()) {
            return bad(format!("descent.grow must be at least 1, got {}", self.grow));
        }
        if !(self.armijo >= 0.0 && self.armijo < 1.0) {
            return bad(format!("descent.armijo must lie in [0, 1), got {}", self.armijo));
        }
        if !(self.min_step > 0.0) {
            return bad(format!("descent.min_step must be positive, got {}", self.min_step));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    StepUnderflow,
}

/// One line search trial. Record 0 is the starting point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub energy: EnergyBreakdown,
    pub grad_max: f64,
    pub step: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentTrace {
    pub records: Vec<IterationRecord>,
    pub signal: Signal,
    pub energy: EnergyBreakdown,
    pub termination: Termination,
}

impl DescentTrace {
    /// Energies of the starting point and of every accepted step.
    pub fn accepted_energies(&self) -> Vec<f64> {
        self.records.iter().filter(|r| r.accepted).map(|r| r.energy.total).collect()
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Backtracking gradient descent at fixed geometry, starting from the
/// problem's initial signal.
pub fn minimize(problem: &MatchProblem, config: &DescentConfig) -> Result<DescentTrace> {
    minimize_from(problem, problem.initial().clone(), config)
}

pub fn minimize_from(problem: &MatchProblem, start: Signal, config: &DescentConfig) -> Result<DescentTrace> {
    config.validate()?;
    let mut f = start;
    let (mut energy, mut grad) = problem.energy_and_gradient(&f)?;
    let mut grad_max = max_abs(&grad);
    let mut step = config.initial_step;
    let mut records = vec![IterationRecord {
        iteration: 0,
        energy,
        grad_max,
        step: 0.0,
        accepted: true,
    }];
    let mut iteration = 0;
    let termination = loop {
        if grad_max <= config.grad_tol {
            break Termination::GradientTolerance;
        }
        if iteration >= config.max_iters {
            break Termination::MaxIterations;
        }
        if step < config.min_step {
            break Termination::StepUnderflow;
        }
        iteration += 1;
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        let trial_values: Vec<f64> = f.values().iter().zip(&grad).map(|(x, g)| x - step * g).collect();
        let trial = problem.signal(trial_values)?;
        let trial_energy = problem.energy(&trial)?;
        let accepted = trial_energy.total <= energy.total - config.armijo * step * g2;
        if accepted {
            let (e, g) = problem.energy_and_gradient(&trial)?;
            f = trial;
            energy = e;
            grad = g;
            grad_max = max_abs(&grad);
        }
        records.push(IterationRecord {
            iteration,
            energy: if accepted { energy } else { trial_energy },
            grad_max,
            step,
            accepted,
        });
        step *= if accepted { config.grow } else { config.shrink };
    };
    Ok(DescentTrace {
        records,
        signal: f,
        energy,
        termination,
    })
}
