//! Discrete matching energies, their gradients and the descent driver.

mod descent;
mod diagnostics;
mod energy;
mod experiment;

pub use descent::{minimize, minimize_from, DescentConfig, DescentTrace, IterationRecord, Termination};
pub use diagnostics::{bound_ratio_explodes, minimum_bound_check, oscillation_report, BoundReport, OscillationReport};
pub use energy::{EnergyBreakdown, EnergyModel, MatchProblem, Penalty};
pub use experiment::{gamma_experiment, GammaRow, GammaSetup, GammaTable};
