use serde::Serialize;

use crate::error::{Error, Result};
use crate::surface::{
    continuous_energy_oracle, discretize_signal, lift_signal, sample_triangulation, AnalyticSurface,
    LiftedSignal, OracleOptions, OracleTarget, ScalarField, SurfaceQuadrature,
};

use super::descent::{minimize, DescentConfig, Termination};
use super::energy::{EnergyModel, MatchProblem};

/// Inputs of a refinement study: a source surface carrying `f₀`, a target
/// surface carrying `g`, and a decreasing list of mesh steps.
pub struct GammaSetup<'a> {
    pub source: &'a AnalyticSurface,
    pub source_signal: &'a dyn ScalarField,
    pub target: &'a AnalyticSurface,
    pub target_signal: &'a dyn ScalarField,
    pub model: EnergyModel,
    pub descent: DescentConfig,
    pub levels: Vec<f64>,
    /// Composite rule on the source used to compare lifted minimizers.
    pub lift_cells: usize,
    pub lift_order: usize,
    pub oracle: OracleOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaRow {
    pub h: f64,
    pub triangles: usize,
    pub min_energy: f64,
    /// `∫_X |lift(f*_h) - lift(f*_{h_prev})|`; NaN on the first level.
    pub l1_gap: f64,
    /// `|E_h(f₀_h) - E(f₀)|`, the discrete energy of the discretized `f₀`
    /// against the continuous energy of `f₀`.
    pub oracle_gap: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub lift_missed_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GammaTable {
    pub continuous_energy: f64,
    pub rows: Vec<GammaRow>,
}

impl GammaTable {
    /// `|min E_h - min E_{h'}|` between consecutive levels.
    pub fn energy_gaps(&self) -> Vec<f64> {
        self.rows.windows(2).map(|w| (w[0].min_energy - w[1].min_energy).abs()).collect()
    }

    pub fn l1_gaps(&self) -> Vec<f64> {
        self.rows.iter().skip(1).map(|r| r.l1_gap).collect()
    }

    pub fn csv_header() -> [&'static str; 4] {
        ["h", "minE", "L1_gap", "oracle_gap"]
    }

    pub fn csv_rows(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| vec![r.h, r.min_energy, r.l1_gap, r.oracle_gap])
            .collect()
    }
}

/// Discretizes, minimizes and lifts at every level.
pub fn gamma_experiment(setup: &GammaSetup) -> Result<GammaTable> {
    if setup.levels.len() < 2 {
        return Err(Error::BadParams("gamma.levels needs at least two steps".into()));
    }
    if setup.levels.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::BadParams("gamma.levels must be strictly decreasing".into()));
    }
    let element = setup.model.element();
    let continuous = continuous_energy_oracle(
        setup.source,
        setup.source_signal,
        OracleTarget::Analytic {
            surface: setup.target,
            signal: setup.target_signal,
        },
        &setup.model,
        &setup.oracle,
    )?;
    let quadrature = SurfaceQuadrature::composite(setup.source, setup.lift_cells, setup.lift_order);
    let mut rows = Vec::with_capacity(setup.levels.len());
    let mut previous: Option<LiftedSignal> = None;
    for &h in &setup.levels {
        let source_mesh = sample_triangulation(setup.source, h)?;
        let target_mesh = sample_triangulation(setup.target, h)?;
        let g = discretize_signal(setup.target, setup.target_signal, &target_mesh, element)?;
        let f0 = discretize_signal(setup.source, setup.source_signal, &source_mesh, element)?;
        let problem = MatchProblem::from_fshapes(source_mesh, &target_mesh, &g, setup.model, Some(f0))?;
        let trace = minimize(&problem, &setup.descent)?;
        let oracle_gap = (trace.records[0].energy.total - continuous.total).abs();
        let lifted = lift_signal(&trace.signal, problem.mesh(), setup.source, &quadrature)?;
        let l1_gap = previous.as_ref().map_or(f64::NAN, |p| lifted.l1_distance(p, &quadrature));
        rows.push(GammaRow {
            h,
            triangles: problem.mesh().num_triangles(),
            min_energy: trace.energy.total,
            l1_gap,
            oracle_gap,
            iterations: trace.records.len() - 1,
            termination: trace.termination,
            lift_missed_measure: lifted.missed_measure,
        });
        previous = Some(lifted);
    }
    Ok(GammaTable {
        continuous_energy: continuous.total,
        rows,
    })
}
