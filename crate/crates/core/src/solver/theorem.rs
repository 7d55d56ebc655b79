//! Sampled hypothesis checks followed by the QEP solve.

use serde::{Deserialize, Serialize};

use super::{solve_qep, SolveReport, SolverConfig};
use crate::bifunction::{run_condition, ConditionId, ConditionReport};
use crate::catalog::ProblemInstance;
use crate::error::Result;
use crate::geometry::Scalar;
use crate::setmap::{check_closed_graph, check_convex_values, check_lsc, ProbeConfig, TopologyProbeReport};
use crate::verdict::Verdict;

/// Verdicts for the map probes and conditions ii to iv, and the solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct TheoremReport<S: Scalar = f64> {
    pub instance: String,
    pub closed_graph: TopologyProbeReport,
    pub lsc: TopologyProbeReport,
    pub convex_values: TopologyProbeReport,
    pub conditions: Vec<ConditionReport<S>>,
    pub solve: SolveReport,
    /// Every check passed and yet no grid point solves the problem at the
    /// given ε. Either a discretization artifact or a candidate
    /// counterexample; never read as a violation of the theorem.
    pub anomaly: bool,
}

impl<S: Scalar> TheoremReport<S> {
    pub fn all_checks_pass(&self) -> bool {
        [&self.closed_graph, &self.lsc, &self.convex_values]
            .iter()
            .all(|p| p.verdict == Verdict::NoViolationFound)
            && self.conditions.iter().all(|c| c.verdict == Verdict::NoViolationFound)
    }

    /// `(name, verdict)` for every check, probes first.
    pub fn verdicts(&self) -> Vec<(&'static str, Verdict)> {
        let mut out = vec![
            ("closed_graph", self.closed_graph.verdict),
            ("lsc", self.lsc.verdict),
            ("convex_values", self.convex_values.verdict),
        ];
        out.extend(self.conditions.iter().map(|c| (c.condition_id.name(), c.verdict)));
        out
    }
}

/// Runs the closed-graph, lower-semicontinuity and convex-value probes on
/// `K`, conditions ii, iii and iv on `f`, then the QEP solve on `cfg.grid`.
pub fn verify_theorem_instance<S: Scalar>(
    instance: &ProblemInstance<S>,
    cfg: &SolverConfig,
) -> Result<TheoremReport<S>> {
    let f = instance.bifunction()?;
    let grid = &cfg.grid;
    let settings = &instance.checks;
    let probe = ProbeConfig {
        budget: settings.probe_budget,
        ..ProbeConfig::for_grid(grid)
    };
    let closed_graph = check_closed_graph(&instance.map, grid, &probe)?;
    let lsc = check_lsc(&instance.map, grid, &probe)?;
    let convex_values = check_convex_values(&instance.map, grid, settings.segment_samples, &probe)?;
    let conditions = [ConditionId::Ii, ConditionId::Iii, ConditionId::Iv]
        .into_iter()
        .map(|id| run_condition(id, &f, grid, settings))
        .collect::<Result<Vec<_>>>()?;
    let solve = solve_qep(&f, &instance.map, cfg)?;
    let mut report = TheoremReport {
        instance: instance.name.clone(),
        closed_graph,
        lsc,
        convex_values,
        conditions,
        solve,
        anomaly: false,
    };
    report.anomaly = report.all_checks_pass() && report.solve.solution_count() == 0;
    Ok(report)
}
