//! Fixtures shared by the benchmarks.

use qep_core::catalog::{figure1_instance, quasiconvex_variant_instance, random_instance};
use qep_core::solver::InnerStrategy;
use qep_core::{Grid, ObjectiveFunction, Payload, ProblemInstance, SolverConfig};

pub fn figure1() -> ProblemInstance {
    figure1_instance()
}

pub fn quadratic() -> ProblemInstance {
    quasiconvex_variant_instance()
}

pub fn random(seed: u64, dim: usize) -> ProblemInstance {
    random_instance(seed, dim).expect("generator succeeds")
}

/// The instance's own tolerances on an `m`-point grid.
pub fn config(inst: &ProblemInstance, m: usize, inner: InnerStrategy) -> SolverConfig {
    let grid = Grid::uniform(&inst.domain, m).expect("grid");
    SolverConfig::new(grid, inst.solver.eps, inst.solver.delta)
        .expect("valid tolerances")
        .with_inner(inner)
}

pub fn objective(inst: &ProblemInstance) -> &ObjectiveFunction {
    match &inst.payload {
        Payload::Objective(h) => h,
        _ => panic!("objective payload expected"),
    }
}
