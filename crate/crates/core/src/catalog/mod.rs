//! Built-in instances with recorded facts, and seeded generators of
//! instances that satisfy the existence hypotheses by construction.

mod generators;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bifunction::{
    make_opt_bifunction, make_qvi_bifunction, Bifunction, CheckSettings, ObjectiveFunction, QviOperator,
};
use crate::error::{Error, Result};
use crate::expr::{Condition, Expression, VarScope};
use crate::geometry::{CompactBox, ExactScalar, Grid, Scalar, ScalarKind};
use crate::setmap::{Branch, MapVariant, SetValuedMap};
use crate::solver::{solve_ep, solve_qep, solve_qopt, ProblemKind, SolveReport, SolverConfig};
use crate::verdict::Verdict;

pub use generators::{qvi_instance, qvi_oracle, random_instance};

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Payload<S: Scalar = f64> {
    Bifunction(Bifunction<S>),
    Objective(ObjectiveFunction<S>),
    Qvi(QviOperator<S>),
}

impl<S: Scalar> Payload<S> {
    /// The bifunction the QEP solver and the checkers work with.
    pub fn bifunction(&self) -> Result<Bifunction<S>> {
        match self {
            Payload::Bifunction(f) => Ok(f.clone()),
            Payload::Objective(h) => Ok(make_opt_bifunction(h)),
            Payload::Qvi(t) => make_qvi_bifunction(t),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Payload::Bifunction(_) => "bifunction",
            Payload::Objective(_) => "objective",
            Payload::Qvi(_) => "qvi_operator",
        }
    }
}

/// Facts about an instance that the acceptance suite checks.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnownFacts {
    /// The exact grid solution set, lexicographic.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solutions: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solutions_empty: Option<bool>,
    /// Box containing exactly the fixed points of `K`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_points_lower: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed_points_upper: Option<Vec<f64>>,
    /// Smallest QOpt gap over the fixed points of `K`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap_floor: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    /// Expected verdicts keyed by condition or probe name.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub verdicts: BTreeMap<String, Verdict>,
}

/// Grid size and tolerances used when the caller gives none.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverDefaults {
    pub points_per_axis: Vec<usize>,
    pub eps: f64,
    pub delta: f64,
}

impl SolverDefaults {
    pub fn uniform(dim: usize, points: usize, eps: f64) -> Self {
        SolverDefaults {
            points_per_axis: vec![points; dim],
            eps,
            delta: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemInstance<S: Scalar = f64> {
    pub name: String,
    pub domain: CompactBox<S>,
    pub map: SetValuedMap,
    pub payload: Payload<S>,
    pub known_facts: KnownFacts,
    pub seed: Option<u64>,
    pub solver: SolverDefaults,
    pub checks: CheckSettings,
}

impl<S: Scalar> ProblemInstance<S> {
    pub fn scalar_kind(&self) -> ScalarKind {
        S::KIND
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(&self.domain, self.solver.points_per_axis.clone())
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        SolverConfig::new(self.grid()?, self.solver.eps, self.solver.delta)
    }

    pub fn bifunction(&self) -> Result<Bifunction<S>> {
        self.payload.bifunction()
    }

    /// Runs the solver matching [`ProblemInstance::problem_kind`].
    pub fn solve(&self, cfg: &SolverConfig) -> Result<SolveReport> {
        match &self.payload {
            Payload::Objective(h) => solve_qopt(h, &self.map, cfg),
            Payload::Bifunction(f) if self.map.is_whole_domain() => solve_ep(f, &self.domain, cfg),
            payload => solve_qep(&payload.bifunction()?, &self.map, cfg),
        }
    }

    /// The problem `solve` runs for this payload.
    pub fn problem_kind(&self) -> ProblemKind {
        match &self.payload {
            Payload::Objective(_) => ProblemKind::Qopt,
            Payload::Qvi(_) => ProblemKind::Qvi,
            Payload::Bifunction(_) if self.map.is_whole_domain() => ProblemKind::Ep,
            Payload::Bifunction(_) => ProblemKind::Qep,
        }
    }
}

/// A catalog instance of either scalar kind.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyInstance {
    Real(ProblemInstance<f64>),
    Exact(ProblemInstance<ExactScalar>),
}

impl AnyInstance {
    pub fn name(&self) -> &str {
        match self {
            AnyInstance::Real(p) => &p.name,
            AnyInstance::Exact(p) => &p.name,
        }
    }

    pub fn known_facts(&self) -> &KnownFacts {
        match self {
            AnyInstance::Real(p) => &p.known_facts,
            AnyInstance::Exact(p) => &p.known_facts,
        }
    }
}

pub struct CatalogEntry {
    pub name: &'static str,
    pub summary: &'static str,
    pub seeded: bool,
}

pub const ENTRIES: &[CatalogEntry] = &[
    CatalogEntry {
        name: "figure1",
        summary: "piecewise h and K on [0,2]; the QOpt has no solution",
        seeded: false,
    },
    CatalogEntry {
        name: "remark",
        summary: "f(x,y) = 1 for rational y, 0 otherwise, on [0,1] (exact scalars)",
        seeded: false,
    },
    CatalogEntry {
        name: "quasiconvex-variant",
        summary: "h = (x-1)^2 with the figure1 map; unique solution x = 1",
        seeded: false,
    },
    CatalogEntry {
        name: "random-1d",
        summary: "max-of-affine h with a contracting moving box, dimension 1",
        seeded: true,
    },
    CatalogEntry {
        name: "random-2d",
        summary: "max-of-affine h with a contracting moving box, dimension 2",
        seeded: true,
    },
    CatalogEntry {
        name: "qvi",
        summary: "finite-vertex operator T with a moving box K",
        seeded: true,
    },
];

/// Looks up a catalog instance. Seeded entries use `seed`, default 0.
pub fn lookup(name: &str, seed: Option<u64>) -> Result<AnyInstance> {
    let seed = seed.unwrap_or(0);
    Ok(match name {
        "figure1" => AnyInstance::Real(figure1_instance()),
        "remark" => AnyInstance::Exact(remark_bifunction_instance()),
        "quasiconvex-variant" => AnyInstance::Real(quasiconvex_variant_instance()),
        "random-1d" => AnyInstance::Real(random_instance(seed, 1)?),
        "random-2d" => AnyInstance::Real(random_instance(seed, 2)?),
        "qvi" => AnyInstance::Real(qvi_instance(seed)?),
        _ => {
            let known: Vec<&str> = ENTRIES.iter().map(|e| e.name).collect();
            return Err(Error::argument(format!(
                "unknown catalog instance '{name}' (known: {})",
                known.join(", ")
            )));
        }
    })
}

fn interval(lo: f64, hi: f64) -> CompactBox<f64> {
    CompactBox::from_bounds(vec![lo], vec![hi]).expect("valid interval")
}

fn parse_x(text: &str) -> Expression {
    Expression::parse(text, VarScope::x(1)).expect("catalog expression parses")
}

/// The map of the no-solution example: `[−3x/2 + 3/2, 2]` on `[0, 1]` and
/// `[0, −3x/2 + 7/2]` on `(1, 2]`.
pub fn figure1_map() -> SetValuedMap {
    let when = Condition::parse("x_1 <= 1", VarScope::x(1)).expect("condition parses");
    SetValuedMap::new(
        &interval(0.0, 2.0),
        MapVariant::PiecewiseMovingInterval {
            branches: vec![
                Branch {
                    when: Some(when),
                    lower: vec![parse_x("-1.5*x_1 + 1.5")],
                    upper: vec![parse_x("2")],
                },
                Branch {
                    when: None,
                    lower: vec![parse_x("0")],
                    upper: vec![parse_x("-1.5*x_1 + 3.5")],
                },
            ],
        },
    )
    .expect("figure1 map is valid")
}

fn objective(text: &str, lipschitz: f64) -> ObjectiveFunction {
    ObjectiveFunction::from_expression(&interval(0.0, 2.0), parse_x(text))
        .expect("catalog objective is valid")
        .with_continuity_claim(true)
        .with_lipschitz(lipschitz)
}

fn verdicts(pairs: &[(&str, Verdict)]) -> BTreeMap<String, Verdict> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// `h = |x − 1/2|` on `[0, 1]`, `|x − 3/2|` on `(1, 2]`, with [`figure1_map`].
/// The fixed points of `K` form `[3/5, 7/5]` and the smallest gap there is
/// `1/10`, so the QOpt has no solution for `ε < 1/10`.
pub fn figure1_instance() -> ProblemInstance {
    let domain = interval(0.0, 2.0);
    ProblemInstance {
        name: "figure1".into(),
        map: figure1_map(),
        payload: Payload::Objective(objective("piecewise(x_1 <= 1, abs(x_1 - 0.5), abs(x_1 - 1.5))", 1.0)),
        known_facts: KnownFacts {
            solutions_empty: Some(true),
            fixed_points_lower: Some(vec![0.6]),
            fixed_points_upper: Some(vec![1.4]),
            gap_floor: Some(0.1),
            lipschitz: Some(1.0),
            verdicts: verdicts(&[("ii", Verdict::Fail)]),
            ..KnownFacts::default()
        },
        seed: None,
        solver: SolverDefaults::uniform(1, 2001, 0.05),
        checks: CheckSettings::default(),
        domain,
    }
}

/// `h = (x − 1)²` with [`figure1_map`]; `x = 1` is the only solution.
pub fn quasiconvex_variant_instance() -> ProblemInstance {
    let all_pass: Vec<(&str, Verdict)> = [
        "ii",
        "iii",
        "iv",
        "qcvx_second",
        "qccv_first",
        "diagonal_zero",
        "closed_graph",
        "lsc",
        "convex_values",
    ]
    .into_iter()
    .map(|k| (k, Verdict::NoViolationFound))
    .collect();
    ProblemInstance {
        name: "quasiconvex-variant".into(),
        domain: interval(0.0, 2.0),
        map: figure1_map(),
        payload: Payload::Objective(objective("(x_1 - 1)^2", 2.0)),
        known_facts: KnownFacts {
            solutions: Some(vec![vec![1.0]]),
            solutions_empty: Some(false),
            fixed_points_lower: Some(vec![0.6]),
            fixed_points_upper: Some(vec![1.4]),
            gap_floor: Some(0.0),
            lipschitz: Some(2.0),
            verdicts: verdicts(&all_pass),
        },
        seed: None,
        solver: SolverDefaults::uniform(1, 2001, 1e-6),
        checks: CheckSettings::default(),
    }
}

/// `f(x, y) = 1` for rational `y` and `0` otherwise, on `[0, 1]` with
/// `K ≡ C`. Condition ii holds, quasiconvexity in `y` and `f(x, x) = 0` fail.
pub fn remark_bifunction_instance() -> ProblemInstance<ExactScalar> {
    let domain =
        CompactBox::from_bounds(vec![ExactScalar::from(0)], vec![ExactScalar::from(1)]).expect("unit interval");
    let f = Bifunction::new(
        &domain,
        "1 if y is rational, else 0",
        |_x: &[ExactScalar], y: &[ExactScalar]| {
            if y.iter().all(ExactScalar::is_rational) {
                ExactScalar::one()
            } else {
                ExactScalar::zero()
            }
        },
    );
    ProblemInstance {
        name: "remark".into(),
        map: SetValuedMap::whole_domain(&domain).expect("unit interval"),
        payload: Payload::Bifunction(f),
        known_facts: KnownFacts {
            verdicts: verdicts(&[
                ("ii", Verdict::NoViolationFound),
                ("qcvx_second", Verdict::Fail),
                ("diagonal_zero", Verdict::Fail),
            ]),
            ..KnownFacts::default()
        },
        seed: None,
        solver: SolverDefaults {
            points_per_axis: vec![21],
            eps: 0.0,
            delta: 0.0,
        },
        checks: CheckSettings::default(),
        domain,
    }
}

#[cfg(test)]
mod tests;
