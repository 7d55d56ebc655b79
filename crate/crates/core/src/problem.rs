//! Problem definitions as TOML text.
//!
//! ```toml
//! name = "figure1"
//!
//! [domain]
//! lower = [0.0]
//! upper = [2.0]
//!
//! [map]
//! kind = "piecewise"
//!
//! [[map.branches]]
//! when = "x_1 <= 1"
//! lower = ["-1.5*x_1 + 1.5"]
//! upper = ["2"]
//!
//! [[map.branches]]
//! lower = ["0"]
//! upper = ["-1.5*x_1 + 3.5"]
//!
//! [payload]
//! kind = "objective"
//! expression = "piecewise(x_1 <= 1, abs(x_1 - 0.5), abs(x_1 - 1.5))"
//!
//! [solver]
//! points_per_axis = 2001
//! eps = 0.05
//! ```
//!
//! Map kinds are `whole_domain`, `identity`, `constant`, `moving_box` and
//! `piecewise`; payload kinds are `bifunction` (in `x_i` and `y_i`),
//! `objective` and `qvi_operator` (a list of vertices). Omitted sections take
//! their defaults: 201 points per axis, `eps = 1e-6`, `delta = 0`.

use serde::{Deserialize, Serialize};

use crate::bifunction::{Bifunction, CheckSettings, ObjectiveFunction, Provenance, QviOperator};
use crate::catalog::{KnownFacts, Payload, ProblemInstance, SolverDefaults};
use crate::error::{Error, Result};
use crate::expr::{format_rational, Condition, Expression, VarScope};
use crate::geometry::{CompactBox, Rational, ScalarKind};
use crate::setmap::{Branch, MapVariant, SetValuedMap};

pub const DEFAULT_POINTS: usize = 201;
pub const DEFAULT_EPS: f64 = 1e-6;
pub const DEFAULT_DELTA: f64 = 0.0;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    #[serde(default = "default_name")]
    name: String,
    #[serde(default = "default_scalar")]
    scalar: ScalarKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    domain: DomainSection,
    map: MapSection,
    payload: PayloadSection,
    #[serde(default)]
    solver: SolverSection,
    #[serde(default)]
    checks: CheckSettings,
    #[serde(default)]
    facts: KnownFacts,
}

fn default_name() -> String {
    "problem".into()
}

fn default_scalar() -> ScalarKind {
    ScalarKind::Real
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSection {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum MapSection {
    WholeDomain,
    Identity,
    Constant { lower: Vec<String>, upper: Vec<String> },
    MovingBox { lower: Vec<String>, upper: Vec<String> },
    Piecewise { branches: Vec<BranchSection> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    when: Option<String>,
    lower: Vec<String>,
    upper: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PayloadSection {
    Bifunction {
        expression: String,
    },
    Objective {
        expression: String,
        #[serde(default)]
        continuous: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lipschitz: Option<f64>,
    },
    #[serde(alias = "qvi-operator")]
    QviOperator {
        vertices: Vec<Vec<String>>,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum Points {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points_per_axis: Option<Points>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
}

/// Parses and validates a problem definition. Every grid point must have a
/// nonempty clipped image.
pub fn load_spec(text: &str) -> Result<ProblemInstance> {
    let spec: SpecFile = toml::from_str(text).map_err(|e| Error::Schema(e.message().to_string()))?;
    if spec.scalar == ScalarKind::Exact {
        return Err(Error::KindMismatch(
            "exact-scalar instances cannot be written as expressions; use the catalog".into(),
        ));
    }
    let domain = CompactBox::from_bounds(spec.domain.lower, spec.domain.upper)?;
    let dim = domain.dim();
    let map = build_map(&domain, spec.map)?;
    let payload = build_payload(&domain, spec.payload)?;
    let points_per_axis = match spec.solver.points_per_axis {
        None => vec![DEFAULT_POINTS; dim],
        Some(Points::Uniform(m)) => vec![m; dim],
        Some(Points::PerAxis(v)) => v,
    };
    let instance = ProblemInstance {
        name: spec.name,
        domain,
        map,
        payload,
        known_facts: spec.facts,
        seed: spec.seed,
        solver: SolverDefaults {
            points_per_axis,
            eps: spec.solver.eps.unwrap_or(DEFAULT_EPS),
            delta: spec.solver.delta.unwrap_or(DEFAULT_DELTA),
        },
        checks: spec.checks,
    };
    let cfg = instance.solver_config()?;
    instance.map.validate(&cfg.grid)?;
    Ok(instance)
}

pub fn load_spec_file(path: &std::path::Path) -> Result<ProblemInstance> {
    load_spec(&std::fs::read_to_string(path)?)
}

/// Renders an instance so that [`load_spec`] rebuilds an equal one. Fails for
/// maps and payloads given by closures.
pub fn to_spec_text(instance: &ProblemInstance) -> Result<String> {
    let dim = instance.dim();
    let spec = SpecFile {
        name: instance.name.clone(),
        scalar: ScalarKind::Real,
        seed: instance.seed,
        domain: DomainSection {
            lower: instance.domain.lower().coords().to_vec(),
            upper: instance.domain.upper().coords().to_vec(),
        },
        map: map_section(&instance.map)?,
        payload: payload_section(&instance.payload)?,
        solver: SolverSection {
            points_per_axis: Some(match instance.solver.points_per_axis.as_slice() {
                [first, rest @ ..] if rest.iter().all(|m| m == first) && dim > 0 => Points::Uniform(*first),
                all => Points::PerAxis(all.to_vec()),
            }),
            eps: Some(instance.solver.eps),
            delta: Some(instance.solver.delta),
        },
        checks: instance.checks.clone(),
        facts: instance.known_facts.clone(),
    };
    toml::to_string(&spec).map_err(|e| Error::Schema(e.to_string()))
}

fn expression(text: &str, scope: VarScope, field: &str) -> Result<Expression> {
    Expression::parse(text, scope).map_err(|e| in_field(e, field))
}

fn in_field(e: Error, field: &str) -> Error {
    match e {
        Error::Parse { position, message } => Error::Parse {
            position,
            message: format!("{message} (in {field})"),
        },
        other => other,
    }
}

fn expressions(texts: &[String], scope: VarScope, field: &str) -> Result<Vec<Expression>> {
    texts
        .iter()
        .enumerate()
        .map(|(i, t)| expression(t, scope, &format!("{field}[{i}]")))
        .collect()
}

fn constants(texts: &[String], dim: usize, field: &str) -> Result<Vec<Rational>> {
    let zero = vec![Rational::from_integer(0.into()); dim];
    expressions(texts, VarScope::x(dim), field)?
        .into_iter()
        .map(|e| {
            if e.is_constant() {
                Ok(e.eval_exact(&zero, &[]))
            } else {
                Err(Error::Schema(format!("{field}: '{}' is not a constant", e.source())))
            }
        })
        .collect()
}

fn build_map(domain: &CompactBox<f64>, section: MapSection) -> Result<SetValuedMap> {
    let dim = domain.dim();
    let scope = VarScope::x(dim);
    match section {
        MapSection::WholeDomain => SetValuedMap::whole_domain(domain),
        MapSection::Identity => SetValuedMap::identity(domain),
        MapSection::Constant { lower, upper } => SetValuedMap::new(
            domain,
            MapVariant::Constant {
                lower: constants(&lower, dim, "map.lower")?,
                upper: constants(&upper, dim, "map.upper")?,
            },
        ),
        MapSection::MovingBox { lower, upper } => SetValuedMap::new(
            domain,
            MapVariant::MovingBox {
                lower: expressions(&lower, scope, "map.lower")?,
                upper: expressions(&upper, scope, "map.upper")?,
            },
        ),
        MapSection::Piecewise { branches } => {
            let branches = branches
                .iter()
                .enumerate()
                .map(|(i, b)| {
                    let field = format!("map.branches[{i}]");
                    Ok(Branch {
                        when: b
                            .when
                            .as_deref()
                            .map(|t| Condition::parse(t, scope).map_err(|e| in_field(e, &field)))
                            .transpose()?,
                        lower: expressions(&b.lower, scope, &field)?,
                        upper: expressions(&b.upper, scope, &field)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            SetValuedMap::new(domain, MapVariant::PiecewiseMovingInterval { branches })
        }
    }
}

fn build_payload(domain: &CompactBox<f64>, section: PayloadSection) -> Result<Payload> {
    let dim = domain.dim();
    Ok(match section {
        PayloadSection::Bifunction { expression: text } => Payload::Bifunction(Bifunction::from_expression(
            domain,
            expression(&text, VarScope::xy(dim), "payload.expression")?,
        )?),
        PayloadSection::Objective {
            expression: text,
            continuous,
            lipschitz,
        } => {
            let h =
                ObjectiveFunction::from_expression(domain, expression(&text, VarScope::x(dim), "payload.expression")?)?
                    .with_continuity_claim(continuous);
            Payload::Objective(match lipschitz {
                Some(l) => h.with_lipschitz(l),
                None => h,
            })
        }
        PayloadSection::QviOperator { vertices, scale } => {
            let vertices = vertices
                .iter()
                .enumerate()
                .map(|(i, v)| expressions(v, VarScope::x(dim), &format!("payload.vertices[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            let t = QviOperator::from_expressions(domain, vertices)?;
            Payload::Qvi(if scale == 1.0 { t } else { t.scaled(scale)? })
        }
    })
}

fn sources(exprs: &[Expression]) -> Vec<String> {
    exprs.iter().map(|e| e.source().to_string()).collect()
}

fn map_section(map: &SetValuedMap) -> Result<MapSection> {
    Ok(match map.variant() {
        MapVariant::Constant { lower, upper } => MapSection::Constant {
            lower: lower.iter().map(format_rational).collect(),
            upper: upper.iter().map(format_rational).collect(),
        },
        MapVariant::MovingBox { lower, upper } => MapSection::MovingBox {
            lower: sources(lower),
            upper: sources(upper),
        },
        MapVariant::PiecewiseMovingInterval { branches } => MapSection::Piecewise {
            branches: branches
                .iter()
                .map(|b| BranchSection {
                    when: b.when.as_ref().map(|c| c.source().to_string()),
                    lower: sources(&b.lower),
                    upper: sources(&b.upper),
                })
                .collect(),
        },
        MapVariant::Predicate { label, .. } => {
            return Err(Error::Schema(format!("predicate map '{label}' has no text form")))
        }
    })
}

fn payload_section(payload: &Payload) -> Result<PayloadSection> {
    let opaque = |label: &str| Error::Schema(format!("'{label}' has no text form"));
    Ok(match payload {
        Payload::Bifunction(f) => match (f.provenance(), f.expression()) {
            (Provenance::Direct, Some(e)) => PayloadSection::Bifunction {
                expression: e.source().to_string(),
            },
            _ => return Err(opaque(f.label())),
        },
        Payload::Objective(h) => PayloadSection::Objective {
            expression: h.expression().ok_or_else(|| opaque(h.label()))?.source().to_string(),
            continuous: h.continuity_claim(),
            lipschitz: h.lipschitz(),
        },
        Payload::Qvi(t) => PayloadSection::QviOperator {
            vertices: t
                .expressions()
                .ok_or_else(|| opaque(t.label()))?
                .iter()
                .map(|v| sources(v))
                .collect(),
            scale: *t.scale(),
        },
    })
}
