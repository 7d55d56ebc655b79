//! Bifunctions `f: C × C → R`, objectives `h: C → R` and finite-vertex
//! operators `T`, together with the adapters `f^h(x, y) = h(y) − h(x)` and
//! `f_T(x, y) = max_{x* ∈ T(x)} ⟨x*, y − x⟩`.

mod checks;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expression, VarScope};
use crate::geometry::{CompactBox, Point, Rational, Scalar, ScalarKind};

pub use checks::{
    check_condition_ii, check_condition_iii, check_condition_iv, check_diagonal_zero, check_quasiconcave_first,
    check_quasiconvex_second, run_condition, CheckSettings, ConditionId, ConditionReport, ConditionWitness,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Given directly, as an expression or a closure.
    Direct,
    QviAdapter,
    OptAdapter,
}

pub type Evaluator<S> = dyn Fn(&[S], &[S]) -> S + Send + Sync;
pub type ObjectiveEvaluator<S> = dyn Fn(&[S]) -> S + Send + Sync;
pub type ExactObjective = dyn Fn(&[Rational]) -> Rational + Send + Sync;
pub type VertexMap<S> = dyn Fn(&[S]) -> Vec<Vec<S>> + Send + Sync;

fn check_point<S: Scalar>(domain: &CompactBox<S>, p: &Point<S>, name: &str) -> Result<()> {
    if !domain.contains(p)? {
        return Err(Error::argument(format!("{name} = {p} lies outside the domain")));
    }
    Ok(())
}

fn check_scope(expr: &Expression, dim: usize, allow_y: bool) -> Result<()> {
    let scope = expr.scope();
    if scope.dim != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: scope.dim,
        });
    }
    if !allow_y && expr.uses_y() {
        return Err(Error::instance(format!("'{}' may only depend on x", expr.source())));
    }
    Ok(())
}

/// A real-valued function `h` on `C`.
#[derive(Clone)]
pub struct ObjectiveFunction<S: Scalar = f64> {
    domain: CompactBox<S>,
    label: String,
    expression: Option<Expression>,
    evaluator: Arc<ObjectiveEvaluator<S>>,
    exact: Option<Arc<ExactObjective>>,
    continuity_claim: bool,
    lipschitz: Option<f64>,
}

impl<S: Scalar> ObjectiveFunction<S> {
    pub fn new(
        domain: &CompactBox<S>,
        label: impl Into<String>,
        evaluator: impl Fn(&[S]) -> S + Send + Sync + 'static,
    ) -> Self {
        ObjectiveFunction {
            domain: domain.clone(),
            label: label.into(),
            expression: None,
            evaluator: Arc::new(evaluator),
            exact: None,
            continuity_claim: false,
            lipschitz: None,
        }
    }

    /// Supplies an exact rational evaluator used on grid points.
    pub fn with_exact(mut self, exact: impl Fn(&[Rational]) -> Rational + Send + Sync + 'static) -> Self {
        self.exact = Some(Arc::new(exact));
        self
    }

    pub fn with_continuity_claim(mut self, continuous: bool) -> Self {
        self.continuity_claim = continuous;
        self
    }

    pub fn with_lipschitz(mut self, bound: f64) -> Self {
        self.lipschitz = Some(bound);
        self
    }

    pub fn domain(&self) -> &CompactBox<S> {
        &self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn expression(&self) -> Option<&Expression> {
        self.expression.as_ref()
    }

    pub fn continuity_claim(&self) -> bool {
        self.continuity_claim
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn eval(&self, x: &Point<S>) -> Result<S> {
        check_point(&self.domain, x, "x")?;
        Ok(self.eval_unchecked(x.coords()))
    }

    pub fn eval_unchecked(&self, x: &[S]) -> S {
        (self.evaluator)(x)
    }

    /// Exact value at a rational point, when an exact evaluator is known.
    pub fn eval_exact(&self, x: &[Rational]) -> Option<Rational> {
        self.exact.as_ref().map(|g| g(x))
    }

    pub fn has_exact(&self) -> bool {
        self.exact.is_some()
    }
}

impl ObjectiveFunction<f64> {
    /// `h` given by an expression in `x_1..x_n`; evaluated exactly on grid
    /// points.
    pub fn from_expression(domain: &CompactBox<f64>, expression: Expression) -> Result<Self> {
        check_scope(&expression, domain.dim(), false)?;
        let (fe, ee) = (expression.clone(), expression.clone());
        let mut h = ObjectiveFunction::new(domain, expression.source(), move |x: &[f64]| fe.eval_f64(x, &[]))
            .with_exact(move |x: &[Rational]| ee.eval_exact(x, &[]));
        h.expression = Some(expression);
        Ok(h)
    }

    pub fn parse(domain: &CompactBox<f64>, text: &str) -> Result<Self> {
        ObjectiveFunction::from_expression(domain, Expression::parse(text, VarScope::x(domain.dim()))?)
    }
}

impl<S: Scalar> fmt::Debug for ObjectiveFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveFunction")
            .field("label", &self.label)
            .field("continuity_claim", &self.continuity_claim)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl<S: Scalar> PartialEq for ObjectiveFunction<S> {
    fn eq(&self, other: &Self) -> bool {
        let same_rule = match (&self.expression, &other.expression) {
            (Some(a), Some(b)) => a == b,
            (None, None) => Arc::ptr_eq(&self.evaluator, &other.evaluator),
            _ => false,
        };
        same_rule
            && self.domain == other.domain
            && self.continuity_claim == other.continuity_claim
            && self.lipschitz == other.lipschitz
    }
}

/// A set-valued operator `T` with finite vertex lists.
#[derive(Clone)]
pub struct QviOperator<S: Scalar = f64> {
    domain: CompactBox<S>,
    label: String,
    vertex_map: Arc<VertexMap<S>>,
    expressions: Option<Vec<Vec<Expression>>>,
    scale: S,
}

/// Points at which vertex lists are validated on construction.
const VALIDATION_LATTICE: usize = 5;

impl<S: Scalar> QviOperator<S> {
    /// Fails when a vertex list is empty or has vectors of the wrong
    /// dimension at any point of a coarse lattice over the domain.
    pub fn new(
        domain: &CompactBox<S>,
        label: impl Into<String>,
        vertex_map: impl Fn(&[S]) -> Vec<Vec<S>> + Send + Sync + 'static,
    ) -> Result<Self> {
        let op = QviOperator {
            domain: domain.clone(),
            label: label.into(),
            vertex_map: Arc::new(vertex_map),
            expressions: None,
            scale: S::one(),
        };
        for x in domain.lattice(VALIDATION_LATTICE) {
            op.checked_vertices(x.coords())?;
        }
        Ok(op)
    }

    /// `T(x) = vertices` for every `x`.
    pub fn constant(domain: &CompactBox<S>, vertices: Vec<Vec<S>>) -> Result<Self> {
        let label = format!("{vertices:?}");
        QviOperator::new(domain, label, move |_x: &[S]| vertices.clone())
    }

    pub fn domain(&self) -> &CompactBox<S> {
        &self.domain
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn expressions(&self) -> Option<&[Vec<Expression>]> {
        self.expressions.as_deref()
    }

    pub fn scale(&self) -> &S {
        &self.scale
    }

    /// The operator `λT`, for `λ > 0`.
    pub fn scaled(&self, lambda: S) -> Result<Self> {
        if !(lambda > S::zero()) {
            return Err(Error::argument(format!("scale must be positive, got {lambda}")));
        }
        let mut op = self.clone();
        op.scale = self.scale.clone() * lambda;
        Ok(op)
    }

    fn checked_vertices(&self, x: &[S]) -> Result<Vec<Vec<S>>> {
        let vs = (self.vertex_map)(x);
        if vs.is_empty() {
            return Err(Error::instance(format!(
                "operator '{}' has an empty vertex list at {x:?}",
                self.label
            )));
        }
        if let Some(v) = vs.iter().find(|v| v.len() != self.domain.dim()) {
            return Err(Error::DimensionMismatch {
                expected: self.domain.dim(),
                found: v.len(),
            });
        }
        Ok(vs)
    }

    /// The vertices of `T(x)`, scaled.
    pub fn vertices(&self, x: &Point<S>) -> Result<Vec<Vec<S>>> {
        check_point(&self.domain, x, "x")?;
        let vs = self.checked_vertices(x.coords())?;
        Ok(vs
            .into_iter()
            .map(|v| v.into_iter().map(|c| self.scale.clone() * c).collect())
            .collect())
    }

    /// `max_{x* ∈ T(x)} ⟨x*, y − x⟩`. The scale multiplies the maximum, which
    /// equals scaling every vertex and keeps signs exact.
    pub fn pairing(&self, x: &[S], y: &[S]) -> S {
        let d: Vec<S> = y.iter().zip(x).map(|(a, b)| a.clone() - b.clone()).collect();
        let best = (self.vertex_map)(x)
            .iter()
            .map(|v| S::dot(v, &d))
            .reduce(|a, b| if b > a { b } else { a })
            .unwrap_or_else(|| panic!("operator '{}' has an empty vertex list", self.label));
        self.scale.clone() * best
    }
}

impl QviOperator<f64> {
    /// Vertices given as expressions in `x_1..x_n`.
    pub fn from_expressions(domain: &CompactBox<f64>, vertices: Vec<Vec<Expression>>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(Error::instance("operator needs at least one vertex"));
        }
        for v in &vertices {
            if v.len() != domain.dim() {
                return Err(Error::DimensionMismatch {
                    expected: domain.dim(),
                    found: v.len(),
                });
            }
            for e in v {
                check_scope(e, domain.dim(), false)?;
            }
        }
        let label = vertices
            .iter()
            .map(|v| format!("({})", v.iter().map(|e| e.source()).collect::<Vec<_>>().join(", ")))
            .collect::<Vec<_>>()
            .join(", ");
        let exprs = vertices.clone();
        let mut op = QviOperator::new(domain, format!("{{{label}}}"), move |x: &[f64]| {
            exprs
                .iter()
                .map(|v| v.iter().map(|e| e.eval_f64(x, &[])).collect())
                .collect()
        })?;
        op.expressions = Some(vertices);
        Ok(op)
    }
}

impl<S: Scalar> fmt::Debug for QviOperator<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("QviOperator")
            .field("label", &self.label)
            .field("scale", &self.scale)
            .finish()
    }
}

impl<S: Scalar> PartialEq for QviOperator<S> {
    fn eq(&self, other: &Self) -> bool {
        let same_rule = match (&self.expressions, &other.expressions) {
            (Some(a), Some(b)) => a == b,
            (None, None) => Arc::ptr_eq(&self.vertex_map, &other.vertex_map),
            _ => false,
        };
        same_rule && self.domain == other.domain && self.scale == other.scale
    }
}

/// A bifunction `f: C × C → R`.
#[derive(Clone)]
pub struct Bifunction<S: Scalar = f64> {
    domain: CompactBox<S>,
    label: String,
    provenance: Provenance,
    evaluator: Arc<Evaluator<S>>,
    expression: Option<Expression>,
    objective: Option<ObjectiveFunction<S>>,
    operator: Option<QviOperator<S>>,
}

impl<S: Scalar> Bifunction<S> {
    pub fn new(
        domain: &CompactBox<S>,
        label: impl Into<String>,
        evaluator: impl Fn(&[S], &[S]) -> S + Send + Sync + 'static,
    ) -> Self {
        Bifunction {
            domain: domain.clone(),
            label: label.into(),
            provenance: Provenance::Direct,
            evaluator: Arc::new(evaluator),
            expression: None,
            objective: None,
            operator: None,
        }
    }

    /// `f ≡ 0`.
    pub fn zero(domain: &CompactBox<S>) -> Self {
        Bifunction::new(domain, "0", |_x: &[S], _y: &[S]| S::zero())
    }

    pub fn scalar_kind(&self) -> ScalarKind {
        S::KIND
    }

    pub fn domain(&self) -> &CompactBox<S> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn expression(&self) -> Option<&Expression> {
        self.expression.as_ref()
    }

    /// The objective `h` when `f = f^h`.
    pub fn objective(&self) -> Option<&ObjectiveFunction<S>> {
        self.objective.as_ref()
    }

    /// The operator `T` when `f = f_T`.
    pub fn operator(&self) -> Option<&QviOperator<S>> {
        self.operator.as_ref()
    }

    /// `f(x, y)` for `x, y ∈ C`.
    pub fn eval(&self, x: &Point<S>, y: &Point<S>) -> Result<S> {
        check_point(&self.domain, x, "x")?;
        check_point(&self.domain, y, "y")?;
        Ok(self.eval_unchecked(x.coords(), y.coords()))
    }

    pub fn eval_unchecked(&self, x: &[S], y: &[S]) -> S {
        (self.evaluator)(x, y)
    }
}

impl Bifunction<f64> {
    /// `f` given by an expression in `x_1..x_n, y_1..y_n`.
    pub fn from_expression(domain: &CompactBox<f64>, expression: Expression) -> Result<Self> {
        check_scope(&expression, domain.dim(), true)?;
        let e = expression.clone();
        let mut f = Bifunction::new(domain, expression.source(), move |x: &[f64], y: &[f64]| {
            e.eval_f64(x, y)
        });
        f.expression = Some(expression);
        Ok(f)
    }

    pub fn parse(domain: &CompactBox<f64>, text: &str) -> Result<Self> {
        Bifunction::from_expression(domain, Expression::parse(text, VarScope::xy(domain.dim()))?)
    }
}

impl<S: Scalar> fmt::Debug for Bifunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Bifunction")
            .field("label", &self.label)
            .field("provenance", &self.provenance)
            .field("kind", &S::KIND)
            .finish()
    }
}

impl<S: Scalar> PartialEq for Bifunction<S> {
    fn eq(&self, other: &Self) -> bool {
        if self.provenance != other.provenance || self.domain != other.domain {
            return false;
        }
        match self.provenance {
            Provenance::OptAdapter => self.objective == other.objective,
            Provenance::QviAdapter => self.operator == other.operator,
            Provenance::Direct => match (&self.expression, &other.expression) {
                (Some(a), Some(b)) => a == b,
                (None, None) => Arc::ptr_eq(&self.evaluator, &other.evaluator),
                _ => false,
            },
        }
    }
}

/// `f^h(x, y) = h(y) − h(x)`.
pub fn make_opt_bifunction<S: Scalar>(h: &ObjectiveFunction<S>) -> Bifunction<S> {
    let g = h.clone();
    Bifunction {
        domain: h.domain.clone(),
        label: format!("h(y) - h(x), h = {}", h.label),
        provenance: Provenance::OptAdapter,
        evaluator: Arc::new(move |x: &[S], y: &[S]| g.eval_unchecked(y) - g.eval_unchecked(x)),
        expression: None,
        objective: Some(h.clone()),
        operator: None,
    }
}

/// `f_T(x, y) = max_{x* ∈ T(x)} ⟨x*, y − x⟩`.
pub fn make_qvi_bifunction<S: Scalar>(t: &QviOperator<S>) -> Result<Bifunction<S>> {
    for x in t.domain.lattice(VALIDATION_LATTICE) {
        t.checked_vertices(x.coords())?;
    }
    let op = t.clone();
    Ok(Bifunction {
        domain: t.domain.clone(),
        label: format!("f_T, T = {}", t.label),
        provenance: Provenance::QviAdapter,
        evaluator: Arc::new(move |x: &[S], y: &[S]| op.pairing(x, y)),
        expression: None,
        objective: None,
        operator: Some(t.clone()),
    })
}
