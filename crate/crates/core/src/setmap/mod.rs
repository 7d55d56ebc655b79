//! Set-valued constraint maps `K: C ⇒ C` with box images.
//!
//! Bounds are evaluated in exact rational arithmetic, so membership of a grid
//! point in its own image (and in any other image) is decided without
//! rounding. Images are clipped to the domain; an empty clipped image is an
//! instance-definition error.

mod probes;

use std::fmt;
use std::sync::Arc;

use num_traits::{CheckedSub, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expr::{Condition, Expression};
use crate::geometry::{
    exact_f64, from_small, rational_to_f64, to_small, CompactBox, Grid, Point, Rational, Scalar, SmallRational,
};

pub use probes::{
    check_closed_graph, check_convex_values, check_lsc, GraphProbe, ProbeConfig, ProbeKind, ProbeWitness,
    TopologyProbeReport,
};

/// An image `K(x)`: a box with exact bounds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConvexRegion {
    lower: Vec<Rational>,
    upper: Vec<Rational>,
}

impl ConvexRegion {
    pub fn new(lower: Vec<Rational>, upper: Vec<Rational>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::argument("region bounds are not ordered"));
        }
        Ok(ConvexRegion { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[Rational] {
        &self.lower
    }

    pub fn upper(&self) -> &[Rational] {
        &self.upper
    }

    pub fn lower_f64(&self) -> Vec<f64> {
        self.lower.iter().map(rational_to_f64).collect()
    }

    pub fn upper_f64(&self) -> Vec<f64> {
        self.upper.iter().map(rational_to_f64).collect()
    }

    pub fn to_box(&self) -> CompactBox<f64> {
        CompactBox::from_bounds(self.lower_f64(), self.upper_f64()).expect("ordered bounds")
    }

    pub fn contains(&self, z: &[Rational]) -> bool {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| l <= v && v <= u)
    }

    pub fn contains_f64(&self, z: &[f64]) -> bool {
        let exact: Vec<Rational> = z.iter().map(|v| exact_f64(*v)).collect();
        self.contains(&exact)
    }

    /// Per-axis exact gaps, combined into a Euclidean distance.
    pub fn distance_exact(&self, z: &[Rational]) -> f64 {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| {
                let gap = if v < l {
                    l - v
                } else if v > u {
                    v - u
                } else {
                    Rational::zero()
                };
                let g = rational_to_f64(&gap);
                g * g
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn distance_f64(&self, z: &[f64]) -> f64 {
        let exact: Vec<Rational> = z.iter().map(|v| exact_f64(*v)).collect();
        self.distance_exact(&exact)
    }

    /// Nearest point of the box to `z`, in floats.
    pub fn project_f64(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lower_f64().into_iter().zip(self.upper_f64()))
            .map(|(v, (l, u))| v.clamp(l, u))
            .collect()
    }

    /// The `2^n` corners, lexicographic.
    pub fn corners_f64(&self) -> Vec<Vec<f64>> {
        let (lo, hi) = (self.lower_f64(), self.upper_f64());
        let mut out = vec![Vec::new()];
        for i in 0..self.dim() {
            out = out
                .into_iter()
                .flat_map(|p: Vec<f64>| {
                    let mut a = p.clone();
                    a.push(lo[i]);
                    let mut b = p;
                    b.push(hi[i]);
                    if lo[i] == hi[i] {
                        vec![a]
                    } else {
                        vec![a, b]
                    }
                })
                .collect();
        }
        out
    }
}

impl fmt::Display for ConvexRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.dim() {
            if i > 0 {
                f.write_str(" × ")?;
            }
            write!(f, "[{}, {}]", self.lower[i], self.upper[i])?;
        }
        Ok(())
    }
}

/// One branch of a piecewise moving interval. A branch without a condition
/// matches every point.
#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub when: Option<Condition>,
    pub lower: Vec<Expression>,
    pub upper: Vec<Expression>,
}

pub type MembershipPredicate = dyn Fn(&[Rational], &[Rational]) -> bool + Send + Sync;

#[derive(Clone)]
pub enum MapVariant {
    /// `K(x) = B` for a fixed box `B ⊆ C`.
    Constant { lower: Vec<Rational>, upper: Vec<Rational> },
    /// Per-axis bounds given by expressions in `x`.
    MovingBox {
        lower: Vec<Expression>,
        upper: Vec<Expression>,
    },
    /// The first branch whose condition holds supplies the bounds.
    PiecewiseMovingInterval { branches: Vec<Branch> },
    /// A membership predicate inside a fixed hull. Images need not be convex
    /// or closed; these maps exist to exercise the falsifiers.
    Predicate {
        label: String,
        hull_lower: Vec<Rational>,
        hull_upper: Vec<Rational>,
        member: Arc<MembershipPredicate>,
    },
}

impl fmt::Debug for MapVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapVariant::Constant { lower, upper } => f
                .debug_struct("Constant")
                .field("lower", lower)
                .field("upper", upper)
                .finish(),
            MapVariant::MovingBox { lower, upper } => f
                .debug_struct("MovingBox")
                .field("lower", &lower.iter().map(|e| e.source()).collect::<Vec<_>>())
                .field("upper", &upper.iter().map(|e| e.source()).collect::<Vec<_>>())
                .finish(),
            MapVariant::PiecewiseMovingInterval { branches } => f
                .debug_struct("PiecewiseMovingInterval")
                .field("branches", &branches.len())
                .finish(),
            MapVariant::Predicate { label, .. } => f.debug_struct("Predicate").field("label", label).finish(),
        }
    }
}

impl PartialEq for MapVariant {
    fn eq(&self, other: &Self) -> bool {
        use MapVariant::*;
        match (self, other) {
            (Constant { lower: a, upper: b }, Constant { lower: c, upper: d }) => a == c && b == d,
            (MovingBox { lower: a, upper: b }, MovingBox { lower: c, upper: d }) => a == c && b == d,
            (PiecewiseMovingInterval { branches: a }, PiecewiseMovingInterval { branches: b }) => a == b,
            (Predicate { member: a, .. }, Predicate { member: b, .. }) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// Grid points of an image, as per-axis inclusive index ranges or as an
/// explicit list when the image is not a box.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ImageIndex {
    Ranges(Vec<(usize, usize)>),
    Listed(Vec<usize>),
}

impl ImageIndex {
    pub fn ranges(&self) -> Option<&[(usize, usize)]> {
        match self {
            ImageIndex::Ranges(r) => Some(r),
            ImageIndex::Listed(_) => None,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ImageIndex::Ranges(r) => r.iter().map(|(a, b)| b - a + 1).product(),
            ImageIndex::Listed(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `k`-th grid index in lexicographic order.
    pub fn nth(&self, grid: &Grid, k: usize) -> usize {
        match self {
            ImageIndex::Listed(v) => v[k],
            ImageIndex::Ranges(ranges) => {
                let mut rest = k;
                let mut multi = vec![0; ranges.len()];
                for (axis, (lo, hi)) in ranges.iter().enumerate().rev() {
                    let width = hi - lo + 1;
                    multi[axis] = lo + rest % width;
                    rest /= width;
                }
                grid.ravel(&multi)
            }
        }
    }

    /// Flat grid indices in lexicographic order.
    pub fn indices(&self, grid: &Grid) -> Vec<usize> {
        match self {
            ImageIndex::Listed(v) => v.clone(),
            ImageIndex::Ranges(ranges) => {
                let mut out = Vec::with_capacity(self.len());
                let mut multi: Vec<usize> = ranges.iter().map(|r| r.0).collect();
                loop {
                    out.push(grid.ravel(&multi));
                    let mut axis = ranges.len();
                    loop {
                        if axis == 0 {
                            return out;
                        }
                        axis -= 1;
                        if multi[axis] < ranges[axis].1 {
                            multi[axis] += 1;
                            break;
                        }
                        multi[axis] = ranges[axis].0;
                    }
                }
            }
        }
    }
}

/// Per grid point: the distance to its own image and the image's grid points.
#[derive(Clone, Debug)]
pub struct ImageTable {
    pub residuals: Vec<f64>,
    pub images: Vec<Option<ImageIndex>>,
}

/// A set-valued map `K: C ⇒ C` with box images.
#[derive(Clone, Debug, PartialEq)]
pub struct SetValuedMap {
    domain_lower: Vec<Rational>,
    domain_upper: Vec<Rational>,
    variant: MapVariant,
}

impl SetValuedMap {
    pub fn new<S: Scalar>(domain: &CompactBox<S>, variant: MapVariant) -> Result<Self> {
        let (domain_lower, domain_upper) = domain.to_rational()?;
        let dim = domain.dim();
        let check = |n: usize, what: &str| {
            if n == dim {
                Ok(())
            } else {
                Err(Error::instance(format!(
                    "{what} has {n} components for a {dim}-dimensional domain"
                )))
            }
        };
        match &variant {
            MapVariant::Constant { lower, upper } => {
                check(lower.len(), "constant map lower bound")?;
                check(upper.len(), "constant map upper bound")?;
            }
            MapVariant::MovingBox { lower, upper } => {
                check(lower.len(), "moving box lower bound")?;
                check(upper.len(), "moving box upper bound")?;
                if lower.iter().chain(upper).any(|e| e.uses_y()) {
                    return Err(Error::instance("map bounds may only depend on x"));
                }
            }
            MapVariant::PiecewiseMovingInterval { branches } => {
                if branches.is_empty() {
                    return Err(Error::instance("piecewise map needs at least one branch"));
                }
                for b in branches {
                    check(b.lower.len(), "branch lower bound")?;
                    check(b.upper.len(), "branch upper bound")?;
                }
            }
            MapVariant::Predicate {
                hull_lower, hull_upper, ..
            } => {
                check(hull_lower.len(), "predicate hull")?;
                check(hull_upper.len(), "predicate hull")?;
            }
        }
        Ok(SetValuedMap {
            domain_lower,
            domain_upper,
            variant,
        })
    }

    /// `K(x) = C` for every `x`.
    pub fn whole_domain<S: Scalar>(domain: &CompactBox<S>) -> Result<Self> {
        let (lower, upper) = domain.to_rational()?;
        SetValuedMap::new(domain, MapVariant::Constant { lower, upper })
    }

    /// `K(x) = {x}`.
    pub fn identity<S: Scalar>(domain: &CompactBox<S>) -> Result<Self> {
        let scope = crate::expr::VarScope::x(domain.dim());
        let exprs: Vec<Expression> = (1..=domain.dim())
            .map(|i| Expression::parse(&format!("x_{i}"), scope))
            .collect::<Result<_>>()?;
        SetValuedMap::new(
            domain,
            MapVariant::MovingBox {
                lower: exprs.clone(),
                upper: exprs,
            },
        )
    }

    pub fn dim(&self) -> usize {
        self.domain_lower.len()
    }

    pub fn variant(&self) -> &MapVariant {
        &self.variant
    }

    pub fn domain_exact(&self) -> (&[Rational], &[Rational]) {
        (&self.domain_lower, &self.domain_upper)
    }

    pub fn domain_f64(&self) -> CompactBox<f64> {
        CompactBox::from_bounds(
            self.domain_lower.iter().map(rational_to_f64).collect(),
            self.domain_upper.iter().map(rational_to_f64).collect(),
        )
        .expect("ordered domain")
    }

    /// True when the map is the constant map onto the whole domain.
    pub fn is_whole_domain(&self) -> bool {
        matches!(&self.variant, MapVariant::Constant { lower, upper }
            if *lower == self.domain_lower && *upper == self.domain_upper)
    }

    /// True when every image is a box, so images are convex by construction.
    pub fn has_box_images(&self) -> bool {
        !matches!(self.variant, MapVariant::Predicate { .. })
    }

    fn in_domain(&self, x: &[Rational]) -> bool {
        x.iter()
            .zip(self.domain_lower.iter().zip(&self.domain_upper))
            .all(|(v, (l, u))| l <= v && v <= u)
    }

    fn raw_bounds(&self, x: &[Rational]) -> (Vec<Rational>, Vec<Rational>) {
        let eval = |es: &[Expression]| -> Vec<Rational> { es.iter().map(|e| e.eval_exact(x, &[])).collect() };
        match &self.variant {
            MapVariant::Constant { lower, upper } => (lower.clone(), upper.clone()),
            MapVariant::MovingBox { lower, upper } => (eval(lower), eval(upper)),
            MapVariant::PiecewiseMovingInterval { branches } => {
                let branch = branches
                    .iter()
                    .find(|b| b.when.as_ref().is_none_or(|c| c.eval_exact(x, &[])))
                    .unwrap_or_else(|| branches.last().expect("nonempty branches"));
                (eval(&branch.lower), eval(&branch.upper))
            }
            MapVariant::Predicate {
                hull_lower, hull_upper, ..
            } => (hull_lower.clone(), hull_upper.clone()),
        }
    }

    /// Clipped image bounds in `i128` arithmetic. `None` when some value does
    /// not fit, and for predicate maps.
    #[allow(clippy::type_complexity)]
    fn bounds_small(&self, x: &[SmallRational]) -> Option<Result<(Vec<SmallRational>, Vec<SmallRational>)>> {
        let eval = |es: &[Expression]| -> Option<Vec<SmallRational>> { es.iter().map(|e| e.eval_small(x)).collect() };
        let fixed = |qs: &[Rational]| -> Option<Vec<SmallRational>> { qs.iter().map(to_small).collect() };
        let (mut lower, mut upper) = match &self.variant {
            MapVariant::Constant { lower, upper } => (fixed(lower)?, fixed(upper)?),
            MapVariant::MovingBox { lower, upper } => (eval(lower)?, eval(upper)?),
            MapVariant::PiecewiseMovingInterval { branches } => {
                let mut chosen = branches.last().expect("nonempty branches");
                for b in branches {
                    let hit = match &b.when {
                        None => true,
                        Some(c) => c.eval_small(x)?,
                    };
                    if hit {
                        chosen = b;
                        break;
                    }
                }
                (eval(&chosen.lower)?, eval(&chosen.upper)?)
            }
            MapVariant::Predicate { .. } => return None,
        };
        for i in 0..self.dim() {
            let (dl, du) = (to_small(&self.domain_lower[i])?, to_small(&self.domain_upper[i])?);
            if lower[i] < dl {
                lower[i] = dl;
            }
            if upper[i] > du {
                upper[i] = du;
            }
            if lower[i] > upper[i] {
                return Some(Err(Error::EmptyImage {
                    x: x.iter().map(|v| rational_to_f64(&from_small(v))).collect(),
                }));
            }
        }
        Some(Ok((lower, upper)))
    }

    pub(crate) fn evaluate_small(&self, x: &[SmallRational]) -> Option<Result<ConvexRegion>> {
        Some(self.bounds_small(x)?.map(|(lower, upper)| ConvexRegion {
            lower: lower.iter().map(from_small).collect(),
            upper: upper.iter().map(from_small).collect(),
        }))
    }

    /// Residual and image grid of grid point `i` in `i128` arithmetic.
    fn table_row_small(&self, grid: &Grid, i: usize) -> Option<Result<(f64, Option<ImageIndex>)>> {
        let x = grid.coords_small(i)?;
        let (lower, upper) = match self.bounds_small(&x)? {
            Ok(b) => b,
            Err(e) => return Some(Err(e)),
        };
        let mut ranges = Some(Vec::with_capacity(x.len()));
        let mut squares = 0.0;
        for axis in 0..x.len() {
            let range = grid.index_range_small(axis, &lower[axis], &upper[axis])?;
            ranges = ranges.zip(range).map(|(mut v, r)| {
                v.push(r);
                v
            });
            let v = &x[axis];
            let gap = if *v < lower[axis] {
                lower[axis].checked_sub(v)?
            } else if *v > upper[axis] {
                v.checked_sub(&upper[axis])?
            } else {
                continue;
            };
            let g = rational_to_f64(&from_small(&gap));
            squares += g * g;
        }
        Some(Ok((squares.sqrt(), ranges.map(ImageIndex::Ranges))))
    }

    /// Image at an exact point of the domain, clipped to the domain. For
    /// predicate maps this is the hull.
    pub fn evaluate_exact(&self, x: &[Rational]) -> Result<ConvexRegion> {
        if let Some(xs) = x.iter().map(to_small).collect::<Option<Vec<_>>>() {
            if let Some(region) = self.evaluate_small(&xs) {
                return region;
            }
        }
        let (mut lower, mut upper) = self.raw_bounds(x);
        for i in 0..self.dim() {
            if lower[i] < self.domain_lower[i] {
                lower[i] = self.domain_lower[i].clone();
            }
            if upper[i] > self.domain_upper[i] {
                upper[i] = self.domain_upper[i].clone();
            }
            if lower[i] > upper[i] {
                return Err(Error::EmptyImage {
                    x: x.iter().map(rational_to_f64).collect(),
                });
            }
        }
        Ok(ConvexRegion { lower, upper })
    }

    pub fn evaluate<S: Scalar>(&self, x: &Point<S>) -> Result<ConvexRegion> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.dim(),
            });
        }
        let exact = x
            .to_rational()
            .ok_or_else(|| Error::argument(format!("map argument {x} is irrational")))?;
        if !self.in_domain(&exact) {
            return Err(Error::argument(format!("point {x} lies outside the domain")));
        }
        self.evaluate_exact(&exact)
    }

    /// Exact membership `z ∈ K(x)`.
    pub fn contains_exact(&self, x: &[Rational], z: &[Rational]) -> Result<bool> {
        let region = self.evaluate_exact(x)?;
        Ok(match &self.variant {
            MapVariant::Predicate { member, .. } => region.contains(z) && member(x, z),
            _ => region.contains(z),
        })
    }

    pub(crate) fn image_index(&self, x: &[Rational], region: &ConvexRegion, grid: &Grid) -> Option<ImageIndex> {
        let ranges: Option<Vec<(usize, usize)>> = (0..self.dim())
            .map(|i| grid.index_range(i, &region.lower[i], &region.upper[i]))
            .collect();
        let ranges = ranges?;
        match &self.variant {
            MapVariant::Predicate { member, .. } => {
                let listed: Vec<usize> = ImageIndex::Ranges(ranges)
                    .indices(grid)
                    .into_iter()
                    .filter(|&j| member(x, &grid.coords_exact(j)))
                    .collect();
                (!listed.is_empty()).then_some(ImageIndex::Listed(listed))
            }
            _ => Some(ImageIndex::Ranges(ranges)),
        }
    }

    /// Grid points lying in `K(x)`. An image that misses every grid point is
    /// reported as [`Error::DegenerateImage`].
    pub fn image_grid<S: Scalar>(&self, x: &Point<S>, grid: &Grid) -> Result<Vec<Point<f64>>> {
        let index = self.image_grid_index(x, grid)?;
        Ok(index.indices(grid).into_iter().map(|j| grid.point::<f64>(j)).collect())
    }

    pub fn image_grid_index<S: Scalar>(&self, x: &Point<S>, grid: &Grid) -> Result<ImageIndex> {
        self.check_grid(grid)?;
        let region = self.evaluate(x)?;
        let exact = x.to_rational().expect("checked by evaluate");
        self.image_index(&exact, &region, grid)
            .ok_or_else(|| Error::DegenerateImage { x: x.to_f64_vec() })
    }

    fn check_grid(&self, grid: &Grid) -> Result<()> {
        if grid.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: grid.dim(),
            });
        }
        Ok(())
    }

    /// Distance from `x` to `K(x)`.
    pub fn membership_residual(&self, x: &[Rational]) -> Result<f64> {
        let region = self.evaluate_exact(x)?;
        match &self.variant {
            MapVariant::Predicate { member, .. } if region.contains(x) && !member(x, x) => {
                // excluded points of a predicate map sit at distance zero from
                // the closure; report the smallest positive float instead of 0
                Ok(f64::MIN_POSITIVE)
            }
            _ => Ok(region.distance_exact(x)),
        }
    }

    /// Images and self-distances at every grid point, evaluated in parallel.
    /// Fails on the first (lowest index) empty image.
    pub fn image_table(&self, grid: &Grid) -> Result<ImageTable> {
        self.check_grid(grid)?;
        let rows: Vec<Result<(f64, Option<ImageIndex>)>> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if let Some(row) = self.table_row_small(grid, i) {
                    return row;
                }
                let x = grid.coords_exact(i);
                let region = self.evaluate_exact(&x)?;
                let residual = self.membership_residual(&x)?;
                Ok((residual, self.image_index(&x, &region, grid)))
            })
            .collect();
        let mut residuals = Vec::with_capacity(rows.len());
        let mut images = Vec::with_capacity(rows.len());
        for row in rows {
            let (r, img) = row?;
            residuals.push(r);
            images.push(img);
        }
        Ok(ImageTable { residuals, images })
    }

    /// Load-time validation: every grid point has a nonempty clipped image.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        self.check_grid(grid)?;
        (0..grid.len())
            .into_par_iter()
            .try_for_each(|i| self.evaluate_exact(&grid.coords_exact(i)).map(|_| ()))
    }

    /// Grid points `x` with `dist(x, K(x)) ≤ delta`, lexicographic.
    pub fn fixed_point_set(&self, grid: &Grid, delta: f64) -> Result<Vec<Point<f64>>> {
        if !(delta >= 0.0) {
            return Err(Error::argument(format!("delta must be nonnegative, got {delta}")));
        }
        let table = self.image_table(grid)?;
        Ok(table
            .residuals
            .iter()
            .enumerate()
            .filter(|(_, r)| **r <= delta)
            .map(|(i, _)| grid.point::<f64>(i))
            .collect())
    }
}
