use num_bigint::BigInt;
use num_rational::Ratio;
use num_traits::{CheckedDiv, CheckedMul, CheckedSub, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{rational_to_f64, to_small, CompactBox, Point, Rational, Scalar, SmallRational};
use crate::error::{Error, Result};

/// A tensor grid over a box with rational bounds.
///
/// Coordinates are held exactly; the float coordinates are the nearest floats
/// to the exact ones, so the box corners are reproduced bit for bit.
/// Enumeration is lexicographic with the first axis varying slowest.
#[derive(Clone, Debug)]
pub struct Grid {
    lower: Vec<Rational>,
    upper: Vec<Rational>,
    points_per_axis: Vec<usize>,
    axis_exact: Vec<Vec<Rational>>,
    axis_f64: Vec<Vec<f64>>,
    axis_small: Vec<Vec<Option<SmallRational>>>,
    strides: Vec<usize>,
}

/// Serializable description of a grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub points_per_axis: Vec<usize>,
}

impl Grid {
    pub fn new<S: Scalar>(domain: &CompactBox<S>, points_per_axis: Vec<usize>) -> Result<Self> {
        let (lower, upper) = domain.to_rational()?;
        Grid::from_rational(lower, upper, points_per_axis)
    }

    /// Same number of points on every axis.
    pub fn uniform<S: Scalar>(domain: &CompactBox<S>, points: usize) -> Result<Self> {
        Grid::new(domain, vec![points; domain.dim()])
    }

    pub fn from_rational(lower: Vec<Rational>, upper: Vec<Rational>, points_per_axis: Vec<usize>) -> Result<Self> {
        if points_per_axis.len() != lower.len() || upper.len() != lower.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                found: points_per_axis.len(),
            });
        }
        if let Some(m) = points_per_axis.iter().find(|&&m| m < 2) {
            return Err(Error::argument(format!(
                "grids need at least 2 points per axis, got {m}"
            )));
        }
        let mut axis_exact = Vec::with_capacity(lower.len());
        for ((lo, hi), &m) in lower.iter().zip(&upper).zip(&points_per_axis) {
            if lo > hi {
                return Err(Error::instance("grid box is empty"));
            }
            let span = hi - lo;
            let denom = BigInt::from(m - 1);
            let coords: Vec<Rational> = (0..m)
                .map(|i| {
                    if i + 1 == m {
                        hi.clone()
                    } else {
                        lo + &span * Rational::new(BigInt::from(i), denom.clone())
                    }
                })
                .collect();
            axis_exact.push(coords);
        }
        let axis_f64 = axis_exact
            .iter()
            .map(|axis| axis.iter().map(rational_to_f64).collect())
            .collect();
        let axis_small = axis_exact
            .iter()
            .map(|axis| axis.iter().map(to_small).collect())
            .collect();
        let mut strides = vec![1; lower.len()];
        for i in (0..lower.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * points_per_axis[i + 1];
        }
        Ok(Grid {
            lower,
            upper,
            points_per_axis,
            axis_exact,
            axis_f64,
            axis_small,
            strides,
        })
    }

    pub fn dim(&self) -> usize {
        self.points_per_axis.len()
    }

    pub fn len(&self) -> usize {
        self.points_per_axis.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points_per_axis(&self) -> &[usize] {
        &self.points_per_axis
    }

    pub fn lower_exact(&self) -> &[Rational] {
        &self.lower
    }

    pub fn upper_exact(&self) -> &[Rational] {
        &self.upper
    }

    pub fn bounds<S: Scalar>(&self) -> CompactBox<S> {
        CompactBox::new(
            Point::from_vec_unchecked(self.lower.iter().map(S::from_rational).collect()),
            Point::from_vec_unchecked(self.upper.iter().map(S::from_rational).collect()),
        )
        .expect("grid bounds are ordered")
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            lower: self.lower.iter().map(rational_to_f64).collect(),
            upper: self.upper.iter().map(rational_to_f64).collect(),
            points_per_axis: self.points_per_axis.clone(),
        }
    }

    pub fn step(&self, axis: usize) -> f64 {
        let m = self.points_per_axis[axis];
        rational_to_f64(&((&self.upper[axis] - &self.lower[axis]) / Rational::from_integer((m - 1).into())))
    }

    pub fn max_step(&self) -> f64 {
        (0..self.dim()).map(|i| self.step(i)).fold(0.0, f64::max)
    }

    pub fn axis_exact(&self, axis: usize) -> &[Rational] {
        &self.axis_exact[axis]
    }

    pub fn axis_f64(&self, axis: usize) -> &[f64] {
        &self.axis_f64[axis]
    }

    pub fn unravel(&self, index: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.points_per_axis)
            .map(|(s, m)| (index / s) % m)
            .collect()
    }

    pub fn ravel(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn coords_f64(&self, index: usize) -> Vec<f64> {
        self.unravel(index)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.axis_f64[axis][i])
            .collect()
    }

    pub fn coords_exact(&self, index: usize) -> Vec<Rational> {
        self.unravel(index)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.axis_exact[axis][i].clone())
            .collect()
    }

    pub fn point<S: Scalar>(&self, index: usize) -> Point<S> {
        let coords = match S::KIND {
            super::ScalarKind::Real => self.coords_f64(index).into_iter().map(S::from_f64).collect(),
            super::ScalarKind::Exact => self.coords_exact(index).iter().map(S::from_rational).collect(),
        };
        Point::from_vec_unchecked(coords)
    }

    /// All grid points in lexicographic order.
    pub fn points<S: Scalar>(&self) -> Vec<Point<S>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Inclusive range of axis indices whose coordinate lies in `[lo, hi]`.
    pub fn index_range(&self, axis: usize, lo: &Rational, hi: &Rational) -> Option<(usize, usize)> {
        let solved = match (to_small(lo), to_small(hi)) {
            (Some(a), Some(b)) => self.solve_index(axis, &a, &b),
            _ => None,
        };
        let (first, end) = solved.unwrap_or_else(|| {
            let coords = &self.axis_exact[axis];
            (coords.partition_point(|c| c < lo), coords.partition_point(|c| c <= hi))
        });
        (first < end).then(|| (first, end - 1))
    }

    /// [`Grid::index_range`] for `i128` bounds; `None` when the arithmetic
    /// overflows.
    pub(crate) fn index_range_small(
        &self,
        axis: usize,
        lo: &SmallRational,
        hi: &SmallRational,
    ) -> Option<Option<(usize, usize)>> {
        let (first, end) = self.solve_index(axis, lo, hi)?;
        Some((first < end).then(|| (first, end - 1)))
    }

    /// Coordinate `i` is `lower + span·i/(m−1)`, so the range follows from
    /// `t = (q − lower)(m−1)/span`. `None` on overflow or a flat axis.
    fn solve_index(&self, axis: usize, lo: &SmallRational, hi: &SmallRational) -> Option<(usize, usize)> {
        let base = to_small(&self.lower[axis])?;
        let span = to_small(&self.upper[axis])?.checked_sub(&base)?;
        if span.is_zero() {
            return None;
        }
        let m = self.points_per_axis[axis] as i128;
        let scaled = |q: &SmallRational| -> Option<SmallRational> {
            q.checked_sub(&base)?
                .checked_mul(&Ratio::from_integer(m - 1))?
                .checked_div(&span)
        };
        let first = scaled(lo)?.ceil().to_integer().clamp(0, m);
        let end = (scaled(hi)?.floor().to_integer() + 1).clamp(0, m);
        Some((first as usize, end as usize))
    }

    /// Exact coordinates as `i128` rationals, when they fit.
    pub(crate) fn coords_small(&self, index: usize) -> Option<Vec<SmallRational>> {
        let mut rest = index;
        let mut out = Vec::with_capacity(self.dim());
        for (axis, stride) in self.strides.iter().enumerate() {
            out.push(self.axis_small[axis][rest / stride]?);
            rest %= stride;
        }
        Some(out)
    }

    /// Index of the grid point nearest to `x` (ties resolved downwards).
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        let multi: Vec<usize> = x
            .iter()
            .enumerate()
            .map(|(axis, &v)| {
                let coords = &self.axis_f64[axis];
                let pos = coords.partition_point(|c| *c < v);
                if pos == 0 {
                    0
                } else if pos == coords.len() {
                    coords.len() - 1
                } else if (coords[pos] - v) < (v - coords[pos - 1]) {
                    pos
                } else {
                    pos - 1
                }
            })
            .collect();
        self.ravel(&multi)
    }

    /// Roughly `budget` grid indices spread evenly over the grid, always
    /// including the corners.
    pub fn subsample(&self, budget: usize) -> Vec<usize> {
        if self.len() <= budget.max(1) {
            return (0..self.len()).collect();
        }
        let per_axis = ((budget.max(2) as f64).powf(1.0 / self.dim() as f64).floor() as usize).max(2);
        let axes: Vec<Vec<usize>> = self
            .points_per_axis
            .iter()
            .map(|&m| {
                let k = per_axis.min(m);
                let mut v: Vec<usize> = (0..k)
                    .map(|j| {
                        (j as f64 * (m - 1) as f64 / (k - 1) as f64)
                            .round()
                            .to_usize()
                            .unwrap_or(0)
                    })
                    .collect();
                v.dedup();
                v
            })
            .collect();
        let mut out = vec![Vec::new()];
        for axis in &axes {
            out = out
                .into_iter()
                .flat_map(|prefix: Vec<usize>| {
                    axis.iter().map(move |&i| {
                        let mut p = prefix.clone();
                        p.push(i);
                        p
                    })
                })
                .collect();
        }
        out.iter().map(|m| self.ravel(m)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::ExactScalar;

    fn line(lo: f64, hi: f64, m: usize) -> Grid {
        Grid::uniform(&CompactBox::from_bounds(vec![lo], vec![hi]).unwrap(), m).unwrap()
    }

    fn flat(g: &Grid) -> Vec<Vec<f64>> {
        g.points::<f64>().into_iter().map(|p| p.into_coords()).collect()
    }

    #[test]
    fn grid_point_examples() {
        assert_eq!(flat(&line(0.0, 1.0, 3)), vec![vec![0.0], vec![0.5], vec![1.0]]);
        assert_eq!(
            flat(&line(0.0, 2.0, 5)),
            vec![vec![0.0], vec![0.5], vec![1.0], vec![1.5], vec![2.0]]
        );
        let sq = Grid::new(&CompactBox::cube(2, 0.0, 1.0).unwrap(), vec![2, 2]).unwrap();
        assert_eq!(
            flat(&sq),
            vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]]
        );
    }

    #[test]
    fn endpoints_are_bit_exact() {
        for (lo, hi) in [(0.1, 0.7), (-3.3, 1e-3), (0.0, 2.0), (1.0 / 3.0, 2.0 / 3.0)] {
            for m in [2, 3, 7, 2001] {
                let g = line(lo, hi, m);
                let pts = flat(&g);
                assert_eq!(pts[0][0].to_bits(), lo.to_bits());
                assert_eq!(pts[m - 1][0].to_bits(), hi.to_bits());
                assert_eq!(pts.len(), m);
            }
        }
    }

    #[test]
    fn decimal_grid_points_are_correctly_rounded() {
        let g = line(0.0, 2.0, 2001);
        let pts = flat(&g);
        assert_eq!(pts[600][0], 0.6);
        assert_eq!(pts[1400][0], 1.4);
        assert_eq!(g.axis_exact(0)[600], Rational::new(3.into(), 5.into()));
    }

    #[test]
    fn exact_grid_points() {
        let g = line(0.0, 1.0, 5);
        let pts = g.points::<ExactScalar>();
        assert!(pts.iter().all(|p| p[0].is_rational()));
        assert_eq!(pts[1][0], ExactScalar::from_parts(1, 4, 0, 1));
    }

    #[test]
    fn ravel_and_ranges() {
        let g = Grid::new(&CompactBox::cube(3, 0.0, 1.0).unwrap(), vec![3, 4, 5]).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.ravel(&g.unravel(i)), i);
        }
        let h = line(0.0, 2.0, 5);
        let q = |n: i64, d: i64| Rational::new(n.into(), d.into());
        assert_eq!(h.index_range(0, &q(0, 1), &q(1, 2)), Some((0, 1)));
        assert_eq!(h.index_range(0, &q(3, 2), &q(2, 1)), Some((3, 4)));
        assert_eq!(h.index_range(0, &q(1, 10), &q(2, 10)), None);
        assert_eq!(h.nearest_index(&[1.2]), 2);
        assert_eq!(h.nearest_index(&[1.3]), 3);
    }

    #[test]
    fn subsample_keeps_corners() {
        let g = Grid::new(&CompactBox::cube(2, 0.0, 1.0).unwrap(), vec![401, 401]).unwrap();
        let s = g.subsample(1000);
        assert!(s.len() <= 1000);
        assert!(s.contains(&0) && s.contains(&(g.len() - 1)));
        let small = line(0.0, 1.0, 11);
        assert_eq!(small.subsample(100).len(), 11);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let b = CompactBox::from_bounds(vec![0.0], vec![1.0]).unwrap();
        assert!(Grid::uniform(&b, 1).is_err());
        assert!(Grid::new(&b, vec![3, 3]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn direct_ranges_match_binary_search(
            lo in -5i64..5, span in 1i64..7, m in 2usize..60,
            a in -80i64..80, b in -80i64..80, d in 1i64..13,
        ) {
            let g = line(lo as f64, (lo + span) as f64, m);
            let q = |n: i64| Rational::new(n.into(), d.into());
            let (qa, qb) = (q(a.min(b)), q(a.max(b)));
            let coords = g.axis_exact(0);
            let first = coords.partition_point(|c| c < &qa);
            let end = coords.partition_point(|c| c <= &qb);
            proptest::prop_assert_eq!(g.index_range(0, &qa, &qb), (first < end).then(|| (first, end - 1)));
        }
    }
}
