//! Exhaustive grid solvers for EP, QEP, QVI and QOpt, the selection map `S`
//! and the QEP/QOpt equivalence check.
//!
//! Every inner minimization runs over the grid points of `K(x)`, the
//! restriction of the one global grid. For `f = f^h` the values of `h` on the
//! grid are tabulated exactly and compared in rational arithmetic, so ties
//! such as `h(x) − min h = ε` are decided without rounding noise. Other
//! bifunctions are evaluated in their own scalar type.

mod rangemin;
mod smap_graph;
mod theorem;

use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bifunction::{make_opt_bifunction, Bifunction, ObjectiveFunction, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{
    exact_f64, from_small, rational_to_f64, CompactBox, Grid, GridSpec, Point, Rational, Scalar, ScalarKind,
    SmallRational,
};
use crate::setmap::{ImageIndex, ImageTable, SetValuedMap};

use rangemin::RangeMin;
pub use smap_graph::{check_smap_closed_graph, SMapGraph};
pub use theorem::{verify_theorem_instance, TheoremReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ProblemKind {
    Qep,
    Ep,
    Qopt,
    Qvi,
}

impl std::fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ProblemKind::Qep => "QEP",
            ProblemKind::Ep => "EP",
            ProblemKind::Qopt => "QOPT",
            ProblemKind::Qvi => "QVI",
        })
    }
}

/// How the inner minimum over `K(x)` is computed for `f = f^h`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnerStrategy {
    /// Range-minimum queries over the tabulated `h`.
    #[default]
    Auto,
    /// Visit every point of each image.
    BruteForce,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Slack on `f ≥ 0`.
    pub eps: f64,
    /// Slack on `x ∈ K(x)`.
    pub delta: f64,
    pub grid: Grid,
    /// Worker threads; `None` uses the global pool. Never affects results.
    pub workers: Option<usize>,
    pub inner: InnerStrategy,
}

impl SolverConfig {
    pub fn new(grid: Grid, eps: f64, delta: f64) -> Result<Self> {
        for (name, v) in [("eps", eps), ("delta", delta)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::argument(format!("{name} must be a nonnegative number, got {v}")));
            }
        }
        Ok(SolverConfig {
            eps,
            delta,
            grid,
            workers: None,
            inner: InnerStrategy::Auto,
        })
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = Some(workers.max(1));
        self
    }

    pub fn with_inner(mut self, inner: InnerStrategy) -> Self {
        self.inner = inner;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Result<Self> {
        SolverConfig::new(self.grid.clone(), eps, self.delta)?;
        self.eps = eps;
        Ok(self)
    }

    fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            eps: self.eps,
            delta: self.delta,
            grid: self.grid.spec(),
            inner: self.inner,
        }
    }

    fn run<T: Send>(&self, job: impl FnOnce() -> T + Send) -> Result<T> {
        match self.workers {
            None => Ok(job()),
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::argument(format!("cannot start {n} workers: {e}")))?;
                Ok(pool.install(job))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub eps: f64,
    pub delta: f64,
    pub grid: GridSpec,
    pub inner: InnerStrategy,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Solution,
    /// `x` passes the membership test but `K(x)` contains no grid point.
    DegenerateImage,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Solution => "solution",
            RowStatus::DegenerateImage => "degenerate_image",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub index: usize,
    pub point: Vec<f64>,
    pub membership_residual: f64,
    /// `min_{y ∈ K(x)} f(x, y)`.
    pub min_f: Option<f64>,
    /// `h(x) − min_{z ∈ K(x)} h(z)`, QOpt only.
    pub gap: Option<f64>,
    pub status: RowStatus,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub problem_kind: ProblemKind,
    pub scalar_kind: ScalarKind,
    /// Solutions and flagged points, in grid (lexicographic) order.
    pub rows: Vec<ReportRow>,
    /// Grid points with `dist(x, K(x)) ≤ δ`.
    pub fixed_point_count: usize,
    pub min_gap_over_fixed_points: Option<f64>,
    pub config: ConfigEcho,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl PartialEq for SolveReport {
    fn eq(&self, other: &Self) -> bool {
        self.problem_kind == other.problem_kind
            && self.scalar_kind == other.scalar_kind
            && self.rows == other.rows
            && self.fixed_point_count == other.fixed_point_count
            && self.min_gap_over_fixed_points == other.min_gap_over_fixed_points
            && self.config == other.config
    }
}

impl SolveReport {
    pub fn solutions(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.status == RowStatus::Solution)
    }

    pub fn solution_points(&self) -> Vec<Vec<f64>> {
        self.solutions().map(|r| r.point.clone()).collect()
    }

    pub fn solution_indices(&self) -> Vec<usize> {
        self.solutions().map(|r| r.index).collect()
    }

    pub fn solution_count(&self) -> usize {
        self.solutions().count()
    }

    pub fn flagged(&self) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(|r| r.status != RowStatus::Solution)
    }
}

/// Members of `S(x)` found on the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct SMapResult<S: Scalar = f64> {
    pub base_point: Point<S>,
    pub members: Vec<Point<S>>,
    /// Grid indices of the members.
    pub member_indices: Vec<usize>,
}

/// Exact values of `h` on the grid, ranked for range-minimum queries.
#[derive(Debug)]
pub(crate) struct ObjectiveTable {
    ranks: Vec<u32>,
    /// Distinct values in increasing order.
    by_rank: Vec<Rational>,
    rmq: RangeMin,
}

/// Ranks of `values`: equal values share a rank, ranks follow the order.
fn rank<T: Ord + Sync>(values: &[T]) -> (Vec<u32>, Vec<usize>) {
    let mut order: Vec<u32> = (0..values.len() as u32).collect();
    order.par_sort_by(|&a, &b| values[a as usize].cmp(&values[b as usize]).then(a.cmp(&b)));
    let mut ranks = vec![0u32; values.len()];
    let mut firsts: Vec<usize> = Vec::new();
    for &i in &order {
        let i = i as usize;
        match firsts.last() {
            Some(&f) if values[f] == values[i] => {}
            _ => firsts.push(i),
        }
        ranks[i] = (firsts.len() - 1) as u32;
    }
    (ranks, firsts)
}

impl ObjectiveTable {
    pub(crate) fn new<S: Scalar>(h: &ObjectiveFunction<S>, grid: &Grid) -> Self {
        if let Some(values) = Self::values_small(h, grid) {
            let (ranks, firsts) = rank(&values);
            let by_rank = firsts.iter().map(|&i| from_small(&values[i])).collect();
            return Self::finish(grid, ranks, by_rank);
        }
        let values: Vec<Rational> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if let Some(v) = h.eval_exact(&grid.coords_exact(i)) {
                    return v;
                }
                let v = h.eval_unchecked(grid.point::<S>(i).coords());
                v.to_rational().unwrap_or_else(|| exact_f64(v.to_f64()))
            })
            .collect();
        let (ranks, firsts) = rank(&values);
        let by_rank = firsts.iter().map(|&i| values[i].clone()).collect();
        Self::finish(grid, ranks, by_rank)
    }

    /// All values in `i128` arithmetic, for expression objectives whose
    /// values fit.
    fn values_small<S: Scalar>(h: &ObjectiveFunction<S>, grid: &Grid) -> Option<Vec<SmallRational>> {
        let e = h.expression().filter(|_| h.has_exact())?;
        (0..grid.len())
            .into_par_iter()
            .map(|i| e.eval_small(&grid.coords_small(i)?))
            .collect()
    }

    fn finish(grid: &Grid, ranks: Vec<u32>, by_rank: Vec<Rational>) -> Self {
        let rmq = RangeMin::new(grid, ranks.clone());
        ObjectiveTable { ranks, by_rank, rmq }
    }

    pub(crate) fn value(&self, i: usize) -> &Rational {
        &self.by_rank[self.ranks[i] as usize]
    }

    /// `min_{z ∈ image} h(z)` by visiting every point of the image.
    pub(crate) fn min_over_scan(&self, grid: &Grid, image: &ImageIndex) -> &Rational {
        let rank = image
            .indices(grid)
            .into_iter()
            .map(|i| self.ranks[i])
            .min()
            .expect("nonempty image");
        &self.by_rank[rank as usize]
    }

    /// `min_{z ∈ image} h(z)`.
    pub(crate) fn min_over(&self, grid: &Grid, image: &ImageIndex) -> &Rational {
        let rank = match image {
            ImageIndex::Ranges(r) => self.rmq.box_min(grid, r),
            ImageIndex::Listed(v) => v.iter().map(|&i| self.ranks[i]).min().expect("nonempty image"),
        };
        &self.by_rank[rank as usize]
    }
}

/// The inner minimum at one base point.
#[derive(Clone, Debug)]
pub(crate) struct InnerMin {
    pub(crate) value: f64,
    pub(crate) satisfied: bool,
}

/// Image table and inner evaluator shared by the operations.
pub(crate) struct Prepared<'a, S: Scalar> {
    f: &'a Bifunction<S>,
    grid: &'a Grid,
    eps: f64,
    eps_exact: Rational,
    inner: InnerStrategy,
    images: ImageTable,
    objective: Option<ObjectiveTable>,
}

impl<'a, S: Scalar> Prepared<'a, S> {
    pub(crate) fn new(f: &'a Bifunction<S>, map: &'a SetValuedMap, cfg: &'a SolverConfig) -> Result<Self> {
        let grid = &cfg.grid;
        if f.dim() != map.dim() || grid.dim() != map.dim() {
            return Err(Error::DimensionMismatch {
                expected: map.dim(),
                found: if f.dim() != map.dim() { f.dim() } else { grid.dim() },
            });
        }
        let images = map.image_table(grid)?;
        let objective = f.objective().map(|h| ObjectiveTable::new(h, grid));
        Ok(Prepared {
            f,
            grid,
            eps: cfg.eps,
            eps_exact: exact_f64(cfg.eps),
            inner: cfg.inner,
            images,
            objective,
        })
    }

    pub(crate) fn grid(&self) -> &Grid {
        self.grid
    }

    pub(crate) fn images(&self) -> &ImageTable {
        &self.images
    }

    /// `min_{y ∈ image} f(x0, y)` for the grid point `x0`, and whether it is
    /// at least `−ε`.
    pub(crate) fn inner_min(&self, x0: usize, image: &ImageIndex) -> InnerMin {
        if let Some(table) = &self.objective {
            let hx = table.value(x0);
            let diff = match self.inner {
                InnerStrategy::Auto => table.min_over(self.grid, image) - hx,
                InnerStrategy::BruteForce => table.min_over_scan(self.grid, image) - hx,
            };
            return InnerMin {
                value: rational_to_f64(&diff),
                satisfied: diff >= -self.eps_exact.clone(),
            };
        }
        let x: Point<S> = self.grid.point(x0);
        let min = image
            .indices(self.grid)
            .into_iter()
            .map(|y| self.f.eval_unchecked(x.coords(), self.grid.point::<S>(y).coords()))
            .reduce(|a, b| if b < a { b } else { a })
            .expect("nonempty image");
        InnerMin {
            value: min.to_f64(),
            satisfied: !(min < -S::from_f64(self.eps)),
        }
    }

    /// Grid indices of `S(x)` for the image `image` of `x`.
    pub(crate) fn smap_members(&self, image: &ImageIndex) -> Vec<usize> {
        image
            .indices(self.grid)
            .into_par_iter()
            .filter(|&x0| self.inner_min(x0, image).satisfied)
            .collect()
    }
}

fn kind_for<S: Scalar>(f: &Bifunction<S>, map: &SetValuedMap) -> ProblemKind {
    if f.provenance() == Provenance::QviAdapter {
        ProblemKind::Qvi
    } else if map.is_whole_domain() {
        ProblemKind::Ep
    } else {
        ProblemKind::Qep
    }
}

/// Members of `S(x) = {x0 ∈ K(x) : f(x0, y) ≥ −ε for all y ∈ K(x)}` on the
/// grid.
pub fn smap<S: Scalar>(
    f: &Bifunction<S>,
    map: &SetValuedMap,
    x: &Point<S>,
    cfg: &SolverConfig,
) -> Result<SMapResult<S>> {
    cfg.run(|| {
        let image = map.image_grid_index(x, &cfg.grid)?;
        let prepared = Prepared::new(f, map, cfg)?;
        let member_indices = prepared.smap_members(&image);
        Ok(SMapResult {
            base_point: x.clone(),
            members: member_indices.iter().map(|&i| cfg.grid.point(i)).collect(),
            member_indices,
        })
    })?
}

/// QEP solutions on the grid: `dist(x, K(x)) ≤ δ` and
/// `min_{y ∈ K(x)} f(x, y) ≥ −ε`. The report is labelled EP when `K ≡ C`
/// and QVI when `f = f_T`.
pub fn solve_qep<S: Scalar>(f: &Bifunction<S>, map: &SetValuedMap, cfg: &SolverConfig) -> Result<SolveReport> {
    let start = Instant::now();
    cfg.run(|| {
        let prepared = Prepared::new(f, map, cfg)?;
        let grid = &cfg.grid;
        let table = prepared.images();
        let fixed: Vec<usize> = (0..grid.len()).filter(|&i| table.residuals[i] <= cfg.delta).collect();
        let rows: Vec<Option<ReportRow>> = fixed
            .par_iter()
            .map(|&i| {
                let residual = table.residuals[i];
                let Some(image) = &table.images[i] else {
                    return Some(flagged_row(grid, i, residual));
                };
                let inner = prepared.inner_min(i, image);
                inner.satisfied.then(|| ReportRow {
                    index: i,
                    point: grid.coords_f64(i),
                    membership_residual: residual,
                    min_f: Some(inner.value),
                    gap: None,
                    status: RowStatus::Solution,
                })
            })
            .collect();
        Ok(SolveReport {
            problem_kind: kind_for(f, map),
            scalar_kind: S::KIND,
            rows: rows.into_iter().flatten().collect(),
            fixed_point_count: fixed.len(),
            min_gap_over_fixed_points: None,
            config: cfg.echo(),
            wall_time: start.elapsed(),
        })
    })?
}

fn flagged_row(grid: &Grid, i: usize, residual: f64) -> ReportRow {
    ReportRow {
        index: i,
        point: grid.coords_f64(i),
        membership_residual: residual,
        min_f: None,
        gap: None,
        status: RowStatus::DegenerateImage,
    }
}

/// EP solutions: `solve_qep` with `K ≡ C`.
pub fn solve_ep<S: Scalar>(f: &Bifunction<S>, domain: &CompactBox<S>, cfg: &SolverConfig) -> Result<SolveReport> {
    let map = SetValuedMap::whole_domain(domain)?;
    solve_qep(f, &map, cfg)
}

/// `h(x) − min_{z ∈ K(x)} h(z)`, the minimum taken over the grid points of
/// `K(x)`.
pub fn qopt_gap<S: Scalar>(
    h: &ObjectiveFunction<S>,
    map: &SetValuedMap,
    x: &Point<S>,
    cfg: &SolverConfig,
) -> Result<f64> {
    let image = map.image_grid_index(x, &cfg.grid)?;
    let exact_x = x.to_rational();
    let value = |p: &Point<S>, exact: Option<Vec<Rational>>| -> Rational {
        exact.and_then(|q| h.eval_exact(&q)).unwrap_or_else(|| {
            let v = h.eval_unchecked(p.coords());
            v.to_rational().unwrap_or_else(|| exact_f64(v.to_f64()))
        })
    };
    let hx = value(x, exact_x);
    let min = image
        .indices(&cfg.grid)
        .into_iter()
        .map(|j| value(&cfg.grid.point(j), Some(cfg.grid.coords_exact(j))))
        .min()
        .expect("nonempty image");
    Ok(rational_to_f64(&(hx - min)))
}

/// QOpt solutions on the grid: fixed points of `K` (within δ) whose gap is at
/// most ε. The report carries the smallest gap over all fixed points.
pub fn solve_qopt<S: Scalar>(h: &ObjectiveFunction<S>, map: &SetValuedMap, cfg: &SolverConfig) -> Result<SolveReport> {
    let start = Instant::now();
    cfg.run(|| {
        let grid = &cfg.grid;
        if h.domain().dim() != map.dim() || grid.dim() != map.dim() {
            return Err(Error::DimensionMismatch {
                expected: map.dim(),
                found: h.domain().dim(),
            });
        }
        let images = map.image_table(grid)?;
        let values = ObjectiveTable::new(h, grid);
        let eps = exact_f64(cfg.eps);
        let fixed: Vec<usize> = (0..grid.len()).filter(|&i| images.residuals[i] <= cfg.delta).collect();
        let scanned: Vec<(ReportRow, Option<Rational>)> = fixed
            .par_iter()
            .map(|&i| {
                let residual = images.residuals[i];
                let Some(image) = &images.images[i] else {
                    return (flagged_row(grid, i, residual), None);
                };
                let gap = values.value(i) - values.min_over(grid, image);
                let g = rational_to_f64(&gap);
                let row = ReportRow {
                    index: i,
                    point: grid.coords_f64(i),
                    membership_residual: residual,
                    min_f: Some(if g == 0.0 { 0.0 } else { -g }),
                    gap: Some(g),
                    status: RowStatus::Solution,
                };
                (row, Some(gap))
            })
            .collect();
        let min_gap = scanned
            .iter()
            .filter_map(|(_, g)| g.as_ref())
            .min()
            .map(rational_to_f64);
        let rows = scanned
            .into_iter()
            .filter(|(row, gap)| match gap {
                Some(g) => *g <= eps,
                None => row.status == RowStatus::DegenerateImage,
            })
            .map(|(row, _)| row)
            .collect();
        Ok(SolveReport {
            problem_kind: ProblemKind::Qopt,
            scalar_kind: S::KIND,
            rows,
            fixed_point_count: fixed.len(),
            min_gap_over_fixed_points: min_gap,
            config: cfg.echo(),
            wall_time: start.elapsed(),
        })
    })?
}

/// Whether `QEP(f^h, K)` and `QOpt(h, K)` have the same grid solutions, as
/// ordered sequences.
pub fn check_lemma_equivalence<S: Scalar>(
    h: &ObjectiveFunction<S>,
    map: &SetValuedMap,
    cfg: &SolverConfig,
) -> Result<bool> {
    let qep = solve_qep(&make_opt_bifunction(h), map, cfg)?;
    let qopt = solve_qopt(h, map, cfg)?;
    Ok(qep.solution_points() == qopt.solution_points())
}

/// `min_{y ∈ K(x)} f(x, y)` evaluated pair by pair in floating point, for
/// re-verifying reported rows.
pub fn recompute_min_f<S: Scalar>(f: &Bifunction<S>, map: &SetValuedMap, grid: &Grid, index: usize) -> Result<f64> {
    let x: Point<S> = grid.point(index);
    let exact = grid.coords_exact(index);
    let region = map.evaluate_exact(&exact)?;
    let image = map
        .image_index(&exact, &region, grid)
        .ok_or_else(|| Error::DegenerateImage {
            x: grid.coords_f64(index),
        })?;
    image
        .indices(grid)
        .into_iter()
        .map(|j| f.eval(&x, &grid.point(j)).map(|v| v.to_f64()))
        .try_fold(f64::INFINITY, |acc, v| v.map(|v| acc.min(v)))
}
