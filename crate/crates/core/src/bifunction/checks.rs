//! Sampled falsifiers for the hypotheses on `f`.
//!
//! Every checker first runs deterministic structured probes (pairs of lattice
//! points with weight one half, and for exact scalars the irrational pairs
//! with rational midpoints) and then seeded random trials. The first
//! violation found, in that order, becomes the witness. A violation is a
//! strict inequality beyond the tolerance, so a zero tolerance never flags
//! an equality.

use std::cell::Cell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Bifunction;
use crate::error::{Error, Result};
use crate::geometry::{convex_combination, CompactBox, Grid, Point, Scalar};
use crate::setmap::ProbeConfig;
use crate::verdict::Verdict;

/// Points per axis of the lattice used for structured pairs.
const PAIR_LATTICE: usize = 5;
/// Points per axis of the lattice used for the fixed argument.
const BASE_LATTICE: usize = 3;
/// Grid points examined (as `x` and as `y`) by the closedness falsifier.
const CLOSEDNESS_BUDGET: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    Ii,
    Iii,
    Iv,
    QcvxSecond,
    QccvFirst,
    DiagonalZero,
}

impl ConditionId {
    pub const ALL: [ConditionId; 6] = [
        ConditionId::Ii,
        ConditionId::Iii,
        ConditionId::Iv,
        ConditionId::QcvxSecond,
        ConditionId::QccvFirst,
        ConditionId::DiagonalZero,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConditionId::Ii => "ii",
            ConditionId::Iii => "iii",
            ConditionId::Iv => "iv",
            ConditionId::QcvxSecond => "qcvx_second",
            ConditionId::QccvFirst => "qccv_first",
            ConditionId::DiagonalZero => "diagonal_zero",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[serde(bound = "S: Scalar")]
pub enum ConditionWitness<S: Scalar> {
    /// `f(x1, y) ≥ 0`, `f(x2, y) ≥ 0` but `f(λx1 + (1−λ)x2, y) < −tol`.
    SuperlevelSet {
        x1: Point<S>,
        x2: Point<S>,
        y: Point<S>,
        lambda: S,
        value: S,
    },
    /// `max_i f(x, x_i) < −tol` for `x = Σ w_i x_i`.
    Kkm {
        subset: Vec<Point<S>>,
        weights: Vec<S>,
        x: Point<S>,
        max_value: S,
    },
    /// `f(x, y) < −tol` while `f ≥ 0` at a point within every radius.
    Closedness {
        x: Point<S>,
        y: Point<S>,
        value: S,
        radii: Vec<f64>,
        approach: Vec<(Point<S>, Point<S>)>,
    },
    /// `f(x, λy1 + (1−λ)y2) > max(f(x, y1), f(x, y2)) + tol`.
    QuasiconvexSecond {
        x: Point<S>,
        y1: Point<S>,
        y2: Point<S>,
        lambda: S,
        values: [S; 3],
    },
    /// `f(λx1 + (1−λ)x2, y) < min(f(x1, y), f(x2, y)) − tol`.
    QuasiconcaveFirst {
        x1: Point<S>,
        x2: Point<S>,
        y: Point<S>,
        lambda: S,
        values: [S; 3],
    },
    /// `|f(x, x)| > tol`.
    Diagonal { x: Point<S>, value: S },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ConditionReport<S: Scalar> {
    pub condition_id: ConditionId,
    pub verdict: Verdict,
    pub witness: Option<ConditionWitness<S>>,
    pub samples_used: usize,
    pub tolerance: f64,
    /// Violations seen. Checkers stop at the first one, except the diagonal
    /// check, which counts every offending grid point.
    pub violation_count: usize,
}

impl<S: Scalar> ConditionReport<S> {
    fn new(
        condition_id: ConditionId,
        tolerance: f64,
        samples_used: usize,
        witness: Option<ConditionWitness<S>>,
        violation_count: usize,
    ) -> Self {
        ConditionReport {
            condition_id,
            verdict: if witness.is_some() {
                Verdict::Fail
            } else {
                Verdict::NoViolationFound
            },
            witness,
            samples_used,
            tolerance,
            violation_count,
        }
    }

    /// Re-evaluates the witness through `f` and reports whether the violation
    /// is reproduced at the recorded tolerance. Reports without a witness
    /// replay as `false`.
    pub fn replay(&self, f: &Bifunction<S>) -> Result<bool> {
        let tol = S::from_f64(self.tolerance);
        let Some(w) = &self.witness else {
            return Ok(false);
        };
        Ok(match w {
            ConditionWitness::SuperlevelSet { x1, x2, y, lambda, .. } => {
                let mid = x1.lerp(x2, lambda);
                f.eval(x1, y)? >= S::zero() && f.eval(x2, y)? >= S::zero() && f.eval(&mid, y)? < -tol
            }
            ConditionWitness::Kkm { subset, weights, .. } => {
                let x = convex_combination(subset, weights)?;
                let mut best: Option<S> = None;
                for xi in subset {
                    let v = f.eval(&x, xi)?;
                    best = Some(match best {
                        Some(b) if b >= v => b,
                        _ => v,
                    });
                }
                best.is_some_and(|b| b < -tol)
            }
            ConditionWitness::Closedness {
                x, y, radii, approach, ..
            } => {
                let mut ok = f.eval(x, y)? < -tol && approach.len() == radii.len();
                // offsets were added in floating point
                let scale = x
                    .coords()
                    .iter()
                    .chain(y.coords())
                    .map(|c| c.to_f64().abs())
                    .fold(1.0, f64::max);
                let slack = 4.0 * f64::EPSILON * scale;
                for ((xp, yp), r) in approach.iter().zip(radii) {
                    let near = linf(xp, x) <= r + slack && linf(yp, y) <= r + slack;
                    ok = ok && near && f.eval(xp, yp)? >= S::zero();
                }
                ok
            }
            ConditionWitness::QuasiconvexSecond { x, y1, y2, lambda, .. } => {
                let mid = y1.lerp(y2, lambda);
                let m = larger(f.eval(x, y1)?, f.eval(x, y2)?);
                f.eval(x, &mid)? > m + tol
            }
            ConditionWitness::QuasiconcaveFirst { x1, x2, y, lambda, .. } => {
                let mid = x1.lerp(x2, lambda);
                let m = smaller(f.eval(x1, y)?, f.eval(x2, y)?);
                f.eval(&mid, y)? < m - tol
            }
            ConditionWitness::Diagonal { x, .. } => f.eval(x, x)?.abs() > tol,
        })
    }
}

/// Sample sizes and seed shared by the checkers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckSettings {
    pub seed: u64,
    pub trials: usize,
    pub y_samples: usize,
    pub pair_samples: usize,
    pub subset_size_max: usize,
    pub segment_samples: usize,
    /// Base points for the map probes.
    pub probe_budget: usize,
    /// Overrides the scalar kind's default tolerance.
    pub tolerance: Option<f64>,
    /// Checkers run by `verify`.
    pub conditions: Vec<ConditionId>,
}

impl Default for CheckSettings {
    fn default() -> Self {
        CheckSettings {
            seed: 0,
            trials: 2000,
            y_samples: 64,
            pair_samples: 32,
            subset_size_max: 4,
            segment_samples: 3,
            probe_budget: 1024,
            tolerance: None,
            conditions: ConditionId::ALL.to_vec(),
        }
    }
}

impl CheckSettings {
    pub fn tolerance_for<S: Scalar>(&self) -> f64 {
        self.tolerance.unwrap_or_else(S::default_tolerance)
    }
}

fn larger<S: Scalar>(a: S, b: S) -> S {
    if b > a {
        b
    } else {
        a
    }
}

fn smaller<S: Scalar>(a: S, b: S) -> S {
    if b < a {
        b
    } else {
        a
    }
}

fn linf<S: Scalar>(a: &Point<S>, b: &Point<S>) -> f64 {
    a.coords()
        .iter()
        .zip(b.coords())
        .map(|(u, v)| (u.clone() - v.clone()).abs().to_f64())
        .fold(0.0, f64::max)
}

fn half<S: Scalar>() -> S {
    S::one() / (S::one() + S::one())
}

fn require(ok: bool, what: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::argument(format!("{what} must be at least 1")))
    }
}

fn pairs<T>(items: &[T]) -> impl Iterator<Item = (&T, &T)> {
    items
        .iter()
        .enumerate()
        .flat_map(move |(i, a)| items[i + 1..].iter().map(move |b| (a, b)))
}

/// Irrational point pairs with rational midpoints, one axis at a time, the
/// other coordinates at the box's lower corner.
fn probe_point_pairs<S: Scalar>(domain: &CompactBox<S>) -> Vec<(Point<S>, Point<S>)> {
    let mut out = Vec::new();
    for axis in 0..domain.dim() {
        for (a, b) in S::probe_pairs(&domain.lower()[axis], &domain.upper()[axis]) {
            let mut p = domain.lower().coords().to_vec();
            let mut q = p.clone();
            p[axis] = a;
            q[axis] = b;
            out.push((Point::new(p).expect("in box"), Point::new(q).expect("in box")));
        }
    }
    out
}

/// Condition (ii): `{x : f(x, y) ≥ 0}` is convex for every `y`.
pub fn check_condition_ii<S: Scalar>(
    f: &Bifunction<S>,
    domain: &CompactBox<S>,
    y_samples: usize,
    pair_samples: usize,
    tol: f64,
    seed: u64,
) -> Result<ConditionReport<S>> {
    require(y_samples >= 1, "y_samples")?;
    require(pair_samples >= 1, "pair_samples")?;
    let tol_s = S::from_f64(tol);
    let samples = Cell::new(0);
    let test = |x1: &Point<S>, x2: &Point<S>, y: &Point<S>, lambda: S| {
        samples.set(samples.get() + 1);
        let mid = x1.lerp(x2, &lambda);
        let value = f.eval_unchecked(mid.coords(), y.coords());
        (value < -tol_s.clone()).then(|| ConditionWitness::SuperlevelSet {
            x1: x1.clone(),
            x2: x2.clone(),
            y: y.clone(),
            lambda,
            value,
        })
    };
    let finish = |samples, w: Option<ConditionWitness<S>>| {
        let n = usize::from(w.is_some());
        Ok(ConditionReport::new(ConditionId::Ii, tol, samples, w, n))
    };

    let lattice = domain.lattice(PAIR_LATTICE);
    for y in &lattice {
        let members: Vec<&Point<S>> = lattice
            .iter()
            .filter(|x| f.eval_unchecked(x.coords(), y.coords()) >= S::zero())
            .collect();
        for (x1, x2) in pairs(&members) {
            if let Some(w) = test(x1, x2, y, half()) {
                return finish(samples.get(), Some(w));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..y_samples {
        let y = domain.sample(&mut rng);
        let members: Vec<Point<S>> = (0..2 * pair_samples)
            .map(|_| domain.sample(&mut rng))
            .filter(|x| f.eval_unchecked(x.coords(), y.coords()) >= S::zero())
            .collect();
        if members.len() < 2 {
            continue;
        }
        for _ in 0..pair_samples {
            let i = rng.gen_range(0..members.len());
            let j = rng.gen_range(0..members.len());
            let lambda = S::sample_weight(&mut rng);
            if let Some(w) = test(&members[i], &members[j], &y, lambda) {
                return finish(samples.get(), Some(w));
            }
        }
    }
    finish(samples.get(), None)
}

/// Condition (iii): `max_i f(x, x_i) ≥ 0` for every convex combination `x` of
/// a finite subset `{x_i}`.
pub fn check_condition_iii<S: Scalar>(
    f: &Bifunction<S>,
    domain: &CompactBox<S>,
    subset_size_max: usize,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<ConditionReport<S>> {
    require(subset_size_max >= 1, "subset_size_max")?;
    require(trials >= 1, "trials")?;
    let tol_s = S::from_f64(tol);
    let samples = Cell::new(0);
    let test = |subset: Vec<Point<S>>, weights: Vec<S>| -> Result<Option<ConditionWitness<S>>> {
        samples.set(samples.get() + 1);
        let x = convex_combination(&subset, &weights)?;
        let max_value = subset
            .iter()
            .map(|xi| f.eval_unchecked(x.coords(), xi.coords()))
            .reduce(larger)
            .expect("nonempty subset");
        Ok((max_value < -tol_s.clone()).then(|| ConditionWitness::Kkm {
            subset,
            weights,
            x,
            max_value,
        }))
    };
    let finish = |samples, w: Option<ConditionWitness<S>>| {
        let n = usize::from(w.is_some());
        Ok(ConditionReport::new(ConditionId::Iii, tol, samples, w, n))
    };

    if subset_size_max >= 2 {
        let corners = domain.lattice(2);
        let lattice = domain.lattice(PAIR_LATTICE);
        for (a, b) in pairs(&corners).chain(pairs(&lattice)) {
            if let Some(w) = test(vec![a.clone(), b.clone()], vec![half(), half()])? {
                return finish(samples.get(), Some(w));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let k = rng.gen_range(1..=subset_size_max);
        let subset: Vec<Point<S>> = (0..k).map(|_| domain.sample(&mut rng)).collect();
        let raw: Vec<S> = (0..k).map(|_| S::sample_weight(&mut rng)).collect();
        let total = raw.iter().cloned().fold(S::zero(), |a, b| a + b);
        let weights = raw.into_iter().map(|w| w / total.clone()).collect();
        if let Some(w) = test(subset, weights)? {
            return finish(samples.get(), Some(w));
        }
    }
    finish(samples.get(), None)
}

fn neighbours<S: Scalar>(domain: &CompactBox<S>, p: &Point<S>, r: f64) -> Vec<Point<S>> {
    let step = S::from_f64(r);
    let mut out = vec![p.clone()];
    for axis in 0..p.dim() {
        for delta in [step.clone(), -step.clone()] {
            let q = domain.clamp(&p.offset(axis, &delta));
            if !out.contains(&q) {
                out.push(q);
            }
        }
    }
    out
}

/// Condition (iv): `{(x, y) : f(x, y) ≥ 0}` is closed. For grid pairs with
/// `f(x, y) < −tol`, every radius (followed by halvings down to
/// `1e-12 · diam(C)`) is searched for a nearby pair with `f ≥ 0`.
pub fn check_condition_iv<S: Scalar>(
    f: &Bifunction<S>,
    grid: &Grid,
    radii: &[f64],
    tol: f64,
) -> Result<ConditionReport<S>> {
    let domain = grid.bounds::<S>();
    let cfg = ProbeConfig {
        radii: radii.to_vec(),
        margin: 1.0,
        budget: CLOSEDNESS_BUDGET,
    };
    cfg.validate()?;
    let schedule = cfg.schedule(domain.diameter(), 0.0);
    let tol_s = S::from_f64(tol);
    let base: Vec<Point<S>> = grid
        .subsample(CLOSEDNESS_BUDGET)
        .into_iter()
        .map(|i| grid.point(i))
        .collect();
    let mut samples = 0;
    for x in &base {
        for y in &base {
            samples += 1;
            let value = f.eval_unchecked(x.coords(), y.coords());
            if !(value < -tol_s.clone()) {
                continue;
            }
            let mut approach = Vec::with_capacity(schedule.len());
            for &r in &schedule {
                let xs = neighbours(&domain, x, r);
                let ys = neighbours(&domain, y, r);
                let found = xs.iter().find_map(|xp| {
                    ys.iter().find_map(|yp| {
                        samples += 1;
                        (f.eval_unchecked(xp.coords(), yp.coords()) >= S::zero()).then(|| (xp.clone(), yp.clone()))
                    })
                });
                match found {
                    Some(pair) => approach.push(pair),
                    None => break,
                }
            }
            if approach.len() == schedule.len() {
                let w = ConditionWitness::Closedness {
                    x: x.clone(),
                    y: y.clone(),
                    value,
                    radii: schedule,
                    approach,
                };
                return Ok(ConditionReport::new(ConditionId::Iv, tol, samples, Some(w), 1));
            }
        }
    }
    Ok(ConditionReport::new(ConditionId::Iv, tol, samples, None, 0))
}

/// `f(x, ·)` is quasiconvex:
/// `f(x, λy1 + (1−λ)y2) ≤ max(f(x, y1), f(x, y2)) + tol`.
pub fn check_quasiconvex_second<S: Scalar>(
    f: &Bifunction<S>,
    domain: &CompactBox<S>,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<ConditionReport<S>> {
    require(trials >= 1, "trials")?;
    let tol_s = S::from_f64(tol);
    let samples = Cell::new(0);
    let test = |x: &Point<S>, y1: &Point<S>, y2: &Point<S>, lambda: S| {
        samples.set(samples.get() + 1);
        let mid = y1.lerp(y2, &lambda);
        let a = f.eval_unchecked(x.coords(), y1.coords());
        let b = f.eval_unchecked(x.coords(), y2.coords());
        let m = f.eval_unchecked(x.coords(), mid.coords());
        (m > larger(a.clone(), b.clone()) + tol_s.clone()).then(|| ConditionWitness::QuasiconvexSecond {
            x: x.clone(),
            y1: y1.clone(),
            y2: y2.clone(),
            lambda,
            values: [a, b, m],
        })
    };
    let finish = |samples, w: Option<ConditionWitness<S>>| {
        let n = usize::from(w.is_some());
        Ok(ConditionReport::new(ConditionId::QcvxSecond, tol, samples, w, n))
    };

    let bases = domain.lattice(BASE_LATTICE);
    let lattice = domain.lattice(PAIR_LATTICE);
    let probes = probe_point_pairs(domain);
    for x in &bases {
        for (y1, y2) in pairs(&lattice).chain(probes.iter().map(|(a, b)| (a, b))) {
            if let Some(w) = test(x, y1, y2, half()) {
                return finish(samples.get(), Some(w));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let x = domain.sample(&mut rng);
        let y1 = domain.sample(&mut rng);
        let y2 = domain.sample(&mut rng);
        let lambda = S::sample_weight(&mut rng);
        if let Some(w) = test(&x, &y1, &y2, lambda) {
            return finish(samples.get(), Some(w));
        }
    }
    finish(samples.get(), None)
}

/// `f(·, y)` is quasiconcave:
/// `f(λx1 + (1−λ)x2, y) ≥ min(f(x1, y), f(x2, y)) − tol`.
pub fn check_quasiconcave_first<S: Scalar>(
    f: &Bifunction<S>,
    domain: &CompactBox<S>,
    trials: usize,
    tol: f64,
    seed: u64,
) -> Result<ConditionReport<S>> {
    require(trials >= 1, "trials")?;
    let tol_s = S::from_f64(tol);
    let samples = Cell::new(0);
    let test = |x1: &Point<S>, x2: &Point<S>, y: &Point<S>, lambda: S| {
        samples.set(samples.get() + 1);
        let mid = x1.lerp(x2, &lambda);
        let a = f.eval_unchecked(x1.coords(), y.coords());
        let b = f.eval_unchecked(x2.coords(), y.coords());
        let m = f.eval_unchecked(mid.coords(), y.coords());
        (m < smaller(a.clone(), b.clone()) - tol_s.clone()).then(|| ConditionWitness::QuasiconcaveFirst {
            x1: x1.clone(),
            x2: x2.clone(),
            y: y.clone(),
            lambda,
            values: [a, b, m],
        })
    };
    let finish = |samples, w: Option<ConditionWitness<S>>| {
        let n = usize::from(w.is_some());
        Ok(ConditionReport::new(ConditionId::QccvFirst, tol, samples, w, n))
    };

    let bases = domain.lattice(BASE_LATTICE);
    let lattice = domain.lattice(PAIR_LATTICE);
    let probes = probe_point_pairs(domain);
    for y in &bases {
        for (x1, x2) in pairs(&lattice).chain(probes.iter().map(|(a, b)| (a, b))) {
            if let Some(w) = test(x1, x2, y, half()) {
                return finish(samples.get(), Some(w));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..trials {
        let x1 = domain.sample(&mut rng);
        let x2 = domain.sample(&mut rng);
        let y = domain.sample(&mut rng);
        let lambda = S::sample_weight(&mut rng);
        if let Some(w) = test(&x1, &x2, &y, lambda) {
            return finish(samples.get(), Some(w));
        }
    }
    finish(samples.get(), None)
}

/// `|f(x, x)| ≤ tol` at every grid point; the witness is the first offender.
pub fn check_diagonal_zero<S: Scalar>(f: &Bifunction<S>, grid: &Grid, tol: f64) -> Result<ConditionReport<S>> {
    let tol_s = S::from_f64(tol);
    let mut witness = None;
    let mut count = 0;
    for i in 0..grid.len() {
        let x: Point<S> = grid.point(i);
        let value = f.eval_unchecked(x.coords(), x.coords());
        if value.abs() > tol_s {
            count += 1;
            if witness.is_none() {
                witness = Some(ConditionWitness::Diagonal { x, value });
            }
        }
    }
    Ok(ConditionReport::new(
        ConditionId::DiagonalZero,
        tol,
        grid.len(),
        witness,
        count,
    ))
}

/// Runs one checker with the sample sizes in `settings`. Closedness uses the
/// default probe radii of `grid`.
pub fn run_condition<S: Scalar>(
    id: ConditionId,
    f: &Bifunction<S>,
    grid: &Grid,
    settings: &CheckSettings,
) -> Result<ConditionReport<S>> {
    let domain = grid.bounds::<S>();
    let tol = settings.tolerance_for::<S>();
    let seed = settings.seed;
    match id {
        ConditionId::Ii => check_condition_ii(f, &domain, settings.y_samples, settings.pair_samples, tol, seed),
        ConditionId::Iii => check_condition_iii(f, &domain, settings.subset_size_max, settings.trials, tol, seed),
        ConditionId::Iv => check_condition_iv(f, grid, &ProbeConfig::for_grid(grid).radii, tol),
        ConditionId::QcvxSecond => check_quasiconvex_second(f, &domain, settings.trials, tol, seed),
        ConditionId::QccvFirst => check_quasiconcave_first(f, &domain, settings.trials, tol, seed),
        ConditionId::DiagonalZero => check_diagonal_zero(f, grid, tol),
    }
}
