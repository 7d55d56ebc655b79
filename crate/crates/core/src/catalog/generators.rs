//! Seeded instance generators and the brute-force QVI oracle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{KnownFacts, Payload, ProblemInstance, SolverDefaults};
use crate::bifunction::{CheckSettings, ObjectiveFunction, QviOperator};
use crate::error::{Error, Result};
use crate::expr::{format_rational, Expression, VarScope};
use crate::geometry::{exact_f64, CompactBox, Grid, Rational};
use crate::setmap::{MapVariant, SetValuedMap};

const MAX_ATTEMPTS: usize = 16;
const RANDOM_POINTS: usize = 401;
const QVI_POINTS_1D: usize = 201;
const QVI_POINTS_2D: usize = 21;
/// Nonzero pairings on the QVI grids are at least `2.5e-7` in magnitude, so
/// this slack only absorbs rounding.
const QVI_EPS: f64 = 1e-9;

/// `n / 10^digits` as expression text.
fn decimal(n: i64, digits: u32) -> String {
    let q = Rational::new(n.into(), 10i64.pow(digits).into());
    let s = format_rational(&q);
    if n < 0 {
        format!("({s})")
    } else {
        s
    }
}

fn hundredths(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> i64 {
    rng.gen_range(lo..=hi)
}

fn unit_cube(dim: usize) -> CompactBox<f64> {
    CompactBox::cube(dim, 0.0, 1.0).expect("unit cube")
}

/// `K(x)_i = [c_i(x) − w_i, c_i(x) + w_i]` with `c(x) = p + ρ(x − p)`,
/// clipped to the unit cube. Its fixed points form the box with half-widths
/// `w_i / (1 − ρ_i) = r_i` around `p`, whose corners are grid points.
fn contracting_box(rng: &mut ChaCha8Rng, dim: usize) -> Result<SetValuedMap> {
    let scope = VarScope::x(dim);
    let mut lower = Vec::with_capacity(dim);
    let mut upper = Vec::with_capacity(dim);
    for i in 1..=dim {
        let p = hundredths(rng, 0, 100);
        let rho = hundredths(rng, 10, 90);
        let r = hundredths(rng, 5, 30);
        let w = r * (100 - rho);
        let centre = format!("{} + {}*(x_{i} - {})", decimal(p, 2), decimal(rho, 2), decimal(p, 2));
        lower.push(Expression::parse(&format!("{centre} - {}", decimal(w, 4)), scope)?);
        upper.push(Expression::parse(&format!("{centre} + {}", decimal(w, 4)), scope)?);
    }
    SetValuedMap::new(&unit_cube(dim), MapVariant::MovingBox { lower, upper })
}

fn affine(rng: &mut ChaCha8Rng, dim: usize, slope: i64, offset: i64) -> (String, Vec<i64>) {
    let coeffs: Vec<i64> = (0..dim).map(|_| hundredths(rng, -slope, slope)).collect();
    let mut text = decimal(hundredths(rng, -offset, offset), 2);
    for (i, a) in coeffs.iter().enumerate() {
        text.push_str(&format!(" + {}*x_{}", decimal(*a, 2), i + 1));
    }
    (text, coeffs)
}

fn usable(map: &SetValuedMap, grid: &Grid) -> bool {
    map.image_table(grid)
        .map(|t| t.images.iter().all(Option::is_some) && t.residuals.contains(&0.0))
        .unwrap_or(false)
}

/// A hypothesis-satisfying instance on `[0, 1]^dim`: `h` is the maximum of
/// 3 to 6 affine functions (convex, Lipschitz with the recorded bound) and
/// `K` is a contracting moving box. The recommended slack is
/// `ε = 2·L·step` on the 401-point grid.
pub fn random_instance(seed: u64, dim: usize) -> Result<ProblemInstance> {
    if !(1..=2).contains(&dim) {
        return Err(Error::argument(format!(
            "random instances have dimension 1 or 2, got {dim}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(2).wrapping_add(dim as u64 - 1));
    let domain = unit_cube(dim);
    let grid = Grid::uniform(&domain, RANDOM_POINTS)?;
    for _ in 0..MAX_ATTEMPTS {
        let map = contracting_box(&mut rng, dim)?;
        let pieces = rng.gen_range(3..=6);
        let mut terms = Vec::with_capacity(pieces);
        let mut lipschitz = 0.0_f64;
        for _ in 0..pieces {
            let (text, coeffs) = affine(&mut rng, dim, 100, 50);
            let norm = coeffs.iter().map(|a| (*a as f64 / 100.0).powi(2)).sum::<f64>().sqrt();
            lipschitz = lipschitz.max(norm);
            terms.push(text);
        }
        if !usable(&map, &grid) || lipschitz == 0.0 {
            continue;
        }
        // round the bound up so it stays an upper bound after rounding
        let lipschitz = lipschitz * (1.0 + 1e-12);
        let h = ObjectiveFunction::from_expression(
            &domain,
            Expression::parse(&format!("max({})", terms.join(", ")), VarScope::x(dim))?,
        )?
        .with_continuity_claim(true)
        .with_lipschitz(lipschitz);
        let eps = 2.0 * lipschitz * grid.max_step();
        return Ok(ProblemInstance {
            name: format!("random-{dim}d"),
            domain,
            map,
            payload: Payload::Objective(h),
            known_facts: KnownFacts {
                solutions_empty: Some(false),
                lipschitz: Some(lipschitz),
                ..KnownFacts::default()
            },
            seed: Some(seed),
            solver: SolverDefaults::uniform(dim, RANDOM_POINTS, eps),
            checks: CheckSettings {
                seed,
                ..CheckSettings::default()
            },
        });
    }
    Err(Error::Generator(format!(
        "no usable map after {MAX_ATTEMPTS} attempts (seed {seed}, dimension {dim})"
    )))
}

/// A QVI instance with 1 to 3 vertices affine in `x` and a contracting moving
/// box. The expected solution set comes from [`qvi_oracle`].
pub fn qvi_instance(seed: u64) -> Result<ProblemInstance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5157_4931);
    let dim = rng.gen_range(1..=2);
    let domain = unit_cube(dim);
    let points = if dim == 1 { QVI_POINTS_1D } else { QVI_POINTS_2D };
    let grid = Grid::uniform(&domain, points)?;
    let scope = VarScope::x(dim);
    for _ in 0..MAX_ATTEMPTS {
        let map = contracting_box(&mut rng, dim)?;
        if !usable(&map, &grid) {
            continue;
        }
        let count = rng.gen_range(1..=3);
        let mut vertices: Vec<Vec<Expression>> = Vec::with_capacity(count);
        for _ in 0..count {
            let mut v = Vec::with_capacity(dim);
            for _ in 0..dim {
                let (text, _) = affine(&mut rng, dim, 100, 100);
                v.push(Expression::parse(&text, scope)?);
            }
            vertices.push(v);
        }
        let exprs = vertices.clone();
        let exact_vertices = move |x: &[Rational]| -> Vec<Vec<Rational>> {
            exprs
                .iter()
                .map(|v| v.iter().map(|e| e.eval_exact(x, &[])).collect())
                .collect()
        };
        let solutions = qvi_oracle(&exact_vertices, &map, &grid, QVI_EPS, 0.0)?;
        let t = QviOperator::from_expressions(&domain, vertices)?;
        return Ok(ProblemInstance {
            name: "qvi".into(),
            domain,
            map,
            payload: Payload::Qvi(t),
            known_facts: KnownFacts {
                solutions_empty: Some(solutions.is_empty()),
                solutions: Some(solutions),
                ..KnownFacts::default()
            },
            seed: Some(seed),
            solver: SolverDefaults::uniform(dim, points, QVI_EPS),
            checks: CheckSettings {
                seed,
                ..CheckSettings::default()
            },
        });
    }
    Err(Error::Generator(format!(
        "no usable map after {MAX_ATTEMPTS} attempts (seed {seed})"
    )))
}

/// Grid points `x` with `dist(x, K(x)) ≤ delta` and
/// `min_{y ∈ K(x)} max_{v ∈ T(x)} ⟨v, y − x⟩ ≥ −eps`, in exact arithmetic.
/// Images are found by testing every grid point for membership.
pub fn qvi_oracle(
    vertices: &dyn Fn(&[Rational]) -> Vec<Vec<Rational>>,
    map: &SetValuedMap,
    grid: &Grid,
    eps: f64,
    delta: f64,
) -> Result<Vec<Vec<f64>>> {
    let eps = -exact_f64(eps);
    let all: Vec<Vec<Rational>> = (0..grid.len()).map(|i| grid.coords_exact(i)).collect();
    let mut out = Vec::new();
    for (i, x) in all.iter().enumerate() {
        let region = map.evaluate_exact(x)?;
        if region.distance_exact(x) > delta {
            continue;
        }
        let vs = vertices(x);
        let mut ok = true;
        let mut seen = false;
        for y in all.iter().filter(|y| region.contains(y)) {
            seen = true;
            let best = vs
                .iter()
                .map(|v| {
                    v.iter()
                        .zip(y.iter().zip(x))
                        .map(|(vi, (yi, xi))| vi * (yi - xi))
                        .fold(Rational::from_integer(0.into()), |a, b| a + b)
                })
                .max()
                .ok_or_else(|| Error::instance("operator has an empty vertex list"))?;
            if best < eps {
                ok = false;
                break;
            }
        }
        if ok && seen {
            out.push(grid.coords_f64(i));
        }
    }
    Ok(out)
}
