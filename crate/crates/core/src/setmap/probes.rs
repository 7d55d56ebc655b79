//! Sampled falsifiers for the topological hypotheses on `K`.
//!
//! Closedness and lower semicontinuity are limit properties, so a finite
//! sample can refute them but never establish them. Each probe walks the
//! caller's radii and then keeps halving the last radius down to a floor of
//! `1e-12 · diam(C)`, or one grid step for maps that only exist on a grid; a
//! violation must persist along that whole schedule. A map with continuous
//! bounds cannot sustain a jump of `margin` at the floor scale, while a
//! genuine discontinuity does at every scale.

use serde::{Deserialize, Serialize};

use super::{ConvexRegion, MapVariant, SetValuedMap};
use crate::error::{Error, Result};
use crate::geometry::{distance, exact_f64, f64_to_small, to_small, CompactBox, Grid, Rational, SmallRational};
use crate::verdict::Verdict;

/// Smallest probe radius relative to the domain diameter.
pub const LIMIT_FLOOR: f64 = 1e-12;

/// Base points examined per probe unless configured otherwise.
pub const DEFAULT_BUDGET: usize = 4096;

/// Image points sampled per base point by the convexity probe.
const CONVEXITY_SAMPLE_CAP: usize = 16;

/// Anything whose graph can be probed: a constraint map or a map computed on
/// a grid.
pub trait GraphProbe: Sync {
    fn dim(&self) -> usize;

    fn domain(&self) -> CompactBox<f64>;

    /// Extreme points of the (hull of the) image at `x`.
    fn extreme_points(&self, x: &[f64]) -> Result<Vec<Vec<f64>>>;

    fn member(&self, x: &[f64], z: &[f64]) -> Result<bool>;

    /// `member(x, z)` for every `z`, sharing the work at `x`.
    fn members(&self, x: &[f64], zs: &[Vec<f64>]) -> Result<Vec<bool>> {
        zs.iter().map(|z| self.member(x, z)).collect()
    }

    /// Distance from `z` to the closure of the image at `x`.
    fn distance(&self, x: &[f64], z: &[f64]) -> Result<f64>;

    /// A member of the image at `x` as close to `z` as the probe can find.
    fn nearest_member(&self, x: &[f64], z: &[f64]) -> Result<Option<Vec<f64>>>;

    /// Up to `cap` members of the image at `x`, spread over the image.
    fn members_sample(&self, x: &[f64], grid: &Grid, cap: usize) -> Result<Vec<Vec<f64>>>;

    /// Smallest scale at which the map can change. Maps defined on a grid
    /// cannot be resolved below one grid step.
    fn resolution(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeKind {
    ClosedGraph,
    LowerSemicontinuity,
    ConvexValues,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProbeWitness {
    /// `z ∉ K(x)` although graph points come within every radius of `(x, z)`.
    ClosedGraph {
        x: Vec<f64>,
        z: Vec<f64>,
        image_distance: f64,
        radii: Vec<f64>,
        graph_distances: Vec<f64>,
    },
    /// `y ∈ K(x)` stays at least `margin` away from `K(x')` for some `x'`
    /// within every radius of `x`.
    LowerSemicontinuity {
        x: Vec<f64>,
        y: Vec<f64>,
        radii: Vec<f64>,
        distances: Vec<f64>,
    },
    /// `λ·y1 + (1−λ)·y2 ∉ K(x)` for members `y1`, `y2`.
    ConvexValues {
        x: Vec<f64>,
        y1: Vec<f64>,
        y2: Vec<f64>,
        lambda: f64,
        point: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopologyProbeReport {
    pub kind: ProbeKind,
    pub verdict: Verdict,
    pub witness: Option<ProbeWitness>,
    pub probe_radii: Vec<f64>,
    pub samples_used: usize,
}

impl TopologyProbeReport {
    fn new(kind: ProbeKind, radii: &[f64], samples_used: usize, witness: Option<ProbeWitness>) -> Self {
        TopologyProbeReport {
            kind,
            verdict: if witness.is_some() {
                Verdict::Fail
            } else {
                Verdict::NoViolationFound
            },
            witness,
            probe_radii: radii.to_vec(),
            samples_used,
        }
    }
}

/// Radii, margin and sampling budget for the probes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub radii: Vec<f64>,
    pub margin: f64,
    pub budget: usize,
}

impl ProbeConfig {
    /// Radii `(0.1, 0.05, 0.025, 0.0125)·diam(C)` and a margin of ten grid
    /// steps.
    pub fn for_grid(grid: &Grid) -> Self {
        let diam = grid.bounds::<f64>().diameter();
        ProbeConfig {
            radii: [0.1, 0.05, 0.025, 0.0125].iter().map(|r| r * diam).collect(),
            margin: 10.0 * grid.max_step(),
            budget: DEFAULT_BUDGET,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.radii.is_empty() {
            return Err(Error::argument("at least one probe radius is required"));
        }
        if self.radii.iter().any(|r| !(*r > 0.0)) {
            return Err(Error::argument("probe radii must be positive"));
        }
        if self.radii.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::argument("probe radii must be strictly decreasing"));
        }
        if !(self.margin > 0.0) {
            return Err(Error::argument("probe margin must be positive"));
        }
        Ok(())
    }

    /// Smallest radius probed: `1e-12 · diameter` or the map's resolution.
    pub fn floor(diameter: f64, resolution: f64) -> f64 {
        (LIMIT_FLOOR * diameter).max(resolution).max(f64::MIN_POSITIVE)
    }

    /// The caller's radii followed by halvings down to the floor.
    pub fn schedule(&self, diameter: f64, resolution: f64) -> Vec<f64> {
        let floor = ProbeConfig::floor(diameter, resolution);
        let mut out = self.radii.clone();
        let mut r = *out.last().expect("validated");
        while r / 2.0 >= floor {
            r /= 2.0;
            out.push(r);
        }
        out
    }
}

fn clip_offset(domain: &CompactBox<f64>, x: &[f64], axis: usize, delta: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[axis] = (y[axis] + delta).clamp(domain.lower()[axis], domain.upper()[axis]);
    y
}

/// Offsets `x ± r·e_i` clipped to the domain, excluding `x` itself.
fn neighbours(domain: &CompactBox<f64>, x: &[f64], r: f64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(2 * x.len());
    for axis in 0..x.len() {
        for sign in [1.0, -1.0] {
            let y = clip_offset(domain, x, axis, sign * r);
            if y != x && !out.contains(&y) {
                out.push(y);
            }
        }
    }
    out
}

/// Distance from `(x, z)` to the sampled graph within reach `r`.
fn graph_distance<P: GraphProbe + ?Sized>(
    map: &P,
    domain: &CompactBox<f64>,
    x: &[f64],
    z: &[f64],
    r: f64,
    floor: f64,
) -> Result<f64> {
    let mut best = f64::INFINITY;
    let mut bases = vec![x.to_vec()];
    bases.extend(neighbours(domain, x, r));
    bases.extend(neighbours(domain, x, floor));
    for xp in bases {
        if let Some(zp) = map.nearest_member(&xp, z)? {
            let dx = distance(&xp, x);
            let dz = distance(&zp, z);
            best = best.min((dx * dx + dz * dz).sqrt());
        }
    }
    Ok(best)
}

/// Falsifier for a closed graph. A candidate `(x, z)` is a limit of graph
/// points taken at the floor scale with `z ∉ K(x)`; it counts when `z` is at
/// least `margin` from `K(x)` (a jump) or at distance zero (an image that is
/// not closed), and graph points approach it at every radius.
pub fn check_closed_graph<P: GraphProbe + ?Sized>(
    map: &P,
    grid: &Grid,
    cfg: &ProbeConfig,
) -> Result<TopologyProbeReport> {
    cfg.validate()?;
    let domain = map.domain();
    let schedule = cfg.schedule(domain.diameter(), map.resolution());
    let floor = ProbeConfig::floor(domain.diameter(), map.resolution());
    let mut samples = 0;
    for idx in grid.subsample(cfg.budget) {
        let x = grid.coords_f64(idx);
        let mut sources = vec![x.clone()];
        sources.extend(neighbours(&domain, &x, floor));
        for xp in sources {
            for z in map.extreme_points(&xp)? {
                samples += 1;
                if map.member(&x, &z)? {
                    continue;
                }
                let d = map.distance(&x, &z)?;
                if !(d >= cfg.margin || d == 0.0) {
                    continue;
                }
                let mut graph_distances = Vec::with_capacity(schedule.len());
                let mut approached = true;
                for &r in &schedule {
                    let g = graph_distance(map, &domain, &x, &z, r, floor)?;
                    graph_distances.push(g);
                    if g > r {
                        approached = false;
                        break;
                    }
                }
                if approached {
                    let witness = ProbeWitness::ClosedGraph {
                        x,
                        z,
                        image_distance: d,
                        radii: schedule,
                        graph_distances,
                    };
                    return Ok(TopologyProbeReport::new(
                        ProbeKind::ClosedGraph,
                        &cfg.radii,
                        samples,
                        Some(witness),
                    ));
                }
            }
        }
    }
    Ok(TopologyProbeReport::new(
        ProbeKind::ClosedGraph,
        &cfg.radii,
        samples,
        None,
    ))
}

/// Falsifier for lower semicontinuity: a member `y` of `K(x)` that stays at
/// least `margin` away from `K(x')` for some `x'` at every radius.
pub fn check_lsc<P: GraphProbe + ?Sized>(map: &P, grid: &Grid, cfg: &ProbeConfig) -> Result<TopologyProbeReport> {
    cfg.validate()?;
    let domain = map.domain();
    let schedule = cfg.schedule(domain.diameter(), map.resolution());
    let mut samples = 0;
    for idx in grid.subsample(cfg.budget) {
        let x = grid.coords_f64(idx);
        for y in map.extreme_points(&x)? {
            if !map.member(&x, &y)? {
                continue;
            }
            let mut distances = Vec::with_capacity(schedule.len());
            let mut persists = true;
            for &r in &schedule {
                let mut worst = 0.0_f64;
                for xp in neighbours(&domain, &x, r) {
                    samples += 1;
                    worst = worst.max(map.distance(&xp, &y)?);
                }
                distances.push(worst);
                if worst < cfg.margin {
                    persists = false;
                    break;
                }
            }
            if persists {
                let witness = ProbeWitness::LowerSemicontinuity {
                    x,
                    y,
                    radii: schedule,
                    distances,
                };
                return Ok(TopologyProbeReport::new(
                    ProbeKind::LowerSemicontinuity,
                    &cfg.radii,
                    samples,
                    Some(witness),
                ));
            }
        }
    }
    Ok(TopologyProbeReport::new(
        ProbeKind::LowerSemicontinuity,
        &cfg.radii,
        samples,
        None,
    ))
}

/// Falsifier for convex images: segments between sampled members must stay
/// inside the image.
pub fn check_convex_values<P: GraphProbe + ?Sized>(
    map: &P,
    grid: &Grid,
    segment_samples: usize,
    cfg: &ProbeConfig,
) -> Result<TopologyProbeReport> {
    if segment_samples == 0 {
        return Err(Error::argument("segment_samples must be at least 1"));
    }
    let mut samples = 0;
    for idx in grid.subsample(cfg.budget) {
        let x = grid.coords_f64(idx);
        let members = map.members_sample(&x, grid, CONVEXITY_SAMPLE_CAP)?;
        let n = members.len();
        if n < 2 {
            continue;
        }
        let mut pairs = vec![(0, n - 1)];
        for i in 0..n {
            for j in i + 1..n {
                if (i, j) != (0, n - 1) {
                    pairs.push((i, j));
                }
            }
        }
        let mut tests = Vec::new();
        for (i, j) in pairs {
            let (y1, y2) = (&members[i], &members[j]);
            if y1 == y2 {
                continue;
            }
            for k in 1..=segment_samples {
                let lambda = k as f64 / (segment_samples + 1) as f64;
                let point: Vec<f64> = y1
                    .iter()
                    .zip(y2)
                    .map(|(a, b)| (lambda * a + (1.0 - lambda) * b).clamp(a.min(*b), a.max(*b)))
                    .collect();
                tests.push((i, j, lambda, point));
            }
        }
        let points: Vec<Vec<f64>> = tests.iter().map(|t| t.3.clone()).collect();
        let inside = map.members(&x, &points)?;
        match inside.iter().position(|m| !m) {
            None => samples += tests.len(),
            Some(pos) => {
                samples += pos + 1;
                let (i, j, lambda, point) = tests.swap_remove(pos);
                let witness = ProbeWitness::ConvexValues {
                    x,
                    y1: members[i].clone(),
                    y2: members[j].clone(),
                    lambda,
                    point,
                };
                return Ok(TopologyProbeReport::new(
                    ProbeKind::ConvexValues,
                    &cfg.radii,
                    samples,
                    Some(witness),
                ));
            }
        }
    }
    Ok(TopologyProbeReport::new(
        ProbeKind::ConvexValues,
        &cfg.radii,
        samples,
        None,
    ))
}

fn exact_vec(v: &[f64]) -> Vec<Rational> {
    v.iter().map(|c| exact_f64(*c)).collect()
}

impl SetValuedMap {
    fn region_at(&self, x: &[f64]) -> Result<ConvexRegion> {
        if let Some(xs) = x.iter().map(|v| f64_to_small(*v)).collect::<Option<Vec<_>>>() {
            if let Some(region) = self.evaluate_small(&xs) {
                return region;
            }
        }
        self.evaluate_exact(&exact_vec(x))
    }
}

impl GraphProbe for SetValuedMap {
    fn dim(&self) -> usize {
        SetValuedMap::dim(self)
    }

    fn domain(&self) -> CompactBox<f64> {
        self.domain_f64()
    }

    fn extreme_points(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.region_at(x)?.corners_f64())
    }

    fn member(&self, x: &[f64], z: &[f64]) -> Result<bool> {
        self.contains_exact(&exact_vec(x), &exact_vec(z))
    }

    fn members(&self, x: &[f64], zs: &[Vec<f64>]) -> Result<Vec<bool>> {
        let ex = exact_vec(x);
        let region = self.region_at(x)?;
        let member = match self.variant() {
            MapVariant::Predicate { member, .. } => Some(member),
            _ => None,
        };
        let bounds: Option<Vec<(SmallRational, SmallRational)>> = region
            .lower()
            .iter()
            .zip(region.upper())
            .map(|(l, u)| Some((to_small(l)?, to_small(u)?)))
            .collect();
        Ok(zs
            .iter()
            .map(|z| {
                if let (Some(b), None) = (&bounds, member) {
                    let fast: Option<bool> = z
                        .iter()
                        .zip(b)
                        .map(|(v, (l, u))| f64_to_small(*v).map(|q| *l <= q && q <= *u))
                        .collect::<Option<Vec<bool>>>()
                        .map(|v| v.into_iter().all(|t| t));
                    if let Some(inside) = fast {
                        return inside;
                    }
                }
                let ez = exact_vec(z);
                region.contains(&ez) && member.is_none_or(|m| m(&ex, &ez))
            })
            .collect())
    }

    fn distance(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        Ok(self.region_at(x)?.distance_f64(z))
    }

    fn nearest_member(&self, x: &[f64], z: &[f64]) -> Result<Option<Vec<f64>>> {
        let region = self.region_at(x)?;
        let p = region.project_f64(z);
        let MapVariant::Predicate { member, .. } = self.variant() else {
            return Ok(Some(p));
        };
        let ex = exact_vec(x);
        if member(&ex, &exact_vec(&p)) {
            return Ok(Some(p));
        }
        // walk from the projection towards the hull centre, doubling the step
        let (lo, hi) = (region.lower_f64(), region.upper_f64());
        let centre: Vec<f64> = lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect();
        let mut t = 2f64.powi(-60);
        while t <= 1.0 {
            let q: Vec<f64> = p.iter().zip(&centre).map(|(a, c)| a + t * (c - a)).collect();
            if member(&ex, &exact_vec(&q)) {
                return Ok(Some(q));
            }
            t *= 2.0;
        }
        Ok(None)
    }

    fn members_sample(&self, x: &[f64], grid: &Grid, cap: usize) -> Result<Vec<Vec<f64>>> {
        let ex = exact_vec(x);
        let region = self.evaluate_exact(&ex)?;
        let mut out: Vec<Vec<f64>> = Vec::new();
        for c in region.corners_f64() {
            if self.contains_exact(&ex, &exact_vec(&c))? && !out.contains(&c) {
                out.push(c);
            }
        }
        if let Some(index) = self.image_index(&ex, &region, grid) {
            let len = index.len();
            let take = cap.max(2).min(len);
            for k in 0..take {
                let j = index.nth(grid, if take == 1 { 0 } else { k * (len - 1) / (take - 1) });
                let p = grid.coords_f64(j);
                if !out.contains(&p) {
                    out.push(p);
                }
            }
        }
        out.sort_by(|a, b| a.partial_cmp(b).expect("finite coordinates"));
        Ok(out)
    }
}
