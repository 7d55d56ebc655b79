//! The graph of `x ↦ S(x)` as a probe target for the closed-graph falsifier.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use super::{Prepared, SolverConfig};
use crate::bifunction::Bifunction;
use crate::error::{Error, Result};
use crate::geometry::{distance, CompactBox, Grid, Scalar};
use crate::setmap::{check_closed_graph, GraphProbe, ProbeConfig, SetValuedMap, TopologyProbeReport};

/// `S` restricted to the grid. Base points snap to the nearest grid point, so
/// the map cannot change below one grid step and reports that as its
/// resolution.
pub struct SMapGraph<'a, S: Scalar> {
    prepared: Prepared<'a, S>,
    cache: Mutex<HashMap<usize, Arc<Vec<usize>>>>,
}

impl<'a, S: Scalar> SMapGraph<'a, S> {
    pub fn new(f: &'a Bifunction<S>, map: &'a SetValuedMap, cfg: &'a SolverConfig) -> Result<Self> {
        Ok(SMapGraph {
            prepared: Prepared::new(f, map, cfg)?,
            cache: Mutex::new(HashMap::new()),
        })
    }

    fn grid(&self) -> &Grid {
        self.prepared.grid()
    }

    /// Grid indices of `S(x)` at the grid point nearest `x`.
    pub fn members_at(&self, x: &[f64]) -> Result<Arc<Vec<usize>>> {
        let idx = self.grid().nearest_index(x);
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&idx) {
            return Ok(hit.clone());
        }
        let image = self.prepared.images().images[idx]
            .as_ref()
            .ok_or_else(|| Error::DegenerateImage {
                x: self.grid().coords_f64(idx),
            })?;
        let members = Arc::new(self.prepared.smap_members(image));
        self.cache.lock().expect("cache lock").insert(idx, members.clone());
        Ok(members)
    }

    fn points(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        Ok(self.members_at(x)?.iter().map(|&j| self.grid().coords_f64(j)).collect())
    }
}

impl<S: Scalar> GraphProbe for SMapGraph<'_, S> {
    fn dim(&self) -> usize {
        self.grid().dim()
    }

    fn domain(&self) -> CompactBox<f64> {
        self.grid().bounds()
    }

    /// Members attaining the smallest or largest coordinate along some axis.
    fn extreme_points(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let pts = self.points(x)?;
        let mut out: Vec<Vec<f64>> = Vec::new();
        for axis in 0..self.dim() {
            let by_axis = |a: &&Vec<f64>, b: &&Vec<f64>| a[axis].total_cmp(&b[axis]);
            for p in [pts.iter().min_by(by_axis), pts.iter().max_by(by_axis)]
                .into_iter()
                .flatten()
            {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
        }
        Ok(out)
    }

    fn member(&self, x: &[f64], z: &[f64]) -> Result<bool> {
        let j = self.grid().nearest_index(z);
        if self.grid().coords_f64(j) != z {
            return Ok(false);
        }
        Ok(self.members_at(x)?.binary_search(&j).is_ok())
    }

    fn distance(&self, x: &[f64], z: &[f64]) -> Result<f64> {
        Ok(self
            .points(x)?
            .iter()
            .map(|p| distance(p, z))
            .fold(f64::INFINITY, f64::min))
    }

    fn nearest_member(&self, x: &[f64], z: &[f64]) -> Result<Option<Vec<f64>>> {
        Ok(self
            .points(x)?
            .into_iter()
            .min_by(|a, b| distance(a, z).total_cmp(&distance(b, z))))
    }

    fn members_sample(&self, x: &[f64], _grid: &Grid, cap: usize) -> Result<Vec<Vec<f64>>> {
        let pts = self.points(x)?;
        let take = cap.max(2).min(pts.len());
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(take);
        for k in 0..take {
            let i = if take == 1 { 0 } else { k * (pts.len() - 1) / (take - 1) };
            if !out.contains(&pts[i]) {
                out.push(pts[i].clone());
            }
        }
        Ok(out)
    }

    fn resolution(&self) -> f64 {
        self.grid().max_step()
    }
}

/// The closed-graph falsifier applied to `{(x, x0) : x0 ∈ S(x)}`.
pub fn check_smap_closed_graph<S: Scalar>(
    f: &Bifunction<S>,
    map: &SetValuedMap,
    cfg: &SolverConfig,
    probe: &ProbeConfig,
) -> Result<TopologyProbeReport> {
    cfg.run(|| {
        let graph = SMapGraph::new(f, map, cfg)?;
        check_closed_graph(&graph, &cfg.grid, probe)
    })?
}
