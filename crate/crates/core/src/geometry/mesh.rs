//! Structured tensor-product meshes of the layered domain.
//!
//! The domain is a box: an in-plane cross section `O` times the vertical
//! interval `(−L, L)`. The thin layer `|x₃| < δ/2` is tiled by δ-periodic
//! cells whose grid material comes from a [`LayerPattern`]. Meshes are
//! conforming across the layer interfaces and across `x₃ = 0`, the in-plane
//! spacing is `δ/cells_per_period`, and the vertical spacing is uniform in a
//! band around the layer with geometric coarsening beyond it. Element
//! regions are assigned by rasterization so that region boundaries are
//! element-aligned and region volumes are exact.

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::error::{CageError, Result};
use crate::geometry::pattern::LayerPattern;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimensionMode {
    /// One in-plane axis; the layer cross section is an interval.
    Reduced2d,
    /// Two in-plane axes.
    Full3d,
}

impl DimensionMode {
    pub fn in_plane_dims(self) -> usize {
        match self {
            DimensionMode::Reduced2d => 1,
            DimensionMode::Full3d => 2,
        }
    }
}

/// The physical box `O × (−L, L)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    pub mode: DimensionMode,
    /// Extent of `O` per in-plane axis.
    pub extents: Vec<f64>,
    /// Half height `L`.
    pub half_height: f64,
}

impl DomainSpec {
    pub fn reduced(extent: f64, half_height: f64) -> Result<Self> {
        Self::new(DimensionMode::Reduced2d, vec![extent], half_height)
    }

    pub fn full(extent_x: f64, extent_y: f64, half_height: f64) -> Result<Self> {
        Self::new(DimensionMode::Full3d, vec![extent_x, extent_y], half_height)
    }

    pub fn new(mode: DimensionMode, extents: Vec<f64>, half_height: f64) -> Result<Self> {
        if extents.len() != mode.in_plane_dims() {
            return Err(CageError::Geometry(format!(
                "{:?} expects {} in-plane extent(s), got {}",
                mode,
                mode.in_plane_dims(),
                extents.len()
            )));
        }
        if !extents.iter().all(|&e| e > 0.0 && e.is_finite()) {
            return Err(CageError::Geometry("in-plane extents must be positive".into()));
        }
        if !(half_height > 0.0 && half_height.is_finite()) {
            return Err(CageError::Geometry("half height L must be positive".into()));
        }
        Ok(Self { mode, extents, half_height })
    }

    /// |O|, the in-plane measure.
    pub fn cross_section_measure(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn diameter(&self) -> f64 {
        let mut d2 = (2.0 * self.half_height).powi(2);
        for e in &self.extents {
            d2 += e * e;
        }
        d2.sqrt()
    }
}

/// Vertical node layout policy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum GradingPolicy {
    /// Uniform spacing `δ/cells_per_period` over the whole height.
    Uniform,
    /// Uniform spacing in `|x₃| ≤ uniform_band·δ`, then geometric steps.
    Graded {
        /// Half-width of the uniformly fine band, in units of δ (≥ 1/2).
        uniform_band: f64,
        /// Geometric coarsening ratio (≤ 1.3 keeps the corrector resolved).
        ratio: f64,
        /// Absolute cap on the element height away from the layer.
        max_step: f64,
        /// Extra vertical refinement factor (used for the limit baseline).
        refine: usize,
    },
}

impl GradingPolicy {
    pub fn graded(uniform_band: f64, ratio: f64, max_step: f64) -> Self {
        GradingPolicy::Graded { uniform_band, ratio, max_step, refine: 1 }
    }

    pub fn with_refine(self, refine: usize) -> Self {
        match self {
            GradingPolicy::Graded { uniform_band, ratio, max_step, .. } => {
                GradingPolicy::Graded { uniform_band, ratio, max_step, refine }
            }
            other => other,
        }
    }
}

impl Default for GradingPolicy {
    fn default() -> Self {
        GradingPolicy::graded(1.25, 1.3, 1.0 / 64.0)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MeshParams {
    /// Number of δ-cells per unit of the first in-plane extent: δ = extent/N.
    pub n_periods: usize,
    /// In-plane mesh subdivisions per δ-cell.
    pub cells_per_period: usize,
    pub grading: GradingPolicy,
    /// Reject meshes whose factorization estimate exceeds this cap.
    pub mem_cap_mib: f64,
}

impl MeshParams {
    pub fn new(n_periods: usize, cells_per_period: usize, grading: GradingPolicy) -> Self {
        Self { n_periods, cells_per_period, grading, mem_cap_mib: 2048.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Region {
    Grid,
    Hole,
    BulkPlus,
    BulkMinus,
}

impl Region {
    pub fn as_i32(self) -> i32 {
        match self {
            Region::Grid => 0,
            Region::Hole => 1,
            Region::BulkPlus => 2,
            Region::BulkMinus => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeshId(pub u64);

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Clone)]
pub struct StructuredMesh {
    id: MeshId,
    pub mode: DimensionMode,
    pub delta: f64,
    pub cells_per_period: usize,
    pub vertical_refine: usize,
    pub half_height: f64,
    extents: Vec<f64>,
    x_nodes: Vec<f64>,
    y_nodes: Option<Vec<f64>>,
    z_nodes: Vec<f64>,
    pattern: LayerPattern,
    regions: Vec<Region>,
}

/// Classifies a point of the domain. Points on the interfaces `x₃ = ±δ/2`
/// are assigned to the adjacent bulk; in-plane raster pixels are half-open.
pub fn classify_point(x: &[f64], delta: f64, pattern: &LayerPattern) -> Region {
    let dims = pattern.dims();
    let x3 = x[dims];
    if x3 >= delta / 2.0 {
        return Region::BulkPlus;
    }
    if x3 <= -delta / 2.0 {
        return Region::BulkMinus;
    }
    let frac: Vec<f64> = x[..dims]
        .iter()
        .map(|&c| {
            let f = (c / delta).fract();
            if f < 0.0 {
                f + 1.0
            } else {
                f
            }
        })
        .collect();
    if pattern.contains_frac(&frac) {
        Region::Grid
    } else {
        Region::Hole
    }
}

fn positive_vertical_nodes(
    policy: GradingPolicy,
    delta: f64,
    cpp: usize,
    l: f64,
) -> Result<Vec<f64>> {
    match policy {
        GradingPolicy::Uniform => {
            let h0 = delta / cpp as f64;
            let n = (l / h0).round() as usize;
            if n == 0 || ((n as f64) * h0 - l).abs() > 1e-9 * l {
                return Err(CageError::Geometry(format!(
                    "uniform grading requires L to be a multiple of δ/cpp = {h0}, got L = {l}"
                )));
            }
            let mut nodes: Vec<f64> = (0..=n).map(|k| k as f64 * h0).collect();
            *nodes.last_mut().unwrap() = l;
            Ok(nodes)
        }
        GradingPolicy::Graded { uniform_band, ratio, max_step, refine } => {
            if uniform_band < 0.5 {
                return Err(CageError::Geometry(
                    "uniform_band must cover at least the half layer (≥ 0.5 δ)".into(),
                ));
            }
            if !(1.0..=2.0).contains(&ratio) {
                return Err(CageError::Geometry("grading ratio must lie in [1, 2]".into()));
            }
            if !(max_step > 0.0) || refine == 0 {
                return Err(CageError::Geometry("max_step must be positive, refine ≥ 1".into()));
            }
            let fine = cpp * refine;
            let h0 = delta / fine as f64;
            // Uniform planes out to uniform_band·δ, clipped by the domain,
            // never less than the layer edge δ/2.
            let mut k_band = ((uniform_band * fine as f64).round() as usize).max(fine / 2);
            while k_band as f64 * h0 > l + 1e-12 * l {
                k_band -= 1;
            }
            let mut nodes: Vec<f64> = (0..=k_band).map(|k| k as f64 * h0).collect();
            let start = k_band as f64 * h0;
            let remaining = l - start;
            if remaining > 1e-12 * l {
                let mut steps = Vec::new();
                let mut h = h0;
                let mut total = 0.0;
                while total < remaining {
                    h = (h * ratio).min(max_step);
                    steps.push(h);
                    total += h;
                }
                let scale = remaining / total;
                let mut z = start;
                for s in &steps {
                    z += s * scale;
                    nodes.push(z);
                }
                *nodes.last_mut().unwrap() = l;
            }
            Ok(nodes)
        }
    }
}

/// Builds the mesh and assigns per-element regions.
pub fn build_mesh(
    spec: &DomainSpec,
    pattern: &LayerPattern,
    params: &MeshParams,
) -> Result<StructuredMesh> {
    let dims = spec.mode.in_plane_dims();
    if pattern.dims() != dims {
        return Err(CageError::Geometry(format!(
            "pattern has {} in-plane axes but domain has {}",
            pattern.dims(),
            dims
        )));
    }
    let n = params.n_periods;
    let cpp = params.cells_per_period;
    if n < 2 {
        return Err(CageError::Geometry("n_periods must be at least 2".into()));
    }
    if cpp < pattern.resolution() || cpp % pattern.resolution() != 0 {
        return Err(CageError::Geometry(format!(
            "cells_per_period {} must be a multiple of the raster resolution {}",
            cpp,
            pattern.resolution()
        )));
    }
    if cpp % 2 != 0 {
        return Err(CageError::Geometry("cells_per_period must be even".into()));
    }
    let delta = spec.extents[0] / n as f64;
    if delta / 2.0 >= spec.half_height {
        return Err(CageError::Geometry(format!(
            "layer half-thickness δ/2 = {} reaches the domain half height {}",
            delta / 2.0,
            spec.half_height
        )));
    }

    // Every in-plane extent must hold an integer number of δ-cells so the
    // boundary-layer set of incomplete cells is empty.
    let mut periods = Vec::with_capacity(dims);
    for &e in &spec.extents {
        let p = e / delta;
        let pr = p.round();
        if (p - pr).abs() > 1e-9 || pr < 2.0 {
            return Err(CageError::Geometry(format!(
                "extent {e} is not an integer multiple (≥2) of δ = {delta}"
            )));
        }
        periods.push(pr as usize);
    }

    let x_nodes = uniform_axis(spec.extents[0], periods[0] * cpp);
    let y_nodes = if dims == 2 {
        Some(uniform_axis(spec.extents[1], periods[1] * cpp))
    } else {
        None
    };
    let z_pos = positive_vertical_nodes(params.grading, delta, cpp, spec.half_height)?;
    let mut z_nodes: Vec<f64> = z_pos.iter().skip(1).map(|&z| -z).rev().collect();
    z_nodes.extend_from_slice(&z_pos);
    let vertical_refine = match params.grading {
        GradingPolicy::Graded { refine, .. } => refine,
        GradingPolicy::Uniform => 1,
    };

    let mut mesh = StructuredMesh {
        id: MeshId(NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed)),
        mode: spec.mode,
        delta,
        cells_per_period: cpp,
        vertical_refine,
        half_height: spec.half_height,
        extents: spec.extents.clone(),
        x_nodes,
        y_nodes,
        z_nodes,
        pattern: pattern.clone(),
        regions: Vec::new(),
    };
    mesh.assign_regions();

    let est = mesh.solver_memory_estimate_mib();
    if est > params.mem_cap_mib {
        return Err(CageError::MemoryCap { estimate_mb: est, cap_mb: params.mem_cap_mib });
    }
    Ok(mesh)
}

fn uniform_axis(extent: f64, cells: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..=cells).map(|k| k as f64 * extent / cells as f64).collect();
    *v.last_mut().unwrap() = extent;
    v
}

impl StructuredMesh {
    pub fn id(&self) -> MeshId {
        self.id
    }

    pub fn pattern(&self) -> &LayerPattern {
        self.pattern_ref()
    }

    fn pattern_ref(&self) -> &LayerPattern {
        &self.pattern
    }

    pub fn in_plane_dims(&self) -> usize {
        self.mode.in_plane_dims()
    }

    pub fn extents(&self) -> &[f64] {
        &self.extents
    }

    pub fn cross_section_measure(&self) -> f64 {
        self.extents.iter().product()
    }

    pub fn x_nodes(&self) -> &[f64] {
        &self.x_nodes
    }

    pub fn y_nodes(&self) -> Option<&[f64]> {
        self.y_nodes.as_deref()
    }

    pub fn z_nodes(&self) -> &[f64] {
        &self.z_nodes
    }

    pub fn nx(&self) -> usize {
        self.x_nodes.len()
    }

    pub fn ny(&self) -> usize {
        self.y_nodes.as_ref().map_or(1, Vec::len)
    }

    pub fn nz(&self) -> usize {
        self.z_nodes.len()
    }

    pub fn node_count(&self) -> usize {
        self.nx() * self.ny() * self.nz()
    }

    pub fn element_count(&self) -> usize {
        (self.nx() - 1) * self.ey_count() * (self.nz() - 1)
    }

    fn ey_count(&self) -> usize {
        match &self.y_nodes {
            Some(y) => y.len() - 1,
            None => 1,
        }
    }

    /// Vertical-fastest node numbering keeps the matrix bandwidth small.
    pub fn node_id(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.ny() + iy) * self.nz() + iz
    }

    pub fn node_indices(&self, id: usize) -> (usize, usize, usize) {
        let nz = self.nz();
        let ny = self.ny();
        (id / (ny * nz), (id / nz) % ny, id % nz)
    }

    pub fn node_coords(&self, id: usize) -> [f64; 3] {
        let (ix, iy, iz) = self.node_indices(id);
        [
            self.x_nodes[ix],
            self.y_nodes.as_ref().map_or(0.0, |y| y[iy]),
            self.z_nodes[iz],
        ]
    }

    pub fn element_id(&self, ex: usize, ey: usize, ez: usize) -> usize {
        (ex * self.ey_count() + ey) * (self.nz() - 1) + ez
    }

    pub fn element_indices(&self, eid: usize) -> (usize, usize, usize) {
        let nez = self.nz() - 1;
        let ney = self.ey_count();
        (eid / (ney * nez), (eid / nez) % ney, eid % nez)
    }

    /// Corner node ids in tensor order (x major, then y, z fastest);
    /// returns the number of corners (4 or 8).
    pub fn element_nodes(&self, eid: usize, out: &mut [usize; 8]) -> usize {
        let (ex, ey, ez) = self.element_indices(eid);
        match self.mode {
            DimensionMode::Reduced2d => {
                out[0] = self.node_id(ex, 0, ez);
                out[1] = self.node_id(ex, 0, ez + 1);
                out[2] = self.node_id(ex + 1, 0, ez);
                out[3] = self.node_id(ex + 1, 0, ez + 1);
                4
            }
            DimensionMode::Full3d => {
                let mut k = 0;
                for lx in 0..2 {
                    for ly in 0..2 {
                        for lz in 0..2 {
                            out[k] = self.node_id(ex + lx, ey + ly, ez + lz);
                            k += 1;
                        }
                    }
                }
                8
            }
        }
    }

    /// Lower corner and extents of an element box.
    pub fn element_box(&self, eid: usize) -> ([f64; 3], [f64; 3]) {
        let (ex, ey, ez) = self.element_indices(eid);
        let x0 = self.x_nodes[ex];
        let hx = self.x_nodes[ex + 1] - x0;
        let (y0, hy) = match &self.y_nodes {
            Some(y) => (y[ey], y[ey + 1] - y[ey]),
            None => (0.0, 1.0),
        };
        let z0 = self.z_nodes[ez];
        let hz = self.z_nodes[ez + 1] - z0;
        ([x0, y0, z0], [hx, hy, hz])
    }

    pub fn element_centroid(&self, eid: usize) -> [f64; 3] {
        let (lo, h) = self.element_box(eid);
        match self.mode {
            DimensionMode::Reduced2d => [lo[0] + 0.5 * h[0], 0.0, lo[2] + 0.5 * h[2]],
            DimensionMode::Full3d => {
                [lo[0] + 0.5 * h[0], lo[1] + 0.5 * h[1], lo[2] + 0.5 * h[2]]
            }
        }
    }

    pub fn element_volume(&self, eid: usize) -> f64 {
        let (_, h) = self.element_box(eid);
        match self.mode {
            DimensionMode::Reduced2d => h[0] * h[2],
            DimensionMode::Full3d => h[0] * h[1] * h[2],
        }
    }

    pub fn region(&self, eid: usize) -> Region {
        self.regions[eid]
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    fn assign_regions(&mut self) {
        let res = self.pattern.resolution();
        let cpp = self.cells_per_period;
        let nez = self.nz() - 1;
        let ney = self.ey_count();
        let nex = self.nx() - 1;
        let half = self.delta / 2.0;
        let mut regions = Vec::with_capacity(nex * ney * nez);
        for ex in 0..nex {
            let px = (ex % cpp) * res / cpp;
            for ey in 0..ney {
                let py = match self.mode {
                    DimensionMode::Reduced2d => 0,
                    DimensionMode::Full3d => (ey % cpp) * res / cpp,
                };
                let in_grid = self.pattern.pixel(px, py);
                for ez in 0..nez {
                    let cz = 0.5 * (self.z_nodes[ez] + self.z_nodes[ez + 1]);
                    let r = if cz >= half {
                        Region::BulkPlus
                    } else if cz <= -half {
                        Region::BulkMinus
                    } else if in_grid {
                        Region::Grid
                    } else {
                        Region::Hole
                    };
                    regions.push(r);
                }
            }
        }
        self.regions = regions;
    }

    /// True on the Dirichlet boundary of the box.
    pub fn is_boundary_node(&self, id: usize) -> bool {
        let (ix, iy, iz) = self.node_indices(id);
        if ix == 0 || ix == self.nx() - 1 || iz == 0 || iz == self.nz() - 1 {
            return true;
        }
        match self.mode {
            DimensionMode::Reduced2d => false,
            DimensionMode::Full3d => iy == 0 || iy == self.ny() - 1,
        }
    }

    pub fn region_volumes(&self) -> [f64; 4] {
        let mut v = [0.0; 4];
        for eid in 0..self.element_count() {
            v[self.regions[eid].as_i32() as usize] += self.element_volume(eid);
        }
        v
    }

    pub fn region_counts(&self) -> [usize; 4] {
        let mut c = [0; 4];
        for r in &self.regions {
            c[r.as_i32() as usize] += 1;
        }
        c
    }

    /// Index of the node plane at height `z`, if one exists.
    pub fn z_plane_index(&self, z: f64) -> Option<usize> {
        let tol = 1e-10 * (1.0 + self.half_height);
        self.z_nodes.iter().position(|&zn| (zn - z).abs() <= tol)
    }

    /// Bandwidth of the vertical-fastest numbering.
    pub fn node_bandwidth(&self) -> usize {
        match self.mode {
            DimensionMode::Reduced2d => self.nz() + 1,
            DimensionMode::Full3d => self.ny() * self.nz() + self.nz() + 1,
        }
    }

    /// Rough size of the banded factorization in MiB.
    pub fn solver_memory_estimate_mib(&self) -> f64 {
        let n = self.node_count() as f64;
        let b = self.node_bandwidth() as f64;
        (3.0 * b + 2.0) * n * 16.0 / (1024.0 * 1024.0)
    }

    /// Number of face-connected components of the layer's grid elements
    /// (domain-internal adjacency, no periodic wrap).
    pub fn grid_component_count(&self) -> usize {
        let nez = self.nz() - 1;
        let ney = self.ey_count();
        let nex = self.nx() - 1;
        let idx = |ex: usize, ey: usize, ez: usize| (ex * ney + ey) * nez + ez;
        let mut seen = vec![false; self.regions.len()];
        let mut components = 0usize;
        let mut stack = Vec::new();
        for start in 0..self.regions.len() {
            if self.regions[start] != Region::Grid || seen[start] {
                continue;
            }
            components += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(e) = stack.pop() {
                let (ex, ey, ez) = self.element_indices(e);
                let mut neighbors: [Option<usize>; 6] = [None; 6];
                if ex > 0 {
                    neighbors[0] = Some(idx(ex - 1, ey, ez));
                }
                if ex + 1 < nex {
                    neighbors[1] = Some(idx(ex + 1, ey, ez));
                }
                if ez > 0 {
                    neighbors[2] = Some(idx(ex, ey, ez - 1));
                }
                if ez + 1 < nez {
                    neighbors[3] = Some(idx(ex, ey, ez + 1));
                }
                if self.mode == DimensionMode::Full3d {
                    if ey > 0 {
                        neighbors[4] = Some(idx(ex, ey - 1, ez));
                    }
                    if ey + 1 < ney {
                        neighbors[5] = Some(idx(ex, ey + 1, ez));
                    }
                }
                for ne in neighbors.into_iter().flatten() {
                    if self.regions[ne] == Region::Grid && !seen[ne] {
                        seen[ne] = true;
                        stack.push(ne);
                    }
                }
            }
        }
        components
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::pattern::PatternKind;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn cross_2d() -> LayerPattern {
        LayerPattern::build(PatternKind::Cross, 0.5, 8, 1).unwrap()
    }

    #[test]
    fn reduced_mesh_layout_and_layer_fraction() {
        let spec = DomainSpec::reduced(1.0, 1.0).unwrap();
        let mesh = build_mesh(
            &spec,
            &cross_2d(),
            &MeshParams::new(4, 8, GradingPolicy::default()),
        )
        .unwrap();
        assert!((mesh.delta - 0.25).abs() < 1e-15);
        assert!(mesh.z_plane_index(0.125).is_some(), "layer top is a node plane");
        assert!(mesh.z_plane_index(-0.125).is_some());
        assert!(mesh.z_plane_index(0.0).is_some());
        let counts = mesh.region_counts();
        let layer = counts[0] + counts[1];
        assert_eq!(counts[0] * 2, layer, "grid is 50% of the layer elements");
        // Grid volume fraction inside the layer equals the pattern fill.
        let vols = mesh.region_volumes();
        let frac = vols[0] / (vols[0] + vols[1]);
        assert!((frac - mesh.pattern().fill_fraction()).abs() < 1e-14);
    }

    #[test]
    fn region_volumes_partition_domain() {
        let spec = DomainSpec::reduced(1.0, 1.0).unwrap();
        for n in [4usize, 8, 16] {
            let mesh = build_mesh(
                &spec,
                &cross_2d(),
                &MeshParams::new(n, 8, GradingPolicy::default()),
            )
            .unwrap();
            let vols = mesh.region_volumes();
            let total: f64 = vols.iter().sum();
            assert!((total - 2.0).abs() < 1e-12, "sum of region volumes = |Ω|");
            // No layer material outside |x₃| ≤ δ/2.
            for eid in 0..mesh.element_count() {
                let r = mesh.region(eid);
                let c = mesh.element_centroid(eid);
                if matches!(r, Region::Grid | Region::Hole) {
                    assert!(c[2].abs() <= mesh.delta / 2.0);
                } else {
                    assert!(c[2].abs() >= mesh.delta / 2.0);
                }
            }
        }
    }

    #[test]
    fn full3d_grid_fraction_exact_and_connected() {
        let spec = DomainSpec::full(1.0, 1.0, 1.0).unwrap();
        let pat = LayerPattern::build(PatternKind::Cross, 0.5, 4, 2).unwrap();
        let mesh = build_mesh(
            &spec,
            &pat,
            &MeshParams::new(4, 4, GradingPolicy::default()),
        )
        .unwrap();
        let vols = mesh.region_volumes();
        let frac = vols[0] / (vols[0] + vols[1]);
        assert!((frac - 0.75).abs() < 1e-14);
        assert_eq!(mesh.grid_component_count(), 1);
    }

    #[test]
    fn classify_point_examples() {
        let pat = cross_2d();
        let delta = 0.125;
        assert_eq!(classify_point(&[0.3, 0.5], delta, &pat), Region::BulkPlus);
        assert_eq!(classify_point(&[0.3, -0.5], delta, &pat), Region::BulkMinus);
        // Center of any cell lies inside a cross bar.
        let center = delta * 0.5;
        assert_eq!(classify_point(&[center, 0.0], delta, &pat), Region::Grid);
        // Interface points belong to the bulk.
        assert_eq!(classify_point(&[center, delta / 2.0], delta, &pat), Region::BulkPlus);
    }

    #[test]
    fn classify_point_is_periodic() {
        let pat = cross_2d();
        let delta = 0.125;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let x = rng.gen_range(0.0..1.0 - delta);
            let z = rng.gen_range(-0.2..0.2);
            assert_eq!(
                classify_point(&[x, z], delta, &pat),
                classify_point(&[x + delta, z], delta, &pat)
            );
        }
    }

    #[test]
    fn classify_point_monte_carlo_volume_fraction() {
        let pat = cross_2d();
        let delta = 0.125;
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let samples = 100_000;
        let mut hits = 0usize;
        for _ in 0..samples {
            let x = rng.gen_range(0.0..1.0);
            let z = rng.gen_range(-delta / 2.0..delta / 2.0);
            if classify_point(&[x, z], delta, &pat) == Region::Grid {
                hits += 1;
            }
        }
        let frac = hits as f64 / samples as f64;
        assert!((frac - pat.fill_fraction()).abs() < 0.02);
    }

    #[test]
    fn rejects_bad_parameters() {
        let spec = DomainSpec::reduced(1.0, 1.0).unwrap();
        let pat = cross_2d();
        assert!(build_mesh(&spec, &pat, &MeshParams::new(1, 8, GradingPolicy::default())).is_err());
        // cpp not a multiple of the raster resolution.
        assert!(build_mesh(&spec, &pat, &MeshParams::new(4, 12, GradingPolicy::default())).is_err());
        // Memory cap.
        let mut p = MeshParams::new(16, 8, GradingPolicy::default());
        p.mem_cap_mib = 0.01;
        match build_mesh(&spec, &pat, &p) {
            Err(CageError::MemoryCap { estimate_mb, .. }) => assert!(estimate_mb > 0.01),
            other => panic!("expected memory cap rejection, got {other:?}"),
        }
    }

    #[test]
    fn uniform_grading_gives_uniform_planes() {
        let spec = DomainSpec::reduced(1.0, 1.0).unwrap();
        let pat = cross_2d();
        let mesh =
            build_mesh(&spec, &pat, &MeshParams::new(4, 16, GradingPolicy::Uniform)).unwrap();
        let z = mesh.z_nodes();
        let h = 0.25 / 16.0;
        assert_eq!(z.len(), 129);
        for w in z.windows(2) {
            assert!((w[1] - w[0] - h).abs() < 1e-12);
        }
    }

    #[test]
    fn graded_planes_satisfy_ratio_and_cover_domain() {
        let spec = DomainSpec::reduced(1.0, 1.0).unwrap();
        let mesh = build_mesh(
            &spec,
            &cross_2d(),
            &MeshParams::new(8, 8, GradingPolicy::graded(1.25, 1.3, 1.0 / 32.0)),
        )
        .unwrap();
        let z = mesh.z_nodes();
        assert!((z[0] + 1.0).abs() < 1e-15 && (z[z.len() - 1] - 1.0).abs() < 1e-15);
        let mut prev = z[1] - z[0];
        for w in z.windows(2).skip(1) {
            let h = w[1] - w[0];
            assert!(h > 0.0);
            let ratio = h / prev;
            assert!(ratio < 1.3 + 1e-9, "ratio {ratio} too aggressive");
            prev = h;
        }
        // Mirror symmetry of the layout.
        let m = z.len();
        for i in 0..m {
            assert!((z[i] + z[m - 1 - i]).abs() < 1e-12);
        }
    }
}
