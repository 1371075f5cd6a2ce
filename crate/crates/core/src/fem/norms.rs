//! Norms, traces and interpolation of nodal fields.
//!
//! All integrals use the same tensor Gauss rule as the assembly, which is
//! exact for squares of Q1 functions, so region-filtered norms are exact up
//! to rounding.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CageError, Result};
use crate::fem::assemble::spatial_dims;
use crate::fem::field::NodalField;
use crate::fem::quadrature::ElementQuad;
use crate::geometry::{DimensionMode, Region, StructuredMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RegionFilter {
    All,
    Grid,
    Hole,
    /// The whole thin layer (grid and holes).
    Layer,
    BulkPlus,
    BulkMinus,
}

impl RegionFilter {
    fn accepts(self, r: Region) -> bool {
        match self {
            RegionFilter::All => true,
            RegionFilter::Grid => r == Region::Grid,
            RegionFilter::Hole => r == Region::Hole,
            RegionFilter::Layer => matches!(r, Region::Grid | Region::Hole),
            RegionFilter::BulkPlus => r == Region::BulkPlus,
            RegionFilter::BulkMinus => r == Region::BulkMinus,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormSet {
    pub l2: f64,
    pub h1_semi: f64,
    pub h1: f64,
}

struct Accumulated {
    l2_sq: f64,
    h1_sq: f64,
    dz_sq: f64,
}

fn accumulate(
    field: &NodalField,
    mesh: &StructuredMesh,
    accept: impl Fn(usize) -> bool,
) -> Accumulated {
    let dims = spatial_dims(mesh);
    let quad = ElementQuad::new(dims);
    let mut nodes = [0usize; 8];
    let mut acc = Accumulated { l2_sq: 0.0, h1_sq: 0.0, dz_sq: 0.0 };
    for eid in 0..mesh.element_count() {
        if !accept(eid) {
            continue;
        }
        let (_, h) = mesh.element_box(eid);
        let hs = match mesh.mode {
            DimensionMode::Reduced2d => [h[0], h[2], 1.0],
            DimensionMode::Full3d => h,
        };
        let det: f64 = hs[..dims].iter().product();
        let nl = mesh.element_nodes(eid, &mut nodes);
        for p in 0..quad.n_pts {
            let w = quad.weights[p] * det;
            let mut u = Complex64::new(0.0, 0.0);
            let mut grad = [Complex64::new(0.0, 0.0); 3];
            for l in 0..nl {
                let v = field.values[nodes[l]];
                u += quad.shape[p][l] * v;
                for axis in 0..dims {
                    grad[axis] += v * (quad.grad_ref[p][l][axis] / hs[axis]);
                }
            }
            acc.l2_sq += w * u.norm_sqr();
            let g2: f64 = grad[..dims].iter().map(|g| g.norm_sqr()).sum();
            acc.h1_sq += w * g2;
            acc.dz_sq += w * grad[dims - 1].norm_sqr();
        }
    }
    acc
}

pub fn norms(field: &NodalField, mesh: &StructuredMesh, filter: RegionFilter) -> Result<NormSet> {
    field.check_mesh(mesh)?;
    let acc = accumulate(field, mesh, |eid| filter.accepts(mesh.region(eid)));
    Ok(NormSet {
        l2: acc.l2_sq.sqrt(),
        h1_semi: acc.h1_sq.sqrt(),
        h1: (acc.l2_sq + acc.h1_sq).sqrt(),
    })
}

/// Norms over elements contained in the vertical slab `[z_lo, z_hi]`; the
/// bounds must be node planes (or infinite) so no element is cut.
pub fn norms_zrange(
    field: &NodalField,
    mesh: &StructuredMesh,
    z_lo: f64,
    z_hi: f64,
) -> Result<NormSet> {
    field.check_mesh(mesh)?;
    for bound in [z_lo, z_hi] {
        if bound.is_finite() && mesh.z_plane_index(bound).is_none() {
            return Err(CageError::Assembly(format!(
                "slab bound {bound} is not a node plane"
            )));
        }
    }
    let tol = 1e-12 * (1.0 + mesh.half_height);
    let acc = accumulate(field, mesh, |eid| {
        let (lo, h) = mesh.element_box(eid);
        lo[2] >= z_lo - tol && lo[2] + h[2] <= z_hi + tol
    });
    Ok(NormSet {
        l2: acc.l2_sq.sqrt(),
        h1_semi: acc.h1_sq.sqrt(),
        h1: (acc.l2_sq + acc.h1_sq).sqrt(),
    })
}

/// L² norm of the vertical derivative over a slab.
pub fn dz_l2_zrange(
    field: &NodalField,
    mesh: &StructuredMesh,
    z_lo: f64,
    z_hi: f64,
) -> Result<f64> {
    field.check_mesh(mesh)?;
    let tol = 1e-12 * (1.0 + mesh.half_height);
    let acc = accumulate(field, mesh, |eid| {
        let (lo, h) = mesh.element_box(eid);
        lo[2] >= z_lo - tol && lo[2] + h[2] <= z_hi + tol
    });
    Ok(acc.dz_sq.sqrt())
}

/// `∫ f ḡ` over a region.
pub fn inner_product(
    f: &NodalField,
    g: &NodalField,
    mesh: &StructuredMesh,
    filter: RegionFilter,
) -> Result<Complex64> {
    f.check_mesh(mesh)?;
    g.check_mesh(mesh)?;
    let dims = spatial_dims(mesh);
    let quad = ElementQuad::new(dims);
    let mut nodes = [0usize; 8];
    let mut acc = Complex64::new(0.0, 0.0);
    for eid in 0..mesh.element_count() {
        if !filter.accepts(mesh.region(eid)) {
            continue;
        }
        let (_, h) = mesh.element_box(eid);
        let hs = match mesh.mode {
            DimensionMode::Reduced2d => [h[0], h[2], 1.0],
            DimensionMode::Full3d => h,
        };
        let det: f64 = hs[..dims].iter().product();
        let nl = mesh.element_nodes(eid, &mut nodes);
        for p in 0..quad.n_pts {
            let mut fu = Complex64::new(0.0, 0.0);
            let mut gu = Complex64::new(0.0, 0.0);
            for l in 0..nl {
                fu += quad.shape[p][l] * f.values[nodes[l]];
                gu += quad.shape[p][l] * g.values[nodes[l]];
            }
            acc += quad.weights[p] * det * fu * gu.conj();
        }
    }
    Ok(acc)
}

/// In-plane L² norm of the trace on the node plane `x₃ = z`.
pub fn trace_l2(field: &NodalField, mesh: &StructuredMesh, z: f64) -> Result<f64> {
    field.check_mesh(mesh)?;
    let iz = mesh
        .z_plane_index(z)
        .ok_or_else(|| CageError::Assembly(format!("plane x3 = {z} is not node-aligned")))?;
    let g = 0.5 / 3.0_f64.sqrt();
    let pts = [0.5 - g, 0.5 + g];
    let mut acc = 0.0;
    match mesh.mode {
        DimensionMode::Reduced2d => {
            let x = mesh.x_nodes();
            for ex in 0..x.len() - 1 {
                let h = x[ex + 1] - x[ex];
                let a = field.values[mesh.node_id(ex, 0, iz)];
                let b = field.values[mesh.node_id(ex + 1, 0, iz)];
                for &t in &pts {
                    let u = a * (1.0 - t) + b * t;
                    acc += 0.5 * h * u.norm_sqr();
                }
            }
        }
        DimensionMode::Full3d => {
            let x = mesh.x_nodes();
            let y = mesh.y_nodes().expect("3d mesh");
            for ex in 0..x.len() - 1 {
                for ey in 0..y.len() - 1 {
                    let hx = x[ex + 1] - x[ex];
                    let hy = y[ey + 1] - y[ey];
                    let v00 = field.values[mesh.node_id(ex, ey, iz)];
                    let v01 = field.values[mesh.node_id(ex, ey + 1, iz)];
                    let v10 = field.values[mesh.node_id(ex + 1, ey, iz)];
                    let v11 = field.values[mesh.node_id(ex + 1, ey + 1, iz)];
                    for &s in &pts {
                        for &t in &pts {
                            let u = v00 * (1.0 - s) * (1.0 - t)
                                + v01 * (1.0 - s) * t
                                + v10 * s * (1.0 - t)
                                + v11 * s * t;
                            acc += 0.25 * hx * hy * u.norm_sqr();
                        }
                    }
                }
            }
        }
    }
    Ok(acc.sqrt())
}

/// Second-order one-sided vertical derivative on the interface plane,
/// one value per in-plane node. Assumes the field vanishes on the plane
/// below is irrelevant; the stencil uses the two node planes above Γ.
pub fn trace_dz_at_gamma(field: &NodalField, mesh: &StructuredMesh) -> Result<Vec<Complex64>> {
    field.check_mesh(mesh)?;
    let iz0 = mesh
        .z_plane_index(0.0)
        .ok_or_else(|| CageError::Assembly("mesh has no plane at x3 = 0".into()))?;
    if iz0 + 2 >= mesh.nz() {
        return Err(CageError::Assembly("not enough planes above the interface".into()));
    }
    let z = mesh.z_nodes();
    let (z1, z2) = (z[iz0 + 1] - z[iz0], z[iz0 + 2] - z[iz0]);
    // Lagrange derivative at 0 from values at 0, z1, z2.
    let c0 = -(z1 + z2) / (z1 * z2);
    let c1 = z2 / (z1 * (z2 - z1));
    let c2 = -z1 / (z2 * (z2 - z1));
    let mut out = Vec::with_capacity(mesh.nx() * mesh.ny());
    for ix in 0..mesh.nx() {
        for iy in 0..mesh.ny() {
            let u0 = field.values[mesh.node_id(ix, iy, iz0)];
            let u1 = field.values[mesh.node_id(ix, iy, iz0 + 1)];
            let u2 = field.values[mesh.node_id(ix, iy, iz0 + 2)];
            out.push(u0 * c0 + u1 * c1 + u2 * c2);
        }
    }
    Ok(out)
}

/// Point evaluation of the Q1 interpolant. Points are clamped to the box.
pub fn sample(field: &NodalField, mesh: &StructuredMesh, point: &[f64; 3]) -> Complex64 {
    let x = mesh.x_nodes();
    let nx = x.len();
    let hx = (x[nx - 1] - x[0]) / (nx - 1) as f64;
    let ex = (((point[0] - x[0]) / hx).floor() as isize).clamp(0, nx as isize - 2) as usize;
    let tx = ((point[0] - x[ex]) / (x[ex + 1] - x[ex])).clamp(0.0, 1.0);

    let z = mesh.z_nodes();
    let ez = z
        .partition_point(|&zn| zn <= point[2])
        .clamp(1, z.len() - 1)
        - 1;
    let tz = ((point[2] - z[ez]) / (z[ez + 1] - z[ez])).clamp(0.0, 1.0);

    match mesh.mode {
        DimensionMode::Reduced2d => {
            let v00 = field.values[mesh.node_id(ex, 0, ez)];
            let v01 = field.values[mesh.node_id(ex, 0, ez + 1)];
            let v10 = field.values[mesh.node_id(ex + 1, 0, ez)];
            let v11 = field.values[mesh.node_id(ex + 1, 0, ez + 1)];
            v00 * (1.0 - tx) * (1.0 - tz)
                + v01 * (1.0 - tx) * tz
                + v10 * tx * (1.0 - tz)
                + v11 * tx * tz
        }
        DimensionMode::Full3d => {
            let y = mesh.y_nodes().expect("3d mesh");
            let ny = y.len();
            let hy = (y[ny - 1] - y[0]) / (ny - 1) as f64;
            let ey = (((point[1] - y[0]) / hy).floor() as isize).clamp(0, ny as isize - 2) as usize;
            let ty = ((point[1] - y[ey]) / (y[ey + 1] - y[ey])).clamp(0.0, 1.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for lx in 0..2 {
                for ly in 0..2 {
                    for lz in 0..2 {
                        let w = (if lx == 0 { 1.0 - tx } else { tx })
                            * (if ly == 0 { 1.0 - ty } else { ty })
                            * (if lz == 0 { 1.0 - tz } else { tz });
                        acc += w * field.values[mesh.node_id(ex + lx, ey + ly, ez + lz)];
                    }
                }
            }
            acc
        }
    }
}

/// Nodal interpolation of a field from one mesh onto another over the same
/// physical box.
pub fn interpolate(
    field: &NodalField,
    src: &StructuredMesh,
    dst: &StructuredMesh,
) -> Result<NodalField> {
    field.check_mesh(src)?;
    if src.mode != dst.mode {
        return Err(CageError::Assembly("interpolation across dimension modes".into()));
    }
    let values = (0..dst.node_count())
        .map(|id| sample(field, src, &dst.node_coords(id)))
        .collect();
    Ok(NodalField { values, mesh_id: dst.id() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        build_mesh, DomainSpec, GradingPolicy, LayerPattern, MeshParams, PatternKind,
    };
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mesh2d() -> StructuredMesh {
        let dom = DomainSpec::reduced(1.0, 1.0).unwrap();
        let pat = LayerPattern::build(PatternKind::Cross, 0.5, 8, 1).unwrap();
        build_mesh(&dom, &pat, &MeshParams::new(4, 8, GradingPolicy::default())).unwrap()
    }

    #[test]
    fn constant_field_l2() {
        let mesh = mesh2d();
        let c = Complex64::new(3.0, -4.0);
        let f = NodalField::from_fn(&mesh, |_| c);
        let n = norms(&f, &mesh, RegionFilter::All).unwrap();
        // ‖c‖·√(2L·|O|) with L = 1, |O| = 1.
        assert!((n.l2 - 5.0 * 2.0f64.sqrt()).abs() < 1e-12);
        assert!(n.h1_semi < 1e-12);
    }

    #[test]
    fn linear_field_h1_seminorm() {
        let mesh = mesh2d();
        let f = NodalField::from_fn(&mesh, |x| Complex64::new(x[2], 0.0));
        let n = norms(&f, &mesh, RegionFilter::All).unwrap();
        assert!((n.h1_semi - 2.0f64.sqrt()).abs() < 1e-12, "unit vertical gradient");
        assert!((n.h1 - (n.l2 * n.l2 + n.h1_semi * n.h1_semi).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn region_norms_add_up() {
        let mesh = mesh2d();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = NodalField::random_smoothed(&mesh, &mut rng, false);
        let all = norms(&f, &mesh, RegionFilter::All).unwrap();
        let mut sq = 0.0;
        for filter in [
            RegionFilter::Grid,
            RegionFilter::Hole,
            RegionFilter::BulkPlus,
            RegionFilter::BulkMinus,
        ] {
            let n = norms(&f, &mesh, filter).unwrap();
            sq += n.l2 * n.l2;
        }
        assert!((sq - all.l2 * all.l2).abs() <= 1e-12 * all.l2 * all.l2);
        let layer = norms(&f, &mesh, RegionFilter::Layer).unwrap();
        let grid = norms(&f, &mesh, RegionFilter::Grid).unwrap();
        let hole = norms(&f, &mesh, RegionFilter::Hole).unwrap();
        assert!(
            (layer.l2 * layer.l2 - grid.l2 * grid.l2 - hole.l2 * hole.l2).abs()
                <= 1e-12 * layer.l2 * layer.l2
        );
    }

    #[test]
    fn traces() {
        let mesh = mesh2d();
        let c = Complex64::new(0.0, 2.5);
        let f = NodalField::from_fn(&mesh, |_| c);
        assert!((trace_l2(&f, &mesh, 0.0).unwrap() - 2.5).abs() < 1e-13);
        let g = NodalField::from_fn(&mesh, |x| Complex64::new(x[2], 0.0));
        assert!(trace_l2(&g, &mesh, 0.0).unwrap() < 1e-13, "vanishing trace");
        assert!(trace_l2(&f, &mesh, 0.123).is_err(), "unaligned plane rejected");
    }

    #[test]
    fn zrange_requires_aligned_planes() {
        let mesh = mesh2d();
        let f = NodalField::from_fn(&mesh, |x| Complex64::new(x[2], 0.0));
        let up = norms_zrange(&f, &mesh, 0.0, 1.0).unwrap();
        let lo = norms_zrange(&f, &mesh, -1.0, 0.0).unwrap();
        let all = norms(&f, &mesh, RegionFilter::All).unwrap();
        let sum = (up.l2 * up.l2 + lo.l2 * lo.l2).sqrt();
        assert!((sum - all.l2).abs() < 1e-12);
        assert!(norms_zrange(&f, &mesh, 0.0, 0.777).is_err());
        // ∂z of x3 over the upper half has squared norm |O|·L = 1.
        let dz = dz_l2_zrange(&f, &mesh, 0.0, 1.0).unwrap();
        assert!((dz - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampling_reproduces_bilinear_fields() {
        let mesh = mesh2d();
        let f = NodalField::from_fn(&mesh, |x| Complex64::new(2.0 * x[0] - x[2], x[2]));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        use rand::Rng;
        for _ in 0..200 {
            let p = [rng.gen_range(0.0..1.0), 0.0, rng.gen_range(-1.0..1.0)];
            let v = sample(&f, &mesh, &p);
            let want = Complex64::new(2.0 * p[0] - p[2], p[2]);
            assert!((v - want).norm() < 1e-12);
        }
    }

    #[test]
    fn interpolation_between_refinements_is_nodal_exact() {
        let dom = DomainSpec::reduced(1.0, 1.0).unwrap();
        let pat = LayerPattern::build(PatternKind::Cross, 0.5, 8, 1).unwrap();
        let coarse = build_mesh(&dom, &pat, &MeshParams::new(4, 8, GradingPolicy::default())).unwrap();
        let fine = build_mesh(&dom, &pat, &MeshParams::new(8, 8, GradingPolicy::default())).unwrap();
        let f = NodalField::from_fn(&fine, |x| Complex64::new(x[0] + 0.3 * x[2], -x[0]));
        let onto = interpolate(&f, &fine, &coarse).unwrap();
        for id in 0..coarse.node_count() {
            let x = coarse.node_coords(id);
            let want = Complex64::new(x[0] + 0.3 * x[2], -x[0]);
            assert!((onto.values[id] - want).norm() < 1e-12);
        }
    }

    #[test]
    fn gamma_derivative_of_linear_ramp() {
        let mesh = mesh2d();
        // u = max(z, 0) · (slope) is piecewise linear: one-sided derivative 2−i.
        let s = Complex64::new(2.0, -1.0);
        let f = NodalField::from_fn(&mesh, |x| if x[2] > 0.0 { s * x[2] } else { Complex64::new(0.0, 0.0) });
        for g in trace_dz_at_gamma(&f, &mesh).unwrap() {
            assert!((g - s).norm() < 1e-10);
        }
    }
}
