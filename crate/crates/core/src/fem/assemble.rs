//! Assembly of the discrete sesquilinear form `K = S − ω²M(ε)` and of the
//! load vector `iω·(f, ·)`.

use num_complex::Complex64;

use crate::error::{CageError, Result};
use crate::fem::csr::CsrMatrix;
use crate::fem::field::NodalField;
use crate::fem::material::MaterialField;
use crate::fem::quadrature::{local_matrices, ElementQuad};
use crate::geometry::{DimensionMode, MeshId, Region, StructuredMesh};

/// Right-hand-side data. The vertical indicator variant is integrated
/// exactly, so source supports need not be mesh-aligned.
pub enum SourceTerm<'a> {
    Zero,
    /// `amplitude · 1_{z ∈ (z_lo, z_hi)}`, extended over the cross section.
    IndicatorZ { z_lo: f64, z_hi: f64, amplitude: Complex64 },
    Nodal(&'a NodalField),
    Function(&'a dyn Fn(&[f64; 3]) -> Complex64),
}

impl SourceTerm<'_> {
    /// Exact L² norm where available, quadrature otherwise.
    pub fn l2_norm(&self, mesh: &StructuredMesh) -> f64 {
        match self {
            SourceTerm::Zero => 0.0,
            SourceTerm::IndicatorZ { z_lo, z_hi, amplitude } => {
                amplitude.norm() * (mesh.cross_section_measure() * (z_hi - z_lo).max(0.0)).sqrt()
            }
            SourceTerm::Nodal(f) => crate::fem::norms::norms(f, mesh, crate::fem::norms::RegionFilter::All)
                .map(|n| n.l2)
                .unwrap_or(f64::NAN),
            SourceTerm::Function(f) => {
                let quad = ElementQuad::new(spatial_dims(mesh));
                let mut acc = 0.0;
                for eid in 0..mesh.element_count() {
                    let (lo, h) = mesh.element_box(eid);
                    let hs = spatial_extents(mesh, &h);
                    let det: f64 = hs[..quad.dims].iter().product();
                    for p in 0..quad.n_pts {
                        let x = gauss_point(mesh, &lo, &h, &quad.points[p]);
                        acc += quad.weights[p] * det * f(&x).norm_sqr();
                    }
                }
                acc.sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AssembleOptions {
    /// Require the source support to lie in the closed upper bulk.
    pub require_plus_support: bool,
    /// Additionally pin all nodes with `x₃ ≤ 0` (limit-problem domain).
    pub dirichlet_below_gamma: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymmetryKind {
    ComplexSymmetric,
}

/// Discrete image of the weak form: complex-symmetric matrix, load vector,
/// and the Dirichlet mask that was eliminated symmetrically.
pub struct SparseHermitianSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<Complex64>,
    pub dirichlet: Vec<bool>,
    pub symmetry_kind: SymmetryKind,
    pub mesh_id: MeshId,
    pub omega: f64,
}

pub(crate) fn spatial_dims(mesh: &StructuredMesh) -> usize {
    match mesh.mode {
        DimensionMode::Reduced2d => 2,
        DimensionMode::Full3d => 3,
    }
}

/// Spatial extents (in-plane axes then vertical) from an element box.
pub(crate) fn spatial_extents(mesh: &StructuredMesh, h: &[f64; 3]) -> [f64; 3] {
    match mesh.mode {
        DimensionMode::Reduced2d => [h[0], h[2], 1.0],
        DimensionMode::Full3d => *h,
    }
}

pub(crate) fn gauss_point(
    mesh: &StructuredMesh,
    lo: &[f64; 3],
    h: &[f64; 3],
    ref_pt: &[f64; 3],
) -> [f64; 3] {
    match mesh.mode {
        DimensionMode::Reduced2d => {
            [lo[0] + ref_pt[0] * h[0], 0.0, lo[2] + ref_pt[1] * h[2]]
        }
        DimensionMode::Full3d => [
            lo[0] + ref_pt[0] * h[0],
            lo[1] + ref_pt[1] * h[1],
            lo[2] + ref_pt[2] * h[2],
        ],
    }
}

/// Load vector `(f, N_i)` without the iω factor.
pub fn assemble_load(mesh: &StructuredMesh, source: &SourceTerm) -> Result<Vec<Complex64>> {
    let dims = spatial_dims(mesh);
    let quad = ElementQuad::new(dims);
    let mut load = vec![Complex64::new(0.0, 0.0); mesh.node_count()];
    let mut nodes = [0usize; 8];
    match source {
        SourceTerm::Zero => {}
        SourceTerm::IndicatorZ { z_lo, z_hi, amplitude } => {
            if z_hi <= z_lo {
                return Err(CageError::Assembly("indicator source has empty support".into()));
            }
            for eid in 0..mesh.element_count() {
                let (lo, h) = mesh.element_box(eid);
                let (z0, hz) = (lo[2], h[2]);
                let a = z_lo.max(z0);
                let b = z_hi.min(z0 + hz);
                if b <= a {
                    continue;
                }
                // Exact integrals of the two linear vertical basis functions
                // over the clipped interval, in local coordinates.
                let (ta, tb) = ((a - z0) / hz, (b - z0) / hz);
                let int_hi = hz * 0.5 * (tb * tb - ta * ta); // ∫ t
                let int_lo = hz * (tb - ta) - int_hi; // ∫ (1−t)
                // In-plane integral of each basis function is half the width
                // per axis.
                let nl = mesh.element_nodes(eid, &mut nodes);
                let plane: f64 = match mesh.mode {
                    DimensionMode::Reduced2d => h[0] * 0.5,
                    DimensionMode::Full3d => h[0] * 0.5 * (h[1] * 0.5),
                };
                for (l, &node) in nodes[..nl].iter().enumerate() {
                    let vert = if l % 2 == 0 { int_lo } else { int_hi };
                    load[node] += amplitude * plane * vert;
                }
            }
        }
        SourceTerm::Nodal(f) => {
            f.check_mesh(mesh)?;
            let mut m = [[0.0f64; 8]; 8];
            let mut s = [[0.0f64; 8]; 8];
            let ident = {
                let mut a = [0.0; 9];
                for d in 0..dims {
                    a[d * dims + d] = 1.0;
                }
                a
            };
            for eid in 0..mesh.element_count() {
                let (_, h) = mesh.element_box(eid);
                let hs = spatial_extents(mesh, &h);
                local_matrices(&quad, &hs, &ident, &mut s, &mut m);
                let nl = mesh.element_nodes(eid, &mut nodes);
                for i in 0..nl {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..nl {
                        acc += m[i][j] * f.values[nodes[j]];
                    }
                    load[nodes[i]] += acc;
                }
            }
        }
        SourceTerm::Function(f) => {
            for eid in 0..mesh.element_count() {
                let (lo, h) = mesh.element_box(eid);
                let hs = spatial_extents(mesh, &h);
                let det: f64 = hs[..dims].iter().product();
                let nl = mesh.element_nodes(eid, &mut nodes);
                for p in 0..quad.n_pts {
                    let x = gauss_point(mesh, &lo, &h, &quad.points[p]);
                    let fv = f(&x) * (quad.weights[p] * det);
                    for i in 0..nl {
                        load[nodes[i]] += fv * quad.shape[p][i];
                    }
                }
            }
        }
    }
    Ok(load)
}

/// Assembles `K = S − ω²M(ε)` with homogeneous Dirichlet conditions
/// eliminated symmetrically, and `rhs = iω (f, N_i)`.
pub fn assemble(
    mesh: &StructuredMesh,
    material: &MaterialField,
    omega: f64,
    source: &SourceTerm,
    opts: &AssembleOptions,
) -> Result<SparseHermitianSystem> {
    if material.eps.len() != mesh.element_count() {
        return Err(CageError::Assembly("material does not match mesh".into()));
    }
    if !(omega > 0.0) {
        return Err(CageError::Assembly("omega must be positive".into()));
    }
    for eid in 0..mesh.element_count() {
        let (_, h) = mesh.element_box(eid);
        let hs = spatial_extents(mesh, &h);
        if hs[..spatial_dims(mesh)].iter().any(|&v| v <= 0.0) {
            return Err(CageError::Assembly(format!("degenerate element {eid}")));
        }
    }
    if opts.require_plus_support {
        validate_plus_support(mesh, source)?;
    }

    let dims = spatial_dims(mesh);
    let quad = ElementQuad::new(dims);
    let mut matrix = CsrMatrix::structured(mesh);
    let mut s = [[0.0f64; 8]; 8];
    let mut m = [[0.0f64; 8]; 8];
    let mut nodes = [0usize; 8];
    let w2 = omega * omega;
    for eid in 0..mesh.element_count() {
        let (_, h) = mesh.element_box(eid);
        let hs = spatial_extents(mesh, &h);
        local_matrices(&quad, &hs, &material.a[eid], &mut s, &mut m);
        let eps = material.eps[eid];
        let nl = mesh.element_nodes(eid, &mut nodes);
        for i in 0..nl {
            for j in 0..nl {
                let v = Complex64::new(s[i][j], 0.0) - eps * (w2 * m[i][j]);
                matrix.add(nodes[i], nodes[j], v);
            }
        }
    }

    let load = assemble_load(mesh, source)?;
    let mut rhs: Vec<Complex64> = load
        .into_iter()
        .map(|v| Complex64::new(0.0, omega) * v)
        .collect();

    let mut dirichlet = vec![false; mesh.node_count()];
    for id in 0..mesh.node_count() {
        let pinned = mesh.is_boundary_node(id)
            || (opts.dirichlet_below_gamma && mesh.node_coords(id)[2] <= 0.0);
        dirichlet[id] = pinned;
    }
    apply_dirichlet(&mut matrix, &mut rhs, &dirichlet);

    Ok(SparseHermitianSystem {
        matrix,
        rhs,
        dirichlet,
        symmetry_kind: SymmetryKind::ComplexSymmetric,
        mesh_id: mesh.id(),
        omega,
    })
}

/// Zero rows and columns of pinned nodes, unit diagonal, zero load
/// (homogeneous data only).
pub fn apply_dirichlet(matrix: &mut CsrMatrix, rhs: &mut [Complex64], dirichlet: &[bool]) {
    for i in 0..matrix.n {
        let pinned_row = dirichlet[i];
        for k in matrix.row_ptr[i]..matrix.row_ptr[i + 1] {
            let j = matrix.cols[k];
            if pinned_row || dirichlet[j] {
                matrix.vals[k] = if i == j {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
        }
        if pinned_row {
            rhs[i] = Complex64::new(0.0, 0.0);
        }
    }
}

fn validate_plus_support(mesh: &StructuredMesh, source: &SourceTerm) -> Result<()> {
    let top = mesh.delta / 2.0;
    match source {
        SourceTerm::Zero => Ok(()),
        SourceTerm::IndicatorZ { z_lo, .. } => {
            if *z_lo + 1e-12 < top {
                Err(CageError::Assembly(format!(
                    "source support starts at {z_lo}, below the layer top {top}"
                )))
            } else {
                Ok(())
            }
        }
        SourceTerm::Nodal(f) => {
            for id in 0..mesh.node_count() {
                if f.values[id].norm() > 0.0 && mesh.node_coords(id)[2] < top - 1e-12 {
                    return Err(CageError::Assembly(
                        "nodal source has support below the upper bulk".into(),
                    ));
                }
            }
            Ok(())
        }
        SourceTerm::Function(f) => {
            // Sample element centroids outside the upper bulk.
            for eid in 0..mesh.element_count() {
                if mesh.region(eid) == Region::BulkPlus {
                    continue;
                }
                let c = mesh.element_centroid(eid);
                if f(&c).norm() > 0.0 {
                    return Err(CageError::Assembly(
                        "source function is nonzero outside the upper bulk".into(),
                    ));
                }
            }
            Ok(())
        }
    }
}

/// `∫ f·ū` for a discrete field u, using the same exact/quadrature rules as
/// the load assembly.
pub fn source_inner_product(
    mesh: &StructuredMesh,
    source: &SourceTerm,
    u: &NodalField,
) -> Result<Complex64> {
    u.check_mesh(mesh)?;
    let load = assemble_load(mesh, source)?;
    Ok(load
        .iter()
        .zip(&u.values)
        .map(|(l, v)| l * v.conj())
        .sum())
}
