//! Spectral-gap probe for the wellposedness hypothesis: `ω²ε₃` must stay
//! away from the Dirichlet spectrum of `−div(A∇)` on the upper bulk.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CageError, Result};
use crate::fem::{BandLu, CoefficientSpec, CsrMatrix};
use crate::fem::quadrature::{local_matrices, ElementQuad};
use crate::geometry::{DimensionMode, StructuredMesh};

#[derive(Debug, Clone, Copy)]
pub struct EigenOptions {
    /// Number of requested smallest eigenvalues (≥ 6).
    pub k: usize,
    /// Pass iff the gap is at least this fraction of λ₁.
    pub threshold_frac: f64,
    pub seed: u64,
    pub max_iterations: usize,
    pub rel_tol: f64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self { k: 6, threshold_frac: 0.05, seed: 314, max_iterations: 300, rel_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EigenGapReport {
    pub pass: bool,
    /// min_j |λ_j − ω²ε₃| over the computed eigenvalues.
    pub gap: f64,
    pub nearest_eigenvalue: f64,
    pub target: f64,
    pub threshold: f64,
    pub eigenvalues: Vec<f64>,
    pub converged: bool,
    /// Set when the target lies beyond the computed part of the spectrum,
    /// so the reported gap is only a lower-bound estimate.
    pub inconclusive: bool,
    pub iterations: usize,
}

/// Computes the smallest Dirichlet eigenvalues of `−div(A∇)` on the upper
/// bulk `O × (0, L)` of the mesh (mass-normalized), by subspace iteration
/// with the banded factorization of the stiffness matrix.
pub fn eigen_gap_check(
    mesh: &StructuredMesh,
    a_spec: &CoefficientSpec,
    omega: f64,
    eps3: f64,
    opts: &EigenOptions,
) -> Result<EigenGapReport> {
    if opts.k < 1 {
        return Err(CageError::Eigen("k must be positive".into()));
    }
    let target = omega * omega * eps3;

    // Free nodes: strictly above the interface, off the outer boundary.
    let n_all = mesh.node_count();
    let mut free_mask = vec![false; n_all];
    for id in 0..n_all {
        let c = mesh.node_coords(id);
        free_mask[id] = c[2] > 1e-14 && !mesh.is_boundary_node(id);
    }
    let free: Vec<usize> = (0..n_all).filter(|&i| free_mask[i]).collect();
    let nf = free.len();
    if nf < opts.k + 8 {
        return Err(CageError::Eigen(format!(
            "upper-bulk operator has only {nf} unknowns; not enough for k = {}",
            opts.k
        )));
    }
    let mut index_of = vec![usize::MAX; n_all];
    for (k, &i) in free.iter().enumerate() {
        index_of[i] = k;
    }

    // Assemble stiffness and mass over elements above the interface.
    let dims = match mesh.mode {
        DimensionMode::Reduced2d => 2,
        DimensionMode::Full3d => 3,
    };
    let a = a_spec.matrix(dims)?;
    let quad = ElementQuad::new(dims);
    let mut s_full = CsrMatrix::structured(mesh);
    let mut m_full = CsrMatrix::structured(mesh);
    let mut s_loc = [[0.0f64; 8]; 8];
    let mut m_loc = [[0.0f64; 8]; 8];
    let mut nodes = [0usize; 8];
    for eid in 0..mesh.element_count() {
        let c = mesh.element_centroid(eid);
        if c[2] <= 0.0 {
            continue;
        }
        let (_, h) = mesh.element_box(eid);
        let hs = match mesh.mode {
            DimensionMode::Reduced2d => [h[0], h[2], 1.0],
            DimensionMode::Full3d => h,
        };
        local_matrices(&quad, &hs, &a, &mut s_loc, &mut m_loc);
        let nl = mesh.element_nodes(eid, &mut nodes);
        for i in 0..nl {
            for j in 0..nl {
                s_full.add(nodes[i], nodes[j], Complex64::new(s_loc[i][j], 0.0));
                m_full.add(nodes[i], nodes[j], Complex64::new(m_loc[i][j], 0.0));
            }
        }
    }

    let reduce = |full: &CsrMatrix| -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut row_ptr = Vec::with_capacity(nf + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for &i in &free {
            for k in full.row_ptr[i]..full.row_ptr[i + 1] {
                let j = full.cols[k];
                if free_mask[j] {
                    cols.push(index_of[j]);
                    vals.push(full.vals[k].re);
                }
            }
            row_ptr.push(cols.len());
        }
        (row_ptr, cols, vals)
    };
    let (s_ptr, s_cols, s_vals) = reduce(&s_full);
    let (m_ptr, m_cols, m_vals) = reduce(&m_full);
    drop(s_full);
    drop(m_full);

    let matvec = |ptr: &[usize], cols: &[usize], vals: &[f64], x: &[f64], y: &mut [f64]| {
        for i in 0..nf {
            let mut acc = 0.0;
            for k in ptr[i]..ptr[i + 1] {
                acc += vals[k] * x[cols[k]];
            }
            y[i] = acc;
        }
    };

    let mut bandwidth = 0usize;
    for i in 0..nf {
        for k in s_ptr[i]..s_ptr[i + 1] {
            bandwidth = bandwidth.max(i.abs_diff(s_cols[k]));
        }
    }
    let lu = {
        let (s_cols, s_vals) = (&s_cols, &s_vals);
        BandLu::factor(
            nf,
            bandwidth,
            bandwidth,
            (0..nf).flat_map(|i| {
                (s_ptr[i]..s_ptr[i + 1])
                    .map(move |k| (i, s_cols[k], Complex64::new(s_vals[k], 0.0)))
            }),
        )?
    };
    if lu.is_singular() {
        return Err(CageError::Eigen("stiffness factorization broke down".into()));
    }

    // Subspace iteration with Rayleigh–Ritz projection.
    let m_block = (opts.k + 6).min(nf);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<Vec<f64>> = (0..m_block)
        .map(|_| (0..nf).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let mut lambda = vec![f64::INFINITY; m_block];
    let mut converged = false;
    let mut iterations = 0usize;
    let mut work = vec![0.0f64; nf];
    let mut cbuf = vec![Complex64::new(0.0, 0.0); nf];
    for it in 1..=opts.max_iterations {
        iterations = it;
        // y_c = M x_c, xhat_c = S⁻¹ y_c
        let mut y: Vec<Vec<f64>> = Vec::with_capacity(m_block);
        let mut xhat: Vec<Vec<f64>> = Vec::with_capacity(m_block);
        for c in 0..m_block {
            matvec(&m_ptr, &m_cols, &m_vals, &x[c], &mut work);
            y.push(work.clone());
            for i in 0..nf {
                cbuf[i] = Complex64::new(work[i], 0.0);
            }
            lu.solve_in_place(&mut cbuf)?;
            xhat.push(cbuf.iter().map(|v| v.re).collect());
        }
        // Projected pencil: A_r = X̂ᵀ S X̂ = X̂ᵀ Y, B_r = X̂ᵀ M X̂.
        let mut a_r = DMatrix::<f64>::zeros(m_block, m_block);
        let mut b_r = DMatrix::<f64>::zeros(m_block, m_block);
        for c in 0..m_block {
            matvec(&m_ptr, &m_cols, &m_vals, &xhat[c], &mut work);
            for r in 0..m_block {
                let arc: f64 = xhat[r].iter().zip(&y[c]).map(|(p, q)| p * q).sum();
                let brc: f64 = xhat[r].iter().zip(&work).map(|(p, q)| p * q).sum();
                a_r[(r, c)] = arc;
                b_r[(r, c)] = brc;
            }
        }
        // Symmetrize against roundoff.
        let a_r = (&a_r + a_r.transpose()) * 0.5;
        let b_r = (&b_r + b_r.transpose()) * 0.5;
        let chol = b_r
            .clone()
            .cholesky()
            .ok_or_else(|| CageError::Eigen("projected mass lost rank".into()))?;
        let linv = chol.l().try_inverse().ok_or_else(|| CageError::Eigen("singular factor".into()))?;
        let c_small = &linv * a_r * linv.transpose();
        let c_small = (&c_small + c_small.transpose()) * 0.5;
        let eig = c_small.symmetric_eigen();
        let mut order: Vec<usize> = (0..m_block).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let q_full = linv.transpose() * &eig.eigenvectors;
        let mut new_lambda = Vec::with_capacity(m_block);
        let mut new_x: Vec<Vec<f64>> = Vec::with_capacity(m_block);
        for &col in &order {
            new_lambda.push(eig.eigenvalues[col]);
            let mut v = vec![0.0f64; nf];
            for c in 0..m_block {
                let w = q_full[(c, col)];
                for i in 0..nf {
                    v[i] += w * xhat[c][i];
                }
            }
            new_x.push(v);
        }
        let mut worst = 0.0f64;
        for j in 0..opts.k.min(m_block) {
            let denom = new_lambda[j].abs().max(1e-300);
            worst = worst.max((new_lambda[j] - lambda[j]).abs() / denom);
        }
        lambda = new_lambda;
        x = new_x;
        if worst <= opts.rel_tol {
            converged = true;
            break;
        }
    }

    let eigenvalues: Vec<f64> = lambda[..opts.k.min(m_block)].to_vec();
    let mut gap = f64::INFINITY;
    let mut nearest = f64::NAN;
    for &l in &eigenvalues {
        let d = (l - target).abs();
        if d < gap {
            gap = d;
            nearest = l;
        }
    }
    let lambda1 = eigenvalues[0];
    let threshold = opts.threshold_frac * lambda1;
    let inconclusive = !converged || target > eigenvalues[eigenvalues.len() - 1];
    Ok(EigenGapReport {
        pass: converged && !inconclusive && gap >= threshold,
        gap,
        nearest_eigenvalue: nearest,
        target,
        threshold,
        eigenvalues,
        converged,
        inconclusive,
        iterations,
    })
}
