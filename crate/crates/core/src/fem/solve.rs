//! Sparse solve of the assembled system: Dirichlet reduction, banded direct
//! factorization at desk scale, preconditioned COCG beyond it.

use num_complex::Complex64;

use crate::error::{CageError, Result};
use crate::fem::assemble::SparseHermitianSystem;
use crate::fem::band_lu::BandLu;
use crate::fem::cocg::cocg_solve;
use crate::fem::field::NodalField;

/// Unknown count above which the direct factorization is abandoned.
pub const DIRECT_LIMIT: usize = 500_000;
/// Relative residual target for the iterative path.
pub const ITERATIVE_TOL: f64 = 1e-10;
/// Pivot threshold (relative to max |K|) flagging near-singularity.
pub const NEAR_SINGULAR_PIVOT: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    DirectBanded,
    Cocg,
}

#[derive(Debug, Clone)]
pub struct SolveStats {
    pub method: SolveMethod,
    pub unknowns: usize,
    pub bandwidth: usize,
    /// Relative residual ‖Ku − b‖/‖b‖ on the full system.
    pub residual: f64,
    pub min_pivot: f64,
    pub max_pivot: f64,
    /// Set when the minimum pivot falls under `NEAR_SINGULAR_PIVOT`·max|K|:
    /// the operator is probably at (or very near) a resonance.
    pub near_singular: bool,
    pub iterations: Option<usize>,
}

pub fn solve(system: &SparseHermitianSystem) -> Result<(NodalField, SolveStats)> {
    let n = system.matrix.n;
    let free: Vec<usize> = (0..n).filter(|&i| !system.dirichlet[i]).collect();
    if free.is_empty() {
        return Err(CageError::Solver("all unknowns are pinned".into()));
    }
    let mut index_of = vec![usize::MAX; n];
    for (k, &i) in free.iter().enumerate() {
        index_of[i] = k;
    }
    let nf = free.len();

    // reduced bandwidth
    let mut kl = 0usize;
    for &i in &free {
        let ri = index_of[i];
        for k in system.matrix.row_ptr[i]..system.matrix.row_ptr[i + 1] {
            let j = system.matrix.cols[k];
            if !system.dirichlet[j] && system.matrix.vals[k].norm_sqr() > 0.0 {
                let rj = index_of[j];
                kl = kl.max(ri.abs_diff(rj));
            }
        }
    }

    let max_abs = system.matrix.max_abs();
    let mut x_red = vec![Complex64::new(0.0, 0.0); nf];
    for (k, &i) in free.iter().enumerate() {
        x_red[k] = system.rhs[i];
    }

    let stats;
    if nf <= DIRECT_LIMIT {
        let index_of = &index_of;
        let entries = free.iter().flat_map(|&i| {
            let ri = index_of[i];
            (system.matrix.row_ptr[i]..system.matrix.row_ptr[i + 1]).filter_map(move |k| {
                let j = system.matrix.cols[k];
                if system.dirichlet[j] {
                    None
                } else {
                    Some((ri, index_of[j], system.matrix.vals[k]))
                }
            })
        });
        let lu = BandLu::factor(nf, kl, kl, entries)?;
        let near_singular = lu.is_singular() || lu.min_pivot <= NEAR_SINGULAR_PIVOT * max_abs;
        if lu.is_singular() {
            return Err(CageError::Resonance(format!(
                "factorization hit an exact zero pivot (max |K| = {max_abs:.3e}); \
                 the frequency is probably an eigenvalue of the discrete operator"
            )));
        }
        lu.solve_in_place(&mut x_red)?;
        stats = SolveStats {
            method: SolveMethod::DirectBanded,
            unknowns: nf,
            bandwidth: kl,
            residual: 0.0,
            min_pivot: lu.min_pivot,
            max_pivot: lu.max_pivot,
            near_singular,
            iterations: None,
        };
    } else {
        // reduced CSR for the iterative path
        let mut row_ptr = Vec::with_capacity(nf + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for &i in &free {
            for k in system.matrix.row_ptr[i]..system.matrix.row_ptr[i + 1] {
                let j = system.matrix.cols[k];
                if !system.dirichlet[j] {
                    cols.push(index_of[j]);
                    vals.push(system.matrix.vals[k]);
                }
            }
            row_ptr.push(cols.len());
        }
        let reduced = crate::fem::csr::CsrMatrix { n: nf, row_ptr, cols, vals };
        let rhs_red = x_red.clone();
        let out = cocg_solve(&reduced, &rhs_red, &mut x_red, ITERATIVE_TOL, 20 * nf)?;
        stats = SolveStats {
            method: SolveMethod::Cocg,
            unknowns: nf,
            bandwidth: kl,
            residual: out.residual,
            min_pivot: f64::NAN,
            max_pivot: f64::NAN,
            near_singular: false,
            iterations: Some(out.iterations),
        };
    }

    let mut values = vec![Complex64::new(0.0, 0.0); n];
    for (k, &i) in free.iter().enumerate() {
        values[i] = x_red[k];
    }

    // residual on the full system
    let mut ax = vec![Complex64::new(0.0, 0.0); n];
    system.matrix.matvec(&values, &mut ax);
    let mut rnorm = 0.0f64;
    let mut bnorm = 0.0f64;
    for i in 0..n {
        rnorm += (ax[i] - system.rhs[i]).norm_sqr();
        bnorm += system.rhs[i].norm_sqr();
    }
    let residual = if bnorm > 0.0 { (rnorm / bnorm).sqrt() } else { rnorm.sqrt() };

    let mut final_stats = stats;
    final_stats.residual = residual;
    Ok((
        NodalField { values, mesh_id: system.mesh_id },
        final_stats,
    ))
}
