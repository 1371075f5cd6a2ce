//! Conjugate-orthogonal CG for complex-symmetric systems, Jacobi
//! preconditioned. Fallback path for systems too large to factor directly.

use num_complex::Complex64;

use crate::error::{CageError, Result};
use crate::fem::csr::CsrMatrix;

pub struct CocgOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub history: Vec<f64>,
}

fn unconjugated_dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn cocg_solve(
    matrix: &CsrMatrix,
    rhs: &[Complex64],
    x: &mut [Complex64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CocgOutcome> {
    let n = matrix.n;
    let b_norm = norm2(rhs);
    if b_norm == 0.0 {
        x.fill(Complex64::new(0.0, 0.0));
        return Ok(CocgOutcome { iterations: 0, residual: 0.0, history: vec![0.0] });
    }
    let mut diag = vec![Complex64::new(1.0, 0.0); n];
    for i in 0..n {
        let d = matrix.get(i, i);
        if d.norm_sqr() > 0.0 {
            diag[i] = d;
        }
    }
    x.fill(Complex64::new(0.0, 0.0));
    let mut r = rhs.to_vec();
    let mut z: Vec<Complex64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rho = unconjugated_dot(&r, &z);
    let mut q = vec![Complex64::new(0.0, 0.0); n];
    let mut history = vec![1.0];
    for it in 1..=max_iter {
        matrix.matvec(&p, &mut q);
        let sigma = unconjugated_dot(&p, &q);
        if sigma.norm_sqr() == 0.0 {
            return Err(CageError::Solver(format!(
                "COCG breakdown at iteration {it}; residual history {history:?}"
            )));
        }
        let alpha = rho / sigma;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        let rel = norm2(&r) / b_norm;
        history.push(rel);
        if rel <= rel_tol {
            return Ok(CocgOutcome { iterations: it, residual: rel, history });
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rho_next = unconjugated_dot(&r, &z);
        if rho.norm_sqr() == 0.0 {
            return Err(CageError::Solver(format!(
                "COCG stagnated at iteration {it}; residual history {history:?}"
            )));
        }
        let beta = rho_next / rho;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rho = rho_next;
    }
    Err(CageError::Solver(format!(
        "COCG failed to converge in {max_iter} iterations; last residuals {:?}",
        &history[history.len().saturating_sub(6)..]
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn converges_on_diagonally_dominant_complex_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 150;
        // tridiagonal complex-symmetric
        let mut row_ptr = vec![0usize];
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for i in 0usize..n {
            for j in i.saturating_sub(1)..=(i + 1).min(n - 1) {
                cols.push(j);
                let v = if i == j {
                    Complex64::new(4.0 + rng.gen_range(0.0..1.0), 0.5)
                } else {
                    Complex64::new(-1.0, 0.1)
                };
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        // symmetrize explicitly: (i,j) and (j,i) already get the same formula
        let m = CsrMatrix { n, row_ptr, cols, vals };
        let xref: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut b = vec![Complex64::new(0.0, 0.0); n];
        m.matvec(&xref, &mut b);
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        let out = cocg_solve(&m, &b, &mut x, 1e-12, 500).unwrap();
        assert!(out.residual <= 1e-12);
        for (a, r) in x.iter().zip(&xref) {
            assert!((a - r).norm() < 1e-9);
        }
    }
}
