//! Banded LU factorization with partial pivoting for complex matrices.
//!
//! Storage follows the usual band layout: entry (i,j) lives at
//! `ab[j·lda + kl + ku + i − j]` with `lda = 2kl + ku + 1`; the extra `kl`
//! rows absorb fill from row interchanges.

use num_complex::Complex64;

use crate::error::{CageError, Result};

pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    lda: usize,
    ab: Vec<Complex64>,
    ipiv: Vec<usize>,
    pub min_pivot: f64,
    pub max_pivot: f64,
    singular_at: Option<usize>,
}

impl BandLu {
    /// Factors a matrix given by an entry iterator `(i, j, v)`; entries may
    /// repeat (they are accumulated). `kl`/`ku` are the lower and upper
    /// bandwidths of the input.
    pub fn factor<I>(n: usize, kl: usize, ku: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, Complex64)>,
    {
        if n == 0 {
            return Err(CageError::Solver("empty system".into()));
        }
        let lda = 2 * kl + ku + 1;
        let est_bytes = lda as u128 * n as u128 * 16;
        if est_bytes > 12 * 1024 * 1024 * 1024 {
            return Err(CageError::Solver(format!(
                "band factor would need {est_bytes} bytes"
            )));
        }
        let mut ab = vec![Complex64::new(0.0, 0.0); lda * n];
        let kv = kl + ku;
        for (i, j, v) in entries {
            debug_assert!(i < n && j < n);
            debug_assert!(
                j <= i + ku && i <= j + kl,
                "entry ({i},{j}) outside band kl={kl} ku={ku}"
            );
            ab[j * lda + kv + i - j] += v;
        }
        let mut lu = Self {
            n,
            kl,
            ku,
            lda,
            ab,
            ipiv: vec![0; n],
            min_pivot: f64::INFINITY,
            max_pivot: 0.0,
            singular_at: None,
        };
        lu.factorize();
        Ok(lu)
    }

    fn factorize(&mut self) {
        let (n, kl, lda) = (self.n, self.kl, self.lda);
        let kv = self.kl + self.ku;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            // partial pivot within the column
            let mut p = 0usize;
            let mut best = self.ab[j * lda + kv].norm_sqr();
            for i in 1..=km {
                let mag = self.ab[j * lda + kv + i].norm_sqr();
                if mag > best {
                    best = mag;
                    p = i;
                }
            }
            self.ipiv[j] = j + p;
            let piv_mag = best.sqrt();
            self.min_pivot = self.min_pivot.min(piv_mag);
            self.max_pivot = self.max_pivot.max(piv_mag);
            if piv_mag == 0.0 {
                if self.singular_at.is_none() {
                    self.singular_at = Some(j);
                }
                continue;
            }
            ju = ju.max((j + self.ku + p).min(n - 1));
            if p != 0 {
                for k in j..=ju {
                    let a = k * lda + kv + j - k;
                    let b = k * lda + kv + j + p - k;
                    self.ab.swap(a, b);
                }
            }
            if km > 0 {
                let piv = self.ab[j * lda + kv];
                for i in 1..=km {
                    let idx = j * lda + kv + i;
                    self.ab[idx] /= piv;
                }
                for k in (j + 1)..=ju {
                    let top = self.ab[k * lda + kv + j - k];
                    if top.norm_sqr() > 0.0 {
                        for i in 1..=km {
                            let m = self.ab[j * lda + kv + i];
                            self.ab[k * lda + kv + j + i - k] -= m * top;
                        }
                    }
                }
            }
        }
    }

    pub fn is_singular(&self) -> bool {
        self.singular_at.is_some()
    }

    pub fn solve_in_place(&self, b: &mut [Complex64]) -> Result<()> {
        if let Some(j) = self.singular_at {
            return Err(CageError::Solver(format!(
                "factorization broke down at column {j} (exact zero pivot)"
            )));
        }
        assert_eq!(b.len(), self.n);
        let (n, kl, lda) = (self.n, self.kl, self.lda);
        let kv = self.kl + self.ku;
        // forward substitution with the stored multipliers
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            let bj = b[j];
            for i in 1..=km {
                let m = self.ab[j * lda + kv + i];
                b[j + i] -= m * bj;
            }
        }
        // back substitution
        for j in (0..n).rev() {
            b[j] /= self.ab[j * lda + kv];
            let bj = b[j];
            let reach = (kl + self.ku).min(j);
            for i in (j - reach)..j {
                let u = self.ab[j * lda + kv + i - j];
                b[i] -= u * bj;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_banded(
        rng: &mut impl Rng,
        n: usize,
        kl: usize,
        ku: usize,
    ) -> Vec<(usize, usize, Complex64)> {
        let mut entries = Vec::new();
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let mut v = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                if i == j {
                    v += Complex64::new(4.0, 0.0); // keep well conditioned
                }
                entries.push((i, j, v));
            }
        }
        entries
    }

    fn dense_solve(
        n: usize,
        entries: &[(usize, usize, Complex64)],
        b: &[Complex64],
    ) -> Vec<Complex64> {
        let mut m = DMatrix::<Complex64>::zeros(n, n);
        for &(i, j, v) in entries {
            m[(i, j)] += v;
        }
        let rhs = nalgebra::DVector::from_column_slice(b);
        let lu = m.lu();
        let x = lu.solve(&rhs).expect("dense solve");
        x.iter().copied().collect()
    }

    #[test]
    fn matches_dense_lu_on_random_bands() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &(n, kl, ku) in &[(12usize, 2usize, 3usize), (40, 5, 5), (80, 1, 1), (30, 29, 29)] {
            let entries = random_banded(&mut rng, n, kl, ku);
            let b: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let lu = BandLu::factor(n, kl, ku, entries.iter().copied()).unwrap();
            let mut x = b.clone();
            lu.solve_in_place(&mut x).unwrap();
            let reference = dense_solve(n, &entries, &b);
            for (xa, xb) in x.iter().zip(&reference) {
                assert!((xa - xb).norm() < 1e-10, "band vs dense mismatch");
            }
        }
    }

    #[test]
    fn diagonal_system_returns_scaled_rhs() {
        let n = 10;
        let entries = (0..n).map(|i| (i, i, Complex64::new(2.0, 0.0)));
        let lu = BandLu::factor(n, 0, 0, entries).unwrap();
        let mut b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, -1.0)).collect();
        let expect: Vec<Complex64> = b.iter().map(|v| v / 2.0).collect();
        lu.solve_in_place(&mut b).unwrap();
        for (got, want) in b.iter().zip(&expect) {
            assert!((got - want).norm() < 1e-15);
        }
    }

    #[test]
    fn needs_pivoting_case() {
        // [[0, 1], [1, 0]] has a zero leading pivot; partial pivoting must cope.
        let entries = vec![
            (0usize, 1usize, Complex64::new(1.0, 0.0)),
            (1, 0, Complex64::new(1.0, 0.0)),
        ];
        let lu = BandLu::factor(2, 1, 1, entries).unwrap();
        assert!(!lu.is_singular());
        let mut b = vec![Complex64::new(3.0, 0.0), Complex64::new(7.0, 0.0)];
        lu.solve_in_place(&mut b).unwrap();
        assert!((b[0].re - 7.0).abs() < 1e-14 && (b[1].re - 3.0).abs() < 1e-14);
    }

    #[test]
    fn singular_matrix_reports_breakdown() {
        let entries = vec![
            (0usize, 0usize, Complex64::new(1.0, 0.0)),
            (1, 1, Complex64::new(0.0, 0.0)),
        ];
        let lu = BandLu::factor(2, 0, 0, entries).unwrap();
        assert!(lu.is_singular());
        let mut b = vec![Complex64::new(1.0, 0.0); 2];
        assert!(lu.solve_in_place(&mut b).is_err());
    }
}
