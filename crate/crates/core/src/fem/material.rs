//! Per-element coefficients of the sesquilinear form.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CageError, Result};
use crate::geometry::{DimensionMode, Region, StructuredMesh};

/// The second-order coefficient, given once for the whole domain.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CoefficientSpec {
    Identity,
    /// Constant diagonal matrix, one entry per spatial axis.
    Diagonal { diag: Vec<f64> },
    /// Constant symmetric positive definite matrix, row-major.
    Constant { rows: Vec<Vec<f64>> },
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        CoefficientSpec::Identity
    }
}

impl CoefficientSpec {
    /// Row-major dims×dims matrix stored in a fixed 9-slot array.
    pub fn matrix(&self, dims: usize) -> Result<[f64; 9]> {
        let mut a = [0.0; 9];
        match self {
            CoefficientSpec::Identity => {
                for d in 0..dims {
                    a[d * dims + d] = 1.0;
                }
            }
            CoefficientSpec::Diagonal { diag } => {
                if diag.len() != dims {
                    return Err(CageError::Material(format!(
                        "diagonal coefficient needs {dims} entries, got {}",
                        diag.len()
                    )));
                }
                for d in 0..dims {
                    if diag[d] <= 0.0 {
                        return Err(CageError::Material("diagonal entries must be positive".into()));
                    }
                    a[d * dims + d] = diag[d];
                }
            }
            CoefficientSpec::Constant { rows } => {
                if rows.len() != dims || rows.iter().any(|r| r.len() != dims) {
                    return Err(CageError::Material(format!(
                        "constant coefficient must be {dims}x{dims}"
                    )));
                }
                for r in 0..dims {
                    for c in 0..dims {
                        if (rows[r][c] - rows[c][r]).abs() > 1e-12 {
                            return Err(CageError::Material("coefficient must be symmetric".into()));
                        }
                        a[r * dims + c] = rows[r][c];
                    }
                }
            }
        }
        Ok(a)
    }

    /// Ellipticity and continuity constants (extreme eigenvalues).
    pub fn bounds(&self, dims: usize) -> Result<(f64, f64)> {
        let a = self.matrix(dims)?;
        let m = nalgebra::DMatrix::from_fn(dims, dims, |r, c| a[r * dims + c]);
        let eig = m.symmetric_eigen();
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for &v in eig.eigenvalues.iter() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo <= 0.0 {
            return Err(CageError::Material(format!(
                "coefficient matrix is not positive definite (min eigenvalue {lo})"
            )));
        }
        Ok((lo, hi))
    }
}

/// Piecewise-constant coefficients: one symmetric matrix and one complex
/// zero-order coefficient per element.
#[derive(Debug, Clone)]
pub struct MaterialField {
    /// Row-major matrices with stride dims² (slots beyond dims² unused).
    pub a: Vec<[f64; 9]>,
    pub eps: Vec<Complex64>,
    pub alpha: f64,
    pub beta: f64,
    dims: usize,
}

impl MaterialField {
    pub fn build(
        mesh: &StructuredMesh,
        a_spec: &CoefficientSpec,
        eps_of_region: impl Fn(Region) -> Complex64,
    ) -> Result<Self> {
        let dims = match mesh.mode {
            DimensionMode::Reduced2d => 2,
            DimensionMode::Full3d => 3,
        };
        let matrix = a_spec.matrix(dims)?;
        let (alpha, beta) = a_spec.bounds(dims)?;
        let ne = mesh.element_count();
        let mut eps = Vec::with_capacity(ne);
        for eid in 0..ne {
            let e = eps_of_region(mesh.region(eid));
            if !e.re.is_finite() || !e.im.is_finite() {
                return Err(CageError::Material("non-finite zero-order coefficient".into()));
            }
            if e.im < 0.0 {
                return Err(CageError::Material(
                    "zero-order coefficient must have nonnegative imaginary part".into(),
                ));
            }
            eps.push(e);
        }
        Ok(Self { a: vec![matrix; ne], eps, alpha, beta, dims })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Spot-checks the ellipticity and boundedness constants on random
    /// elements and random complex vectors.
    pub fn validate_bounds(&self, rng: &mut impl Rng, samples: usize) -> Result<()> {
        let dims = self.dims;
        for _ in 0..samples {
            let eid = rng.gen_range(0..self.a.len());
            let a = &self.a[eid];
            let xi: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let zeta: Vec<f64> = (0..dims).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let nxi: f64 = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nzeta: f64 = zeta.iter().map(|v| v * v).sum::<f64>().sqrt();
            let mut axi = vec![0.0; dims];
            for r in 0..dims {
                for c in 0..dims {
                    axi[r] += a[r * dims + c] * xi[c];
                }
            }
            let quad: f64 = axi.iter().zip(&xi).map(|(p, q)| p * q).sum();
            let cross: f64 = axi.iter().zip(&zeta).map(|(p, q)| p * q).sum();
            if quad < self.alpha * nxi * nxi * (1.0 - 1e-10) {
                return Err(CageError::Material("ellipticity bound violated".into()));
            }
            if cross.abs() > self.beta * nxi * nzeta * (1.0 + 1e-10) {
                return Err(CageError::Material("boundedness constant violated".into()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_mesh, DomainSpec, GradingPolicy, LayerPattern, MeshParams, PatternKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_bounds_are_unit() {
        let spec = CoefficientSpec::Identity;
        let (a, b) = spec.bounds(2).unwrap();
        assert_eq!((a, b), (1.0, 1.0));
    }

    #[test]
    fn constant_matrix_bounds_are_eigenvalues() {
        let spec = CoefficientSpec::Constant { rows: vec![vec![2.0, 1.0], vec![1.0, 2.0]] };
        let (a, b) = spec.bounds(2).unwrap();
        assert!((a - 1.0).abs() < 1e-12 && (b - 3.0).abs() < 1e-12);
        let bad = CoefficientSpec::Constant { rows: vec![vec![1.0, 2.0], vec![2.0, 1.0]] };
        assert!(bad.bounds(2).is_err());
    }

    #[test]
    fn material_validates_on_mesh() {
        let dom = DomainSpec::reduced(1.0, 1.0).unwrap();
        let pat = LayerPattern::build(PatternKind::Cross, 0.5, 8, 1).unwrap();
        let mesh = build_mesh(&dom, &pat, &MeshParams::new(4, 8, GradingPolicy::default())).unwrap();
        let mat = MaterialField::build(&mesh, &CoefficientSpec::Identity, |r| match r {
            Region::Grid => Complex64::new(1.0, 16.0),
            _ => Complex64::new(1.0, 0.0),
        })
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        mat.validate_bounds(&mut rng, 500).unwrap();
        // Negative imaginary part is rejected.
        let bad = MaterialField::build(&mesh, &CoefficientSpec::Identity, |_| {
            Complex64::new(1.0, -0.1)
        });
        assert!(bad.is_err());
    }
}
