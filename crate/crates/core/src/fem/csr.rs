//! Compressed-row complex sparse matrix with the structured-grid stencil.

use num_complex::Complex64;

use crate::geometry::StructuredMesh;

#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<Complex64>,
}

impl CsrMatrix {
    /// Zero matrix with the 9/27-point nodal stencil of the mesh.
    pub fn structured(mesh: &StructuredMesh) -> Self {
        let (nx, ny, nz) = (mesh.nx(), mesh.ny(), mesh.nz());
        let n = nx * ny * nz;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for ix in 0..nx {
            for iy in 0..ny {
                for iz in 0..nz {
                    for jx in ix.saturating_sub(1)..=(ix + 1).min(nx - 1) {
                        for jy in iy.saturating_sub(1)..=(iy + 1).min(ny - 1) {
                            for jz in iz.saturating_sub(1)..=(iz + 1).min(nz - 1) {
                                cols.push(mesh.node_id(jx, jy, jz));
                            }
                        }
                    }
                    row_ptr.push(cols.len());
                }
            }
        }
        let vals = vec![Complex64::new(0.0, 0.0); cols.len()];
        Self { n, row_ptr, cols, vals }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        let row = &self.cols[lo..hi];
        let k = lo + row.partition_point(|&c| c < j);
        debug_assert!(k < hi && self.cols[k] == j, "({i},{j}) outside stencil");
        self.vals[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let lo = self.row_ptr[i];
        let hi = self.row_ptr[i + 1];
        let row = &self.cols[lo..hi];
        let k = row.partition_point(|&c| c < j);
        if k < row.len() && row[k] == j {
            self.vals[lo + k]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        for i in 0..self.n {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[i] = acc;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest relative asymmetry |K_ij − K_ji| / max|K|.
    pub fn max_asymmetry(&self) -> f64 {
        let scale = self.max_abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.cols[k];
                if j > i {
                    let d = (self.vals[k] - self.get(j, i)).norm();
                    worst = worst.max(d / scale);
                }
            }
        }
        worst
    }
}
