//! Tensor Gauss quadrature and Q1 shape functions on the reference box.
//!
//! Two points per direction: exact for the bilinear/trilinear mass and
//! stiffness entries with piecewise-constant coefficients.

/// Spatial dimension of the element (2 in reduced mode, 3 in full mode).
#[derive(Debug, Clone)]
pub struct ElementQuad {
    pub dims: usize,
    pub n_loc: usize,
    pub n_pts: usize,
    /// Reference coordinates of the Gauss points, [point][axis].
    pub points: Vec<[f64; 3]>,
    /// Reference weights (volume of the unit box is 1).
    pub weights: Vec<f64>,
    /// shape[point][local node].
    pub shape: Vec<Vec<f64>>,
    /// grad_ref[point][local node][axis].
    pub grad_ref: Vec<Vec<[f64; 3]>>,
}

fn line_basis(t: f64, l: usize) -> f64 {
    if l == 0 {
        1.0 - t
    } else {
        t
    }
}

fn line_basis_d(l: usize) -> f64 {
    if l == 0 {
        -1.0
    } else {
        1.0
    }
}

impl ElementQuad {
    pub fn new(dims: usize) -> Self {
        assert!(dims == 2 || dims == 3);
        let g = 0.5 / 3.0_f64.sqrt();
        let pts_1d = [0.5 - g, 0.5 + g];
        let n_loc = 1 << dims;
        let n_pts = 1 << dims;
        let mut points = Vec::with_capacity(n_pts);
        let mut weights = Vec::with_capacity(n_pts);
        let mut shape = Vec::with_capacity(n_pts);
        let mut grad_ref = Vec::with_capacity(n_pts);
        for p in 0..n_pts {
            let mut coord = [0.0; 3];
            for axis in 0..dims {
                // axis 0 varies slowest to match tensor node ordering
                let bit = (p >> (dims - 1 - axis)) & 1;
                coord[axis] = pts_1d[bit];
            }
            let mut row_shape = Vec::with_capacity(n_loc);
            let mut row_grad = Vec::with_capacity(n_loc);
            for l in 0..n_loc {
                let mut val = 1.0;
                let mut grad = [0.0; 3];
                for axis in 0..dims {
                    let lb = (l >> (dims - 1 - axis)) & 1;
                    val *= line_basis(coord[axis], lb);
                }
                for axis in 0..dims {
                    let mut d = 1.0;
                    for other in 0..dims {
                        let lb = (l >> (dims - 1 - other)) & 1;
                        if other == axis {
                            d *= line_basis_d(lb);
                        } else {
                            d *= line_basis(coord[other], lb);
                        }
                    }
                    grad[axis] = d;
                }
                row_shape.push(val);
                row_grad.push(grad);
            }
            points.push(coord);
            weights.push(1.0 / n_pts as f64);
            shape.push(row_shape);
            grad_ref.push(row_grad);
        }
        Self { dims, n_loc, n_pts, points, weights, shape, grad_ref }
    }

}

/// Local stiffness (A-weighted) and mass matrices for an axis-aligned box
/// with spatial extents `h` and a constant symmetric coefficient `a`
/// (row-major dims×dims).
pub fn local_matrices(
    quad: &ElementQuad,
    h: &[f64; 3],
    a: &[f64; 9],
    s_out: &mut [[f64; 8]; 8],
    m_out: &mut [[f64; 8]; 8],
) {
    let dims = quad.dims;
    let n = quad.n_loc;
    let mut det = 1.0;
    for axis in 0..dims {
        det *= h[axis];
    }
    for row in s_out.iter_mut().take(n) {
        row[..n].fill(0.0);
    }
    for row in m_out.iter_mut().take(n) {
        row[..n].fill(0.0);
    }
    let mut grad_phys = [[0.0f64; 3]; 8];
    for p in 0..quad.n_pts {
        let w = quad.weights[p] * det;
        for l in 0..n {
            for axis in 0..dims {
                grad_phys[l][axis] = quad.grad_ref[p][l][axis] / h[axis];
            }
        }
        for i in 0..n {
            // A ∇Ni
            let mut agrad = [0.0f64; 3];
            for r in 0..dims {
                let mut acc = 0.0;
                for c in 0..dims {
                    acc += a[r * dims + c] * grad_phys[i][c];
                }
                agrad[r] = acc;
            }
            let ni = quad.shape[p][i];
            for j in i..n {
                let mut sg = 0.0;
                for axis in 0..dims {
                    sg += agrad[axis] * grad_phys[j][axis];
                }
                s_out[i][j] += w * sg;
                m_out[i][j] += w * ni * quad.shape[p][j];
            }
        }
    }
    // symmetrize from the upper triangle so equality is exact
    for i in 0..n {
        for j in 0..i {
            s_out[i][j] = s_out[j][i];
            m_out[i][j] = m_out[j][i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_mass_total() {
        for dims in [2usize, 3] {
            let quad = ElementQuad::new(dims);
            for p in 0..quad.n_pts {
                let sum: f64 = quad.shape[p].iter().sum();
                assert!((sum - 1.0).abs() < 1e-14);
                for axis in 0..dims {
                    let g: f64 = (0..quad.n_loc).map(|l| quad.grad_ref[p][l][axis]).sum();
                    assert!(g.abs() < 1e-14);
                }
            }
            let h = [0.5, 0.25, 2.0];
            let mut a = [0.0; 9];
            for d in 0..dims {
                a[d * dims + d] = 1.0;
            }
            let mut s = [[0.0; 8]; 8];
            let mut m = [[0.0; 8]; 8];
            local_matrices(&quad, &h, &a, &mut s, &mut m);
            let vol: f64 = h[..dims].iter().product();
            let total: f64 =
                (0..quad.n_loc).map(|i| (0..quad.n_loc).map(|j| m[i][j]).sum::<f64>()).sum();
            assert!((total - vol).abs() < 1e-13, "mass sums to the volume");
            // Stiffness rows sum to zero (constants are in the kernel).
            for i in 0..quad.n_loc {
                let row: f64 = (0..quad.n_loc).map(|j| s[i][j]).sum();
                assert!(row.abs() < 1e-13);
            }
        }
    }

    #[test]
    fn stiffness_of_linear_field_is_exact() {
        // For u = x, the energy ∫|∇u|² over the box must be its volume.
        let quad = ElementQuad::new(2);
        let h = [0.3, 1.0, 0.7];
        let a = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut s = [[0.0; 8]; 8];
        let mut m = [[0.0; 8]; 8];
        local_matrices(&quad, &h, &a, &mut s, &mut m);
        // nodal values of u = x: tensor order (lx, lz) → l = lx*2+lz
        let u = [0.0, 0.0, h[0], h[0]];
        let mut energy = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                energy += u[i] * s[i][j] * u[j];
            }
        }
        assert!((energy - h[0] * h[0] * (h[0] * h[2]) / (h[0] * h[0])).abs() < 1e-13);
    }
}
