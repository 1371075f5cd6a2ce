//! Complex nodal fields tied to a mesh.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{CageError, Result};
use crate::geometry::{MeshId, StructuredMesh};

#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    pub values: Vec<Complex64>,
    pub mesh_id: MeshId,
}

impl NodalField {
    pub fn zeros(mesh: &StructuredMesh) -> Self {
        Self { values: vec![Complex64::new(0.0, 0.0); mesh.node_count()], mesh_id: mesh.id() }
    }

    pub fn from_values(mesh: &StructuredMesh, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(CageError::Assembly(format!(
                "field has {} values for a mesh with {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        Ok(Self { values, mesh_id: mesh.id() })
    }

    pub fn from_fn(mesh: &StructuredMesh, f: impl Fn(&[f64; 3]) -> Complex64) -> Self {
        let values = (0..mesh.node_count()).map(|id| f(&mesh.node_coords(id))).collect();
        Self { values, mesh_id: mesh.id() }
    }

    /// Random nodal values smoothed by one neighbor-averaging pass; the
    /// smoothing keeps discrete gradients comparable across resolutions.
    pub fn random_smoothed(mesh: &StructuredMesh, rng: &mut impl Rng, zero_boundary: bool) -> Self {
        let n = mesh.node_count();
        let raw: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut values = vec![Complex64::new(0.0, 0.0); n];
        let (nx, ny, nz) = (mesh.nx(), mesh.ny(), mesh.nz());
        for ix in 0..nx {
            for iy in 0..ny {
                for iz in 0..nz {
                    let mut acc = Complex64::new(0.0, 0.0);
                    let mut count = 0.0;
                    let mut take = |jx: isize, jy: isize, jz: isize| {
                        if jx < 0 || jy < 0 || jz < 0 {
                            return;
                        }
                        let (jx, jy, jz) = (jx as usize, jy as usize, jz as usize);
                        if jx >= nx || jy >= ny || jz >= nz {
                            return;
                        }
                        acc += raw[mesh.node_id(jx, jy, jz)];
                        count += 1.0;
                    };
                    let (x, y, z) = (ix as isize, iy as isize, iz as isize);
                    take(x, y, z);
                    take(x - 1, y, z);
                    take(x + 1, y, z);
                    take(x, y, z - 1);
                    take(x, y, z + 1);
                    if ny > 1 {
                        take(x, y - 1, z);
                        take(x, y + 1, z);
                    }
                    values[mesh.node_id(ix, iy, iz)] = acc / count;
                }
            }
        }
        if zero_boundary {
            for id in 0..n {
                if mesh.is_boundary_node(id) {
                    values[id] = Complex64::new(0.0, 0.0);
                }
            }
        }
        Self { values, mesh_id: mesh.id() }
    }

    pub fn check_mesh(&self, mesh: &StructuredMesh) -> Result<()> {
        if self.mesh_id != mesh.id() {
            return Err(CageError::Assembly(
                "field belongs to a different mesh".into(),
            ));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self { values: self.values.iter().map(|v| v * s).collect(), mesh_id: self.mesh_id }
    }

    /// self − other, elementwise; both fields must live on the same mesh.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.mesh_id != other.mesh_id || self.values.len() != other.values.len() {
            return Err(CageError::Assembly("field difference across meshes".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Self { values, mesh_id: self.mesh_id })
    }
}
