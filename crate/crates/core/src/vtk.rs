//! Legacy ASCII VTK structured-grid export: region labels as cell data,
//! complex fields as two point-data scalars.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::fem::NodalField;
use crate::geometry::{DimensionMode, StructuredMesh};

fn header(mesh: &StructuredMesh, title: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0");
    let _ = writeln!(out, "{title}");
    let _ = writeln!(out, "ASCII");
    let _ = writeln!(out, "DATASET STRUCTURED_GRID");
    let (nx, ny, nz) = (mesh.nx(), mesh.ny(), mesh.nz());
    match mesh.mode {
        // VTK orders points x-fastest; the vertical axis maps to VTK y in
        // reduced mode and to VTK z in full mode.
        DimensionMode::Reduced2d => {
            let _ = writeln!(out, "DIMENSIONS {nx} {nz} 1");
            let _ = writeln!(out, "POINTS {} double", nx * nz);
            for iz in 0..nz {
                for ix in 0..nx {
                    let c = mesh.node_coords(mesh.node_id(ix, 0, iz));
                    let _ = writeln!(out, "{:.17e} {:.17e} 0", c[0], c[2]);
                }
            }
        }
        DimensionMode::Full3d => {
            let _ = writeln!(out, "DIMENSIONS {nx} {ny} {nz}");
            let _ = writeln!(out, "POINTS {} double", nx * ny * nz);
            for iz in 0..nz {
                for iy in 0..ny {
                    for ix in 0..nx {
                        let c = mesh.node_coords(mesh.node_id(ix, iy, iz));
                        let _ = writeln!(out, "{:.17e} {:.17e} {:.17e}", c[0], c[1], c[2]);
                    }
                }
            }
        }
    }
    out
}

/// Mesh with its integer `region` cell field.
pub fn write_mesh(mesh: &StructuredMesh, path: &Path) -> Result<()> {
    let mut out = header(mesh, "layered structured mesh");
    let ne = mesh.element_count();
    let _ = writeln!(out, "CELL_DATA {ne}");
    let _ = writeln!(out, "SCALARS region int 1");
    let _ = writeln!(out, "LOOKUP_TABLE default");
    // VTK cell order is x-fastest as well.
    let nez = mesh.nz() - 1;
    let ney = if mesh.mode == DimensionMode::Full3d { mesh.ny() - 1 } else { 1 };
    let nex = mesh.nx() - 1;
    for ez in 0..nez {
        for ey in 0..ney {
            for ex in 0..nex {
                let _ = writeln!(out, "{}", mesh.region(mesh.element_id(ex, ey, ez)).as_i32());
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Field on the mesh as two point-data scalars (`re`, `im`).
pub fn write_field(mesh: &StructuredMesh, field: &NodalField, name: &str, path: &Path) -> Result<()> {
    field.check_mesh(mesh)?;
    let mut out = header(mesh, name);
    let np = mesh.node_count();
    let _ = writeln!(out, "POINT_DATA {np}");
    for (label, pick) in [("re", 0usize), ("im", 1usize)] {
        let _ = writeln!(out, "SCALARS {name}_{label} double 1");
        let _ = writeln!(out, "LOOKUP_TABLE default");
        let ny = if mesh.mode == DimensionMode::Full3d { mesh.ny() } else { 1 };
        for iz in 0..mesh.nz() {
            for iy in 0..ny {
                for ix in 0..mesh.nx() {
                    let v = field.values[mesh.node_id(ix, iy, iz)];
                    let s = if pick == 0 { v.re } else { v.im };
                    let _ = writeln!(out, "{s:.17e}");
                }
            }
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{
        build_mesh, DomainSpec, GradingPolicy, LayerPattern, MeshParams, PatternKind,
    };
    use num_complex::Complex64;

    #[test]
    fn exports_parse_roundly() {
        let dom = DomainSpec::reduced(1.0, 1.0).unwrap();
        let pat = LayerPattern::build(PatternKind::Cross, 0.5, 8, 1).unwrap();
        let mesh =
            build_mesh(&dom, &pat, &MeshParams::new(4, 8, GradingPolicy::default())).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mpath = dir.path().join("mesh.vtk");
        write_mesh(&mesh, &mpath).unwrap();
        let text = std::fs::read_to_string(&mpath).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0"));
        assert!(text.contains("DATASET STRUCTURED_GRID"));
        assert!(text.contains("SCALARS region int 1"));
        let n_points = mesh.node_count();
        assert!(text.contains(&format!("POINTS {n_points} double")));

        let f = NodalField::from_fn(&mesh, |x| Complex64::new(x[0], x[2]));
        let fpath = dir.path().join("u.vtk");
        write_field(&mesh, &f, "u", &fpath).unwrap();
        let text = std::fs::read_to_string(&fpath).unwrap();
        assert!(text.contains("SCALARS u_re double 1"));
        assert!(text.contains("SCALARS u_im double 1"));
        let data_lines = text.lines().filter(|l| l.contains('e') && !l.contains(' ')).count();
        assert_eq!(data_lines, 2 * n_points);
    }
}
