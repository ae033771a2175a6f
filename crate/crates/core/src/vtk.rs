//! Legacy ASCII VTK export (`DATASET UNSTRUCTURED_GRID`, triangle cells).

use std::io::{self, Write};

use crate::fem::FeSpace;
use crate::mesh::Mesh;
use crate::numfmt::format_sig;

const VTK_TRIANGLE: u8 = 5;

/// A named per-point scalar array.
pub struct PointScalars<'a> {
    pub name: &'a str,
    pub values: &'a [f64],
}

fn write_header<W: Write>(w: &mut W, title: &str) -> io::Result<()> {
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or(""))?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")
}

fn write_grid<W: Write>(w: &mut W, points: &[[f64; 2]], cells: &[[usize; 3]]) -> io::Result<()> {
    writeln!(w, "POINTS {} double", points.len())?;
    for p in points {
        writeln!(w, "{} {} 0", format_sig(p[0], 17), format_sig(p[1], 17))?;
    }
    writeln!(w, "CELLS {} {}", cells.len(), 4 * cells.len())?;
    for c in cells {
        writeln!(w, "3 {} {} {}", c[0], c[1], c[2])?;
    }
    writeln!(w, "CELL_TYPES {}", cells.len())?;
    for _ in cells {
        writeln!(w, "{VTK_TRIANGLE}")?;
    }
    Ok(())
}

fn write_scalars<W: Write>(w: &mut W, n: usize, fields: &[PointScalars<'_>]) -> io::Result<()> {
    if fields.is_empty() {
        return Ok(());
    }
    writeln!(w, "POINT_DATA {n}")?;
    for f in fields {
        assert_eq!(f.values.len(), n, "field `{}` has the wrong length", f.name);
        writeln!(w, "SCALARS {} double 1", f.name)?;
        writeln!(w, "LOOKUP_TABLE default")?;
        for &v in f.values {
            writeln!(w, "{}", format_sig(v, 12))?;
        }
    }
    Ok(())
}

/// Writes the bare mesh.
pub fn write_mesh<W: Write>(mut w: W, mesh: &Mesh) -> io::Result<()> {
    write_header(&mut w, "mesh")?;
    write_grid(&mut w, &mesh.vertices, &mesh.triangles)
}

/// Writes DOF fields of `space`. Higher-degree elements are split into
/// `degree^2` linear sub-triangles through their Lagrange nodes, so the
/// points are exactly the DOFs.
pub fn write_fields<W: Write>(
    mut w: W,
    title: &str,
    space: &FeSpace,
    fields: &[PointScalars<'_>],
) -> io::Result<()> {
    write_header(&mut w, title)?;
    let sub = space.element().sub_triangles();
    let mut cells = Vec::with_capacity(sub.len() * space.mesh().num_triangles());
    for t in 0..space.mesh().num_triangles() {
        let dofs = space.cell_dofs(t);
        for s in &sub {
            cells.push(s.map(|l| dofs[l]));
        }
    }
    write_grid(&mut w, space.dof_coords(), &cells)?;
    write_scalars(&mut w, space.num_dofs(), fields)
}
