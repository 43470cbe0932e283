//! Legacy ASCII VTK unstructured-grid writer (lines, triangles, tetrahedra),
//! plus a minimal reader used for round-trip checks.

use crate::geometry::Point;
use crate::mesh::{SimplicialMesh, SurfaceView};
use std::fmt::Write as _;
use std::io;
use std::path::Path;

const VTK_LINE: usize = 3;
const VTK_TRIANGLE: usize = 5;
const VTK_TETRA: usize = 10;

fn cell_type_for(nodes: usize) -> usize {
    match nodes {
        2 => VTK_LINE,
        3 => VTK_TRIANGLE,
        _ => VTK_TETRA,
    }
}

fn render(
    title: &str,
    points: &[Point],
    cells: &[&[usize]],
    fields: &[(&str, &[f64])],
) -> String {
    let mut s = String::new();
    s.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(s, "{title}");
    s.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", points.len());
    for p in points {
        let _ = writeln!(s, "{:.17e} {:.17e} {:.17e}", p[0], p[1], p[2]);
    }
    let total: usize = cells.iter().map(|c| c.len() + 1).sum();
    let _ = writeln!(s, "CELLS {} {}", cells.len(), total);
    for c in cells {
        let _ = write!(s, "{}", c.len());
        for v in *c {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    let _ = writeln!(s, "CELL_TYPES {}", cells.len());
    for c in cells {
        let _ = writeln!(s, "{}", cell_type_for(c.len()));
    }
    if !fields.is_empty() {
        let _ = writeln!(s, "POINT_DATA {}", points.len());
        for (name, values) in fields {
            let _ = writeln!(s, "SCALARS {name} double 1");
            s.push_str("LOOKUP_TABLE default\n");
            for v in *values {
                let _ = writeln!(s, "{v:.17e}");
            }
        }
    }
    s
}

/// Bulk grid with per-vertex scalar fields.
pub fn write_vtk(
    path: &Path,
    mesh: &SimplicialMesh,
    fields: &[(&str, &[f64])],
) -> io::Result<()> {
    let cells: Vec<&[usize]> = (0..mesh.n_cells()).map(|c| mesh.cell_vertex_ids(c)).collect();
    std::fs::write(path, render("bulk fields", mesh.vertices(), &cells, fields))
}

/// Companion surface grid with per-surface-vertex scalar fields.
pub fn write_surface_vtk(
    path: &Path,
    view: &SurfaceView,
    fields: &[(&str, &[f64])],
) -> io::Result<()> {
    let nodes = view.facet_nodes();
    let cells: Vec<&[usize]> = view.facets.iter().map(|f| &f[..nodes]).collect();
    std::fs::write(path, render("surface fields", &view.vertices, &cells, fields))
}

/// Minimal reader for the files produced above (round-trip checks).
pub struct VtkGrid {
    pub points: Vec<Point>,
    pub cells: Vec<Vec<usize>>,
    pub cell_types: Vec<usize>,
    pub fields: Vec<(String, Vec<f64>)>,
}

pub fn read_vtk(text: &str) -> Result<VtkGrid, String> {
    let mut tokens = text.lines().skip(4); // header, title, ASCII, DATASET
    let points_header = tokens.next().ok_or("missing POINTS")?;
    let n_points: usize = points_header
        .split_whitespace()
        .nth(1)
        .and_then(|t| t.parse().ok())
        .ok_or("bad POINTS header")?;
    let mut points = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let line = tokens.next().ok_or("missing point line")?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format!("bad coordinate {t:?}")))
            .collect::<Result<_, _>>()?;
        if vals.len() != 3 {
            return Err("point line needs 3 coordinates".into());
        }
        points.push([vals[0], vals[1], vals[2]]);
    }
    let cells_header = tokens.next().ok_or("missing CELLS")?;
    let n_cells: usize = cells_header
        .split_whitespace()
        .nth(1)
        .and_then(|t| t.parse().ok())
        .ok_or("bad CELLS header")?;
    let mut cells = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let line = tokens.next().ok_or("missing cell line")?;
        let vals: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| format!("bad index {t:?}")))
            .collect::<Result<_, _>>()?;
        if vals.is_empty() || vals.len() != vals[0] + 1 {
            return Err("cell line count mismatch".into());
        }
        cells.push(vals[1..].to_vec());
    }
    tokens.next().ok_or("missing CELL_TYPES")?;
    let mut cell_types = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let line = tokens.next().ok_or("missing cell type")?;
        cell_types.push(line.trim().parse().map_err(|_| "bad cell type")?);
    }
    let mut fields = Vec::new();
    if let Some(pd) = tokens.next() {
        if pd.starts_with("POINT_DATA") {
            loop {
                let header = match tokens.next() {
                    Some(h) if h.starts_with("SCALARS") => h,
                    _ => break,
                };
                let name = header
                    .split_whitespace()
                    .nth(1)
                    .ok_or("bad SCALARS header")?
                    .to_string();
                tokens.next(); // LOOKUP_TABLE
                let mut values = Vec::with_capacity(n_points);
                for _ in 0..n_points {
                    let line = tokens.next().ok_or("missing scalar value")?;
                    values.push(line.trim().parse().map_err(|_| "bad scalar")?);
                }
                fields.push((name, values));
            }
        }
    }
    Ok(VtkGrid {
        points,
        cells,
        cell_types,
        fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::SimplicialMesh;

    #[test]
    fn single_triangle_layout() {
        let mesh = SimplicialMesh::from_raw_unchecked(
            2,
            vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]],
            vec![[0, 1, 2, 0]],
            vec![],
            vec![],
        );
        let dir = std::env::temp_dir().join("bsfem_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("tri.vtk");
        write_vtk(&path, &mesh, &[("u", &[0.5, 1.5, -2.0])]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 3 double"));
        assert!(text.contains("CELLS 1 4"));
        assert!(text.contains("CELL_TYPES 1\n5"));
        assert!(text.contains("SCALARS u double 1"));
        let grid = read_vtk(&text).unwrap();
        assert_eq!(grid.points.len(), 3);
        assert_eq!(grid.cells, vec![vec![0, 1, 2]]);
        assert_eq!(grid.cell_types, vec![5]);
        assert_eq!(grid.fields[0].1, vec![0.5, 1.5, -2.0]);
    }

    #[test]
    fn roundtrip_preserves_coordinates() {
        let geom = crate::geometry::LevelSetGeometry::sphere(2, 1.0);
        let mesh = crate::mesh::build_annulus_mesh(&geom, 2.0, 12, 3).unwrap();
        let u: Vec<f64> = (0..mesh.n_vertices()).map(|i| (i as f64).sin()).collect();
        let dir = std::env::temp_dir().join("bsfem_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("annulus.vtk");
        write_vtk(&path, &mesh, &[("u", &u)]).unwrap();
        let grid = read_vtk(&std::fs::read_to_string(&path).unwrap()).unwrap();
        for (a, b) in mesh.vertices().iter().zip(&grid.points) {
            for d in 0..3 {
                assert!((a[d] - b[d]).abs() <= 1e-15 * a[d].abs().max(1.0));
            }
        }
        for (a, b) in u.iter().zip(&grid.fields[0].1) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn surface_file_uses_line_cells() {
        let geom = crate::geometry::LevelSetGeometry::sphere(2, 1.0);
        let mesh = crate::mesh::build_annulus_mesh(&geom, 2.0, 8, 3).unwrap();
        let view = crate::mesh::extract_surface(&mesh);
        let w = vec![1.0; view.vertices.len()];
        let dir = std::env::temp_dir().join("bsfem_vtk_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("surface.vtk");
        write_surface_vtk(&path, &view, &[("w", &w)]).unwrap();
        let grid = read_vtk(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert!(grid.cell_types.iter().all(|&t| t == 3));
        assert_eq!(grid.cells.len(), 8);
    }
}
