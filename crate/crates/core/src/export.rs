//! VTK legacy ASCII and CSV writers for nodal fields.

use std::fmt::Write as _;

use crate::error::Result;
use crate::field::NodalField;
use crate::lcf::{amplitude_energy, crack_intensity, displacement_gradient, LifeModel};
use crate::mesh::{ElementKind, Mesh};

/// Named point data for [`vtk`].
pub enum PointData<'a> {
    Vectors(&'a str, &'a NodalField),
    Scalars(&'a str, &'a [f64]),
}

fn vtk_cell_type(kind: ElementKind) -> u8 {
    match kind {
        ElementKind::Tet4 => 10,
        ElementKind::Hex8 => 12,
        ElementKind::Hex20 => 25,
    }
}

/// Unstructured-grid dataset; node order of all kinds matches VTK's.
pub fn vtk(mesh: &Mesh, title: &str, data: &[PointData]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# vtk DataFile Version 3.0\n{title}\nASCII\nDATASET UNSTRUCTURED_GRID");
    let _ = writeln!(out, "POINTS {} double", mesh.n_nodes());
    for p in mesh.nodes() {
        let _ = writeln!(out, "{:.12e} {:.12e} {:.12e}", p.x, p.y, p.z);
    }
    let nsh = mesh.kind().n_nodes();
    let _ = writeln!(out, "CELLS {} {}", mesh.n_elements(), mesh.n_elements() * (nsh + 1));
    for conn in mesh.elements() {
        let ids: Vec<String> = conn.iter().map(|i| i.to_string()).collect();
        let _ = writeln!(out, "{nsh} {}", ids.join(" "));
    }
    let _ = writeln!(out, "CELL_TYPES {}", mesh.n_elements());
    for _ in 0..mesh.n_elements() {
        let _ = writeln!(out, "{}", vtk_cell_type(mesh.kind()));
    }
    if !data.is_empty() {
        let _ = writeln!(out, "POINT_DATA {}", mesh.n_nodes());
    }
    for d in data {
        match d {
            PointData::Vectors(name, f) => {
                let _ = writeln!(out, "VECTORS {name} double");
                for v in f.iter() {
                    let _ = writeln!(out, "{:.12e} {:.12e} {:.12e}", v.x, v.y, v.z);
                }
            }
            PointData::Scalars(name, s) => {
                let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
                for v in s.iter() {
                    let _ = writeln!(out, "{v:.12e}");
                }
            }
        }
    }
    out
}

/// `node,x,y,z,gx,gy,gz,gn` for every node; `normal` is dense per node.
pub fn gradient_csv(mesh: &Mesh, field: &NodalField, normal: &[f64]) -> String {
    let mut out = String::from("node,x,y,z,gx,gy,gz,gn\n");
    for (i, ((p, g), n)) in mesh.nodes().iter().zip(field.iter()).zip(normal).enumerate() {
        let _ = writeln!(
            out,
            "{i},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            p.x, p.y, p.z, g.x, g.y, g.z, n
        );
    }
    out
}

/// `node,x,y,z,ux,uy,uz`
pub fn displacement_csv(mesh: &Mesh, u: &NodalField) -> String {
    let mut out = String::from("node,x,y,z,ux,uy,uz\n");
    for (i, (p, v)) in mesh.nodes().iter().zip(u.iter()).enumerate() {
        let _ = writeln!(
            out,
            "{i},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            p.x, p.y, p.z, v.x, v.y, v.z
        );
    }
    out
}

/// Nodal intensity `h = Ni^-m` on the surface: evaluated at each node
/// inside every adjacent boundary face's element and averaged. Interior
/// nodes get zero.
pub fn nodal_intensity(mesh: &Mesh, model: &LifeModel, u: &NodalField) -> Result<Vec<f64>> {
    let kind = mesh.kind();
    let mut sum = vec![0.0; mesh.n_nodes()];
    let mut count = vec![0usize; mesh.n_nodes()];
    for &face in mesh.surface_faces() {
        let conn = mesh.connectivity(face.element);
        for local in kind.face_nodes(face.face) {
            let ep = mesh.element_point_at(face.element, &kind.node_coords(local))?;
            let q = displacement_gradient(mesh, u, face.element, &ep.grads);
            let (h, _) = model.intensity_energy(amplitude_energy(model, &q))?;
            sum[conn[local]] += h;
            count[conn[local]] += 1;
        }
    }
    Ok(sum
        .iter()
        .zip(&count)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect())
}

/// Crack initiation intensity at cycle `t` from nodal `h` values.
pub fn nodal_crack_intensity(h: &[f64], t: f64, m: f64) -> Vec<f64> {
    h.iter().map(|&h| crack_intensity(t, h, m)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::box_mesh;

    #[test]
    fn vtk_layout() {
        let m = box_mesh(ElementKind::Hex20, [1.0; 3], [1, 1, 2]).unwrap();
        let f = NodalField::zeros(m.n_nodes());
        let s = vec![1.0; m.n_nodes()];
        let text = vtk(&m, "t", &[PointData::Vectors("u", &f), PointData::Scalars("s", &s)]);
        assert!(text.contains(&format!("POINTS {} double", m.n_nodes())));
        assert!(text.contains("CELLS 2 42"));
        assert!(text.contains("CELL_TYPES 2\n25\n25\n"));
        assert!(text.contains("VECTORS u double"));
        assert!(text.contains("SCALARS s double 1\nLOOKUP_TABLE default"));
    }

    #[test]
    fn csv_has_one_row_per_node() {
        let m = box_mesh(ElementKind::Tet4, [1.0; 3], [1, 1, 1]).unwrap();
        let f = NodalField::zeros(m.n_nodes());
        let csv = gradient_csv(&m, &f, &vec![0.0; m.n_nodes()]);
        assert_eq!(csv.lines().count(), m.n_nodes() + 1);
        assert!(csv.starts_with("node,x,y,z,gx,gy,gz,gn\n"));
    }
}
