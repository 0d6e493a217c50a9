//! Element kinds, reference shape functions and the local face table.
//!
//! Hexahedra live on `[-1, 1]^3` with the usual corner-then-midside node
//! order (midsides 8..11 on the bottom edges, 12..15 on the top edges,
//! 16..19 on the vertical edges). The tetrahedron is the unit simplex with
//! vertices `(0,0,0), (1,0,0), (0,1,0), (0,0,1)`.
//!
//! Local faces:
//!
//! | kind | face | plane        | corner nodes |
//! |------|------|--------------|--------------|
//! | HEX  | 0    | zeta = -1    | 0 3 2 1      |
//! | HEX  | 1    | zeta = +1    | 4 5 6 7      |
//! | HEX  | 2    | eta  = -1    | 0 1 5 4      |
//! | HEX  | 3    | xi   = +1    | 1 2 6 5      |
//! | HEX  | 4    | eta  = +1    | 2 3 7 6      |
//! | HEX  | 5    | xi   = -1    | 3 0 4 7      |
//! | TET4 | 0    | z = 0        | 0 2 1        |
//! | TET4 | 1    | y = 0        | 0 1 3        |
//! | TET4 | 2    | x + y + z = 1| 1 2 3        |
//! | TET4 | 3    | x = 0        | 0 3 2        |
//!
//! Every face is parametrised as `xi(s, t) = origin + s * da + t * db` with
//! `da x db` pointing out of the reference element.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    #[serde(rename = "TET4")]
    Tet4,
    #[serde(rename = "HEX8")]
    Hex8,
    #[serde(rename = "HEX20")]
    Hex20,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceShape {
    Triangle,
    Quad,
}

/// Affine parametrisation of a reference face.
#[derive(Debug, Clone)]
pub struct FaceParam {
    pub origin: Vector3<f64>,
    pub da: Vector3<f64>,
    pub db: Vector3<f64>,
    pub shape: FaceShape,
}

impl FaceParam {
    pub fn point(&self, st: [f64; 2]) -> Vector3<f64> {
        self.origin + self.da * st[0] + self.db * st[1]
    }
}

const HEX_CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

const HEX20_MIDSIDES: [[f64; 3]; 12] = [
    [0.0, -1.0, -1.0],
    [1.0, 0.0, -1.0],
    [0.0, 1.0, -1.0],
    [-1.0, 0.0, -1.0],
    [0.0, -1.0, 1.0],
    [1.0, 0.0, 1.0],
    [0.0, 1.0, 1.0],
    [-1.0, 0.0, 1.0],
    [-1.0, -1.0, 0.0],
    [1.0, -1.0, 0.0],
    [1.0, 1.0, 0.0],
    [-1.0, 1.0, 0.0],
];

const TET_VERTICES: [[f64; 3]; 4] = [
    [0.0, 0.0, 0.0],
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
];

/// (fixed axis, fixed value, in-plane axis a, in-plane axis b) per hex face.
const HEX_FACES: [(usize, f64, usize, usize); 6] = [
    (2, -1.0, 1, 0),
    (2, 1.0, 0, 1),
    (1, -1.0, 0, 2),
    (0, 1.0, 1, 2),
    (1, 1.0, 2, 0),
    (0, -1.0, 2, 1),
];

const TET_FACES: [[usize; 3]; 4] = [[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]];

impl ElementKind {
    pub fn n_nodes(self) -> usize {
        match self {
            ElementKind::Tet4 => 4,
            ElementKind::Hex8 => 8,
            ElementKind::Hex20 => 20,
        }
    }

    pub fn n_faces(self) -> usize {
        match self {
            ElementKind::Tet4 => 4,
            _ => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementKind::Tet4 => "TET4",
            ElementKind::Hex8 => "HEX8",
            ElementKind::Hex20 => "HEX20",
        }
    }

    pub fn face_shape(self) -> FaceShape {
        match self {
            ElementKind::Tet4 => FaceShape::Triangle,
            _ => FaceShape::Quad,
        }
    }

    /// Reference measure of the element (volume of the reference cell).
    pub fn reference_volume(self) -> f64 {
        match self {
            ElementKind::Tet4 => 1.0 / 6.0,
            _ => 8.0,
        }
    }

    /// Coordinates of local node `i` in the reference element.
    pub fn node_coords(self, i: usize) -> Vector3<f64> {
        let c = match self {
            ElementKind::Tet4 => TET_VERTICES[i],
            ElementKind::Hex8 => HEX_CORNERS[i],
            ElementKind::Hex20 => {
                if i < 8 {
                    HEX_CORNERS[i]
                } else {
                    HEX20_MIDSIDES[i - 8]
                }
            }
        };
        Vector3::new(c[0], c[1], c[2])
    }

    /// Shape function values at a reference point.
    pub fn shape_values(self, xi: &Vector3<f64>) -> Vec<f64> {
        let n = self.n_nodes();
        let mut out = Vec::with_capacity(n);
        match self {
            ElementKind::Tet4 => {
                out.push(1.0 - xi.x - xi.y - xi.z);
                out.push(xi.x);
                out.push(xi.y);
                out.push(xi.z);
            }
            ElementKind::Hex8 => {
                for c in HEX_CORNERS.iter() {
                    out.push(
                        0.125 * (1.0 + c[0] * xi.x) * (1.0 + c[1] * xi.y) * (1.0 + c[2] * xi.z),
                    );
                }
            }
            ElementKind::Hex20 => {
                for i in 0..20 {
                    let c = self.node_coords(i);
                    let a = 1.0 + c.x * xi.x;
                    let b = 1.0 + c.y * xi.y;
                    let d = 1.0 + c.z * xi.z;
                    let v = if i < 8 {
                        0.125 * a * b * d * (c.x * xi.x + c.y * xi.y + c.z * xi.z - 2.0)
                    } else if c.x == 0.0 {
                        0.25 * (1.0 - xi.x * xi.x) * b * d
                    } else if c.y == 0.0 {
                        0.25 * a * (1.0 - xi.y * xi.y) * d
                    } else {
                        0.25 * a * b * (1.0 - xi.z * xi.z)
                    };
                    out.push(v);
                }
            }
        }
        out
    }

    /// Reference gradients of the shape functions at a reference point.
    pub fn shape_gradients(self, xi: &Vector3<f64>) -> Vec<Vector3<f64>> {
        let n = self.n_nodes();
        let mut out = Vec::with_capacity(n);
        match self {
            ElementKind::Tet4 => {
                out.push(Vector3::new(-1.0, -1.0, -1.0));
                out.push(Vector3::new(1.0, 0.0, 0.0));
                out.push(Vector3::new(0.0, 1.0, 0.0));
                out.push(Vector3::new(0.0, 0.0, 1.0));
            }
            ElementKind::Hex8 => {
                for c in HEX_CORNERS.iter() {
                    let a = 1.0 + c[0] * xi.x;
                    let b = 1.0 + c[1] * xi.y;
                    let d = 1.0 + c[2] * xi.z;
                    out.push(Vector3::new(
                        0.125 * c[0] * b * d,
                        0.125 * a * c[1] * d,
                        0.125 * a * b * c[2],
                    ));
                }
            }
            ElementKind::Hex20 => {
                for i in 0..20 {
                    let c = self.node_coords(i);
                    let a = 1.0 + c.x * xi.x;
                    let b = 1.0 + c.y * xi.y;
                    let d = 1.0 + c.z * xi.z;
                    let g = if i < 8 {
                        let s = c.x * xi.x + c.y * xi.y + c.z * xi.z - 2.0;
                        Vector3::new(
                            0.125 * c.x * b * d * (s + a),
                            0.125 * c.y * a * d * (s + b),
                            0.125 * c.z * a * b * (s + d),
                        )
                    } else if c.x == 0.0 {
                        Vector3::new(
                            -0.5 * xi.x * b * d,
                            0.25 * (1.0 - xi.x * xi.x) * c.y * d,
                            0.25 * (1.0 - xi.x * xi.x) * b * c.z,
                        )
                    } else if c.y == 0.0 {
                        Vector3::new(
                            0.25 * c.x * (1.0 - xi.y * xi.y) * d,
                            -0.5 * xi.y * a * d,
                            0.25 * a * (1.0 - xi.y * xi.y) * c.z,
                        )
                    } else {
                        Vector3::new(
                            0.25 * c.x * b * (1.0 - xi.z * xi.z),
                            0.25 * a * c.y * (1.0 - xi.z * xi.z),
                            -0.5 * xi.z * a * b,
                        )
                    };
                    out.push(g);
                }
            }
        }
        out
    }

    /// Parametrisation of local face `face`.
    pub fn face_param(self, face: usize) -> FaceParam {
        match self {
            ElementKind::Tet4 => {
                let [a, b, c] = TET_FACES[face];
                let p0 = self.node_coords(a);
                FaceParam {
                    origin: p0,
                    da: self.node_coords(b) - p0,
                    db: self.node_coords(c) - p0,
                    shape: FaceShape::Triangle,
                }
            }
            _ => {
                let (axis, value, ia, ib) = HEX_FACES[face];
                let mut origin = Vector3::zeros();
                origin[axis] = value;
                let mut da = Vector3::zeros();
                da[ia] = 1.0;
                let mut db = Vector3::zeros();
                db[ib] = 1.0;
                FaceParam {
                    origin,
                    da,
                    db,
                    shape: FaceShape::Quad,
                }
            }
        }
    }

    /// Local node indices lying on local face `face` (corners first, in the
    /// order of the face table, then midside nodes).
    pub fn face_nodes(self, face: usize) -> Vec<usize> {
        match self {
            ElementKind::Tet4 => TET_FACES[face].to_vec(),
            _ => {
                let corners: Vec<usize> = match face {
                    0 => vec![0, 3, 2, 1],
                    1 => vec![4, 5, 6, 7],
                    2 => vec![0, 1, 5, 4],
                    3 => vec![1, 2, 6, 5],
                    4 => vec![2, 3, 7, 6],
                    _ => vec![3, 0, 4, 7],
                };
                let mut nodes = corners;
                if self == ElementKind::Hex20 {
                    let (axis, value, _, _) = HEX_FACES[face];
                    nodes.extend((8..20).filter(|&i| self.node_coords(i)[axis] == value));
                }
                nodes
            }
        }
    }

    /// Corner nodes of a face, used as a topological key.
    pub fn face_corners(self, face: usize) -> Vec<usize> {
        let nodes = self.face_nodes(face);
        let n = match self.face_shape() {
            FaceShape::Triangle => 3,
            FaceShape::Quad => 4,
        };
        nodes[..n].to_vec()
    }

    /// Derivatives of the shape functions along the face parameters.
    pub fn face_gradients(grads: &[Vector3<f64>], param: &FaceParam) -> Vec<Vector2<f64>> {
        grads
            .iter()
            .map(|g| Vector2::new(g.dot(&param.da), g.dot(&param.db)))
            .collect()
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name.to_ascii_uppercase().as_str() {
            "TET4" | "C3D4" => Some(ElementKind::Tet4),
            "HEX8" | "C3D8" => Some(ElementKind::Hex8),
            "HEX20" | "C3D20" | "C3D20R" => Some(ElementKind::Hex20),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const KINDS: [ElementKind; 3] = [ElementKind::Tet4, ElementKind::Hex8, ElementKind::Hex20];

    fn sample_points(kind: ElementKind) -> Vec<Vector3<f64>> {
        match kind {
            ElementKind::Tet4 => vec![
                Vector3::new(0.1, 0.2, 0.3),
                Vector3::new(0.25, 0.25, 0.25),
                Vector3::new(0.7, 0.1, 0.05),
            ],
            _ => vec![
                Vector3::new(0.1, -0.3, 0.7),
                Vector3::new(-0.9, 0.4, -0.2),
                Vector3::new(0.0, 0.0, 0.0),
            ],
        }
    }

    #[test]
    fn kronecker_property_at_nodes() {
        for kind in KINDS {
            for i in 0..kind.n_nodes() {
                let v = kind.shape_values(&kind.node_coords(i));
                for (j, vj) in v.iter().enumerate() {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((vj - expect).abs() < 1e-14, "{kind:?} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_and_zero_gradient_sum() {
        for kind in KINDS {
            for xi in sample_points(kind) {
                let s: f64 = kind.shape_values(&xi).iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                let g: Vector3<f64> = kind.shape_gradients(&xi).iter().sum();
                assert!(g.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_central_differences() {
        let h = 1e-6;
        for kind in KINDS {
            for xi in sample_points(kind) {
                let g = kind.shape_gradients(&xi);
                for d in 0..3 {
                    let mut p = xi;
                    let mut m = xi;
                    p[d] += h;
                    m[d] -= h;
                    let vp = kind.shape_values(&p);
                    let vm = kind.shape_values(&m);
                    for j in 0..kind.n_nodes() {
                        let fd = (vp[j] - vm[j]) / (2.0 * h);
                        assert!((fd - g[j][d]).abs() < 1e-8, "{kind:?} node {j} dir {d}");
                    }
                }
            }
        }
    }

    #[test]
    fn face_normals_point_outward_and_nodes_lie_on_faces() {
        for kind in KINDS {
            let centroid = match kind {
                ElementKind::Tet4 => Vector3::new(0.25, 0.25, 0.25),
                _ => Vector3::zeros(),
            };
            for f in 0..kind.n_faces() {
                let p = kind.face_param(f);
                let n = p.da.cross(&p.db);
                let mid = match p.shape {
                    FaceShape::Quad => p.point([0.0, 0.0]),
                    FaceShape::Triangle => p.point([1.0 / 3.0, 1.0 / 3.0]),
                };
                assert!(n.dot(&(mid - centroid)) > 0.0, "{kind:?} face {f}");
                for node in kind.face_nodes(f) {
                    let x = kind.node_coords(node);
                    assert!((x - p.origin).dot(&n).abs() < 1e-14, "{kind:?} face {f}");
                }
            }
        }
    }

    #[test]
    fn hex20_face_has_eight_nodes() {
        for f in 0..6 {
            assert_eq!(ElementKind::Hex20.face_nodes(f).len(), 8);
            assert_eq!(ElementKind::Hex8.face_nodes(f).len(), 4);
        }
    }

    #[test]
    fn shape_functions_off_face_vanish_on_face() {
        for kind in KINDS {
            for f in 0..kind.n_faces() {
                let p = kind.face_param(f);
                let on: Vec<usize> = kind.face_nodes(f);
                let st = match p.shape {
                    FaceShape::Quad => [0.3, -0.6],
                    FaceShape::Triangle => [0.2, 0.3],
                };
                let v = kind.shape_values(&p.point(st));
                for (j, vj) in v.iter().enumerate() {
                    if !on.contains(&j) {
                        assert!(vj.abs() < 1e-14, "{kind:?} face {f} node {j}");
                    }
                }
            }
        }
    }
}
