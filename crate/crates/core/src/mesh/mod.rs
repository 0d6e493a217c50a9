//! Mesh topology, geometry and the isoparametric maps of its elements.

mod element;
mod io;
mod reference;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use nalgebra::{Matrix2, Matrix3, Matrix3x2, Vector3};
use serde::{Deserialize, Serialize};

pub use element::{ElementKind, FaceParam, FaceShape};
pub use io::MeshFile;
pub use reference::{QuadratureSettings, RefFace, RefFacePoint, RefPoint, ReferenceElement};

use crate::error::{Error, Result};

/// Relative tolerance on `det(jacobian) / h^3` below which an element counts
/// as degenerate (`h` is the diagonal of the element bounding box).
pub const DEGENERACY_TOL: f64 = 1e-12;

/// A boundary face, identified by its element and local face number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FaceRef {
    pub element: usize,
    pub face: usize,
}

impl FaceRef {
    pub fn new(element: usize, face: usize) -> Self {
        FaceRef { element, face }
    }
}

#[derive(Debug)]
struct Topology {
    kind: ElementKind,
    elements: Vec<Vec<usize>>,
    surface_faces: Vec<FaceRef>,
    dirichlet_nodes: Vec<usize>,
    traction_faces: Vec<FaceRef>,
}

/// An unstructured mesh of a single element kind with its boundary sets.
///
/// Coordinates are in mm. The mesh is immutable once built; shape
/// perturbations produce a new mesh sharing the topology via
/// [`Mesh::with_nodes`].
#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<Vector3<f64>>,
    topo: Arc<Topology>,
    reference: Arc<ReferenceElement>,
}

/// Isoparametric map data of one element at one reference point.
#[derive(Debug, Clone)]
pub struct ElementPoint {
    pub position: Vector3<f64>,
    /// `jacobian[(s, k)] = d x_s / d xi_k`
    pub jacobian: Matrix3<f64>,
    pub det: f64,
    /// Inverse transpose of the jacobian.
    pub inv_t: Matrix3<f64>,
    /// Physical gradients of the shape functions.
    pub grads: Vec<Vector3<f64>>,
}

/// Surface map data of one boundary face at one reference point.
#[derive(Debug, Clone)]
pub struct FacePoint {
    /// Tangent map `J_F` of the face parametrisation (3x2).
    pub tangents: Matrix3x2<f64>,
    /// Gram matrix `J_F^T J_F`.
    pub gram: Matrix2<f64>,
    /// `sqrt(det(gram))`, the surface measure factor.
    pub sqrt_det: f64,
}

impl FacePoint {
    /// Unit outward normal.
    pub fn normal(&self) -> Vector3<f64> {
        let n = self.tangents.column(0).cross(&self.tangents.column(1));
        n / n.norm()
    }
}

impl Mesh {
    /// Builds a mesh, validates connectivity and extracts the boundary.
    pub fn new(
        kind: ElementKind,
        nodes: Vec<Vector3<f64>>,
        elements: Vec<Vec<usize>>,
        dirichlet_nodes: Vec<usize>,
        traction_faces: Vec<FaceRef>,
        quadrature: &QuadratureSettings,
    ) -> Result<Self> {
        let n = nodes.len();
        let nsh = kind.n_nodes();
        for (e, conn) in elements.iter().enumerate() {
            if conn.len() != nsh {
                return Err(Error::InvalidMesh(format!(
                    "element {e} has {} nodes, {} expects {nsh}",
                    conn.len(),
                    kind.name()
                )));
            }
            if let Some(&bad) = conn.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidMesh(format!(
                    "element {e} references node {bad} but the mesh has {n} nodes"
                )));
            }
            let distinct: BTreeSet<_> = conn.iter().collect();
            if distinct.len() != nsh {
                return Err(Error::InvalidMesh(format!(
                    "element {e} repeats a node"
                )));
            }
        }
        let surface_faces = extract_boundary(kind, &elements)?;
        let surface_set: BTreeSet<FaceRef> = surface_faces.iter().copied().collect();
        let mut traction_faces = traction_faces;
        traction_faces.sort();
        traction_faces.dedup();
        if let Some(f) = traction_faces.iter().find(|f| !surface_set.contains(f)) {
            return Err(Error::InvalidMesh(format!(
                "traction face ({}, {}) is not a boundary face",
                f.element, f.face
            )));
        }
        let mut dirichlet_nodes = dirichlet_nodes;
        dirichlet_nodes.sort_unstable();
        dirichlet_nodes.dedup();
        if let Some(&bad) = dirichlet_nodes.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidMesh(format!(
                "dirichlet node {bad} out of range"
            )));
        }
        let reference = ReferenceElement::new(kind, quadrature)?;
        Ok(Mesh {
            nodes,
            topo: Arc::new(Topology {
                kind,
                elements,
                surface_faces,
                dirichlet_nodes,
                traction_faces,
            }),
            reference: Arc::new(reference),
        })
    }

    /// Same topology and boundary sets with new node coordinates.
    pub fn with_nodes(&self, nodes: Vec<Vector3<f64>>) -> Mesh {
        assert_eq!(nodes.len(), self.nodes.len(), "node count must not change");
        Mesh {
            nodes,
            topo: Arc::clone(&self.topo),
            reference: Arc::clone(&self.reference),
        }
    }

    /// Same mesh with different quadrature rules.
    pub fn with_quadrature(&self, quadrature: &QuadratureSettings) -> Result<Mesh> {
        Ok(Mesh {
            nodes: self.nodes.clone(),
            topo: Arc::clone(&self.topo),
            reference: Arc::new(ReferenceElement::new(self.kind(), quadrature)?),
        })
    }

    /// Same geometry with new boundary sets.
    pub fn with_sets(&self, dirichlet_nodes: Vec<usize>, traction_faces: Vec<FaceRef>) -> Result<Mesh> {
        let mut m = Mesh::new(
            self.kind(),
            self.nodes.clone(),
            self.topo.elements.clone(),
            dirichlet_nodes,
            traction_faces,
            &QuadratureSettings::default(),
        )?;
        m.reference = Arc::clone(&self.reference);
        Ok(m)
    }

    pub fn kind(&self) -> ElementKind {
        self.topo.kind
    }

    pub fn reference(&self) -> &ReferenceElement {
        &self.reference
    }

    pub fn nodes(&self) -> &[Vector3<f64>] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_elements(&self) -> usize {
        self.topo.elements.len()
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.topo.elements
    }

    pub fn connectivity(&self, element: usize) -> &[usize] {
        &self.topo.elements[element]
    }

    pub fn surface_faces(&self) -> &[FaceRef] {
        &self.topo.surface_faces
    }

    pub fn dirichlet_nodes(&self) -> &[usize] {
        &self.topo.dirichlet_nodes
    }

    pub fn traction_faces(&self) -> &[FaceRef] {
        &self.topo.traction_faces
    }

    /// Global node ids on a face.
    pub fn face_nodes(&self, face: FaceRef) -> Vec<usize> {
        let conn = self.connectivity(face.element);
        self.reference.faces[face.face]
            .nodes
            .iter()
            .map(|&l| conn[l])
            .collect()
    }

    /// Nodes lying on at least one boundary face, sorted.
    pub fn surface_nodes(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .surface_faces()
            .iter()
            .flat_map(|&f| self.face_nodes(f))
            .collect();
        set.into_iter().collect()
    }

    /// Boundary faces adjacent to each surface node.
    pub fn node_faces(&self) -> BTreeMap<usize, Vec<FaceRef>> {
        let mut map: BTreeMap<usize, Vec<FaceRef>> = BTreeMap::new();
        for &f in self.surface_faces() {
            for n in self.face_nodes(f) {
                map.entry(n).or_default().push(f);
            }
        }
        map
    }

    /// Node ids whose coordinates satisfy `pred`.
    pub fn nodes_where(&self, pred: impl Fn(&Vector3<f64>) -> bool) -> Vec<usize> {
        (0..self.n_nodes()).filter(|&i| pred(&self.nodes[i])).collect()
    }

    /// Boundary faces all of whose nodes satisfy `pred`.
    pub fn faces_where(&self, pred: impl Fn(&Vector3<f64>) -> bool) -> Vec<FaceRef> {
        self.surface_faces()
            .iter()
            .copied()
            .filter(|&f| self.face_nodes(f).iter().all(|&n| pred(&self.nodes[n])))
            .collect()
    }

    /// Node coordinates of one element.
    pub fn element_coords(&self, element: usize) -> Vec<Vector3<f64>> {
        self.connectivity(element).iter().map(|&i| self.nodes[i]).collect()
    }

    /// Characteristic length of an element (diagonal of its bounding box).
    pub fn element_size(&self, element: usize) -> f64 {
        let coords = self.element_coords(element);
        let mut lo = coords[0];
        let mut hi = coords[0];
        for c in &coords {
            lo = lo.inf(c);
            hi = hi.sup(c);
        }
        (hi - lo).norm()
    }

    /// Physical image `T_K(xi)` of a reference point.
    pub fn transform(&self, element: usize, xi: &Vector3<f64>) -> Vector3<f64> {
        let shape = self.kind().shape_values(xi);
        self.connectivity(element)
            .iter()
            .zip(shape)
            .map(|(&n, s)| self.nodes[n] * s)
            .sum()
    }

    /// Jacobian `d T_K / d xi` at a reference point.
    pub fn jacobian(&self, element: usize, xi: &Vector3<f64>) -> Result<Matrix3<f64>> {
        let grads = self.kind().shape_gradients(xi);
        let jac = jacobian_from(&self.nodes, self.connectivity(element), &grads);
        self.check_det(element, jac.determinant())?;
        Ok(jac)
    }

    fn check_det(&self, element: usize, det: f64) -> Result<()> {
        let h = self.element_size(element);
        if !(det > DEGENERACY_TOL * h * h * h) {
            return Err(Error::DegenerateElement { element, det });
        }
        Ok(())
    }

    /// Map data at a cached reference point.
    pub fn element_point(&self, element: usize, point: &RefPoint) -> Result<ElementPoint> {
        let conn = self.connectivity(element);
        let jacobian = jacobian_from(&self.nodes, conn, &point.grads);
        let det = jacobian.determinant();
        self.check_det(element, det)?;
        let inv_t = jacobian
            .try_inverse()
            .ok_or(Error::DegenerateElement { element, det })?
            .transpose();
        let grads = point.grads.iter().map(|g| inv_t * g).collect();
        let position = conn
            .iter()
            .zip(&point.shape)
            .map(|(&n, s)| self.nodes[n] * *s)
            .sum();
        Ok(ElementPoint {
            position,
            jacobian,
            det,
            inv_t,
            grads,
        })
    }

    /// Map data at an arbitrary reference point.
    pub fn element_point_at(&self, element: usize, xi: &Vector3<f64>) -> Result<ElementPoint> {
        let p = RefPoint {
            xi: *xi,
            weight: 0.0,
            shape: self.kind().shape_values(xi),
            grads: self.kind().shape_gradients(xi),
        };
        self.element_point(element, &p)
    }

    /// Gram data of a boundary face at a cached face quadrature point.
    pub fn face_point(&self, face: FaceRef, point: &RefFacePoint) -> Result<FacePoint> {
        let conn = self.connectivity(face.element);
        let mut tangents = Matrix3x2::zeros();
        for (&n, d) in conn.iter().zip(&point.face_grads) {
            let x = self.nodes[n];
            tangents.column_mut(0).axpy(d.x, &x, 1.0);
            tangents.column_mut(1).axpy(d.y, &x, 1.0);
        }
        let gram = tangents.transpose() * tangents;
        let det = gram.determinant();
        if !(det > 0.0) {
            return Err(Error::DegenerateFace {
                element: face.element,
                face: face.face,
                det,
            });
        }
        Ok(FacePoint {
            tangents,
            gram,
            sqrt_det: det.sqrt(),
        })
    }

    /// Gram data of a face at an arbitrary face parameter `(s, t)`.
    pub fn face_gram(&self, face: FaceRef, st: [f64; 2]) -> Result<FacePoint> {
        let param = &self.reference.faces[face.face].param;
        let xi = param.point(st);
        let grads = self.kind().shape_gradients(&xi);
        let p = RefFacePoint {
            face_grads: ElementKind::face_gradients(&grads, param),
            point: RefPoint {
                xi,
                weight: 0.0,
                shape: self.kind().shape_values(&xi),
                grads,
            },
        };
        self.face_point(face, &p)
    }

    /// Volume by volume quadrature.
    pub fn volume(&self) -> Result<f64> {
        let mut v = 0.0;
        for e in 0..self.n_elements() {
            for p in &self.reference.volume {
                v += p.weight * self.element_point(e, p)?.det;
            }
        }
        Ok(v)
    }

    /// Area of a set of boundary faces by surface quadrature.
    pub fn area(&self, faces: &[FaceRef]) -> Result<f64> {
        let mut a = 0.0;
        for &f in faces {
            for p in &self.reference.faces[f.face].points {
                a += p.point.weight * self.face_point(f, p)?.sqrt_det;
            }
        }
        Ok(a)
    }

    /// Diagonal of the mesh bounding box.
    pub fn characteristic_length(&self) -> f64 {
        let mut lo = self.nodes[0];
        let mut hi = self.nodes[0];
        for c in &self.nodes {
            lo = lo.inf(c);
            hi = hi.sup(c);
        }
        (hi - lo).norm()
    }
}

fn jacobian_from(nodes: &[Vector3<f64>], conn: &[usize], grads: &[Vector3<f64>]) -> Matrix3<f64> {
    let mut jac = Matrix3::zeros();
    for (&n, g) in conn.iter().zip(grads) {
        jac += nodes[n] * g.transpose();
    }
    jac
}

/// Boundary faces of a connectivity table: the faces referenced by exactly
/// one element, sorted by `(element, face)`.
pub fn extract_boundary(kind: ElementKind, elements: &[Vec<usize>]) -> Result<Vec<FaceRef>> {
    let mut owners: BTreeMap<Vec<usize>, Vec<FaceRef>> = BTreeMap::new();
    for (e, conn) in elements.iter().enumerate() {
        for f in 0..kind.n_faces() {
            let mut key: Vec<usize> = kind.face_corners(f).iter().map(|&l| conn[l]).collect();
            key.sort_unstable();
            owners.entry(key).or_default().push(FaceRef::new(e, f));
        }
    }
    let mut faces = Vec::new();
    for (key, refs) in owners {
        match refs.len() {
            1 => faces.push(refs[0]),
            2 => {}
            _ => return Err(Error::NonManifold { nodes: key }),
        }
    }
    faces.sort();
    Ok(faces)
}
