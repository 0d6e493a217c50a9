use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::element::{ElementKind, FaceParam, FaceShape};
use crate::error::{Error, Result};
use crate::quadrature;

/// Number of quadrature points used on the volume and on each face.
///
/// `None` selects the default of the element kind: a volume rule exact for
/// the stiffness of an affine element (1, 8 and 27 points for TET4, HEX8 and
/// HEX20), a 3x3 rule on quadrilateral faces and the 6-point rule on
/// triangular faces.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSettings {
    #[serde(default)]
    pub volume_points: Option<usize>,
    #[serde(default)]
    pub surface_points: Option<usize>,
}

impl QuadratureSettings {
    pub fn volume_points_for(&self, kind: ElementKind) -> usize {
        self.volume_points.unwrap_or(match kind {
            ElementKind::Tet4 => 1,
            ElementKind::Hex8 => 8,
            ElementKind::Hex20 => 27,
        })
    }

    pub fn surface_points_for(&self, kind: ElementKind) -> usize {
        self.surface_points.unwrap_or(match kind.face_shape() {
            FaceShape::Triangle => 6,
            FaceShape::Quad => 9,
        })
    }
}

/// A reference quadrature point with cached shape data.
#[derive(Debug, Clone)]
pub struct RefPoint {
    pub xi: Vector3<f64>,
    pub weight: f64,
    pub shape: Vec<f64>,
    pub grads: Vec<Vector3<f64>>,
}

/// A reference face quadrature point; `face_grads[j]` holds the derivatives
/// of shape function `j` along the two face parameters.
#[derive(Debug, Clone)]
pub struct RefFacePoint {
    pub point: RefPoint,
    pub face_grads: Vec<Vector2<f64>>,
}

#[derive(Debug, Clone)]
pub struct RefFace {
    pub param: FaceParam,
    pub nodes: Vec<usize>,
    pub points: Vec<RefFacePoint>,
}

/// Shape functions and quadrature tables of one element kind.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub kind: ElementKind,
    pub volume: Vec<RefPoint>,
    pub faces: Vec<RefFace>,
}

impl ReferenceElement {
    pub fn new(kind: ElementKind, settings: &QuadratureSettings) -> Result<Self> {
        let nv = settings.volume_points_for(kind);
        let ns = settings.surface_points_for(kind);
        if nv > 27 {
            return Err(Error::InvalidQuadrature(format!(
                "at most 27 volume points are supported, got {nv}"
            )));
        }
        if ns > 36 {
            return Err(Error::InvalidQuadrature(format!(
                "at most 36 surface points are supported, got {ns}"
            )));
        }
        let volume_rule: Vec<([f64; 3], f64)> = match kind {
            ElementKind::Tet4 => quadrature::tetrahedron_rule(nv)?,
            _ => {
                let n = (1..=3).find(|n| n * n * n == nv).ok_or_else(|| {
                    Error::InvalidQuadrature(format!("{nv} points is not a hexahedron rule"))
                })?;
                quadrature::cube_rule(n)
            }
        };
        let volume = volume_rule
            .into_iter()
            .map(|(p, w)| ref_point(kind, Vector3::new(p[0], p[1], p[2]), w))
            .collect();

        let face_rule: Vec<([f64; 2], f64)> = match kind.face_shape() {
            FaceShape::Triangle => quadrature::triangle_rule(ns)?,
            FaceShape::Quad => {
                let n = (1..=6).find(|n| n * n == ns).ok_or_else(|| {
                    Error::InvalidQuadrature(format!("{ns} points is not a quadrilateral rule"))
                })?;
                quadrature::square_rule(n)
            }
        };
        let faces = (0..kind.n_faces())
            .map(|f| {
                let param = kind.face_param(f);
                let points = face_rule
                    .iter()
                    .map(|(st, w)| {
                        let point = ref_point(kind, param.point(*st), *w);
                        let face_grads = ElementKind::face_gradients(&point.grads, &param);
                        RefFacePoint { point, face_grads }
                    })
                    .collect();
                RefFace {
                    nodes: kind.face_nodes(f),
                    param,
                    points,
                }
            })
            .collect();
        Ok(ReferenceElement {
            kind,
            volume,
            faces,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.kind.n_nodes()
    }

    /// Measure of a reference face (4 for quads, 1/2 for triangles).
    pub fn reference_face_area(&self) -> f64 {
        match self.kind.face_shape() {
            FaceShape::Triangle => 0.5,
            FaceShape::Quad => 4.0,
        }
    }
}

fn ref_point(kind: ElementKind, xi: Vector3<f64>, weight: f64) -> RefPoint {
    RefPoint {
        shape: kind.shape_values(&xi),
        grads: kind.shape_gradients(&xi),
        xi,
        weight,
    }
}
