//! JSON mesh files.
//!
//! ```json
//! {
//!   "nodes": [[x, y, z], ...],
//!   "elements": {"kind": "HEX8", "conn": [[n0, n1, ...], ...]},
//!   "sets": {"dirichlet": [ids], "traction_faces": [[element, face], ...]}
//! }
//! ```
//!
//! Node and element ids are zero-based; `face` is the local face number of
//! the element kind. Unknown element kinds and unknown fields are rejected.

use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{ElementKind, FaceRef, Mesh, QuadratureSettings};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshFile {
    pub nodes: Vec<[f64; 3]>,
    pub elements: ElementBlock,
    #[serde(default)]
    pub sets: NodeSets,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElementBlock {
    pub kind: String,
    pub conn: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSets {
    #[serde(default)]
    pub dirichlet: Vec<usize>,
    #[serde(default)]
    pub traction_faces: Vec<[usize; 2]>,
}

impl MeshFile {
    pub fn from_mesh(mesh: &Mesh) -> Self {
        MeshFile {
            nodes: mesh.nodes().iter().map(|p| [p.x, p.y, p.z]).collect(),
            elements: ElementBlock {
                kind: mesh.kind().name().to_string(),
                conn: mesh.elements().to_vec(),
            },
            sets: NodeSets {
                dirichlet: mesh.dirichlet_nodes().to_vec(),
                traction_faces: mesh
                    .traction_faces()
                    .iter()
                    .map(|f| [f.element, f.face])
                    .collect(),
            },
        }
    }

    pub fn into_mesh(self, quadrature: &QuadratureSettings) -> Result<Mesh> {
        let kind = ElementKind::parse(&self.elements.kind).ok_or_else(|| {
            Error::InvalidMesh(format!("unknown element kind '{}'", self.elements.kind))
        })?;
        Mesh::new(
            kind,
            self.nodes
                .iter()
                .map(|p| Vector3::new(p[0], p[1], p[2]))
                .collect(),
            self.elements.conn,
            self.sets.dirichlet,
            self.sets
                .traction_faces
                .iter()
                .map(|f| FaceRef::new(f[0], f[1]))
                .collect(),
            quadrature,
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }
}

impl Mesh {
    /// Reads a JSON mesh file.
    pub fn from_json_file(path: &Path, quadrature: &QuadratureSettings) -> Result<Mesh> {
        MeshFile::read(path)?.into_mesh(quadrature)
    }

    pub fn from_json_str(text: &str, quadrature: &QuadratureSettings) -> Result<Mesh> {
        let file: MeshFile = serde_json::from_str(text)?;
        file.into_mesh(quadrature)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string(&MeshFile::from_mesh(self))?)
    }
}
