//! Linear elasticity: materials, load cases, assembly of `B(X) U = F(X)`,
//! Dirichlet elimination and solution.

mod solver;
mod sparse;

pub use solver::{rcm_order, solve, Solver, SolverMethod, SolverSettings, AUTO_DIRECT_LIMIT};
pub use sparse::{apply_dirichlet, clamped, reactions, Constraint, ConstrainedSystem, SparseSymMatrix};

use nalgebra::{DMatrix, Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::NodalField;
use crate::mesh::{FaceRef, Mesh};

/// Isotropic linear elastic material (MPa, tonne/mm^3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ElasticInput", into = "ElasticInput")]
pub struct ElasticMaterial {
    pub youngs_modulus: f64,
    pub poisson_ratio: f64,
    pub lame_lambda: f64,
    pub lame_mu: f64,
    pub density: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ElasticInput {
    youngs_modulus: f64,
    poisson_ratio: f64,
    #[serde(default)]
    density: f64,
}

impl TryFrom<ElasticInput> for ElasticMaterial {
    type Error = Error;
    fn try_from(i: ElasticInput) -> Result<Self> {
        ElasticMaterial::from_e_nu(i.youngs_modulus, i.poisson_ratio, i.density)
    }
}

impl From<ElasticMaterial> for ElasticInput {
    fn from(m: ElasticMaterial) -> Self {
        ElasticInput {
            youngs_modulus: m.youngs_modulus,
            poisson_ratio: m.poisson_ratio,
            density: m.density,
        }
    }
}

impl ElasticMaterial {
    pub fn from_e_nu(youngs_modulus: f64, poisson_ratio: f64, density: f64) -> Result<Self> {
        if !(youngs_modulus > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Young's modulus must be positive, got {youngs_modulus}"
            )));
        }
        if !(poisson_ratio > -1.0 && poisson_ratio < 0.5) {
            return Err(Error::InvalidInput(format!(
                "Poisson ratio must lie in (-1, 0.5), got {poisson_ratio}"
            )));
        }
        if !(density >= 0.0) {
            return Err(Error::InvalidInput(format!("density must be >= 0, got {density}")));
        }
        let (e, nu) = (youngs_modulus, poisson_ratio);
        Ok(ElasticMaterial {
            youngs_modulus: e,
            poisson_ratio: nu,
            lame_lambda: e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
            lame_mu: e / (2.0 * (1.0 + nu)),
            density,
        })
    }

    /// The aluminium alloy of the rotor example (E = 70 GPa, nu = 0.3).
    pub fn aluminium() -> Self {
        ElasticMaterial::from_e_nu(70_000.0, 0.3, 2.65e-9).expect("valid constants")
    }

    /// `lambda tr(eps) I + 2 mu eps` for a displacement gradient `q`.
    pub fn stress(&self, q: &Matrix3<f64>) -> Matrix3<f64> {
        let eps = 0.5 * (q + q.transpose());
        Matrix3::identity() * (self.lame_lambda * eps.trace()) + eps * (2.0 * self.lame_mu)
    }
}

/// Volume force model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolumeForce {
    #[default]
    None,
    /// Constant force density (N/mm^3).
    Constant { force: [f64; 3] },
    /// Rotation about the x axis at `omega` rad/s.
    Centrifugal { omega: f64, density: f64 },
}

/// Surface traction model on the traction faces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Traction {
    #[default]
    None,
    /// Fixed traction density (MPa).
    FixedDensity { density: [f64; 3] },
    /// Total force (N) spread uniformly over the current loaded area.
    ForceControlled { force: [f64; 3] },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct LoadCase {
    pub volume: VolumeForce,
    pub traction: Traction,
}

impl LoadCase {
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        if let VolumeForce::Centrifugal { density, .. } = self.volume {
            if !(density > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "centrifugal load needs a positive density, got {density}"
                )));
            }
        }
        if matches!(self.traction, Traction::ForceControlled { .. }) && mesh.traction_faces().is_empty() {
            return Err(Error::InvalidInput(
                "force-controlled traction needs a nonempty traction face set".into(),
            ));
        }
        Ok(())
    }

    /// Volume force density at a physical point.
    pub fn volume_density(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match self.volume {
            VolumeForce::None => Vector3::zeros(),
            VolumeForce::Constant { force } => Vector3::from(force),
            VolumeForce::Centrifugal { omega, density } => {
                density * omega * omega * Vector3::new(0.0, x.y, x.z)
            }
        }
    }

    /// Traction density on the loaded faces of `mesh`.
    pub fn traction_density(&self, mesh: &Mesh) -> Result<Vector3<f64>> {
        match self.traction {
            Traction::None => Ok(Vector3::zeros()),
            Traction::FixedDensity { density } => Ok(Vector3::from(density)),
            Traction::ForceControlled { force } => {
                let area = mesh.area(mesh.traction_faces())?;
                if !(area > 0.0) {
                    return Err(Error::ZeroArea { area });
                }
                Ok(Vector3::from(force) / area)
            }
        }
    }
}

/// Global DoF indices of an element, `3 * local + r`.
pub fn element_dofs(mesh: &Mesh, element: usize) -> Vec<usize> {
    mesh.connectivity(element)
        .iter()
        .flat_map(|&n| [3 * n, 3 * n + 1, 3 * n + 2])
        .collect()
}

/// Dense element stiffness with rows/columns `3 * a + r`.
pub fn element_stiffness(mesh: &Mesh, material: &ElasticMaterial, element: usize) -> Result<DMatrix<f64>> {
    let nsh = mesh.kind().n_nodes();
    let (lam, mu) = (material.lame_lambda, material.lame_mu);
    let mut k = DMatrix::zeros(3 * nsh, 3 * nsh);
    for p in &mesh.reference().volume {
        let ep = mesh.element_point(element, p)?;
        let w = p.weight * ep.det;
        for a in 0..nsh {
            let ga = ep.grads[a];
            for b in 0..nsh {
                let gb = ep.grads[b];
                let gab = ga.dot(&gb);
                for r in 0..3 {
                    for s in 0..3 {
                        let mut v = lam * ga[r] * gb[s] + mu * ga[s] * gb[r];
                        if r == s {
                            v += mu * gab;
                        }
                        k[(3 * a + r, 3 * b + s)] += w * v;
                    }
                }
            }
        }
    }
    Ok(k)
}

/// Assembles the unconstrained stiffness; element blocks are computed in
/// parallel and added in element order.
pub fn assemble_stiffness(mesh: &Mesh, material: &ElasticMaterial) -> Result<SparseSymMatrix> {
    let blocks: Vec<DMatrix<f64>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| element_stiffness(mesh, material, e))
        .collect::<Result<_>>()?;
    let mut b = SparseSymMatrix::with_mesh_pattern(mesh);
    for (e, block) in blocks.iter().enumerate() {
        b.add_block(&element_dofs(mesh, e), block);
    }
    Ok(b)
}

/// Element volume load `int f theta_j`, per local node.
pub fn element_volume_load(mesh: &Mesh, load: &LoadCase, element: usize) -> Result<Vec<Vector3<f64>>> {
    let nsh = mesh.kind().n_nodes();
    let mut out = vec![Vector3::zeros(); nsh];
    if matches!(load.volume, VolumeForce::None) {
        return Ok(out);
    }
    for p in &mesh.reference().volume {
        let ep = mesh.element_point(element, p)?;
        let f = load.volume_density(&ep.position) * (p.weight * ep.det);
        for (o, s) in out.iter_mut().zip(&p.shape) {
            *o += f * *s;
        }
    }
    Ok(out)
}

/// Face traction load `int g theta_j dA`, per local node of the element.
pub fn face_traction_load(mesh: &Mesh, g: &Vector3<f64>, face: FaceRef) -> Result<Vec<Vector3<f64>>> {
    let nsh = mesh.kind().n_nodes();
    let mut out = vec![Vector3::zeros(); nsh];
    for p in &mesh.reference().faces[face.face].points {
        let fp = mesh.face_point(face, p)?;
        let w = p.point.weight * fp.sqrt_det;
        for (o, s) in out.iter_mut().zip(&p.point.shape) {
            *o += g * (w * s);
        }
    }
    Ok(out)
}

/// Assembles the load vector `F(X)`.
pub fn assemble_load(mesh: &Mesh, load: &LoadCase) -> Result<NodalField> {
    load.validate(mesh)?;
    let mut f = NodalField::zeros(mesh.n_nodes());
    let vol: Vec<Vec<Vector3<f64>>> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|e| element_volume_load(mesh, load, e))
        .collect::<Result<_>>()?;
    for (e, local) in vol.iter().enumerate() {
        for (&n, v) in mesh.connectivity(e).iter().zip(local) {
            f[n] += v;
        }
    }
    if !matches!(load.traction, Traction::None) {
        let g = load.traction_density(mesh)?;
        let surf: Vec<Vec<Vector3<f64>>> = mesh
            .traction_faces()
            .par_iter()
            .map(|&face| face_traction_load(mesh, &g, face))
            .collect::<Result<_>>()?;
        for (face, local) in mesh.traction_faces().iter().zip(&surf) {
            for (&n, v) in mesh.connectivity(face.element).iter().zip(local) {
                f[n] += v;
            }
        }
    }
    Ok(f)
}

/// Assembled and solved elastic state.
#[derive(Debug, Clone)]
pub struct ElasticState {
    pub stiffness: SparseSymMatrix,
    pub load: NodalField,
    pub displacement: NodalField,
}

/// Full state solve with the mesh's clamped nodes, returning the prepared
/// solver for reuse by the adjoint solve.
pub fn solve_state(
    mesh: &Mesh,
    material: &ElasticMaterial,
    load: &LoadCase,
    settings: &SolverSettings,
) -> Result<(ElasticState, Solver)> {
    let stiffness = assemble_stiffness(mesh, material)?;
    let f = assemble_load(mesh, load)?;
    let system = apply_dirichlet(&stiffness, &f, &clamped(mesh));
    let solver = Solver::new(&system.matrix, settings)?;
    let displacement = solver.solve_system(&system)?;
    Ok((
        ElasticState {
            stiffness,
            load: f,
            displacement,
        },
        solver,
    ))
}
