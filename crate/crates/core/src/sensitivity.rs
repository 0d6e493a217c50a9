//! Discrete adjoint shape derivative of the surface objective.
//!
//! dJ/dX = dJ/dX|_U - L^T (dB/dX U - dF/dX), where `B L = dJ/dU` with the
//! state's Dirichlet DoFs held at zero. Every ingredient is computed element
//! or face locally and contracted immediately; no third-order tensor is
//! ever formed.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fem::{ElasticMaterial, LoadCase, Solver, Traction, VolumeForce};
use crate::field::NodalField;
use crate::lcf::{amplitude_energy, deviator, displacement_gradient, LifeModel};
use crate::mesh::{FacePoint, FaceRef, Mesh};

/// Per-entity local vectors (`3 x n_sh` each) with the element that maps
/// them to global nodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LocalGradientBatch {
    pub elements: Vec<usize>,
    pub values: Vec<Vec<Vector3<f64>>>,
}

impl LocalGradientBatch {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    /// Concatenation of two batches.
    pub fn union(&self, other: &LocalGradientBatch) -> LocalGradientBatch {
        LocalGradientBatch {
            elements: self.elements.iter().chain(&other.elements).copied().collect(),
            values: self.values.iter().chain(&other.values).cloned().collect(),
        }
    }
}

/// Scatter-adds a batch into a nodal field in batch order.
pub fn assemble_nodal(mesh: &Mesh, batch: &LocalGradientBatch) -> NodalField {
    let mut out = NodalField::zeros(mesh.n_nodes());
    for (&e, local) in batch.elements.iter().zip(&batch.values) {
        for (&n, v) in mesh.connectivity(e).iter().zip(local) {
            out[n] += v;
        }
    }
    out
}

fn face_batch(
    faces: &[FaceRef],
    f: impl Fn(FaceRef) -> Result<Vec<Vector3<f64>>> + Sync,
) -> Result<LocalGradientBatch> {
    let values = faces.par_iter().map(|&face| f(face)).collect::<Result<Vec<_>>>()?;
    Ok(LocalGradientBatch {
        elements: faces.iter().map(|f| f.element).collect(),
        values,
    })
}

fn element_batch(
    mesh: &Mesh,
    f: impl Fn(usize) -> Result<Vec<Vector3<f64>>> + Sync,
) -> Result<LocalGradientBatch> {
    let values = (0..mesh.n_elements())
        .into_par_iter()
        .map(&f)
        .collect::<Result<Vec<_>>>()?;
    Ok(LocalGradientBatch {
        elements: (0..mesh.n_elements()).collect(),
        values,
    })
}

/// `d sqrt(det g) / d X_j` divided by `sqrt(det g)`: `J_F g^-1 d_j`.
fn area_sensitivity(fp: &FacePoint, d: &Vector2<f64>) -> Vector3<f64> {
    let ginv = fp.gram.try_inverse().unwrap_or_else(nalgebra::Matrix2::zeros);
    fp.tangents * (ginv * d)
}

/// Intensity `h` and `dh/dq` at one surface quadrature point.
struct PointIntensity {
    h: f64,
    p: Matrix3<f64>,
    q: Matrix3<f64>,
}

fn point_intensity(model: &LifeModel, q: Matrix3<f64>) -> Result<PointIntensity> {
    let (h, dh) = model.intensity_energy(amplitude_energy(model, &q))?;
    let eps = deviator(&(0.5 * (q + q.transpose())));
    let p = eps * (dh * 3.0 * model.mu * model.mu / model.e);
    Ok(PointIntensity { h, p, q })
}

/// `dJ/dU` per surface face and local node.
pub fn dj_du_local(mesh: &Mesh, model: &LifeModel, u: &NodalField) -> Result<LocalGradientBatch> {
    let nsh = mesh.kind().n_nodes();
    face_batch(mesh.surface_faces(), |face| {
        let mut out = vec![Vector3::zeros(); nsh];
        for p in &mesh.reference().faces[face.face].points {
            let fp = mesh.face_point(face, p)?;
            let ep = mesh.element_point(face.element, &p.point)?;
            let pi = point_intensity(model, displacement_gradient(mesh, u, face.element, &ep.grads))?;
            let w = p.point.weight * fp.sqrt_det;
            for (o, g) in out.iter_mut().zip(&ep.grads) {
                *o += pi.p * g * w;
            }
        }
        Ok(out)
    })
}

/// Partial `dJ/dX` at fixed `U`, per surface face and local node.
pub fn dj_dx_local(mesh: &Mesh, model: &LifeModel, u: &NodalField) -> Result<LocalGradientBatch> {
    let nsh = mesh.kind().n_nodes();
    face_batch(mesh.surface_faces(), |face| {
        let mut out = vec![Vector3::zeros(); nsh];
        for p in &mesh.reference().faces[face.face].points {
            let fp = mesh.face_point(face, p)?;
            let ep = mesh.element_point(face.element, &p.point)?;
            let pi = point_intensity(model, displacement_gradient(mesh, u, face.element, &ep.grads))?;
            if pi.h == 0.0 && pi.p == Matrix3::zeros() {
                continue;
            }
            let w = p.point.weight * fp.sqrt_det;
            let qtp = pi.q.transpose() * pi.p;
            for ((o, g), d) in out.iter_mut().zip(&ep.grads).zip(&p.face_grads) {
                *o += (area_sensitivity(&fp, d) * pi.h - qtp * g) * w;
            }
        }
        Ok(out)
    })
}

/// Solves `B L = dJ/dU` with homogeneous Dirichlet values.
pub fn adjoint_solve(solver: &Solver, dj_du: &NodalField) -> Result<NodalField> {
    solver.solve_homogeneous(dj_du)
}

/// `L^T (dB/dX) U` as a nodal field.
pub fn adjoint_stiffness_contraction(
    mesh: &Mesh,
    material: &ElasticMaterial,
    u: &NodalField,
    lambda: &NodalField,
) -> Result<NodalField> {
    let nsh = mesh.kind().n_nodes();
    let batch = element_batch(mesh, |e| {
        let mut out = vec![Vector3::zeros(); nsh];
        for p in &mesh.reference().volume {
            let ep = mesh.element_point(e, p)?;
            let qu = displacement_gradient(mesh, u, e, &ep.grads);
            let ql = displacement_gradient(mesh, lambda, e, &ep.grads);
            let su = material.stress(&qu);
            let sl = material.stress(&ql);
            let w = p.weight * ep.det;
            let energy = su.dot(&ql);
            let m = qu.transpose() * sl + ql.transpose() * su;
            for (o, g) in out.iter_mut().zip(&ep.grads) {
                *o += (g * energy - m * g) * w;
            }
        }
        Ok(out)
    })?;
    Ok(assemble_nodal(mesh, &batch))
}

/// `L^T (dF_vol/dX)` as a nodal field.
pub fn volume_load_contraction(mesh: &Mesh, load: &LoadCase, lambda: &NodalField) -> Result<NodalField> {
    if matches!(load.volume, VolumeForce::None) {
        return Ok(NodalField::zeros(mesh.n_nodes()));
    }
    let nsh = mesh.kind().n_nodes();
    let spin = match load.volume {
        VolumeForce::Centrifugal { omega, density } => density * omega * omega,
        _ => 0.0,
    };
    let batch = element_batch(mesh, |e| {
        let conn = mesh.connectivity(e);
        let mut out = vec![Vector3::zeros(); nsh];
        for p in &mesh.reference().volume {
            let ep = mesh.element_point(e, p)?;
            let lam: Vector3<f64> = conn.iter().zip(&p.shape).map(|(&n, s)| lambda[n] * *s).sum();
            let w = p.weight * ep.det;
            let work = load.volume_density(&ep.position).dot(&lam);
            let radial = Vector3::new(0.0, lam.y, lam.z) * spin;
            for ((o, g), s) in out.iter_mut().zip(&ep.grads).zip(&p.shape) {
                *o += (g * work + radial * *s) * w;
            }
        }
        Ok(out)
    })?;
    Ok(assemble_nodal(mesh, &batch))
}

/// `L^T (dF_surf/dX)` as a nodal field, including the area correction of
/// force-controlled tractions.
pub fn surface_load_contraction(mesh: &Mesh, load: &LoadCase, lambda: &NodalField) -> Result<NodalField> {
    let nsh = mesh.kind().n_nodes();
    let faces = mesh.traction_faces();
    // Per face: (sum dw_j (g . L), sum dw_j, sum w L, sum w)
    let per_face = |face: FaceRef,
                    g: Vector3<f64>|
     -> Result<FaceLoadTerms> {
        let conn = mesh.connectivity(face.element);
        let mut dwork = vec![Vector3::zeros(); nsh];
        let mut darea = vec![Vector3::zeros(); nsh];
        let mut s = Vector3::zeros();
        let mut a = 0.0;
        for p in &mesh.reference().faces[face.face].points {
            let fp = mesh.face_point(face, p)?;
            let lam: Vector3<f64> = conn.iter().zip(&p.point.shape).map(|(&n, s)| lambda[n] * *s).sum();
            let w = p.point.weight * fp.sqrt_det;
            let work = g.dot(&lam);
            for ((dw, da), d) in dwork.iter_mut().zip(darea.iter_mut()).zip(&p.face_grads) {
                let dsq = area_sensitivity(&fp, d) * w;
                *dw += dsq * work;
                *da += dsq;
            }
            s += lam * w;
            a += w;
        }
        Ok((dwork, darea, s, a))
    };
    let (g, force) = match load.traction {
        Traction::None => return Ok(NodalField::zeros(mesh.n_nodes())),
        Traction::FixedDensity { density } => (Vector3::from(density), None),
        Traction::ForceControlled { force } => (Vector3::from(force), Some(Vector3::from(force))),
    };
    let parts = faces
        .par_iter()
        .map(|&f| per_face(f, g))
        .collect::<Result<Vec<_>>>()?;
    let elements: Vec<usize> = faces.iter().map(|f| f.element).collect();
    match force {
        None => {
            let batch = LocalGradientBatch {
                elements,
                values: parts.into_iter().map(|p| p.0).collect(),
            };
            Ok(assemble_nodal(mesh, &batch))
        }
        Some(force) => {
            let area: f64 = parts.iter().map(|p| p.3).sum();
            if !(area > 0.0) {
                return Err(Error::ZeroArea { area });
            }
            let s: Vector3<f64> = parts.iter().map(|p| p.2).sum();
            let ps = force.dot(&s);
            let values = parts
                .into_iter()
                .map(|(dw, da, _, _)| {
                    dw.iter()
                        .zip(&da)
                        .map(|(w, a)| w / area - a * (ps / (area * area)))
                        .collect()
                })
                .collect();
            Ok(assemble_nodal(mesh, &LocalGradientBatch { elements, values }))
        }
    }
}

/// Per traction face: `(sum dw_j (g . L), sum dw_j, sum w L, sum w)`.
type FaceLoadTerms = (Vec<Vector3<f64>>, Vec<Vector3<f64>>, Vector3<f64>, f64);

/// Unit outward normals at surface nodes: normalised vector area of the
/// adjacent boundary faces.
pub fn surface_normals(mesh: &Mesh) -> Result<BTreeMap<usize, Vector3<f64>>> {
    let mut acc: BTreeMap<usize, Vector3<f64>> = mesh.surface_nodes().into_iter().map(|n| (n, Vector3::zeros())).collect();
    for &face in mesh.surface_faces() {
        let mut va = Vector3::zeros();
        for p in &mesh.reference().faces[face.face].points {
            let fp = mesh.face_point(face, p)?;
            va += fp.normal() * (p.point.weight * fp.sqrt_det);
        }
        for n in mesh.face_nodes(face) {
            *acc.get_mut(&n).expect("face node is a surface node") += va;
        }
    }
    acc.into_iter()
        .map(|(n, v)| {
            let len = v.norm();
            if len > 0.0 && len.is_finite() {
                Ok((n, v / len))
            } else {
                Err(Error::IsolatedNode { node: n })
            }
        })
        .collect()
}

/// Normal component of a field at the surface nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalProjection {
    pub nodes: Vec<usize>,
    pub normals: Vec<Vector3<f64>>,
    pub values: Vec<f64>,
}

impl NormalProjection {
    /// Per-node values, zero away from the surface.
    pub fn to_dense(&self, n_nodes: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_nodes];
        for (&n, v) in self.nodes.iter().zip(&self.values) {
            out[n] = *v;
        }
        out
    }
}

pub fn normal_project(mesh: &Mesh, field: &NodalField) -> Result<NormalProjection> {
    let normals = surface_normals(mesh)?;
    let nodes: Vec<usize> = normals.keys().copied().collect();
    let values = normals.iter().map(|(&n, nv)| field[n].dot(nv)).collect();
    Ok(NormalProjection {
        nodes,
        normals: normals.into_values().collect(),
        values,
    })
}

/// The unit normal field at surface nodes, zero elsewhere.
pub fn normal_field(mesh: &Mesh) -> Result<NodalField> {
    let mut v = NodalField::zeros(mesh.n_nodes());
    for (n, nv) in surface_normals(mesh)? {
        v[n] = nv;
    }
    Ok(v)
}

/// The assembled shape derivative and its ingredients.
#[derive(Debug, Clone)]
pub struct ShapeGradient {
    pub j: f64,
    pub weibull_shape: f64,
    /// Total `dJ/dX`.
    pub dj_dx: NodalField,
    /// `dJ/dX` at fixed `U`.
    pub partial: NodalField,
    /// `L^T (dB/dX) U`
    pub stiffness_term: NodalField,
    /// `L^T (dF_vol/dX)`
    pub volume_term: NodalField,
    /// `L^T (dF_surf/dX)`
    pub surface_term: NodalField,
    pub normal: NormalProjection,
}

impl ShapeGradient {
    /// `dPoF/dX(t) = t^m exp(-t^m J) dJ/dX`.
    pub fn dpof_dx(&self, t: f64) -> NodalField {
        let tm = t.powf(self.weibull_shape);
        self.dj_dx.scaled(tm * (-tm * self.j).exp())
    }
}

/// Combines the four ingredients for given state and adjoint.
pub fn shape_gradient(
    mesh: &Mesh,
    material: &ElasticMaterial,
    model: &LifeModel,
    load: &LoadCase,
    u: &NodalField,
    lambda: &NodalField,
    j: f64,
) -> Result<ShapeGradient> {
    let partial = assemble_nodal(mesh, &dj_dx_local(mesh, model, u)?);
    let stiffness_term = adjoint_stiffness_contraction(mesh, material, u, lambda)?;
    let volume_term = volume_load_contraction(mesh, load, lambda)?;
    let surface_term = surface_load_contraction(mesh, load, lambda)?;
    let dj_dx = NodalField::from_fn(mesh.n_nodes(), |n| {
        partial[n] - stiffness_term[n] + volume_term[n] + surface_term[n]
    });
    let normal = normal_project(mesh, &dj_dx)?;
    Ok(ShapeGradient {
        j,
        weibull_shape: model.lcf.weibull_shape,
        dj_dx,
        partial,
        stiffness_term,
        volume_term,
        surface_term,
        normal,
    })
}
