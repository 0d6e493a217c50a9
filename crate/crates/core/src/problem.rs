//! End-to-end pipeline: state solve, objective, adjoint and shape gradient.

use crate::error::Result;
use crate::fem::{solve_state, ElasticMaterial, ElasticState, LoadCase, Solver, SolverSettings};
use crate::field::NodalField;
use crate::lcf::{objective_j, LcfMaterial, LifeModel, LifeResult};
use crate::mesh::Mesh;
use crate::sensitivity::{assemble_nodal, adjoint_solve, dj_du_local, shape_gradient, ShapeGradient};

#[derive(Debug, Clone)]
pub struct Problem {
    pub mesh: Mesh,
    pub elastic: ElasticMaterial,
    pub lcf: LcfMaterial,
    pub load: LoadCase,
    pub solver: SolverSettings,
}

/// Solved state with its objective.
pub struct Solution {
    pub state: ElasticState,
    pub solver: Solver,
    pub life: LifeResult,
}

/// Solution, adjoint and shape gradient.
pub struct Analysis {
    pub state: ElasticState,
    pub life: LifeResult,
    pub dj_du: NodalField,
    pub adjoint: NodalField,
    pub gradient: ShapeGradient,
}

impl Problem {
    pub fn model(&self) -> Result<LifeModel> {
        LifeModel::new(&self.elastic, &self.lcf)
    }

    /// Same problem on moved nodes.
    pub fn with_nodes(&self, nodes: Vec<nalgebra::Vector3<f64>>) -> Problem {
        Problem {
            mesh: self.mesh.with_nodes(nodes),
            ..self.clone()
        }
    }

    /// Same problem with nodes `X + eps V`.
    pub fn perturbed(&self, v: &NodalField, eps: f64) -> Problem {
        let nodes = self.mesh.nodes().iter().zip(v.iter()).map(|(x, d)| x + d * eps).collect();
        self.with_nodes(nodes)
    }

    pub fn solve(&self) -> Result<Solution> {
        let model = self.model()?;
        let (state, solver) = solve_state(&self.mesh, &self.elastic, &self.load, &self.solver)?;
        let life = objective_j(&self.mesh, &model, &state.displacement)?;
        Ok(Solution { state, solver, life })
    }

    /// `J(X, U(X))`
    pub fn objective(&self) -> Result<f64> {
        Ok(self.solve()?.life.j)
    }

    pub fn analyze(&self) -> Result<Analysis> {
        self.analyze_with(false)
    }

    /// With `zero_adjoint` the adjoint terms are dropped and the gradient
    /// reduces to the partial derivative at fixed `U`.
    pub fn analyze_with(&self, zero_adjoint: bool) -> Result<Analysis> {
        let model = self.model()?;
        let Solution { state, solver, life } = self.solve()?;
        let u = &state.displacement;
        let dj_du = assemble_nodal(&self.mesh, &dj_du_local(&self.mesh, &model, u)?);
        let adjoint = if zero_adjoint {
            NodalField::zeros(self.mesh.n_nodes())
        } else {
            adjoint_solve(&solver, &dj_du)?
        };
        let gradient = shape_gradient(&self.mesh, &self.elastic, &model, &self.load, u, &adjoint, life.j)?;
        Ok(Analysis {
            state,
            life,
            dj_du,
            adjoint,
            gradient,
        })
    }
}
