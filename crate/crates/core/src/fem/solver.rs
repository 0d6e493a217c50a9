//! Direct (sparse Cholesky) and iterative (Jacobi-preconditioned CG)
//! solvers for constrained stiffness systems.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::CscMatrix;
use serde::{Deserialize, Serialize};

use super::sparse::{ConstrainedSystem, SparseSymMatrix};
use crate::error::{Error, Result};
use crate::field::NodalField;

/// Pivots below this fraction of the original diagonal entry are treated as
/// a rank deficiency.
const PIVOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    /// Cholesky up to `AUTO_DIRECT_LIMIT` unknowns, CG above.
    #[default]
    Auto,
    Cholesky,
    Cg,
}

pub const AUTO_DIRECT_LIMIT: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub method: SolverMethod,
    /// Relative residual target of CG.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            method: SolverMethod::Auto,
            tolerance: 1e-10,
            max_iterations: 20_000,
        }
    }
}

enum Backend {
    Cholesky {
        factor: Box<CscCholesky<f64>>,
        /// `perm[new] = old`
        perm: Vec<usize>,
    },
    Cg {
        inv_diag: Vec<f64>,
    },
}

/// A constrained stiffness operator prepared for repeated solves (state and
/// adjoint share one factorization).
pub struct Solver {
    matrix: SparseSymMatrix,
    backend: Backend,
    settings: SolverSettings,
}

impl Solver {
    pub fn new(matrix: &SparseSymMatrix, settings: &SolverSettings) -> Result<Self> {
        let direct = match settings.method {
            SolverMethod::Auto => matrix.dim() <= AUTO_DIRECT_LIMIT,
            SolverMethod::Cholesky => true,
            SolverMethod::Cg => false,
        };
        let backend = if direct {
            cholesky(matrix)?
        } else {
            let diag = matrix.diagonal();
            if let Some(i) = diag.iter().position(|d| !(*d > 0.0)) {
                return Err(Error::SingularSystem {
                    dof: i,
                    pivot: diag[i],
                });
            }
            Backend::Cg {
                inv_diag: diag.iter().map(|d| 1.0 / d).collect(),
            }
        };
        Ok(Solver {
            matrix: matrix.clone(),
            backend,
            settings: *settings,
        })
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.matrix
    }

    /// Solves with a right-hand side already consistent with the constraints.
    pub fn solve_flat(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Cholesky { factor, perm } => {
                let b = DMatrix::from_iterator(rhs.len(), 1, perm.iter().map(|&i| rhs[i]));
                let y = factor.solve(&b);
                let mut x = vec![0.0; rhs.len()];
                for (k, &i) in perm.iter().enumerate() {
                    x[i] = y[(k, 0)];
                }
                Ok(x)
            }
            Backend::Cg { inv_diag } => pcg(&self.matrix, inv_diag, rhs, &self.settings),
        }
    }

    pub fn solve_system(&self, system: &ConstrainedSystem) -> Result<NodalField> {
        Ok(NodalField::from_flat(&self.solve_flat(&system.rhs)?))
    }

    /// Solves `B x = rhs` with homogeneous values at the constrained DoFs.
    pub fn solve_homogeneous(&self, rhs: &NodalField) -> Result<NodalField> {
        let mut b = rhs.to_flat();
        for i in self.matrix.constrained_dofs() {
            b[i] = 0.0;
        }
        Ok(NodalField::from_flat(&self.solve_flat(&b)?))
    }
}

/// One-shot solve of a constrained system.
pub fn solve(system: &ConstrainedSystem, settings: &SolverSettings) -> Result<NodalField> {
    Solver::new(&system.matrix, settings)?.solve_system(system)
}

fn cholesky(a: &SparseSymMatrix) -> Result<Backend> {
    let n = a.dim();
    let (row_ptr, cols, values) = a.raw();
    let perm = rcm_order(n, row_ptr, cols, values);
    let mut inv = vec![0; n];
    for (k, &i) in perm.iter().enumerate() {
        inv[i] = k;
    }
    // Symmetric, so the permuted CSR rows serve as CSC columns.
    let mut offsets = Vec::with_capacity(n + 1);
    let mut idx = Vec::new();
    let mut vals = Vec::new();
    offsets.push(0);
    for &old in &perm {
        let mut col: Vec<(usize, f64)> = (row_ptr[old]..row_ptr[old + 1])
            .filter(|&k| values[k] != 0.0 || cols[k] == old)
            .map(|k| (inv[cols[k]], values[k]))
            .collect();
        col.sort_by_key(|e| e.0);
        for (r, v) in col {
            idx.push(r);
            vals.push(v);
        }
        offsets.push(idx.len());
    }
    let csc = CscMatrix::try_from_csc_data(n, n, offsets, idx, vals)
        .map_err(|e| Error::InvalidInput(format!("sparse layout: {e}")))?;
    let factor = CscCholesky::factor(&csc).map_err(|_| {
        let dof = first_bad_pivot(&csc).unwrap_or(0);
        Error::SingularSystem {
            dof: perm[dof],
            pivot: f64::NAN,
        }
    })?;
    let l = factor.l();
    for (k, &pk) in perm.iter().enumerate() {
        let col = l.col(k);
        let lkk = col
            .row_indices()
            .iter()
            .zip(col.values())
            .find(|(r, _)| **r == k)
            .map_or(0.0, |(_, v)| *v);
        let akk = a.get(pk, pk);
        if !(lkk * lkk > PIVOT_TOL * akk.abs()) {
            return Err(Error::SingularSystem {
                dof: pk,
                pivot: lkk * lkk,
            });
        }
    }
    Ok(Backend::Cholesky {
        factor: Box::new(factor),
        perm,
    })
}

fn first_bad_pivot(csc: &CscMatrix<f64>) -> Option<usize> {
    (0..csc.ncols()).find(|&k| {
        let col = csc.col(k);
        !col.row_indices()
            .iter()
            .zip(col.values())
            .any(|(r, v)| *r == k && *v > 0.0)
    })
}

/// Reverse Cuthill-McKee ordering of the nonzero graph, started from a
/// pseudo-peripheral vertex of every connected component.
pub fn rcm_order(n: usize, row_ptr: &[usize], cols: &[usize], values: &[f64]) -> Vec<usize> {
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            (row_ptr[i]..row_ptr[i + 1])
                .filter(|&k| cols[k] != i && values[k] != 0.0)
                .map(|k| cols[k])
                .collect()
        })
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let bfs = |start: usize, visited: &[bool]| -> (Vec<usize>, usize) {
        let mut level = vec![usize::MAX; n];
        let mut q = VecDeque::from([start]);
        level[start] = 0;
        let mut last = start;
        while let Some(v) = q.pop_front() {
            last = v;
            for &w in &adj[v] {
                if !visited[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    q.push_back(w);
                }
            }
        }
        (level, last)
    };
    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        // pseudo-peripheral start: repeated BFS to the farthest vertex
        let mut start = seed;
        let mut ecc = 0;
        for _ in 0..4 {
            let (level, far) = bfs(start, &visited);
            if level[far] <= ecc && start != seed {
                break;
            }
            ecc = level[far];
            start = far;
        }
        let first = order.len();
        visited[start] = true;
        order.push(start);
        let mut head = first;
        while head < order.len() {
            let v = order[head];
            head += 1;
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            next.dedup();
            for w in next {
                visited[w] = true;
                order.push(w);
            }
        }
    }
    order.reverse();
    order
}

fn pcg(a: &SparseSymMatrix, inv_diag: &[f64], b: &[f64], s: &SolverSettings) -> Result<Vec<f64>> {
    let n = b.len();
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let bnorm = dot(b, b).sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..s.max_iterations {
        let ap = a.mul(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::SingularSystem {
                dof: 0,
                pivot: pap,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= s.tolerance * bnorm {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: s.max_iterations,
        residual: dot(&r, &r).sqrt() / bnorm,
    })
}
