//! Symmetric sparse stiffness storage and Dirichlet elimination.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::field::NodalField;
use crate::mesh::Mesh;

/// Square sparse matrix in CSR form with both triangles stored.
///
/// The pattern is node-blocked: if nodes `a` and `b` share an element, all
/// nine couplings `(3a + r, 3b + s)` are present.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
    constrained: Vec<bool>,
}

impl SparseSymMatrix {
    /// Zero matrix with the node-coupling pattern of `mesh`.
    pub fn with_mesh_pattern(mesh: &Mesh) -> Self {
        let n = mesh.n_nodes();
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for conn in mesh.elements() {
            for &a in conn {
                adj[a].extend(conn.iter().copied());
            }
        }
        let dim = 3 * n;
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for nbrs in &adj {
            for _ in 0..3 {
                for &b in nbrs {
                    cols.extend([3 * b, 3 * b + 1, 3 * b + 2]);
                }
                row_ptr.push(cols.len());
            }
        }
        let nnz = cols.len();
        SparseSymMatrix {
            dim,
            row_ptr,
            cols,
            values: vec![0.0; nnz],
            constrained: vec![false; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].binary_search(&j).ok().map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Adds `v` to entry `(i, j)`; the entry must be in the pattern.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is outside the sparsity pattern"));
        self.values[k] += v;
    }

    /// Adds a dense element block, `dofs[a]` being the global index of local
    /// row/column `a`.
    pub fn add_block(&mut self, dofs: &[usize], block: &nalgebra::DMatrix<f64>) {
        for (a, &i) in dofs.iter().enumerate() {
            for (b, &j) in dofs.iter().enumerate() {
                self.add(i, j, block[(a, b)]);
            }
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn mul_field(&self, x: &NodalField) -> NodalField {
        NodalField::from_flat(&self.mul(&x.to_flat()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `max |A_ij - A_ji| / max |A_ij|`.
    pub fn symmetry_error(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut err = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                err = err.max((v - self.get(j, i)).abs());
            }
        }
        if scale > 0.0 {
            err / scale
        } else {
            0.0
        }
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.constrained[dof]
    }

    pub fn constrained_dofs(&self) -> Vec<usize> {
        (0..self.dim).filter(|&i| self.constrained[i]).collect()
    }

    /// Coordinate MatrixMarket text (1-based, general storage).
    pub fn to_matrix_market(&self) -> String {
        let mut out = String::new();
        out.push_str("%%MatrixMarket matrix coordinate real general\n");
        let _ = writeln!(out, "{} {} {}", self.dim, self.dim, self.nnz());
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                let _ = writeln!(out, "{} {} {:.17e}", i + 1, j + 1, v);
            }
        }
        out
    }
}

/// A prescribed displacement component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constraint {
    pub node: usize,
    pub component: usize,
    pub value: f64,
}

impl Constraint {
    pub fn dof(&self) -> usize {
        3 * self.node + self.component
    }
}

/// All three components fixed to zero at the mesh's Dirichlet nodes.
pub fn clamped(mesh: &Mesh) -> Vec<Constraint> {
    mesh.dirichlet_nodes()
        .iter()
        .flat_map(|&node| {
            (0..3).map(move |component| Constraint {
                node,
                component,
                value: 0.0,
            })
        })
        .collect()
}

/// Stiffness and right-hand side after symmetric elimination.
#[derive(Debug, Clone)]
pub struct ConstrainedSystem {
    pub matrix: SparseSymMatrix,
    pub rhs: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

/// Eliminates constrained DoFs symmetrically: their rows and columns are
/// zeroed, the diagonal entry is kept and the right-hand side is shifted by
/// the prescribed values so that the solution reproduces them exactly.
pub fn apply_dirichlet(
    matrix: &SparseSymMatrix,
    rhs: &NodalField,
    constraints: &[Constraint],
) -> ConstrainedSystem {
    let mut a = matrix.clone();
    let mut b = rhs.to_flat();
    let mut fixed = vec![None; a.dim];
    for c in constraints {
        fixed[c.dof()] = Some(c.value);
    }
    for i in 0..a.dim {
        if fixed[i].is_some() {
            continue;
        }
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            if let Some(v) = fixed[a.cols[k]] {
                b[i] -= a.values[k] * v;
                a.values[k] = 0.0;
            }
        }
    }
    for i in 0..a.dim {
        if let Some(v) = fixed[i] {
            let mut d = 0.0;
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                if a.cols[k] == i {
                    d = a.values[k];
                    if !(d > 0.0) {
                        d = 1.0;
                        a.values[k] = 1.0;
                    }
                } else {
                    a.values[k] = 0.0;
                }
            }
            b[i] = d * v;
            a.constrained[i] = true;
        }
    }
    ConstrainedSystem {
        matrix: a,
        rhs: b,
        constraints: constraints.to_vec(),
    }
}

/// Reaction forces `B U - F` of the unconstrained system (nonzero only at
/// constrained DoFs for an equilibrium solution).
pub fn reactions(matrix: &SparseSymMatrix, u: &NodalField, f: &NodalField) -> NodalField {
    matrix.mul_field(u).axpy(-1.0, f)
}

impl SparseSymMatrix {
    pub(crate) fn raw(&self) -> (&[usize], &[usize], &[f64]) {
        (&self.row_ptr, &self.cols, &self.values)
    }
}
