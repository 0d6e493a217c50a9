//! Finite-difference oracles for every ingredient of the shape derivative.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{assemble_load, ElasticMaterial, LoadCase, SparseSymMatrix, Traction, VolumeForce};
use crate::field::NodalField;
use crate::lcf::{displacement_gradient, objective_j};
use crate::mesh::Mesh;
use crate::problem::{Analysis, Problem};
use crate::sensitivity::normal_field;

/// Seed of the first random direction; the second uses `SEED + 1`.
pub const SEED: u64 = 20_240_917;

/// Largest mesh the assembled-matrix oracle accepts.
pub const MATRIX_FD_MAX_NODES: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Forward,
    Central,
}

/// Comparison of an analytic directional derivative with differences over
/// a grid of step sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdReport {
    pub name: String,
    pub scheme: Scheme,
    pub analytic: f64,
    pub eps: Vec<f64>,
    /// `None` where the perturbed mesh was degenerate.
    pub fd: Vec<Option<f64>>,
    pub errors: Vec<Option<f64>>,
    pub best_error: f64,
    pub best_eps: f64,
    /// At least two adjacent step sizes within 2x of the best error.
    pub plateau: bool,
}

impl FdReport {
    /// Two adjacent step sizes with errors at most `bound`.
    pub fn plateau_within(&self, bound: f64) -> bool {
        self.errors
            .windows(2)
            .any(|w| matches!(w, [Some(a), Some(b)] if *a <= bound && *b <= bound))
    }

    /// Best error within `threshold`, confirmed by a neighbouring step.
    ///
    /// Near round-off the error curve is jagged, so the neighbour only has
    /// to be within `max(2 * best, threshold)`; a single lucky step below
    /// the threshold never passes.
    pub fn passes(&self, threshold: f64) -> bool {
        self.best_error <= threshold && self.plateau_within((2.0 * self.best_error).max(threshold))
    }

    pub fn skipped(&self) -> Vec<f64> {
        self.eps.iter().zip(&self.fd).filter(|(_, f)| f.is_none()).map(|(e, _)| *e).collect()
    }

    pub fn csv_header() -> &'static str {
        "name,scheme,eps,fd,analytic,rel_error"
    }

    /// One line per step size, without header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        let scheme = match self.scheme {
            Scheme::Forward => "forward",
            Scheme::Central => "central",
        };
        for ((e, f), r) in self.eps.iter().zip(&self.fd).zip(&self.errors) {
            let f = f.map_or("skipped".to_string(), |v| format!("{v:.15e}"));
            let r = r.map_or("skipped".to_string(), |v| format!("{v:.6e}"));
            let _ = writeln!(out, "{},{scheme},{e:.6e},{f},{:.15e},{r}", self.name, self.analytic);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}", Self::csv_header(), self.csv_rows())
    }
}

/// Relative discrepancy; both values exactly zero count as agreement.
pub fn relative_error(analytic: f64, fd: f64) -> f64 {
    relative_error_floored(analytic, fd, 0.0)
}

/// Relative discrepancy with the denominator bounded below by `floor`.
pub fn relative_error_floored(analytic: f64, fd: f64, floor: f64) -> f64 {
    let scale = fd.abs().max(analytic.abs()).max(floor);
    if scale == 0.0 {
        0.0
    } else {
        (analytic - fd).abs() / fd.abs().max(floor).max(f64::MIN_POSITIVE)
    }
}

/// Denominator floor for `g . v`: when the sum cancels to rounding level
/// (an exact invariance), the summed magnitude `sum |g_j . v_j|` is the
/// only meaningful scale; otherwise no floor.
pub fn cancellation_floor(g: &NodalField, v: &NodalField) -> f64 {
    let magnitude: f64 = g.iter().zip(v.iter()).map(|(a, b)| a.dot(b).abs()).sum();
    if g.dot(v).abs() <= 1e-12 * magnitude {
        magnitude
    } else {
        0.0
    }
}

/// `eps0 * 2^-k`, `k = 0..count`.
pub fn eps_grid(eps0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| eps0 * 0.5f64.powi(k as i32)).collect()
}

/// Default grid: 1e-2 down to about 1e-8 times `scale` in factors of 2.
pub fn default_grid(scale: f64) -> Vec<f64> {
    eps_grid(1e-2 * scale, 21)
}

fn is_inversion(e: &Error) -> bool {
    matches!(e, Error::DegenerateElement { .. } | Error::DegenerateFace { .. })
}

/// Differences of `f(eps) = J(X + eps V)` against `analytic`. Steps that
/// produce degenerate elements are skipped and recorded as `None`.
pub fn fd_directional(
    name: &str,
    f: impl Fn(f64) -> Result<f64>,
    analytic: f64,
    eps: &[f64],
    scheme: Scheme,
) -> Result<FdReport> {
    fd_directional_floored(name, f, analytic, 0.0, eps, scheme)
}

/// As [`fd_directional`], with errors from [`relative_error_floored`].
pub fn fd_directional_floored(
    name: &str,
    f: impl Fn(f64) -> Result<f64>,
    analytic: f64,
    floor: f64,
    eps: &[f64],
    scheme: Scheme,
) -> Result<FdReport> {
    let base = if scheme == Scheme::Forward { Some(f(0.0)?) } else { None };
    let mut fd = Vec::with_capacity(eps.len());
    for &e in eps {
        let value = match scheme {
            Scheme::Forward => f(e).map(|p| (p - base.unwrap()) / e),
            Scheme::Central => f(e).and_then(|p| Ok((p - f(-e)?) / (2.0 * e))),
        };
        match value {
            Ok(v) => fd.push(Some(v)),
            Err(err) if is_inversion(&err) => fd.push(None),
            Err(err) => return Err(err),
        }
    }
    let errors: Vec<Option<f64>> = fd.iter().map(|v| v.map(|v| relative_error_floored(analytic, v, floor))).collect();
    let (best_i, best_error) = errors
        .iter()
        .enumerate()
        .filter_map(|(i, e)| e.map(|e| (i, e)))
        .fold((usize::MAX, f64::INFINITY), |acc, (i, e)| if e < acc.1 { (i, e) } else { acc });
    let near = |i: usize| errors.get(i).copied().flatten().is_some_and(|e| e <= 2.0 * best_error);
    let plateau = best_i != usize::MAX && ((best_i > 0 && near(best_i - 1)) || near(best_i + 1));
    Ok(FdReport {
        name: name.to_string(),
        scheme,
        analytic,
        eps: eps.to_vec(),
        fd,
        errors,
        best_error,
        best_eps: if best_i == usize::MAX { f64::NAN } else { eps[best_i] },
        plateau,
    })
}

/// `L^T (B(X + eps V) - B(X - eps V)) U / (2 eps)` from assembled matrices.
pub fn matrix_fd(
    assemble: impl Fn(&Mesh) -> Result<SparseSymMatrix>,
    mesh: &Mesh,
    v: &NodalField,
    eps: f64,
    lambda: &NodalField,
    u: &NodalField,
) -> Result<f64> {
    if mesh.n_nodes() > MATRIX_FD_MAX_NODES {
        return Err(Error::InvalidInput(format!(
            "matrix oracle is limited to {MATRIX_FD_MAX_NODES} nodes, mesh has {}",
            mesh.n_nodes()
        )));
    }
    let moved = |s: f64| mesh.with_nodes(mesh.nodes().iter().zip(v.iter()).map(|(x, d)| x + d * s).collect());
    let plus = assemble(&moved(eps))?;
    let minus = assemble(&moved(-eps))?;
    let l = lambda.to_flat();
    let u = u.to_flat();
    let bu = |b: &SparseSymMatrix| -> f64 { l.iter().zip(b.mul(&u)).map(|(a, b)| a * b).sum() };
    Ok((bu(&plus) - bu(&minus)) / (2.0 * eps))
}

/// `L^T B(X) U` summed element by element.
pub fn stiffness_form(mesh: &Mesh, material: &ElasticMaterial, lambda: &NodalField, u: &NodalField) -> Result<f64> {
    let mut total = 0.0;
    for e in 0..mesh.n_elements() {
        for p in &mesh.reference().volume {
            let ep = mesh.element_point(e, p)?;
            let qu = displacement_gradient(mesh, u, e, &ep.grads);
            let ql = displacement_gradient(mesh, lambda, e, &ep.grads);
            total += p.weight * ep.det * material.stress(&qu).dot(&ql);
        }
    }
    Ok(total)
}

/// Ingredients of the shape derivative that carry an oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ingredient {
    /// dJ/dU along a displacement direction
    DjDu,
    /// dJ/dX at fixed U
    DjDx,
    /// L^T dB/dX U
    Stiffness,
    /// L^T dF_vol/dX
    VolumeLoad,
    /// L^T dF_surf/dX
    SurfaceLoad,
    /// dJ/dX including the state response
    Total,
}

impl Ingredient {
    pub const ALL: [Ingredient; 6] = [
        Ingredient::DjDu,
        Ingredient::DjDx,
        Ingredient::Stiffness,
        Ingredient::VolumeLoad,
        Ingredient::SurfaceLoad,
        Ingredient::Total,
    ];

    /// Displacement-space oracles only use `U` itself and random fields.
    pub fn applies(self, dir: Direction) -> bool {
        self != Ingredient::DjDu || matches!(dir, Direction::Displacement | Direction::Random1 | Direction::Random2)
    }

    pub fn name(self) -> &'static str {
        match self {
            Ingredient::DjDu => "dJ_dU",
            Ingredient::DjDx => "dJ_dX_partial",
            Ingredient::Stiffness => "adjoint_stiffness",
            Ingredient::VolumeLoad => "adjoint_volume_load",
            Ingredient::SurfaceLoad => "adjoint_surface_load",
            Ingredient::Total => "dJ_dX_total",
        }
    }
}

/// Named direction fields of the validation suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// unit outward normals at surface nodes
    Normal,
    /// V = X (uniform scaling)
    Scaling,
    /// V = U at surface nodes
    Displacement,
    /// seeded uniform random vectors
    Random1,
    Random2,
}

impl Direction {
    pub const ALL: [Direction; 5] = [
        Direction::Normal,
        Direction::Scaling,
        Direction::Displacement,
        Direction::Random1,
        Direction::Random2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Direction::Normal => "normal",
            Direction::Scaling => "scaling",
            Direction::Displacement => "displacement",
            Direction::Random1 => "random1",
            Direction::Random2 => "random2",
        }
    }
}

/// Uniform random vectors in `[-1, 1]^3` per node.
pub fn random_field(n: usize, seed: u64) -> NodalField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    NodalField::from_fn(n, |_| {
        Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    })
}

/// A direction field scaled to unit maximum nodal length.
pub fn direction_field(mesh: &Mesh, u: &NodalField, dir: Direction) -> Result<NodalField> {
    let v = match dir {
        Direction::Normal => normal_field(mesh)?,
        Direction::Scaling => NodalField(mesh.nodes().to_vec()),
        Direction::Displacement => {
            let mut v = NodalField::zeros(mesh.n_nodes());
            for n in mesh.surface_nodes() {
                v[n] = u[n];
            }
            v
        }
        Direction::Random1 => random_field(mesh.n_nodes(), SEED),
        Direction::Random2 => random_field(mesh.n_nodes(), SEED + 1),
    };
    let m = v.max_norm();
    Ok(if m > 0.0 { v.scaled(1.0 / m) } else { v })
}

/// Pass thresholds (relative error) per ingredient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds(pub BTreeMap<Ingredient, f64>);

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds(BTreeMap::from([
            (Ingredient::DjDu, 2e-3),
            (Ingredient::DjDx, 2e-3),
            (Ingredient::Stiffness, 1e-6),
            (Ingredient::VolumeLoad, 1e-6),
            (Ingredient::SurfaceLoad, 1e-6),
            (Ingredient::Total, 1e-2),
        ]))
    }
}

/// One oracle comparison of the suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteEntry {
    pub ingredient: Ingredient,
    pub direction: Direction,
    pub threshold: f64,
    pub report: FdReport,
    pub passed: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub entries: Vec<SuiteEntry>,
    /// Ingredients without a registered threshold.
    pub missing: Vec<Ingredient>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.missing.is_empty() && self.entries.iter().all(|e| e.passed)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("ingredient,direction,threshold,best_error,best_eps,plateau,passed\n");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{},{},{:.1e},{:.6e},{:.6e},{},{}",
                e.ingredient.name(),
                e.direction.name(),
                e.threshold,
                e.report.best_error,
                e.report.best_eps,
                e.report.plateau,
                e.passed
            );
        }
        for m in &self.missing {
            let _ = writeln!(out, "{},,,,,,false", m.name());
        }
        out
    }

    /// Per-step detail of every comparison.
    pub fn detail_csv(&self) -> String {
        let mut out = format!("direction,{}\n", FdReport::csv_header());
        for e in &self.entries {
            for line in e.report.csv_rows().lines() {
                let _ = writeln!(out, "{},{line}", e.direction.name());
            }
        }
        out
    }
}

/// Runs the oracle of `ingredient` along `dir` for a solved problem.
pub fn check_ingredient(
    problem: &Problem,
    analysis: &Analysis,
    ingredient: Ingredient,
    dir: Direction,
    eps: Option<&[f64]>,
) -> Result<FdReport> {
    let mesh = &problem.mesh;
    let u = &analysis.state.displacement;
    let lam = &analysis.adjoint;
    let g = &analysis.gradient;
    let model = problem.model()?;
    let name = format!("{}:{}", ingredient.name(), dir.name());
    let length = mesh.characteristic_length();
    if ingredient == Ingredient::DjDu {
        let v = match dir {
            Direction::Random1 | Direction::Random2 => direction_field(mesh, u, dir)?,
            _ => u.scaled(1.0 / u.max_norm().max(f64::MIN_POSITIVE)),
        };
        let grid = eps.map(<[f64]>::to_vec).unwrap_or_else(|| default_grid(u.max_norm()));
        let analytic = analysis.dj_du.dot(&v);
        return fd_directional(
            &name,
            |e| Ok(objective_j(mesh, &model, &u.axpy(e, &v))?.j),
            analytic,
            &grid,
            Scheme::Central,
        );
    }
    let v = direction_field(mesh, u, dir)?;
    let grid = eps.map(<[f64]>::to_vec).unwrap_or_else(|| default_grid(length));
    let moved = |e: f64| problem.perturbed(&v, e);
    match ingredient {
        Ingredient::DjDu => unreachable!(),
        Ingredient::DjDx => fd_directional_floored(
            &name,
            |e| Ok(objective_j(&moved(e).mesh, &model, u)?.j),
            g.partial.dot(&v),
            cancellation_floor(&g.partial, &v),
            &grid,
            Scheme::Central,
        ),
        Ingredient::Stiffness => fd_directional_floored(
            &name,
            |e| stiffness_form(&moved(e).mesh, &problem.elastic, lam, u),
            g.stiffness_term.dot(&v),
            cancellation_floor(&g.stiffness_term, &v),
            &grid,
            Scheme::Central,
        ),
        Ingredient::VolumeLoad => {
            let load = LoadCase {
                traction: Traction::None,
                ..problem.load
            };
            fd_directional_floored(
                &name,
                |e| Ok(assemble_load(&moved(e).mesh, &load)?.dot(lam)),
                g.volume_term.dot(&v),
                cancellation_floor(&g.volume_term, &v),
                &grid,
                Scheme::Central,
            )
        }
        Ingredient::SurfaceLoad => {
            let load = LoadCase {
                volume: VolumeForce::None,
                ..problem.load
            };
            fd_directional_floored(
                &name,
                |e| Ok(assemble_load(&moved(e).mesh, &load)?.dot(lam)),
                g.surface_term.dot(&v),
                cancellation_floor(&g.surface_term, &v),
                &grid,
                Scheme::Central,
            )
        }
        Ingredient::Total => fd_directional_floored(
            &name,
            |e| moved(e).objective(),
            g.dj_dx.dot(&v),
            cancellation_floor(&g.dj_dx, &v),
            &grid,
            Scheme::Central,
        ),
    }
}

/// Runs every registered ingredient along every requested direction.
pub fn run_suite(
    problem: &Problem,
    directions: &[Direction],
    thresholds: &Thresholds,
) -> Result<SuiteReport> {
    let analysis = problem.analyze()?;
    let mut entries = Vec::new();
    let mut missing = Vec::new();
    for ingredient in Ingredient::ALL {
        let Some(&threshold) = thresholds.0.get(&ingredient) else {
            missing.push(ingredient);
            continue;
        };
        for &dir in directions.iter().filter(|d| ingredient.applies(**d)) {
            let report = check_ingredient(problem, &analysis, ingredient, dir, None)?;
            entries.push(SuiteEntry {
                ingredient,
                direction: dir,
                threshold,
                passed: report.passes(threshold),
                report,
            });
        }
    }
    Ok(SuiteReport { entries, missing })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cancellation_floor_only_for_vanishing_sums() {
        let g = NodalField(vec![Vector3::new(1.0, 0.0, 0.0), Vector3::new(-1.0, 0.0, 0.0)]);
        let v = NodalField(vec![Vector3::new(1.0, 0.0, 0.0); 2]);
        assert_eq!(cancellation_floor(&g, &v), 2.0);
        let w = NodalField(vec![Vector3::new(1.0, 0.0, 0.0), Vector3::zeros()]);
        assert_eq!(cancellation_floor(&g, &w), 0.0);
        assert!((relative_error_floored(0.0, 1e-9, 2.0) - 5e-10).abs() < 1e-24);
        assert!((relative_error(1.0, 2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn quadratic_functional() {
        let x = random_field(7, 1);
        let v = random_field(7, 2);
        let analytic = 2.0 * x.dot(&v);
        let r = fd_directional("quad", |e| Ok(x.axpy(e, &v).dot(&x.axpy(e, &v))), analytic, &[1e-4], Scheme::Central)
            .unwrap();
        assert!(r.best_error < 1e-10, "{}", r.best_error);
        let r = fd_directional("quad", |e| Ok(x.axpy(e, &v).dot(&x.axpy(e, &v))), analytic, &eps_grid(1e-2, 8), Scheme::Forward)
            .unwrap();
        assert!(r.best_error < 1e-3);
        assert!(r.plateau);
    }

    #[test]
    fn lucky_cancellation_has_no_plateau() {
        // error curve with a single sharp dip
        let errs = [1e-2, 1e-2, 1e-9, 1e-2, 1e-2];
        let grid = eps_grid(1.0, 5);
        let r = fd_directional(
            "dip",
            |e| {
                let k = grid.iter().position(|g| *g == e.abs()).unwrap();
                Ok(e * (1.0 + errs[k]))
            },
            1.0,
            &grid,
            Scheme::Central,
        )
        .unwrap();
        assert!(r.best_error < 1e-8);
        assert!(!r.plateau);
        assert!(!r.passes(1e-3));
        assert!(r.passes(2e-2));
    }

    #[test]
    fn degenerate_steps_are_skipped() {
        let r = fd_directional(
            "inv",
            |e| {
                if e.abs() > 0.1 {
                    Err(Error::DegenerateElement { element: 0, det: -1.0 })
                } else {
                    Ok(3.0 * e)
                }
            },
            3.0,
            &[1.0, 0.05, 0.025],
            Scheme::Central,
        )
        .unwrap();
        assert_eq!(r.skipped(), vec![1.0]);
        assert!(r.best_error < 1e-14);
        assert!(r.to_csv().contains("skipped"));
    }

    #[test]
    fn random_fields_are_reproducible() {
        assert_eq!(random_field(5, SEED), random_field(5, SEED));
        assert_ne!(random_field(5, SEED), random_field(5, SEED + 1));
    }
}
