//! Structured surrogate geometries: boxes, a bent circular rod, a rotor-like
//! ring and a spherical shell.
//!
//! Every generator fills one or more parametric blocks `[0,1]^3 -> R^3` with
//! elements and merges coincident nodes, so curved HEX20 edges follow the
//! exact geometry at the midside nodes.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::fem::{ElasticMaterial, LoadCase, SolverSettings, Traction, VolumeForce};
use crate::lcf::LcfMaterial;
use crate::mesh::{ElementKind, FaceRef, Mesh, QuadratureSettings};
use crate::problem::Problem;

/// Kuhn split of a hex cell (corner numbering as in HEX8) into 6 tetrahedra.
const KUHN_TETS: [[usize; 4]; 6] = [
    [0, 1, 2, 6],
    [0, 2, 3, 6],
    [0, 3, 7, 6],
    [0, 7, 4, 6],
    [0, 4, 5, 6],
    [0, 5, 1, 6],
];

struct NodeIndex {
    cell: f64,
    tol: f64,
    grid: HashMap<[i64; 3], Vec<usize>>,
    nodes: Vec<Vector3<f64>>,
}

impl NodeIndex {
    fn new(scale: f64) -> Self {
        NodeIndex {
            cell: 1e-6 * scale,
            tol: 1e-9 * scale,
            grid: HashMap::new(),
            nodes: Vec::new(),
        }
    }

    fn key(&self, p: &Vector3<f64>) -> [i64; 3] {
        [
            (p.x / self.cell).floor() as i64,
            (p.y / self.cell).floor() as i64,
            (p.z / self.cell).floor() as i64,
        ]
    }

    fn insert(&mut self, p: Vector3<f64>) -> usize {
        let k = self.key(&p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.grid.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) {
                        if let Some(&id) = ids.iter().find(|&&i| (self.nodes[i] - p).norm() < self.tol) {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.nodes.len();
        self.nodes.push(p);
        self.grid.entry(k).or_default().push(id);
        id
    }
}

/// Incremental builder of structured multi-block meshes.
pub struct BlockMeshBuilder {
    kind: ElementKind,
    index: NodeIndex,
    elements: Vec<Vec<usize>>,
}

impl BlockMeshBuilder {
    /// `scale` is a typical length of the geometry, used for node merging.
    pub fn new(kind: ElementKind, scale: f64) -> Self {
        BlockMeshBuilder {
            kind,
            index: NodeIndex::new(scale),
            elements: Vec::new(),
        }
    }

    /// Fills the image of `[0,1]^3` under `map` with `div` elements per
    /// parameter direction; returns the range of new element ids.
    pub fn add_block(
        &mut self,
        map: impl Fn(Vector3<f64>) -> Vector3<f64>,
        div: [usize; 3],
    ) -> std::ops::Range<usize> {
        let start = self.elements.len();
        for k in 0..div[2] {
            for j in 0..div[1] {
                for i in 0..div[0] {
                    let cell = [i, j, k];
                    let at = |c: Vector3<f64>| {
                        let p = Vector3::new(
                            (cell[0] as f64 + 0.5 * (c.x + 1.0)) / div[0] as f64,
                            (cell[1] as f64 + 0.5 * (c.y + 1.0)) / div[1] as f64,
                            (cell[2] as f64 + 0.5 * (c.z + 1.0)) / div[2] as f64,
                        );
                        map(p)
                    };
                    match self.kind {
                        ElementKind::Tet4 => self.add_tets(&at),
                        kind => self.add_hex(kind, &at),
                    }
                }
            }
        }
        start..self.elements.len()
    }

    fn add_hex(&mut self, kind: ElementKind, at: &impl Fn(Vector3<f64>) -> Vector3<f64>) {
        let coords = |flip: bool| -> Vec<Vector3<f64>> {
            (0..kind.n_nodes())
                .map(|i| {
                    let mut c = kind.node_coords(i);
                    if flip {
                        c.x = -c.x;
                    }
                    at(c)
                })
                .collect()
        };
        let mut pts = coords(false);
        if jacobian_det(kind, &pts, &Vector3::zeros()) < 0.0 {
            pts = coords(true);
        }
        let conn = pts.into_iter().map(|p| self.index.insert(p)).collect();
        self.elements.push(conn);
    }

    fn add_tets(&mut self, at: &impl Fn(Vector3<f64>) -> Vector3<f64>) {
        let hex = ElementKind::Hex8;
        let corners: Vec<Vector3<f64>> = (0..8).map(|i| at(hex.node_coords(i))).collect();
        let ids: Vec<usize> = corners.iter().map(|&p| self.index.insert(p)).collect();
        for t in KUHN_TETS {
            let mut conn: Vec<usize> = t.iter().map(|&l| ids[l]).collect();
            let pts: Vec<Vector3<f64>> = t.iter().map(|&l| corners[l]).collect();
            if jacobian_det(ElementKind::Tet4, &pts, &Vector3::new(0.25, 0.25, 0.25)) < 0.0 {
                conn.swap(1, 2);
            }
            self.elements.push(conn);
        }
    }

    pub fn build(
        self,
        dirichlet: impl Fn(&Vector3<f64>) -> bool,
        traction: impl Fn(&Vector3<f64>) -> bool,
        quadrature: &QuadratureSettings,
    ) -> Result<Mesh> {
        let mesh = Mesh::new(
            self.kind,
            self.index.nodes,
            self.elements,
            vec![],
            vec![],
            quadrature,
        )?;
        let d = mesh.nodes_where(&dirichlet);
        let t = mesh.faces_where(&traction);
        mesh.with_sets(d, t)
    }
}

fn jacobian_det(kind: ElementKind, pts: &[Vector3<f64>], xi: &Vector3<f64>) -> f64 {
    let grads = kind.shape_gradients(xi);
    let mut j = Matrix3::zeros();
    for (p, g) in pts.iter().zip(&grads) {
        j += p * g.transpose();
    }
    j.determinant()
}

/// Box `[0, lx] x [0, ly] x [0, lz]` with `div` elements per direction and
/// no boundary sets.
pub fn box_mesh(kind: ElementKind, size: [f64; 3], div: [usize; 3]) -> Result<Mesh> {
    let scale = size.iter().cloned().fold(0.0, f64::max);
    let mut b = BlockMeshBuilder::new(kind, scale);
    b.add_block(|p| Vector3::new(p.x * size[0], p.y * size[1], p.z * size[2]), div);
    b.build(|_| false, |_| false, &QuadratureSettings::default())
}

/// Box clamped at `x = 0` with the `x = lx` side as the traction set.
pub fn cantilever(kind: ElementKind, size: [f64; 3], div: [usize; 3]) -> Result<Mesh> {
    let scale = size.iter().cloned().fold(0.0, f64::max);
    let tol = 1e-9 * scale;
    let mut b = BlockMeshBuilder::new(kind, scale);
    b.add_block(|p| Vector3::new(p.x * size[0], p.y * size[1], p.z * size[2]), div);
    b.build(
        |p| p.x.abs() < tol,
        |p| (p.x - size[0]).abs() < tol,
        &QuadratureSettings::default(),
    )
}

/// Geometry of the bent rod surrogate.
#[derive(Debug, Clone, Copy)]
pub struct RodSpec {
    pub kind: ElementKind,
    /// Axial extent (mm).
    pub length: f64,
    /// Lateral offset of the free end (mm).
    pub height: f64,
    pub diameter: f64,
    /// Elements along each side of the 5-block cross-section.
    pub section_divisions: usize,
    pub axial_divisions: usize,
}

impl Default for RodSpec {
    fn default() -> Self {
        RodSpec {
            kind: ElementKind::Hex20,
            length: 6.0,
            height: 3.0,
            diameter: 1.0,
            section_divisions: 1,
            axial_divisions: 12,
        }
    }
}

impl RodSpec {
    pub fn n_elements(&self) -> usize {
        5 * self.section_divisions * self.section_divisions * self.axial_divisions
    }

    /// Centerline point and its in-plane unit normal at axial coordinate `s`.
    fn centerline(&self, s: f64) -> (Vector3<f64>, Vector3<f64>) {
        let k = PI / self.length;
        let y = 0.5 * self.height * (1.0 - (k * s).cos());
        let dy = 0.5 * self.height * k * (k * s).sin();
        let n = Vector3::new(-dy, 1.0, 0.0) / (1.0 + dy * dy).sqrt();
        (Vector3::new(s, y, 0.0), n)
    }
}

/// S-shaped circular rod from `x = 0` (clamped) to `x = length` (loaded end
/// face), rising by `height` in `y`.
pub fn bent_rod(spec: &RodSpec) -> Result<Mesh> {
    if spec.section_divisions == 0 || spec.axial_divisions == 0 {
        return Err(Error::InvalidInput("rod divisions must be positive".into()));
    }
    let r = 0.5 * spec.diameter;
    let a = 0.5 * r;
    let mut b = BlockMeshBuilder::new(spec.kind, spec.length);
    let n = spec.section_divisions;
    let sweep = |sec: [f64; 2], w: f64| {
        let (c, nrm) = spec.centerline(w * spec.length);
        c + nrm * sec[0] + Vector3::z() * sec[1]
    };
    b.add_block(
        |p| sweep([a * (2.0 * p.x - 1.0), a * (2.0 * p.y - 1.0)], p.z),
        [n, n, spec.axial_divisions],
    );
    for q in 0..4 {
        let phi = q as f64 * 0.5 * PI;
        let (c, s) = (phi.cos(), phi.sin());
        b.add_block(
            move |p| {
                let inner = [a, a * (2.0 * p.y - 1.0)];
                let th = -0.25 * PI + 0.5 * PI * p.y;
                let outer = [r * th.cos(), r * th.sin()];
                let x = (1.0 - p.x) * inner[0] + p.x * outer[0];
                let y = (1.0 - p.x) * inner[1] + p.x * outer[1];
                sweep([c * x - s * y, s * x + c * y], p.z)
            },
            [n, n, spec.axial_divisions],
        );
    }
    let tol = 1e-9 * spec.length;
    let len = spec.length;
    b.build(
        |p| p.x.abs() < tol,
        |p| (p.x - len).abs() < tol,
        &QuadratureSettings::default(),
    )
}

/// Geometry of the rotor-like ring (rotation axis `x`).
#[derive(Debug, Clone, Copy)]
pub struct RingSpec {
    pub kind: ElementKind,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub thickness: f64,
    /// Number of identical sectors; 7 mirrors a seven-segment rotor.
    pub sectors: usize,
    /// Sectors actually meshed (`sectors` for the full ring).
    pub meshed_sectors: usize,
    pub radial_divisions: usize,
    pub sector_divisions: usize,
    pub axial_divisions: usize,
}

impl Default for RingSpec {
    fn default() -> Self {
        RingSpec {
            kind: ElementKind::Hex8,
            inner_radius: 10.0,
            outer_radius: 43.5,
            thickness: 8.0,
            sectors: 7,
            meshed_sectors: 7,
            radial_divisions: 3,
            sector_divisions: 2,
            axial_divisions: 1,
        }
    }
}

/// Annular rotor clamped at the bore; element ids are contiguous per sector
/// (`elements_per_sector` each).
pub fn ring(spec: &RingSpec) -> Result<(Mesh, usize)> {
    let mut b = BlockMeshBuilder::new(spec.kind, spec.outer_radius);
    let sector_angle = 2.0 * PI / spec.sectors as f64;
    let mut per_sector = 0;
    for s in 0..spec.meshed_sectors {
        let th0 = s as f64 * sector_angle;
        let range = b.add_block(
            |p| {
                let r = spec.inner_radius + p.x * (spec.outer_radius - spec.inner_radius);
                let th = th0 + p.y * sector_angle;
                Vector3::new(p.z * spec.thickness, r * th.cos(), r * th.sin())
            },
            [spec.radial_divisions, spec.sector_divisions, spec.axial_divisions],
        );
        per_sector = range.len();
    }
    let tol = 1e-9 * spec.outer_radius;
    let ri = spec.inner_radius;
    let mesh = b.build(
        |p| ((p.y * p.y + p.z * p.z).sqrt() - ri).abs() < tol,
        |_| false,
        &QuadratureSettings::default(),
    )?;
    Ok((mesh, per_sector))
}

/// Spherical shell between `inner` and `outer` radius built from six
/// projected cube blocks; clamped on the inner surface.
pub fn spherical_shell(kind: ElementKind, inner: f64, outer: f64, div: usize) -> Result<Mesh> {
    let mut b = BlockMeshBuilder::new(kind, outer);
    for axis in 0..3 {
        for sign in [-1.0, 1.0] {
            b.add_block(
                |p| {
                    let mut c = Vector3::zeros();
                    c[axis] = sign;
                    c[(axis + 1) % 3] = 2.0 * p.x - 1.0;
                    c[(axis + 2) % 3] = 2.0 * p.y - 1.0;
                    let r = inner + p.z * (outer - inner);
                    c.normalize() * r
                },
                [div, div, 1],
            );
        }
    }
    let tol = 1e-9 * outer;
    b.build(
        |p| (p.norm() - inner).abs() < tol,
        |_| false,
        &QuadratureSettings::default(),
    )
}

/// Faces of `mesh` whose element lies in `elements`.
pub fn faces_of_elements(mesh: &Mesh, elements: std::ops::Range<usize>) -> Vec<FaceRef> {
    mesh.surface_faces()
        .iter()
        .copied()
        .filter(|f| elements.contains(&f.element))
        .collect()
}

/// Total tensile force on the rod's free end (N).
pub const ROD_FORCE: f64 = 18.85;

/// 110000 rpm in rad/s.
pub const ROTOR_OMEGA: f64 = 110_000.0 * 2.0 * PI / 60.0;

/// Bent rod in aluminium, clamped at `x = 0` and pulled along `x` with a
/// force-controlled traction on the free end.
pub fn rod_problem(spec: &RodSpec) -> Result<Problem> {
    Ok(Problem {
        mesh: bent_rod(spec)?,
        elastic: ElasticMaterial::aluminium(),
        lcf: LcfMaterial::almgsi6082(),
        load: LoadCase {
            volume: VolumeForce::None,
            traction: Traction::ForceControlled {
                force: [ROD_FORCE, 0.0, 0.0],
            },
        },
        solver: SolverSettings::default(),
    })
}

/// Ring spinning at 110000 rpm about `x`, clamped at the bore.
pub fn ring_problem(spec: &RingSpec) -> Result<(Problem, usize)> {
    let (mesh, per_sector) = ring(spec)?;
    let elastic = ElasticMaterial::aluminium();
    Ok((
        Problem {
            mesh,
            elastic,
            lcf: LcfMaterial::almgsi6082(),
            load: LoadCase {
                volume: VolumeForce::Centrifugal {
                    omega: ROTOR_OMEGA,
                    density: elastic.density,
                },
                traction: Traction::None,
            },
            solver: SolverSettings::default(),
        },
        per_sector,
    ))
}
