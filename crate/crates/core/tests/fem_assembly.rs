use lcf_shape::fem::{
    apply_dirichlet, assemble_load, assemble_stiffness, clamped, reactions, solve, solve_state, Constraint,
    ElasticMaterial, LoadCase, SolverSettings, Traction, VolumeForce,
};
use lcf_shape::lcf::stress_at;
use lcf_shape::mesh::{ElementKind, QuadratureSettings};
use lcf_shape::surrogate::{box_mesh, cantilever, ring, rod_problem, RingSpec, RodSpec, ROTOR_OMEGA};
use lcf_shape::validation::random_field;
use lcf_shape::NodalField;
use nalgebra::Vector3;

const KINDS: [ElementKind; 3] = [ElementKind::Tet4, ElementKind::Hex8, ElementKind::Hex20];

fn material() -> ElasticMaterial {
    ElasticMaterial::aluminium()
}

#[test]
fn stiffness_is_symmetric() {
    for kind in KINDS {
        let m = box_mesh(kind, [2.0, 1.0, 1.5], [2, 2, 2]).unwrap();
        let b = assemble_stiffness(&m, &material()).unwrap();
        assert!(b.symmetry_error() <= 1e-10 * b.frobenius_norm(), "{kind:?}");
    }
}

#[test]
fn rigid_motions_are_in_the_kernel() {
    let w = Vector3::new(0.3, -0.7, 0.5);
    for kind in KINDS {
        let m = box_mesh(kind, [2.0, 1.0, 1.5], [2, 1, 2]).unwrap();
        let b = assemble_stiffness(&m, &material()).unwrap();
        let scale = b.frobenius_norm();
        let t = NodalField::from_fn(m.n_nodes(), |_| Vector3::new(1.0, 2.0, -1.0));
        let r = NodalField::from_fn(m.n_nodes(), |i| w.cross(&m.nodes()[i]));
        for f in [t, r] {
            let res = b.mul_field(&f);
            assert!(res.norm() <= 1e-9 * scale * f.norm(), "{kind:?}: {}", res.norm() / (scale * f.norm()));
        }
    }
}

#[test]
fn uniaxial_patch_test_is_exact() {
    let (lx, ly, lz, d) = (2.0, 1.0, 1.0, 1e-3);
    let mat = material();
    for kind in KINDS {
        let m = box_mesh(kind, [lx, ly, lz], [2, 2, 2]).unwrap();
        let tol = 1e-9;
        let mut cons = Vec::new();
        for (i, x) in m.nodes().iter().enumerate() {
            if x.x.abs() < tol {
                cons.push(Constraint { node: i, component: 0, value: 0.0 });
            }
            if (x.x - lx).abs() < tol {
                cons.push(Constraint { node: i, component: 0, value: d });
            }
            if x.y.abs() < tol {
                cons.push(Constraint { node: i, component: 1, value: 0.0 });
            }
            if x.z.abs() < tol {
                cons.push(Constraint { node: i, component: 2, value: 0.0 });
            }
        }
        let b = assemble_stiffness(&m, &mat).unwrap();
        let sys = apply_dirichlet(&b, &NodalField::zeros(m.n_nodes()), &cons);
        let u = solve(&sys, &SolverSettings::default()).unwrap();
        let strain = d / lx;
        let nu = mat.poisson_ratio;
        for (i, x) in m.nodes().iter().enumerate() {
            let exact = Vector3::new(strain * x.x, -nu * strain * x.y, -nu * strain * x.z);
            assert!((u[i] - exact).norm() <= 1e-8 * d, "{kind:?} node {i}");
        }
        let sxx = mat.youngs_modulus * strain;
        for e in 0..m.n_elements() {
            for p in &m.reference().volume {
                let s = stress_at(&m, &mat, &u, e, &p.xi).unwrap();
                let mut exact = nalgebra::Matrix3::zeros();
                exact[(0, 0)] = sxx;
                assert!((s - exact).norm() <= 1e-8 * sxx, "{kind:?}");
            }
        }
    }
}

#[test]
fn single_element_cantilever_reactions_balance() {
    for kind in [ElementKind::Hex8, ElementKind::Hex20] {
        let m = cantilever(kind, [1.0, 1.0, 1.0], [1, 1, 1]).unwrap();
        let load = LoadCase {
            volume: VolumeForce::None,
            traction: Traction::FixedDensity { density: [0.0, 0.0, -2.0] },
        };
        let (state, _) = solve_state(&m, &material(), &load, &SolverSettings::default()).unwrap();
        let r = reactions(&state.stiffness, &state.displacement, &state.load);
        let total: Vector3<f64> = r.iter().sum();
        // reaction forces balance the unit-area traction of -2 in z
        assert!((total - Vector3::new(0.0, 0.0, 2.0)).norm() < 1e-9, "{kind:?}: {total}");
        for i in 0..m.n_nodes() {
            if !m.dirichlet_nodes().contains(&i) {
                assert!(r[i].norm() < 1e-9, "{kind:?}: free node {i} has residual");
            }
        }
    }
}

#[test]
fn constrained_stiffness_is_coercive() {
    let m = cantilever(ElementKind::Hex8, [3.0, 1.0, 1.0], [3, 1, 1]).unwrap();
    let b = assemble_stiffness(&m, &material()).unwrap();
    let cons = clamped(&m);
    for seed in 0..20 {
        let mut v = random_field(m.n_nodes(), seed);
        for c in &cons {
            v[c.node][c.component] = 0.0;
        }
        assert!(b.mul_field(&v).dot(&v) > 0.0);
    }
}

#[test]
fn work_balance_and_linearity() {
    let mut p = rod_problem(&RodSpec { axial_divisions: 6, ..RodSpec::default() }).unwrap();
    let (s1, _) = solve_state(&p.mesh, &p.elastic, &p.load, &p.solver).unwrap();
    let u = &s1.displacement;
    let work = u.dot(&s1.load);
    let energy = s1.stiffness.mul_field(u).dot(u);
    assert!((work - energy).abs() <= 1e-10 * energy.abs());
    p.load.traction = Traction::ForceControlled { force: [2.5 * 18.85, 0.0, 0.0] };
    let (s2, _) = solve_state(&p.mesh, &p.elastic, &p.load, &p.solver).unwrap();
    let diff = s2.displacement.axpy(-2.5, u);
    assert!(diff.norm() <= 1e-10 * s2.displacement.norm());
}

#[test]
fn force_controlled_density_on_rod_end() {
    let p = rod_problem(&RodSpec::default()).unwrap();
    let g = p.load.traction_density(&p.mesh).unwrap();
    let area = p.mesh.area(p.mesh.traction_faces()).unwrap();
    assert!((g.x * area - 18.85).abs() < 1e-12);
    let f = assemble_load(&p.mesh, &p.load).unwrap();
    let total: Vector3<f64> = f.iter().sum();
    assert!((total - Vector3::new(18.85, 0.0, 0.0)).norm() < 1e-12);
    // 18.85 N over 1.57 mm^2 is a 12 MPa nominal stress
    assert!((18.85f64 / 1.57 - 12.0).abs() < 0.01);
}

#[test]
fn centrifugal_load_is_radial_and_matches_fine_quadrature() {
    let (m, _) = ring(&RingSpec::default()).unwrap();
    let rho = ElasticMaterial::aluminium().density;
    let load = LoadCase {
        volume: VolumeForce::Centrifugal { omega: ROTOR_OMEGA, density: rho },
        traction: Traction::None,
    };
    let f = assemble_load(&m, &load).unwrap();
    let norm = f.norm();
    assert!(f.iter().map(|v| v.x.abs()).sum::<f64>() <= 1e-10 * norm);
    let total: Vector3<f64> = f.iter().sum();
    assert!(total.norm() <= 1e-10 * norm);
    for (x, fi) in m.nodes().iter().zip(f.iter()) {
        let radial = Vector3::new(0.0, x.y, x.z);
        if fi.norm() > 1e-12 * norm {
            // nodal forces of a lumped radial field are radial up to sector skew
            assert!(fi.dot(&radial) > 0.0);
        }
    }
    let fine = m
        .with_quadrature(&QuadratureSettings { volume_points: Some(27), surface_points: None })
        .unwrap();
    let f27 = assemble_load(&fine, &load).unwrap();
    assert!(f27.axpy(-1.0, &f).norm() <= 1e-8 * norm);
    // sum_j F_j . (0, y_j, z_j) = rho w^2 int r^2 dV over the straight-edged
    // 14-gon annulus; each triangle (O, a, b) has polar moment A/6 (a.a + b.b + a.b)
    let w2 = rho * ROTOR_OMEGA * ROTOR_OMEGA;
    let moment: f64 = m.nodes().iter().zip(f.iter()).map(|(x, fi)| fi.y * x.y + fi.z * x.z).sum();
    let spec = RingSpec::default();
    let n = (spec.sectors * spec.sector_divisions) as f64;
    let alpha = 2.0 * std::f64::consts::PI / n;
    let polar = |r: f64| n * r.powi(4) * alpha.sin() * (2.0 + alpha.cos()) / 12.0;
    let exact = w2 * spec.thickness * (polar(spec.outer_radius) - polar(spec.inner_radius));
    assert!((moment - exact).abs() <= 1e-10 * exact, "{moment} vs {exact}");
}

/// Area-averaged displacement of the loaded end face.
fn end_face_mean(spec: RodSpec) -> Vector3<f64> {
    let p = rod_problem(&spec).unwrap();
    let (s, _) = solve_state(&p.mesh, &p.elastic, &p.load, &p.solver).unwrap();
    let u = &s.displacement;
    let mut sum = Vector3::zeros();
    let mut area = 0.0;
    for &face in p.mesh.traction_faces() {
        for fp in &p.mesh.reference().faces[face.face].points {
            let w = fp.point.weight * p.mesh.face_point(face, fp).unwrap().sqrt_det;
            let at: Vector3<f64> = p
                .mesh
                .connectivity(face.element)
                .iter()
                .zip(&fp.point.shape)
                .map(|(&n, &sh)| u[n] * sh)
                .sum();
            sum += at * w;
            area += w;
        }
    }
    sum / area
}

#[test]
fn rod_tip_converges_under_refinement() {
    let coarse = end_face_mean(RodSpec::default());
    let fine = end_face_mean(RodSpec { section_divisions: 2, axial_divisions: 30, ..RodSpec::default() });
    assert!((coarse - fine).norm() / fine.norm() < 0.02, "{coarse} vs {fine}");
}
