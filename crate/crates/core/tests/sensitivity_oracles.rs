use lcf_shape::fem::{
    assemble_load, assemble_stiffness, ElasticMaterial, LoadCase, SolverSettings, Traction, VolumeForce,
};
use lcf_shape::lcf::LcfMaterial;
use lcf_shape::mesh::{ElementKind, Mesh};
use lcf_shape::problem::Problem;
use lcf_shape::sensitivity::{
    adjoint_stiffness_contraction, assemble_nodal, dj_du_local, dj_dx_local, normal_field, normal_project,
    surface_load_contraction, surface_normals, volume_load_contraction, LocalGradientBatch,
};
use lcf_shape::surrogate::{cantilever, ring_problem, rod_problem, spherical_shell, RingSpec, RodSpec};
use lcf_shape::validation::{
    check_ingredient, default_grid, fd_directional, matrix_fd, random_field, Direction, Ingredient, Scheme,
    Thresholds,
};
use lcf_shape::NodalField;
use nalgebra::Vector3;
use proptest::prelude::*;

fn block_problem(kind: ElementKind, div: [usize; 3], load: LoadCase) -> Problem {
    Problem {
        mesh: cantilever(kind, [3.0, 1.0, 1.0], div).unwrap(),
        elastic: ElasticMaterial::aluminium(),
        lcf: LcfMaterial::almgsi6082(),
        load,
        solver: SolverSettings::default(),
    }
}

fn mixed_load() -> LoadCase {
    LoadCase {
        volume: VolumeForce::Constant { force: [0.0, -4.0, 1.5] },
        traction: Traction::FixedDensity { density: [5.0, -40.0, 12.0] },
    }
}

fn check_all(p: &Problem, ingredients: &[Ingredient], dirs: &[Direction]) {
    let analysis = p.analyze().unwrap();
    let thr = Thresholds::default();
    for &ing in ingredients {
        for &dir in dirs.iter().filter(|d| ing.applies(**d)) {
            let r = check_ingredient(p, &analysis, ing, dir, None).unwrap();
            let tight = if ing == Ingredient::Total { 1e-6 } else { thr.0[&ing].min(1e-6) };
            assert!(r.passes(tight), "{}: best {:.3e}", r.name, r.best_error);
        }
    }
}

#[test]
fn single_element_ingredients_match_differences() {
    for kind in [ElementKind::Hex8, ElementKind::Hex20] {
        let p = block_problem(kind, [1, 1, 1], mixed_load());
        check_all(&p, &Ingredient::ALL, &[Direction::Random1, Direction::Random2, Direction::Normal]);
    }
}

#[test]
fn force_controlled_ingredients_match_differences() {
    let load = LoadCase {
        volume: VolumeForce::None,
        traction: Traction::ForceControlled { force: [60.0, -25.0, 10.0] },
    };
    let p = block_problem(ElementKind::Hex20, [2, 1, 1], load);
    check_all(&p, &Ingredient::ALL, &Direction::ALL);
}

#[test]
fn centrifugal_ingredients_match_differences() {
    let (p, _) = ring_problem(&RingSpec { meshed_sectors: 2, ..RingSpec::default() }).unwrap();
    check_all(
        &p,
        &[Ingredient::VolumeLoad, Ingredient::Stiffness, Ingredient::DjDx, Ingredient::Total],
        &[Direction::Random1, Direction::Scaling],
    );
}

#[test]
fn stiffness_contraction_matches_assembled_matrices() {
    let p = block_problem(ElementKind::Hex8, [1, 1, 1], mixed_load());
    let u = random_field(p.mesh.n_nodes(), 11);
    let lam = random_field(p.mesh.n_nodes(), 12);
    let v = random_field(p.mesh.n_nodes(), 13);
    let analytic = adjoint_stiffness_contraction(&p.mesh, &p.elastic, &u, &lam).unwrap().dot(&v);
    let best = default_grid(p.mesh.characteristic_length())
        .iter()
        .map(|&e| {
            let fd = matrix_fd(|m| assemble_stiffness(m, &p.elastic), &p.mesh, &v, e, &lam, &u).unwrap();
            (fd - analytic).abs() / analytic.abs()
        })
        .fold(f64::INFINITY, f64::min);
    assert!(best < 1e-6, "{best}");
}

#[test]
fn stiffness_contraction_is_symmetric_and_bilinear() {
    let p = block_problem(ElementKind::Hex20, [2, 1, 1], mixed_load());
    let n = p.mesh.n_nodes();
    let (u, l1, l2) = (random_field(n, 1), random_field(n, 2), random_field(n, 3));
    let c = |a: &NodalField, b: &NodalField| adjoint_stiffness_contraction(&p.mesh, &p.elastic, a, b).unwrap();
    let ab = c(&u, &l1);
    assert!(c(&l1, &u).axpy(-1.0, &ab).norm() <= 1e-12 * ab.norm());
    let combo = c(&u, &l1.scaled(2.0).axpy(-3.0, &l2));
    let expect = ab.scaled(2.0).axpy(-3.0, &c(&u, &l2));
    assert!(combo.axpy(-1.0, &expect).norm() <= 1e-12 * expect.norm());
}

#[test]
fn vanishing_inputs_give_vanishing_terms() {
    let p = block_problem(ElementKind::Hex8, [2, 1, 1], mixed_load());
    let n = p.mesh.n_nodes();
    let zero = NodalField::zeros(n);
    let u = random_field(n, 5);
    let m = p.model().unwrap();
    assert_eq!(adjoint_stiffness_contraction(&p.mesh, &p.elastic, &u, &zero).unwrap().norm(), 0.0);
    assert_eq!(volume_load_contraction(&p.mesh, &p.load, &zero).unwrap().norm(), 0.0);
    assert_eq!(surface_load_contraction(&p.mesh, &p.load, &zero).unwrap().norm(), 0.0);
    assert_eq!(assemble_nodal(&p.mesh, &dj_du_local(&p.mesh, &m, &zero).unwrap()).norm(), 0.0);
    assert_eq!(assemble_nodal(&p.mesh, &dj_dx_local(&p.mesh, &m, &zero).unwrap()).norm(), 0.0);
}

#[test]
fn zero_adjoint_reduces_to_partial() {
    let p = block_problem(ElementKind::Hex8, [2, 1, 1], mixed_load());
    let a = p.analyze_with(true).unwrap();
    assert_eq!(a.adjoint.norm(), 0.0);
    assert_eq!(a.gradient.dj_dx, a.gradient.partial);
}

#[test]
fn nodal_assembly_counts_incidences() {
    let m = cantilever(ElementKind::Hex8, [2.0, 2.0, 2.0], [2, 2, 2]).unwrap();
    let batch = LocalGradientBatch {
        elements: (0..m.n_elements()).collect(),
        values: vec![vec![Vector3::new(1.0, 0.0, 0.0); 8]; m.n_elements()],
    };
    let f = assemble_nodal(&m, &batch);
    let mut count = vec![0.0; m.n_nodes()];
    for e in 0..m.n_elements() {
        for &n in m.connectivity(e) {
            count[n] += 1.0;
        }
    }
    for (v, c) in f.iter().zip(&count) {
        assert_eq!(v.x, *c);
    }
    let centre = m.nodes().iter().position(|x| (x - Vector3::new(1.0, 1.0, 1.0)).norm() < 1e-12).unwrap();
    assert_eq!(f[centre].x, 8.0);
    let both = assemble_nodal(&m, &batch.union(&batch));
    assert_eq!(both, f.scaled(2.0));
}

#[test]
fn translation_leaves_objective_stationary() {
    let p = block_problem(ElementKind::Hex20, [2, 1, 1], mixed_load());
    let g = p.analyze().unwrap().gradient;
    for v in [Vector3::new(1.0, 0.0, 0.0), Vector3::new(0.3, -0.5, 0.8)] {
        let field = NodalField::from_fn(p.mesh.n_nodes(), |_| v);
        let d = g.dj_dx.dot(&field);
        assert!(d.abs() <= 1e-8 * g.dj_dx.norm() * field.norm(), "{}", d.abs() / (g.dj_dx.norm() * field.norm()));
    }
}

#[test]
fn force_controlled_total_force_is_stationary() {
    let load = LoadCase {
        volume: VolumeForce::None,
        traction: Traction::ForceControlled { force: [60.0, -25.0, 10.0] },
    };
    let p = block_problem(ElementKind::Hex20, [2, 1, 1], load);
    let n = p.mesh.n_nodes();
    // constant multiplier extracts d(total force)/dX
    for k in 0..3 {
        let mut e = Vector3::zeros();
        e[k] = 1.0;
        let lam = NodalField::from_fn(n, |_| e);
        let t = surface_load_contraction(&p.mesh, &p.load, &lam).unwrap();
        let scale: f64 = 60.0 / p.mesh.characteristic_length();
        assert!(t.max_norm() <= 1e-8 * scale, "{k}: {}", t.max_norm());
    }
    // stretch of the loaded face
    let v = NodalField::from_fn(n, |i| {
        let x = p.mesh.nodes()[i];
        if (x.x - 3.0).abs() < 1e-9 { Vector3::new(0.0, x.y - 0.5, 2.0 * (x.z - 0.5)) } else { Vector3::zeros() }
    });
    let total = |e: f64| -> lcf_shape::Result<f64> {
        let f = assemble_load(&p.perturbed(&v, e).mesh, &p.load)?;
        Ok(f.iter().sum::<Vector3<f64>>().norm())
    };
    let r = fd_directional("total_force", total, 0.0, &[1e-2, 1e-3], Scheme::Central).unwrap();
    for fd in r.fd.iter().flatten() {
        assert!(fd.abs() <= 1e-8 * 65.0, "{fd}");
    }
}

#[test]
fn failure_probability_direction_is_time_independent() {
    let p = block_problem(ElementKind::Hex8, [3, 1, 1], mixed_load());
    let g = p.analyze().unwrap().gradient;
    let unit = |f: NodalField| f.scaled(1.0 / f.norm());
    let d0 = unit(g.dj_dx.clone());
    for t in [1.0, 1e3, 1e6] {
        let d = unit(g.dpof_dx(t));
        assert!(d.axpy(-1.0, &d0).max_norm() <= 1e-12, "{t}");
    }
}

#[test]
fn sphere_normals_are_radial() {
    let cos5 = 5f64.to_radians().cos();
    for kind in [ElementKind::Hex8, ElementKind::Hex20] {
        let m = spherical_shell(kind, 1.0, 1.5, 6).unwrap();
        for (n, nv) in surface_normals(&m).unwrap() {
            let x = m.nodes()[n];
            let radial = if x.norm() > 1.25 { x.normalize() } else { -x.normalize() };
            assert!(nv.dot(&radial) >= cos5, "{kind:?} node {n}");
        }
    }
    let m = spherical_shell(ElementKind::Hex20, 1.0, 1.5, 3).unwrap();
    let normals = surface_normals(&m).unwrap();
    let proj = normal_project(&m, &normal_field(&m).unwrap()).unwrap();
    assert!(proj.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
    let dense = proj.to_dense(m.n_nodes());
    let interior = (0..m.n_nodes()).filter(|i| !normals.contains_key(i)).count();
    assert_eq!(dense.iter().filter(|v| **v == 0.0).count(), interior);
}

/// Moves every node away from the rod centerline within its cross-section.
fn section_enlargement(mesh: &Mesh, spec: &RodSpec) -> NodalField {
    let k = std::f64::consts::PI / spec.length;
    NodalField::from_fn(mesh.n_nodes(), |i| {
        let x = mesh.nodes()[i];
        // nodes sit on planes normal to the centerline, so locate the station by bisection
        let residual = |s: f64| {
            let c = Vector3::new(s, 0.5 * spec.height * (1.0 - (k * s).cos()), 0.0);
            let t = Vector3::new(1.0, 0.5 * spec.height * k * (k * s).sin(), 0.0);
            ((x - c).dot(&t), c)
        };
        let (mut lo, mut hi) = (-0.5, spec.length + 0.5);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid).0 > 0.0 { lo = mid } else { hi = mid }
        }
        x - residual(0.5 * (lo + hi)).1
    })
}

#[test]
fn thickening_the_rod_lowers_the_objective() {
    let spec = RodSpec { axial_divisions: 8, ..RodSpec::default() };
    let p = rod_problem(&spec).unwrap();
    let g = p.analyze().unwrap().gradient;
    let v = section_enlargement(&p.mesh, &spec);
    let analytic = g.dj_dx.dot(&v);
    assert!(analytic < 0.0);
    let j0 = p.objective().unwrap();
    let j1 = p.perturbed(&v, 0.02).objective().unwrap();
    assert!(j1 < j0);
    let r = fd_directional("thicken", |e| p.perturbed(&v, e).objective(), analytic, &default_grid(1.0), Scheme::Central)
        .unwrap();
    assert!(r.passes(1e-2), "{}", r.best_error);
}

#[test]
fn gradient_is_identical_across_thread_counts() {
    let p = rod_problem(&RodSpec { axial_divisions: 6, ..RodSpec::default() }).unwrap();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| p.analyze().unwrap().gradient.dj_dx.to_flat())
    };
    let one = run(1);
    for t in [3, 8] {
        assert!(one.iter().zip(run(t)).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn dj_du_is_a_directional_derivative(seed in 0u64..1000) {
        let p = block_problem(ElementKind::Hex8, [1, 1, 1], mixed_load());
        let a = p.analyze().unwrap();
        let m = p.model().unwrap();
        let u = &a.state.displacement;
        let v = random_field(p.mesh.n_nodes(), seed).scaled(u.max_norm());
        let analytic = a.dj_du.dot(&v);
        let r = fd_directional(
            "dju",
            |e| Ok(lcf_shape::lcf::objective_j(&p.mesh, &m, &u.axpy(e, &v))?.j),
            analytic,
            &default_grid(1.0),
            Scheme::Central,
        ).unwrap();
        prop_assert!(r.passes(1e-6), "{}", r.best_error);
    }
}
