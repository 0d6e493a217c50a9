use std::fmt::Write as _;
use std::path::Path;

use lcf_shape::export::{displacement_csv, gradient_csv, nodal_crack_intensity, nodal_intensity, vtk, PointData};
use lcf_shape::fem::{reactions, solve_state};
use lcf_shape::lcf::{calibrate_probabilistic, displacement_gradient, eta, objective_j, pof as weibull_pof, von_mises, LcfMaterial};
use lcf_shape::sensitivity::normal_project;
use lcf_shape::validation::run_suite;
use lcf_shape::NodalField;
use nalgebra::Vector3;

use crate::config::LoadedConfig;
use crate::CliError;

pub struct Context<'a> {
    pub loaded: &'a LoadedConfig,
    pub dir: &'a Path,
    pub debug: bool,
    /// Files written so far, relative to `dir`.
    pub written: Vec<String>,
}

impl<'a> Context<'a> {
    pub fn new(loaded: &'a LoadedConfig, dir: &'a Path, debug: bool) -> Self {
        Context { loaded, dir, debug, written: Vec::new() }
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        if self.loaded.config.outputs.csv {
            self.write(name, contents)?;
        }
        Ok(())
    }

    fn vtk(&mut self, name: &str, contents: impl FnOnce() -> String) -> Result<(), CliError> {
        if self.loaded.config.outputs.vtk {
            self.write(name, &contents())?;
        }
        Ok(())
    }
}

fn vector_csv(field: &NodalField, names: [&str; 3]) -> String {
    let mut out = format!("node,{},{},{}\n", names[0], names[1], names[2]);
    for (i, v) in field.iter().enumerate() {
        let _ = writeln!(out, "{i},{:.12e},{:.12e},{:.12e}", v.x, v.y, v.z);
    }
    out
}

fn lcf_material(loaded: &LoadedConfig) -> Result<LcfMaterial, CliError> {
    Ok(match &loaded.config.lcf {
        Some(_) => loaded.problem_materials()?.1,
        None => LcfMaterial::almgsi6082(),
    })
}

pub fn solve(ctx: &mut Context) -> Result<(), CliError> {
    let p = ctx.loaded.problem()?;
    let (state, _) = solve_state(&p.mesh, &p.elastic, &p.load, &p.solver)?;
    let u = &state.displacement;
    let mut peak = (0.0, Vector3::zeros(), 0usize);
    for e in 0..p.mesh.n_elements() {
        for rp in &p.mesh.reference().volume {
            let ep = p.mesh.element_point(e, rp)?;
            let sv = von_mises(&p.elastic.stress(&displacement_gradient(&p.mesh, u, e, &ep.grads)));
            if sv > peak.0 {
                peak = (sv, ep.position, e);
            }
        }
    }
    let r = reactions(&state.stiffness, u, &state.load);
    let reaction: Vector3<f64> = p.mesh.dirichlet_nodes().iter().map(|&n| r[n]).sum();
    println!("nodes {}, elements {} ({})", p.mesh.n_nodes(), p.mesh.n_elements(), p.mesh.kind().name());
    println!("max |u| {:.6e} mm", u.max_norm());
    println!(
        "peak von Mises {:.6e} MPa in element {} at ({:.4}, {:.4}, {:.4})",
        peak.0, peak.2, peak.1.x, peak.1.y, peak.1.z
    );
    println!("reaction force ({:.6e}, {:.6e}, {:.6e}) N", reaction.x, reaction.y, reaction.z);
    let summary = format!(
        "key,value\nnodes,{}\nelements,{}\nmax_displacement,{:.12e}\npeak_von_mises,{:.12e}\npeak_element,{}\npeak_x,{:.12e}\npeak_y,{:.12e}\npeak_z,{:.12e}\nreaction_x,{:.12e}\nreaction_y,{:.12e}\nreaction_z,{:.12e}\n",
        p.mesh.n_nodes(),
        p.mesh.n_elements(),
        u.max_norm(),
        peak.0,
        peak.2,
        peak.1.x,
        peak.1.y,
        peak.1.z,
        reaction.x,
        reaction.y,
        reaction.z
    );
    ctx.csv("solve_summary.csv", &summary)?;
    ctx.csv("displacement.csv", &displacement_csv(&p.mesh, u))?;
    ctx.vtk("displacement.vtk", || vtk(&p.mesh, "displacement", &[PointData::Vectors("displacement", u)]))?;
    if ctx.debug {
        ctx.write("stiffness.mtx", &state.stiffness.to_matrix_market())?;
        ctx.write("load.csv", &vector_csv(&state.load, ["fx", "fy", "fz"]))?;
    }
    Ok(())
}

fn pof_table(j: f64, m: f64, times: &[f64]) -> String {
    let mut out = String::from("t,pof,hazard\n");
    for &t in times {
        let _ = writeln!(out, "{t:.6e},{:.12e},{:.12e}", weibull_pof(j, t, m), t.powf(m) * j);
    }
    out
}

pub fn pof(ctx: &mut Context) -> Result<(), CliError> {
    let c = &ctx.loaded.config;
    let times = c.times.clone();
    let (j, m) = if let Some(j) = c.objective {
        (j, lcf_material(ctx.loaded)?.weibull_shape)
    } else {
        let p = ctx.loaded.problem()?;
        let model = p.model()?;
        let (state, _) = solve_state(&p.mesh, &p.elastic, &p.load, &p.solver)?;
        let life = objective_j(&p.mesh, &model, &state.displacement)?;
        let m = model.lcf.weibull_shape;
        let h = nodal_intensity(&p.mesh, &model, &state.displacement)?;
        let t0 = c.sensitivity_time.or(times.last().copied()).unwrap_or(0.0);
        let rho = nodal_crack_intensity(&h, t0, m);
        ctx.vtk("intensity.vtk", || {
            vtk(
                &p.mesh,
                "crack initiation intensity",
                &[PointData::Scalars("h", &h), PointData::Scalars("crack_intensity", &rho)],
            )
        })?;
        (life.j, m)
    };
    println!("J {j:.6e} cycles^-{m}");
    println!("eta {:.6e} cycles", eta(j, m));
    println!("{:>14} {:>14}", "t", "PoF");
    for &t in &times {
        println!("{t:>14.6e} {:>14.6e}", weibull_pof(j, t, m));
    }
    ctx.csv("pof.csv", &pof_table(j, m, &times))?;
    Ok(())
}

pub fn sensitivity(ctx: &mut Context) -> Result<(), CliError> {
    let c = ctx.loaded.config.clone();
    let p = ctx.loaded.problem()?;
    let a = p.analyze_with(c.zero_adjoint)?;
    let g = &a.gradient;
    let n = p.mesh.n_nodes();
    let t0 = c.sensitivity_time.or(c.times.last().copied()).unwrap_or(0.0);
    let dpof = g.dpof_dx(t0);
    let dpof_normal = normal_project(&p.mesh, &dpof)?;
    let gn = g.normal.to_dense(n);
    let pn = dpof_normal.to_dense(n);
    println!("J {:.6e}, |dJ/dX| {:.6e}, PoF({t0}) {:.6e}", a.life.j, g.dj_dx.norm(), weibull_pof(a.life.j, t0, g.weibull_shape));
    if c.zero_adjoint {
        println!("adjoint terms dropped: gradient is the partial derivative at fixed U");
    }
    let mut order: Vec<usize> = (0..g.normal.nodes.len()).collect();
    order.sort_by(|&x, &y| g.normal.values[y].abs().total_cmp(&g.normal.values[x].abs()).then(x.cmp(&y)));
    println!("{:>6} {:>12} {:>12} {:>12} {:>14}", "node", "x", "y", "z", "dJ/dX . n");
    for &k in order.iter().take(c.top_k) {
        let node = g.normal.nodes[k];
        let x = p.mesh.nodes()[node];
        println!("{node:>6} {:>12.5} {:>12.5} {:>12.5} {:>14.6e}", x.x, x.y, x.z, g.normal.values[k]);
    }
    ctx.csv("gradient.csv", &gradient_csv(&p.mesh, &g.dj_dx, &gn))?;
    ctx.csv("dpof_gradient.csv", &gradient_csv(&p.mesh, &dpof, &pn))?;
    ctx.vtk("sensitivity.vtk", || {
        vtk(
            &p.mesh,
            "shape sensitivity",
            &[
                PointData::Vectors("displacement", &a.state.displacement),
                PointData::Vectors("dJ_dX", &g.dj_dx),
                PointData::Vectors("dPoF_dX", &dpof),
                PointData::Scalars("dJ_dX_normal", &gn),
                PointData::Scalars("dPoF_dX_normal", &pn),
            ],
        )
    })?;
    if ctx.debug {
        ctx.write("stiffness.mtx", &a.state.stiffness.to_matrix_market())?;
        ctx.write("load.csv", &vector_csv(&a.state.load, ["fx", "fy", "fz"]))?;
        ctx.write("adjoint.csv", &vector_csv(&a.adjoint, ["lx", "ly", "lz"]))?;
    }
    Ok(())
}

pub fn validate(ctx: &mut Context) -> Result<(), CliError> {
    let c = ctx.loaded.config.clone();
    let p = ctx.loaded.problem()?;
    let report = run_suite(&p, &c.validation.directions, &c.validation.thresholds())?;
    for e in &report.entries {
        println!(
            "{:<8} {:<22} {:<13} best {:.3e} (threshold {:.1e})",
            if e.passed { "PASS" } else { "FAIL" },
            e.ingredient.name(),
            e.direction.name(),
            e.report.best_error,
            e.threshold
        );
    }
    ctx.csv("validation_summary.csv", &report.to_csv())?;
    ctx.csv("validation_detail.csv", &report.detail_csv())?;
    let failed = report.entries.iter().filter(|e| !e.passed).count();
    if report.passed() {
        println!("all {} oracle checks passed", report.entries.len());
        Ok(())
    } else {
        Err(CliError::Validation(format!("{failed} of {} oracle checks failed", report.entries.len())))
    }
}

pub fn calibrate(ctx: &mut Context) -> Result<(), CliError> {
    let c = &ctx.loaded.config.calibration;
    let cal = calibrate_probabilistic(&c.deterministic, c.weibull_shape, c.specimen_area);
    let rows = [
        ("deterministic", cal.deterministic),
        ("weibull_scale", cal.weibull_scale),
        ("unit_area", cal.probabilistic),
    ];
    println!("m = {}, specimen area {} mm^2", c.weibull_shape, c.specimen_area);
    println!("{:<14} {:>10} {:>8} {:>7} {:>7}", "stage", "sigma_f", "eps_f", "b", "c");
    let mut csv = String::from("stage,sigma_f,eps_f,b,c\n");
    for (name, r) in rows {
        println!("{name:<14} {:>10.1} {:>8.4} {:>7.3} {:>7.3}", r.sigma_f, r.eps_f, r.b, r.c);
        let _ = writeln!(csv, "{name},{:.12e},{:.12e},{},{}", r.sigma_f, r.eps_f, r.b, r.c);
    }
    ctx.csv("calibration.csv", &csv)?;
    Ok(())
}
