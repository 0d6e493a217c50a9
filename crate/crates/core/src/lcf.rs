//! Low-cycle-fatigue life chain and the Weibull surface objective.
//!
//! Ni_det(sigma_a) = CMB^-1( RO( SD^-1(sigma_a) ) ), evaluated per surface
//! quadrature point. The chain is parametrised by `s = sigma_a^2 / E`,
//! which is smooth in the displacement gradient.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::ElasticMaterial;
use crate::field::NodalField;
use crate::mesh::{FaceRef, Mesh};

const ROOT_TOL: f64 = 1e-12;
const MAX_ITER: usize = 200;

/// Hardening, Coffin-Manson-Basquin and Weibull constants.
///
/// For probabilistic use `sigma_f` and `eps_f` refer to a unit reference
/// surface (`reference_area = 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LcfMaterial {
    /// K (MPa)
    pub hardening_k: f64,
    /// n'
    pub hardening_exp: f64,
    /// sigma_f' (MPa)
    pub sigma_f: f64,
    /// eps_f'
    pub eps_f: f64,
    pub b: f64,
    pub c: f64,
    /// Weibull shape m
    pub weibull_shape: f64,
    /// Surface area (mm^2) the CMB constants refer to.
    pub reference_area: f64,
}

impl LcfMaterial {
    /// AlMgSi6082 with the probabilistic unit-area constants (m = 2).
    pub fn almgsi6082() -> Self {
        let det = CmbParams {
            sigma_f: 487.0,
            eps_f: 0.209,
            b: -0.593,
            c: -0.07,
        };
        let cal = calibrate_probabilistic(&det, 2.0, 377.0);
        LcfMaterial {
            hardening_k: 443.9,
            hardening_exp: 0.064,
            sigma_f: cal.probabilistic.sigma_f,
            eps_f: cal.probabilistic.eps_f,
            b: det.b,
            c: det.c,
            weibull_shape: 2.0,
            reference_area: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.b < self.c && self.c < 0.0) {
            return bad(format!("need b < c < 0, got b = {}, c = {}", self.b, self.c));
        }
        if !(self.weibull_shape > 0.0) {
            return bad(format!("Weibull shape must be positive, got {}", self.weibull_shape));
        }
        if !(self.hardening_k > 0.0 && self.hardening_exp > 0.0) {
            return bad("K and n' must be positive".into());
        }
        if !(self.sigma_f > 0.0 && self.eps_f > 0.0 && self.reference_area > 0.0) {
            return bad("sigma_f', eps_f' and the reference area must be positive".into());
        }
        Ok(())
    }
}

/// Material-law chain bound to a Young's modulus.
#[derive(Debug, Clone, Copy)]
pub struct LifeModel {
    pub e: f64,
    pub mu: f64,
    pub lcf: LcfMaterial,
}

impl LifeModel {
    pub fn new(elastic: &ElasticMaterial, lcf: &LcfMaterial) -> Result<Self> {
        lcf.validate()?;
        Ok(LifeModel {
            e: elastic.youngs_modulus,
            mu: elastic.lame_mu,
            lcf: *lcf,
        })
    }

    fn plastic(&self, x: f64) -> f64 {
        (x / self.lcf.hardening_k).powf(1.0 / self.lcf.hardening_exp)
    }

    /// Ramberg-Osgood strain amplitude `x/E + (x/K)^(1/n')`.
    pub fn ramberg_osgood(&self, x: f64) -> f64 {
        x / self.e + self.plastic(x)
    }

    pub fn ramberg_osgood_deriv(&self, x: f64) -> f64 {
        let n = self.lcf.hardening_exp;
        let p = if x > 0.0 { self.plastic(x) / (n * x) } else { 0.0 };
        1.0 / self.e + p
    }

    /// Neuber shake-down: elastic amplitude from the elastic-plastic one.
    pub fn neuber_sd(&self, x: f64) -> f64 {
        (self.e * x * self.ramberg_osgood(x)).sqrt()
    }

    /// `x * RO(x) = SD(x)^2 / E`
    fn energy(&self, x: f64) -> f64 {
        x * self.ramberg_osgood(x)
    }

    fn energy_deriv(&self, x: f64) -> f64 {
        self.ramberg_osgood(x) + x * self.ramberg_osgood_deriv(x)
    }

    /// Elastic-plastic amplitude `x` with `x RO(x) = s`, `s = sigma_a^2 / E`.
    pub fn sd_inverse_energy(&self, s: f64) -> Result<f64> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NoBracket { value: s });
        }
        // SD(x) >= x, so the root lies below sigma_a.
        let hi = (self.e * s).sqrt();
        newton_bisect(|x| self.energy(x) - s, |x| self.energy_deriv(x), 0.0, hi, hi)
    }

    pub fn sd_inverse(&self, sigma_a: f64) -> Result<f64> {
        if !(sigma_a > 0.0) {
            return Err(Error::NoBracket { value: sigma_a });
        }
        self.sd_inverse_energy(sigma_a * sigma_a / self.e)
    }

    /// Coffin-Manson-Basquin strain amplitude at `n` cycles.
    pub fn cmb(&self, n: f64) -> f64 {
        self.cmb_reversals(2.0 * n)
    }

    /// CMB as a function of the reversals `2N`.
    fn cmb_reversals(&self, reversals: f64) -> f64 {
        let l = &self.lcf;
        l.sigma_f / self.e * reversals.powf(l.b) + l.eps_f * reversals.powf(l.c)
    }

    fn cmb_y(&self, y: f64) -> (f64, f64) {
        let l = &self.lcf;
        let tb = l.sigma_f / self.e * (l.b * y).exp();
        let tc = l.eps_f * (l.c * y).exp();
        (tb + tc, l.b * tb + l.c * tc)
    }

    /// `y = ln(2N)` with `CMB(N) = eps`.
    pub fn cmb_inverse_log(&self, eps: f64) -> Result<f64> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::NoBracket { value: eps });
        }
        let l = &self.lcf;
        let yb = (eps * self.e / l.sigma_f).ln() / l.b;
        let yc = (eps / l.eps_f).ln() / l.c;
        let lo = yb.max(yc);
        let ln2 = std::f64::consts::LN_2;
        let hi = (yb + ln2 / l.b.abs()).max(yc + ln2 / l.c.abs());
        let scale = lo.abs().max(hi.abs()).max(1.0);
        newton_bisect(|y| self.cmb_y(y).0 - eps, |y| self.cmb_y(y).1, lo, hi, scale)
    }

    /// Cycles `N` with `CMB(N) = eps`.
    pub fn cmb_inverse(&self, eps: f64) -> Result<f64> {
        Ok(0.5 * self.cmb_inverse_log(eps)?.exp())
    }

    /// Deterministic life at an elastic amplitude stress; infinite at zero.
    pub fn life(&self, sigma_a: f64) -> Result<f64> {
        if sigma_a <= 0.0 {
            return Ok(f64::INFINITY);
        }
        let x = self.sd_inverse(sigma_a)?;
        self.cmb_inverse(self.ramberg_osgood(x))
    }

    /// Intensity `h = Ni^-m` and `dh/ds` at `s = sigma_a^2 / E`.
    pub fn intensity_energy(&self, s: f64) -> Result<(f64, f64)> {
        if s <= 0.0 {
            return Ok((0.0, 0.0));
        }
        let m = self.lcf.weibull_shape;
        let x = self.sd_inverse_energy(s)?;
        let eps = self.ramberg_osgood(x);
        let y = self.cmb_inverse_log(eps)?;
        let h = (m * (std::f64::consts::LN_2 - y)).exp();
        let deps_ds = self.ramberg_osgood_deriv(x) / self.energy_deriv(x);
        let dy_deps = 1.0 / self.cmb_y(y).1;
        Ok((h, -m * h * dy_deps * deps_ds))
    }

    /// `h = Ni^-m` at an elastic amplitude stress.
    pub fn intensity(&self, sigma_a: f64) -> Result<f64> {
        Ok(self.intensity_energy(sigma_a * sigma_a / self.e)?.0)
    }
}

fn newton_bisect(
    f: impl Fn(f64) -> f64,
    df: impl Fn(f64) -> f64,
    mut lo: f64,
    mut hi: f64,
    scale: f64,
) -> Result<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        // analytic brackets are exact; a same-sign endpoint within rounding is the root
        let (x0, f0) = if flo.abs() < fhi.abs() { (lo, flo) } else { (hi, fhi) };
        if f0.abs() <= 1e-12 * (flo.abs() + fhi.abs()) {
            return Ok(x0);
        }
        return Err(Error::NoBracket { value: 0.5 * (lo + hi) });
    }
    let rising = fhi > flo;
    let mut x = 0.5 * (lo + hi);
    for _ in 0..MAX_ITER {
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == rising {
            hi = x;
        } else {
            lo = x;
        }
        let d = df(x);
        let mut next = x - fx / d;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= ROOT_TOL * 1e-2 * scale.max(x.abs()) || hi - lo <= ROOT_TOL * 1e-2 * scale {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NonConvergence { value: x })
}

/// Deviatoric part.
pub fn deviator(t: &Matrix3<f64>) -> Matrix3<f64> {
    t - Matrix3::identity() * (t.trace() / 3.0)
}

/// Von Mises amplitude `sigma_v / 2`, `sigma_v^2 = 3/2 s':s'`.
pub fn von_mises_amplitude(sigma: &Matrix3<f64>) -> f64 {
    0.5 * von_mises(sigma)
}

pub fn von_mises(sigma: &Matrix3<f64>) -> f64 {
    let d = deviator(sigma);
    (1.5 * d.dot(&d)).sqrt()
}

/// Displacement gradient `q = grad u` at an element reference point.
pub fn displacement_gradient(
    mesh: &Mesh,
    u: &NodalField,
    element: usize,
    grads: &[nalgebra::Vector3<f64>],
) -> Matrix3<f64> {
    let mut q = Matrix3::zeros();
    for (&n, g) in mesh.connectivity(element).iter().zip(grads) {
        q += u[n] * g.transpose();
    }
    q
}

/// Cauchy stress at a reference point of an element.
pub fn stress_at(
    mesh: &Mesh,
    material: &ElasticMaterial,
    u: &NodalField,
    element: usize,
    xi: &nalgebra::Vector3<f64>,
) -> Result<Matrix3<f64>> {
    let ep = mesh.element_point_at(element, xi)?;
    Ok(material.stress(&displacement_gradient(mesh, u, element, &ep.grads)))
}

/// `s = sigma_a^2 / E` of a displacement gradient.
pub fn amplitude_energy(model: &LifeModel, q: &Matrix3<f64>) -> f64 {
    let eps = deviator(&(0.5 * (q + q.transpose())));
    1.5 * model.mu * model.mu / model.e * eps.dot(&eps)
}

/// Objective value and its breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct LifeResult {
    /// `J` in cycles^-m
    pub j: f64,
    /// Weibull scale `J^(-1/m)` (infinite for `J = 0`).
    pub eta: f64,
    pub faces: Vec<FaceRef>,
    pub face_contributions: Vec<f64>,
    /// Deterministic life per face and surface quadrature point.
    pub point_life: Vec<Vec<f64>>,
}

/// Surface objective over all boundary faces.
pub fn objective_j(mesh: &Mesh, model: &LifeModel, u: &NodalField) -> Result<LifeResult> {
    objective_on_faces(mesh, model, u, mesh.surface_faces())
}

/// Surface objective restricted to a set of boundary faces.
pub fn objective_on_faces(
    mesh: &Mesh,
    model: &LifeModel,
    u: &NodalField,
    faces: &[FaceRef],
) -> Result<LifeResult> {
    let per_face: Vec<(f64, Vec<f64>)> = faces
        .par_iter()
        .map(|&f| face_objective(mesh, model, u, f))
        .collect::<Result<_>>()?;
    let j: f64 = per_face.iter().map(|p| p.0).sum();
    let m = model.lcf.weibull_shape;
    let (face_contributions, point_life) = per_face.into_iter().unzip();
    Ok(LifeResult {
        j,
        eta: j.powf(-1.0 / m),
        faces: faces.to_vec(),
        face_contributions,
        point_life,
    })
}

fn face_objective(mesh: &Mesh, model: &LifeModel, u: &NodalField, face: FaceRef) -> Result<(f64, Vec<f64>)> {
    let m = model.lcf.weibull_shape;
    let mut total = 0.0;
    let mut lives = Vec::new();
    for p in &mesh.reference().faces[face.face].points {
        let fp = mesh.face_point(face, p)?;
        let ep = mesh.element_point(face.element, &p.point)?;
        let q = displacement_gradient(mesh, u, face.element, &ep.grads);
        let (h, _) = model.intensity_energy(amplitude_energy(model, &q))?;
        total += p.point.weight * fp.sqrt_det * h;
        lives.push(if h > 0.0 { h.powf(-1.0 / m) } else { f64::INFINITY });
    }
    Ok((total, lives))
}

/// Weibull scale `J^(-1/m)`.
pub fn eta(j: f64, m: f64) -> f64 {
    j.powf(-1.0 / m)
}

/// Probability of crack initiation by cycle `t`: `1 - exp(-t^m J)`.
pub fn pof(j: f64, t: f64, m: f64) -> f64 {
    -(-t.powf(m) * j).exp_m1()
}

/// Local crack initiation intensity `(m/Ni)(t/Ni)^(m-1)` written with
/// `h = Ni^-m`, per mm^2 and cycle.
pub fn crack_intensity(t: f64, h: f64, m: f64) -> f64 {
    if h == 0.0 {
        return 0.0;
    }
    m * t.powf(m - 1.0) * h
}

/// Coffin-Manson-Basquin constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmbParams {
    pub sigma_f: f64,
    pub eps_f: f64,
    pub b: f64,
    pub c: f64,
}

/// The three calibration stages: median curve, Weibull-scale curve on the
/// specimen surface and unit-area probabilistic constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub deterministic: CmbParams,
    pub weibull_scale: CmbParams,
    pub probabilistic: CmbParams,
    pub weibull_shape: f64,
    pub specimen_area: f64,
}

/// Converts median (50 % quantile) CMB constants of a specimen with surface
/// `specimen_area` into unit-area Weibull-scale constants.
pub fn calibrate_probabilistic(det: &CmbParams, m: f64, specimen_area: f64) -> Calibration {
    let ln2 = std::f64::consts::LN_2;
    let scale = CmbParams {
        sigma_f: det.sigma_f * ln2.powf(-det.b / m),
        eps_f: det.eps_f * ln2.powf(-det.c / m),
        ..*det
    };
    let unit = CmbParams {
        sigma_f: scale.sigma_f * (1.0 / specimen_area).powf(det.b / m),
        eps_f: scale.eps_f * (1.0 / specimen_area).powf(det.c / m),
        ..*det
    };
    Calibration {
        deterministic: *det,
        weibull_scale: scale,
        probabilistic: unit,
        weibull_shape: m,
        specimen_area,
    }
}
