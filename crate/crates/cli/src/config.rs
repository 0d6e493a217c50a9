//! Run configuration: one JSON document, overridable from the command line.
//!
//! Precedence, highest first: command-line flags, config keys, built-in
//! defaults. Relative paths inside the config resolve against the directory
//! of the config file.

use std::path::{Path, PathBuf};

use lcf_shape::fem::{ElasticMaterial, LoadCase, SolverSettings, Traction, VolumeForce};
use lcf_shape::lcf::{CmbParams, LcfMaterial};
use lcf_shape::mesh::{ElementKind, Mesh, QuadratureSettings};
use lcf_shape::problem::Problem;
use lcf_shape::surrogate::{bent_rod, ring, RingSpec, RodSpec, ROD_FORCE, ROTOR_OMEGA};
use lcf_shape::validation::{Direction, Ingredient, Thresholds};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// A value given inline or as a path to a JSON file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Source<T> {
    Path(PathBuf),
    Inline(T),
}

impl<T: serde::de::DeserializeOwned + Clone> Source<T> {
    fn load(&self, base: &Path) -> Result<T, CliError> {
        match self {
            Source::Inline(v) => Ok(v.clone()),
            Source::Path(p) => {
                let path = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
            }
        }
    }

    fn check_exists(&self, base: &Path) -> Result<(), CliError> {
        match self {
            Source::Path(p) if !base.join(p).is_file() => {
                Err(CliError::Config(format!("referenced file {} does not exist", base.join(p).display())))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RodConfig {
    pub kind: String,
    pub length: f64,
    pub height: f64,
    pub diameter: f64,
    pub section_divisions: usize,
    pub axial_divisions: usize,
}

impl Default for RodConfig {
    fn default() -> Self {
        let s = RodSpec::default();
        RodConfig {
            kind: s.kind.name().to_string(),
            length: s.length,
            height: s.height,
            diameter: s.diameter,
            section_divisions: s.section_divisions,
            axial_divisions: s.axial_divisions,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RingConfig {
    pub kind: String,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub thickness: f64,
    pub sectors: usize,
    pub meshed_sectors: usize,
    pub radial_divisions: usize,
    pub sector_divisions: usize,
    pub axial_divisions: usize,
}

impl Default for RingConfig {
    fn default() -> Self {
        let s = RingSpec::default();
        RingConfig {
            kind: s.kind.name().to_string(),
            inner_radius: s.inner_radius,
            outer_radius: s.outer_radius,
            thickness: s.thickness,
            sectors: s.sectors,
            meshed_sectors: s.meshed_sectors,
            radial_divisions: s.radial_divisions,
            sector_divisions: s.sector_divisions,
            axial_divisions: s.axial_divisions,
        }
    }
}

fn parse_kind(name: &str) -> Result<ElementKind, CliError> {
    ElementKind::parse(name).ok_or_else(|| CliError::Config(format!("unknown element kind {name:?}")))
}

/// Where the mesh comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSource {
    /// JSON mesh file (see `lcf_shape::mesh::io`).
    File(PathBuf),
    /// Bent rod surrogate, pulled by a force-controlled end load by default.
    Rod(RodConfig),
    /// Rotor ring surrogate, spinning at 110000 rpm by default.
    Ring(RingConfig),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub vtk: bool,
    pub csv: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs { vtk: true, csv: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationConfig {
    pub directions: Vec<Direction>,
    /// Overrides of the default per-ingredient thresholds.
    pub thresholds: std::collections::BTreeMap<Ingredient, f64>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            directions: Direction::ALL.to_vec(),
            thresholds: Default::default(),
        }
    }
}

impl ValidationConfig {
    pub fn thresholds(&self) -> Thresholds {
        let mut t = Thresholds::default();
        t.0.extend(self.thresholds.iter().map(|(k, v)| (*k, *v)));
        t
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    pub deterministic: CmbParams,
    pub weibull_shape: f64,
    pub specimen_area: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            deterministic: CmbParams { sigma_f: 487.0, eps_f: 0.209, b: -0.593, c: -0.07 },
            weibull_shape: 2.0,
            specimen_area: 377.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub mesh: Option<MeshSource>,
    /// Defaults to aluminium (E = 70 GPa, nu = 0.3).
    pub elastic: Option<Source<ElasticMaterial>>,
    /// Defaults to AlMgSi6082 with unit-area probabilistic constants.
    pub lcf: Option<Source<LcfMaterial>>,
    /// Defaults to the surrogate's own load, or no load for mesh files.
    pub load: Option<LoadCase>,
    pub quadrature: QuadratureSettings,
    pub solver: SolverSettings,
    pub output_dir: PathBuf,
    pub outputs: Outputs,
    pub validation: ValidationConfig,
    /// Cycle counts of the PoF table.
    pub times: Vec<f64>,
    /// Cycle count of the exported `dPoF/dX`; defaults to the last of `times`.
    pub sensitivity_time: Option<f64>,
    /// Use this `J` in `pof` instead of solving.
    pub objective: Option<f64>,
    /// Nodes listed by `sensitivity`, largest normal component first.
    pub top_k: usize,
    /// Drop the adjoint terms, leaving the partial derivative at fixed `U`.
    pub zero_adjoint: bool,
    pub calibration: CalibrationConfig,
    /// Worker threads; all available cores when absent.
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: None,
            elastic: None,
            lcf: None,
            load: None,
            quadrature: QuadratureSettings::default(),
            solver: SolverSettings::default(),
            output_dir: PathBuf::from("out"),
            outputs: Outputs::default(),
            validation: ValidationConfig::default(),
            times: vec![0.0, 1e3, 2e3, 5e3, 1e4],
            sensitivity_time: None,
            objective: None,
            top_k: 10,
            zero_adjoint: false,
            calibration: CalibrationConfig::default(),
            threads: None,
        }
    }
}

/// A parsed config with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let config: RunConfig =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(LoadedConfig { config, base })
    }

    pub fn defaults() -> Self {
        LoadedConfig { config: RunConfig::default(), base: PathBuf::new() }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let c = &self.config;
        let bad = |m: String| Err(CliError::Config(m));
        if let Some(t) = c.times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
            return bad(format!("times must be finite and nonnegative, got {t}"));
        }
        if let Some(t) = c.sensitivity_time {
            if !(t >= 0.0 && t.is_finite()) {
                return bad(format!("sensitivity_time must be finite and nonnegative, got {t}"));
            }
        }
        for (k, v) in &c.validation.thresholds {
            if !(*v > 0.0 && *v <= 1.0) {
                return bad(format!("threshold for {} must lie in (0, 1], got {v}", k.name()));
            }
        }
        if let Some(j) = c.objective {
            if !(j >= 0.0 && j.is_finite()) {
                return bad(format!("objective must be finite and nonnegative, got {j}"));
            }
        }
        if c.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if let Some(MeshSource::File(p)) = &c.mesh {
            if !self.base.join(p).is_file() {
                return bad(format!("mesh file {} does not exist", self.base.join(p).display()));
            }
        }
        if let Some(s) = &c.elastic {
            s.check_exists(&self.base)?;
        }
        if let Some(s) = &c.lcf {
            s.check_exists(&self.base)?;
        }
        Ok(())
    }

    /// Output directory with relative paths taken from the working directory.
    pub fn output_dir(&self) -> PathBuf {
        self.config.output_dir.clone()
    }

    /// Elastic and LCF materials, defaults where not configured.
    pub fn problem_materials(&self) -> Result<(ElasticMaterial, LcfMaterial), CliError> {
        let c = &self.config;
        let elastic = match &c.elastic {
            Some(s) => s.load(&self.base)?,
            None => ElasticMaterial::aluminium(),
        };
        let lcf = match &c.lcf {
            Some(s) => s.load(&self.base)?,
            None => LcfMaterial::almgsi6082(),
        };
        lcf.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok((elastic, lcf))
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let c = &self.config;
        let (elastic, lcf) = self.problem_materials()?;
        let (mesh, default_load) = match &c.mesh {
            None => return Err(CliError::Config("no mesh configured".into())),
            Some(MeshSource::File(p)) => {
                let mesh = Mesh::from_json_file(&self.base.join(p), &c.quadrature)?;
                (mesh, LoadCase::default())
            }
            Some(MeshSource::Rod(r)) => {
                let spec = RodSpec {
                    kind: parse_kind(&r.kind)?,
                    length: r.length,
                    height: r.height,
                    diameter: r.diameter,
                    section_divisions: r.section_divisions,
                    axial_divisions: r.axial_divisions,
                };
                let mesh = bent_rod(&spec)?.with_quadrature(&c.quadrature)?;
                let load = LoadCase {
                    volume: VolumeForce::None,
                    traction: Traction::ForceControlled { force: [ROD_FORCE, 0.0, 0.0] },
                };
                (mesh, load)
            }
            Some(MeshSource::Ring(r)) => {
                let spec = RingSpec {
                    kind: parse_kind(&r.kind)?,
                    inner_radius: r.inner_radius,
                    outer_radius: r.outer_radius,
                    thickness: r.thickness,
                    sectors: r.sectors,
                    meshed_sectors: r.meshed_sectors,
                    radial_divisions: r.radial_divisions,
                    sector_divisions: r.sector_divisions,
                    axial_divisions: r.axial_divisions,
                };
                let (mesh, _) = ring(&spec)?;
                let load = LoadCase {
                    volume: VolumeForce::Centrifugal { omega: ROTOR_OMEGA, density: elastic.density },
                    traction: Traction::None,
                };
                (mesh.with_quadrature(&c.quadrature)?, load)
            }
        };
        let load = c.load.unwrap_or(default_load);
        load.validate(&mesh)?;
        Ok(Problem { mesh, elastic, lcf, load, solver: c.solver })
    }
}
