//! Scenario configuration files.
//!
//! A config is a strict JSON document: unknown keys are rejected and the
//! schema version must be `1`. Everything geometry-specific is checked here
//! so that error messages can name the key the user has to fix.

use std::fmt;
use std::path::{Path, PathBuf};

use pdebs_core::control::LawKind;
use pdebs_core::experiments::{
    ActuatorSpec, FitNorm, Geometry, InitPreset, InitSpec, LawSpec, Scenario,
};
use pdebs_core::kernels::PlantParams;
use pdebs_core::sim::Cut;
use serde::{Deserialize, Deserializer};

pub const SCHEMA_VERSION: u32 = 1;

/// Problem with a config file, tagged with the offending key when known.
#[derive(Debug)]
pub struct ConfigError {
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(key: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError {
            key: Some(key.into()),
            message: message.into(),
        }
    }

    fn general(message: impl Into<String>) -> Self {
        ConfigError {
            key: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.key {
            Some(key) => write!(f, "`{key}`: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub v: u32,
    /// Scenario name; defaults to the file stem.
    pub name: Option<String>,
    pub plant: PlantConfig,
    pub geometry: GeometryConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub law: LawConfig,
    pub time: TimeConfig,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    pub epsilon: f64,
    pub lambda: f64,
    pub c: f64,
}

fn default_extent() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    Strip {
        /// Largest sampled wavenumber; samples are symmetric about zero.
        k_max: f64,
    },
    Square {
        #[serde(default = "default_extent")]
        extent: f64,
    },
    Sector {
        theta1: f64,
        theta2: f64,
        radius: f64,
    },
    Piano {
        #[serde(default = "default_extent")]
        extent: f64,
        /// Absent: the corner cut from `(0, L/2)` to `(L/2, L)`.
        /// `null`: no cut, i.e. the plain square.
        #[serde(default, deserialize_with = "present")]
        cut: Option<Option<Cut>>,
    },
}

fn present<'de, D, T>(d: D) -> Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    T::deserialize(d).map(Some)
}

impl GeometryConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            GeometryConfig::Strip { .. } => "strip",
            GeometryConfig::Square { .. } => "square",
            GeometryConfig::Sector { .. } => "sector",
            GeometryConfig::Piano { .. } => "piano",
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub nr: Option<usize>,
    pub ntheta: Option<usize>,
    pub k_samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    /// Defaults to the natural law of the geometry.
    pub kind: Option<LawKind>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    pub actuators: Option<ActuatorSpec>,
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(default)]
    pub compare_open_loop: bool,
    pub fit_norm: Option<FitNorm>,
}

fn yes() -> bool {
    true
}

impl Default for LawConfig {
    fn default() -> Self {
        LawConfig {
            kind: None,
            n: None,
            actuators: None,
            enabled: true,
            compare_open_loop: false,
            fit_norm: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub dt: f64,
    /// Defaults to `20/c`.
    pub t_final: Option<f64>,
    pub record_every: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitConfig {
    pub preset: InitPreset,
    #[serde(default)]
    pub seed: u64,
}

impl Default for InitConfig {
    fn default() -> Self {
        let d = InitSpec::default();
        InitConfig {
            preset: d.preset,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

/// Parses a config document, reporting the dotted path of any bad key.
pub fn parse(text: &str) -> Result<ConfigFile, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            ConfigError::general(inner.to_string())
        } else {
            ConfigError::at(path, inner.to_string())
        }
    })?;
    if cfg.v != SCHEMA_VERSION {
        return Err(ConfigError::at(
            "v",
            format!(
                "unsupported schema version {}, expected {SCHEMA_VERSION}",
                cfg.v
            ),
        ));
    }
    Ok(cfg)
}

pub fn load(path: &Path) -> Result<ConfigFile, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::general(format!("cannot read file: {e}")))?;
    parse(&text)
}

fn finite(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::at(key, format!("must be finite, got {v}")))
    }
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if finite(key, v)? > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::at(key, format!("must be > 0, got {v}")))
    }
}

fn need(key: &str, v: Option<usize>) -> Result<usize, ConfigError> {
    v.ok_or_else(|| ConfigError::at(key, "is required for this geometry"))
}

fn unused(key: &str, v: Option<usize>, kind: &str) -> Result<(), ConfigError> {
    match v {
        Some(_) => Err(ConfigError::at(
            key,
            format!("is not used by {kind} geometry"),
        )),
        None => Ok(()),
    }
}

impl ConfigFile {
    fn plant(&self) -> Result<PlantParams, ConfigError> {
        let p = &self.plant;
        let epsilon = positive("plant.epsilon", p.epsilon)?;
        let lambda = finite("plant.lambda", p.lambda)?;
        let c = positive("plant.c", p.c)?;
        PlantParams::new(epsilon, lambda, c).map_err(|e| ConfigError::at("plant", e.to_string()))
    }

    fn geometry(&self) -> Result<Geometry, ConfigError> {
        let g = &self.grid;
        let kind = self.geometry.kind();
        let geometry = match self.geometry {
            GeometryConfig::Strip { k_max } => {
                let k_max = positive("geometry.k_max", k_max)?;
                for (key, v) in [
                    ("grid.nx", g.nx),
                    ("grid.nr", g.nr),
                    ("grid.ntheta", g.ntheta),
                ] {
                    unused(key, v, kind)?;
                }
                let samples = need("grid.k_samples", g.k_samples)?;
                if samples < 2 {
                    return Err(ConfigError::at("grid.k_samples", "must be at least 2"));
                }
                Geometry::Strip {
                    ny: need("grid.ny", g.ny)?,
                    k_max,
                    dk: 2.0 * k_max / (samples - 1) as f64,
                }
            }
            GeometryConfig::Square { extent } => {
                for (key, v) in [
                    ("grid.nr", g.nr),
                    ("grid.ntheta", g.ntheta),
                    ("grid.k_samples", g.k_samples),
                ] {
                    unused(key, v, kind)?;
                }
                Geometry::Square {
                    extent: positive("geometry.extent", extent)?,
                    nx: need("grid.nx", g.nx)?,
                    ny: need("grid.ny", g.ny)?,
                }
            }
            GeometryConfig::Sector {
                theta1,
                theta2,
                radius,
            } => {
                for (key, v) in [
                    ("grid.nx", g.nx),
                    ("grid.ny", g.ny),
                    ("grid.k_samples", g.k_samples),
                ] {
                    unused(key, v, kind)?;
                }
                let theta1 = finite("geometry.theta1", theta1)?;
                if !(finite("geometry.theta2", theta2)? > theta1) {
                    return Err(ConfigError::at("geometry.theta2", "must exceed theta1"));
                }
                Geometry::Sector {
                    theta1,
                    theta2,
                    radius: positive("geometry.radius", radius)?,
                    nr: need("grid.nr", g.nr)?,
                    ntheta: need("grid.ntheta", g.ntheta)?,
                }
            }
            GeometryConfig::Piano { extent, cut } => {
                for (key, v) in [
                    ("grid.nr", g.nr),
                    ("grid.ntheta", g.ntheta),
                    ("grid.k_samples", g.k_samples),
                ] {
                    unused(key, v, kind)?;
                }
                let extent = positive("geometry.extent", extent)?;
                let nx = need("grid.nx", g.nx)?;
                if need("grid.ny", g.ny)? != nx {
                    return Err(ConfigError::at(
                        "grid.ny",
                        "piano grids are square: ny must equal nx",
                    ));
                }
                let cut = cut.unwrap_or(Some(Cut {
                    start: [0.0, 0.5 * extent],
                    end: [0.5 * extent, extent],
                }));
                if let Some(c) = &cut {
                    for v in c.start.iter().chain(&c.end) {
                        finite("geometry.cut", *v)?;
                    }
                }
                Geometry::Piano { extent, cut, n: nx }
            }
        };
        Ok(geometry)
    }

    /// Builds the scenario. `name_hint` is used when the file has no `name`;
    /// `output_override` replaces `output.dir`.
    pub fn to_scenario(
        &self,
        name_hint: &str,
        output_override: Option<&Path>,
    ) -> Result<Scenario, ConfigError> {
        let plant = self.plant()?;
        let geometry = self.geometry()?;
        let name = self.name.clone().unwrap_or_else(|| name_hint.to_string());
        if name.is_empty() {
            return Err(ConfigError::at("name", "must not be empty"));
        }
        let mut s = Scenario::new(name, plant, geometry);

        let law = &self.law;
        if law.n == Some(0) {
            return Err(ConfigError::at("law.N", "must be at least 1"));
        }
        let mut spec = LawSpec::new(law.kind.unwrap_or(s.law.kind));
        spec.n = law.n;
        spec.actuators = law.actuators.clone();
        spec.enabled = law.enabled;
        s.law = spec;
        s.compare_open_loop = law.compare_open_loop;
        s.fit_norm = law.fit_norm;

        let t = &self.time;
        s.dt = positive("time.dt", t.dt)?;
        if let Some(tf) = t.t_final {
            s.t_final = positive("time.t_final", tf)?;
        }
        if let Some(every) = t.record_every {
            if every == 0 {
                return Err(ConfigError::at("time.record_every", "must be at least 1"));
            }
            s.record_every = every;
        }
        s.init = InitSpec {
            preset: self.init.preset,
            seed: self.init.seed,
        };
        s.output_dir = output_override
            .map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone());
        s.validate()
            .map_err(|e| ConfigError::general(e.to_string()))?;
        Ok(s)
    }
}
