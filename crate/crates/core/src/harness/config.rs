//! Scenario documents: parsing, threshold-relative masses and validation.

use std::fmt;
use std::path::PathBuf;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::model::{critical_mass_blowup, critical_mass_global, ChiProfile};
use crate::radialsolver::{InitialDensity, RadialGrid, SolverConfig, SolverError};

/// A configuration problem, tagged with the dotted path of the key at fault.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{key}: {message}")]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SimulateRadial,
    VerifyInequalities,
    Classify,
    SweepMass,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::SimulateRadial => "simulate-radial",
            Self::VerifyInequalities => "verify-inequalities",
            Self::Classify => "classify",
            Self::SweepMass => "sweep-mass",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SuiteName {
    Identity,
    Monotone,
    Neta,
    RieszSlack,
    SteadyResidual,
}

impl SuiteName {
    pub const ALL: [SuiteName; 5] =
        [Self::Identity, Self::Monotone, Self::Neta, Self::RieszSlack, Self::SteadyResidual];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Monotone => "monotone",
            Self::Neta => "neta",
            Self::RieszSlack => "riesz-slack",
            Self::SteadyResidual => "steady-residual",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.as_str() == name)
    }
}

/// A total mass, either absolute or as a multiple of the model's threshold
/// (written `"1.1x"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MassSpec {
    Absolute(f64),
    Multiple(f64),
}

impl MassSpec {
    /// Absolute mass. Multiples resolve against `threshold`, or against a
    /// unit mass when the model has no mass threshold.
    pub fn resolve(self, threshold: Option<f64>) -> f64 {
        match self {
            Self::Absolute(m) => m,
            Self::Multiple(f) => f * threshold.unwrap_or(1.0),
        }
    }
}

impl Serialize for MassSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Self::Absolute(m) => s.serialize_f64(*m),
            Self::Multiple(f) => s.serialize_str(&format!("{f}x")),
        }
    }
}

impl<'de> Deserialize<'de> for MassSpec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = MassSpec;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a threshold multiple such as \"1.1x\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<MassSpec, E> {
                Ok(MassSpec::Absolute(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<MassSpec, E> {
                Ok(MassSpec::Absolute(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<MassSpec, E> {
                Ok(MassSpec::Absolute(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<MassSpec, E> {
                v.trim()
                    .strip_suffix('x')
                    .and_then(|f| f.trim().parse::<f64>().ok())
                    .map(MassSpec::Multiple)
                    .ok_or_else(|| E::custom(format!("cannot read mass {v:?}; expected e.g. \"1.1x\"")))
            }
        }
        d.deserialize_any(V)
    }
}

/// χ given as a bare strength or as a full profile.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum ChiSpec {
    Strength(f64),
    Profile(ChiProfile),
}

impl Default for ChiSpec {
    fn default() -> Self {
        Self::Strength(1.0)
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    n: Option<usize>,
    #[serde(default)]
    chi: ChiSpec,
    p: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSection {
    length: Option<f64>,
    nodes: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TimeSection {
    dt_init: Option<f64>,
    dt_min: Option<f64>,
    t_end: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectorSection {
    blowup_factor: Option<f64>,
    safety: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepSection {
    mass_grid: Vec<MassSpec>,
    parallelism: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifySection {
    suites: Option<Vec<SuiteName>>,
    draws: Option<usize>,
    mc_pairs: Option<usize>,
    mixtures: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassifySection {
    mass: Option<MassSpec>,
    m0: Option<f64>,
    radial_ball: Option<bool>,
    monotone_samples: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Scenario,
    #[serde(default)]
    model: ModelSection,
    #[serde(default)]
    domain: DomainSection,
    initial: Option<serde_json::Value>,
    #[serde(default)]
    time: TimeSection,
    #[serde(default)]
    detectors: DetectorSection,
    #[serde(default)]
    output: OutputSection,
    seed: Option<u64>,
    sweep: Option<SweepSection>,
    #[serde(default)]
    verify: VerifySection,
    #[serde(default)]
    classify: ClassifySection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub suites: Vec<SuiteName>,
    /// Random draws per (profile, dimension) cell.
    pub draws: usize,
    /// Monte-Carlo pairs for the uniform-ball reproduction.
    pub mc_pairs: usize,
    pub mixtures: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self { suites: SuiteName::ALL.to_vec(), draws: 100_000, mc_pairs: 1_000_000, mixtures: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifyOptions {
    pub mass: Option<f64>,
    pub mass_input: Option<MassSpec>,
    pub m0: Option<f64>,
    pub radial_ball: bool,
    pub monotone_samples: usize,
}

/// Sweep cells in absolute units, with the inputs they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub masses: Vec<f64>,
    pub inputs: Vec<MassSpec>,
    /// Worker count; affects scheduling only.
    #[serde(skip)]
    pub parallelism: usize,
}

/// Validated scenario with every mass resolved to absolute units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub chi: ChiProfile,
    /// Mass that threshold multiples refer to, when the model has one.
    pub threshold: Option<f64>,
    pub grid: RadialGrid,
    pub initial: Option<InitialDensity>,
    pub mass_input: Option<MassSpec>,
    /// Present when χ has the `χ·|x|^{n−2}` form the radial solver needs.
    pub solver: Option<SolverConfig>,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub sweep: Option<SweepSpec>,
    pub verify: VerifyOptions,
    pub classify: ClassifyOptions,
}

/// Command-line overrides of top-level keys.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub suites: Option<Vec<SuiteName>>,
    pub draws: Option<usize>,
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let key = if path == "." || path.is_empty() { "<root>".to_string() } else { path };
            ConfigError::new(key, e.into_inner().to_string())
        })?;
        resolve(raw)
    }

    /// Default configuration for running the verification suites.
    pub fn verify_default() -> Self {
        resolve(RawConfig {
            scenario: Scenario::VerifyInequalities,
            model: ModelSection::default(),
            domain: DomainSection::default(),
            initial: None,
            time: TimeSection::default(),
            detectors: DetectorSection::default(),
            output: OutputSection::default(),
            seed: None,
            sweep: None,
            verify: VerifySection::default(),
            classify: ClassifySection::default(),
        })
        .expect("default verify config is valid")
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<(), ConfigError> {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(dir) = &o.output_dir {
            self.output_dir = Some(dir.clone());
        }
        if let Some(s) = &o.suites {
            if s.is_empty() {
                return Err(ConfigError::new("suite", "at least one suite is required"));
            }
            self.verify.suites = s.clone();
        }
        if let Some(d) = o.draws {
            if d == 0 {
                return Err(ConfigError::new("draws", "must be >= 1"));
            }
            self.verify.draws = d;
        }
        Ok(())
    }
}

/// Mass scale used for `"…x"` inputs: `8π/χ(0)` in the plane, the global
/// threshold `2nω_n/χ` for `χ·|x|^{n−2}` when `n ≥ 3`, none otherwise.
pub fn relevant_threshold(n: usize, chi: &ChiProfile) -> Option<f64> {
    if n == 2 {
        let chi0 = chi.at_origin(2).ok()?;
        return (chi0 > 0.0).then(|| critical_mass_blowup(2, chi0, 2.0).ok()).flatten();
    }
    match chi.power_form() {
        Some((c, p)) if p == n as f64 => critical_mass_global(n, c).ok(),
        _ => None,
    }
}

fn resolve_chi(model: &ModelSection, n: usize) -> Result<ChiProfile, ConfigError> {
    let chi = match (&model.chi, model.p) {
        (ChiSpec::Profile(_), Some(_)) => {
            return Err(ConfigError::new("model.p", "p only applies when chi is a bare strength"));
        }
        (ChiSpec::Profile(p), None) => p.clone(),
        (ChiSpec::Strength(s), p) => {
            let p = p.unwrap_or(n as f64);
            if n == 2 && p == 2.0 {
                ChiProfile::Constant { chi0: *s }
            } else {
                ChiProfile::Power { strength: *s, exponent: p }
            }
        }
    };
    chi.validate().map_err(|e| ConfigError::new("model.chi", e.to_string()))?;
    if let Some((_, p)) = chi.power_form() {
        if p > n as f64 {
            return Err(ConfigError::new("model.p", format!("p = {p} exceeds n = {n}")));
        }
    }
    Ok(chi)
}

fn parse_initial(value: &serde_json::Value, threshold: Option<f64>) -> Result<(InitialDensity, Option<MassSpec>), ConfigError> {
    let mut value = value.clone();
    let obj = value
        .as_object_mut()
        .ok_or_else(|| ConfigError::new("initial", "expected an object with a \"kind\" key"))?;
    let spec = match obj.get("mass") {
        Some(m) => Some(
            serde_json::from_value::<MassSpec>(m.clone()).map_err(|e| ConfigError::new("initial.mass", e.to_string()))?,
        ),
        None => None,
    };
    let mass = spec.map_or(0.0, |s| s.resolve(threshold));
    obj.insert("mass".into(), serde_json::json!(mass));
    let density: InitialDensity = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "initial".to_string() } else { format!("initial.{path}") };
        ConfigError::new(key, e.into_inner().to_string())
    })?;
    Ok((density, spec))
}

fn initial_error(e: SolverError, density: &InitialDensity) -> ConfigError {
    let key = if density.mass() < 0.0 || !density.mass().is_finite() { "initial.mass" } else { "initial" };
    ConfigError::new(key, e.to_string())
}

fn resolve(raw: RawConfig) -> Result<ScenarioConfig, ConfigError> {
    let n = raw.model.n.unwrap_or(2);
    if n < 2 {
        return Err(ConfigError::new("model.n", format!("dimension must be >= 2, got {n}")));
    }
    let chi = resolve_chi(&raw.model, n)?;
    let threshold = relevant_threshold(n, &chi);

    let length = raw.domain.length.unwrap_or(1.0);
    if !(length.is_finite() && length > 0.0) {
        return Err(ConfigError::new("domain.length", format!("must be > 0, got {length}")));
    }
    let nodes = raw.domain.nodes.unwrap_or(1024);
    let grid = RadialGrid::new(length, nodes).map_err(|e| ConfigError::new("domain.nodes", e.to_string()))?;

    let strength = chi.power_form().filter(|&(_, p)| p == n as f64).map(|(c, _)| c);
    let solver = match strength {
        Some(c) => {
            let defaults = SolverConfig::default();
            let cfg = SolverConfig {
                chi: c,
                dt_init: raw.time.dt_init.unwrap_or(defaults.dt_init),
                dt_min: raw.time.dt_min.unwrap_or(defaults.dt_min),
                t_end: raw.time.t_end.unwrap_or(defaults.t_end),
                blowup_factor: raw.detectors.blowup_factor.unwrap_or(defaults.blowup_factor),
                safety: raw.detectors.safety.unwrap_or(defaults.safety),
            };
            validate_solver(&cfg)?;
            Some(cfg)
        }
        None => None,
    };

    let (initial, mass_input) = match &raw.initial {
        Some(v) => {
            let (d, spec) = parse_initial(v, threshold)?;
            (Some(d), spec)
        }
        None => (None, None),
    };

    let needs_solver = matches!(raw.scenario, Scenario::SimulateRadial)
        || (raw.scenario == Scenario::SweepMass && !is_moment_regime(n, &chi));
    if needs_solver && solver.is_none() {
        return Err(ConfigError::new(
            "model.chi",
            format!("the radial solver needs chi*|x|^(n-2) (a constant in the plane); got {chi:?}"),
        ));
    }
    if raw.scenario == Scenario::SweepMass && is_moment_regime(n, &chi) && raw.sweep.is_some() && initial.is_none() && raw.classify.m0.is_none() {
        return Err(ConfigError::new("initial", "needed to compute the initial second moment"));
    }
    if matches!(raw.scenario, Scenario::SimulateRadial | Scenario::SweepMass) {
        let density = initial.as_ref().ok_or_else(|| ConfigError::new("initial", "required for this scenario"))?;
        density.validate(grid.length).map_err(|e| initial_error(e, density))?;
        if raw.scenario == Scenario::SimulateRadial && mass_input.is_none() {
            return Err(ConfigError::new("initial.mass", "required"));
        }
    }

    let sweep = match (raw.scenario, raw.sweep) {
        (Scenario::SweepMass, None) => return Err(ConfigError::new("sweep", "required for sweep-mass")),
        (Scenario::SweepMass, Some(s)) => Some(resolve_sweep(s, threshold)?),
        (_, Some(_)) => return Err(ConfigError::new("sweep", "only valid with scenario sweep-mass")),
        (_, None) => None,
    };

    let mut verify = VerifyOptions::default();
    if let Some(s) = raw.verify.suites {
        if s.is_empty() {
            return Err(ConfigError::new("verify.suites", "at least one suite is required"));
        }
        verify.suites = s;
    }
    for (key, value, slot) in [
        ("verify.draws", raw.verify.draws, &mut verify.draws),
        ("verify.mc_pairs", raw.verify.mc_pairs, &mut verify.mc_pairs),
        ("verify.mixtures", raw.verify.mixtures, &mut verify.mixtures),
    ] {
        if let Some(v) = value {
            if v == 0 {
                return Err(ConfigError::new(key, "must be >= 1"));
            }
            *slot = v;
        }
    }
    if verify.mc_pairs < 2 {
        return Err(ConfigError::new("verify.mc_pairs", "must be >= 2"));
    }

    let classify_mass = raw.classify.mass.map(|m| m.resolve(threshold)).or(initial.as_ref().map(|d| d.mass()));
    if raw.scenario == Scenario::Classify {
        match classify_mass {
            None => return Err(ConfigError::new("classify.mass", "required (or give initial.mass)")),
            Some(m) if !(m.is_finite() && m > 0.0) => {
                let key = if raw.classify.mass.is_some() { "classify.mass" } else { "initial.mass" };
                return Err(ConfigError::new(key, format!("must be > 0, got {m}")));
            }
            _ => {}
        }
    }
    if let Some(m0) = raw.classify.m0 {
        if !(m0.is_finite() && m0 >= 0.0) {
            return Err(ConfigError::new("classify.m0", format!("must be >= 0, got {m0}")));
        }
    }
    if let Some(d) = &initial {
        if raw.scenario == Scenario::Classify {
            d.validate(grid.length).map_err(|e| initial_error(e, d))?;
        }
    }
    let classify = ClassifyOptions {
        mass: classify_mass,
        mass_input: raw.classify.mass.or(mass_input),
        m0: raw.classify.m0,
        radial_ball: raw.classify.radial_ball.unwrap_or(true),
        monotone_samples: raw.classify.monotone_samples.unwrap_or(10_000).max(2),
    };

    Ok(ScenarioConfig {
        scenario: raw.scenario,
        n,
        chi,
        threshold,
        grid,
        initial,
        mass_input,
        solver,
        output_dir: raw.output.dir,
        seed: raw.seed.unwrap_or(0),
        sweep,
        verify,
        classify,
    })
}

/// `n ≥ 3` with `χ·|x|^{p−2}`, `p < n`: only the moment certificate applies.
pub fn is_moment_regime(n: usize, chi: &ChiProfile) -> bool {
    n >= 3 && chi.power_form().is_some_and(|(_, p)| p < n as f64)
}

fn validate_solver(cfg: &SolverConfig) -> Result<(), ConfigError> {
    if !(cfg.dt_init.is_finite() && cfg.dt_init > 0.0) {
        return Err(ConfigError::new("time.dt_init", format!("must be > 0, got {}", cfg.dt_init)));
    }
    if !(cfg.dt_min > 0.0 && cfg.dt_min < cfg.dt_init) {
        return Err(ConfigError::new(
            "time.dt_min",
            format!("need 0 < dt_min < dt_init, got {} vs {}", cfg.dt_min, cfg.dt_init),
        ));
    }
    if !(cfg.t_end.is_finite() && cfg.t_end > 0.0) {
        return Err(ConfigError::new("time.t_end", format!("must be > 0, got {}", cfg.t_end)));
    }
    if !(cfg.blowup_factor >= 1e3) {
        return Err(ConfigError::new("detectors.blowup_factor", format!("must be >= 1e3, got {}", cfg.blowup_factor)));
    }
    if !(cfg.safety > 0.0 && cfg.safety < 1.0) {
        return Err(ConfigError::new("detectors.safety", format!("must lie in (0, 1), got {}", cfg.safety)));
    }
    Ok(())
}

fn resolve_sweep(s: SweepSection, threshold: Option<f64>) -> Result<SweepSpec, ConfigError> {
    if s.mass_grid.is_empty() {
        return Err(ConfigError::new("sweep.mass_grid", "must not be empty"));
    }
    let masses: Vec<f64> = s.mass_grid.iter().map(|m| m.resolve(threshold)).collect();
    for (i, m) in masses.iter().enumerate() {
        if !(m.is_finite() && *m > 0.0) {
            return Err(ConfigError::new(format!("sweep.mass_grid[{i}]"), format!("mass must be > 0, got {m}")));
        }
    }
    if !masses.windows(2).all(|w| w[1] > w[0]) {
        return Err(ConfigError::new("sweep.mass_grid", "masses must be strictly increasing"));
    }
    let parallelism = s.parallelism.unwrap_or(1);
    if parallelism == 0 {
        return Err(ConfigError::new("sweep.parallelism", "must be >= 1"));
    }
    Ok(SweepSpec { masses, inputs: s.mass_grid, parallelism })
}
