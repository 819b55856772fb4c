//! Scenario configuration: INI text with `[grid]`, `[model]`, `[numerics]`,
//! `[output]` and `[scenario]` sections.
//!
//! Every key has a default, some of which depend on the command. Unknown
//! sections and keys are rejected, as are keys outside a section and
//! repeated keys. Lines are `key = value`, `[section]`, blank, or comments
//! starting with `#` or `;`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::{json, Value};
use thirdkind::dynamics::{Coupling, EvolutionOptions};
use thirdkind::stationary::{EntropyMode, ScfConfig};
use thirdkind::{Grid, ModelParams};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("line {line}: key `{key}` must appear inside a section")]
    Sectionless { line: usize, key: String },
    #[error("unknown section [{0}]")]
    UnknownSection(String),
    #[error("unknown key `{key}` in [{section}]")]
    UnknownKey { section: String, key: String },
    #[error("line {line}: key `{key}` in [{section}] is given more than once")]
    Duplicate { line: usize, section: String, key: String },
    #[error("{path}:{line}: {source}")]
    AtLine {
        path: PathBuf,
        line: usize,
        #[source]
        source: Box<ConfigError>,
    },
    #[error("bad value `{value}` for [{section}] {key}: {reason}")]
    BadValue {
        section: String,
        key: String,
        value: String,
        reason: String,
    },
    #[error("override `{0}` must look like section.key=value")]
    BadOverride(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Stationary,
    Evolve,
    IrScan,
    GaugeCheck,
    Variational,
    Superposition,
    Microcausality,
    Invariants,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Command::Stationary => "stationary",
            Command::Evolve => "evolve",
            Command::IrScan => "ir-scan",
            Command::GaugeCheck => "gauge-check",
            Command::Variational => "variational",
            Command::Superposition => "superposition",
            Command::Microcausality => "microcausality",
            Command::Invariants => "invariants",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SMode {
    ChargeNeutral,
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialState {
    /// Self-consistent ground state plus a small admixture of a linear eigenstate.
    Scf,
    /// Normalized Gaussian packet with a momentum kick.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n_sites: usize,
    pub spacing_a: f64,
    pub n_phi: usize,
    pub phi_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub mass_m: f64,
    pub quartic_lambda: f64,
    pub length_l: f64,
    pub entropy_s: Option<f64>,
    pub s_mode: SMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericsConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub poisson_tol: f64,
    pub tol_omega: f64,
    pub tol_rho: f64,
    pub mixing_alpha: f64,
    pub max_iter: usize,
    pub target_index: usize,
    pub prefactor_floor: f64,
    pub linear: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub record_stride: usize,
}

/// Command-specific knobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioParams {
    pub l_values: Vec<f64>,
    pub initial: InitialState,
    pub perturbation: f64,
    pub perturb_index: usize,
    pub center: f64,
    pub width: f64,
    pub momentum: f64,
    pub kick_site: usize,
    pub kick_strength: f64,
    pub t_spread: f64,
    pub separation: f64,
    pub control_separation: f64,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub sigma_rel_tol: f64,
    pub gauge_constant: f64,
    pub gauge_amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub command: Command,
    pub grid: GridConfig,
    pub model: ModelConfig,
    pub numerics: NumericsConfig,
    pub output: OutputConfig,
    pub scenario: ScenarioParams,
}

impl ScenarioConfig {
    /// Defaults for `command` before any file or override is applied.
    pub fn defaults(command: Command) -> Self {
        let mut c = ScenarioConfig {
            command,
            grid: GridConfig {
                n_sites: 1,
                spacing_a: 1.0,
                n_phi: 128,
                phi_max: 8.0,
            },
            model: ModelConfig {
                mass_m: 1.0,
                quartic_lambda: 0.0,
                length_l: 100.0,
                entropy_s: None,
                s_mode: SMode::ChargeNeutral,
            },
            numerics: NumericsConfig {
                dt: 1e-3,
                n_steps: 1000,
                poisson_tol: 1e-10,
                tol_omega: 1e-9,
                tol_rho: 1e-8,
                mixing_alpha: 0.3,
                max_iter: 500,
                target_index: 0,
                prefactor_floor: 1e-3,
                linear: false,
                seed: 20240601,
            },
            output: OutputConfig {
                directory: None,
                record_stride: 10,
            },
            scenario: ScenarioParams {
                l_values: vec![2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
                initial: InitialState::Scf,
                perturbation: 0.03,
                perturb_index: 40,
                center: 0.5,
                width: 1.0,
                momentum: 1.0,
                kick_site: 0,
                kick_strength: 0.02,
                t_spread: 0.5,
                separation: 6.0,
                control_separation: 0.5,
                sigma_lo: 0.2,
                sigma_hi: 3.0,
                sigma_rel_tol: 1e-6,
                gauge_constant: 0.7,
                gauge_amplitude: 1.0,
            },
        };
        match command {
            Command::Evolve => {
                c.grid.n_phi = 64;
                c.grid.phi_max = 6.0;
                c.model.length_l = 2.0;
                c.numerics.dt = 2e-4;
                c.numerics.n_steps = 5000;
            }
            Command::Microcausality => {
                c.grid.n_sites = 2;
                c.grid.spacing_a = 4.0;
                c.grid.n_phi = 32;
                c.grid.phi_max = 2.5;
                c.model.length_l = 2.0;
            }
            Command::Superposition => {
                c.grid.n_phi = 256;
                c.grid.phi_max = 12.0;
                c.model.length_l = 2.0;
            }
            Command::Invariants => {
                c.grid.n_sites = 2;
                c.grid.n_phi = 9;
                c.grid.phi_max = 2.0;
            }
            _ => {}
        }
        c
    }

    /// Reads `path`, applies `overrides` (`section.key=value`) and validates.
    pub fn load(command: Command, path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(command, &text, path, overrides)
    }

    pub fn from_text(command: Command, text: &str, path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut cfg = Self::defaults(command);
        let mut seen = std::collections::HashSet::new();
        for entry in parse_ini(text, path)? {
            let at = |source: ConfigError| ConfigError::AtLine {
                path: path.to_path_buf(),
                line: entry.line,
                source: Box::new(source),
            };
            if !seen.insert((entry.section.clone(), entry.key.clone())) {
                return Err(ConfigError::Duplicate {
                    line: entry.line,
                    section: entry.section,
                    key: entry.key,
                });
            }
            cfg.set(&entry.section, &entry.key, &entry.value).map_err(at)?;
        }
        for o in overrides {
            let (lhs, value) = o.split_once('=').ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
            let (section, key) = lhs
                .trim()
                .split_once('.')
                .ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
            cfg.set(section, key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = |reason: String| ConfigError::BadValue {
            section: section.to_string(),
            key: key.to_string(),
            value: value.to_string(),
            reason,
        };
        fn num<T: FromStr>(v: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            v.trim().parse::<T>().map_err(|e| e.to_string())
        }
        let unknown = || ConfigError::UnknownKey {
            section: section.to_string(),
            key: key.to_string(),
        };
        match section {
            "grid" => match key {
                "n_sites" => self.grid.n_sites = num(value).map_err(bad)?,
                "spacing_a" => self.grid.spacing_a = num(value).map_err(bad)?,
                "n_phi" => self.grid.n_phi = num(value).map_err(bad)?,
                "phi_max" => self.grid.phi_max = num(value).map_err(bad)?,
                _ => return Err(unknown()),
            },
            "model" => match key {
                "mass_m" => self.model.mass_m = num(value).map_err(bad)?,
                "quartic_lambda" => self.model.quartic_lambda = num(value).map_err(bad)?,
                "length_l" => self.model.length_l = num(value).map_err(bad)?,
                "entropy_S" => self.model.entropy_s = Some(num(value).map_err(bad)?),
                "s_mode" => {
                    self.model.s_mode = match value.trim() {
                        "charge_neutral" => SMode::ChargeNeutral,
                        "fixed" => SMode::Fixed,
                        _ => return Err(bad("expected charge_neutral or fixed".into())),
                    }
                }
                _ => return Err(unknown()),
            },
            "numerics" => match key {
                "dt" => self.numerics.dt = num(value).map_err(bad)?,
                "n_steps" => self.numerics.n_steps = num(value).map_err(bad)?,
                "poisson_tol" => self.numerics.poisson_tol = num(value).map_err(bad)?,
                "tol_omega" => self.numerics.tol_omega = num(value).map_err(bad)?,
                "tol_rho" => self.numerics.tol_rho = num(value).map_err(bad)?,
                "mixing_alpha" => self.numerics.mixing_alpha = num(value).map_err(bad)?,
                "max_iter" => self.numerics.max_iter = num(value).map_err(bad)?,
                "target_index" => self.numerics.target_index = num(value).map_err(bad)?,
                "prefactor_floor" => self.numerics.prefactor_floor = num(value).map_err(bad)?,
                "linear" => self.numerics.linear = num(value).map_err(bad)?,
                "seed" => self.numerics.seed = num(value).map_err(bad)?,
                _ => return Err(unknown()),
            },
            "output" => match key {
                "directory" => self.output.directory = Some(PathBuf::from(value.trim())),
                "record_stride" => self.output.record_stride = num(value).map_err(bad)?,
                _ => return Err(unknown()),
            },
            "scenario" => {
                let s = &mut self.scenario;
                match key {
                    "l_values" => {
                        s.l_values = value
                            .split(',')
                            .map(num::<f64>)
                            .collect::<Result<_, _>>()
                            .map_err(bad)?
                    }
                    "initial" => {
                        s.initial = match value.trim() {
                            "scf" => InitialState::Scf,
                            "gaussian" => InitialState::Gaussian,
                            _ => return Err(bad("expected scf or gaussian".into())),
                        }
                    }
                    "perturbation" => s.perturbation = num(value).map_err(bad)?,
                    "perturb_index" => s.perturb_index = num(value).map_err(bad)?,
                    "center" => s.center = num(value).map_err(bad)?,
                    "width" => s.width = num(value).map_err(bad)?,
                    "momentum" => s.momentum = num(value).map_err(bad)?,
                    "kick_site" => s.kick_site = num(value).map_err(bad)?,
                    "kick_strength" => s.kick_strength = num(value).map_err(bad)?,
                    "t_spread" => s.t_spread = num(value).map_err(bad)?,
                    "separation" => s.separation = num(value).map_err(bad)?,
                    "control_separation" => s.control_separation = num(value).map_err(bad)?,
                    "sigma_lo" => s.sigma_lo = num(value).map_err(bad)?,
                    "sigma_hi" => s.sigma_hi = num(value).map_err(bad)?,
                    "sigma_rel_tol" => s.sigma_rel_tol = num(value).map_err(bad)?,
                    "gauge_constant" => s.gauge_constant = num(value).map_err(bad)?,
                    "gauge_amplitude" => s.gauge_amplitude = num(value).map_err(bad)?,
                    _ => return Err(unknown()),
                }
            }
            _ => return Err(ConfigError::UnknownSection(section.to_string())),
        }
        Ok(())
    }

    /// Checks every field against the solver preconditions.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        self.grid().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.params().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.scf_config()
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let n = &self.numerics;
        if !(n.dt > 0.0 && n.dt.is_finite()) {
            return invalid("dt must be positive".into());
        }
        if !(n.prefactor_floor > 0.0) {
            return invalid("prefactor_floor must be positive".into());
        }
        if self.output.record_stride == 0 {
            return invalid("record_stride must be at least 1".into());
        }
        match (self.model.s_mode, self.model.entropy_s) {
            (SMode::Fixed, None) => return invalid("s_mode = fixed needs entropy_S".into()),
            (SMode::ChargeNeutral, Some(_)) => return invalid("entropy_S is only used with s_mode = fixed".into()),
            _ => {}
        }
        let s = &self.scenario;
        if s.kick_site >= self.grid.n_sites {
            return invalid("kick_site must be a lattice site".into());
        }
        if !(s.width > 0.0 && s.t_spread >= 0.0 && s.separation > 0.0 && s.control_separation > 0.0) {
            return invalid("width and separations must be positive, t_spread non-negative".into());
        }
        if !(s.sigma_lo > 0.0 && s.sigma_hi > s.sigma_lo && s.sigma_rel_tol > 0.0) {
            return invalid("need 0 < sigma_lo < sigma_hi and sigma_rel_tol > 0".into());
        }
        if s.l_values.iter().any(|l| !(*l > 0.0)) {
            return invalid("l_values must be positive".into());
        }
        Ok(())
    }

    pub fn grid(&self) -> thirdkind::Result<Grid> {
        let g = &self.grid;
        Grid::new(g.n_sites, g.spacing_a, g.n_phi, g.phi_max)
    }

    pub fn params(&self) -> thirdkind::Result<ModelParams> {
        let m = &self.model;
        ModelParams::new(m.mass_m, m.quartic_lambda, m.length_l, m.entropy_s.unwrap_or(0.0))
    }

    pub fn entropy_mode(&self) -> EntropyMode {
        match self.model.s_mode {
            SMode::ChargeNeutral => EntropyMode::ChargeNeutral,
            SMode::Fixed => EntropyMode::Fixed(self.model.entropy_s.unwrap_or(0.0)),
        }
    }

    pub fn scf_config(&self) -> ScfConfig {
        let n = &self.numerics;
        ScfConfig {
            mode: self.entropy_mode(),
            mixing_alpha: n.mixing_alpha,
            tol_omega: n.tol_omega,
            tol_rho: n.tol_rho,
            max_iter: n.max_iter,
            target_index: n.target_index,
            poisson_tol: n.poisson_tol,
            ..ScfConfig::default()
        }
    }

    pub fn evolution_options(&self) -> EvolutionOptions {
        EvolutionOptions {
            coupling: if self.numerics.linear {
                Coupling::Linear
            } else {
                Coupling::Full
            },
            prefactor_floor: self.numerics.prefactor_floor,
        }
    }

    /// The resolved configuration as INI text that [`ScenarioConfig::load`]
    /// reads back to an identical value.
    pub fn to_ini(&self) -> String {
        let mut out = String::new();
        for (section, entries) in self.entries() {
            let _ = writeln!(out, "[{section}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
            out.push('\n');
        }
        out
    }

    /// The resolved configuration as JSON, grouped by section.
    pub fn to_json(&self) -> Value {
        let mut root = serde_json::Map::new();
        root.insert("command".into(), json!(self.command.as_str()));
        for (section, entries) in self.entries() {
            let obj: serde_json::Map<String, Value> = entries
                .into_iter()
                .map(|(k, v)| {
                    let val = serde_json::from_str::<Value>(&v)
                        .ok()
                        .filter(|x| x.is_number() || x.is_boolean())
                        .unwrap_or(Value::String(v));
                    (k.to_string(), val)
                })
                .collect();
            root.insert(section.to_string(), Value::Object(obj));
        }
        Value::Object(root)
    }

    fn entries(&self) -> Vec<(&'static str, Vec<(&'static str, String)>)> {
        let f = |x: f64| format!("{x:?}");
        let g = &self.grid;
        let m = &self.model;
        let n = &self.numerics;
        let s = &self.scenario;
        let mut model = vec![
            ("mass_m", f(m.mass_m)),
            ("quartic_lambda", f(m.quartic_lambda)),
            ("length_l", f(m.length_l)),
            (
                "s_mode",
                match m.s_mode {
                    SMode::ChargeNeutral => "charge_neutral".into(),
                    SMode::Fixed => "fixed".into(),
                },
            ),
        ];
        if let Some(v) = m.entropy_s {
            model.push(("entropy_S", f(v)));
        }
        let mut output = vec![("record_stride", self.output.record_stride.to_string())];
        if let Some(d) = &self.output.directory {
            output.push(("directory", d.display().to_string()));
        }
        vec![
            (
                "grid",
                vec![
                    ("n_sites", g.n_sites.to_string()),
                    ("spacing_a", f(g.spacing_a)),
                    ("n_phi", g.n_phi.to_string()),
                    ("phi_max", f(g.phi_max)),
                ],
            ),
            ("model", model),
            (
                "numerics",
                vec![
                    ("dt", f(n.dt)),
                    ("n_steps", n.n_steps.to_string()),
                    ("poisson_tol", f(n.poisson_tol)),
                    ("tol_omega", f(n.tol_omega)),
                    ("tol_rho", f(n.tol_rho)),
                    ("mixing_alpha", f(n.mixing_alpha)),
                    ("max_iter", n.max_iter.to_string()),
                    ("target_index", n.target_index.to_string()),
                    ("prefactor_floor", f(n.prefactor_floor)),
                    ("linear", n.linear.to_string()),
                    ("seed", n.seed.to_string()),
                ],
            ),
            ("output", output),
            (
                "scenario",
                vec![
                    (
                        "l_values",
                        s.l_values.iter().map(|v| f(*v)).collect::<Vec<_>>().join(","),
                    ),
                    (
                        "initial",
                        match s.initial {
                            InitialState::Scf => "scf".into(),
                            InitialState::Gaussian => "gaussian".into(),
                        },
                    ),
                    ("perturbation", f(s.perturbation)),
                    ("perturb_index", s.perturb_index.to_string()),
                    ("center", f(s.center)),
                    ("width", f(s.width)),
                    ("momentum", f(s.momentum)),
                    ("kick_site", s.kick_site.to_string()),
                    ("kick_strength", f(s.kick_strength)),
                    ("t_spread", f(s.t_spread)),
                    ("separation", f(s.separation)),
                    ("control_separation", f(s.control_separation)),
                    ("sigma_lo", f(s.sigma_lo)),
                    ("sigma_hi", f(s.sigma_hi)),
                    ("sigma_rel_tol", f(s.sigma_rel_tol)),
                    ("gauge_constant", f(s.gauge_constant)),
                    ("gauge_amplitude", f(s.gauge_amplitude)),
                ],
            ),
        ]
    }
}

const SECTIONS: [&str; 5] = ["grid", "model", "numerics", "output", "scenario"];

struct Entry {
    line: usize,
    section: String,
    key: String,
    value: String,
}

fn parse_ini(text: &str, path: &Path) -> Result<Vec<Entry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let err = |msg: &str| ConfigError::Parse {
            path: path.to_path_buf(),
            line,
            msg: msg.to_string(),
        };
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with(';') {
            continue;
        }
        if let Some(rest) = t.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err("section header is missing `]`"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(ConfigError::AtLine {
                    path: path.to_path_buf(),
                    line,
                    source: Box::new(ConfigError::UnknownSection(name.to_string())),
                });
            }
            section = Some(name.to_string());
            continue;
        }
        let (key, value) = t.split_once('=').ok_or_else(|| err("expected `key = value`"))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(err("empty key"));
        }
        let Some(section) = &section else {
            return Err(ConfigError::Sectionless {
                line,
                key: key.to_string(),
            });
        };
        out.push(Entry {
            line,
            section: section.clone(),
            key: key.to_string(),
            value: value.trim().to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, overrides: &[&str]) -> Result<ScenarioConfig, ConfigError> {
        let o: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
        ScenarioConfig::from_text(Command::Stationary, text, Path::new("test.ini"), &o)
    }

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(parse("", &[]).unwrap(), ScenarioConfig::defaults(Command::Stationary));
    }

    #[test]
    fn values_and_overrides_apply_in_order() {
        let c = parse(
            "# comment\n[grid]\nn_phi = 64\n[model]\nlength_l = 3\n",
            &["grid.n_phi=32"],
        )
        .unwrap();
        assert_eq!(c.grid.n_phi, 32);
        assert_eq!(c.model.length_l, 3.0);
    }

    #[test]
    fn unknown_keys_and_sections_are_errors() {
        let unknown_key = |e: &ConfigError| match e {
            ConfigError::AtLine { line, source, .. } => (*line, matches!(**source, ConfigError::UnknownKey { .. })),
            _ => (0, false),
        };
        assert_eq!(unknown_key(&parse("[grid]\n\nnphi = 3\n", &[]).unwrap_err()), (3, true));
        assert!(matches!(
            parse("[gird]\nn_phi = 3\n", &[]),
            Err(ConfigError::AtLine { line: 1, .. })
        ));
        assert!(matches!(
            parse("n_phi = 3\n", &[]),
            Err(ConfigError::Sectionless { .. })
        ));
        assert!(matches!(
            parse("", &["grid.bogus=1"]),
            Err(ConfigError::UnknownKey { .. })
        ));
        assert!(matches!(parse("", &["n_phi=1"]), Err(ConfigError::BadOverride(_))));
    }

    #[test]
    fn duplicates_and_bad_values_are_errors() {
        assert!(matches!(
            parse("[grid]\nn_phi = 3\nn_phi = 4\n", &[]),
            Err(ConfigError::Duplicate { .. })
        ));
        match parse("[grid]\nn_phi = many\n", &[]).unwrap_err() {
            ConfigError::AtLine { line, source, .. } => {
                assert_eq!(line, 2);
                assert!(matches!(*source, ConfigError::BadValue { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse("[grid]\nn_phi = 2\n", &[]),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(
            parse("[model]\ns_mode = fixed\n", &[]),
            Err(ConfigError::Invalid(_))
        ));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        for (text, want) in [
            ("[grid]\nn_phi = 3\n[broken\n", 3),
            ("[grid]\nn_phi\nphi_max = 2\n", 2),
            ("[grid]\n = 2\n", 2),
        ] {
            match parse(text, &[]).unwrap_err() {
                ConfigError::Parse { line, .. } => assert_eq!(line, want, "{text:?}"),
                other => panic!("unexpected {other:?}"),
            }
        }
    }

    #[test]
    fn resolved_ini_round_trips() {
        let c = parse(
            "[model]\ns_mode = fixed\nentropy_S = 1.25\n[scenario]\nl_values = 1,2.5,7\n",
            &[],
        )
        .unwrap();
        let again = parse(&c.to_ini(), &[]).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.to_json()["model"]["entropy_S"], json!(1.25));
    }
}
