//! Run configuration: a TOML document with `model`, `sim` and `verify`
//! tables. Unknown keys are rejected.

use std::path::Path;

use maxchain::chain::{ChainConfig, Persistence};
use maxchain::geometry::{UnitVec3, DEFAULT_KAPPA_MAX};
use maxchain::spectral::{IntensityMode, StoppingMode};
use toml::{Table, Value};

use crate::CliError;

const MODEL_KEYS: &[&str] = &["a", "nu", "step", "phi", "theta", "axis", "kappa", "kappa_max", "intensity_mode"];
const SIM_KEYS: &[&str] = &["seed", "grid_n", "eval_mode", "steps", "n_copies"];
const VERIFY_KEYS: &[&str] = &[
    "gamma",
    "R",
    "replications",
    "epsilon",
    "delta",
    "horizon",
    "h0",
    "h1",
    "h2",
    "initial",
    "probe",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub persistence: Persistence,
    pub theta: f64,
    pub axis: UnitVec3,
    pub kappa: f64,
    pub kappa_max: f64,
    pub intensity: IntensityMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub grid_n: usize,
    pub eval_mode: StoppingMode,
    pub steps: u64,
    pub n_copies: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub gamma: f64,
    pub r: f64,
    pub replications: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub horizon: u64,
    pub h0: f64,
    pub h1: f64,
    pub h2: f64,
    pub initial: f64,
    pub probe: UnitVec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub sim: SimConfig,
    pub verify: VerifyConfig,
}

fn err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Parses `key=value`, reading the value as a TOML value and falling back to
/// a bare string.
fn parse_override(spec: &str) -> Result<(Vec<String>, Value), CliError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| err(format!("override `{spec}` must have the form key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(str::to_string).collect();
    if path.len() != 2 || path.iter().any(String::is_empty) {
        return Err(err(format!("override key `{}` must be section.key", key.trim())));
    }
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()));
    Ok((path, value))
}

fn check_keys(doc: &Table) -> Result<(), CliError> {
    for (section, value) in doc {
        let known = match section.as_str() {
            "model" => MODEL_KEYS,
            "sim" => SIM_KEYS,
            "verify" => VERIFY_KEYS,
            _ => return Err(err(format!("unknown key `{section}`"))),
        };
        let table = value
            .as_table()
            .ok_or_else(|| err(format!("`{section}` must be a table")))?;
        if let Some(key) = table.keys().find(|k| !known.contains(&k.as_str())) {
            return Err(err(format!("unknown key `{section}.{key}`")));
        }
    }
    Ok(())
}

struct Reader<'a> {
    doc: &'a Table,
}

impl Reader<'_> {
    fn get(&self, section: &str, key: &str) -> Option<&Value> {
        self.doc.get(section).and_then(|s| s.as_table()).and_then(|t| t.get(key))
    }

    fn f64(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Float(v)) => Ok(Some(*v)),
            Some(Value::Integer(v)) => Ok(Some(*v as f64)),
            Some(_) => Err(err(format!("`{section}.{key}` must be a number"))),
        }
    }

    fn req_f64(&self, section: &str, key: &str) -> Result<f64, CliError> {
        self.f64(section, key)?
            .ok_or_else(|| err(format!("missing required key `{section}.{key}`")))
    }

    fn u64(&self, section: &str, key: &str) -> Result<Option<u64>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::Integer(v)) if *v >= 0 => Ok(Some(*v as u64)),
            // Seeds above i64::MAX can be given as strings.
            Some(Value::String(s)) => s
                .parse::<u64>()
                .map(Some)
                .map_err(|_| err(format!("`{section}.{key}` must be a nonnegative integer"))),
            Some(_) => Err(err(format!("`{section}.{key}` must be a nonnegative integer"))),
        }
    }

    fn str(&self, section: &str, key: &str) -> Result<Option<&str>, CliError> {
        match self.get(section, key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(err(format!("`{section}.{key}` must be a string"))),
        }
    }

    fn vec3(&self, section: &str, key: &str) -> Result<Option<UnitVec3>, CliError> {
        let Some(v) = self.get(section, key) else { return Ok(None) };
        let bad = || err(format!("`{section}.{key}` must be a nonzero array of three numbers"));
        let arr = v.as_array().filter(|a| a.len() == 3).ok_or_else(bad)?;
        let mut c = [0.0; 3];
        for (slot, item) in c.iter_mut().zip(arr) {
            *slot = match item {
                Value::Float(f) => *f,
                Value::Integer(i) => *i as f64,
                _ => return Err(bad()),
            };
        }
        UnitVec3::from_array(c).map(Some).map_err(|_| bad())
    }
}

fn positive(v: f64, path: &str) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(err(format!("`{path}` must be positive, got {v}")))
    }
}

fn open_unit(v: f64, path: &str) -> Result<f64, CliError> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(err(format!("`{path}` must lie in (0, 1), got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text, overrides, seed)
    }

    pub fn parse(text: &str, overrides: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let mut doc: Table = text.parse().map_err(|e| err(format!("invalid TOML: {e}")))?;
        for spec in overrides {
            let (path, value) = parse_override(spec)?;
            let section = doc
                .entry(path[0].clone())
                .or_insert_with(|| Value::Table(Table::new()))
                .as_table_mut()
                .ok_or_else(|| err(format!("`{}` must be a table", path[0])))?;
            section.insert(path[1].clone(), value);
        }
        check_keys(&doc)?;
        let r = Reader { doc: &doc };

        let a = r.f64("model", "a")?;
        let nu = r.f64("model", "nu")?;
        let step = r.f64("model", "step")?;
        let phi = r.f64("model", "phi")?;
        let given = [a.is_some(), nu.is_some(), phi.is_some()].iter().filter(|g| **g).count();
        if given != 1 {
            return Err(err("exactly one of `model.a`, `model.nu` or `model.phi` must be given"));
        }
        if step.is_some() && nu.is_none() {
            return Err(err("`model.step` is only meaningful with `model.nu`"));
        }
        let persistence = match (a, nu, phi) {
            (Some(a), _, _) => Persistence::Direct { a: open_unit(a, "model.a")? },
            (_, Some(nu), _) => {
                let nu = positive(nu, "model.nu")?;
                let step = positive(step.unwrap_or(1.0), "model.step")?;
                open_unit((-nu * step).exp(), "model.nu")?;
                Persistence::Continuous { nu, step }
            }
            (_, _, Some(phi)) => Persistence::Discrete { phi: open_unit(phi, "model.phi")? },
            _ => unreachable!(),
        };
        let theta = r.req_f64("model", "theta")?;
        if !theta.is_finite() {
            return Err(err("`model.theta` must be finite"));
        }
        let axis = r
            .vec3("model", "axis")?
            .ok_or_else(|| err("missing required key `model.axis`"))?;
        let kappa_max = match r.f64("model", "kappa_max")? {
            Some(v) => positive(v, "model.kappa_max")?,
            None => DEFAULT_KAPPA_MAX,
        };
        let kappa = r.req_f64("model", "kappa")?;
        if !(kappa >= 0.0 && kappa <= kappa_max) {
            return Err(err(format!("`model.kappa` must lie in [0, {kappa_max}], got {kappa}")));
        }
        let intensity = match r.str("model", "intensity_mode")? {
            None | Some("exact") => IntensityMode::Exact,
            Some("paper") => IntensityMode::Paper,
            Some(other) => return Err(err(format!("`model.intensity_mode` must be exact or paper, got `{other}`"))),
        };

        let seed = match seed {
            Some(s) => s,
            None => r
                .u64("sim", "seed")?
                .ok_or_else(|| err("missing required key `sim.seed`"))?,
        };
        let count = |section: &str, key: &str, default: u64| -> Result<u64, CliError> {
            let v = r.u64(section, key)?.unwrap_or(default);
            if v == 0 {
                return Err(err(format!("`{section}.{key}` must be at least 1")));
            }
            Ok(v)
        };
        let grid_n = count("sim", "grid_n", 4096)? as usize;
        let eval_mode = match r.str("sim", "eval_mode")? {
            None | Some("grid-exact") => StoppingMode::GridExact,
            Some("sphere-exact") => StoppingMode::SphereExact,
            Some(other) => {
                return Err(err(format!("`sim.eval_mode` must be grid-exact or sphere-exact, got `{other}`")))
            }
        };

        let gamma = open_unit(r.f64("verify", "gamma")?.unwrap_or(0.5), "verify.gamma")?;
        let replications = count("verify", "replications", 10_000)? as usize;
        if replications < 100 {
            return Err(err(format!("`verify.replications` must be at least 100, got {replications}")));
        }
        let horizon = count("verify", "horizon", 20)?;
        let verify = VerifyConfig {
            gamma,
            r: positive(r.f64("verify", "R")?.unwrap_or(1.0), "verify.R")?,
            replications,
            epsilon: positive(r.f64("verify", "epsilon")?.unwrap_or(1e-3), "verify.epsilon")?,
            delta: open_unit(r.f64("verify", "delta")?.unwrap_or(1e-3), "verify.delta")?,
            horizon,
            h0: positive(r.f64("verify", "h0")?.unwrap_or(100.0), "verify.h0")?,
            h1: positive(r.f64("verify", "h1")?.unwrap_or(2.0), "verify.h1")?,
            h2: positive(r.f64("verify", "h2")?.unwrap_or(1.0), "verify.h2")?,
            initial: positive(r.f64("verify", "initial")?.unwrap_or(1.0), "verify.initial")?,
            probe: r
                .vec3("verify", "probe")?
                .unwrap_or(UnitVec3::new(0.36, -0.48, 0.8).expect("nonzero")),
        };
        let sim = SimConfig {
            seed,
            grid_n,
            eval_mode,
            steps: count("sim", "steps", horizon)?,
            n_copies: count("sim", "n_copies", 5)? as usize,
        };
        let config = RunConfig {
            model: ModelConfig {
                persistence,
                theta,
                axis,
                kappa,
                kappa_max,
                intensity,
            },
            sim,
            verify,
        };
        config.chain()?;
        Ok(config)
    }

    pub fn chain(&self) -> Result<ChainConfig, CliError> {
        let m = &self.model;
        Ok(ChainConfig::builder()
            .persistence(m.persistence)
            .theta(m.theta)
            .axis(m.axis)
            .kappa(m.kappa)
            .kappa_max(m.kappa_max)
            .intensity(m.intensity)
            .build()?)
    }
}
