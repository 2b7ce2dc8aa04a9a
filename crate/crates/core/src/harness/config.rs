//! TOML run configuration with line-precise validation errors.

use std::path::Path;

use serde::Deserialize;
use toml::Spanned;

use crate::error::{Error, Result};
use crate::gw::{Caps, DEFAULT_TAIL_TOL};
use crate::mechanism::{Atom, Mechanism, StablePart};

pub const DEFAULT_SEED: u64 = 20_240_917;

pub const EXPERIMENTS: [&str; 8] = ["E1", "E2", "E3", "E4", "E5", "E6", "E7", "E8"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub root_find: f64,
    pub fixed_point: f64,
    pub tail: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { root_find: 1e-10, fixed_point: 1e-12, tail: DEFAULT_TAIL_TOL }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Overrides the default mechanism of the experiments that accept one.
    pub mechanism: Option<Mechanism>,
    pub lambda: Option<f64>,
    pub theta: Option<f64>,
    pub q: Option<f64>,
    /// Overrides every Monte Carlo sample size.
    pub replicates: Option<usize>,
    pub caps: Caps,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub experiment: Option<String>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            mechanism: None,
            lambda: None,
            theta: None,
            q: None,
            replicates: None,
            caps: Caps::default(),
            tolerances: Tolerances::default(),
            seed: DEFAULT_SEED,
            experiment: None,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMechanism {
    alpha: Option<f64>,
    beta: Option<f64>,
    stable_c: Option<f64>,
    stable_gamma: Option<f64>,
    atoms: Option<Vec<[f64; 2]>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCaps {
    max_nodes: Option<Spanned<i64>>,
    max_depth: Option<Spanned<i64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTolerances {
    root_find: Option<Spanned<f64>>,
    fixed_point: Option<Spanned<f64>>,
    tail: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mechanism: Option<Spanned<RawMechanism>>,
    lambda: Option<Spanned<f64>>,
    theta: Option<Spanned<f64>>,
    q: Option<Spanned<f64>>,
    replicates: Option<Spanned<i64>>,
    caps: Option<RawCaps>,
    tolerances: Option<RawTolerances>,
    seed: Option<Spanned<i64>>,
    experiment: Option<Spanned<String>>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

struct Located<'a> {
    text: &'a str,
}

impl Located<'_> {
    fn fail<T, S>(&self, at: &Spanned<S>, message: impl std::fmt::Display) -> Result<T> {
        Err(Error::Config(format!("line {}: {message}", line_of(self.text, at.span().start))))
    }

    fn positive_int(&self, v: &Option<Spanned<i64>>, name: &str, default: usize) -> Result<usize> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() > 0 => Ok(*s.get_ref() as usize),
            Some(s) => self.fail(s, format!("{name} must be a positive integer")),
        }
    }

    fn tolerance(&self, v: &Option<Spanned<f64>>, name: &str, default: f64) -> Result<f64> {
        match v {
            None => Ok(default),
            Some(s) if *s.get_ref() > 0.0 && *s.get_ref() <= 1e-6 => Ok(*s.get_ref()),
            Some(s) => self.fail(s, format!("{name} must lie in (0, 1e-6]")),
        }
    }

    fn finite(&self, v: &Option<Spanned<f64>>, name: &str) -> Result<Option<f64>> {
        match v {
            None => Ok(None),
            Some(s) if s.get_ref().is_finite() => Ok(Some(*s.get_ref())),
            Some(s) => self.fail(s, format!("{name} must be finite")),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Config> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| {
            let line = e.span().map(|s| format!("line {}: ", line_of(text, s.start))).unwrap_or_default();
            Error::Config(format!("{line}{}", e.message()))
        })?;
        let at = Located { text };
        let mut cfg = Config::default();
        if let Some(m) = &raw.mechanism {
            let r = m.get_ref();
            let stable = match (r.stable_c, r.stable_gamma) {
                (Some(c), Some(gamma)) => Some(StablePart { c, gamma }),
                (None, None) => None,
                _ => return at.fail(m, "stable_c and stable_gamma must be given together"),
            };
            let atoms = r.atoms.clone().unwrap_or_default().into_iter().map(|[r, m]| Atom { r, m }).collect();
            cfg.mechanism = match Mechanism::new(r.alpha.unwrap_or(0.0), r.beta.unwrap_or(0.0), stable, atoms) {
                Ok(mech) => Some(mech),
                Err(e) => return at.fail(m, format!("invalid mechanism: {e}")),
            };
        }
        if let Some(l) = &raw.lambda {
            if !(*l.get_ref() > 0.0 && l.get_ref().is_finite()) {
                return at.fail(l, "lambda must be positive and finite");
            }
            cfg.lambda = Some(*l.get_ref());
        }
        cfg.theta = at.finite(&raw.theta, "theta")?;
        cfg.q = at.finite(&raw.q, "q")?;
        if let (Some(t), Some(q), Some(span)) = (cfg.theta, cfg.q, &raw.q) {
            if !(t > q) {
                return at.fail(span, "q must be smaller than theta");
            }
        }
        if raw.replicates.is_some() {
            let n = at.positive_int(&raw.replicates, "replicates", 0)?;
            if n < 100 {
                return at.fail(raw.replicates.as_ref().unwrap(), "replicates must be at least 100");
            }
            cfg.replicates = Some(n);
        }
        if let Some(c) = &raw.caps {
            cfg.caps.max_nodes = at.positive_int(&c.max_nodes, "caps.max_nodes", cfg.caps.max_nodes)?;
            cfg.caps.max_depth = at.positive_int(&c.max_depth, "caps.max_depth", cfg.caps.max_depth)?;
        }
        if let Some(t) = &raw.tolerances {
            let d = Tolerances::default();
            cfg.tolerances = Tolerances {
                root_find: at.tolerance(&t.root_find, "tolerances.root_find", d.root_find)?,
                fixed_point: at.tolerance(&t.fixed_point, "tolerances.fixed_point", d.fixed_point)?,
                tail: at.tolerance(&t.tail, "tolerances.tail", d.tail)?,
            };
        }
        if let Some(s) = &raw.seed {
            if *s.get_ref() < 0 {
                return at.fail(s, "seed must be non-negative");
            }
            cfg.seed = *s.get_ref() as u64;
        }
        if let Some(e) = &raw.experiment {
            let id = e.get_ref();
            if id != "all" && !EXPERIMENTS.contains(&id.as_str()) {
                return at.fail(e, format!("unknown experiment '{id}'"));
            }
            cfg.experiment = Some(id.clone());
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_is_default() {
        assert_eq!(Config::from_toml_str("").unwrap(), Config::default());
    }

    #[test]
    fn full_config() {
        let text = r#"
seed = 7
experiment = "E3"
lambda = 2
theta = 1.0
q = 0.5
replicates = 1000
mechanism.alpha = 0.0
mechanism.beta = 1.0
mechanism.atoms = [[1.0, 1.0]]
caps.max_nodes = 5000
tolerances.tail = 1e-9
"#;
        let c = Config::from_toml_str(text).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.lambda, Some(2.0));
        assert_eq!(c.caps.max_nodes, 5000);
        assert_eq!(c.tolerances.tail, 1e-9);
        assert_eq!(c.mechanism.unwrap().atoms(), &[Atom { r: 1.0, m: 1.0 }]);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = "seed = 1\nlambda = -1\n";
        match Config::from_toml_str(bad) {
            Err(Error::Config(m)) => assert!(m.starts_with("line 2:"), "{m}"),
            other => panic!("{other:?}"),
        }
        let bad = "seed = 1\n\n[mechanism]\nbeta = -1\n";
        match Config::from_toml_str(bad) {
            Err(Error::Config(m)) => assert!(m.starts_with("line 3:") || m.starts_with("line 4:"), "{m}"),
            other => panic!("{other:?}"),
        }
        match Config::from_toml_str("seed = 1\nbogus = 3\n") {
            Err(Error::Config(m)) => assert!(m.starts_with("line 2:"), "{m}"),
            other => panic!("{other:?}"),
        }
        match Config::from_toml_str("experiment = \"E9\"") {
            Err(Error::Config(m)) => assert!(m.contains("E9")),
            other => panic!("{other:?}"),
        }
        assert!(Config::from_toml_str("tolerances.tail = 0.1").is_err());
        assert!(Config::from_toml_str("lambda = ").is_err());
    }
}
