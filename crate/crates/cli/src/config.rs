use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use shadowkit::Params;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Analyze,
    Detect,
    Branch,
    Layer,
    Stability,
    Maxwell,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Command::Analyze => "analyze",
            Command::Detect => "detect",
            Command::Branch => "branch",
            Command::Layer => "layer",
            Command::Stability => "stability",
            Command::Maxwell => "maxwell",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("{file}:{line}: expected key=value, got `{text}`")]
    Syntax {
        file: String,
        line: usize,
        text: String,
    },
    #[error("{origin}: unknown key `{key}`")]
    UnknownKey { origin: String, key: String },
    #[error("{origin}: key `{key}` given twice")]
    Duplicate { origin: String, key: String },
    #[error("{origin}: key `{key}`: cannot parse `{value}` as {kind}")]
    BadValue {
        origin: String,
        key: String,
        value: String,
        kind: &'static str,
    },
    #[error("missing required key `{key}` for command {command}")]
    Missing { key: String, command: Command },
    #[error("key `{key}` = {value} out of range: {rule}")]
    OutOfRange {
        key: String,
        value: String,
        rule: &'static str,
    },
    #[error("override `{0}` must look like --key=value")]
    BadOverride(String),
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
}

const PARAM_KEYS: [&str; 7] = ["a1", "b1", "c1", "a2", "b2", "c2", "L"];
const NUMERIC_KEYS: [&str; 14] = [
    "eps",
    "x0",
    "s_max",
    "tol",
    "step",
    "max_step",
    "eps_lo",
    "eps_hi",
    "eps_min",
    "lambda_lo",
    "lambda_hi",
    "positivity_floor",
    "margin",
    "gap_tol",
];
const COUNT_KEYS: [&str; 6] = ["k", "k_max", "n", "count", "samples", "profile_every"];
const TEXT_KEYS: [&str; 1] = ["out_dir"];

fn known(key: &str) -> bool {
    PARAM_KEYS.contains(&key)
        || NUMERIC_KEYS.contains(&key)
        || COUNT_KEYS.contains(&key)
        || TEXT_KEYS.contains(&key)
}

/// Raw `key -> (value, origin)` pairs before typing.
#[derive(Debug, Default, Clone)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str, file: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        for (i, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((k, v)) = body.split_once('=') else {
                return Err(ConfigError::Syntax {
                    file: file.into(),
                    line: i + 1,
                    text: line.trim().into(),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax {
                    file: file.into(),
                    line: i + 1,
                    text: line.trim().into(),
                });
            }
            let origin = format!("{file}:{}", i + 1);
            raw.insert(k, v, origin, false)?;
        }
        Ok(raw)
    }

    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    fn insert(
        &mut self,
        key: &str,
        value: &str,
        origin: String,
        replace: bool,
    ) -> Result<(), ConfigError> {
        let key = if key == "l" { "L" } else { key };
        if !known(key) {
            return Err(ConfigError::UnknownKey {
                origin,
                key: key.into(),
            });
        }
        if !replace && self.entries.contains_key(key) {
            return Err(ConfigError::Duplicate {
                origin,
                key: key.into(),
            });
        }
        self.entries.insert(key.into(), (value.into(), origin));
        Ok(())
    }

    /// Applies `--key=value` overrides; later ones win.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<(), ConfigError> {
        for o in overrides {
            let body = o
                .strip_prefix("--")
                .ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
            let (k, v) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
            self.insert(k.trim(), v.trim(), format!("--{}", k.trim()), true)?;
        }
        Ok(())
    }

    fn real(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        let Some((v, origin)) = self.entries.get(key) else {
            return Ok(None);
        };
        let x: f64 = v.parse().map_err(|_| ConfigError::BadValue {
            origin: origin.clone(),
            key: key.into(),
            value: v.clone(),
            kind: "a real number",
        })?;
        if !x.is_finite() {
            return Err(ConfigError::BadValue {
                origin: origin.clone(),
                key: key.into(),
                value: v.clone(),
                kind: "a finite number",
            });
        }
        Ok(Some(x))
    }

    fn count(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        let Some((v, origin)) = self.entries.get(key) else {
            return Ok(None);
        };
        v.parse().map(Some).map_err(|_| ConfigError::BadValue {
            origin: origin.clone(),
            key: key.into(),
            value: v.clone(),
            kind: "a non-negative integer",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: Params,
    pub eps: Option<f64>,
    pub x0: Option<f64>,
    pub k: u32,
    pub k_max: u32,
    pub n: Option<usize>,
    pub s_max: f64,
    pub tol: f64,
    pub step: f64,
    pub max_step: f64,
    pub eps_lo: Option<f64>,
    pub eps_hi: Option<f64>,
    pub eps_min: Option<f64>,
    pub lambda_lo: Option<f64>,
    pub lambda_hi: Option<f64>,
    pub positivity_floor: f64,
    pub margin: f64,
    pub gap_tol: f64,
    pub count: usize,
    pub samples: usize,
    pub profile_every: usize,
    pub out_dir: PathBuf,
}

fn positive(key: &str, x: Option<f64>) -> Result<(), ConfigError> {
    match x {
        Some(v) if v <= 0.0 => Err(ConfigError::OutOfRange {
            key: key.into(),
            value: v.to_string(),
            rule: "must be > 0",
        }),
        _ => Ok(()),
    }
}

fn at_least(key: &str, x: usize, min: usize, rule: &'static str) -> Result<(), ConfigError> {
    if x < min {
        return Err(ConfigError::OutOfRange {
            key: key.into(),
            value: x.to_string(),
            rule,
        });
    }
    Ok(())
}

impl RunConfig {
    pub fn resolve(
        command: Command,
        raw: &RawConfig,
        env_out: Option<PathBuf>,
    ) -> Result<Self, ConfigError> {
        let mut p = [0.0; 7];
        for (slot, key) in p.iter_mut().zip(PARAM_KEYS) {
            *slot = match raw.real(key)? {
                Some(v) => v,
                None if key == "L" => 1.0,
                None => {
                    return Err(ConfigError::Missing {
                        key: key.into(),
                        command,
                    })
                }
            };
        }
        let params = Params {
            a1: p[0],
            b1: p[1],
            c1: p[2],
            a2: p[3],
            b2: p[4],
            c2: p[5],
            l: p[6],
        };
        for (key, v) in PARAM_KEYS.iter().zip(p) {
            let ok = if *key == "b1" { v >= 0.0 } else { v > 0.0 };
            if !ok {
                return Err(ConfigError::OutOfRange {
                    key: (*key).into(),
                    value: v.to_string(),
                    rule: if *key == "b1" {
                        "must be >= 0"
                    } else {
                        "must be > 0"
                    },
                });
            }
        }

        let eps = raw.real("eps")?;
        let x0 = raw.real("x0")?;
        let require = |key: &str, v: Option<f64>| {
            v.map(|_| ()).ok_or(ConfigError::Missing {
                key: key.into(),
                command,
            })
        };
        match command {
            Command::Layer => {
                require("eps", eps)?;
                require("x0", x0)?;
            }
            Command::Stability => require("eps", eps)?,
            _ => {}
        }

        let out_dir = env_out
            .or_else(|| raw.entries.get("out_dir").map(|(v, _)| PathBuf::from(v)))
            .unwrap_or_else(|| PathBuf::from("."));

        let cfg = RunConfig {
            command,
            params,
            eps,
            x0,
            k: raw.count("k")?.unwrap_or(1) as u32,
            k_max: raw.count("k_max")?.unwrap_or(3) as u32,
            n: raw.count("n")?,
            s_max: raw.real("s_max")?.unwrap_or(0.05),
            tol: raw.real("tol")?.unwrap_or(1e-10),
            step: raw.real("step")?.unwrap_or(0.002),
            max_step: raw.real("max_step")?.unwrap_or(0.016),
            eps_lo: raw.real("eps_lo")?,
            eps_hi: raw.real("eps_hi")?,
            eps_min: raw.real("eps_min")?,
            lambda_lo: raw.real("lambda_lo")?,
            lambda_hi: raw.real("lambda_hi")?,
            positivity_floor: raw.real("positivity_floor")?.unwrap_or(1e-3),
            margin: raw.real("margin")?.unwrap_or(1e-8),
            gap_tol: raw.real("gap_tol")?.unwrap_or(1e-10),
            count: raw.count("count")?.unwrap_or(10),
            samples: raw.count("samples")?.unwrap_or(101),
            profile_every: raw.count("profile_every")?.unwrap_or(10),
            out_dir,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        for (key, v) in [
            ("eps", self.eps),
            ("x0", self.x0),
            ("s_max", Some(self.s_max)),
            ("tol", Some(self.tol)),
            ("step", Some(self.step)),
            ("max_step", Some(self.max_step)),
            ("eps_lo", self.eps_lo),
            ("eps_hi", self.eps_hi),
            ("eps_min", self.eps_min),
            ("lambda_lo", self.lambda_lo),
            ("lambda_hi", self.lambda_hi),
            ("margin", Some(self.margin)),
            ("gap_tol", Some(self.gap_tol)),
        ] {
            positive(key, v)?;
        }
        if self.positivity_floor < 0.0 {
            return Err(ConfigError::OutOfRange {
                key: "positivity_floor".into(),
                value: self.positivity_floor.to_string(),
                rule: "must be >= 0",
            });
        }
        if let Some(x0) = self.x0 {
            if x0 >= self.params.l {
                return Err(ConfigError::OutOfRange {
                    key: "x0".into(),
                    value: x0.to_string(),
                    rule: "must lie in (0, L)",
                });
            }
        }
        if let (Some(lo), Some(hi)) = (self.eps_lo, self.eps_hi) {
            if lo >= hi {
                return Err(ConfigError::OutOfRange {
                    key: "eps_lo".into(),
                    value: lo.to_string(),
                    rule: "must be < eps_hi",
                });
            }
        }
        if let (Some(lo), Some(hi)) = (self.lambda_lo, self.lambda_hi) {
            if lo >= hi {
                return Err(ConfigError::OutOfRange {
                    key: "lambda_lo".into(),
                    value: lo.to_string(),
                    rule: "must be < lambda_hi",
                });
            }
        }
        if self.step > self.max_step {
            return Err(ConfigError::OutOfRange {
                key: "step".into(),
                value: self.step.to_string(),
                rule: "must be <= max_step",
            });
        }
        if let Some(n) = self.n {
            at_least("n", n, 4, "must be >= 4")?;
        }
        at_least("k", self.k as usize, 1, "must be >= 1")?;
        at_least("k_max", self.k_max as usize, 1, "must be >= 1")?;
        at_least("count", self.count, 1, "must be >= 1")?;
        at_least("samples", self.samples, 2, "must be >= 2")?;
        at_least("profile_every", self.profile_every, 1, "must be >= 1")?;
        Ok(())
    }

    /// Every resolved setting in a fixed order, for file headers.
    pub fn resolved(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let real = |x: f64| format!("{x:?}");
        let opt = |x: Option<f64>| x.map_or_else(|| "auto".to_string(), real);
        let mut out: Vec<(&str, String)> = vec![
            ("command", self.command.to_string()),
            ("a1", real(p.a1)),
            ("b1", real(p.b1)),
            ("c1", real(p.c1)),
            ("a2", real(p.a2)),
            ("b2", real(p.b2)),
            ("c2", real(p.c2)),
            ("L", real(p.l)),
        ];
        let n = self.n.map_or_else(|| "auto".to_string(), |v| v.to_string());
        match self.command {
            Command::Analyze => out.push(("x0", opt(self.x0))),
            Command::Detect => out.extend([
                ("n", n),
                ("k_max", self.k_max.to_string()),
                ("eps_lo", opt(self.eps_lo)),
                ("eps_hi", opt(self.eps_hi)),
            ]),
            Command::Branch => out.extend([
                ("k", self.k.to_string()),
                ("n", n),
                ("s_max", real(self.s_max)),
                ("step", real(self.step)),
                ("max_step", real(self.max_step)),
                ("tol", real(self.tol)),
                ("positivity_floor", real(self.positivity_floor)),
                ("eps_min", opt(self.eps_min)),
                ("profile_every", self.profile_every.to_string()),
            ]),
            Command::Layer => out.extend([
                ("x0", opt(self.x0)),
                ("eps", opt(self.eps)),
                ("n", n),
                ("tol", real(self.tol)),
                ("gap_tol", real(self.gap_tol)),
            ]),
            Command::Stability => out.extend([
                ("eps", opt(self.eps)),
                ("n", n),
                ("count", self.count.to_string()),
                ("margin", real(self.margin)),
            ]),
            Command::Maxwell => out.extend([
                ("lambda_lo", opt(self.lambda_lo)),
                ("lambda_hi", opt(self.lambda_hi)),
                ("samples", self.samples.to_string()),
            ]),
        }
        out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const P_B: &str = "a1=1\nb1=0\nc1=1\na2=4\nb2=1\nc2=1\nL=1\n";

    #[test]
    fn parses_comments_and_overrides() {
        let mut raw =
            RawConfig::parse(&format!("# P_B\n{P_B}eps = 1e-4 # small\n"), "cfg").unwrap();
        raw.apply_overrides(&["--eps=2e-4".into(), "--x0=0.25".into()])
            .unwrap();
        let cfg = RunConfig::resolve(Command::Layer, &raw, None).unwrap();
        assert_eq!(cfg.eps, Some(2e-4));
        assert_eq!(cfg.x0, Some(0.25));
        assert_eq!(cfg.params.a2, 4.0);
    }

    #[test]
    fn reports_line_numbers() {
        let err = RawConfig::parse("a1=1\nnonsense\n", "cfg").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Syntax {
                file: "cfg".into(),
                line: 2,
                text: "nonsense".into()
            }
        );
        let err = RawConfig::parse("a1=1\nzeta=3\n", "cfg").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                origin: "cfg:2".into(),
                key: "zeta".into()
            }
        );
        let raw = RawConfig::parse("a1=x\n", "cfg").unwrap();
        assert!(matches!(raw.real("a1"), Err(ConfigError::BadValue { .. })));
    }

    #[test]
    fn required_keys_and_ranges() {
        let raw = RawConfig::parse(P_B, "cfg").unwrap();
        assert_eq!(
            RunConfig::resolve(Command::Layer, &raw, None).unwrap_err(),
            ConfigError::Missing {
                key: "eps".into(),
                command: Command::Layer
            }
        );
        let mut raw = RawConfig::parse(P_B, "cfg").unwrap();
        raw.apply_overrides(&["--eps=-1".into()]).unwrap();
        assert!(matches!(
            RunConfig::resolve(Command::Stability, &raw, None),
            Err(ConfigError::OutOfRange { .. })
        ));
        let raw = RawConfig::parse("a1=1\nb1=0\n", "cfg").unwrap();
        assert!(matches!(
            RunConfig::resolve(Command::Analyze, &raw, None),
            Err(ConfigError::Missing { .. })
        ));
    }

    #[test]
    fn env_out_dir_wins() {
        let raw = RawConfig::parse(&format!("{P_B}out_dir=here\n"), "cfg").unwrap();
        let cfg = RunConfig::resolve(Command::Analyze, &raw, Some("there".into())).unwrap();
        assert_eq!(cfg.out_dir, PathBuf::from("there"));
    }
}
