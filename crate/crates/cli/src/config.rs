//! Command-line flags, key=value config files and the effective run
//! configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use thiserror::Error;
use udw_core::profiles::{DetectorStateLabel, ModelError, ModelParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}:{line}: expected key=value")]
    Syntax { path: PathBuf, line: usize },
    #[error("{path}:{line}: unknown key `{key}`")]
    UnknownKey { path: PathBuf, line: usize, key: String },
    #[error("invalid value `{value}` for {key}: {reason}")]
    Value { key: String, value: String, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Parser)]
#[command(name = "udw", version, about = "Stress-energy tensor and response of a finite-size particle detector")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Pressure, density and equation of state of the fluid sector.
    Fluid,
    /// Total stress-energy tensor with its Landau decomposition.
    Stress,
    /// Excitation probability against gap times switching width.
    Response,
    /// Energy-condition margins against the fluid coupling.
    ScanMu,
    /// Run every consistency check and emit a JSON report.
    Verify,
    /// Data behind one of the preset figures.
    Figure,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Command::Fluid => "fluid",
            Command::Stress => "stress",
            Command::Response => "response",
            Command::ScanMu => "scan-mu",
            Command::Verify => "verify",
            Command::Figure => "figure",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Figure {
    Fig1,
    Fig2,
    Figw,
    Tmunu0,
    Deviator,
    Tmunu1,
    Excitation,
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.to_possible_value().expect("no skipped variants").get_name())
    }
}

/// Flags shared by every subcommand. Unset flags fall back to the config
/// file, then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Localization scale.
    #[arg(long, global = true)]
    pub ell: Option<f64>,
    /// Fluid coupling, units of length squared.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub mu: Option<f64>,
    /// On-shell fluid Lagrangian choice, -rho + 3 eta P.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub eta: Option<f64>,
    /// Trap strength.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    /// Confining field mass.
    #[arg(long = "m-c", global = true)]
    pub m_c: Option<f64>,
    /// Detector field mass.
    #[arg(long = "m-d", global = true)]
    pub m_d: Option<f64>,
    /// Switching width.
    #[arg(long = "T", global = true)]
    pub t_switch: Option<f64>,
    /// Detector coupling; adds excited-state weight columns to response output.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// ground, excited or mixture:p
    #[arg(long, global = true)]
    pub state: Option<String>,
    /// Largest radius in units of ell.
    #[arg(long = "x-max", global = true)]
    pub x_max: Option<f64>,
    /// Number of radial grid points.
    #[arg(long, global = true)]
    pub points: Option<usize>,
    /// Output file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[arg(long, global = true, value_enum)]
    pub figure: Option<Figure>,
    /// Add the alternative closed-form ground-state components.
    #[arg(long = "audit-printed", global = true)]
    pub audit_printed: bool,
    /// Treat reproduced closed-form discrepancies as failures.
    #[arg(long = "strict-paper", global = true)]
    pub strict_paper: bool,
    /// key=value configuration file; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Gap times switching width, as start:stop:step.
    #[arg(long = "gap-grid", global = true, allow_hyphen_values = true)]
    pub gap_grid: Option<String>,
    /// Detector sizes for response curves, comma separated.
    #[arg(long, global = true)]
    pub ells: Option<String>,
}

/// Inclusive arithmetic range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..n).map(|i| self.start + i as f64 * self.step).collect()
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

impl FromStr for Range {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            return Err("expected start:stop:step".into());
        };
        let num = |t: &str| t.trim().parse::<f64>().map_err(|e| e.to_string());
        let r = Range {
            start: num(a)?,
            stop: num(b)?,
            step: num(c)?,
        };
        if !(r.step > 0.0) || !(r.stop >= r.start) || !r.start.is_finite() || !r.stop.is_finite() {
            return Err("need step > 0 and stop >= start".into());
        }
        if (r.stop - r.start) / r.step > 1e6 {
            return Err("more than 10^6 samples".into());
        }
        Ok(r)
    }
}

/// Effective configuration after merging flags, file and defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub params: ModelParams,
    pub t_switch: f64,
    pub lambda: Option<f64>,
    pub state: DetectorStateLabel,
    pub x_max: f64,
    pub points: usize,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub figure: Option<Figure>,
    pub audit_printed: bool,
    pub strict_paper: bool,
    pub gap_grid: Range,
    pub ells: Vec<f64>,
}

pub const DEFAULT_X_MIN: f64 = 1e-3;

impl RunConfig {
    pub fn defaults(command: Command) -> Self {
        Self {
            command,
            params: ModelParams::default(),
            t_switch: 1.0,
            lambda: None,
            state: DetectorStateLabel::Ground,
            x_max: 12.0,
            points: 600,
            out: None,
            format: Format::Csv,
            figure: None,
            audit_printed: false,
            strict_paper: false,
            gap_grid: Range {
                start: -6.0,
                stop: 10.0,
                step: 0.1,
            },
            ells: vec![0.25, 0.5, 1.0, 2.0],
        }
    }

    /// Defaults, overridden by the config file, overridden by flags.
    pub fn resolve(command: Command, flags: &Flags) -> Result<Self, ConfigError> {
        let mut cfg = Self::defaults(command);
        if let Some(path) = &flags.config {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.clone(),
                source,
            })?;
            cfg.apply_file(path, &text)?;
        }
        cfg.apply_flags(flags)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply_file(&mut self, path: &Path, text: &str) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    path: path.to_path_buf(),
                    line: i + 1,
                });
            };
            let key = key.trim().replace('_', "-");
            let known = self.set(&key, value.trim())?;
            if !known {
                return Err(ConfigError::UnknownKey {
                    path: path.to_path_buf(),
                    line: i + 1,
                    key,
                });
            }
        }
        Ok(())
    }

    /// Sets one key from its textual value; `false` for unknown keys.
    fn set(&mut self, key: &str, value: &str) -> Result<bool, ConfigError> {
        fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
        where
            T::Err: fmt::Display,
        {
            value.parse::<T>().map_err(|e| ConfigError::Value {
                key: key.into(),
                value: value.into(),
                reason: e.to_string(),
            })
        }
        let flag = |v: &str| -> Result<bool, ConfigError> {
            match v {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(ConfigError::Value {
                    key: key.into(),
                    value: v.into(),
                    reason: "expected true or false".into(),
                }),
            }
        };
        match key {
            "ell" => self.params.ell = parse(key, value)?,
            "mu" => self.params.mu = parse(key, value)?,
            "eta" => self.params.eta = parse(key, value)?,
            "alpha" => self.params.alpha = parse(key, value)?,
            "m-c" => self.params.m_c = parse(key, value)?,
            "m-d" => self.params.m_d = parse(key, value)?,
            "T" | "t" => self.t_switch = parse(key, value)?,
            "lambda" => self.lambda = Some(parse(key, value)?),
            "state" => self.state = parse(key, value)?,
            "x-max" => self.x_max = parse(key, value)?,
            "points" => self.points = parse(key, value)?,
            "out" => self.out = Some(PathBuf::from(value)),
            "format" => {
                self.format = Format::from_str(value, true).map_err(|reason| ConfigError::Value {
                    key: key.into(),
                    value: value.into(),
                    reason,
                })?
            }
            "figure" => {
                self.figure = Some(Figure::from_str(value, true).map_err(|reason| ConfigError::Value {
                    key: key.into(),
                    value: value.into(),
                    reason,
                })?)
            }
            "audit-printed" => self.audit_printed = flag(value)?,
            "strict-paper" => self.strict_paper = flag(value)?,
            "gap-grid" => self.gap_grid = parse(key, value)?,
            "ells" => self.ells = parse_list(key, value)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn apply_flags(&mut self, f: &Flags) -> Result<(), ConfigError> {
        let p = &mut self.params;
        p.ell = f.ell.unwrap_or(p.ell);
        p.mu = f.mu.unwrap_or(p.mu);
        p.eta = f.eta.unwrap_or(p.eta);
        p.alpha = f.alpha.unwrap_or(p.alpha);
        p.m_c = f.m_c.unwrap_or(p.m_c);
        p.m_d = f.m_d.unwrap_or(p.m_d);
        self.t_switch = f.t_switch.unwrap_or(self.t_switch);
        self.lambda = f.lambda.or(self.lambda);
        if let Some(s) = &f.state {
            self.set("state", s)?;
        }
        self.x_max = f.x_max.unwrap_or(self.x_max);
        self.points = f.points.unwrap_or(self.points);
        if f.out.is_some() {
            self.out = f.out.clone();
        }
        self.format = f.format.unwrap_or(self.format);
        self.figure = f.figure.or(self.figure);
        self.audit_printed |= f.audit_printed;
        self.strict_paper |= f.strict_paper;
        if let Some(g) = &f.gap_grid {
            self.set("gap-grid", g)?;
        }
        if let Some(e) = &f.ells {
            self.set("ells", e)?;
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.params;
        for (name, v) in [("ell", p.ell), ("mu", p.mu), ("eta", p.eta), ("alpha", p.alpha), ("m-c", p.m_c), ("m-d", p.m_d)] {
            if !v.is_finite() {
                return Err(ConfigError::Invalid(format!("{name} must be finite")));
            }
        }
        if !(p.ell > 0.0) {
            return Err(ModelError::InvalidScale(p.ell).into());
        }
        self.state.validate()?;
        if !(self.t_switch > 0.0 && self.t_switch.is_finite()) {
            return Err(ConfigError::Invalid(format!("T = {} must be positive", self.t_switch)));
        }
        if !(self.x_max > DEFAULT_X_MIN && self.x_max.is_finite()) {
            return Err(ConfigError::Invalid(format!("x-max = {} must exceed {DEFAULT_X_MIN}", self.x_max)));
        }
        if self.points < 2 {
            return Err(ConfigError::Invalid("points must be at least 2".into()));
        }
        if let Some(l) = self.lambda {
            if !l.is_finite() {
                return Err(ConfigError::Invalid("lambda must be finite".into()));
            }
        }
        if self.ells.is_empty() || self.ells.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(ConfigError::Invalid("ells must be positive".into()));
        }
        if self.command == Command::Figure && self.figure.is_none() {
            return Err(ConfigError::Invalid("figure requires --figure".into()));
        }
        Ok(())
    }

    /// Radial grid in units of ℓ.
    pub fn grid(&self) -> Vec<f64> {
        udw_core::fluid::uniform_grid(DEFAULT_X_MIN, self.x_max, self.points)
    }

    /// `key=value` lines describing the configuration, in a fixed order.
    pub fn echo(&self) -> Vec<(String, String)> {
        let p = &self.params;
        let mut v = vec![
            ("command".to_string(), self.command.to_string()),
            ("ell".into(), p.ell.to_string()),
            ("mu".into(), p.mu.to_string()),
            ("eta".into(), p.eta.to_string()),
            ("alpha".into(), p.alpha.to_string()),
            ("m-c".into(), p.m_c.to_string()),
            ("m-d".into(), p.m_d.to_string()),
            ("T".into(), self.t_switch.to_string()),
            ("state".into(), self.state.to_string()),
            ("x-max".into(), self.x_max.to_string()),
            ("points".into(), self.points.to_string()),
        ];
        if let Some(l) = self.lambda {
            v.push(("lambda".into(), l.to_string()));
        }
        if let Some(f) = self.figure {
            v.push(("figure".into(), f.to_string()));
        }
        v.push(("gap-grid".into(), self.gap_grid.to_string()));
        v.push((
            "ells".into(),
            self.ells.iter().map(f64::to_string).collect::<Vec<_>>().join(","),
        ));
        v
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|e| ConfigError::Value {
                key: key.into(),
                value: value.into(),
                reason: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let mut cfg = RunConfig::defaults(Command::Fluid);
        cfg.apply_file(Path::new("c.cfg"), "# comment\nmu = 0.3\neta=1 # trailing\nstate=mixture:0.25\n")
            .unwrap();
        assert_eq!(cfg.params.mu, 0.3);
        assert_eq!(cfg.state, DetectorStateLabel::Mixture(0.25));
        let flags = Flags {
            mu: Some(0.1),
            ..Default::default()
        };
        cfg.apply_flags(&flags).unwrap();
        assert_eq!(cfg.params.mu, 0.1);
        assert_eq!(cfg.params.eta, 1.0);
    }

    #[test]
    fn file_errors() {
        let mut cfg = RunConfig::defaults(Command::Fluid);
        assert!(matches!(
            cfg.apply_file(Path::new("c"), "mu 0.3"),
            Err(ConfigError::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            cfg.apply_file(Path::new("c"), "\nfoo=1"),
            Err(ConfigError::UnknownKey { line: 2, .. })
        ));
        assert!(matches!(cfg.apply_file(Path::new("c"), "mu=abc"), Err(ConfigError::Value { .. })));
    }

    #[test]
    fn ranges() {
        let r: Range = "-1:1:0.5".parse().unwrap();
        assert_eq!(r.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert!("1:0:1".parse::<Range>().is_err());
        assert!("0:1".parse::<Range>().is_err());
        let r: Range = "0.1:10:0.1".parse().unwrap();
        assert_eq!(r.values().len(), 100);
    }
}
