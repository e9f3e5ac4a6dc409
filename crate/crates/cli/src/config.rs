//! Flat key-value configuration with `[section]` headers.
//!
//! Grammar (one statement per line):
//!
//! ```text
//! # comment                      -- '#' starts a comment anywhere
//! experiment = prop2             -- top-level key (before any section)
//! [grid]                         -- section header
//! nx = 256                       -- key = value inside the current section
//! ```
//!
//! Unknown sections or keys are hard errors, as are out-of-range values.
//! Absent keys take experiment-dependent defaults; the canonical echo
//! produced by [`RunConfig::to_config_text`] lists every key explicitly and
//! re-parses to an identical configuration.

use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Prop2,
    Stationary,
    Evolve,
    Pullin,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Prop2 => "prop2",
            ExperimentKind::Stationary => "stationary",
            ExperimentKind::Evolve => "evolve",
            ExperimentKind::Pullin => "pullin",
        }
    }

    fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "prop2" => Ok(ExperimentKind::Prop2),
            "stationary" => Ok(ExperimentKind::Stationary),
            "evolve" => Ok(ExperimentKind::Evolve),
            "pullin" => Ok(ExperimentKind::Pullin),
            other => Err(ConfigError::new(format!(
                "unknown experiment '{other}' (expected prop2 | stationary | evolve | pullin)"
            ))),
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl ConfigError {
    fn new(msg: impl Into<String>) -> Self {
        ConfigError(msg.into())
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    /// x cells (nodes = nx + 1)
    pub nx: usize,
    /// eta cells (nodes = neta + 1)
    pub neta: usize,
    pub beta: f64,
    pub tau: f64,
    pub a: f64,
    pub gamma: f64,
    pub lambda: f64,
    /// aspect ratio for the pull-in experiment (sweeps carry their own list)
    pub eps: f64,
    /// strictly decreasing sweep values
    pub eps_list: Vec<f64>,
    /// amplitude of the test profile -amp (1-x^2)^2
    pub amplitude: f64,
    pub final_time: f64,
    /// 0 = automatic (min(h, 0.01))
    pub dt: f64,
    pub kappa_stop: f64,
    pub snapshots: usize,
    pub alpha_prime: f64,
    pub pullin_tol: f64,
    /// exponent parameter for the rate targets
    pub nu: f64,
    /// admissibility parameter for the profile pre-check
    pub kappa: f64,
    pub csv_path: String,
    pub json_path: String,
}

impl RunConfig {
    pub fn defaults(kind: ExperimentKind) -> Self {
        let (nx, neta) = match kind {
            ExperimentKind::Prop2 => (256, 128),
            ExperimentKind::Stationary | ExperimentKind::Evolve => (128, 64),
            ExperimentKind::Pullin => (256, 64),
        };
        let lambda = match kind {
            ExperimentKind::Stationary => 0.05,
            ExperimentKind::Evolve => 0.2,
            _ => 0.0,
        };
        let eps_list = match kind {
            ExperimentKind::Prop2 => vec![0.2, 0.1, 0.05, 0.025, 0.0125],
            _ => vec![0.1, 0.05, 0.025],
        };
        let amplitude = match kind {
            ExperimentKind::Evolve => 0.1,
            _ => 0.3,
        };
        RunConfig {
            experiment: kind,
            nx,
            neta,
            beta: 1.0,
            tau: 0.0,
            a: 0.0,
            gamma: 0.0,
            lambda,
            eps: 0.0,
            eps_list,
            amplitude,
            final_time: 1.0,
            dt: 0.0,
            kappa_stop: 0.01,
            snapshots: 11,
            alpha_prime: 0.125,
            pullin_tol: 1e-3,
            nu: 0.3,
            kappa: 0.05,
            csv_path: format!("{}.csv", kind.as_str()),
            json_path: format!("{}_summary.json", kind.as_str()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self, ConfigError> {
        // first pass: find the experiment to pick defaults
        let mut kind = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim().to_string();
            if let Some(rest) = line.strip_prefix("experiment") {
                let rest = rest.trim_start();
                if let Some(v) = rest.strip_prefix('=') {
                    kind = Some(ExperimentKind::parse(v.trim()).map_err(|e| {
                        ConfigError::new(format!("line {}: {}", lineno + 1, e.0))
                    })?);
                }
            }
        }
        let kind = kind.ok_or_else(|| ConfigError::new("missing required key 'experiment'"))?;
        let mut cfg = Self::defaults(kind);

        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = strip_comment(raw).trim().to_string();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| {
                        ConfigError::new(format!("line {}: malformed section header", lineno + 1))
                    })?
                    .trim();
                match name {
                    "grid" | "params" | "sweep" | "profile" | "run" | "pullin" | "fit"
                    | "output" => section = name.to_string(),
                    other => {
                        return Err(ConfigError::new(format!(
                            "line {}: unknown section [{other}]",
                            lineno + 1
                        )))
                    }
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError::new(format!("line {}: expected 'key = value'", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(&section, key, value)
                .map_err(|e| ConfigError::new(format!("line {}: {}", lineno + 1, e.0)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, section: &str, key: &str, value: &str) -> Result<(), ConfigError> {
        let full = if section.is_empty() {
            key.to_string()
        } else {
            format!("{section}.{key}")
        };
        let parse_f64 = |v: &str| -> Result<f64, ConfigError> {
            v.parse::<f64>()
                .map_err(|_| ConfigError::new(format!("key '{full}': not a number: '{v}'")))
        };
        let parse_usize = |v: &str| -> Result<usize, ConfigError> {
            v.parse::<usize>()
                .map_err(|_| ConfigError::new(format!("key '{full}': not an integer: '{v}'")))
        };
        match full.as_str() {
            "experiment" => self.experiment = ExperimentKind::parse(value)?,
            "grid.nx" => self.nx = parse_usize(value)?,
            "grid.neta" => self.neta = parse_usize(value)?,
            "params.beta" => self.beta = parse_f64(value)?,
            "params.tau" => self.tau = parse_f64(value)?,
            "params.a" => self.a = parse_f64(value)?,
            "params.gamma" => self.gamma = parse_f64(value)?,
            "params.lambda" => self.lambda = parse_f64(value)?,
            "params.eps" => self.eps = parse_f64(value)?,
            "sweep.eps" => {
                let mut out = Vec::new();
                for tok in value.split([',', ' ']).filter(|t| !t.is_empty()) {
                    out.push(parse_f64(tok)?);
                }
                self.eps_list = out;
            }
            "profile.amplitude" => self.amplitude = parse_f64(value)?,
            "profile.kind" => {
                if value != "quartic" {
                    return Err(ConfigError::new(format!(
                        "key '{full}': only the 'quartic' profile family is available, got '{value}'"
                    )));
                }
            }
            "run.T" => self.final_time = parse_f64(value)?,
            "run.dt" => self.dt = parse_f64(value)?,
            "run.kappa_stop" => self.kappa_stop = parse_f64(value)?,
            "run.snapshots" => self.snapshots = parse_usize(value)?,
            "run.alpha_prime" => self.alpha_prime = parse_f64(value)?,
            "pullin.tol" => self.pullin_tol = parse_f64(value)?,
            "fit.nu" => self.nu = parse_f64(value)?,
            "fit.kappa" => self.kappa = parse_f64(value)?,
            "output.csv" => self.csv_path = value.to_string(),
            "output.json" => self.json_path = value.to_string(),
            _ => {
                return Err(ConfigError::new(format!("unknown key '{full}'")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, msg: String| if ok { Ok(()) } else { Err(ConfigError::new(msg)) };
        check(self.nx >= 8, format!("grid.nx must be >= 8, got {}", self.nx))?;
        check(
            self.neta >= 4,
            format!("grid.neta must be >= 4, got {}", self.neta),
        )?;
        check(
            self.beta > 0.0,
            format!("params.beta must be > 0, got {}", self.beta),
        )?;
        for (name, v) in [
            ("params.tau", self.tau),
            ("params.a", self.a),
            ("params.gamma", self.gamma),
            ("params.lambda", self.lambda),
        ] {
            check(v >= 0.0, format!("{name} must be >= 0, got {v}"))?;
        }
        check(
            (0.0..1.0).contains(&self.eps),
            format!("params.eps must lie in [0,1), got {}", self.eps),
        )?;
        check(
            self.eps_list.len() >= 1,
            "sweep.eps must not be empty".into(),
        )?;
        for &e in &self.eps_list {
            check(
                e > 0.0 && e < 1.0,
                format!("sweep.eps entries must lie in (0,1), got {e}"),
            )?;
        }
        check(
            self.eps_list.windows(2).all(|w| w[1] < w[0]),
            "sweep.eps must be strictly decreasing".into(),
        )?;
        check(
            self.amplitude > 0.0 && self.amplitude < 1.0,
            format!(
                "profile.amplitude must lie in (0,1), got {}",
                self.amplitude
            ),
        )?;
        check(
            self.final_time > 0.0,
            format!("run.T must be > 0, got {}", self.final_time),
        )?;
        check(
            self.dt >= 0.0 && self.dt <= 0.1,
            format!("run.dt must lie in [0, 0.1] (0 = automatic), got {}", self.dt),
        )?;
        check(
            (0.0..1.0).contains(&self.kappa_stop) && self.kappa_stop > 0.0,
            format!("run.kappa_stop must lie in (0,1), got {}", self.kappa_stop),
        )?;
        check(
            self.snapshots >= 2,
            format!("run.snapshots must be >= 2, got {}", self.snapshots),
        )?;
        check(
            (0.0..1.0).contains(&self.alpha_prime),
            format!("run.alpha_prime must lie in [0,1), got {}", self.alpha_prime),
        )?;
        check(
            self.pullin_tol > 0.0,
            format!("pullin.tol must be > 0, got {}", self.pullin_tol),
        )?;
        check(
            self.nu > 0.0 && self.nu < 0.5,
            format!("fit.nu must lie in (0, 0.5), got {}", self.nu),
        )?;
        check(
            self.kappa > 0.0 && self.kappa < 1.0,
            format!("fit.kappa must lie in (0,1), got {}", self.kappa),
        )?;
        Ok(())
    }

    /// Canonical full-precision echo; parsing it reproduces `self` exactly.
    pub fn to_config_text(&self) -> String {
        let eps_list = self
            .eps_list
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "experiment = {}\n\
             [grid]\n\
             nx = {}\n\
             neta = {}\n\
             [params]\n\
             beta = {}\n\
             tau = {}\n\
             a = {}\n\
             gamma = {}\n\
             lambda = {}\n\
             eps = {}\n\
             [sweep]\n\
             eps = {}\n\
             [profile]\n\
             kind = quartic\n\
             amplitude = {}\n\
             [run]\n\
             T = {}\n\
             dt = {}\n\
             kappa_stop = {}\n\
             snapshots = {}\n\
             alpha_prime = {}\n\
             [pullin]\n\
             tol = {}\n\
             [fit]\n\
             nu = {}\n\
             kappa = {}\n\
             [output]\n\
             csv = {}\n\
             json = {}\n",
            self.experiment.as_str(),
            self.nx,
            self.neta,
            self.beta,
            self.tau,
            self.a,
            self.gamma,
            self.lambda,
            self.eps,
            eps_list,
            self.amplitude,
            self.final_time,
            self.dt,
            self.kappa_stop,
            self.snapshots,
            self.alpha_prime,
            self.pullin_tol,
            self.nu,
            self.kappa,
            self.csv_path,
            self.json_path,
        )
    }

    /// Effective time step: explicit value or min(h, 0.01).
    pub fn effective_dt(&self) -> f64 {
        if self.dt > 0.0 {
            self.dt
        } else {
            (2.0 / self.nx as f64).min(0.01)
        }
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(pos) => &line[..pos],
        None => line,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = RunConfig::parse_str("experiment = prop2\n").unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Prop2);
        assert_eq!(cfg.nx, 256);
        assert_eq!(cfg.neta, 128);
        assert_eq!(cfg.eps_list, vec![0.2, 0.1, 0.05, 0.025, 0.0125]);
        assert_eq!(cfg.amplitude, 0.3);
    }

    #[test]
    fn unknown_key_is_fatal() {
        let err = RunConfig::parse_str("experiment = prop2\n[grid]\nnx = 64\nnz = 32\n")
            .unwrap_err();
        assert!(err.0.contains("unknown key 'grid.nz'"), "{err}");
        let err = RunConfig::parse_str("experiment = prop2\n[gird]\nnx = 64\n").unwrap_err();
        assert!(err.0.contains("unknown section"), "{err}");
    }

    #[test]
    fn out_of_range_is_fatal_naming_bound() {
        let err =
            RunConfig::parse_str("experiment = prop2\n[grid]\nnx = 4\n").unwrap_err();
        assert!(err.0.contains(">= 8"), "{err}");
        let err = RunConfig::parse_str("experiment = prop2\n[sweep]\neps = 0.1, 0.2\n")
            .unwrap_err();
        assert!(err.0.contains("strictly decreasing"), "{err}");
    }

    #[test]
    fn comments_and_spacing_tolerated() {
        let cfg = RunConfig::parse_str(
            "# full line comment\nexperiment = evolve  # trailing\n\n[run]\nT = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Evolve);
        assert_eq!(cfg.final_time, 0.5);
        assert_eq!(cfg.amplitude, 0.1); // evolve default
    }

    #[test]
    fn echo_round_trips_exactly() {
        let mut cfg = RunConfig::defaults(ExperimentKind::Stationary);
        cfg.lambda = 0.073_410_000_000_000_01;
        cfg.eps_list = vec![0.3, 0.17, 0.011];
        cfg.dt = 0.007;
        let text = cfg.to_config_text();
        let back = RunConfig::parse_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn missing_experiment_is_fatal() {
        assert!(RunConfig::parse_str("[grid]\nnx = 64\n").is_err());
    }
}
