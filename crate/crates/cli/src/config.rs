use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};

use pulsed_qfi::gaussian::occupation_from_temperature;
use pulsed_qfi::{SystemParams, WindowPolicy};
use serde::{Deserialize, Serialize};

/// Every key accepted in a config file, in canonical order.
pub const KEYS: [&str; 15] = [
    "omega_m",
    "omega_m_unit",
    "gamma_m",
    "n_th",
    "temperature_k",
    "theta",
    "k",
    "n_max",
    "kappa",
    "tau_p",
    "cavity_length",
    "seed",
    "h_rel",
    "fit_window",
    "out_dir",
];

const DEFAULT_N_TH: f64 = 100.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn new(message: impl Into<String>) -> Self {
        ConfigError { line: None, key: None, message: message.into() }
    }

    fn at(mut self, line: Option<usize>, key: &str) -> Self {
        self.line = line;
        self.key = Some(key.to_string());
        self
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(line) = self.line {
            write!(f, "line {line}: ")?;
        }
        if let Some(key) = &self.key {
            write!(f, "key `{key}`: ")?;
        }
        f.write_str(&self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum OmegaUnit {
    /// Angular frequency, used as given.
    #[default]
    #[serde(rename = "rad_s")]
    RadS,
    /// Cyclic frequency, multiplied by 2 pi.
    #[serde(rename = "hz")]
    Hz,
}

/// `auto` or `n_lo:n_hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct FitWindow(pub WindowPolicy);

impl From<FitWindow> for String {
    fn from(w: FitWindow) -> String {
        match w.0 {
            WindowPolicy::Auto => "auto".into(),
            WindowPolicy::Explicit { n_lo, n_hi } => format!("{n_lo}:{n_hi}"),
        }
    }
}

impl TryFrom<String> for FitWindow {
    type Error = String;

    fn try_from(s: String) -> Result<Self, String> {
        let s = s.trim();
        if s == "auto" {
            return Ok(FitWindow(WindowPolicy::Auto));
        }
        let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected `auto` or `n_lo:n_hi`, got `{s}`"))?;
        let parse = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad window bound `{t}`: {e}"));
        let (n_lo, n_hi) = (parse(lo)?, parse(hi)?);
        if n_lo < 1 || n_lo > n_hi {
            return Err(format!("window {n_lo}:{n_hi} must satisfy 1 <= n_lo <= n_hi"));
        }
        Ok(FitWindow(WindowPolicy::Explicit { n_lo, n_hi }))
    }
}

/// Fully resolved run configuration; embedded in every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// In the unit given by `omega_m_unit`.
    pub omega_m: f64,
    pub omega_m_unit: OmegaUnit,
    pub gamma_m: f64,
    /// Unset means `temperature_k` decides, or 100 if that is unset too.
    pub n_th: Option<f64>,
    pub temperature_k: Option<f64>,
    pub theta: f64,
    /// `tau = T0 / k`.
    pub k: f64,
    pub n_max: u64,
    pub kappa: Option<f64>,
    pub tau_p: Option<f64>,
    pub cavity_length: Option<f64>,
    pub seed: u64,
    pub h_rel: f64,
    pub fit_window: FitWindow,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = SystemParams::default();
        RunConfig {
            omega_m: p.omega_m,
            omega_m_unit: OmegaUnit::RadS,
            gamma_m: p.gamma_m,
            n_th: None,
            temperature_k: None,
            theta: p.theta,
            k: p.k(),
            n_max: 1000,
            kappa: p.kappa,
            tau_p: p.tau_p,
            cavity_length: p.cavity_length,
            seed: 0,
            h_rel: pulsed_qfi::metrology::DEFAULT_H_REL,
            fit_window: FitWindow::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

fn number(value: &str) -> Result<f64, ConfigError> {
    let x: f64 = value.parse().map_err(|_| ConfigError::new(format!("`{value}` is not a number")))?;
    if !x.is_finite() {
        return Err(ConfigError::new(format!("`{value}` is not finite")));
    }
    Ok(x)
}

fn optional_number(value: &str) -> Result<Option<f64>, ConfigError> {
    if value == "none" {
        Ok(None)
    } else {
        number(value).map(Some)
    }
}

fn integer(value: &str) -> Result<u64, ConfigError> {
    value.parse().map_err(|_| ConfigError::new(format!("`{value}` is not a non-negative integer")))
}

impl RunConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let value = value.trim();
        match key {
            "omega_m" => self.omega_m = number(value)?,
            "omega_m_unit" => {
                self.omega_m_unit = match value {
                    "rad_s" => OmegaUnit::RadS,
                    "hz" => OmegaUnit::Hz,
                    _ => return Err(ConfigError::new(format!("expected `rad_s` or `hz`, got `{value}`"))),
                }
            }
            "gamma_m" => self.gamma_m = number(value)?,
            "n_th" => self.n_th = optional_number(value)?,
            "temperature_k" => self.temperature_k = optional_number(value)?,
            "theta" => self.theta = number(value)?,
            "k" => self.k = number(value)?,
            "n_max" => self.n_max = integer(value)?,
            "kappa" => self.kappa = optional_number(value)?,
            "tau_p" => self.tau_p = optional_number(value)?,
            "cavity_length" => self.cavity_length = optional_number(value)?,
            "seed" => self.seed = integer(value)?,
            "h_rel" => self.h_rel = number(value)?,
            "fit_window" => self.fit_window = FitWindow::try_from(value.to_string()).map_err(ConfigError::new)?,
            "out_dir" => {
                if value.is_empty() {
                    return Err(ConfigError::new("empty output directory"));
                }
                self.out_dir = PathBuf::from(value)
            }
            _ => return Err(ConfigError::new(format!("unknown key (accepted: {})", KEYS.join(", ")))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` text on top of `self`. `#` starts a
    /// comment; keys may appear once.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = Some(i + 1);
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError { line, key: None, message: format!("expected `key = value`, got `{content}`") })?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(ConfigError::new("duplicate key").at(line, key));
            }
            seen.push(key);
            self.set(key, value).map_err(|e| e.at(line, key))?;
        }
        Ok(())
    }

    /// Defaults, then the file (if any), then `overrides` in order.
    pub fn load(path: Option<&Path>, overrides: &[(&str, String)]) -> Result<RunConfig, ConfigError> {
        let mut config = RunConfig::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ConfigError::new(format!("cannot read config {}: {e}", path.display())))?;
            config.apply_text(&text)?;
        }
        for (key, value) in overrides {
            config.set(key, value).map_err(|e| ConfigError { message: format!("flag --{}: {}", key.replace('_', "-"), e.message), ..e.at(None, key) })?;
        }
        config.check()?;
        Ok(config)
    }

    /// Cross-key consistency and the physical parameter checks.
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.n_th.is_some() && self.temperature_k.is_some() {
            return Err(ConfigError::new("`n_th` and `temperature_k` are alternatives; set only one"));
        }
        if self.n_max < 1 {
            return Err(ConfigError::new("must be >= 1").at(None, "n_max"));
        }
        if !(self.h_rel > 0.0 && self.h_rel < 1e-2) {
            return Err(ConfigError::new(format!("relative step {} outside (0, 1e-2)", self.h_rel)).at(None, "h_rel"));
        }
        self.params().map(|_| ())
    }

    pub fn omega_rad_s(&self) -> f64 {
        match self.omega_m_unit {
            OmegaUnit::RadS => self.omega_m,
            OmegaUnit::Hz => TAU * self.omega_m,
        }
    }

    /// Bath occupation: explicit, from the temperature (Bose–Einstein), or
    /// the default 100.
    pub fn occupation(&self) -> Result<f64, ConfigError> {
        match (self.n_th, self.temperature_k) {
            (Some(n), _) => Ok(n),
            (None, Some(t)) => occupation_from_temperature(t, self.omega_rad_s())
                .map(|o| o.exact)
                .map_err(|e| ConfigError::new(e.to_string()).at(None, "temperature_k")),
            (None, None) => Ok(DEFAULT_N_TH),
        }
    }

    pub fn params(&self) -> Result<SystemParams, ConfigError> {
        let mut p = SystemParams::new(self.omega_rad_s(), self.gamma_m, self.occupation()?, self.theta, self.k)
            .map_err(|e| ConfigError::new(e.to_string()))?;
        p.kappa = self.kappa;
        p.tau_p = self.tau_p;
        p.cavity_length = self.cavity_length;
        p.validate().map_err(|e| ConfigError::new(e.to_string()))?;
        Ok(p)
    }
}
