//! Flat `key = value` experiment configuration.
//!
//! ```text
//! mode = freq
//! sources = 5
//! snr_db = -10, -5, 0, 5, 10
//! trials = 100
//! ```
//!
//! Blank lines and `#` comments are ignored. Unset keys take the mode's defaults.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::arrays::{design_coprime_array, design_diophantine_array};
use crate::diophantine::{build_schedule, consecutive_scheme, gcd_u64};
use crate::error::{Error, Result};
use crate::spectral::{default_rows, GridSpec};
use crate::waveform::NarrowbandPrior;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Freq,
    Doa,
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "freq" => Ok(Mode::Freq),
            "doa" => Ok(Mode::Doa),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected freq or doa)"
            ))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Freq => "freq",
            Mode::Doa => "doa",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Third-order moments from the Diophantine scheme or array.
    Diophantine,
    /// Second-order moments from the co-prime pair.
    Coprime,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diophantine" => Ok(Method::Diophantine),
            "coprime" => Ok(Method::Coprime),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected diophantine or coprime)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Diophantine => "diophantine",
            Method::Coprime => "coprime",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub mode: Mode,
    /// Number of sources `D`.
    pub sources: usize,
    pub snr_db: Vec<f64>,
    /// Lags `K` (frequency mode).
    pub lags: u64,
    /// Snapshots `L`; co-prime blocks in frequency mode.
    pub snapshots: u64,
    pub trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub amplitude: f64,
    /// Rate shift of the consecutive scheme `(Γ+2, Γ+3, Γ+5)`.
    pub gamma: u64,
    pub coprime_rates: (u64, u64),
    /// Minimum circular frequency separation in radians; `None` means `2π/K`.
    pub min_separation: Option<f64>,
    pub grid_points: usize,
    pub array: (u64, u64, u64),
    pub coprime_array: (u64, u64),
    pub grid_step_deg: f64,
    pub prior: NarrowbandPrior,
}

impl ExperimentConfig {
    pub fn default_for(mode: Mode) -> Self {
        let base = Self {
            mode,
            sources: 5,
            snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            lags: 64,
            snapshots: 64,
            trials: 100,
            seed: 0,
            methods: vec![Method::Diophantine, Method::Coprime],
            amplitude: 1.0,
            gamma: 0,
            coprime_rates: (8, 9),
            min_separation: None,
            grid_points: 4096,
            array: (4, 3, 5),
            coprime_array: (7, 4),
            grid_step_deg: 0.05,
            prior: NarrowbandPrior::default(),
        };
        match mode {
            Mode::Freq => base,
            Mode::Doa => Self {
                sources: 3,
                snr_db: vec![0.0, 5.0, 10.0],
                snapshots: 50,
                ..base
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", n + 1)))?;
            let key = key.trim().to_string();
            if entries
                .insert(key.clone(), value.trim().to_string())
                .is_some()
            {
                return Err(Error::Config(format!(
                    "line {}: duplicate key '{key}'",
                    n + 1
                )));
            }
        }
        let mode = match entries.remove("mode") {
            Some(m) => m.parse()?,
            None => return Err(Error::Config("missing key 'mode'".into())),
        };
        let mut cfg = Self::default_for(mode);
        for (key, value) in &entries {
            cfg.set(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Applies one `key = value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mode" => {
                let mode: Mode = value.parse()?;
                if mode != self.mode {
                    return Err(Error::Config(
                        "mode cannot be changed after defaults are applied".into(),
                    ));
                }
            }
            "sources" => self.sources = scalar(key, value)?,
            "snr_db" => self.snr_db = list(key, value)?,
            "lags" => self.lags = scalar(key, value)?,
            "snapshots" => self.snapshots = scalar(key, value)?,
            "trials" => self.trials = scalar(key, value)?,
            "seed" => self.seed = scalar(key, value)?,
            "methods" => self.methods = list(key, value)?,
            "amplitude" => {
                self.amplitude = scalar(key, value)?;
                self.prior.amplitude = self.amplitude;
            }
            "gamma" => self.gamma = scalar(key, value)?,
            "coprime_rates" => self.coprime_rates = pair(key, value)?,
            "min_separation" => self.min_separation = Some(scalar(key, value)?),
            "grid_points" => self.grid_points = scalar(key, value)?,
            "array" => {
                let v: Vec<u64> = list(key, value)?;
                if v.len() != 3 {
                    return Err(Error::Config(format!("{key}: expected p1, p2, q")));
                }
                self.array = (v[0], v[1], v[2]);
            }
            "coprime_array" => self.coprime_array = pair(key, value)?,
            "grid_step_deg" => self.grid_step_deg = scalar(key, value)?,
            "direction_range" => self.prior.direction_range = pair(key, value)?,
            "min_direction_sep" => self.prior.min_direction_sep = scalar(key, value)?,
            "frequency_range" => self.prior.frequency_range = pair(key, value)?,
            "min_frequency_sep" => self.prior.min_frequency_sep = scalar(key, value)?,
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn separation(&self) -> f64 {
        self.min_separation.unwrap_or(TAU / self.lags.max(1) as f64)
    }

    pub fn grid(&self) -> GridSpec {
        match self.mode {
            Mode::Freq => GridSpec::Frequency {
                points: self.grid_points,
            },
            Mode::Doa => GridSpec::Direction {
                step_deg: self.grid_step_deg,
            },
        }
    }

    /// Rejects every configuration the simulation would fail on.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return fail("trials must be at least 1".into());
        }
        if self.sources == 0 {
            return fail("sources must be at least 1".into());
        }
        if self.snr_db.is_empty() {
            return fail("snr_db must list at least one value".into());
        }
        if let Some(bad) = self.snr_db.iter().find(|v| !v.is_finite()) {
            return fail(format!("snr_db value {bad} is not finite"));
        }
        if self.methods.is_empty() {
            return fail("methods must list at least one method".into());
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return fail(format!("amplitude {} must be positive", self.amplitude));
        }
        self.grid()
            .abscissae()
            .map_err(|e| Error::Config(e.to_string()))?;
        match self.mode {
            Mode::Freq => self.validate_freq(),
            Mode::Doa => self.validate_doa(),
        }
    }

    fn check_order(&self, what: &str, len: u64) -> Result<()> {
        let len = len as usize;
        let cols = len + 1 - default_rows(len).max(1);
        if len == 0 || cols <= self.sources || default_rows(len) <= self.sources {
            return Err(Error::Config(format!(
                "{what}: {len} lags cannot resolve {} sources",
                self.sources
            )));
        }
        Ok(())
    }

    fn validate_freq(&self) -> Result<()> {
        if self.snapshots == 0 {
            return Err(Error::Config("snapshots must be at least 1".into()));
        }
        self.check_order("lags", self.lags)?;
        let sep = self.separation();
        if !(sep.is_finite() && sep >= 0.0) || sep * self.sources as f64 >= TAU {
            return Err(Error::Config(format!(
                "{} sources do not fit on the circle with separation {sep}",
                self.sources
            )));
        }
        if self.methods.contains(&Method::Diophantine) {
            let scheme =
                consecutive_scheme(self.gamma).map_err(|e| Error::Config(e.to_string()))?;
            build_schedule(&scheme, self.lags, self.snapshots)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.methods.contains(&Method::Coprime) {
            let (m1, m2) = self.coprime_rates;
            if m1 == 0 || m2 == 0 || gcd_u64(m1, m2) != 1 {
                return Err(Error::Config(format!(
                    "coprime_rates ({m1}, {m2}) are not coprime"
                )));
            }
            if m1.checked_mul(m2).is_none_or(|p| p < self.lags) {
                return Err(Error::Config(format!(
                    "coprime_rates ({m1}, {m2}) cover fewer than {} lags",
                    self.lags
                )));
            }
        }
        Ok(())
    }

    fn validate_doa(&self) -> Result<()> {
        if self.snapshots < 2 {
            return Err(Error::Config("snapshots must be at least 2".into()));
        }
        let cfg = |e: Error| Error::Config(e.to_string());
        if self.methods.contains(&Method::Diophantine) {
            let (p1, p2, q) = self.array;
            design_diophantine_array(p1, p2, q).map_err(cfg)?;
            self.check_order("array", p1 * p2 * q + 1)?;
        }
        if self.methods.contains(&Method::Coprime) {
            let (m1, m2) = self.coprime_array;
            design_coprime_array(m1, m2).map_err(cfg)?;
            self.check_order("coprime_array", m1 * m2 + 1)?;
        }
        let p = &self.prior;
        let fits = |(lo, hi): (f64, f64), sep: f64| {
            lo < hi && sep >= 0.0 && (hi - lo) - (self.sources as f64 - 1.0) * sep > 0.0
        };
        if !fits(p.direction_range, p.min_direction_sep)
            || p.direction_range.0 <= -90.0
            || p.direction_range.1 >= 90.0
        {
            return Err(Error::Config(format!(
                "{} directions do not fit in {:?} with separation {}",
                self.sources, p.direction_range, p.min_direction_sep
            )));
        }
        if !fits(p.frequency_range, p.min_frequency_sep) {
            return Err(Error::Config(format!(
                "{} frequencies do not fit in {:?} with separation {}",
                self.sources, p.frequency_range, p.min_frequency_sep
            )));
        }
        Ok(())
    }
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| scalar(key, v))
        .collect()
}

fn pair<T: FromStr + Copy>(key: &str, value: &str) -> Result<(T, T)> {
    let v: Vec<T> = list(key, value)?;
    match v.as_slice() {
        [a, b] => Ok((*a, *b)),
        _ => Err(Error::Config(format!("{key}: expected two values"))),
    }
}
