//! Scenario configuration: UTF-8 `key = value` lines grouped under
//! `[scenario]`, `[algorithm]` and `[sweep]` headers.
//!
//! ```text
//! [scenario]
//! family = localization_lite
//! horizon = 300
//! seed = 7
//! omega = pi/100
//!
//! [algorithm]
//! algorithm = admm
//! lambda = 0.3
//!
//! [sweep]
//! omega = 0, pi/200, pi/100, pi/50
//! ```
//!
//! Numbers accept `pi` factors: `pi`, `2*pi`, `pi/200`, `3*pi/4`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    StaticQuadratic,
    MovingQuadratic,
    TvLasso,
    TvInequalityQp,
    TvEqualityQp,
    TvAdmmConsensus,
    LocalizationLite,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::StaticQuadratic,
        Family::MovingQuadratic,
        Family::TvLasso,
        Family::TvInequalityQp,
        Family::TvEqualityQp,
        Family::TvAdmmConsensus,
        Family::LocalizationLite,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::StaticQuadratic => "static_quadratic",
            Family::MovingQuadratic => "moving_quadratic",
            Family::TvLasso => "tv_lasso",
            Family::TvInequalityQp => "tv_inequality_qp",
            Family::TvEqualityQp => "tv_equality_qp",
            Family::TvAdmmConsensus => "tv_admm_consensus",
            Family::LocalizationLite => "localization_lite",
        }
    }

    /// Family-specific keys (besides the common ones).
    pub fn keys(self) -> &'static [&'static str] {
        match self {
            Family::StaticQuadratic => &["n", "m", "M", "radius"],
            Family::MovingQuadratic => &["n", "m", "M", "radius", "drift", "schedule", "ratio"],
            Family::TvLasso => &["n", "rows", "weight", "radius", "amplitude", "omega", "sparsity"],
            Family::TvInequalityQp => &["n", "rows", "m", "M", "amplitude", "omega"],
            Family::TvEqualityQp => &["n", "rows", "m", "M", "amplitude", "omega", "static"],
            Family::TvAdmmConsensus => &["agents", "n", "amplitude", "omega", "reg"],
            Family::LocalizationLite => &["nodes", "anchors", "noise", "max_degree", "omega", "half_width"],
        }
    }

    pub fn default_algorithm(self) -> Algorithm {
        match self {
            Family::StaticQuadratic | Family::MovingQuadratic => Algorithm::ProjectedGradient,
            Family::TvLasso => Algorithm::ForwardBackward,
            Family::TvInequalityQp => Algorithm::DualAscentInequality,
            Family::TvEqualityQp => Algorithm::DualAscentEquality,
            Family::TvAdmmConsensus | Family::LocalizationLite => Algorithm::Admm,
        }
    }

    /// Step size used when the config gives none and the family has a
    /// customary one.
    pub fn default_lambda(self) -> Option<f64> {
        match self {
            Family::LocalizationLite => Some(0.3),
            _ => None,
        }
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::config(format!("unknown scenario family '{s}'")))
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    ProjectedGradient,
    ProximalPoint,
    ForwardBackward,
    DualAscentInequality,
    DualAscentEquality,
    DouglasRachford,
    Admm,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::ProjectedGradient,
        Algorithm::ProximalPoint,
        Algorithm::ForwardBackward,
        Algorithm::DualAscentInequality,
        Algorithm::DualAscentEquality,
        Algorithm::DouglasRachford,
        Algorithm::Admm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::ProjectedGradient => "projected_gradient",
            Algorithm::ProximalPoint => "proximal_point",
            Algorithm::ForwardBackward => "forward_backward",
            Algorithm::DualAscentInequality => "dual_ascent_inequality",
            Algorithm::DualAscentEquality => "dual_ascent_equality",
            Algorithm::DouglasRachford => "douglas_rachford",
            Algorithm::Admm => "admm",
        }
    }

    pub fn is_primal(self) -> bool {
        matches!(
            self,
            Algorithm::ProjectedGradient | Algorithm::ProximalPoint | Algorithm::ForwardBackward
        )
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::config(format!("unknown algorithm '{s}'")))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

const COMMON_KEYS: &[&str] = &["family", "horizon", "seed", "period"];
const ALGORITHM_KEYS: &[&str] = &["algorithm", "lambda", "bound", "bound_radius", "init", "admm_form"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Scenario,
    Algorithm,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioConfig {
    entries: BTreeMap<String, String>,
    sweeps: BTreeMap<String, Vec<String>>,
}

/// Parse a real number, allowing `pi` factors and one division.
pub fn parse_real(text: &str) -> Result<f64> {
    let bad = || Error::config(format!("cannot parse number '{text}'"));
    let t = text.trim();
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a, Some(b)),
        None => (t, None),
    };
    let factor = |s: &str| -> Result<f64> {
        let s = s.trim();
        match s {
            "pi" | "π" => Ok(std::f64::consts::PI),
            "-pi" => Ok(-std::f64::consts::PI),
            _ => s.parse::<f64>().map_err(|_| bad()),
        }
    };
    let mut value = 1.0;
    for part in num.split('*') {
        value *= factor(part)?;
    }
    if let Some(d) = den {
        let mut dv = 1.0;
        for part in d.split('*') {
            dv *= factor(part)?;
        }
        if dv == 0.0 {
            return Err(bad());
        }
        value /= dv;
    }
    if value.is_finite() {
        Ok(value)
    } else {
        Err(bad())
    }
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        let mut section = Section::Scenario;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = match name.trim() {
                    "scenario" => Section::Scenario,
                    "algorithm" => Section::Algorithm,
                    "sweep" => Section::Sweep,
                    other => return Err(Error::config(format!("line {}: unknown section [{other}]", idx + 1))),
                };
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::config(format!("line {}: expected key = value", idx + 1)))?;
            let (key, value) = (key.trim().to_string(), value.trim().to_string());
            if key.is_empty() {
                return Err(Error::config(format!("line {}: empty key", idx + 1)));
            }
            let duplicate = match section {
                Section::Sweep => cfg
                    .sweeps
                    .insert(key.clone(), value.split(',').map(|v| v.trim().to_string()).collect())
                    .is_some(),
                _ => {
                    if section == Section::Algorithm && !ALGORITHM_KEYS.contains(&key.as_str()) {
                        return Err(Error::config(format!("line {}: '{key}' is not an algorithm key", idx + 1)));
                    }
                    cfg.entries.insert(key.clone(), value).is_some()
                }
            };
            if duplicate {
                return Err(Error::config(format!("line {}: duplicate key '{key}'", idx + 1)));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_pairs(pairs: &[(&str, &str)]) -> Result<Self> {
        let mut cfg = ScenarioConfig::default();
        for (k, v) in pairs {
            cfg.entries.insert(k.to_string(), v.to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Copy with one key overridden (used by sweeps and `--seed`).
    pub fn with(&self, key: &str, value: &str) -> Result<Self> {
        let mut cfg = self.clone();
        cfg.entries.insert(key.to_string(), value.to_string());
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn without_sweeps(&self) -> Self {
        Self { entries: self.entries.clone(), sweeps: BTreeMap::new() }
    }

    pub fn sweeps(&self) -> &BTreeMap<String, Vec<String>> {
        &self.sweeps
    }

    pub fn add_sweep(&mut self, key: &str, values: Vec<String>) -> Result<()> {
        self.sweeps.insert(key.to_string(), values);
        self.validate()
    }

    /// Every key, value and sweep list must be admissible for the family.
    pub fn validate(&self) -> Result<()> {
        let family = self.family()?;
        let known = |k: &str| COMMON_KEYS.contains(&k) || ALGORITHM_KEYS.contains(&k) || family.keys().contains(&k);
        for key in self.entries.keys().chain(self.sweeps.keys()) {
            if !known(key) {
                return Err(Error::config(format!("key '{key}' is not valid for family {family}")));
            }
        }
        for (key, values) in &self.sweeps {
            if key == "family" || values.is_empty() {
                return Err(Error::config(format!("invalid sweep over '{key}'")));
            }
            for v in values {
                let mut probe = self.entries.clone();
                probe.insert(key.clone(), v.clone());
                Self { entries: probe, sweeps: BTreeMap::new() }.check_values()?;
            }
        }
        self.check_values()
    }

    fn check_values(&self) -> Result<()> {
        for (key, value) in &self.entries {
            match key.as_str() {
                "family" | "schedule" | "bound" | "admm_form" | "algorithm" => {}
                "static" => {
                    self.bool_or(key, false)?;
                }
                "horizon" | "seed" | "n" | "rows" | "agents" | "nodes" | "anchors" | "max_degree" | "sparsity" => {
                    value
                        .parse::<u64>()
                        .map_err(|_| Error::config(format!("'{key}' must be a nonnegative integer, got '{value}'")))?;
                }
                "init" => {
                    for part in value.split(',') {
                        parse_real(part)?;
                    }
                }
                _ => {
                    parse_real(value)?;
                }
            }
        }
        if let Some(a) = self.entries.get("algorithm") {
            a.parse::<Algorithm>()?;
        }
        if let Some(s) = self.entries.get("schedule") {
            if s != "constant" && s != "geometric" {
                return Err(Error::config(format!("schedule must be constant or geometric, got '{s}'")));
            }
        }
        if let Some(b) = self.entries.get("bound") {
            if !["none", "box", "ball"].contains(&b.as_str()) {
                return Err(Error::config(format!("bound must be none, box or ball, got '{b}'")));
            }
        }
        if let Some(f) = self.entries.get("admm_form") {
            if !["auto", "bounded", "standard"].contains(&f.as_str()) {
                return Err(Error::config(format!("admm_form must be auto, bounded or standard, got '{f}'")));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Result<Family> {
        self.entries
            .get("family")
            .ok_or_else(|| Error::config("missing 'family' key"))?
            .parse()
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        self.get(key).map(parse_real).unwrap_or(Ok(default))
    }

    pub fn real(&self, key: &str) -> Result<Option<f64>> {
        self.get(key).map(parse_real).transpose()
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::config(format!("'{key}' must be a nonnegative integer, got '{v}'"))),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::config(format!("'{key}' must be a nonnegative integer, got '{v}'"))),
        }
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key) {
            None => Ok(default),
            Some("true") | Some("1") | Some("yes") => Ok(true),
            Some("false") | Some("0") | Some("no") => Ok(false),
            Some(v) => Err(Error::config(format!("'{key}' must be a boolean, got '{v}'"))),
        }
    }

    pub fn algorithm(&self) -> Result<Algorithm> {
        match self.get("algorithm") {
            Some(a) => a.parse(),
            None => Ok(self.family()?.default_algorithm()),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.u64_or("seed", 0)
    }

    /// Number of running steps `T`.
    pub fn steps(&self) -> Result<usize> {
        let t = self.usize_or("horizon", 200)?;
        if t == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        Ok(t)
    }

    /// Canonical text form; parsing it yields an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::from("[scenario]\n");
        for (k, v) in &self.entries {
            if !ALGORITHM_KEYS.contains(&k.as_str()) {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        let algo: Vec<_> = self.entries.iter().filter(|(k, _)| ALGORITHM_KEYS.contains(&k.as_str())).collect();
        if !algo.is_empty() {
            out.push_str("\n[algorithm]\n");
            for (k, v) in algo {
                out.push_str(&format!("{k} = {v}\n"));
            }
        }
        if !self.sweeps.is_empty() {
            out.push_str("\n[sweep]\n");
            for (k, vs) in &self.sweeps {
                out.push_str(&format!("{k} = {}\n", vs.join(", ")));
            }
        }
        out
    }
}
