//! Experiment configuration: flat `key = value` text with `[section]`
//! headers. See `docs/config.md` for the grammar and every key.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pat_core::phantoms::{Phantom, PhantomKind, SpeedField};

use crate::error::{CliError, CliResult};

/// Defaults, which double as the `coarse` preset.
const DEFAULTS: &str = "
[experiment]
name = coarse
seed = 1
output = out/coarse

[domain]
radius = 1

[phantom]
kind = ghosts
smoothing = 0.03
sigma = 0.2

[speed]
kind = nontrapping
value = 1
eps = 0.1
t0_spacing = 0.01

[time]
T = 1.2 * T0

[simulation]
h = 0.1
dt_factor = 15

[reconstruction]
h = 0.15
dt_factor = 14
method = landweber
omega = auto
power_iters = 8
omega_seed = 7
tau = 1.5
noise = 0
delta = auto
iterations = 20
J = 5
snapshot_every = 5
render_size = 200
";

/// Desk-scale versions of the six figure configurations.
pub const PRESETS: &[(&str, &str)] = &[
    ("coarse", ""),
    (
        "nontrap-long",
        "[experiment]\nname = nontrap-long\noutput = out/nontrap-long\n[speed]\nkind = nontrapping\n[time]\nT = 4 * T0\n[simulation]\nh = 0.07\n[reconstruction]\nh = 0.1\n",
    ),
    (
        "nontrap-short",
        "[experiment]\nname = nontrap-short\noutput = out/nontrap-short\n[speed]\nkind = nontrapping\n[time]\nT = 1.2 * T0\n[simulation]\nh = 0.07\n[reconstruction]\nh = 0.1\n",
    ),
    (
        "nontrap-shepp",
        "[experiment]\nname = nontrap-shepp\noutput = out/nontrap-shepp\n[phantom]\nkind = shepp-logan\nsmoothing = 0.03\n[speed]\nkind = nontrapping\n[time]\nT = 2 * T0\n[simulation]\nh = 0.05\n[reconstruction]\nh = 0.07\n",
    ),
    (
        "trap-long",
        "[experiment]\nname = trap-long\noutput = out/trap-long\n[speed]\nkind = trapping\n[time]\nT = 4 * T0\n[simulation]\nh = 0.07\n[reconstruction]\nh = 0.1\n",
    ),
    (
        "trap-mid",
        "[experiment]\nname = trap-mid\noutput = out/trap-mid\n[speed]\nkind = trapping\n[time]\nT = 2 * T0\n[simulation]\nh = 0.07\n[reconstruction]\nh = 0.1\n",
    ),
    (
        "trap-short",
        "[experiment]\nname = trap-short\noutput = out/trap-short\n[speed]\nkind = trapping\n[time]\nT = 1.2 * T0\n[simulation]\nh = 0.07\n[reconstruction]\nh = 0.1\niterations = 50\n",
    ),
];

pub fn preset_text(name: &str) -> CliResult<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| CliError::Config(format!("unknown preset `{name}`; known: {}", preset_names().join(", "))))
}

pub fn preset_names() -> Vec<&'static str> {
    PRESETS.iter().map(|(n, _)| *n).collect()
}

/// Parses the text into `section.key → value`. Keys before the first
/// section header are top-level (only `preset` is allowed there).
pub fn parse_pairs(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |msg: &str| CliError::Config(format!("line {}: {msg}: `{}`", no + 1, raw.trim()));
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| err("unterminated section header"))?.trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(err("bad section name"));
            }
            section = name.to_string();
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| err("expected `key = value`"))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() || v.is_empty() {
            return Err(err("empty key or value"));
        }
        let key = if section.is_empty() { k.to_string() } else { format!("{section}.{k}") };
        if out.insert(key.clone(), v.to_string()).is_some() {
            return Err(err(&format!("duplicate key `{key}`")));
        }
    }
    Ok(out)
}

/// Resolves a config text against the defaults (and a `preset = name`
/// line, if present), then applies `overrides` of the form `section.key=value`.
pub fn resolve(text: &str, overrides: &[String]) -> CliResult<BTreeMap<String, String>> {
    let mut map = parse_pairs(DEFAULTS)?;
    let user = parse_pairs(text)?;
    if let Some(p) = user.get("preset") {
        map.extend(parse_pairs(preset_text(p)?)?);
    }
    for (k, v) in user {
        if k == "preset" {
            continue;
        }
        set(&mut map, &k, v)?;
    }
    for o in overrides {
        let (k, v) = o.split_once('=').ok_or_else(|| CliError::Config(format!("override `{o}` is not `key=value`")))?;
        set(&mut map, k.trim(), v.trim().to_string())?;
    }
    Ok(map)
}

fn set(map: &mut BTreeMap<String, String>, key: &str, value: String) -> CliResult<()> {
    match map.get_mut(key) {
        Some(slot) => {
            *slot = value;
            Ok(())
        }
        None => Err(CliError::Config(format!("unknown key `{key}`"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Duration {
    Absolute(f64),
    T0Multiple(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Landweber,
    TimeReversal,
    HarmonicTimeReversal,
    Neumann,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Landweber => "landweber",
            Method::TimeReversal => "tr",
            Method::HarmonicTimeReversal => "tr-harmonic",
            Method::Neumann => "neumann",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpeedChoice {
    Constant,
    NonTrapping,
    Trapping,
}

/// Mesh size and time step rule `Δt = h/(dt_factor·c_max)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Discretization {
    pub h: f64,
    pub dt_factor: f64,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub output: PathBuf,
    pub radius: f64,
    pub phantom: PhantomKind,
    pub smoothing: f64,
    pub speed: SpeedChoice,
    pub speed_value: f64,
    pub eps: f64,
    pub t0_spacing: f64,
    pub duration: Duration,
    pub simulation: Discretization,
    pub reconstruction: Discretization,
    pub method: Method,
    pub omega: Option<f64>,
    pub power_iters: usize,
    pub omega_seed: u64,
    pub tau: f64,
    /// Relative noise level added to the resampled data.
    pub noise: f64,
    /// Explicit δ for the discrepancy principle; otherwise the added noise norm.
    pub delta: Option<f64>,
    pub iterations: usize,
    pub neumann_terms: usize,
    pub snapshot_every: usize,
    pub render_size: usize,
    /// The fully resolved key/value map, as recorded in manifests.
    pub resolved: BTreeMap<String, String>,
}

fn num<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> CliResult<T> {
    let v = &map[key];
    v.parse().map_err(|_| CliError::Config(format!("`{key} = {v}` is not a valid number")))
}

fn optional(map: &BTreeMap<String, String>, key: &str) -> CliResult<Option<f64>> {
    if map[key] == "auto" {
        Ok(None)
    } else {
        num(map, key).map(Some)
    }
}

/// Parses `T`: a number, or `k * T0` / `k*T0` / `T0`.
pub fn parse_duration(s: &str) -> CliResult<Duration> {
    let bad = || CliError::Config(format!("`time.T = {s}` must be a number or `k * T0`"));
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if compact == "T0" {
        return Ok(Duration::T0Multiple(1.0));
    }
    if let Some(k) = compact.strip_suffix("*T0") {
        return k.parse().map(Duration::T0Multiple).map_err(|_| bad());
    }
    compact.parse().map(Duration::Absolute).map_err(|_| bad())
}

impl ExperimentConfig {
    pub fn from_text(text: &str, overrides: &[String]) -> CliResult<Self> {
        Self::from_map(resolve(text, overrides)?)
    }

    pub fn from_map(map: BTreeMap<String, String>) -> CliResult<Self> {
        let phantom = match map["phantom.kind"].as_str() {
            "shepp-logan" => PhantomKind::SheppLogan,
            "ghosts" => PhantomKind::Ghosts,
            "gaussian" => PhantomKind::Gaussian { sigma: num(&map, "phantom.sigma")? },
            "zero" => PhantomKind::Zero,
            other => return Err(CliError::Config(format!("unknown phantom kind `{other}`"))),
        };
        let speed = match map["speed.kind"].as_str() {
            "constant" => SpeedChoice::Constant,
            "nontrapping" => SpeedChoice::NonTrapping,
            "trapping" => SpeedChoice::Trapping,
            other => return Err(CliError::Config(format!("unknown speed kind `{other}`"))),
        };
        let method = match map["reconstruction.method"].as_str() {
            "landweber" => Method::Landweber,
            "tr" => Method::TimeReversal,
            "tr-harmonic" => Method::HarmonicTimeReversal,
            "neumann" => Method::Neumann,
            other => return Err(CliError::Config(format!("unknown method `{other}`"))),
        };
        let cfg = Self {
            name: map["experiment.name"].clone(),
            seed: num(&map, "experiment.seed")?,
            output: PathBuf::from(&map["experiment.output"]),
            radius: num(&map, "domain.radius")?,
            phantom,
            smoothing: num(&map, "phantom.smoothing")?,
            speed,
            speed_value: num(&map, "speed.value")?,
            eps: num(&map, "speed.eps")?,
            t0_spacing: num(&map, "speed.t0_spacing")?,
            duration: parse_duration(&map["time.T"])?,
            simulation: Discretization { h: num(&map, "simulation.h")?, dt_factor: num(&map, "simulation.dt_factor")? },
            reconstruction: Discretization {
                h: num(&map, "reconstruction.h")?,
                dt_factor: num(&map, "reconstruction.dt_factor")?,
            },
            method,
            omega: optional(&map, "reconstruction.omega")?,
            power_iters: num(&map, "reconstruction.power_iters")?,
            omega_seed: num(&map, "reconstruction.omega_seed")?,
            tau: num(&map, "reconstruction.tau")?,
            noise: num(&map, "reconstruction.noise")?,
            delta: optional(&map, "reconstruction.delta")?,
            iterations: num(&map, "reconstruction.iterations")?,
            neumann_terms: num(&map, "reconstruction.J")?,
            snapshot_every: num(&map, "reconstruction.snapshot_every")?,
            render_size: num(&map, "reconstruction.render_size")?,
            resolved: map,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> CliResult<()> {
        let positive = |v: f64, what: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config(format!("{what} = {v} must be positive")))
            }
        };
        positive(self.radius, "domain.radius")?;
        positive(self.simulation.h, "simulation.h")?;
        positive(self.reconstruction.h, "reconstruction.h")?;
        positive(self.simulation.dt_factor, "simulation.dt_factor")?;
        positive(self.reconstruction.dt_factor, "reconstruction.dt_factor")?;
        positive(self.t0_spacing, "speed.t0_spacing")?;
        positive(self.speed_value, "speed.value")?;
        match self.duration {
            Duration::Absolute(t) => positive(t, "time.T")?,
            Duration::T0Multiple(k) => positive(k, "time.T multiple of T0")?,
        }
        for (h, what) in [(self.simulation.h, "simulation.h"), (self.reconstruction.h, "reconstruction.h")] {
            if h >= self.radius {
                return Err(CliError::Config(format!("{what} = {h} must be smaller than the radius")));
            }
        }
        if self.t0_spacing > self.radius / 20.0 {
            return Err(CliError::Config(format!("speed.t0_spacing must be at most radius/20 = {}", self.radius / 20.0)));
        }
        if !(self.tau > 1.0) {
            return Err(CliError::Config(format!("reconstruction.tau = {} must exceed 1", self.tau)));
        }
        if !(self.noise >= 0.0) {
            return Err(CliError::Config("reconstruction.noise must be non-negative".into()));
        }
        if let Some(d) = self.delta {
            if !(d >= 0.0) {
                return Err(CliError::Config("reconstruction.delta must be non-negative".into()));
            }
        }
        if let Some(w) = self.omega {
            positive(w, "reconstruction.omega")?;
        }
        if self.power_iters < 5 {
            return Err(CliError::Config("reconstruction.power_iters must be at least 5".into()));
        }
        if self.render_size < 2 {
            return Err(CliError::Config("reconstruction.render_size must be at least 2".into()));
        }
        self.phantom_field()?;
        self.speed_field()?;
        Ok(())
    }

    /// Rejects `Δt·c_max > h/10` for either discretization.
    pub fn check_stability_rule(&self) -> CliResult<()> {
        for (d, what) in [(self.simulation, "simulation"), (self.reconstruction, "reconstruction")] {
            if d.dt_factor < 10.0 {
                return Err(CliError::Config(format!(
                    "{what}.dt_factor = {} violates Δt·c_max ≤ h/10 (pass --override-stability to run anyway)",
                    d.dt_factor
                )));
            }
        }
        Ok(())
    }

    pub fn check_inverse_crime(&self) -> CliResult<()> {
        if self.simulation.h == self.reconstruction.h {
            return Err(CliError::Config(format!(
                "simulation and reconstruction both use h = {}; pass --allow-inverse-crime to permit this",
                self.simulation.h
            )));
        }
        Ok(())
    }

    pub fn phantom_field(&self) -> CliResult<Phantom> {
        Phantom::new(self.phantom, self.smoothing, self.radius).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn speed_field(&self) -> CliResult<SpeedField> {
        let field = match self.speed {
            SpeedChoice::Constant => SpeedField::constant(self.speed_value, self.radius),
            SpeedChoice::NonTrapping => SpeedField::nontrapping(self.radius).with_eps_smooth(self.eps * self.radius),
            SpeedChoice::Trapping => SpeedField::trapping(self.radius).with_eps_smooth(self.eps * self.radius),
        };
        field.map_err(|e| CliError::Config(e.to_string()))
    }

    /// The resolved configuration in the input grammar.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut section = "";
        for (k, v) in &self.resolved {
            let (s, key) = k.split_once('.').expect("resolved keys carry a section");
            if s != section {
                if !out.is_empty() {
                    out.push('\n');
                }
                out.push_str(&format!("[{s}]\n"));
                section = s;
            }
            out.push_str(&format!("{key} = {v}\n"));
        }
        out
    }
}
