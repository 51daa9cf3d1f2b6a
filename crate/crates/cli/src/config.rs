//! Experiment configuration: a sectioned `key = value` text format with unit
//! suffixes, or JSON with the same sections and keys.
//!
//! ```text
//! [system]
//! chi = 3.9 MHz
//! t1 = 5.5 us
//! n_th = 0.04
//!
//! [drive]
//! kind = squeezed
//! amplitude = 4.0 MHz
//! ```
//!
//! Frequencies and rates are cyclic (`ω/2π`) and take `Hz`, `kHz`, `MHz` or
//! `GHz`; times take `s`, `ms`, `us` or `ns`; dimensionless values carry no
//! suffix. Unknown sections or keys are rejected.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::Value;

use fockprobe::fitting::FitParam;
use fockprobe::fock::SpaceLayout;
use fockprobe::model::{DriveKind, SystemParams};
use fockprobe::steady::DEFAULT_TRUNCATION_THRESHOLD;

use crate::error::{CliError, CliResult};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: Option<usize>,
}

/// Parsed but untyped configuration.
#[derive(Clone, Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_text(text)
        }
    }

    fn parse_text(text: &str) -> CliResult<Self> {
        let mut cfg = RawConfig::default();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(name) = content.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| CliError::Config { section: None, key: None, line: Some(line), message: "unterminated section header".into() })?
                    .trim();
                if cfg.sections.contains_key(name) {
                    return Err(CliError::Config { section: Some(name.into()), key: None, line: Some(line), message: "duplicate section".into() });
                }
                cfg.sections.insert(name.to_string(), BTreeMap::new());
                current = Some(name.to_string());
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| CliError::Config {
                section: current.clone(),
                key: None,
                line: Some(line),
                message: format!("expected `key = value`, found `{content}`"),
            })?;
            let section = current.clone().ok_or_else(|| CliError::Config {
                section: None,
                key: Some(key.trim().into()),
                line: Some(line),
                message: "key outside of a section".into(),
            })?;
            let key = key.trim().to_string();
            let entries = cfg.sections.get_mut(&section).unwrap();
            if entries.contains_key(&key) {
                return Err(CliError::at(&section, &key, Some(line), "duplicate key"));
            }
            entries.insert(key, Entry { value: value.trim().to_string(), line: Some(line) });
        }
        Ok(cfg)
    }

    fn parse_json(text: &str) -> CliResult<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| CliError::Config {
            section: None,
            key: None,
            line: Some(e.line()),
            message: format!("invalid JSON: {e}"),
        })?;
        let top = v.as_object().ok_or_else(|| CliError::config("JSON config must be an object of sections"))?;
        let mut cfg = RawConfig::default();
        for (name, body) in top {
            let obj = body
                .as_object()
                .ok_or_else(|| CliError::Config { section: Some(name.clone()), key: None, line: None, message: "section must be an object".into() })?;
            let mut entries = BTreeMap::new();
            for (key, val) in obj {
                let value = json_scalar(val).ok_or_else(|| CliError::at(name, key, None, "value must be a string, number, boolean or flat list"))?;
                entries.insert(key.clone(), Entry { value, line: None });
            }
            cfg.sections.insert(name.clone(), entries);
        }
        Ok(cfg)
    }

    fn section(&mut self, name: &str) -> Section {
        Section { name: name.to_string(), entries: self.sections.remove(name).unwrap_or_default() }
    }

    fn has_section(&self, name: &str) -> bool {
        self.sections.contains_key(name)
    }
}

fn json_scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        Value::Array(items) => items.iter().map(json_scalar).collect::<Option<Vec<_>>>().map(|v| v.join(", ")),
        _ => None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dimension {
    Frequency,
    Time,
    Dimensionless,
}

fn unit_scale(unit: &str) -> Option<(Dimension, f64)> {
    Some(match unit {
        "Hz" => (Dimension::Frequency, TWO_PI),
        "kHz" => (Dimension::Frequency, TWO_PI * 1e3),
        "MHz" => (Dimension::Frequency, TWO_PI * 1e6),
        "GHz" => (Dimension::Frequency, TWO_PI * 1e9),
        "s" => (Dimension::Time, 1.0),
        "ms" => (Dimension::Time, 1e-3),
        "us" | "µs" => (Dimension::Time, 1e-6),
        "ns" => (Dimension::Time, 1e-9),
        "dimensionless" => (Dimension::Dimensionless, 1.0),
        _ => return None,
    })
}

/// Splits `"4.0 MHz"` or `"4.0MHz"` into number and unit.
fn split_quantity(text: &str) -> Result<(f64, Option<&str>), String> {
    let text = text.trim();
    let end = text.find(|c: char| c.is_whitespace() || (c.is_alphabetic() && c != 'e' && c != 'E') || c == 'µ').unwrap_or(text.len());
    let (num, unit) = text.split_at(end);
    let value: f64 = num.trim().parse().map_err(|_| format!("`{text}` is not a number"))?;
    let unit = unit.trim();
    Ok((value, (!unit.is_empty()).then_some(unit)))
}

struct Section {
    name: String,
    entries: BTreeMap<String, Entry>,
}

impl Section {
    fn err(&self, key: &str, line: Option<usize>, msg: impl Into<String>) -> CliError {
        CliError::at(&self.name, key, line, msg)
    }

    fn take(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn quantity(&self, key: &str, e: &Entry, text: &str, want: Dimension) -> CliResult<f64> {
        let (v, unit) = split_quantity(text).map_err(|m| self.err(key, e.line, m))?;
        if !v.is_finite() {
            return Err(self.err(key, e.line, "value must be finite"));
        }
        let (dim, scale) = match unit {
            None => (Dimension::Dimensionless, 1.0),
            Some(u) => unit_scale(u).ok_or_else(|| self.err(key, e.line, format!("unknown unit `{u}`")))?,
        };
        if dim != want {
            let expect = match want {
                Dimension::Frequency => "a frequency unit (Hz, kHz, MHz, GHz)",
                Dimension::Time => "a time unit (s, ms, us, ns)",
                Dimension::Dimensionless => "no unit",
            };
            return Err(self.err(key, e.line, format!("`{text}` needs {expect}")));
        }
        Ok(v * scale)
    }

    fn get(&mut self, key: &str, want: Dimension) -> CliResult<Option<f64>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => self.quantity(key, &e, &e.value, want).map(Some),
        }
    }

    fn frequency(&mut self, key: &str) -> CliResult<Option<f64>> {
        self.get(key, Dimension::Frequency)
    }

    fn number(&mut self, key: &str) -> CliResult<Option<f64>> {
        self.get(key, Dimension::Dimensionless)
    }

    fn time(&mut self, key: &str) -> CliResult<Option<f64>> {
        self.get(key, Dimension::Time)
    }

    fn list(&mut self, key: &str, want: Dimension) -> CliResult<Option<Vec<f64>>> {
        let Some(e) = self.take(key) else { return Ok(None) };
        let items: Vec<&str> = e.value.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(self.err(key, e.line, "empty list"));
        }
        // A unit on the last item alone applies to the whole list.
        let trailing = split_quantity(items[items.len() - 1]).ok().and_then(|(_, u)| u.map(str::to_string));
        items
            .iter()
            .map(|s| {
                let bare = split_quantity(s).map(|(_, u)| u.is_none()).unwrap_or(false);
                match (&trailing, bare) {
                    (Some(u), true) => self.quantity(key, &e, &format!("{s} {u}"), want),
                    _ => self.quantity(key, &e, s, want),
                }
            })
            .collect::<CliResult<Vec<_>>>()
            .map(Some)
    }

    fn integer(&mut self, key: &str) -> CliResult<Option<usize>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| self.err(key, e.line, format!("`{}` is not a non-negative integer", e.value))),
        }
    }

    fn word(&mut self, key: &str) -> Option<(String, Option<usize>)> {
        self.take(key).map(|e| (e.value, e.line))
    }

    fn boolean(&mut self, key: &str) -> CliResult<Option<bool>> {
        match self.take(key) {
            None => Ok(None),
            Some(e) => match e.value.as_str() {
                "true" | "yes" => Ok(Some(true)),
                "false" | "no" => Ok(Some(false)),
                other => Err(self.err(key, e.line, format!("`{other}` is not a boolean"))),
            },
        }
    }

    /// Errors on any key nobody asked for.
    fn finish(self) -> CliResult<()> {
        match self.entries.into_iter().next() {
            None => Ok(()),
            Some((k, e)) => Err(CliError::at(&self.name, &k, e.line, "unknown key")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Both,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(Format::Csv),
            "json" => Some(Format::Json),
            "both" => Some(Format::Both),
            _ => None,
        }
    }

    pub fn csv(self) -> bool {
        self != Format::Json
    }

    pub fn json(self) -> bool {
        self != Format::Csv
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepKind {
    QubitDrive,
    Probe,
}

/// Linearly spaced sweep, stored as angular frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepKind,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<f64> {
        let n = self.points;
        (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Observable {
    /// First-order probe transmission in the squeeze frame.
    Transmission,
    /// Steady-state excited-qubit population.
    Excitation,
    /// Exact transmission with the finite probe, in the probe frame.
    ProbeFrame,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumSpec {
    pub observable: Observable,
    /// Absolute probe frequencies for the probe-frame observable.
    pub probes: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DistributionSource {
    SteadyState,
    LossySqueezed { r: f64, l: f64, dim: usize },
    ThermalCoherent { n_th: f64, alpha_re: f64, alpha_im: f64, dim: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitSpec {
    pub target: Option<PathBuf>,
    pub family: fockprobe::fitting::ModelFamily,
    /// `(param, lower, upper, initial)` in internal units.
    pub free: Vec<(FitParam, f64, f64, f64)>,
    pub restarts: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Simplex size at convergence, as a fraction of each bound interval.
    pub xtol: f64,
    /// Absolute objective spread at convergence.
    pub ftol: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CalibrationSpec {
    pub traces: bool,
    pub ramsey_detuning: f64,
    pub duration: f64,
    pub samples: usize,
    pub cavity_dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemParams<f64>,
    pub drive: DriveKind<f64>,
    pub cavity_dim: usize,
    pub jpa_dim: usize,
    pub tail_threshold: f64,
    pub residual_tol: Option<f64>,
    pub jobs: Option<usize>,
    pub sweep: Option<SweepSpec>,
    pub spectrum: SpectrumSpec,
    pub distribution: DistributionSource,
    pub deltas: Option<Vec<f64>>,
    pub fit: Option<FitSpec>,
    pub calibration: CalibrationSpec,
    pub out_dir: Option<PathBuf>,
    pub format: Format,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        Self::from_raw(RawConfig::parse(text)?)
    }

    pub fn layout(&self) -> CliResult<SpaceLayout> {
        let l = if self.jpa_dim == 0 { SpaceLayout::without_jpa(self.cavity_dim) } else { SpaceLayout::new(self.cavity_dim, self.jpa_dim) };
        l.map_err(|e| CliError::at("truncation", "cavity", None, e.to_string()))
    }

    fn from_raw(mut raw: RawConfig) -> CliResult<Self> {
        let system = read_system(&mut raw)?;
        let drive = read_drive(&mut raw)?;

        let mut t = raw.section("truncation");
        let cavity_dim = t.integer("cavity")?.unwrap_or(10);
        let jpa_dim = t.integer("jpa")?.unwrap_or(0);
        t.finish()?;
        if cavity_dim < 2 {
            return Err(CliError::at("truncation", "cavity", None, "cavity dimension must be at least 2"));
        }
        if drive.needs_jpa() && jpa_dim == 1 {
            return Err(CliError::at("truncation", "jpa", None, "JPA dimension must be 0 (eliminated) or at least 2"));
        }
        if matches!(drive, DriveKind::Squeezed { .. }) && jpa_dim < 2 {
            return Err(CliError::at("truncation", "jpa", None, "a squeezed drive needs the JPA mode (jpa >= 2)"));
        }

        let mut s = raw.section("solver");
        let tail_threshold = s.number("tail_threshold")?.unwrap_or(DEFAULT_TRUNCATION_THRESHOLD);
        let residual_tol = s.number("residual_tol")?;
        let jobs = s.integer("jobs")?;
        s.finish()?;
        if !(tail_threshold > 0.0 && tail_threshold < 1.0) {
            return Err(CliError::at("solver", "tail_threshold", None, "tail_threshold must lie in (0, 1)"));
        }
        if jobs == Some(0) {
            return Err(CliError::at("solver", "jobs", None, "jobs must be at least 1"));
        }

        let sweep = if raw.has_section("sweep") { Some(read_sweep(&mut raw, &system)?) } else { None };
        let spectrum = read_spectrum(&mut raw, &system)?;
        let distribution = read_distribution(&mut raw)?;

        let deltas = if raw.has_section("detuning") {
            let mut d = raw.section("detuning");
            let v = d.list("deltas", Dimension::Frequency)?.ok_or_else(|| d.err("deltas", None, "missing detuning list"))?;
            d.finish()?;
            Some(v)
        } else {
            None
        };

        let fit = if raw.has_section("fit") { Some(read_fit(&mut raw)?) } else { None };

        let mut c = raw.section("calibration");
        let calibration = CalibrationSpec {
            traces: c.boolean("traces")?.unwrap_or(true),
            ramsey_detuning: c.frequency("ramsey_detuning")?.unwrap_or(TWO_PI * 0.9e6),
            duration: c.time("duration")?.unwrap_or(20e-6),
            samples: c.integer("samples")?.unwrap_or(401),
            cavity_dim: c.integer("cavity_dim")?.unwrap_or(6),
        };
        c.finish()?;
        if calibration.samples < 16 || !(calibration.duration > 0.0) {
            return Err(CliError::at("calibration", "samples", None, "traces need at least 16 samples over a positive duration"));
        }

        let mut o = raw.section("output");
        let out_dir = o.word("directory").map(|(d, _)| PathBuf::from(d));
        let format = match o.word("format") {
            None => Format::Both,
            Some((f, line)) => Format::parse(&f).ok_or_else(|| CliError::at("output", "format", line, "format must be csv, json or both"))?,
        };
        o.finish()?;

        if let Some(name) = raw.sections.keys().next() {
            return Err(CliError::Config { section: Some(name.clone()), key: None, line: None, message: "unknown section".into() });
        }

        Ok(Self {
            system,
            drive,
            cavity_dim,
            jpa_dim,
            tail_threshold,
            residual_tol,
            jobs,
            sweep,
            spectrum,
            distribution,
            deltas,
            fit,
            calibration,
            out_dir,
            format,
        })
    }
}

fn read_system(raw: &mut RawConfig) -> CliResult<SystemParams<f64>> {
    let mut s = raw.section("system");
    let mut p = SystemParams::<f64>::table_s1();
    macro_rules! set {
        ($field:ident, $get:ident) => {
            if let Some(v) = s.$get(stringify!($field))? {
                p.$field = v;
            }
        };
    }
    set!(omega_c, frequency);
    set!(omega_q, frequency);
    set!(chi, frequency);
    set!(kappa, frequency);
    set!(kappa_e, frequency);
    set!(kappa_e_prime, frequency);
    set!(gamma_phi, frequency);
    set!(n_th, number);
    set!(p_th, number);
    set!(qubit_drive, frequency);
    set!(probe_amplitude, frequency);
    if let Some(t1) = s.time("t1")? {
        if !(t1 > 0.0) {
            return Err(s.err("t1", None, "t1 must be positive"));
        }
        p.gamma = 1.0 / t1;
    }
    // Carrier frequencies default relative to the (possibly overridden)
    // cavity and qubit lines.
    p.omega_s = p.omega_c + p.chi;
    p.omega_d = p.omega_q;
    p.omega_p = p.omega_c - p.chi;
    let omega_s = s.frequency("omega_s")?;
    let delta = s.frequency("source_detuning")?;
    match (omega_s, delta) {
        (Some(_), Some(_)) => return Err(s.err("source_detuning", None, "give omega_s or source_detuning, not both")),
        (Some(w), None) => p.omega_s = w,
        (None, Some(d)) => p = p.with_source_detuning(d),
        (None, None) => {}
    }
    set!(omega_d, frequency);
    set!(omega_p, frequency);
    s.finish()?;
    p.validate().map_err(|e| CliError::Config { section: Some("system".into()), key: None, line: None, message: e.to_string() })?;
    Ok(p)
}

fn read_drive(raw: &mut RawConfig) -> CliResult<DriveKind<f64>> {
    let mut d = raw.section("drive");
    let (kind, line) = d.word("kind").unwrap_or_else(|| ("off".into(), None));
    let amplitude = d.frequency("amplitude")?;
    let n_th = d.number("n_th")?;
    let need = |v: Option<f64>, key: &str, d: &Section| v.ok_or_else(|| d.err(key, line, format!("{kind} drive needs `{key}`")));
    let drive = match kind.as_str() {
        "off" => DriveKind::Off,
        "thermal" => DriveKind::Thermal { n_th: need(n_th, "n_th", &d)? },
        "coherent" => DriveKind::Coherent { amplitude: need(amplitude, "amplitude", &d)? },
        "squeezed" => DriveKind::Squeezed { amplitude: need(amplitude, "amplitude", &d)? },
        other => return Err(d.err("kind", line, format!("unknown drive kind `{other}` (off, thermal, coherent, squeezed)"))),
    };
    let unused = match drive {
        DriveKind::Off => amplitude.map(|_| "amplitude").or(n_th.map(|_| "n_th")),
        DriveKind::Thermal { .. } => amplitude.map(|_| "amplitude"),
        _ => n_th.map(|_| "n_th"),
    };
    if let Some(key) = unused {
        return Err(d.err(key, None, format!("`{key}` does not apply to a {kind} drive")));
    }
    d.finish()?;
    drive.validate().map_err(|e| CliError::at("drive", "kind", line, e.to_string()))?;
    Ok(drive)
}

fn read_sweep(raw: &mut RawConfig, p: &SystemParams<f64>) -> CliResult<SweepSpec> {
    let mut s = raw.section("sweep");
    let axis = match s.word("axis") {
        None => SweepKind::QubitDrive,
        Some((a, line)) => match a.as_str() {
            "qubit-drive" => SweepKind::QubitDrive,
            "probe" => SweepKind::Probe,
            other => return Err(s.err("axis", line, format!("unknown axis `{other}` (qubit-drive, probe)"))),
        },
    };
    let origin = match s.word("reference") {
        None => 0.0,
        Some((r, line)) => match r.as_str() {
            "absolute" => 0.0,
            "omega_q" => p.omega_q,
            "omega_c" => p.omega_c,
            other => return Err(s.err("reference", line, format!("unknown reference `{other}` (absolute, omega_q, omega_c)"))),
        },
    };
    let start = s.frequency("start")?.ok_or_else(|| s.err("start", None, "sweep needs `start`"))?;
    let stop = s.frequency("stop")?.ok_or_else(|| s.err("stop", None, "sweep needs `stop`"))?;
    let points = s.integer("points")?.ok_or_else(|| s.err("points", None, "sweep needs `points`"))?;
    s.finish()?;
    if points < 2 {
        return Err(CliError::at("sweep", "points", None, format!("sweep needs at least 2 points, got {points}")));
    }
    if start == stop {
        return Err(CliError::at("sweep", "stop", None, "sweep start and stop coincide"));
    }
    Ok(SweepSpec { axis, start: origin + start, stop: origin + stop, points })
}

fn read_spectrum(raw: &mut RawConfig, p: &SystemParams<f64>) -> CliResult<SpectrumSpec> {
    let mut s = raw.section("spectrum");
    let observable = match s.word("observable") {
        None => Observable::Transmission,
        Some((o, line)) => match o.as_str() {
            "transmission" => Observable::Transmission,
            "excitation" => Observable::Excitation,
            "probe-frame" => Observable::ProbeFrame,
            other => return Err(s.err("observable", line, format!("unknown observable `{other}` (transmission, excitation, probe-frame)"))),
        },
    };
    let probes = s.list("probe_offsets", Dimension::Frequency)?.unwrap_or_default().into_iter().map(|d| p.omega_c + d).collect();
    s.finish()?;
    Ok(SpectrumSpec { observable, probes })
}

fn read_distribution(raw: &mut RawConfig) -> CliResult<DistributionSource> {
    let mut s = raw.section("distribution");
    let (source, line) = s.word("source").unwrap_or_else(|| ("steady-state".into(), None));
    let dim = s.integer("dim")?.unwrap_or(30);
    let out = match source.as_str() {
        "steady-state" => DistributionSource::SteadyState,
        "lossy-squeezed" => DistributionSource::LossySqueezed {
            r: s.number("r")?.ok_or_else(|| s.err("r", line, "lossy-squeezed needs `r`"))?,
            l: s.number("l")?.ok_or_else(|| s.err("l", line, "lossy-squeezed needs `l`"))?,
            dim,
        },
        "thermal-coherent" => DistributionSource::ThermalCoherent {
            n_th: s.number("n_th")?.ok_or_else(|| s.err("n_th", line, "thermal-coherent needs `n_th`"))?,
            alpha_re: s.number("alpha_re")?.unwrap_or(0.0),
            alpha_im: s.number("alpha_im")?.unwrap_or(0.0),
            dim,
        },
        other => return Err(s.err("source", line, format!("unknown source `{other}` (steady-state, lossy-squeezed, thermal-coherent)"))),
    };
    s.finish()?;
    Ok(out)
}

fn read_fit(raw: &mut RawConfig) -> CliResult<FitSpec> {
    use fockprobe::fitting::ModelFamily;
    let mut s = raw.section("fit");
    let target = s.word("target").map(|(t, _)| PathBuf::from(t));
    let family = match s.word("family") {
        None => return Err(s.err("family", None, "fit needs `family` (thermal, coherent, squeezed)")),
        Some((f, line)) => match f.as_str() {
            "thermal" => ModelFamily::Thermal,
            "coherent" => ModelFamily::Coherent,
            "squeezed" => ModelFamily::Squeezed,
            other => return Err(s.err("family", line, format!("unknown family `{other}`"))),
        },
    };
    let params = [
        ("free.n_th", FitParam::NTh, Dimension::Dimensionless),
        ("free.drive_amplitude", FitParam::DriveAmplitude, Dimension::Frequency),
        ("free.kappa_e", FitParam::KappaE, Dimension::Frequency),
        ("free.qubit_drive", FitParam::QubitDrive, Dimension::Frequency),
        ("free.probe_amplitude", FitParam::ProbeAmplitude, Dimension::Frequency),
    ];
    let mut free = Vec::new();
    for (key, param, dim) in params {
        if let Some(v) = s.list(key, dim)? {
            if v.len() != 3 {
                return Err(s.err(key, None, "expected `lower, upper, initial`"));
            }
            if !(v[0] < v[1] && v[0] <= v[2] && v[2] <= v[1]) {
                return Err(s.err(key, None, "need lower < upper with the initial value between them"));
            }
            free.push((param, v[0], v[1], v[2]));
        }
    }
    if free.is_empty() {
        return Err(s.err("free", None, "fit needs at least one `free.<param> = lower, upper, initial` entry"));
    }
    let restarts = s.integer("restarts")?.unwrap_or(2);
    let max_iterations = s.integer("max_iterations")?.unwrap_or(400);
    let seed = s.integer("seed")?.unwrap_or(0) as u64;
    let xtol = s.number("xtol")?.unwrap_or(1e-6);
    let ftol = s.number("ftol")?.unwrap_or(1e-12);
    s.finish()?;
    if !(xtol > 0.0 && ftol >= 0.0) {
        return Err(CliError::at("fit", "xtol", None, "xtol must be positive and ftol non-negative"));
    }
    Ok(FitSpec { target, family, free, restarts, max_iterations, seed, xtol, ftol })
}

/// Cyclic MHz for an angular frequency.
pub fn to_mhz(w: f64) -> f64 {
    w / (TWO_PI * 1e6)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = "\
[system]
chi = 3.9 MHz   # dispersive shift
t1 = 5.5 us
n_th = 0.04

[drive]
kind = squeezed
amplitude = 4 MHz

[truncation]
cavity = 6
jpa = 4

[sweep]
reference = omega_q
start = -27.3 MHz
stop = 3.9 MHz
points = 81
";

    #[test]
    fn text_config_round_trips_units() {
        let c = ExperimentConfig::parse(BASIC).unwrap();
        assert!((c.system.chi - TWO_PI * 3.9e6).abs() < 1e-6);
        assert!((c.system.gamma - 1.0 / 5.5e-6).abs() < 1e-6);
        assert_eq!(c.drive, DriveKind::Squeezed { amplitude: TWO_PI * 4e6 });
        let s = c.sweep.unwrap();
        assert_eq!(s.points, 81);
        assert!((s.start - (c.system.omega_q - TWO_PI * 27.3e6)).abs() < 1e-3);
        assert_eq!(c.format, Format::Both);
    }

    #[test]
    fn json_config_matches_text() {
        let json = r#"{
            "system": {"chi": "3.9 MHz", "t1": "5.5 us", "n_th": 0.04},
            "drive": {"kind": "squeezed", "amplitude": "4 MHz"},
            "truncation": {"cavity": 6, "jpa": 4},
            "sweep": {"reference": "omega_q", "start": "-27.3 MHz", "stop": "3.9 MHz", "points": 81}
        }"#;
        assert_eq!(ExperimentConfig::parse(json).unwrap(), ExperimentConfig::parse(BASIC).unwrap());
    }

    #[test]
    fn missing_unit_is_rejected() {
        let err = ExperimentConfig::parse("[system]\nchi = 3.9\n").unwrap_err();
        match err {
            CliError::Config { key, line, .. } => {
                assert_eq!(key.as_deref(), Some("chi"));
                assert_eq!(line, Some(2));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_dimension_and_unknown_key_are_rejected() {
        assert!(ExperimentConfig::parse("[system]\nt1 = 5 MHz\n").is_err());
        assert!(ExperimentConfig::parse("[system]\nn_th = 0.1 MHz\n").is_err());
        assert!(ExperimentConfig::parse("[system]\nchy = 3.9 MHz\n").is_err());
        assert!(ExperimentConfig::parse("[sytem]\n").is_err());
    }

    #[test]
    fn empty_sweep_is_rejected() {
        let text = "[sweep]\nstart = 0 MHz\nstop = 1 MHz\npoints = 0\n";
        let err = ExperimentConfig::parse(text).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::exit::CONFIG);
    }

    #[test]
    fn list_with_trailing_unit() {
        let c = ExperimentConfig::parse("[detuning]\ndeltas = 0, 1, 3, 10 MHz\n").unwrap();
        let d = c.deltas.unwrap();
        assert_eq!(d.len(), 4);
        assert!((d[3] - TWO_PI * 10e6).abs() < 1e-6);
        assert!(ExperimentConfig::parse("[detuning]\ndeltas = 0 MHz, 1\n").is_err());
    }

    #[test]
    fn squeezed_drive_needs_jpa() {
        assert!(ExperimentConfig::parse("[drive]\nkind = squeezed\namplitude = 1 MHz\n").is_err());
    }

    #[test]
    fn quantity_split_accepts_glued_units() {
        assert_eq!(split_quantity("4.5MHz").unwrap(), (4.5, Some("MHz")));
        assert_eq!(split_quantity("1e-3").unwrap(), (1e-3, None));
        assert_eq!(split_quantity("-2.5e1 kHz").unwrap(), (-25.0, Some("kHz")));
    }
}
