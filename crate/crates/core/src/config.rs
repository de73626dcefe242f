//! Pipeline configuration: defaults, `key=value` files and validation.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::{BeamMode, FanParams, FocalTrough, Ellipse};
use crate::jawdetect::DEFAULT_JAW_THRESHOLD;
use crate::render::{RenderParams, DEFAULT_BETA};
use crate::volume::{SampleMode, WindowSpec};

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: expected key=value, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key {key:?}")]
    DuplicateKey { line: usize, key: String },
    #[error("{key}: cannot parse {value:?}: {reason}")]
    Value {
        key: String,
        value: String,
        reason: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, ConfigError>;

pub const DEFAULT_TROUGH_INCISOR_MM: f64 = 20.0;
pub const DEFAULT_TROUGH_MOLAR_MM: f64 = 15.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub preprocess_window: WindowSpec,
    pub render_window: WindowSpec,
    /// Axial jaw-mask threshold on preprocess-windowed values.
    pub jaw_threshold: f64,
    pub sweep_deg: f64,
    pub shift_min_deg: f64,
    pub shift_max_deg: f64,
    /// Beam sample spacing in voxels.
    pub delta: f64,
    pub beam_mode: BeamMode,
    pub beta: f64,
    pub sample_mode: SampleMode,
    /// Focal trough thickness at the incisors and molars, mm.
    pub trough_incisor_mm: f64,
    pub trough_molar_mm: f64,
    pub tilt_correct: bool,
    pub bits: u8,
    /// Also write a PNG next to the PGM output.
    pub png: bool,
    pub debug_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let fan = FanParams::default();
        Self {
            input: None,
            output: None,
            preprocess_window: WindowSpec::PREPROCESS,
            render_window: WindowSpec::RENDER,
            jaw_threshold: DEFAULT_JAW_THRESHOLD,
            sweep_deg: fan.sweep_deg,
            shift_min_deg: fan.shift_min_deg,
            shift_max_deg: fan.shift_max_deg,
            delta: fan.delta,
            beam_mode: fan.mode,
            beta: DEFAULT_BETA,
            sample_mode: SampleMode::Trilinear,
            trough_incisor_mm: DEFAULT_TROUGH_INCISOR_MM,
            trough_molar_mm: DEFAULT_TROUGH_MOLAR_MM,
            tilt_correct: true,
            bits: 16,
            png: false,
            debug_dir: None,
            threads: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::Value {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(ConfigError::Value {
            key: key.to_string(),
            value: value.to_string(),
            reason: "expected true or false".into(),
        }),
    }
}

fn parse_sample_mode(key: &str, value: &str) -> Result<SampleMode> {
    match value {
        "nearest" => Ok(SampleMode::Nearest),
        "bilinear" | "trilinear" => Ok(SampleMode::Trilinear),
        _ => Err(ConfigError::Value {
            key: key.to_string(),
            value: value.to_string(),
            reason: "expected nearest or bilinear".into(),
        }),
    }
}

fn sample_mode_name(m: SampleMode) -> &'static str {
    match m {
        SampleMode::Nearest => "nearest",
        SampleMode::Trilinear => "bilinear",
    }
}

const KEYS: &[&str] = &[
    "input",
    "output",
    "preprocess_lo",
    "preprocess_hi",
    "render_lo",
    "render_hi",
    "jaw_threshold",
    "sweep_deg",
    "shift_min",
    "shift_max",
    "delta",
    "beam_mode",
    "beta",
    "sample_mode",
    "trough_incisor",
    "trough_molar",
    "tilt_correct",
    "bits",
    "png",
    "debug_dir",
    "threads",
];

impl PipelineConfig {
    /// Parse `key=value` lines over the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                text: raw.to_string(),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            cfg.set(key, value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_text(&text)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "input" => self.input = Some(PathBuf::from(value)),
            "output" => self.output = Some(PathBuf::from(value)),
            "preprocess_lo" => self.preprocess_window.lo = parse(key, value)?,
            "preprocess_hi" => self.preprocess_window.hi = parse(key, value)?,
            "render_lo" => self.render_window.lo = parse(key, value)?,
            "render_hi" => self.render_window.hi = parse(key, value)?,
            "jaw_threshold" => self.jaw_threshold = parse(key, value)?,
            "sweep_deg" => self.sweep_deg = parse(key, value)?,
            "shift_min" => self.shift_min_deg = parse(key, value)?,
            "shift_max" => self.shift_max_deg = parse(key, value)?,
            "delta" => self.delta = parse(key, value)?,
            "beam_mode" => self.beam_mode = parse(key, value)?,
            "beta" => self.beta = parse(key, value)?,
            "sample_mode" => self.sample_mode = parse_sample_mode(key, value)?,
            "trough_incisor" => self.trough_incisor_mm = parse(key, value)?,
            "trough_molar" => self.trough_molar_mm = parse(key, value)?,
            "tilt_correct" => self.tilt_correct = parse_bool(key, value)?,
            "bits" => self.bits = parse(key, value)?,
            "png" => self.png = parse_bool(key, value)?,
            "debug_dir" => self.debug_dir = Some(PathBuf::from(value)),
            "threads" => self.threads = Some(parse(key, value)?),
            _ => unreachable!("key list checked by caller"),
        }
        Ok(())
    }

    pub fn fan_params(&self) -> FanParams {
        FanParams {
            sweep_deg: self.sweep_deg,
            shift_min_deg: self.shift_min_deg,
            shift_max_deg: self.shift_max_deg,
            delta: self.delta,
            mode: self.beam_mode,
        }
    }

    pub fn render_params(&self) -> RenderParams {
        RenderParams {
            beta: self.beta,
            render_window: self.render_window,
            sample_mode: self.sample_mode,
        }
    }

    /// Check every numeric parameter; needs no volume.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        for (name, w) in [("preprocess", self.preprocess_window), ("render", self.render_window)] {
            if w.validate().is_err() {
                return bad(format!("{name} window lo {} must be below hi {}", w.lo, w.hi));
            }
        }
        if !(self.jaw_threshold > 0.0 && self.jaw_threshold < 1.0) {
            return bad(format!("jaw_threshold must lie in (0, 1), got {}", self.jaw_threshold));
        }
        if let Err(e) = self.fan_params().validate() {
            return bad(e.to_string());
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad(format!("beta must be positive, got {}", self.beta));
        }
        // thickness ordering checked against a large dummy ellipse
        if let Err(e) = Ellipse::new(0.0, 0.0, 1e9, 1e9)
            .and_then(|e| FocalTrough::around(&e, self.trough_incisor_mm, self.trough_molar_mm))
        {
            return bad(e.to_string());
        }
        if !matches!(self.bits, 8 | 16) {
            return bad(format!("bits must be 8 or 16, got {}", self.bits));
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }

    /// Canonical `key=value` snapshot; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k}={v}");
        };
        if let Some(p) = &self.input {
            kv("input", p.display().to_string());
        }
        if let Some(p) = &self.output {
            kv("output", p.display().to_string());
        }
        kv("preprocess_lo", format!("{:?}", self.preprocess_window.lo));
        kv("preprocess_hi", format!("{:?}", self.preprocess_window.hi));
        kv("render_lo", format!("{:?}", self.render_window.lo));
        kv("render_hi", format!("{:?}", self.render_window.hi));
        kv("jaw_threshold", format!("{:?}", self.jaw_threshold));
        kv("sweep_deg", format!("{:?}", self.sweep_deg));
        kv("shift_min", format!("{:?}", self.shift_min_deg));
        kv("shift_max", format!("{:?}", self.shift_max_deg));
        kv("delta", format!("{:?}", self.delta));
        kv("beam_mode", self.beam_mode.to_string());
        kv("beta", format!("{:?}", self.beta));
        kv("sample_mode", sample_mode_name(self.sample_mode).to_string());
        kv("trough_incisor", format!("{:?}", self.trough_incisor_mm));
        kv("trough_molar", format!("{:?}", self.trough_molar_mm));
        kv("tilt_correct", self.tilt_correct.to_string());
        kv("bits", self.bits.to_string());
        kv("png", self.png.to_string());
        if let Some(p) = &self.debug_dir {
            kv("debug_dir", p.display().to_string());
        }
        if let Some(t) = self.threads {
            kv("threads", t.to_string());
        }
        s
    }
}
