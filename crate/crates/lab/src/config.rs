//! Flat JSON experiment configuration.

use std::path::Path;

use serde::{Deserialize, Serialize};

use ahpl_core::certificates::ControlParams;

use crate::error::{LabError, LabResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// `x ↦ 1 − a|x|^d`.
    Quad,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertifyMode {
    Threshold,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub family: Family,
    /// Explicit parameter; wins over `combinatorics`.
    pub a: Option<f64>,
    /// Repeating renormalization periods, e.g. `[2]` for the Feigenbaum map.
    pub combinatorics: Option<Vec<u32>>,
    pub d: u32,
    /// Truncation order of the extension.
    pub m: usize,
    /// Tower depth.
    pub depth: usize,
    /// Renormalization level of the AHPL map.
    pub level: usize,
    /// Level whose extension `extend` fits.
    pub extend_level: usize,
    pub c_v: f64,
    pub resolution: usize,
    pub max_iter: u32,
    pub max_period: u32,
    pub corpus: usize,
    pub corpus_depth: usize,
    pub nest_depth: usize,
    pub shrink_samples: usize,
    pub shrink_depth: usize,
    pub itinerary_length: usize,
    /// Ray angles as `[numerator, denominator]`.
    pub rays: Vec<[u64; 2]>,
    pub ray_levels: usize,
    pub certify_mode: CertifyMode,
    pub alpha: f64,
    pub delta: f64,
    pub theta: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub n0: u32,
    pub r: f64,
    /// Taylor-remainder constant inside `B_θ`.
    pub c0: f64,
    pub c_theta: f64,
    /// `C_α`; measured from the map in full mode.
    pub c_alpha: f64,
    pub samples: usize,
    pub seed: u64,
    pub output: String,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            family: Family::Quad,
            a: None,
            combinatorics: Some(vec![2]),
            d: 2,
            m: 3,
            depth: 12,
            level: 8,
            extend_level: 2,
            c_v: 2.0,
            resolution: 512,
            max_iter: 64,
            max_period: 4,
            corpus: 64,
            corpus_depth: 24,
            nest_depth: 8,
            shrink_samples: 64,
            shrink_depth: 4,
            itinerary_length: 2048,
            rays: vec![[0, 1], [1, 2], [1, 3], [2, 3]],
            ray_levels: 40,
            certify_mode: CertifyMode::Full,
            alpha: 10.0,
            delta: 1e-40,
            theta: 0.1,
            big_m: 40.0,
            n0: 2,
            r: 6.0,
            c0: 1.0,
            c_theta: 1.0,
            c_alpha: 1.0,
            samples: 64,
            seed: 11,
            output: "runs".into(),
        }
    }
}

fn bad(msg: impl Into<String>) -> LabError {
    LabError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> LabResult<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> LabResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> LabResult<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!("schema_version {} unsupported (expected {SCHEMA_VERSION})", self.schema_version)));
        }
        match (&self.a, &self.combinatorics) {
            (None, None) => return Err(bad("one of `a` or `combinatorics` is required")),
            (Some(a), _) if !a.is_finite() || *a <= 0.0 || *a > 2.0 => {
                return Err(bad(format!("a = {a} outside (0, 2]")))
            }
            (None, Some(c)) if c.is_empty() || c.iter().any(|&p| p < 2) => {
                return Err(bad("combinatorics must be a non-empty list of periods >= 2"))
            }
            _ => {}
        }
        if self.d < 2 || self.d % 2 != 0 {
            return Err(bad(format!("d = {} must be even and >= 2", self.d)));
        }
        if !(1..=ahpl_core::extension::MAX_ORDER - 2).contains(&self.m) {
            return Err(bad(format!("m = {} outside [1, {}]", self.m, ahpl_core::extension::MAX_ORDER - 2)));
        }
        if self.level > self.depth || self.extend_level > self.depth {
            return Err(bad("level and extend_level must not exceed depth"));
        }
        if self.depth > 24 {
            return Err(bad(format!("depth = {} exceeds 24", self.depth)));
        }
        if !(self.c_v.is_finite() && self.c_v > 1.0) {
            return Err(bad("c_v must exceed 1"));
        }
        if self.resolution == 0 || self.resolution > 8192 {
            return Err(bad(format!("resolution = {} outside [1, 8192]", self.resolution)));
        }
        if self.max_iter == 0 {
            return Err(bad("max_iter must be positive"));
        }
        if !(1..=8).contains(&self.max_period) {
            return Err(bad("max_period outside [1, 8]"));
        }
        if self.corpus_depth < 2 || self.nest_depth == 0 || self.shrink_depth < 2 {
            return Err(bad("corpus_depth >= 2, nest_depth >= 1 and shrink_depth >= 2 required"));
        }
        if self.rays.iter().any(|[_, den]| *den == 0) {
            return Err(bad("ray denominators must be positive"));
        }
        if self.samples < 4 {
            return Err(bad("samples must be at least 4"));
        }
        if !(self.c0 > 0.0) {
            return Err(bad("c0 must be positive"));
        }
        self.control().validate().map_err(|e| bad(e.to_string()))?;
        Ok(())
    }

    pub fn control(&self) -> ControlParams {
        ControlParams {
            alpha: self.alpha,
            delta: self.delta,
            theta: self.theta,
            m: self.big_m,
            n0: self.n0,
            r: self.r,
            c_alpha: self.c_alpha,
            c_theta: self.c_theta,
        }
    }
}
