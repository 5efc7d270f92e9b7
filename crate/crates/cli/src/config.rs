//! JSON run configuration shared by every subcommand.

use std::fs;
use std::path::{Path, PathBuf};

use diracres::fixtures;
use diracres::io::potential_from_json;
use diracres::plane::{Rect, C64};
use diracres::potential::{make_potential, Potential, PotentialSpec};
use serde::Deserialize;

/// Where the potential comes from: a file (relative to the config file), a
/// built-in fixture, or an inline specification.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PotentialSource {
    File(PathBuf),
    Fixture { fixture: String },
    Inline(PotentialSpec),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    pub fn csv(self) -> bool {
        self != Format::Json
    }

    pub fn json(self) -> bool {
        self != Format::Csv
    }
}

/// `count` equally spaced points from `from` to `to`, both included.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

/// `count` equally spaced points on the segment from `from` to `to` in the λ-plane.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Segment {
    pub from: [f64; 2],
    pub to: [f64; 2],
    pub count: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: Option<PotentialSource>,
    #[serde(default)]
    pub format: Format,
    /// Relative tolerance of the Jost-function integrator.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// `states`: search rectangle.
    pub region: Option<Rect>,
    /// `counting`: half-disk radii.
    pub radii: Option<Vec<f64>>,
    /// `counting`: half-width of the sectors around the real axis.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// `scattering`: real grid, as explicit points and/or ranges.
    #[serde(default)]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub ranges: Vec<Range>,
    /// `det`: points as `[re, im]` and/or segments.
    #[serde(default)]
    pub points: Vec<[f64; 2]>,
    #[serde(default)]
    pub segments: Vec<Segment>,
    /// `det`: Nyström nodes.
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    /// `verify`: criteria to run, all by default.
    pub criteria: Option<Vec<u8>>,
    #[serde(skip)]
    base: PathBuf,
}

fn default_tolerance() -> f64 {
    1e-12
}

fn default_delta() -> f64 {
    0.2
}

fn default_nodes() -> usize {
    200
}

/// Problems with the configuration or the potential; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            serde_json::from_str(&text).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        cfg.base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(bad(format!("tolerance must lie in (0, 1), got {}", self.tolerance)));
        }
        if !(self.delta > 0.0 && self.delta < std::f64::consts::FRAC_PI_2) {
            return Err(bad(format!("delta must lie in (0, π/2), got {}", self.delta)));
        }
        if let Some(r) = &self.region {
            Rect::new(r.re_min, r.re_max, r.im_min, r.im_max).map_err(|e| bad(e.to_string()))?;
        }
        if let Some(radii) = &self.radii {
            if radii.is_empty() || radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                return Err(bad("radii must be positive and finite"));
            }
        }
        if self.ranges.iter().any(|r| r.count < 2) || self.segments.iter().any(|s| s.count < 2) {
            return Err(bad("every range and segment needs count ≥ 2"));
        }
        if self.nodes < 16 {
            return Err(bad(format!("nodes must be at least 16, got {}", self.nodes)));
        }
        Ok(())
    }

    /// The configured potential; `fallback` when none is given.
    pub fn potential(&self, fallback: Option<fn() -> Potential>) -> Result<Potential, ConfigError> {
        match &self.potential {
            None => fallback.map(|f| f()).ok_or_else(|| bad("config has no potential")),
            Some(PotentialSource::File(p)) => {
                let path = self.base.join(p);
                let text = fs::read_to_string(&path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
                potential_from_json(&text).map_err(|e| bad(format!("{}: {e}", path.display())))
            }
            Some(PotentialSource::Fixture { fixture }) => named_fixture(fixture),
            Some(PotentialSource::Inline(spec)) => make_potential(spec).map_err(|e| bad(e.to_string())),
        }
    }

    pub fn region(&self) -> Result<Rect, ConfigError> {
        self.region.ok_or_else(|| bad("states needs a region"))
    }

    pub fn real_grid(&self) -> Result<Vec<f64>, ConfigError> {
        let mut out = self.lambdas.clone();
        for r in &self.ranges {
            out.extend((0..r.count).map(|i| r.from + (r.to - r.from) * i as f64 / (r.count - 1) as f64));
        }
        if out.is_empty() {
            return Err(bad("scattering needs lambdas or ranges"));
        }
        Ok(out)
    }

    pub fn complex_grid(&self) -> Result<Vec<C64>, ConfigError> {
        let mut out: Vec<C64> = self.points.iter().map(|p| C64::new(p[0], p[1])).collect();
        for s in &self.segments {
            let (a, b) = (C64::new(s.from[0], s.from[1]), C64::new(s.to[0], s.to[1]));
            out.extend((0..s.count).map(|i| a + (b - a) * (i as f64 / (s.count - 1) as f64)));
        }
        if out.is_empty() {
            return Err(bad("det needs points or segments"));
        }
        Ok(out)
    }
}

pub fn named_fixture(name: &str) -> Result<Potential, ConfigError> {
    Ok(match name {
        "free" => fixtures::free(),
        "step_q" => fixtures::step_q(),
        "smooth_bump" => fixtures::smooth_bump(),
        "smooth_q" => fixtures::smooth_q(),
        "deep_well" => fixtures::deep_well(),
        "gauge" => fixtures::gauge_fixture(),
        _ => return Err(bad(format!("unknown fixture {name:?}"))),
    })
}
