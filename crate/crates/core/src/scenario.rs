//! Scenario files: everything needed to synthesize one capture of a buried
//! tag, and the scene builder that turns them into reflectors.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::moisture::MeasurementGeometry;
use crate::radar::{synthesize_capture, FrameCapture, PulseShape, RadarConfig, Reflector};
use crate::soil::{profile_effective_ka, SoilProfile};
use crate::tag::{tag_as_reflector, TagConfig};

pub const SCENARIO_VERSION: u32 = 1;

/// RNG stream reserved for clutter placement; frame noise uses streams `0..P`.
const CLUTTER_STREAM: u64 = u64::MAX;
/// Keeps scene size bounded for hostile scenario files.
pub const MAX_CLUTTER_DENSITY: f64 = 1000.0;

fn default_density() -> f64 {
    3.0
}
fn default_amplitude_scale() -> f64 {
    0.05
}
fn default_log_sigma() -> f64 {
    0.5
}
fn default_surface_amplitude() -> f64 {
    1.0
}

/// Static soil clutter below the surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClutterConfig {
    /// Static reflectors per range bin.
    #[serde(default = "default_density")]
    pub reflector_density: f64,
    /// Median clutter amplitude.
    #[serde(default = "default_amplitude_scale")]
    pub amplitude_scale: f64,
    /// Standard deviation of the log amplitude.
    #[serde(default = "default_log_sigma")]
    pub log_sigma: f64,
}

impl Default for ClutterConfig {
    fn default() -> Self {
        Self {
            reflector_density: default_density(),
            amplitude_scale: default_amplitude_scale(),
            log_sigma: default_log_sigma(),
        }
    }
}

impl ClutterConfig {
    pub fn none() -> Self {
        Self {
            reflector_density: 0.0,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub radar: RadarConfig,
    /// Defaults to a Gaussian pulse matched to the radar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pulse: Option<PulseShape>,
    pub tag: TagConfig,
    pub profile: SoilProfile,
    /// Radar to surface (m).
    pub d_air: f64,
    /// Capture length (s).
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub clutter: ClutterConfig,
    #[serde(default = "default_surface_amplitude")]
    pub surface_amplitude: f64,
    /// Leave the tag out of the scene, for null captures.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub tag_absent: bool,
}

impl Scenario {
    /// Uniform single-layer soil over a tag at `depth`, default radar.
    pub fn uniform(profile: SoilProfile, depth: f64) -> Self {
        Self {
            version: SCENARIO_VERSION,
            radar: RadarConfig::default(),
            pulse: None,
            tag: TagConfig::new(depth),
            profile,
            d_air: 1.0,
            duration: 10.0,
            seed: 0,
            clutter: ClutterConfig::default(),
            surface_amplitude: default_surface_amplitude(),
            tag_absent: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn pulse(&self) -> PulseShape {
        self.pulse
            .unwrap_or_else(|| PulseShape::gaussian_for(&self.radar))
    }

    pub fn geometry(&self) -> MeasurementGeometry {
        MeasurementGeometry {
            d_air: self.d_air,
            d_soil: self.tag.depth,
            range_res: self.radar.range_res,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::invalid(
                "version",
                format!("expected {SCENARIO_VERSION}, got {}", self.version),
            ));
        }
        self.radar.validate()?;
        self.pulse().validate()?;
        self.tag.validate(&self.radar)?;
        self.profile.validate()?;
        let total = self.profile.total_thickness();
        if self.tag.depth > total {
            return Err(Error::DepthExceedsProfile {
                depth: self.tag.depth,
                total,
            });
        }
        if !(self.d_air >= self.radar.range_start && self.d_air < self.radar.range_end) {
            return Err(Error::invalid(
                "d_air",
                format!(
                    "{} m is outside the sensing window [{}, {})",
                    self.d_air, self.radar.range_start, self.radar.range_end
                ),
            ));
        }
        if !(self.duration.is_finite() && self.duration > 0.0) {
            return Err(Error::invalid(
                "duration",
                format!("must be > 0, got {}", self.duration),
            ));
        }
        let c = &self.clutter;
        if !(0.0..=MAX_CLUTTER_DENSITY).contains(&c.reflector_density) {
            return Err(Error::invalid(
                "clutter.reflector_density",
                format!(
                    "must be in [0, {MAX_CLUTTER_DENSITY}], got {}",
                    c.reflector_density
                ),
            ));
        }
        if !(c.amplitude_scale.is_finite() && c.amplitude_scale >= 0.0) {
            return Err(Error::invalid(
                "clutter.amplitude_scale",
                "must be finite and >= 0",
            ));
        }
        if !(c.log_sigma.is_finite() && c.log_sigma >= 0.0) {
            return Err(Error::invalid(
                "clutter.log_sigma",
                "must be finite and >= 0",
            ));
        }
        if !(self.surface_amplitude.is_finite() && self.surface_amplitude >= 0.0) {
            return Err(Error::invalid(
                "surface_amplitude",
                "must be finite and >= 0",
            ));
        }
        if !self.tag_absent {
            self.tag_reflector()?.validate(&self.radar).map_err(|_| {
                Error::invalid(
                    "tag",
                    "apparent tag distance falls outside the sensing window",
                )
            })?;
        }
        Ok(())
    }

    pub fn tag_reflector(&self) -> Result<Reflector> {
        tag_as_reflector(&self.tag, &self.profile, self.d_air, &self.radar)
    }

    /// Path-averaged `Ka` between the surface and the tag.
    pub fn effective_ka(&self) -> Result<f64> {
        profile_effective_ka(&self.profile, self.tag.depth)
    }

    /// Thickness-weighted mean moisture between the surface and the tag.
    pub fn mean_theta(&self) -> Result<f64> {
        let segments = self.profile.segments(self.tag.depth)?;
        Ok(segments.iter().map(|(l, t)| l.theta * t).sum::<f64>() / self.tag.depth)
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> Result<String> {
        let bytes = serde_json::to_vec(self)?;
        Ok(Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect())
    }
}

/// Surface echo, static clutter, and (unless absent) the tag.
pub fn build_scene(s: &Scenario) -> Result<Vec<Reflector>> {
    s.validate()?;
    let cfg = &s.radar;
    let mut scene = Vec::new();
    if s.surface_amplitude > 0.0 {
        scene.push(Reflector::fixed(
            s.d_air,
            Complex64::new(s.surface_amplitude, 0.0),
        ));
    }
    scene.extend(clutter(s)?);
    if !s.tag_absent {
        scene.push(s.tag_reflector()?);
    }
    debug_assert!(scene.iter().all(|r| r.validate(cfg).is_ok()));
    Ok(scene)
}

/// Clutter in every bin below the surface bin, drawn from the scenario seed.
pub fn clutter(s: &Scenario) -> Result<Vec<Reflector>> {
    let cfg = &s.radar;
    let c = &s.clutter;
    if c.reflector_density == 0.0 || c.amplitude_scale == 0.0 {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    rng.set_stream(CLUTTER_STREAM);
    let amplitude = LogNormal::new(c.amplitude_scale.ln(), c.log_sigma)
        .map_err(|e| Error::invalid("clutter", e.to_string()))?;
    let whole = c.reflector_density.floor() as usize;
    let frac = c.reflector_density - whole as f64;
    let first = cfg.fractional_bin(s.d_air).floor() as isize + 2;
    let mut out = Vec::new();
    for n in first.max(0) as usize..cfg.num_bins() {
        let count = whole + usize::from(frac > 0.0 && rng.random::<f64>() < frac);
        for _ in 0..count {
            let lo = cfg.range_start + n as f64 * cfg.range_res;
            let distance = (lo + rng.random::<f64>() * cfg.range_res).min(cfg.range_end - 1e-9);
            let phase = rng.random::<f64>() * std::f64::consts::TAU;
            out.push(Reflector::fixed(
                distance,
                Complex64::from_polar(amplitude.sample(&mut rng), phase),
            ));
        }
    }
    Ok(out)
}

/// Builds the scene and synthesizes the capture, annotated with the
/// geometry and ground truth needed to process it later.
pub fn simulate(s: &Scenario) -> Result<FrameCapture> {
    let scene = build_scene(s)?;
    let mut capture = synthesize_capture(&s.radar, &s.pulse(), &scene, s.duration, s.seed)?;
    capture.scenario_digest = Some(s.digest()?);
    let a = &mut capture.annotations;
    a.insert("d_air".into(), s.d_air.to_string());
    a.insert("d_soil".into(), s.tag.depth.to_string());
    a.insert("osc_freq".into(), s.tag.osc_freq.to_string());
    a.insert("true_theta".into(), s.mean_theta()?.to_string());
    a.insert("true_ka_eff".into(), s.effective_ka()?.to_string());
    a.insert("tag_present".into(), (!s.tag_absent).to_string());
    Ok(capture)
}
