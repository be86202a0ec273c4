//! From a capture to volumetric water content.
//!
//! The tag is found at range bin `b_r`; with no soil above it, it would sit
//! at `b_T = (d_air + d_soil)/r`. The difference is the extra one-way
//! travel time the soil adds, `Δτ = (b_r − b_T)·r/c`, and since that time
//! equals `d_soil·(√Ka − 1)/c` the soil's `Ka` follows directly.

mod calibration;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use calibration::{fit_calibration, read_pairs_csv, CalibrationCurve, CALIBRATION_VERSION};

use crate::dsp::{
    detect_tag, parabolic_offset, range_doppler_windowed, DetectOptions, DetectionResult,
    MirrorCombine, Window,
};
use crate::error::{ensure_finite, Error, Result};
use crate::radar::FrameCapture;
use crate::soil::{topp_vwc, SPEED_OF_LIGHT, TOPP_FIT_MAX_KA};
use crate::tag::TagConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementGeometry {
    /// Radar to soil surface (m).
    pub d_air: f64,
    /// Burial depth (m).
    pub d_soil: f64,
    /// Range-bin size (m).
    pub range_res: f64,
}

impl MeasurementGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("d_air", self.d_air),
            ("d_soil", self.d_soil),
            ("range_res", self.range_res),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Range bin the tag would occupy with air in place of soil.
pub fn expected_bin(geom: &MeasurementGeometry) -> f64 {
    (geom.d_air + geom.d_soil) / geom.range_res
}

/// Excess one-way travel time caused by the soil (s).
pub fn delta_tof(measured_bin: f64, expected_bin: f64, range_res: f64) -> f64 {
    (measured_bin - expected_bin) * range_res / SPEED_OF_LIGHT
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KaMode {
    /// `Ka = (1 + cΔτ/d)²`, consistent with `Δτ = d(√Ka − 1)/c`.
    #[default]
    Exact,
    /// `Ka = (cΔτ/d)²`.
    PaperApprox,
}

impl std::str::FromStr for KaMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(KaMode::Exact),
            "paper" | "paper_approx" => Ok(KaMode::PaperApprox),
            other => Err(Error::invalid(
                "ka-mode",
                format!("expected exact|paper, got {other}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KaInversion {
    pub ka: f64,
    /// A small negative `Δτ` was treated as zero.
    pub clamped: bool,
}

/// `Ka` from the soil-induced delay. Negative delays within half a range
/// bin are clamped to zero; larger ones mean the geometry is wrong.
pub fn ka_from_delta_tof(
    delta: f64,
    d_soil: f64,
    mode: KaMode,
    range_res: f64,
) -> Result<KaInversion> {
    let delta = ensure_finite("delta_tof", delta)?;
    if !(d_soil.is_finite() && d_soil > 0.0) {
        return Err(Error::invalid(
            "d_soil",
            format!("must be > 0, got {d_soil}"),
        ));
    }
    let tolerance = range_res / (2.0 * SPEED_OF_LIGHT);
    let (delta, clamped) = if delta >= 0.0 {
        (delta, false)
    } else if delta >= -tolerance {
        (0.0, true)
    } else {
        return Err(Error::NegativeDelta {
            delta_tof: delta,
            tolerance,
        });
    };
    let stretch = SPEED_OF_LIGHT * delta / d_soil;
    let ka = match mode {
        KaMode::Exact => (1.0 + stretch).powi(2),
        KaMode::PaperApprox => stretch * stretch,
    };
    Ok(KaInversion { ka, clamped })
}

/// Analytic `∂Ka/∂d_soil` of the chain `b_r → Δτ → Ka` at fixed `b_r`
/// and `d_air`, i.e. how much a burial-depth error moves the result.
pub fn ka_depth_sensitivity(measured_bin: f64, geom: &MeasurementGeometry, mode: KaMode) -> f64 {
    // soil-side path length implied by the measurement
    let path = measured_bin * geom.range_res - geom.d_air;
    let d = geom.d_soil;
    match mode {
        KaMode::Exact => -2.0 * path * path / (d * d * d),
        KaMode::PaperApprox => -2.0 * (path / d - 1.0) * path / (d * d),
    }
}

/// Moisture relation used to turn `Ka` into `θ`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VwcModel {
    #[default]
    Topp,
    Calibrated(CalibrationCurve),
}

impl VwcModel {
    pub fn theta(&self, ka: f64) -> Result<f64> {
        match self {
            VwcModel::Topp => topp_vwc(ka),
            VwcModel::Calibrated(c) => Ok(c.predict(ka)),
        }
    }

    /// Largest `Ka` the relation is trusted at.
    pub fn fit_max(&self) -> f64 {
        match self {
            VwcModel::Topp => TOPP_FIT_MAX_KA,
            VwcModel::Calibrated(c) => c.ka_max,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoistureFlag {
    /// The tag did not clear the detection threshold.
    LowSnr,
    /// A small negative delay was clamped to zero.
    NegativeDelta,
    /// `Ka` beyond the moisture relation's fitted range, or `θ` clipped at 1.
    Saturated,
    /// Approximate inversion produced `Ka < 1`; `θ` is evaluated at `Ka = 1`.
    BelowDry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoistureEstimate {
    /// Excess one-way delay (s); absent when the tag was not detected.
    pub delta_tof: Option<f64>,
    pub ka: Option<f64>,
    pub theta: Option<f64>,
    pub snr_db: f64,
    pub expected_bin: f64,
    /// Measured tag position in `distance / range_res` units.
    pub measured_bin: f64,
    pub flags: BTreeSet<MoistureFlag>,
    pub ka_mode: KaMode,
    pub detection: DetectionResult,
}

impl MoistureEstimate {
    pub fn detected(&self) -> bool {
        !self.flags.contains(&MoistureFlag::LowSnr)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateOptions {
    pub ka_mode: KaMode,
    pub threshold_db: f64,
    pub combine: MirrorCombine,
    pub window: Window,
    /// Restrict the peak search to where a tag could physically appear.
    pub use_geometry_window: bool,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            ka_mode: KaMode::Exact,
            threshold_db: 10.0,
            combine: MirrorCombine::Power,
            window: Window::Rectangular,
            use_geometry_window: true,
        }
    }
}

/// Capture bins where a tag at `geom` can appear for `Ka ∈ [1, 81]`.
fn search_window(capture: &FrameCapture, geom: &MeasurementGeometry) -> std::ops::Range<usize> {
    let cfg = &capture.config;
    let lo = cfg.fractional_bin(geom.d_air + geom.d_soil).floor() - 1.0;
    let hi = cfg.fractional_bin(geom.d_air + 9.0 * geom.d_soil).ceil() + 2.0;
    let clamp = |x: f64| x.clamp(0.0, capture.bins as f64) as usize;
    clamp(lo)..clamp(hi)
}

/// Full chain: range-Doppler image, tag detection, delay, `Ka`, moisture.
pub fn estimate_vwc(
    capture: &FrameCapture,
    tag: &TagConfig,
    geom: &MeasurementGeometry,
    model: &VwcModel,
    opts: &EstimateOptions,
) -> Result<MoistureEstimate> {
    geom.validate()?;
    let cfg = &capture.config;
    if ((geom.range_res - cfg.range_res) / cfg.range_res).abs() > 1e-9 {
        return Err(Error::invalid(
            "range_res",
            format!(
                "geometry uses {} m but capture bins are {} m",
                geom.range_res, cfg.range_res
            ),
        ));
    }
    let image = range_doppler_windowed(capture, opts.window)?;
    let detect_opts = DetectOptions {
        window: opts
            .use_geometry_window
            .then(|| search_window(capture, geom)),
        threshold_db: opts.threshold_db,
        combine: opts.combine,
        ..DetectOptions::default()
    };
    let detection = detect_tag(&image, tag.osc_freq, &detect_opts)?;
    let measured_bin =
        (cfg.range_start + (detection.refined_bin + 0.5) * cfg.range_res) / cfg.range_res;
    let b_t = expected_bin(geom);
    let mut flags = BTreeSet::new();
    let mut estimate = MoistureEstimate {
        delta_tof: None,
        ka: None,
        theta: None,
        snr_db: detection.snr_db,
        expected_bin: b_t,
        measured_bin,
        flags: BTreeSet::new(),
        ka_mode: opts.ka_mode,
        detection,
    };
    if !estimate.detection.detected {
        flags.insert(MoistureFlag::LowSnr);
        estimate.flags = flags;
        return Ok(estimate);
    }
    let delta = delta_tof(measured_bin, b_t, geom.range_res);
    let inversion = ka_from_delta_tof(delta, geom.d_soil, opts.ka_mode, geom.range_res)?;
    if inversion.clamped {
        flags.insert(MoistureFlag::NegativeDelta);
    }
    let mut ka_for_map = inversion.ka;
    if ka_for_map < 1.0 {
        flags.insert(MoistureFlag::BelowDry);
        ka_for_map = 1.0;
    }
    let theta = model.theta(ka_for_map)?;
    if inversion.ka > model.fit_max() || theta >= 1.0 {
        flags.insert(MoistureFlag::Saturated);
    }
    estimate.delta_tof = Some(delta);
    estimate.ka = Some(inversion.ka);
    estimate.theta = Some(theta);
    estimate.flags = flags;
    Ok(estimate)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceOptions {
    /// Required rise of the echo power above the median DC power (dB).
    pub prominence_db: f64,
}

impl Default for SurfaceOptions {
    fn default() -> Self {
        Self {
            prominence_db: 15.0,
        }
    }
}

/// Radar-to-surface distance from the first prominent static echo.
pub fn surface_distance(capture: &FrameCapture, opts: &SurfaceOptions) -> Result<f64> {
    capture.validate()?;
    let p = capture.frames as f64;
    // DC Doppler bin of every range bin, i.e. the slow-time mean
    let dc: Vec<f64> = (0..capture.bins)
        .map(|n| {
            let sum: num_complex::Complex64 = (0..capture.frames)
                .map(|m| capture.samples[m * capture.bins + n])
                .sum();
            (sum / p).norm()
        })
        .collect();
    let mut powers: Vec<f64> = dc.iter().map(|v| v * v).collect();
    powers.sort_by(f64::total_cmp);
    let floor = powers[powers.len() / 2];
    let threshold = floor * 10f64.powf(opts.prominence_db / 10.0);
    let is_local_max =
        |n: usize| (n == 0 || dc[n] >= dc[n - 1]) && (n + 1 == dc.len() || dc[n] >= dc[n + 1]);
    let n = (0..dc.len())
        .find(|&n| dc[n] > 0.0 && dc[n] * dc[n] > threshold && is_local_max(n))
        .ok_or(Error::NoSurfaceEcho)?;
    let refined = if n > 0 && n + 1 < dc.len() {
        n as f64 + parabolic_offset(dc[n - 1], dc[n], dc[n + 1]).unwrap_or(0.0)
    } else {
        n as f64
    };
    let cfg = &capture.config;
    Ok(cfg.range_start + (refined + 0.5) * cfg.range_res)
}
