//! Buried backscatter tags: how they appear to the radar, and how long their
//! batteries last.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::radar::{Modulation, RadarConfig, Reflector};
use crate::soil::{profile_effective_ka, SoilProfile};

pub const HOURS_PER_YEAR: f64 = 8760.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TagMode {
    SemiPassive,
    /// Amplifier in the reflection path.
    Active {
        gain_db: f64,
    },
}

impl TagMode {
    pub const DEFAULT_ACTIVE_GAIN_DB: f64 = 12.0;

    pub fn active() -> Self {
        TagMode::Active {
            gain_db: Self::DEFAULT_ACTIVE_GAIN_DB,
        }
    }

    /// Linear amplitude gain.
    pub fn amplitude_gain(&self) -> f64 {
        match *self {
            TagMode::SemiPassive => 1.0,
            TagMode::Active { gain_db } => 10f64.powf(gain_db / 20.0),
        }
    }
}

fn default_osc_freq() -> f64 {
    80.0
}
fn default_duty() -> f64 {
    0.5
}
fn default_base_amplitude() -> f64 {
    1.0
}
fn default_mode() -> TagMode {
    TagMode::SemiPassive
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagConfig {
    #[serde(default = "default_mode")]
    pub mode: TagMode,
    /// Oscillation (on-off) frequency (Hz).
    #[serde(default = "default_osc_freq")]
    pub osc_freq: f64,
    #[serde(default = "default_duty")]
    pub duty: f64,
    /// Burial depth below the surface (m).
    pub depth: f64,
    /// Reflection amplitude with no soil loss.
    #[serde(default = "default_base_amplitude")]
    pub base_rcs_amplitude: f64,
    /// Oscillator phase at `t = 0` (rad).
    #[serde(default)]
    pub phase: f64,
}

impl TagConfig {
    pub fn new(depth: f64) -> Self {
        Self {
            mode: default_mode(),
            osc_freq: default_osc_freq(),
            duty: default_duty(),
            depth,
            base_rcs_amplitude: default_base_amplitude(),
            phase: 0.0,
        }
    }

    pub fn with_mode(mut self, mode: TagMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_osc_freq(mut self, f: f64) -> Self {
        self.osc_freq = f;
        self
    }

    pub fn validate(&self, radar: &RadarConfig) -> Result<()> {
        let f = ensure_finite("tag.osc_freq", self.osc_freq)?;
        let nyquist = radar.frame_rate / 2.0;
        if f <= 0.0 {
            return Err(Error::invalid(
                "tag.osc_freq",
                format!("must be > 0, got {f}"),
            ));
        }
        if f >= nyquist {
            return Err(Error::invalid(
                "tag.osc_freq",
                format!("{f} Hz is not below the Nyquist frequency {nyquist} Hz"),
            ));
        }
        if !(self.duty > 0.0 && self.duty < 1.0) {
            return Err(Error::invalid(
                "tag.duty",
                format!("must be in (0,1), got {}", self.duty),
            ));
        }
        if !(self.depth.is_finite() && self.depth > 0.0) {
            return Err(Error::invalid(
                "tag.depth",
                format!("must be > 0, got {}", self.depth),
            ));
        }
        if !(self.base_rcs_amplitude.is_finite() && self.base_rcs_amplitude >= 0.0) {
            return Err(Error::invalid(
                "tag.base_rcs_amplitude",
                "must be finite and >= 0",
            ));
        }
        ensure_finite("tag.phase", self.phase)?;
        if let TagMode::Active { gain_db } = self.mode {
            if !(gain_db.is_finite() && gain_db >= 0.0) {
                return Err(Error::invalid(
                    "tag.mode.gain_db",
                    format!("must be >= 0, got {gain_db}"),
                ));
            }
        }
        Ok(())
    }
}

/// The tag as the radar sees it: pushed deeper by the soil's slower
/// propagation, attenuated over the two-way soil path, and toggling at its
/// oscillation frequency.
pub fn tag_as_reflector(
    tag: &TagConfig,
    profile: &SoilProfile,
    d_air: f64,
    radar: &RadarConfig,
) -> Result<Reflector> {
    tag.validate(radar)?;
    let d_air = ensure_finite("d_air", d_air)?;
    if d_air < 0.0 {
        return Err(Error::invalid(
            "d_air",
            format!("must be >= 0, got {d_air}"),
        ));
    }
    let ka_eff = profile_effective_ka(profile, tag.depth)?;
    let one_way_np = profile.path_attenuation(tag.depth, radar.fc)?;
    let amplitude = tag.base_rcs_amplitude * (-2.0 * one_way_np).exp() * tag.mode.amplitude_gain();
    Ok(Reflector {
        distance: d_air + tag.depth * ka_eff.sqrt(),
        amplitude: Complex64::new(amplitude, 0.0),
        modulation: Modulation::OnOffSquare {
            freq: tag.osc_freq,
            duty: tag.duty,
            phase: tag.phase,
        },
    })
}

/// One power consumer: `active_mw` for a `duty` fraction of the time,
/// `idle_mw` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerDraw {
    pub name: String,
    pub active_mw: f64,
    pub idle_mw: f64,
    pub duty: f64,
}

impl PowerDraw {
    pub fn always_on(name: &str, mw: f64) -> Self {
        Self {
            name: name.into(),
            active_mw: mw,
            idle_mw: 0.0,
            duty: 1.0,
        }
    }

    pub fn average_mw(&self) -> f64 {
        self.active_mw * self.duty + self.idle_mw * (1.0 - self.duty)
    }
}

// Measured draws (mW).
pub const OSCILLATOR_MW: f64 = 0.0027;
pub const RF_SWITCH_MW: f64 = 0.063;
pub const POWER_MGMT_MW: f64 = 0.051;
pub const RF_DETECTOR_MW: f64 = 87.0;
pub const RF_DETECTOR_SHUTDOWN_MW: f64 = 0.003;
pub const AMPLIFIER_MW: f64 = 267.0;
pub const MCU_MW: f64 = 0.378;
pub const MCU_SLEEP_MW: f64 = 0.0022;

/// Duty assumptions for an active tag that sleeps until woken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActiveDutyCycle {
    /// Cumulative RF-detector on-time per day from 1 Hz wake polling (s).
    pub detector_on_s_per_day: f64,
    /// Time per day the amplifier runs for actual readings (s).
    pub reading_s_per_day: f64,
}

impl Default for ActiveDutyCycle {
    fn default() -> Self {
        // 1 Hz polling with ~4.2 ms on-time: 6 minutes per day
        Self {
            detector_on_s_per_day: 360.0,
            reading_s_per_day: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerProfile {
    pub components: Vec<PowerDraw>,
}

impl PowerProfile {
    pub fn semi_passive() -> Self {
        Self {
            components: vec![
                PowerDraw::always_on("oscillator", OSCILLATOR_MW),
                PowerDraw::always_on("rf_switch", RF_SWITCH_MW),
                PowerDraw::always_on("power_mgmt", POWER_MGMT_MW),
            ],
        }
    }

    pub fn active_always_on() -> Self {
        let mut p = Self::semi_passive();
        p.components.extend([
            PowerDraw::always_on("rf_detector", RF_DETECTOR_MW),
            PowerDraw::always_on("amplifier", AMPLIFIER_MW),
            PowerDraw::always_on("mcu", MCU_MW),
        ]);
        p
    }

    pub fn active_duty_cycled(cycle: ActiveDutyCycle) -> Self {
        const DAY: f64 = 86_400.0;
        let wake = cycle.detector_on_s_per_day / DAY;
        let reading = cycle.reading_s_per_day / DAY;
        let part = |name: &str, active_mw, idle_mw, duty| PowerDraw {
            name: name.into(),
            active_mw,
            idle_mw,
            duty,
        };
        Self {
            components: vec![
                // the backscatter front end never sleeps
                PowerDraw::always_on("oscillator", OSCILLATOR_MW),
                PowerDraw::always_on("rf_switch", RF_SWITCH_MW),
                PowerDraw::always_on("power_mgmt", POWER_MGMT_MW),
                part("rf_detector", RF_DETECTOR_MW, RF_DETECTOR_SHUTDOWN_MW, wake),
                part("amplifier", AMPLIFIER_MW, 0.0, reading),
                part("mcu", MCU_MW, MCU_SLEEP_MW, wake),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.components {
            if !(c.active_mw.is_finite()
                && c.active_mw >= 0.0
                && c.idle_mw.is_finite()
                && c.idle_mw >= 0.0)
            {
                return Err(Error::invalid(
                    format!("power.{}", c.name),
                    "draws must be finite and >= 0",
                ));
            }
            if !(0.0..=1.0).contains(&c.duty) {
                return Err(Error::invalid(
                    format!("power.{}.duty", c.name),
                    format!("must be in [0,1], got {}", c.duty),
                ));
            }
        }
        Ok(())
    }

    /// Duty-weighted average draw (mW).
    pub fn average_mw(&self) -> f64 {
        self.components.iter().map(PowerDraw::average_mw).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Battery {
    pub cell_count: u32,
    pub capacity_mah: f64,
    pub nominal_v: f64,
}

impl Battery {
    /// Four 2500 mAh AA cells.
    pub fn aa_pack() -> Self {
        Self {
            cell_count: 4,
            capacity_mah: 2500.0,
            nominal_v: 1.5,
        }
    }

    pub fn energy_mwh(&self) -> f64 {
        self.cell_count as f64 * self.capacity_mah * self.nominal_v
    }
}

/// Battery lifetime in years: stored energy over average draw, no derating.
pub fn battery_life(profile: &PowerProfile, battery: &Battery) -> Result<f64> {
    profile.validate()?;
    if !(battery.cell_count > 0 && battery.capacity_mah > 0.0 && battery.nominal_v > 0.0)
        || !(battery.capacity_mah.is_finite() && battery.nominal_v.is_finite())
    {
        return Err(Error::invalid(
            "battery",
            "cell count, capacity and voltage must be positive",
        ));
    }
    let draw = profile.average_mw();
    if draw.is_nan() || draw <= 0.0 {
        return Err(Error::invalid(
            "power",
            format!("average draw must be > 0, got {draw}"),
        ));
    }
    Ok(battery.energy_mwh() / draw / HOURS_PER_YEAR)
}

/// Wake-signal margin (dB) at the tag's RF detector.
pub fn wake_link_margin(tx_dbm: f64, soil_loss_db: f64, detector_sensitivity_dbm: f64) -> f64 {
    tx_dbm - soil_loss_db - detector_sensitivity_dbm
}
