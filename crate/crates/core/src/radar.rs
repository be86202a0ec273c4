//! UWB impulse radar model: range-bin grid, pulse shape, reflectors, and
//! frame-by-frame synthesis of complex range profiles.
//!
//! Bin `n` of every frame samples the echo whose round trip corresponds to
//! the centre of that bin, `range_start + (n + 0.5)·range_res`. Each frame
//! carries a single effective pulse; integration gain inside a frame is
//! folded into `noise_sigma`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::soil::SPEED_OF_LIGHT;

/// Largest in-memory capture `synthesize_capture` will allocate (bytes).
pub const DEFAULT_MEMORY_CAP: usize = 1 << 30;
/// Upper bound on range bins per frame.
pub const MAX_BINS: usize = 1 << 16;

fn default_fc() -> f64 {
    1.5e9
}
fn default_bandwidth() -> f64 {
    3e9
}
fn default_frame_rate() -> f64 {
    200.0
}
fn default_range_start() -> f64 {
    0.3
}
fn default_range_end() -> f64 {
    3.5
}
fn default_range_res() -> f64 {
    0.05
}
fn default_tx_amplitude() -> f64 {
    1.0
}
fn default_noise_sigma() -> f64 {
    0.01
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadarConfig {
    /// Centre frequency (Hz).
    #[serde(default = "default_fc")]
    pub fc: f64,
    /// Bandwidth (Hz).
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
    /// Frames per second. The inter-frame interval is the PRI.
    #[serde(default = "default_frame_rate")]
    pub frame_rate: f64,
    #[serde(default = "default_range_start")]
    pub range_start: f64,
    #[serde(default = "default_range_end")]
    pub range_end: f64,
    /// Range-bin size (m).
    #[serde(default = "default_range_res")]
    pub range_res: f64,
    #[serde(default = "default_tx_amplitude")]
    pub tx_amplitude: f64,
    /// Per-sample complex noise standard deviation, `E|n|² = noise_sigma²`.
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            fc: default_fc(),
            bandwidth: default_bandwidth(),
            frame_rate: default_frame_rate(),
            range_start: default_range_start(),
            range_end: default_range_end(),
            range_res: default_range_res(),
            tx_amplitude: default_tx_amplitude(),
            noise_sigma: default_noise_sigma(),
        }
    }
}

impl RadarConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("radar.fc", self.fc),
            ("radar.bandwidth", self.bandwidth),
            ("radar.frame_rate", self.frame_rate),
            ("radar.range_res", self.range_res),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        for (name, v) in [
            ("radar.range_start", self.range_start),
            ("radar.tx_amplitude", self.tx_amplitude),
            ("radar.noise_sigma", self.noise_sigma),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(
                    name,
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        ensure_finite("radar.range_end", self.range_end)?;
        if self.range_end <= self.range_start {
            return Err(Error::invalid(
                "radar.range_end",
                format!(
                    "must exceed range_start {}, got {}",
                    self.range_start, self.range_end
                ),
            ));
        }
        if self.num_bins() > MAX_BINS {
            return Err(Error::invalid(
                "radar.range_res",
                format!("more than {MAX_BINS} range bins"),
            ));
        }
        Ok(())
    }

    /// Number of range bins `N`.
    pub fn num_bins(&self) -> usize {
        let span = (self.range_end - self.range_start) / self.range_res;
        // tolerate representation error so 3.2/0.05 yields 64, not 65
        ((span - 1e-9).ceil() as usize).max(1)
    }

    /// Pulse repetition interval (s).
    pub fn pri(&self) -> f64 {
        1.0 / self.frame_rate
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.fc
    }

    /// Fast-time sampling period, one range bin of round trip (s).
    pub fn sample_period(&self) -> f64 {
        2.0 * self.range_res / SPEED_OF_LIGHT
    }

    /// Round-trip delay sampled by bin `n` (s).
    pub fn sample_time(&self, n: usize) -> f64 {
        2.0 * self.distance_of_bin(n) / SPEED_OF_LIGHT
    }

    /// Centre of bin `n` (m).
    pub fn distance_of_bin(&self, n: usize) -> f64 {
        self.range_start + (n as f64 + 0.5) * self.range_res
    }

    /// Fractional bin coordinate of `d`, with integer values at bin centres.
    pub fn fractional_bin(&self, d: f64) -> f64 {
        (d - self.range_start) / self.range_res - 0.5
    }
}

/// Zero-based range bin containing distance `d`.
pub fn bin_of_distance(config: &RadarConfig, d: f64) -> Result<usize> {
    let end = config.range_start + config.num_bins() as f64 * config.range_res;
    let end = end.min(config.range_end);
    if !d.is_finite() || d < config.range_start || d >= end {
        return Err(Error::OutsideWindow {
            distance: d,
            start: config.range_start,
            end: config.range_end,
        });
    }
    let n = ((d - config.range_start) / config.range_res).floor() as usize;
    Ok(n.min(config.num_bins() - 1))
}

/// Transmitted pulse `p(t)` with unit peak magnitude at `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PulseShape {
    /// Gaussian envelope on a carrier.
    GaussianModulated { envelope_sigma: f64, carrier: f64 },
    /// Band-limited sinc envelope on a carrier.
    Ideal { bandwidth: f64, carrier: f64 },
}

impl PulseShape {
    /// Gaussian pulse whose -10 dB power bandwidth equals `config.bandwidth`.
    pub fn gaussian_for(config: &RadarConfig) -> Self {
        // power spectrum ∝ exp(-(2πfσ)²); -10 dB at f = B/2
        let envelope_sigma =
            std::f64::consts::LN_10.sqrt() / (std::f64::consts::PI * config.bandwidth);
        PulseShape::GaussianModulated {
            envelope_sigma,
            carrier: config.fc,
        }
    }

    pub fn ideal_for(config: &RadarConfig) -> Self {
        PulseShape::Ideal {
            bandwidth: config.bandwidth,
            carrier: config.fc,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (width, carrier) = match *self {
            PulseShape::GaussianModulated {
                envelope_sigma,
                carrier,
            } => (envelope_sigma, carrier),
            PulseShape::Ideal { bandwidth, carrier } => (bandwidth, carrier),
        };
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::invalid(
                "pulse",
                format!("width must be > 0, got {width}"),
            ));
        }
        if !(carrier.is_finite() && carrier >= 0.0) {
            return Err(Error::invalid(
                "pulse.carrier",
                format!("must be >= 0, got {carrier}"),
            ));
        }
        Ok(())
    }

    /// Half-width beyond which the pulse is treated as exactly zero (s).
    pub fn support(&self) -> f64 {
        match *self {
            PulseShape::GaussianModulated { envelope_sigma, .. } => 8.0 * envelope_sigma,
            PulseShape::Ideal { bandwidth, .. } => 16.0 / bandwidth,
        }
    }

    pub fn envelope(&self, t: f64) -> f64 {
        if t.abs() > self.support() {
            return 0.0;
        }
        match *self {
            PulseShape::GaussianModulated { envelope_sigma, .. } => {
                let x = t / envelope_sigma;
                (-0.5 * x * x).exp()
            }
            PulseShape::Ideal { bandwidth, .. } => {
                let x = std::f64::consts::PI * bandwidth * t;
                if x == 0.0 {
                    1.0
                } else {
                    x.sin() / x
                }
            }
        }
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        let carrier = match *self {
            PulseShape::GaussianModulated { carrier, .. } | PulseShape::Ideal { carrier, .. } => {
                carrier
            }
        };
        let env = self.envelope(t);
        if env == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::from_polar(env, 2.0 * std::f64::consts::PI * carrier * t)
    }
}

/// Time-varying behaviour of a reflector across frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Modulation {
    Static,
    /// `{0,1}` square wave: on while the cycle fraction is below `duty`.
    OnOffSquare {
        freq: f64,
        duty: f64,
        phase: f64,
    },
    /// Constant radial velocity, carrier phase only (m/s).
    LinearVelocity {
        velocity: f64,
    },
}

impl Modulation {
    pub fn is_static(&self) -> bool {
        matches!(self, Modulation::Static)
    }

    /// Complex gain applied to the reflector in frame `m`.
    pub fn factor(&self, config: &RadarConfig, t0: f64, m: usize) -> Complex64 {
        match *self {
            Modulation::Static => Complex64::new(1.0, 0.0),
            Modulation::OnOffSquare { freq, duty, phase } => {
                let cycles =
                    freq * (t0 + m as f64 / config.frame_rate) + phase / std::f64::consts::TAU;
                if cycles.rem_euclid(1.0) < duty {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }
            Modulation::LinearVelocity { velocity } => {
                let shift = 2.0 * velocity * config.pri() * m as f64 / config.wavelength();
                Complex64::from_polar(1.0, -std::f64::consts::TAU * shift.rem_euclid(1.0))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Reflector {
    /// Apparent one-way distance from the radar (m).
    pub distance: f64,
    pub amplitude: Complex64,
    pub modulation: Modulation,
}

impl Reflector {
    pub fn fixed(distance: f64, amplitude: Complex64) -> Self {
        Self {
            distance,
            amplitude,
            modulation: Modulation::Static,
        }
    }

    pub fn validate(&self, config: &RadarConfig) -> Result<()> {
        if !(self.distance >= config.range_start && self.distance < config.range_end) {
            return Err(Error::OutsideWindow {
                distance: self.distance,
                start: config.range_start,
                end: config.range_end,
            });
        }
        if !(self.amplitude.re.is_finite() && self.amplitude.im.is_finite()) {
            return Err(Error::invalid("reflector.amplitude", "must be finite"));
        }
        match self.modulation {
            Modulation::Static => {}
            Modulation::OnOffSquare { freq, duty, phase } => {
                if !(freq.is_finite() && freq > 0.0) {
                    return Err(Error::invalid(
                        "modulation.freq",
                        format!("must be > 0, got {freq}"),
                    ));
                }
                if !(duty > 0.0 && duty < 1.0) {
                    return Err(Error::invalid(
                        "modulation.duty",
                        format!("must be in (0,1), got {duty}"),
                    ));
                }
                ensure_finite("modulation.phase", phase)?;
            }
            Modulation::LinearVelocity { velocity } => {
                ensure_finite("modulation.velocity", velocity)?;
            }
        }
        Ok(())
    }
}

/// In-memory radar capture: `frames × bins` complex samples, frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameCapture {
    pub samples: Vec<Complex64>,
    pub frames: usize,
    pub bins: usize,
    pub config: RadarConfig,
    /// Capture start time (s).
    pub t0: f64,
    pub seed: u64,
    pub scenario_digest: Option<String>,
    pub annotations: BTreeMap<String, String>,
}

impl FrameCapture {
    pub fn new(config: RadarConfig, frames: usize, samples: Vec<Complex64>) -> Result<Self> {
        let c = Self {
            bins: config.num_bins(),
            samples,
            frames,
            config,
            t0: 0.0,
            seed: 0,
            scenario_digest: None,
            annotations: BTreeMap::new(),
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.frames == 0 {
            return Err(Error::EmptyCapture("no frames".into()));
        }
        if self.bins != self.config.num_bins() {
            return Err(Error::invalid(
                "capture.bins",
                format!(
                    "{} does not match radar grid {}",
                    self.bins,
                    self.config.num_bins()
                ),
            ));
        }
        if self.samples.len() != self.frames * self.bins {
            return Err(Error::invalid(
                "capture.samples",
                format!(
                    "expected {} samples, got {}",
                    self.frames * self.bins,
                    self.samples.len()
                ),
            ));
        }
        if self
            .samples
            .iter()
            .any(|s| !(s.re.is_finite() && s.im.is_finite()))
        {
            return Err(Error::invalid("capture.samples", "non-finite sample"));
        }
        Ok(())
    }

    pub fn frame(&self, m: usize) -> &[Complex64] {
        &self.samples[m * self.bins..(m + 1) * self.bins]
    }

    /// Slow-time sequence of range bin `n`.
    pub fn bin_series(&self, n: usize) -> Vec<Complex64> {
        (0..self.frames)
            .map(|m| self.samples[m * self.bins + n])
            .collect()
    }

    pub fn duration(&self) -> f64 {
        self.frames as f64 / self.config.frame_rate
    }
}

/// Per-reflector fast-time response, nonzero only over the pulse support.
#[derive(Debug, Clone)]
struct Footprint {
    first_bin: usize,
    values: Vec<Complex64>,
}

/// Precomputed scene: the static part summed once, modulated reflectors
/// kept separately so each frame only rescales them.
#[derive(Debug, Clone)]
pub struct Synthesizer {
    config: RadarConfig,
    t0: f64,
    static_row: Vec<Complex64>,
    dynamic: Vec<(Modulation, Footprint)>,
}

impl Synthesizer {
    pub fn new(config: &RadarConfig, pulse: &PulseShape, scene: &[Reflector]) -> Result<Self> {
        config.validate()?;
        pulse.validate()?;
        let bins = config.num_bins();
        let mut static_row = vec![Complex64::new(0.0, 0.0); bins];
        let mut dynamic = Vec::new();
        for r in scene {
            r.validate(config)?;
            let fp = footprint(config, pulse, r);
            if r.modulation.is_static() {
                for (i, v) in fp.values.iter().enumerate() {
                    static_row[fp.first_bin + i] += v;
                }
            } else {
                dynamic.push((r.modulation, fp));
            }
        }
        Ok(Self {
            config: *config,
            t0: 0.0,
            static_row,
            dynamic,
        })
    }

    pub fn with_t0(mut self, t0: f64) -> Self {
        self.t0 = t0;
        self
    }

    /// Writes frame `m` into `row`, drawing noise from `rng`.
    pub fn fill_frame<R: Rng + ?Sized>(&self, m: usize, rng: &mut R, row: &mut [Complex64]) {
        row.copy_from_slice(&self.static_row);
        for (modulation, fp) in &self.dynamic {
            let g = modulation.factor(&self.config, self.t0, m);
            if g.re == 0.0 && g.im == 0.0 {
                continue;
            }
            for (i, v) in fp.values.iter().enumerate() {
                row[fp.first_bin + i] += v * g;
            }
        }
        let sigma = self.config.noise_sigma;
        if sigma > 0.0 {
            let scale = sigma / std::f64::consts::SQRT_2;
            for s in row.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *s += Complex64::new(re * scale, im * scale);
            }
        }
    }
}

fn footprint(config: &RadarConfig, pulse: &PulseShape, r: &Reflector) -> Footprint {
    let bins = config.num_bins();
    let tau = 2.0 * r.distance / SPEED_OF_LIGHT;
    let period = config.sample_period();
    let half = (pulse.support() / period).ceil() as isize + 1;
    let centre = config.fractional_bin(r.distance).round() as isize;
    let lo = (centre - half).max(0) as usize;
    let hi = ((centre + half).max(0) as usize).min(bins - 1);
    let gain = r.amplitude * config.tx_amplitude;
    let values = (lo..=hi)
        .map(|n| gain * pulse.eval(config.sample_time(n) - tau))
        .collect();
    Footprint {
        first_bin: lo,
        values,
    }
}

/// Deterministic noise stream for frame `m` of a capture seeded with `seed`.
pub fn frame_rng(seed: u64, m: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(m as u64);
    rng
}

/// One frame of `N` complex samples: every reflector's pulse echo scaled by
/// its modulation for frame `m`, plus noise.
pub fn synthesize_frame<R: Rng + ?Sized>(
    config: &RadarConfig,
    pulse: &PulseShape,
    scene: &[Reflector],
    m: usize,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    let synth = Synthesizer::new(config, pulse, scene)?;
    let mut row = vec![Complex64::new(0.0, 0.0); config.num_bins()];
    synth.fill_frame(m, rng, &mut row);
    Ok(row)
}

pub fn synthesize_capture(
    config: &RadarConfig,
    pulse: &PulseShape,
    scene: &[Reflector],
    duration: f64,
    seed: u64,
) -> Result<FrameCapture> {
    synthesize_capture_capped(config, pulse, scene, duration, seed, DEFAULT_MEMORY_CAP)
}

/// Synthesizes `round(duration·frame_rate)` frames; frame `m` draws its noise
/// from [`frame_rng`]`(seed, m)`, so frames can be built in parallel.
pub fn synthesize_capture_capped(
    config: &RadarConfig,
    pulse: &PulseShape,
    scene: &[Reflector],
    duration: f64,
    seed: u64,
    memory_cap: usize,
) -> Result<FrameCapture> {
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::invalid(
            "duration",
            format!("must be > 0, got {duration}"),
        ));
    }
    config.validate()?;
    let frames = (duration * config.frame_rate).round() as usize;
    if frames == 0 {
        return Err(Error::invalid("duration", "shorter than one frame"));
    }
    let bins = config.num_bins();
    let bytes = frames
        .checked_mul(bins)
        .and_then(|n| n.checked_mul(std::mem::size_of::<Complex64>()));
    if bytes.is_none_or(|b| b > memory_cap) {
        return Err(Error::CaptureTooLarge {
            frames,
            bins,
            cap: memory_cap,
        });
    }
    let synth = Synthesizer::new(config, pulse, scene)?;
    let mut samples = vec![Complex64::new(0.0, 0.0); frames * bins];
    samples
        .par_chunks_mut(bins)
        .enumerate()
        .for_each(|(m, row)| {
            let mut rng = frame_rng(seed, m);
            synth.fill_frame(m, &mut rng, row);
        });
    Ok(FrameCapture {
        samples,
        frames,
        bins,
        config: *config,
        t0: 0.0,
        seed,
        scenario_digest: None,
        annotations: BTreeMap::new(),
    })
}
