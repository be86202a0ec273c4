//! Range-Doppler processing and tag isolation.
//!
//! Every range bin's slow-time sequence goes through an inverse DFT with
//! `1/P` scaling:
//!
//! ```text
//! R[n, s] = (1/P) · Σ_m r_m[n] · exp(+j2π·m·s/P),   m, s = 0..P
//! ```
//!
//! Static clutter lands entirely in Doppler bin 0. A tag toggling at `f`
//! lands in bin `round(f·P/frame_rate)` and its mirror `P − s`, so the
//! column at that frequency is a range profile that contains the tag and
//! nothing else but noise.

use std::ops::Range;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::FrameCapture;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    fn coefficients(self, len: usize) -> Option<Vec<f64>> {
        match self {
            Window::Rectangular => None,
            Window::Hann => Some(
                (0..len)
                    .map(|m| 0.5 - 0.5 * (std::f64::consts::TAU * m as f64 / len as f64).cos())
                    .collect(),
            ),
        }
    }
}

/// `N × P` range-Doppler matrix, stored range-bin-major.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerImage {
    pub data: Vec<Complex64>,
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub frame_rate: f64,
}

impl RangeDopplerImage {
    /// Doppler resolution (Hz per bin).
    pub fn bin_res(&self) -> f64 {
        self.frame_rate / self.doppler_bins as f64
    }

    pub fn at(&self, n: usize, s: usize) -> Complex64 {
        self.data[n * self.doppler_bins + s]
    }

    /// Doppler spectrum of range bin `n`.
    pub fn spectrum(&self, n: usize) -> &[Complex64] {
        &self.data[n * self.doppler_bins..(n + 1) * self.doppler_bins]
    }

    /// Range profile at Doppler bin `s`.
    pub fn column(&self, s: usize) -> Vec<Complex64> {
        (0..self.range_bins).map(|n| self.at(n, s)).collect()
    }
}

pub fn range_doppler(capture: &FrameCapture) -> Result<RangeDopplerImage> {
    range_doppler_windowed(capture, Window::Rectangular)
}

pub fn range_doppler_windowed(capture: &FrameCapture, window: Window) -> Result<RangeDopplerImage> {
    if capture.frames == 0 || capture.bins == 0 || capture.samples.is_empty() {
        return Err(Error::EmptyCapture("no samples".into()));
    }
    if capture.frames < 2 {
        return Err(Error::EmptyCapture(format!(
            "need at least 2 frames, got {}",
            capture.frames
        )));
    }
    if capture.samples.len() != capture.frames * capture.bins {
        return Err(Error::EmptyCapture(
            "sample count does not match shape".into(),
        ));
    }
    let p = capture.frames;
    let fft = FftPlanner::<f64>::new().plan_fft_inverse(p);
    let taper = window.coefficients(p);
    let scale = 1.0 / p as f64;
    let mut data = vec![Complex64::new(0.0, 0.0); capture.bins * p];
    data.par_chunks_mut(p).enumerate().for_each(|(n, column)| {
        for (m, out) in column.iter_mut().enumerate() {
            *out = capture.samples[m * capture.bins + n];
        }
        if let Some(w) = &taper {
            column.iter_mut().zip(w).for_each(|(x, w)| *x *= w);
        }
        fft.process(column);
        column.iter_mut().for_each(|x| *x *= scale);
    });
    Ok(RangeDopplerImage {
        data,
        range_bins: capture.bins,
        doppler_bins: p,
        frame_rate: capture.config.frame_rate,
    })
}

/// Doppler bin holding frequency `f`: `round(f·P/frame_rate) mod P`.
pub fn doppler_bin_for_freq(f: f64, frame_rate: f64, p: usize) -> Result<usize> {
    if !(f.is_finite() && f >= 0.0) {
        return Err(Error::invalid(
            "frequency",
            format!("must be finite and >= 0, got {f}"),
        ));
    }
    if f >= frame_rate {
        return Err(Error::AboveNyquist {
            freq: f,
            limit: frame_rate,
        });
    }
    if p == 0 {
        return Err(Error::invalid("P", "must be > 0"));
    }
    Ok(((f * p as f64 / frame_rate).round() as usize) % p)
}

/// How the `+f` and `−f` Doppler bins of a real on-off pattern are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MirrorCombine {
    /// Use the `+f` bin only.
    None,
    /// Root of the summed powers of both bins.
    #[default]
    Power,
}

/// Magnitude of every range bin at the tag's Doppler frequency.
pub fn extract_tag_vector(
    image: &RangeDopplerImage,
    f_tag: f64,
    combine: MirrorCombine,
) -> Result<Vec<f64>> {
    let nyquist = image.frame_rate / 2.0;
    if f_tag > nyquist {
        return Err(Error::AboveNyquist {
            freq: f_tag,
            limit: nyquist,
        });
    }
    let p = image.doppler_bins;
    let s = doppler_bin_for_freq(f_tag, image.frame_rate, p)?;
    let mirror = (p - s) % p;
    Ok((0..image.range_bins)
        .map(|n| {
            let a = image.at(n, s);
            match combine {
                MirrorCombine::Power if mirror != s => {
                    (a.norm_sqr() + image.at(n, mirror).norm_sqr()).sqrt()
                }
                _ => a.norm(),
            }
        })
        .collect())
}

/// Parabolic vertex offset through three log-magnitudes, in `[-0.5, 0.5]`.
pub fn parabolic_offset(left: f64, centre: f64, right: f64) -> Option<f64> {
    if !(left > 0.0 && centre > 0.0 && right > 0.0) {
        return None;
    }
    let (l, c, r) = (left.ln(), centre.ln(), right.ln());
    let denom = l - 2.0 * c + r;
    if denom.is_nan() || denom >= 0.0 {
        return None;
    }
    Some((0.5 * (l - r) / denom).clamp(-0.5, 0.5))
}

/// Peak position in `values`, refined to a fraction of a bin.
pub fn refine_peak(values: &[f64], peak: usize) -> f64 {
    if peak == 0 || peak + 1 >= values.len() {
        return peak as f64;
    }
    peak as f64 + parabolic_offset(values[peak - 1], values[peak], values[peak + 1]).unwrap_or(0.0)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectOptions {
    /// Range bins searched for the peak; `None` searches all.
    pub window: Option<Range<usize>>,
    pub threshold_db: f64,
    /// Bins on either side of the peak left out of the noise floor.
    pub guard: usize,
    pub combine: MirrorCombine,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            window: None,
            threshold_db: 10.0,
            guard: 3,
            combine: MirrorCombine::Power,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionResult {
    pub range_bin: usize,
    /// Sub-bin peak position; integer values are bin centres.
    pub refined_bin: f64,
    pub doppler_bin: usize,
    pub snr_db: f64,
    pub detected: bool,
    /// Median power of the tag vector away from the peak.
    pub noise_floor: f64,
}

/// Finds the strongest range bin at the tag frequency and decides whether it
/// stands out from the rest of the vector.
pub fn detect_tag(
    image: &RangeDopplerImage,
    f_tag: f64,
    opts: &DetectOptions,
) -> Result<DetectionResult> {
    let vector = extract_tag_vector(image, f_tag, opts.combine)?;
    let doppler_bin = doppler_bin_for_freq(f_tag, image.frame_rate, image.doppler_bins)?;
    let window = opts.window.clone().unwrap_or(0..vector.len());
    let window = window.start..window.end.min(vector.len());
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    if vector.iter().all(|v| *v == 0.0) {
        return Err(Error::ZeroVector);
    }
    let peak = window
        .clone()
        .max_by(|&a, &b| vector[a].total_cmp(&vector[b]))
        .ok_or(Error::EmptyWindow)?;
    let noise: Vec<f64> = vector
        .iter()
        .enumerate()
        .filter(|(n, _)| n.abs_diff(peak) > opts.guard)
        .map(|(_, v)| v * v)
        .collect();
    let noise_floor = if noise.is_empty() { 0.0 } else { median(noise) };
    let peak_power = vector[peak] * vector[peak];
    let snr_db = if peak_power == 0.0 {
        f64::NEG_INFINITY
    } else if noise_floor == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (peak_power / noise_floor).log10()
    };
    Ok(DetectionResult {
        range_bin: peak,
        refined_bin: refine_peak(&vector, peak),
        doppler_bin,
        snr_db,
        detected: snr_db >= opts.threshold_db,
        noise_floor,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::radar::{
        frame_rng, synthesize_capture, Modulation, PulseShape, RadarConfig, Reflector,
    };

    fn capture_from(bins: usize, series: &[Vec<Complex64>]) -> FrameCapture {
        let cfg = RadarConfig {
            range_start: 0.0,
            range_end: bins as f64 * 0.05,
            ..RadarConfig::default()
        };
        let frames = series[0].len();
        let mut samples = vec![Complex64::new(0.0, 0.0); frames * bins];
        for (n, s) in series.iter().enumerate() {
            for (m, v) in s.iter().enumerate() {
                samples[m * bins + n] = *v;
            }
        }
        FrameCapture::new(cfg, frames, samples).unwrap()
    }

    fn naive_inverse_dft(x: &[Complex64]) -> Vec<Complex64> {
        let p = x.len();
        (0..p)
            .map(|s| {
                x.iter()
                    .enumerate()
                    .map(|(m, v)| {
                        v * Complex64::from_polar(
                            1.0,
                            std::f64::consts::TAU * (m * s) as f64 / p as f64,
                        )
                    })
                    .sum::<Complex64>()
                    / p as f64
            })
            .collect()
    }

    #[test]
    fn matches_naive_transform() {
        let mut rng = frame_rng(5, 0);
        use rand::Rng;
        let series: Vec<Vec<Complex64>> = (0..3)
            .map(|_| {
                (0..37)
                    .map(|_| Complex64::new(rng.random(), rng.random()))
                    .collect()
            })
            .collect();
        let cap = capture_from(3, &series);
        let img = range_doppler(&cap).unwrap();
        for (n, s) in series.iter().enumerate() {
            let oracle = naive_inverse_dft(s);
            for (a, b) in img.spectrum(n).iter().zip(&oracle) {
                assert!((a - b).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn parseval_with_one_over_p() {
        let mut rng = frame_rng(9, 1);
        use rand::Rng;
        let series: Vec<Vec<Complex64>> = (0..2)
            .map(|_| {
                (0..500)
                    .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>()))
                    .collect()
            })
            .collect();
        let cap = capture_from(2, &series);
        let img = range_doppler(&cap).unwrap();
        for (n, s) in series.iter().enumerate() {
            let time: f64 = s.iter().map(|v| v.norm_sqr()).sum();
            let freq: f64 = img.spectrum(n).iter().map(|v| v.norm_sqr()).sum();
            assert!((freq * 500.0 - time).abs() / time < 1e-12);
        }
    }

    #[test]
    fn static_scene_is_dc() {
        let cfg = RadarConfig {
            noise_sigma: 0.0,
            ..RadarConfig::default()
        };
        let d = cfg.distance_of_bin(18);
        let scene = [Reflector::fixed(d, Complex64::new(0.7, 0.1))];
        let cap =
            synthesize_capture(&cfg, &PulseShape::gaussian_for(&cfg), &scene, 1.0, 0).unwrap();
        let img = range_doppler(&cap).unwrap();
        let spec = img.spectrum(18);
        assert!(spec[0].norm() > 0.5);
        assert!(spec[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn square_wave_fundamental_bin() {
        let cfg = RadarConfig {
            noise_sigma: 0.0,
            ..RadarConfig::default()
        };
        let scene = [Reflector {
            distance: 1.3,
            amplitude: Complex64::new(1.0, 0.0),
            modulation: Modulation::OnOffSquare {
                freq: 80.0,
                duty: 0.5,
                phase: 0.0,
            },
        }];
        let cap =
            synthesize_capture(&cfg, &PulseShape::gaussian_for(&cfg), &scene, 10.0, 0).unwrap();
        let img = range_doppler(&cap).unwrap();
        let n = cfg.fractional_bin(1.3).round() as usize;
        let spec = img.spectrum(n);
        let best = (1..=1000)
            .max_by(|&a, &b| spec[a].norm().total_cmp(&spec[b].norm()))
            .unwrap();
        assert_eq!(best, 800);
    }

    #[test]
    fn doppler_bin_examples() {
        assert_eq!(doppler_bin_for_freq(80.0, 200.0, 2000).unwrap(), 800);
        assert_eq!(doppler_bin_for_freq(0.0, 200.0, 2000).unwrap(), 0);
        assert_eq!(doppler_bin_for_freq(99.95, 200.0, 2000).unwrap(), 1000);
        assert_eq!(doppler_bin_for_freq(199.99, 200.0, 2000).unwrap(), 0);
        assert!(doppler_bin_for_freq(200.0, 200.0, 2000).is_err());
        assert!(doppler_bin_for_freq(-1.0, 200.0, 2000).is_err());
    }

    #[test]
    fn tag_vector_rejects_above_nyquist() {
        let cap = capture_from(
            2,
            &[
                vec![Complex64::new(1.0, 0.0); 8],
                vec![Complex64::new(0.0, 0.0); 8],
            ],
        );
        let img = range_doppler(&cap).unwrap();
        assert!(extract_tag_vector(&img, 150.0, MirrorCombine::Power).is_err());
    }

    #[test]
    fn parabolic_refinement_exact_on_gaussian() {
        let centre = 10.3;
        let v: Vec<f64> = (0..20)
            .map(|n| (-(n as f64 - centre).powi(2) / 0.6).exp())
            .collect();
        assert!((refine_peak(&v, 10) - centre).abs() < 1e-12);
        assert_eq!(refine_peak(&v, 0), 0.0);
        assert_eq!(parabolic_offset(0.0, 1.0, 0.5), None);
        assert_eq!(parabolic_offset(1.0, 1.0, 1.0), None);
    }

    #[test]
    fn detection_errors() {
        let cap = capture_from(4, &vec![vec![Complex64::new(0.0, 0.0); 16]; 4]);
        let img = range_doppler(&cap).unwrap();
        assert!(matches!(
            detect_tag(&img, 50.0, &DetectOptions::default()),
            Err(Error::ZeroVector)
        ));
        let opts = DetectOptions {
            window: Some(2..2),
            ..DetectOptions::default()
        };
        assert!(matches!(
            detect_tag(&img, 50.0, &opts),
            Err(Error::EmptyWindow)
        ));
    }

    #[test]
    fn one_frame_is_too_short() {
        let cap = capture_from(
            2,
            &[
                vec![Complex64::new(1.0, 0.0)],
                vec![Complex64::new(1.0, 0.0)],
            ],
        );
        assert!(matches!(range_doppler(&cap), Err(Error::EmptyCapture(_))));
    }

    #[test]
    fn hann_window_keeps_dc_gain_half() {
        let cap = capture_from(1, &[vec![Complex64::new(2.0, 0.0); 64]]);
        let img = range_doppler_windowed(&cap, Window::Hann).unwrap();
        assert!((img.at(0, 0).re - 1.0).abs() < 1e-12);
    }
}
