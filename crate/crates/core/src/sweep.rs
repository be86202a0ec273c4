//! Parameter sweeps: many simulated captures, each processed back to a
//! moisture estimate, emitted as one CSV row per (value, replicate).

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moisture::{estimate_vwc, EstimateOptions, KaMode, MoistureFlag, VwcModel};
use crate::scenario::{simulate, Scenario, SCENARIO_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// Moisture of every layer.
    Theta,
    /// Tag burial depth (m).
    Depth,
    /// Capture length (s).
    Duration,
    /// Radar centre frequency (Hz).
    CenterFreq,
    /// Tag oscillation frequency (Hz).
    OscFreq,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Theta => "theta",
            SweepVariable::Depth => "depth",
            SweepVariable::Duration => "duration",
            SweepVariable::CenterFreq => "center_freq",
            SweepVariable::OscFreq => "osc_freq",
        }
    }
}

fn default_threshold() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub version: u32,
    pub variable: SweepVariable,
    pub values: Vec<f64>,
    pub replicates: u32,
    pub base: Scenario,
    #[serde(default)]
    pub ka_mode: KaMode,
    #[serde(default = "default_threshold")]
    pub threshold_db: f64,
    #[serde(default)]
    pub model: VwcModel,
}

impl SweepSpec {
    pub fn new(variable: SweepVariable, values: Vec<f64>, replicates: u32, base: Scenario) -> Self {
        Self {
            version: SCENARIO_VERSION,
            variable,
            values,
            replicates,
            base,
            ka_mode: KaMode::Exact,
            threshold_db: default_threshold(),
            model: VwcModel::Topp,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text)?;
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::invalid(
                "version",
                format!("expected {SCENARIO_VERSION}, got {}", self.version),
            ));
        }
        if self.values.is_empty() {
            return Err(Error::invalid("values", "must not be empty"));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("values", "must be finite"));
        }
        if self.replicates == 0 {
            return Err(Error::invalid("replicates", "must be >= 1"));
        }
        if !self.threshold_db.is_finite() {
            return Err(Error::invalid("threshold_db", "must be finite"));
        }
        if let VwcModel::Calibrated(c) = &self.model {
            c.validate()?;
        }
        for (i, v) in self.values.iter().enumerate() {
            self.scenario_for(*v, 0)
                .and_then(|s| s.validate())
                .map_err(|e| Error::invalid(format!("values[{i}]"), e.to_string()))?;
        }
        Ok(())
    }

    /// Base scenario with the swept variable set to `value`, seeded for
    /// `replicate`.
    pub fn scenario_for(&self, value: f64, replicate: u32) -> Result<Scenario> {
        let mut s = self.base.clone();
        s.seed = self.base.seed.wrapping_add(replicate as u64);
        match self.variable {
            SweepVariable::Theta => s.profile.layers.iter_mut().for_each(|l| l.theta = value),
            SweepVariable::Depth => s.tag.depth = value,
            SweepVariable::Duration => s.duration = value,
            SweepVariable::CenterFreq => {
                s.radar.fc = value;
                s.pulse = None;
            }
            SweepVariable::OscFreq => s.tag.osc_freq = value,
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub variable: SweepVariable,
    pub value_index: usize,
    pub value: f64,
    pub replicate: u32,
    pub seed: u64,
    pub true_theta: f64,
    pub theta_hat: Option<f64>,
    pub error: Option<f64>,
    pub snr_db: f64,
    pub detected: bool,
    pub flags: Vec<MoistureFlag>,
    pub scenario_digest: String,
}

/// Simulates and processes one replicate.
pub fn run_point(spec: &SweepSpec, value_index: usize, replicate: u32) -> Result<SweepRow> {
    let value = spec.values[value_index];
    let scenario = spec.scenario_for(value, replicate)?;
    let capture = simulate(&scenario)?;
    let opts = EstimateOptions {
        ka_mode: spec.ka_mode,
        threshold_db: spec.threshold_db,
        ..EstimateOptions::default()
    };
    let est = estimate_vwc(
        &capture,
        &scenario.tag,
        &scenario.geometry(),
        &spec.model,
        &opts,
    )?;
    let true_theta = scenario.mean_theta()?;
    Ok(SweepRow {
        variable: spec.variable,
        value_index,
        value,
        replicate,
        seed: scenario.seed,
        true_theta,
        theta_hat: est.theta,
        error: est.theta.map(|t| t - true_theta),
        snr_db: est.snr_db,
        detected: est.detected(),
        flags: est.flags.iter().copied().collect(),
        scenario_digest: scenario.digest()?,
    })
}

/// Runs every (value, replicate) pair in parallel; rows come back sorted
/// by value index, then replicate.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let jobs: Vec<(usize, u32)> = (0..spec.values.len())
        .flat_map(|i| (0..spec.replicates).map(move |r| (i, r)))
        .collect();
    let mut rows = jobs
        .par_iter()
        .map(|&(i, r)| {
            run_point(spec, i, r).map_err(|e| {
                Error::invalid(
                    format!("{}={} replicate {r}", spec.variable.name(), spec.values[i]),
                    e.to_string(),
                )
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.value_index, r.replicate));
    Ok(rows)
}

pub const CSV_HEADER: [&str; 11] = [
    "variable",
    "value",
    "replicate",
    "seed",
    "true_theta",
    "theta_hat",
    "error",
    "snr_db",
    "detected",
    "flags",
    "scenario_digest",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for r in rows {
        let flags: Vec<String> = r
            .flags
            .iter()
            .map(|f| {
                serde_json::to_value(f)
                    .ok()
                    .and_then(|v| v.as_str().map(String::from))
                    .unwrap_or_default()
            })
            .collect();
        out.write_record([
            r.variable.name().to_string(),
            r.value.to_string(),
            r.replicate.to_string(),
            r.seed.to_string(),
            r.true_theta.to_string(),
            opt(r.theta_hat),
            opt(r.error),
            r.snr_db.to_string(),
            r.detected.to_string(),
            flags.join("|"),
            r.scenario_digest.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Per-value summary: mean SNR and mean absolute error over replicates.
pub fn summarize(rows: &[SweepRow]) -> Vec<(f64, f64, Option<f64>)> {
    let mut out: Vec<(f64, f64, Option<f64>)> = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        let j = rows[i..]
            .iter()
            .position(|r| r.value_index != rows[i].value_index)
            .map_or(rows.len(), |k| i + k);
        let group = &rows[i..j];
        let snr = group.iter().map(|r| r.snr_db).sum::<f64>() / group.len() as f64;
        let errs: Vec<f64> = group.iter().filter_map(|r| r.error.map(f64::abs)).collect();
        let mae = (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64);
        out.push((rows[i].value, snr, mae));
        i = j;
    }
    out
}

/// Minimal SVG line chart of mean SNR against the swept value.
pub fn snr_svg(rows: &[SweepRow]) -> String {
    let points = summarize(rows);
    let (w, h, pad) = (480.0, 320.0, 40.0);
    let finite: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.0, p.1))
        .filter(|p| p.1.is_finite())
        .collect();
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    );
    if !finite.is_empty() {
        let (x0, x1) = finite
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| {
                (a.0.min(p.0), a.1.max(p.0))
            });
        let (y0, y1) = finite
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| {
                (a.0.min(p.1), a.1.max(p.1))
            });
        let sx = |x: f64| pad + if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.5 } * (w - 2.0 * pad);
        let sy =
            |y: f64| h - pad - if y1 > y0 { (y - y0) / (y1 - y0) } else { 0.5 } * (h - 2.0 * pad);
        let path: Vec<String> = finite
            .iter()
            .map(|p| format!("{:.1},{:.1}", sx(p.0), sy(p.1)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"black\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        for p in &finite {
            svg.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3\"/>\n",
                sx(p.0),
                sy(p.1)
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{pad}\" y=\"20\" font-size=\"12\">SNR (dB) {y0:.1} to {y1:.1} vs {}</text>\n",
            rows[0].variable.name()
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
