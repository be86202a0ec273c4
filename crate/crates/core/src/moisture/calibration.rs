//! Gravimetric calibration: a least-squares cubic `θ(Ka)` fitted to
//! oven-dried reference samples.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CALIBRATION_VERSION: u32 = 1;
const MIN_POINTS: usize = 4;

fn calibration_version() -> u32 {
    CALIBRATION_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationCurve {
    #[serde(default = "calibration_version")]
    pub version: u32,
    /// Cubic in Ka, constant term first.
    pub coefficients: [f64; 4],
    pub fit_rmse: f64,
    pub n_points: usize,
    /// Ka range covered by the fitting data.
    pub ka_min: f64,
    pub ka_max: f64,
}

impl CalibrationCurve {
    pub fn validate(&self) -> Result<()> {
        if self.version != CALIBRATION_VERSION {
            return Err(Error::invalid(
                "calibration.version",
                format!("unsupported {}", self.version),
            ));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("calibration.coefficients", "must be finite"));
        }
        if self.n_points < MIN_POINTS {
            return Err(Error::invalid(
                "calibration.n_points",
                format!("must be >= {MIN_POINTS}"),
            ));
        }
        if !(self.fit_rmse.is_finite() && self.fit_rmse >= 0.0) {
            return Err(Error::invalid(
                "calibration.fit_rmse",
                "must be finite and >= 0",
            ));
        }
        if !(self.ka_min.is_finite() && self.ka_max.is_finite() && self.ka_min <= self.ka_max) {
            return Err(Error::invalid(
                "calibration.ka_min",
                "must be finite and <= ka_max",
            ));
        }
        Ok(())
    }

    /// Unclamped cubic value.
    pub fn raw(&self, ka: f64) -> f64 {
        let c = &self.coefficients;
        c[0] + ka * (c[1] + ka * (c[2] + ka * c[3]))
    }

    pub fn predict(&self, ka: f64) -> f64 {
        self.raw(ka).clamp(0.0, 1.0)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let curve: Self = serde_json::from_str(text)?;
        curve.validate()?;
        Ok(curve)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Least-squares cubic through `(Ka, θ)` pairs.
pub fn fit_calibration(pairs: &[(f64, f64)]) -> Result<CalibrationCurve> {
    if pairs.len() < MIN_POINTS {
        return Err(Error::InsufficientPoints {
            needed: MIN_POINTS,
            got: pairs.len(),
        });
    }
    if pairs.iter().any(|(k, t)| !(k.is_finite() && t.is_finite())) {
        return Err(Error::invalid("calibration pairs", "must be finite"));
    }
    let scale = pairs.iter().map(|(k, _)| k.abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(Error::RankDeficient);
    }
    // columns in Ka/scale keep the Vandermonde system well conditioned
    let design = DMatrix::from_fn(pairs.len(), 4, |i, j| (pairs[i].0 / scale).powi(j as i32));
    let target = DVector::from_iterator(pairs.len(), pairs.iter().map(|(_, t)| *t));
    let svd = design.svd(true, true);
    let sv = &svd.singular_values;
    let max = sv.max();
    if sv.min() <= max * 1e-10 {
        return Err(Error::RankDeficient);
    }
    let scaled = svd.solve(&target, 0.0).map_err(|_| Error::RankDeficient)?;
    let mut coefficients = [0.0; 4];
    for (j, c) in coefficients.iter_mut().enumerate() {
        *c = scaled[j] / scale.powi(j as i32);
    }
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid(
            "calibration pairs",
            "fit overflowed; values out of range",
        ));
    }
    let mut curve = CalibrationCurve {
        version: CALIBRATION_VERSION,
        coefficients,
        fit_rmse: 0.0,
        n_points: pairs.len(),
        ka_min: pairs.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        ka_max: pairs.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
    };
    let sse: f64 = pairs.iter().map(|(k, t)| (curve.raw(*k) - t).powi(2)).sum();
    curve.fit_rmse = (sse / pairs.len() as f64).sqrt();
    curve.validate()?;
    Ok(curve)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRow {
    ka: f64,
    theta: f64,
}

/// Reads `ka,theta` rows from CSV with that exact header.
pub fn read_pairs_csv<R: Read>(reader: R) -> Result<Vec<(f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "ka" || &headers[1] != "theta" {
        return Err(Error::invalid(
            "csv header",
            format!("expected \"ka,theta\", got {:?}", headers.as_slice()),
        ));
    }
    let mut pairs = Vec::new();
    for row in rdr.deserialize::<PairRow>() {
        let row = row?;
        if !(row.ka.is_finite() && row.theta.is_finite()) {
            return Err(Error::invalid("csv row", "values must be finite"));
        }
        pairs.push((row.ka, row.theta));
    }
    Ok(pairs)
}
