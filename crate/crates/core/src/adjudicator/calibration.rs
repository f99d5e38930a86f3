use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Point;

/// A tracker reading paired with the virtual position it should map to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPair {
    pub raw: Point,
    pub reference: Point,
}

/// Per-axis affine map `virtual = n * raw + b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct CalibrationParams {
    n: [f64; 2],
    b: [f64; 2],
}

#[derive(Deserialize)]
struct RawParams {
    n: [f64; 2],
    b: [f64; 2],
}

impl TryFrom<RawParams> for CalibrationParams {
    type Error = CalibrationError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        CalibrationParams::new(raw.n, raw.b)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("degenerate calibration on the {0} axis")]
    DegenerateCalibration(Axis),
    #[error("calibration values must be finite with a nonzero scale")]
    InvalidParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
        })
    }
}

impl CalibrationParams {
    pub fn new(n: [f64; 2], b: [f64; 2]) -> Result<Self, CalibrationError> {
        let ok = n.iter().chain(&b).all(|v| v.is_finite()) && n.iter().all(|v| *v != 0.0);
        if ok {
            Ok(Self { n, b })
        } else {
            Err(CalibrationError::InvalidParams)
        }
    }

    pub fn identity() -> Self {
        Self {
            n: [1.0, 1.0],
            b: [0.0, 0.0],
        }
    }

    pub fn scale(&self) -> [f64; 2] {
        self.n
    }

    pub fn offset(&self) -> [f64; 2] {
        self.b
    }

    pub fn to_virtual(&self, raw: Point) -> Point {
        Point::new(self.n[0] * raw.x + self.b[0], self.n[1] * raw.y + self.b[1])
    }

    pub fn to_raw(&self, virt: Point) -> Point {
        Point::new((virt.x - self.b[0]) / self.n[0], (virt.y - self.b[1]) / self.n[1])
    }
}

/// Componentwise `n * raw + b`.
pub fn to_virtual(raw: Point, calib: &CalibrationParams) -> Point {
    calib.to_virtual(raw)
}

/// Least-squares fit of scale and offset, independently per axis.
pub fn calibrate(pairs: &[CalibrationPair]) -> Result<CalibrationParams, CalibrationError> {
    if pairs.len() < 2 {
        return Err(CalibrationError::TooFewPairs(pairs.len()));
    }
    let fit_x = fit_axis(pairs.iter().map(|p| (p.raw.x, p.reference.x)))
        .ok_or(CalibrationError::DegenerateCalibration(Axis::X))?;
    let fit_y = fit_axis(pairs.iter().map(|p| (p.raw.y, p.reference.y)))
        .ok_or(CalibrationError::DegenerateCalibration(Axis::Y))?;
    CalibrationParams::new([fit_x.0, fit_y.0], [fit_x.1, fit_y.1])
}

fn fit_axis(samples: impl Iterator<Item = (f64, f64)> + Clone) -> Option<(f64, f64)> {
    let count = samples.clone().count() as f64;
    let (sx, sy) = samples
        .clone()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / count, sy / count);
    let (sxx, sxy, scale) = samples.fold((0.0, 0.0, 0.0_f64), |(sxx, sxy, m), (x, y)| {
        let dx = x - mx;
        (sxx + dx * dx, sxy + dx * (y - my), m.max(x.abs()))
    });
    if !(sxx > 1e-12 * scale.max(1.0).powi(2)) {
        return None;
    }
    let n = sxy / sxx;
    if !n.is_finite() || n.abs() < 1e-12 {
        return None;
    }
    Some((n, my - n * mx))
}

/// On-disk record of the calibration fitted at startup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub n: [f64; 2],
    pub b: [f64; 2],
    pub pairs: Vec<CalibrationPair>,
    pub fitted_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum CalibrationFileError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

impl CalibrationFile {
    pub fn fit(pairs: Vec<CalibrationPair>) -> Result<Self, CalibrationError> {
        let params = calibrate(&pairs)?;
        Ok(Self {
            n: params.scale(),
            b: params.offset(),
            pairs,
            fitted_at: Utc::now(),
        })
    }

    pub fn params(&self) -> Result<CalibrationParams, CalibrationError> {
        CalibrationParams::new(self.n, self.b)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CalibrationFileError> {
        std::fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CalibrationFileError> {
        let file: CalibrationFile = serde_json::from_slice(&std::fs::read(path)?)?;
        file.params()?;
        Ok(file)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(rx: f64, ry: f64, vx: f64, vy: f64) -> CalibrationPair {
        CalibrationPair {
            raw: Point::new(rx, ry),
            reference: Point::new(vx, vy),
        }
    }

    #[test]
    fn two_point_fit_is_exact() {
        let c = calibrate(&[pair(0.0, 0.0, 0.0, 0.0), pair(1.0, 1.0, 2.0, 2.0)]).unwrap();
        assert_eq!(c.scale(), [2.0, 2.0]);
        assert_eq!(c.offset(), [0.0, 0.0]);
    }

    #[test]
    fn zero_spread_is_degenerate() {
        let err = calibrate(&[pair(0.0, 0.0, 1.0, 1.0), pair(1.0, 1.0, 1.0, 1.0)]).unwrap_err();
        assert_eq!(err, CalibrationError::DegenerateCalibration(Axis::X));
        let err = calibrate(&[pair(2.0, 0.0, 1.0, 1.0), pair(2.0, 1.0, 3.0, 3.0)]).unwrap_err();
        assert_eq!(err, CalibrationError::DegenerateCalibration(Axis::X));
        assert_eq!(
            calibrate(&[pair(0.0, 0.0, 0.0, 0.0)]),
            Err(CalibrationError::TooFewPairs(1))
        );
    }

    #[test]
    fn affine_evaluation() {
        let c = CalibrationParams::new([2.0, 2.0], [1.0, 1.0]).unwrap();
        assert_eq!(to_virtual(Point::new(0.0, 0.0), &c), Point::new(1.0, 1.0));
        let id = CalibrationParams::identity();
        assert_eq!(to_virtual(Point::new(3.5, -2.0), &id), Point::new(3.5, -2.0));
    }

    #[test]
    fn inverse_recovers_raw() {
        let c = CalibrationParams::new([1.7, -0.3], [4.2, 0.01]).unwrap();
        let raw = Point::new(12.345, -6.789);
        let back = c.to_raw(c.to_virtual(raw));
        assert!((back.x - raw.x).abs() < 1e-12 && (back.y - raw.y).abs() < 1e-12);
    }

    #[test]
    fn rejects_zero_scale() {
        assert_eq!(
            CalibrationParams::new([0.0, 1.0], [0.0, 0.0]),
            Err(CalibrationError::InvalidParams)
        );
        let json = r#"{"n":[0.0,1.0],"b":[0.0,0.0]}"#;
        assert!(serde_json::from_str::<CalibrationParams>(json).is_err());
    }

    #[test]
    fn calibration_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calibration.json");
        let file = CalibrationFile::fit(vec![pair(0.0, 0.0, 1.0, 2.0), pair(2.0, 4.0, 5.0, 10.0)]).unwrap();
        file.save(&path).unwrap();
        let back = CalibrationFile::load(&path).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.params().unwrap().scale(), [2.0, 2.0]);
    }
}
