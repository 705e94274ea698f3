//! Signal ingestion and the synthetic fixture generators.
//!
//! Signal files are two-column CSVs whose header row names the unit of the
//! value column; values are converted to internal units (kW, $/kWh) at this
//! boundary. Real market data is out of scope, so the generators below
//! produce the deterministic reference and price days used by the
//! experiment configurations.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parse error at row {row}: {msg}")]
    Parse { row: usize, msg: String },
    #[error("signal has {got} rows, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Unit conversions accepted in the value column header.
const UNITS: &[(&str, f64)] = &[
    ("kw", 1.0),
    ("mw", 1000.0),
    ("usd_per_kwh", 1.0),
    ("usd_per_mwh", 0.001),
];

/// Loads an `index,value` CSV with a unit-bearing header, returning the
/// values converted to internal units and checked against the expected
/// length.
pub fn load_signal(path: &Path, expected_len: usize) -> Result<Vec<f64>, SignalError> {
    let text = std::fs::read_to_string(path).map_err(|source| SignalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut lines = text.lines().enumerate();

    let (_, header) = lines.next().ok_or(SignalError::Parse {
        row: 1,
        msg: "empty file; expected a header row".into(),
    })?;
    let scale = parse_header(header)?;

    let mut values = Vec::new();
    for (idx, line) in lines {
        let row = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (index_str, value_str) = line.split_once(',').ok_or_else(|| SignalError::Parse {
            row,
            msg: format!("expected 'index,value', got {line:?}"),
        })?;
        let index: usize = index_str.trim().parse().map_err(|_| SignalError::Parse {
            row,
            msg: format!("bad index {index_str:?}"),
        })?;
        if index != values.len() {
            return Err(SignalError::Parse {
                row,
                msg: format!("index {index} out of order, expected {}", values.len()),
            });
        }
        let value: f64 = value_str.trim().parse().map_err(|_| SignalError::Parse {
            row,
            msg: format!("bad value {value_str:?}"),
        })?;
        if !value.is_finite() {
            return Err(SignalError::Parse {
                row,
                msg: format!("non-finite value {value_str:?}"),
            });
        }
        values.push(value * scale);
    }

    if values.len() != expected_len {
        return Err(SignalError::LengthMismatch {
            expected: expected_len,
            got: values.len(),
        });
    }
    Ok(values)
}

fn parse_header(header: &str) -> Result<f64, SignalError> {
    let err = |msg: String| SignalError::Parse { row: 1, msg };
    let (first, unit_col) = header
        .split_once(',')
        .ok_or_else(|| err(format!("header must be 'index,<unit>', got {header:?}")))?;
    if first.trim() != "index" {
        return Err(err(format!("first header column must be 'index', got {first:?}")));
    }
    let unit = unit_col
        .trim()
        .to_ascii_lowercase()
        .trim_start_matches("value_")
        .trim_start_matches("price_")
        .to_string();
    UNITS
        .iter()
        .find(|(name, _)| *name == unit)
        .map(|&(_, scale)| scale)
        .ok_or_else(|| err(format!("unknown unit column {unit_col:?}")))
}

/// Writes a signal in the canonical format (kW values).
pub fn write_signal_kw(path: &Path, values: &[f64]) -> std::io::Result<()> {
    let mut out = String::from("index,value_kw\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    std::fs::write(path, out)
}

/// Writes a price signal in the canonical format ($/kWh values).
pub fn write_signal_price(path: &Path, values: &[f64]) -> std::io::Result<()> {
    let mut out = String::from("index,price_usd_per_kwh\n");
    for (i, v) in values.iter().enumerate() {
        out.push_str(&format!("{i},{v}\n"));
    }
    std::fs::write(path, out)
}

/// Piecewise-step tracking reference (kW) over a 24 h horizon at `dt`
/// hours: a hard charge block, a slow top-off that overruns the fleet's
/// capacity unless energy is dissipated, a deep discharge toward the empty
/// end of the band, then a recovery charge.
///
/// The phase powers scale with the fleet size `n` relative to the 100 x
/// Table-I fleet the experiments use.
pub fn step_reference(k_steps: usize, dt_hours: f64, n: usize) -> Vec<f64> {
    let scale = n as f64 / 100.0;
    (0..k_steps)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt_hours;
            let p = if t < 6.0 {
                100.0
            } else if t < 11.0 {
                25.0
            } else if t < 22.0 {
                -117.2
            } else {
                50.0
            };
            p * scale
        })
        .collect()
}

/// Sinusoidal tracking reference (kW): zero-mean daily swing.
pub fn sinusoid_reference(k_steps: usize, dt_hours: f64, amplitude_kw: f64) -> Vec<f64> {
    (0..k_steps)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt_hours;
            amplitude_kw * (2.0 * std::f64::consts::PI * t / 24.0).sin()
        })
        .collect()
}

/// Two-peak day-ahead price shape ($/kWh): morning and evening peaks over a
/// positive base, the standard arbitrage profile.
pub fn two_peak_prices(k_steps: usize, dt_hours: f64) -> Vec<f64> {
    (0..k_steps)
        .map(|k| {
            let t = (k as f64 + 0.5) * dt_hours;
            let peak = |center: f64, width: f64, height: f64| {
                height * (-((t - center) / width).powi(2)).exp()
            };
            0.030 + peak(8.0, 1.5, 0.020) + peak(19.0, 2.0, 0.045)
        })
        .collect()
}
