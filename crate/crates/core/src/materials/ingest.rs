//! Measurement CSV ingestion.
//!
//! Header: `frequency_hz,rel_permittivity_1..N,conductivity_s_per_m_1..N`,
//! one row per frequency, replicate columns matched by their index suffix.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use super::{Concentration, MaterialSample, Method, Provenance};
use crate::dispersion::{DielectricSpectrum, FrequencyGrid, GridBounds};
use crate::error::{Error, Result};

const FREQUENCY_COLUMN: &str = "frequency_hz";
const PERMITTIVITY_PREFIX: &str = "rel_permittivity_";
const CONDUCTIVITY_PREFIX: &str = "conductivity_s_per_m_";
const MIN_ROWS: usize = 3;

/// How replicate readings at one frequency are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    #[default]
    Mean,
    Median,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    pub bounds: GridBounds,
    /// Keep rows outside `bounds` instead of dropping them.
    pub widen_bounds: bool,
    pub averaging: Averaging,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            bounds: GridBounds::default(),
            widen_bounds: false,
            averaging: Averaging::Mean,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MeasurementMetadata {
    pub measured_at: Option<NaiveDate>,
    pub sample_thickness_mm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedMeasurement {
    pub spectrum: DielectricSpectrum,
    pub replicates: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub sample: MaterialSample,
    pub warnings: Vec<String>,
}

struct Columns {
    frequency: usize,
    permittivity: Vec<usize>,
    conductivity: Vec<usize>,
}

fn parse_header(header: &csv::StringRecord) -> Result<Columns> {
    let mut frequency = None;
    let mut eps = BTreeMap::new();
    let mut sigma = BTreeMap::new();
    let header_error = |field: &str, message: String| Error::Parse {
        line: 1,
        field: field.to_owned(),
        message,
    };
    for (col, name) in header.iter().enumerate() {
        let replicate = |prefix: &str| -> Result<usize> {
            name[prefix.len()..]
                .parse::<usize>()
                .ok()
                .filter(|&k| k >= 1)
                .ok_or_else(|| header_error(name, "replicate suffix must be an integer >= 1".into()))
        };
        let duplicate = || header_error(name, "duplicate column".into());
        if name == FREQUENCY_COLUMN {
            if frequency.replace(col).is_some() {
                return Err(duplicate());
            }
        } else if name.starts_with(PERMITTIVITY_PREFIX) {
            if eps.insert(replicate(PERMITTIVITY_PREFIX)?, col).is_some() {
                return Err(duplicate());
            }
        } else if name.starts_with(CONDUCTIVITY_PREFIX) {
            if sigma.insert(replicate(CONDUCTIVITY_PREFIX)?, col).is_some() {
                return Err(duplicate());
            }
        } else {
            return Err(header_error(name, "unknown column".into()));
        }
    }
    let frequency = frequency.ok_or_else(|| header_error(FREQUENCY_COLUMN, "missing column".into()))?;
    if eps.is_empty() {
        return Err(header_error(PERMITTIVITY_PREFIX, "no replicate columns".into()));
    }
    let expected: Vec<usize> = (1..=eps.len()).collect();
    if eps.keys().copied().collect::<Vec<_>>() != expected || sigma.keys().copied().collect::<Vec<_>>() != expected {
        return Err(header_error(
            CONDUCTIVITY_PREFIX,
            "replicate indices must run 1..N for both permittivity and conductivity".into(),
        ));
    }
    Ok(Columns {
        frequency,
        permittivity: eps.into_values().collect(),
        conductivity: sigma.into_values().collect(),
    })
}

/// Order-independent combination of replicate readings.
fn combine(mut values: Vec<f64>, averaging: Averaging) -> f64 {
    values.sort_by(f64::total_cmp);
    match averaging {
        // Offsets from the smallest value keep identical replicates exact.
        Averaging::Mean => {
            let base = values[0];
            base + values.iter().map(|v| v - base).sum::<f64>() / values.len() as f64
        }
        Averaging::Median => {
            let n = values.len();
            if n % 2 == 1 {
                values[n / 2]
            } else {
                0.5 * (values[n / 2 - 1] + values[n / 2])
            }
        }
    }
}

/// Parses and averages a measurement CSV into a spectrum.
pub fn parse_measurement_csv(reader: impl Read, options: &IngestOptions) -> Result<ParsedMeasurement> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let columns = parse_header(rdr.headers()?)?;

    let mut warnings = Vec::new();
    let mut freqs = Vec::new();
    let mut eps = Vec::new();
    let mut sigma = Vec::new();
    let mut previous: Option<f64> = None;

    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let number = |col: usize, field: &str| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    line,
                    field: field.to_owned(),
                    message: format!("`{raw}` is not a finite number"),
                })
        };
        let f = number(columns.frequency, FREQUENCY_COLUMN)?;
        if f <= 0.0 {
            return Err(Error::Schema(format!("line {line}: frequency {f} Hz must be positive")));
        }
        if let Some(p) = previous {
            if f <= p {
                return Err(Error::Schema(format!(
                    "line {line}: frequency {f} Hz does not increase (previous {p} Hz)"
                )));
            }
        }
        previous = Some(f);

        let mut eps_row = Vec::with_capacity(columns.permittivity.len());
        let mut sigma_row = Vec::with_capacity(columns.conductivity.len());
        for (k, (&ce, &cs)) in columns.permittivity.iter().zip(&columns.conductivity).enumerate() {
            let e = number(ce, &format!("{PERMITTIVITY_PREFIX}{}", k + 1))?;
            let s = number(cs, &format!("{CONDUCTIVITY_PREFIX}{}", k + 1))?;
            if s <= 0.0 {
                return Err(Error::validation(
                    format!("measurement line {line}"),
                    format!("conductivity replicate {} is {s} S/m; must be positive", k + 1),
                ));
            }
            if e < 1.0 {
                return Err(Error::validation(
                    format!("measurement line {line}"),
                    format!("relative permittivity replicate {} is {e}; must be >= 1", k + 1),
                ));
            }
            eps_row.push(e);
            sigma_row.push(s);
        }

        if !options.bounds.contains(f) {
            if options.widen_bounds {
                warnings.push(format!(
                    "line {line}: {f} Hz outside [{}, {}] Hz, retained (bounds widened)",
                    options.bounds.min_hz, options.bounds.max_hz
                ));
            } else {
                warnings.push(format!(
                    "line {line}: {f} Hz outside [{}, {}] Hz, row dropped",
                    options.bounds.min_hz, options.bounds.max_hz
                ));
                continue;
            }
        }
        freqs.push(f);
        eps.push(combine(eps_row, options.averaging));
        sigma.push(combine(sigma_row, options.averaging));
    }

    if freqs.len() < MIN_ROWS {
        return Err(Error::Schema(format!(
            "{} usable frequency rows; at least {MIN_ROWS} required",
            freqs.len()
        )));
    }
    let bounds = if options.widen_bounds {
        GridBounds {
            min_hz: options.bounds.min_hz.min(freqs[0]),
            max_hz: options.bounds.max_hz.max(freqs[freqs.len() - 1]),
        }
    } else {
        options.bounds
    };
    let grid = FrequencyGrid::with_bounds(freqs, bounds)?;
    Ok(ParsedMeasurement {
        spectrum: DielectricSpectrum::new(grid, eps, sigma)?,
        replicates: columns.permittivity.len(),
        warnings,
    })
}

/// Ingests a measurement as a `measured` sample.
pub fn ingest_measurement(
    reader: impl Read,
    method: Method,
    concentration: Concentration,
    metadata: &MeasurementMetadata,
    options: &IngestOptions,
) -> Result<Ingested> {
    // Fixture limit is checked before touching the data.
    if let Some(t) = metadata.sample_thickness_mm {
        if t > super::MAX_SAMPLE_THICKNESS_MM {
            return Err(Error::FixtureLimit(t));
        }
    }
    let parsed = parse_measurement_csv(reader, options)?;
    let sample = MaterialSample::new(
        method,
        concentration,
        parsed.spectrum,
        Provenance::Measured,
        metadata.measured_at,
        metadata.sample_thickness_mm,
    )?;
    Ok(Ingested {
        sample,
        warnings: parsed.warnings,
    })
}

pub fn ingest_measurement_file(
    path: impl AsRef<Path>,
    method: Method,
    concentration: Concentration,
    metadata: &MeasurementMetadata,
    options: &IngestOptions,
) -> Result<Ingested> {
    let file = std::fs::File::open(path)?;
    ingest_measurement(file, method, concentration, metadata, options)
}

/// Writes a spectrum as a single-replicate measurement CSV.
///
/// Numbers use the shortest representation that parses back to the same
/// `f64`, so output round-trips through [`parse_measurement_csv`].
pub fn write_measurement_csv(spectrum: &DielectricSpectrum, mut out: impl Write) -> Result<()> {
    writeln!(out, "{FREQUENCY_COLUMN},{PERMITTIVITY_PREFIX}1,{CONDUCTIVITY_PREFIX}1")?;
    for ((f, e), s) in spectrum
        .frequencies()
        .iter()
        .zip(spectrum.rel_permittivity())
        .zip(spectrum.conductivity())
    {
        writeln!(out, "{f},{e},{s}")?;
    }
    Ok(())
}
