//! Fabricated material samples and the database that holds their spectra.

mod analysis;
mod ingest;
mod store;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dispersion::DielectricSpectrum;
use crate::error::{Error, Result};

pub use analysis::{
    aging_drift, interpolate_spectrum, validate_monotone_in_concentration, AgingReport, MonotoneViolation,
    MonotonicityReport,
};
pub use ingest::{
    ingest_measurement, ingest_measurement_file, parse_measurement_csv, write_measurement_csv, Averaging,
    IngestOptions, Ingested, MeasurementMetadata, ParsedMeasurement,
};
pub use store::MANIFEST_FILE;

/// Largest sample thickness the parallel-plate fixture accepts.
pub const MAX_SAMPLE_THICKNESS_MM: f64 = 3.0;
pub const SCHEMA_VERSION: u32 = 1;

/// Preparation route of a gelatin emulsion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    OilOnly,
    OilKerosene,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::OilOnly, Method::OilKerosene];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::OilOnly => "oil_only",
            Method::OilKerosene => "oil_kerosene",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::OilOnly => "Oil Only",
            Method::OilKerosene => "Oil-Kerosene",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "oil_only" | "oil" => Ok(Method::OilOnly),
            "oil_kerosene" | "kerosene" => Ok(Method::OilKerosene),
            _ => Err(Error::Usage(format!(
                "unknown method `{s}` (expected oil_only or oil_kerosene)"
            ))),
        }
    }
}

/// Oil-solution share of a formulation, as a fraction in [0.10, 0.90].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Concentration(f64);

impl Concentration {
    pub const MIN: f64 = 0.10;
    pub const MAX: f64 = 0.90;

    pub fn new(fraction: f64) -> Result<Self> {
        if !(fraction.is_finite() && (Self::MIN..=Self::MAX).contains(&fraction)) {
            return Err(Error::Range(format!(
                "concentration {fraction} outside [{}, {}]",
                Self::MIN,
                Self::MAX
            )));
        }
        Ok(Concentration(fraction))
    }

    /// `from_percent(30.0)` is exactly `0.3_f64`.
    pub fn from_percent(percent: f64) -> Result<Self> {
        Self::new(percent / 100.0)
    }

    pub fn fraction(self) -> f64 {
        self.0
    }

    pub fn percent(self) -> f64 {
        self.0 * 100.0
    }

    /// Whether two concentrations denote the same nominal label.
    pub fn same_label(self, other: Concentration) -> bool {
        (self.0 - other.0).abs() < 1e-9
    }
}

impl TryFrom<f64> for Concentration {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Concentration::new(value)
    }
}

impl From<Concentration> for f64 {
    fn from(c: Concentration) -> f64 {
        c.0
    }
}

impl Eq for Concentration {}

impl PartialOrd for Concentration {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Concentration {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Concentration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let percent: f64 = format!("{:.4}", self.percent()).parse().unwrap_or(self.percent());
        write!(f, "{percent}%")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Measured,
    Interpolated,
    Synthetic,
}

/// One formulation with its spectrum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaterialSample {
    method: Method,
    concentration: Concentration,
    spectrum: DielectricSpectrum,
    provenance: Provenance,
    measured_at: Option<NaiveDate>,
    sample_thickness_mm: Option<f64>,
}

impl MaterialSample {
    pub fn new(
        method: Method,
        concentration: Concentration,
        spectrum: DielectricSpectrum,
        provenance: Provenance,
        measured_at: Option<NaiveDate>,
        sample_thickness_mm: Option<f64>,
    ) -> Result<Self> {
        if let Some(t) = sample_thickness_mm {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::validation(
                    "material sample",
                    format!("thickness {t} mm must be positive"),
                ));
            }
            if t > MAX_SAMPLE_THICKNESS_MM {
                return Err(Error::FixtureLimit(t));
            }
        }
        if provenance == Provenance::Measured && sample_thickness_mm.is_none() {
            return Err(Error::validation(
                "material sample",
                "measured samples must record sample_thickness_mm",
            ));
        }
        Ok(MaterialSample {
            method,
            concentration,
            spectrum,
            provenance,
            measured_at,
            sample_thickness_mm,
        })
    }

    pub fn synthetic(method: Method, concentration: Concentration, spectrum: DielectricSpectrum) -> Self {
        MaterialSample {
            method,
            concentration,
            spectrum,
            provenance: Provenance::Synthetic,
            measured_at: None,
            sample_thickness_mm: None,
        }
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn concentration(&self) -> Concentration {
        self.concentration
    }

    pub fn spectrum(&self) -> &DielectricSpectrum {
        &self.spectrum
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn measured_at(&self) -> Option<NaiveDate> {
        self.measured_at
    }

    pub fn sample_thickness_mm(&self) -> Option<f64> {
        self.sample_thickness_mm
    }

    /// Short label such as `80% oil_kerosene`.
    pub fn label(&self) -> String {
        format!("{} {}", self.concentration, self.method)
    }
}

/// Collection of samples keyed by method and concentration.
///
/// Several samples may share a (method, concentration) key when they were
/// measured on different dates; queries use the most recent one.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialDatabase {
    samples: Vec<MaterialSample>,
    schema_version: u32,
}

impl Default for MaterialDatabase {
    fn default() -> Self {
        MaterialDatabase {
            samples: Vec::new(),
            schema_version: SCHEMA_VERSION,
        }
    }
}

impl MaterialDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_samples(samples: impl IntoIterator<Item = MaterialSample>) -> Result<Self> {
        let mut db = Self::new();
        for s in samples {
            db.insert(s)?;
        }
        Ok(db)
    }

    pub fn schema_version(&self) -> u32 {
        self.schema_version
    }

    pub fn insert(&mut self, sample: MaterialSample) -> Result<()> {
        if sample.provenance == Provenance::Measured {
            let clash = self.samples.iter().any(|s| {
                s.provenance == Provenance::Measured
                    && s.method == sample.method
                    && s.concentration.same_label(sample.concentration)
                    && s.measured_at == sample.measured_at
            });
            if clash {
                return Err(Error::validation(
                    "material database",
                    format!(
                        "a measured {} sample dated {:?} is already present",
                        sample.label(),
                        sample.measured_at
                    ),
                ));
            }
        }
        self.samples.push(sample);
        Ok(())
    }

    pub fn samples(&self) -> &[MaterialSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// One sample per concentration for `method`, ascending in concentration.
    pub fn snapshot(&self, method: Method) -> Vec<&MaterialSample> {
        let mut picked: Vec<&MaterialSample> = Vec::new();
        for s in self.samples.iter().filter(|s| s.method == method) {
            match picked.iter_mut().find(|p| p.concentration.same_label(s.concentration)) {
                Some(p) => {
                    if s.measured_at > p.measured_at {
                        *p = s;
                    }
                }
                None => picked.push(s),
            }
        }
        picked.sort_by_key(|s| s.concentration);
        picked
    }

    /// Snapshot across both methods, oil-only first.
    pub fn snapshot_all(&self) -> Vec<&MaterialSample> {
        Method::ALL.iter().flat_map(|&m| self.snapshot(m)).collect()
    }

    pub fn find(
        &self,
        method: Method,
        concentration: Concentration,
        measured_at: Option<NaiveDate>,
    ) -> Option<&MaterialSample> {
        self.samples
            .iter()
            .find(|s| s.method == method && s.concentration.same_label(concentration) && s.measured_at == measured_at)
    }
}
