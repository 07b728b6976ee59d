//! On-disk database layout: a `manifest.json` plus one measurement CSV per
//! (method, concentration, date).

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::ingest::{parse_measurement_csv, write_measurement_csv, IngestOptions};
use super::{Concentration, MaterialDatabase, MaterialSample, Method, Provenance, SCHEMA_VERSION};
use crate::dispersion::GridBounds;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    schema_version: u32,
    samples: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    file: String,
    method: Method,
    concentration: Concentration,
    provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    measured_at: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_thickness_mm: Option<f64>,
}

fn file_name(sample: &MaterialSample) -> String {
    let percent = sample
        .concentration()
        .to_string()
        .trim_end_matches('%')
        .replace('.', "p");
    let date = sample
        .measured_at()
        .map(|d| d.format("%Y-%m-%d").to_string())
        .unwrap_or_else(|| "undated".to_owned());
    format!("{}_{}_{}.csv", sample.method(), percent, date)
}

impl MaterialDatabase {
    /// Loads a database directory.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let text = fs::read_to_string(dir.join(MANIFEST_FILE))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.schema_version != SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported database schema_version {}",
                manifest.schema_version
            )));
        }
        // Stored spectra keep whatever band they were saved with.
        let options = IngestOptions {
            bounds: GridBounds {
                min_hz: f64::MIN_POSITIVE,
                max_hz: f64::MAX,
            },
            ..IngestOptions::default()
        };
        let mut db = MaterialDatabase::new();
        for entry in manifest.samples {
            let file = fs::File::open(dir.join(&entry.file))?;
            let parsed =
                parse_measurement_csv(file, &options).map_err(|e| Error::Schema(format!("{}: {e}", entry.file)))?;
            db.insert(MaterialSample::new(
                entry.method,
                entry.concentration,
                parsed.spectrum,
                entry.provenance,
                entry.measured_at,
                entry.sample_thickness_mm,
            )?)?;
        }
        Ok(db)
    }

    /// Writes the database into `dir`, creating it if needed.
    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let mut entries = Vec::with_capacity(self.samples.len());
        for sample in &self.samples {
            let mut name = file_name(sample);
            let mut n = 2;
            while entries.iter().any(|e: &ManifestEntry| e.file == name) {
                name = format!("{}-{n}.csv", file_name(sample).trim_end_matches(".csv"));
                n += 1;
            }
            let mut buf = Vec::new();
            write_measurement_csv(sample.spectrum(), &mut buf)?;
            fs::write(dir.join(&name), buf)?;
            entries.push(ManifestEntry {
                file: name,
                method: sample.method(),
                concentration: sample.concentration(),
                provenance: sample.provenance(),
                measured_at: sample.measured_at(),
                sample_thickness_mm: sample.sample_thickness_mm(),
            });
        }
        let manifest = Manifest {
            schema_version: self.schema_version,
            samples: entries,
        };
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }
}
