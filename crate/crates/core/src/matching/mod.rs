//! Band-constrained matching of material spectra against tissue spectra.
//!
//! The matching error is the tissue-normalised relative deviation
//! `|x_sample − x_tissue| / x_tissue`, compared with a strict `<` against
//! the threshold (10% by default).

mod bands;
mod export;
mod solve;

use std::cmp::Ordering;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dispersion::{tissue_spectrum, DielectricSpectrum, FrequencyGrid, TissueId, TissueLibrary, TissueModel};
use crate::error::{Error, Result};
use crate::materials::{Concentration, MaterialDatabase, MaterialSample, Method};

pub use crate::dispersion::PropertySelector;
pub use bands::{find_bands, relative_error_curve, Band, ErrorCurve};
pub use export::{format_mhz, report_to_csv, report_to_json, report_to_markdown, round_sig};
pub use solve::{golden_section_min, solve_concentration, solve_concentration_for_spectrum, ConcentrationFit};

pub const DEFAULT_THRESHOLD: f64 = 0.10;

/// A requested frequency interval in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBand")]
pub struct FrequencyBand {
    pub fmin_hz: f64,
    pub fmax_hz: f64,
}

#[derive(Deserialize)]
struct RawBand {
    fmin_hz: f64,
    fmax_hz: f64,
}

impl TryFrom<RawBand> for FrequencyBand {
    type Error = Error;

    fn try_from(raw: RawBand) -> Result<Self> {
        FrequencyBand::new(raw.fmin_hz, raw.fmax_hz)
    }
}

impl FrequencyBand {
    pub fn new(fmin_hz: f64, fmax_hz: f64) -> Result<Self> {
        if !(fmin_hz.is_finite() && fmax_hz.is_finite() && 0.0 < fmin_hz && fmin_hz < fmax_hz) {
            return Err(Error::Range(format!(
                "band [{fmin_hz}, {fmax_hz}] Hz must satisfy 0 < fmin < fmax"
            )));
        }
        Ok(FrequencyBand { fmin_hz, fmax_hz })
    }

    pub fn from_mhz(fmin_mhz: f64, fmax_mhz: f64) -> Result<Self> {
        Self::new(fmin_mhz * 1e6, fmax_mhz * 1e6)
    }

    /// Parses `"11:100"` (MHz).
    pub fn parse_mhz(text: &str) -> Result<Self> {
        let (a, b) = text
            .split_once(':')
            .ok_or_else(|| Error::Usage(format!("band `{text}` must look like FMIN:FMAX in MHz")))?;
        let parse = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::Usage(format!("band `{text}`: `{s}` is not a number")))
        };
        Self::from_mhz(parse(a)?, parse(b)?)
    }

    pub(crate) fn check_within(&self, grid: &FrequencyGrid) -> Result<()> {
        // Tolerate rounding from MHz conversion at the grid ends.
        let slack = 1e-9;
        if self.fmin_hz < grid.first() * (1.0 - slack) || self.fmax_hz > grid.last() * (1.0 + slack) {
            return Err(Error::Range(format!(
                "band [{}, {}] Hz is outside the evaluation grid [{}, {}] Hz",
                self.fmin_hz,
                self.fmax_hz,
                grid.first(),
                grid.last()
            )));
        }
        Ok(())
    }

    /// Fraction of this band, in log frequency, covered by `[lo, hi]`.
    pub fn log_coverage(&self, lo: f64, hi: f64) -> f64 {
        let a = lo.max(self.fmin_hz);
        let b = hi.min(self.fmax_hz);
        if b <= a {
            return 0.0;
        }
        (b.ln() - a.ln()) / (self.fmax_hz.ln() - self.fmin_hz.ln())
    }
}

/// A sub-threshold band of one sample against one tissue property.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MatchBand {
    pub tissue: TissueId,
    pub property: PropertySelector,
    pub method: Method,
    pub concentration: Concentration,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub worst_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOptions {
    pub threshold: f64,
    pub grid: FrequencyGrid,
}

impl Default for MatchOptions {
    fn default() -> Self {
        MatchOptions {
            threshold: DEFAULT_THRESHOLD,
            grid: FrequencyGrid::default(),
        }
    }
}

impl MatchOptions {
    pub fn new(threshold: f64, grid: FrequencyGrid) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(Error::Range(format!("threshold {threshold} must lie in (0, 1)")));
        }
        Ok(MatchOptions { threshold, grid })
    }
}

/// All qualifying bands of one sample against a tissue spectrum.
pub fn sample_bands(
    sample: &MaterialSample,
    tissue: TissueId,
    tissue_spec: &DielectricSpectrum,
    property: PropertySelector,
    threshold: f64,
) -> Result<Vec<MatchBand>> {
    let spec = sample.spectrum().resample(tissue_spec.grid())?;
    let curve = relative_error_curve(&spec, tissue_spec, property)?;
    Ok(find_bands(&curve, threshold)
        .into_iter()
        .map(|b| MatchBand {
            tissue,
            property,
            method: sample.method(),
            concentration: sample.concentration(),
            fmin_hz: b.fmin_hz,
            fmax_hz: b.fmax_hz,
            worst_error: b.worst_error,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankedMatch {
    pub band: MatchBand,
    /// Share of the requested band (in log frequency) this match covers.
    pub coverage: f64,
}

/// Total order: coverage desc, worst error asc, concentration asc, oil-only
/// before oil-kerosene, then lower band start.
fn rank_order(a: &RankedMatch, b: &RankedMatch) -> Ordering {
    b.coverage
        .total_cmp(&a.coverage)
        .then(a.band.worst_error.total_cmp(&b.band.worst_error))
        .then(a.band.concentration.cmp(&b.band.concentration))
        .then(a.band.method.cmp(&b.band.method))
        .then(a.band.fmin_hz.total_cmp(&b.band.fmin_hz))
}

/// Ranks every qualifying band that intersects `band`.
pub fn best_matches(
    db: &MaterialDatabase,
    tissue: &TissueModel,
    property: PropertySelector,
    band: FrequencyBand,
    top_k: usize,
    options: &MatchOptions,
) -> Result<Vec<RankedMatch>> {
    let tissue_spec = tissue_spectrum(tissue, &options.grid)?;
    best_matches_for_spectrum(
        db,
        tissue.tissue_id,
        &tissue_spec,
        property,
        band,
        top_k,
        options.threshold,
    )
}

pub fn best_matches_for_spectrum(
    db: &MaterialDatabase,
    tissue: TissueId,
    tissue_spec: &DielectricSpectrum,
    property: PropertySelector,
    band: FrequencyBand,
    top_k: usize,
    threshold: f64,
) -> Result<Vec<RankedMatch>> {
    if db.is_empty() {
        return Err(Error::Usage("material database is empty".into()));
    }
    band.check_within(tissue_spec.grid())?;
    let mut ranked = Vec::new();
    for sample in db.snapshot_all() {
        for m in sample_bands(sample, tissue, tissue_spec, property, threshold)? {
            let coverage = band.log_coverage(m.fmin_hz, m.fmax_hz);
            if coverage > 0.0 {
                ranked.push(RankedMatch { band: m, coverage });
            }
        }
    }
    ranked.sort_by(rank_order);
    ranked.truncate(top_k);
    Ok(ranked)
}

/// Sample with the smallest worst-case error over `band`, whether or not it
/// clears any threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosestSample {
    pub method: Method,
    pub concentration: Concentration,
    pub worst_error: f64,
}

pub fn closest_sample(
    db: &MaterialDatabase,
    tissue_spec: &DielectricSpectrum,
    property: PropertySelector,
    band: FrequencyBand,
) -> Result<ClosestSample> {
    band.check_within(tissue_spec.grid())?;
    let mut best: Option<ClosestSample> = None;
    for sample in db.snapshot_all() {
        let spec = sample.spectrum().resample(tissue_spec.grid())?;
        let curve = relative_error_curve(&spec, tissue_spec, property)?;
        let worst = curve
            .frequencies_hz
            .iter()
            .zip(&curve.errors)
            .filter(|(&f, _)| f >= band.fmin_hz && f <= band.fmax_hz)
            .map(|(_, &e)| e)
            .fold(0.0, f64::max);
        if best.is_none_or(|b| worst < b.worst_error) {
            best = Some(ClosestSample {
                method: sample.method(),
                concentration: sample.concentration(),
                worst_error: worst,
            });
        }
    }
    best.ok_or_else(|| Error::Usage("material database is empty".into()))
}

/// Qualifying bands for every tissue × property, grouped and sorted by `fmin`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatchReport {
    pub threshold: f64,
    pub groups: BTreeMap<TissueId, BTreeMap<PropertySelector, Vec<MatchBand>>>,
}

impl MatchReport {
    pub fn bands(&self, tissue: TissueId, property: PropertySelector) -> &[MatchBand] {
        self.groups
            .get(&tissue)
            .and_then(|g| g.get(&property))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn all_bands(&self) -> impl Iterator<Item = &MatchBand> {
        self.groups.values().flat_map(|g| g.values().flatten())
    }
}

pub fn match_table(db: &MaterialDatabase, library: &TissueLibrary, options: &MatchOptions) -> Result<MatchReport> {
    if db.is_empty() || library.is_empty() {
        return Err(Error::Usage(
            "match table needs a non-empty database and tissue library".into(),
        ));
    }
    let samples = db.snapshot_all();
    let mut groups = BTreeMap::new();
    for tissue in library.iter() {
        let spec = tissue_spectrum(tissue, &options.grid)?;
        let mut by_property = BTreeMap::new();
        for property in PropertySelector::ALL {
            let mut bands = Vec::new();
            for sample in &samples {
                bands.extend(sample_bands(
                    sample,
                    tissue.tissue_id,
                    &spec,
                    property,
                    options.threshold,
                )?);
            }
            bands.sort_by(|a, b| {
                a.fmin_hz
                    .total_cmp(&b.fmin_hz)
                    .then(a.method.cmp(&b.method))
                    .then(a.concentration.cmp(&b.concentration))
            });
            by_property.insert(property, bands);
        }
        groups.insert(tissue.tissue_id, by_property);
    }
    Ok(MatchReport {
        threshold: options.threshold,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::TissueLibrary;

    fn pct(p: f64) -> Concentration {
        Concentration::from_percent(p).unwrap()
    }

    fn scaled(spec: &DielectricSpectrum, k: f64) -> DielectricSpectrum {
        DielectricSpectrum::new(
            spec.grid().clone(),
            spec.rel_permittivity().iter().map(|v| (v * k).max(1.0)).collect(),
            spec.conductivity().iter().map(|v| v * k).collect(),
        )
        .unwrap()
    }

    #[test]
    fn band_parsing() {
        let b = FrequencyBand::parse_mhz("11:100").unwrap();
        assert_eq!(b.fmin_hz, 11e6);
        assert_eq!(b.fmax_hz, 100e6);
        assert!(FrequencyBand::parse_mhz("100:11").is_err());
        assert!(FrequencyBand::parse_mhz("11-100").is_err());
    }

    #[test]
    fn log_coverage() {
        let b = FrequencyBand::from_mhz(1.0, 100.0).unwrap();
        assert!((b.log_coverage(10e6, 1e9) - 0.5).abs() < 1e-12);
        assert_eq!(b.log_coverage(1e5, 5e5), 0.0);
    }

    #[test]
    fn identity_sample_spans_grid_for_its_tissue() {
        let lib = TissueLibrary::bundled();
        let opts = MatchOptions::default();
        let muscle = tissue_spectrum(lib.get(TissueId::Muscle).unwrap(), &opts.grid).unwrap();
        let db =
            MaterialDatabase::from_samples([MaterialSample::synthetic(Method::OilOnly, pct(40.0), muscle)]).unwrap();
        let report = match_table(&db, &lib, &opts).unwrap();
        for p in PropertySelector::ALL {
            let bands = report.bands(TissueId::Muscle, p);
            assert_eq!(bands.len(), 1);
            assert_eq!(bands[0].fmin_hz, 1e5);
            assert_eq!(bands[0].fmax_hz, 1e8);
            assert_eq!(bands[0].worst_error, 0.0);
        }
        assert_eq!(report.groups.len(), 6);
    }

    #[test]
    fn ranking_prefers_coverage_then_error() {
        let lib = TissueLibrary::bundled();
        let opts = MatchOptions::default();
        let fat = tissue_spectrum(lib.get(TissueId::Fat).unwrap(), &opts.grid).unwrap();
        let db = MaterialDatabase::from_samples([
            MaterialSample::synthetic(Method::OilOnly, pct(50.0), scaled(&fat, 1.08)),
            MaterialSample::synthetic(Method::OilKerosene, pct(50.0), scaled(&fat, 1.02)),
            MaterialSample::synthetic(Method::OilKerosene, pct(60.0), scaled(&fat, 1.5)),
        ])
        .unwrap();
        let band = FrequencyBand::from_mhz(11.0, 100.0).unwrap();
        let ranked = best_matches(
            &db,
            lib.get(TissueId::Fat).unwrap(),
            PropertySelector::Conductivity,
            band,
            10,
            &opts,
        )
        .unwrap();
        assert_eq!(ranked.len(), 2);
        assert_eq!(ranked[0].band.method, Method::OilKerosene);
        assert_eq!(ranked[1].band.method, Method::OilOnly);
        assert_eq!(ranked[0].coverage, 1.0);

        let top1 = best_matches(
            &db,
            lib.get(TissueId::Fat).unwrap(),
            PropertySelector::Conductivity,
            band,
            1,
            &opts,
        )
        .unwrap();
        assert_eq!(top1.len(), 1);
    }

    #[test]
    fn ties_break_on_concentration_then_method() {
        let lib = TissueLibrary::bundled();
        let opts = MatchOptions::default();
        let fat = tissue_spectrum(lib.get(TissueId::Fat).unwrap(), &opts.grid).unwrap();
        let same = scaled(&fat, 1.05);
        let db = MaterialDatabase::from_samples([
            MaterialSample::synthetic(Method::OilKerosene, pct(30.0), same.clone()),
            MaterialSample::synthetic(Method::OilOnly, pct(30.0), same.clone()),
            MaterialSample::synthetic(Method::OilKerosene, pct(20.0), same),
        ])
        .unwrap();
        let band = FrequencyBand::from_mhz(1.0, 10.0).unwrap();
        let ranked = best_matches(
            &db,
            lib.get(TissueId::Fat).unwrap(),
            PropertySelector::Permittivity,
            band,
            10,
            &opts,
        )
        .unwrap();
        let order: Vec<_> = ranked
            .iter()
            .map(|r| (r.band.method, r.band.concentration.percent()))
            .collect();
        assert_eq!(
            order,
            vec![
                (Method::OilKerosene, 20.0),
                (Method::OilOnly, 30.0),
                (Method::OilKerosene, 30.0)
            ]
        );
    }

    #[test]
    fn empty_db_and_out_of_grid_band_rejected() {
        let lib = TissueLibrary::bundled();
        let opts = MatchOptions::default();
        let fat = lib.get(TissueId::Fat).unwrap();
        let band = FrequencyBand::from_mhz(11.0, 100.0).unwrap();
        let empty = MaterialDatabase::new();
        assert!(matches!(
            best_matches(&empty, fat, PropertySelector::Conductivity, band, 3, &opts),
            Err(Error::Usage(_))
        ));
        let spec = tissue_spectrum(fat, &opts.grid).unwrap();
        let db = MaterialDatabase::from_samples([MaterialSample::synthetic(Method::OilOnly, pct(40.0), spec)]).unwrap();
        let wide = FrequencyBand::from_mhz(11.0, 200.0).unwrap();
        assert!(matches!(
            best_matches(&db, fat, PropertySelector::Conductivity, wide, 3, &opts),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn closest_sample_reports_minimax() {
        let lib = TissueLibrary::bundled();
        let opts = MatchOptions::default();
        let fat = tissue_spectrum(lib.get(TissueId::Fat).unwrap(), &opts.grid).unwrap();
        let db = MaterialDatabase::from_samples([
            MaterialSample::synthetic(Method::OilOnly, pct(50.0), scaled(&fat, 1.3)),
            MaterialSample::synthetic(Method::OilOnly, pct(60.0), scaled(&fat, 0.8)),
        ])
        .unwrap();
        let band = FrequencyBand::from_mhz(1.0, 10.0).unwrap();
        let c = closest_sample(&db, &fat, PropertySelector::Conductivity, band).unwrap();
        assert_eq!(c.concentration, pct(60.0));
        assert!((c.worst_error - 0.2).abs() < 1e-12);
    }
}
