use chrono::NaiveDate;
use serde::Serialize;

use super::{Concentration, MaterialDatabase, MaterialSample, Method, Provenance};
use crate::dispersion::{log_lerp, DielectricSpectrum, FrequencyGrid, PropertySelector};
use crate::error::{Error, Result};

/// Spectrum at an arbitrary concentration between tabulated ones.
///
/// Stored spectra are first resampled onto `grid`; the result is then
/// piecewise linear in concentration of `ln σ` and `ln εr`. A tabulated
/// concentration returns the stored (resampled) spectrum unchanged.
pub fn interpolate_spectrum(
    db: &MaterialDatabase,
    method: Method,
    concentration: Concentration,
    grid: &FrequencyGrid,
) -> Result<MaterialSample> {
    let snapshot = db.snapshot(method);
    let (first, last) = match (snapshot.first(), snapshot.last()) {
        (Some(a), Some(b)) => (a.concentration(), b.concentration()),
        _ => {
            return Err(Error::Usage(format!("no {method} samples in the database")));
        }
    };
    let make = |spectrum| MaterialSample {
        method,
        concentration,
        spectrum,
        provenance: Provenance::Interpolated,
        measured_at: None,
        sample_thickness_mm: None,
    };

    if let Some(knot) = snapshot.iter().find(|s| s.concentration().same_label(concentration)) {
        return Ok(make(knot.spectrum().resample(grid)?));
    }
    if concentration < first || concentration > last {
        return Err(Error::Range(format!(
            "{concentration} lies outside the tabulated {method} range [{first}, {last}]; extrapolation is not supported"
        )));
    }
    let upper = snapshot.partition_point(|s| s.concentration() < concentration);
    let (lo, hi) = (snapshot[upper - 1], snapshot[upper]);
    let t = (concentration.fraction() - lo.concentration().fraction())
        / (hi.concentration().fraction() - lo.concentration().fraction());
    let a = lo.spectrum().resample(grid)?;
    let b = hi.spectrum().resample(grid)?;
    let blend = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(&p, &q)| log_lerp(p, q, t)).collect() };
    let spectrum = DielectricSpectrum::new(
        grid.clone(),
        blend(a.rel_permittivity(), b.rel_permittivity()),
        blend(a.conductivity(), b.conductivity()),
    )?;
    Ok(make(spectrum))
}

/// A place where a property rises with concentration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotoneViolation {
    pub frequency_hz: f64,
    pub property: PropertySelector,
    pub lower_concentration: Concentration,
    pub higher_concentration: Concentration,
    pub value_at_lower: f64,
    pub value_at_higher: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub method: Method,
    pub violations: Vec<MonotoneViolation>,
}

impl MonotonicityReport {
    /// True when both properties fall (or stay flat) with concentration everywhere.
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every (frequency, adjacent concentration pair) where σ or εr increases
/// with concentration.
pub fn validate_monotone_in_concentration(
    db: &MaterialDatabase,
    method: Method,
    grid: &FrequencyGrid,
) -> Result<MonotonicityReport> {
    let snapshot = db.snapshot(method);
    if snapshot.len() < 2 {
        return Err(Error::Usage(format!(
            "monotonicity check needs at least two {method} concentrations, found {}",
            snapshot.len()
        )));
    }
    let spectra = snapshot
        .iter()
        .map(|s| s.spectrum().resample(grid))
        .collect::<Result<Vec<_>>>()?;
    let mut violations = Vec::new();
    for (pair, specs) in snapshot.windows(2).zip(spectra.windows(2)) {
        for (i, &f) in grid.points().iter().enumerate() {
            for property in PropertySelector::ALL {
                let (low, high) = (specs[0].values(property)[i], specs[1].values(property)[i]);
                if high > low {
                    violations.push(MonotoneViolation {
                        frequency_hz: f,
                        property,
                        lower_concentration: pair[0].concentration(),
                        higher_concentration: pair[1].concentration(),
                        value_at_lower: low,
                        value_at_higher: high,
                    });
                }
            }
        }
    }
    Ok(MonotonicityReport { method, violations })
}

/// Relative change between two measurements of one formulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgingReport {
    pub method: Method,
    pub concentration: Concentration,
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    pub frequencies_hz: Vec<f64>,
    /// `(b − a) / a` per frequency.
    pub conductivity_change: Vec<f64>,
    pub permittivity_change: Vec<f64>,
    pub max_abs_conductivity_change: f64,
    pub max_abs_permittivity_change: f64,
}

/// Compares `later` against `earlier` on the earlier sample's grid.
pub fn aging_drift(earlier: &MaterialSample, later: &MaterialSample) -> Result<AgingReport> {
    if earlier.method() != later.method() || !earlier.concentration().same_label(later.concentration()) {
        return Err(Error::Usage(format!(
            "aging comparison needs the same formulation, got {} and {}",
            earlier.label(),
            later.label()
        )));
    }
    let grid = earlier.spectrum().grid();
    let b = later.spectrum().resample(grid)?;
    let a = earlier.spectrum();
    let change = |x: &[f64], y: &[f64]| -> Vec<f64> { x.iter().zip(y).map(|(&p, &q)| (q - p) / p).collect() };
    let conductivity_change = change(a.conductivity(), b.conductivity());
    let permittivity_change = change(a.rel_permittivity(), b.rel_permittivity());
    let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    Ok(AgingReport {
        method: earlier.method(),
        concentration: earlier.concentration(),
        from: earlier.measured_at(),
        to: later.measured_at(),
        frequencies_hz: grid.points().to_vec(),
        max_abs_conductivity_change: max_abs(&conductivity_change),
        max_abs_permittivity_change: max_abs(&permittivity_change),
        conductivity_change,
        permittivity_change,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> FrequencyGrid {
        FrequencyGrid::log_spaced(1e5, 1e8, 7).unwrap()
    }

    fn pct(p: f64) -> Concentration {
        Concentration::from_percent(p).unwrap()
    }

    fn sample(method: Method, percent: f64, sigma: f64, eps: f64) -> MaterialSample {
        let g = grid();
        let n = g.len();
        let spec = DielectricSpectrum::new(g, vec![eps; n], vec![sigma; n]).unwrap();
        MaterialSample::synthetic(method, pct(percent), spec)
    }

    /// σ(c) = 1/c, εr(c) = 10/c.
    fn reciprocal_db() -> MaterialDatabase {
        MaterialDatabase::from_samples((1..=9).map(|k| {
            let c = k as f64 / 10.0;
            sample(Method::OilOnly, k as f64 * 10.0, 1.0 / c, 10.0 / c)
        }))
        .unwrap()
    }

    #[test]
    fn knot_reproduction() {
        let db = reciprocal_db();
        let got = interpolate_spectrum(&db, Method::OilOnly, pct(30.0), &grid()).unwrap();
        let stored = db.snapshot(Method::OilOnly)[2];
        assert_eq!(got.spectrum(), stored.spectrum());
        assert_eq!(got.provenance(), Provenance::Interpolated);
    }

    #[test]
    fn log_linear_midpoint_is_geometric_mean() {
        let db = MaterialDatabase::from_samples([
            sample(Method::OilOnly, 20.0, 4.0, 40.0),
            sample(Method::OilOnly, 30.0, 1.0, 10.0),
        ])
        .unwrap();
        let got = interpolate_spectrum(&db, Method::OilOnly, pct(25.0), &grid()).unwrap();
        for &s in got.spectrum().conductivity() {
            assert!((s - 2.0).abs() < 1e-12, "{s}");
        }
        for &e in got.spectrum().rel_permittivity() {
            assert!((e - 20.0).abs() < 1e-12, "{e}");
        }
    }

    #[test]
    fn refuses_extrapolation() {
        let db = MaterialDatabase::from_samples([
            sample(Method::OilOnly, 20.0, 4.0, 40.0),
            sample(Method::OilOnly, 30.0, 1.0, 10.0),
        ])
        .unwrap();
        let err = interpolate_spectrum(&db, Method::OilOnly, pct(35.0), &grid()).unwrap_err();
        assert!(matches!(err, Error::Range(_)));
        assert!(interpolate_spectrum(&db, Method::OilKerosene, pct(25.0), &grid()).is_err());
    }

    #[test]
    fn reciprocal_db_is_monotone() {
        let report = validate_monotone_in_concentration(&reciprocal_db(), Method::OilOnly, &grid()).unwrap();
        assert!(report.is_consistent());
    }

    #[test]
    fn swapped_pair_is_flagged_everywhere() {
        let mut samples: Vec<MaterialSample> = (1..=9)
            .map(|k| {
                let c = k as f64 / 10.0;
                sample(Method::OilOnly, k as f64 * 10.0, 1.0 / c, 10.0 / (c * c))
            })
            .collect();
        // Swap conductivity of 20% and 30%, keep permittivity.
        samples[1] = sample(Method::OilOnly, 20.0, 1.0 / 0.3, 10.0 / 0.04);
        samples[2] = sample(Method::OilOnly, 30.0, 1.0 / 0.2, 10.0 / 0.09);
        let db = MaterialDatabase::from_samples(samples).unwrap();
        let report = validate_monotone_in_concentration(&db, Method::OilOnly, &grid()).unwrap();
        assert_eq!(report.violations.len(), grid().len());
        for v in &report.violations {
            assert_eq!(v.property, PropertySelector::Conductivity);
            assert_eq!(v.lower_concentration, pct(20.0));
            assert_eq!(v.higher_concentration, pct(30.0));
        }
    }

    #[test]
    fn monotone_check_needs_two_concentrations() {
        let db = MaterialDatabase::from_samples([sample(Method::OilOnly, 20.0, 4.0, 40.0)]).unwrap();
        assert!(validate_monotone_in_concentration(&db, Method::OilOnly, &grid()).is_err());
    }

    #[test]
    fn aging_self_comparison_is_zero() {
        let a = sample(Method::OilKerosene, 60.0, 0.05, 20.0);
        let r = aging_drift(&a, &a).unwrap();
        assert!(r.conductivity_change.iter().all(|&d| d == 0.0));
        assert_eq!(r.max_abs_permittivity_change, 0.0);
    }

    #[test]
    fn aging_uniform_scaling() {
        let a = sample(Method::OilKerosene, 60.0, 0.05, 20.0);
        let b = sample(Method::OilKerosene, 60.0, 0.05 * 1.05, 20.0);
        let r = aging_drift(&a, &b).unwrap();
        for d in &r.conductivity_change {
            assert!((d - 0.05).abs() < 1e-12);
        }
        assert!((r.max_abs_conductivity_change - 0.05).abs() < 1e-12);
        assert_eq!(r.max_abs_permittivity_change, 0.0);
    }

    #[test]
    fn aging_rejects_different_formulations() {
        let a = sample(Method::OilKerosene, 60.0, 0.05, 20.0);
        let b = sample(Method::OilOnly, 60.0, 0.05, 20.0);
        assert!(matches!(aging_drift(&a, &b), Err(Error::Usage(_))));
    }
}
