use serde::Serialize;

use crate::dispersion::{DielectricSpectrum, PropertySelector};
use crate::error::{Error, Result};

/// Relative matching error per frequency.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorCurve {
    pub frequencies_hz: Vec<f64>,
    pub errors: Vec<f64>,
}

impl ErrorCurve {
    pub fn new(frequencies_hz: Vec<f64>, errors: Vec<f64>) -> Result<Self> {
        if frequencies_hz.len() != errors.len() {
            return Err(Error::validation(
                "error curve",
                "frequency and error arrays differ in length",
            ));
        }
        if frequencies_hz.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation(
                "error curve",
                "frequencies must be strictly increasing",
            ));
        }
        Ok(ErrorCurve { frequencies_hz, errors })
    }

    pub fn len(&self) -> usize {
        self.errors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.errors.is_empty()
    }
}

/// `|x_sample − x_tissue| / x_tissue` pointwise. Both spectra must share a grid.
pub fn relative_error_curve(
    sample: &DielectricSpectrum,
    tissue: &DielectricSpectrum,
    property: PropertySelector,
) -> Result<ErrorCurve> {
    if sample.grid() != tissue.grid() {
        return Err(Error::Usage(
            "sample and tissue spectra are on different grids; resample first".into(),
        ));
    }
    let errors = sample
        .values(property)
        .iter()
        .zip(tissue.values(property))
        .zip(tissue.frequencies())
        .map(|((&s, &t), &f)| {
            if t == 0.0 {
                Err(Error::UndefinedError(f))
            } else {
                Ok((s - t).abs() / t.abs())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ErrorCurve {
        frequencies_hz: tissue.frequencies().to_vec(),
        errors,
    })
}

/// A sub-threshold frequency interval of an error curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    /// Largest error at the grid points inside the band.
    pub worst_error: f64,
}

/// Maximal runs of grid points with `error < threshold`.
///
/// Each run is widened to where the error curve, interpolated linearly in
/// `log f`, crosses the threshold between the last failing and first passing
/// grid point. Runs touching the end of the grid stop at the end point.
/// Curves with fewer than two points yield no bands.
pub fn find_bands(curve: &ErrorCurve, threshold: f64) -> Vec<Band> {
    let f = &curve.frequencies_hz;
    let e = &curve.errors;
    let n = e.len();
    let mut bands = Vec::new();
    if n < 2 {
        return bands;
    }
    let passes = |i: usize| e[i] < threshold;
    let crossing = |outside: usize, inside: usize| -> f64 {
        let (eo, ei) = (e[outside], e[inside]);
        let t = if eo.is_finite() {
            ((eo - threshold) / (eo - ei)).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let (lo, li) = (f[outside].log10(), f[inside].log10());
        10f64.powf(lo + t * (li - lo))
    };

    let mut i = 0;
    while i < n {
        if !passes(i) {
            i += 1;
            continue;
        }
        let start = i;
        while i + 1 < n && passes(i + 1) {
            i += 1;
        }
        let end = i;
        let fmin = if start == 0 { f[0] } else { crossing(start - 1, start) };
        let fmax = if end == n - 1 { f[n - 1] } else { crossing(end + 1, end) };
        let worst_error = e[start..=end].iter().copied().fold(0.0, f64::max);
        bands.push(Band {
            fmin_hz: fmin,
            fmax_hz: fmax,
            worst_error,
        });
        i += 1;
    }
    bands
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::FrequencyGrid;

    fn curve(errors: Vec<f64>) -> ErrorCurve {
        let grid = FrequencyGrid::log_spaced(1e5, 1e8, errors.len()).unwrap();
        ErrorCurve::new(grid.points().to_vec(), errors).unwrap()
    }

    fn spectrum(scale: f64) -> DielectricSpectrum {
        let grid = FrequencyGrid::log_spaced(1e5, 1e8, 5).unwrap();
        let eps = [80.0, 60.0, 40.0, 30.0, 25.0];
        let sigma = [0.1, 0.2, 0.3, 0.4, 0.5];
        DielectricSpectrum::new(
            grid,
            eps.iter().map(|v| v * scale).collect(),
            sigma.iter().map(|v| v * scale).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_spectra_have_zero_error() {
        let c = relative_error_curve(&spectrum(1.0), &spectrum(1.0), PropertySelector::Conductivity).unwrap();
        assert!(c.errors.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn scaled_spectra_have_constant_error() {
        for (scale, expected) in [(1.1, 0.10), (0.5, 0.50)] {
            for p in PropertySelector::ALL {
                let c = relative_error_curve(&spectrum(scale), &spectrum(1.0), p).unwrap();
                for e in c.errors {
                    assert!((e - expected).abs() < 1e-12, "{e}");
                }
            }
        }
    }

    #[test]
    fn mismatched_grids_rejected() {
        let other = DielectricSpectrum::new(
            FrequencyGrid::log_spaced(1e5, 1e7, 5).unwrap(),
            vec![10.0; 5],
            vec![1.0; 5],
        )
        .unwrap();
        assert!(relative_error_curve(&spectrum(1.0), &other, PropertySelector::Permittivity).is_err());
    }

    #[test]
    fn constant_sub_threshold_spans_grid() {
        let bands = find_bands(&curve(vec![0.05; 201]), 0.10);
        assert_eq!(bands.len(), 1);
        assert_eq!(bands[0].fmin_hz, 1e5);
        assert_eq!(bands[0].fmax_hz, 1e8);
        assert_eq!(bands[0].worst_error, 0.05);
    }

    #[test]
    fn threshold_is_strict() {
        assert!(find_bands(&curve(vec![0.10; 50]), 0.10).is_empty());
    }

    #[test]
    fn interior_band_edges_are_interpolated() {
        // Error 0.2 everywhere except 0.0 at indices 2..=3 of a 6-point grid.
        let c = curve(vec![0.2, 0.2, 0.0, 0.0, 0.2, 0.2]);
        let bands = find_bands(&c, 0.10);
        assert_eq!(bands.len(), 1);
        let f = &c.frequencies_hz;
        let mid = |a: f64, b: f64| 10f64.powf(0.5 * (a.log10() + b.log10()));
        assert!((bands[0].fmin_hz / mid(f[1], f[2]) - 1.0).abs() < 1e-12);
        assert!((bands[0].fmax_hz / mid(f[3], f[4]) - 1.0).abs() < 1e-12);
        assert_eq!(bands[0].worst_error, 0.0);
    }

    #[test]
    fn multiple_disjoint_bands() {
        let c = curve(vec![0.05, 0.3, 0.3, 0.05, 0.06, 0.3, 0.01]);
        let bands = find_bands(&c, 0.10);
        assert_eq!(bands.len(), 3);
        assert_eq!(bands[0].fmin_hz, 1e5);
        assert_eq!(bands[2].fmax_hz, 1e8);
        assert_eq!(bands[1].worst_error, 0.06);
    }

    #[test]
    fn short_curves_yield_nothing() {
        let c = ErrorCurve::new(vec![1e6], vec![0.0]).unwrap();
        assert!(find_bands(&c, 0.1).is_empty());
    }
}
