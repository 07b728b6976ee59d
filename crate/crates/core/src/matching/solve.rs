use serde::Serialize;

use super::{relative_error_curve, FrequencyBand, MatchOptions, PropertySelector};
use crate::dispersion::{log_lerp, tissue_spectrum, DielectricSpectrum, FrequencyGrid, TissueModel};
use crate::error::{Error, Result};
use crate::materials::{interpolate_spectrum, Concentration, MaterialDatabase, Method};

const INV_PHI: f64 = 0.618_033_988_749_894_9;
const SEARCH_TOLERANCE: f64 = 1e-7;

/// Golden-section minimisation of a unimodal `f` on `[a, b]`.
///
/// Returns the best `(x, f(x))` seen, including both end points.
pub fn golden_section_min(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (mut lo, mut hi) = (a, b);
    let mut best = [(a, f(a)), (b, f(b))]
        .into_iter()
        .min_by(|x, y| x.1.total_cmp(&y.1).then(x.0.total_cmp(&y.0)))
        .unwrap();
    let keep = |x: f64, fx: f64, best: &mut (f64, f64)| {
        if fx < best.1 || (fx == best.1 && x < best.0) {
            *best = (x, fx);
        }
    };
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    keep(c, fc, &mut best);
    keep(d, fd, &mut best);
    while hi - lo > tol {
        if fc <= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
            keep(c, fc, &mut best);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
            keep(d, fd, &mut best);
        }
    }
    best
}

/// Result of a continuous concentration search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationFit {
    pub method: Method,
    pub concentration: Concentration,
    /// Achieved minimax relative error over the band.
    pub worst_error: f64,
    /// Whether `worst_error` is below the threshold.
    pub feasible: bool,
}

/// Concentration minimising the worst relative error over `band`.
pub fn solve_concentration(
    db: &MaterialDatabase,
    method: Method,
    tissue: &TissueModel,
    property: PropertySelector,
    band: FrequencyBand,
    options: &MatchOptions,
) -> Result<ConcentrationFit> {
    let spec = tissue_spectrum(tissue, &options.grid)?;
    solve_concentration_for_spectrum(db, method, &spec, property, band, options.threshold)
}

/// Same as [`solve_concentration`] against an explicit target spectrum.
///
/// The inner maximum runs over the target's grid points inside `band`. The
/// log-linear interpolation between neighbouring knots makes the objective
/// quasi-convex on each knot interval, so every interval is searched with
/// golden-section and the knots themselves are always evaluated.
pub fn solve_concentration_for_spectrum(
    db: &MaterialDatabase,
    method: Method,
    target: &DielectricSpectrum,
    property: PropertySelector,
    band: FrequencyBand,
    threshold: f64,
) -> Result<ConcentrationFit> {
    band.check_within(target.grid())?;
    let snapshot = db.snapshot(method);
    if snapshot.len() < 2 {
        return Err(Error::Usage(format!(
            "concentration search needs at least two {method} concentrations, found {}",
            snapshot.len()
        )));
    }
    let inside: Vec<usize> = target
        .frequencies()
        .iter()
        .enumerate()
        .filter(|(_, &f)| f >= band.fmin_hz && f <= band.fmax_hz)
        .map(|(i, _)| i)
        .collect();
    if inside.is_empty() {
        return Err(Error::Usage("band contains no evaluation grid points".into()));
    }
    let sub_grid = FrequencyGrid::with_bounds(
        inside.iter().map(|&i| target.frequencies()[i]).collect(),
        crate::dispersion::GridBounds::new(target.grid().first() * 0.5, target.grid().last() * 2.0)?,
    )?;
    let reference: Vec<f64> = inside.iter().map(|&i| target.values(property)[i]).collect();

    let knots = snapshot
        .iter()
        .map(|s| {
            let values = s.spectrum().resample(&sub_grid)?.values(property).to_vec();
            Ok((s.concentration().fraction(), values))
        })
        .collect::<Result<Vec<_>>>()?;

    let worst = |values: &mut dyn Iterator<Item = f64>| -> f64 {
        values
            .zip(&reference)
            .map(|(v, &x)| (v - x).abs() / x)
            .fold(0.0, f64::max)
    };

    let mut best = (knots[0].0, f64::INFINITY);
    let mut consider = |c: f64, e: f64| {
        if e < best.1 || (e == best.1 && c < best.0) {
            best = (c, e);
        }
    };
    for (c, values) in &knots {
        consider(*c, worst(&mut values.iter().copied()));
    }
    for pair in knots.windows(2) {
        let (c0, v0) = (&pair[0].0, &pair[0].1);
        let (c1, v1) = (&pair[1].0, &pair[1].1);
        let objective = |c: f64| {
            let t = (c - c0) / (c1 - c0);
            worst(&mut v0.iter().zip(v1).map(|(&a, &b)| log_lerp(a, b, t)))
        };
        let (c, e) = golden_section_min(objective, *c0, *c1, SEARCH_TOLERANCE);
        consider(c, e);
    }

    let concentration = Concentration::new(best.0)?;
    // Re-evaluate through the public interpolation path so the reported error
    // is exactly what a user of the interpolated spectrum would see.
    let sample = interpolate_spectrum(db, method, concentration, &sub_grid)?;
    let sub_target = DielectricSpectrum::new(
        sub_grid.clone(),
        inside.iter().map(|&i| target.rel_permittivity()[i]).collect(),
        inside.iter().map(|&i| target.conductivity()[i]).collect(),
    )?;
    let curve = relative_error_curve(sample.spectrum(), &sub_target, property)?;
    let worst_error = curve.errors.iter().copied().fold(0.0, f64::max);
    Ok(ConcentrationFit {
        method,
        concentration,
        worst_error,
        feasible: worst_error < threshold,
    })
}
