//! Tissue dielectric properties from multi-pole Cole-Cole dispersion models.
//!
//! The complex relative permittivity of a tissue is
//!
//! ```text
//! ε̂(ω) = ε∞ + Σₙ Δεₙ / (1 + (jωτₙ)^(1−αₙ)) + σᵢ / (jωε₀)
//! ```
//!
//! and the reported pair is `εr = Re ε̂` with conductivity `σ = −ωε₀ Im ε̂`.
//! Parameter sets live in an external JSON library so tissue data can be
//! swapped without touching code; a default library is bundled.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permittivity in F/m (CODATA 2018).
pub const VACUUM_PERMITTIVITY: f64 = 8.8541878128e-12;

pub const DEFAULT_FMIN_HZ: f64 = 1e5;
pub const DEFAULT_FMAX_HZ: f64 = 1e8;
pub const DEFAULT_GRID_POINTS: usize = 201;
pub const MAX_POLES: usize = 4;

const BUNDLED_LIBRARY: &str = include_str!("../data/tissues.json");

/// One relaxation term of a Cole-Cole model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pole {
    pub delta_eps: f64,
    #[serde(rename = "tau_seconds")]
    pub tau: f64,
    pub alpha: f64,
}

impl Pole {
    pub fn new(delta_eps: f64, tau: f64, alpha: f64) -> Self {
        Pole { delta_eps, tau, alpha }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColeColeParams {
    pub eps_inf: f64,
    pub poles: Vec<Pole>,
    pub sigma_ionic: f64,
}

impl ColeColeParams {
    pub fn new(eps_inf: f64, poles: Vec<Pole>, sigma_ionic: f64) -> Result<Self> {
        let params = ColeColeParams {
            eps_inf,
            poles,
            sigma_ionic,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.check()
            .map_err(|message| Error::validation("dispersion parameters", message))
    }

    /// Returns a message naming the offending parameter.
    fn check(&self) -> std::result::Result<(), String> {
        if !(self.eps_inf.is_finite() && self.eps_inf >= 1.0) {
            return Err(format!("eps_inf = {} must be finite and >= 1", self.eps_inf));
        }
        if !(self.sigma_ionic.is_finite() && self.sigma_ionic >= 0.0) {
            return Err(format!("sigma_ionic = {} must be finite and >= 0", self.sigma_ionic));
        }
        if self.poles.is_empty() || self.poles.len() > MAX_POLES {
            return Err(format!(
                "pole count {} must be between 1 and {MAX_POLES}",
                self.poles.len()
            ));
        }
        for (k, pole) in self.poles.iter().enumerate() {
            let n = k + 1;
            if !(pole.delta_eps.is_finite() && pole.delta_eps >= 0.0) {
                return Err(format!("pole {n}: delta_eps = {} must be >= 0", pole.delta_eps));
            }
            if !(pole.tau.is_finite() && pole.tau > 0.0) {
                return Err(format!("pole {n}: tau = {} must be > 0", pole.tau));
            }
            if !(pole.alpha.is_finite() && (0.0..1.0).contains(&pole.alpha)) {
                return Err(format!("pole {n}: alpha = {} outside [0, 1)", pole.alpha));
            }
        }
        Ok(())
    }
}

/// Relative permittivity and conductivity at a single frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DielectricPoint {
    pub rel_permittivity: f64,
    /// S/m
    pub conductivity: f64,
}

/// Evaluates the dispersion model at `frequency_hz`.
///
/// Uses the principal branch of `(jωτ)^(1−α)`. Conductivity is accumulated as
/// `σᵢ` plus the non-negative dielectric-loss terms, so it never drops below
/// the ionic conductivity.
pub fn evaluate_point(params: &ColeColeParams, frequency_hz: f64) -> Result<DielectricPoint> {
    if !(frequency_hz.is_finite() && frequency_hz > 0.0) {
        return Err(Error::Range(format!(
            "frequency {frequency_hz} Hz must be finite and positive"
        )));
    }
    params.validate()?;

    let omega = 2.0 * PI * frequency_hz;
    let mut rel_permittivity = params.eps_inf;
    let mut loss = 0.0;
    for (k, pole) in params.poles.iter().enumerate() {
        let exponent = 1.0 - pole.alpha;
        let z = Complex64::from_polar((omega * pole.tau).powf(exponent), exponent * PI / 2.0);
        let term = pole.delta_eps / (Complex64::new(1.0, 0.0) + z);
        if !(term.re.is_finite() && term.im.is_finite()) {
            return Err(Error::ModelEvaluation {
                pole: k + 1,
                message: format!("non-finite response at {frequency_hz} Hz"),
            });
        }
        rel_permittivity += term.re;
        // Im of each term is <= 0 on the principal branch.
        loss += (-term.im).max(0.0);
    }
    let conductivity = params.sigma_ionic + omega * VACUUM_PERMITTIVITY * loss;
    if !(rel_permittivity.is_finite() && conductivity.is_finite()) {
        return Err(Error::ModelEvaluation {
            pole: params.poles.len(),
            message: format!("non-finite sum at {frequency_hz} Hz"),
        });
    }
    Ok(DielectricPoint {
        rel_permittivity,
        conductivity,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TissueId {
    CorticalBone,
    BoneMarrow,
    SkinDry,
    SkinWet,
    Fat,
    Muscle,
}

impl TissueId {
    pub const ALL: [TissueId; 6] = [
        TissueId::CorticalBone,
        TissueId::BoneMarrow,
        TissueId::SkinDry,
        TissueId::SkinWet,
        TissueId::Fat,
        TissueId::Muscle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TissueId::SkinDry => "skin_dry",
            TissueId::SkinWet => "skin_wet",
            TissueId::Muscle => "muscle",
            TissueId::Fat => "fat",
            TissueId::CorticalBone => "cortical_bone",
            TissueId::BoneMarrow => "bone_marrow",
        }
    }

    /// Human-readable name for reports.
    pub fn display_name(self) -> &'static str {
        match self {
            TissueId::SkinDry => "Dry Skin",
            TissueId::SkinWet => "Wet Skin",
            TissueId::Muscle => "Muscle",
            TissueId::Fat => "Fat",
            TissueId::CorticalBone => "Cortical Bone",
            TissueId::BoneMarrow => "Bone Marrow",
        }
    }
}

impl fmt::Display for TissueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TissueId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TissueId::ALL.into_iter().find(|id| id.as_str() == s).ok_or_else(|| {
            Error::Usage(format!(
                "unknown tissue `{s}` (expected one of {})",
                TissueId::ALL.map(TissueId::as_str).join(", ")
            ))
        })
    }
}

/// Which dielectric quantity a comparison looks at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertySelector {
    Conductivity,
    Permittivity,
}

impl PropertySelector {
    pub const ALL: [PropertySelector; 2] = [PropertySelector::Conductivity, PropertySelector::Permittivity];

    pub fn as_str(self) -> &'static str {
        match self {
            PropertySelector::Conductivity => "conductivity",
            PropertySelector::Permittivity => "permittivity",
        }
    }
}

impl fmt::Display for PropertySelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PropertySelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conductivity" | "sigma" => Ok(PropertySelector::Conductivity),
            "permittivity" | "eps" => Ok(PropertySelector::Permittivity),
            _ => Err(Error::Usage(format!(
                "unknown property `{s}` (expected conductivity or permittivity)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TissueModel {
    pub tissue_id: TissueId,
    pub params: ColeColeParams,
    pub source_label: String,
}

/// Inclusive frequency limits a grid must respect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridBounds {
    pub min_hz: f64,
    pub max_hz: f64,
}

impl Default for GridBounds {
    fn default() -> Self {
        GridBounds {
            min_hz: DEFAULT_FMIN_HZ,
            max_hz: DEFAULT_FMAX_HZ,
        }
    }
}

impl GridBounds {
    pub fn new(min_hz: f64, max_hz: f64) -> Result<Self> {
        if !(min_hz.is_finite() && max_hz.is_finite() && min_hz > 0.0 && min_hz < max_hz) {
            return Err(Error::Range(format!(
                "grid bounds [{min_hz}, {max_hz}] Hz must satisfy 0 < min < max"
            )));
        }
        Ok(GridBounds { min_hz, max_hz })
    }

    pub fn contains(&self, frequency_hz: f64) -> bool {
        frequency_hz >= self.min_hz && frequency_hz <= self.max_hz
    }
}

/// Strictly increasing list of frequencies in Hz.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        Self::with_bounds(points, GridBounds::default())
    }

    pub fn with_bounds(points: Vec<f64>, bounds: GridBounds) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::validation("frequency grid", "grid is empty"));
        }
        for (i, &f) in points.iter().enumerate() {
            if !f.is_finite() || !bounds.contains(f) {
                return Err(Error::Range(format!(
                    "grid point {i} ({f} Hz) outside [{}, {}] Hz",
                    bounds.min_hz, bounds.max_hz
                )));
            }
            if i > 0 && f <= points[i - 1] {
                return Err(Error::validation(
                    "frequency grid",
                    format!("point {i} ({f} Hz) is not above its predecessor"),
                ));
            }
        }
        Ok(FrequencyGrid { points })
    }

    /// `n` points equally spaced in log frequency, endpoints included exactly.
    pub fn log_spaced(fmin_hz: f64, fmax_hz: f64, n: usize) -> Result<Self> {
        Self::log_spaced_within(fmin_hz, fmax_hz, n, GridBounds::default())
    }

    pub fn log_spaced_within(fmin_hz: f64, fmax_hz: f64, n: usize, bounds: GridBounds) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("frequency grid", "point count must be positive"));
        }
        if n == 1 {
            return Self::with_bounds(vec![fmin_hz], bounds);
        }
        if !(fmin_hz > 0.0 && fmin_hz < fmax_hz) {
            return Err(Error::Range(format!(
                "grid limits [{fmin_hz}, {fmax_hz}] Hz must satisfy 0 < fmin < fmax"
            )));
        }
        let (lo, hi) = (fmin_hz.log10(), fmax_hz.log10());
        let step = (hi - lo) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| 10f64.powf(lo + step * i as f64)).collect();
        points[0] = fmin_hz;
        points[n - 1] = fmax_hz;
        Self::with_bounds(points, bounds)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.points[0]
    }

    pub fn last(&self) -> f64 {
        self.points[self.points.len() - 1]
    }
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        FrequencyGrid::log_spaced(DEFAULT_FMIN_HZ, DEFAULT_FMAX_HZ, DEFAULT_GRID_POINTS).expect("default grid is valid")
    }
}

/// Conductivity and relative permittivity sampled on a frequency grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DielectricSpectrum {
    grid: FrequencyGrid,
    rel_permittivity: Vec<f64>,
    conductivity: Vec<f64>,
}

impl DielectricSpectrum {
    pub fn new(grid: FrequencyGrid, rel_permittivity: Vec<f64>, conductivity: Vec<f64>) -> Result<Self> {
        if rel_permittivity.len() != grid.len() || conductivity.len() != grid.len() {
            return Err(Error::validation(
                "dielectric spectrum",
                format!(
                    "array lengths ({}, {}) differ from grid length {}",
                    rel_permittivity.len(),
                    conductivity.len(),
                    grid.len()
                ),
            ));
        }
        for (i, (&eps, &sigma)) in rel_permittivity.iter().zip(&conductivity).enumerate() {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::validation(
                    "dielectric spectrum",
                    format!("conductivity {sigma} S/m at point {i} must be positive"),
                ));
            }
            if !(eps.is_finite() && eps >= 1.0) {
                return Err(Error::validation(
                    "dielectric spectrum",
                    format!("relative permittivity {eps} at point {i} must be >= 1"),
                ));
            }
        }
        Ok(DielectricSpectrum {
            grid,
            rel_permittivity,
            conductivity,
        })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn frequencies(&self) -> &[f64] {
        self.grid.points()
    }

    pub fn rel_permittivity(&self) -> &[f64] {
        &self.rel_permittivity
    }

    pub fn conductivity(&self) -> &[f64] {
        &self.conductivity
    }

    pub fn values(&self, property: PropertySelector) -> &[f64] {
        match property {
            PropertySelector::Conductivity => &self.conductivity,
            PropertySelector::Permittivity => &self.rel_permittivity,
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Resamples onto `target` by piecewise-linear interpolation of
    /// `ln εr` and `ln σ` against `ln f`.
    ///
    /// Target points that coincide with stored points copy the stored values
    /// unchanged, so resampling onto the spectrum's own grid is the identity.
    /// Extrapolation is refused.
    pub fn resample(&self, target: &FrequencyGrid) -> Result<DielectricSpectrum> {
        if target == &self.grid {
            return Ok(self.clone());
        }
        let src = self.grid.points();
        if target.first() < self.grid.first() || target.last() > self.grid.last() {
            return Err(Error::Range(format!(
                "cannot resample spectrum covering [{}, {}] Hz onto [{}, {}] Hz without extrapolation",
                self.grid.first(),
                self.grid.last(),
                target.first(),
                target.last()
            )));
        }
        let mut eps = Vec::with_capacity(target.len());
        let mut sigma = Vec::with_capacity(target.len());
        for &f in target.points() {
            let upper = src.partition_point(|&x| x < f);
            if upper < src.len() && src[upper] == f {
                eps.push(self.rel_permittivity[upper]);
                sigma.push(self.conductivity[upper]);
                continue;
            }
            // f lies strictly between src[upper - 1] and src[upper].
            let lower = upper - 1;
            let t = (f.ln() - src[lower].ln()) / (src[upper].ln() - src[lower].ln());
            eps.push(log_lerp(self.rel_permittivity[lower], self.rel_permittivity[upper], t));
            sigma.push(log_lerp(self.conductivity[lower], self.conductivity[upper], t));
        }
        DielectricSpectrum::new(target.clone(), eps, sigma)
    }
}

/// Geometric interpolation `a^(1−t) · b^t`, clamped to the bracket.
pub(crate) fn log_lerp(a: f64, b: f64, t: f64) -> f64 {
    let value = ((1.0 - t) * a.ln() + t * b.ln()).exp();
    value.clamp(a.min(b), a.max(b))
}

/// Evaluates `model` at every grid point.
pub fn tissue_spectrum(model: &TissueModel, grid: &FrequencyGrid) -> Result<DielectricSpectrum> {
    let mut eps = Vec::with_capacity(grid.len());
    let mut sigma = Vec::with_capacity(grid.len());
    for (index, &f) in grid.points().iter().enumerate() {
        let point = evaluate_point(&model.params, f).map_err(|e| Error::AtGridPoint {
            index,
            frequency_hz: f,
            source: Box::new(e),
        })?;
        eps.push(point.rel_permittivity);
        sigma.push(point.conductivity);
    }
    DielectricSpectrum::new(grid.clone(), eps, sigma)
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct LibraryFile {
    schema_version: u32,
    tissues: Vec<TissueRecord>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct TissueRecord {
    tissue_id: TissueId,
    eps_inf: f64,
    poles: Vec<Pole>,
    sigma_ionic: f64,
    source_label: String,
}

/// Validated set of tissue models, at most one per tissue.
#[derive(Debug, Clone, PartialEq)]
pub struct TissueLibrary {
    models: BTreeMap<TissueId, TissueModel>,
}

impl TissueLibrary {
    /// The parameter set shipped with the crate.
    pub fn bundled() -> Self {
        Self::from_json_str(BUNDLED_LIBRARY).expect("bundled tissue library is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: LibraryFile = serde_json::from_str(text).map_err(json_parse_error)?;
        if file.schema_version != 1 {
            return Err(Error::Schema(format!(
                "unsupported tissue library schema_version {}",
                file.schema_version
            )));
        }
        let mut models = BTreeMap::new();
        for record in file.tissues {
            let id = record.tissue_id;
            let params = ColeColeParams {
                eps_inf: record.eps_inf,
                poles: record.poles,
                sigma_ionic: record.sigma_ionic,
            };
            params
                .check()
                .map_err(|message| Error::validation(format!("tissue {id}"), message))?;
            let model = TissueModel {
                tissue_id: id,
                params,
                source_label: record.source_label,
            };
            if models.insert(id, model).is_some() {
                return Err(Error::validation(
                    format!("tissue {id}"),
                    "duplicate tissue_id in library",
                ));
            }
        }
        Ok(TissueLibrary { models })
    }

    pub fn from_models(models: impl IntoIterator<Item = TissueModel>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for model in models {
            let id = model.tissue_id;
            model
                .params
                .check()
                .map_err(|message| Error::validation(format!("tissue {id}"), message))?;
            if map.insert(id, model).is_some() {
                return Err(Error::validation(format!("tissue {id}"), "duplicate tissue_id"));
            }
        }
        Ok(TissueLibrary { models: map })
    }

    pub fn to_json_string(&self) -> String {
        let file = LibraryFile {
            schema_version: 1,
            tissues: self
                .models
                .values()
                .map(|m| TissueRecord {
                    tissue_id: m.tissue_id,
                    eps_inf: m.params.eps_inf,
                    poles: m.params.poles.clone(),
                    sigma_ionic: m.params.sigma_ionic,
                    source_label: m.source_label.clone(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("library serializes")
    }

    pub fn get(&self, id: TissueId) -> Option<&TissueModel> {
        self.models.get(&id)
    }

    pub fn require(&self, id: TissueId) -> Result<&TissueModel> {
        self.get(id)
            .ok_or_else(|| Error::Usage(format!("tissue {id} is not in the tissue library")))
    }

    pub fn iter(&self) -> impl Iterator<Item = &TissueModel> {
        self.models.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = TissueId> + '_ {
        self.models.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }
}

fn json_parse_error(err: serde_json::Error) -> Error {
    let message = err.to_string();
    let field = message.split('`').nth(1).map(str::to_owned).unwrap_or_default();
    Error::Parse {
        line: err.line(),
        field,
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn debye(eps_inf: f64, delta_eps: f64, tau: f64, sigma: f64) -> ColeColeParams {
        ColeColeParams::new(eps_inf, vec![Pole::new(delta_eps, tau, 0.0)], sigma).unwrap()
    }

    #[test]
    fn static_limit_single_pole() {
        let params = debye(4.0, 50.0, 1e-9, 0.2);
        let f = 1e-3 / (2.0 * PI * 1e-9);
        let p = evaluate_point(&params, f).unwrap();
        assert!((p.rel_permittivity / 54.0 - 1.0).abs() < 1e-4);
        assert!((p.conductivity / 0.2 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn debye_midpoint_is_exact_half() {
        let params = debye(4.0, 50.0, 1e-8, 0.0);
        let f = 1.0 / (2.0 * PI * 1e-8);
        let p = evaluate_point(&params, f).unwrap();
        assert!((p.rel_permittivity - 29.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_positive_frequency() {
        let params = debye(4.0, 50.0, 1e-8, 0.0);
        assert!(matches!(evaluate_point(&params, 0.0), Err(Error::Range(_))));
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(ColeColeParams::new(0.5, vec![Pole::new(1.0, 1e-9, 0.0)], 0.0).is_err());
        assert!(ColeColeParams::new(2.0, vec![], 0.0).is_err());
        assert!(ColeColeParams::new(2.0, vec![Pole::new(1.0, 1e-9, 0.0); 5], 0.0).is_err());
        assert!(ColeColeParams::new(2.0, vec![Pole::new(1.0, 1e-9, 1.0)], 0.0).is_err());
        assert!(ColeColeParams::new(2.0, vec![Pole::new(-1.0, 1e-9, 0.0)], 0.0).is_err());
        assert!(ColeColeParams::new(2.0, vec![Pole::new(1.0, 0.0, 0.0)], 0.0).is_err());
        assert!(ColeColeParams::new(2.0, vec![Pole::new(1.0, 1e-9, 0.0)], -0.1).is_err());
    }

    #[test]
    fn default_grid_shape() {
        let grid = FrequencyGrid::default();
        assert_eq!(grid.len(), 201);
        assert_eq!(grid.first(), 1e5);
        assert_eq!(grid.last(), 1e8);
    }

    #[test]
    fn grid_rejects_out_of_bounds_and_unsorted() {
        assert!(FrequencyGrid::new(vec![1e5, 2e8]).is_err());
        assert!(FrequencyGrid::new(vec![2e5, 1e5]).is_err());
        assert!(FrequencyGrid::new(vec![1e5, 1e5]).is_err());
        assert!(FrequencyGrid::new(vec![]).is_err());
        let wide = GridBounds::new(1e3, 1e9).unwrap();
        assert!(FrequencyGrid::with_bounds(vec![1e4, 2e8], wide).is_ok());
    }

    #[test]
    fn resample_own_grid_is_identity() {
        let lib = TissueLibrary::bundled();
        let grid = FrequencyGrid::log_spaced(1e5, 1e8, 37).unwrap();
        let spec = tissue_spectrum(lib.get(TissueId::Muscle).unwrap(), &grid).unwrap();
        let copy = FrequencyGrid::new(grid.points().to_vec()).unwrap();
        assert_eq!(spec.resample(&copy).unwrap(), spec);
    }

    #[test]
    fn resample_refuses_extrapolation() {
        let grid = FrequencyGrid::log_spaced(1e6, 1e7, 5).unwrap();
        let spec = DielectricSpectrum::new(grid, vec![10.0; 5], vec![0.1; 5]).unwrap();
        let wider = FrequencyGrid::log_spaced(1e5, 1e7, 5).unwrap();
        assert!(matches!(spec.resample(&wider), Err(Error::Range(_))));
    }

    #[test]
    fn resample_is_power_law_exact() {
        // σ ∝ f^0.5 is a straight line in log-log space.
        let grid = FrequencyGrid::log_spaced(1e5, 1e8, 4).unwrap();
        let sigma: Vec<f64> = grid.points().iter().map(|f| 1e-3 * f.sqrt()).collect();
        let spec = DielectricSpectrum::new(grid, vec![10.0; 4], sigma).unwrap();
        let fine = FrequencyGrid::log_spaced(1e5, 1e8, 31).unwrap();
        let out = spec.resample(&fine).unwrap();
        for (f, s) in fine.points().iter().zip(out.conductivity()) {
            assert!((s / (1e-3 * f.sqrt()) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn spectrum_rejects_non_physical_values() {
        let grid = FrequencyGrid::new(vec![1e6]).unwrap();
        assert!(DielectricSpectrum::new(grid.clone(), vec![0.5], vec![0.1]).is_err());
        assert!(DielectricSpectrum::new(grid.clone(), vec![5.0], vec![0.0]).is_err());
        assert!(DielectricSpectrum::new(grid, vec![5.0, 4.0], vec![0.1]).is_err());
    }

    #[test]
    fn tissue_id_round_trip() {
        for id in TissueId::ALL {
            assert_eq!(id.as_str().parse::<TissueId>().unwrap(), id);
        }
        assert!("liver".parse::<TissueId>().is_err());
    }

    #[test]
    fn library_rejects_unknown_field_with_location() {
        let text = r#"{
  "schema_version": 1,
  "tissues": [
    {"tissue_id": "fat", "eps_inf": 2.5, "poles": [{"delta_eps": 3, "tau_seconds": 1e-11, "alpha": 0.1}],
     "sigma_ionic": 0.01, "source_label": "x", "colour": "yellow"}
  ]
}"#;
        match TissueLibrary::from_json_str(text) {
            Err(Error::Parse { line, field, .. }) => {
                assert_eq!(line, 5);
                assert_eq!(field, "colour");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn library_rejects_alpha_one_naming_tissue() {
        let text = r#"{"schema_version": 1, "tissues": [
            {"tissue_id": "muscle", "eps_inf": 4, "poles": [
                {"delta_eps": 50, "tau_seconds": 7e-12, "alpha": 0.1},
                {"delta_eps": 7000, "tau_seconds": 3.5e-7, "alpha": 1.0}],
             "sigma_ionic": 0.2, "source_label": "x"}]}"#;
        let err = TissueLibrary::from_json_str(text).unwrap_err().to_string();
        assert!(err.contains("muscle"), "{err}");
        assert!(err.contains("pole 2"), "{err}");
        assert!(err.contains("alpha"), "{err}");
    }

    #[test]
    fn library_rejects_duplicates() {
        let record = r#"{"tissue_id": "fat", "eps_inf": 2.5, "poles": [{"delta_eps": 3, "tau_seconds": 1e-11, "alpha": 0.1}], "sigma_ionic": 0.01, "source_label": "x"}"#;
        let text = format!(r#"{{"schema_version": 1, "tissues": [{record}, {record}]}}"#);
        let err = TissueLibrary::from_json_str(&text).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn library_json_round_trip() {
        let lib = TissueLibrary::bundled();
        let again = TissueLibrary::from_json_str(&lib.to_json_string()).unwrap();
        assert_eq!(lib, again);
    }
}
