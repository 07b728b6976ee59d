//! Fabrication recipes: tabulated ingredient amounts, interpolation between
//! columns, batch scaling and the preparation protocol.

mod protocol;
mod tables;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::materials::{Concentration, Method};

pub use protocol::{emit_protocol, ProtocolFormat, ProtocolStep};

/// Minimum time in the mold before demolding.
pub const CURE_MOLD_HOURS: f64 = 8.0;
/// Minimum time for formaldehyde cross-linking to complete.
pub const CURE_TOTAL_DAYS: f64 = 5.0;
pub const INTERPOLATION_WARNING: &str =
    "interpolated — not validated by measurement; amounts blend the neighbouring tabulated formulations linearly";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IngredientName {
    PropyleneGlycol,
    DeionizedWater,
    Gelatin,
    SafflowerOil,
    UltraIvory,
    Formalin,
    PToluicAcid,
    NPropanol,
    OilKeroseneMix,
}

impl IngredientName {
    pub fn as_str(self) -> &'static str {
        match self {
            IngredientName::PropyleneGlycol => "propylene_glycol",
            IngredientName::DeionizedWater => "deionized_water",
            IngredientName::Gelatin => "gelatin",
            IngredientName::SafflowerOil => "safflower_oil",
            IngredientName::UltraIvory => "ultra_ivory",
            IngredientName::Formalin => "formalin",
            IngredientName::PToluicAcid => "p_toluic_acid",
            IngredientName::NPropanol => "n_propanol",
            IngredientName::OilKeroseneMix => "oil_kerosene_mix",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            IngredientName::PropyleneGlycol => "Propylene glycol",
            IngredientName::DeionizedWater => "De-ionized water",
            IngredientName::Gelatin => "Gelatin",
            IngredientName::SafflowerOil => "Safflower oil",
            IngredientName::UltraIvory => "Ultra Ivory (surfactant)",
            IngredientName::Formalin => "Formalin",
            IngredientName::PToluicAcid => "p-Toluic acid",
            IngredientName::NPropanol => "n-Propanol",
            IngredientName::OilKeroseneMix => "Oil-kerosene mix (1:1)",
        }
    }
}

impl fmt::Display for IngredientName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `Parts` is an unnamed but consistent unit: scalable, not convertible.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Unit {
    Parts,
    Grams,
    Milliliters,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Parts => "parts",
            Unit::Grams => "g",
            Unit::Milliliters => "ml",
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "parts" | "part" | "units" => Ok(Unit::Parts),
            "g" | "gram" | "grams" => Ok(Unit::Grams),
            "ml" | "milliliter" | "milliliters" | "millilitre" | "millilitres" => Ok(Unit::Milliliters),
            other => Err(Error::Usage(format!(
                "unknown unit `{other}` (expected parts, g or ml)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Amount {
    pub value: f64,
    pub unit: Unit,
}

impl fmt::Display for Amount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", crate::matching::round_sig(self.value, 6), self.unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ingredient {
    pub name: IngredientName,
    pub amount: Amount,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recipe {
    pub method: Method,
    pub concentration: Concentration,
    /// In table row order.
    pub ingredients: Vec<Ingredient>,
    pub steps: Vec<ProtocolStep>,
    pub cure_mold_hours: f64,
    pub cure_total_days: f64,
    /// True when amounts were blended between tabulated columns.
    pub interpolated: bool,
    /// Product of all scale factors applied since lookup.
    pub scale_factor: f64,
}

impl Recipe {
    fn build(
        method: Method,
        concentration: Concentration,
        ingredients: Vec<Ingredient>,
        interpolated: bool,
        scale_factor: f64,
    ) -> Self {
        let steps = protocol::build_steps(method, &ingredients);
        Recipe {
            method,
            concentration,
            ingredients,
            steps,
            cure_mold_hours: CURE_MOLD_HOURS,
            cure_total_days: CURE_TOTAL_DAYS,
            interpolated,
            scale_factor,
        }
    }

    pub fn amount(&self, name: IngredientName) -> Option<Amount> {
        self.ingredients.iter().find(|i| i.name == name).map(|i| i.amount)
    }

    /// The shared unit of all ingredients, if there is one.
    pub fn common_unit(&self) -> Option<Unit> {
        let first = self.ingredients.first()?.amount.unit;
        self.ingredients.iter().all(|i| i.amount.unit == first).then_some(first)
    }

    /// Sum of all amounts. Only defined for single-unit recipes.
    pub fn total(&self) -> Result<Amount> {
        let unit = self.common_unit().ok_or_else(|| {
            Error::Unit(format!(
                "{} recipe mixes units; its total is not defined without densities",
                self.method
            ))
        })?;
        Ok(Amount {
            value: self.ingredients.iter().map(|i| i.amount.value).sum(),
            unit,
        })
    }

    pub fn warning(&self) -> Option<&'static str> {
        self.interpolated.then_some(INTERPOLATION_WARNING)
    }

    /// Structural checks: ingredient set, positive amounts, cure floors,
    /// contiguous step indices and temperature range.
    pub fn validate(&self) -> Result<()> {
        let ctx = format!("{} {} recipe", self.concentration, self.method);
        let expected: Vec<(IngredientName, Unit)> =
            tables::rows(self.method).iter().map(|r| (r.name, r.unit)).collect();
        let actual: Vec<(IngredientName, Unit)> = self.ingredients.iter().map(|i| (i.name, i.amount.unit)).collect();
        if expected != actual {
            return Err(Error::validation(ctx, "ingredient set does not match the method"));
        }
        if let Some(i) = self
            .ingredients
            .iter()
            .find(|i| !(i.amount.value > 0.0 && i.amount.value.is_finite()))
        {
            return Err(Error::validation(ctx, format!("{} amount must be positive", i.name)));
        }
        if self.cure_mold_hours < CURE_MOLD_HOURS || self.cure_total_days < CURE_TOTAL_DAYS {
            return Err(Error::validation(ctx, "cure times below the cross-linking minimum"));
        }
        for (k, step) in self.steps.iter().enumerate() {
            if step.index != k + 1 {
                return Err(Error::validation(ctx, "protocol step indices are not contiguous"));
            }
            if let Some(t) = step.target_temperature_c {
                if !(0.0..=100.0).contains(&t) {
                    return Err(Error::validation(
                        ctx,
                        format!("step {} temperature {t} °C outside [0, 100]", step.index),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Column index 0..9 if `concentration` is a tabulated 10% step.
fn column(concentration: Concentration) -> Option<usize> {
    let p = concentration.percent();
    let k = (p / 10.0).round();
    ((p - 10.0 * k).abs() < 1e-6 && (1.0..=9.0).contains(&k)).then(|| k as usize - 1)
}

/// Verbatim table column.
pub fn grid_recipe(method: Method, concentration: Concentration) -> Result<Recipe> {
    let col = column(concentration).ok_or(Error::NotTabulated(concentration.fraction()))?;
    let ingredients = tables::rows(method)
        .iter()
        .map(|r| Ingredient {
            name: r.name,
            amount: Amount {
                value: r.amounts[col],
                unit: r.unit,
            },
        })
        .collect();
    Ok(Recipe::build(
        method,
        Concentration::from_percent(10.0 * (col + 1) as f64)?,
        ingredients,
        false,
        1.0,
    ))
}

/// Piecewise-linear blend of the bracketing columns. Tabulated
/// concentrations return the column unchanged and unflagged.
pub fn interpolate_recipe(method: Method, concentration: Concentration) -> Result<Recipe> {
    if column(concentration).is_some() {
        return grid_recipe(method, concentration);
    }
    let x = (concentration.fraction() * 10.0 - 1.0).clamp(0.0, 8.0);
    let lo = (x.floor() as usize).min(7);
    let t = x - lo as f64;
    let ingredients = tables::rows(method)
        .iter()
        .map(|r| {
            let (a, b) = (r.amounts[lo], r.amounts[lo + 1]);
            let value = if a == b { a } else { a + t * (b - a) };
            Ingredient {
                name: r.name,
                amount: Amount { value, unit: r.unit },
            }
        })
        .collect();
    Ok(Recipe::build(method, concentration, ingredients, true, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScaleSpec {
    Factor(f64),
    TargetTotal(Amount),
}

/// Multiplies every amount by one factor. Total targets need a single-unit
/// recipe in the same unit.
pub fn scale_recipe(recipe: &Recipe, spec: ScaleSpec) -> Result<Recipe> {
    let factor = match spec {
        ScaleSpec::Factor(f) => f,
        ScaleSpec::TargetTotal(target) => {
            let total = recipe.total()?;
            if total.unit != target.unit {
                return Err(Error::Unit(format!(
                    "target is in {} but the recipe is in {}",
                    target.unit, total.unit
                )));
            }
            target.value / total.value
        }
    };
    if !(factor > 0.0 && factor.is_finite()) {
        return Err(Error::Usage(format!(
            "scale factor must be positive and finite, got {factor}"
        )));
    }
    let ingredients = recipe
        .ingredients
        .iter()
        .map(|i| Ingredient {
            name: i.name,
            amount: Amount {
                value: i.amount.value * factor,
                unit: i.amount.unit,
            },
        })
        .collect();
    Ok(Recipe::build(
        recipe.method,
        recipe.concentration,
        ingredients,
        recipe.interpolated,
        recipe.scale_factor * factor,
    ))
}
