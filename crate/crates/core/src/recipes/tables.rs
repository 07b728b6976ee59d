//! Published ingredient tables, one column per 10% concentration step
//! (10% … 90%).

use super::{IngredientName, Unit};
use crate::materials::Method;

pub(crate) struct TableRow {
    pub name: IngredientName,
    pub unit: Unit,
    pub amounts: [f64; 9],
}

const fn constant(v: f64) -> [f64; 9] {
    [v; 9]
}

/// Oil-only emulsion. The source prints "(units)" without naming them.
pub(crate) const OIL_ONLY: [TableRow; 6] = [
    TableRow {
        name: IngredientName::PropyleneGlycol,
        unit: Unit::Parts,
        amounts: constant(10.5),
    },
    TableRow {
        name: IngredientName::DeionizedWater,
        unit: Unit::Parts,
        amounts: constant(169.0),
    },
    TableRow {
        name: IngredientName::Gelatin,
        unit: Unit::Parts,
        amounts: constant(26.95),
    },
    TableRow {
        name: IngredientName::SafflowerOil,
        unit: Unit::Parts,
        amounts: [19.4, 43.75, 75.0, 116.7, 175.0, 262.5, 408.3, 700.0, 1575.0],
    },
    TableRow {
        name: IngredientName::UltraIvory,
        unit: Unit::Parts,
        amounts: [0.2314, 0.48125, 0.825, 1.2837, 1.925, 2.8875, 4.4913, 7.7, 17.325],
    },
    TableRow {
        name: IngredientName::Formalin,
        unit: Unit::Parts,
        amounts: constant(1.323),
    },
];

pub(crate) const OIL_KEROSENE: [TableRow; 7] = [
    TableRow {
        name: IngredientName::PToluicAcid,
        unit: Unit::Grams,
        amounts: constant(0.2),
    },
    TableRow {
        name: IngredientName::DeionizedWater,
        unit: Unit::Milliliters,
        amounts: constant(190.0),
    },
    TableRow {
        name: IngredientName::NPropanol,
        unit: Unit::Milliliters,
        amounts: constant(10.0),
    },
    TableRow {
        name: IngredientName::Gelatin,
        unit: Unit::Grams,
        amounts: constant(34.0),
    },
    TableRow {
        name: IngredientName::OilKeroseneMix,
        unit: Unit::Milliliters,
        amounts: [22.2, 50.0, 85.0, 133.3, 200.0, 300.0, 466.0, 800.0, 1800.0],
    },
    TableRow {
        name: IngredientName::UltraIvory,
        unit: Unit::Grams,
        amounts: [1.26, 2.8, 4.76, 7.46, 11.2, 13.0, 15.0, 17.0, 20.0],
    },
    TableRow {
        name: IngredientName::Formalin,
        unit: Unit::Grams,
        amounts: constant(2.16),
    },
];

pub(crate) fn rows(method: Method) -> &'static [TableRow] {
    match method {
        Method::OilOnly => &OIL_ONLY,
        Method::OilKerosene => &OIL_KEROSENE,
    }
}
