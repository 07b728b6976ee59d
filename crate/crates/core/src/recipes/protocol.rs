use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use super::{Ingredient, IngredientName, Recipe};
use crate::error::{Error, Result};
use crate::materials::Method;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolStep {
    /// 1-based position.
    pub index: usize,
    pub instruction: String,
    pub target_temperature_c: Option<f64>,
    /// Minimum duration of the step.
    pub duration_hours: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolFormat {
    Markdown,
    Text,
    Json,
}

impl FromStr for ProtocolFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ProtocolFormat::Markdown),
            "text" | "txt" | "plain" => Ok(ProtocolFormat::Text),
            "json" => Ok(ProtocolFormat::Json),
            other => Err(Error::Usage(format!(
                "unknown protocol format `{other}` (expected markdown, text or json)"
            ))),
        }
    }
}

const OIL_ONLY_SOURCE: &str = "Madsen et al. (2006), oil-in-gelatin dispersion for anthropomorphic phantoms";
const OIL_KEROSENE_SOURCE: &str = "Kanda et al. (2004), oil-kerosene gelatin phantom formulation";
const OIL_KEROSENE_NOTE: &str = "Sequence adapted from the oil-only procedure: the oil stage uses an equal-parts \
     mix of safflower oil and kerosene, and the aqueous phase carries p-toluic acid and n-propanol.";

fn amount(ingredients: &[Ingredient], name: IngredientName) -> String {
    ingredients
        .iter()
        .find(|i| i.name == name)
        .map(|i| i.amount.to_string())
        .unwrap_or_else(|| "?".into())
}

/// The twelve preparation steps with amounts filled in.
pub(crate) fn build_steps(method: Method, ing: &[Ingredient]) -> Vec<ProtocolStep> {
    use IngredientName::*;
    let a = |n| amount(ing, n);
    let (aqueous, oil) = match method {
        Method::OilOnly => (
            format!(
                "At room temperature, combine {} propylene glycol with {} de-ionized water (18 MΩ·cm) in a beaker.",
                a(PropyleneGlycol),
                a(DeionizedWater)
            ),
            format!("safflower oil ({})", a(SafflowerOil)),
        ),
        Method::OilKerosene => (
            format!(
                "At room temperature, dissolve {} p-toluic acid in {} de-ionized water with {} n-propanol in a beaker.",
                a(PToluicAcid),
                a(DeionizedWater),
                a(NPropanol)
            ),
            format!("1:1 safflower oil and kerosene mix ({})", a(OilKeroseneMix)),
        ),
    };
    let steps: [(String, Option<f64>, Option<f64>); 12] = [
        (aqueous, None, None),
        (
            format!("Stir in {} gelatin a little at a time until a lump-free slurry forms.", a(Gelatin)),
            None,
            None,
        ),
        (
            "Cover the beaker with plastic wrap and pierce a small vent so the headspace stays at atmospheric pressure while heating.".into(),
            None,
            None,
        ),
        (
            "Stand the beaker in a hot water bath filled at least to the level of the slurry.".into(),
            None,
            None,
        ),
        (
            "Heat until the gelatin reaches about 90 °C and turns clear; skim any bubbles from the surface.".into(),
            Some(90.0),
            None,
        ),
        (
            "Move the beaker to a cold water bath and stir while the molten gelatin cools to 50 °C.".into(),
            Some(50.0),
            None,
        ),
        (format!("Meanwhile bring the {oil} to 50 °C."), Some(50.0), None),
        (
            "Pour the molten gelatin into the warm oil and mix hard with a right-angle bent spoon kept below the surface to avoid folding in air.".into(),
            None,
            None,
        ),
        (
            format!(
                "Add {} Ultra Ivory surfactant and keep stirring until the emulsion is almost white and no oil separates when stirring stops.",
                a(UltraIvory)
            ),
            None,
            None,
        ),
        (
            format!("Cool to 40 °C in the cold bath, then stir in {} formalin slowly.", a(Formalin)),
            Some(40.0),
            None,
        ),
        ("Keep cooling to about 34 °C and pour into the molds.".into(), Some(34.0), None),
        (
            format!(
                "Leave in the mold for at least {} h before demolding; full cross-linking takes at least {} days.",
                super::CURE_MOLD_HOURS,
                super::CURE_TOTAL_DAYS
            ),
            None,
            Some(super::CURE_MOLD_HOURS),
        ),
    ];
    steps
        .into_iter()
        .enumerate()
        .map(
            |(k, (instruction, target_temperature_c, duration_hours))| ProtocolStep {
                index: k + 1,
                instruction,
                target_temperature_c,
                duration_hours,
            },
        )
        .collect()
}

fn title(recipe: &Recipe) -> String {
    format!("{} {} phantom", recipe.concentration, recipe.method.display_name())
}

fn source(recipe: &Recipe) -> &'static str {
    match recipe.method {
        Method::OilOnly => OIL_ONLY_SOURCE,
        Method::OilKerosene => OIL_KEROSENE_SOURCE,
    }
}

fn markdown(recipe: &Recipe) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "## Recipe: {}\n", title(recipe));
    if let Some(w) = recipe.warning() {
        let _ = writeln!(out, "> **WARNING: {w}**\n");
    }
    if recipe.scale_factor != 1.0 {
        let _ = writeln!(
            out,
            "Scaled ×{} from the tabulated batch.\n",
            crate::matching::round_sig(recipe.scale_factor, 6)
        );
    }
    let _ = writeln!(out, "| Ingredient | Amount |\n|---|---|");
    for i in &recipe.ingredients {
        let _ = writeln!(out, "| {} | {} |", i.name.display_name(), i.amount);
    }
    let _ = writeln!(out, "\n### Procedure\n");
    for s in &recipe.steps {
        let _ = writeln!(out, "{}. {}", s.index, s.instruction);
    }
    let _ = writeln!(
        out,
        "\nCure: at least {} h in the mold, at least {} days in total.\n",
        recipe.cure_mold_hours, recipe.cure_total_days
    );
    if recipe.method == Method::OilKerosene {
        let _ = writeln!(out, "_Note: {OIL_KEROSENE_NOTE}_\n");
    }
    let _ = writeln!(out, "_Formulation source: {}._", source(recipe));
    out
}

fn text(recipe: &Recipe) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "RECIPE: {}", title(recipe));
    if let Some(w) = recipe.warning() {
        let _ = writeln!(out, "WARNING: {w}");
    }
    if recipe.scale_factor != 1.0 {
        let _ = writeln!(
            out,
            "Scale factor: {}",
            crate::matching::round_sig(recipe.scale_factor, 6)
        );
    }
    let _ = writeln!(out, "\nINGREDIENTS");
    for i in &recipe.ingredients {
        let _ = writeln!(out, "  {:<26} {}", i.name.display_name(), i.amount);
    }
    let _ = writeln!(out, "\nPROCEDURE");
    for s in &recipe.steps {
        let _ = writeln!(out, "{:>3}. {}", s.index, s.instruction);
    }
    let _ = writeln!(
        out,
        "\nCURE: >= {} h in mold, >= {} days total",
        recipe.cure_mold_hours, recipe.cure_total_days
    );
    if recipe.method == Method::OilKerosene {
        let _ = writeln!(out, "NOTE: {OIL_KEROSENE_NOTE}");
    }
    let _ = writeln!(out, "SOURCE: {}", source(recipe));
    out
}

#[derive(Serialize)]
struct JsonSheet<'a> {
    #[serde(flatten)]
    recipe: &'a Recipe,
    warning: Option<&'static str>,
    note: Option<&'static str>,
    source: &'static str,
}

/// Renders the recipe sheet.
pub fn emit_protocol(recipe: &Recipe, format: ProtocolFormat) -> Result<String> {
    recipe.validate()?;
    Ok(match format {
        ProtocolFormat::Markdown => markdown(recipe),
        ProtocolFormat::Text => text(recipe),
        ProtocolFormat::Json => {
            let sheet = JsonSheet {
                recipe,
                warning: recipe.warning(),
                note: (recipe.method == Method::OilKerosene).then_some(OIL_KEROSENE_NOTE),
                source: source(recipe),
            };
            serde_json::to_string_pretty(&sheet)? + "\n"
        }
    })
}
