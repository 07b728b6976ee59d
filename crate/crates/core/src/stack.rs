//! Concentric-cylinder phantom stacks: geometry, per-layer material
//! assignment and a pour/cure fabrication plan.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dispersion::{tissue_spectrum, PropertySelector, TissueId, TissueLibrary};
use crate::error::{Error, Result};
use crate::matching::{best_matches, closest_sample, format_mhz, FrequencyBand, MatchOptions};
use crate::materials::{Concentration, MaterialDatabase, Method};
use crate::recipes::{emit_protocol, interpolate_recipe, ProtocolFormat, Recipe, CURE_TOTAL_DAYS};

/// Shortest wait before the next pour or before use.
pub const MIN_CURE_HOURS: f64 = 48.0;
pub const INTERFACE_CAVEAT: &str = "Properties near each layer interface drift from the bulk values of \
     either material, conductivity more than permittivity. Layer cores keep their own properties; \
     take measurements away from interfaces.";

const BUNDLED_GEOMETRY: &str = include_str!("../data/geometry.json");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerRole {
    Tissue(TissueId),
    Label(String),
}

impl std::fmt::Display for LayerRole {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LayerRole::Tissue(t) => f.write_str(t.display_name()),
            LayerRole::Label(l) => f.write_str(l),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaterialChoice {
    pub method: Method,
    pub concentration: Concentration,
}

/// How an assigned material relates to the layer's tissue.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerMatch {
    pub property: PropertySelector,
    /// Qualifying band of the chosen sample; absent when infeasible.
    pub fmin_hz: Option<f64>,
    pub fmax_hz: Option<f64>,
    pub worst_error: f64,
    /// Share of the requested band covered; zero when infeasible.
    pub coverage: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub role: LayerRole,
    pub outer_radius_mm: f64,
    #[serde(default)]
    pub material: Option<MaterialChoice>,
    #[serde(default, rename = "match")]
    pub match_summary: Option<LayerMatch>,
}

impl Layer {
    pub fn new(role: LayerRole, outer_radius_mm: f64) -> Self {
        Layer {
            role,
            outer_radius_mm,
            material: None,
            match_summary: None,
        }
    }

    pub fn with_material(mut self, method: Method, concentration: Concentration) -> Self {
        self.material = Some(MaterialChoice { method, concentration });
        self
    }
}

/// Layers ordered innermost to outermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerStack {
    layers: Vec<Layer>,
    length_mm: f64,
    #[serde(default)]
    band_of_interest: Option<FrequencyBand>,
    /// Where the dimensions came from.
    geometry_source: String,
}

impl LayerStack {
    pub fn new(layers: Vec<Layer>, length_mm: f64, geometry_source: impl Into<String>) -> Result<Self> {
        let stack = LayerStack {
            layers,
            length_mm,
            band_of_interest: None,
            geometry_source: geometry_source.into(),
        };
        stack.validate()?;
        Ok(stack)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let stack: LayerStack = serde_json::from_str(text)?;
        stack.validate()?;
        Ok(stack)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut stack = Self::from_json_str(&std::fs::read_to_string(path)?)?;
        if stack.geometry_source.is_empty() {
            stack.geometry_source = path.display().to_string();
        }
        Ok(stack)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::validation("layer stack", "needs at least one layer"));
        }
        if !(self.length_mm > 0.0 && self.length_mm.is_finite()) {
            return Err(Error::validation(
                "layer stack",
                format!("length {} mm must be positive", self.length_mm),
            ));
        }
        let mut inner = 0.0;
        for (i, l) in self.layers.iter().enumerate() {
            if !(l.outer_radius_mm > inner && l.outer_radius_mm.is_finite()) {
                return Err(Error::validation(
                    "layer stack",
                    format!(
                        "layer {} ({}) outer radius {} mm must exceed {} mm",
                        i + 1,
                        l.role,
                        l.outer_radius_mm,
                        inner
                    ),
                ));
            }
            inner = l.outer_radius_mm;
        }
        Ok(())
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn length_mm(&self) -> f64 {
        self.length_mm
    }

    pub fn band_of_interest(&self) -> Option<FrequencyBand> {
        self.band_of_interest
    }

    pub fn geometry_source(&self) -> &str {
        &self.geometry_source
    }

    /// Appends an outer layer.
    pub fn push_layer(&mut self, layer: Layer) -> Result<()> {
        self.layers.push(layer);
        self.validate().inspect_err(|_| {
            self.layers.pop();
        })
    }

    pub fn set_outer_radius(&mut self, index: usize, radius_mm: f64) -> Result<()> {
        let layer = self
            .layers
            .get_mut(index)
            .ok_or_else(|| Error::Usage(format!("no layer {index}")))?;
        let old = std::mem::replace(&mut layer.outer_radius_mm, radius_mm);
        self.validate().inspect_err(|_| {
            self.layers[index].outer_radius_mm = old;
        })
    }

    /// Indices of layers whose assigned material misses the threshold.
    pub fn infeasible_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.match_summary.is_some_and(|m| !m.feasible))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("stack serializes") + "\n"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompositeGeometry {
    pub inner_radius_mm: f64,
    pub outer_radius_mm: f64,
    pub length_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArmGeometry {
    pub length_mm: f64,
    pub bone_marrow_radius_mm: f64,
    pub cortical_bone_radius_mm: f64,
    pub muscle_radius_mm: f64,
    pub fat_radius_mm: f64,
    pub skin_radius_mm: f64,
}

/// Preset dimensions. The bundled values are placeholders, not anatomy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub source: String,
    pub composite: CompositeGeometry,
    pub arm: ArmGeometry,
}

impl GeometryConfig {
    pub fn bundled() -> Self {
        Self::from_json_str(BUNDLED_GEOMETRY).expect("bundled geometry is valid")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_json_str(&std::fs::read_to_string(path)?)?;
        cfg.source = format!("{} ({})", cfg.source, path.display());
        Ok(cfg)
    }
}

/// Two-layer oil-kerosene composite: 20% core inside a 60% shell.
pub fn preset_composite(geometry: &GeometryConfig) -> Result<LayerStack> {
    let g = &geometry.composite;
    LayerStack::new(
        vec![
            Layer::new(LayerRole::Label("composite core".into()), g.inner_radius_mm)
                .with_material(Method::OilKerosene, Concentration::from_percent(20.0)?),
            Layer::new(LayerRole::Label("composite shell".into()), g.outer_radius_mm)
                .with_material(Method::OilKerosene, Concentration::from_percent(60.0)?),
        ],
        g.length_mm,
        geometry.source.clone(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SkinVariant {
    #[default]
    Dry,
    Wet,
}

/// Five-layer arm, marrow to skin, materials unassigned.
pub fn preset_arm(geometry: &GeometryConfig, skin: SkinVariant) -> Result<LayerStack> {
    let g = &geometry.arm;
    let skin_id = match skin {
        SkinVariant::Dry => TissueId::SkinDry,
        SkinVariant::Wet => TissueId::SkinWet,
    };
    LayerStack::new(
        vec![
            Layer::new(LayerRole::Tissue(TissueId::BoneMarrow), g.bone_marrow_radius_mm),
            Layer::new(LayerRole::Tissue(TissueId::CorticalBone), g.cortical_bone_radius_mm),
            Layer::new(LayerRole::Tissue(TissueId::Muscle), g.muscle_radius_mm),
            Layer::new(LayerRole::Tissue(TissueId::Fat), g.fat_radius_mm),
            Layer::new(LayerRole::Tissue(skin_id), g.skin_radius_mm),
        ],
        g.length_mm,
        geometry.source.clone(),
    )
}

/// Gives each tissue layer the top-ranked sample for `property` over
/// `band`. Layers without a qualifying sample get the closest one and are
/// flagged infeasible.
pub fn assign_materials(
    stack: &LayerStack,
    db: &MaterialDatabase,
    library: &TissueLibrary,
    property: PropertySelector,
    band: FrequencyBand,
    options: &MatchOptions,
) -> Result<LayerStack> {
    if db.is_empty() {
        return Err(Error::Usage("material database is empty".into()));
    }
    let mut out = stack.clone();
    out.band_of_interest = Some(band);
    for layer in &mut out.layers {
        let tissue = match &layer.role {
            LayerRole::Tissue(t) => *t,
            LayerRole::Label(l) => {
                return Err(Error::Usage(format!("layer role `{l}` is not a known tissue")));
            }
        };
        let model = library.require(tissue)?;
        let ranked = best_matches(db, model, property, band, 1, options)?;
        let (material, summary) = match ranked.first() {
            Some(top) => (
                MaterialChoice {
                    method: top.band.method,
                    concentration: top.band.concentration,
                },
                LayerMatch {
                    property,
                    fmin_hz: Some(top.band.fmin_hz),
                    fmax_hz: Some(top.band.fmax_hz),
                    worst_error: top.band.worst_error,
                    coverage: top.coverage,
                    feasible: true,
                },
            ),
            None => {
                let spec = tissue_spectrum(model, &options.grid)?;
                let c = closest_sample(db, &spec, property, band)?;
                (
                    MaterialChoice {
                        method: c.method,
                        concentration: c.concentration,
                    },
                    LayerMatch {
                        property,
                        fmin_hz: None,
                        fmax_hz: None,
                        worst_error: c.worst_error,
                        coverage: 0.0,
                        feasible: false,
                    },
                )
            }
        };
        layer.material = Some(material);
        layer.match_summary = Some(summary);
    }
    Ok(out)
}

/// Cure durations. Values below [`MIN_CURE_HOURS`] are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CureSchedule {
    pub between_pours_hours: f64,
    pub final_hours: f64,
}

impl Default for CureSchedule {
    fn default() -> Self {
        CureSchedule {
            between_pours_hours: MIN_CURE_HOURS,
            final_hours: MIN_CURE_HOURS,
        }
    }
}

impl CureSchedule {
    pub fn new(between_pours_hours: f64, final_hours: f64) -> Result<Self> {
        for (name, h) in [("between-pour", between_pours_hours), ("final", final_hours)] {
            if !(h >= MIN_CURE_HOURS && h.is_finite()) {
                return Err(Error::Range(format!(
                    "{name} cure of {h} h is shorter than the {MIN_CURE_HOURS} h minimum"
                )));
            }
        }
        Ok(CureSchedule {
            between_pours_hours,
            final_hours,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PourStage {
    /// 1-based pour order.
    pub index: usize,
    pub layer_index: usize,
    pub role: LayerRole,
    pub material: MaterialChoice,
    pub recipe: Recipe,
    /// Wait after this pour.
    pub cure_hours: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FabricationPlan {
    pub stages: Vec<PourStage>,
    pub total_hours: f64,
    pub caveat: &'static str,
    pub geometry_source: String,
}

/// One pour per layer, innermost first. The last wait also covers full
/// cross-linking of the outermost layer.
pub fn fabrication_plan(stack: &LayerStack, schedule: &CureSchedule) -> Result<FabricationPlan> {
    let schedule = CureSchedule::new(schedule.between_pours_hours, schedule.final_hours)?;
    let n = stack.layers.len();
    let stages = stack
        .layers
        .iter()
        .enumerate()
        .map(|(i, layer)| {
            let material = layer.material.ok_or_else(|| {
                Error::Usage(format!(
                    "layer {} ({}) has no material; assign materials first",
                    i + 1,
                    layer.role
                ))
            })?;
            let cure_hours = if i + 1 == n {
                schedule.final_hours.max(CURE_TOTAL_DAYS * 24.0)
            } else {
                schedule.between_pours_hours
            };
            Ok(PourStage {
                index: i + 1,
                layer_index: i,
                role: layer.role.clone(),
                material,
                recipe: interpolate_recipe(material.method, material.concentration)?,
                cure_hours,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let total_hours = stages.iter().map(|s| s.cure_hours).sum();
    Ok(FabricationPlan {
        stages,
        total_hours,
        caveat: INTERFACE_CAVEAT,
        geometry_source: stack.geometry_source.clone(),
    })
}

#[derive(Serialize)]
struct PlanExport<'a> {
    stack: &'a LayerStack,
    plan: &'a FabricationPlan,
}

pub fn plan_to_json(stack: &LayerStack, plan: &FabricationPlan) -> String {
    serde_json::to_string_pretty(&PlanExport { stack, plan }).expect("plan serializes") + "\n"
}

/// Build sheet with every layer's recipe embedded.
pub fn plan_to_markdown(stack: &LayerStack, plan: &FabricationPlan) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "# Phantom build plan\n");
    let _ = writeln!(
        out,
        "Geometry: length {} mm; source: {}\n",
        stack.length_mm, stack.geometry_source
    );
    if let Some(b) = stack.band_of_interest {
        let _ = writeln!(
            out,
            "Band of interest: {}–{} MHz\n",
            format_mhz(b.fmin_hz),
            format_mhz(b.fmax_hz)
        );
    }
    let _ = writeln!(out, "| Layer | Role | Outer radius (mm) | Material | Match |");
    let _ = writeln!(out, "|---|---|---|---|---|");
    for (i, l) in stack.layers.iter().enumerate() {
        let material = l
            .material
            .map(|m| format!("{} {}", m.concentration, m.method.display_name()))
            .unwrap_or_else(|| "-".into());
        let summary = match l.match_summary {
            None => "-".to_string(),
            Some(m) if m.feasible => format!(
                "{} {}–{} MHz, worst error {:.3}",
                m.property,
                format_mhz(m.fmin_hz.unwrap_or_default()),
                format_mhz(m.fmax_hz.unwrap_or_default()),
                m.worst_error
            ),
            Some(m) => format!("INFEASIBLE ({}): closest worst error {:.3}", m.property, m.worst_error),
        };
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            i + 1,
            l.role,
            l.outer_radius_mm,
            material,
            summary
        );
    }
    let _ = writeln!(out, "\n## Pour sequence\n");
    for s in &plan.stages {
        let _ = writeln!(
            out,
            "{}. Pour {} ({} {}), then cure {} h.",
            s.index,
            s.role,
            s.material.concentration,
            s.material.method.display_name(),
            s.cure_hours
        );
    }
    let _ = writeln!(out, "\nTotal cure time: {} h.\n", plan.total_hours);
    let _ = writeln!(out, "**Caveat:** {}\n", plan.caveat);
    for s in &plan.stages {
        let _ = writeln!(out, "---\n\n### Layer {}: {}\n", s.index, s.role);
        out.push_str(&emit_protocol(&s.recipe, ProtocolFormat::Markdown)?);
        out.push('\n');
    }
    Ok(out)
}
