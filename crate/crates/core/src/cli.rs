//! Command-line front end.
//!
//! Exit codes: 0 success, 1 infeasible layers under `--strict`, 2 usage or
//! data error. Settings resolve as flags, then `PHANTOM_*` environment
//! variables, then `<db>/phantom.json`, then built-in defaults. Frequencies
//! on the command line are in MHz.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::dispersion::{tissue_spectrum, FrequencyGrid, PropertySelector, TissueId, TissueLibrary};
use crate::error::{Error, Result};
use crate::matching::{
    best_matches, format_mhz, match_table, report_to_csv, report_to_json, report_to_markdown, round_sig,
    solve_concentration, FrequencyBand, MatchOptions, DEFAULT_THRESHOLD,
};
use crate::materials::{
    aging_drift, ingest_measurement_file, validate_monotone_in_concentration, write_measurement_csv, Averaging,
    Concentration, IngestOptions, MaterialDatabase, MeasurementMetadata, Method, MANIFEST_FILE,
};
use crate::recipes::{emit_protocol, interpolate_recipe, scale_recipe, Amount, ProtocolFormat, ScaleSpec, Unit};
use crate::reference::{dataset_to_json, generate_reference_dataset, reference_dataset, REFERENCE_MATCH_BANDS};
use crate::stack::{
    assign_materials, fabrication_plan, plan_to_json, plan_to_markdown, preset_arm, preset_composite, CureSchedule,
    GeometryConfig, LayerStack, SkinVariant, MIN_CURE_HOURS,
};

pub const ENV_DB: &str = "PHANTOM_DB";
pub const ENV_TISSUES: &str = "PHANTOM_TISSUES";
pub const ENV_FORMAT: &str = "PHANTOM_FORMAT";
pub const CONFIG_FILE: &str = "phantom.json";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        <OutputFormat as ValueEnum>::from_str(s.trim(), true)
            .map_err(|_| Error::Usage(format!("unknown output format `{s}` (expected json, csv or markdown)")))
    }
}

#[derive(Debug, Parser)]
#[command(name = "phantom", version, about = "Tissue-mimicking phantom design toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Material database directory. Without one the built-in reference
    /// dataset is used.
    #[arg(long, global = true)]
    pub db: Option<PathBuf>,
    /// Tissue library JSON. Defaults to the bundled library.
    #[arg(long, global = true)]
    pub tissues: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    /// Matching error threshold, a fraction in (0, 1).
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[arg(long = "fmin-mhz", global = true)]
    pub fmin_mhz: Option<f64>,
    #[arg(long = "fmax-mhz", global = true)]
    pub fmax_mhz: Option<f64>,
    /// Number of log-spaced grid points.
    #[arg(long, global = true)]
    pub points: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tissue spectra on the evaluation grid.
    Tissues {
        #[arg(long)]
        tissue: Option<TissueId>,
    },
    /// Inspect the material database.
    Materials {
        #[command(subcommand)]
        action: MaterialsAction,
    },
    /// Rank samples for one tissue, or print the full match table.
    Match(MatchArgs),
    /// Continuous concentration minimising the worst error over a band.
    Solve {
        #[arg(long)]
        tissue: TissueId,
        #[arg(long)]
        property: PropertySelector,
        /// FMIN:FMAX in MHz.
        #[arg(long)]
        band: String,
        /// Restrict to one method; both are solved otherwise.
        #[arg(long)]
        method: Option<Method>,
    },
    /// Recipe sheet for a method and concentration.
    Recipe(RecipeArgs),
    /// Multi-layer build plan.
    Stack(StackArgs),
    /// Built-in reference data.
    Reference {
        #[command(subcommand)]
        action: ReferenceAction,
    },
    /// Add a measurement CSV to a database directory.
    Ingest(IngestArgs),
    /// Drift between two dated measurements of one formulation.
    Aging {
        #[arg(long)]
        method: Method,
        /// Percent, e.g. 40.
        #[arg(long)]
        concentration: String,
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
    },
}

#[derive(Debug, Subcommand)]
pub enum MaterialsAction {
    /// One line per stored sample.
    List,
    /// Check that both properties fall with concentration.
    Monotone {
        #[arg(long)]
        method: Option<Method>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ReferenceAction {
    /// The published match bands the reference dataset encodes.
    Bands,
    /// Write the reference dataset as a database directory.
    Export { dir: PathBuf },
    /// Re-run the inverse design and write the dataset JSON.
    Generate {
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    #[arg(long, conflicts_with_all = ["tissue", "property", "band"])]
    pub table: bool,
    #[arg(long, required_unless_present = "table")]
    pub tissue: Option<TissueId>,
    #[arg(long, required_unless_present = "table")]
    pub property: Option<PropertySelector>,
    /// FMIN:FMAX in MHz.
    #[arg(long, required_unless_present = "table")]
    pub band: Option<String>,
    #[arg(long, default_value_t = 5)]
    pub top: usize,
}

#[derive(Debug, Args)]
pub struct RecipeArgs {
    #[arg(long)]
    pub method: Method,
    /// Percent, e.g. 50 or 45.
    #[arg(long)]
    pub concentration: String,
    #[arg(long, conflicts_with = "total")]
    pub factor: Option<f64>,
    /// Target batch total, in `--unit`.
    #[arg(long, requires = "unit")]
    pub total: Option<f64>,
    #[arg(long)]
    pub unit: Option<Unit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Composite,
    Arm,
}

#[derive(Debug, Args)]
pub struct StackArgs {
    #[arg(long, value_enum, conflicts_with = "file", required_unless_present = "file")]
    pub preset: Option<Preset>,
    /// Stack JSON file.
    #[arg(long)]
    pub file: Option<PathBuf>,
    /// Geometry config overriding the bundled preset dimensions.
    #[arg(long)]
    pub geometry: Option<PathBuf>,
    /// Use wet rather than dry skin in the arm preset.
    #[arg(long)]
    pub wet_skin: bool,
    #[arg(long, requires = "band")]
    pub property: Option<PropertySelector>,
    /// FMIN:FMAX in MHz.
    #[arg(long, requires = "property")]
    pub band: Option<String>,
    #[arg(long, default_value_t = MIN_CURE_HOURS)]
    pub cure_between: f64,
    #[arg(long, default_value_t = MIN_CURE_HOURS)]
    pub cure_final: f64,
    /// Exit 1 when any layer is infeasible.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub method: Method,
    /// Percent, e.g. 40.
    #[arg(long)]
    pub concentration: String,
    #[arg(long)]
    pub thickness_mm: f64,
    #[arg(long)]
    pub date: Option<NaiveDate>,
    #[arg(long)]
    pub median: bool,
    /// Keep rows outside the evaluation grid bounds.
    #[arg(long)]
    pub widen_bounds: bool,
}

/// Optional settings read from `<db>/phantom.json`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub threshold: Option<f64>,
    pub format: Option<OutputFormat>,
    /// Relative paths resolve against the database directory.
    pub tissues: Option<PathBuf>,
    pub fmin_mhz: Option<f64>,
    pub fmax_mhz: Option<f64>,
    pub points: Option<usize>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CliConfig {
    pub db: Option<PathBuf>,
    pub tissues: Option<PathBuf>,
    pub grid: FrequencyGrid,
    pub threshold: f64,
    /// `None` means the command's own default.
    pub format: Option<OutputFormat>,
}

impl CliConfig {
    pub fn resolve(global: &GlobalArgs, env: &dyn Fn(&str) -> Option<String>) -> Result<Self> {
        let db = global
            .db
            .clone()
            .or_else(|| env(ENV_DB).filter(|s| !s.is_empty()).map(PathBuf::from));
        let file = match &db {
            Some(dir) => {
                let path = dir.join(CONFIG_FILE);
                if path.is_file() {
                    serde_json::from_str::<ConfigFile>(&std::fs::read_to_string(&path)?)
                        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?
                } else {
                    ConfigFile::default()
                }
            }
            None => ConfigFile::default(),
        };
        let tissues = global
            .tissues
            .clone()
            .or_else(|| env(ENV_TISSUES).filter(|s| !s.is_empty()).map(PathBuf::from))
            .or_else(|| {
                let dir = db.as_deref().unwrap_or(Path::new("."));
                file.tissues.as_ref().map(|t| dir.join(t))
            });
        let format = match (global.format, env(ENV_FORMAT).filter(|s| !s.is_empty())) {
            (Some(f), _) => Some(f),
            (None, Some(s)) => Some(s.parse()?),
            (None, None) => file.format,
        };
        let threshold = global.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD);
        let fmin = global
            .fmin_mhz
            .or(file.fmin_mhz)
            .unwrap_or(crate::dispersion::DEFAULT_FMIN_HZ / 1e6);
        let fmax = global
            .fmax_mhz
            .or(file.fmax_mhz)
            .unwrap_or(crate::dispersion::DEFAULT_FMAX_HZ / 1e6);
        let points = global
            .points
            .or(file.points)
            .unwrap_or(crate::dispersion::DEFAULT_GRID_POINTS);
        let grid = if (fmin, fmax, points)
            == (
                crate::dispersion::DEFAULT_FMIN_HZ / 1e6,
                crate::dispersion::DEFAULT_FMAX_HZ / 1e6,
                crate::dispersion::DEFAULT_GRID_POINTS,
            ) {
            FrequencyGrid::default()
        } else {
            FrequencyGrid::log_spaced(fmin * 1e6, fmax * 1e6, points).map_err(|e| Error::Usage(e.to_string()))?
        };
        // Validates the threshold range.
        MatchOptions::new(threshold, grid.clone()).map_err(|e| Error::Usage(e.to_string()))?;
        Ok(CliConfig {
            db,
            tissues,
            grid,
            threshold,
            format,
        })
    }

    fn options(&self) -> MatchOptions {
        MatchOptions {
            threshold: self.threshold,
            grid: self.grid.clone(),
        }
    }

    fn format_or(&self, default: OutputFormat) -> OutputFormat {
        self.format.unwrap_or(default)
    }

    fn library(&self) -> Result<TissueLibrary> {
        match &self.tissues {
            Some(p) => TissueLibrary::load(p),
            None => Ok(TissueLibrary::bundled()),
        }
    }

    fn database(&self) -> Result<MaterialDatabase> {
        match &self.db {
            Some(dir) => MaterialDatabase::load_dir(dir),
            None => Ok(reference_dataset().clone()),
        }
    }
}

/// Parses `"45"`, `"45%"` or `"45.5"` as a percent.
fn parse_percent(text: &str) -> Result<Concentration> {
    let t = text.trim().trim_end_matches('%');
    let p: f64 = t
        .parse()
        .map_err(|_| Error::Usage(format!("concentration `{text}` is not a number")))?;
    Concentration::from_percent(p)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Runs one invocation. `env` supplies environment variables.
pub fn run<I, T>(args: I, env: &dyn Fn(&str) -> Option<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                EXIT_ERROR
            } else {
                let _ = write!(stdout, "{text}");
                EXIT_OK
            };
        }
    };
    match execute(&cli, env, stderr) {
        Ok((text, code)) => {
            let _ = stdout.write_all(text.as_bytes());
            code
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cli: &Cli, env: &dyn Fn(&str) -> Option<String>, stderr: &mut dyn Write) -> Result<(String, i32)> {
    let cfg = CliConfig::resolve(&cli.global, env)?;
    let ok = |s: String| Ok((s, EXIT_OK));
    match &cli.command {
        Command::Tissues { tissue } => ok(cmd_tissues(&cfg, *tissue)?),
        Command::Materials { action } => ok(cmd_materials(&cfg, action)?),
        Command::Match(args) => ok(cmd_match(&cfg, args)?),
        Command::Solve {
            tissue,
            property,
            band,
            method,
        } => ok(cmd_solve(&cfg, *tissue, *property, band, *method)?),
        Command::Recipe(args) => ok(cmd_recipe(&cfg, args)?),
        Command::Stack(args) => cmd_stack(&cfg, args, stderr),
        Command::Reference { action } => ok(cmd_reference(&cfg, action)?),
        Command::Ingest(args) => ok(cmd_ingest(&cfg, args, stderr)?),
        Command::Aging {
            method,
            concentration,
            from,
            to,
        } => ok(cmd_aging(&cfg, *method, concentration, *from, *to)?),
    }
}

fn cmd_tissues(cfg: &CliConfig, only: Option<TissueId>) -> Result<String> {
    let library = cfg.library()?;
    let models: Vec<_> = match only {
        Some(id) => vec![library.require(id)?],
        None => library.iter().collect(),
    };
    let spectra = models
        .iter()
        .map(|m| Ok((m.tissue_id, tissue_spectrum(m, &cfg.grid)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::new();
    match cfg.format_or(OutputFormat::Csv) {
        OutputFormat::Csv if spectra.len() == 1 => {
            // Single tissue: the measurement schema, so it can be re-ingested.
            let mut buf = Vec::new();
            write_measurement_csv(&spectra[0].1, &mut buf)?;
            out = String::from_utf8(buf).expect("ascii csv");
        }
        OutputFormat::Csv => {
            out.push_str("tissue,frequency_hz,rel_permittivity,conductivity_s_per_m\n");
            for (id, s) in &spectra {
                for ((f, e), c) in s.frequencies().iter().zip(s.rel_permittivity()).zip(s.conductivity()) {
                    let _ = writeln!(out, "{id},{f},{e},{c}");
                }
            }
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Row<'a> {
                tissue: TissueId,
                frequencies_hz: &'a [f64],
                rel_permittivity: &'a [f64],
                conductivity_s_per_m: &'a [f64],
            }
            let rows: Vec<Row> = spectra
                .iter()
                .map(|(id, s)| Row {
                    tissue: *id,
                    frequencies_hz: s.frequencies(),
                    rel_permittivity: s.rel_permittivity(),
                    conductivity_s_per_m: s.conductivity(),
                })
                .collect();
            out = to_json(&rows)?;
        }
        OutputFormat::Markdown => {
            let _ = writeln!(
                out,
                "| Tissue | Frequency (MHz) | Rel. permittivity | Conductivity (S/m) |"
            );
            let _ = writeln!(out, "|---|---|---|---|");
            for (id, s) in &spectra {
                for ((f, e), c) in s.frequencies().iter().zip(s.rel_permittivity()).zip(s.conductivity()) {
                    let _ = writeln!(
                        out,
                        "| {} | {} | {} | {} |",
                        id.display_name(),
                        round_sig(f / 1e6, 4),
                        round_sig(*e, 5),
                        round_sig(*c, 5)
                    );
                }
            }
        }
    }
    Ok(out)
}

fn cmd_materials(cfg: &CliConfig, action: &MaterialsAction) -> Result<String> {
    let db = cfg.database()?;
    let mut out = String::new();
    match action {
        MaterialsAction::List => {
            #[derive(Serialize)]
            struct Row {
                method: Method,
                concentration: f64,
                provenance: crate::materials::Provenance,
                measured_at: Option<NaiveDate>,
                points: usize,
                fmin_hz: f64,
                fmax_hz: f64,
            }
            let rows: Vec<Row> = db
                .samples()
                .iter()
                .map(|s| Row {
                    method: s.method(),
                    concentration: s.concentration().fraction(),
                    provenance: s.provenance(),
                    measured_at: s.measured_at(),
                    points: s.spectrum().len(),
                    fmin_hz: s.spectrum().grid().first(),
                    fmax_hz: s.spectrum().grid().last(),
                })
                .collect();
            match cfg.format_or(OutputFormat::Markdown) {
                OutputFormat::Json => out = to_json(&rows)?,
                OutputFormat::Csv => {
                    out.push_str("method,concentration,provenance,measured_at,points,fmin_hz,fmax_hz\n");
                    for r in &rows {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{},{}",
                            r.method,
                            r.concentration,
                            serde_json::to_value(r.provenance)?.as_str().unwrap_or_default(),
                            r.measured_at.map(|d| d.to_string()).unwrap_or_default(),
                            r.points,
                            r.fmin_hz,
                            r.fmax_hz
                        );
                    }
                }
                OutputFormat::Markdown => {
                    let _ = writeln!(out, "| Sample | Provenance | Measured | Points | Range (MHz) |");
                    let _ = writeln!(out, "|---|---|---|---|---|");
                    for (r, s) in rows.iter().zip(db.samples()) {
                        let _ = writeln!(
                            out,
                            "| {} ({}) | {:?} | {} | {} | {}–{} |",
                            s.concentration(),
                            s.method().display_name(),
                            r.provenance,
                            r.measured_at.map(|d| d.to_string()).unwrap_or_else(|| "-".into()),
                            r.points,
                            format_mhz(r.fmin_hz),
                            format_mhz(r.fmax_hz)
                        );
                    }
                }
            }
        }
        MaterialsAction::Monotone { method } => {
            let methods: Vec<Method> = match method {
                Some(m) => vec![*m],
                None => Method::ALL.into_iter().filter(|m| db.snapshot(*m).len() >= 2).collect(),
            };
            let reports = methods
                .iter()
                .map(|m| validate_monotone_in_concentration(&db, *m, &cfg.grid))
                .collect::<Result<Vec<_>>>()?;
            match cfg.format_or(OutputFormat::Markdown) {
                OutputFormat::Json => out = to_json(&reports)?,
                OutputFormat::Csv => {
                    out.push_str("method,property,frequency_hz,lower_concentration,higher_concentration,value_at_lower,value_at_higher\n");
                    for r in &reports {
                        for v in &r.violations {
                            let _ = writeln!(
                                out,
                                "{},{},{},{},{},{},{}",
                                r.method,
                                v.property,
                                v.frequency_hz,
                                v.lower_concentration.fraction(),
                                v.higher_concentration.fraction(),
                                v.value_at_lower,
                                v.value_at_higher
                            );
                        }
                    }
                }
                OutputFormat::Markdown => {
                    for r in &reports {
                        if r.is_consistent() {
                            let _ = writeln!(
                                out,
                                "{}: conductivity and permittivity fall with concentration at every grid point.",
                                r.method.display_name()
                            );
                        } else {
                            let _ = writeln!(out, "{}: {} violation(s)", r.method.display_name(), r.violations.len());
                            for v in &r.violations {
                                let _ = writeln!(
                                    out,
                                    "- {} at {} MHz: {} → {} rises {} → {}",
                                    v.property,
                                    format_mhz(v.frequency_hz),
                                    v.lower_concentration,
                                    v.higher_concentration,
                                    round_sig(v.value_at_lower, 5),
                                    round_sig(v.value_at_higher, 5)
                                );
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

fn cmd_match(cfg: &CliConfig, args: &MatchArgs) -> Result<String> {
    let db = cfg.database()?;
    let library = cfg.library()?;
    let options = cfg.options();
    let format = cfg.format_or(OutputFormat::Markdown);
    if args.table {
        let report = match_table(&db, &library, &options)?;
        return Ok(match format {
            OutputFormat::Json => report_to_json(&report),
            OutputFormat::Csv => report_to_csv(&report),
            OutputFormat::Markdown => report_to_markdown(&report),
        });
    }
    let (tissue, property, band) = match (args.tissue, args.property, &args.band) {
        (Some(t), Some(p), Some(b)) => (t, p, FrequencyBand::parse_mhz(b)?),
        _ => {
            return Err(Error::Usage(
                "match needs --tissue, --property and --band, or --table".into(),
            ))
        }
    };
    let ranked = best_matches(&db, library.require(tissue)?, property, band, args.top, &options)?;
    let mut out = String::new();
    match format {
        OutputFormat::Json => out = to_json(&ranked)?,
        OutputFormat::Csv => {
            out.push_str("rank,method,concentration,fmin_mhz,fmax_mhz,worst_error,coverage\n");
            for (i, r) in ranked.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    i + 1,
                    r.band.method,
                    r.band.concentration.fraction(),
                    round_sig(r.band.fmin_hz / 1e6, 3),
                    round_sig(r.band.fmax_hz / 1e6, 3),
                    round_sig(r.band.worst_error, 4),
                    round_sig(r.coverage, 4)
                );
            }
        }
        OutputFormat::Markdown => {
            let _ = writeln!(
                out,
                "# {} {} over {}–{} MHz (error < {}%)\n",
                tissue.display_name(),
                property,
                format_mhz(band.fmin_hz),
                format_mhz(band.fmax_hz),
                round_sig(cfg.threshold * 100.0, 4)
            );
            if ranked.is_empty() {
                out.push_str("No sample qualifies in this band.\n");
            } else {
                let _ = writeln!(
                    out,
                    "| Rank | Sample | Fmin (MHz) | Fmax (MHz) | Worst error | Coverage |"
                );
                let _ = writeln!(out, "|---|---|---|---|---|---|");
                for (i, r) in ranked.iter().enumerate() {
                    let _ = writeln!(
                        out,
                        "| {} | {} ({}) | {} | {} | {:.3} | {:.0}% |",
                        i + 1,
                        r.band.concentration,
                        r.band.method.display_name(),
                        format_mhz(r.band.fmin_hz),
                        format_mhz(r.band.fmax_hz),
                        r.band.worst_error,
                        r.coverage * 100.0
                    );
                }
            }
        }
    }
    Ok(out)
}

fn cmd_solve(
    cfg: &CliConfig,
    tissue: TissueId,
    property: PropertySelector,
    band: &str,
    method: Option<Method>,
) -> Result<String> {
    let db = cfg.database()?;
    let library = cfg.library()?;
    let band = FrequencyBand::parse_mhz(band)?;
    let methods: Vec<Method> = match method {
        Some(m) => vec![m],
        None => Method::ALL.into_iter().filter(|m| db.snapshot(*m).len() >= 2).collect(),
    };
    let fits = methods
        .iter()
        .map(|m| solve_concentration(&db, *m, library.require(tissue)?, property, band, &cfg.options()))
        .collect::<Result<Vec<_>>>()?;
    let mut out = String::new();
    match cfg.format_or(OutputFormat::Markdown) {
        OutputFormat::Json => out = to_json(&fits)?,
        OutputFormat::Csv => {
            out.push_str("method,concentration,worst_error,feasible\n");
            for f in &fits {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    f.method,
                    round_sig(f.concentration.fraction(), 6),
                    round_sig(f.worst_error, 6),
                    f.feasible
                );
            }
        }
        OutputFormat::Markdown => {
            let _ = writeln!(
                out,
                "# Best concentration for {} {} over {}–{} MHz\n",
                tissue.display_name(),
                property,
                format_mhz(band.fmin_hz),
                format_mhz(band.fmax_hz)
            );
            let _ = writeln!(out, "| Method | Concentration | Worst error | Feasible |");
            let _ = writeln!(out, "|---|---|---|---|");
            for f in &fits {
                let _ = writeln!(
                    out,
                    "| {} | {}% | {:.4} | {} |",
                    f.method.display_name(),
                    round_sig(f.concentration.percent(), 4),
                    f.worst_error,
                    if f.feasible { "yes" } else { "no" }
                );
            }
        }
    }
    Ok(out)
}

fn cmd_recipe(cfg: &CliConfig, args: &RecipeArgs) -> Result<String> {
    let concentration = parse_percent(&args.concentration)?;
    let mut recipe = interpolate_recipe(args.method, concentration)?;
    if let Some(f) = args.factor {
        recipe = scale_recipe(&recipe, ScaleSpec::Factor(f))?;
    }
    if let (Some(value), Some(unit)) = (args.total, args.unit) {
        recipe = scale_recipe(&recipe, ScaleSpec::TargetTotal(Amount { value, unit }))?;
    }
    Ok(match cfg.format_or(OutputFormat::Markdown) {
        OutputFormat::Markdown => emit_protocol(&recipe, ProtocolFormat::Markdown)?,
        OutputFormat::Json => emit_protocol(&recipe, ProtocolFormat::Json)?,
        OutputFormat::Csv => {
            let mut out = String::from("ingredient,amount,unit\n");
            for i in &recipe.ingredients {
                let _ = writeln!(out, "{},{},{}", i.name, i.amount.value, i.amount.unit);
            }
            out
        }
    })
}

fn cmd_stack(cfg: &CliConfig, args: &StackArgs, stderr: &mut dyn Write) -> Result<(String, i32)> {
    let geometry = match &args.geometry {
        Some(p) => GeometryConfig::load(p)?,
        None => GeometryConfig::bundled(),
    };
    let mut stack = match (args.preset, &args.file) {
        (Some(Preset::Composite), _) => preset_composite(&geometry)?,
        (Some(Preset::Arm), _) => preset_arm(
            &geometry,
            if args.wet_skin {
                SkinVariant::Wet
            } else {
                SkinVariant::Dry
            },
        )?,
        (None, Some(path)) => LayerStack::load(path)?,
        (None, None) => return Err(Error::Usage("stack needs --preset or --file".into())),
    };
    if let (Some(property), Some(band)) = (args.property, &args.band) {
        let band = FrequencyBand::parse_mhz(band)?;
        stack = assign_materials(
            &stack,
            &cfg.database()?,
            &cfg.library()?,
            property,
            band,
            &cfg.options(),
        )?;
    } else if stack.layers().iter().any(|l| l.material.is_none()) {
        return Err(Error::Usage(
            "stack has layers without materials; pass --property and --band to assign them".into(),
        ));
    }
    let plan = fabrication_plan(&stack, &CureSchedule::new(args.cure_between, args.cure_final)?)?;
    let infeasible = stack.infeasible_layers();
    for &i in &infeasible {
        let l = &stack.layers()[i];
        let _ = writeln!(
            stderr,
            "warning: layer {} ({}) has no sample under the threshold; using the closest",
            i + 1,
            l.role
        );
    }
    let text = match cfg.format_or(OutputFormat::Markdown) {
        OutputFormat::Markdown => plan_to_markdown(&stack, &plan)?,
        OutputFormat::Json => plan_to_json(&stack, &plan),
        OutputFormat::Csv => {
            let mut out =
                String::from("layer,role,outer_radius_mm,method,concentration,feasible,worst_error,cure_hours\n");
            for (l, s) in stack.layers().iter().zip(&plan.stages) {
                let m = l.match_summary;
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    s.index,
                    csv_field(&l.role.to_string()),
                    l.outer_radius_mm,
                    s.material.method,
                    s.material.concentration.fraction(),
                    m.map(|m| m.feasible.to_string()).unwrap_or_default(),
                    m.map(|m| round_sig(m.worst_error, 4).to_string()).unwrap_or_default(),
                    s.cure_hours
                );
            }
            out
        }
    };
    let code = if args.strict && !infeasible.is_empty() {
        EXIT_INFEASIBLE
    } else {
        EXIT_OK
    };
    Ok((text, code))
}

fn cmd_reference(cfg: &CliConfig, action: &ReferenceAction) -> Result<String> {
    match action {
        ReferenceAction::Bands => {
            let mut out = String::new();
            match cfg.format_or(OutputFormat::Markdown) {
                OutputFormat::Json => out = to_json(&REFERENCE_MATCH_BANDS)?,
                OutputFormat::Csv => {
                    out.push_str("tissue,property,method,concentration,fmin_mhz,fmax_mhz\n");
                    for r in &REFERENCE_MATCH_BANDS {
                        let _ = writeln!(
                            out,
                            "{},{},{},{},{},{}",
                            r.tissue,
                            r.property,
                            r.method,
                            r.concentration().fraction(),
                            r.fmin_mhz,
                            r.fmax_mhz
                        );
                    }
                }
                OutputFormat::Markdown => {
                    let _ = writeln!(out, "| Tissue | Property | Sample | Fmin (MHz) | Fmax (MHz) |");
                    let _ = writeln!(out, "|---|---|---|---|---|");
                    for r in &REFERENCE_MATCH_BANDS {
                        let _ = writeln!(
                            out,
                            "| {} | {} | {}% ({}) | {} | {} |",
                            r.tissue.display_name(),
                            r.property,
                            r.percent,
                            r.method.display_name(),
                            r.fmin_mhz,
                            r.fmax_mhz
                        );
                    }
                }
            }
            Ok(out)
        }
        ReferenceAction::Export { dir } => {
            reference_dataset().save_dir(dir)?;
            Ok(format!(
                "wrote {} samples to {}\n",
                reference_dataset().len(),
                dir.display()
            ))
        }
        ReferenceAction::Generate { output } => {
            let db = generate_reference_dataset(&cfg.library()?, &cfg.grid)?;
            std::fs::write(output, dataset_to_json(&db)?)?;
            Ok(format!("wrote {} samples to {}\n", db.len(), output.display()))
        }
    }
}

fn cmd_ingest(cfg: &CliConfig, args: &IngestArgs, stderr: &mut dyn Write) -> Result<String> {
    let dir = cfg
        .db
        .as_ref()
        .ok_or_else(|| Error::Usage(format!("ingest needs a database directory (--db or {ENV_DB})")))?;
    let mut db = if dir.join(MANIFEST_FILE).is_file() {
        MaterialDatabase::load_dir(dir)?
    } else {
        MaterialDatabase::new()
    };
    let options = IngestOptions {
        bounds: crate::dispersion::GridBounds::new(cfg.grid.first(), cfg.grid.last())?,
        widen_bounds: args.widen_bounds,
        averaging: if args.median {
            Averaging::Median
        } else {
            Averaging::Mean
        },
    };
    let metadata = MeasurementMetadata {
        measured_at: args.date,
        sample_thickness_mm: Some(args.thickness_mm),
    };
    let ingested = ingest_measurement_file(
        &args.input,
        args.method,
        parse_percent(&args.concentration)?,
        &metadata,
        &options,
    )?;
    for w in &ingested.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let label = ingested.sample.label();
    let points = ingested.sample.spectrum().len();
    db.insert(ingested.sample)?;
    db.save_dir(dir)?;
    Ok(format!("added {label} ({points} points) to {}\n", dir.display()))
}

fn cmd_aging(cfg: &CliConfig, method: Method, concentration: &str, from: NaiveDate, to: NaiveDate) -> Result<String> {
    let db = cfg.database()?;
    let c = parse_percent(concentration)?;
    let find = |d: NaiveDate| {
        db.find(method, c, Some(d))
            .ok_or_else(|| Error::Usage(format!("no {c} {method} measurement dated {d}")))
    };
    let report = aging_drift(find(from)?, find(to)?)?;
    let mut out = String::new();
    match cfg.format_or(OutputFormat::Markdown) {
        OutputFormat::Json => out = to_json(&report)?,
        OutputFormat::Csv => {
            out.push_str("frequency_hz,conductivity_change,permittivity_change\n");
            for ((f, s), e) in report
                .frequencies_hz
                .iter()
                .zip(&report.conductivity_change)
                .zip(&report.permittivity_change)
            {
                let _ = writeln!(out, "{f},{s},{e}");
            }
        }
        OutputFormat::Markdown => {
            let _ = writeln!(
                out,
                "{} {} from {from} to {to}: max |Δσ/σ| = {:.4}, max |Δεr/εr| = {:.4}",
                c,
                method.display_name(),
                report.max_abs_conductivity_change,
                report.max_abs_permittivity_change
            );
        }
    }
    Ok(out)
}
