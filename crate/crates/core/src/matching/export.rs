use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use super::{MatchBand, MatchReport};
use crate::dispersion::{PropertySelector, TissueId};

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{:.*e}", digits.saturating_sub(1), x).parse().unwrap_or(x)
}

/// Hz to MHz at three significant digits, printed without trailing zeros.
pub fn format_mhz(hz: f64) -> String {
    round_sig(hz / 1e6, 3).to_string()
}

#[derive(Serialize)]
struct ExportBand {
    method: &'static str,
    concentration: f64,
    fmin_mhz: f64,
    fmax_mhz: f64,
    worst_error: f64,
}

impl From<&MatchBand> for ExportBand {
    fn from(b: &MatchBand) -> Self {
        ExportBand {
            method: b.method.as_str(),
            concentration: b.concentration.fraction(),
            fmin_mhz: round_sig(b.fmin_hz / 1e6, 3),
            fmax_mhz: round_sig(b.fmax_hz / 1e6, 3),
            worst_error: round_sig(b.worst_error, 4),
        }
    }
}

#[derive(Serialize)]
struct ExportReport {
    threshold: f64,
    tissues: BTreeMap<&'static str, BTreeMap<&'static str, Vec<ExportBand>>>,
}

/// JSON nested as tissue → property → bands.
pub fn report_to_json(report: &MatchReport) -> String {
    let tissues = report
        .groups
        .iter()
        .map(|(tissue, groups)| {
            let inner = groups
                .iter()
                .map(|(p, bands)| (p.as_str(), bands.iter().map(ExportBand::from).collect()))
                .collect();
            (tissue.as_str(), inner)
        })
        .collect();
    let export = ExportReport {
        threshold: report.threshold,
        tissues,
    };
    serde_json::to_string_pretty(&export).expect("report serializes") + "\n"
}

/// One band per row.
pub fn report_to_csv(report: &MatchReport) -> String {
    let mut out = String::from("tissue,property,method,concentration,fmin_mhz,fmax_mhz,worst_error\n");
    for band in report.all_bands() {
        push_csv_row(&mut out, band);
    }
    out
}

pub(crate) fn push_csv_row(out: &mut String, band: &MatchBand) {
    let e = ExportBand::from(band);
    let _ = writeln!(
        out,
        "{},{},{},{},{},{},{}",
        band.tissue, band.property, e.method, e.concentration, e.fmin_mhz, e.fmax_mhz, e.worst_error
    );
}

pub(crate) fn sample_label(band: &MatchBand) -> String {
    format!("{} ({})", band.concentration, band.method.display_name())
}

/// Human-readable table, one row per band, `-` for empty groups.
pub fn report_to_markdown(report: &MatchReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# Tissue matches (error < {}%)\n",
        round_sig(report.threshold * 100.0, 4)
    );
    let _ = writeln!(
        out,
        "| Tissue | Property | Sample | Fmin (MHz) | Fmax (MHz) | Worst error |"
    );
    let _ = writeln!(out, "|---|---|---|---|---|---|");
    for (tissue, groups) in &report.groups {
        for property in PropertySelector::ALL {
            let bands = groups.get(&property).map(Vec::as_slice).unwrap_or(&[]);
            write_group(&mut out, *tissue, property, bands);
        }
    }
    out
}

fn write_group(out: &mut String, tissue: TissueId, property: PropertySelector, bands: &[MatchBand]) {
    if bands.is_empty() {
        let _ = writeln!(out, "| {} | {} | - | - | - | - |", tissue.display_name(), property);
        return;
    }
    for b in bands {
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} | {} | {:.3} |",
            tissue.display_name(),
            property,
            sample_label(b),
            format_mhz(b.fmin_hz),
            format_mhz(b.fmax_hz),
            b.worst_error
        );
    }
}
